//! The mean-field equation `u' = φ(u) = λe^{au}u(1 − u) − u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID: usize = 10_000;
const ROOT_TOL: f64 = 1e-12;
const MERGE_TOL: f64 = 1e-6;

pub fn phi(lambda: f64, a: f64, u: f64) -> f64 {
    lambda * (a * u).exp() * u * (1.0 - u) - u
}

pub fn dphi(lambda: f64, a: f64, u: f64) -> f64 {
    lambda * (a * u).exp() * (a * u * (1.0 - u) + 1.0 - 2.0 * u) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    GlobalExtinction,
    Bistable,
    InteriorStable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub u: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldReport {
    pub lambda: f64,
    pub a: f64,
    /// Increasing in `u`; the first entry is always `u = 0`.
    pub fixed_points: Vec<FixedPoint>,
    pub regime: Regime,
}

impl MeanFieldReport {
    /// The unstable interior root separating the basins, if bistable.
    pub fn u_minus(&self) -> Option<f64> {
        (self.regime == Regime::Bistable)
            .then(|| {
                self.interior()
                    .find(|p| p.stability == Stability::Unstable)
                    .map(|p| p.u)
            })
            .flatten()
    }

    /// The largest stable interior root.
    pub fn u_plus(&self) -> Option<f64> {
        self.interior()
            .filter(|p| p.stability == Stability::Stable)
            .map(|p| p.u)
            .next_back()
    }

    fn interior(&self) -> impl DoubleEndedIterator<Item = &FixedPoint> {
        self.fixed_points.iter().skip(1)
    }
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of `φ` on `[0, 1)` with their stability.
pub fn fixed_points(lambda: f64, a: f64) -> Result<MeanFieldReport> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::MeanField(format!("lambda must be positive, got {lambda}")));
    }
    if !a.is_finite() {
        return Err(Error::MeanField(format!("payoff must be finite, got {a}")));
    }
    // interior roots of φ(u)/u
    let g = |u: f64| lambda * (a * u).exp() * (1.0 - u) - 1.0;
    let mut roots: Vec<f64> = Vec::new();
    let h = 1.0 / GRID as f64;
    let mut prev = g(h);
    if prev == 0.0 {
        roots.push(h);
    }
    for i in 2..GRID {
        let u = i as f64 * h;
        let cur = g(u);
        if cur == 0.0 {
            roots.push(u);
        } else if prev != 0.0 && (cur < 0.0) != (prev < 0.0) {
            roots.push(bisect(u - h, u, g));
        }
        prev = cur;
    }
    // roots closer to the origin than the first grid cell
    if g(0.0) * g(h) < 0.0 {
        roots.insert(0, bisect(0.0, h, g));
    }

    let mut interior: Vec<FixedPoint> = Vec::new();
    for u in roots {
        if let Some(last) = interior.last_mut() {
            if u - last.u < MERGE_TOL {
                last.u = 0.5 * (last.u + u);
                last.stability = Stability::Degenerate;
                continue;
            }
        }
        let slope = dphi(lambda, a, u);
        let stability = if slope < 0.0 {
            Stability::Stable
        } else if slope > 0.0 {
            Stability::Unstable
        } else {
            Stability::Degenerate
        };
        interior.push(FixedPoint { u, stability });
    }

    let origin = if lambda < 1.0 {
        Stability::Stable
    } else if lambda > 1.0 {
        Stability::Unstable
    } else {
        Stability::Degenerate
    };
    // φ(u) ≈ (λ − 1)u + (a − 1)u² near the origin when λ = 1
    let origin_attracts = lambda < 1.0 || (lambda == 1.0 && a <= 1.0);
    let stable_interior = interior.iter().any(|p| p.stability == Stability::Stable);
    let regime = match (stable_interior, origin_attracts) {
        (true, true) => Regime::Bistable,
        (true, false) => Regime::InteriorStable,
        (false, _) => Regime::GlobalExtinction,
    };

    let mut fixed_points = vec![FixedPoint {
        u: 0.0,
        stability: origin,
    }];
    fixed_points.extend(interior);
    Ok(MeanFieldReport {
        lambda,
        a,
        fixed_points,
        regime,
    })
}

/// The positive root of `λe^x = 1 + x` for `0 < λ < 1`; zero at `λ = 1`.
pub fn x_lambda(lambda: f64) -> Result<f64> {
    if lambda == 1.0 {
        return Ok(0.0);
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::MeanField(format!(
            "x_lambda needs 0 < lambda <= 1, got {lambda}"
        )));
    }
    let f = |x: f64| lambda * x.exp() - 1.0 - x;
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::MeanField("no sign change for x_lambda".into()));
        }
    }
    Ok(bisect(0.0, hi, f))
}

/// `a_c(λ) = 1 + x_λ`, the payoff above which the mean-field model is
/// bistable.
pub fn a_critical(lambda: f64) -> Result<f64> {
    Ok(1.0 + x_lambda(lambda)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BistabilityPoint {
    pub lambda: f64,
    pub x_lambda: f64,
    /// The double root of `φ` at `a = a_c`.
    pub u0: f64,
    pub a_c: f64,
}

pub fn bistability_point(lambda: f64) -> Result<BistabilityPoint> {
    let x = x_lambda(lambda)?;
    Ok(BistabilityPoint {
        lambda,
        x_lambda: x,
        u0: 1.0 - (-x).exp() / lambda,
        a_c: 1.0 + x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("a trajectory has its initial value")
    }
}

/// Classical fourth-order Runge–Kutta with a fixed step; the last step is
/// shortened to land on `t_end`. Values are clamped to `[0, 1]`.
pub fn integrate(lambda: f64, a: f64, u0: f64, t_end: f64, step: f64) -> Result<Trajectory> {
    if !(step > 0.0) {
        return Err(Error::MeanField(format!("step must be positive, got {step}")));
    }
    if !(0.0..=1.0).contains(&u0) {
        return Err(Error::MeanField(format!("u0 must lie in [0, 1], got {u0}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::MeanField(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    let f = |u: f64| phi(lambda, a, u);
    let n = (t_end / step).ceil() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut u = u0;
    times.push(0.0);
    values.push(u);
    for i in 0..n {
        let t = i as f64 * step;
        let h = step.min(t_end - t);
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        u = (u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0);
        times.push(if i + 1 == n { t_end } else { t + h });
        values.push(u);
    }
    Ok(Trajectory { times, values })
}
