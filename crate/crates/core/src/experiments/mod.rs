//! Monte Carlo estimators and closed-form bounds.
//!
//! Survival is censored at a finite horizon on a finite torus: a replicate
//! survives when it is not extinct at the horizon. Replicate `r` always
//! draws from stream `r` of the seed, so every estimator is a
//! deterministic function of its arguments whatever the thread count.

mod blocks;
mod hardcore;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, EventModel};
use crate::coupling::SiteBundle;
use crate::engine::{SimState, StopReason, StopRule};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::rng::replicate_rng;
use crate::stats::wilson;
use crate::torus::Torus;

pub use blocks::{bounds, doubling_probability, empty_block_probability, BlockResult, Bounds, DoublingResult};
pub use hardcore::{hardcore_stats, DecayFit, HardcoreSample, HardcoreStats, TailRow};

/// Interval method used for every proportion.
pub const INTERVAL_METHOD: &str = "wilson-95";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: u64,
    pub successes: u64,
    pub seed: u64,
    pub method: String,
}

impl Estimate {
    pub fn proportion(successes: u64, replicates: u64, seed: u64) -> Self {
        let (ci_low, ci_high) = wilson(successes, replicates);
        Estimate {
            value: if replicates == 0 {
                0.0
            } else {
                successes as f64 / replicates as f64
            },
            ci_low,
            ci_high,
            replicates,
            successes,
            seed,
            method: INTERVAL_METHOD.to_string(),
        }
    }

    /// The estimate of the complementary event.
    pub fn complement(&self) -> Self {
        Estimate::proportion(self.replicates - self.successes, self.replicates, self.seed)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// The torus center alone.
    SingleSeed,
    FullTorus,
    /// The cube `{0, 1}^d` placed at the torus center.
    BoxMinus,
}

impl Init {
    pub fn sites(&self, torus: &Torus) -> Vec<usize> {
        match self {
            Init::SingleSeed => vec![torus.center()],
            Init::FullTorus => (0..torus.len()).collect(),
            Init::BoxMinus => torus.translate(torus.center(), &cube_offsets(torus.dim(), 0, 1)),
        }
    }
}

/// All offsets in `{lo, ..., hi}^d`.
pub(crate) fn cube_offsets(d: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Settings shared by the survival estimators.
#[derive(Debug, Clone)]
pub struct SurvivalSpec {
    pub torus: Arc<Torus>,
    pub init: Init,
    pub horizon: f64,
    pub replicates: u64,
    pub seed: u64,
}

impl SurvivalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Params("replicates must be positive".into()));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Params(format!(
                "horizon must be finite and >= 0, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Whether one standalone replicate is alive at the horizon.
pub fn survives(params: &Params, spec: &SurvivalSpec, replicate: u64) -> Result<bool> {
    let mut config = Configuration::new(spec.torus.clone(), params.clone(), EventModel::auto(params))?;
    config.fill_sites(spec.init.sites(&spec.torus))?;
    let mut state = SimState::new(config, spec.seed, replicate);
    let out = state.run(&StopRule::horizon(spec.horizon), None)?;
    Ok(out.reason != StopReason::Extinct)
}

/// Fraction of independent replicates alive at the horizon.
pub fn estimate_survival(params: &Params, spec: &SurvivalSpec) -> Result<Estimate> {
    spec.validate()?;
    let alive = (0..spec.replicates)
        .into_par_iter()
        .map(|r| survives(params, spec, r))
        .collect::<Result<Vec<bool>>>()?;
    let k = alive.iter().filter(|a| **a).count() as u64;
    Ok(Estimate::proportion(k, spec.replicates, spec.seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrnSurvival {
    pub estimates: Vec<Estimate>,
    /// `alive[r][k]`: member `k` alive at the horizon in replicate `r`.
    pub alive: Vec<Vec<bool>>,
}

impl CrnSurvival {
    /// Replicates in which member `i` survives but member `j` does not.
    pub fn counterexamples(&self, i: usize, j: usize) -> usize {
        self.alive.iter().filter(|a| a[i] && !a[j]).count()
    }
}

/// Survival of every parameter set, all members of each replicate driven
/// by one basic coupling.
pub fn survival_crn(params: &[Params], spec: &SurvivalSpec) -> Result<CrnSurvival> {
    spec.validate()?;
    if params.is_empty() {
        return Err(Error::Params("no parameter sets given".into()));
    }
    let init = spec.init.sites(&spec.torus);
    let alive = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let mut b = SiteBundle::new(spec.torus.clone(), params.to_vec(), &init, replicate_rng(spec.seed, r))?;
            b.run_until(spec.horizon);
            Ok(b.members().iter().map(|m| m.population() > 0).collect())
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;
    let estimates = (0..params.len())
        .map(|k| {
            let s = alive.iter().filter(|a| a[k]).count() as u64;
            Estimate::proportion(s, spec.replicates, spec.seed)
        })
        .collect();
    Ok(CrnSurvival { estimates, alive })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub i_lambda: usize,
    pub i_a: usize,
    pub lambda: f64,
    pub a: f64,
    pub estimate: Estimate,
}

/// Survival over the grid `lambdas × payoffs` with every cell of a
/// replicate driven by one coupling. Cells are ordered with the payoff
/// index varying fastest.
pub fn phase_scan(lambdas: &[f64], payoffs: &[f64], spec: &SurvivalSpec) -> Result<Vec<PhaseCell>> {
    if lambdas.is_empty() || payoffs.is_empty() {
        return Err(Error::Params("phase grids must be nonempty".into()));
    }
    let d = spec.torus.dim();
    let mut params = Vec::new();
    let mut cells = Vec::new();
    for (i, &l) in lambdas.iter().enumerate() {
        for (j, &a) in payoffs.iter().enumerate() {
            params.push(Params::new(l, a, d)?);
            cells.push((i, j, l, a));
        }
    }
    let crn = survival_crn(&params, spec)?;
    Ok(cells
        .into_iter()
        .zip(crn.estimates)
        .map(|((i_lambda, i_a, lambda, a), estimate)| PhaseCell {
            i_lambda,
            i_a,
            lambda,
            a,
            estimate,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalBracket {
    pub a: f64,
    pub lo: f64,
    pub hi: f64,
    pub estimate_lo: Estimate,
    pub estimate_hi: Estimate,
    pub threshold: f64,
    /// Midpoint of the bracket measured at `a = 0`, when `a ≠ 0`.
    pub lambda_c0: Option<f64>,
    /// `[λ_c e^{-a(1-1/2d)} ∧ λ_c, λ_c ∨ λ_c e^{-a(1-1/2d)}]` from the
    /// measured `λ_c = λ_c(0)`.
    pub sandwich: Option<(f64, f64)>,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct LambdaCSpec {
    pub a: f64,
    pub survival: SurvivalSpec,
    pub threshold: f64,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl LambdaCSpec {
    pub fn new(a: f64, survival: SurvivalSpec) -> Self {
        LambdaCSpec {
            a,
            survival,
            threshold: 0.02,
            lo: 0.5,
            hi: 8.0,
            width: 0.05,
        }
    }
}

fn bisect_lambda(a: f64, spec: &LambdaCSpec) -> Result<(f64, f64, Estimate, Estimate)> {
    let d = spec.survival.torus.dim();
    let est = |l: f64| estimate_survival(&Params::new(l, a, d)?, &spec.survival);
    let (mut lo, mut hi) = (spec.lo, spec.hi);
    let mut tries = 0;
    let (mut elo, mut ehi) = loop {
        let (elo, ehi) = (est(lo)?, est(hi)?);
        if elo.value < spec.threshold && ehi.value >= spec.threshold {
            break (elo, ehi);
        }
        tries += 1;
        if tries > 3 {
            return Err(Error::Experiment(format!(
                "survival does not cross {} on [{lo}, {hi}] at a = {a}",
                spec.threshold
            )));
        }
        if elo.value >= spec.threshold {
            lo *= 0.5;
        }
        if ehi.value < spec.threshold {
            hi *= 2.0;
        }
    };
    while hi - lo >= spec.width {
        let mid = 0.5 * (lo + hi);
        let e = est(mid)?;
        if e.value < spec.threshold {
            lo = mid;
            elo = e;
        } else {
            hi = mid;
            ehi = e;
        }
    }
    Ok((lo, hi, elo, ehi))
}

/// Brackets `λ_c(a)` by bisection on the survival estimate crossing the
/// threshold.
pub fn estimate_lambda_c(spec: &LambdaCSpec) -> Result<CriticalBracket> {
    if !(spec.threshold > 0.0 && spec.threshold < 1.0) {
        return Err(Error::Params(format!(
            "threshold must lie in (0, 1), got {}",
            spec.threshold
        )));
    }
    if !(0.0 <= spec.lo && spec.lo < spec.hi) || !(spec.width > 0.0) {
        return Err(Error::Params("need 0 <= lo < hi and a positive width".into()));
    }
    spec.survival.validate()?;
    let (lo, hi, estimate_lo, estimate_hi) = bisect_lambda(spec.a, spec)?;
    let (lambda_c0, sandwich) = if spec.a == 0.0 {
        (None, None)
    } else {
        let (l0, h0, _, _) = bisect_lambda(0.0, spec)?;
        let c0 = 0.5 * (l0 + h0);
        let d = spec.survival.torus.dim() as f64;
        let other = c0 * (-spec.a * (1.0 - 1.0 / (2.0 * d))).exp();
        (Some(c0), Some((c0.min(other), c0.max(other))))
    };
    Ok(CriticalBracket {
        a: spec.a,
        lo,
        hi,
        estimate_lo,
        estimate_hi,
        threshold: spec.threshold,
        lambda_c0,
        sandwich,
        note: format!(
            "survival to t = {} on a torus of {} sites from {:?}, {} replicates; bracket width < {}",
            spec.survival.horizon,
            spec.survival.torus.len(),
            spec.survival.init,
            spec.survival.replicates,
            spec.width
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Boundary;

    fn spec(n: usize, init: Init, horizon: f64, replicates: u64) -> SurvivalSpec {
        SurvivalSpec {
            torus: Arc::new(Torus::cube(n, 1, Boundary::Periodic).unwrap()),
            init,
            horizon,
            replicates,
            seed: 17,
        }
    }

    #[test]
    fn no_births_means_no_survival() {
        let e = estimate_survival(
            &Params::contact(0.0, 1).unwrap(),
            &spec(50, Init::SingleSeed, 20.0, 200),
        )
        .unwrap();
        assert_eq!(e.value, 0.0);
        assert!(estimate_survival(&Params::contact(1.0, 1).unwrap(), &spec(50, Init::SingleSeed, 1.0, 0)).is_err());
    }

    #[test]
    fn hard_core_dies_out() {
        let e = estimate_survival(
            &Params::hard_core(3.0, 1).unwrap(),
            &spec(100, Init::SingleSeed, 1000.0, 300),
        )
        .unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn crn_survival_is_ordered() {
        let params = [Params::contact(2.0, 1).unwrap(), Params::contact(5.0, 1).unwrap()];
        let r = survival_crn(&params, &spec(100, Init::SingleSeed, 50.0, 300)).unwrap();
        assert_eq!(r.counterexamples(0, 1), 0);
        assert!(r.estimates[1].value >= r.estimates[0].value);
    }

    #[test]
    fn longer_horizons_never_add_survivors() {
        let p = Params::contact(3.5, 1).unwrap();
        let short = spec(60, Init::SingleSeed, 10.0, 100);
        let long = spec(60, Init::SingleSeed, 40.0, 100);
        for r in 0..100 {
            assert!(survives(&p, &short, r).unwrap() >= survives(&p, &long, r).unwrap());
        }
    }

    #[test]
    fn inits() {
        let t = Torus::cube(6, 2, Boundary::Periodic).unwrap();
        assert_eq!(Init::SingleSeed.sites(&t), vec![t.index_of(&[3, 3]).unwrap()]);
        assert_eq!(Init::FullTorus.sites(&t).len(), 36);
        let mut b = Init::BoxMinus.sites(&t);
        b.sort();
        let want: Vec<usize> = [[3, 3], [3, 4], [4, 3], [4, 4]]
            .iter()
            .map(|c| t.index_of(c).unwrap())
            .collect();
        assert_eq!(b, want);
    }

    #[test]
    fn phase_grid_layout() {
        let cells = phase_scan(&[1.0, 4.0], &[-1.0, 0.0, 1.0], &spec(40, Init::SingleSeed, 5.0, 20)).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(
            (cells[4].i_lambda, cells[4].i_a, cells[4].lambda, cells[4].a),
            (1, 1, 4.0, 0.0)
        );
    }

    #[test]
    fn estimates_are_reproducible() {
        let p = Params::new(3.0, 0.5, 1).unwrap();
        let s = spec(60, Init::SingleSeed, 30.0, 64);
        assert_eq!(estimate_survival(&p, &s).unwrap(), estimate_survival(&p, &s).unwrap());
    }
}
