//! Block events: doubling of a small cube under strong cooperation and
//! empty space-time blocks under strong competition, with the matching
//! closed-form bounds.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{BundleEvent, SiteBundle};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::rng::replicate_rng;
use crate::torus::{Boundary, Torus};

use super::{cube_offsets, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub epsilon: f64,
    pub d: usize,
    pub lambda: f64,
    pub a: f64,
    pub l: usize,
    pub tau: f64,
    /// `e^{-4^d τ}`, the probability of no death mark in `Λ₊ × [0, τ]`.
    pub no_death: f64,
    /// `(1 − exp(−λτe^{a/2d}/2d²))^{4^d}`.
    pub stage_bound: f64,
    /// `1 − d(1 − stage_bound) − (1 − no_death)`.
    pub lemma_bound: f64,
    /// Smallest payoff with `stage_bound ≥ 1 − ε/2d`.
    pub a_plus: f64,
    /// `2L(4L+1)^d · 2λe^{a/2d}`.
    pub poisson_parameter: f64,
    /// `P[X = 0] = e^{-poisson_parameter}`.
    pub poisson_agreement: f64,
}

/// `τ = −ln(1 − ε/2)/4^d`.
pub fn tau_for(epsilon: f64, d: usize) -> f64 {
    -(1.0 - epsilon / 2.0).ln() / 4f64.powi(d as i32)
}

pub fn bounds(epsilon: f64, d: usize, lambda: f64, a: f64, l: usize, tau: Option<f64>) -> Result<Bounds> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Experiment(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if d == 0 {
        return Err(Error::Experiment("dimension must be >= 1".into()));
    }
    if !(lambda >= 0.0) || a.is_nan() {
        return Err(Error::Experiment("need lambda >= 0 and a payoff".into()));
    }
    let tau = tau.unwrap_or_else(|| tau_for(epsilon, d));
    if !(tau > 0.0) {
        return Err(Error::Experiment(format!("tau must be positive, got {tau}")));
    }
    let df = d as f64;
    let cells = 4f64.powi(d as i32);
    let c = lambda * tau / (2.0 * df * df);
    let stage_bound = (-(-c * (a / (2.0 * df)).exp()).exp_m1()).powf(cells);
    let no_death = (-cells * tau).exp();
    let target = 1.0 - epsilon / (2.0 * df);
    let a_plus = 2.0 * df * ((-(-target.powf(1.0 / cells)).ln_1p()).ln() - c.ln());
    let poisson_parameter =
        2.0 * l as f64 * (4.0 * l as f64 + 1.0).powi(d as i32) * 2.0 * lambda * (a / (2.0 * df)).exp();
    Ok(Bounds {
        epsilon,
        d,
        lambda,
        a,
        l,
        tau,
        no_death,
        stage_bound,
        lemma_bound: 1.0 - df * (1.0 - stage_bound) - (1.0 - no_death),
        a_plus,
        poisson_parameter,
        poisson_agreement: (-poisson_parameter).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingResult {
    pub a: f64,
    pub estimate: Estimate,
    pub bounds: Bounds,
}

/// Probability that the floor-rate process started from `Λ₋ = {0,1}^d`,
/// with births outside `Λ₊ = {−1,...,2}^d` suppressed, fills `Λ₊` by time
/// `τ`. All payoffs of a replicate share one coupling.
pub fn doubling_probability(
    lambda: f64,
    payoffs: &[f64],
    epsilon: f64,
    d: usize,
    replicates: u64,
    seed: u64,
) -> Result<Vec<DoublingResult>> {
    if let Some(a) = payoffs.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::Experiment(format!(
            "doubling needs a >= 0, where the process is attractive; got {a}"
        )));
    }
    if payoffs.is_empty() || replicates == 0 {
        return Err(Error::Params("need payoffs and a positive replicate count".into()));
    }
    let tau = tau_for(epsilon, d);
    let all_bounds = payoffs
        .iter()
        .map(|a| bounds(epsilon, d, lambda, *a, 1, Some(tau)))
        .collect::<Result<Vec<_>>>()?;
    let torus = Arc::new(Torus::cube(8, d, Boundary::Periodic)?);
    let origin = torus.center();
    let minus = torus.translate(origin, &cube_offsets(d, 0, 1));
    let plus = torus.translate(origin, &cube_offsets(d, -1, 2));
    let mut mask = vec![false; torus.len()];
    for s in &plus {
        mask[*s] = true;
    }
    let mask: Arc<[bool]> = mask.into();
    let params = payoffs
        .iter()
        .map(|a| Params::floor_rate(lambda, *a, d))
        .collect::<Result<Vec<_>>>()?;

    let full = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut b = SiteBundle::with_inits(
                torus.clone(),
                params.clone(),
                vec![minus.clone(); params.len()],
                Some(mask.clone()),
                replicate_rng(seed, r),
            )?;
            b.run_until(tau);
            Ok(b.members()
                .iter()
                .map(|m| plus.iter().all(|s| m.is_occupied(*s)))
                .collect())
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;

    Ok(payoffs
        .iter()
        .zip(all_bounds)
        .enumerate()
        .map(|(k, (a, bounds))| {
            let s = full.iter().filter(|f| f[k]).count() as u64;
            DoublingResult {
                a: *a,
                estimate: Estimate::proportion(s, replicates, seed),
                bounds,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResult {
    pub a: f64,
    pub estimate: Estimate,
    pub poisson_agreement: f64,
}

/// Probability that `B = [−L, L]^d × [L, 2L]` stays empty when the
/// process starts from a fully occupied periodic torus of side `side`
/// (default `8L`), `B` centered on the torus. All payoffs of a replicate
/// share one coupling.
pub fn empty_block_probability(
    lambda: f64,
    payoffs: &[f64],
    l: usize,
    d: usize,
    side: Option<usize>,
    replicates: u64,
    seed: u64,
) -> Result<Vec<BlockResult>> {
    if l < 1 {
        return Err(Error::Params("block scale L must be >= 1".into()));
    }
    if let Some(a) = payoffs.iter().find(|a| !(**a < 0.0)) {
        return Err(Error::Experiment(format!("empty blocks need a in [-inf, 0), got {a}")));
    }
    if payoffs.is_empty() || replicates == 0 {
        return Err(Error::Params("need payoffs and a positive replicate count".into()));
    }
    let side = side.unwrap_or(8 * l);
    if side < 2 * l + 1 {
        return Err(Error::Params(format!(
            "torus side {side} cannot hold a block of radius {l}"
        )));
    }
    let torus = Arc::new(Torus::cube(side, d, Boundary::Periodic)?);
    let block = torus.translate(torus.center(), &cube_offsets(d, -(l as i64), l as i64));
    let mut in_block = vec![false; torus.len()];
    for s in &block {
        in_block[*s] = true;
    }
    let params = payoffs
        .iter()
        .map(|a| Params::new(lambda, *a, d))
        .collect::<Result<Vec<_>>>()?;
    let full: Vec<usize> = (0..torus.len()).collect();
    let (start, end) = (l as f64, 2.0 * l as f64);

    let empty = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut b = SiteBundle::new(torus.clone(), params.clone(), &full, replicate_rng(seed, r))?;
            b.run_until(start);
            let mut empty: Vec<bool> = b
                .members()
                .iter()
                .map(|m| block.iter().all(|s| !m.is_occupied(*s)))
                .collect();
            while let Some(ev) = b.step_before(end) {
                if let BundleEvent::Fill { site } = ev {
                    if in_block[site] {
                        for &k in b.filled() {
                            empty[k] = false;
                        }
                    }
                }
                if empty.iter().all(|e| !e) {
                    break;
                }
            }
            Ok(empty)
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;

    Ok(payoffs
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let s = empty.iter().filter(|e| e[k]).count() as u64;
            let mu =
                2.0 * l as f64 * (4.0 * l as f64 + 1.0).powi(d as i32) * 2.0 * lambda * (a / (2.0 * d as f64)).exp();
            BlockResult {
                a: *a,
                estimate: Estimate::proportion(s, replicates, seed),
                poisson_agreement: (-mu).exp(),
            }
        })
        .collect())
}
