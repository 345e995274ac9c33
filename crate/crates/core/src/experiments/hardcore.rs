//! Statistics of the hard-core process started from one player.
//!
//! From a single seed the process alternates between one isolated player
//! and an adjacent pair, so the number `N` of births satisfies
//! `P[N ≥ n] = (λ/(1+λ))^n` exactly.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, EventModel};
use crate::engine::{SimState, StopReason, StopRule};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::stats::{chi_square, TestResult};
use crate::torus::{Boundary, Torus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardcoreSample {
    /// Births before extinction, `N`.
    pub generations: u64,
    /// Extinction time `T`.
    pub extinction_time: f64,
    /// Sites ever occupied, `|ξ⁰|`.
    pub ever_occupied: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: u64,
    /// Fraction of replicates with `N ≥ n`.
    pub empirical_tail: f64,
    /// `(λ/(1+λ))^n`.
    pub geometric_tail: f64,
}

/// Least-squares line through `log P[X ≥ x]` over `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardcoreStats {
    pub lambda: f64,
    pub seed: u64,
    pub samples: Vec<HardcoreSample>,
}

/// Empirical `P[X ≥ x]` of a sorted sample.
fn tail_at(sorted: &[f64], x: f64) -> f64 {
    let below = sorted.partition_point(|v| *v < x);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

fn fit_tail(mut values: Vec<f64>, points: usize) -> Option<DecayFit> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n < 400 {
        return None;
    }
    let x_min = values[n / 2];
    let x_max = values[n - 200];
    if !(x_max > x_min) {
        return None;
    }
    let xs: Vec<f64> = (0..points)
        .map(|i| x_min + (x_max - x_min) * i as f64 / (points - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|x| tail_at(&values, *x).ln()).collect();
    let m = points as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Some(DecayFit {
        rate: -slope,
        intercept: my - slope * mx,
        x_min,
        x_max,
    })
}

impl HardcoreStats {
    pub fn ratio(&self) -> f64 {
        self.lambda / (1.0 + self.lambda)
    }

    pub fn generation_tail(&self) -> Vec<TailRow> {
        let n = self.samples.len() as f64;
        let max = self.samples.iter().map(|s| s.generations).max().unwrap_or(0);
        (0..=max + 1)
            .map(|k| TailRow {
                n: k,
                empirical_tail: self.samples.iter().filter(|s| s.generations >= k).count() as f64 / n,
                geometric_tail: self.ratio().powi(k as i32),
            })
            .collect()
    }

    /// Chi-square test of `N` against the geometric law, with every bin
    /// and the pooled tail bin expecting at least five replicates.
    pub fn generation_gof(&self) -> TestResult {
        let q = self.ratio();
        let n = self.samples.len() as f64;
        let mut bins = 1u64;
        while n * (1.0 - q) * q.powi(bins as i32) >= 5.0 && n * q.powi(bins as i32 + 1) >= 5.0 {
            bins += 1;
        }
        let mut observed = vec![0u64; bins as usize + 1];
        for s in &self.samples {
            observed[s.generations.min(bins) as usize] += 1;
        }
        let mut probs: Vec<f64> = (0..bins).map(|k| (1.0 - q) * q.powi(k as i32)).collect();
        probs.push(q.powi(bins as i32));
        chi_square(&observed, &probs)
    }

    /// `max(|ξ⁰| − (N + 1))` over the replicates.
    pub fn max_excess(&self) -> i64 {
        self.samples
            .iter()
            .map(|s| s.ever_occupied as i64 - s.generations as i64 - 1)
            .max()
            .unwrap_or(i64::MIN)
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.extinction_time).collect()
    }

    /// Empirical `P[T ≥ t]` at each grid time.
    pub fn time_tail(&self, grid: &[f64]) -> Vec<f64> {
        let mut t = self.times();
        t.sort_by(f64::total_cmp);
        grid.iter().map(|x| tail_at(&t, *x)).collect()
    }

    /// Exponential decay fitted to the upper half of `T`, down to the last
    /// 200 replicates.
    pub fn time_decay(&self) -> Option<DecayFit> {
        fit_tail(self.times(), 50)
    }

    /// Same for `|ξ⁰|`.
    pub fn space_decay(&self) -> Option<DecayFit> {
        fit_tail(self.samples.iter().map(|s| s.ever_occupied as f64).collect(), 50)
    }
}

/// Runs the hard-core process from the center of a periodic torus of side
/// `side` until extinction, `replicates` times.
pub fn hardcore_stats(lambda: f64, dim: usize, side: usize, replicates: u64, seed: u64) -> Result<HardcoreStats> {
    if replicates == 0 {
        return Err(Error::Params("replicates must be positive".into()));
    }
    let params = Params::hard_core(lambda, dim)?;
    let torus = Arc::new(Torus::cube(side, dim, Boundary::Periodic)?);
    let rule = StopRule {
        stop_on_extinction: true,
        ..Default::default()
    };
    let samples = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut c = Configuration::new(torus.clone(), params.clone(), EventModel::Player)?;
            c.occupy(torus.center())?;
            let mut s = SimState::new(c, seed, r);
            let out = s.run(&rule, None)?;
            debug_assert_eq!(out.reason, StopReason::Extinct);
            Ok(HardcoreSample {
                generations: out.births,
                extinction_time: out.final_time,
                ever_occupied: out.ever_occupied_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HardcoreStats { lambda, seed, samples })
}
