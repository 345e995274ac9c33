//! Thinned graphical representation shared by several processes.
//!
//! Each site carries death marks at rate one and each directed edge
//! carries arrows at rate `D/2d` with a uniform mark `U`. An arrow `x → y`
//! gives birth in process `k` when `x` is occupied there and
//! `U·D < Φ_k(x)`. Marks on sites that are empty in every process have no
//! effect, so the stream is only realized on the union of the occupied
//! sets: each union site fires at rate `D + 1`, the event being a death
//! with probability `1/(D + 1)` and otherwise an arrow in a uniform
//! direction.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, EventModel};
use crate::error::{Error, Result};
use crate::params::{Params, Variant};
use crate::rng::{replicate_rng, Rng};
use crate::torus::{Torus, NO_SITE};

/// Where and when containment first failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub site: Vec<i64>,
    pub time: f64,
}

/// Containment of member `subset` in member `superset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub subset: usize,
    pub superset: usize,
    /// Events after which containment failed.
    pub violations: u64,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub horizon: f64,
    pub final_time: f64,
    pub events: u64,
    /// Sum of the per-pair violation counts.
    pub violations: u64,
    pub first_violation: Option<Violation>,
    /// Arrows whose tail is occupied in both members of a pair with a
    /// larger rate in the subset process while the head is empty in the
    /// superset process.
    pub threshold_inversions: u64,
    /// Same, but with the head already occupied in the superset process,
    /// so the arrow cannot break containment.
    pub harmless_inversions: u64,
    pub pairs: Vec<PairReport>,
    pub trace_times: Vec<f64>,
    /// Population of every member at each trace time.
    pub traces: Vec<Vec<usize>>,
    pub final_populations: Vec<usize>,
}

/// Several processes driven by one stream of arrows and death marks.
#[derive(Debug, Clone)]
pub struct ArrowBundle {
    torus: Arc<Torus>,
    members: Vec<Configuration>,
    dominating: f64,
    occ_count: Vec<u16>,
    union: Vec<usize>,
    pos: Vec<u32>,
    pairs: Vec<(usize, usize)>,
    bad: Vec<usize>,
    reports: Vec<PairReport>,
    threshold_inversions: u64,
    harmless_inversions: u64,
    rng: Rng,
    time: f64,
    events: u64,
}

impl ArrowBundle {
    /// `pairs` lists `(subset, superset)` member indices whose containment
    /// is tracked.
    pub fn new(
        torus: Arc<Torus>,
        params: Vec<Params>,
        inits: Vec<Vec<usize>>,
        pairs: Vec<(usize, usize)>,
        rng: Rng,
    ) -> Result<Self> {
        if params.len() != inits.len() || params.is_empty() {
            return Err(Error::Params("need one initial set per process".into()));
        }
        if params.len() > u16::MAX as usize {
            return Err(Error::Params("too many coupled processes".into()));
        }
        let dominating = params.iter().map(Params::max_birth_rate).fold(0.0, f64::max);
        let mut members = Vec::with_capacity(params.len());
        for (p, init) in params.into_iter().zip(inits) {
            let mut c = Configuration::unindexed(torus.clone(), p, EventModel::Player)?;
            c.fill_sites(init)?;
            members.push(c);
        }
        for &(i, j) in &pairs {
            if i >= members.len() || j >= members.len() {
                return Err(Error::Params(format!("pair ({i}, {j}) names a missing process")));
            }
        }
        let n = torus.len();
        let mut bundle = ArrowBundle {
            torus,
            dominating,
            occ_count: vec![0; n],
            union: Vec::new(),
            pos: vec![u32::MAX; n],
            bad: vec![0; pairs.len()],
            reports: pairs
                .iter()
                .map(|&(subset, superset)| PairReport {
                    subset,
                    superset,
                    violations: 0,
                    first_violation: None,
                })
                .collect(),
            pairs,
            members,
            threshold_inversions: 0,
            harmless_inversions: 0,
            rng,
            time: 0.0,
            events: 0,
        };
        for site in 0..n {
            bundle.sync_site(site);
            for (p, &(i, j)) in bundle.pairs.iter().enumerate() {
                if bundle.members[i].is_occupied(site) && !bundle.members[j].is_occupied(site) {
                    bundle.bad[p] += 1;
                }
            }
        }
        bundle.tally(None);
        Ok(bundle)
    }

    pub fn members(&self) -> &[Configuration] {
        &self.members
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dominating_rate(&self) -> f64 {
        self.dominating
    }

    fn sync_site(&mut self, site: usize) {
        let count = self.members.iter().filter(|m| m.is_occupied(site)).count() as u16;
        self.occ_count[site] = count;
        let listed = self.pos[site] != u32::MAX;
        if count > 0 && !listed {
            self.pos[site] = self.union.len() as u32;
            self.union.push(site);
        } else if count == 0 && listed {
            let at = self.pos[site] as usize;
            self.union.swap_remove(at);
            if at < self.union.len() {
                self.pos[self.union[at]] = at as u32;
            }
            self.pos[site] = u32::MAX;
        }
    }

    fn violates(&self, p: usize, site: usize) -> bool {
        let (i, j) = self.pairs[p];
        self.members[i].is_occupied(site) && !self.members[j].is_occupied(site)
    }

    fn tally(&mut self, site: Option<usize>) {
        for p in 0..self.pairs.len() {
            if self.bad[p] == 0 {
                continue;
            }
            let r = &mut self.reports[p];
            r.violations += 1;
            if r.first_violation.is_none() {
                let site = site.unwrap_or_else(|| {
                    (0..self.torus.len())
                        .find(|s| {
                            let (i, j) = self.pairs[p];
                            self.members[i].is_occupied(*s) && !self.members[j].is_occupied(*s)
                        })
                        .unwrap_or(0)
                });
                r.first_violation = Some(Violation {
                    site: self.torus.coords(site),
                    time: self.time,
                });
            }
        }
    }

    /// Applies `change` to `site` while keeping the per-pair violation
    /// counts current.
    fn update_site(&mut self, site: usize, change: impl FnOnce(&mut Self)) {
        for p in 0..self.pairs.len() {
            if self.violates(p, site) {
                self.bad[p] -= 1;
            }
        }
        change(self);
        for p in 0..self.pairs.len() {
            if self.violates(p, site) {
                self.bad[p] += 1;
            }
        }
        self.sync_site(site);
    }

    /// Runs one event if it happens before `horizon`; otherwise moves the
    /// clock to `horizon` and returns false.
    pub fn step_before(&mut self, horizon: f64) -> bool {
        if self.union.is_empty() {
            self.time = self.time.max(horizon);
            return false;
        }
        let per_site = self.dominating + 1.0;
        let rate = per_site * self.union.len() as f64;
        let e: f64 = Exp1.sample(&mut self.rng);
        if self.time + e / rate > horizon {
            self.time = horizon;
            return false;
        }
        self.time += e / rate;
        self.events += 1;

        let x = self.union[self.rng.random_range(0..self.union.len())];
        let site = if self.rng.random::<f64>() * per_site < 1.0 {
            self.update_site(x, |b| {
                for m in &mut b.members {
                    m.set_occupied(x, false);
                }
            });
            x
        } else {
            let slot = self.rng.random_range(0..self.torus.coordination());
            let threshold = self.rng.random::<f64>() * self.dominating;
            let y = self.torus.neighbors(x)[slot];
            if y == NO_SITE {
                return true;
            }
            let y = y as usize;
            for &(i, j) in &self.pairs {
                let (mi, mj) = (&self.members[i], &self.members[j]);
                if mi.is_occupied(x) && mj.is_occupied(x) && mi.cached_rate(x) > mj.cached_rate(x) {
                    if mj.is_occupied(y) {
                        self.harmless_inversions += 1;
                    } else {
                        self.threshold_inversions += 1;
                    }
                }
            }
            self.update_site(y, |b| {
                for m in &mut b.members {
                    if m.is_occupied(x) && threshold < m.cached_rate(x) && m.can_grow(y) {
                        m.set_occupied(y, true);
                    }
                }
            });
            y
        };
        self.tally(Some(site));
        true
    }

    /// Runs to `horizon`, sampling populations at `trace_points + 1`
    /// evenly spaced times.
    pub fn run(mut self, horizon: f64, trace_points: usize) -> ContainmentReport {
        let n = trace_points.max(1);
        let trace_times: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        let mut traces = Vec::with_capacity(trace_times.len());
        for &t in &trace_times {
            while self.step_before(t) {}
            traces.push(self.members.iter().map(Configuration::population).collect());
        }
        let first_violation = self
            .reports
            .iter()
            .filter_map(|r| r.first_violation.clone())
            .min_by(|a, b| a.time.total_cmp(&b.time));
        ContainmentReport {
            horizon,
            final_time: self.time,
            events: self.events,
            violations: self.reports.iter().map(|r| r.violations).sum(),
            first_violation,
            threshold_inversions: self.threshold_inversions,
            harmless_inversions: self.harmless_inversions,
            final_populations: self.members.iter().map(Configuration::population).collect(),
            pairs: self.reports,
            trace_times,
            traces,
        }
    }
}

fn check_order(p1: &Params, p2: &Params) -> Result<()> {
    if p1.dim() != p2.dim() {
        return Err(Error::ParameterOrder("processes live in different dimensions".into()));
    }
    if p1.variant() != Variant::Standard || p2.variant() != Variant::Standard {
        return Err(Error::ParameterOrder(
            "both processes must use the standard rule".into(),
        ));
    }
    if !(p1.lambda() <= p2.lambda()) {
        return Err(Error::ParameterOrder(format!(
            "need lambda1 <= lambda2, got {} > {}",
            p1.lambda(),
            p2.lambda()
        )));
    }
    if !(p1.payoff().max(0.0) <= p2.payoff()) {
        return Err(Error::ParameterOrder(format!(
            "need max(a1, 0) <= a2, got a1 = {}, a2 = {}",
            p1.payoff(),
            p2.payoff()
        )));
    }
    Ok(())
}

/// Couples `p1` below `p2`; requires `λ1 ≤ λ2`, `a1 ∨ 0 ≤ a2` and
/// `init1 ⊆ init2`.
#[allow(clippy::too_many_arguments)]
pub fn evolve_coupled_pair(
    p1: &Params,
    p2: &Params,
    init1: &[usize],
    init2: &[usize],
    torus: Arc<Torus>,
    horizon: f64,
    seed: u64,
    replicate: u64,
) -> Result<ContainmentReport> {
    check_order(p1, p2)?;
    let mut sup = vec![false; torus.len()];
    for &s in init2 {
        if s < sup.len() {
            sup[s] = true;
        }
    }
    if let Some(s) = init1.iter().find(|s| !sup.get(**s).copied().unwrap_or(false)) {
        return Err(Error::ParameterOrder(format!(
            "initial site {s} of the first process is missing from the second"
        )));
    }
    let bundle = ArrowBundle::new(
        torus,
        vec![p1.clone(), p2.clone()],
        vec![init1.to_vec(), init2.to_vec()],
        vec![(0, 1)],
        replicate_rng(seed, replicate),
    )?;
    Ok(bundle.run(horizon, 100))
}

/// The three processes `η` (contact, `λ`), `ξ` (`λ`, `a`) and `ζ`
/// (contact, `λe^{a(1−1/2d)}`), members 0, 1 and 2. For `a ≤ 0` the
/// tracked pairs are `ζ ⊆ ξ` and `ξ ⊆ η`; for `a ≥ 0` they are `η ⊆ ξ`
/// and `ξ ⊆ ζ`.
pub fn evolve_sandwich(
    lambda: f64,
    a: f64,
    torus: Arc<Torus>,
    init: &[usize],
    horizon: f64,
    seed: u64,
    replicate: u64,
) -> Result<ContainmentReport> {
    if a == f64::NEG_INFINITY {
        return Err(Error::unsupported(
            "coupling",
            "the sandwich needs a finite payoff; use the non-interacting comparison at a = -inf",
        ));
    }
    let d = torus.dim();
    let eta = Params::contact(lambda, d)?;
    let xi = Params::new(lambda, a, d)?;
    let zeta = Params::contact(lambda * (a * (1.0 - 1.0 / (2 * d) as f64)).exp(), d)?;
    let pairs = if a <= 0.0 {
        vec![(2, 1), (1, 0)]
    } else {
        vec![(0, 1), (1, 2)]
    };
    let bundle = ArrowBundle::new(
        torus,
        vec![eta, xi, zeta],
        vec![init.to_vec(); 3],
        pairs,
        replicate_rng(seed, replicate),
    )?;
    Ok(bundle.run(horizon, 100))
}
