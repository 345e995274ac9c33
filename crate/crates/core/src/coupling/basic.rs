//! Basic coupling of several processes through their fill rates.
//!
//! Site `x` carries rate `w(x) = 1{x occupied somewhere} + B(x)` where
//! `B(x)` is the largest fill rate `ψ_k(x)` among the members in which `x`
//! is empty. When `x` fires, a uniform `u ∈ [0, w(x))` is drawn: `u < 1`
//! kills `x` in every member (if `x` is occupied somewhere), and otherwise
//! `v = u − 1{...}` fills `x` in each member with `v < ψ_k(x)`. Every
//! member has its standalone law, and inclusions are preserved whenever
//! the fill rates are ordered along them.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::config::{Configuration, EventModel};
use crate::error::{Error, Result};
use crate::index::RateIndex;
use crate::params::Params;
use crate::rng::Rng;
use crate::torus::{Torus, NO_SITE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleEvent {
    Death {
        site: usize,
    },
    /// `site` was filled in the members listed by [`SiteBundle::filled`].
    Fill {
        site: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SiteBundle {
    torus: Arc<Torus>,
    members: Vec<Configuration>,
    occ_count: Vec<u16>,
    index: RateIndex,
    rng: Rng,
    time: f64,
    events: u64,
    filled: Vec<usize>,
    extinct_at: Vec<Option<f64>>,
    ball: Vec<usize>,
    rates: Vec<f64>,
}

impl SiteBundle {
    /// Every member starts from `init`.
    pub fn new(torus: Arc<Torus>, params: Vec<Params>, init: &[usize], rng: Rng) -> Result<Self> {
        let inits = vec![init.to_vec(); params.len()];
        Self::with_inits(torus, params, inits, None, rng)
    }

    /// Members with their own initial sets; births onto sites where
    /// `growth` is false are suppressed in every member.
    pub fn with_inits(
        torus: Arc<Torus>,
        params: Vec<Params>,
        inits: Vec<Vec<usize>>,
        growth: Option<Arc<[bool]>>,
        rng: Rng,
    ) -> Result<Self> {
        if params.len() != inits.len() || params.is_empty() {
            return Err(Error::Params("need one initial set per process".into()));
        }
        if params.len() > u16::MAX as usize {
            return Err(Error::Params("too many coupled processes".into()));
        }
        let mut members = Vec::with_capacity(params.len());
        for (p, init) in params.into_iter().zip(inits) {
            let mut c = Configuration::unindexed(torus.clone(), p, EventModel::Site)?;
            if let Some(g) = &growth {
                c.restrict_growth(g.clone())?;
            }
            c.fill_sites(init)?;
            members.push(c);
        }
        let n = torus.len();
        let extinct_at = members.iter().map(|m| (m.population() == 0).then_some(0.0)).collect();
        let mut bundle = SiteBundle {
            torus,
            members,
            occ_count: vec![0; n],
            index: RateIndex::new(n),
            rng,
            time: 0.0,
            events: 0,
            filled: Vec::new(),
            extinct_at,
            ball: Vec::new(),
            rates: Vec::new(),
        };
        let mut weights = vec![0.0; n];
        for (site, w) in weights.iter_mut().enumerate() {
            bundle.occ_count[site] = bundle.members.iter().filter(|m| m.is_occupied(site)).count() as u16;
            *w = bundle.weight_for(site);
        }
        bundle.index = RateIndex::from_weights(&weights);
        Ok(bundle)
    }

    pub fn members(&self) -> &[Configuration] {
        &self.members
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Members filled by the last [`BundleEvent::Fill`].
    pub fn filled(&self) -> &[usize] {
        &self.filled
    }

    /// Time at which member `k` first became empty.
    pub fn extinction_time(&self, k: usize) -> Option<f64> {
        self.extinct_at[k]
    }

    /// Whether every member is empty.
    pub fn all_extinct(&self) -> bool {
        self.index.total() == 0.0
    }

    fn bound(&self, site: usize) -> f64 {
        self.members
            .iter()
            .map(|m| m.effective_fill_rate(site))
            .fold(0.0, f64::max)
    }

    fn weight_for(&self, site: usize) -> f64 {
        (self.occ_count[site] > 0) as u8 as f64 + self.bound(site)
    }

    /// Runs one event if it happens before `horizon`; otherwise moves the
    /// clock to `horizon` and returns `None`.
    pub fn step_before(&mut self, horizon: f64) -> Option<BundleEvent> {
        let total = self.index.total();
        if total <= 0.0 {
            self.time = self.time.max(horizon);
            return None;
        }
        let e: f64 = Exp1.sample(&mut self.rng);
        if self.time + e / total > horizon {
            self.time = horizon;
            return None;
        }
        self.time += e / total;
        self.events += 1;

        let x = self.index.sample(self.rng.random::<f64>() * total);
        let w = self.index.get(x);
        let mut u = self.rng.random::<f64>() * w;
        self.filled.clear();
        let event = if self.occ_count[x] > 0 && u < 1.0 {
            for (k, m) in self.members.iter_mut().enumerate() {
                if m.is_occupied(x) {
                    m.set_occupied(x, false);
                    if m.population() == 0 {
                        self.extinct_at[k].get_or_insert(self.time);
                    }
                }
            }
            self.occ_count[x] = 0;
            BundleEvent::Death { site: x }
        } else {
            if self.occ_count[x] > 0 {
                u -= 1.0;
            }
            self.rates.clear();
            self.rates.extend(self.members.iter().map(|m| m.effective_fill_rate(x)));
            for (k, m) in self.members.iter_mut().enumerate() {
                if u < self.rates[k] {
                    m.set_occupied(x, true);
                    self.filled.push(k);
                }
            }
            self.occ_count[x] += self.filled.len() as u16;
            BundleEvent::Fill { site: x }
        };
        self.refresh_ball(x);
        Some(event)
    }

    /// Recomputes the weights of every site within graph distance two of
    /// `x`, the sites whose fill rates read `x`'s neighborhood.
    fn refresh_ball(&mut self, x: usize) {
        let torus = self.torus.clone();
        let mut ball = std::mem::take(&mut self.ball);
        ball.clear();
        ball.push(x);
        for &n in torus.neighbors(x) {
            if n == NO_SITE {
                continue;
            }
            ball.push(n as usize);
            for &m in torus.neighbors(n as usize) {
                if m != NO_SITE {
                    ball.push(m as usize);
                }
            }
        }
        for &s in &ball {
            let w = self.weight_for(s);
            self.index.set(s, w);
        }
        self.ball = ball;
    }

    /// Advances to `horizon`, or until every member is empty.
    pub fn run_until(&mut self, horizon: f64) {
        while self.step_before(horizon).is_some() {}
    }
}
