//! Occupancy state with incrementally maintained rates.
//!
//! A [`Configuration`] stores, per site, the occupancy bit, the number of
//! occupied neighbors, the cached birth rate `Φ` of the player there and the
//! weight of the site in the event-sampling index. Every flip recomputes the
//! cached values of the flipped site and of a bounded neighborhood around
//! it, from the integer neighbor counts, so caches never accumulate error.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fmt::fmt17;
use crate::index::RateIndex;
use crate::params::Params;
use crate::torus::{Boundary, Torus, NO_SITE};

/// How the generator is decomposed into sampled events.
///
/// Both decompositions have the same law; they differ in which events are
/// materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventModel {
    /// Each occupied site carries rate `1 + Φ`: it dies, or it fires a birth
    /// toward a uniform neighbor, which is a no-op when that neighbor is
    /// already occupied.
    Player,
    /// Each occupied site carries its death rate 1 and each empty site its
    /// fill rate `ψ = Σ_{y∼x} Φ(y)ξ(y)/2d`. Coalescing births are never
    /// sampled, which keeps the event count bounded when `Φ` is huge.
    Site,
}

impl EventModel {
    const SITE_ABOVE: f64 = 64.0;

    /// [`EventModel::Site`] when some birth rate exceeds 64, otherwise
    /// [`EventModel::Player`].
    pub fn auto(params: &Params) -> Self {
        if params.max_birth_rate() > Self::SITE_ABOVE {
            EventModel::Site
        } else {
            EventModel::Player
        }
    }
}

/// `occupied / total` where `total = 2d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborFraction {
    pub occupied: usize,
    pub total: usize,
}

impl NeighborFraction {
    pub fn value(&self) -> f64 {
        self.occupied as f64 / self.total as f64
    }
}

/// Sites whose cached rate was recomputed by an event.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    /// The site whose occupancy flipped, if any.
    pub flipped: Option<usize>,
    /// Occupied neighbors of the flipped site.
    pub neighbors: SmallVec<[usize; 8]>,
}

impl ChangeSet {
    pub fn len(&self) -> usize {
        self.flipped.is_some() as usize + self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flipped.is_none()
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.flipped.iter().copied().chain(self.neighbors.iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct Configuration {
    torus: Arc<Torus>,
    params: Params,
    model: EventModel,
    occupied: Vec<bool>,
    nbr: Vec<u8>,
    count: usize,
    phi: Vec<f64>,
    weight: Vec<f64>,
    index: Option<RateIndex>,
    growth: Option<Arc<[bool]>>,
}

impl Configuration {
    /// An empty configuration with a sampling index.
    pub fn new(torus: Arc<Torus>, params: Params, model: EventModel) -> Result<Self> {
        let mut c = Self::unindexed(torus, params, model)?;
        c.index = Some(RateIndex::new(c.occupied.len()));
        Ok(c)
    }

    /// An empty configuration that maintains weights but no sampling index.
    pub fn unindexed(torus: Arc<Torus>, params: Params, model: EventModel) -> Result<Self> {
        if torus.dim() != params.dim() {
            return Err(Error::Params(format!(
                "torus has dimension {} but params have dimension {}",
                torus.dim(),
                params.dim()
            )));
        }
        let n = torus.len();
        Ok(Configuration {
            torus,
            params,
            model,
            occupied: vec![false; n],
            nbr: vec![0; n],
            count: 0,
            phi: vec![0.0; n],
            weight: vec![0.0; n],
            index: None,
            growth: None,
        })
    }

    /// Forbids births onto sites where `allowed` is false.
    pub fn restrict_growth(&mut self, allowed: Arc<[bool]>) -> Result<()> {
        if allowed.len() != self.occupied.len() {
            return Err(Error::Params("growth mask does not match the torus".into()));
        }
        self.growth = Some(allowed);
        self.rebuild();
        Ok(())
    }

    pub fn torus(&self) -> &Arc<Torus> {
        &self.torus
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn model(&self) -> EventModel {
        self.model
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn population(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_occupied(&self, site: usize) -> bool {
        self.occupied[site]
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupied
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupied.iter().enumerate().filter_map(|(i, o)| o.then_some(i))
    }

    #[inline]
    pub fn neighbor_count(&self, site: usize) -> usize {
        self.nbr[site] as usize
    }

    /// Whether births onto `site` are allowed.
    #[inline]
    pub fn can_grow(&self, site: usize) -> bool {
        self.growth.as_ref().is_none_or(|g| g[site])
    }

    /// Cached birth rate; zero for empty sites.
    #[inline]
    pub fn cached_rate(&self, site: usize) -> f64 {
        self.phi[site]
    }

    /// Weight of `site` in the event index under the configured model.
    #[inline]
    pub fn weight(&self, site: usize) -> f64 {
        self.weight[site]
    }

    /// Builds the sampling index if the configuration has none.
    pub fn ensure_indexed(&mut self) {
        if self.index.is_none() {
            self.index = Some(RateIndex::from_weights(&self.weight));
        }
    }

    pub fn index(&self) -> Option<&RateIndex> {
        self.index.as_ref()
    }

    /// Sum of all site weights.
    pub fn total_rate(&self) -> f64 {
        match &self.index {
            Some(index) => index.total(),
            None => self.weight.iter().sum(),
        }
    }

    fn check(&self, site: usize) -> Result<()> {
        if site < self.occupied.len() {
            Ok(())
        } else {
            Err(Error::SiteIndex {
                site,
                len: self.occupied.len(),
            })
        }
    }

    fn state_error(&self, site: usize, expected_occupied: bool) -> Error {
        let name = |o: bool| if o { "occupied" } else { "empty" };
        Error::State {
            site,
            expected: name(expected_occupied),
            actual: name(!expected_occupied),
        }
    }

    /// Fraction `f₁` of occupied neighbors of `site`.
    pub fn neighbor_fraction(&self, site: usize) -> Result<NeighborFraction> {
        self.check(site)?;
        Ok(NeighborFraction {
            occupied: self.nbr[site] as usize,
            total: self.torus.coordination(),
        })
    }

    /// Birth rate `Φ` of the player at an occupied site.
    pub fn birth_rate(&self, site: usize) -> Result<f64> {
        self.check(site)?;
        if !self.occupied[site] {
            return Err(self.state_error(site, true));
        }
        Ok(self.params.birth_rate_for(self.nbr[site] as usize))
    }

    /// Rate `ψ` at which an empty site becomes occupied.
    pub fn fill_rate(&self, site: usize) -> Result<f64> {
        self.check(site)?;
        if self.occupied[site] {
            return Err(self.state_error(site, false));
        }
        Ok(self.psi(site))
    }

    #[inline]
    fn psi(&self, site: usize) -> f64 {
        let two_d = self.torus.coordination() as f64;
        if let Some(rate) = self.params.constant_rate() {
            return rate * self.nbr[site] as f64 / two_d;
        }
        let mut sum = 0.0;
        for &n in self.torus.neighbors(site) {
            if n != NO_SITE && self.occupied[n as usize] {
                sum += self.phi[n as usize];
            }
        }
        sum / two_d
    }

    #[inline]
    fn weight_for(&self, site: usize) -> f64 {
        match (self.model, self.occupied[site]) {
            (EventModel::Player, true) => 1.0 + self.phi[site],
            (EventModel::Player, false) => 0.0,
            (EventModel::Site, true) => 1.0,
            (EventModel::Site, false) if self.can_grow(site) => self.psi(site),
            (EventModel::Site, false) => 0.0,
        }
    }

    #[inline]
    fn refresh(&mut self, site: usize) {
        let w = self.weight_for(site);
        if self.weight[site] != w {
            self.weight[site] = w;
            if let Some(index) = &mut self.index {
                index.set(site, w);
            }
        }
    }

    fn flip(&mut self, site: usize, on: bool) -> ChangeSet {
        let torus = Arc::clone(&self.torus);
        let mut changes = ChangeSet {
            flipped: Some(site),
            neighbors: SmallVec::new(),
        };
        self.occupied[site] = on;
        if on {
            self.count += 1;
            self.phi[site] = self.params.birth_rate_for(self.nbr[site] as usize);
        } else {
            self.count -= 1;
            self.phi[site] = 0.0;
        }
        for &n in torus.neighbors(site) {
            if n == NO_SITE {
                continue;
            }
            let n = n as usize;
            if on {
                self.nbr[n] += 1;
            } else {
                self.nbr[n] -= 1;
            }
            if self.occupied[n] {
                self.phi[n] = self.params.birth_rate_for(self.nbr[n] as usize);
                changes.neighbors.push(n);
            }
        }

        self.refresh(site);
        match self.model {
            EventModel::Player => {
                for &n in &changes.neighbors {
                    self.refresh(n);
                }
            }
            EventModel::Site => {
                // ψ(z) reads Φ over z's neighbors, so everything within
                // distance two of the flip may have moved.
                for &n in torus.neighbors(site) {
                    if n == NO_SITE {
                        continue;
                    }
                    let n = n as usize;
                    self.refresh(n);
                    if !self.occupied[n] {
                        continue;
                    }
                    for &m in torus.neighbors(n) {
                        if m != NO_SITE && !self.occupied[m as usize] {
                            self.refresh(m as usize);
                        }
                    }
                }
            }
        }
        changes
    }

    /// Birth from `parent` onto the neighboring `target`. Returns an empty
    /// change-set when the target is already occupied (the particles
    /// coalesce) or lies where growth is forbidden.
    pub fn apply_birth(&mut self, parent: usize, target: usize) -> Result<ChangeSet> {
        self.check(parent)?;
        self.check(target)?;
        if !self.occupied[parent] {
            return Err(self.state_error(parent, true));
        }
        if !self.torus.is_neighbor(parent, target) {
            return Err(Error::Topology { parent, target });
        }
        if self.occupied[target] || !self.can_grow(target) {
            return Ok(ChangeSet::default());
        }
        Ok(self.flip(target, true))
    }

    pub fn apply_death(&mut self, site: usize) -> Result<ChangeSet> {
        self.check(site)?;
        if !self.occupied[site] {
            return Err(self.state_error(site, true));
        }
        Ok(self.flip(site, false))
    }

    /// Occupies an empty site without a parent; used to set up states.
    pub fn occupy(&mut self, site: usize) -> Result<ChangeSet> {
        self.check(site)?;
        if self.occupied[site] {
            return Ok(ChangeSet::default());
        }
        Ok(self.flip(site, true))
    }

    /// Fill rate of an empty site as seen by the event index (zero where
    /// growth is forbidden). Unchecked; used by coupled bundles.
    #[inline]
    pub(crate) fn effective_fill_rate(&self, site: usize) -> f64 {
        if self.occupied[site] || !self.can_grow(site) {
            0.0
        } else if self.model == EventModel::Site {
            self.weight[site]
        } else {
            self.psi(site)
        }
    }

    /// Unchecked flip used by the simulation loops.
    #[inline]
    pub(crate) fn set_occupied(&mut self, site: usize, on: bool) {
        if self.occupied[site] != on {
            self.flip(site, on);
        }
    }

    /// Replaces the occupancy with `sites` and rebuilds every cache.
    pub fn fill_sites(&mut self, sites: impl IntoIterator<Item = usize>) -> Result<()> {
        self.occupied.iter_mut().for_each(|o| *o = false);
        for s in sites {
            self.check(s)?;
            self.occupied[s] = true;
        }
        self.rebuild();
        Ok(())
    }

    pub fn fill_all(&mut self) {
        self.occupied.iter_mut().for_each(|o| *o = true);
        self.rebuild();
    }

    pub fn clear(&mut self) {
        self.occupied.iter_mut().for_each(|o| *o = false);
        self.rebuild();
    }

    /// Recomputes counts, rates, weights and the index from occupancy.
    pub fn rebuild(&mut self) {
        let torus = Arc::clone(&self.torus);
        self.count = self.occupied.iter().filter(|o| **o).count();
        for site in 0..self.occupied.len() {
            self.nbr[site] = torus
                .neighbors(site)
                .iter()
                .filter(|n| **n != NO_SITE && self.occupied[**n as usize])
                .count() as u8;
        }
        for site in 0..self.occupied.len() {
            self.phi[site] = if self.occupied[site] {
                self.params.birth_rate_for(self.nbr[site] as usize)
            } else {
                0.0
            };
        }
        for site in 0..self.occupied.len() {
            self.weight[site] = self.weight_for(site);
        }
        if self.index.is_some() {
            self.index = Some(RateIndex::from_weights(&self.weight));
        }
    }

    /// Compares every cache against a from-scratch recomputation and
    /// returns the number of mismatching entries.
    pub fn audit(&self) -> usize {
        let mut fresh = self.clone();
        fresh.rebuild();
        let mut bad = (fresh.count != self.count) as usize;
        for site in 0..self.occupied.len() {
            bad += (fresh.nbr[site] != self.nbr[site]) as usize;
            bad += (fresh.phi[site] != self.phi[site]) as usize;
            bad += (fresh.weight[site] != self.weight[site]) as usize;
        }
        if let (Some(a), Some(b)) = (&self.index, &fresh.index) {
            bad += (a.total() != b.total()) as usize;
            bad += (a.weights() != self.weight.as_slice()) as usize;
        }
        bad
    }

    /// The occupancy dump: a `# torus=<l1>x...x<ld> t=<time>` header
    /// followed by one `x1,...,xd` line per occupied site, in site order.
    pub fn to_dump(&self, time: f64) -> String {
        let sides: Vec<String> = self.torus.sides().iter().map(|s| s.to_string()).collect();
        let mut out = format!("# torus={} t={}\n", sides.join("x"), fmt17(time));
        for site in self.occupied_sites() {
            let c: Vec<String> = self.torus.coords(site).iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{}", c.join(","));
        }
        out
    }

    /// Binary portable graymap (P5), occupied sites black, one byte per
    /// site, rows along the first coordinate. Comment lines go into the
    /// header.
    pub fn to_pgm(&self, comments: &[String]) -> Result<Vec<u8>> {
        if self.torus.dim() != 2 {
            return Err(Error::unsupported(
                "engine",
                format!("raster output needs d = 2, got d = {}", self.torus.dim()),
            ));
        }
        let (rows, cols) = (self.torus.sides()[0], self.torus.sides()[1]);
        let mut out = b"P5\n".to_vec();
        for c in comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        out.extend_from_slice(format!("{cols} {rows}\n255\n").as_bytes());
        out.extend(self.occupied.iter().map(|o| if *o { 0u8 } else { 255u8 }));
        Ok(out)
    }
}

/// A parsed occupancy dump.
#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub sides: Vec<usize>,
    pub time: f64,
    pub sites: Vec<Vec<i64>>,
}

impl Dump {
    /// Parses the dump format; lines starting with `#|` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Dump(m.to_string());
        let mut lines = text.lines().filter(|l| !l.starts_with("#|") && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let rest = header
            .strip_prefix("# torus=")
            .ok_or_else(|| bad("header must start with '# torus='"))?;
        let (dims, time) = rest.split_once(" t=").ok_or_else(|| bad("header lacks ' t='"))?;
        let sides = dims
            .split('x')
            .map(|s| s.parse::<usize>().map_err(|_| bad("bad side length")))
            .collect::<Result<Vec<_>>>()?;
        let time = time.trim().parse::<f64>().map_err(|_| bad("bad time"))?;
        let mut sites = Vec::new();
        for line in lines {
            let c = line
                .split(',')
                .map(|s| s.trim().parse::<i64>().map_err(|_| bad("bad coordinate")))
                .collect::<Result<Vec<_>>>()?;
            if c.len() != sides.len() {
                return Err(bad("coordinate has the wrong dimension"));
            }
            sites.push(c);
        }
        Ok(Dump { sides, time, sites })
    }

    /// Builds the configuration the dump describes.
    pub fn into_configuration(&self, params: Params, boundary: Boundary, model: EventModel) -> Result<Configuration> {
        let torus = Arc::new(Torus::new(&self.sides, boundary)?);
        let sites = self
            .sites
            .iter()
            .map(|c| torus.index_of(c))
            .collect::<Result<Vec<_>>>()?;
        let mut config = Configuration::new(torus, params, model)?;
        config.fill_sites(sites)?;
        Ok(config)
    }
}
