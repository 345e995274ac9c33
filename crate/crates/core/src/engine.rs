//! Exact event-driven simulation (Gillespie direct method).

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, EventModel};
use crate::error::{Error, Result};
use crate::rng::{replicate_rng, Rng};
use crate::torus::NO_SITE;

/// Events between two full rebuilds of the rate caches.
pub const REBUILD_EVERY: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Birth {
        parent: usize,
        target: usize,
    },
    /// A birth aimed at an occupied site, or at a site where births are
    /// not allowed; nothing changes.
    Coalescence {
        parent: usize,
        target: Option<usize>,
    },
    Death {
        site: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SimState {
    config: Configuration,
    time: f64,
    events: u64,
    births: u64,
    deaths: u64,
    coalescences: u64,
    rng: Rng,
    ever: Vec<bool>,
    ever_count: usize,
    max_population: usize,
    since_rebuild: u64,
}

impl SimState {
    /// A state at time zero drawing from stream `replicate` of `seed`.
    pub fn new(config: Configuration, seed: u64, replicate: u64) -> Self {
        Self::with_rng(config, replicate_rng(seed, replicate))
    }

    pub fn with_rng(mut config: Configuration, rng: Rng) -> Self {
        config.ensure_indexed();
        let ever = config.occupancy().to_vec();
        let ever_count = config.population();
        SimState {
            max_population: ever_count,
            config,
            time: 0.0,
            events: 0,
            births: 0,
            deaths: 0,
            coalescences: 0,
            rng,
            ever,
            ever_count,
            since_rebuild: 0,
        }
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn population(&self) -> usize {
        self.config.population()
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn births(&self) -> u64 {
        self.births
    }

    pub fn deaths(&self) -> u64 {
        self.deaths
    }

    pub fn coalescences(&self) -> u64 {
        self.coalescences
    }

    pub fn max_population(&self) -> usize {
        self.max_population
    }

    pub fn ever_occupied_count(&self) -> usize {
        self.ever_count
    }

    /// Waiting time to the next event, or `None` when absorbed.
    fn waiting_time(&mut self) -> Option<f64> {
        let total = self.config.total_rate();
        if total > 0.0 {
            let e: f64 = Exp1.sample(&mut self.rng);
            Some(e / total)
        } else {
            None
        }
    }

    /// Advances by one event.
    pub fn step(&mut self) -> Result<Event> {
        let dt = self.waiting_time().ok_or(Error::Absorbing)?;
        self.time += dt;
        Ok(self.fire())
    }

    fn fire(&mut self) -> Event {
        let index = self.config.index().expect("engine state always has an index");
        let target = self.rng.random::<f64>() * index.total();
        let site = index.sample(target);
        let torus = self.config.torus().clone();
        let event = match self.config.model() {
            EventModel::Player => {
                let phi = self.config.cached_rate(site);
                if self.rng.random::<f64>() * (1.0 + phi) < 1.0 {
                    Event::Death { site }
                } else {
                    let slot = self.rng.random_range(0..torus.coordination());
                    let n = torus.neighbors(site)[slot];
                    if n == NO_SITE {
                        Event::Coalescence {
                            parent: site,
                            target: None,
                        }
                    } else if self.config.is_occupied(n as usize) || !self.config.can_grow(n as usize) {
                        Event::Coalescence {
                            parent: site,
                            target: Some(n as usize),
                        }
                    } else {
                        Event::Birth {
                            parent: site,
                            target: n as usize,
                        }
                    }
                }
            }
            EventModel::Site => {
                if self.config.is_occupied(site) {
                    Event::Death { site }
                } else {
                    Event::Birth {
                        parent: self.pick_parent(site),
                        target: site,
                    }
                }
            }
        };
        self.apply(event);
        event
    }

    /// Draws the parent of a fill at `site` proportionally to the birth
    /// rates of its occupied neighbors.
    fn pick_parent(&mut self, site: usize) -> usize {
        let torus = self.config.torus().clone();
        let nbrs = torus.neighbors(site);
        let sum: f64 = nbrs
            .iter()
            .filter(|n| **n != NO_SITE)
            .map(|n| self.config.cached_rate(*n as usize))
            .sum();
        let mut u = self.rng.random::<f64>() * sum;
        let mut last = NO_SITE;
        for &n in nbrs {
            if n == NO_SITE {
                continue;
            }
            let r = self.config.cached_rate(n as usize);
            if r > 0.0 {
                last = n;
                if u < r {
                    return n as usize;
                }
                u -= r;
            }
        }
        last as usize
    }

    fn apply(&mut self, event: Event) {
        self.events += 1;
        match event {
            Event::Birth { target, .. } => {
                self.births += 1;
                self.config.set_occupied(target, true);
                if !self.ever[target] {
                    self.ever[target] = true;
                    self.ever_count += 1;
                }
                self.max_population = self.max_population.max(self.config.population());
            }
            Event::Death { site } => {
                self.deaths += 1;
                self.config.set_occupied(site, false);
            }
            Event::Coalescence { .. } => self.coalescences += 1,
        }
        self.since_rebuild += 1;
        if self.since_rebuild >= REBUILD_EVERY {
            self.since_rebuild = 0;
            self.config.rebuild();
        }
    }

    /// Runs until a stop condition holds, feeding `recorder` at its
    /// requested times.
    pub fn run(&mut self, stop: &StopRule, mut recorder: Option<&mut dyn Recorder>) -> Result<RunOutcome> {
        stop.validate()?;
        let origin = self.config.torus().center();
        let mut extinction_time = None;
        let reason = loop {
            let pop = self.config.population();
            if pop == 0 {
                extinction_time.get_or_insert(self.time);
                if stop.stop_on_extinction {
                    break StopReason::Extinct;
                }
            }
            if stop.population_cap.is_some_and(|cap| pop >= cap) {
                break StopReason::Capped;
            }
            let dt = self.waiting_time();
            let next = dt.map_or(f64::INFINITY, |dt| self.time + dt);
            if let Some(h) = stop.horizon {
                if next > h {
                    feed(&mut recorder, self, h);
                    self.time = self.time.max(h);
                    break StopReason::Horizon;
                }
            }
            let Some(dt) = dt else {
                return Err(Error::Absorbing);
            };
            feed(&mut recorder, self, self.time + dt);
            self.time += dt;
            let event = self.fire();
            if let (Some(r), Event::Birth { target, .. }) = (stop.escape_radius, event) {
                if self.config.torus().linf_distance(origin, target) >= r {
                    break StopReason::Escaped;
                }
            }
        };
        Ok(RunOutcome {
            reason,
            final_time: self.time,
            extinction_time: if reason == StopReason::Extinct {
                Some(self.time)
            } else {
                extinction_time
            },
            max_population: self.max_population,
            ever_occupied_count: self.ever_count,
            final_population: self.config.population(),
            events: self.events,
            births: self.births,
            deaths: self.deaths,
            coalescences: self.coalescences,
        })
    }
}

/// Hands the recorder every requested time in `[now, until]`; the state
/// is constant on that interval.
fn feed(recorder: &mut Option<&mut dyn Recorder>, state: &SimState, until: f64) {
    if let Some(r) = recorder.as_deref_mut() {
        while let Some(t) = r.next_time() {
            if t > until {
                break;
            }
            r.record(t.max(state.time), state);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub horizon: Option<f64>,
    pub stop_on_extinction: bool,
    pub population_cap: Option<usize>,
    /// `L∞` distance from the torus center at which a birth counts as an
    /// escape.
    pub escape_radius: Option<usize>,
}

impl StopRule {
    pub fn horizon(t: f64) -> Self {
        StopRule {
            horizon: Some(t),
            stop_on_extinction: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon.is_none()
            && !self.stop_on_extinction
            && self.population_cap.is_none()
            && self.escape_radius.is_none()
        {
            return Err(Error::Stop("no stopping condition enabled".into()));
        }
        if let Some(h) = self.horizon {
            if !(h >= 0.0) || h.is_infinite() {
                return Err(Error::Stop(format!("horizon must be finite and >= 0, got {h}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Extinct,
    Horizon,
    Escaped,
    Capped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub reason: StopReason,
    pub final_time: f64,
    pub extinction_time: Option<f64>,
    pub max_population: usize,
    pub ever_occupied_count: usize,
    pub final_population: usize,
    pub events: u64,
    pub births: u64,
    pub deaths: u64,
    pub coalescences: u64,
}

/// Receives the state at the times it asks for.
pub trait Recorder {
    /// The next requested time, or `None` when done.
    fn next_time(&self) -> Option<f64>;
    /// Called with the state as it is at `time`.
    fn record(&mut self, time: f64, state: &SimState);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub population: usize,
    pub births: u64,
    pub deaths: u64,
}

/// Records trajectory rows on one time grid and full configurations on
/// another.
#[derive(Debug, Clone, Default)]
pub struct GridRecorder {
    grid: Vec<f64>,
    next_row: usize,
    snapshot_times: Vec<f64>,
    next_snapshot: usize,
    pub rows: Vec<TrajectoryRow>,
    pub snapshots: Vec<(f64, Configuration)>,
}

impl GridRecorder {
    pub fn new(mut grid: Vec<f64>, mut snapshot_times: Vec<f64>) -> Self {
        grid.sort_by(f64::total_cmp);
        snapshot_times.sort_by(f64::total_cmp);
        GridRecorder {
            grid,
            snapshot_times,
            ..Default::default()
        }
    }
}

impl Recorder for GridRecorder {
    fn next_time(&self) -> Option<f64> {
        let a = self.grid.get(self.next_row).copied();
        let b = self.snapshot_times.get(self.next_snapshot).copied();
        match (a, b) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn record(&mut self, time: f64, state: &SimState) {
        let Some(t) = self.next_time() else { return };
        if self.grid.get(self.next_row) == Some(&t) {
            self.rows.push(TrajectoryRow {
                time: t,
                population: state.population(),
                births: state.births(),
                deaths: state.deaths(),
            });
            self.next_row += 1;
        }
        if self.snapshot_times.get(self.next_snapshot) == Some(&t) {
            self.snapshots.push((time, state.config().clone()));
            self.next_snapshot += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::torus::{Boundary, Torus};
    use std::sync::Arc;

    fn ring_state(n: usize, params: Params, sites: &[usize], replicate: u64) -> SimState {
        let torus = Arc::new(Torus::cube(n, 1, Boundary::Periodic).unwrap());
        let mut c = Configuration::new(torus, params, EventModel::Player).unwrap();
        c.fill_sites(sites.iter().copied()).unwrap();
        SimState::new(c, 11, replicate)
    }

    #[test]
    fn isolated_player_dies_first_with_probability_one_over_one_plus_lambda() {
        let lambda = 3.0;
        let n = 20_000;
        let deaths = (0..n)
            .filter(|r| {
                let mut s = ring_state(10, Params::contact(lambda, 1).unwrap(), &[5], *r);
                matches!(s.step().unwrap(), Event::Death { .. })
            })
            .count();
        let p = deaths as f64 / n as f64;
        let sd = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((p - 0.25).abs() < 4.0 * sd, "p = {p}");
    }

    #[test]
    fn hard_core_pair_waits_exp_two() {
        let n = 20_000;
        let mut sum = 0.0;
        for r in 0..n {
            let mut s = ring_state(10, Params::hard_core(2.0, 1).unwrap(), &[4, 5], r);
            assert!(matches!(s.step().unwrap(), Event::Death { .. }));
            sum += s.time();
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn empty_lattice_is_absorbing() {
        let mut s = ring_state(10, Params::contact(1.0, 1).unwrap(), &[], 0);
        assert_eq!(s.step(), Err(Error::Absorbing));
    }

    #[test]
    fn pure_death_goes_extinct() {
        let mut total = 0.0;
        let n = 5000;
        for r in 0..n {
            let mut s = ring_state(10, Params::contact(0.0, 1).unwrap(), &[3], r);
            let out = s.run(&StopRule::horizon(1e9), None).unwrap();
            assert_eq!(out.reason, StopReason::Extinct);
            assert_eq!(out.extinction_time, Some(out.final_time));
            total += out.final_time;
        }
        let mean = total / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn hard_core_single_seed_never_exceeds_two() {
        for r in 0..500 {
            let mut s = ring_state(64, Params::hard_core(4.0, 1).unwrap(), &[32], r);
            let out = s.run(&StopRule::horizon(1e6), None).unwrap();
            assert_eq!(out.reason, StopReason::Extinct);
            assert!(out.max_population <= 2);
        }
    }

    #[test]
    fn zero_horizon_stops_immediately() {
        let mut s = ring_state(10, Params::contact(2.0, 1).unwrap(), &[1, 2], 0);
        let out = s.run(&StopRule::horizon(0.0), None).unwrap();
        assert_eq!((out.reason, out.events, out.final_time), (StopReason::Horizon, 0, 0.0));
    }

    #[test]
    fn stop_rule_needs_a_condition() {
        let mut s = ring_state(10, Params::contact(2.0, 1).unwrap(), &[1], 0);
        assert!(matches!(s.run(&StopRule::default(), None), Err(Error::Stop(_))));
    }

    #[test]
    fn counters_are_conserved() {
        let mut s = ring_state(50, Params::new(2.0, 0.5, 1).unwrap(), &[10, 11, 12], 3);
        let out = s.run(&StopRule::horizon(30.0), None).unwrap();
        assert_eq!(out.events, out.births + out.deaths + out.coalescences);
        assert!(out.ever_occupied_count >= out.max_population);
        assert!(out.max_population >= out.final_population);
    }

    #[test]
    fn cap_and_escape() {
        let mut s = ring_state(200, Params::contact(6.0, 1).unwrap(), &[100], 1);
        let rule = StopRule {
            population_cap: Some(5),
            ..Default::default()
        };
        let out = s.run(&rule, None).unwrap();
        assert!(out.reason == StopReason::Capped || out.reason == StopReason::Horizon || out.final_population == 5);

        let mut s = ring_state(200, Params::contact(6.0, 1).unwrap(), &[100], 2);
        let rule = StopRule {
            escape_radius: Some(3),
            stop_on_extinction: true,
            ..Default::default()
        };
        let out = s.run(&rule, None).unwrap();
        assert!(matches!(out.reason, StopReason::Escaped | StopReason::Extinct));
    }

    #[test]
    fn identical_seeds_reproduce_trajectories() {
        let go = || {
            let mut s = ring_state(40, Params::new(2.5, -1.0, 1).unwrap(), &[5, 6, 7, 20], 9);
            let mut rec = GridRecorder::new((0..=20).map(|i| i as f64).collect(), vec![20.0]);
            let rule = StopRule {
                horizon: Some(20.0),
                ..Default::default()
            };
            let out = s.run(&rule, Some(&mut rec)).unwrap();
            (out, rec.rows, rec.snapshots[0].1.to_dump(20.0))
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn recorder_sees_every_grid_time() {
        let mut s = ring_state(40, Params::contact(0.5, 1).unwrap(), &[5], 0);
        let mut rec = GridRecorder::new(vec![0.0, 1.0, 2.0, 100.0], vec![]);
        let rule = StopRule {
            horizon: Some(100.0),
            ..Default::default()
        };
        let out = s.run(&rule, Some(&mut rec)).unwrap();
        assert_eq!(out.reason, StopReason::Horizon);
        assert_eq!(rec.rows.len(), 4);
        assert_eq!(rec.rows[0].population, 1);
        assert_eq!(rec.rows[3].population, 0);
    }

    #[test]
    fn site_model_matches_player_model_in_law() {
        // mean population at t = 2 from a full ring of 30, a = 1
        let mean = |model: EventModel| {
            let torus = Arc::new(Torus::cube(30, 1, Boundary::Periodic).unwrap());
            let n = 4000;
            let mut sum = 0.0;
            for r in 0..n {
                let mut c = Configuration::new(torus.clone(), Params::new(1.2, 1.0, 1).unwrap(), model).unwrap();
                c.fill_all();
                let mut s = SimState::new(c, 5, r);
                let rule = StopRule {
                    horizon: Some(2.0),
                    ..Default::default()
                };
                let _ = s.run(&rule, None).unwrap();
                sum += s.population() as f64;
            }
            sum / n as f64
        };
        let (p, q) = (mean(EventModel::Player), mean(EventModel::Site));
        assert!((p - q).abs() < 0.4, "{p} vs {q}");
    }
}
