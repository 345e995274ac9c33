//! The hard-core process against independent single-seed copies.
//!
//! Each seed `z ∈ A` starts a type-`z` player. Arrows and death crosses are
//! typed: a type-`z` arrow `x → y` (rate `λ/2d`) gives birth in the typed
//! process when `x` holds a type-`z` player and no neighbor of `x` is
//! occupied at all, and in copy `z` when `x` is occupied in that copy and
//! no neighbor of `x` is. A type-`z` cross kills type-`z` players in both.
//! Clocks only matter where copy `z` is occupied, so each pair `(z, x)`
//! with `x` occupied in copy `z` fires at rate `1 + λ`.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, EventModel};
use crate::error::{Error, Result};
use crate::params::{Params, Variant};
use crate::rng::{replicate_rng, Rng};
use crate::torus::{Torus, NO_SITE};

use super::arrows::Violation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub horizon: f64,
    pub final_time: f64,
    pub events: u64,
    /// Events after which some typed player had no matching player in
    /// its copy.
    pub violations: u64,
    pub first_violation: Option<Violation>,
    /// Largest number of copies ever occupying one site at once.
    pub max_stack: usize,
    pub final_population: usize,
    pub final_copy_population: usize,
}

const NONE: u32 = u32::MAX;

struct Typed {
    config: Configuration,
    kind: Vec<u32>,
}

/// Couples `ξ^A` with the copies `{ξ^z : z ∈ A}` and checks
/// `ξ^A_t(x) ≤ Ξ^A_t(x)` after every event.
pub fn evolve_vs_noninteracting(
    seeds: &[usize],
    params: &Params,
    torus: Arc<Torus>,
    horizon: f64,
    seed: u64,
    replicate: u64,
) -> Result<DominationReport> {
    if params.variant() != Variant::HardCore {
        return Err(Error::unsupported(
            "coupling",
            "the non-interacting comparison is defined for a = -inf only",
        ));
    }
    let mut distinct = seeds.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != seeds.len() || seeds.is_empty() {
        return Err(Error::Params("seed sites must be distinct and nonempty".into()));
    }
    let n = torus.len();
    if let Some(s) = seeds.iter().find(|s| **s >= n) {
        return Err(Error::SiteIndex { site: *s, len: n });
    }
    let lambda = params.lambda();
    let mut rng: Rng = replicate_rng(seed, replicate);

    let mut typed = Typed {
        config: Configuration::unindexed(torus.clone(), params.clone(), EventModel::Player)?,
        kind: vec![NONE; n],
    };
    typed.config.fill_sites(seeds.iter().copied())?;
    for (z, &s) in seeds.iter().enumerate() {
        typed.kind[s] = z as u32;
    }

    let mut copies = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let mut c = Configuration::unindexed(torus.clone(), params.clone(), EventModel::Player)?;
        c.fill_sites([s])?;
        copies.push(c);
    }
    let mut stack = vec![0usize; n];
    for &s in seeds {
        stack[s] = 1;
    }

    // active (z, x) pairs with a position table for O(1) removal
    let mut active: Vec<(u32, u32)> = seeds.iter().enumerate().map(|(z, &s)| (z as u32, s as u32)).collect();
    let mut pos = vec![NONE; seeds.len() * n];
    for (i, &(z, x)) in active.iter().enumerate() {
        pos[z as usize * n + x as usize] = i as u32;
    }

    let mut time = 0.0;
    let mut events = 0u64;
    let mut violations = 0u64;
    let mut first_violation = None;
    let mut max_stack = 1usize;
    let mut bad = 0usize;
    let per_pair = 1.0 + lambda;
    let violates = |typed: &Typed, copies: &[Configuration], x: usize| {
        typed.kind[x] != NONE && !copies[typed.kind[x] as usize].is_occupied(x)
    };

    while !active.is_empty() {
        let e: f64 = Exp1.sample(&mut rng);
        let dt = e / (per_pair * active.len() as f64);
        if time + dt > horizon {
            time = horizon;
            break;
        }
        time += dt;
        events += 1;
        let (z, x) = active[rng.random_range(0..active.len())];
        let (z, x) = (z as usize, x as usize);

        let changed = if rng.random::<f64>() * per_pair < 1.0 {
            bad -= violates(&typed, &copies, x) as usize;
            copies[z].set_occupied(x, false);
            stack[x] -= 1;
            remove(&mut active, &mut pos, n, z, x);
            if typed.kind[x] == z as u32 {
                typed.config.set_occupied(x, false);
                typed.kind[x] = NONE;
            }
            bad += violates(&typed, &copies, x) as usize;
            x
        } else {
            let y = torus.neighbors(x)[rng.random_range(0..torus.coordination())];
            if y == NO_SITE {
                continue;
            }
            let y = y as usize;
            bad -= violates(&typed, &copies, y) as usize;
            let copy_fires = copies[z].neighbor_count(x) == 0 && !copies[z].is_occupied(y);
            let typed_fires = typed.kind[x] == z as u32 && typed.config.neighbor_count(x) == 0;
            if copy_fires {
                copies[z].set_occupied(y, true);
                stack[y] += 1;
                max_stack = max_stack.max(stack[y]);
                pos[z * n + y] = active.len() as u32;
                active.push((z as u32, y as u32));
            }
            if typed_fires && !typed.config.is_occupied(y) {
                typed.config.set_occupied(y, true);
                typed.kind[y] = z as u32;
            }
            bad += violates(&typed, &copies, y) as usize;
            y
        };
        if bad > 0 {
            violations += 1;
            first_violation.get_or_insert(Violation {
                site: torus.coords(changed),
                time,
            });
        }
    }

    Ok(DominationReport {
        horizon,
        final_time: time,
        events,
        violations,
        first_violation,
        max_stack,
        final_population: typed.config.population(),
        final_copy_population: copies.iter().map(Configuration::population).sum(),
    })
}

fn remove(active: &mut Vec<(u32, u32)>, pos: &mut [u32], n: usize, z: usize, x: usize) {
    let at = pos[z * n + x] as usize;
    active.swap_remove(at);
    if at < active.len() {
        let (z2, x2) = active[at];
        pos[z2 as usize * n + x2 as usize] = at as u32;
    }
    pos[z * n + x] = NONE;
}
