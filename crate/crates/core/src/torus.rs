//! Finite `d`-dimensional tori standing in for `Z^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker stored in the neighbor table for neighbors outside the window.
pub const NO_SITE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Wrap around; every site has exactly `2d` neighbors.
    #[default]
    Periodic,
    /// A window of `Z^d` whose outside is permanently empty. Out-of-window
    /// neighbors still count in the denominator `2d`.
    EmptyFrozen,
}

/// Geometry of the lattice with a precomputed neighbor table.
///
/// Sites are numbered row-major: the last coordinate varies fastest.
/// Neighbor `2i` of a site is its neighbor in direction `-e_i`, neighbor
/// `2i + 1` the one in direction `+e_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Torus {
    sides: Vec<usize>,
    boundary: Boundary,
    strides: Vec<usize>,
    len: usize,
    neighbors: Vec<u32>,
}

impl Torus {
    pub fn new(sides: &[usize], boundary: Boundary) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::Params("torus needs at least one side length".into()));
        }
        let min_side = match boundary {
            Boundary::Periodic => 2,
            Boundary::EmptyFrozen => 1,
        };
        if let Some(s) = sides.iter().find(|s| **s < min_side) {
            return Err(Error::Params(format!(
                "side length {s} is too small for a {boundary:?} torus"
            )));
        }
        let len = sides
            .iter()
            .try_fold(1usize, |acc, s| acc.checked_mul(*s))
            .filter(|n| *n < NO_SITE as usize)
            .ok_or_else(|| Error::Params(format!("torus {sides:?} has too many sites")))?;

        let d = sides.len();
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sides[i + 1];
        }

        let mut neighbors = Vec::with_capacity(len * 2 * d);
        for site in 0..len {
            for axis in 0..d {
                let c = (site / strides[axis]) % sides[axis];
                let base = site - c * strides[axis];
                for step in [-1i64, 1] {
                    let nc = c as i64 + step;
                    let n = if (0..sides[axis] as i64).contains(&nc) {
                        (base + nc as usize * strides[axis]) as u32
                    } else {
                        match boundary {
                            Boundary::Periodic => {
                                let w = nc.rem_euclid(sides[axis] as i64) as usize;
                                (base + w * strides[axis]) as u32
                            }
                            Boundary::EmptyFrozen => NO_SITE,
                        }
                    };
                    neighbors.push(n);
                }
            }
        }

        Ok(Torus {
            sides: sides.to_vec(),
            boundary,
            strides,
            len,
            neighbors,
        })
    }

    /// A cube with `dim` sides of equal length.
    pub fn cube(side: usize, dim: usize, boundary: Boundary) -> Result<Self> {
        Self::new(&vec![side; dim], boundary)
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn coordination(&self) -> usize {
        2 * self.sides.len()
    }

    /// The `2d` neighbor slots of `site`; absent neighbors are [`NO_SITE`].
    #[inline]
    pub fn neighbors(&self, site: usize) -> &[u32] {
        let c = 2 * self.sides.len();
        &self.neighbors[site * c..(site + 1) * c]
    }

    /// Whether `target` is one of the neighbors of `site`.
    pub fn is_neighbor(&self, site: usize, target: usize) -> bool {
        self.neighbors(site).iter().any(|n| *n as usize == target)
    }

    /// Index of an in-range coordinate.
    pub fn index_of(&self, coords: &[i64]) -> Result<usize> {
        let bad = || Error::Coordinate {
            coords: coords.to_vec(),
            sides: self.sides.clone(),
        };
        if coords.len() != self.sides.len() {
            return Err(bad());
        }
        let mut site = 0;
        for ((c, s), stride) in coords.iter().zip(&self.sides).zip(&self.strides) {
            if *c < 0 || *c >= *s as i64 {
                return Err(bad());
            }
            site += *c as usize * stride;
        }
        Ok(site)
    }

    /// Index of a coordinate reduced modulo the side lengths.
    pub fn wrap(&self, coords: &[i64]) -> usize {
        coords
            .iter()
            .zip(&self.sides)
            .zip(&self.strides)
            .map(|((c, s), stride)| c.rem_euclid(*s as i64) as usize * stride)
            .sum()
    }

    pub fn coords(&self, site: usize) -> Vec<i64> {
        self.sides
            .iter()
            .zip(&self.strides)
            .map(|(s, stride)| ((site / stride) % s) as i64)
            .collect()
    }

    /// The site with coordinates `⌊l_i / 2⌋`, used as the origin.
    pub fn center(&self) -> usize {
        let c: Vec<i64> = self.sides.iter().map(|s| (s / 2) as i64).collect();
        self.wrap(&c)
    }

    /// `L∞` distance, measured around the torus when it is periodic.
    pub fn linf_distance(&self, a: usize, b: usize) -> usize {
        let mut best = 0;
        for (s, stride) in self.sides.iter().zip(&self.strides) {
            let ca = (a / stride) % s;
            let cb = (b / stride) % s;
            let diff = ca.abs_diff(cb);
            let diff = match self.boundary {
                Boundary::Periodic => diff.min(s - diff),
                Boundary::EmptyFrozen => diff,
            };
            best = best.max(diff);
        }
        best
    }

    /// Sites whose coordinates relative to `origin` lie in `offsets`,
    /// wrapped onto the torus.
    pub fn translate(&self, origin: usize, offsets: &[Vec<i64>]) -> Vec<usize> {
        let o = self.coords(origin);
        offsets
            .iter()
            .map(|off| {
                let c: Vec<i64> = o.iter().zip(off).map(|(a, b)| a + b).collect();
                self.wrap(&c)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_neighbors() {
        let t = Torus::new(&[3, 4], Boundary::Periodic).unwrap();
        assert_eq!(t.len(), 12);
        let s = t.index_of(&[0, 0]).unwrap();
        let n: Vec<Vec<i64>> = t.neighbors(s).iter().map(|n| t.coords(*n as usize)).collect();
        assert_eq!(n, vec![vec![2, 0], vec![1, 0], vec![0, 3], vec![0, 1]]);
        for site in 0..t.len() {
            assert_eq!(t.neighbors(site).len(), 4);
            for n in t.neighbors(site) {
                assert!(t.is_neighbor(*n as usize, site));
            }
        }
    }

    #[test]
    fn frozen_window_has_missing_neighbors() {
        let t = Torus::new(&[5], Boundary::EmptyFrozen).unwrap();
        assert_eq!(t.neighbors(0), &[NO_SITE, 1]);
        assert_eq!(t.neighbors(4), &[3, NO_SITE]);
    }

    #[test]
    fn coordinates_round_trip() {
        let t = Torus::new(&[4, 5, 6], Boundary::Periodic).unwrap();
        for site in 0..t.len() {
            assert_eq!(t.index_of(&t.coords(site)).unwrap(), site);
        }
        assert!(t.index_of(&[4, 0, 0]).is_err());
        assert!(t.index_of(&[0, -1, 0]).is_err());
        assert!(t.index_of(&[0, 0]).is_err());
        assert_eq!(t.wrap(&[-1, 5, 6]), t.index_of(&[3, 0, 0]).unwrap());
    }

    #[test]
    fn distances() {
        let t = Torus::new(&[10], Boundary::Periodic).unwrap();
        assert_eq!(t.linf_distance(1, 9), 2);
        let f = Torus::new(&[10], Boundary::EmptyFrozen).unwrap();
        assert_eq!(f.linf_distance(1, 9), 8);
        assert_eq!(t.center(), 5);
    }

    #[test]
    fn rejects_degenerate_sides() {
        assert!(Torus::new(&[1], Boundary::Periodic).is_err());
        assert!(Torus::new(&[1], Boundary::EmptyFrozen).is_ok());
        assert!(Torus::new(&[], Boundary::Periodic).is_err());
    }
}
