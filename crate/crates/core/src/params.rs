//! Model parameters and the birth-rate law.
//!
//! A player at an occupied site with `k` occupied neighbors (out of `2d`)
//! gives birth at rate `Φ = λ·h(a·k/2d)` and dies at rate one. Since `Φ`
//! only depends on `k`, every parameter set is compiled into a table of
//! `2d + 1` rates at construction time.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which birth-rate rule the dynamics follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// `Φ = λ·h(a·f₁)`.
    Standard,
    /// Players with at least one occupied neighbor give birth at `λ·h(a/2d)`,
    /// isolated players cannot give birth.
    FloorRate,
    /// The `a = −∞` limit: only isolated players give birth, at rate `λ`.
    HardCore,
}

/// The increasing response `h` turning a payoff into a fertility factor.
#[derive(Clone, Default)]
pub enum Response {
    #[default]
    Exp,
    /// Any increasing map with `h(0) = 1`.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Response {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Response::Exp => x.exp(),
            Response::Custom(h) => h(x),
        }
    }
}

impl fmt::Debug for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Exp => f.write_str("Exp"),
            Response::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Params {
    lambda: f64,
    payoff: f64,
    dim: usize,
    variant: Variant,
    response: Response,
    /// Birth rate indexed by the number of occupied neighbors.
    table: Vec<f64>,
    /// Set when the rate does not depend on the neighborhood (`a = 0`).
    constant: Option<f64>,
}

impl Params {
    /// Standard dynamics with `h = exp`; `payoff = −∞` selects the hard-core limit.
    pub fn new(lambda: f64, payoff: f64, dim: usize) -> Result<Self> {
        let variant = if payoff == f64::NEG_INFINITY {
            Variant::HardCore
        } else {
            Variant::Standard
        };
        Self::build(lambda, payoff, dim, variant, Response::Exp)
    }

    /// The basic contact process, i.e. `a = 0`.
    pub fn contact(lambda: f64, dim: usize) -> Result<Self> {
        Self::new(lambda, 0.0, dim)
    }

    pub fn hard_core(lambda: f64, dim: usize) -> Result<Self> {
        Self::new(lambda, f64::NEG_INFINITY, dim)
    }

    pub fn floor_rate(lambda: f64, payoff: f64, dim: usize) -> Result<Self> {
        Self::build(lambda, payoff, dim, Variant::FloorRate, Response::Exp)
    }

    /// Standard or floor-rate dynamics with a user supplied response `h`.
    pub fn with_response(lambda: f64, payoff: f64, dim: usize, variant: Variant, response: Response) -> Result<Self> {
        Self::build(lambda, payoff, dim, variant, response)
    }

    fn build(lambda: f64, payoff: f64, dim: usize, variant: Variant, response: Response) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Params(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if dim == 0 {
            return Err(Error::Params("dimension must be >= 1".into()));
        }
        if dim > 100 {
            return Err(Error::Params(format!("dimension {dim} is not supported")));
        }
        if payoff.is_nan() || payoff == f64::INFINITY {
            return Err(Error::Params(format!("payoff must lie in [-inf, +inf), got {payoff}")));
        }
        let hard = payoff == f64::NEG_INFINITY;
        if hard != (variant == Variant::HardCore) {
            return Err(Error::Params(
                "the hard-core variant is used exactly when the payoff is -inf".into(),
            ));
        }
        let h0 = response.eval(0.0);
        if (h0 - 1.0).abs() > 1e-12 {
            return Err(Error::Params(format!("response must satisfy h(0) = 1, got {h0}")));
        }

        let two_d = 2 * dim;
        let table: Vec<f64> = (0..=two_d)
            .map(|k| match variant {
                Variant::Standard => lambda * response.eval(payoff * k as f64 / two_d as f64),
                Variant::FloorRate if k == 0 => 0.0,
                Variant::FloorRate => lambda * response.eval(payoff / two_d as f64),
                Variant::HardCore if k == 0 => lambda,
                Variant::HardCore => 0.0,
            })
            .collect();

        if table.iter().any(|r| !(*r >= 0.0) || r.is_nan()) {
            return Err(Error::Params("response produced a negative or NaN rate".into()));
        }
        // h increasing means the table is monotone in k with the sign of a.
        let ordered = table
            .windows(2)
            .all(|w| if payoff >= 0.0 { w[0] <= w[1] } else { w[0] >= w[1] });
        if variant == Variant::Standard && !ordered {
            return Err(Error::Params("response must be increasing".into()));
        }

        let constant = (variant == Variant::Standard && table.iter().all(|r| *r == table[0])).then_some(table[0]);

        Ok(Params {
            lambda,
            payoff,
            dim,
            variant,
            response,
            table,
            constant,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn payoff(&self) -> f64 {
        self.payoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn response(&self) -> &Response {
        &self.response
    }

    /// Number of neighbors of a site, `2d`.
    pub fn coordination(&self) -> usize {
        2 * self.dim
    }

    /// Birth rate of a player with `k` occupied neighbors.
    #[inline]
    pub fn birth_rate_for(&self, k: usize) -> f64 {
        self.table[k]
    }

    pub fn rate_table(&self) -> &[f64] {
        &self.table
    }

    /// The rate shared by every occupied site when it does not depend on
    /// the neighborhood.
    pub fn constant_rate(&self) -> Option<f64> {
        self.constant
    }

    /// Largest birth rate any player can have.
    pub fn max_birth_rate(&self) -> f64 {
        self.table.iter().copied().fold(0.0, f64::max)
    }
}
