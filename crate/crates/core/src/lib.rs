//! Exact simulation and analysis of the contact process with a
//! density-dependent birth rate on finite tori.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coupling;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod fmt;
pub mod index;
pub mod meanfield;
pub mod params;
pub mod rng;
pub mod stats;
pub mod torus;

pub use config::{ChangeSet, Configuration, Dump, EventModel, NeighborFraction};
pub use engine::{Event, GridRecorder, Recorder, RunOutcome, SimState, StopReason, StopRule};
pub use error::{Error, Result};
pub use params::{Params, Response, Variant};
pub use torus::{Boundary, Torus};
