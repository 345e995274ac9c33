//! Several processes built on shared randomness.

pub mod arrows;
pub mod basic;
pub mod noninteracting;

pub use arrows::{evolve_coupled_pair, evolve_sandwich, ArrowBundle, ContainmentReport, PairReport, Violation};
pub use basic::{BundleEvent, SiteBundle};
pub use noninteracting::{evolve_vs_noninteracting, DominationReport};
