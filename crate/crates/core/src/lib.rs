//! Simulator and verifier for lattice Gibbs measures with unbounded real
//! spins and convex polynomial pair interactions.
//!
//! The crate computes the Dobrushin-type uniqueness threshold of a model
//! (`potentials`, `lattice`), samples finite-volume Gibbs measures by an
//! exact single-site heat bath (`numerics`, `sampler`), and numerically
//! verifies the covariance, moment and entropy inequalities that hold in the
//! uniqueness regime (`analysis`). The `cli` module ties everything into a
//! reproducible pipeline over JSON configs, CSV series and binary snapshots.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod lattice;
pub mod numerics;
pub mod poly;
pub mod potentials;
pub mod report;
pub mod rundir;
pub mod sampler;
