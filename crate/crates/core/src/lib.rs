//! Channel-resolved Markov jump networks.
//!
//! A [`ChannelNetwork`] lists states and reservoir/filter-resolved channels,
//! each with a rate and a vector of record increments (charge, heat, ...).
//! From it the crate builds the state generator, the counting statistics of
//! the records, and decides which records the generator alone determines:
//!
//! - [`network`]: data model, generator, projections `P` and `B`, record maps
//! - [`spectral`]: stationary state, Drazin inverse, pseudoinverse, kernels
//! - [`fcs`]: tilted generators, analytic and finite-difference cumulants
//! - [`completeness`]: kernel tests, lost rank, remaining ambiguity, quotient form
//! - [`records`]: mean records, entropy production, exact compatible intervals
//! - [`dotlab`]: energy-filtered quantum-dot builder and twin devices
//! - [`trajsim`]: Gillespie simulation with channel-resolved records
//! - [`model`]: JSON model files

pub mod completeness;
pub mod dotlab;
pub mod error;
pub mod fcs;
pub mod model;
pub mod network;
pub mod records;
pub mod spectral;
pub mod trajsim;

pub use error::{Error, Result};
pub use network::{ChannelNetwork, ProjectionPair, RecordMap, StateGenerator, Transition, TransitionChannel};
