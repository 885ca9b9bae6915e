//! Formation-enforcing control (FEC) for multi-agent formations with noisy
//! relative measurements, and a dead-zone "restraining" variant that stops
//! agents from chasing measurement noise.
//!
//! The crate covers the 4D (position plus heading) formation simulator, the
//! one-dimensional stochastic analysis of the restrained update, and a
//! rigidity-matrix based stability audit. Monte-Carlo ensembles and parameter
//! sweeps run on rayon when the `parallel` feature is enabled; results are
//! bitwise identical to the sequential path because every work unit owns its
//! own RNG stream and reductions happen in a fixed order.

pub mod audit;
pub mod controller;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod graph;
pub mod linalg;
pub mod manifest;
pub mod oned;
pub mod rng;
pub mod scenario;
pub mod sensor;
pub mod sim;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{Mat3, Pose, Vec3};
