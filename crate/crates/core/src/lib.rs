//! Convolutional sparse coding of long 1-D multivariate signals.
//!
//! The crate is generic over the floating point type through [`Scalar`]
//! (implemented for `f32` and `f64`). The aliases at the bottom of this file
//! fix the scalar to `f64`, which is what the solvers are tuned and tested for.
//!
//! Layout:
//! - [`signal`]: signals, atoms, dictionaries, codes and the convolution kernels.
//! - [`objective`]: the coordinate descent algebra (β maintenance, cost deltas,
//!   interference bounds, coherence checks).
//! - [`solvers`]: sequential solvers (greedy CD, randomized CD, locally greedy
//!   CD over segments, and a proximal gradient reference).
//! - [`dicod`]: the distributed solver, with a threaded runtime and a seeded
//!   single-threaded scheduler.
//! - [`io`]: the `CSC1` binary format and CSV import/export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dicod;
pub mod error;
pub mod io;
pub mod objective;
pub mod scalar;
pub mod signal;
pub mod solvers;

pub use error::{CscError, Result};
pub use scalar::Scalar;

/// `f64` multivariate signal.
pub type Signal = signal::MultivariateSignal<f64>;
/// `f64` atom.
pub type Atom = signal::Atom<f64>;
/// `f64` dictionary.
pub type Dictionary = signal::Dictionary<f64>;
/// `f64` sparse code.
pub type SparseCode = signal::SparseCode<f64>;
/// `f64` cross-correlation table.
pub type CrossCorrTable = signal::CrossCorrTable<f64>;
/// `f64` β state.
pub type BetaState = objective::BetaState<f64>;
/// `f64` coordinate update.
pub type CoordinateUpdate = objective::CoordinateUpdate<f64>;
/// `f64` solver configuration.
pub type SolverConfig = solvers::SolverConfig<f64>;
/// `f64` solve trace.
pub type SolveTrace = solvers::SolveTrace<f64>;
/// `f64` DICOD configuration.
pub type DicodConfig = dicod::DicodConfig<f64>;
