//! Numerical laboratory for nearest-neighbour random walks in low-disorder
//! i.i.d. random environments on `Z^d`.
//!
//! The modules follow the objects of the theory:
//!
//! * [`kernels`]: transition kernels, n-step probabilities, potential kernels.
//! * [`environment`]: perturbation laws and lazily sampled environments.
//! * [`greenfn`]: killed Green functions, exact and Monte Carlo, and the
//!   finite-set perturbation lemmas.
//! * [`measures`]: invariant-measure estimators, the Kalikow quantity, velocity
//!   and ballisticity diagnostics.
//! * [`expansion`]: closed-form first-order predictions.
//! * [`harness`]: JSON manifests and named recipes with pass/fail summaries.

pub mod environment;
pub mod error;
pub mod expansion;
pub mod greenfn;
pub(crate) mod grid;
pub mod harness;
pub mod kernels;
pub mod lattice;
pub mod measures;
pub mod output;
pub mod seeds;
pub mod stats;

pub use error::{LabError, Result};
pub use lattice::{Direction, Point};
