//! Numerical laboratory for the one-dimensional singular degenerate parabolic
//! equation
//!
//! ```text
//! u_t - (|u_x|^{p-2} u_x)_x + u^{-beta} chi_{u>0} + f(u) = 0
//! ```
//!
//! The crate is `no_std` (it needs `alloc`). It holds the regularized model,
//! the closed-form bounds, a monotone finite-difference scheme for the
//! regularized problem, the limit ladders (eta -> 0, eps -> 0, r -> inf) and
//! executable property checks over trajectories. File formats and the CLI
//! live in the `quenchlab` companion crate.
#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used in every parameter check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod error;
pub mod ladder;
pub mod model;
pub mod scenarios;
pub mod scheme;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    derived_constants, DerivedConstants, Domain, Hypotheses, InitialData, ProblemSpec,
    RegularizationKnobs, SourceKind, SourceTerm,
};
pub use scheme::{Grid, GridState, MassLedger, Scheme, StepConfig, Trajectory};
