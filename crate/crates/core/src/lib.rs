//! Numerical toolkit for the lasso diffusion
//!
//! ```text
//! dx = -{ A^T (A x - y) + mu sgn(x) } dt + eps dw
//! ```
//!
//! its zero-noise limit (a differential inclusion whose coordinates stick at
//! zero while `|A_i^T (A x - y)| <= mu`), the path-space rate functional built
//! from the one-sided local costs `L1`, `L2` and the mixed cost `L0` at zero,
//! and a Monte Carlo check of the Laplace limit
//! `-eps^2 ln E[exp(-h(x^eps)/eps^2)] -> inf { I(phi) + h(phi) }`.
//!
//! The crate is `no_std` (with `alloc`). File formats, thread pools and the
//! command-line front end live in the `lassodiff` companion crate; anything
//! that runs many independent replicas takes an [`Executor`] so the caller
//! decides how replicas are scheduled without changing a single output bit.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod drift;
pub mod error;
pub mod exec;
pub mod inclusion;
pub mod invariant;
pub mod ldp;
pub mod linalg;
pub mod path;
pub mod problem;
pub mod quad;
pub mod rate;
pub mod rng;
pub mod sde;
pub mod stats;

pub use drift::{DriftModel, ForcedDrift};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use path::{ControlPath, ForcingPath, PiecewiseConstant, PiecewisePath, Trajectory};
pub use problem::{Problem, Side, SignSelection};
