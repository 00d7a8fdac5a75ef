//! Numerical toolkit for a 4D activator-inhibitor gene network with two
//! small parameters: a time-scale ratio `eps` and a switching parameter
//! `sigma` (the inverse Hill exponent).
//!
//! The crate cross-validates every computable object of the two-parameter
//! analysis:
//!
//! - [`model`]: the full 4D system, Hill/sigmoid primitives, the protein-only
//!   quasi-steady-state reduction and its invariance-defect diagnostic.
//! - [`charts`]: the 13-chart blow-up atlas over the switching manifolds,
//!   with chart vector fields, change-of-chart maps and critical-manifold
//!   eigenvalue checks.
//! - [`reduction`]: slow-manifold corrections in the scaling chart, the
//!   reduced planar system, trace asymptotics, the Hopf threshold `mu_Hopf`
//!   and the ray classification `mu = c sigma`.
//! - [`equilibria`]: 4D equilibrium solving, eigenvalue analysis, parameter
//!   continuation and two-parameter Hopf-curve tracing.
//! - [`pwl`]: the singular-limit piecewise-linear system with exact
//!   event-driven flow and the closed-form return map.
//! - [`sim`]: stiff adaptive integration with event localization and
//!   attractor classification.
//! - [`cli`]: experiment recipes and CSV/JSON table emission behind the
//!   `grnscale` binary.

pub mod charts;
pub mod cli;
pub mod equilibria;
pub mod error;
pub mod model;
pub mod pwl;
pub mod reduction;
pub mod sim;
pub mod util;

pub use error::{Error, Result};
pub use model::{ModelParams, RawParams, State4};
