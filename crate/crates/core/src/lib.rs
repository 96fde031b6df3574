//! Numerical laboratory for a two-species Lotka-Volterra competition model in
//! which species `v` produces a chemical `c` that chemotactically repels (or
//! attracts) species `u`:
//!
//! ```text
//! u_t = D1 u_xx - chi (u c_x)_x + r1 u (1 - u - b1 v)
//! v_t = D2 v_xx + r2 v (1 - v - b2 u)
//! c_t = c_xx + v - c
//! ```
//!
//! on `x in (0, L)` with no-flux boundaries.
//!
//! The crate is split by analysis route:
//!
//! * [`model`] - parameters, homogeneous steady states, well-mixed stability.
//! * [`stability`] - characteristic matrix, Routh-Hurwitz test, dispersion
//!   curves, instability domains and the critical competition strength.
//! * [`sim`] - finite-volume time integration to stationary patterns,
//!   perturbations, spike counting and finite-amplitude thresholds.
//! * [`spectral`] - cosine-series decomposition of stationary profiles and
//!   domain-size scans.
//! * [`galerkin`] - truncated cosine-Galerkin solution of the stationary
//!   problem by damped Newton iteration.
//!
//! Independent grid points of every sweep are evaluated through [`exec`],
//! which runs on rayon when the `parallel` feature is enabled and falls back to
//! a plain sequential loop otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exec;
pub mod galerkin;
pub mod model;
pub mod sim;
pub mod spectral;
pub mod stability;

pub use exec::Execution;
pub use model::{ModelParams, ParamError, SteadyState, StateKind};
