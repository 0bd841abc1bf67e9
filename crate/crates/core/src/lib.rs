//! Convex-combination TVD IMEX Runge–Kutta schemes for multi-scale hyperbolic
//! problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`tableaux`]: IMEX double Butcher tableaux, the built-in schemes and
//!   order-condition residuals.
//! - [`certify`]: TVD / L∞ stability certificates for the convex-combination
//!   schemes and the admissible CFL number λ.
//! - [`stepper`]: the generic convex and plain IMEX-RK time steppers over a
//!   [`stepper::SemiDiscreteProblem`].
//! - [`mood`]: a posteriori accept/fallback driver over a hierarchy of schemes.
//! - [`advection1d`]: the scalar two-speed advection problem.
//! - [`euler2d`]: 2D isentropic Euler with explicit convection and implicit
//!   acoustics.
//! - [`metrics`]: error norms, overshoot quasinorm, space-time errors, EOC.
//! - [`tab_opt`]: multistart search for certifiable tableaux.

pub mod advection1d;
pub mod certify;
pub mod error;
pub mod euler2d;
pub mod linalg;
pub mod metrics;
pub mod mood;
pub mod reconstruct;
pub mod stepper;
pub mod tab_opt;
pub mod tableaux;

pub use error::{Error, Result};
