//! Verification lab for the Hamilton-Jacobi-Bellman equation of the
//! one-dimensional deterministic optimal-growth problem
//!
//! ```text
//! max ∫₀^∞ e^{-ρt} u(c(t)) dt   s.t.  k̇ = f(k) − c,  k, c ≥ 0
//! sup_{c≥0} {(f(k) − c) V'(k) + u(c)} = ρ V(k)
//! ```
//!
//! The crate evaluates candidate value functions against the HJB equation in
//! the classical and viscosity senses, certifies or rejects them by rolling out
//! the induced feedback policy, and cross-checks everything against an
//! independent discretized dynamic-programming oracle.
//!
//! Modules, bottom-up:
//! - [`model`]: utilities, technologies, conjugates, subdifferentials, assumption audit
//! - [`hamiltonian`]: the extended-real HJB left-hand side and residuals
//! - [`candidates`]: closed-form families, HJB-ODE grid solutions, pointwise minima
//! - [`viscosity`]: sub/supersolution tests with one-sided derivatives
//! - [`rollout`]: policy integration, payoffs, tails, certification
//! - [`dp_oracle`]: backward-induction estimate of the value function

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod candidates;
pub mod dp_oracle;
mod error;
mod extended;
pub mod hamiltonian;
pub mod model;
pub mod numeric;
pub mod rollout;
pub mod viscosity;

pub use error::{Error, Result};
pub use extended::ExtendedReal;
