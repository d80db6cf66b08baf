//! Constrained risk lower bounds for general losses.
//!
//! If an estimator `θ̂` has risk at most `δ` at a distribution `P₀`, its risk
//! at any other `P₁` is bounded below in terms of the separation `Δ` between
//! `θ(P₀)` and `θ(P₁)` and the χ²-affinity `∫ dP₁²/dP₀`:
//!
//! ```
//! use constrained_risk::bounds::bound_convex;
//!
//! // Δ = 1, χ²₊₁ = 10, δ = 0.01
//! let r = bound_convex(1.0, 10.0, 0.01).unwrap();
//! assert!((r.value - (1.0 - 0.1f64.sqrt()).powi(2)).abs() < 1e-15);
//! ```
//!
//! The crate is organised as
//!
//! - [`loss`]: losses `ℓ(‖v − θ‖)` with a declared class, and the separation `Δ`;
//! - [`dist`]: Gaussian, discrete, tilted and product models;
//! - [`divergence`]: χ²-affinities by closed form, tensorization, quadrature
//!   and Monte Carlo;
//! - [`bounds`]: the bounds themselves;
//! - [`sim`]: Monte Carlo risk, Hodges estimators and a finite-instance oracle;
//! - [`experiments`]: drivers that reproduce the super-efficiency results at
//!   finite `n`.
//!
//! Every random quantity is driven by a `u64` seed and is reproducible
//! bit-for-bit regardless of the number of threads.

pub mod bounds;
pub mod dist;
pub mod divergence;
pub mod error;
pub mod experiments;
pub mod loss;
pub mod quad;
pub mod rng;
pub mod sim;

pub use bounds::{bound_convex, bound_from_models, bound_generic, bound_power, hinge, BoundBranch, BoundReport};
pub use dist::{Model, Score, TiltedModel};
pub use divergence::{AffinityMethod, AffinityResult};
pub use error::{Error, Result};
pub use loss::{LossClass, LossFn};
pub use sim::{Estimator, RiskEstimate};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/affinities.md")]
    mod affinities {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/tilting.md")]
    mod tilting {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
