//! Influence functions for convex classifiers.
//!
//! This crate answers the question "which training points were responsible
//! for this prediction?" without actually retraining the model once per
//! training point. For an empirical risk minimizer θ̂ over n points, the
//! influence of upweighting a training point z on the loss at a test point
//! z_test is
//!
//! ```text
//! i_up_loss(z, z_test) = -∇L(z_test, θ̂)ᵀ H⁻¹ ∇L(z, θ̂)
//! ```
//!
//! where H is the (regularized) empirical Hessian at θ̂. Scaling by -1/n
//! yields a closed-form prediction of the leave-one-out retraining delta,
//! which this crate can also measure exactly by brute-force retraining, so
//! every approximation ships with its own oracle.
//!
//! The pieces:
//!
//! * [`data`] — datasets, CSV/svmlight ingestion, model persistence.
//! * [`models`] — loss families (binary/multinomial logistic, smooth hinge,
//!   ridge) with hand-derived gradients, Hessian-vector products, and the
//!   mixed derivative ∇ₓ∇θL needed for input perturbations.
//! * [`trainer`] — deterministic Newton-CG / L-BFGS training and the
//!   leave-one-out retraining oracle.
//! * [`ihvp`] — three backends for solving H s = v: explicit factorization,
//!   conjugate gradients, and a seeded stochastic truncated-series
//!   estimator.
//! * [`influence`] — the influence estimators themselves, batched over a
//!   training set, plus the closed-form logistic variants.
//! * [`applications`] — end-to-end workflows: leave-one-out validation,
//!   a non-convergence Newton-step identity check, the smooth-hinge
//!   temperature sweep, mislabel triage, and a training-set attack.
//! * [`synth`] — seeded synthetic dataset generators so everything above is
//!   runnable out of the box.
//!
//! Entry points for a quick tour are [`trainer::train`],
//! [`influence::influence_up_loss_batch`], and
//! [`applications::loo::run_loo_validation`]; the `examples/` directory
//! exercises each workflow end to end.

pub mod applications;
pub mod artifact;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod ihvp;
pub mod influence;
mod linalg;
pub mod models;
pub mod report;
pub mod stats;
pub mod synth;
pub mod trainer;

pub use artifact::ModelArtifact;
pub use data::{Dataset, Example, ExampleRef};
pub use error::{Error, Result};
pub use ihvp::{IhvpConfig, IhvpMethod, IhvpResult};
pub use influence::{InfluenceReport, InfluenceScore};
pub use models::{Family, ModelSpec};
pub use trainer::{TrainConfig, TrainMethod};
