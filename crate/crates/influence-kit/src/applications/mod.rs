//! The end-to-end workflows built on the estimators: leave-one-out
//! validation, the non-convergence Newton-step identity check, the
//! smooth-hinge temperature sweep, mislabel triage, and the training-set
//! attack.

pub mod attack;
pub mod identity;
pub mod loo;
pub mod sweep;
pub mod triage;

pub use crate::stats::{pearson_r, spearman_r};
pub use attack::{run_training_attack, AttackConfig, AttackIteration, AttackState};
pub use identity::{check_nonconvergence_identity, upweighted_newton_step, IdentityCheck};
pub use loo::{run_loo_validation, LooPair, LooPredictor, ValidationRun};
pub use sweep::{run_smooth_hinge_sweep, SweepConfig, SweepRun, TemperatureRun};
pub use triage::{run_mislabel_triage, TriageCurvePoint, TriageRun, TriageStrategy};
