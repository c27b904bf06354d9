//! Deterministic empirical risk minimization and the leave-one-out oracle.
//!
//! Influence predictions are only as good as the stationarity of θ̂, so the
//! default path is Newton-CG driven entirely by Hessian-vector products,
//! with a backtracking Armijo line search and a tight gradient tolerance
//! (1e-8). Everything is deterministic: fixed iteration order, no
//! randomized line search, bitwise-reproducible results for identical
//! inputs.
//!
//! Leave-one-out retraining keeps the original 1/n normalization: removing
//! point z minimizes `(1/n)Σ_{i≠z} L(z_i, θ)`. That differs from the mean
//! over n-1 points by a positive constant factor, so the minimizer is the
//! same, but gradients (and thus `tol_grad`) are measured on the 1/n
//! version — the scale on which the upweighting calculus that predicts
//! these deltas is defined.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::artifact::{ModelArtifact, TrainMeta};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::cg_solve;
use crate::models::ModelSpec;

/// Optimizer selection. Newton-CG is the default: quadratic local
/// convergence buys the tight stationarity influence accuracy needs.
/// L-BFGS (memory 10) is available for larger parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    NewtonCg,
    Lbfgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Stop when ‖∇R(θ)‖ drops to this value.
    pub tol_grad: f64,
    pub max_iters: usize,
    pub method: TrainMethod,
    /// Start point; zero vector when absent. Warm starts make repeated
    /// retraining (LOO sweeps, attack loops) cheap.
    #[serde(skip)]
    pub warm_start: Option<Array1<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tol_grad: 1e-8,
            max_iters: 100,
            method: TrainMethod::NewtonCg,
            warm_start: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !self.tol_grad.is_finite() || self.tol_grad <= 0.0 {
            return Err(Error::invalid(
                "tol_grad",
                format!("must be finite and > 0, got {}", self.tol_grad),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_warm_start(mut self, theta: Array1<f64>) -> Self {
        self.warm_start = Some(theta);
        self
    }
}

/// Result of one leave-one-out retraining.
#[derive(Debug, Clone)]
pub struct LooResult {
    pub removed_idx: usize,
    pub theta_minus: Array1<f64>,
    /// `L(z_test, θ_minus) - L(z_test, θ̂)` per registered test point, in
    /// the evaluation loss (which may be the non-smooth hinge).
    pub loss_deltas: Vec<f64>,
}

/// Train to ‖∇R‖ ≤ tol_grad and package the result.
pub fn train(spec: &ModelSpec, data: &Dataset, config: &TrainConfig) -> Result<ModelArtifact> {
    let (theta, meta) = minimize(spec, data, None, config)?;
    ModelArtifact::new(spec.clone(), theta, data.d(), data.k(), meta)
}

/// Retrain with one point removed (1/n normalization kept, warm-started at
/// the base parameters) and report test-loss deltas under `eval_spec`.
pub fn retrain_loo(
    spec: &ModelSpec,
    data: &Dataset,
    base: &ModelArtifact,
    removed_idx: usize,
    test_points: &Dataset,
    eval_spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<LooResult> {
    if removed_idx >= data.n() {
        return Err(Error::invalid(
            "removed_idx",
            format!("{removed_idx} out of range for n = {}", data.n()),
        ));
    }
    let mut cfg = config.clone();
    cfg.warm_start = Some(base.theta.clone());
    let (theta_minus, _) = minimize(spec, data, Some(removed_idx), &cfg)?;
    let mut loss_deltas = Vec::with_capacity(test_points.n());
    for t in test_points.examples() {
        let after = eval_spec.loss(&theta_minus, t)?;
        let before = eval_spec.loss(&base.theta, t)?;
        loss_deltas.push(after - before);
    }
    Ok(LooResult {
        removed_idx,
        theta_minus,
        loss_deltas,
    })
}

/// Deliberately non-converged training: plain gradient descent with a
/// backtracking line search, stopped at the first iterate whose gradient
/// norm is at or below `stop_at_grad_norm`. Newton would overshoot far past
/// the stopping band in one step; gradient descent approaches it gently,
/// which is the point — the result is a θ̃ with a controlled, nonzero
/// gradient for studying influence at non-convergence.
pub fn train_early_stopped(
    spec: &ModelSpec,
    data: &Dataset,
    config: &TrainConfig,
    stop_at_grad_norm: f64,
) -> Result<ModelArtifact> {
    config.validate()?;
    if !(stop_at_grad_norm > config.tol_grad) {
        return Err(Error::invalid(
            "stop_at_grad_norm",
            format!(
                "must exceed tol_grad ({} <= {})",
                stop_at_grad_norm, config.tol_grad
            ),
        ));
    }
    let p = spec.param_len(data.d(), data.k());
    let mut theta = match &config.warm_start {
        Some(t) => t.clone(),
        None => Array1::zeros(p),
    };
    let mut risk = spec.empirical_risk(&theta, data)?;
    for iteration in 0..config.max_iters {
        let g = spec.empirical_grad(&theta, data)?;
        let grad_norm = g.dot(&g).sqrt();
        if grad_norm <= stop_at_grad_norm {
            let meta = TrainMeta {
                objective: risk,
                grad_norm,
                iterations: iteration,
            };
            return ModelArtifact::new(spec.clone(), theta, data.d(), data.k(), meta);
        }
        let direction = -&g;
        let slope = g.dot(&direction);
        let (next_theta, next_risk) =
            armijo(spec, data, None, &theta, risk, &direction, slope, iteration)?;
        theta = next_theta;
        risk = next_risk;
    }
    let g = spec.empirical_grad(&theta, data)?;
    Err(Error::DidNotConverge {
        iterations: config.max_iters,
        grad_norm: g.dot(&g).sqrt(),
        tol_grad: stop_at_grad_norm,
        last_iterate: Box::new(theta),
    })
}

/// Core minimizer over the (optionally one-point-excluded) empirical risk.
pub(crate) fn minimize(
    spec: &ModelSpec,
    data: &Dataset,
    skip: Option<usize>,
    config: &TrainConfig,
) -> Result<(Array1<f64>, TrainMeta)> {
    config.validate()?;
    let p = spec.param_len(data.d(), data.k());
    let mut theta = match &config.warm_start {
        Some(t) => {
            if t.len() != p {
                return Err(Error::Dimension {
                    what: "warm start length",
                    expected: p,
                    got: t.len(),
                });
            }
            t.clone()
        }
        None => Array1::zeros(p),
    };
    let mut risk = spec.risk_excluding(&theta, data, skip)?;
    let mut lbfgs = LbfgsState::new(10);
    let mut prev: Option<(Array1<f64>, Array1<f64>)> = None; // (theta, grad)

    for iteration in 0..=config.max_iters {
        let g = spec.grad_excluding(&theta, data, skip)?;
        let grad_norm = g.dot(&g).sqrt();
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite {
                what: "training gradient".into(),
            });
        }
        if grad_norm <= config.tol_grad {
            return Ok((
                theta,
                TrainMeta {
                    objective: risk,
                    grad_norm,
                    iterations: iteration,
                },
            ));
        }
        if iteration == config.max_iters {
            return Err(Error::DidNotConverge {
                iterations: config.max_iters,
                grad_norm,
                tol_grad: config.tol_grad,
                last_iterate: Box::new(theta),
            });
        }

        let mut direction = match config.method {
            TrainMethod::NewtonCg => {
                // Inner CG on H·s = -g, tight tolerance so Newton quality
                // is not limited by the inner solve.
                let rhs = -&g;
                let scale = grad_norm;
                let sol = cg_solve(
                    |v| spec.hvp_excluding(&theta, data, v, skip),
                    &rhs,
                    None,
                    scale,
                    1e-8,
                    (4 * p).max(50),
                )?;
                sol.x
            }
            TrainMethod::Lbfgs => {
                if let Some((pt, pg)) = prev.take() {
                    lbfgs.push(&theta - &pt, &g - &pg);
                }
                prev = Some((theta.clone(), g.clone()));
                lbfgs.direction(&g)
            }
        };
        let mut slope = g.dot(&direction);
        if !(slope < 0.0) {
            // Curvature defect (numerically possible near machine
            // precision): fall back to steepest descent.
            direction = -&g;
            slope = g.dot(&direction);
        }
        let (next_theta, next_risk) =
            armijo(spec, data, skip, &theta, risk, &direction, slope, iteration)?;
        theta = next_theta;
        risk = next_risk;
    }
    unreachable!("loop always returns");
}

/// Backtracking Armijo line search: halve the step until the sufficient
/// decrease condition `R(θ + t·s) ≤ R(θ) + 1e-4·t·gᵀs` holds.
#[allow(clippy::too_many_arguments)]
fn armijo(
    spec: &ModelSpec,
    data: &Dataset,
    skip: Option<usize>,
    theta: &Array1<f64>,
    risk: f64,
    direction: &Array1<f64>,
    slope: f64,
    iteration: usize,
) -> Result<(Array1<f64>, f64)> {
    const C1: f64 = 1e-4;
    let mut step = 1.0;
    for _ in 0..60 {
        let candidate = theta + &(direction * step);
        let candidate_risk = spec.risk_excluding(&candidate, data, skip)?;
        if candidate_risk.is_finite() && candidate_risk <= risk + C1 * step * slope {
            return Ok((candidate, candidate_risk));
        }
        step *= 0.5;
    }
    Err(Error::LineSearchFailed { iteration })
}

/// Bounded-memory curvature history for L-BFGS (two-loop recursion).
struct LbfgsState {
    memory: usize,
    s: Vec<Array1<f64>>,
    y: Vec<Array1<f64>>,
    rho: Vec<f64>,
}

impl LbfgsState {
    fn new(memory: usize) -> Self {
        LbfgsState {
            memory,
            s: Vec::new(),
            y: Vec::new(),
            rho: Vec::new(),
        }
    }

    fn push(&mut self, s: Array1<f64>, y: Array1<f64>) {
        let sy = s.dot(&y);
        let guard = 1e-10 * s.dot(&s).sqrt() * y.dot(&y).sqrt();
        if sy <= guard {
            // Curvature condition failed (can happen with a pure Armijo
            // search); skipping the pair keeps the inverse-Hessian estimate
            // positive definite.
            return;
        }
        if self.s.len() == self.memory {
            self.s.remove(0);
            self.y.remove(0);
            self.rho.remove(0);
        }
        self.rho.push(1.0 / sy);
        self.s.push(s);
        self.y.push(y);
    }

    fn direction(&self, g: &Array1<f64>) -> Array1<f64> {
        let mut q = -g.clone();
        if self.s.is_empty() {
            return q;
        }
        let m = self.s.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = self.rho[i] * self.s[i].dot(&q);
            q.scaled_add(-alpha[i], &self.y[i]);
        }
        let last = m - 1;
        let gamma = self.s[last].dot(&self.y[last]) / self.y[last].dot(&self.y[last]);
        q *= gamma;
        for i in 0..m {
            let beta = self.rho[i] * self.y[i].dot(&q);
            q.scaled_add(alpha[i] - beta, &self.s[i]);
        }
        q
    }
}
