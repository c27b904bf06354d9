//! The Newton-step identity behind using influence at a model that has not
//! fully converged.
//!
//! At an early-stopped point θ̃ with nonvanishing risk gradient g, the
//! single damped Newton step of the ε-upweighted objective,
//!
//! ```text
//! N(ε, z) = -[H + εH_z + λI]⁻¹ (g + ε∇L(z, θ̃))
//! ```
//!
//! splits, to first order in ε, into the plain step `-(H+λI)⁻¹g` plus
//! `ε · (-(H+λI)⁻¹∇L(z))`, which is ε times the upweighting parameter
//! influence. The check below measures the deviation between the exact
//! step and that split; the dropped terms carry a factor of ε, so the
//! deviation contracts linearly as ε shrinks. On a quadratic objective
//! the exact step itself is no approximation at all — one undamped step
//! lands on the minimizer of the reweighted risk — which is what makes
//! it a legitimate ground truth for the split to be measured against.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ExampleRef};
use crate::error::{Error, Result};
use crate::ihvp::EXPLICIT_LIMIT;
use crate::linalg::{symmetrize, CholeskyFactor};
use crate::models::ModelSpec;
use crate::trainer::{train_early_stopped, TrainConfig};

/// Exact Newton step of the ε-upweighted, λ-damped objective at `theta`.
pub fn upweighted_newton_step(
    spec: &ModelSpec,
    data: &Dataset,
    theta: &Array1<f64>,
    z: ExampleRef<'_>,
    epsilon: f64,
    damping: f64,
) -> Result<Array1<f64>> {
    let p = theta.len();
    if p > EXPLICIT_LIMIT {
        return Err(Error::TooLarge {
            p,
            limit: EXPLICIT_LIMIT,
        });
    }
    let mut a = Array2::<f64>::zeros((p, p));
    let mut basis = Array1::<f64>::zeros(p);
    for j in 0..p {
        basis[j] = 1.0;
        let mut col = spec.empirical_hvp(theta, data, &basis)?;
        col.scaled_add(epsilon, &spec.hvp(theta, z, &basis)?);
        col[j] += damping;
        a.column_mut(j).assign(&col);
        basis[j] = 0.0;
    }
    symmetrize(&mut a);
    let mut rhs = spec.empirical_grad(theta, data)?;
    rhs.scaled_add(epsilon, &spec.grad_theta(theta, z)?);
    let factor = CholeskyFactor::factor(&a)?;
    Ok(-factor.solve(&rhs))
}

/// Per-point deviation between the exact upweighted step and its
/// first-order split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityDeviation {
    pub train_idx: usize,
    /// ‖N_exact - N_split‖ / ‖N_exact‖.
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// ‖∇R(θ̃)‖ at the early-stopped parameters.
    pub grad_norm: f64,
    pub epsilon: f64,
    pub damping: f64,
    pub per_point: Vec<IdentityDeviation>,
    pub max_relative_deviation: f64,
}

/// Early-stop a training run at `stop_at_grad_norm`, then compare the
/// exact ε-upweighted Newton step against `-(H+λI)⁻¹g + ε·I_up,params`
/// for each index in `sample_points`.
pub fn check_nonconvergence_identity(
    spec: &ModelSpec,
    data: &Dataset,
    stop_at_grad_norm: f64,
    damping: f64,
    epsilon: f64,
    sample_points: &[usize],
    train_config: &TrainConfig,
) -> Result<IdentityCheck> {
    let stopped = train_early_stopped(spec, data, train_config, stop_at_grad_norm)?;
    check_identity_at(
        spec,
        data,
        &stopped.theta,
        stopped.train_meta.grad_norm,
        damping,
        epsilon,
        sample_points,
    )
}

/// The comparison itself, at caller-supplied parameters.
pub fn check_identity_at(
    spec: &ModelSpec,
    data: &Dataset,
    theta: &Array1<f64>,
    grad_norm: f64,
    damping: f64,
    epsilon: f64,
    sample_points: &[usize],
) -> Result<IdentityCheck> {
    let p = theta.len();
    if p > EXPLICIT_LIMIT {
        return Err(Error::TooLarge {
            p,
            limit: EXPLICIT_LIMIT,
        });
    }
    // One damped Hessian factorization serves the plain step and every
    // per-point influence term.
    let mut h = Array2::<f64>::zeros((p, p));
    let mut basis = Array1::<f64>::zeros(p);
    for j in 0..p {
        basis[j] = 1.0;
        let mut col = spec.empirical_hvp(theta, data, &basis)?;
        col[j] += damping;
        h.column_mut(j).assign(&col);
        basis[j] = 0.0;
    }
    symmetrize(&mut h);
    let factor = CholeskyFactor::factor(&h)?;
    let g = spec.empirical_grad(theta, data)?;
    let plain_step = -factor.solve(&g);
    let mut per_point = Vec::with_capacity(sample_points.len());
    let mut max_dev = 0.0f64;
    for &idx in sample_points {
        if idx >= data.n() {
            return Err(Error::invalid(
                "sample point",
                format!("index {idx} out of range for n = {}", data.n()),
            ));
        }
        let z = data.example(idx);
        let exact = upweighted_newton_step(spec, data, theta, z, epsilon, damping)?;
        let g_z = spec.grad_theta(theta, z)?;
        let split = &plain_step - &(factor.solve(&g_z) * epsilon);
        let diff = &exact - &split;
        let denom = exact.dot(&exact).sqrt().max(1e-300);
        let relative_deviation = diff.dot(&diff).sqrt() / denom;
        max_dev = max_dev.max(relative_deviation);
        per_point.push(IdentityDeviation {
            train_idx: idx,
            relative_deviation,
        });
    }
    Ok(IdentityCheck {
        grad_norm,
        epsilon,
        damping,
        per_point,
        max_relative_deviation: max_dev,
    })
}
