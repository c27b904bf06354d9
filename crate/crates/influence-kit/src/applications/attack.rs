//! Training-set attack: nudge a small number of training points inside
//! the quantization-preserving ball around their original feature values,
//! following the sign of the perturbation influence against the targets'
//! average loss, retraining after every step, until the target
//! predictions flip.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ihvp::{ihvp, IhvpConfig};
use crate::models::ModelSpec;
use crate::trainer::{train, TrainConfig};

/// Half-step ties this close to the cell boundary resolve toward the
/// original code instead of by rounding direction.
const TIE_EPS: f64 = 1e-9;

/// Knobs that are not part of the attack itself: how models are (re)fit
/// and how inverse-Hessian-vector products are computed.
#[derive(Debug, Clone, Default)]
pub struct AttackConfig {
    pub train: TrainConfig,
    pub ihvp: IhvpConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackIteration {
    pub iteration: usize,
    /// Average loss of the target points under the freshly retrained model.
    pub mean_target_loss: f64,
    /// Target indices whose prediction currently differs from the clean
    /// model's.
    pub flipped: Vec<usize>,
    /// Largest |poisoned − original| over the perturbed rows.
    pub max_sup_displacement: f64,
    /// Whether every poisoned feature still rounds to its original code.
    pub quantization_ok: bool,
}

#[derive(Debug, Clone)]
pub struct AttackState {
    pub poisoned_data: Dataset,
    /// Training rows the attack was allowed to move, in selection order
    /// (largest perturbation influence first).
    pub perturbed_indices: Vec<usize>,
    pub alpha: f64,
    pub levels: usize,
    /// Iterations actually run.
    pub iteration: usize,
    /// Target indices whose prediction changed relative to the clean model.
    pub flips: Vec<usize>,
    pub log: Vec<AttackIteration>,
    pub final_theta: Array1<f64>,
}

/// Run the iterated sign-step attack. `attack_budget` training points are
/// chosen once, by largest sup-norm of their perturbation influence
/// against the targets' average loss, and only those points ever move.
#[allow(clippy::too_many_arguments)]
pub fn run_training_attack(
    spec: &ModelSpec,
    data: &Dataset,
    target_test_points: &Dataset,
    alpha: f64,
    levels: usize,
    max_iters: usize,
    attack_budget: usize,
    config: &AttackConfig,
) -> Result<AttackState> {
    if target_test_points.n() == 0 {
        return Err(Error::invalid(
            "target_test_points",
            "need at least one target",
        ));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::invalid(
            "alpha",
            format!("step size must be finite and >= 0, got {alpha}"),
        ));
    }
    if levels < 2 {
        return Err(Error::invalid(
            "levels",
            "need at least 2 quantization levels",
        ));
    }
    if attack_budget == 0 || attack_budget > data.n() {
        return Err(Error::invalid(
            "attack_budget",
            format!("must lie in 1..={}, got {attack_budget}", data.n()),
        ));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters", "must be >= 1"));
    }
    for v in data.features().iter() {
        if !(0.0..=1.0).contains(v) {
            return Err(Error::invalid(
                "data",
                format!("attack features must lie in [0,1], found {v}"),
            ));
        }
    }

    let base = train(spec, data, &config.train)?;
    let base_signs = sign_predictions(&base.theta, target_test_points);

    // One ranking pass against the clean model picks the points to move.
    let s_avg = averaged_s_test(spec, &base.theta, data, target_test_points, &config.ihvp)?;
    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(data.n());
    for idx in 0..data.n() {
        let ipert = pert_direction(spec, &base.theta, data, idx, &s_avg, 0)?;
        let sup = ipert.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ranked.push((idx, sup));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let perturbed_indices: Vec<usize> = ranked[..attack_budget]
        .iter()
        .map(|&(idx, _)| idx)
        .collect();

    let q = 1.0 / (levels - 1) as f64;
    let original = data.features().to_owned();
    let original_codes: Array2<i64> = original.mapv(|v| (v / q).round() as i64);

    let mut poisoned = data.clone();
    let mut theta = base.theta.clone();
    let mut log: Vec<AttackIteration> = Vec::new();
    let mut flips: Vec<usize> = Vec::new();
    let mut iterations_run = 0usize;

    for iteration in 1..=max_iters {
        iterations_run = iteration;
        let s_iter = averaged_s_test(spec, &theta, &poisoned, target_test_points, &config.ihvp)?;
        for &idx in &perturbed_indices {
            let direction = pert_direction(spec, &theta, &poisoned, idx, &s_iter, iteration)?;
            let mut row = poisoned.features_row_mut(idx);
            for j in 0..row.len() {
                let step = alpha * sign(direction[j]);
                if step == 0.0 {
                    continue;
                }
                let orig = original[[idx, j]];
                let code = original_codes[[idx, j]] as f64;
                let lo = (orig - 0.5 * q).max((code - 0.5) * q).max(0.0);
                let hi = (orig + 0.5 * q).min((code + 0.5) * q).min(1.0);
                row[j] = (row[j] + step).clamp(lo, hi);
            }
        }
        let warm = config.train.clone().with_warm_start(theta);
        let model = train(spec, &poisoned, &warm)?;
        theta = model.theta;

        let signs = sign_predictions(&theta, target_test_points);
        flips = signs
            .iter()
            .zip(&base_signs)
            .enumerate()
            .filter(|(_, (now, before))| now != before)
            .map(|(j, _)| j)
            .collect();
        let mut mean_target_loss = 0.0;
        for j in 0..target_test_points.n() {
            mean_target_loss += spec.loss(&theta, target_test_points.example(j))?;
        }
        mean_target_loss /= target_test_points.n() as f64;

        log.push(AttackIteration {
            iteration,
            mean_target_loss,
            flipped: flips.clone(),
            max_sup_displacement: max_displacement(&poisoned, &original, &perturbed_indices),
            quantization_ok: quantization_preserved(
                &poisoned,
                &original,
                &original_codes,
                &perturbed_indices,
                levels,
            ),
        });
        if flips.len() == target_test_points.n() {
            break;
        }
    }

    Ok(AttackState {
        poisoned_data: poisoned,
        perturbed_indices,
        alpha,
        levels,
        iteration: iterations_run,
        flips,
        log,
        final_theta: theta,
    })
}

/// `(H+λI)⁻¹` applied to the mean target gradient; by linearity this is
/// the mean of the per-target solves.
fn averaged_s_test(
    spec: &ModelSpec,
    theta: &Array1<f64>,
    data: &Dataset,
    targets: &Dataset,
    config: &IhvpConfig,
) -> Result<Array1<f64>> {
    let mut g = Array1::<f64>::zeros(theta.len());
    for j in 0..targets.n() {
        g += &spec.grad_theta(theta, targets.example(j))?;
    }
    g /= targets.n() as f64;
    Ok(ihvp(spec, theta, data, &g, config)?.s)
}

fn pert_direction(
    spec: &ModelSpec,
    theta: &Array1<f64>,
    data: &Dataset,
    idx: usize,
    s_avg: &Array1<f64>,
    iteration: usize,
) -> Result<Array1<f64>> {
    let mixed = spec.grad_x_grad_theta_left(theta, data.example(idx), s_avg)?;
    let direction = -mixed;
    if direction.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: format!("perturbation influence for train index {idx} at iteration {iteration}"),
        });
    }
    Ok(direction)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn sign_predictions(theta: &Array1<f64>, targets: &Dataset) -> Vec<i32> {
    (0..targets.n())
        .map(|j| {
            if theta.dot(&targets.features().row(j)) >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

fn max_displacement(poisoned: &Dataset, original: &Array2<f64>, rows: &[usize]) -> f64 {
    let mut sup = 0.0f64;
    for &idx in rows {
        for (a, b) in poisoned.features().row(idx).iter().zip(original.row(idx)) {
            sup = sup.max((a - b).abs());
        }
    }
    sup
}

/// Exact check of the invisibility invariant: every poisoned feature
/// quantizes to its original code (half-step ties going to the original),
/// stays within q/2 of the original, stays in [0,1], and every
/// unperturbed row is bitwise untouched.
fn quantization_preserved(
    poisoned: &Dataset,
    original: &Array2<f64>,
    original_codes: &Array2<i64>,
    perturbed: &[usize],
    levels: usize,
) -> bool {
    let q = 1.0 / (levels - 1) as f64;
    let features = poisoned.features();
    for idx in 0..poisoned.n() {
        let row = features.row(idx);
        if !perturbed.contains(&idx) {
            if row
                .iter()
                .zip(original.row(idx))
                .any(|(a, b)| a.to_bits() != b.to_bits())
            {
                return false;
            }
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            let orig = original[[idx, j]];
            let code = original_codes[[idx, j]];
            if !(0.0..=1.0).contains(&v) {
                return false;
            }
            if (v - orig).abs() > 0.5 * q + 1e-12 {
                return false;
            }
            if quantize_toward(v, levels, code) != code {
                return false;
            }
        }
    }
    true
}

/// Round `v` to a grid code, resolving half-step ties toward `reference`.
fn quantize_toward(v: f64, levels: usize, reference: i64) -> i64 {
    let scaled = v * (levels - 1) as f64;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let lo = floor as i64;
    if (frac - 0.5).abs() <= TIE_EPS {
        if reference == lo || reference == lo + 1 {
            reference
        } else if frac >= 0.5 {
            lo + 1
        } else {
            lo
        }
    } else if frac > 0.5 {
        lo + 1
    } else {
        lo
    }
}
