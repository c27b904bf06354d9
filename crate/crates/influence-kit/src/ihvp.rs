//! Inverse-Hessian-vector products: three interchangeable backends for
//! solving `(H + λI)·s = v` where H is the empirical Hessian at θ.
//!
//! * `explicit` — assemble the dense matrix (one empirical HVP per basis
//!   vector), factor it, solve. O(np² + p³); the oracle the other two are
//!   judged against. Refuses p > 2000.
//! * `cg` — conjugate gradients on the equivalent quadratic
//!   `min_t ½tᵀ(H+λI)t - vᵀt`, touching H only through HVPs.
//! * `lissa` — a seeded stochastic truncated-series estimator. With the
//!   Hessian scaled so `(H+λI)/scale ⪯ I`, the recursion
//!   `u_j = v + u_{j-1} - Ĥ_j u_{j-1}` (Ĥ_j a per-step sampled one-example
//!   Hessian, scaled) converges in expectation to `scale·(H+λI)⁻¹v`; r
//!   independent repeats are averaged and the result unscaled.
//!
//! Damping λ is applied identically in every backend, making the solve
//! equivalent to working with the λ-regularized quadratic surrogate that
//! rescues non-converged or barely-convex models.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, symmetrize, CholeskyFactor};
use crate::models::{Family, ModelSpec};

/// Largest parameter count the explicit backend will materialize.
pub const EXPLICIT_LIMIT: usize = 2000;

/// Iterate-norm blowup factor that declares the stochastic recursion
/// divergent.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IhvpMethod {
    Explicit,
    Cg,
    Lissa,
}

impl IhvpMethod {
    pub fn name(&self) -> &'static str {
        match self {
            IhvpMethod::Explicit => "explicit",
            IhvpMethod::Cg => "cg",
            IhvpMethod::Lissa => "lissa",
        }
    }
}

/// Backend selection plus every knob any backend needs. Unused fields are
/// ignored by the other backends, which keeps configs serializable as one
/// flat record in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IhvpConfig {
    pub method: IhvpMethod,
    /// λ added to the Hessian diagonal in every backend. Zero is fine for a
    /// converged strictly convex model; non-converged or attack workflows
    /// typically use 0.01.
    pub damping: f64,
    pub cg_tol_residual: f64,
    pub cg_max_iters: usize,
    /// Recursion depth t of each stochastic repeat.
    pub lissa_depth: usize,
    /// Number of independent repeats averaged.
    pub lissa_repeats: usize,
    /// Spectral scale; `None` picks an analytic per-family bound (see
    /// [`default_lissa_scale`]).
    pub lissa_scale: Option<f64>,
    /// Examples sampled per recursion step (mini-batching; 1 matches the
    /// plain estimator).
    pub lissa_batch: usize,
    pub seed: u64,
}

impl Default for IhvpConfig {
    fn default() -> Self {
        IhvpConfig {
            method: IhvpMethod::Explicit,
            damping: 0.0,
            cg_tol_residual: 1e-8,
            cg_max_iters: 1000,
            lissa_depth: 1000,
            lissa_repeats: 10,
            lissa_scale: None,
            lissa_batch: 1,
            seed: 0,
        }
    }
}

impl IhvpConfig {
    pub fn explicit() -> Self {
        IhvpConfig::default()
    }

    pub fn cg() -> Self {
        IhvpConfig {
            method: IhvpMethod::Cg,
            ..IhvpConfig::default()
        }
    }

    pub fn lissa(depth: usize, repeats: usize, seed: u64) -> Self {
        IhvpConfig {
            method: IhvpMethod::Lissa,
            lissa_depth: depth,
            lissa_repeats: repeats,
            seed,
            ..IhvpConfig::default()
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.damping.is_finite() || self.damping < 0.0 {
            return Err(Error::invalid(
                "damping",
                format!("must be finite and >= 0, got {}", self.damping),
            ));
        }
        match self.method {
            IhvpMethod::Cg => {
                if !(self.cg_tol_residual > 0.0) {
                    return Err(Error::invalid("cg_tol_residual", "must be > 0"));
                }
                if self.cg_max_iters == 0 {
                    return Err(Error::invalid("cg_max_iters", "must be >= 1"));
                }
            }
            IhvpMethod::Lissa => {
                if self.lissa_depth == 0 {
                    return Err(Error::invalid("lissa_depth", "must be >= 1"));
                }
                if self.lissa_repeats == 0 {
                    return Err(Error::invalid("lissa_repeats", "must be >= 1"));
                }
                if self.lissa_batch == 0 {
                    return Err(Error::invalid("lissa_batch", "must be >= 1"));
                }
                if let Some(s) = self.lissa_scale {
                    if !(s > 0.0) {
                        return Err(Error::invalid("lissa_scale", "must be > 0"));
                    }
                }
            }
            IhvpMethod::Explicit => {}
        }
        Ok(())
    }
}

/// What a solve did, serialized verbatim into report JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IhvpDiagnostics {
    pub method: String,
    pub damping: f64,
    /// CG iterations, where applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    /// True residual ‖(H+λI)s - v‖ measured after the solve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub divergence_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IhvpResult {
    pub s: Array1<f64>,
    pub diagnostics: IhvpDiagnostics,
}

/// Dispatch on the configured backend.
pub fn ihvp(
    spec: &ModelSpec,
    theta: &Array1<f64>,
    data: &Dataset,
    v: &Array1<f64>,
    config: &IhvpConfig,
) -> Result<IhvpResult> {
    config.validate()?;
    match config.method {
        IhvpMethod::Explicit => ihvp_explicit(spec, theta, data, v, config.damping),
        IhvpMethod::Cg => ihvp_cg(spec, theta, data, v, config),
        IhvpMethod::Lissa => ihvp_lissa(spec, theta, data, v, config),
    }
}

/// Assemble the dense damped empirical Hessian, column by column, from
/// empirical HVPs against basis vectors.
pub fn assemble_dense_hessian(
    spec: &ModelSpec,
    theta: &Array1<f64>,
    data: &Dataset,
    damping: f64,
) -> Result<Array2<f64>> {
    let p = theta.len();
    if p > EXPLICIT_LIMIT {
        return Err(Error::TooLarge {
            p,
            limit: EXPLICIT_LIMIT,
        });
    }
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
    Ok(h)
}

/// Dense factorization backend; the accuracy oracle.
pub fn ihvp_explicit(
    spec: &ModelSpec,
    theta: &Array1<f64>,
    data: &Dataset,
    v: &Array1<f64>,
    damping: f64,
) -> Result<IhvpResult> {
    let vnorm = v.dot(v).sqrt();
    let mut diagnostics = IhvpDiagnostics {
        method: "explicit".into(),
        damping,
        iterations: None,
        depth: None,
        repeats: None,
        residual: Some(0.0),
        divergence_flag: false,
        seed: None,
        scale: None,
    };
    if vnorm == 0.0 {
        return Ok(IhvpResult {
            s: Array1::zeros(v.len()),
            diagnostics,
        });
    }
    let h = assemble_dense_hessian(spec, theta, data, damping)?;
    let factor = CholeskyFactor::factor(&h)?;
    let mut s = factor.solve(v);
    // One or two rounds of iterative refinement push the residual to the
    // 1e-10·‖v‖ contract even for moderately ill-conditioned systems.
    let mut residual = v - &h.dot(&s);
    for _ in 0..2 {
        if residual.dot(&residual).sqrt() <= 1e-10 * vnorm {
            break;
        }
        s += &factor.solve(&residual);
        residual = v - &h.dot(&s);
    }
    diagnostics.residual = Some(residual.dot(&residual).sqrt());
    Ok(IhvpResult { s, diagnostics })
}

/// Conjugate-gradient backend: only HVPs, no materialized matrix.
pub fn ihvp_cg(
    spec: &ModelSpec,
    theta: &Array1<f64>,
    data: &Dataset,
    v: &Array1<f64>,
    config: &IhvpConfig,
) -> Result<IhvpResult> {
    let damping = config.damping;
    let vnorm = v.dot(v).sqrt();
    let mut diagnostics = IhvpDiagnostics {
        method: "cg".into(),
        damping,
        iterations: Some(0),
        depth: None,
        repeats: None,
        residual: Some(0.0),
        divergence_flag: false,
        seed: None,
        scale: None,
    };
    if vnorm == 0.0 {
        return Ok(IhvpResult {
            s: Array1::zeros(v.len()),
            diagnostics,
        });
    }
    let apply = |t: &Array1<f64>| -> Result<Array1<f64>> {
        let mut out = spec.empirical_hvp(theta, data, t)?;
        out.scaled_add(damping, t);
        Ok(out)
    };
    let mut total_iters = 0;
    let mut x: Option<Array1<f64>> = None;
    // The recursively updated residual can drift from the true one; verify
    // and restart from the current iterate if the drift matters.
    for _attempt in 0..2 {
        let sol = cg_solve(
            &apply,
            v,
            x.take(),
            vnorm,
            config.cg_tol_residual,
            config.cg_max_iters.saturating_sub(total_iters),
        )?;
        total_iters += sol.iterations;
        let true_residual = v - &apply(&sol.x)?;
        let rnorm = true_residual.dot(&true_residual).sqrt();
        x = Some(sol.x);
        diagnostics.residual = Some(rnorm);
        if rnorm <= config.cg_tol_residual * vnorm || total_iters >= config.cg_max_iters {
            break;
        }
    }
    diagnostics.iterations = Some(total_iters);
    if diagnostics.residual.unwrap_or(f64::INFINITY) > config.cg_tol_residual * vnorm {
        log::warn!(
            "cg stopped at {} iterations with residual {:.3e} (target {:.3e})",
            total_iters,
            diagnostics.residual.unwrap(),
            config.cg_tol_residual * vnorm
        );
    }
    Ok(IhvpResult {
        s: x.expect("set in loop"),
        diagnostics,
    })
}

/// Analytic default for the stochastic backend's spectral scale.
///
/// Per-example curvature of the margin families is bounded by
/// `sup φ''·‖x‖² + l2`; with φ'' ≤ 1/4 for logistic, 1/(4t) for the smooth
/// hinge, 1 for ridge and (conservatively) 1 for multinomial. The scale is
/// twice the bound of the damped Hessian: every sampled step matrix stays
/// contractive, while the series still converges within a few thousand
/// steps instead of stalling the way a very loose scale would.
pub fn default_lissa_scale(spec: &ModelSpec, data: &Dataset, damping: f64) -> Result<f64> {
    let factor = match spec.family {
        Family::BinaryLogistic => 0.25,
        Family::SmoothHinge { temperature } => 0.25 / temperature,
        Family::Ridge => 1.0,
        Family::MultinomialLogistic => 1.0,
        Family::Hinge => {
            return Err(Error::Unsupported {
                family: "hinge",
                op: "lissa scale",
                hint: "the hinge family has no Hessian; use smooth_hinge",
            })
        }
    };
    let max_sq = data
        .features()
        .outer_iter()
        .map(|row| row.dot(&row))
        .fold(0.0, f64::max);
    Ok(2.0 * (spec.l2 + damping + factor * max_sq))
}

/// Stochastic truncated-series backend.
pub fn ihvp_lissa(
    spec: &ModelSpec,
    theta: &Array1<f64>,
    data: &Dataset,
    v: &Array1<f64>,
    config: &IhvpConfig,
) -> Result<IhvpResult> {
    let damping = config.damping;
    let scale = match config.lissa_scale {
        Some(s) => s,
        None => default_lissa_scale(spec, data, damping)?,
    };
    let vnorm = v.dot(v).sqrt();
    let mut diagnostics = IhvpDiagnostics {
        method: "lissa".into(),
        damping,
        iterations: None,
        depth: Some(config.lissa_depth),
        repeats: Some(config.lissa_repeats),
        residual: None,
        divergence_flag: false,
        seed: Some(config.seed),
        scale: Some(scale),
    };
    if vnorm == 0.0 {
        diagnostics.residual = Some(0.0);
        return Ok(IhvpResult {
            s: Array1::zeros(v.len()),
            diagnostics,
        });
    }
    let n = data.n();
    let run_repeat = |repeat: usize| -> Result<Array1<f64>> {
        // Per-repeat stream: seed + repeat index. Repeats are independent
        // and reproducible regardless of execution order.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(repeat as u64));
        let mut u = v.clone();
        let limit = DIVERGENCE_FACTOR * vnorm;
        for step in 0..config.lissa_depth {
            // u ← v + u - (H_sample + λI)u / scale
            let mut hu = Array1::<f64>::zeros(u.len());
            for _ in 0..config.lissa_batch {
                let idx = rng.random_range(0..n);
                hu += &spec.hvp(theta, data.example(idx), &u)?;
            }
            hu /= config.lissa_batch as f64;
            hu.scaled_add(damping, &u);
            let mut next = v + &u;
            next.scaled_add(-1.0 / scale, &hu);
            u = next;
            let unorm = u.dot(&u).sqrt();
            if !unorm.is_finite() || unorm > limit {
                return Err(Error::LissaDiverged {
                    repeat,
                    step,
                    iterate_norm: unorm,
                    scale,
                });
            }
        }
        Ok(u / scale)
    };
    let estimates: Vec<Array1<f64>> = (0..config.lissa_repeats)
        .into_par_iter()
        .map(run_repeat)
        .collect::<Result<Vec<_>>>()?;
    // Average deterministically in repeat order.
    let mut s = Array1::<f64>::zeros(v.len());
    for est in &estimates {
        s += est;
    }
    s /= config.lissa_repeats as f64;
    let mut hs = spec.empirical_hvp(theta, data, &s)?;
    hs.scaled_add(damping, &s);
    let residual = (&hs - v).dot(&(&hs - v)).sqrt();
    diagnostics.residual = Some(residual);
    Ok(IhvpResult { s, diagnostics })
}
