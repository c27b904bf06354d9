//! The influence estimators: upweighting influence on parameters and on a
//! test loss, perturbation influence on features, self-influence, and the
//! closed-form binary-logistic ablation variants.
//!
//! Conventions, fixed once:
//! * `i_up_loss(z, z_test) = -∇L(z_test)ᵀ (H+λI)⁻¹ ∇L(z)` is the rate of
//!   change of the test loss per unit of extra weight on z.
//! * `predicted_loo_delta = -i_up_loss / n` predicts the test-loss change
//!   from removing z (removal is a weight change of -1/n).
//! * Self-influence is the nonnegative quadratic form
//!   `∇L(z)ᵀ (H+λI)⁻¹ ∇L(z)`.
//!
//! `spec` is passed alongside the artifact on every operation so a caller
//! can score under a modified loss (for example a different smooth-hinge
//! temperature) while keeping the artifact's parameters and fingerprint.

use std::collections::HashMap;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{fingerprint_theta, ModelArtifact, FORMAT_VERSION};
use crate::data::{Dataset, ExampleRef};
use crate::error::{Error, Result};
use crate::ihvp::{
    assemble_dense_hessian, ihvp, IhvpConfig, IhvpDiagnostics, IhvpMethod, IhvpResult,
};
use crate::linalg::CholeskyFactor;
use crate::models::{sigmoid, Family, ModelSpec};

/// One training point's scores in a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfluenceScore {
    pub train_idx: usize,
    pub i_up_loss: f64,
    pub predicted_loo_delta: f64,
}

/// What a report was scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfluenceTarget {
    TestPoint {
        #[serde(skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    SelfInfluence,
}

/// Scores for every training point against one target, sorted by
/// |i_up_loss| descending with ties broken by ascending train_idx.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub format_version: u32,
    pub target: InfluenceTarget,
    pub model_fingerprint: String,
    pub method: String,
    pub damping: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub scores: Vec<InfluenceScore>,
    #[serde(rename = "diagnostics")]
    pub ihvp_diagnostics: IhvpDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InfluenceReport {
    /// Scores reindexed by train_idx (undoing the ranking order).
    pub fn by_train_idx(&self) -> Vec<&InfluenceScore> {
        let mut v: Vec<&InfluenceScore> = self.scores.iter().collect();
        v.sort_by_key(|s| s.train_idx);
        v
    }
}

fn check_artifact(spec: &ModelSpec, artifact: &ModelArtifact, data: &Dataset) -> Result<()> {
    spec.check_dims(&artifact.theta, data.d())?;
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// `(H+λI)⁻¹ ∇L(z_test)`, the reusable half of every test-point query.
pub fn s_test(
    spec: &ModelSpec,
    artifact: &ModelArtifact,
    data: &Dataset,
    z_test: ExampleRef<'_>,
    config: &IhvpConfig,
) -> Result<IhvpResult> {
    check_artifact(spec, artifact, data)?;
    let g_test = spec.grad_theta(&artifact.theta, z_test)?;
    ihvp(spec, &artifact.theta, data, &g_test, config)
}

/// `-(H+λI)⁻¹ ∇L(z)`: the first-order parameter response to upweighting z.
/// Scaled by -1/n it predicts the parameter change from removing z.
pub fn influence_up_params(
    spec: &ModelSpec,
    artifact: &ModelArtifact,
    data: &Dataset,
    z: ExampleRef<'_>,
    config: &IhvpConfig,
) -> Result<Array1<f64>> {
    check_artifact(spec, artifact, data)?;
    let g = spec.grad_theta(&artifact.theta, z)?;
    let r = ihvp(spec, &artifact.theta, data, &g, config)?;
    Ok(-r.s)
}

/// The `-sᵀ∇L(z_i)` products for every training index, in index order.
pub(crate) fn pair_scores(
    spec: &ModelSpec,
    theta: &Array1<f64>,
    data: &Dataset,
    s: &Array1<f64>,
) -> Result<Vec<f64>> {
    (0..data.n())
        .into_par_iter()
        .map(|i| {
            let g = spec.grad_theta(theta, data.example(i))?;
            Ok(-s.dot(&g))
        })
        .collect()
}

fn build_report(
    target: InfluenceTarget,
    fingerprint: String,
    raw: Vec<f64>,
    n: usize,
    diagnostics: IhvpDiagnostics,
    note: Option<String>,
) -> Result<InfluenceReport> {
    if let Some(bad) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: format!("i_up_loss for train_idx {bad}"),
        });
    }
    let mut scores: Vec<InfluenceScore> = raw
        .into_iter()
        .enumerate()
        .map(|(train_idx, i_up_loss)| InfluenceScore {
            train_idx,
            i_up_loss,
            predicted_loo_delta: -i_up_loss / n as f64,
        })
        .collect();
    scores.sort_by(|a, b| {
        b.i_up_loss
            .abs()
            .total_cmp(&a.i_up_loss.abs())
            .then(a.train_idx.cmp(&b.train_idx))
    });
    Ok(InfluenceReport {
        format_version: FORMAT_VERSION,
        target,
        model_fingerprint: fingerprint,
        method: diagnostics.method.clone(),
        damping: diagnostics.damping,
        seed: diagnostics.seed,
        scores,
        ihvp_diagnostics: diagnostics,
        note,
    })
}

/// Score every training point against one test point: one s_test solve
/// followed by n independent inner products.
pub fn influence_up_loss_batch(
    spec: &ModelSpec,
    artifact: &ModelArtifact,
    data: &Dataset,
    z_test: ExampleRef<'_>,
    test_index: Option<usize>,
    config: &IhvpConfig,
) -> Result<InfluenceReport> {
    check_artifact(spec, artifact, data)?;
    let g_test = spec.grad_theta(&artifact.theta, z_test)?;
    let target = InfluenceTarget::TestPoint { index: test_index };
    if g_test.iter().all(|&v| v == 0.0) {
        let solve = ihvp(spec, &artifact.theta, data, &g_test, config)?;
        return build_report(
            target,
            artifact.fingerprint(),
            vec![0.0; data.n()],
            data.n(),
            solve.diagnostics,
            Some("test-point gradient is zero; all influences vanish".into()),
        );
    }
    let solve = ihvp(spec, &artifact.theta, data, &g_test, config)?;
    let raw = pair_scores(spec, &artifact.theta, data, &solve.s)?;
    build_report(
        target,
        artifact.fingerprint(),
        raw,
        data.n(),
        solve.diagnostics,
        None,
    )
}

/// `-sᵀ ∇x∇θL(z)`: per-feature sensitivity of the test loss to moving the
/// training point z. Scaled by 1/n and dotted with a feature step δ it
/// predicts the test-loss change from z → z+δ.
pub fn influence_pert_loss(
    spec: &ModelSpec,
    artifact: &ModelArtifact,
    data: &Dataset,
    z: ExampleRef<'_>,
    z_test: ExampleRef<'_>,
    config: &IhvpConfig,
) -> Result<Array1<f64>> {
    check_artifact(spec, artifact, data)?;
    let solve = s_test(spec, artifact, data, z_test, config)?;
    let mixed = spec.grad_x_grad_theta_left(&artifact.theta, z, &solve.s)?;
    Ok(-mixed)
}

/// Self-influence `∇L(z_i)ᵀ(H+λI)⁻¹∇L(z_i)` for every training point.
/// Large values flag outliers and likely mislabels.
pub fn self_influence_batch(
    spec: &ModelSpec,
    artifact: &ModelArtifact,
    data: &Dataset,
    config: &IhvpConfig,
) -> Result<InfluenceReport> {
    check_artifact(spec, artifact, data)?;
    let theta = &artifact.theta;
    let n = data.n();
    let (raw, diagnostics) = match config.method {
        IhvpMethod::Explicit => {
            let h = assemble_dense_hessian(spec, theta, data, config.damping)?;
            let factor = CholeskyFactor::factor(&h)?;
            let per_point: Vec<(f64, f64)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let g = spec.grad_theta(theta, data.example(i))?;
                    let s = factor.solve(&g);
                    let residual = &h.dot(&s) - &g;
                    Ok((g.dot(&s), residual.dot(&residual).sqrt()))
                })
                .collect::<Result<Vec<_>>>()?;
            let worst = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
            let raw = per_point.into_iter().map(|p| p.0).collect();
            let diagnostics = IhvpDiagnostics {
                method: "explicit".into(),
                damping: config.damping,
                iterations: None,
                depth: None,
                repeats: None,
                residual: Some(worst),
                divergence_flag: false,
                seed: None,
                scale: None,
            };
            (raw, diagnostics)
        }
        IhvpMethod::Cg | IhvpMethod::Lissa => {
            let per_point: Vec<(f64, IhvpDiagnostics)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let g = spec.grad_theta(theta, data.example(i))?;
                    let solve = ihvp(spec, theta, data, &g, config)?;
                    Ok((g.dot(&solve.s), solve.diagnostics))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut diagnostics = per_point
                .last()
                .map(|p| p.1.clone())
                .expect("dataset is non-empty");
            diagnostics.iterations = Some(
                per_point
                    .iter()
                    .filter_map(|p| p.1.iterations)
                    .sum::<usize>(),
            );
            diagnostics.residual = per_point
                .iter()
                .filter_map(|p| p.1.residual)
                .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))));
            let raw = per_point.into_iter().map(|p| p.0).collect();
            (raw, diagnostics)
        }
    };
    build_report(
        InfluenceTarget::SelfInfluence,
        artifact.fingerprint(),
        raw,
        n,
        diagnostics,
        None,
    )
}

/// The four closed-form binary-logistic score decompositions, per training
/// point, used to show what the Hessian and train-loss factors contribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantScores {
    pub train_idx: usize,
    /// `-y_t·y·σ(-y_t θᵀx_t)·σ(-y θᵀx)·x_tᵀH⁻¹x`; equals the generic
    /// engine's i_up_loss when the loss carries no l2 term.
    pub full: f64,
    /// `full` without the train-side σ(-y θᵀx) factor.
    pub no_train_loss: f64,
    /// `full` with H replaced by the identity.
    pub identity_hessian: f64,
    /// `y_t·y·σ(-y_t θᵀx_t)·x_tᵀx`, the scaled Euclidean inner product.
    pub scaled_dot: f64,
}

/// Closed-form ablation table. Binary logistic only; the Hessian solve is
/// the dense explicit one with no damping.
pub fn influence_variants(
    spec: &ModelSpec,
    artifact: &ModelArtifact,
    data: &Dataset,
    z_test: ExampleRef<'_>,
) -> Result<Vec<VariantScores>> {
    if spec.family != Family::BinaryLogistic {
        return Err(Error::Unsupported {
            family: spec.family.name(),
            op: "influence_variants",
            hint: "the closed-form ablation table is defined for binary_logistic",
        });
    }
    check_artifact(spec, artifact, data)?;
    let theta = &artifact.theta;
    let h = assemble_dense_hessian(spec, theta, data, 0.0)?;
    let factor = CholeskyFactor::factor(&h)?;
    let w = factor.solve(&z_test.features.to_owned());
    let y_t = f64::from(z_test.label);
    let sig_test = sigmoid(-y_t * theta.dot(&z_test.features));
    let out: Vec<VariantScores> = (0..data.n())
        .map(|i| {
            let z = data.example(i);
            let y = f64::from(z.label);
            let margin = y * theta.dot(&z.features);
            let sig_train = sigmoid(-margin);
            let hess_dot = w.dot(&z.features);
            let plain_dot = z_test.features.dot(&z.features);
            VariantScores {
                train_idx: i,
                full: -y_t * y * sig_test * sig_train * hess_dot,
                no_train_loss: -y_t * y * sig_test * hess_dot,
                identity_hessian: -y_t * y * sig_test * sig_train * plain_dot,
                scaled_dot: y_t * y * sig_test * plain_dot,
            }
        })
        .collect();
    if let Some(bad) = out.iter().find(|v| {
        !(v.full.is_finite()
            && v.no_train_loss.is_finite()
            && v.identity_hessian.is_finite()
            && v.scaled_dot.is_finite())
    }) {
        return Err(Error::NonFinite {
            what: format!("variant scores for train_idx {}", bad.train_idx),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    model_fingerprint: String,
    test_fingerprint: String,
    method: &'static str,
    damping_bits: u64,
    seed: u64,
}

/// Memo for s_test solves, keyed by (model fingerprint, test point,
/// backend, damping, seed). One entry per distinct test-point query; a
/// retrained model changes the fingerprint and misses naturally.
#[derive(Default)]
pub struct STestCache {
    map: HashMap<CacheKey, IhvpResult>,
}

impl STestCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get_or_compute(
        &mut self,
        spec: &ModelSpec,
        artifact: &ModelArtifact,
        data: &Dataset,
        z_test: ExampleRef<'_>,
        config: &IhvpConfig,
    ) -> Result<IhvpResult> {
        let test_theta = {
            let mut v: Vec<f64> = z_test.features.iter().copied().collect();
            v.push(f64::from(z_test.label));
            Array1::from_vec(v)
        };
        let key = CacheKey {
            model_fingerprint: artifact.fingerprint(),
            test_fingerprint: fingerprint_theta(&test_theta),
            method: config.method.name(),
            damping_bits: config.damping.to_bits(),
            seed: config.seed,
        };
        if let Some(hit) = self.map.get(&key) {
            return Ok(hit.clone());
        }
        let solve = s_test(spec, artifact, data, z_test, config)?;
        self.map.insert(key, solve.clone());
        Ok(solve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;
    use crate::gradcheck::{relative_error, relative_error_scalar};
    use crate::stats::pearson_r;
    use crate::synth;
    use crate::trainer::{train, TrainConfig};
    use ndarray::{array, Array2};

    fn trained_logistic(
        n: usize,
        d: usize,
        l2: f64,
        seed: u64,
    ) -> (ModelSpec, Dataset, ModelArtifact) {
        let spec = ModelSpec::new(Family::BinaryLogistic, l2).unwrap();
        let data = synth::gaussian_binary(n, d, 1.0, seed).unwrap();
        let artifact = train(&spec, &data, &TrainConfig::default()).unwrap();
        (spec, data, artifact)
    }

    /// Artifact wrapper around hand-picked parameters (not a trained model).
    fn manual_artifact(spec: &ModelSpec, theta: Array1<f64>) -> ModelArtifact {
        let d = theta.len();
        let meta = crate::artifact::TrainMeta {
            objective: 0.0,
            grad_norm: 0.0,
            iterations: 0,
        };
        ModelArtifact::new(spec.clone(), theta, d, 2, meta).unwrap()
    }

    /// Gaussian-elimination solve, independent of the crate's factorizations.
    fn ge_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let p = b.len();
        for col in 0..p {
            let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()));
            let pivot = pivot.unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in (col + 1)..p {
                let f = a[row][col] / a[col][col];
                for k in col..p {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; p];
        for row in (0..p).rev() {
            let mut v = b[row];
            for k in (row + 1)..p {
                v -= a[row][k] * x[k];
            }
            x[row] = v / a[row][row];
        }
        x
    }

    /// Normal-equations ridge solve with strength `reg` on a subset of rows.
    fn ridge_closed_form(data: &Dataset, skip: Option<usize>, reg: f64) -> Array1<f64> {
        let n = data.n() as f64;
        let d = data.d();
        let mut a = vec![vec![0.0; d]; d];
        let mut b = vec![0.0; d];
        let features = data.features();
        for i in 0..data.n() {
            if skip == Some(i) {
                continue;
            }
            let x = features.row(i);
            let y = f64::from(data.labels()[i]);
            for r in 0..d {
                for c in 0..d {
                    a[r][c] += x[r] * x[c] / n;
                }
                b[r] += y * x[r] / n;
            }
        }
        let keep = if skip.is_some() {
            (data.n() - 1) as f64
        } else {
            n
        };
        for r in 0..d {
            a[r][r] += reg * keep / n;
        }
        Array1::from_vec(ge_solve(a, b))
    }

    #[test]
    fn s_test_on_pure_l2_hessian_is_scaled_gradient() {
        let spec = ModelSpec::new(Family::Ridge, 0.8).unwrap();
        let data = Dataset::new(Array2::zeros((4, 3)), vec![1, -1, 1, -1], 2).unwrap();
        let theta = array![0.5, -1.0, 0.25];
        let artifact = manual_artifact(&spec, theta.clone());
        let z_test = Example::new(array![1.0, 2.0, -1.0], 1);
        let r = s_test(
            &spec,
            &artifact,
            &data,
            z_test.view(),
            &IhvpConfig::explicit(),
        )
        .unwrap();
        let g = spec.grad_theta(&theta, z_test.view()).unwrap();
        let expected = &g / 0.8;
        assert!(relative_error(&r.s, &expected) < 1e-12);
    }

    #[test]
    fn zero_test_gradient_yields_zero_s_test_and_noted_report() {
        let spec = ModelSpec::new(Family::BinaryLogistic, 0.0).unwrap();
        let data = synth::gaussian_binary(20, 3, 1.0, 4).unwrap();
        let artifact = manual_artifact(&spec, array![0.4, -0.2, 0.9]);
        let z_test = Example::new(array![0.0, 0.0, 0.0], 1);
        let r = s_test(
            &spec,
            &artifact,
            &data,
            z_test.view(),
            &IhvpConfig::explicit(),
        )
        .unwrap();
        assert_eq!(r.s, Array1::<f64>::zeros(3));
        let report = influence_up_loss_batch(
            &spec,
            &artifact,
            &data,
            z_test.view(),
            Some(0),
            &IhvpConfig::explicit(),
        )
        .unwrap();
        assert!(report.note.is_some());
        assert_eq!(report.scores.len(), 20);
        assert!(report.scores.iter().all(|s| s.i_up_loss == 0.0));
        assert!(report
            .scores
            .iter()
            .enumerate()
            .all(|(pos, s)| s.train_idx == pos));
    }

    #[test]
    fn zero_gradient_training_point_has_zero_influence() {
        let spec = ModelSpec::new(Family::BinaryLogistic, 0.0).unwrap();
        let mut data = synth::gaussian_binary(12, 3, 1.0, 6).unwrap();
        let zero_row = Array1::zeros(3);
        data = data.with_features_row(3, zero_row.view()).unwrap();
        let artifact = manual_artifact(&spec, array![0.3, 0.1, -0.2]);
        let v = influence_up_params(
            &spec,
            &artifact,
            &data,
            data.example(3),
            &IhvpConfig::explicit(),
        )
        .unwrap();
        assert_eq!(v, Array1::<f64>::zeros(3));
    }

    #[test]
    fn ridge_removal_matches_closed_form_loo() {
        // The linearized removal prediction carries an irreducible error of
        // roughly (1 + ‖x‖²/l2)/n, so a 2% check needs n in the hundreds.
        let spec = ModelSpec::new(Family::Ridge, 1.0).unwrap();
        let data = synth::gaussian_binary(200, 5, 0.6, 8).unwrap();
        // Features scaled so ‖x‖² stays comparable to l2.
        let scaled = Dataset::new(
            data.features().mapv(|v| v / (5.0_f64).sqrt()),
            data.labels().to_vec(),
            2,
        )
        .unwrap();
        let artifact = train(&spec, &scaled, &TrainConfig::default()).unwrap();
        let full = ridge_closed_form(&scaled, None, spec.l2);
        assert!(relative_error(&artifact.theta, &full) < 1e-8);
        for remove in [0usize, 17, 103] {
            let loo = ridge_closed_form(&scaled, Some(remove), spec.l2);
            let actual = &loo - &full;
            let predicted = influence_up_params(
                &spec,
                &artifact,
                &scaled,
                scaled.example(remove),
                &IhvpConfig::explicit(),
            )
            .unwrap()
                * (-1.0 / scaled.n() as f64);
            let err = relative_error(&predicted, &actual);
            assert!(err <= 0.02, "removal {remove}: relative error {err}");
        }
    }

    #[test]
    fn duplicated_points_get_identical_influence() {
        let (spec, data, _) = trained_logistic(15, 4, 0.1, 10);
        let mut feats = data.features().to_owned();
        feats.row_mut(7).assign(&data.features().row(2));
        let mut labels = data.labels().to_vec();
        labels[7] = labels[2];
        let dup = Dataset::new(feats, labels, 2).unwrap();
        let artifact = train(&spec, &dup, &TrainConfig::default()).unwrap();
        let a = influence_up_params(
            &spec,
            &artifact,
            &dup,
            dup.example(2),
            &IhvpConfig::explicit(),
        )
        .unwrap();
        let b = influence_up_params(
            &spec,
            &artifact,
            &dup,
            dup.example(7),
            &IhvpConfig::explicit(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_influence_is_positive_and_sorted() {
        let (spec, data, artifact) = trained_logistic(30, 4, 0.05, 12);
        let report =
            self_influence_batch(&spec, &artifact, &data, &IhvpConfig::explicit()).unwrap();
        assert_eq!(report.target, InfluenceTarget::SelfInfluence);
        assert_eq!(report.scores.len(), 30);
        assert!(report.scores.iter().all(|s| s.i_up_loss > 0.0));
        for w in report.scores.windows(2) {
            assert!(w[0].i_up_loss.abs() >= w[1].i_up_loss.abs());
        }
        let mut seen: Vec<usize> = report.scores.iter().map(|s| s.train_idx).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn pair_influence_is_symmetric() {
        let (spec, data, artifact) = trained_logistic(25, 4, 0.1, 14);
        let cfg = IhvpConfig::explicit();
        let za = data.example(3);
        let zb = data.example(11);
        let s_b = s_test(&spec, &artifact, &data, zb, &cfg).unwrap().s;
        let s_a = s_test(&spec, &artifact, &data, za, &cfg).unwrap().s;
        let g_a = spec.grad_theta(&artifact.theta, za).unwrap();
        let g_b = spec.grad_theta(&artifact.theta, zb).unwrap();
        let ab = -s_b.dot(&g_a);
        let ba = -s_a.dot(&g_b);
        assert!(relative_error_scalar(ab, ba) < 1e-8, "{ab} vs {ba}");
    }

    #[test]
    fn explicit_and_cg_reports_agree() {
        let (spec, data, artifact) = trained_logistic(60, 6, 0.05, 16);
        let z_test = Example::new(Array1::from_elem(6, 0.4), -1);
        let a = influence_up_loss_batch(
            &spec,
            &artifact,
            &data,
            z_test.view(),
            None,
            &IhvpConfig::explicit(),
        )
        .unwrap();
        let b = influence_up_loss_batch(
            &spec,
            &artifact,
            &data,
            z_test.view(),
            None,
            &IhvpConfig::cg(),
        )
        .unwrap();
        let order_a: Vec<usize> = a.scores.iter().map(|s| s.train_idx).collect();
        let order_b: Vec<usize> = b.scores.iter().map(|s| s.train_idx).collect();
        assert_eq!(order_a, order_b);
        for (sa, sb) in a.by_train_idx().iter().zip(b.by_train_idx()) {
            assert!(
                relative_error_scalar(sa.i_up_loss, sb.i_up_loss) < 1e-6,
                "idx {}: {} vs {}",
                sa.train_idx,
                sa.i_up_loss,
                sb.i_up_loss
            );
        }
    }

    #[test]
    fn report_deltas_are_exactly_scaled_scores() {
        let (spec, data, artifact) = trained_logistic(40, 5, 0.1, 18);
        let z_test = Example::new(Array1::from_elem(5, -0.3), 1);
        let report = influence_up_loss_batch(
            &spec,
            &artifact,
            &data,
            z_test.view(),
            None,
            &IhvpConfig::explicit(),
        )
        .unwrap();
        let n = data.n() as f64;
        for s in &report.scores {
            assert_eq!(s.predicted_loo_delta, -s.i_up_loss / n);
        }
    }

    #[test]
    fn perturbation_prediction_matches_retraining() {
        let (spec, data, artifact) = trained_logistic(40, 4, 0.1, 20);
        let z_test = Example::new(array![0.8, -0.5, 0.3, 0.6], 1);
        let cfg = IhvpConfig::explicit();
        let idx = 5;
        let ipert = influence_pert_loss(
            &spec,
            &artifact,
            &data,
            data.example(idx),
            z_test.view(),
            &cfg,
        )
        .unwrap();
        let h = 1e-3;
        let delta = &ipert * (h / ipert.dot(&ipert).sqrt());
        let moved_row = &data.features().row(idx).to_owned() + &delta;
        let moved = data.with_features_row(idx, moved_row.view()).unwrap();
        let tcfg = TrainConfig::default().with_warm_start(artifact.theta.clone());
        let retrained = train(&spec, &moved, &tcfg).unwrap();
        let actual = spec.loss(&retrained.theta, z_test.view()).unwrap()
            - spec.loss(&artifact.theta, z_test.view()).unwrap();
        let predicted = ipert.dot(&delta) / data.n() as f64;
        let err = relative_error_scalar(actual, predicted);
        assert!(
            err <= 0.10,
            "actual {actual} vs predicted {predicted} ({err})"
        );
    }

    #[test]
    fn perturbation_matches_discrete_parameter_differences() {
        let (spec, data, artifact) = trained_logistic(30, 4, 0.1, 22);
        let z_test = Example::new(array![-0.4, 0.7, 0.1, -0.9], -1);
        let cfg = IhvpConfig::explicit();
        let idx = 2;
        let g_test = spec.grad_theta(&artifact.theta, z_test.view()).unwrap();
        let ipert = influence_pert_loss(
            &spec,
            &artifact,
            &data,
            data.example(idx),
            z_test.view(),
            &cfg,
        )
        .unwrap();
        let base = influence_up_params(&spec, &artifact, &data, data.example(idx), &cfg).unwrap();
        let direction = array![1.0, -0.5, 0.25, 0.75];
        let mut prev_gap = f64::INFINITY;
        for halving in 0..4 {
            let delta = &direction * (1e-2 / f64::powi(2.0, halving));
            let moved_features = &data.features().row(idx).to_owned() + &delta;
            let moved_example = Example::new(moved_features, data.labels()[idx]);
            let shifted =
                influence_up_params(&spec, &artifact, &data, moved_example.view(), &cfg).unwrap();
            let discrete = g_test.dot(&(&shifted - &base));
            let linear = ipert.dot(&delta);
            let ratio = discrete / linear;
            let gap = (ratio - 1.0).abs();
            assert!(gap < prev_gap + 1e-12, "gap {gap} grew from {prev_gap}");
            prev_gap = gap;
        }
        assert!(prev_gap <= 0.02, "final ratio gap {prev_gap}");
    }

    #[test]
    fn variants_full_matches_generic_engine_without_l2() {
        let (spec, data, artifact) = trained_logistic(50, 5, 0.0, 24);
        let z_test = Example::new(Array1::from_elem(5, 0.5), 1);
        let table = influence_variants(&spec, &artifact, &data, z_test.view()).unwrap();
        let report = influence_up_loss_batch(
            &spec,
            &artifact,
            &data,
            z_test.view(),
            None,
            &IhvpConfig::explicit(),
        )
        .unwrap();
        for (v, s) in table.iter().zip(report.by_train_idx()) {
            assert_eq!(v.train_idx, s.train_idx);
            assert!(
                relative_error_scalar(v.full, s.i_up_loss) <= 1e-8,
                "idx {}: closed form {} vs engine {}",
                v.train_idx,
                v.full,
                s.i_up_loss
            );
        }
    }

    #[test]
    fn identity_hessian_signs_follow_labels_on_positive_features() {
        let spec = ModelSpec::new(Family::BinaryLogistic, 0.0).unwrap();
        let mut rows = Array2::zeros((12, 3));
        for i in 0..12 {
            for j in 0..3 {
                rows[[i, j]] = 0.1 + ((i * 3 + j) % 7) as f64 * 0.13;
            }
        }
        let labels: Vec<i32> = (0..12).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let data = Dataset::new(rows, labels, 2).unwrap();
        let artifact = train(&spec, &data, &TrainConfig::default()).unwrap();
        let z_test = Example::new(array![0.5, 0.2, 0.4], 1);
        let table = influence_variants(&spec, &artifact, &data, z_test.view()).unwrap();
        for v in &table {
            let expected = -f64::from(z_test.label) * f64::from(data.labels()[v.train_idx]);
            assert_eq!(v.identity_hessian.signum(), expected.signum());
        }
    }

    #[test]
    fn no_train_loss_removes_exactly_the_margin_factor() {
        let (spec, data, artifact) = trained_logistic(40, 4, 0.0, 26);
        let z_test = Example::new(array![0.2, -0.6, 0.4, 0.1], -1);
        let table = influence_variants(&spec, &artifact, &data, z_test.view()).unwrap();
        for v in &table {
            let z = data.example(v.train_idx);
            let margin = f64::from(z.label) * artifact.theta.dot(&z.features);
            let factor = sigmoid(-margin);
            assert!((v.full - v.no_train_loss * factor).abs() <= 1e-12 * v.full.abs().max(1.0));
        }
    }

    #[test]
    fn variants_reject_other_families() {
        let spec = ModelSpec::new(Family::Ridge, 0.1).unwrap();
        let data = synth::gaussian_binary(10, 3, 1.0, 28).unwrap();
        let artifact = train(&spec, &data, &TrainConfig::default()).unwrap();
        let z_test = Example::new(array![1.0, 0.0, 0.0], 1);
        let err = influence_variants(&spec, &artifact, &data, z_test.view()).unwrap_err();
        assert!(matches!(err, Error::Unsupported { .. }));
    }

    #[test]
    fn scaled_dot_ranking_differs_from_full() {
        let (spec, data, artifact) = trained_logistic(80, 6, 0.0, 30);
        let z_test = Example::new(Array1::from_elem(6, 0.45), 1);
        let table = influence_variants(&spec, &artifact, &data, z_test.view()).unwrap();
        let full: Vec<f64> = table.iter().map(|v| v.full).collect();
        let scaled: Vec<f64> = table.iter().map(|v| v.scaled_dot).collect();
        let r = pearson_r(&full, &scaled).unwrap();
        assert!(r < 0.99, "full vs scaled_dot R = {r}");
    }

    #[test]
    fn cache_reuses_solves_per_model_and_settings() {
        let (spec, data, artifact) = trained_logistic(25, 4, 0.1, 32);
        let z_test = Example::new(array![0.3, 0.3, -0.3, 0.1], 1);
        let mut cache = STestCache::new();
        let cfg = IhvpConfig::explicit();
        let a = cache
            .get_or_compute(&spec, &artifact, &data, z_test.view(), &cfg)
            .unwrap();
        let b = cache
            .get_or_compute(&spec, &artifact, &data, z_test.view(), &cfg)
            .unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(a.s, b.s);
        let damped = cfg.clone().with_damping(0.5);
        cache
            .get_or_compute(&spec, &artifact, &data, z_test.view(), &damped)
            .unwrap();
        assert_eq!(cache.len(), 2);
        let other_model = manual_artifact(&spec, &artifact.theta * 1.5);
        cache
            .get_or_compute(&spec, &other_model, &data, z_test.view(), &cfg)
            .unwrap();
        assert_eq!(cache.len(), 3);
    }
}
