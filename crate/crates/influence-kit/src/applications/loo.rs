//! Leave-one-out validation: do the influence predictions match what
//! actually happens to a test loss when a training point is removed and
//! the model retrained?

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ExampleRef};
use crate::error::Result;
use crate::ihvp::{IhvpConfig, IhvpDiagnostics};
use crate::influence::influence_up_loss_batch;
use crate::models::ModelSpec;
use crate::stats::{pearson_r, spearman_r};
use crate::trainer::{retrain_loo, train, TrainConfig};

/// How the predicted delta is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LooPredictor {
    /// `-i_up_loss / n`: the first-order prediction. Carries an O(1/n)
    /// relative floor because removal is a finite weight change.
    Linearized,
    /// Test-loss change along the exact Newton step of the ε = -1/n
    /// downweighted objective. Exact for quadratic risks up to solver
    /// precision; costs one dense solve per scored point.
    NewtonStep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LooPair {
    pub train_idx: usize,
    pub predicted_loo_delta: f64,
    pub actual_loo_delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationRun {
    pub top_k: usize,
    pub predictor: LooPredictor,
    /// One pair per successfully retrained top-|influence| point.
    pub pairs: Vec<LooPair>,
    pub pearson_r: f64,
    pub spearman_r: f64,
    /// Indices whose retraining failed; excluded from the correlations.
    pub failures: Vec<usize>,
    pub model_fingerprint: String,
    pub ihvp_diagnostics: IhvpDiagnostics,
}

/// Train on `data`, rank training points by |i_up_loss| against
/// `test_point`, retrain without each of the top `top_k`, and correlate
/// predicted against actual test-loss deltas.
pub fn run_loo_validation(
    spec: &ModelSpec,
    data: &Dataset,
    test_point: ExampleRef<'_>,
    ihvp_config: &IhvpConfig,
    top_k: usize,
    train_config: &TrainConfig,
    predictor: LooPredictor,
) -> Result<ValidationRun> {
    let artifact = train(spec, data, train_config)?;
    let report = influence_up_loss_batch(spec, &artifact, data, test_point, None, ihvp_config)?;
    let k = top_k.min(data.n());
    let test_ds = single_point_dataset(test_point, data.k())?;
    let retrain_config = train_config.clone().with_warm_start(artifact.theta.clone());
    let eps = -1.0 / data.n() as f64;
    let outcomes: Vec<(usize, Result<LooPair>)> = report.scores[..k]
        .par_iter()
        .map(|score| {
            let idx = score.train_idx;
            let pair = (|| {
                let actual =
                    retrain_loo(spec, data, &artifact, idx, &test_ds, spec, &retrain_config)?
                        .loss_deltas[0];
                let predicted = match predictor {
                    LooPredictor::Linearized => score.predicted_loo_delta,
                    LooPredictor::NewtonStep => {
                        let step = super::identity::upweighted_newton_step(
                            spec,
                            data,
                            &artifact.theta,
                            data.example(idx),
                            eps,
                            ihvp_config.damping,
                        )?;
                        let moved = &artifact.theta + &step;
                        spec.loss(&moved, test_point)? - spec.loss(&artifact.theta, test_point)?
                    }
                };
                Ok(LooPair {
                    train_idx: idx,
                    predicted_loo_delta: predicted,
                    actual_loo_delta: actual,
                })
            })();
            (idx, pair)
        })
        .collect();
    let mut pairs = Vec::with_capacity(k);
    let mut failures = Vec::new();
    for (idx, outcome) in outcomes {
        match outcome {
            Ok(pair) => pairs.push(pair),
            Err(err) => {
                log::warn!("leave-one-out retraining failed for index {idx}: {err}");
                failures.push(idx);
            }
        }
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.predicted_loo_delta).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.actual_loo_delta).collect();
    Ok(ValidationRun {
        top_k: k,
        predictor,
        pairs,
        pearson_r: pearson_r(&xs, &ys)?,
        spearman_r: spearman_r(&xs, &ys)?,
        failures,
        model_fingerprint: artifact.fingerprint(),
        ihvp_diagnostics: report.ihvp_diagnostics,
    })
}

pub(crate) fn single_point_dataset(point: ExampleRef<'_>, k: usize) -> Result<Dataset> {
    let d = point.features.len();
    let mut features = Array2::<f64>::zeros((1, d));
    features.row_mut(0).assign(&point.features);
    Dataset::new(features, vec![point.label], k)
}
