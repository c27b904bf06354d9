//! Mislabel triage: flip a fraction of training labels, rank the training
//! set by a prioritization strategy, and trace how many flips an auditor
//! finds (and how much test accuracy recovers) as they inspect and fix
//! points down that ranking.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ihvp::IhvpConfig;
use crate::influence::self_influence_batch;
use crate::models::ModelSpec;
use crate::synth::sample_indices;
use crate::trainer::{train, TrainConfig};

/// Decorrelates the ranking shuffle from the flip-site draw, which uses
/// the run seed directly.
const RANKING_SEED_OFFSET: u64 = 0x517c_c1b7_2722_0a95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageStrategy {
    /// Inspect by descending self-influence of the (possibly corrupted)
    /// training points.
    Influence,
    /// Inspect by descending training loss.
    Loss,
    /// Inspect in a seeded random order.
    Random,
}

impl TriageStrategy {
    pub fn name(self) -> &'static str {
        match self {
            TriageStrategy::Influence => "influence",
            TriageStrategy::Loss => "loss",
            TriageStrategy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriageCurvePoint {
    /// Fraction of the training set inspected (after rounding to whole
    /// points).
    pub fraction_checked: f64,
    /// Fraction of the planted flips inside the inspected prefix.
    pub fraction_flips_found: f64,
    /// Accuracy against the clean labels after fixing the found flips and
    /// retraining.
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriageRun {
    pub flip_fraction: f64,
    pub strategy: TriageStrategy,
    pub seed: u64,
    pub n: usize,
    pub n_flipped: usize,
    pub curve: Vec<TriageCurvePoint>,
}

/// Corrupt `flip_fraction` of `clean_data`'s labels (sites drawn from
/// `seed`), then simulate an inspect-and-fix pass in `strategy` order,
/// reporting recall and retrained accuracy at each grid fraction.
pub fn run_mislabel_triage(
    spec: &ModelSpec,
    clean_data: &Dataset,
    flip_fraction: f64,
    strategy: TriageStrategy,
    seed: u64,
    inspection_grid: &[f64],
    train_config: &TrainConfig,
    ihvp_config: &IhvpConfig,
) -> Result<TriageRun> {
    let n = clean_data.n();
    if n < 2 {
        return Err(Error::invalid("clean_data", "need at least 2 examples"));
    }
    if !(flip_fraction > 0.0 && flip_fraction < 1.0) {
        return Err(Error::invalid(
            "flip_fraction",
            format!("must lie strictly between 0 and 1, got {flip_fraction}"),
        ));
    }
    if inspection_grid.is_empty() {
        return Err(Error::invalid(
            "inspection_grid",
            "need at least one fraction",
        ));
    }
    for &f in inspection_grid {
        if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
            return Err(Error::invalid(
                "inspection_grid",
                format!("fractions must lie in [0, 1], got {f}"),
            ));
        }
    }

    let n_flipped = ((flip_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let flipped = sample_indices(n, n_flipped, seed);
    let flipped_set: HashSet<usize> = flipped.iter().copied().collect();
    let corrupted = clean_data.with_flipped_labels(&flipped)?;
    let corrupt_model = train(spec, &corrupted, train_config)?;

    let ranking: Vec<usize> = match strategy {
        TriageStrategy::Influence => {
            let report = self_influence_batch(spec, &corrupt_model, &corrupted, ihvp_config)?;
            report.scores.iter().map(|s| s.train_idx).collect()
        }
        TriageStrategy::Loss => {
            let mut losses = Vec::with_capacity(n);
            for idx in 0..n {
                losses.push((
                    idx,
                    spec.loss(&corrupt_model.theta, corrupted.example(idx))?,
                ));
            }
            losses.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            losses.into_iter().map(|(idx, _)| idx).collect()
        }
        TriageStrategy::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(RANKING_SEED_OFFSET));
            order.shuffle(&mut rng);
            order
        }
    };

    let retrain_config = train_config
        .clone()
        .with_warm_start(corrupt_model.theta.clone());
    let curve: Vec<TriageCurvePoint> = inspection_grid
        .par_iter()
        .map(|&f| {
            let checked = ((f * n as f64).round() as usize).min(n);
            let found: Vec<usize> = ranking[..checked]
                .iter()
                .copied()
                .filter(|idx| flipped_set.contains(idx))
                .collect();
            let repaired = corrupted.with_flipped_labels(&found)?;
            let model = train(spec, &repaired, &retrain_config)?;
            Ok(TriageCurvePoint {
                fraction_checked: checked as f64 / n as f64,
                fraction_flips_found: found.len() as f64 / n_flipped as f64,
                test_accuracy: sign_accuracy(&model.theta, clean_data),
            })
        })
        .collect::<Result<_>>()?;

    Ok(TriageRun {
        flip_fraction,
        strategy,
        seed,
        n,
        n_flipped,
        curve,
    })
}

fn sign_accuracy(theta: &ndarray::Array1<f64>, data: &Dataset) -> f64 {
    let hits = (0..data.n())
        .filter(|&idx| {
            let z = data.example(idx);
            let predicted = if theta.dot(&z.features) >= 0.0 { 1 } else { -1 };
            predicted == z.label
        })
        .count();
    hits as f64 / data.n() as f64
}
