//! Bundled seeded dataset generators.
//!
//! Every generator is deterministic in its arguments, so tests, examples,
//! and CLI runs can name a dataset as a `synth:` pseudo-path instead of
//! shipping files. The grammar is `synth:<kind>:<key>=<value>,...` with
//! kinds `logistic`, `margin`, `bow`, `blobs`, and `attack`.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{sigmoid, Family, ModelSpec};
use crate::trainer::{train, TrainConfig};

/// Which half of a paired generator a pseudo-path should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthRole {
    Train,
    Test,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Two overlapping Gaussian classes: label ±1 (alternating), features
/// `y·(sep/√d)·𝟙 + N(0, I)`. `sep` is the distance between class means.
pub fn gaussian_binary(n: usize, d: usize, sep: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("synth size", format!("n = {n}, d = {d}")));
    }
    if !sep.is_finite() || sep < 0.0 {
        return Err(Error::invalid("synth sep", format!("got {sep}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = sep / (d as f64).sqrt();
    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y: i32 = if i % 2 == 0 { 1 } else { -1 };
        for j in 0..d {
            features[[i, j]] = f64::from(y) * shift + normal(&mut rng);
        }
        labels.push(y);
    }
    Dataset::new(features, labels, 2)
}

/// Points spread along a shared discriminative direction with a wide range
/// of margins, so per-example losses are strongly heterogeneous: some
/// points sit deep inside their class, a few near or across the boundary.
///
/// The margin profile is a fixed symmetric quantile grid concentrating
/// near 1 — identical for every seed, so the boundary structure of the
/// trained model is stable across instances. The seed shuffles which point
/// receives which margin and draws the off-direction noise. Noise scales
/// vary by coordinate over roughly a decade, so the curvature is strongly
/// anisotropic and rankings genuinely depend on the inverse Hessian.
pub fn margin_dataset(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("synth size", format!("n = {n}, d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    // Logistic quantiles scaled to unit variance: a smooth bell-shaped
    // spread with deterministic, evenly filled tails.
    let scale = 3f64.sqrt() / std::f64::consts::PI;
    // The across-boundary tail is clamped just past the boundary: wrong-side
    // points keep bounded feature norms (and so bounded gradients) instead
    // of growing with the tail quantile.
    let mut margins: Vec<f64> = (0..n)
        .map(|i| {
            let p = (i as f64 + 0.5) / n as f64;
            (1.0 + 0.8 * scale * (p / (1.0 - p)).ln()).max(-1.5)
        })
        .collect();
    margins.shuffle(&mut rng);
    // Geometric ladder of per-coordinate noise scales, 1/3 up to 3 around
    // the base spread of 0.4.
    let coord_scale: Vec<f64> = (0..d)
        .map(|j| {
            let t = if d > 1 {
                2.0 * (j as f64) / (d as f64 - 1.0) - 1.0
            } else {
                0.0
            };
            0.4 * 3f64.powf(t)
        })
        .collect();
    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for (i, &m) in margins.iter().enumerate() {
        let y: i32 = if i % 2 == 0 { 1 } else { -1 };
        for j in 0..d {
            features[[i, j]] = f64::from(y) * m * w[j] + coord_scale[j] * normal(&mut rng);
        }
        // Re-pin the component along w so the margin is exactly m.
        let along = features.row(i).dot(&w);
        let correction = f64::from(y) * m - along;
        for j in 0..d {
            features[[i, j]] += correction * w[j];
        }
        labels.push(y);
    }
    Dataset::new(features, labels, 2)
}

/// Sparse-ish nonnegative count features from two overlapping topic
/// profiles, one per class; a spam-filter-shaped binary problem.
pub fn bag_of_words(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || d < 4 {
        return Err(Error::invalid(
            "synth size",
            format!("n = {n}, d = {d}; the bag-of-words generator needs d >= 4"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Zipf-ish base frequencies shared by both classes.
    let base: Vec<f64> = (0..d).map(|j| 1.0 / (1.0 + j as f64)).collect();
    // Each class boosts its own disjoint slice of discriminative words.
    let cut = d / 4;
    let profile = |y: i32, j: usize| -> f64 {
        let boost = if y == 1 && j < cut {
            4.0
        } else if y == -1 && j >= cut && j < 2 * cut {
            4.0
        } else {
            1.0
        };
        base[j] * boost
    };
    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y: i32 = if i % 2 == 0 { 1 } else { -1 };
        let total: f64 = (0..d).map(|j| profile(y, j)).sum();
        // Document length varies; draw word counts independently with the
        // profile as the mean rate, thinning most entries to zero.
        let length = 20.0 + 10.0 * rng.random::<f64>();
        for j in 0..d {
            let rate = length * profile(y, j) / total;
            // A cheap integer draw around the rate: most small rates produce
            // zero, keeping the matrix sparse-ish.
            let count = if rng.random::<f64>() < rate.min(1.0) {
                1.0 + (rate.max(1.0) * rng.random::<f64>()).floor()
            } else {
                0.0
            };
            features[[i, j]] = count;
        }
        labels.push(y);
    }
    // Scale counts to keep curvature desk-sized.
    features /= 5.0;
    Dataset::new(features, labels, 2)
}

/// `k` Gaussian clusters with labels 0..k-1, for multinomial models.
pub fn multiclass_blobs(n: usize, d: usize, k: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 || k < 2 {
        return Err(Error::invalid(
            "synth size",
            format!("n = {n}, d = {d}, k = {k}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Cluster centers on a simple deterministic lattice direction per class.
    let mut centers = Array2::<f64>::zeros((k, d));
    for c in 0..k {
        for j in 0..d {
            centers[[c, j]] = if j % k == c { 1.5 } else { 0.0 };
        }
    }
    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        for j in 0..d {
            features[[i, j]] = centers[[c, j]] + normal(&mut rng);
        }
        labels.push(c as i32);
    }
    Dataset::new(features, labels, k)
}

/// Grid resolution used by [`attack_instance`]; matches an 8-bit feature
/// encoding with values in [0, 1].
pub const ATTACK_LEVELS: usize = 256;

fn snap_to_grid(v: f64, levels: usize) -> f64 {
    let q = 1.0 / (levels - 1) as f64;
    (v / q).round() * q
}

/// A small constructed instance for the training-set attack: a train set
/// whose features all sit exactly on the 256-level grid in [0, 1], plus one
/// near-boundary target the trained model classifies positive with
/// probability only 0.5 + 1e-4.
///
/// The train set contains two clear clusters and two deliberately
/// ambiguous, high-influence points near the midplane.
pub fn attack_instance(seed: u64) -> Result<(Dataset, Dataset)> {
    let n = 40usize;
    let d = 5usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y: i32 = if i % 2 == 0 { 1 } else { -1 };
        let center = if y == 1 { 0.65 } else { 0.35 };
        for j in 0..d {
            let raw = (center + 0.08 * normal(&mut rng)).clamp(0.0, 1.0);
            features[[i, j]] = snap_to_grid(raw, ATTACK_LEVELS);
        }
        labels.push(y);
    }
    // Two ambiguous points straddling the midplane with crossed labels:
    // exactly the high-influence region the attack wants to exploit.
    for (slot, y) in [(n - 2, -1), (n - 1, 1)] {
        for j in 0..d {
            let raw = (0.5 + 0.03 * normal(&mut rng)).clamp(0.0, 1.0);
            features[[slot, j]] = snap_to_grid(raw, ATTACK_LEVELS);
        }
        labels[slot] = y;
    }
    let train_set = Dataset::new(features, labels, 2)?;
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.01)?;
    let artifact = train(&spec, &train_set, &TrainConfig::default())?;
    let theta = &artifact.theta;
    // Place the target on the positive side at σ(θᵀx) = 0.5 + 1e-4 by
    // sliding from a base point along θ.
    let prob: f64 = 0.5 + 1e-4;
    let wanted = (prob / (1.0 - prob)).ln();
    let base = Array1::from_elem(d, 0.5);
    let current = theta.dot(&base);
    let target_x = &base + &(theta * ((wanted - current) / theta.dot(theta)));
    debug_assert!((sigmoid(target_x.dot(theta)) - prob).abs() < 1e-12);
    let targets = Dataset::new(target_x.insert_axis(ndarray::Axis(0)), vec![1], 2)?;
    Ok((train_set, targets))
}

fn parse_kv(body: &str, path: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    if body.is_empty() {
        return Ok(out);
    }
    for part in body.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            Error::invalid(
                "synth path",
                format!("{path}: expected key=value, found {part:?}"),
            )
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::invalid(
                "synth path",
                format!("{path}: bad value for {key:?}: {value:?}"),
            )
        })?;
        out.push((key.trim().to_string(), value));
    }
    Ok(out)
}

struct SynthParams {
    n: usize,
    d: usize,
    k: usize,
    sep: f64,
    seed: u64,
}

fn take_params(
    pairs: Vec<(String, f64)>,
    path: &str,
    defaults: SynthParams,
) -> Result<SynthParams> {
    let mut p = defaults;
    for (key, value) in pairs {
        match key.as_str() {
            "n" => p.n = value as usize,
            "d" => p.d = value as usize,
            "k" => p.k = value as usize,
            "sep" => p.sep = value,
            "seed" => p.seed = value as u64,
            other => {
                return Err(Error::invalid(
                    "synth path",
                    format!("{path}: unknown key {other:?}"),
                ))
            }
        }
    }
    Ok(p)
}

/// Is this path a generator reference rather than a file?
pub fn is_pseudo_path(path: &str) -> bool {
    path.starts_with("synth:")
}

/// Instantiate a `synth:<kind>:<k>=<v>,...` pseudo-path.
///
/// `role` matters only for the paired `attack` kind, where `Train` yields
/// the poisonable training set and `Test` the near-boundary targets.
pub fn from_pseudo_path(path: &str, role: SynthRole) -> Result<Dataset> {
    let rest = path
        .strip_prefix("synth:")
        .ok_or_else(|| Error::invalid("synth path", format!("{path}: missing synth: prefix")))?;
    let (kind, body) = match rest.split_once(':') {
        Some((kind, body)) => (kind, body),
        None => (rest, ""),
    };
    let pairs = parse_kv(body, path)?;
    match kind {
        "logistic" => {
            let p = take_params(
                pairs,
                path,
                SynthParams {
                    n: 100,
                    d: 10,
                    k: 2,
                    sep: 1.0,
                    seed: 0,
                },
            )?;
            gaussian_binary(p.n, p.d, p.sep, p.seed)
        }
        "margin" => {
            let p = take_params(
                pairs,
                path,
                SynthParams {
                    n: 100,
                    d: 10,
                    k: 2,
                    sep: 1.0,
                    seed: 0,
                },
            )?;
            margin_dataset(p.n, p.d, p.seed)
        }
        "bow" => {
            let p = take_params(
                pairs,
                path,
                SynthParams {
                    n: 2000,
                    d: 100,
                    k: 2,
                    sep: 1.0,
                    seed: 0,
                },
            )?;
            bag_of_words(p.n, p.d, p.seed)
        }
        "blobs" => {
            let p = take_params(
                pairs,
                path,
                SynthParams {
                    n: 120,
                    d: 6,
                    k: 3,
                    sep: 1.0,
                    seed: 0,
                },
            )?;
            multiclass_blobs(p.n, p.d, p.k, p.seed)
        }
        "attack" => {
            let p = take_params(
                pairs,
                path,
                SynthParams {
                    n: 40,
                    d: 5,
                    k: 2,
                    sep: 1.0,
                    seed: 0,
                },
            )?;
            let (train_set, targets) = attack_instance(p.seed)?;
            Ok(match role {
                SynthRole::Train => train_set,
                SynthRole::Test => targets,
            })
        }
        other => Err(Error::invalid(
            "synth path",
            format!("{path}: unknown generator kind {other:?}"),
        )),
    }
}

/// Pick `count` distinct indices from 0..n, reproducibly.
pub fn sample_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(&mut rng);
    all.truncate(count.min(n));
    all.sort_unstable();
    all
}
