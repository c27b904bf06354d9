//! Trained-model persistence.
//!
//! Artifacts are JSON documents with a `format_version` field; loading
//! verifies the version, the declared family, and that the parameter vector
//! has the right length for (n_features, n_classes). Parameters survive a
//! save/load round trip bit for bit: values are printed in the shortest
//! decimal form that parses back to the identical f64.

use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};

pub const FORMAT_VERSION: u32 = 1;

/// Final optimizer state recorded alongside the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    /// Final empirical risk (mean regularized loss).
    pub objective: f64,
    /// Final ‖∇R(θ)‖.
    pub grad_norm: f64,
    /// Optimizer iterations taken.
    pub iterations: usize,
}

/// A trained parameter point plus everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub spec: ModelSpec,
    pub theta: Array1<f64>,
    pub n_features: usize,
    pub n_classes: usize,
    pub train_meta: TrainMeta,
}

#[derive(Serialize, Deserialize)]
struct ArtifactFile {
    format_version: u32,
    model_type: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_smooth: Option<f64>,
    l2: f64,
    n_features: usize,
    n_classes: usize,
    theta: Vec<f64>,
    train_meta: TrainMeta,
}

impl ModelArtifact {
    pub fn new(
        spec: ModelSpec,
        theta: Array1<f64>,
        n_features: usize,
        n_classes: usize,
        train_meta: TrainMeta,
    ) -> Result<Self> {
        let expected = spec.param_len(n_features, n_classes);
        if theta.len() != expected {
            return Err(Error::Dimension {
                what: "theta length",
                expected,
                got: theta.len(),
            });
        }
        if let Some(v) = theta.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("theta entry {v}"),
            });
        }
        Ok(ModelArtifact {
            spec,
            theta,
            n_features,
            n_classes,
            train_meta,
        })
    }

    /// Stable short hash of the parameter vector (FNV-1a over the raw f64
    /// bits). Used to key s_test caches and to stamp reports so a score
    /// table can be traced back to the exact parameters that produced it.
    pub fn fingerprint(&self) -> String {
        fingerprint_theta(&self.theta)
    }

    /// Serializable form used both by [`save_model`] and by the CLI, which
    /// appends run metadata before writing.
    pub fn to_json_value(&self) -> serde_json::Value {
        let t_smooth = match self.spec.family {
            Family::SmoothHinge { temperature } => Some(temperature),
            _ => None,
        };
        let file = ArtifactFile {
            format_version: FORMAT_VERSION,
            model_type: self.spec.family.name().to_string(),
            t_smooth,
            l2: self.spec.l2,
            n_features: self.n_features,
            n_classes: self.n_classes,
            theta: self.theta.to_vec(),
            train_meta: self.train_meta,
        };
        serde_json::to_value(file).expect("artifact serialization cannot fail")
    }
}

/// Hash a parameter vector to a 16-hex-digit string (FNV-1a, 64-bit).
pub fn fingerprint_theta(theta: &Array1<f64>) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for v in theta.iter() {
        for b in v.to_le_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{hash:016x}")
}

/// Write an artifact as pretty-printed JSON with sorted keys.
pub fn save_model(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = crate::report::to_sorted_pretty(&artifact.to_json_value())?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Load and validate a model artifact.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let file: ArtifactFile = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: display.clone(),
        message: e.to_string(),
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Schema {
            path: display,
            message: format!(
                "unknown format_version {} (this build reads version {FORMAT_VERSION})",
                file.format_version
            ),
        });
    }
    let family = match file.model_type.as_str() {
        "binary_logistic" => Family::BinaryLogistic,
        "multinomial_logistic" => Family::MultinomialLogistic,
        "smooth_hinge" => Family::SmoothHinge {
            temperature: file.t_smooth.ok_or_else(|| Error::Schema {
                path: display.clone(),
                message: "smooth_hinge artifact is missing t_smooth".into(),
            })?,
        },
        "hinge" => Family::Hinge,
        "ridge" => Family::Ridge,
        other => {
            return Err(Error::Schema {
                path: display,
                message: format!("unknown model_type {other:?}"),
            })
        }
    };
    let spec = ModelSpec::new(family, file.l2)?;
    let expected = spec.param_len(file.n_features, file.n_classes);
    if file.theta.len() != expected {
        return Err(Error::Schema {
            path: display,
            message: format!(
                "theta has {} entries, expected {} for {} with d={}, k={}",
                file.theta.len(),
                expected,
                file.model_type,
                file.n_features,
                file.n_classes
            ),
        });
    }
    ModelArtifact::new(
        spec,
        Array1::from_vec(file.theta),
        file.n_features,
        file.n_classes,
        file.train_meta,
    )
}
