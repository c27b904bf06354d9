//! Loss families with hand-derived first and second derivatives.
//!
//! Each family provides the per-example loss L(z, θ), its gradient in θ,
//! the Hessian-vector product H_z v, and the left-contracted mixed second
//! derivative sᵀ∇ₓ∇θL(z, θ) used for input-perturbation influence. The L2
//! penalty is folded into the per-example loss — `loss` always includes
//! `(l2/2)·‖θ‖²` — so the empirical Hessian is exactly `(1/n)Σ∇²ℓ + l2·I`
//! and every downstream formula can treat regularization uniformly. The
//! penalty applies to all coordinates; a dataset wanting an unpenalized
//! bias has to live with a penalized constant feature.
//!
//! The binary margin losses share a common skeleton. With m = y·θᵀx and a
//! scalar φ(m):
//!
//! ```text
//! L       = φ(m) + (l2/2)‖θ‖²
//! ∇θL     = φ'(m)·y·x + l2·θ
//! H_z v   = φ''(m)·(xᵀv)·x + l2·v
//! sᵀ∇ₓ∇θL = φ''(m)·(sᵀx)·θ + y·φ'(m)·s
//! ```
//!
//! Binary logistic uses φ(m) = log(1+exp(-m)); the smooth hinge uses
//! φ(m) = t·log(1+exp((1-m)/t)), which approaches max(0, 1-m) as t → 0.
//! The true hinge is evaluation-only: its subgradient is deliberately an
//! error rather than a zero-filled vector, because silently treating the
//! kink as flat produces quietly wrong influence scores.

use ndarray::{s, Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ExampleRef};
use crate::error::{Error, Result};

/// Numerically stable log(1 + exp(a)).
///
/// The naive form overflows for a ≳ 700 and loses precision for very
/// negative a; the max/log1p split is exact in both tails. Smooth-hinge
/// temperatures around 1e-3 routinely produce arguments of magnitude 1e3,
/// so this is load-bearing, not hygiene.
pub fn log1pexp(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// Numerically stable logistic sigmoid σ(a) = 1/(1+exp(-a)).
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Loss family selector. `Hinge` supports loss evaluation only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Family {
    BinaryLogistic,
    MultinomialLogistic,
    SmoothHinge { temperature: f64 },
    Hinge,
    Ridge,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::BinaryLogistic => "binary_logistic",
            Family::MultinomialLogistic => "multinomial_logistic",
            Family::SmoothHinge { .. } => "smooth_hinge",
            Family::Hinge => "hinge",
            Family::Ridge => "ridge",
        }
    }

    /// Whether gradients / HVPs are defined.
    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Family::Hinge)
    }
}

/// A loss family plus its L2 strength: everything needed to evaluate the
/// regularized objective and its derivatives at a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: Family,
    pub l2: f64,
}

/// φ'(m) and φ''(m) for the binary margin families.
#[derive(Clone, Copy)]
struct MarginDerivs {
    dphi: f64,
    ddphi: f64,
}

impl ModelSpec {
    pub fn new(family: Family, l2: f64) -> Result<Self> {
        if !l2.is_finite() || l2 < 0.0 {
            return Err(Error::invalid(
                "l2",
                format!("must be finite and >= 0, got {l2}"),
            ));
        }
        if let Family::SmoothHinge { temperature } = family {
            if !temperature.is_finite() || temperature <= 0.0 {
                return Err(Error::invalid(
                    "smooth hinge temperature",
                    format!("must be finite and > 0, got {temperature}"),
                ));
            }
        }
        Ok(ModelSpec { family, l2 })
    }

    /// Parameter dimension for a problem with `d` features and `k` classes.
    pub fn param_len(&self, d: usize, k: usize) -> usize {
        match self.family {
            Family::MultinomialLogistic => d * k,
            _ => d,
        }
    }

    pub(crate) fn check_dims(&self, theta: &Array1<f64>, d: usize) -> Result<usize> {
        match self.family {
            Family::MultinomialLogistic => {
                if d == 0 || theta.len() % d != 0 || theta.len() / d < 2 {
                    return Err(Error::Dimension {
                        what: "theta length (must be d*k, k >= 2)",
                        expected: d,
                        got: theta.len(),
                    });
                }
                Ok(theta.len() / d)
            }
            _ => {
                if theta.len() != d {
                    return Err(Error::Dimension {
                        what: "theta length",
                        expected: d,
                        got: theta.len(),
                    });
                }
                Ok(2)
            }
        }
    }

    fn unsupported(&self, op: &'static str) -> Error {
        Error::Unsupported {
            family: self.family.name(),
            op,
            hint: "use the smooth_hinge surrogate for derivatives and keep hinge for evaluation",
        }
    }

    fn margin_derivs(&self, m: f64, op: &'static str) -> Result<MarginDerivs> {
        match self.family {
            Family::BinaryLogistic => Ok(MarginDerivs {
                dphi: -sigmoid(-m),
                ddphi: sigmoid(m) * sigmoid(-m),
            }),
            Family::SmoothHinge { temperature } => {
                let u = (1.0 - m) / temperature;
                Ok(MarginDerivs {
                    dphi: -sigmoid(u),
                    ddphi: sigmoid(u) * sigmoid(-u) / temperature,
                })
            }
            _ => Err(self.unsupported(op)),
        }
    }

    /// Per-example loss, regularization included.
    pub fn loss(&self, theta: &Array1<f64>, z: ExampleRef<'_>) -> Result<f64> {
        let d = z.features.len();
        let k = self.check_dims(theta, d)?;
        let reg = 0.5 * self.l2 * theta.dot(theta);
        let value = match self.family {
            Family::BinaryLogistic => {
                let m = f64::from(z.label) * theta.dot(&z.features);
                log1pexp(-m)
            }
            Family::SmoothHinge { temperature } => {
                let m = f64::from(z.label) * theta.dot(&z.features);
                temperature * log1pexp((1.0 - m) / temperature)
            }
            Family::Hinge => {
                let m = f64::from(z.label) * theta.dot(&z.features);
                (1.0 - m).max(0.0)
            }
            Family::Ridge => {
                let r = theta.dot(&z.features) - f64::from(z.label);
                0.5 * r * r
            }
            Family::MultinomialLogistic => {
                let (probs, log_norm, logits) = softmax_parts(theta, z.features, d, k);
                let _ = probs;
                log_norm - logits[z.label as usize]
            }
        };
        Ok(value + reg)
    }

    /// Analytic gradient ∇θL(z, θ), regularization included.
    pub fn grad_theta(&self, theta: &Array1<f64>, z: ExampleRef<'_>) -> Result<Array1<f64>> {
        let d = z.features.len();
        let k = self.check_dims(theta, d)?;
        match self.family {
            Family::BinaryLogistic | Family::SmoothHinge { .. } => {
                let y = f64::from(z.label);
                let m = y * theta.dot(&z.features);
                let MarginDerivs { dphi, .. } = self.margin_derivs(m, "grad_theta")?;
                let mut g = &z.features * (dphi * y);
                g.scaled_add(self.l2, theta);
                Ok(g)
            }
            Family::Hinge => Err(self.unsupported("grad_theta")),
            Family::Ridge => {
                let r = theta.dot(&z.features) - f64::from(z.label);
                let mut g = &z.features * r;
                g.scaled_add(self.l2, theta);
                Ok(g)
            }
            Family::MultinomialLogistic => {
                let (probs, _, _) = softmax_parts(theta, z.features, d, k);
                let mut g = theta * self.l2;
                for c in 0..k {
                    let coeff = probs[c] - if c == z.label as usize { 1.0 } else { 0.0 };
                    g.slice_mut(s![c * d..(c + 1) * d])
                        .scaled_add(coeff, &z.features);
                }
                Ok(g)
            }
        }
    }

    /// Per-example Hessian-vector product ∇²θL(z, θ)·v in O(p) time.
    pub fn hvp(
        &self,
        theta: &Array1<f64>,
        z: ExampleRef<'_>,
        v: &Array1<f64>,
    ) -> Result<Array1<f64>> {
        let d = z.features.len();
        let k = self.check_dims(theta, d)?;
        if v.len() != theta.len() {
            return Err(Error::Dimension {
                what: "hvp vector length",
                expected: theta.len(),
                got: v.len(),
            });
        }
        match self.family {
            Family::BinaryLogistic | Family::SmoothHinge { .. } => {
                let m = f64::from(z.label) * theta.dot(&z.features);
                let MarginDerivs { ddphi, .. } = self.margin_derivs(m, "hvp")?;
                let xv = z.features.dot(v);
                let mut out = &z.features * (ddphi * xv);
                out.scaled_add(self.l2, v);
                Ok(out)
            }
            Family::Hinge => Err(self.unsupported("hvp")),
            Family::Ridge => {
                let xv = z.features.dot(v);
                let mut out = &z.features * xv;
                out.scaled_add(self.l2, v);
                Ok(out)
            }
            Family::MultinomialLogistic => {
                // With w_c = xᵀv_c and a = Σ_b p_b w_b the per-class block is
                // p_c (w_c - a) x + l2 v_c; the k×k probability matrix is
                // never materialized.
                let (probs, _, _) = softmax_parts(theta, z.features, d, k);
                let mut w = vec![0.0; k];
                for c in 0..k {
                    w[c] = z.features.dot(&v.slice(s![c * d..(c + 1) * d]));
                }
                let a: f64 = (0..k).map(|c| probs[c] * w[c]).sum();
                let mut out = v * self.l2;
                for c in 0..k {
                    out.slice_mut(s![c * d..(c + 1) * d])
                        .scaled_add(probs[c] * (w[c] - a), &z.features);
                }
                Ok(out)
            }
        }
    }

    /// Left-contracted mixed derivative sᵀ∇ₓ∇θL(z, θ), a length-d vector.
    ///
    /// This is the only second-derivative object that involves the feature
    /// space; it feeds the perturbation-influence estimator.
    pub fn grad_x_grad_theta_left(
        &self,
        theta: &Array1<f64>,
        z: ExampleRef<'_>,
        st: &Array1<f64>,
    ) -> Result<Array1<f64>> {
        let d = z.features.len();
        let k = self.check_dims(theta, d)?;
        if st.len() != theta.len() {
            return Err(Error::Dimension {
                what: "contraction vector length",
                expected: theta.len(),
                got: st.len(),
            });
        }
        match self.family {
            Family::BinaryLogistic | Family::SmoothHinge { .. } => {
                let y = f64::from(z.label);
                let m = y * theta.dot(&z.features);
                let MarginDerivs { dphi, ddphi } =
                    self.margin_derivs(m, "grad_x_grad_theta_left")?;
                let sx = st.dot(&z.features);
                let mut out = theta * (ddphi * sx);
                out.scaled_add(y * dphi, st);
                Ok(out)
            }
            Family::Hinge => Err(self.unsupported("grad_x_grad_theta_left")),
            Family::Ridge => {
                let r = theta.dot(&z.features) - f64::from(z.label);
                let sx = st.dot(&z.features);
                let mut out = theta * sx;
                out.scaled_add(r, st);
                Ok(out)
            }
            Family::MultinomialLogistic => {
                // sᵀ∇θL = Σ_c (p_c - δ_{cy}) sᵀ_c x + l2 sᵀθ, and
                // ∇ₓ p_c = p_c (θ_c - θ̄) with θ̄ = Σ_b p_b θ_b.
                let (probs, _, _) = softmax_parts(theta, z.features, d, k);
                let mut theta_bar = Array1::<f64>::zeros(d);
                for c in 0..k {
                    theta_bar.scaled_add(probs[c], &theta.slice(s![c * d..(c + 1) * d]));
                }
                let mut out = Array1::<f64>::zeros(d);
                for c in 0..k {
                    let sc = st.slice(s![c * d..(c + 1) * d]);
                    let scx = sc.dot(&z.features);
                    let mut dir = theta.slice(s![c * d..(c + 1) * d]).to_owned();
                    dir -= &theta_bar;
                    out.scaled_add(probs[c] * scx, &dir);
                    let coeff = probs[c] - if c == z.label as usize { 1.0 } else { 0.0 };
                    out.scaled_add(coeff, &sc);
                }
                Ok(out)
            }
        }
    }

    /// Mean training loss over the dataset.
    pub fn empirical_risk(&self, theta: &Array1<f64>, data: &Dataset) -> Result<f64> {
        self.risk_excluding(theta, data, None)
    }

    /// Mean training gradient over the dataset.
    pub fn empirical_grad(&self, theta: &Array1<f64>, data: &Dataset) -> Result<Array1<f64>> {
        self.grad_excluding(theta, data, None)
    }

    /// Mean Hessian-vector product over the dataset: `(H + l2·I)·v` where H
    /// includes the regularization fold-in.
    pub fn empirical_hvp(
        &self,
        theta: &Array1<f64>,
        data: &Dataset,
        v: &Array1<f64>,
    ) -> Result<Array1<f64>> {
        self.hvp_excluding(theta, data, v, None)
    }

    // The `_excluding` variants keep the ORIGINAL 1/n normalization while
    // dropping one term. Both the filtered mean and this form share a
    // minimizer (they differ by the positive factor (n-1)/n), but gradient
    // tolerances and influence calculus are stated on the 1/n version, so
    // that is the one the trainer optimizes. Summation is in index order;
    // results are bitwise reproducible.

    pub(crate) fn risk_excluding(
        &self,
        theta: &Array1<f64>,
        data: &Dataset,
        skip: Option<usize>,
    ) -> Result<f64> {
        if data.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut sum = 0.0;
        for i in 0..data.n() {
            if Some(i) == skip {
                continue;
            }
            sum += self.loss(theta, data.example(i))?;
        }
        Ok(sum / data.n() as f64)
    }

    pub(crate) fn grad_excluding(
        &self,
        theta: &Array1<f64>,
        data: &Dataset,
        skip: Option<usize>,
    ) -> Result<Array1<f64>> {
        if data.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut sum = Array1::<f64>::zeros(theta.len());
        for i in 0..data.n() {
            if Some(i) == skip {
                continue;
            }
            sum += &self.grad_theta(theta, data.example(i))?;
        }
        Ok(sum / data.n() as f64)
    }

    pub(crate) fn hvp_excluding(
        &self,
        theta: &Array1<f64>,
        data: &Dataset,
        v: &Array1<f64>,
        skip: Option<usize>,
    ) -> Result<Array1<f64>> {
        if data.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut sum = Array1::<f64>::zeros(theta.len());
        for i in 0..data.n() {
            if Some(i) == skip {
                continue;
            }
            sum += &self.hvp(theta, data.example(i), v)?;
        }
        Ok(sum / data.n() as f64)
    }
}

/// Stable softmax pieces: (probabilities, log Σ exp(logit), logits).
fn softmax_parts(
    theta: &Array1<f64>,
    x: ArrayView1<'_, f64>,
    d: usize,
    k: usize,
) -> (Vec<f64>, f64, Vec<f64>) {
    let mut logits = vec![0.0; k];
    for c in 0..k {
        logits[c] = theta.slice(s![c * d..(c + 1) * d]).dot(&x);
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut probs = vec![0.0; k];
    for c in 0..k {
        probs[c] = (logits[c] - max).exp();
        sum += probs[c];
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    let log_norm = max + sum.ln();
    (probs, log_norm, logits)
}
