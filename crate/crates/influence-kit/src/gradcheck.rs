//! Central-difference derivative checking.
//!
//! Kept as a public module because gradient checks are useful to anyone
//! adding a loss family, and the crate's own test suites lean on them
//! heavily. Steps are scaled per coordinate as `h·(1 + |x_j|)` so the check
//! behaves across magnitudes.

use ndarray::Array1;

/// Central finite-difference gradient of a scalar function at `x`.
pub fn central_diff_grad<F>(f: F, x: &Array1<f64>, rel_step: f64) -> Array1<f64>
where
    F: Fn(&Array1<f64>) -> f64,
{
    let mut g = Array1::<f64>::zeros(x.len());
    for j in 0..x.len() {
        let h = rel_step * (1.0 + x[j].abs());
        let mut xp = x.clone();
        xp[j] += h;
        let mut xm = x.clone();
        xm[j] -= h;
        g[j] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Central finite-difference directional derivative of a vector function:
/// `(g(x + h·v) - g(x - h·v)) / 2h`, which approximates the Jacobian of `g`
/// applied to `v`. With `g = ∇L` this is a Hessian-vector product oracle.
pub fn central_diff_jvp<F>(g: F, x: &Array1<f64>, v: &Array1<f64>, rel_step: f64) -> Array1<f64>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    let scale = 1.0 + x.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let vnorm = v.dot(v).sqrt();
    if vnorm == 0.0 {
        return Array1::zeros(x.len());
    }
    let h = rel_step * scale / vnorm;
    let xp = x + &(v * h);
    let xm = x - &(v * h);
    (&g(&xp) - &g(&xm)) / (2.0 * h)
}

/// `‖a - b‖ / max(‖a‖, ‖b‖, ε)`: symmetric relative error between vectors.
pub fn relative_error(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let diff = (a - b).dot(&(a - b)).sqrt();
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    diff / na.max(nb).max(1e-300)
}

/// `‖a - b‖ / max(1, ‖a‖, ‖b‖)`: the yardstick for comparing against
/// finite differences. Relative above unit scale, absolute below it —
/// an FD estimate carries an absolute noise floor around ε/h that does
/// not shrink with the quantity being measured, so a pure relative error
/// explodes on derivatives that are legitimately tiny.
pub fn fd_error(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let diff = (a - b).dot(&(a - b)).sqrt();
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    diff / na.max(nb).max(1.0)
}

/// Symmetric relative error between scalars.
pub fn relative_error_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
