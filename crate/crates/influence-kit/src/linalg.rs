//! Small dense linear algebra helpers.
//!
//! The toolkit only ever factors desk-scale symmetric systems (the explicit
//! iHVP backend refuses p > 2000), so a plain Cholesky plus a generic
//! conjugate-gradient loop is all that is needed; no LAPACK binding.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub(crate) struct CholeskyFactor {
    l: Array2<f64>,
}

impl CholeskyFactor {
    /// Factor `a` (assumed symmetric; only the lower triangle is read).
    /// Fails with [`Error::NotPositiveDefinite`] on a non-positive pivot.
    pub fn factor(a: &Array2<f64>) -> Result<Self> {
        let p = a.nrows();
        debug_assert_eq!(p, a.ncols(), "Cholesky input must be square");
        let mut l = Array2::<f64>::zeros((p, p));
        for j in 0..p {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= l[[j, k]] * l[[j, k]];
            }
            if !diag.is_finite() || diag <= 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let dj = diag.sqrt();
            l[[j, j]] = dj;
            for i in (j + 1)..p {
                let mut v = a[[i, j]];
                for k in 0..j {
                    v -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = v / dj;
            }
        }
        Ok(CholeskyFactor { l })
    }

    /// Solve `A x = b` by forward then backward substitution.
    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let p = self.l.nrows();
        debug_assert_eq!(b.len(), p);
        let mut y = b.clone();
        for i in 0..p {
            let mut v = y[i];
            for k in 0..i {
                v -= self.l[[i, k]] * y[k];
            }
            y[i] = v / self.l[[i, i]];
        }
        for i in (0..p).rev() {
            let mut v = y[i];
            for k in (i + 1)..p {
                v -= self.l[[k, i]] * y[k];
            }
            y[i] = v / self.l[[i, i]];
        }
        y
    }
}

/// Average a matrix with its transpose in place. Columns assembled from
/// independent Hessian-vector products agree only up to rounding; the
/// factorization gets the exactly symmetric version.
pub(crate) fn symmetrize(a: &mut Array2<f64>) {
    let p = a.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
}

/// Outcome of a conjugate-gradient solve. Callers wanting a residual
/// measure the true one; the recursively updated norm drifts.
#[derive(Debug)]
pub(crate) struct CgSolve {
    pub x: Array1<f64>,
    pub iterations: usize,
}

/// Conjugate gradients on `A x = b` for a positive-definite operator given
/// only as a matrix-vector product. Starts from `x0` (or zero), stops when
/// the residual drops to `tol_residual * ||b_scale||` or `max_iters` is
/// reached. Detecting `dᵀAd ≤ 0` aborts: the operator is not PD.
pub(crate) fn cg_solve<F>(
    apply_a: F,
    b: &Array1<f64>,
    x0: Option<Array1<f64>>,
    b_scale: f64,
    tol_residual: f64,
    max_iters: usize,
) -> Result<CgSolve>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>>,
{
    let mut x = x0.unwrap_or_else(|| Array1::zeros(b.len()));
    let mut r = if x.iter().all(|&v| v == 0.0) {
        b.clone()
    } else {
        b - &apply_a(&x)?
    };
    let threshold = tol_residual * b_scale;
    let mut rs = r.dot(&r);
    if rs.sqrt() <= threshold {
        return Ok(CgSolve { x, iterations: 0 });
    }
    let mut d = r.clone();
    let mut iterations = 0;
    for it in 0..max_iters {
        let ad = apply_a(&d)?;
        let dad = d.dot(&ad);
        if dad <= 0.0 {
            return Err(Error::NegativeCurvature { iteration: it });
        }
        let alpha = rs / dad;
        x.scaled_add(alpha, &d);
        r.scaled_add(-alpha, &ad);
        iterations = it + 1;
        let rs_next = r.dot(&r);
        if rs_next.sqrt() <= threshold {
            break;
        }
        let beta = rs_next / rs;
        rs = rs_next;
        d = &r + &(beta * &d);
    }
    Ok(CgSolve { x, iterations })
}
