//! Self-contained numerical oracles for the integration suites: nothing
//! here calls back into the library's own linear algebra or statistics,
//! so agreement between the two is evidence, not circularity.

use ndarray::Array1;

/// Pearson correlation, direct from the definition.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Dense linear solve by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col] != 0.0, "singular system");
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut v = b[row];
        for k in (row + 1)..n {
            v -= a[row][k] * x[k];
        }
        x[row] = v / a[row][row];
    }
    x
}

/// Central-difference gradient of a scalar function, one coordinate at a
/// time, with a step scaled to the coordinate's magnitude.
pub fn central_grad(f: impl Fn(&Array1<f64>) -> f64, theta: &Array1<f64>) -> Array1<f64> {
    let mut g = Array1::zeros(theta.len());
    let mut probe = theta.clone();
    for j in 0..theta.len() {
        let h = 1e-6 * (1.0 + theta[j].abs());
        let orig = probe[j];
        probe[j] = orig + h;
        let up = f(&probe);
        probe[j] = orig - h;
        let down = f(&probe);
        probe[j] = orig;
        g[j] = (up - down) / (2.0 * h);
    }
    g
}

/// Central difference of a vector function along direction `v`:
/// `(g(θ + h·v) − g(θ − h·v)) / 2h`.
pub fn central_directional(
    g: impl Fn(&Array1<f64>) -> Array1<f64>,
    theta: &Array1<f64>,
    v: &Array1<f64>,
) -> Array1<f64> {
    let h = 1e-6;
    let up = g(&(theta + &(v * h)));
    let down = g(&(theta - &(v * h)));
    (&up - &down) / (2.0 * h)
}

/// `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &Array1<f64>, b: &Array1<f64>, floor: f64) -> f64 {
    let d = a - b;
    d.dot(&d).sqrt() / b.dot(b).sqrt().max(floor)
}
