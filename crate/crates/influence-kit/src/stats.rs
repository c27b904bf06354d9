//! Correlation statistics used by the validation workflows.

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            what: "correlation inputs",
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::ConstantInput);
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "correlation input".into(),
        });
    }
    Ok(())
}

/// Pearson correlation coefficient. Errors on mismatched lengths,
/// non-finite values, fewer than two points, or a constant input (the
/// coefficient is undefined when either variance vanishes).
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Ranks with ties assigned the average of the positions they span
/// (1-based, so distinct values map to 1..=n).
pub(crate) fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the mean 1-based rank.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks. A constant input
/// (all values tied) is an error, as with [`pearson_r`].
pub fn spearman_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_hand_computed_fixture() {
        // x = 1..5, y = [2,1,4,3,7]: centered products sum to 12,
        // Σdx² = 10, Σdy² = 21.2, so r = 12/√212.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0];
        let r = pearson_r(&x, &y).unwrap();
        assert!((r - 12.0 / 212.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spearman_hand_computed_fixture() {
        // Same data; y ranks are [2,1,4,3,5] and the rank correlation
        // collapses to 8/10.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0];
        let r = spearman_r(&x, &y).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pearson_is_scale_and_shift_invariant() {
        let x = [0.3, -1.2, 2.5, 0.0, 4.4, -2.2];
        let y = [1.0, 0.4, 2.0, -0.5, 3.1, 0.2];
        let scaled: Vec<f64> = x.iter().map(|v| 3.5 * v - 7.0).collect();
        let a = pearson_r(&x, &y).unwrap();
        let b = pearson_r(&scaled, &y).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn spearman_sees_monotone_transforms_as_perfect() {
        let x: [f64; 5] = [-2.0, -1.0, 0.5, 1.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
        assert!((spearman_r(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!(pearson_r(&x, &y).unwrap() < 1.0);
    }

    #[test]
    fn perfect_anticorrelation() {
        let x = [1.0, 2.0, 3.0];
        let y = [5.0, 3.0, 1.0];
        assert!((pearson_r(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman_r(&x, &y).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn ties_get_average_ranks() {
        let r = average_ranks(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
        let r = average_ranks(&[5.0, 5.0, 5.0]);
        assert_eq!(r, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn constant_input_is_an_error() {
        let c = [2.0, 2.0, 2.0];
        let y = [1.0, 2.0, 3.0];
        assert!(matches!(pearson_r(&c, &y), Err(Error::ConstantInput)));
        assert!(matches!(spearman_r(&c, &y), Err(Error::ConstantInput)));
        assert!(matches!(pearson_r(&y, &c), Err(Error::ConstantInput)));
    }

    #[test]
    fn mismatched_and_short_inputs_error() {
        assert!(matches!(
            pearson_r(&[1.0, 2.0], &[1.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            pearson_r(&[1.0], &[1.0]),
            Err(Error::ConstantInput)
        ));
        assert!(matches!(
            pearson_r(&[1.0, f64::NAN], &[1.0, 2.0]),
            Err(Error::NonFinite { .. })
        ));
    }
}
