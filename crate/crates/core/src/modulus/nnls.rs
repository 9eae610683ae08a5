//! Nonnegative least squares by the active-set method of Lawson and Hanson.

use nalgebra::{DMatrix, DVector};

/// Minimizes `|a x - y|` over `x >= 0`. Each passive-set subproblem takes
/// the minimum-norm least-squares solution, so ties between equivalent
/// supports resolve toward small weights.
pub(crate) fn nnls(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.ncols();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())) * y.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (y - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
            .filter(|&j| w[j] > eps);
        let Some(j) = candidate else {
            return Some(x);
        };
        passive[j] = true;
        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(&cols);
            let z = sub.svd(true, true).solve(y, 1e-12).ok()?;
            if z.iter().all(|v| *v > 0.0) {
                x.fill(0.0);
                for (k, &j) in cols.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (k, &j) in cols.iter().enumerate() {
                if z[k] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[k]));
                }
            }
            for (k, &j) in cols.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= eps {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    Some(x)
}
