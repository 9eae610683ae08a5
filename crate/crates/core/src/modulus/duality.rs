use serde::{Deserialize, Serialize};

use super::solve::ModulusCertificate;

/// Residuals of the duality identities for a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub p: f64,
    pub value: f64,
    /// `| ||f||_q * value^(1/p) - 1 |`, with `||f||_inf` at `p = 1`.
    pub norm_residual: f64,
    /// Largest relative `|rho^p - value^q f^q|` over edges with `eta > 0`;
    /// `None` at `p = 1`.
    pub pointwise_residual: Option<f64>,
    /// The same quantity over measured edges that carry no `eta`.
    pub off_support_residual: Option<f64>,
    /// Largest Beurling residual over curves with weight above
    /// `support_threshold`.
    pub beurling_residual: f64,
    pub support_threshold: f64,
    pub primal_dual_gap: f64,
    pub capped_edges: usize,
    pub norm_ok: bool,
    pub pointwise_ok: bool,
    pub beurling_ok: bool,
    pub passed: bool,
}

/// Recomputes every duality identity from the certificate data alone.
///
/// Curves with dual weight at most `10 * tol` are treated as outside the
/// support of `P`.
pub fn verify_duality(cert: &ModulusCertificate, tol: f64) -> DualityReport {
    let support_threshold = 10.0 * tol;
    let measured = || cert.mu.iter().enumerate().filter(|(_, m)| **m > 0.0).map(|(e, _)| e);
    let v = cert.value;
    let norm_residual = match cert.q {
        None => {
            let sup = measured().map(|e| cert.f[e]).fold(0.0, f64::max);
            (sup * v - 1.0).abs()
        }
        Some(q) => {
            let sum: f64 = measured().map(|e| cert.mu[e] * cert.f[e].powf(q)).sum();
            (sum.powf(1.0 / q) * v.powf(1.0 / cert.p) - 1.0).abs()
        }
    };

    let (pointwise_residual, off_support_residual) = match cert.q {
        None => (None, None),
        Some(q) => {
            let p = cert.p;
            let lhs = |e: usize| cert.rho_star.values[e].powf(p);
            let rhs = |e: usize| (v * cert.f[e]).powf(q);
            let norm = measured().map(|e| lhs(e).max(rhs(e))).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let mut on = 0.0f64;
            let mut off = 0.0f64;
            for e in measured() {
                let r = (lhs(e) - rhs(e)).abs() / norm;
                if cert.eta[e] > 0.0 {
                    on = on.max(r);
                } else {
                    off = off.max(r);
                }
            }
            (Some(on), Some(off))
        }
    };

    let beurling_residual = cert
        .dual
        .iter()
        .zip(&cert.beurling_residuals)
        .filter(|(d, _)| d.weight > support_threshold)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);

    let norm_ok = norm_residual <= tol;
    let pointwise_ok = pointwise_residual.map_or(true, |r| r <= tol);
    let beurling_ok = beurling_residual <= tol;
    DualityReport {
        p: cert.p,
        value: v,
        norm_residual,
        pointwise_residual,
        off_support_residual,
        beurling_residual,
        support_threshold,
        primal_dual_gap: cert.primal_dual_gap,
        capped_edges: cert.capped_edges.len(),
        norm_ok,
        pointwise_ok,
        beurling_ok,
        passed: norm_ok && pointwise_ok && beurling_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{boundary_sides, CurveFamily};
    use crate::metric::{Edge, MetricGraph};
    use crate::modulus::{solve_modulus, FamilySpec, SolveOptions};
    use crate::spaces::grid_square;

    #[test]
    fn single_curve_identities() {
        let edges = (0..3).map(|i| Edge::new(i, i + 1, 0.5, 0.2)).collect();
        let g = MetricGraph::new(vec![None; 4], edges).unwrap();
        let fam = CurveFamily::from_vertex_lists(&g, vec![vec![0, 1, 2, 3]], "one").unwrap();
        for p in [1.0, 2.0, 3.0] {
            let cert = solve_modulus(&g, &fam.clone().into(), p, &SolveOptions::default()).unwrap();
            // f = len / mu on the curve.
            for e in 0..3 {
                assert!((cert.f[e] - 2.5).abs() < 1e-12);
            }
            let report = verify_duality(&cert, 1e-5);
            assert!(report.passed, "{report:?}");
            assert_eq!(report.pointwise_residual.is_none(), p == 1.0);
        }
    }

    #[test]
    fn measure_scaling_keeps_residuals() {
        let g = grid_square(4).unwrap();
        let (left, right) = boundary_sides(&g, 0).unwrap();
        let fam = FamilySpec::connecting(left, right);
        let opts = SolveOptions::default();
        let a = solve_modulus(&g, &fam, 2.0, &opts).unwrap();
        let g3 = g.with_scaled_measure(3.0).unwrap();
        let b = solve_modulus(&g3, &fam, 2.0, &opts).unwrap();
        assert!((b.value - 3.0 * a.value).abs() < 1e-5 * b.value);
        let (ra, rb) = (verify_duality(&a, 1e-4), verify_duality(&b, 1e-4));
        assert!(ra.passed && rb.passed, "{ra:?} {rb:?}");
    }
}
