use crate::curves::CurveFamily;
use crate::error::{invalid, ModspaceError, Result};
use crate::metric::MetricGraph;

/// Most measured edges the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_EDGES: usize = 6;

const POINTS_PER_AXIS: usize = 7;
const SHRINK: f64 = 0.6;

/// Modulus by zooming grid search, independent of [`super::solve_modulus`].
///
/// Curves through zero-measure edges are dropped, since `rho` may be taken
/// infinite there. The search minimizes the scale-free ratio
/// `energy(rho) / (min_g integral_g rho)^p` over `rho` in `[0, 1]^m`,
/// shrinking the box around the incumbent until its mesh is below
/// `1 / grid_resolution` of the initial one, times `1e-3`.
pub fn brute_force_modulus(graph: &MetricGraph, family: &CurveFamily, p: f64, grid_resolution: usize) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("exponent p = {p} must be finite and at least 1"));
    }
    if grid_resolution < 100 {
        return invalid("grid resolution must be at least 100");
    }
    if family.is_empty() {
        return Err(ModspaceError::EmptyFamily);
    }
    let measured: Vec<usize> = (0..graph.edge_count()).filter(|&e| graph.edge(e).mu > 0.0).collect();
    if measured.len() > BRUTE_FORCE_MAX_EDGES {
        return Err(ModspaceError::TooLarge(format!(
            "{} measured edges, at most {BRUTE_FORCE_MAX_EDGES} supported",
            measured.len()
        )));
    }
    let var_of = |e: usize| measured.iter().position(|&x| x == e);
    let rows: Vec<Vec<f64>> = family
        .curves
        .iter()
        .filter_map(|c| {
            let mut row = vec![0.0; measured.len()];
            for &e in c.edges() {
                match var_of(e) {
                    Some(j) => row[j] += graph.edge(e).len,
                    None => return None,
                }
            }
            Some(row)
        })
        .collect();
    if rows.is_empty() {
        return Ok(0.0);
    }
    let mu: Vec<f64> = measured.iter().map(|&e| graph.edge(e).mu).collect();
    let m = mu.len();
    let ratio = |x: &[f64]| -> f64 {
        let theta = rows
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if !(theta > 0.0) {
            return f64::INFINITY;
        }
        let energy: f64 = mu.iter().zip(x).map(|(w, r)| w * r.powf(p)).sum();
        energy / theta.powf(p)
    };

    let final_mesh = 1e-3 / grid_resolution as f64;
    let mut center = vec![0.5; m];
    let mut half = 0.5;
    let mut best = ratio(&center);
    let mut x = vec![0.0; m];
    while 2.0 * half / (POINTS_PER_AXIS - 1) as f64 > final_mesh {
        let lo: Vec<f64> = center.iter().map(|c| (c - half).max(0.0)).collect();
        let hi: Vec<f64> = center.iter().map(|c| (c + half).min(1.0)).collect();
        let mut idx = vec![0usize; m];
        let mut incumbent = center.clone();
        loop {
            for j in 0..m {
                x[j] = lo[j] + (hi[j] - lo[j]) * idx[j] as f64 / (POINTS_PER_AXIS - 1) as f64;
            }
            let v = ratio(&x);
            if v < best {
                best = v;
                incumbent.copy_from_slice(&x);
            }
            // Odometer increment.
            let mut j = 0;
            while j < m {
                idx[j] += 1;
                if idx[j] < POINTS_PER_AXIS {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == m {
                break;
            }
        }
        center = incumbent;
        half *= SHRINK;
    }
    Ok(best)
}
