use crate::curves::{fragment_from_walk, heisenberg_curve_family, heisenberg_line, HeisenbergLineKind};
use crate::error::{invalid, ModspaceError, Result};
use crate::metric::MetricGraph;
use crate::spaces::{Generator, HeisenbergPoint};

use super::cone::Cone;
use super::representation::{AlbertiRepresentation, BoxCell, DirectionSpec, Partition, WeightedFragment};

/// Half-angle cosine of the axis cones used for direction checks.
pub const AXIS_CONE_COS: f64 = 0.866_025_403_784_438_6;

#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Rows,
    Cols,
}

/// Full-width grid lines with uniform weights, representing Lebesgue
/// measure on the square.
///
/// Line `j` carries density `(n+1) h_j`, where `h_j` is the height of the
/// strip of points closer to it than to its neighbors, so the
/// representation is exact on [`fubini_partition`].
pub fn fubini_representation(graph: &MetricGraph, orientation: Orientation) -> Result<AlbertiRepresentation<usize>> {
    let n = match graph.generator() {
        Some(Generator::Grid { n }) => *n,
        other => {
            return Err(ModspaceError::WrongGenerator(format!(
                "expected a grid_square graph, found {}",
                other.map_or("an unlabeled graph".to_string(), |g| format!("{g:?}"))
            )))
        }
    };
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let domain: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let mut fragments = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let vertices: Vec<usize> = (0..=n)
            .map(|i| match orientation {
                Orientation::Rows => id(i, j),
                Orientation::Cols => id(j, i),
            })
            .collect();
        let edges = vertices
            .windows(2)
            .map(|w| graph.edge_between(w[0], w[1]).ok_or_else(|| ModspaceError::InvalidInput("grid edge missing".into())))
            .collect::<Result<Vec<_>>>()?;
        let strip = if j == 0 || j == n { 0.5 / n as f64 } else { 1.0 / n as f64 };
        let fragment = crate::curves::Fragment::new(domain.clone(), vertices, &crate::curves::GraphMetric::new(graph))?;
        fragments.push(WeightedFragment {
            fragment,
            weight: 1.0 / (n + 1) as f64,
            density: (n + 1) as f64 * strip,
            edges: Some(edges),
        });
    }
    let axis = match orientation {
        Orientation::Rows => 0,
        Orientation::Cols => 1,
    };
    Ok(AlbertiRepresentation {
        fragments,
        direction: Some(DirectionSpec {
            phi: "identity".into(),
            cone: Cone::axis(2, axis, AXIS_CONE_COS)?,
        }),
    })
}

/// Cells `[(i-1/2)/n, (i+1/2)/n] x [(j-1/2)/n, (j+1/2)/n]` clipped to the
/// unit square, one around each grid vertex.
pub fn fubini_partition(n: usize) -> Partition {
    let side = |i: usize| {
        let lo = (i as f64 - 0.5).max(0.0) / n as f64;
        let hi = (i as f64 + 0.5).min(n as f64) / n as f64;
        (lo, hi)
    };
    let mut cells = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let (x0, x1) = side(i);
            let (y0, y1) = side(j);
            cells.push(BoxCell {
                lo: vec![x0, y0],
                hi: vec![x1, y1],
            });
        }
    }
    Partition::Boxes(cells)
}

/// Uniform probability over the lines through `params`, each carrying
/// `param_area` times arc length, so that the represented measure is the
/// Riemann sum of Lebesgue measure sliced along the lines.
pub fn heisenberg_representation(
    kind: HeisenbergLineKind,
    params: &[(f64, f64)],
    param_area: f64,
    t_grid: &[f64],
) -> Result<AlbertiRepresentation<HeisenbergPoint>> {
    if !(param_area > 0.0) {
        return invalid("parameter area must be positive");
    }
    let frags = heisenberg_curve_family(kind, params, t_grid)?;
    let w = 1.0 / frags.len() as f64;
    let axis = match kind {
        HeisenbergLineKind::Alpha => 0,
        HeisenbergLineKind::Beta => 1,
    };
    Ok(AlbertiRepresentation {
        fragments: frags
            .into_iter()
            .map(|fragment| WeightedFragment {
                fragment,
                weight: w,
                density: param_area,
                edges: None,
            })
            .collect(),
        direction: Some(DirectionSpec {
            phi: "xy".into(),
            cone: Cone::axis(2, axis, AXIS_CONE_COS)?,
        }),
    })
}

/// Half-widths of the box `[-1/2,1/2]^2 x [-3/8,3/8]` used for the
/// Heisenberg representation test.
pub const HEISENBERG_BOX: [f64; 3] = [0.5, 0.5, 0.375];

/// Half-width of the range of the second line parameter; lines with
/// `|b| > 5/8` miss the box.
pub const HEISENBERG_B_RANGE: f64 = 0.625;

/// Midpoint grid over `[-1/2,1/2] x [-5/8,5/8]` with spacing `step`, and
/// the area of that rectangle.
pub fn heisenberg_parameter_grid(step: f64) -> Result<(Vec<(f64, f64)>, f64)> {
    let na = (1.0 / step).round() as usize;
    let nb = (2.0 * HEISENBERG_B_RANGE / step).round() as usize;
    if na == 0 || (na as f64 * step - 1.0).abs() > 1e-9 || (nb as f64 * step - 2.0 * HEISENBERG_B_RANGE).abs() > 1e-9 {
        return invalid(format!("step {step} does not divide the parameter rectangle"));
    }
    let mut params = Vec::with_capacity(na * nb);
    for i in 0..na {
        for j in 0..nb {
            params.push((
                -0.5 + (i as f64 + 0.5) * step,
                -HEISENBERG_B_RANGE + (j as f64 + 0.5) * step,
            ));
        }
    }
    Ok((params, 2.0 * HEISENBERG_B_RANGE))
}

/// Regular `cells^3` partition of the test box.
pub fn heisenberg_box_partition(cells: usize) -> Partition {
    let hi = HEISENBERG_BOX.to_vec();
    let lo: Vec<f64> = hi.iter().map(|h| -h).collect();
    Partition::regular(&lo, &hi, &[cells; 3])
}

/// Time samples `-1/2, -1/2 + step, ..., 1/2`.
pub fn unit_time_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| -0.5 + i as f64 / n as f64).collect()
}

/// Absolute determinant of the derivative of `(a, b, t) -> line_(a,b)(t)` by
/// central differences.
pub fn heisenberg_jacobian(kind: HeisenbergLineKind, a: f64, b: f64, t: f64, h: f64) -> f64 {
    let f = |a: f64, b: f64, t: f64| heisenberg_line(kind, a, b, t).to_vec();
    let col = |da: f64, db: f64, dt: f64| -> Vec<f64> {
        let p = f(a + da, b + db, t + dt);
        let m = f(a - da, b - db, t - dt);
        p.iter().zip(&m).map(|(x, y)| (x - y) / (2.0 * h)).collect()
    };
    let c = [col(h, 0.0, 0.0), col(0.0, h, 0.0), col(0.0, 0.0, h)];
    let det = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[1][0] * (c[0][1] * c[2][2] - c[0][2] * c[2][1])
        + c[2][0] * (c[0][1] * c[1][2] - c[0][2] * c[1][1]);
    det.abs()
}

/// Fragments of weighted vertex walks, as a representation of their curve
/// measure on the edge partition.
///
/// Every walk is split with [`fragment_from_walk`], which drops pauses.
/// Each step's slope `(phi(v) - phi(u)) / len` must lie in `cone`; if the
/// fraction of violating steps exceeds `threshold` the construction fails.
/// Weights are normalized to a probability and their total moves into the
/// density of `nu`.
pub fn curves_to_alberti<F>(
    graph: &MetricGraph,
    walks: &[(Vec<usize>, f64)],
    phi: F,
    phi_name: &str,
    cone: &Cone,
    threshold: f64,
) -> Result<AlbertiRepresentation<usize>>
where
    F: Fn(usize) -> Vec<f64>,
{
    let mut pieces: Vec<(crate::curves::Fragment<usize>, Vec<usize>, f64)> = Vec::new();
    let mut steps = 0usize;
    let mut bad = 0usize;
    for (walk, w) in walks {
        if !(*w >= 0.0) {
            return invalid("curve weights must be nonnegative");
        }
        if *w == 0.0 {
            continue;
        }
        for frag in fragment_from_walk(graph, walk, crate::curves::DEFAULT_MAX_LIPSCHITZ)? {
            let pts = frag.points();
            let d = frag.domain();
            let mut edges = Vec::with_capacity(pts.len() - 1);
            for i in 0..pts.len() - 1 {
                let e = graph
                    .edge_between(pts[i], pts[i + 1])
                    .ok_or_else(|| ModspaceError::InvalidInput("fragment step is not an edge".into()))?;
                edges.push(e);
                let (a, b) = (phi(pts[i]), phi(pts[i + 1]));
                let slope: Vec<f64> = b.iter().zip(&a).map(|(x, y)| (x - y) / (d[i + 1] - d[i])).collect();
                steps += 1;
                if !cone.contains(&slope) {
                    bad += 1;
                }
            }
            pieces.push((frag, edges, *w));
        }
    }
    let fraction = if steps == 0 { 0.0 } else { bad as f64 / steps as f64 };
    if fraction > threshold {
        return Err(ModspaceError::DirectionViolation(fraction));
    }
    let total: f64 = pieces.iter().map(|p| p.2).sum();
    if !(total > 0.0) {
        return invalid("no curve carries positive weight");
    }
    Ok(AlbertiRepresentation {
        fragments: pieces
            .into_iter()
            .map(|(fragment, edges, w)| WeightedFragment {
                fragment,
                weight: w / total,
                density: total,
                edges: Some(edges),
            })
            .collect(),
        direction: Some(DirectionSpec {
            phi: phi_name.to_string(),
            cone: cone.clone(),
        }),
    })
}
