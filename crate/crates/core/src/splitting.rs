//! Blow-ups of point clouds and the product test `Y = Z x V`.
//!
//! A closed set in which every point lies on lines in directions
//! `v_1, ..., v_k` is the product of `V = span(v_i)` with its projection to
//! `V^perp`. On samples this becomes a measurable statement: project, rebuild
//! the product on a grid, and compare with `d_R`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModspaceError, Result};
use crate::metric::{norm, pointed_hausdorff_distance, NearestIndex, PointCloud};

/// Clouds are clipped to this multiple of the window radius before they
/// are compared, so that `d_R` sees no artificial boundary.
pub const WINDOW_MARGIN: f64 = 1.5;

/// `lambda^-1 (A - base)`, based at the origin.
pub fn rescale(a: &PointCloud, base: &[f64], lambda: f64) -> Result<PointCloud> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("scale {lambda} must be positive"));
    }
    if base.len() != a.dim() {
        return Err(ModspaceError::DimensionMismatch {
            expected: a.dim(),
            found: base.len(),
        });
    }
    let points = a
        .points
        .iter()
        .map(|p| p.iter().zip(base).map(|(x, b)| (x - b) / lambda).collect())
        .collect();
    PointCloud::centered(points, a.dim())
}

/// Outcome of [`lines_through_points`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineTest {
    pub passed: bool,
    pub fraction: f64,
    pub tested: usize,
    pub worst: f64,
}

/// Checks `dist(y + t v, Y) <= eps` for every `y` in `Y` inside `B(0, R)`
/// and every offset `t` with `y + t v` still inside the window. The
/// direction is normalized, so offsets are distances.
pub fn lines_through_points(y: &PointCloud, v: &[f64], radius: f64, eps: f64, offsets: &[f64]) -> Result<LineTest> {
    if v.len() != y.dim() {
        return Err(ModspaceError::DimensionMismatch {
            expected: y.dim(),
            found: v.len(),
        });
    }
    let n = norm(v);
    if !(n > 0.0) {
        return invalid("line direction must be nonzero");
    }
    let u: Vec<f64> = v.iter().map(|x| x / n).collect();
    let index = NearestIndex::new(&y.points, y.dim());
    let (tested, passing, worst) = y
        .points
        .par_iter()
        .filter(|p| norm(p) < radius)
        .map(|p| {
            let mut acc = (0usize, 0usize, 0.0f64);
            for &t in offsets {
                let q: Vec<f64> = p.iter().zip(&u).map(|(a, b)| a + t * b).collect();
                if norm(&q) >= radius {
                    continue;
                }
                let d = index.distance(&q);
                acc.0 += 1;
                if d <= eps {
                    acc.1 += 1;
                }
                acc.2 = acc.2.max(d);
            }
            acc
        })
        .reduce(|| (0, 0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2.max(b.2)));
    let fraction = if tested == 0 { 1.0 } else { passing as f64 / tested as f64 };
    Ok(LineTest {
        passed: passing == tested,
        fraction,
        tested,
        worst,
    })
}

/// Orthonormal basis of the span of `dirs` by Gram-Schmidt.
pub fn orthonormal_basis(dirs: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    if dirs.len() > dim {
        return Err(ModspaceError::DependentDirections);
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dirs.len());
    for v in dirs {
        if v.len() != dim {
            return Err(ModspaceError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        let scale = norm(v);
        if !(scale > 0.0) {
            return Err(ModspaceError::DependentDirections);
        }
        let mut r = v.clone();
        // Two passes keep the basis orthonormal to rounding.
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        let m = norm(&r);
        if m <= 1e-9 * scale {
            return Err(ModspaceError::DependentDirections);
        }
        basis.push(r.into_iter().map(|x| x / m).collect());
    }
    Ok(basis)
}

fn project_out(p: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = p.to_vec();
    for b in basis {
        let d: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in r.iter_mut().zip(b) {
            *x -= d * y;
        }
    }
    r
}

/// Outcome of [`factor_product`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    pub directions: Vec<Vec<f64>>,
    /// Orthonormal basis of `V`.
    pub basis: Vec<Vec<f64>>,
    /// Projection of the windowed cloud to `V^perp`, in ambient coordinates.
    pub z: PointCloud,
    /// `d_R` between the cloud and the rebuilt product sample.
    pub product_error: f64,
    /// Share of (point, direction, offset) triples passing the line test.
    pub line_test_fraction: f64,
    /// Grid step used along `V` when rebuilding the product.
    pub resample_step: f64,
    pub passed: bool,
}

/// Tests `Y = Z x V` inside `B(0, R)` with `Z` the projection of `Y`.
///
/// The product is rebuilt on a grid of step `eps / 2` along an
/// orthonormal basis of `V`; the report passes when its `d_R` distance to
/// `Y` is at most `eps` and every direction passes the line test.
pub fn factor_product(y: &PointCloud, dirs: &[Vec<f64>], radius: f64, eps: f64) -> Result<SplittingReport> {
    if !(radius > 0.0) || !(eps > 0.0) {
        return invalid("window radius and tolerance must be positive");
    }
    let dim = y.dim();
    let basis = orthonormal_basis(dirs, dim)?;
    let y0 = y.translated_to_origin();
    let outer = WINDOW_MARGIN * radius;
    let windowed = y0.clipped(outer);

    let mut keys = HashSet::new();
    let mut z_points = Vec::new();
    for p in &windowed.points {
        let z = project_out(p, &basis);
        let key: Vec<i64> = z.iter().map(|x| (x * 1e9).round() as i64).collect();
        if keys.insert(key) {
            z_points.push(z);
        }
    }
    let z = PointCloud::centered(z_points, dim)?;

    let h = 0.5 * eps;
    // Z lies in V^perp and the grid in V, so a point of Y is as far from
    // the product as its V-coordinates are from the grid.
    let to_product = windowed
        .points
        .par_iter()
        .filter(|p| norm(p) < radius)
        .map(|p| {
            basis
                .iter()
                .map(|b| {
                    let a: f64 = p.iter().zip(b).map(|(x, y)| x * y).sum();
                    let r = a - h * (a / h).round();
                    r * r
                })
                .sum::<f64>()
                .sqrt()
        })
        .reduce(|| 0.0, f64::max);
    let steps = (radius / h).ceil() as i64;
    let mut offsets: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    for b in &basis {
        let mut next = Vec::with_capacity(offsets.len() * (2 * steps as usize + 1));
        for o in &offsets {
            for i in -steps..=steps {
                let t = i as f64 * h;
                let v: Vec<f64> = o.iter().zip(b).map(|(x, y)| x + t * y).collect();
                if norm(&v) < 2.0 * radius {
                    next.push(v);
                }
            }
        }
        offsets = next;
    }
    let index = NearestIndex::new(&windowed.points, dim);
    let to_cloud = z
        .points
        .par_iter()
        .filter(|zp| norm(zp) < radius)
        .map(|zp| {
            let mut worst: f64 = 0.0;
            let mut q = vec![0.0; dim];
            for o in &offsets {
                for ((x, a), b) in q.iter_mut().zip(zp).zip(o) {
                    *x = a + b;
                }
                if norm(&q) < radius {
                    worst = worst.max(index.distance(&q));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let product_error = to_product.max(to_cloud);

    let line_offsets: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
        .iter()
        .flat_map(|f| [f * radius, -f * radius])
        .collect();
    let mut tested = 0usize;
    let mut passing = 0.0;
    let mut lines_ok = true;
    for v in dirs {
        let t = lines_through_points(&y0, v, radius, eps, &line_offsets)?;
        tested += t.tested;
        passing += t.fraction * t.tested as f64;
        lines_ok &= t.passed;
    }
    let line_test_fraction = if tested == 0 { 1.0 } else { passing / tested as f64 };
    Ok(SplittingReport {
        directions: dirs.to_vec(),
        basis,
        z,
        product_error,
        line_test_fraction,
        resample_step: h,
        passed: product_error <= eps && lines_ok,
    })
}

/// Blow-ups `lambda_j^-1 (A - a)` with their pairwise `d_R` distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentSequence {
    pub scales: Vec<f64>,
    /// Rescaled clouds, clipped to `B(0, 1.5 R)`.
    pub clouds: Vec<PointCloud>,
    pub distances: Vec<Vec<f64>>,
    /// Whether the second half of the sequence is pairwise within `eps`.
    pub cauchy_tail: bool,
}

pub fn tangent_sequence(a: &PointCloud, base: &[f64], scales: &[f64], radius: f64, eps: f64) -> Result<TangentSequence> {
    if scales.is_empty() {
        return invalid("scale list is empty");
    }
    if scales.iter().any(|s| !(*s > 0.0)) || scales.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("scales must be positive and strictly decreasing");
    }
    if !(radius > 0.0) {
        return invalid("window radius must be positive");
    }
    let clouds = scales
        .iter()
        .map(|&l| rescale(a, base, l).map(|c| c.clipped(WINDOW_MARGIN * radius)))
        .collect::<Result<Vec<_>>>()?;
    let n = clouds.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| pointed_hausdorff_distance(&clouds[i], &clouds[j], radius))
        .collect::<Result<Vec<f64>>>()?;
    let mut distances = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(values) {
        distances[i][j] = d;
        distances[j][i] = d;
    }
    let tail = n / 2;
    let cauchy_tail = n >= 2 && (tail..n).all(|i| (tail..n).all(|j| distances[i][j] <= eps));
    Ok(TangentSequence {
        scales: scales.to_vec(),
        clouds,
        distances,
        cauchy_tail,
    })
}

/// Rescales `cloud` about `base` by `lambda` and returns the index of the
/// closest member of `seq` and its `d_R` distance.
pub fn moved_basepoint_match(
    seq: &TangentSequence,
    cloud: &PointCloud,
    base: &[f64],
    lambda: f64,
    radius: f64,
) -> Result<(usize, f64)> {
    let moved = rescale(cloud, base, lambda)?.clipped(WINDOW_MARGIN * radius);
    let mut best = (0, f64::INFINITY);
    for (i, c) in seq.clouds.iter().enumerate() {
        let d = pointed_hausdorff_distance(&moved, c, radius)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Samples of the level-`level` middle-thirds Cantor prefractal in
/// `[0, 1]`: every interval of length `3^-level` sampled at spacing at most
/// `step`, endpoints included.
pub fn cantor_sample(level: u32, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return invalid("sample step must be positive");
    }
    let mut starts = vec![0.0];
    let mut len = 1.0;
    for _ in 0..level {
        len /= 3.0;
        starts = starts.iter().flat_map(|&s| [s, s + 2.0 * len]).collect();
    }
    let per = (len / step).ceil().max(1.0) as usize;
    Ok(starts
        .iter()
        .flat_map(|&s| (0..=per).map(move |i| s + len * i as f64 / per as f64))
        .collect())
}

/// `{(c, t)}` for `c` in `xs` and `t` in `[-half, half]` at spacing `step`.
pub fn product_with_line(xs: &[f64], half: f64, step: f64) -> Result<PointCloud> {
    if !(step > 0.0) || !(half > 0.0) {
        return invalid("sample step and extent must be positive");
    }
    let n = (half / step).round() as i64;
    let points = xs
        .iter()
        .flat_map(|&x| (-n..=n).map(move |i| vec![x, i as f64 * step]))
        .collect();
    PointCloud::centered(points, 2)
}

/// `count` equally spaced points on the circle of radius `r` about `center`.
pub fn circle_sample(center: [f64; 2], r: f64, count: usize) -> Result<PointCloud> {
    if count == 0 || !(r > 0.0) {
        return invalid("circle needs a positive radius and at least one point");
    }
    let points = (0..count)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / count as f64;
            vec![center[0] + r * a.cos(), center[1] + r * a.sin()]
        })
        .collect();
    PointCloud::centered(points, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_cloud(half: f64, step: f64) -> PointCloud {
        let n = (half / step).round() as i64;
        let pts = (-n..=n)
            .flat_map(|i| (-n..=n).map(move |j| vec![i as f64 * step, j as f64 * step]))
            .collect();
        PointCloud::centered(pts, 2).unwrap()
    }

    #[test]
    fn rescale_examples() {
        let a = PointCloud::centered(vec![vec![0.25, 1.0], vec![-2.0, 0.5]], 2).unwrap();
        assert_eq!(rescale(&a, &[0.0, 0.0], 1.0).unwrap(), a);
        let twice = rescale(&rescale(&a, &[1.0, -1.0], 0.5).unwrap(), &[0.0, 0.0], 0.25).unwrap();
        let once = rescale(&a, &[1.0, -1.0], 0.125).unwrap();
        for (p, q) in twice.points.iter().zip(&once.points) {
            for (x, y) in p.iter().zip(q) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let square = PointCloud::centered(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]], 2).unwrap();
        let big = rescale(&square, &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(big.points[2], vec![2.0, 2.0]);
        assert!(rescale(&square, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn line_tests() {
        let step = 0.01;
        let line = PointCloud::centered((-300..=300).map(|i| vec![i as f64 * step, 0.0]).collect(), 2).unwrap();
        let t = lines_through_points(&line, &[3.0, 0.0], 2.0, 2.0 * step, &[0.5, -0.5, 1.0, -1.25]).unwrap();
        assert!(t.passed && t.fraction == 1.0 && t.tested > 0);

        let cantor = product_with_line(&cantor_sample(3, step).unwrap(), 4.0, step).unwrap();
        let t = lines_through_points(&cantor, &[0.0, 1.0], 2.0, step, &[0.3, -0.7, 1.1]).unwrap();
        assert!(t.passed);

        let circle = circle_sample([0.0, 0.0], 1.0, 2000).unwrap();
        for v in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let t = lines_through_points(&circle, &v, 2.0, 0.02, &[0.25, -0.25, 0.5]).unwrap();
            assert!(!t.passed);
        }
    }

    #[test]
    fn cantor_times_line_splits() {
        let step = 0.01;
        let xs = cantor_sample(3, step).unwrap();
        let y = product_with_line(&xs, 4.0, step).unwrap();
        let r = factor_product(&y, &[vec![0.0, 1.0]], 1.0, 2.0 * step).unwrap();
        assert!(r.passed, "{}", r.product_error);
        assert!(r.product_error <= step);
        let z0 = PointCloud::centered(xs.iter().map(|&x| vec![x, 0.0]).collect(), 2).unwrap();
        assert!(pointed_hausdorff_distance(&r.z, &z0, 1.0).unwrap() <= 2.0 * step);
    }

    #[test]
    fn plane_splits_fully() {
        let step = 0.02;
        let y = grid_cloud(4.0, step);
        let r = factor_product(&y, &[vec![1.0, 0.0], vec![1.0, 1.0]], 1.0, 2.0 * step).unwrap();
        assert_eq!(r.z.len(), 1);
        assert!(r.product_error <= step);
        assert!(r.passed);
        for (i, a) in r.basis.iter().enumerate() {
            for (j, b) in r.basis.iter().enumerate() {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circle_does_not_split() {
        let count = 1000;
        let step = std::f64::consts::TAU / count as f64;
        let c = circle_sample([0.0, 0.0], 1.0, count).unwrap();
        for k in 0..4 {
            let a = std::f64::consts::PI * k as f64 / 4.0;
            let r = factor_product(&c, &[vec![a.cos(), a.sin()]], 1.25, 2.0 * step).unwrap();
            assert!(!r.passed && r.product_error >= 10.0 * step);
        }
    }

    #[test]
    fn dependent_directions_are_rejected() {
        let y = grid_cloud(1.0, 0.1);
        for dirs in [
            vec![vec![1.0, 2.0], vec![-2.0, -4.0]],
            vec![vec![0.0, 0.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        ] {
            assert!(matches!(factor_product(&y, &dirs, 1.0, 0.1), Err(ModspaceError::DependentDirections)));
        }
    }

    #[test]
    fn half_plane_boundary_is_its_own_tangent() {
        let step = 0.005;
        let line = PointCloud::centered((-2000..=2000).map(|i| vec![i as f64 * step, 0.0]).collect(), 2).unwrap();
        let scales = [0.5, 0.25, 0.125, 0.0625];
        let mesh = step / scales[scales.len() - 1];
        let seq = tangent_sequence(&line, &[0.0, 0.0], &scales, 1.0, mesh).unwrap();
        assert!(seq.cauchy_tail);
        let (_, d) = moved_basepoint_match(&seq, &seq.clouds[0], &[0.3, 0.0], 1.0, 1.0).unwrap();
        assert!(d <= 3.0 * step / scales[0]);
    }

    #[test]
    fn tangent_sequence_validates_scales() {
        let line = PointCloud::centered(vec![vec![0.0, 0.0]], 2).unwrap();
        assert!(tangent_sequence(&line, &[0.0, 0.0], &[0.5, 0.5], 1.0, 0.1).is_err());
        assert!(tangent_sequence(&line, &[0.0, 0.0], &[], 1.0, 0.1).is_err());
    }
}
