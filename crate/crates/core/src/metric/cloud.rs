use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModspaceError, Result};

/// A finite subset of `R^n` with a distinguished basepoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    pub basepoint: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, basepoint: Vec<f64>) -> Result<Self> {
        let dim = basepoint.len();
        if dim == 0 {
            return invalid("point cloud needs a positive ambient dimension");
        }
        for p in &points {
            if p.len() != dim {
                return Err(ModspaceError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return invalid("point cloud coordinates must be finite");
            }
        }
        Ok(PointCloud { points, basepoint })
    }

    /// Cloud with basepoint at the origin of `R^dim`.
    pub fn centered(points: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        PointCloud::new(points, vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.basepoint.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Translates so that the basepoint sits at the origin.
    pub fn translated_to_origin(&self) -> PointCloud {
        let points = self
            .points
            .iter()
            .map(|p| sub(p, &self.basepoint))
            .collect();
        PointCloud {
            points,
            basepoint: vec![0.0; self.dim()],
        }
    }

    /// Points strictly inside `B(0, radius)`.
    pub fn clipped(&self, radius: f64) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .filter(|p| norm(p) < radius)
                .cloned()
                .collect(),
            basepoint: self.basepoint.clone(),
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact nearest-neighbour queries over a fixed point set.
pub struct NearestIndex {
    tree: KdTree<f64, usize, Vec<f64>>,
    len: usize,
}

impl NearestIndex {
    pub fn new(points: &[Vec<f64>], dim: usize) -> Self {
        let mut tree = KdTree::new(dim);
        for (i, p) in points.iter().enumerate() {
            tree.add(p.clone(), i)
                .expect("coordinates are validated finite");
        }
        NearestIndex {
            tree,
            len: points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Distance to and index of the closest indexed point.
    pub fn nearest(&self, q: &[f64]) -> Option<(f64, usize)> {
        if self.len == 0 {
            return None;
        }
        self.tree
            .nearest(q, 1, &squared_euclidean)
            .ok()
            .and_then(|hits| hits.first().map(|&(d2, &i)| (d2.sqrt(), i)))
    }

    /// Distance to the closest indexed point, infinite when empty.
    pub fn distance(&self, q: &[f64]) -> f64 {
        self.nearest(q).map_or(f64::INFINITY, |(d, _)| d)
    }
}

fn check_dims(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(ModspaceError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Per-point data from which `d_R(A, B)` is read off for any `R`: the norm
/// of each point and its distance to the other cloud.
pub struct HausdorffProfile {
    /// `(|a|, dist(a, B))` for `a` in `A`, followed by `(|b|, dist(b, A))`.
    entries: Vec<(f64, f64)>,
}

impl HausdorffProfile {
    pub fn new(a: &PointCloud, b: &PointCloud) -> Result<Self> {
        check_dims(a, b)?;
        let index_a = NearestIndex::new(&a.points, a.dim());
        let index_b = NearestIndex::new(&b.points, b.dim());
        let entries = a
            .points
            .iter()
            .map(|p| (norm(p), index_b.distance(p)))
            .chain(b.points.iter().map(|p| (norm(p), index_a.distance(p))))
            .collect();
        Ok(HausdorffProfile { entries })
    }

    pub fn at(&self, radius: f64) -> f64 {
        self.entries
            .iter()
            .filter(|(r, _)| *r < radius)
            .map(|&(_, d)| d)
            .fold(0.0, f64::max)
    }
}

/// Pointed Hausdorff discrepancy
/// `d_R(A,B) = max(sup_{a in A, |a|<R} dist(a,B), sup_{b in B, |b|<R} dist(b,A))`.
///
/// Both clouds are read in their own coordinates with the origin as base;
/// a one-sided supremum over an empty window is 0.
pub fn pointed_hausdorff_distance(a: &PointCloud, b: &PointCloud, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return invalid("window radius must be positive");
    }
    Ok(HausdorffProfile::new(a, b)?.at(radius))
}

/// A point cloud together with values of a map sampled at its points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MappedCloud {
    pub cloud: PointCloud,
    pub values: Vec<Vec<f64>>,
}

impl MappedCloud {
    pub fn new(cloud: PointCloud, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != cloud.len() {
            return invalid("one map value is required per point");
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.len() != first.len()) {
                return invalid("map values must share a target dimension");
            }
        }
        Ok(MappedCloud { cloud, values })
    }

    /// Samples `f` at every point of `cloud`.
    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(cloud: PointCloud, f: F) -> Self {
        let values = cloud.points.iter().map(|p| f(p)).collect();
        MappedCloud { cloud, values }
    }
}

/// Smallest `epsilon` probed by [`dee_distance`].
pub const DEE_EPS_MIN: f64 = 1e-12;
const DEE_ACCURACY: f64 = 1e-10;

/// The truncated tangent distance
/// `D = min(inf{e : d_{1/e}(A,B) < e and |f-g| < e on (A u B) n B(0,1/e)}, 1/2)`.
///
/// Each map is extended to the other cloud by nearest-point extension. The
/// defining condition is monotone in `e`, so the infimum is located by
/// bisection; the returned value satisfies the condition and lies within
/// `1e-10` of the infimum. Returns 0 when the condition already holds at
/// [`DEE_EPS_MIN`].
pub fn dee_distance(a: &MappedCloud, b: &MappedCloud) -> Result<f64> {
    check_dims(&a.cloud, &b.cloud)?;
    let dim = a.cloud.dim();
    let index_a = NearestIndex::new(&a.cloud.points, dim);
    let index_b = NearestIndex::new(&b.cloud.points, dim);

    // (|x|, dist to other cloud, |f - g| at x)
    let mut entries: Vec<(f64, f64, f64)> = Vec::with_capacity(a.cloud.len() + b.cloud.len());
    for (p, fv) in a.cloud.points.iter().zip(&a.values) {
        let (d, gv) = match index_b.nearest(p) {
            Some((d, j)) => (d, dist(fv, &b.values[j])),
            None => (f64::INFINITY, f64::INFINITY),
        };
        entries.push((norm(p), d, gv));
    }
    for (p, gv) in b.cloud.points.iter().zip(&b.values) {
        let (d, fv) = match index_a.nearest(p) {
            Some((d, i)) => (d, dist(&a.values[i], gv)),
            None => (f64::INFINITY, f64::INFINITY),
        };
        entries.push((norm(p), d, fv));
    }

    let holds = |eps: f64| {
        let window = 1.0 / eps;
        entries
            .iter()
            .filter(|(r, _, _)| *r < window)
            .all(|&(_, d, df)| d < eps && df < eps)
    };

    if holds(DEE_EPS_MIN) {
        return Ok(0.0);
    }
    if !holds(0.5) {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (DEE_EPS_MIN, 0.5);
    while hi - lo > DEE_ACCURACY {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[&[f64]]) -> PointCloud {
        PointCloud::centered(points.iter().map(|p| p.to_vec()).collect(), points[0].len()).unwrap()
    }

    #[test]
    fn d_r_identity_and_window_cutoff() {
        let a = cloud(&[&[0.0, 0.0], &[1.0, 0.5]]);
        assert_eq!(pointed_hausdorff_distance(&a, &a, 3.0).unwrap(), 0.0);

        let r = 2.0;
        let origin = cloud(&[&[0.0, 0.0]]);
        let far = cloud(&[&[0.0, 0.0], &[r + 1.0, 0.0]]);
        assert_eq!(pointed_hausdorff_distance(&origin, &far, r).unwrap(), 0.0);
    }

    #[test]
    fn d_r_direct_pairwise_value() {
        let a = cloud(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = cloud(&[&[0.0, 0.0], &[1.2, 0.0]]);
        let d = pointed_hausdorff_distance(&a, &b, 2.0).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn d_r_excludes_boundary_points() {
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[0.0, 0.0], &[2.0, 0.0]]);
        assert_eq!(pointed_hausdorff_distance(&a, &b, 2.0).unwrap(), 0.0);
        assert_eq!(pointed_hausdorff_distance(&a, &b, 2.0 + 1e-9).unwrap(), 2.0);
    }

    #[test]
    fn d_r_dimension_mismatch() {
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[0.0, 0.0, 0.0]]);
        assert!(matches!(
            pointed_hausdorff_distance(&a, &b, 1.0),
            Err(ModspaceError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nearest_index_handles_duplicates() {
        let pts = vec![vec![0.5, 0.5]; 100];
        let idx = NearestIndex::new(&pts, 2);
        let (d, _) = idx.nearest(&[0.5, 1.5]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dee_identity_and_constant_shift() {
        let c = cloud(&[&[0.1, 0.2], &[-0.3, 0.4], &[0.5, -0.5]]);
        let f = MappedCloud::from_fn(c.clone(), |p| vec![p[0] - p[1]]);
        assert!(dee_distance(&f, &f).unwrap() <= DEE_EPS_MIN);

        let g = MappedCloud::from_fn(c, |p| vec![p[0] - p[1] + 0.3]);
        let d = dee_distance(&f, &g).unwrap();
        assert!((d - 0.3).abs() < 1e-9, "{d}");
    }

    #[test]
    fn dee_saturates_at_one_half() {
        let a = MappedCloud::from_fn(cloud(&[&[0.0, 0.0]]), |_| vec![0.0]);
        let b = MappedCloud::from_fn(cloud(&[&[0.0, 0.0]]), |_| vec![5.0]);
        assert_eq!(dee_distance(&a, &b).unwrap(), 0.5);
    }
}
