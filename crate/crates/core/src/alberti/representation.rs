use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{Fragment, Metric};
use crate::error::{ModspaceError, Result};

use super::cone::Cone;

/// A fragment with its probability weight and the density of its measure
/// `nu` with respect to arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedFragment<P> {
    pub fragment: Fragment<P>,
    pub weight: f64,
    pub density: f64,
    /// Graph edge traversed by each step, for fragments of graph curves.
    pub edges: Option<Vec<usize>>,
}

/// Name of the map `phi` and the cone its derivative is checked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSpec {
    pub phi: String,
    pub cone: Cone,
}

/// Weighted fragments `(P, nu)` with `nu_g = density * arc length on g`.
///
/// Fragments are taken to be parametrized by arc length, so the arc length
/// of a piece equals its parameter length. Measurability requirements are
/// vacuous for finite data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlbertiRepresentation<P> {
    pub fragments: Vec<WeightedFragment<P>>,
    pub direction: Option<DirectionSpec>,
}

impl<P> AlbertiRepresentation<P> {
    pub fn total_weight(&self) -> f64 {
        self.fragments.iter().map(|f| f.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }
}

/// An axis-aligned closed box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxCell {
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Fraction of the segment `a -> b` lying in the box (Liang-Barsky).
    pub fn segment_fraction(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        for i in 0..self.lo.len() {
            let d = b[i] - a[i];
            if d == 0.0 {
                if a[i] < self.lo[i] || a[i] > self.hi[i] {
                    return 0.0;
                }
                continue;
            }
            let (mut s0, mut s1) = ((self.lo[i] - a[i]) / d, (self.hi[i] - a[i]) / d);
            if s0 > s1 {
                std::mem::swap(&mut s0, &mut s1);
            }
            t0 = t0.max(s0);
            t1 = t1.min(s1);
            if t0 >= t1 {
                return 0.0;
            }
        }
        t1 - t0
    }
}

/// Test cells on which the representation identity is checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Boxes(Vec<BoxCell>),
    /// Sets of graph edges.
    Edges(Vec<Vec<usize>>),
}

impl Partition {
    pub fn len(&self) -> usize {
        match self {
            Partition::Boxes(b) => b.len(),
            Partition::Edges(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product grid with `counts[i]` cells along axis `i` of the box.
    pub fn regular(lo: &[f64], hi: &[f64], counts: &[usize]) -> Partition {
        let dim = lo.len();
        let total: usize = counts.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let cell_lo: Vec<f64> = (0..dim)
                .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / counts[i] as f64)
                .collect();
            let cell_hi: Vec<f64> = (0..dim)
                .map(|i| lo[i] + (hi[i] - lo[i]) * (idx[i] + 1) as f64 / counts[i] as f64)
                .collect();
            cells.push(BoxCell {
                lo: cell_lo,
                hi: cell_hi,
            });
            for i in 0..dim {
                idx[i] += 1;
                if idx[i] < counts[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        Partition::Boxes(cells)
    }

    /// One cell per edge.
    pub fn singleton_edges(edge_count: usize) -> Partition {
        Partition::Edges((0..edge_count).map(|e| vec![e]).collect())
    }

    /// Lebesgue measure of each box cell.
    pub fn volumes(&self) -> Option<Vec<f64>> {
        match self {
            Partition::Boxes(b) => Some(b.iter().map(BoxCell::volume).collect()),
            Partition::Edges(_) => None,
        }
    }

    /// Total of an edge measure over each edge cell.
    pub fn edge_sums(&self, measure: &[f64]) -> Option<Vec<f64>> {
        match self {
            Partition::Boxes(_) => None,
            Partition::Edges(cells) => Some(cells.iter().map(|c| c.iter().map(|&e| measure[e]).sum()).collect()),
        }
    }
}

/// Outcome of [`validate_representation`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub represented: Vec<f64>,
    pub target: Vec<f64>,
    /// `|target - represented| / target`, or the absolute error on cells
    /// of zero target measure.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub max_absolute: f64,
    pub total_weight: f64,
    pub passed: bool,
    pub warnings: Vec<String>,
}

/// `sum_g P(g) nu_g(A)` for every cell `A`.
pub fn represented_measure<P, E>(rep: &AlbertiRepresentation<P>, partition: &Partition, embed: E) -> Result<Vec<f64>>
where
    P: Sync,
    E: Fn(&P) -> Vec<f64> + Sync,
{
    match partition {
        Partition::Boxes(cells) => {
            let embedded: Vec<Vec<Vec<f64>>> = rep
                .fragments
                .par_iter()
                .map(|wf| wf.fragment.points().iter().map(&embed).collect())
                .collect();
            Ok(cells
                .par_iter()
                .map(|cell| {
                    let mut total = 0.0;
                    for (wf, pts) in rep.fragments.iter().zip(&embedded) {
                        let d = wf.fragment.domain();
                        let mut len = 0.0;
                        for i in 0..pts.len() - 1 {
                            len += (d[i + 1] - d[i]) * cell.segment_fraction(&pts[i], &pts[i + 1]);
                        }
                        total += wf.weight * wf.density * len;
                    }
                    total
                })
                .collect())
        }
        Partition::Edges(cells) => {
            let max_edge = cells.iter().flatten().copied().max().map_or(0, |e| e + 1);
            let mut per_edge = vec![0.0; max_edge];
            for wf in &rep.fragments {
                let edges = wf.edges.as_ref().ok_or_else(|| {
                    ModspaceError::InvalidInput("edge partitions need fragments of graph curves".into())
                })?;
                let d = wf.fragment.domain();
                for (i, &e) in edges.iter().enumerate() {
                    if e < max_edge {
                        per_edge[e] += wf.weight * wf.density * (d[i + 1] - d[i]);
                    }
                }
            }
            Ok(cells.iter().map(|c| c.iter().map(|&e| per_edge[e]).sum()).collect())
        }
    }
}

/// Checks `|mu(A) - sum_g P(g) nu_g(A)| <= tol mu(A)` on every cell.
pub fn validate_representation<P, E>(
    rep: &AlbertiRepresentation<P>,
    target: &[f64],
    partition: &Partition,
    embed: E,
    tol: f64,
) -> Result<RepresentationReport>
where
    P: Sync,
    E: Fn(&P) -> Vec<f64> + Sync,
{
    if target.len() != partition.len() {
        return Err(ModspaceError::DimensionMismatch {
            expected: partition.len(),
            found: target.len(),
        });
    }
    let mut warnings = Vec::new();
    if partition.is_empty() {
        warnings.push("empty partition: the identity holds vacuously".to_string());
    }
    let total_weight = rep.total_weight();
    if (total_weight - 1.0).abs() > 1e-9 {
        warnings.push(format!("fragment weights sum to {total_weight}"));
    }
    let represented = represented_measure(rep, partition, embed)?;
    let residuals: Vec<f64> = target
        .iter()
        .zip(&represented)
        .map(|(t, r)| if *t > 0.0 { (t - r).abs() / t } else { (t - r).abs() })
        .collect();
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    let max_absolute = target
        .iter()
        .zip(&represented)
        .map(|(t, r)| (t - r).abs())
        .fold(0.0, f64::max);
    Ok(RepresentationReport {
        passed: max_residual <= tol && (total_weight - 1.0).abs() <= 1e-9,
        represented,
        target: target.to_vec(),
        residuals,
        max_residual,
        max_absolute,
        total_weight,
        warnings,
    })
}

/// Outcome of a direction check on one fragment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheck {
    pub ok: bool,
    pub violation_fraction: f64,
    pub checked: usize,
}

/// Central-difference derivative of `phi` along the fragment at every
/// interior domain point, tested against the cone. Passes when the
/// fraction of violations is at most `threshold`.
pub fn fragment_direction<P, F>(fragment: &Fragment<P>, phi: F, cone: &Cone, threshold: f64) -> Result<DirectionCheck>
where
    F: Fn(&P) -> Vec<f64>,
{
    let n = fragment.len();
    if n < 3 {
        return Err(ModspaceError::TooFewPoints(n));
    }
    let vals: Vec<Vec<f64>> = fragment.points().iter().map(&phi).collect();
    let d = fragment.domain();
    let mut bad = 0usize;
    for i in 1..n - 1 {
        let dt = d[i + 1] - d[i - 1];
        let der: Vec<f64> = vals[i + 1].iter().zip(&vals[i - 1]).map(|(a, b)| (a - b) / dt).collect();
        if !cone.contains(&der) {
            bad += 1;
        }
    }
    let checked = n - 2;
    let violation_fraction = bad as f64 / checked as f64;
    Ok(DirectionCheck {
        ok: violation_fraction <= threshold,
        violation_fraction,
        checked,
    })
}

/// Direction checks of all fragments with at least three points.
pub fn representation_direction<P, F>(rep: &AlbertiRepresentation<P>, phi: F, cone: &Cone) -> DirectionCheck
where
    F: Fn(&P) -> Vec<f64>,
{
    let mut bad = 0.0;
    let mut checked = 0usize;
    for wf in &rep.fragments {
        if let Ok(c) = fragment_direction(&wf.fragment, &phi, cone, 0.0) {
            bad += c.violation_fraction * c.checked as f64;
            checked += c.checked;
        }
    }
    let violation_fraction = if checked == 0 { 0.0 } else { bad / checked as f64 };
    DirectionCheck {
        ok: violation_fraction == 0.0,
        violation_fraction,
        checked,
    }
}

/// Largest ratio `nu_g(im g) / (len(g) * density)`; at most one for
/// arc-length measures.
pub fn mass_bound<P, M: Metric<P>>(rep: &AlbertiRepresentation<P>, metric: &M) -> f64 {
    rep.fragments
        .iter()
        .map(|wf| {
            let f = &wf.fragment;
            let len: f64 = f.points().windows(2).map(|w| metric.distance(&w[0], &w[1])).sum();
            f.parameter_length() / len
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_clipping() {
        let cell = BoxCell {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        assert!((cell.segment_fraction(&[-1.0, 0.5], &[1.0, 0.5]) - 0.5).abs() < 1e-15);
        assert_eq!(cell.segment_fraction(&[2.0, 0.5], &[3.0, 0.5]), 0.0);
        assert!((cell.segment_fraction(&[0.25, 0.25], &[0.75, 0.75]) - 1.0).abs() < 1e-15);
        assert!((cell.segment_fraction(&[-1.0, -1.0], &[2.0, 2.0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn regular_partition_volumes() {
        let p = Partition::regular(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0], &[2, 3, 4]);
        assert_eq!(p.len(), 24);
        let total: f64 = p.volumes().unwrap().iter().sum();
        assert!((total - 6.0).abs() < 1e-12);
    }
}
