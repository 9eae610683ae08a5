use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModspaceError, Result};
use crate::metric::MetricGraph;

/// A non-constant edge path in a [`MetricGraph`].
///
/// Edges may repeat; integrals along the curve count every traversal.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteCurve {
    vertices: Vec<usize>,
    edges: Vec<usize>,
    length: f64,
}

impl PartialEq for DiscreteCurve {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

impl Eq for DiscreteCurve {}

impl Hash for DiscreteCurve {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.vertices.hash(state);
    }
}

impl DiscreteCurve {
    /// Validates adjacency of consecutive vertices and resolves edges.
    pub fn new(graph: &MetricGraph, vertices: Vec<usize>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(ModspaceError::ZeroLength);
        }
        let mut edges = Vec::with_capacity(vertices.len() - 1);
        let mut length = 0.0;
        for w in vertices.windows(2) {
            if w[0] >= graph.vertex_count() || w[1] >= graph.vertex_count() {
                return invalid(format!("curve visits missing vertex in {:?}", w));
            }
            let Some(e) = graph.edge_between(w[0], w[1]) else {
                return invalid(format!("vertices {} and {} are not adjacent", w[0], w[1]));
            };
            length += graph.edge(e).len;
            edges.push(e);
        }
        Ok(DiscreteCurve {
            vertices,
            edges,
            length,
        })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Traversed edges in order, with repetition.
    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn first(&self) -> usize {
        self.vertices[0]
    }

    pub fn last(&self) -> usize {
        *self.vertices.last().expect("curves have at least two vertices")
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(&self, other: &DiscreteCurve) -> Result<DiscreteCurve> {
        if self.last() != other.first() {
            return invalid("curves do not join");
        }
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices[1..]);
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        Ok(DiscreteCurve {
            vertices,
            edges,
            length: self.length + other.length,
        })
    }

    /// `(edge, traversal count)` pairs sorted by edge.
    pub fn edge_multiplicities(&self) -> Vec<(usize, usize)> {
        let mut sorted = self.edges.clone();
        sorted.sort_unstable();
        let mut out: Vec<(usize, usize)> = Vec::new();
        for e in sorted {
            match out.last_mut() {
                Some((last, count)) if *last == e => *count += 1,
                _ => out.push((e, 1)),
            }
        }
        out
    }
}

/// Sum of traversed edge lengths.
pub fn curve_length(curve: &DiscreteCurve) -> f64 {
    curve.length()
}

/// A nonnegative density on the edges of a graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub values: Vec<f64>,
}

impl Density {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0)) {
            return invalid(format!("density is negative or NaN on edge {i}"));
        }
        Ok(Density { values })
    }

    pub fn constant(graph: &MetricGraph, c: f64) -> Result<Self> {
        Density::new(vec![c; graph.edge_count()])
    }

    /// `sum_e rho(e)^p mu(e)`.
    pub fn energy(&self, graph: &MetricGraph, p: f64) -> f64 {
        self.values
            .iter()
            .zip(graph.edges())
            .map(|(r, e)| if *r == 0.0 { 0.0 } else { r.powf(p) * e.mu })
            .sum()
    }
}

/// `sum over traversals of rho(e) len(e)`.
pub fn line_integral(graph: &MetricGraph, rho: &Density, curve: &DiscreteCurve) -> Result<f64> {
    let mut total = 0.0;
    for &e in curve.edges() {
        let r = rho
            .values
            .get(e)
            .ok_or(ModspaceError::MissingEdgeDensity(e))?;
        total += r * graph.edge(e).len;
    }
    Ok(total)
}
