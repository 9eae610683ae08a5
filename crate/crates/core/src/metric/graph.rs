use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModspaceError, Result};
use crate::spaces::Generator;

/// An undirected edge carrying a length and a share of the ambient measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub len: f64,
    pub mu: f64,
}

impl Edge {
    pub fn new(u: usize, v: usize, len: f64, mu: f64) -> Self {
        Edge { u, v, len, mu }
    }

    /// The endpoint opposite to `w`.
    pub fn other(&self, w: usize) -> usize {
        if self.u == w {
            self.v
        } else {
            self.u
        }
    }
}

/// A finite metric measure space: a weighted graph whose shortest-path
/// distance is the metric and whose edge weights `mu` are the measure.
///
/// Vertex ids are the indices `0..vertex_count()`.
#[derive(Debug)]
pub struct MetricGraph {
    coords: Vec<Option<Vec<f64>>>,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, usize)>>,
    lookup: HashMap<(usize, usize), usize>,
    generator: Option<Generator>,
    all_pairs: OnceLock<Vec<Vec<f64>>>,
}

impl Clone for MetricGraph {
    fn clone(&self) -> Self {
        MetricGraph {
            coords: self.coords.clone(),
            edges: self.edges.clone(),
            adj: self.adj.clone(),
            lookup: self.lookup.clone(),
            generator: self.generator.clone(),
            all_pairs: OnceLock::new(),
        }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of a single- or multi-source Dijkstra run.
#[derive(Clone, Debug)]
pub struct ShortestPathTree {
    pub dist: Vec<f64>,
    /// Edge used to reach each vertex, `None` for sources and unreachable vertices.
    pub pred_edge: Vec<Option<usize>>,
}

impl ShortestPathTree {
    /// Vertex sequence from the source that reached `target` to `target`.
    pub fn path_to(&self, graph: &MetricGraph, target: usize) -> Option<Vec<usize>> {
        if !self.dist[target].is_finite() {
            return None;
        }
        let mut path = vec![target];
        let mut cur = target;
        while let Some(e) = self.pred_edge[cur] {
            cur = graph.edge(e).other(cur);
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }
}

impl MetricGraph {
    /// Builds a graph, checking positive lengths, nonnegative measure, no
    /// self-loops and no parallel edges.
    pub fn new(coords: Vec<Option<Vec<f64>>>, edges: Vec<Edge>) -> Result<Self> {
        let n = coords.len();
        let mut adj = vec![Vec::new(); n];
        let mut lookup = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return invalid(format!("edge {i} references a missing vertex"));
            }
            if e.u == e.v {
                return invalid(format!("edge {i} is a self-loop"));
            }
            if !(e.len > 0.0 && e.len.is_finite()) {
                return invalid(format!("edge {i} has non-positive length {}", e.len));
            }
            if !(e.mu >= 0.0 && e.mu.is_finite()) {
                return invalid(format!("edge {i} has invalid measure {}", e.mu));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if lookup.insert(key, i).is_some() {
                return invalid(format!("parallel edge between {} and {}", e.u, e.v));
            }
            adj[e.u].push((e.v, i));
            adj[e.v].push((e.u, i));
        }
        let graph = MetricGraph {
            coords,
            edges,
            adj,
            lookup,
            generator: None,
            all_pairs: OnceLock::new(),
        };
        if !(graph.total_measure() > 0.0) {
            return invalid("total measure must be positive");
        }
        Ok(graph)
    }

    /// Records which generator produced this graph.
    pub fn with_generator(mut self, generator: Generator) -> Self {
        self.generator = Some(generator);
        self
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.generator.as_ref()
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    pub fn coords(&self, v: usize) -> Option<&[f64]> {
        self.coords[v].as_deref()
    }

    pub fn all_coords(&self) -> &[Option<Vec<f64>>] {
        &self.coords
    }

    /// `(neighbour, edge index)` pairs.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.lookup.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn total_measure(&self) -> f64 {
        self.edges.iter().map(|e| e.mu).sum()
    }

    /// Measure of the edge set with both endpoints in `members`.
    pub fn measure_within(&self, members: &[bool]) -> f64 {
        self.edges
            .iter()
            .filter(|e| members[e.u] && members[e.v])
            .map(|e| e.mu)
            .sum()
    }

    /// Returns a copy with every edge measure multiplied by `c`.
    pub fn with_scaled_measure(&self, c: f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.u, e.v, e.len, e.mu * c))
            .collect();
        Ok(MetricGraph::new(self.coords.clone(), edges)?.with_optional_generator(self.generator.clone()))
    }

    fn with_optional_generator(mut self, generator: Option<Generator>) -> Self {
        self.generator = generator;
        self
    }

    /// Returns a copy with every edge length multiplied by `c`.
    pub fn with_scaled_lengths(&self, c: f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.u, e.v, e.len * c, e.mu))
            .collect();
        Ok(MetricGraph::new(self.coords.clone(), edges)?.with_optional_generator(self.generator.clone()))
    }

    /// Multi-source Dijkstra under arbitrary nonnegative edge weights.
    pub fn dijkstra_weighted<W>(&self, sources: &[usize], weight: W) -> ShortestPathTree
    where
        W: Fn(usize) -> f64,
    {
        let n = self.vertex_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred_edge = vec![None; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(HeapItem {
                dist: 0.0,
                vertex: s,
            });
        }
        while let Some(HeapItem { dist: d, vertex }) = heap.pop() {
            if d > dist[vertex] {
                continue;
            }
            for &(nb, e) in &self.adj[vertex] {
                let nd = d + weight(e);
                if nd < dist[nb] {
                    dist[nb] = nd;
                    pred_edge[nb] = Some(e);
                    heap.push(HeapItem {
                        dist: nd,
                        vertex: nb,
                    });
                }
            }
        }
        ShortestPathTree { dist, pred_edge }
    }

    /// Shortest-path distances from `source` under edge lengths.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        if let Some(table) = self.all_pairs.get() {
            return table[source].clone();
        }
        self.dijkstra_weighted(&[source], |e| self.edges[e].len).dist
    }

    /// Full distance table, computed once and cached.
    ///
    /// Memory is quadratic in the vertex count; prefer [`distances_from`]
    /// on large graphs.
    ///
    /// [`distances_from`]: MetricGraph::distances_from
    pub fn all_pairs(&self) -> &Vec<Vec<f64>> {
        self.all_pairs.get_or_init(|| {
            (0..self.vertex_count())
                .into_par_iter()
                .map(|s| self.dijkstra_weighted(&[s], |e| self.edges[e].len).dist)
                .collect()
        })
    }

    pub fn dist(&self, u: usize, v: usize) -> f64 {
        match self.all_pairs.get() {
            Some(table) => table[u][v],
            None => self.distances_from(u)[v],
        }
    }

    /// Distance and a realizing vertex path between `u` and `v`.
    pub fn shortest_path(&self, u: usize, v: usize) -> Result<(f64, Vec<usize>)> {
        let tree = self.dijkstra_weighted(&[u], |e| self.edges[e].len);
        match tree.path_to(self, v) {
            Some(path) => Ok((tree.dist[v], path)),
            None => Err(ModspaceError::Disconnected(u, v)),
        }
    }

    /// Open ball `{v : d(center, v) < r}`, sorted by id.
    pub fn ball(&self, center: usize, r: f64) -> Vec<usize> {
        let dist = self.distances_from(center);
        (0..self.vertex_count()).filter(|&v| dist[v] < r).collect()
    }

    /// Measure of the open ball, counting edges with both endpoints inside.
    pub fn ball_measure(&self, center: usize, r: f64) -> f64 {
        let dist = self.distances_from(center);
        let members: Vec<bool> = dist.iter().map(|&d| d < r).collect();
        self.measure_within(&members)
    }

    /// Largest ratio `mu(B(x,2r)) / mu(B(x,r))` over the sampled centers and
    /// radii; balls of zero measure are skipped.
    pub fn doubling_constant(&self, radii: &[f64], centers: &[usize]) -> Result<f64> {
        if radii.iter().any(|&r| !(r > 0.0)) {
            return invalid("radii must be positive");
        }
        let ratios: Vec<f64> = centers
            .par_iter()
            .flat_map_iter(|&c| {
                let dist = self.distances_from(c);
                radii.iter().filter_map(move |&r| {
                    let inner: Vec<bool> = dist.iter().map(|&d| d < r).collect();
                    let outer: Vec<bool> = dist.iter().map(|&d| d < 2.0 * r).collect();
                    let small = self.measure_within(&inner);
                    (small > 0.0).then(|| self.measure_within(&outer) / small)
                })
            })
            .collect();
        ratios
            .into_iter()
            .reduce(f64::max)
            .ok_or(ModspaceError::EmptyBall)
    }

    /// Largest finite eccentricity; infinite distances between components are ignored.
    pub fn diameter(&self) -> f64 {
        (0..self.vertex_count())
            .into_par_iter()
            .map(|s| {
                self.distances_from(s)
                    .into_iter()
                    .filter(|d| d.is_finite())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count() == 0 || self.distances_from(0).iter().all(|d| d.is_finite())
    }

    /// Vertex coordinates as a point cloud; vertices without coordinates are skipped.
    pub fn coordinate_points(&self) -> Vec<Vec<f64>> {
        self.coords.iter().flatten().cloned().collect()
    }
}
