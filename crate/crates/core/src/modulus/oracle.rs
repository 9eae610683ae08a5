use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{monotone_direction, monotone_steps, CurveFamily, DiscreteCurve, MonotoneDirection};
use crate::error::{invalid, ModspaceError, Result};
use crate::metric::MetricGraph;

/// A curve family given either explicitly or implicitly, by a rule that
/// admits a shortest-path oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Explicit(CurveFamily),
    /// Every path from a source vertex to a sink vertex.
    Connecting { source: Vec<usize>, sink: Vec<usize> },
    /// Every coordinate-monotone path from a source vertex to a sink vertex.
    Monotone {
        source: Vec<usize>,
        sink: Vec<usize>,
        direction: MonotoneDirection,
    },
}

impl From<CurveFamily> for FamilySpec {
    fn from(f: CurveFamily) -> Self {
        FamilySpec::Explicit(f)
    }
}

/// A curve returned by the oracle, with its position in an explicit family.
#[derive(Clone, Debug)]
pub(crate) struct Found {
    pub curve: DiscreteCurve,
    pub index: Option<usize>,
    pub integral: f64,
}

impl FamilySpec {
    pub fn connecting(source: Vec<usize>, sink: Vec<usize>) -> Self {
        FamilySpec::Connecting { source, sink }
    }

    /// Monotone family with the direction inferred from the vertex sets.
    pub fn monotone(graph: &MetricGraph, source: Vec<usize>, sink: Vec<usize>) -> Result<Self> {
        let direction = monotone_direction(graph, &source, &sink)?;
        Ok(FamilySpec::Monotone {
            source,
            sink,
            direction,
        })
    }

    pub fn tag(&self) -> String {
        match self {
            FamilySpec::Explicit(f) => f.tag.clone(),
            FamilySpec::Connecting { source, sink } => {
                format!("connecting:{}->{}", source.len(), sink.len())
            }
            FamilySpec::Monotone { source, sink, direction } => format!(
                "monotone:{}{}:{}->{}",
                if direction.increasing { '+' } else { '-' },
                direction.axis,
                source.len(),
                sink.len()
            ),
        }
    }

    pub fn validate(&self, graph: &MetricGraph) -> Result<()> {
        match self {
            FamilySpec::Explicit(f) => {
                if f.is_empty() {
                    return Err(ModspaceError::EmptyFamily);
                }
                for c in &f.curves {
                    if c.vertices().iter().any(|&v| v >= graph.vertex_count()) {
                        return invalid("family curve leaves the graph");
                    }
                    for w in c.vertices().windows(2) {
                        if graph.edge_between(w[0], w[1]).is_none() {
                            return invalid("family curve does not match the graph");
                        }
                    }
                }
                Ok(())
            }
            FamilySpec::Connecting { source, sink } | FamilySpec::Monotone { source, sink, .. } => {
                if source.is_empty() || sink.is_empty() {
                    return Err(ModspaceError::EmptyFamily);
                }
                if source.iter().chain(sink).any(|&v| v >= graph.vertex_count()) {
                    return invalid("source or sink names a missing vertex");
                }
                let s: HashSet<usize> = source.iter().copied().collect();
                if sink.iter().any(|v| s.contains(v)) {
                    return invalid("source and sink must be disjoint");
                }
                Ok(())
            }
        }
    }

    /// Up to `batch` curves with `rho`-length below `threshold`, shortest
    /// first. An empty answer certifies that every curve of the family has
    /// length at least `threshold`.
    pub(crate) fn violated(&self, graph: &MetricGraph, rho: &[f64], threshold: f64, batch: usize) -> Vec<Found> {
        let mut found = match self {
            FamilySpec::Explicit(f) => f
                .curves
                .par_iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    let v = integral(graph, rho, c);
                    (v < threshold).then(|| Found {
                        curve: c.clone(),
                        index: Some(i),
                        integral: v,
                    })
                })
                .collect(),
            _ => {
                let mut out: Vec<Found> = self.sink_paths(graph, rho).into_iter().filter(|f| f.integral < threshold).collect();
                if !out.is_empty() {
                    out.extend(self.through_edges(graph, rho, threshold, batch));
                    let mut seen = HashSet::new();
                    out.retain(|f| seen.insert(f.curve.vertices().to_vec()));
                }
                out
            }
        };
        found.sort_by(|a, b| a.integral.total_cmp(&b.integral));
        found.truncate(batch);
        found
    }

    /// The curve of least `rho`-length; `NoPath` when the family is empty.
    pub(crate) fn shortest(&self, graph: &MetricGraph, rho: &[f64]) -> Result<Found> {
        let all = match self {
            FamilySpec::Explicit(f) => f
                .curves
                .par_iter()
                .enumerate()
                .map(|(i, c)| Found {
                    curve: c.clone(),
                    index: Some(i),
                    integral: integral(graph, rho, c),
                })
                .min_by(|a, b| a.integral.total_cmp(&b.integral).then(a.index.cmp(&b.index))),
            _ => self
                .sink_paths(graph, rho)
                .into_iter()
                .min_by(|a, b| a.integral.total_cmp(&b.integral)),
        };
        all.ok_or(ModspaceError::NoPath)
    }

    fn ends(&self) -> (&[usize], &[usize], Option<MonotoneDirection>) {
        match self {
            FamilySpec::Connecting { source, sink } => (source, sink, None),
            FamilySpec::Monotone { source, sink, direction } => (source, sink, Some(*direction)),
            FamilySpec::Explicit(_) => unreachable!("explicit families are scanned"),
        }
    }

    /// Distances from the source set with a predecessor tree. Monotone
    /// paths are not continued past a sink.
    fn forward(&self, graph: &MetricGraph, rho: &[f64], is_sink: &[bool]) -> (Vec<f64>, Vec<Option<usize>>) {
        let (source, _, dir) = self.ends();
        let weight = |e: usize| rho[e] * graph.edge(e).len;
        match dir {
            None => {
                let t = graph.dijkstra_weighted(source, weight);
                (t.dist, t.pred_edge)
            }
            Some(d) => monotone_dag(graph, source, is_sink, d, weight),
        }
    }

    /// Distances to the sink set with the first edge of a shortest
    /// continuation.
    fn backward(&self, graph: &MetricGraph, rho: &[f64], is_sink: &[bool]) -> (Vec<f64>, Vec<Option<usize>>) {
        let (_, sink, dir) = self.ends();
        let weight = |e: usize| rho[e] * graph.edge(e).len;
        match dir {
            None => {
                let t = graph.dijkstra_weighted(sink, weight);
                (t.dist, t.pred_edge)
            }
            Some(d) => monotone_dag_to_sinks(graph, is_sink, d, weight),
        }
    }

    fn sink_mask(&self, graph: &MetricGraph) -> Vec<bool> {
        let mut is_sink = vec![false; graph.vertex_count()];
        for &t in self.ends().1 {
            is_sink[t] = true;
        }
        is_sink
    }

    /// One least-length path to every reachable sink vertex.
    fn sink_paths(&self, graph: &MetricGraph, rho: &[f64]) -> Vec<Found> {
        let is_sink = self.sink_mask(graph);
        let (dist, pred) = self.forward(graph, rho, &is_sink);
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for &t in self.ends().1 {
            if !dist[t].is_finite() {
                continue;
            }
            let path = walk_tree(graph, &pred, t, true);
            if let Some(f) = found_from_path(graph, rho, path, &is_sink) {
                if seen.insert(f.curve.vertices().to_vec()) {
                    out.push(f);
                }
            }
        }
        out
    }

    /// For every oriented edge `u -> v` with `rho` still zero, the shortest
    /// family curve through it; returns the distinct ones shorter than
    /// `threshold`, shortest first, at most `batch` of them.
    fn through_edges(&self, graph: &MetricGraph, rho: &[f64], threshold: f64, batch: usize) -> Vec<Found> {
        let (_, _, dir) = self.ends();
        let is_sink = self.sink_mask(graph);
        let ((ds, pred), (dt, next)) = rayon::join(
            || self.forward(graph, rho, &is_sink),
            || self.backward(graph, rho, &is_sink),
        );
        let mut through: Vec<(f64, usize, usize, usize)> = Vec::new();
        let mut consider = |u: usize, v: usize, e: usize| {
            if is_sink[u] || rho[e] != 0.0 {
                return;
            }
            let total = ds[u] + rho[e] * graph.edge(e).len + dt[v];
            if total < threshold {
                through.push((total, u, v, e));
            }
        };
        match dir {
            None => {
                for (e, edge) in graph.edges().iter().enumerate() {
                    consider(edge.u, edge.v, e);
                    consider(edge.v, edge.u, e);
                }
            }
            Some(d) => {
                for u in 0..graph.vertex_count() {
                    for (v, e) in monotone_steps(graph, d, u) {
                        consider(u, v, e);
                    }
                }
            }
        }
        through.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.3, a.1).cmp(&(b.3, b.1))));
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for &(_, u, v, _) in &through {
            if out.len() >= batch {
                break;
            }
            let mut path = walk_tree(graph, &pred, u, true);
            path.extend(walk_tree(graph, &next, v, false));
            let mut distinct = HashSet::new();
            if !path.iter().all(|&w| distinct.insert(w)) {
                continue;
            }
            if let Some(f) = found_from_path(graph, rho, path, &is_sink) {
                if f.integral < threshold && seen.insert(f.curve.vertices().to_vec()) {
                    out.push(f);
                }
            }
        }
        out
    }
}

/// Follows tree edges from `v` to a root; reversed so the root comes
/// first when `root_first` is set.
fn walk_tree(graph: &MetricGraph, tree: &[Option<usize>], v: usize, root_first: bool) -> Vec<usize> {
    let mut path = vec![v];
    let mut w = v;
    while let Some(e) = tree[w] {
        w = graph.edge(e).other(w);
        path.push(w);
    }
    if root_first {
        path.reverse();
    }
    path
}

/// Truncates `path` at its first sink.
fn found_from_path(graph: &MetricGraph, rho: &[f64], mut path: Vec<usize>, is_sink: &[bool]) -> Option<Found> {
    if let Some(first) = path.iter().position(|&v| is_sink[v]) {
        path.truncate(first + 1);
    }
    let curve = DiscreteCurve::new(graph, path).ok()?;
    let integral = integral(graph, rho, &curve);
    Some(Found {
        curve,
        index: None,
        integral,
    })
}

/// Shortest monotone paths by dynamic programming along the axis order.
fn monotone_dag<W: Fn(usize) -> f64>(
    graph: &MetricGraph,
    source: &[usize],
    is_sink: &[bool],
    dir: MonotoneDirection,
    weight: W,
) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = graph.vertex_count();
    let key = |v: usize| -> f64 {
        let x = graph.coords(v).map(|c| c[dir.axis]).unwrap_or(f64::NAN);
        if dir.increasing {
            x
        } else {
            -x
        }
    };
    let mut order: Vec<usize> = (0..n).filter(|&v| graph.coords(v).is_some()).collect();
    order.sort_by(|a, b| key(*a).total_cmp(&key(*b)).then(a.cmp(b)));
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    for &s in source {
        dist[s] = 0.0;
    }
    for u in order {
        if !dist[u].is_finite() || is_sink[u] {
            continue;
        }
        for (v, e) in monotone_steps(graph, dir, u) {
            let nd = dist[u] + weight(e);
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(e);
            }
        }
    }
    (dist, pred)
}

/// Distances to the sink set along monotone steps, with the first edge
/// of a shortest continuation.
fn monotone_dag_to_sinks<W: Fn(usize) -> f64>(
    graph: &MetricGraph,
    is_sink: &[bool],
    dir: MonotoneDirection,
    weight: W,
) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = graph.vertex_count();
    let key = |v: usize| -> f64 {
        let x = graph.coords(v).map(|c| c[dir.axis]).unwrap_or(f64::NAN);
        if dir.increasing {
            -x
        } else {
            x
        }
    };
    let mut order: Vec<usize> = (0..n).filter(|&v| graph.coords(v).is_some()).collect();
    order.sort_by(|a, b| key(*a).total_cmp(&key(*b)).then(a.cmp(b)));
    let mut dist = vec![f64::INFINITY; n];
    let mut next = vec![None; n];
    for u in order {
        if is_sink[u] {
            dist[u] = 0.0;
            continue;
        }
        for (v, e) in monotone_steps(graph, dir, u) {
            let nd = weight(e) + dist[v];
            if nd < dist[u] {
                dist[u] = nd;
                next[u] = Some(e);
            }
        }
    }
    (dist, next)
}

pub(crate) fn integral(graph: &MetricGraph, rho: &[f64], c: &DiscreteCurve) -> f64 {
    c.edges().iter().map(|&e| rho[e] * graph.edge(e).len).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{boundary_sides, crossing_family, CrossingStrategy};
    use crate::spaces::grid_square;

    #[test]
    fn implicit_oracles_agree_with_enumeration() {
        let g = grid_square(3).unwrap();
        let (left, right) = boundary_sides(&g, 0).unwrap();
        let rho: Vec<f64> = (0..g.edge_count()).map(|e| 0.5 + ((e * 7) % 5) as f64 * 0.3).collect();

        let explicit = FamilySpec::Explicit(
            crossing_family(&g, &left, &right, 1_000_000, CrossingStrategy::AllSimple).unwrap(),
        );
        let implicit = FamilySpec::connecting(left.clone(), right.clone());
        let a = explicit.shortest(&g, &rho).unwrap().integral;
        let b = implicit.shortest(&g, &rho).unwrap().integral;
        assert!((a - b).abs() < 1e-12);

        let explicit = FamilySpec::Explicit(
            crossing_family(&g, &left, &right, 1_000_000, CrossingStrategy::Monotone).unwrap(),
        );
        let implicit = FamilySpec::monotone(&g, left, right).unwrap();
        let a = explicit.shortest(&g, &rho).unwrap().integral;
        let b = implicit.shortest(&g, &rho).unwrap().integral;
        assert!((a - b).abs() < 1e-12);
    }
}
