use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModspaceError, Result};
use crate::metric::MetricGraph;

use super::curve::DiscreteCurve;

/// A finite family of curves in one graph, tagged with how it was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFamily {
    pub curves: Vec<DiscreteCurve>,
    pub tag: String,
}

impl CurveFamily {
    pub fn new(curves: Vec<DiscreteCurve>, tag: impl Into<String>) -> Self {
        CurveFamily {
            curves,
            tag: tag.into(),
        }
    }

    /// Builds curves from vertex lists, validating each against `graph`.
    pub fn from_vertex_lists(graph: &MetricGraph, lists: Vec<Vec<usize>>, tag: impl Into<String>) -> Result<Self> {
        let curves = lists
            .into_iter()
            .map(|l| DiscreteCurve::new(graph, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(CurveFamily::new(curves, tag))
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingStrategy {
    AllSimple,
    ShortestK,
    Monotone,
}

impl std::str::FromStr for CrossingStrategy {
    type Err = ModspaceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_simple" | "all-simple" => Ok(CrossingStrategy::AllSimple),
            "shortest_k" | "shortest-k" => Ok(CrossingStrategy::ShortestK),
            "monotone" => Ok(CrossingStrategy::Monotone),
            other => invalid(format!("unknown strategy {other}")),
        }
    }
}

/// Axis and direction of travel for monotone paths.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneDirection {
    pub axis: usize,
    pub increasing: bool,
}

const COORD_TOL: f64 = 1e-12;

/// Picks the coordinate along which the sink centroid is farthest from the
/// source centroid.
pub fn monotone_direction(graph: &MetricGraph, source: &[usize], sink: &[usize]) -> Result<MonotoneDirection> {
    let centroid = |set: &[usize]| -> Result<Vec<f64>> {
        let mut acc: Vec<f64> = Vec::new();
        for &v in set {
            let c = graph
                .coords(v)
                .ok_or_else(|| ModspaceError::InvalidInput(format!("vertex {v} has no coordinates")))?;
            if acc.is_empty() {
                acc = vec![0.0; c.len()];
            }
            for (a, x) in acc.iter_mut().zip(c) {
                *a += x;
            }
        }
        Ok(acc.into_iter().map(|a| a / set.len() as f64).collect())
    };
    let a = centroid(source)?;
    let b = centroid(sink)?;
    let (axis, diff) = a
        .iter()
        .zip(&b)
        .map(|(x, y)| y - x)
        .enumerate()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .ok_or_else(|| ModspaceError::InvalidInput("vertices have empty coordinates".into()))?;
    if diff == 0.0 {
        return invalid("source and sink centroids coincide");
    }
    Ok(MonotoneDirection {
        axis,
        increasing: diff > 0.0,
    })
}

/// Neighbors of `u` reachable by a step that strictly advances along the
/// axis and keeps every other coordinate fixed.
pub fn monotone_steps(graph: &MetricGraph, dir: MonotoneDirection, u: usize) -> Vec<(usize, usize)> {
    let Some(cu) = graph.coords(u) else {
        return Vec::new();
    };
    graph
        .neighbors(u)
        .iter()
        .copied()
        .filter(|&(v, _)| {
            let Some(cv) = graph.coords(v) else {
                return false;
            };
            cu.iter().zip(cv).enumerate().all(|(i, (a, b))| {
                if i == dir.axis {
                    if dir.increasing {
                        b - a > COORD_TOL
                    } else {
                        a - b > COORD_TOL
                    }
                } else {
                    (a - b).abs() <= COORD_TOL
                }
            })
        })
        .collect()
}

fn validate_sets(graph: &MetricGraph, source: &[usize], sink: &[usize]) -> Result<()> {
    if source.is_empty() || sink.is_empty() {
        return invalid("source and sink must be nonempty");
    }
    let n = graph.vertex_count();
    if source.iter().chain(sink).any(|&v| v >= n) {
        return invalid("source or sink names a missing vertex");
    }
    let s: HashSet<usize> = source.iter().copied().collect();
    if sink.iter().any(|v| s.contains(v)) {
        return invalid("source and sink must be disjoint");
    }
    Ok(())
}

/// Curves from `source` to `sink` built by the chosen strategy, capped at
/// `max_curves`.
pub fn crossing_family(
    graph: &MetricGraph,
    source: &[usize],
    sink: &[usize],
    max_curves: usize,
    strategy: CrossingStrategy,
) -> Result<CurveFamily> {
    validate_sets(graph, source, sink)?;
    let mut sources: Vec<usize> = source.to_vec();
    sources.sort_unstable();
    sources.dedup();
    let sink_set: HashSet<usize> = sink.iter().copied().collect();
    let lists = match strategy {
        CrossingStrategy::AllSimple => all_simple_paths(graph, &sources, &sink_set, max_curves),
        CrossingStrategy::ShortestK => yen_k_shortest(graph, &sources, &sink_set, max_curves),
        CrossingStrategy::Monotone => {
            let dir = monotone_direction(graph, &sources, sink)?;
            monotone_paths(graph, &sources, &sink_set, dir, max_curves)
        }
    };
    if lists.is_empty() {
        return Err(ModspaceError::NoPath);
    }
    let tag = format!(
        "crossing:{}:{}:{}",
        serde_json::to_value(strategy)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        graph
            .generator()
            .and_then(|g| serde_json::to_string(g).ok())
            .unwrap_or_else(|| "custom".into()),
        max_curves
    );
    CurveFamily::from_vertex_lists(graph, lists, tag)
}

fn all_simple_paths(graph: &MetricGraph, sources: &[usize], sink: &HashSet<usize>, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut on_path = vec![false; graph.vertex_count()];
    for &s in sources {
        if out.len() >= max {
            break;
        }
        // Iterative DFS: (vertex, next neighbor index).
        let mut stack: Vec<(usize, usize)> = vec![(s, 0)];
        on_path[s] = true;
        while let Some(&mut (u, ref mut idx)) = stack.last_mut() {
            if out.len() >= max {
                break;
            }
            let nbrs = graph.neighbors(u);
            if *idx >= nbrs.len() {
                on_path[u] = false;
                stack.pop();
                continue;
            }
            let (v, _) = nbrs[*idx];
            *idx += 1;
            if on_path[v] {
                continue;
            }
            if sink.contains(&v) {
                let mut path: Vec<usize> = stack.iter().map(|(w, _)| *w).collect();
                path.push(v);
                out.push(path);
                continue;
            }
            on_path[v] = true;
            stack.push((v, 0));
        }
        for (w, _) in stack.drain(..) {
            on_path[w] = false;
        }
    }
    out
}

fn monotone_paths(
    graph: &MetricGraph,
    sources: &[usize],
    sink: &HashSet<usize>,
    dir: MonotoneDirection,
    max: usize,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for &s in sources {
        if out.len() >= max {
            break;
        }
        let mut stack: Vec<(usize, Vec<(usize, usize)>)> = vec![(s, monotone_steps(graph, dir, s))];
        while let Some((_, steps)) = stack.last_mut() {
            if out.len() >= max {
                break;
            }
            let Some((v, _)) = steps.pop() else {
                stack.pop();
                continue;
            };
            if sink.contains(&v) {
                let mut path: Vec<usize> = stack.iter().map(|(w, _)| *w).collect();
                path.push(v);
                out.push(path);
                continue;
            }
            let mut next = monotone_steps(graph, dir, v);
            next.reverse();
            stack.push((v, next));
        }
    }
    out
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra to the nearest sink avoiding banned vertices and
/// edges; returns the path and its length.
fn restricted_shortest(
    graph: &MetricGraph,
    sources: &[(usize, f64)],
    sink: &HashSet<usize>,
    banned_v: &[bool],
    banned_e: &HashSet<usize>,
) -> Option<(Vec<usize>, f64)> {
    let n = graph.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    for &(s, d0) in sources {
        if !banned_v[s] && d0 < dist[s] {
            dist[s] = d0;
            heap.push(HeapItem(d0, s));
        }
    }
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if sink.contains(&u) {
            let mut path = vec![u];
            let mut w = u;
            while pred[w] != usize::MAX {
                w = pred[w];
                path.push(w);
            }
            path.reverse();
            return Some((path, d));
        }
        for &(v, e) in graph.neighbors(u) {
            if banned_v[v] || banned_e.contains(&e) {
                continue;
            }
            let nd = d + graph.edge(e).len;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = u;
                heap.push(HeapItem(nd, v));
            }
        }
    }
    None
}

fn path_length(graph: &MetricGraph, path: &[usize]) -> f64 {
    path.windows(2)
        .map(|w| graph.edge(graph.edge_between(w[0], w[1]).expect("adjacent")).len)
        .sum()
}

/// Yen's loopless k-shortest paths from any source to any sink.
fn yen_k_shortest(graph: &MetricGraph, sources: &[usize], sink: &HashSet<usize>, k: usize) -> Vec<Vec<usize>> {
    let n = graph.vertex_count();
    let all_sources: Vec<(usize, f64)> = sources.iter().map(|&s| (s, 0.0)).collect();
    let no_edges = HashSet::new();
    let Some((first, _)) = restricted_shortest(graph, &all_sources, sink, &vec![false; n], &no_edges) else {
        return Vec::new();
    };
    let mut accepted: Vec<Vec<usize>> = vec![first];
    // Candidates ordered by (length, path) for determinism.
    let mut candidates: BTreeSet<(OrdF64, Vec<usize>)> = BTreeSet::new();
    let mut seen: HashSet<Vec<usize>> = accepted.iter().cloned().collect();
    while accepted.len() < k {
        let prev = accepted.last().expect("nonempty").clone();
        // Spur from the virtual super-source: start at an unused source.
        {
            let used: HashSet<usize> = accepted.iter().map(|p| p[0]).collect();
            let others: Vec<(usize, f64)> = all_sources.iter().copied().filter(|(s, _)| !used.contains(s)).collect();
            if !others.is_empty() {
                if let Some((p, d)) = restricted_shortest(graph, &others, sink, &vec![false; n], &no_edges) {
                    if seen.insert(p.clone()) {
                        candidates.insert((OrdF64(d), p));
                    }
                }
            }
        }
        for i in 0..prev.len() - 1 {
            let spur = prev[i];
            let root = &prev[..=i];
            let mut banned_e = HashSet::new();
            for p in &accepted {
                if p.len() > i + 1 && &p[..=i] == root {
                    if let Some(e) = graph.edge_between(p[i], p[i + 1]) {
                        banned_e.insert(e);
                    }
                }
            }
            let mut banned_v = vec![false; n];
            for &v in &root[..i] {
                banned_v[v] = true;
            }
            // Paths end at the first sink they reach, and sources other than
            // the root's start would give a shorter path from that source.
            for &s in sources {
                if s != spur && s != root[0] {
                    banned_v[s] = true;
                }
            }
            if let Some((spur_path, _)) = restricted_shortest(graph, &[(spur, 0.0)], sink, &banned_v, &banned_e) {
                let mut total = root[..i].to_vec();
                total.extend(spur_path);
                if seen.insert(total.clone()) {
                    let len = path_length(graph, &total);
                    candidates.insert((OrdF64(len), total));
                }
            }
        }
        let Some(best) = candidates.iter().next().cloned() else {
            break;
        };
        candidates.remove(&best);
        accepted.push(best.1);
    }
    accepted
}

#[derive(Copy, Clone, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Left and right columns of a grid-like graph with coordinates: vertices
/// whose `axis` coordinate is minimal or maximal.
pub fn boundary_sides(graph: &MetricGraph, axis: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in 0..graph.vertex_count() {
        let c = graph
            .coords(v)
            .ok_or_else(|| ModspaceError::InvalidInput(format!("vertex {v} has no coordinates")))?;
        let x = *c
            .get(axis)
            .ok_or(ModspaceError::DimensionMismatch {
                expected: axis + 1,
                found: c.len(),
            })?;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let side = |target: f64| -> Vec<usize> {
        (0..graph.vertex_count())
            .filter(|&v| (graph.coords(v).expect("checked")[axis] - target).abs() <= COORD_TOL)
            .collect()
    };
    Ok((side(lo), side(hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Edge;
    use crate::spaces::{grid_square, slit_carpet_level};

    #[test]
    fn monotone_grid_rows() {
        for n in [1, 3, 6] {
            let g = grid_square(n).unwrap();
            let (left, right) = boundary_sides(&g, 0).unwrap();
            let fam = crossing_family(&g, &left, &right, 10_000, CrossingStrategy::Monotone).unwrap();
            assert_eq!(fam.len(), n + 1);
            for c in &fam.curves {
                assert_eq!(c.vertices().len(), n + 1);
                assert!((c.length() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_edge_graph() {
        let g = MetricGraph::new(vec![None, None], vec![Edge::new(0, 1, 1.0, 1.0)]).unwrap();
        for strategy in [CrossingStrategy::AllSimple, CrossingStrategy::ShortestK] {
            let fam = crossing_family(&g, &[0], &[1], 10, strategy).unwrap();
            assert_eq!(fam.len(), 1);
            assert_eq!(fam.curves[0].vertices(), &[0, 1]);
        }
    }

    #[test]
    fn no_path_and_bad_sets() {
        let g = MetricGraph::new(
            vec![None, None, None, None],
            vec![Edge::new(0, 1, 1.0, 1.0), Edge::new(2, 3, 1.0, 1.0)],
        )
        .unwrap();
        assert!(matches!(
            crossing_family(&g, &[0], &[3], 10, CrossingStrategy::AllSimple),
            Err(ModspaceError::NoPath)
        ));
        assert!(crossing_family(&g, &[0], &[0], 10, CrossingStrategy::AllSimple).is_err());
        assert!(crossing_family(&g, &[], &[0], 10, CrossingStrategy::AllSimple).is_err());
    }

    #[test]
    fn shortest_k_is_sorted_and_distinct() {
        let g = grid_square(3).unwrap();
        let fam = crossing_family(&g, &[0], &[15], 20, CrossingStrategy::ShortestK).unwrap();
        assert_eq!(fam.len(), 20);
        let lens: Vec<f64> = fam.curves.iter().map(|c| c.length()).collect();
        assert!(lens.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        // 20 monotone staircases of length 2 exist in a 3x3 grid.
        assert!(lens.iter().all(|l| (l - 2.0).abs() < 1e-12));
        let distinct: HashSet<&[usize]> = fam.curves.iter().map(|c| c.vertices()).collect();
        assert_eq!(distinct.len(), 20);
    }

    #[test]
    fn all_simple_matches_count_on_small_grid() {
        // 12 simple corner-to-corner paths in the 3x3 vertex grid.
        let g = grid_square(2).unwrap();
        let fam = crossing_family(&g, &[0], &[8], 1000, CrossingStrategy::AllSimple).unwrap();
        assert_eq!(fam.len(), 12);
    }

    #[test]
    fn slit_carpet_vertical_monotone() {
        let (g, _) = slit_carpet_level(1, 1).unwrap();
        let (bottom, top) = boundary_sides(&g, 1).unwrap();
        let fam = crossing_family(&g, &bottom, &top, 100_000, CrossingStrategy::Monotone).unwrap();
        // Every bottom vertex starts at least one vertical line.
        let starts: HashSet<usize> = fam.curves.iter().map(|c| c.first()).collect();
        assert_eq!(starts.len(), bottom.len());
        for c in &fam.curves {
            assert!((c.length() - 1.0).abs() < 1e-12);
        }
    }
}
