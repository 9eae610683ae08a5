use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModspaceError, Result};
use crate::metric::{dist, MetricGraph};
use crate::spaces::HeisenbergPoint;

use super::curve::DiscreteCurve;

/// A distance function on points of type `P`.
pub trait Metric<P> {
    fn distance(&self, a: &P, b: &P) -> f64;
}

/// Euclidean distance on `R^n`.
#[derive(Copy, Clone, Debug, Default)]
pub struct Euclidean;

impl Metric<Vec<f64>> for Euclidean {
    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        dist(a, b)
    }
}

/// Koranyi distance on the Heisenberg group.
#[derive(Copy, Clone, Debug, Default)]
pub struct Koranyi;

impl Metric<HeisenbergPoint> for Koranyi {
    fn distance(&self, a: &HeisenbergPoint, b: &HeisenbergPoint) -> f64 {
        a.dist(b)
    }
}

/// Shortest-path distance on graph vertices, caching one Dijkstra run per
/// source vertex.
pub struct GraphMetric<'a> {
    graph: &'a MetricGraph,
    cache: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl<'a> GraphMetric<'a> {
    pub fn new(graph: &'a MetricGraph) -> Self {
        GraphMetric {
            graph,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn graph(&self) -> &'a MetricGraph {
        self.graph
    }

    pub fn distances_from(&self, v: usize) -> Arc<Vec<f64>> {
        if let Some(d) = self.cache.lock().expect("cache poisoned").get(&v) {
            return d.clone();
        }
        let d = Arc::new(self.graph.distances_from(v));
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(v, d.clone());
        d
    }
}

impl Metric<usize> for GraphMetric<'_> {
    fn distance(&self, a: &usize, b: &usize) -> f64 {
        if a == b {
            return 0.0;
        }
        self.distances_from(*a)[*b]
    }
}

/// A bi-Lipschitz map from a finite increasing domain into a metric space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fragment<P> {
    domain: Vec<f64>,
    points: Vec<P>,
    bilipschitz: f64,
}

/// Smallest `L >= 1` with `|s-t|/L <= d(p_s, p_t) <= L|s-t|` over all pairs,
/// or `None` when two distinct times map to the same point.
pub fn bilipschitz_constant<P, M: Metric<P>>(domain: &[f64], points: &[P], metric: &M) -> Option<f64> {
    let mut l: f64 = 1.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dt = domain[j] - domain[i];
            let d = metric.distance(&points[i], &points[j]);
            if !(d > 0.0) {
                return None;
            }
            l = l.max(d / dt).max(dt / d);
        }
    }
    Some(l)
}

impl<P> Fragment<P> {
    pub fn domain(&self) -> &[f64] {
        &self.domain
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bilipschitz_constant(&self) -> f64 {
        self.bilipschitz
    }

    /// Length of the parameter interval spanned by the domain.
    pub fn parameter_length(&self) -> f64 {
        self.domain[self.domain.len() - 1] - self.domain[0]
    }
}

impl<P: Clone> Fragment<P> {
    pub fn new<M: Metric<P>>(domain: Vec<f64>, points: Vec<P>, metric: &M) -> Result<Self> {
        if domain.len() != points.len() {
            return invalid("fragment domain and points differ in length");
        }
        if domain.len() < 2 {
            return Err(ModspaceError::ZeroLength);
        }
        if domain.iter().any(|t| !t.is_finite()) || domain.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("fragment domain must be finite and strictly increasing");
        }
        let bilipschitz = bilipschitz_constant(&domain, &points, metric)
            .ok_or_else(|| ModspaceError::InvalidInput("fragment is not injective".into()))?;
        Ok(Fragment {
            domain,
            points,
            bilipschitz,
        })
    }

    /// Recomputes every pairwise quotient and checks the stored constant.
    pub fn check_bilipschitz<M: Metric<P>>(&self, metric: &M, tol: f64) -> bool {
        match bilipschitz_constant(&self.domain, &self.points, metric) {
            Some(l) => l <= self.bilipschitz * (1.0 + tol),
            None => false,
        }
    }

    /// Average of the one-sided difference quotients at domain index `i`.
    pub fn metric_derivative<M: Metric<P>>(&self, i: usize, metric: &M) -> Result<f64> {
        metric_derivative(self, i, metric)
    }
}

pub fn metric_derivative<P, M: Metric<P>>(frag: &Fragment<P>, i: usize, metric: &M) -> Result<f64> {
    let n = frag.points.len();
    if i >= n {
        return invalid(format!("domain index {i} out of range"));
    }
    let mut quotients = Vec::with_capacity(2);
    if i > 0 {
        let dt = frag.domain[i] - frag.domain[i - 1];
        quotients.push(metric.distance(&frag.points[i - 1], &frag.points[i]) / dt);
    }
    if i + 1 < n {
        let dt = frag.domain[i + 1] - frag.domain[i];
        quotients.push(metric.distance(&frag.points[i], &frag.points[i + 1]) / dt);
    }
    if quotients.is_empty() {
        return Err(ModspaceError::IsolatedPoint(i));
    }
    Ok(quotients.iter().sum::<f64>() / quotients.len() as f64)
}

/// Default cap on the bi-Lipschitz constant of fragments cut from curves.
pub const DEFAULT_MAX_LIPSCHITZ: f64 = 2.0;

/// Greedy split of a sampled path into fragments.
///
/// A fragment is closed at pauses, and whenever the next sample would
/// revisit a point or push the bi-Lipschitz constant above `max_lip`. The
/// next fragment restarts at the last sample, so consecutive fragments
/// share an endpoint and every moving step is covered.
pub fn split_into_fragments<P: Clone, M: Metric<P>>(
    times: &[f64],
    points: &[P],
    metric: &M,
    max_lip: f64,
) -> Result<Vec<Fragment<P>>> {
    if times.len() != points.len() {
        return invalid("times and points differ in length");
    }
    if points.len() < 2 {
        return Err(ModspaceError::ZeroLength);
    }
    let mut fragments = Vec::new();
    let mut cur_t: Vec<f64> = vec![times[0]];
    let mut cur_p: Vec<P> = vec![points[0].clone()];
    let mut cur_l: f64 = 1.0;
    let close = |t: &mut Vec<f64>, p: &mut Vec<P>, l: f64, out: &mut Vec<Fragment<P>>| {
        if t.len() >= 2 {
            out.push(Fragment {
                domain: std::mem::take(t),
                points: std::mem::take(p),
                bilipschitz: l,
            });
        }
        t.clear();
        p.clear();
    };
    for k in 1..points.len() {
        let t = times[k];
        let q = &points[k];
        let last = cur_p.len() - 1;
        let step = metric.distance(&cur_p[last], q);
        if !(step > 0.0) || !(t > cur_t[last]) {
            // Pause: start afresh from the repeated point.
            close(&mut cur_t, &mut cur_p, cur_l, &mut fragments);
            cur_t.push(t);
            cur_p.push(q.clone());
            cur_l = 1.0;
            continue;
        }
        let mut l = cur_l;
        let mut ok = true;
        for (s, p) in cur_t.iter().zip(&cur_p) {
            let d = metric.distance(p, q);
            let dt = t - s;
            if !(d > 0.0) {
                ok = false;
                break;
            }
            l = l.max(d / dt).max(dt / d);
            if l > max_lip {
                ok = false;
                break;
            }
        }
        if ok {
            cur_t.push(t);
            cur_p.push(q.clone());
            cur_l = l;
        } else {
            let prev_t = cur_t[last];
            let prev_p = cur_p[last].clone();
            close(&mut cur_t, &mut cur_p, cur_l, &mut fragments);
            let d = step;
            let dt = t - prev_t;
            cur_t = vec![prev_t, t];
            cur_p = vec![prev_p, q.clone()];
            cur_l = (d / dt).max(dt / d).max(1.0);
        }
    }
    close(&mut cur_t, &mut cur_p, cur_l, &mut fragments);
    if fragments.is_empty() {
        return Err(ModspaceError::ZeroLength);
    }
    Ok(fragments)
}

/// Splits a graph curve, parametrized by arc length, into vertex fragments.
pub fn fragment_from_curve(
    graph: &MetricGraph,
    curve: &DiscreteCurve,
    max_lip: f64,
) -> Result<Vec<Fragment<usize>>> {
    fragment_from_walk(graph, curve.vertices(), max_lip)
}

/// As [`fragment_from_curve`], but the walk may pause on a vertex.
pub fn fragment_from_walk(graph: &MetricGraph, walk: &[usize], max_lip: f64) -> Result<Vec<Fragment<usize>>> {
    if walk.len() < 2 {
        return Err(ModspaceError::ZeroLength);
    }
    let mut times = Vec::with_capacity(walk.len());
    let mut t = 0.0;
    times.push(t);
    for w in walk.windows(2) {
        if w[0] != w[1] {
            let e = graph
                .edge_between(w[0], w[1])
                .ok_or_else(|| ModspaceError::InvalidInput(format!("vertices {} and {} are not adjacent", w[0], w[1])))?;
            t += graph.edge(e).len;
        }
        times.push(t);
    }
    if t == 0.0 {
        return Err(ModspaceError::ZeroLength);
    }
    let metric = GraphMetric::new(graph);
    split_into_fragments(&times, walk, &metric, max_lip)
}

/// Splits a sampled Euclidean curve, parametrized by polygonal arc length.
pub fn fragment_from_samples(samples: &[Vec<f64>], max_lip: f64) -> Result<Vec<Fragment<Vec<f64>>>> {
    if samples.len() < 2 {
        return Err(ModspaceError::ZeroLength);
    }
    let mut times = vec![0.0];
    for w in samples.windows(2) {
        let t = times[times.len() - 1] + dist(&w[0], &w[1]);
        times.push(t);
    }
    if times[times.len() - 1] == 0.0 {
        return Err(ModspaceError::ZeroLength);
    }
    split_into_fragments(&times, samples, &Euclidean, max_lip)
}

/// The two horizontal line families through `p = (a, b)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeisenbergLineKind {
    /// `alpha_p(t) = (t, a, b - a t / 2)`
    Alpha,
    /// `beta_p(t) = (a, t, b + a t / 2)`
    Beta,
}

pub fn heisenberg_line(kind: HeisenbergLineKind, a: f64, b: f64, t: f64) -> HeisenbergPoint {
    match kind {
        HeisenbergLineKind::Alpha => HeisenbergPoint::new(t, a, b - 0.5 * a * t),
        HeisenbergLineKind::Beta => HeisenbergPoint::new(a, t, b + 0.5 * a * t),
    }
}

/// One fragment per parameter `(a, b)`, sampling the line at `t_grid`.
pub fn heisenberg_curve_family(
    kind: HeisenbergLineKind,
    params: &[(f64, f64)],
    t_grid: &[f64],
) -> Result<Vec<Fragment<HeisenbergPoint>>> {
    if params.is_empty() || t_grid.is_empty() {
        return invalid("parameter and time grids must be nonempty");
    }
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    params
        .iter()
        .map(|&(a, b)| {
            let points = ts.iter().map(|&t| heisenberg_line(kind, a, b, t)).collect();
            Fragment::new(ts.clone(), points, &Koranyi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::grid_square;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn derivative_of_scaled_parametrization() {
        let n = 6;
        let g = grid_square(n).unwrap();
        let metric = GraphMetric::new(&g);
        let ids: Vec<usize> = (0..=n).collect();
        let unit: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let f = Fragment::new(unit, ids.clone(), &metric).unwrap();
        for i in 0..=n {
            assert!((f.metric_derivative(i, &metric).unwrap() - 1.0).abs() < 1e-12);
        }
        let half: Vec<f64> = (0..=n).map(|i| i as f64 / (2 * n) as f64).collect();
        let f = Fragment::new(half, ids, &metric).unwrap();
        assert!((f.metric_derivative(3, &metric).unwrap() - 2.0).abs() < 1e-12);
        assert!((f.bilipschitz_constant() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_fragments_are_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(Fragment::new(vec![0.0, 1.0], pts, &Euclidean).is_err());
        assert!(Fragment::new(vec![0.0], vec![vec![1.0]], &Euclidean).is_err());
    }

    #[test]
    fn splitting_walks() {
        let n = 4;
        let g = grid_square(n).unwrap();
        let row: Vec<usize> = (0..=n).collect();
        let frags = fragment_from_walk(&g, &row, DEFAULT_MAX_LIPSCHITZ).unwrap();
        assert_eq!(frags.len(), 1);
        assert_eq!(frags[0].points(), row.as_slice());
        assert_eq!(frags[0].bilipschitz_constant(), 1.0);

        let paused = vec![0, 1, 2, 2, 3, 4];
        assert_eq!(fragment_from_walk(&g, &paused, 2.0).unwrap().len(), 2);

        let back = vec![0, 1, 0];
        let frags = fragment_from_walk(&g, &back, 2.0).unwrap();
        assert_eq!(frags.len(), 2);
        assert_eq!(frags[0].points(), &[0, 1]);
        assert_eq!(frags[1].points(), &[1, 0]);

        assert!(matches!(
            fragment_from_walk(&g, &[3, 3, 3], 2.0),
            Err(ModspaceError::ZeroLength)
        ));
    }

    #[test]
    fn u_turn_is_split_by_lipschitz_cap() {
        // Right, up, left: the endpoints end up at distance 1/n after 3/n of
        // arc length.
        let n = 4;
        let g = grid_square(n).unwrap();
        let walk = vec![0, 1, 1 + (n + 1), n + 1];
        let metric = GraphMetric::new(&g);
        for f in fragment_from_walk(&g, &walk, 2.0).unwrap() {
            assert!(f.bilipschitz_constant() <= 2.0);
            assert!(f.check_bilipschitz(&metric, 1e-12));
        }
    }

    #[test]
    fn heisenberg_lines_are_geodesics() {
        let ts: Vec<f64> = (0..=8).map(|i| -0.5 + i as f64 / 8.0).collect();
        for kind in [HeisenbergLineKind::Alpha, HeisenbergLineKind::Beta] {
            let f = heisenberg_curve_family(kind, &[(0.0, 0.0)], &ts).unwrap();
            assert!((f[0].bilipschitz_constant() - 1.0).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (a, b, s, t) = (
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            for kind in [HeisenbergLineKind::Alpha, HeisenbergLineKind::Beta] {
                let d = heisenberg_line(kind, a, b, s).dist(&heisenberg_line(kind, a, b, t));
                assert!((d - (s - t).abs()).abs() < 1e-12);
            }
        }
    }
}
