use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModspaceError, Result};
use crate::metric::{Edge, MetricGraph};

/// Provenance of a generated graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum Generator {
    Grid { n: usize },
    Carpet { p: usize, k: u32 },
    Slit { k: u32, m: usize, slits: Vec<Slit> },
}

/// A vertical slit `{x} x [y_lo, y_hi]` cut in a dyadic square of the given generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slit {
    pub generation: u32,
    pub x: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

/// The slits cut into a slit-carpet level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitSpec {
    pub level: u32,
    pub slits: Vec<Slit>,
}

/// Uniform grid on `[0,1]^2` with `(n+1)^2` vertices, edges of length `1/n`
/// and measure `1/(2 n^2)` per edge.
///
/// Vertex `(i, j)` has id `j * (n + 1) + i` and coordinates `(i/n, j/n)`.
pub fn grid_square(n: usize) -> Result<MetricGraph> {
    if n == 0 {
        return invalid("grid resolution must be at least 1");
    }
    let side = n + 1;
    let h = 1.0 / n as f64;
    let mu = 1.0 / (2.0 * (n * n) as f64);
    let idx = |i: usize, j: usize| j * side + i;
    let mut coords = Vec::with_capacity(side * side);
    let mut edges = Vec::with_capacity(2 * n * side);
    for j in 0..side {
        for i in 0..side {
            coords.push(Some(vec![i as f64 * h, j as f64 * h]));
            if i < n {
                edges.push(Edge::new(idx(i, j), idx(i + 1, j), h, mu));
            }
            if j < n {
                edges.push(Edge::new(idx(i, j), idx(i, j + 1), h, mu));
            }
        }
    }
    Ok(MetricGraph::new(coords, edges)?.with_generator(Generator::Grid { n }))
}

/// Accumulates cell-side measure shares into a graph: every unit cell gives
/// a quarter of its area to each of its four sides.
struct CellGraphBuilder {
    h: f64,
    coords: Vec<Option<Vec<f64>>>,
    sides: BTreeMap<(usize, usize), f64>,
}

impl CellGraphBuilder {
    fn new(h: f64) -> Self {
        CellGraphBuilder {
            h,
            coords: Vec::new(),
            sides: BTreeMap::new(),
        }
    }

    fn add_vertex(&mut self, x: f64, y: f64) -> usize {
        self.coords.push(Some(vec![x, y]));
        self.coords.len() - 1
    }

    /// Corners in counter-clockwise order from the lower left.
    fn add_cell(&mut self, corners: [usize; 4], share: f64) {
        for s in 0..4 {
            let (a, b) = (corners[s], corners[(s + 1) % 4]);
            *self.sides.entry((a.min(b), a.max(b))).or_insert(0.0) += share;
        }
    }

    fn build(self) -> Result<MetricGraph> {
        let edges = self
            .sides
            .into_iter()
            .map(|((u, v), mu)| Edge::new(u, v, self.h, mu))
            .collect();
        MetricGraph::new(self.coords, edges)
    }
}

fn cell_survives(p: usize, k: u32, i: usize, j: usize) -> bool {
    let middle = (p - 1) / 2;
    let (mut i, mut j) = (i, j);
    for _ in 0..k {
        if i % p == middle && j % p == middle {
            return false;
        }
        i /= p;
        j /= p;
    }
    true
}

/// Level-`k` prefractal of the Sierpinski carpet `S_p`: the grid of mesh
/// `p^-k` restricted to the `(p^2 - 1)^k` cells that survive `k` rounds of
/// middle-square removal. Measure is the surviving area share, total 1.
pub fn sierpinski_carpet(p: usize, k: u32) -> Result<MetricGraph> {
    if p < 3 || p % 2 == 0 {
        return invalid(format!("carpet parameter p = {p} must be odd and at least 3"));
    }
    let cells_per_side = p
        .checked_pow(k)
        .filter(|&n| n <= 1 << 12)
        .ok_or_else(|| ModspaceError::InvalidInput(format!("carpet level {k} too deep")))?;
    let n = cells_per_side;
    let h = 1.0 / n as f64;
    let survivors: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .filter(|&(i, j)| cell_survives(p, k, i, j))
        .collect();
    let share = 1.0 / (4.0 * survivors.len() as f64);

    let side = n + 1;
    let mut used = vec![false; side * side];
    for &(i, j) in &survivors {
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            used[(j + dj) * side + i + di] = true;
        }
    }
    let mut builder = CellGraphBuilder::new(h);
    let mut id = vec![usize::MAX; side * side];
    for j in 0..side {
        for i in 0..side {
            if used[j * side + i] {
                id[j * side + i] = builder.add_vertex(i as f64 * h, j as f64 * h);
            }
        }
    }
    let at = |i: usize, j: usize| id[j * side + i];
    for &(i, j) in &survivors {
        builder.add_cell([at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)], share);
    }
    Ok(builder.build()?.with_generator(Generator::Carpet { p, k }))
}

/// Number of cells surviving in `sierpinski_carpet(p, k)`.
pub fn carpet_cell_count(p: usize, k: u32) -> usize {
    (p * p - 1).pow(k)
}

/// Slits of every dyadic square of generation `0..=level`.
///
/// A square `[a 2^-g, (a+1) 2^-g] x [b 2^-g, (b+1) 2^-g]` carries the slit at
/// `x = (2a+1) 2^(-g-1)` from `y = (4b+1) 2^(-g-2)` to `y = (4b+3) 2^(-g-2)`.
pub fn slits_up_to(level: u32) -> Vec<Slit> {
    let mut slits = Vec::new();
    for g in 0..=level {
        let count = 1usize << g;
        let half = 0.5f64.powi(g as i32 + 1);
        let quarter = 0.5f64.powi(g as i32 + 2);
        for a in 0..count {
            for b in 0..count {
                slits.push(Slit {
                    generation: g,
                    x: (2 * a + 1) as f64 * half,
                    y_lo: (4 * b + 1) as f64 * quarter,
                    y_hi: (4 * b + 3) as f64 * quarter,
                });
            }
        }
    }
    slits
}

fn grid_index(value: f64, cells: usize) -> Option<usize> {
    let scaled = value * cells as f64;
    let rounded = scaled.round();
    ((scaled - rounded).abs() < 1e-9).then_some(rounded as usize)
}

/// Level-`k` slit-carpet prefractal on a grid of mesh `2^(-k-2) / m`.
///
/// Every slit of generation at most `k` is cut: grid vertices strictly inside
/// a slit are split into a left and a right copy, joined to each other only
/// through the slit tips. Distances in the result are the cut shortest-path
/// metric. Measure is the cell area share, total 1.
pub fn slit_carpet_level(k: u32, m: usize) -> Result<(MetricGraph, SlitSpec)> {
    if m == 0 {
        return Err(ModspaceError::MeshTooCoarse("refinement m must be at least 1".into()));
    }
    if k > 8 {
        return invalid(format!("slit-carpet level {k} too deep"));
    }
    let n = (1usize << (k + 2)) * m;
    let h = 1.0 / n as f64;
    let side = n + 1;
    let slits = slits_up_to(k);

    // cut[j * side + i]: grid point (i, j) lies strictly inside a slit.
    let mut cut = vec![false; side * side];
    for s in &slits {
        let (Some(i), Some(lo), Some(hi)) = (
            grid_index(s.x, n),
            grid_index(s.y_lo, n),
            grid_index(s.y_hi, n),
        ) else {
            return Err(ModspaceError::MeshTooCoarse(format!(
                "slit at x = {} is not a union of grid segments",
                s.x
            )));
        };
        for j in lo + 1..hi {
            cut[j * side + i] = true;
        }
    }

    let mut builder = CellGraphBuilder::new(h);
    // (left copy, right copy); identical for uncut points.
    let mut ids = vec![(0usize, 0usize); side * side];
    for j in 0..side {
        for i in 0..side {
            let (x, y) = (i as f64 * h, j as f64 * h);
            let left = builder.add_vertex(x, y);
            let right = if cut[j * side + i] {
                builder.add_vertex(x, y)
            } else {
                left
            };
            ids[j * side + i] = (left, right);
        }
    }
    // A cell sees the right copy of points on its left edge and vice versa.
    let share = h * h / 4.0;
    for j in 0..n {
        for i in 0..n {
            let right_of = |ii: usize, jj: usize| ids[jj * side + ii].1;
            let left_of = |ii: usize, jj: usize| ids[jj * side + ii].0;
            builder.add_cell(
                [
                    right_of(i, j),
                    left_of(i + 1, j),
                    left_of(i + 1, j + 1),
                    right_of(i, j + 1),
                ],
                share,
            );
        }
    }
    let graph = builder.build()?.with_generator(Generator::Slit {
        k,
        m,
        slits: slits.clone(),
    });
    Ok((graph, SlitSpec { level: k, slits }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        let g1 = grid_square(1).unwrap();
        assert_eq!((g1.vertex_count(), g1.edge_count()), (4, 4));
        assert!(g1.edges().iter().all(|e| e.len == 1.0));
        let g2 = grid_square(2).unwrap();
        assert_eq!((g2.vertex_count(), g2.edge_count()), (9, 12));
        // 2 n (n + 1) edges of measure 1 / (2 n^2).
        let g10 = grid_square(10).unwrap();
        assert_eq!(g10.edge_count(), 220);
        assert!((g10.total_measure() - 1.1).abs() < 1e-12);
        assert!(grid_square(0).is_err());
    }

    #[test]
    fn carpet_levels() {
        let k0 = sierpinski_carpet(3, 0).unwrap();
        assert_eq!((k0.vertex_count(), k0.edge_count()), (4, 4));
        for (p, k) in [(3usize, 1u32), (3, 2), (3, 3), (5, 1), (5, 2)] {
            let survivors = (0..p.pow(k))
                .flat_map(|j| (0..p.pow(k)).map(move |i| (i, j)))
                .filter(|&(i, j)| cell_survives(p, k, i, j))
                .count();
            assert_eq!(survivors, carpet_cell_count(p, k));
            let g = sierpinski_carpet(p, k).unwrap();
            assert!((g.total_measure() - 1.0).abs() < 1e-12);
            assert!(g.is_connected());
        }
        assert_eq!(carpet_cell_count(3, 1), 8);
        assert_eq!(carpet_cell_count(3, 2), 64);
        assert!(sierpinski_carpet(4, 1).is_err());
        assert!(sierpinski_carpet(1, 1).is_err());
    }

    #[test]
    fn carpet_level_one_removes_middle() {
        let g = sierpinski_carpet(3, 1).unwrap();
        // 16 grid points, all corners of some surviving cell; 24 grid sides.
        assert_eq!(g.vertex_count(), 16);
        assert_eq!(g.edge_count(), 24);
        // The four sides of the removed middle cell carry only the outer share.
        let inner: Vec<_> = g
            .edges()
            .iter()
            .filter(|e| (e.mu - 1.0 / 32.0).abs() < 1e-15)
            .collect();
        assert_eq!(inner.len(), 4 + 12);
    }

    #[test]
    fn level_zero_slit() {
        let slits = slits_up_to(0);
        assert_eq!(
            slits,
            vec![Slit {
                generation: 0,
                x: 0.5,
                y_lo: 0.25,
                y_hi: 0.75
            }]
        );
        assert_eq!(slits_up_to(2).len(), 1 + 4 + 16);
        for s in slits_up_to(3) {
            let side = 0.5f64.powi(s.generation as i32);
            assert!((s.y_hi - s.y_lo - side / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn slit_detour_across_level_zero() {
        let (g, spec) = slit_carpet_level(0, 1).unwrap();
        assert_eq!(spec.slits.len(), 1);
        // 25 grid points plus one duplicated interior slit point.
        assert_eq!(g.vertex_count(), 26);
        assert!((g.total_measure() - 1.0).abs() < 1e-12);
        let copies: Vec<usize> = (0..g.vertex_count())
            .filter(|&v| g.coords(v) == Some(&[0.5, 0.5][..]))
            .collect();
        assert_eq!(copies.len(), 2);
        // Around a tip: a quarter up (or down) and back.
        assert!((g.dist(copies[0], copies[1]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slit_graph_connected_with_bounded_diameter() {
        for (k, m) in [(0, 1), (1, 1), (1, 2), (2, 1)] {
            let (g, _) = slit_carpet_level(k, m).unwrap();
            assert!(g.is_connected());
            assert!(g.diameter() <= 3.0);
            assert!((g.total_measure() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slit_refinement_zero_rejected() {
        assert!(matches!(
            slit_carpet_level(1, 0),
            Err(ModspaceError::MeshTooCoarse(_))
        ));
    }
}
