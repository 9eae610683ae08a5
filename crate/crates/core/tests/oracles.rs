//! Reference values computed by hand or by direct enumeration, frozen.

use modspace_core::curves::{line_integral, CurveFamily, Density, DiscreteCurve};
use modspace_core::metric::{dee_distance, pointed_hausdorff_distance, Edge, MappedCloud, MetricGraph, PointCloud};
use modspace_core::modulus::{solve_modulus, SolveOptions};
use modspace_core::spaces::{carpet_cell_count, grid_square, h_dilate, h_mul, koranyi_norm, sierpinski_carpet, HeisenbergPoint};

#[test]
fn three_cycle_prefers_the_two_edge_path() {
    let g = MetricGraph::new(
        vec![None; 3],
        vec![Edge::new(0, 1, 1.0, 1.0), Edge::new(1, 2, 1.0, 1.0), Edge::new(0, 2, 3.0, 1.0)],
    )
    .unwrap();
    assert_eq!(g.shortest_path(0, 2).unwrap(), (2.0, vec![0, 1, 2]));
}

#[test]
fn unit_grid_ball() {
    let g = grid_square(2).unwrap().with_scaled_lengths(2.0).unwrap();
    assert_eq!(g.ball(4, 1.5), vec![1, 3, 4, 5, 7]);
}

#[test]
fn grid_total_measure() {
    let g = grid_square(10).unwrap();
    assert_eq!(g.edge_count(), 220);
    assert!((g.total_measure() - 1.1).abs() < 1e-12);
}

#[test]
fn carpet_cells() {
    assert_eq!(carpet_cell_count(3, 2), 64);
    let g = sierpinski_carpet(3, 2).unwrap();
    assert!(g.is_connected());
}

#[test]
fn pointed_hausdorff_example() {
    let a = PointCloud::centered(vec![vec![0.0, 0.0], vec![1.0, 0.0]], 2).unwrap();
    let b = PointCloud::centered(vec![vec![0.0, 0.0], vec![1.2, 0.0]], 2).unwrap();
    assert!((pointed_hausdorff_distance(&a, &b, 2.0).unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn dee_distance_of_a_constant_shift() {
    let pts: Vec<Vec<f64>> = (0..9)
        .flat_map(|i| (0..9).map(move |j| vec![-0.6 + 0.15 * i as f64, -0.6 + 0.15 * j as f64]))
        .collect();
    let cloud = PointCloud::centered(pts, 2).unwrap();
    let f = MappedCloud::from_fn(cloud.clone(), |x| vec![x[0]]);
    let g = MappedCloud::from_fn(cloud, |x| vec![x[0] + 0.3]);
    assert!((dee_distance(&f, &g).unwrap() - 0.3).abs() < 1e-9);
}

#[test]
fn heisenberg_values() {
    let e1 = HeisenbergPoint::new(1.0, 0.0, 0.0);
    let e2 = HeisenbergPoint::new(0.0, 1.0, 0.0);
    assert_eq!(h_mul(&e1, &e2), HeisenbergPoint::new(1.0, 1.0, 0.5));
    assert_eq!(h_mul(&e2, &e1), HeisenbergPoint::new(1.0, 1.0, -0.5));
    assert!((koranyi_norm(&HeisenbergPoint::new(0.0, 0.0, 1.0)) - 2.0).abs() < 1e-15);
    assert_eq!(h_dilate(2.0, &HeisenbergPoint::new(1.0, 1.0, 1.0)), HeisenbergPoint::new(2.0, 2.0, 4.0));
}

#[test]
fn grid_line_integrals() {
    for n in [1, 2, 5] {
        let g = grid_square(n).unwrap();
        let row: Vec<usize> = (0..=n).collect();
        let c = DiscreteCurve::new(&g, row).unwrap();
        let one = Density::constant(&g, 1.0).unwrap();
        assert!((line_integral(&g, &one, &c).unwrap() - 1.0).abs() < 1e-12);
    }
    let g = grid_square(2).unwrap();
    let c = DiscreteCurve::new(&g, vec![0, 1, 2]).unwrap();
    let mut values = vec![0.0; g.edge_count()];
    values[c.edges()[0]] = 1.0;
    let rho = Density::new(values).unwrap();
    assert_eq!(line_integral(&g, &rho, &c).unwrap(), 0.5);
}

/// Two disjoint paths: one of `m1` edges of length `l1` and measure `w1`,
/// one of `m2` edges of length `l2` and measure `w2`.
fn two_paths(m1: usize, l1: f64, w1: f64, m2: usize, l2: f64, w2: f64) -> (MetricGraph, CurveFamily) {
    let mut edges: Vec<Edge> = (0..m1).map(|i| Edge::new(i, i + 1, l1, w1)).collect();
    let off = m1 + 1;
    edges.extend((0..m2).map(|i| Edge::new(off + i, off + i + 1, l2, w2)));
    let g = MetricGraph::new(vec![None; off + m2 + 1], edges).unwrap();
    let fam = CurveFamily::from_vertex_lists(&g, vec![(0..=m1).collect(), (off..=off + m2).collect()], "two").unwrap();
    (g, fam)
}

#[test]
fn disjoint_curves_add() {
    let single = |m: usize, l: f64, w: f64, p: f64| w * (m as f64).powf(1.0 - p) * l.powf(-p);
    for p in [1.0, 1.5, 2.0, 3.0] {
        let (g, fam) = two_paths(3, 0.5, 0.2, 5, 0.3, 0.7);
        let cert = solve_modulus(&g, &fam.into(), p, &SolveOptions::default()).unwrap();
        let exact = single(3, 0.5, 0.2, p) + single(5, 0.3, 0.7, p);
        assert!((cert.value - exact).abs() <= 1e-6 * exact.max(1.0), "p={p}: {} vs {exact}", cert.value);
    }
}
