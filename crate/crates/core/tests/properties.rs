use modspace_core::curves::{line_integral, Density, DiscreteCurve};
use modspace_core::io::{space_from_json, space_hash, space_to_json};
use modspace_core::metric::{dee_distance, pointed_hausdorff_distance, Edge, MappedCloud, MetricGraph, PointCloud};
use modspace_core::modulus::{solve_modulus, verify_duality, FamilySpec, SolveOptions};
use modspace_core::spaces::{h_dilate, h_dist, h_inv, h_mul, koranyi_norm, HeisenbergPoint};
use proptest::prelude::*;

/// Connected graph on `n` vertices: a random spanning tree plus extra edges.
fn graph_strategy() -> impl Strategy<Value = MetricGraph> {
    (3usize..8).prop_flat_map(|n| {
        let tree = proptest::collection::vec((any::<prop::sample::Index>(), 0.1f64..2.0, 0.1f64..1.0), n - 1);
        let extra = proptest::collection::vec((0..n, 0..n, 0.1f64..2.0, 0.1f64..1.0), 0..n);
        (Just(n), tree, extra).prop_map(|(n, tree, extra)| {
            let mut edges: Vec<Edge> = tree
                .into_iter()
                .enumerate()
                .map(|(i, (parent, len, mu))| Edge::new(parent.index(i + 1), i + 1, len, mu))
                .collect();
            for (u, v, len, mu) in extra {
                let taken = edges.iter().any(|e| (e.u, e.v) == (u, v) || (e.u, e.v) == (v, u));
                if u != v && !taken {
                    edges.push(Edge::new(u, v, len, mu));
                }
            }
            MetricGraph::new(vec![None; n], edges).unwrap()
        })
    })
}

fn point() -> impl Strategy<Value = HeisenbergPoint> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y, z)| HeisenbergPoint::new(x, y, z))
}

fn cloud(dim: usize) -> impl Strategy<Value = PointCloud> {
    proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, dim), 1..30)
        .prop_map(move |pts| PointCloud::centered(pts, dim).unwrap())
}

fn connecting(g: &MetricGraph) -> FamilySpec {
    FamilySpec::connecting(vec![0], vec![g.vertex_count() - 1])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn shortest_path_is_a_metric(g in graph_strategy(), picks in proptest::collection::vec((0usize..64, 0usize..64, 0usize..64), 20)) {
        let n = g.vertex_count();
        for (a, b, c) in picks {
            let (a, b, c) = (a % n, b % n, c % n);
            prop_assert_eq!(g.dist(a, a), 0.0);
            prop_assert!((g.dist(a, b) - g.dist(b, a)).abs() <= 1e-12);
            prop_assert!(g.dist(a, c) <= g.dist(a, b) + g.dist(b, c) + 1e-12);
            if a != b {
                prop_assert!(g.dist(a, b) > 0.0);
            }
        }
    }

    #[test]
    fn space_json_round_trips(g in graph_strategy()) {
        let text = space_to_json(&g).unwrap();
        let back = space_from_json(&text).unwrap();
        prop_assert_eq!(back.edges(), g.edges());
        prop_assert_eq!(space_hash(&back), space_hash(&g));
        prop_assert_eq!(space_to_json(&back).unwrap(), text);
    }

    #[test]
    fn line_integral_is_linear_and_additive(g in graph_strategy(), a in 0.0f64..3.0, b in 0.0f64..3.0, seed in any::<u64>()) {
        let m = g.edge_count();
        let r1: Vec<f64> = (0..m).map(|e| ((seed >> (e % 64)) & 7) as f64 * 0.25).collect();
        let r2: Vec<f64> = (0..m).map(|e| ((seed >> ((e + 13) % 64)) & 3) as f64 * 0.5).collect();
        let mix: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| a * x + b * y).collect();
        let (d1, d2, dm) = (Density::new(r1).unwrap(), Density::new(r2).unwrap(), Density::new(mix).unwrap());
        let n = g.vertex_count();
        let (_, first) = g.shortest_path(0, n / 2).unwrap();
        let (_, second) = g.shortest_path(n / 2, n - 1).unwrap();
        prop_assume!(first.len() > 1 && second.len() > 1);
        let c1 = DiscreteCurve::new(&g, first).unwrap();
        let c2 = DiscreteCurve::new(&g, second).unwrap();
        let joined = c1.concat(&c2).unwrap();
        for c in [&c1, &c2, &joined] {
            let lhs = line_integral(&g, &dm, c).unwrap();
            let rhs = a * line_integral(&g, &d1, c).unwrap() + b * line_integral(&g, &d2, c).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
        let sum = line_integral(&g, &d1, &c1).unwrap() + line_integral(&g, &d1, &c2).unwrap();
        prop_assert!((line_integral(&g, &d1, &joined).unwrap() - sum).abs() <= 1e-12 * (1.0 + sum));
    }

    #[test]
    fn heisenberg_group_laws(p in point(), q in point(), r in point()) {
        let lhs = h_mul(&h_mul(&p, &q), &r);
        let rhs = h_mul(&p, &h_mul(&q, &r));
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
        prop_assert!(h_mul(&h_inv(&p), &p).max_abs_diff(&HeisenbergPoint::new(0.0, 0.0, 0.0)) <= 1e-12);
        prop_assert!((koranyi_norm(&p) - koranyi_norm(&h_inv(&p))).abs() <= 1e-12);
        let d = h_dist(&p, &q);
        prop_assert!((d - h_dist(&h_mul(&r, &p), &h_mul(&r, &q))).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn heisenberg_dilations(p in point(), q in point(), t in 0.1f64..5.0) {
        let d = h_dist(&p, &q);
        prop_assert!((h_dist(&h_dilate(t, &p), &h_dilate(t, &q)) - t * d).abs() <= 1e-9 * (1.0 + t * d));
        let hom = h_dilate(t, &h_mul(&p, &q));
        prop_assert!(hom.max_abs_diff(&h_mul(&h_dilate(t, &p), &h_dilate(t, &q))) <= 1e-9 * (1.0 + t * t));
    }

    #[test]
    fn pointed_hausdorff_properties(a in cloud(2), b in cloud(2), r1 in 0.1f64..3.0, r2 in 0.1f64..3.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let d_lo = pointed_hausdorff_distance(&a, &b, lo).unwrap();
        prop_assert!(d_lo <= pointed_hausdorff_distance(&a, &b, hi).unwrap());
        prop_assert_eq!(d_lo, pointed_hausdorff_distance(&b, &a, lo).unwrap());
        prop_assert_eq!(pointed_hausdorff_distance(&a, &a, hi).unwrap(), 0.0);
    }

    #[test]
    fn dee_distance_is_symmetric(a in cloud(2), b in cloud(2), s in -1.0f64..1.0) {
        let fa = MappedCloud::from_fn(a, |x| vec![x[0] * 0.5]);
        let fb = MappedCloud::from_fn(b, |x| vec![x[0] * 0.5 + s * 0.1]);
        let d = dee_distance(&fa, &fb).unwrap();
        prop_assert!((d - dee_distance(&fb, &fa).unwrap()).abs() <= 1e-9);
        prop_assert!((0.0..=0.5).contains(&d));
        prop_assert!(dee_distance(&fa, &fa).unwrap() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn modulus_scales_with_lengths_and_measure(g in graph_strategy(), p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]), c in 0.25f64..4.0) {
        let opts = SolveOptions::default();
        let base = solve_modulus(&g, &connecting(&g), p, &opts).unwrap().value;
        let long = g.with_scaled_lengths(c).unwrap();
        let heavy = g.with_scaled_measure(c).unwrap();
        let by_len = solve_modulus(&long, &connecting(&long), p, &opts).unwrap().value;
        let by_mu = solve_modulus(&heavy, &connecting(&heavy), p, &opts).unwrap().value;
        let tol = 4.0 * opts.tol;
        let expect_len = base * c.powf(-p);
        prop_assert!((by_len - expect_len).abs() <= tol * expect_len.max(1.0), "{} vs {}", by_len, expect_len);
        prop_assert!((by_mu - c * base).abs() <= tol * (c * base).max(1.0), "{} vs {}", by_mu, c * base);
    }

    #[test]
    fn certificates_close_the_duality_gap(g in graph_strategy(), p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0])) {
        let opts = SolveOptions::default();
        let cert = solve_modulus(&g, &connecting(&g), p, &opts).unwrap();
        prop_assert!(cert.primal_dual_gap <= opts.tol * cert.value.max(1.0));
        prop_assert!(cert.lower_bound <= cert.value);
        prop_assert!(cert.min_integral >= 1.0 - opts.tol);
        let weights: f64 = cert.dual.iter().map(|d| d.weight).sum();
        prop_assert!((weights - 1.0).abs() <= 1e-12);
        let report = verify_duality(&cert, opts.tol);
        prop_assert!(report.passed, "{:?}", report);
    }
}
