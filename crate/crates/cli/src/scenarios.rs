//! Scripted reproduction scenarios, one per acceptance criterion.
//!
//! A scenario file is TOML with a `name`, the `criterion` it checks and a
//! `kind` selecting one of the runners below; the remaining keys are the
//! runner's parameters. Every runner is deterministic for a fixed seed.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use modspace_core::alberti::{
    cones_independent, fubini_partition, fubini_representation, heisenberg_box_partition, heisenberg_jacobian,
    heisenberg_parameter_grid, heisenberg_representation, representation_direction, unit_time_grid,
    validate_representation, Cone, Orientation, HEISENBERG_BOX, HEISENBERG_B_RANGE,
};
use modspace_core::curves::{boundary_sides, crossing_family, heisenberg_line, CrossingStrategy, CurveFamily, HeisenbergLineKind};
use modspace_core::metric::{dee_distance, Edge, MappedCloud, MetricGraph, PointCloud};
use modspace_core::modulus::{brute_force_modulus, solve_modulus, verify_duality, FamilySpec, SolveOptions};
use modspace_core::spaces::{grid_square, h_dilate, h_dist, h_inv, h_mul, slit_carpet_level, HeisenbergPoint};
use modspace_core::splitting::{cantor_sample, circle_sample, factor_product, product_with_line};
use modspace_core::{ModspaceError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub criterion: u32,
    #[serde(flatten)]
    pub scenario: Scenario,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ModspaceError::InvalidInput(format!("{}: {e}", path.display())))
    }

    /// Every scenario file in `dir`, ordered by criterion.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|x| x == "toml"));
        paths.sort();
        let mut all = paths.iter().map(|p| ScenarioFile::load(p)).collect::<Result<Vec<_>>>()?;
        all.sort_by_key(|s| s.criterion);
        Ok(all)
    }

    /// The scenario called `name` in `dir`.
    pub fn find(dir: &Path, name: &str) -> Result<Self> {
        ScenarioFile::load_dir(dir)?
            .into_iter()
            .find(|s| s.name == name)
            .ok_or_else(|| ModspaceError::InvalidInput(format!("no scenario named {name} in {}", dir.display())))
    }

    pub fn run(&self) -> Result<Outcome> {
        let start = Instant::now();
        let (passed, metrics) = self.scenario.run()?;
        Ok(Outcome {
            name: self.name.clone(),
            criterion: self.criterion,
            passed,
            seconds: start.elapsed().as_secs_f64(),
            metrics,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Duality(DualityScenario),
    OracleEquivalence(OracleScenario),
    ModulusFacts(FactsScenario),
    Fubini(FubiniScenario),
    Heisenberg(HeisenbergScenario),
    SlitCarpet(SlitScenario),
    Splitting(SplittingScenario),
    Dee(DeeScenario),
}

impl Scenario {
    pub fn run(&self) -> Result<(bool, Metrics)> {
        match self {
            Scenario::Duality(s) => s.run(),
            Scenario::OracleEquivalence(s) => s.run(),
            Scenario::ModulusFacts(s) => s.run(),
            Scenario::Fubini(s) => s.run(),
            Scenario::Heisenberg(s) => s.run(),
            Scenario::SlitCarpet(s) => s.run(),
            Scenario::Splitting(s) => s.run(),
            Scenario::Dee(s) => s.run(),
        }
    }
}

pub type Metrics = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub name: String,
    pub criterion: u32,
    pub passed: bool,
    /// Wall-clock time; left out of the JSON so that reports are
    /// reproducible byte for byte.
    #[serde(skip)]
    pub seconds: f64,
    pub metrics: Metrics,
}

impl Outcome {
    /// One line: criterion, verdict, name and metrics.
    pub fn line(&self) -> String {
        let metrics: Vec<String> = self.metrics.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
        format!(
            "criterion {:>2} {} {} ({:.2}s) {}",
            self.criterion,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            metrics.join(" ")
        )
    }
}

fn metrics<const N: usize>(pairs: [(&str, f64); N]) -> Metrics {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Connecting,
    Monotone,
}

/// Family of curves joining the two sides of a coordinate axis.
pub fn crossing_spec(graph: &MetricGraph, axis: usize, kind: FamilyKind) -> Result<FamilySpec> {
    let (lo, hi) = boundary_sides(graph, axis)?;
    match kind {
        FamilyKind::Connecting => Ok(FamilySpec::connecting(lo, hi)),
        FamilyKind::Monotone => FamilySpec::monotone(graph, lo, hi),
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualityCheck {
    Norm,
    Beurling,
    Pointwise,
}

/// Duality residuals of crossing families on unit-square grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityScenario {
    pub check: DualityCheck,
    pub ns: Vec<usize>,
    pub ps: Vec<f64>,
    pub axes: Vec<usize>,
    pub family: FamilyKind,
    pub tol: f64,
    pub threshold: f64,
    /// Dual weights at or below this are outside the support.
    pub weight_floor: f64,
    pub time_limit: f64,
}

impl DualityScenario {
    fn run(&self) -> Result<(bool, Metrics)> {
        let start = Instant::now();
        let opts = SolveOptions::with_tol(self.tol);
        let mut worst: f64 = 0.0;
        let mut cases = 0usize;
        for &n in &self.ns {
            let g = grid_square(n)?;
            for &axis in &self.axes {
                let spec = crossing_spec(&g, axis, self.family)?;
                for &p in &self.ps {
                    let cert = solve_modulus(&g, &spec, p, &opts)?;
                    let report = verify_duality(&cert, self.tol);
                    let r = match self.check {
                        DualityCheck::Norm => report.norm_residual,
                        DualityCheck::Beurling => max_of(
                            cert.dual
                                .iter()
                                .zip(&cert.beurling_residuals)
                                .filter(|(d, _)| d.weight > self.weight_floor)
                                .map(|(_, r)| *r),
                        ),
                        DualityCheck::Pointwise => report.pointwise_residual.unwrap_or(f64::INFINITY),
                    };
                    worst = worst.max(r);
                    cases += 1;
                }
            }
        }
        let seconds = start.elapsed().as_secs_f64();
        let passed = worst <= self.threshold && seconds <= self.time_limit;
        Ok((
            passed,
            metrics([("cases", cases as f64), ("worst_residual", worst)]),
        ))
    }
}

/// Random connected graph with every edge measured; source 0, sink `n-1`.
pub fn random_small_graph<R: Rng>(rng: &mut R, vertices: usize, edges: usize) -> Result<MetricGraph> {
    let max_edges = vertices * (vertices - 1) / 2;
    let target = edges.clamp(vertices - 1, max_edges);
    let mut pairs: Vec<(usize, usize)> = (1..vertices).map(|v| (rng.gen_range(0..v), v)).collect();
    let mut rest: Vec<(usize, usize)> = (0..vertices)
        .flat_map(|u| (u + 1..vertices).map(move |v| (u, v)))
        .filter(|e| !pairs.contains(e))
        .collect();
    rest.shuffle(rng);
    pairs.extend(rest.into_iter().take(target - pairs.len()));
    let list = pairs
        .into_iter()
        .map(|(u, v)| Edge::new(u, v, rng.gen_range(0.5..2.0), rng.gen_range(0.25..2.0)))
        .collect();
    MetricGraph::new(vec![None; vertices], list)
}

/// The constraint-generation solver against exhaustive search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleScenario {
    pub graphs: usize,
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub max_edges: usize,
    pub ps: Vec<f64>,
    pub tol: f64,
    pub brute_resolution: usize,
    pub relative_error: f64,
    pub seed: u64,
    pub time_limit: f64,
}

impl OracleScenario {
    fn run(&self) -> Result<(bool, Metrics)> {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut cases = Vec::new();
        for _ in 0..self.graphs {
            let n = rng.gen_range(self.min_vertices..=self.max_vertices);
            let e = rng.gen_range(n - 1..=self.max_edges);
            cases.push(random_small_graph(&mut rng, n, e)?);
        }
        let opts = SolveOptions::with_tol(self.tol);
        let errors = cases
            .par_iter()
            .flat_map_iter(|g| self.ps.iter().map(move |&p| (g, p)))
            .map(|(g, p)| {
                let n = g.vertex_count();
                let fam = crossing_family(g, &[0], &[n - 1], usize::MAX, CrossingStrategy::AllSimple)?;
                let solved = solve_modulus(g, &FamilySpec::connecting(vec![0], vec![n - 1]), p, &opts)?.value;
                let brute = brute_force_modulus(g, &fam, p, self.brute_resolution)?;
                Ok((solved - brute).abs() / brute)
            })
            .collect::<Result<Vec<f64>>>()?;
        let worst = max_of(errors.iter().copied());
        let seconds = start.elapsed().as_secs_f64();
        let passed = self.graphs >= 20 && worst <= self.relative_error && seconds <= self.time_limit;
        Ok((
            passed,
            metrics([
                ("graphs", self.graphs as f64),
                ("cases", errors.len() as f64),
                ("worst_relative_error", worst),
            ]),
        ))
    }
}

/// Monotonicity and subadditivity on random subfamilies of grid crossings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactsScenario {
    pub trials: usize,
    pub grid: usize,
    pub pool: usize,
    pub max_subfamily: usize,
    pub ps: Vec<f64>,
    pub tol: f64,
    pub slack: f64,
    pub seed: u64,
}

impl FactsScenario {
    fn run(&self) -> Result<(bool, Metrics)> {
        let g = grid_square(self.grid)?;
        let (a, b) = boundary_sides(&g, 0)?;
        let pool = crossing_family(&g, &a, &b, self.pool, CrossingStrategy::AllSimple)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut trials = Vec::new();
        for _ in 0..self.trials {
            let p = *self.ps.choose(&mut rng).expect("nonempty exponent list");
            let pick = |rng: &mut ChaCha8Rng| {
                let k = rng.gen_range(1..=self.max_subfamily);
                let mut idx: Vec<usize> = (0..pool.len()).collect::<Vec<_>>();
                idx.shuffle(rng);
                idx.truncate(k);
                idx.sort_unstable();
                idx
            };
            let first = pick(&mut rng);
            let second = pick(&mut rng);
            trials.push((p, first, second));
        }
        let opts = SolveOptions::with_tol(self.tol);
        let modulus = |idx: &[usize], p: f64| -> Result<f64> {
            let fam = CurveFamily::new(idx.iter().map(|&i| pool.curves[i].clone()).collect(), "subfamily");
            Ok(solve_modulus(&g, &FamilySpec::Explicit(fam), p, &opts)?.value)
        };
        let excess = trials
            .par_iter()
            .map(|(p, first, second)| {
                let mut union = first.clone();
                union.extend(second);
                union.sort_unstable();
                union.dedup();
                let (m1, m2, mu) = (modulus(first, *p)?, modulus(second, *p)?, modulus(&union, *p)?);
                // Positive parts of the violations of Mod(first) <= Mod(union)
                // and Mod(union) <= Mod(first) + Mod(second).
                Ok(((m1 - mu).max(m2 - mu), mu - m1 - m2))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let mono = excess.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        let sub = excess.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        let passed = mono <= self.slack && sub <= self.slack;
        Ok((
            passed,
            metrics([
                ("trials", self.trials as f64),
                ("pool", pool.len() as f64),
                ("max_monotonicity_excess", mono),
                ("max_subadditivity_excess", sub),
            ]),
        ))
    }
}

/// Row and column representations of Lebesgue measure on grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FubiniScenario {
    pub ns: Vec<usize>,
    pub tol: f64,
    pub cone_cos: f64,
    pub samples: usize,
    pub seed: u64,
}

impl FubiniScenario {
    fn run(&self) -> Result<(bool, Metrics)> {
        let mut worst: f64 = 0.0;
        let mut directions_ok = true;
        let cones = [Cone::axis(2, 0, self.cone_cos)?, Cone::axis(2, 1, self.cone_cos)?];
        for &n in &self.ns {
            let g = grid_square(n)?;
            let part = fubini_partition(n);
            let vol = part.volumes().expect("box partition");
            let embed = |v: &usize| g.coords(*v).expect("grid has coordinates").to_vec();
            for (o, cone) in [Orientation::Rows, Orientation::Cols].into_iter().zip(&cones) {
                let rep = fubini_representation(&g, o)?;
                let r = validate_representation(&rep, &vol, &part, embed, self.tol)?;
                worst = worst.max(r.max_residual);
                let d = representation_direction(&rep, |v: &usize| embed(v), cone);
                directions_ok &= d.ok && d.violation_fraction == 0.0;
            }
        }
        let independent = cones_independent(&cones, self.samples, self.seed)?.independent;
        let passed = worst <= self.tol && directions_ok && independent;
        Ok((
            passed,
            metrics([
                ("max_residual", worst),
                ("directions_ok", directions_ok as u8 as f64),
                ("independent", independent as u8 as f64),
            ]),
        ))
    }
}

/// Group law, Koranyi geometry and the line representations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergScenario {
    pub tuples: usize,
    pub seed: u64,
    pub algebra_tol: f64,
    pub geodesy_tol: f64,
    pub jacobian_tol: f64,
    pub jacobian_samples: usize,
    pub jacobian_step: f64,
    pub cells: usize,
    pub time_step: f64,
    pub parameter_steps: Vec<f64>,
}

fn random_point<R: Rng>(rng: &mut R) -> HeisenbergPoint {
    HeisenbergPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

impl HeisenbergScenario {
    fn algebra(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let e = HeisenbergPoint::new(0.0, 0.0, 0.0);
        let mut worst: f64 = 0.0;
        for _ in 0..self.tuples {
            let (p, q, r, g) = (random_point(&mut rng), random_point(&mut rng), random_point(&mut rng), random_point(&mut rng));
            let t: f64 = rng.gen_range(0.1..3.0);
            let residuals = [
                h_mul(&h_mul(&p, &q), &r).max_abs_diff(&h_mul(&p, &h_mul(&q, &r))),
                h_mul(&p, &e).max_abs_diff(&p),
                h_mul(&e, &p).max_abs_diff(&p),
                h_mul(&p, &h_inv(&p)).max_abs_diff(&e),
                h_mul(&h_inv(&p), &p).max_abs_diff(&e),
                (h_dist(&h_mul(&g, &p), &h_mul(&g, &q)) - h_dist(&p, &q)).abs(),
                (h_dist(&h_dilate(t, &p), &h_dilate(t, &q)) - t * h_dist(&p, &q)).abs() / t.max(1.0),
                h_dilate(t, &h_mul(&p, &q)).max_abs_diff(&h_mul(&h_dilate(t, &p), &h_dilate(t, &q))) / (t * t).max(1.0),
            ];
            worst = residuals.into_iter().fold(worst, f64::max);
        }
        worst
    }

    fn geodesy(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 1);
        let mut worst: f64 = 0.0;
        for i in 0..self.tuples {
            let kind = if i % 2 == 0 { HeisenbergLineKind::Alpha } else { HeisenbergLineKind::Beta };
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let (s, t) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let d = h_dist(&heisenberg_line(kind, a, b, s), &heisenberg_line(kind, a, b, t));
            worst = worst.max((d - (s - t).abs()).abs());
        }
        worst
    }

    fn jacobian(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 2);
        let mut worst: f64 = 0.0;
        for _ in 0..self.jacobian_samples {
            let a = rng.gen_range(-HEISENBERG_BOX[0]..HEISENBERG_BOX[0]);
            let b = rng.gen_range(-HEISENBERG_B_RANGE..HEISENBERG_B_RANGE);
            let t = rng.gen_range(-HEISENBERG_BOX[1]..HEISENBERG_BOX[1]);
            for kind in [HeisenbergLineKind::Alpha, HeisenbergLineKind::Beta] {
                worst = worst.max((heisenberg_jacobian(kind, a, b, t, self.jacobian_step) - 1.0).abs());
            }
        }
        worst
    }

    /// Residual sequences over the parameter refinements, one per line kind.
    pub fn refinement(&self) -> Result<Vec<Vec<f64>>> {
        let part = heisenberg_box_partition(self.cells);
        let vol = part.volumes().expect("box partition");
        let t_grid = unit_time_grid(self.time_step);
        [HeisenbergLineKind::Alpha, HeisenbergLineKind::Beta]
            .into_iter()
            .map(|kind| {
                self.parameter_steps
                    .iter()
                    .map(|&step| {
                        let (params, area) = heisenberg_parameter_grid(step)?;
                        let rep = heisenberg_representation(kind, &params, area, &t_grid)?;
                        let r = validate_representation(&rep, &vol, &part, |p: &HeisenbergPoint| p.to_vec(), 1.0)?;
                        Ok(r.max_residual)
                    })
                    .collect()
            })
            .collect()
    }

    fn run(&self) -> Result<(bool, Metrics)> {
        let algebra = self.algebra();
        let geodesy = self.geodesy();
        let jacobian = self.jacobian();
        let sequences = self.refinement()?;
        // Halving, up to the rounding floor once the quadrature is exact.
        let halving = sequences
            .iter()
            .all(|s| s.windows(2).all(|w| w[1] <= 0.5 * w[0] + 1e-12));
        let last = max_of(sequences.iter().filter_map(|s| s.last().copied()));
        let passed = algebra <= self.algebra_tol
            && geodesy <= self.geodesy_tol
            && jacobian <= self.jacobian_tol
            && halving
            && self.parameter_steps.len() >= 3;
        Ok((
            passed,
            metrics([
                ("algebra_residual", algebra),
                ("geodesy_residual", geodesy),
                ("jacobian_residual", jacobian),
                ("refinement_halves", halving as u8 as f64),
                ("finest_residual", last),
            ]),
        ))
    }
}

/// One row of the slit-carpet modulus sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: u32,
    pub vertices: usize,
    pub edges: usize,
    pub modulus: f64,
    pub lower_bound: f64,
    pub seconds: f64,
}

/// `Mod_p` of the vertical crossing family of slit carpets of levels `ks`.
pub fn slit_vertical_sweep(ks: &[u32], m: usize, p: f64, family: FamilyKind, tol: f64) -> Result<Vec<SweepRow>> {
    let opts = SolveOptions::with_tol(tol);
    ks.iter()
        .map(|&k| {
            let start = Instant::now();
            let (g, _) = slit_carpet_level(k, m)?;
            let spec = crossing_spec(&g, 1, family)?;
            let cert = solve_modulus(&g, &spec, p, &opts)?;
            Ok(SweepRow {
                k,
                vertices: g.vertex_count(),
                edges: g.edge_count(),
                modulus: cert.value,
                lower_bound: cert.lower_bound,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Diameter, Ahlfors regularity and modulus of slit-carpet levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitScenario {
    pub diameter_bound: f64,
    /// Levels for the ball-growth test, each refined to at least
    /// `min_side` cells per side.
    pub geometry_ks: Vec<u32>,
    pub min_side: usize,
    pub centers: usize,
    pub radii: usize,
    pub mesh_factor: f64,
    pub max_radius: f64,
    pub ahlfors_factor: f64,
    pub modulus_ks: Vec<u32>,
    pub m: usize,
    pub p: f64,
    pub family: FamilyKind,
    pub tol: f64,
    pub floor: f64,
    pub variation: f64,
    pub seed: u64,
}

impl SlitScenario {
    /// Largest ratio between values of `mu(B(x,r)) / r^2` over all levels,
    /// centers and radii, and the largest diameter seen.
    pub fn ahlfors(&self) -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (mut lo, mut hi, mut diameter) = (f64::INFINITY, 0.0f64, 0.0f64);
        for &k in &self.geometry_ks {
            let cells = 1usize << (k + 2);
            let m = self.min_side.div_ceil(cells).max(1);
            let (g, _) = slit_carpet_level(k, m)?;
            diameter = diameter.max(g.diameter());
            let mesh = 1.0 / (cells * m) as f64;
            let (r0, r1) = (self.mesh_factor * mesh, self.max_radius);
            if r0 > r1 {
                return Err(ModspaceError::MeshTooCoarse(format!("level {k}: no radius in [{r0}, {r1}]")));
            }
            let radii: Vec<f64> = (0..self.radii)
                .map(|i| r0 * (r1 / r0).powf(i as f64 / (self.radii - 1).max(1) as f64))
                .collect();
            let centers: Vec<usize> = (0..self.centers).map(|_| rng.gen_range(0..g.vertex_count())).collect();
            let ratios: Vec<f64> = centers
                .par_iter()
                .flat_map_iter(|&c| {
                    let g = &g;
                    radii.iter().map(move |&r| g.ball_measure(c, r) / (r * r))
                })
                .collect();
            for q in ratios {
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        Ok((hi / lo, diameter))
    }

    fn run(&self) -> Result<(bool, Metrics)> {
        let (spread, geometry_diameter) = self.ahlfors()?;
        let rows = slit_vertical_sweep(&self.modulus_ks, self.m, self.p, self.family, self.tol)?;
        let mut diameter = geometry_diameter;
        for &k in &self.modulus_ks {
            diameter = diameter.max(slit_carpet_level(k, self.m)?.0.diameter());
        }
        let lo = rows.iter().map(|r| r.modulus).fold(f64::INFINITY, f64::min);
        let hi = max_of(rows.iter().map(|r| r.modulus));
        let variation = (hi - lo) / lo;
        let passed = diameter <= self.diameter_bound
            && spread <= self.ahlfors_factor
            && lo >= self.floor
            && variation <= self.variation;
        let mut out = metrics([
            ("diameter", diameter),
            ("ahlfors_spread", spread),
            ("modulus_min", lo),
            ("modulus_variation", variation),
        ]);
        for r in &rows {
            out.insert(format!("modulus_k{}", r.k), r.modulus);
        }
        Ok((passed, out))
    }
}

/// Vertex cloud of a slit-carpet level centred on the middle of the square.
pub fn slit_cloud(k: u32, m: usize) -> Result<PointCloud> {
    let (g, _) = slit_carpet_level(k, m)?;
    PointCloud::new(g.coordinate_points(), vec![0.5, 0.5])
}

fn unit_directions(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / count as f64;
            vec![a.cos(), a.sin()]
        })
        .collect()
}

/// Product factorization on split and non-split samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingScenario {
    pub cantor_level: u32,
    pub cantor_step: f64,
    pub cantor_half_length: f64,
    pub cantor_radius: f64,
    pub accept_factor: f64,
    pub circle_points: usize,
    pub circle_radius: f64,
    pub slit_k: u32,
    pub slit_m: usize,
    pub slit_radius: f64,
    pub directions: usize,
    pub reject_factor: f64,
}

impl SplittingScenario {
    fn run(&self) -> Result<(bool, Metrics)> {
        let step = self.cantor_step;
        let xs = cantor_sample(self.cantor_level, step)?;
        let y = product_with_line(&xs, self.cantor_half_length, step)?;
        let cantor = factor_product(&y, &[vec![0.0, 1.0]], self.cantor_radius, 2.0 * step)?;

        let circle_step = std::f64::consts::TAU / self.circle_points as f64;
        let circle = circle_sample([0.0, 0.0], 1.0, self.circle_points)?;
        let slit_step = 1.0 / ((1usize << (self.slit_k + 2)) * self.slit_m) as f64;
        let slit = slit_cloud(self.slit_k, self.slit_m)?;
        let dirs = unit_directions(self.directions);
        // Error over sample step; every direction must be rejected.
        let ratios = |cloud: &PointCloud, radius: f64, step: f64| -> Result<(f64, bool)> {
            let reports = dirs
                .par_iter()
                .map(|d| factor_product(cloud, std::slice::from_ref(d), radius, 2.0 * step))
                .collect::<Result<Vec<_>>>()?;
            let worst = reports
                .iter()
                .map(|r| r.product_error / step)
                .fold(f64::INFINITY, f64::min);
            Ok((worst, reports.iter().all(|r| !r.passed)))
        };
        let (circle_ratio, circle_rejected) = ratios(&circle, self.circle_radius, circle_step)?;
        let (slit_ratio, slit_rejected) = ratios(&slit, self.slit_radius, slit_step)?;
        let cantor_ratio = cantor.product_error / step;
        let passed = cantor.passed
            && cantor_ratio <= self.accept_factor
            && circle_rejected
            && slit_rejected
            && circle_ratio >= self.reject_factor
            && slit_ratio >= self.reject_factor;
        Ok((
            passed,
            metrics([
                ("cantor_error_over_step", cantor_ratio),
                ("circle_min_error_over_step", circle_ratio),
                ("slit_min_error_over_step", slit_ratio),
                ("directions", dirs.len() as f64),
            ]),
        ))
    }
}

/// Quasi-triangle inequality, symmetry and identity of the distance `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeeScenario {
    pub triples: usize,
    pub points: usize,
    pub extent: f64,
    pub max_noise: f64,
    pub lipschitz: f64,
    pub factor: f64,
    pub self_tol: f64,
    pub seed: u64,
}

/// A random cloud near `base` with an affine map of slope at most `lip`.
fn perturbed<R: Rng>(rng: &mut R, base: &[Vec<f64>], noise: f64, lip: f64) -> Result<MappedCloud> {
    let sigma = rng.gen_range(0.0..=noise);
    let pts: Vec<Vec<f64>> = base
        .iter()
        .map(|p| p.iter().map(|x| x + sigma * rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let slope = lip * rng.gen_range(0.0..=1.0);
    let shift = rng.gen_range(-noise..=noise);
    let (c, s) = (slope * angle.cos(), slope * angle.sin());
    Ok(MappedCloud::from_fn(PointCloud::centered(pts, 2)?, move |p| vec![c * p[0] + s * p[1] + shift]))
}

impl DeeScenario {
    fn run(&self) -> Result<(bool, Metrics)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut triples = Vec::with_capacity(self.triples);
        for _ in 0..self.triples {
            let base: Vec<Vec<f64>> = (0..self.points)
                .map(|_| vec![rng.gen_range(-self.extent..self.extent), rng.gen_range(-self.extent..self.extent)])
                .collect();
            triples.push([
                perturbed(&mut rng, &base, self.max_noise, self.lipschitz)?,
                perturbed(&mut rng, &base, self.max_noise, self.lipschitz)?,
                perturbed(&mut rng, &base, self.max_noise, self.lipschitz)?,
            ]);
        }
        let results = triples
            .par_iter()
            .map(|[a, b, c]| {
                let (d12, d23, d13) = (dee_distance(a, b)?, dee_distance(b, c)?, dee_distance(a, c)?);
                let asym = (dee_distance(b, a)? - d12).abs();
                let selfd = dee_distance(a, a)?;
                Ok((d13 - self.factor * (d12 + d23), asym, selfd, d13))
            })
            .collect::<Result<Vec<_>>>()?;
        let triangle = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let asym = max_of(results.iter().map(|r| r.1));
        let selfd = max_of(results.iter().map(|r| r.2));
        let saturated = results.iter().filter(|r| r.3 >= 0.5).count();
        let passed = triangle <= 0.0 && asym == 0.0 && selfd <= self.self_tol;
        Ok((
            passed,
            metrics([
                ("triples", self.triples as f64),
                ("max_triangle_excess", triangle),
                ("max_asymmetry", asym),
                ("max_self_distance", selfd),
                ("saturated_d13", saturated as f64),
            ]),
        ))
    }
}
