use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curves::{line_integral, CurveFamily, Density, DiscreteCurve};
use crate::error::{invalid, ModspaceError, Result};
use crate::metric::MetricGraph;

use super::oracle::{integral, FamilySpec, Found};
use super::duality::{verify_duality, DualityReport};
use super::nnls::nnls;
use super::program::{BarrierSolution, Program};

/// Solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Relative tolerance on admissibility and on the primal-dual gap.
    pub tol: f64,
    /// Cap on the total number of Newton steps.
    pub max_iterations: usize,
    /// Most violated curves added per round.
    pub batch: usize,
    /// Value of `rho` on edges of zero measure.
    pub r_cap: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-6,
            max_iterations: 100_000,
            batch: 128,
            r_cap: 1e6,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..SolveOptions::default()
        }
    }
}

/// A curve carrying positive dual weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCurve {
    pub curve: DiscreteCurve,
    /// Position in the family, for explicit families.
    pub index: Option<usize>,
    pub weight: f64,
}

/// Primal and dual solution of a modulus problem with the data needed to
/// re-check every duality identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusCertificate {
    pub p: f64,
    /// Dual exponent; `None` stands for `q = infinity` at `p = 1`.
    pub q: Option<f64>,
    /// Energy of `rho_star`, an upper bound on the modulus.
    pub value: f64,
    /// Lagrangian dual bound, a lower bound on the modulus.
    pub lower_bound: f64,
    pub primal_dual_gap: f64,
    pub rho_star: Density,
    pub dual: Vec<DualCurve>,
    pub eta: Vec<f64>,
    pub f: Vec<f64>,
    /// `|integral of rho_star over the curve - 1|`, aligned with `dual`.
    pub beurling_residuals: Vec<f64>,
    pub mu: Vec<f64>,
    pub lengths: Vec<f64>,
    /// Zero-measure edges where `rho_star` is held at the cap.
    pub capped_edges: Vec<usize>,
    /// Least `rho_star`-length over the whole family.
    pub min_integral: f64,
    pub family_tag: String,
    pub active_curves: usize,
    pub rounds: usize,
    pub newton_steps: usize,
    pub tol: f64,
}

impl ModulusCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `eta(e) = sum_g P(g) len(e) mult(e, g)`.
pub fn eta_measure<'a, I>(graph: &MetricGraph, weighted: I) -> Vec<f64>
where
    I: IntoIterator<Item = (&'a DiscreteCurve, f64)>,
{
    let mut eta = vec![0.0; graph.edge_count()];
    for (curve, w) in weighted {
        for &e in curve.edges() {
            eta[e] += w * graph.edge(e).len;
        }
    }
    eta
}

/// Outcome of an admissibility check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub worst_curve: usize,
    pub worst_value: f64,
}

/// Checks `integral of rho >= 1 - tol` on every curve.
pub fn is_admissible(graph: &MetricGraph, rho: &Density, family: &CurveFamily, tol: f64) -> Result<Admissibility> {
    if !(tol >= 0.0) {
        return invalid("tolerance must be nonnegative");
    }
    if family.is_empty() {
        return Err(ModspaceError::EmptyFamily);
    }
    let mut worst = (0, f64::INFINITY);
    for (i, c) in family.curves.iter().enumerate() {
        let v = line_integral(graph, rho, c)?;
        if v < worst.1 {
            worst = (i, v);
        }
    }
    Ok(Admissibility {
        admissible: worst.1 >= 1.0 - tol,
        worst_curve: worst.0,
        worst_value: worst.1,
    })
}

struct Active {
    found: Found,
    row: Vec<(usize, f64)>,
    b: f64,
}

const COARSE_GAP: f64 = 1e-3;
const SUPPORT_FLOOR: f64 = 1e-9;
const MIN_GAP_SCALE: f64 = 1e-3;
const PRUNE_WEIGHT: f64 = 1e-10;
const PRUNE_SLACK: f64 = 1e-2;
const NNLS_MAX_CURVES: usize = 400;
const NNLS_MAX_ENTRIES: usize = 4_000_000;
/// Curves within this distance of tight seed the support when polishing.
const POLISH_TIGHT: f64 = 1e-3;
/// Curves this close to tight are not re-added, which stops cycling on
/// rounding noise.
const POLISH_FEASIBLE: f64 = 1.0 - 1e-10;
const POLISH_ROUNDS: usize = 20;

/// p-modulus of `family` by constraint generation over a log-barrier
/// Newton solver.
pub fn solve_modulus(
    graph: &MetricGraph,
    family: &FamilySpec,
    p: f64,
    opts: &SolveOptions,
) -> Result<ModulusCertificate> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("exponent p = {p} must be finite and at least 1"));
    }
    if !(opts.tol > 0.0) || !(opts.r_cap > 0.0) {
        return invalid("tol and r_cap must be positive");
    }
    family.validate(graph)?;
    let m = graph.edge_count();
    let measured: Vec<bool> = graph.edges().iter().map(|e| e.mu > 0.0).collect();
    let mut rho_full: Vec<f64> = measured.iter().map(|&ms| if ms { 0.0 } else { opts.r_cap }).collect();
    let viol_tol = 0.25 * opts.tol / p;

    let mut active: Vec<Active> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut solution: Option<BarrierSolution> = None;
    let mut steps = 0usize;
    let mut rounds = 0usize;
    let mut gap_scale = COARSE_GAP;
    // Every restricted dual bound is a lower bound for the whole family.
    // Far along the barrier path the multipliers lose digits, so the best
    // bound seen so far is kept together with its curves.
    let mut best_lower = 0.0;
    let mut best_dual: Vec<(Found, f64)> = Vec::new();

    loop {
        rounds += 1;
        // The first probe uses plain lengths, so it returns geodesics.
        let probe: Vec<f64> = if solution.is_none() {
            measured.iter().map(|&ms| if ms { 1.0 } else { opts.r_cap }).collect()
        } else {
            rho_full.clone()
        };
        let threshold = if solution.is_none() { f64::INFINITY } else { 1.0 - viol_tol };
        let found = family.violated(graph, &probe, threshold, opts.batch);
        let mut added = 0;
        for f in found.iter() {
            if !seen.insert(f.curve.vertices().to_vec()) {
                continue;
            }
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            let mut capped = 0.0;
            for &e in f.curve.edges() {
                let len = graph.edge(e).len;
                if measured[e] {
                    *row.entry(e).or_insert(0.0) += len;
                } else {
                    capped += len;
                }
            }
            let b = 1.0 - opts.r_cap * capped;
            if b <= 0.0 {
                continue;
            }
            active.push(Active {
                found: f.clone(),
                row: row.into_iter().collect(),
                b,
            });
            added += 1;
        }
        if active.is_empty() {
            // Every curve runs through capped edges.
            break;
        }
        if added == 0 && solution.is_some() {
            gap_scale *= 0.1;
            if gap_scale < MIN_GAP_SCALE * opts.tol {
                break;
            }
        }

        if let Some(sol) = solution.as_ref() {
            // Loose curves without dual weight only slow the Newton steps;
            // they return if they are ever violated again.
            let total: f64 = sol.lambda.iter().sum();
            let mut i = 0;
            active.retain(|a| {
                let slack = a.row.iter().map(|&(e, c)| c * rho_full[e]).sum::<f64>() - a.b;
                let keep = sol.lambda.get(i).is_none_or(|l| *l >= PRUNE_WEIGHT * total) || slack <= PRUNE_SLACK * a.b;
                if !keep {
                    seen.remove(a.found.curve.vertices());
                }
                i += 1;
                keep
            });
        }
        let mut edge_set: Vec<usize> = active.iter().flat_map(|a| a.row.iter().map(|&(e, _)| e)).collect();
        edge_set.sort_unstable();
        edge_set.dedup();
        let index_of: BTreeMap<usize, usize> = edge_set.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let prog = Program {
            p,
            mu: edge_set.iter().map(|&e| graph.edge(e).mu).collect(),
            rows: active
                .iter()
                .map(|a| a.row.iter().map(|&(e, c)| (index_of[&e], c)).collect())
                .collect(),
            b: active.iter().map(|a| a.b).collect(),
        };
        let warm: Option<Vec<f64>> = solution.as_ref().map(|_| edge_set.iter().map(|&e| rho_full[e]).collect());
        let warm_t = solution.as_ref().map(|s| s.t);
        let estimate = solution
            .as_ref()
            .map(|s| s.primal)
            .filter(|v| *v > 0.0)
            .unwrap_or(1.0);
        let budget = opts.max_iterations.saturating_sub(steps);
        let sol = prog.solve(warm.as_deref().zip(warm_t), gap_scale * estimate, budget);
        steps += sol.newton_steps;
        for (i, &e) in edge_set.iter().enumerate() {
            rho_full[e] = sol.rho[i];
        }
        let restricted_gap = sol.primal - sol.lower_bound;
        if sol.lower_bound > best_lower {
            best_lower = sol.lower_bound;
            best_dual = active.iter().zip(&sol.lambda).map(|(a, l)| (a.found.clone(), *l)).collect();
        }
        let lower = best_lower;
        solution = Some(sol);
        let (upper, _) = rescaled(graph, family, &rho_full, &measured, p)?;
        let full_gap = upper - lower;
        if upper.is_finite() && full_gap <= 0.5 * opts.tol * upper {
            break;
        }
        if restricted_gap > 0.05 * full_gap {
            gap_scale = (gap_scale * 0.1).max(MIN_GAP_SCALE * opts.tol);
        }
        // An exhausted budget is judged after polishing, which may still
        // close the gap.
        if steps >= opts.max_iterations {
            break;
        }
    }

    let (value, theta) = rescaled(graph, family, &rho_full, &measured, p)?;
    let mut rho_star = rho_full.clone();
    for e in 0..m {
        if measured[e] {
            rho_star[e] /= theta;
        }
    }
    let lower_bound = if solution.is_some() { best_lower.min(value) } else { value };
    let gap = (value - lower_bound).max(0.0);
    if !value.is_finite() {
        return Err(ModspaceError::Nonconvergence {
            iterations: steps,
            lower: lower_bound,
            upper: value,
        });
    }

    let mu: Vec<f64> = graph.edges().iter().map(|e| e.mu).collect();
    let min_integral = family.shortest(graph, &rho_star)?.integral;
    let mut cert = ModulusCertificate {
        p,
        q: (p > 1.0).then(|| p / (p - 1.0)),
        value,
        lower_bound,
        primal_dual_gap: gap,
        rho_star: Density { values: rho_star },
        dual: Vec::new(),
        eta: Vec::new(),
        f: Vec::new(),
        beurling_residuals: Vec::new(),
        mu,
        lengths: graph.edges().iter().map(|e| e.len).collect(),
        capped_edges: (0..m).filter(|&e| !measured[e]).collect(),
        min_integral,
        family_tag: family.tag(),
        active_curves: active.len(),
        rounds,
        newton_steps: steps,
        tol: opts.tol,
    };
    let weighted = best_dual;
    attach_dual(graph, &mut cert, &weighted);

    // Barrier multipliers keep a little weight on curves that are slightly
    // loose at the optimum; a fit of the stationarity conditions over the
    // tight curves is used instead whenever it certifies better.
    let mut pool: Vec<Found> = Vec::new();
    let mut known: HashSet<&[usize]> = HashSet::new();
    for f in weighted.iter().map(|(f, _)| f).chain(active.iter().map(|a| &a.found)) {
        if known.insert(f.curve.vertices()) {
            pool.push(f.clone());
        }
    }
    if let Some(fitted) = stationarity_dual(graph, &cert, &pool, opts.tol) {
        let mut alt = cert.clone();
        attach_dual(graph, &mut alt, &fitted);
        if score(&verify_duality(&alt, opts.tol)) < score(&verify_duality(&cert, opts.tol)) {
            cert = alt;
        }
    }

    // The energy is flat at the optimum, so the barrier density is only
    // accurate to about the square root of the gap. The program restricted
    // to the support of P is solved exactly instead, growing the support
    // until no curve of the family is violated.
    if !cert.dual.is_empty() {
        let mut start: Vec<(Found, f64)> = Vec::new();
        let mut known: HashSet<Vec<usize>> = HashSet::new();
        let barrier_total: f64 = weighted.iter().map(|(_, l)| l).sum();
        let candidates = cert
            .dual
            .iter()
            .map(|d| {
                let found = Found {
                    curve: d.curve.clone(),
                    index: d.index,
                    integral: 0.0,
                };
                (found, d.weight)
            })
            .chain(weighted.iter().map(|(f, l)| (f.clone(), l / barrier_total.max(f64::MIN_POSITIVE))))
            .chain(pool.iter().filter_map(|f| {
                let v = integral(graph, &cert.rho_star.values, &f.curve);
                ((v - 1.0).abs() <= POLISH_TIGHT).then(|| (f.clone(), 0.0))
            }));
        for (f, w) in candidates {
            if known.insert(f.curve.vertices().to_vec()) {
                start.push((f, w));
            }
        }
        let polished = if p > 1.0 {
            polish(graph, family, &cert, start, &measured, opts)
        } else {
            polish_linear(graph, family, start, &measured, opts)
        };
        if let Some((from_kkt, support, bound)) = polished {
            let (energy, theta) = rescaled(graph, family, &from_kkt, &measured, p)?;
            if energy.is_finite() && energy <= cert.value * (1.0 + 1e-12) {
                let mut alt = cert.clone();
                alt.rho_star.values = (0..m)
                    .map(|e| if measured[e] { from_kkt[e] / theta } else { opts.r_cap })
                    .collect();
                alt.value = energy;
                alt.lower_bound = cert.lower_bound.max(bound).min(energy);
                alt.primal_dual_gap = (energy - alt.lower_bound).max(0.0);
                alt.min_integral = family.shortest(graph, &alt.rho_star.values)?.integral;
                attach_dual(graph, &mut alt, &support);
                let closes = alt.primal_dual_gap < cert.primal_dual_gap && cert.primal_dual_gap > opts.tol * cert.value;
                if closes || score(&verify_duality(&alt, opts.tol)) <= score(&verify_duality(&cert, opts.tol)) {
                    cert = alt;
                }
            }
        }
    }
    if cert.primal_dual_gap > opts.tol * cert.value {
        return Err(ModspaceError::Nonconvergence {
            iterations: steps,
            lower: cert.lower_bound,
            upper: cert.value,
        });
    }
    Ok(cert)
}

/// Fills the dual measure of `cert` from unnormalized curve weights, and
/// the quantities derived from it.
fn attach_dual(graph: &MetricGraph, cert: &mut ModulusCertificate, weighted: &[(Found, f64)]) {
    let total: f64 = weighted.iter().map(|(_, l)| l).sum();
    let mut dual: Vec<DualCurve> = Vec::new();
    if total > 0.0 {
        for (found, l) in weighted {
            let w = l / total;
            if w >= SUPPORT_FLOOR {
                dual.push(DualCurve {
                    curve: found.curve.clone(),
                    index: found.index,
                    weight: w,
                });
            }
        }
        let kept: f64 = dual.iter().map(|d| d.weight).sum();
        for d in &mut dual {
            d.weight /= kept;
        }
    }
    cert.eta = eta_measure(graph, dual.iter().map(|d| (&d.curve, d.weight)));
    cert.f = cert
        .eta
        .iter()
        .zip(&cert.mu)
        .map(|(h, w)| if *w > 0.0 { h / w } else { 0.0 })
        .collect();
    cert.beurling_residuals = dual
        .iter()
        .map(|d| (integral(graph, &cert.rho_star.values, &d.curve) - 1.0).abs())
        .collect();
    cert.dual = dual;
}

/// Exact optimality conditions for `p > 1` by an active-set method.
///
/// On a support `S` of curves the system `p mu rho^(p-1) = A_S^T lambda`,
/// `A_S rho = b` is solved by Newton's method in `lambda`. A curve whose
/// multiplier would turn negative leaves `S`; curves the oracle finds
/// shorter than one under the resulting density join it. Returns the
/// density, the support with its multipliers and their Lagrangian bound.
fn polish(
    graph: &MetricGraph,
    family: &FamilySpec,
    cert: &ModulusCertificate,
    start: Vec<(Found, f64)>,
    measured: &[bool],
    opts: &SolveOptions,
) -> Option<(Vec<f64>, Vec<(Found, f64)>, f64)> {
    let p = cert.p;
    let scale = p * cert.value;
    let mut support: Vec<(Found, f64)> = start.into_iter().map(|(f, w)| (f, w * scale)).collect();
    let mut seen: HashSet<Vec<usize>> = support.iter().map(|(f, _)| f.curve.vertices().to_vec()).collect();
    let mut damped = false;
    for _ in 0..POLISH_ROUNDS {
        if support.is_empty() || support.len() > NNLS_MAX_CURVES {
            return None;
        }
        let (rho, lambda) = kkt_newton(graph, cert, &mut support, measured, opts.r_cap, damped)?;
        let known: HashSet<&[usize]> = support.iter().map(|(f, _)| f.curve.vertices()).collect();
        let fresh: Vec<Found> = family
            .violated(graph, &rho, POLISH_FEASIBLE, opts.batch)
            .into_iter()
            .filter(|f| !known.contains(f.curve.vertices()))
            .collect();
        // A curve returning after Newton dropped it means full steps cycle.
        if fresh.iter().any(|f| !seen.insert(f.curve.vertices().to_vec())) {
            damped = true;
        }
        let kept: Vec<(Found, f64)> = support.iter().map(|(f, _)| f.clone()).zip(lambda.iter().copied()).collect();
        if fresh.is_empty() {
            let edges: Vec<usize> = (0..graph.edge_count()).filter(|&e| measured[e]).collect();
            let index: BTreeMap<usize, usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
            let (rows, b) = constraint_rows(graph, &kept, measured, opts.r_cap)?;
            let prog = Program {
                p,
                mu: edges.iter().map(|&e| graph.edge(e).mu).collect(),
                rows: rows.iter().map(|row| row.iter().map(|&(e, a)| (index[&e], a)).collect()).collect(),
                b,
            };
            let bound = prog.dual_bound(&lambda);
            return Some((rho, kept, bound));
        }
        let mean = lambda.iter().sum::<f64>() / lambda.len() as f64;
        support = kept;
        support.extend(fresh.into_iter().map(|f| (f, 1e-3 * mean)));
    }
    None
}

/// The `p = 1` counterpart of [`polish`]: the restricted linear program and
/// its dual are solved by the simplex method.
fn polish_linear(
    graph: &MetricGraph,
    family: &FamilySpec,
    start: Vec<(Found, f64)>,
    measured: &[bool],
    opts: &SolveOptions,
) -> Option<(Vec<f64>, Vec<(Found, f64)>, f64)> {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

    let m = graph.edge_count();
    let mut support: Vec<Found> = start.into_iter().map(|(f, _)| f).collect();
    for _ in 0..POLISH_ROUNDS {
        if support.is_empty() || support.len() > NNLS_MAX_CURVES {
            return None;
        }
        let tagged: Vec<(Found, f64)> = support.iter().map(|f| (f.clone(), 0.0)).collect();
        let (rows, b) = constraint_rows(graph, &tagged, measured, opts.r_cap)?;
        let edges: Vec<usize> = {
            let set: BTreeMap<usize, ()> = rows.iter().flatten().map(|&(e, _)| (e, ())).collect();
            set.into_keys().collect()
        };

        let mut primal = Problem::new(OptimizationDirection::Minimize);
        let vars: BTreeMap<usize, minilp::Variable> = edges
            .iter()
            .map(|&e| (e, primal.add_var(graph.edge(e).mu, (0.0, f64::INFINITY))))
            .collect();
        for (row, bg) in rows.iter().zip(&b) {
            let mut expr = LinearExpr::empty();
            for &(e, a) in row {
                expr.add(vars[&e], a);
            }
            primal.add_constraint(expr, ComparisonOp::Ge, *bg);
        }
        let solved = primal.solve().ok()?;
        let mut rho = vec![0.0; m];
        for (&e, &v) in &vars {
            rho[e] = solved.var_value(v).max(0.0);
        }
        for e in 0..m {
            if !measured[e] {
                rho[e] = opts.r_cap;
            }
        }

        let mut dual = Problem::new(OptimizationDirection::Maximize);
        let lams: Vec<minilp::Variable> = b.iter().map(|bg| dual.add_var(*bg, (0.0, f64::INFINITY))).collect();
        let mut columns: BTreeMap<usize, LinearExpr> = BTreeMap::new();
        for (g, row) in rows.iter().enumerate() {
            for &(e, a) in row {
                columns.entry(e).or_insert_with(LinearExpr::empty).add(lams[g], a);
            }
        }
        for (e, expr) in columns {
            dual.add_constraint(expr, ComparisonOp::Le, graph.edge(e).mu);
        }
        let solved_dual = dual.solve().ok()?;
        let lambda: Vec<f64> = lams.iter().map(|&v| solved_dual.var_value(v).max(0.0)).collect();

        let known: HashSet<&[usize]> = support.iter().map(|f| f.curve.vertices()).collect();
        let fresh: Vec<Found> = family
            .violated(graph, &rho, POLISH_FEASIBLE, opts.batch)
            .into_iter()
            .filter(|f| !known.contains(f.curve.vertices()))
            .collect();
        if fresh.is_empty() {
            let index: BTreeMap<usize, usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
            let prog = Program {
                p: 1.0,
                mu: edges.iter().map(|&e| graph.edge(e).mu).collect(),
                rows: rows.iter().map(|row| row.iter().map(|&(e, a)| (index[&e], a)).collect()).collect(),
                b,
            };
            let bound = prog.dual_bound(&lambda);
            let kept = support.into_iter().zip(lambda).filter(|(_, l)| *l > 0.0).collect();
            return Some((rho, kept, bound));
        }
        support.extend(fresh);
    }
    None
}

/// Per curve: `(edge, len * mult)` over measured edges and the right-hand
/// side left after the capped edges.
fn constraint_rows(
    graph: &MetricGraph,
    curves: &[(Found, f64)],
    measured: &[bool],
    r_cap: f64,
) -> Option<(Vec<Vec<(usize, f64)>>, Vec<f64>)> {
    let mut rows = Vec::with_capacity(curves.len());
    let mut b = Vec::with_capacity(curves.len());
    for (found, _) in curves {
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        let mut capped = 0.0;
        for &e in found.curve.edges() {
            let len = graph.edge(e).len;
            if measured[e] {
                *row.entry(e).or_insert(0.0) += len;
            } else {
                capped += len;
            }
        }
        let bg = 1.0 - r_cap * capped;
        if !(bg > 0.0) {
            return None;
        }
        rows.push(row.into_iter().collect());
        b.push(bg);
    }
    Some((rows, b))
}

/// Newton's method for the optimality system on `support`, whose weights
/// seed the multipliers. Curves are removed when their multiplier would
/// cross zero. Returns the density (capped edges at `r_cap`) and the
/// multipliers of the surviving curves.
fn kkt_newton(
    graph: &MetricGraph,
    cert: &ModulusCertificate,
    support: &mut Vec<(Found, f64)>,
    measured: &[bool],
    r_cap: f64,
    damped: bool,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let p = cert.p;
    let m = graph.edge_count();
    let (mut rows, mut b) = constraint_rows(graph, support, measured, r_cap)?;
    let mut lambda: Vec<f64> = support.iter().map(|(_, l)| *l).collect();
    // Curves entering with no weight start just inside the orthant.
    let positive = lambda.iter().copied().filter(|l| *l > 0.0).fold(f64::INFINITY, f64::min);
    let seed = if positive.is_finite() { 1e-3 * positive } else { 1.0 };
    for l in &mut lambda {
        if !(*l > 0.0) {
            *l = seed;
        }
    }
    let eval = |rows: &[Vec<(usize, f64)>], b: &[f64], lambda: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut eta = vec![0.0; m];
        for (row, l) in rows.iter().zip(lambda) {
            for &(e, a) in row {
                eta[e] += l * a;
            }
        }
        let rho: Vec<f64> = (0..m)
            .map(|e| {
                if !measured[e] {
                    r_cap
                } else if eta[e] > 0.0 {
                    (eta[e] / (p * graph.edge(e).mu)).powf(1.0 / (p - 1.0))
                } else {
                    0.0
                }
            })
            .collect();
        let residual = rows
            .iter()
            .zip(b)
            .map(|(row, bg)| row.iter().map(|&(e, a)| a * rho[e]).sum::<f64>() - bg)
            .collect();
        (eta, rho, residual)
    };
    let size = |r: &[f64], b: &[f64]| r.iter().zip(b).fold(0.0f64, |s, (x, bg)| s.max(x.abs() / bg));

    let (mut eta, mut rho, mut res) = eval(&rows, &b, &lambda);
    for _ in 0..200 {
        if size(&res, &b) <= 1e-14 {
            break;
        }
        let k = rows.len();
        let mut jac = DMatrix::<f64>::zeros(k, k);
        for g in 0..k {
            for h in g..k {
                let (rg, rh) = (&rows[g], &rows[h]);
                let (mut i, mut j, mut acc) = (0, 0, 0.0);
                while i < rg.len() && j < rh.len() {
                    match rg[i].0.cmp(&rh[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            let e = rg[i].0;
                            if eta[e] > 0.0 {
                                acc += rg[i].1 * rh[j].1 * rho[e] / ((p - 1.0) * eta[e]);
                            }
                            i += 1;
                            j += 1;
                        }
                    }
                }
                jac[(g, h)] = acc;
                jac[(h, g)] = acc;
            }
        }
        let rhs = -DVector::from_column_slice(&res);
        // Supports with more curves than independent constraints leave the
        // multipliers undetermined; the minimum-norm step is taken then.
        let step = match jac.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => {
                let svd = jac.svd(true, true);
                let cutoff = 1e-12 * svd.singular_values.amax();
                svd.solve(&rhs, cutoff).ok()?
            }
        };
        // A multiplier driven through zero marks a curve outside the support.
        // Damped steps stop short of the boundary and drop a curve only once
        // its multiplier has collapsed, which is slower but never discards a
        // curve on the strength of one long step.
        let leaving = if damped {
            let top = lambda.iter().copied().fold(0.0, f64::max);
            (0..lambda.len()).filter(|&g| lambda[g] < 1e-13 * top).min_by(|&g, &h| lambda[g].total_cmp(&lambda[h]))
        } else {
            (0..lambda.len())
                .filter(|&g| lambda[g] + step[g] <= 0.0)
                .min_by(|&g, &h| (lambda[g] / -step[g]).total_cmp(&(lambda[h] / -step[h])))
        };
        if let Some(g) = leaving {
            support.remove(g);
            rows.remove(g);
            b.remove(g);
            lambda.remove(g);
            (eta, rho, res) = eval(&rows, &b, &lambda);
            continue;
        }
        let mut alpha: f64 = 1.0;
        if damped {
            for (l, d) in lambda.iter().zip(step.iter()) {
                if *d < 0.0 {
                    alpha = alpha.min(-0.99 * l / d);
                }
            }
        }
        let before = size(&res, &b);
        let mut improved = false;
        while alpha > 1e-12 {
            let cand: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, d)| l + alpha * d).collect();
            let (e2, r2, s2) = eval(&rows, &b, &cand);
            if size(&s2, &b) < before {
                lambda = cand;
                (eta, rho, res) = (e2, r2, s2);
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (size(&res, &b) <= 1e-10).then_some((rho, lambda))
}

/// Pass first, then the largest residual.
fn score(r: &DualityReport) -> (bool, f64) {
    let worst = r
        .norm_residual
        .max(r.beurling_residual)
        .max(r.pointwise_residual.unwrap_or(0.0));
    (!r.passed, worst)
}

/// Curve weights solving `sum_g lambda_g len(e) mult(e, g) / mu(e) = p rho(e)^(p-1)`
/// in the least-squares sense with `lambda >= 0`, over the curves of
/// `pool` that are tight for `rho_star`. At `p = 1` only edges carrying
/// `rho_star` enter.
fn stationarity_dual(graph: &MetricGraph, cert: &ModulusCertificate, pool: &[Found], tol: f64) -> Option<Vec<(Found, f64)>> {
    let rho = &cert.rho_star.values;
    let rho_max = rho.iter().zip(&cert.mu).filter(|(_, m)| **m > 0.0).fold(0.0f64, |a, (r, _)| a.max(*r));
    let tight: Vec<&Found> = pool
        .iter()
        .filter(|f| (integral(graph, &cert.rho_star.values, &f.curve) - 1.0).abs() <= tol)
        .collect();
    if tight.is_empty() || tight.len() > NNLS_MAX_CURVES {
        return None;
    }
    let keep = |e: usize| cert.mu[e] > 0.0 && (cert.p > 1.0 || rho[e] > 1e-6 * rho_max);
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    for f in &tight {
        for &e in f.curve.edges() {
            if keep(e) {
                let next = rows.len();
                rows.entry(e).or_insert(next);
            }
        }
    }
    if rows.is_empty() || rows.len() * tight.len() > NNLS_MAX_ENTRIES {
        return None;
    }
    let mut a = DMatrix::<f64>::zeros(rows.len(), tight.len());
    for (g, f) in tight.iter().enumerate() {
        for &e in f.curve.edges() {
            if let Some(&i) = rows.get(&e) {
                a[(i, g)] += graph.edge(e).len / cert.mu[e];
            }
        }
    }
    let mut y = DVector::<f64>::zeros(rows.len());
    for (&e, &i) in &rows {
        y[i] = cert.p * rho[e].powf(cert.p - 1.0);
    }
    let lambda = nnls(&a, &y)?;
    Some(tight.into_iter().cloned().zip(lambda.iter().copied()).collect())
}

/// Energy of `rho` after scaling its measured part so that the shortest
/// curve has length one; returns `(energy, scale)`.
fn rescaled(graph: &MetricGraph, family: &FamilySpec, rho: &[f64], measured: &[bool], p: f64) -> Result<(f64, f64)> {
    let theta = family.shortest(graph, rho)?.integral;
    if !(theta > 0.0) {
        return Ok((f64::INFINITY, 1.0));
    }
    let energy: f64 = graph
        .edges()
        .iter()
        .zip(rho)
        .zip(measured)
        .filter(|(_, ms)| **ms)
        .map(|((e, r), _)| if *r == 0.0 { 0.0 } else { e.mu * (r / theta).powf(p) })
        .sum();
    Ok((energy, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{boundary_sides, crossing_family, CrossingStrategy};
    use crate::metric::Edge;
    use crate::spaces::grid_square;

    fn path_graph(m: usize, len: f64, w: f64) -> MetricGraph {
        let edges = (0..m).map(|i| Edge::new(i, i + 1, len, w)).collect();
        MetricGraph::new(vec![None; m + 1], edges).unwrap()
    }

    #[test]
    fn single_curve_closed_form() {
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            let (m, len, w) = (5, 0.4, 0.7);
            let g = path_graph(m, len, w);
            let fam = CurveFamily::from_vertex_lists(&g, vec![(0..=m).collect()], "one").unwrap();
            let cert = solve_modulus(&g, &fam.into(), p, &SolveOptions::default()).unwrap();
            let exact = w * (m as f64).powf(1.0 - p) * len.powf(-p);
            assert!((cert.value - exact).abs() <= 1e-6 * exact.max(1.0), "p={p}: {} vs {exact}", cert.value);
            assert_eq!(cert.dual.len(), 1);
            assert!((cert.dual[0].weight - 1.0).abs() < 1e-12);
            for e in 0..m {
                assert!((cert.eta[e] - len).abs() < 1e-12);
                if p > 1.0 {
                    assert!((cert.rho_star.values[e] - 1.0 / (m as f64 * len)).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn admissibility() {
        let g = grid_square(3).unwrap();
        let (left, right) = boundary_sides(&g, 0).unwrap();
        let fam = crossing_family(&g, &left, &right, 50, CrossingStrategy::AllSimple).unwrap();
        let min_len = fam.curves.iter().map(|c| c.length()).fold(f64::INFINITY, f64::min);
        let rho = Density::constant(&g, 1.0 / min_len).unwrap();
        assert!(is_admissible(&g, &rho, &fam, 0.0).unwrap().admissible);
        let zero = Density::constant(&g, 0.0).unwrap();
        let r = is_admissible(&g, &zero, &fam, 0.0).unwrap();
        assert!(!r.admissible);
        assert_eq!(r.worst_value, 0.0);
        let empty = CurveFamily::new(vec![], "empty");
        assert!(matches!(is_admissible(&g, &rho, &empty, 0.0), Err(ModspaceError::EmptyFamily)));
    }

    #[test]
    fn eta_examples() {
        let g = grid_square(2).unwrap();
        let a = DiscreteCurve::new(&g, vec![0, 1, 2]).unwrap();
        let b = DiscreteCurve::new(&g, vec![0, 3, 4, 5]).unwrap();
        let single = eta_measure(&g, [(&a, 1.0)]);
        for e in 0..g.edge_count() {
            let expect = if a.edges().contains(&e) { 0.5 } else { 0.0 };
            assert_eq!(single[e], expect);
        }
        let mixed = eta_measure(&g, [(&a, 0.5), (&b, 0.5)]);
        let eb = eta_measure(&g, [(&b, 1.0)]);
        for e in 0..g.edge_count() {
            assert!((mixed[e] - 0.5 * (single[e] + eb[e])).abs() < 1e-15);
        }
        let total: f64 = mixed.iter().sum();
        assert!((total - 0.5 * (a.length() + b.length())).abs() < 1e-12);
    }

    #[test]
    fn grid_monotone_rows_value() {
        // n+1 disjoint rows of n edges with measure 1/(2n^2) and length 1/n.
        for n in [2, 4, 8] {
            let g = grid_square(n).unwrap();
            let (left, right) = boundary_sides(&g, 0).unwrap();
            let fam = FamilySpec::monotone(&g, left, right).unwrap();
            let cert = solve_modulus(&g, &fam, 2.0, &SolveOptions::default()).unwrap();
            let exact = (n + 1) as f64 / (2 * n) as f64;
            assert!((cert.value - exact).abs() < 1e-6, "{n}: {}", cert.value);
        }
    }
}
