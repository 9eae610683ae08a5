//! Log-barrier Newton method for the restricted modulus program
//!
//! ```text
//! minimize    sum_e mu_e rho_e^p
//! subject to  sum_e a_ge rho_e >= b_g   for every active curve g
//!             rho >= 0
//! ```

use nalgebra::{DMatrix, DVector};

/// Sparse restricted program over a subset of edge variables.
#[derive(Clone, Debug)]
pub(crate) struct Program {
    pub p: f64,
    /// Measure of each variable edge.
    pub mu: Vec<f64>,
    /// Per curve: `(variable, coefficient)` with coefficient `len * mult`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct BarrierSolution {
    pub rho: Vec<f64>,
    pub lambda: Vec<f64>,
    pub primal: f64,
    /// Lagrangian dual value of `lambda`, optimized over its scale.
    pub lower_bound: f64,
    pub newton_steps: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    pub converged: bool,
    /// Final barrier parameter.
    pub t: f64,
}

const STEP_TO_BOUNDARY: f64 = 0.99;
const T_GROWTH: f64 = 8.0;
const CENTERING_TOL: f64 = 1e-9;
const MAX_CENTERING_STEPS: usize = 200;
/// Programs with at most this many variables always use the full Hessian.
const DENSE_LIMIT: usize = 256;
/// Largest program for which a failed Woodbury step falls back to the full Hessian.
const DENSE_FALLBACK_LIMIT: usize = 2048;
const WARM_MARGIN: f64 = 1.01;
/// A warm solve restarts at this fraction of the previous parameter.
const WARM_T_BACKOFF: f64 = 1.0 / 64.0;

impl Program {
    fn m(&self) -> usize {
        self.mu.len()
    }

    fn k(&self) -> usize {
        self.rows.len()
    }

    fn slacks(&self, rho: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.b)
            .map(|(row, b)| row.iter().map(|&(j, a)| a * rho[j]).sum::<f64>() - b)
            .collect()
    }

    pub fn energy(&self, rho: &[f64]) -> f64 {
        self.mu
            .iter()
            .zip(rho)
            .map(|(m, r)| if *r == 0.0 { 0.0 } else { m * r.powf(self.p) })
            .sum()
    }

    /// Change of the barrier along `rho + alpha dir`, summed term by term
    /// so that it stays accurate when `t` times the energy is large.
    fn barrier_change(&self, t: f64, rho: &[f64], s: &[f64], dir: &[f64], ds: &[f64], alpha: f64) -> Option<f64> {
        let mut energy = 0.0;
        let mut logs = 0.0;
        for ((r, d), mu) in rho.iter().zip(dir).zip(&self.mu) {
            let x = alpha * d / r;
            if !(x > -1.0) {
                return None;
            }
            let l = x.ln_1p();
            energy += if self.p == 1.0 {
                mu * alpha * d
            } else {
                mu * r.powf(self.p) * (self.p * l).exp_m1()
            };
            logs += l;
        }
        for (sg, dsg) in s.iter().zip(ds) {
            let x = alpha * dsg / sg;
            if !(x > -1.0) {
                return None;
            }
            logs += x.ln_1p();
        }
        Some(t * energy - logs)
    }

    /// Best lower bound `max_c g(c lambda)` from the Lagrangian dual.
    pub fn dual_bound(&self, lambda: &[f64]) -> f64 {
        let bl: f64 = lambda.iter().zip(&self.b).map(|(l, b)| l * b).sum();
        if !(bl > 0.0) {
            return 0.0;
        }
        let mut eta = vec![0.0; self.m()];
        for (row, l) in self.rows.iter().zip(lambda) {
            for &(j, a) in row {
                eta[j] += l * a;
            }
        }
        let p = self.p;
        if p == 1.0 {
            let c = eta
                .iter()
                .zip(&self.mu)
                .filter(|(e, _)| **e > 0.0)
                .map(|(e, m)| m / e)
                .fold(f64::INFINITY, f64::min);
            return if c.is_finite() { c * bl } else { 0.0 };
        }
        let q = p / (p - 1.0);
        let conj: f64 = eta
            .iter()
            .zip(&self.mu)
            .filter(|(e, _)| **e > 0.0)
            .map(|(e, m)| (p - 1.0) * m * (e / (p * m)).powf(q))
            .sum();
        if conj == 0.0 {
            return 0.0;
        }
        let c = (bl / (q * conj)).powf(1.0 / (q - 1.0));
        c * bl / p
    }

    /// Strictly feasible start: the warm start lifted off zero and scaled
    /// just past the most violated row, or a cold start with every slack at
    /// least `b`.
    fn start(&self, warm: Option<&[f64]>) -> Vec<f64> {
        let margin = if warm.is_some() { WARM_MARGIN } else { 2.0 };
        let mut rho: Vec<f64> = match warm {
            Some(w) if w.len() == self.m() => {
                let mean = w.iter().sum::<f64>() / self.m().max(1) as f64;
                let floor = (1e-2 * mean).max(1e-6);
                w.iter().map(|r| r.max(floor)).collect()
            }
            _ => vec![1.0; self.m()],
        };
        let mut scale: f64 = 1.0;
        for (row, b) in self.rows.iter().zip(&self.b) {
            let v: f64 = row.iter().map(|&(j, a)| a * rho[j]).sum();
            scale = scale.max(margin * b / v);
        }
        for r in &mut rho {
            *r *= scale;
        }
        rho
    }

    /// Newton direction for the barrier at `(t, rho)`; returns
    /// `(direction, gradient . direction)`.
    fn newton(&self, t: f64, rho: &[f64], s: &[f64]) -> Option<(Vec<f64>, f64)> {
        let (m, k, p) = (self.m(), self.k(), self.p);
        let mut g = vec![0.0; m];
        let mut d = vec![0.0; m];
        for j in 0..m {
            let r = rho[j];
            let mu = self.mu[j];
            g[j] = t * p * mu * r.powf(p - 1.0) - 1.0 / r;
            let curv = if p == 1.0 {
                0.0
            } else {
                t * p * (p - 1.0) * mu * r.powf(p - 2.0)
            };
            d[j] = curv + 1.0 / (r * r);
        }
        for (row, sg) in self.rows.iter().zip(s) {
            for &(j, a) in row {
                g[j] -= a / sg;
            }
        }
        let descent = |dir: &[f64]| g.iter().zip(dir).map(|(a, b)| a * b).sum::<f64>() < 0.0;
        // The Woodbury form cancels badly once constraint curvature dwarfs
        // the diagonal, so it is reserved for large programs and checked.
        let dir = match (k < m && m > DENSE_LIMIT)
            .then(|| self.woodbury(&g, &d, s))
            .flatten()
            .filter(|dir| descent(dir))
        {
            Some(dir) => dir,
            None if m <= DENSE_FALLBACK_LIMIT || k >= m => self.dense(&g, &d, s)?,
            None => return None,
        };
        let gd: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        Some((dir, gd))
    }

    /// `-H^-1 g` by the Woodbury identity
    /// `H^-1 = D^-1 - D^-1 A^T (S^2 + A D^-1 A^T)^-1 A D^-1`, a `k x k` solve.
    fn woodbury(&self, g: &[f64], d: &[f64], s: &[f64]) -> Option<Vec<f64>> {
        let (m, k) = (self.m(), self.k());
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                cols[j].push((i, a));
            }
        }
        let mut mm = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            mm[(i, i)] = s[i] * s[i];
        }
        for (j, col) in cols.iter().enumerate() {
            let inv = 1.0 / d[j];
            for &(a, ca) in col {
                for &(b, cb) in col {
                    mm[(a, b)] += ca * cb * inv;
                }
            }
        }
        let dg: Vec<f64> = g.iter().zip(d).map(|(gj, dj)| gj / dj).collect();
        let mut rhs = DVector::<f64>::zeros(k);
        for (i, row) in self.rows.iter().enumerate() {
            rhs[i] = row.iter().map(|&(j, a)| a * dg[j]).sum();
        }
        let y = solve_spd(mm, rhs)?;
        let mut corr = vec![0.0; m];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                corr[j] += a * y[i];
            }
        }
        Some((0..m).map(|j| -(dg[j] - corr[j] / d[j])).collect())
    }

    /// `-H^-1 g` with `H = D + A^T S^-2 A` assembled in full.
    fn dense(&self, g: &[f64], d: &[f64], s: &[f64]) -> Option<Vec<f64>> {
        let mut h = DMatrix::<f64>::from_diagonal(&DVector::from_column_slice(d));
        for (row, sg) in self.rows.iter().zip(s) {
            let w = 1.0 / (sg * sg);
            for &(a, ca) in row {
                for &(b, cb) in row {
                    h[(a, b)] += w * ca * cb;
                }
            }
        }
        let x = solve_spd(h, DVector::from_column_slice(g))?;
        Some(x.iter().map(|v| -v).collect())
    }

    /// Barrier path-following until the duality gap bound drops below
    /// `gap_target`, or `budget` Newton steps are spent.
    /// A warm start carries the previous point and barrier parameter.
    pub fn solve(&self, warm: Option<(&[f64], f64)>, gap_target: f64, budget: usize) -> BarrierSolution {
        let (m, k) = (self.m(), self.k());
        let mut rho = self.start(warm.map(|w| w.0));
        let n_con = (m + k) as f64;
        let e0 = self.energy(&rho).max(1e-300);
        let cold = (n_con / e0).max(1e-12);
        let mut t = match warm {
            Some((_, t_prev)) => (t_prev * WARM_T_BACKOFF).max(cold).min(n_con / gap_target),
            None => cold,
        };
        let mut steps = 0usize;
        let mut converged = false;
        loop {
            // Centering.
            let mut inner = 0;
            while inner < MAX_CENTERING_STEPS && steps < budget {
                let s = self.slacks(&rho);
                let Some((dir, gd)) = self.newton(t, &rho, &s) else {
                    break;
                };
                steps += 1;
                inner += 1;
                if -gd / 2.0 <= CENTERING_TOL {
                    break;
                }
                let mut alpha: f64 = 1.0;
                for (r, dr) in rho.iter().zip(&dir) {
                    if *dr < 0.0 {
                        alpha = alpha.min(-STEP_TO_BOUNDARY * r / dr);
                    }
                }
                for (row, sg) in self.rows.iter().zip(&s) {
                    let ds: f64 = row.iter().map(|&(j, a)| a * dir[j]).sum();
                    if ds < 0.0 {
                        alpha = alpha.min(-STEP_TO_BOUNDARY * sg / ds);
                    }
                }
                let ds: Vec<f64> = self
                    .rows
                    .iter()
                    .map(|row| row.iter().map(|&(j, a)| a * dir[j]).sum())
                    .collect();
                let mut accepted = false;
                while alpha > 1e-14 {
                    if let Some(df) = self.barrier_change(t, &rho, &s, &dir, &ds, alpha) {
                        if df <= 0.25 * alpha * gd {
                            rho = rho.iter().zip(&dir).map(|(r, d)| r + alpha * d).collect();
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            if n_con / t <= gap_target {
                converged = true;
                break;
            }
            if steps >= budget {
                break;
            }
            t *= T_GROWTH;
        }
        let s = self.slacks(&rho);
        let lambda: Vec<f64> = s.iter().map(|x| 1.0 / (t * x)).collect();
        let primal = self.energy(&rho);
        let lower_bound = self.dual_bound(&lambda);
        BarrierSolution {
            rho,
            lambda,
            primal,
            lower_bound,
            newton_steps: steps,
            converged,
            t,
        }
    }
}

fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(&b);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let scale = (0..a.nrows()).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = a;
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-12 * scale;
    }
    let x = reg.lu().solve(&b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_constraint_closed_form() {
        // One curve of m unit edges with measure w: rho = 1/m, value w m^(1-p).
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            let m = 4;
            let w = 0.3;
            let prog = Program {
                p,
                mu: vec![w; m],
                rows: vec![(0..m).map(|j| (j, 1.0)).collect()],
                b: vec![1.0],
            };
            let sol = prog.solve(None, 1e-10, 10_000);
            assert!(sol.converged);
            let exact = w * (m as f64).powf(1.0 - p);
            assert!((sol.primal - exact).abs() < 1e-8 * exact.max(1.0), "p={p} {}", sol.primal);
            assert!(sol.lower_bound <= exact * (1.0 + 1e-12));
            assert!(exact - sol.lower_bound < 1e-8);
        }
    }

    #[test]
    fn both_hessian_forms_agree() {
        // Three constraints over two variables exercises the direct form,
        // one constraint over two variables the Woodbury form.
        let wide = Program {
            p: 2.0,
            mu: vec![1.0, 2.0],
            rows: vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(0, 0.5), (1, 0.5)]],
            b: vec![1.0, 1.0, 1.0],
        };
        let sol = wide.solve(None, 1e-10, 10_000);
        assert!((sol.primal - 3.0).abs() < 1e-8);
        let tall = Program {
            p: 2.0,
            mu: vec![1.0, 2.0],
            rows: vec![vec![(0, 1.0), (1, 1.0)]],
            b: vec![1.0],
        };
        // min rho0^2 + 2 rho1^2 with rho0 + rho1 = 1: rho = (2/3, 1/3).
        let sol = tall.solve(None, 1e-10, 10_000);
        assert!((sol.primal - 2.0 / 3.0).abs() < 1e-8);
        assert!((sol.rho[0] - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn linear_program_dual_bound_is_tight() {
        // Two routes: one edge, or two edges in series. The optimum puts
        // all weight on the cheaper edge of the series route.
        let prog = Program {
            p: 1.0,
            mu: vec![1.0031188125545927, 1.3252256133824458, 0.4867942308558734],
            rows: vec![
                vec![(1, 0.9242401126800861)],
                vec![(0, 0.8434450970320295), (2, 1.0348073385026106)],
            ],
            b: vec![1.0, 1.0],
        };
        let exact = 1.3252256133824458 / 0.9242401126800861 + 0.4867942308558734 / 1.0348073385026106;
        for gap in [1e-3, 1e-6, 1e-8] {
            let sol = prog.solve(None, gap, 10_000);
            assert!(sol.converged);
            assert!(sol.lower_bound <= exact + 1e-12 && sol.primal >= exact - 1e-12);
            assert!(sol.primal - sol.lower_bound <= 2.0 * gap * exact, "{gap}: {} {}", sol.primal, sol.lower_bound);
        }
    }
}
