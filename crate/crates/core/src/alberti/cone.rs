use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModspaceError, Result};
use crate::metric::norm;

/// `Cone(w, t) = { v != 0 : v . w >= t |v| }` with unit axis `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    w: Vec<f64>,
    t: f64,
}

impl Cone {
    /// Normalizes `w`; fails on a zero or non-finite axis.
    pub fn new(w: Vec<f64>, t: f64) -> Result<Self> {
        let n = norm(&w);
        if !(n > 0.0) || !n.is_finite() || !t.is_finite() {
            return invalid("cone axis must be a finite nonzero vector");
        }
        Ok(Cone {
            w: w.into_iter().map(|x| x / n).collect(),
            t,
        })
    }

    /// Cone around the `i`-th basis vector of `R^dim`.
    pub fn axis(dim: usize, i: usize, t: f64) -> Result<Self> {
        if i >= dim {
            return invalid("axis index out of range");
        }
        let mut w = vec![0.0; dim];
        w[i] = 1.0;
        Cone::new(w, t)
    }

    /// `R^dim \ {0}`.
    pub fn everything(dim: usize) -> Result<Self> {
        Cone::axis(dim, 0, -1.0)
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        cone_contains(self, v)
    }

    /// Uniform direction within the cone, on its boundary when `boundary`.
    fn sample<R: Rng>(&self, rng: &mut R, boundary: bool) -> Vec<f64> {
        let n = self.dim();
        let half_angle = self.t.clamp(-1.0, 1.0).acos();
        let theta = if boundary {
            half_angle
        } else {
            half_angle * rng.gen::<f64>()
        };
        // Random unit vector orthogonal to w.
        let perp = loop {
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d: f64 = u.iter().zip(&self.w).map(|(a, b)| a * b).sum();
            for (x, w) in u.iter_mut().zip(&self.w) {
                *x -= d * w;
            }
            let m = norm(&u);
            if m > 1e-6 || n == 1 {
                break if n == 1 { vec![0.0] } else { u.into_iter().map(|x| x / m).collect::<Vec<f64>>() };
            }
        };
        let scale = rng.gen_range(0.1..10.0);
        self.w
            .iter()
            .zip(&perp)
            .map(|(w, u)| scale * (theta.cos() * w + theta.sin() * u))
            .collect()
    }
}

pub fn cone_contains(cone: &Cone, v: &[f64]) -> bool {
    if v.len() != cone.w.len() {
        return false;
    }
    let n = norm(v);
    if !(n > 0.0) {
        return false;
    }
    let dot: f64 = v.iter().zip(&cone.w).map(|(a, b)| a * b).sum();
    // Relative slack absorbs rounding in boundary cases such as 45 degrees.
    dot >= cone.t * n - 1e-12 * n
}

/// Result of the randomized independence refuter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceCheck {
    /// `false` only with a dependent witness in hand.
    pub independent: bool,
    pub witness: Option<Vec<Vec<f64>>>,
    pub samples: usize,
}

/// Rank of a set of vectors by Gram-Schmidt with relative tolerance.
fn rank(vectors: &[Vec<f64>]) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let scale = norm(v);
        if scale == 0.0 {
            continue;
        }
        let mut r = v.clone();
        for b in &basis {
            let d: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in r.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let m = norm(&r);
        if m > 1e-9 * scale {
            basis.push(r.into_iter().map(|x| x / m).collect());
        }
    }
    basis.len()
}

/// Randomized search for a linearly dependent selection `v_i in C_i`.
///
/// Each trial draws vectors from the interiors and boundaries of all but
/// one cone, then asks whether the remaining cone meets their span along
/// the basis vectors or random signed combinations. Passing is evidence,
/// not proof, of independence.
pub fn cones_independent(cones: &[Cone], samples: usize, seed: u64) -> Result<IndependenceCheck> {
    let Some(first) = cones.first() else {
        return invalid("no cones given");
    };
    let n = first.dim();
    if cones.iter().any(|c| c.dim() != n) {
        return Err(ModspaceError::DimensionMismatch {
            expected: n,
            found: cones.iter().map(|c| c.dim()).find(|&d| d != n).unwrap_or(n),
        });
    }
    let k = cones.len();
    if k > n {
        return invalid(format!("{k} cones cannot be independent in dimension {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..samples {
        let boundary = trial % 2 == 1;
        let mut pick: Vec<Vec<f64>> = Vec::with_capacity(k);
        for c in cones {
            let on_boundary = boundary && rng.gen::<bool>();
            pick.push(c.sample(&mut rng, on_boundary));
        }
        if rank(&pick) < k {
            return Ok(IndependenceCheck {
                independent: false,
                witness: Some(pick),
                samples: trial + 1,
            });
        }
        if k < 2 {
            continue;
        }
        let last = trial % k;
        let others: Vec<usize> = (0..k).filter(|&i| i != last).collect();
        let mut probes: Vec<Vec<f64>> = Vec::new();
        for &i in &others {
            probes.push(pick[i].clone());
            probes.push(pick[i].iter().map(|x| -x).collect());
        }
        for _ in 0..4 {
            let mut v = vec![0.0; n];
            for &i in &others {
                let c: f64 = rng.gen_range(-1.0..1.0);
                for (x, y) in v.iter_mut().zip(&pick[i]) {
                    *x += c * y;
                }
            }
            probes.push(v);
        }
        if let Some(v) = probes.into_iter().find(|v| cones[last].contains(v)) {
            pick[last] = v;
            return Ok(IndependenceCheck {
                independent: false,
                witness: Some(pick),
                samples: trial + 1,
            });
        }
    }
    Ok(IndependenceCheck {
        independent: true,
        witness: None,
        samples,
    })
}
