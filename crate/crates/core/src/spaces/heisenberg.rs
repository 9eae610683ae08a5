use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point of the Heisenberg group, `R^3` with the group law
/// `(x1,y1,z1)(x2,y2,z2) = (x1+x2, y1+y2, z1+z2 + (x1 y2 - y1 x2)/2)`.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HeisenbergPoint {
    pub const IDENTITY: HeisenbergPoint = HeisenbergPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        HeisenbergPoint { x, y, z }
    }

    pub fn mul(&self, q: &HeisenbergPoint) -> HeisenbergPoint {
        HeisenbergPoint {
            x: self.x + q.x,
            y: self.y + q.y,
            z: self.z + q.z + 0.5 * (self.x * q.y - self.y * q.x),
        }
    }

    pub fn inv(&self) -> HeisenbergPoint {
        HeisenbergPoint {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Koranyi norm `((x^2 + y^2)^2 + 16 z^2)^(1/4)`.
    pub fn koranyi_norm(&self) -> f64 {
        let r2 = self.x * self.x + self.y * self.y;
        (r2 * r2 + 16.0 * self.z * self.z).sqrt().sqrt()
    }

    /// Left-invariant Koranyi distance `|p^-1 q|`.
    pub fn dist(&self, q: &HeisenbergPoint) -> f64 {
        self.inv().mul(q).koranyi_norm()
    }

    /// Anisotropic dilation `(t x, t y, t^2 z)`, a group automorphism that
    /// scales the Koranyi distance by `t`.
    pub fn dilate(&self, t: f64) -> HeisenbergPoint {
        HeisenbergPoint {
            x: t * self.x,
            y: t * self.y,
            z: t * t * self.z,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.x, self.y, self.z]
    }

    pub fn max_abs_diff(&self, q: &HeisenbergPoint) -> f64 {
        (self.x - q.x)
            .abs()
            .max((self.y - q.y).abs())
            .max((self.z - q.z).abs())
    }
}

pub fn h_mul(p: &HeisenbergPoint, q: &HeisenbergPoint) -> HeisenbergPoint {
    p.mul(q)
}

pub fn h_inv(p: &HeisenbergPoint) -> HeisenbergPoint {
    p.inv()
}

pub fn koranyi_norm(p: &HeisenbergPoint) -> f64 {
    p.koranyi_norm()
}

pub fn h_dist(p: &HeisenbergPoint, q: &HeisenbergPoint) -> f64 {
    p.dist(q)
}

pub fn h_dilate(t: f64, p: &HeisenbergPoint) -> HeisenbergPoint {
    p.dilate(t)
}

/// Regular `(n+1)^3` lattice on `[-s, s]^3` with trapezoidal cell weights,
/// so that the weights sum to the Lebesgue volume `(2s)^3`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeisenbergLattice {
    pub n: usize,
    pub s: f64,
    pub points: Vec<HeisenbergPoint>,
    pub weights: Vec<f64>,
}

pub fn heisenberg_lattice(n: usize, s: f64) -> Result<HeisenbergLattice> {
    if n < 2 {
        return invalid("lattice resolution must be at least 2");
    }
    if !(s > 0.0) {
        return invalid("lattice half-width must be positive");
    }
    let h = 2.0 * s / n as f64;
    let coord = |i: usize| -s + i as f64 * h;
    let axis_weight = |i: usize| if i == 0 || i == n { 0.5 * h } else { h };
    let mut points = Vec::with_capacity((n + 1).pow(3));
    let mut weights = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                points.push(HeisenbergPoint::new(coord(i), coord(j), coord(k)));
                weights.push(axis_weight(i) * axis_weight(j) * axis_weight(k));
            }
        }
    }
    Ok(HeisenbergLattice {
        n,
        s,
        points,
        weights,
    })
}

impl HeisenbergLattice {
    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Lattice estimate of the Lebesgue measure of the open Koranyi ball.
    pub fn ball_measure(&self, center: &HeisenbergPoint, r: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| center.dist(p) < r)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Exact Lebesgue volume of the Koranyi unit ball, `pi^2 / 8`; balls of
/// radius `r` have volume `pi^2 r^4 / 8`.
pub const KORANYI_UNIT_BALL_VOLUME: f64 = std::f64::consts::PI * std::f64::consts::PI / 8.0;

#[cfg(test)]
mod tests {
    use super::*;

    const O: HeisenbergPoint = HeisenbergPoint::IDENTITY;

    #[test]
    fn group_law_examples() {
        let p = HeisenbergPoint::new(1.5, -2.0, 0.25);
        assert_eq!(h_mul(&p, &O), p);
        let e1 = HeisenbergPoint::new(1.0, 0.0, 0.0);
        let e2 = HeisenbergPoint::new(0.0, 1.0, 0.0);
        assert_eq!(h_mul(&e1, &e2), HeisenbergPoint::new(1.0, 1.0, 0.5));
        assert_eq!(h_mul(&e2, &e1), HeisenbergPoint::new(1.0, 1.0, -0.5));
    }

    #[test]
    fn inverses() {
        assert_eq!(h_inv(&O), O);
        let p = HeisenbergPoint::new(1.0, 2.0, 3.0);
        assert_eq!(h_inv(&p), HeisenbergPoint::new(-1.0, -2.0, -3.0));
        assert_eq!(h_mul(&p, &h_inv(&p)), O);
    }

    #[test]
    fn koranyi_examples() {
        assert_eq!(koranyi_norm(&HeisenbergPoint::new(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(koranyi_norm(&HeisenbergPoint::new(0.0, 0.0, 1.0)), 2.0);
        assert_eq!(h_dilate(1.0, &HeisenbergPoint::new(0.3, 0.2, 0.1)), HeisenbergPoint::new(0.3, 0.2, 0.1));
        assert_eq!(
            h_dilate(2.0, &HeisenbergPoint::new(1.0, 1.0, 1.0)),
            HeisenbergPoint::new(2.0, 2.0, 4.0)
        );
    }

    #[test]
    fn lattice_counts_and_volume() {
        let lat = heisenberg_lattice(4, 1.0).unwrap();
        assert_eq!(lat.points.len(), 125);
        assert!((lat.total_measure() - 8.0).abs() < 1e-12);
        let lat = heisenberg_lattice(7, 0.3).unwrap();
        assert!((lat.total_measure() - 0.6f64.powi(3)).abs() < 1e-14);
        assert!(heisenberg_lattice(1, 1.0).is_err());
    }

    #[test]
    fn ball_volume_regularity_on_resolved_scales() {
        // The z-extent of B(0, r) is r^2 / 2, so balls are only resolved by
        // the lattice once r^2 / 2 spans several z-spacings.
        let lat = heisenberg_lattice(40, 1.0).unwrap();
        let ratios: Vec<f64> = [0.35, 0.4, 0.45, 0.5]
            .iter()
            .map(|&r| lat.ball_measure(&O, r) / (r * r * r * r))
            .collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 4.0, "{ratios:?}");
        for q in ratios {
            assert!(q / KORANYI_UNIT_BALL_VOLUME < 2.0 && q / KORANYI_UNIT_BALL_VOLUME > 0.5);
        }
    }
}
