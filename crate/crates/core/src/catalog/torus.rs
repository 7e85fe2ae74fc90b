//! Expanding torus map `(x, y) -> (3x, 3y) mod 1` deformed inside a small disk `W`.
//!
//! Inside `W` the horizontal stretching is damped by a smooth radial bump so
//! that `|Df^{-1}| <= 1 + eta` there while the Jacobian determinant stays
//! above one everywhere. Outside `W` the map is the linear one and
//! `|Df^{-1}| = 1/3`.

use crate::domain::circle_delta;
use crate::error::{LabError, Result};

pub const CENTER: (f64, f64) = (0.3, 0.6);
pub const RADIUS: f64 = 0.15;
pub const SCAN_GRID: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct TorusMap {
    pub eta: f64,
    pub amplitude: f64,
    /// `min |det Df|` found by the construction scan.
    pub sigma: f64,
    /// `max |Df^{-1}|` over `W` found by the construction scan.
    pub max_inv_norm_in_w: f64,
}

/// Bump value and gradient for displacement `(dx, dy)` from the center.
fn bump(dx: f64, dy: f64) -> (f64, f64, f64) {
    let u = (dx * dx + dy * dy) / (RADIUS * RADIUS);
    if u >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let one_minus = 1.0 - u;
    let b = (1.0 - 1.0 / one_minus).exp();
    let db_du = -b / (one_minus * one_minus);
    let scale = 2.0 / (RADIUS * RADIUS);
    (b, db_du * scale * dx, db_du * scale * dy)
}

/// Operator 2-norm of the inverse of a 2×2 matrix, i.e. `1 / sigma_min`.
pub fn inverse_operator_norm(m: [[f64; 2]; 2]) -> f64 {
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs();
    if det == 0.0 {
        return f64::INFINITY;
    }
    let fro2 = m.iter().flatten().map(|v| v * v).sum::<f64>();
    // sigma_max^2 = (fro2 + sqrt(fro2^2 - 4 det^2)) / 2, sigma_min = det / sigma_max
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let smax = (0.5 * (fro2 + disc)).sqrt();
    smax / det
}

impl TorusMap {
    /// Amplitude placing `|Df^{-1}|` at exactly `1 + eta` at the center of `W`.
    pub fn default_amplitude(eta: f64) -> f64 {
        3.0 - 1.0 / (1.0 + eta)
    }

    pub fn new(eta: f64, amplitude: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 2.0) {
            return Err(LabError::InvalidParams(format!("torus: eta = {eta} outside (0, 2)")));
        }
        if !(amplitude >= 0.0 && amplitude < 3.0) {
            return Err(LabError::InvalidParams(format!(
                "torus: amplitude = {amplitude} outside [0, 3)"
            )));
        }
        let mut map = TorusMap { eta, amplitude, sigma: 0.0, max_inv_norm_in_w: 0.0 };
        let (sigma, max_in_w) = map.scan();
        map.sigma = sigma;
        map.max_inv_norm_in_w = max_in_w;
        if !(sigma > 1.0) {
            return Err(LabError::InvalidParams(format!(
                "torus: min |det Df| = {sigma} is not above 1"
            )));
        }
        if max_in_w > (1.0 + eta) * (1.0 + 1e-9) {
            return Err(LabError::InvalidParams(format!(
                "torus: max |Df^-1| on W = {max_in_w} exceeds 1 + eta = {}",
                1.0 + eta
            )));
        }
        Ok(map)
    }

    fn offsets(x: f64, y: f64) -> (f64, f64) {
        (circle_delta(CENTER.0, x, 1.0), circle_delta(CENTER.1, y, 1.0))
    }

    pub fn in_w(x: f64, y: f64) -> bool {
        let (dx, dy) = Self::offsets(x, y);
        dx * dx + dy * dy < RADIUS * RADIUS
    }

    /// Unwrapped image coordinates.
    pub fn eval_raw(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = Self::offsets(x, y);
        let (b, _, _) = bump(dx, dy);
        (3.0 * x - self.amplitude * b * dx, 3.0 * y)
    }

    pub fn tangent(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let (dx, dy) = Self::offsets(x, y);
        let (b, bx, by) = bump(dx, dy);
        [
            [3.0 - self.amplitude * (b + dx * bx), -self.amplitude * dx * by],
            [0.0, 3.0],
        ]
    }

    fn scan(&self) -> (f64, f64) {
        let mut min_det = f64::INFINITY;
        let mut max_in_w: f64 = 0.0;
        for i in 0..SCAN_GRID {
            for j in 0..SCAN_GRID {
                let x = (i as f64 + 0.5) / SCAN_GRID as f64;
                let y = (j as f64 + 0.5) / SCAN_GRID as f64;
                let m = self.tangent(x, y);
                min_det = min_det.min((m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs());
                if Self::in_w(x, y) {
                    max_in_w = max_in_w.max(inverse_operator_norm(m));
                }
            }
        }
        // the center itself is where the damping peaks
        let m = self.tangent(CENTER.0, CENTER.1);
        min_det = min_det.min((m[0][0] * m[1][1]).abs());
        max_in_w = max_in_w.max(inverse_operator_norm(m));
        (min_det, max_in_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_outside_w() {
        let m = TorusMap::new(0.2, TorusMap::default_amplitude(0.2)).unwrap();
        assert_eq!(m.eval_raw(0.9, 0.1), (2.7, 0.30000000000000004));
        assert!((inverse_operator_norm(m.tangent(0.9, 0.1)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn center_hits_the_bound() {
        let m = TorusMap::new(0.2, TorusMap::default_amplitude(0.2)).unwrap();
        let n = inverse_operator_norm(m.tangent(CENTER.0, CENTER.1));
        assert!((n - 1.2).abs() < 1e-12);
        assert!(m.sigma > 1.0);
    }

    #[test]
    fn operator_norm_of_diagonal() {
        assert!((inverse_operator_norm([[2.0, 0.0], [0.0, 4.0]]) - 0.5).abs() < 1e-15);
        assert!(inverse_operator_norm([[1.0, 2.0], [2.0, 4.0]]).is_infinite());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(TorusMap::new(0.0, 1.0).is_err());
        assert!(TorusMap::new(0.2, 3.5).is_err());
    }
}
