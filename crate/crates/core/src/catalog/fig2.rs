//! Interval map with two trapping regions.
//!
//! On `[-2, 2]` the map is `q_a(x) = a - x^2`; on `[-7, -3]` it is the
//! conjugated copy `p_a(x) = (x + 5)^2 - 5 - a`. The gap `[-3, -2]` is filled
//! with a C² piece (quintic Hermite matching value, slope and curvature at both
//! ends, plus two polynomial bumps) that rises into the right trapping interval
//! and dips into the left one, so the gap carries no attractor of its own.

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Map {
    pub a: f64,
    /// Padding of the right trapping interval above `q_a(0) = a`.
    pub pad: f64,
    hermite: [f64; 6],
    bump_up: f64,
    bump_down: f64,
    /// Critical points, sorted.
    pub critical_points: Vec<f64>,
    /// Left trapping interval, around the support of the `p_a` dynamics.
    pub left_trap: (f64, f64),
    /// Right trapping interval, around the support of the `q_a` dynamics.
    pub right_trap: (f64, f64),
    /// Smallest distance from an image to the boundary of the region it must stay in.
    pub trapping_margin: f64,
}

pub const DOMAIN: (f64, f64) = (-7.0, 2.0);
const BUMP_UP_CENTER: f64 = 0.3;
const BUMP_DOWN_CENTER: f64 = 0.7;
const BUMP_RADIUS: f64 = 0.3;

fn bump(u: f64, center: f64) -> (f64, f64, f64) {
    let v = (u - center) / BUMP_RADIUS;
    if v.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let w = 1.0 - v * v;
    let g = w * w * w;
    let g1 = -6.0 * v * w * w;
    let g2 = -6.0 * w * w + 24.0 * v * v * w;
    (g, g1 / BUMP_RADIUS, g2 / (BUMP_RADIUS * BUMP_RADIUS))
}

/// Quintic on `[0, 1]` matching value, first and second derivative at both ends.
fn quintic_hermite(start: [f64; 3], end: [f64; 3]) -> [f64; 6] {
    let c0 = start[0];
    let c1 = start[1];
    let c2 = start[2] / 2.0;
    let r0 = end[0] - (c0 + c1 + c2);
    let r1 = end[1] - (c1 + 2.0 * c2);
    let r2 = end[2] - 2.0 * c2;
    let c3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
    let c4 = -15.0 * r0 + 7.0 * r1 - r2;
    let c5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;
    [c0, c1, c2, c3, c4, c5]
}

fn poly(c: &[f64; 6], u: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for k in (0..6).rev() {
        d = d * u + v;
        v = v * u + c[k];
    }
    (v, d)
}

impl Fig2Map {
    pub fn new(a: f64, pad: f64) -> Result<Self> {
        if !(a > 1.0 && a < 2.0) {
            return Err(LabError::InvalidParams(format!("fig2: a = {a} outside (1, 2)")));
        }
        if !(pad > 0.0) {
            return Err(LabError::InvalidParams(format!("fig2: pad = {pad} must be positive")));
        }
        // q_a(a + pad) must stay above the lower end, which forces the lower padding.
        let low_pad = 2.0 * (2.0 * a * pad + pad * pad);
        let right_trap = (a - a * a - low_pad, a + pad);
        if right_trap.0 <= -2.0 || -right_trap.0 >= right_trap.1 {
            return Err(LabError::InvalidParams(format!(
                "fig2: pad = {pad} too large for a = {a}"
            )));
        }
        let left_trap = (-5.0 - right_trap.1, -5.0 - right_trap.0);

        let hermite = quintic_hermite([-1.0 - a, 4.0, 2.0], [a - 4.0, 4.0, -2.0]);
        let target_hi = 0.5 * (right_trap.0 + right_trap.1);
        let target_lo = 0.5 * (left_trap.0 + left_trap.1);
        let bump_up = target_hi - poly(&hermite, BUMP_UP_CENTER).0;
        let bump_down = poly(&hermite, BUMP_DOWN_CENTER).0 - target_lo;

        let mut map = Fig2Map {
            a,
            pad,
            hermite,
            bump_up,
            bump_down,
            critical_points: Vec::new(),
            left_trap,
            right_trap,
            trapping_margin: 0.0,
        };
        map.critical_points = map.locate_critical_points();
        map.trapping_margin = map.measure_margin();
        if !(map.trapping_margin > 0.0) {
            return Err(LabError::InvalidParams(format!(
                "fig2: no positive trapping margin for a = {a}, pad = {pad}"
            )));
        }
        Ok(map)
    }

    /// Value and derivative at `x`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        if x >= -2.0 {
            (self.a - x * x, -2.0 * x)
        } else if x <= -3.0 {
            let y = x + 5.0;
            (y * y - 5.0 - self.a, 2.0 * y)
        } else {
            let u = x + 3.0;
            let (h, dh) = poly(&self.hermite, u);
            let (w1, dw1, _) = bump(u, BUMP_UP_CENTER);
            let (w2, dw2, _) = bump(u, BUMP_DOWN_CENTER);
            (
                h + self.bump_up * w1 - self.bump_down * w2,
                dh + self.bump_up * dw1 - self.bump_down * dw2,
            )
        }
    }

    #[cfg(test)]
    /// Second derivative of the gap piece at `u = x + 3` in `[0, 1]`.
    fn gap_second_derivative(&self, u: f64) -> f64 {
        let c = &self.hermite;
        let h2 = 2.0 * c[2] + 6.0 * c[3] * u + 12.0 * c[4] * u * u + 20.0 * c[5] * u * u * u;
        let (_, _, w1) = bump(u, BUMP_UP_CENTER);
        let (_, _, w2) = bump(u, BUMP_DOWN_CENTER);
        h2 + self.bump_up * w1 - self.bump_down * w2
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).1
    }

    fn locate_critical_points(&self) -> Vec<f64> {
        let mut pts = vec![-5.0, 0.0];
        let n = 4000;
        let grid = |i: usize| -3.0 + i as f64 / n as f64;
        for i in 0..n {
            let (mut lo, mut hi) = (grid(i), grid(i + 1));
            let (dlo, dhi) = (self.derivative(lo), self.derivative(hi));
            if dlo == 0.0 {
                pts.push(lo);
                continue;
            }
            if dlo.signum() == dhi.signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.derivative(mid).signum() == dlo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            pts.push(0.5 * (lo + hi));
        }
        pts.sort_by(|a, b| a.total_cmp(b));
        pts
    }

    /// Min/max of the map over `[lo, hi]`, from a dense scan plus interior critical points.
    pub fn image_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let n = 20_000;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut visit = |x: f64| {
            let y = self.eval(x);
            min = min.min(y);
            max = max.max(y);
        };
        for i in 0..=n {
            visit(lo + (hi - lo) * i as f64 / n as f64);
        }
        for &c in &self.critical_points {
            if c > lo && c < hi {
                visit(c);
            }
        }
        (min, max)
    }

    fn measure_margin(&self) -> f64 {
        [DOMAIN, self.left_trap, self.right_trap]
            .iter()
            .map(|&(lo, hi)| {
                let (min, max) = self.image_range(lo, hi);
                (hi - max).min(min - lo)
            })
            .fold(f64::INFINITY, f64::min)
    }
}
