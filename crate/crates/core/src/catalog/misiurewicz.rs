//! Pre-periodic (Misiurewicz) parameters of the quadratic family `Q_a(x) = a - x^2`.

use crate::error::{LabError, Result};

/// Result of the parameter search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisiurewiczParam {
    /// The parameter `a`.
    pub a: f64,
    /// Number of iterates after which the critical orbit lands on the fixed point.
    pub k: usize,
    /// `|Q_a^k(0) - p(a)|` at the returned parameter.
    pub residual: f64,
}

/// Fallback used when no root is found for small `k`.
pub const FALLBACK_A0: f64 = 1.543_689_012_692_076;

const LO: f64 = 1.0 + 1e-6;
const HI: f64 = 2.0 - 1e-6;
const SCAN: usize = 20_000;

/// `k`-th iterate of the critical point under `Q_a`.
pub fn critical_iterate(a: f64, k: usize) -> f64 {
    (0..k).fold(0.0, |x, _| a - x * x)
}

/// The orientation-reversing repelling fixed point `(-1 + sqrt(1 + 4a)) / 2`.
pub fn reversing_fixed_point(a: f64) -> f64 {
    (-1.0 + (1.0 + 4.0 * a).sqrt()) / 2.0
}

/// The orientation-preserving fixed point `(-1 - sqrt(1 + 4a)) / 2`, the left
/// end of the dynamical interval. The critical orbit only reaches it at `a = 2`.
pub fn preserving_fixed_point(a: f64) -> f64 {
    (-1.0 - (1.0 + 4.0 * a).sqrt()) / 2.0
}

fn landing_gap(a: f64, k: usize) -> f64 {
    critical_iterate(a, k) - reversing_fixed_point(a)
}

/// Find `a` in `(1, 2)` such that the critical point lands on the repelling
/// fixed point after `k` steps, for the smallest `k <= k_max` that admits a
/// sign change of `Q_a^k(0) - p(a)`.
///
/// The sign change is located on a uniform scan and then bisected down to
/// the resolution of `f64`, so the residual is well below `tol`.
pub fn find_misiurewicz_a0(k_max: usize, tol: f64) -> Result<MisiurewiczParam> {
    if k_max < 2 {
        return Err(LabError::InvalidParams(format!("k_max = {k_max} < 2")));
    }
    if !(tol > 0.0) {
        return Err(LabError::InvalidParams(format!("tol = {tol} must be positive")));
    }
    for k in 2..=k_max {
        let mut prev_a = LO;
        let mut prev_g = landing_gap(prev_a, k);
        for i in 1..=SCAN {
            let a = LO + (HI - LO) * i as f64 / SCAN as f64;
            let g = landing_gap(a, k);
            if prev_g == 0.0 {
                return finish(prev_a, k, tol);
            }
            if prev_g.signum() != g.signum() {
                let (mut lo, mut hi, glo) = (prev_a, a, prev_g);
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let gm = landing_gap(mid, k);
                    if gm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if gm.signum() == glo.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let a = if landing_gap(lo, k).abs() <= landing_gap(hi, k).abs() { lo } else { hi };
                return finish(a, k, tol);
            }
            prev_a = a;
            prev_g = g;
        }
    }
    Err(LabError::NoRootFound(k_max))
}

fn finish(a: f64, k: usize, tol: f64) -> Result<MisiurewiczParam> {
    let residual = landing_gap(a, k).abs();
    if residual < tol {
        Ok(MisiurewiczParam { a, k, residual })
    } else {
        Err(LabError::NoRootFound(k))
    }
}

/// The default parameter: the search result, or [`FALLBACK_A0`].
pub fn default_a0() -> f64 {
    find_misiurewicz_a0(8, 1e-12).map(|m| m.a).unwrap_or(FALLBACK_A0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_anchor_at_two() {
        assert_eq!(critical_iterate(2.0, 1), 2.0);
        assert_eq!(critical_iterate(2.0, 2), -2.0);
        assert_eq!(preserving_fixed_point(2.0), -2.0);
    }

    #[test]
    fn root_is_pre_periodic() {
        let m = find_misiurewicz_a0(8, 1e-12).unwrap();
        assert!(m.a > 1.0 && m.a < 2.0);
        assert_eq!(m.k, 3);
        let p = reversing_fixed_point(m.a);
        assert!((critical_iterate(m.a, m.k) - p).abs() < 1e-12);
        for extra in 1..=5 {
            assert!((critical_iterate(m.a, m.k + extra) - p).abs() < 1e-11);
        }
        assert!((m.a - FALLBACK_A0).abs() < 1e-12);
    }

    #[test]
    fn left_endpoint_is_never_reached_inside_the_open_interval() {
        // Q^k(0) stays in [a - a^2, a], strictly right of the preserving fixed point.
        for i in 1..100 {
            let a = 1.0 + i as f64 / 100.0;
            for k in 2..8 {
                assert!(critical_iterate(a, k) > preserving_fixed_point(a));
            }
        }
    }

    #[test]
    fn rejects_small_k_max() {
        assert!(find_misiurewicz_a0(1, 1e-12).is_err());
        assert!(matches!(find_misiurewicz_a0(2, 1e-12), Err(LabError::NoRootFound(2))));
    }
}
