//! Bounded-distortion check at hyperbolic times for one-dimensional systems.
//!
//! Points of the `delta_1`-ball around `x_n` are pulled back along the
//! trace's own noise sequence, one inverse branch at a time. Each preimage is
//! located by bisection on the monotone branch through `x_{k-1}` down to the
//! resolution of `f64`.

use rand::Rng;

use crate::catalog::{MapSystem, SmoothnessConstants, SystemKind};
use crate::domain::{PhaseDomain, StateVector};
use crate::error::{LabError, Result};
use crate::hyperbolic::{hyperbolic_times_critical, hyperbolic_times_diffeo, HypParams};
use crate::orbit::{step_unchecked, stream_rng, NoiseKernel, OrbitTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionDiagnostic {
    pub n: usize,
    pub delta1: f64,
    /// `exp(2 B r / (1 - r))` with `r = alpha^(1/2 - b beta)`.
    pub c1_bound: f64,
    /// Largest `|(f^n)'(y)| / |(f^n)'(z)|` over sampled pairs.
    pub observed_max_ratio: f64,
    /// Largest `dist(y_{n-k}, z_{n-k}) / (alpha^{k/2} dist(y_n, z_n))` over pairs and `1 <= k <= n`.
    pub max_contraction_ratio: f64,
    pub pairs: usize,
}

/// `C_1 = exp(2 B r / (1 - r))` with `r = alpha^(1/2 - b beta)`.
pub fn c1_bound(constants: &SmoothnessConstants, alpha: f64) -> f64 {
    let r = alpha.powf(0.5 - constants.b_exponent * constants.beta);
    (2.0 * constants.big_b * r / (1.0 - r)).exp()
}

/// Half of the largest radius allowed by `4 delta_1 < min(delta, delta^beta |log alpha|)`
/// and `2 B delta_1 delta^-beta < |log alpha| / 2`.
pub fn delta_one(hp: &HypParams, constants: &SmoothnessConstants) -> f64 {
    let la = hp.alpha.ln().abs();
    let db = hp.delta.powf(constants.beta);
    let first = hp.delta.min(db * la) / 4.0;
    let second = 0.5 * la * db / (2.0 * constants.big_b);
    0.5 * first.min(second)
}

fn branch_radius(sys: &MapSystem, x: f64) -> f64 {
    let r = match &sys.kind {
        SystemKind::Doubling { factor } => 0.5 / *factor as f64,
        _ => sys.critical_distance(&StateVector::One(x)).unwrap_or(f64::INFINITY),
    };
    match sys.domain {
        PhaseDomain::Interval { lo, hi } => r.min(x - lo).min(hi - x),
        _ => r,
    }
}

/// The preimage of `target` under `f_t` on the monotone branch through `prev`,
/// where `f_t(prev) = next`.
fn preimage(sys: &MapSystem, kernel: &NoiseKernel, t: [f64; 2], prev: f64, next: f64, target: f64) -> Result<f64> {
    let dom = &sys.domain;
    let v = dom.displacement(&StateVector::One(next), &StateVector::One(target))[0];
    if v == 0.0 {
        return Ok(prev);
    }
    let slope = sys.tangent(&StateVector::One(prev))[0][0];
    let dir = v.signum() * slope.signum();
    let radius = 0.999 * branch_radius(sys, prev);
    let point = |r: f64| dom.normalize(StateVector::One(prev + dir * r)).first();
    let phi = |r: f64| {
        let y = step_unchecked(sys, kernel.mode, t, &StateVector::One(point(r)));
        v.signum() * dom.displacement(&StateVector::One(next), &y)[0]
    };
    let goal = v.abs();
    let mut hi = (2.0 * goal / slope.abs()).min(radius);
    while phi(hi) < goal {
        if hi >= radius {
            return Err(LabError::BranchNotFound(format!("no preimage of {target} near {prev}")));
        }
        hi = (2.0 * hi).min(radius);
    }
    let mut lo = 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = if goal - phi(lo) <= phi(hi) - goal { lo } else { hi };
    Ok(point(r))
}

/// Backward orbit `y_0, ..., y_n` of a point near `x_n`.
fn pull_back(sys: &MapSystem, kernel: &NoiseKernel, trace: &OrbitTrace, n: usize, y_n: f64) -> Result<Vec<f64>> {
    let mut ys = vec![0.0; n + 1];
    ys[n] = y_n;
    for k in (1..=n).rev() {
        let prev = trace.states[k - 1].first();
        let next = trace.states[k].first();
        ys[k - 1] = preimage(sys, kernel, trace.noise.entries[k - 1], prev, next, ys[k])?;
    }
    Ok(ys)
}

/// Distortion and backward contraction on the `delta_1` neighborhood of a hyperbolic time `n`.
pub fn distortion_diagnostic(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    hp: &HypParams,
    trace: &OrbitTrace,
    n: usize,
    pair_count: usize,
    seed: u64,
) -> Result<DistortionDiagnostic> {
    if sys.dim() != 1 {
        return Err(LabError::NotOneDimensional);
    }
    let times = if sys.has_critical_set() {
        hyperbolic_times_critical(trace, hp)?.times
    } else {
        hyperbolic_times_diffeo(trace, hp.alpha).times
    };
    if times.binary_search(&n).is_err() {
        return Err(LabError::NotHyperbolicTime(n));
    }
    let delta1 = delta_one(hp, &sys.constants);
    let dom = sys.domain;
    let x_n = trace.states[n].first();
    let mut rng = stream_rng(seed, n as u64);
    let mut sample = || -> f64 {
        loop {
            let y = dom.normalize(StateVector::One(x_n + delta1 * (2.0 * rng.random::<f64>() - 1.0)));
            if dom.contains(&y) {
                return y.first();
            }
        }
    };
    let log_derivative = |ys: &[f64]| -> f64 {
        ys[..n].iter().map(|&y| sys.tangent(&StateVector::One(y))[0][0].abs().ln()).sum()
    };
    let dist = |a: f64, b: f64| dom.distance(&StateVector::One(a), &StateVector::One(b));
    let mut worst_ratio = 1.0f64;
    let mut worst_contraction = 0.0f64;
    for _ in 0..pair_count {
        let (y, z) = (sample(), sample());
        let ys = pull_back(sys, kernel, trace, n, y)?;
        let zs = pull_back(sys, kernel, trace, n, z)?;
        let log_ratio = log_derivative(&ys) - log_derivative(&zs);
        worst_ratio = worst_ratio.max(log_ratio.abs().exp());
        let top = dist(y, z);
        if top > 0.0 {
            for k in 1..=n {
                let bound = hp.alpha.powf(k as f64 / 2.0) * top;
                worst_contraction = worst_contraction.max(dist(ys[n - k], zs[n - k]) / bound);
            }
        }
    }
    Ok(DistortionDiagnostic {
        n,
        delta1,
        c1_bound: c1_bound(&sys.constants, hp.alpha),
        observed_max_ratio: worst_ratio,
        max_contraction_ratio: worst_contraction,
        pairs: pair_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_system, ParamRecord};
    use crate::orbit::{random_orbit, NoiseMode};

    #[test]
    fn affine_map_has_no_distortion() {
        let mut p = ParamRecord::new();
        p.insert("factor".into(), 2.0);
        let s = build_system("doubling", &p).unwrap();
        let k = NoiseKernel::for_system(&s, NoiseMode::Additive, 0.05).unwrap();
        let hp = HypParams::new(0.6, 0.1, 0.25).unwrap();
        let tr = random_orbit(&s, &k, StateVector::One(0.123), 8, None, 3, 0).unwrap();
        let d = distortion_diagnostic(&s, &k, &hp, &tr, 8, 20, 1).unwrap();
        assert_eq!(d.observed_max_ratio, 1.0);
        assert!(d.max_contraction_ratio <= 1.0);
    }

    #[test]
    fn rejects_non_hyperbolic_times_and_surfaces() {
        let s = build_system("fig1", &ParamRecord::new()).unwrap();
        let k = NoiseKernel::for_system(&s, NoiseMode::Rotational, 0.0).unwrap();
        let hp = HypParams::new(0.01, 0.1, 0.25).unwrap();
        let tr = random_orbit(&s, &k, StateVector::One(0.3), 5, Some(0.1), 0, 0).unwrap();
        assert!(matches!(
            distortion_diagnostic(&s, &k, &hp, &tr, 5, 4, 0),
            Err(LabError::NotHyperbolicTime(5))
        ));
        let t = build_system("torus", &ParamRecord::new()).unwrap();
        let kt = NoiseKernel::for_system(&t, NoiseMode::Additive, 0.0).unwrap();
        let tt = random_orbit(&t, &kt, StateVector::Two(0.1, 0.2), 3, None, 0, 0).unwrap();
        assert!(matches!(
            distortion_diagnostic(&t, &kt, &hp, &tt, 1, 4, 0),
            Err(LabError::NotOneDimensional)
        ));
    }

    #[test]
    fn bound_formula() {
        let c = SmoothnessConstants::new(4.0, 1.0, 0.25).unwrap();
        let r = 0.5f64.powf(0.25);
        assert!((c1_bound(&c, 0.5) - (8.0 * r / (1.0 - r)).exp()).abs() < 1e-6);
    }
}
