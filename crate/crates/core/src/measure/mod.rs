//! Empirical measures, the weak* metric and the estimators built on them.

mod distortion;
mod family;
mod fit;
mod histogram;

use rand::Rng;
use rayon::prelude::*;

use crate::catalog::MapSystem;
use crate::domain::{PhaseDomain, StateVector};
use crate::error::{LabError, Result};
use crate::orbit::{step_unchecked, stream_rng, NoiseKernel, NoiseMode, Walker};

pub use distortion::{c1_bound, delta_one, distortion_diagnostic, DistortionDiagnostic};
pub use family::{weak_star_distance, TestFunctionFamily, DEFAULT_MAX_DEGREE, DEFAULT_MAX_MEMBERS};
pub use fit::{cluster_measures, convex_fit, ConvexFit, MeasureCluster};
pub use histogram::{HistogramMeasure, OccupationCounter};

/// Default bins per coordinate.
pub const DEFAULT_BINS: usize = 128;

/// Occupation counts of `x_0, ..., x_{n-1}` along one random orbit.
pub fn occupation_counts(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    x0: StateVector,
    n: usize,
    bins: usize,
    seed: u64,
    stream: u64,
) -> Result<OccupationCounter> {
    let mut counter = OccupationCounter::new(sys.domain, bins);
    let mut walker = Walker::new(sys, kernel, x0, seed, stream)?;
    counter.deposit(&x0);
    for _ in 1..n {
        let (y, _) = walker.advance()?;
        counter.deposit(&y);
    }
    Ok(counter)
}

/// Occupation histogram of the deterministic orbit `x_0, ..., x_{n-1}`.
pub fn birkhoff_histogram(sys: &MapSystem, x0: StateVector, n: usize, bins: usize) -> Result<HistogramMeasure> {
    let kernel = NoiseKernel::new(NoiseMode::Additive, 0.0, sys.dim())?;
    random_birkhoff_histogram(sys, &kernel, x0, n, bins, 0, 0)
}

/// Occupation histogram of one random orbit.
pub fn random_birkhoff_histogram(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    x0: StateVector,
    n: usize,
    bins: usize,
    seed: u64,
    stream: u64,
) -> Result<HistogramMeasure> {
    if n == 0 {
        return Err(LabError::Empty("Birkhoff histogram of zero steps".into()));
    }
    occupation_counts(sys, kernel, x0, n, bins, seed, stream)?.finish()
}

/// `(1/n) sum_{j=0}^{n-1} (f^j_x)_* theta^N`, estimated from `n_samples`
/// noise sequences (sample `i` on stream `i`).
pub fn pushforward_average(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    x0: StateVector,
    n_time: usize,
    n_samples: usize,
    bins: usize,
    seed: u64,
) -> Result<HistogramMeasure> {
    if n_time == 0 || n_samples == 0 {
        return Err(LabError::Empty("push-forward average needs time and samples".into()));
    }
    let parts = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| occupation_counts(sys, kernel, x0, n_time, bins, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let mut total = OccupationCounter::new(sys.domain, bins);
    for p in &parts {
        total.merge(p);
    }
    total.finish()
}

/// One-dimensional transport distance at grid resolution: the `L^1` norm of
/// the difference of distribution functions, minimized over the base point on circles.
pub fn wasserstein_1d(mu: &HistogramMeasure, nu: &HistogramMeasure) -> Result<f64> {
    mu.check_compatible(nu)?;
    if mu.domain.dim() != 1 {
        return Err(LabError::NotOneDimensional);
    }
    let w = mu.widths()[0];
    let mut acc = 0.0;
    let mut diffs: Vec<f64> = mu
        .masses
        .iter()
        .zip(&nu.masses)
        .map(|(a, b)| {
            acc += a - b;
            acc
        })
        .collect();
    if let PhaseDomain::Circle { .. } = mu.domain {
        let mut sorted = diffs.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = sorted[(sorted.len() - 1) / 2];
        diffs.iter_mut().for_each(|d| *d -= median);
    }
    Ok(diffs.iter().map(|d| d.abs()).sum::<f64>() * w)
}

/// `max_n | int phi_n d mu - E[phi_n(f_t(x))] |` with `x ~ mu`, `t ~ theta_eps`,
/// the expectation estimated from `mc_samples` draws.
pub fn stationarity_residual(
    mu: &HistogramMeasure,
    sys: &MapSystem,
    kernel: &NoiseKernel,
    family: &TestFunctionFamily,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if mu.domain != sys.domain {
        return Err(LabError::DomainMismatch);
    }
    if mc_samples == 0 {
        return Err(LabError::Empty("no Monte Carlo samples".into()));
    }
    kernel.check_against(sys)?;
    let exact = family.moments(mu)?;
    let mut cumulative = Vec::with_capacity(mu.masses.len());
    let mut acc = 0.0;
    for m in &mu.masses {
        acc += m;
        cumulative.push(acc);
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let mut sums = vec![0.0; family.len()];
    for _ in 0..mc_samples {
        let u: f64 = rng.random::<f64>() * acc;
        let cell = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        let bounds = mu.cell_bounds(cell);
        let x = if bounds.len() == 1 {
            StateVector::One(bounds[0].0 + rng.random::<f64>() * (bounds[0].1 - bounds[0].0))
        } else {
            let a = bounds[0].0 + rng.random::<f64>() * (bounds[0].1 - bounds[0].0);
            StateVector::Two(a, bounds[1].0 + rng.random::<f64>() * (bounds[1].1 - bounds[1].0))
        };
        let t = kernel.draw(&mut rng);
        let y = step_unchecked(sys, kernel.mode, t, &sys.domain.normalize(x));
        for (s, v) in sums.iter_mut().zip(family.eval_all(&y)) {
            *s += v;
        }
    }
    Ok(exact
        .iter()
        .zip(&sums)
        .map(|(e, s)| (e - s / mc_samples as f64).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_system, ParamRecord};

    #[test]
    fn wasserstein_examples() {
        let d = PhaseDomain::Interval { lo: 0.0, hi: 1.0 };
        let a = HistogramMeasure::point_mass(d, 10, &StateVector::One(0.15));
        let b = HistogramMeasure::point_mass(d, 10, &StateVector::One(0.65));
        assert!((wasserstein_1d(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        let c = PhaseDomain::unit_circle();
        let p = HistogramMeasure::point_mass(c, 10, &StateVector::One(0.05));
        let q = HistogramMeasure::point_mass(c, 10, &StateVector::One(0.95));
        assert!((wasserstein_1d(&p, &q).unwrap() - 0.1).abs() < 1e-12);
        let cyl = HistogramMeasure::uniform(PhaseDomain::Torus2, 4);
        assert!(matches!(wasserstein_1d(&cyl, &cyl), Err(LabError::NotOneDimensional)));
    }

    #[test]
    fn fixed_point_orbit_fills_one_bin() {
        let mut p = ParamRecord::new();
        p.insert("factor".into(), 3.0);
        let s = build_system("doubling", &p).unwrap();
        let h = birkhoff_histogram(&s, StateVector::One(0.5), 100, 16).unwrap();
        assert_eq!(h.masses.iter().filter(|&&m| m > 0.0).count(), 1);
    }

    #[test]
    fn pushforward_single_time_is_the_start() {
        let s = build_system("fig1", &ParamRecord::new()).unwrap();
        let k = NoiseKernel::for_system(&s, NoiseMode::Rotational, 0.0).unwrap();
        let h = pushforward_average(&s, &k, StateVector::One(0.3), 1, 5, 32, 0).unwrap();
        assert_eq!(h, HistogramMeasure::point_mass(s.domain, 32, &StateVector::One(0.3)));
    }

    #[test]
    fn moving_point_mass_is_not_stationary() {
        let s = build_system("fig1", &ParamRecord::new()).unwrap();
        let k = NoiseKernel::for_system(&s, NoiseMode::Rotational, 0.0).unwrap();
        let fam = TestFunctionFamily::new(s.domain, 128).unwrap();
        let mu = HistogramMeasure::point_mass(s.domain, 128, &StateVector::One(0.3));
        assert!(stationarity_residual(&mu, &s, &k, &fam, 1000, 1).unwrap() > 0.1);
    }
}
