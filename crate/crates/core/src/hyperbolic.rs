//! Pliss selection, hyperbolic-time detection and first-hyperbolic-time tails.
//!
//! Both detectors are single left-to-right scans. For the expansion
//! condition, `n` is a hyperbolic time iff the prefix sum
//! `S_n = sum_{j<n} (-log|Df(x_j)^{-1}| + log alpha)` is a running maximum
//! (`S_n >= S_m` for every `m < n`, with `S_0 = 0`). For the recurrence
//! condition, with `D_j = log dist_delta(x_j)` and `c = b log alpha`, `n` is
//! admissible iff `min_{j<n} (D_j + c j) >= c n`.

use rayon::prelude::*;

use crate::catalog::MapSystem;
use crate::domain::StateVector;
use crate::error::{LabError, Result};
use crate::orbit::{NoiseKernel, OrbitTrace, Walker};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlissParams {
    pub c1: f64,
    pub c2: f64,
    pub h: f64,
}

impl PlissParams {
    pub fn new(c1: f64, c2: f64, h: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > c1 && h >= c2) {
            return Err(LabError::InvalidParams(format!(
                "Pliss parameters need H >= c2 > c1 > 0, got c1 = {c1}, c2 = {c2}, H = {h}"
            )));
        }
        Ok(PlissParams { c1, c2, h })
    }

    /// `zeta = (c2 - c1) / (H - c1)`.
    pub fn zeta(&self) -> f64 {
        (self.c2 - self.c1) / (self.h - self.c1)
    }
}

/// Whether `pliss_select` requires `a_j <= H` and `sum a_j >= c2 N`, which guarantee more than `zeta N` selected indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlissMode {
    Guaranteed,
    Unguaranteed,
}

/// The maximal Pliss set `{i : sum_{j=n+1..i} a_j >= c1 (i - n) for all 0 <= n < i}`,
/// as 1-based indices.
pub fn pliss_select(a: &[f64], p: &PlissParams, mode: PlissMode) -> Result<Vec<usize>> {
    if mode == PlissMode::Guaranteed {
        let total: f64 = a.iter().sum();
        if total < p.c2 * a.len() as f64 {
            return Err(LabError::HypothesisViolated(format!(
                "sum of the sequence {total} is below c2 N = {}",
                p.c2 * a.len() as f64
            )));
        }
        if let Some(j) = a.iter().position(|&v| v > p.h) {
            return Err(LabError::HypothesisViolated(format!(
                "entry {} = {} exceeds H = {}",
                j + 1,
                a[j],
                p.h
            )));
        }
    }
    let mut out = Vec::new();
    let mut prefix = 0.0;
    let mut running_max = 0.0f64;
    for (i, &v) in a.iter().enumerate() {
        prefix += v - p.c1;
        if prefix >= running_max {
            out.push(i + 1);
        }
        running_max = running_max.max(prefix);
    }
    Ok(out)
}

/// Parameters of `(alpha, delta)`-hyperbolic times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypParams {
    pub alpha: f64,
    pub delta: f64,
    pub b_exponent: f64,
}

impl HypParams {
    pub fn new(alpha: f64, delta: f64, b_exponent: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || !(delta > 0.0) || !(b_exponent > 0.0) {
            return Err(LabError::InvalidParams(format!(
                "hyperbolic-time parameters alpha = {alpha}, delta = {delta}, b = {b_exponent} out of range"
            )));
        }
        Ok(HypParams { alpha, delta, b_exponent })
    }

    /// The expansion rate `alpha = exp(-c / 5)` used for a non-uniform expansion constant `c`.
    pub fn alpha_from_expansion(c: f64) -> f64 {
        (-c / 5.0).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperbolicRecord {
    pub times: Vec<usize>,
    pub first: Option<usize>,
}

impl HyperbolicRecord {
    fn from_times(times: Vec<usize>) -> Self {
        let first = times.first().copied();
        HyperbolicRecord { times, first }
    }
}

/// Online detector: feed `log|Df(x_j)^{-1}|` (and `log dist_delta(x_j)`) for
/// `j = 0, 1, ...`; after feeding index `n - 1` it reports whether `n` is a
/// hyperbolic time.
#[derive(Debug, Clone)]
pub struct HypDetector {
    log_alpha: f64,
    rec_rate: f64,
    prefix: f64,
    running_max: f64,
    rec_min: f64,
    n: usize,
}

impl HypDetector {
    /// Detector for the expansion condition only (`b = 0` disables recurrence).
    pub fn new(alpha: f64, b_exponent: f64) -> Self {
        HypDetector {
            log_alpha: alpha.ln(),
            rec_rate: b_exponent * alpha.ln(),
            prefix: 0.0,
            running_max: 0.0,
            rec_min: f64::INFINITY,
            n: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, log_inv_norm: f64, log_trunc_dist: f64) -> bool {
        let j = self.n as f64;
        self.n += 1;
        self.prefix += -log_inv_norm + self.log_alpha;
        let expansion = self.prefix >= self.running_max;
        self.running_max = self.running_max.max(self.prefix);
        self.rec_min = self.rec_min.min(log_trunc_dist + self.rec_rate * j);
        expansion && self.rec_min >= self.rec_rate * self.n as f64
    }
}

/// Times `n` with `sum_{j=n-k}^{n-1} log|Df(x_j)^{-1}| <= k log alpha` for all `1 <= k <= n`.
pub fn hyperbolic_times_diffeo(trace: &OrbitTrace, alpha: f64) -> HyperbolicRecord {
    let mut det = HypDetector::new(alpha, 0.0);
    let times = trace
        .log_inv_norms
        .iter()
        .enumerate()
        .filter_map(|(j, &l)| det.push(l, 0.0).then_some(j + 1))
        .collect();
    HyperbolicRecord::from_times(times)
}

/// Times satisfying both the expansion and the recurrence conditions.
pub fn hyperbolic_times_critical(trace: &OrbitTrace, hp: &HypParams) -> Result<HyperbolicRecord> {
    let dists = match (&trace.log_trunc_dists, trace.delta) {
        (Some(d), Some(delta)) if delta == hp.delta => d,
        (_, delta) => return Err(LabError::DeltaMismatch { trace: delta, requested: hp.delta }),
    };
    let mut det = HypDetector::new(hp.alpha, hp.b_exponent);
    let times = trace
        .log_inv_norms
        .iter()
        .zip(dists)
        .enumerate()
        .filter_map(|(j, (&l, &d))| det.push(l, d).then_some(j + 1))
        .collect();
    Ok(HyperbolicRecord::from_times(times))
}

/// The first hyperbolic time, or `None` when censored by the trace length.
pub fn first_hyperbolic_time(trace: &OrbitTrace, hp: &HypParams) -> Result<Option<usize>> {
    Ok(hyperbolic_times_critical(trace, hp)?.first)
}

/// First hyperbolic time of a fresh random orbit, streamed.
pub fn first_time_streaming(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    hp: &HypParams,
    x0: StateVector,
    n_max: usize,
    seed: u64,
    stream: u64,
) -> Result<Option<usize>> {
    let b = if sys.has_critical_set() { hp.b_exponent } else { 0.0 };
    let mut det = HypDetector::new(hp.alpha, b);
    let mut walker = Walker::new(sys, kernel, x0, seed, stream)?;
    let mut x = x0;
    for n in 1..=n_max {
        let l = sys.inv_tangent_norm(&x)?.ln();
        let d = sys.truncated_distance(&x, hp.delta).ln();
        if det.push(l, d) {
            return Ok(Some(n));
        }
        x = walker.advance()?.0;
    }
    Ok(None)
}

/// Empirical distribution of the first hyperbolic time.
#[derive(Debug, Clone, PartialEq)]
pub struct TailProfile {
    pub epsilon: f64,
    /// `counts[k - 1]` = number of samples with `h = k`, for `k = 1..=n_max`.
    pub counts: Vec<u64>,
    pub censored: u64,
    pub sample_size: u64,
    pub n_max: usize,
}

impl TailProfile {
    pub fn from_times(epsilon: f64, times: &[Option<usize>], n_max: usize) -> Self {
        let mut counts = vec![0u64; n_max];
        let mut censored = 0;
        for t in times {
            match t {
                Some(k) if *k >= 1 && *k <= n_max => counts[k - 1] += 1,
                _ => censored += 1,
            }
        }
        TailProfile { epsilon, counts, censored, sample_size: times.len() as u64, n_max }
    }

    pub fn count(&self, k: usize) -> u64 {
        if k >= 1 && k <= self.n_max {
            self.counts[k - 1]
        } else {
            0
        }
    }

    /// `P(h > k)` for `k = 0..=n_max`.
    pub fn survival(&self) -> Vec<f64> {
        let n = self.sample_size as f64;
        let mut tail = self.censored;
        let mut out = vec![0.0; self.n_max + 1];
        out[self.n_max] = tail as f64 / n;
        for k in (0..self.n_max).rev() {
            tail += self.counts[k];
            out[k] = tail as f64 / n;
        }
        out
    }
}

/// Profile of `h` over `sample_size` uniformly drawn starts, sample `i` on stream `i`.
pub fn tail_profile(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    hp: &HypParams,
    sample_size: usize,
    n_max: usize,
    seed: u64,
) -> Result<TailProfile> {
    if sample_size == 0 {
        return Err(LabError::Empty("tail profile needs at least one sample".into()));
    }
    let times = (0..sample_size as u64)
        .into_par_iter()
        .map(|i| {
            let x0 = uniform_start(sys, seed, i);
            first_time_streaming(sys, kernel, hp, x0, n_max, seed, i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailProfile::from_times(kernel.epsilon, &times, n_max))
}

/// Uniform start point for sample `i`, drawn from a stream disjoint from the noise streams.
pub fn uniform_start(sys: &MapSystem, seed: u64, i: u64) -> StateVector {
    use rand::Rng;
    let mut rng = crate::orbit::stream_rng(seed ^ 0x5eed_57a7_0000_0001, i);
    loop {
        let x = sys.point_from_unit([rng.random(), rng.random()]);
        if sys.critical_distance(&x).is_none_or(|d| d >= sys.critical_floor) {
            return x;
        }
    }
}

/// `max_eps [ sum_{k >= N} k P(h = k) + n_max P(censored) ]`.
pub fn uniform_tail_statistic(profiles: &[TailProfile], cutoff: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in profiles {
        if cutoff > p.n_max {
            return Err(LabError::InsufficientHorizon { cutoff, n_max: p.n_max });
        }
        let n = p.sample_size as f64;
        let body: f64 = (cutoff.max(1)..=p.n_max).map(|k| k as f64 * p.count(k) as f64 / n).sum();
        worst = worst.max(body + p.n_max as f64 * p.censored as f64 / n);
    }
    Ok(worst)
}

/// Log-linear fit of the survival curve `P(h > k) ~ A tau^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub tau: f64,
    pub points: usize,
}

/// Least-squares fit of `log P(h > k)` against `k` over the `k >= 1` with positive survival.
pub fn fit_geometric_tail(profile: &TailProfile) -> Option<TailFit> {
    let pts: Vec<(f64, f64)> = profile
        .survival()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| (k as f64, p.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(TailFit { slope, intercept: my - slope * mx, tau: slope.exp(), points: pts.len() })
}

/// `(1/n) sum_{j<n} log|Df(x_j)^{-1}|`.
pub fn expansion_average(trace: &OrbitTrace) -> f64 {
    mean(&trace.log_inv_norms)
}

/// `(1/n) sum_{j<n} -log dist_delta(x_j, C)`.
pub fn recurrence_average(trace: &OrbitTrace) -> Result<f64> {
    match &trace.log_trunc_dists {
        Some(d) => Ok(-mean(d)),
        None => Err(LabError::DeltaMismatch { trace: None, requested: f64::NAN }),
    }
}

/// Fraction of `j < n` with `x_j` in the region.
pub fn visit_frequency<F: Fn(&StateVector) -> bool>(trace: &OrbitTrace, region: F) -> f64 {
    let n = trace.len();
    if n == 0 {
        return 0.0;
    }
    trace.states[..n].iter().filter(|x| region(x)).count() as f64 / n as f64
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::NoiseSequence;

    fn brute_pliss(a: &[f64], c1: f64) -> Vec<usize> {
        (1..=a.len())
            .filter(|&i| (0..i).all(|n| a[n..i].iter().sum::<f64>() >= c1 * (i - n) as f64))
            .collect()
    }

    fn trace_from(norms: &[f64], dists: Option<(&[f64], f64)>) -> OrbitTrace {
        OrbitTrace {
            states: vec![StateVector::One(0.0); norms.len() + 1],
            log_inv_norms: norms.iter().map(|v| v.ln()).collect(),
            log_trunc_dists: dists.map(|(d, _)| d.iter().map(|v| v.ln()).collect()),
            delta: dists.map(|(_, delta)| delta),
            noise: NoiseSequence { entries: vec![], seed: 0, stream: 0 },
            resamples: 0,
        }
    }

    #[test]
    fn pliss_examples() {
        let p = PlissParams::new(0.5, 1.0, 2.0).unwrap();
        assert_eq!(pliss_select(&[1.0; 4], &p, PlissMode::Guaranteed).unwrap(), vec![1, 2, 3, 4]);
        let a = [2.0, 0.0, 2.0, 0.0, 2.0, 0.0];
        assert_eq!(pliss_select(&a, &p, PlissMode::Guaranteed).unwrap(), vec![1, 3, 5]);
        assert_eq!(brute_pliss(&a, 0.5), vec![1, 3, 5]);
        assert!(matches!(
            pliss_select(&[0.0; 3], &p, PlissMode::Guaranteed),
            Err(LabError::HypothesisViolated(_))
        ));
        assert!(pliss_select(&[0.0; 3], &p, PlissMode::Unguaranteed).unwrap().is_empty());
        assert!((p.zeta() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn diffeo_detector_examples() {
        let tr = trace_from(&[0.5; 10], None);
        assert_eq!(hyperbolic_times_diffeo(&tr, 0.6).times, (1..=10).collect::<Vec<_>>());
        assert!(hyperbolic_times_diffeo(&tr, 0.4).times.is_empty());
        let alt: Vec<f64> = (0..12).map(|j| if j % 2 == 0 { 0.5 } else { 2.0 }).collect();
        let tr = trace_from(&alt, None);
        let brute: Vec<usize> = (1..=12)
            .filter(|&n| {
                (1..=n).all(|k| tr.log_inv_norms[n - k..n].iter().sum::<f64>() <= k as f64 * 0.95f64.ln())
            })
            .collect();
        assert_eq!(hyperbolic_times_diffeo(&tr, 0.95).times, brute);
        assert_eq!(brute, vec![1]);
    }

    #[test]
    fn recurrence_condition() {
        let hp = HypParams::new(0.5, 0.1, 0.25).unwrap();
        let far = trace_from(&[0.5; 6], Some((&[1.0; 6], 0.1)));
        assert_eq!(
            hyperbolic_times_critical(&far, &hp).unwrap().times,
            hyperbolic_times_diffeo(&far, 0.5).times
        );
        let mut d = [1.0; 6];
        d[4] = 0.5f64.powf(2.0 * 0.25);
        let near = trace_from(&[0.5; 6], Some((&d, 0.1)));
        assert!(!hyperbolic_times_critical(&near, &hp).unwrap().times.contains(&5));
        let wrong = HypParams::new(0.5, 0.2, 0.25).unwrap();
        assert!(matches!(
            hyperbolic_times_critical(&near, &wrong),
            Err(LabError::DeltaMismatch { .. })
        ));
    }

    #[test]
    fn tail_statistic_matches_geometric_sum() {
        let n_max = 20;
        let sample = 1u64 << 20;
        let counts: Vec<u64> = (1..=n_max).map(|k| sample >> k).collect();
        let censored = sample - counts.iter().sum::<u64>();
        let p = TailProfile { epsilon: 0.0, counts, censored, sample_size: sample, n_max };
        let expected: f64 =
            (3..=20).map(|k| k as f64 * 0.5f64.powi(k)).sum::<f64>() + 20.0 * 0.5f64.powi(20);
        assert!((uniform_tail_statistic(&[p.clone()], 3).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(
            uniform_tail_statistic(&[p], 21),
            Err(LabError::InsufficientHorizon { .. })
        ));
        let ones = TailProfile::from_times(0.0, &[Some(1); 10], 5);
        assert_eq!(uniform_tail_statistic(&[ones], 2).unwrap(), 0.0);
    }

    #[test]
    fn survival_is_monotone() {
        let p = TailProfile::from_times(0.1, &[Some(1), Some(3), None, Some(2), Some(3)], 4);
        let s = p.survival();
        assert_eq!(s[0], 1.0);
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(s[4], 0.2);
    }

    #[test]
    fn averages() {
        let tr = trace_from(&[0.5; 4], Some((&[1.0; 4], 0.1)));
        assert!((expansion_average(&tr) - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(recurrence_average(&tr).unwrap(), 0.0);
        assert_eq!(visit_frequency(&tr, |_| true), 1.0);
        assert!((HypParams::alpha_from_expansion(0.5) - (-0.1f64).exp()).abs() < 1e-15);
    }
}
