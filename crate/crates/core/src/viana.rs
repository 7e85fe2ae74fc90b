//! Diagnostics for the cylinder skew-product `(s, x) -> (d s + kappa x, a(s) - x^2)`.
//!
//! Return depths follow `J(0) = I \ (-sqrt(alpha), sqrt(alpha))` and, inside
//! the critical strip, `r_j = ceil(-log|x_j|)`, the smallest `r` with
//! `e^{-r} <= |x_j|`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::{MapSystem, VianaParams};
use crate::domain::StateVector;
use crate::error::{LabError, Result};
use crate::hyperbolic::uniform_start;
use crate::measure::{birkhoff_histogram, HistogramMeasure, OccupationCounter};
use crate::orbit::{stream_rng, NoiseKernel, NoiseParam, OrbitTrace, Walker};

fn viana_params(sys: &MapSystem) -> Result<VianaParams> {
    sys.viana()
        .copied()
        .ok_or_else(|| LabError::InvalidParams(format!("{} is not the cylinder skew-product", sys.name())))
}

/// `-(1/n) sum_{j<n} log|2 x_j|`.
pub fn central_expansion_average(trace: &OrbitTrace) -> f64 {
    let n = trace.len();
    if n == 0 {
        return 0.0;
    }
    -trace.states[..n].iter().map(|x| (2.0 * x.last()).abs().ln()).sum::<f64>() / n as f64
}

/// Return depth of one interval coordinate.
pub fn return_depth(x: f64, alpha_skew: f64) -> u32 {
    let a = x.abs();
    if a >= alpha_skew.sqrt() {
        0
    } else if a == 0.0 {
        u32::MAX
    } else {
        (-a.ln()).ceil() as u32
    }
}

/// `G` threshold `(1/2 - 2 eta) log(1/alpha)`.
pub fn g_threshold(params: &VianaParams) -> f64 {
    (0.5 - 2.0 * params.eta) * (1.0 / params.alpha_skew).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnDepthTrace {
    /// `r_j` for `j < n`.
    pub depths: Vec<u32>,
    pub g_set: Vec<usize>,
    pub g_sum: u64,
}

pub fn return_depths(trace: &OrbitTrace, params: &VianaParams) -> ReturnDepthTrace {
    let n = trace.len();
    let depths: Vec<u32> = trace.states[..n].iter().map(|x| return_depth(x.last(), params.alpha_skew)).collect();
    let threshold = g_threshold(params);
    let g_set: Vec<usize> = (0..n).filter(|&j| depths[j] as f64 >= threshold).collect();
    let g_sum = g_set.iter().map(|&j| depths[j] as u64).sum();
    ReturnDepthTrace { depths, g_set, g_sum }
}

/// Base orbit `s_j = d^j s_0 mod 1` of a uniformly random real `s_0`.
///
/// `f64` iteration of `s -> d s mod 1` with `d` a power of two shifts every
/// start onto `0` within a few dozen steps. Here `s_j` is read off a sliding
/// window of base-`d` digits of `s_0`, drawn lazily, so the orbit stays exact
/// to the precision of the window.
#[derive(Debug, Clone)]
pub struct TypicalBase {
    d: u32,
    digits: VecDeque<u32>,
    rng: ChaCha8Rng,
}

impl TypicalBase {
    pub fn new(d: u32, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed ^ 0xba5e_d161_7500_0000, stream);
        let window = (64.0 / (d as f64).log2()).ceil() as usize + 1;
        let digits = (0..window).map(|_| rng.random_range(0..d)).collect();
        TypicalBase { d, digits, rng }
    }

    pub fn current(&self) -> f64 {
        let d = self.d as f64;
        self.digits.iter().rev().fold(0.0, |acc, &g| (acc + g as f64) / d)
    }

    pub fn advance(&mut self) {
        self.digits.pop_front();
        self.digits.push_back(self.rng.random_range(0..self.d));
    }
}

/// Birkhoff histogram of the unperturbed skew-product from interval
/// coordinate `x0` along a [`TypicalBase`] orbit.
///
/// With nonzero coupling the base orbit does not collapse and the ordinary
/// floating-point orbit from `(s_0, x0)` is used.
pub fn typical_birkhoff_histogram(sys: &MapSystem, x0: f64, n: usize, bins: usize, seed: u64) -> Result<HistogramMeasure> {
    let params = viana_params(sys)?;
    let mut base = TypicalBase::new(params.d, seed, 0);
    let start = StateVector::Two(base.current(), x0);
    sys.domain.check(&start)?;
    if params.coupling != 0.0 {
        return birkhoff_histogram(sys, start, n, bins);
    }
    if n == 0 {
        return Err(LabError::Empty("Birkhoff histogram of zero steps".into()));
    }
    let mut counter = OccupationCounter::new(sys.domain, bins);
    let mut x = start;
    counter.deposit(&x);
    for _ in 1..n {
        let v = sys.eval_raw(&x).last();
        base.advance();
        x = StateVector::Two(base.current(), v);
        counter.deposit(&x);
    }
    counter.finish()
}

/// Per-sample depth statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub sample: usize,
    pub n: usize,
    pub g_sum: u64,
    /// Some `1 <= j < n` has `|x_j| < e^{-floor(sqrt n)}`.
    pub deep_return: bool,
}

/// Depth statistics of `sample_size` random orbits of length `n` from uniform starts.
///
/// Without noise and coupling the base coordinate follows a [`TypicalBase`]
/// instead of the floating-point orbit, which collapses onto `s = 0`.
pub fn depth_statistics(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    n: usize,
    sample_size: usize,
    seed: u64,
) -> Result<Vec<DepthSample>> {
    let params = viana_params(sys)?;
    if n < 4 {
        return Err(LabError::InvalidParams(format!("n = {n} < 4")));
    }
    let deep = (-((n as f64).sqrt().floor())).exp();
    let threshold = g_threshold(&params);
    let exact_base = kernel.epsilon == 0.0 && params.coupling == 0.0;
    (0..sample_size)
        .into_par_iter()
        .map(|i| {
            let x0 = uniform_start(sys, seed, i as u64);
            let mut next: Box<dyn FnMut() -> Result<StateVector>> = if exact_base {
                let mut base = TypicalBase::new(params.d, seed, i as u64);
                let mut v = x0.last();
                Box::new(move || {
                    v = sys.eval_raw(&StateVector::Two(base.current(), v)).last();
                    base.advance();
                    Ok(StateVector::Two(base.current(), v))
                })
            } else {
                let mut walker = Walker::new(sys, kernel, x0, seed, i as u64)?;
                Box::new(move || Ok(walker.advance()?.0))
            };
            let mut x = x0;
            let mut g_sum = 0u64;
            let mut deep_return = false;
            for j in 0..n {
                let r = return_depth(x.last(), params.alpha_skew);
                if r as f64 >= threshold {
                    g_sum += r as u64;
                }
                if j >= 1 && x.last().abs() < deep {
                    deep_return = true;
                }
                if j + 1 < n {
                    x = next()?;
                }
            }
            Ok(DepthSample { sample: i, n, g_sum, deep_return })
        })
        .collect()
}

/// Fraction of samples entering `J(floor(sqrt n))`: an estimate of `m(B_2(n))`.
pub fn deep_return_fraction(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    n: usize,
    sample_size: usize,
    seed: u64,
) -> Result<f64> {
    let s = depth_statistics(sys, kernel, n, sample_size, seed)?;
    Ok(s.iter().filter(|d| d.deep_return).count() as f64 / s.len().max(1) as f64)
}

/// Fraction of samples outside the deep-return event with `g_sum >= gamma n`:
/// an estimate of `m(B_1(n))`.
pub fn expansion_deficit_fraction(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    n: usize,
    gamma: f64,
    sample_size: usize,
    seed: u64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(LabError::InvalidParams(format!("gamma = {gamma} must be positive")));
    }
    let s = depth_statistics(sys, kernel, n, sample_size, seed)?;
    Ok(deficit_fraction(&s, gamma))
}

pub fn deficit_fraction(samples: &[DepthSample], gamma: f64) -> f64 {
    let hits = samples
        .iter()
        .filter(|d| !d.deep_return && d.g_sum as f64 >= gamma * d.n as f64)
        .count();
    hits as f64 / samples.len().max(1) as f64
}

/// Grid function `xi^c : S^1 × I -> [-1, 1]` sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct FoliationField {
    pub ns: usize,
    pub nx: usize,
    pub lo: f64,
    pub hi: f64,
    /// `values[i * nx + j]` at `(s_i, x_j)`.
    pub values: Vec<f64>,
}

impl FoliationField {
    pub fn zeros(params: &VianaParams, ns: usize, nx: usize) -> Self {
        FoliationField { ns, nx, lo: params.lo, hi: params.hi, values: vec![0.0; ns * nx] }
    }

    pub fn s_at(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.ns as f64
    }

    pub fn x_at(&self, j: usize) -> f64 {
        self.lo + (self.hi - self.lo) * (j as f64 + 0.5) / self.nx as f64
    }

    /// Bilinear interpolation, periodic in `s` and clamped in `x`.
    pub fn interpolate(&self, s: f64, x: f64) -> f64 {
        let u = s.rem_euclid(1.0) * self.ns as f64 - 0.5;
        let i0 = u.floor();
        let fu = u - i0;
        let i0 = (i0 as i64).rem_euclid(self.ns as i64) as usize;
        let i1 = (i0 + 1) % self.ns;
        let v = ((x - self.lo) / (self.hi - self.lo) * self.nx as f64 - 0.5).clamp(0.0, (self.nx - 1) as f64);
        let j0 = (v.floor() as usize).min(self.nx.saturating_sub(2));
        let fv = v - j0 as f64;
        let j1 = (j0 + 1).min(self.nx - 1);
        let at = |i: usize, j: usize| self.values[i * self.nx + j];
        (1.0 - fu) * ((1.0 - fv) * at(i0, j0) + fv * at(i0, j1)) + fu * ((1.0 - fv) * at(i1, j0) + fv * at(i1, j1))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &FoliationField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// CSV with columns `s_index, x_index, xi_value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s_index,x_index,xi_value")?;
        for i in 0..self.ns {
            for j in 0..self.nx {
                writeln!(out, "{i},{j},{}", crate::fmt_sig(self.values[i * self.nx + j]))?;
            }
        }
        Ok(())
    }
}

/// `(A xi)(z) = (q_x xi(F z) - g_x) / (-q_s xi(F z) + g_s)` with
/// `F z = f(z) + t`, `t` the first entry of the noise path (none: `t = 0`).
pub fn foliation_apply(field: &FoliationField, sys: &MapSystem, noise_path: &[NoiseParam]) -> Result<FoliationField> {
    let p = viana_params(sys)?;
    let t = noise_path.first().copied().unwrap_or([0.0, 0.0]);
    let d = p.d as f64;
    let values = (0..field.ns * field.nx)
        .into_par_iter()
        .map(|c| {
            let (s, x) = (field.s_at(c / field.nx), field.x_at(c % field.nx));
            let img_s = d * s + p.coupling * x + t[0];
            let img_x = p.a0 + p.alpha_skew * (2.0 * PI * s).sin() - x * x + t[1];
            let xi = field.interpolate(img_s, img_x);
            let q_x = -2.0 * x;
            let q_s = 2.0 * PI * p.alpha_skew * (2.0 * PI * s).cos();
            let v = (q_x * xi - p.coupling) / (-q_s * xi + d);
            if v.abs() > 1.0 + 1e-9 || !v.is_finite() {
                Err(LabError::ContractionViolated(v))
            } else {
                Ok(v.clamp(-1.0, 1.0))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FoliationField { values, ..field.clone() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoliationFixedPoint {
    pub field: FoliationField,
    pub iterations: usize,
    /// `sup |A xi - xi|` at the returned field.
    pub residual: f64,
    /// Ratios of successive sup-changes.
    pub contraction_ratios: Vec<f64>,
}

/// Iterate `A` from `xi = 0` until the sup-change drops below `tol`.
pub fn foliation_fixed_point(
    sys: &MapSystem,
    grid: (usize, usize),
    tol: f64,
    max_iters: usize,
) -> Result<FoliationFixedPoint> {
    let p = viana_params(sys)?;
    if !(tol > 0.0) {
        return Err(LabError::InvalidParams(format!("tol = {tol} must be positive")));
    }
    let mut field = FoliationField::zeros(&p, grid.0, grid.1);
    let mut ratios = Vec::new();
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iters {
        let next = foliation_apply(&field, sys, &[])?;
        let change = next.sup_distance(&field);
        if last_change.is_finite() && last_change > 1e-13 {
            ratios.push(change / last_change);
        }
        field = next;
        if change < tol {
            let residual = foliation_apply(&field, sys, &[])?.sup_distance(&field);
            return Ok(FoliationFixedPoint { field, iterations: it, residual, contraction_ratios: ratios });
        }
        last_change = change;
    }
    Err(LabError::MaxItersExceeded { iters: max_iters, last_change })
}

/// `xi^c(t_bar, .)` for one noise path, treating the field as independent of
/// entries beyond the path: `xi_h = 0`, `xi_{k-1} = A_{t_k} xi_k`.
pub fn foliation_along_path(sys: &MapSystem, grid: (usize, usize), noise_path: &[NoiseParam]) -> Result<FoliationField> {
    let p = viana_params(sys)?;
    let mut field = FoliationField::zeros(&p, grid.0, grid.1);
    for k in (0..noise_path.len()).rev() {
        field = foliation_apply(&field, sys, &noise_path[k..])?;
    }
    Ok(field)
}

/// Depth statistics CSV with columns `sample, n, g_sum, deep_return_flag`.
pub fn write_depth_csv<W: Write>(samples: &[DepthSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "sample,n,g_sum,deep_return_flag")?;
    for d in samples {
        writeln!(out, "{},{},{},{}", d.sample, d.n, d.g_sum, d.deep_return as u8)?;
    }
    Ok(())
}

/// The contraction bound `(4 + 2(alpha + eps)) / (d - alpha - eps - (2 pi alpha + eps))`.
pub fn foliation_bound(params: &VianaParams, epsilon: f64) -> f64 {
    let a = params.alpha_skew;
    (4.0 + 2.0 * (a + epsilon)) / (params.d as f64 - a - epsilon - (2.0 * PI * a + epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_system, ParamRecord};
    use crate::orbit::NoiseSequence;

    fn trace_with(xs: &[f64]) -> OrbitTrace {
        let mut states: Vec<StateVector> = xs.iter().map(|&x| StateVector::Two(0.0, x)).collect();
        states.push(StateVector::Two(0.0, 0.5));
        OrbitTrace {
            states,
            log_inv_norms: vec![0.0; xs.len()],
            log_trunc_dists: None,
            delta: None,
            noise: NoiseSequence { entries: vec![], seed: 0, stream: 0 },
            resamples: 0,
        }
    }

    fn coupled() -> MapSystem {
        let mut p = ParamRecord::new();
        p.insert("coupling".into(), 0.01);
        build_system("viana", &p).unwrap()
    }

    #[test]
    fn expansion_average_examples() {
        assert_eq!(central_expansion_average(&trace_with(&[0.5, -0.5, 0.5])), 0.0);
        assert!((central_expansion_average(&trace_with(&[1.0, -1.0])) + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn depth_examples() {
        assert_eq!(return_depth((-3.5f64).exp(), 0.01), 4);
        assert_eq!(return_depth(0.2, 0.01), 0);
        assert_eq!(return_depth(0.09, 0.01), 3);
        let s = build_system("viana", &ParamRecord::new()).unwrap();
        let p = *s.viana().unwrap();
        let far = return_depths(&trace_with(&[0.5, 0.3, -0.2]), &p);
        assert!(far.g_set.is_empty());
        assert_eq!(far.g_sum, 0);
    }

    #[test]
    fn unperturbed_skew_product_has_flat_foliation() {
        let s = build_system("viana", &ParamRecord::new()).unwrap();
        let p = *s.viana().unwrap();
        let zero = FoliationField::zeros(&p, 32, 16);
        let out = foliation_apply(&zero, &s, &[]).unwrap();
        // q_x * 0 - 0 over a nonzero denominator
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fixed_point_with_coupling() {
        let s = coupled();
        let fp = foliation_fixed_point(&s, (64, 32), 1e-12, 100).unwrap();
        assert!(fp.residual < 2e-12);
        assert!(fp.field.sup_norm() > 0.0 && fp.field.sup_norm() <= 10.0 * 0.01);
        assert!(fp.contraction_ratios.iter().all(|&r| r <= 0.55));
        let bound = foliation_bound(s.viana().unwrap(), 0.0);
        assert!(fp.field.sup_norm() <= bound);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_is_periodic() {
        let s = coupled();
        let p = *s.viana().unwrap();
        let mut f = FoliationField::zeros(&p, 8, 4);
        for (c, v) in f.values.iter_mut().enumerate() {
            *v = (c as f64 * 0.37).sin() * 0.5;
        }
        for i in 0..8 {
            for j in 0..4 {
                assert!((f.interpolate(f.s_at(i), f.x_at(j)) - f.values[i * 4 + j]).abs() < 1e-12);
                assert!((f.interpolate(f.s_at(i) + 1.0, f.x_at(j)) - f.values[i * 4 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn typical_base_is_a_digit_shift() {
        let mut b = TypicalBase::new(16, 3, 0);
        for _ in 0..1000 {
            let s = b.current();
            b.advance();
            let expected = (16.0 * s).fract();
            assert!((b.current() - expected).abs() < 1e-12);
            assert!((0.0..1.0).contains(&b.current()));
        }
    }

    #[test]
    fn unperturbed_base_does_not_collapse() {
        let sys = build_system("viana", &ParamRecord::new()).unwrap();
        let h = typical_birkhoff_histogram(&sys, 0.3, 20_000, 16, 1).unwrap();
        // every base column is visited
        for col in 0..16 {
            let m: f64 = h.masses[col * 16..(col + 1) * 16].iter().sum();
            assert!(m > 0.03, "column {col}: {m}");
        }
    }

    #[test]
    fn depth_csv_layout() {
        let mut buf = Vec::new();
        write_depth_csv(&[DepthSample { sample: 0, n: 100, g_sum: 7, deep_return: true }], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sample,n,g_sum,deep_return_flag\n0,100,7,1\n");
    }
}
