//! Noise kernels, perturbed steps and the seeded random-orbit engine.
//!
//! Every orbit draws its noise from its own ChaCha8 stream selected by
//! `(seed, stream)`, so batches of orbits are reproducible no matter how
//! they are scheduled. Draws are uniform on the unit ball and then scaled
//! by `epsilon`, which makes `epsilon = 0` exact and nests the supports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::MapSystem;
use crate::domain::{PhaseDomain, StateVector};
use crate::error::{LabError, Result};

/// Maximum number of noise redraws per step before an orbit is declared stuck.
pub const MAX_REDRAWS: usize = 100;

/// A noise parameter `t`; unused coordinates are zero.
pub type NoiseParam = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseMode {
    /// `f_t = f + t`, circle coordinates wrapped.
    Additive,
    /// `f_t = R_t o f`, a rotation of the circle factor.
    Rotational,
}

impl std::str::FromStr for NoiseMode {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(NoiseMode::Additive),
            "rotational" => Ok(NoiseMode::Rotational),
            other => Err(LabError::InvalidKernel(format!("unknown noise mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseMode::Additive => "additive",
            NoiseMode::Rotational => "rotational",
        })
    }
}

/// Uniform noise on the ball of radius `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseKernel {
    pub mode: NoiseMode,
    pub epsilon: f64,
    pub dims: usize,
}

impl NoiseKernel {
    pub fn new(mode: NoiseMode, epsilon: f64, dims: usize) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(LabError::InvalidKernel(format!("epsilon = {epsilon} must be finite and >= 0")));
        }
        if !(dims == 1 || dims == 2) {
            return Err(LabError::InvalidKernel(format!("noise dimension {dims} not in {{1, 2}}")));
        }
        if mode == NoiseMode::Rotational && dims != 1 {
            return Err(LabError::InvalidKernel("rotational noise is one-dimensional".into()));
        }
        Ok(NoiseKernel { mode, epsilon, dims })
    }

    /// The kernel matching a system's domain: additive noise of full dimension
    /// or a rotation of the circle factor.
    pub fn for_system(sys: &MapSystem, mode: NoiseMode, epsilon: f64) -> Result<Self> {
        let dims = match mode {
            NoiseMode::Additive => sys.dim(),
            NoiseMode::Rotational => 1,
        };
        let kernel = NoiseKernel::new(mode, epsilon, dims)?;
        kernel.check_against(sys)?;
        Ok(kernel)
    }

    /// Validate the kernel against a system's domain.
    pub fn check_against(&self, sys: &MapSystem) -> Result<()> {
        match self.mode {
            NoiseMode::Additive => {
                if self.dims != sys.dim() {
                    return Err(LabError::InvalidKernel(format!(
                        "additive noise of dimension {} on a {}-dimensional domain",
                        self.dims,
                        sys.dim()
                    )));
                }
                if matches!(sys.domain, PhaseDomain::Interval { .. } | PhaseDomain::Cylinder { .. }) {
                    let margin = sys.trapping_margin().unwrap_or(0.0);
                    if self.epsilon >= margin {
                        return Err(LabError::NoiseExceedsMargin { epsilon: self.epsilon, margin });
                    }
                }
            }
            NoiseMode::Rotational => {
                if matches!(sys.domain, PhaseDomain::Interval { .. }) {
                    return Err(LabError::InvalidKernel(
                        "rotational noise needs a circle factor".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// One draw from the kernel.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseParam {
        let unit = if self.dims == 1 {
            [2.0 * rng.random::<f64>() - 1.0, 0.0]
        } else {
            loop {
                let u = 2.0 * rng.random::<f64>() - 1.0;
                let v = 2.0 * rng.random::<f64>() - 1.0;
                if u * u + v * v <= 1.0 {
                    break [u, v];
                }
            }
        };
        [self.epsilon * unit[0], self.epsilon * unit[1]]
    }
}

/// The generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A finite noise sequence `t_1, ..., t_n` with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSequence {
    pub entries: Vec<NoiseParam>,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The sequence with its first `k` entries dropped.
    pub fn shifted(&self, k: usize) -> NoiseSequence {
        NoiseSequence {
            entries: self.entries[k.min(self.entries.len())..].to_vec(),
            seed: self.seed,
            stream: self.stream,
        }
    }
}

/// `n` independent draws from the kernel on stream `(seed, stream)`.
pub fn sample_noise(kernel: &NoiseKernel, n: usize, seed: u64, stream: u64) -> NoiseSequence {
    let mut rng = stream_rng(seed, stream);
    let entries = (0..n).map(|_| kernel.draw(&mut rng)).collect();
    NoiseSequence { entries, seed, stream }
}

/// `f_t(x)`.
pub fn perturbed_step(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    t: NoiseParam,
    x: &StateVector,
) -> Result<StateVector> {
    let norm = (t[0] * t[0] + t[1] * t[1]).sqrt();
    if norm > kernel.epsilon * (1.0 + 1e-12) {
        return Err(LabError::InvalidKernel(format!(
            "noise parameter of size {norm} exceeds epsilon = {}",
            kernel.epsilon
        )));
    }
    kernel.check_against(sys)?;
    sys.domain.check(x)?;
    Ok(step_unchecked(sys, kernel.mode, t, x))
}

#[inline]
pub(crate) fn step_unchecked(
    sys: &MapSystem,
    mode: NoiseMode,
    t: NoiseParam,
    x: &StateVector,
) -> StateVector {
    let y = sys.eval_raw(x);
    let moved = match (mode, y) {
        (_, StateVector::One(v)) => StateVector::One(v + t[0]),
        (NoiseMode::Additive, StateVector::Two(a, b)) => StateVector::Two(a + t[0], b + t[1]),
        (NoiseMode::Rotational, StateVector::Two(a, b)) => StateVector::Two(a + t[0], b),
    };
    sys.domain.normalize(moved)
}

/// Streaming random orbit: yields successive states without storing them.
pub struct Walker<'a> {
    sys: &'a MapSystem,
    kernel: NoiseKernel,
    rng: ChaCha8Rng,
    state: StateVector,
    step: usize,
    /// Total number of noise redraws so far.
    pub redraws: usize,
}

impl<'a> Walker<'a> {
    pub fn new(
        sys: &'a MapSystem,
        kernel: &NoiseKernel,
        x0: StateVector,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        kernel.check_against(sys)?;
        sys.domain.check(&x0)?;
        if sys.critical_distance(&x0).is_some_and(|d| d < sys.critical_floor) {
            return Err(LabError::CriticalOrbitStuck(0));
        }
        Ok(Walker {
            sys,
            kernel: *kernel,
            rng: stream_rng(seed, stream),
            state: x0,
            step: 0,
            redraws: 0,
        })
    }

    pub fn state(&self) -> StateVector {
        self.state
    }

    /// Advance one step, returning the new state and the noise actually used.
    #[inline]
    pub fn advance(&mut self) -> Result<(StateVector, NoiseParam)> {
        self.step += 1;
        for attempt in 0..=MAX_REDRAWS {
            let t = self.kernel.draw(&mut self.rng);
            let y = step_unchecked(self.sys, self.kernel.mode, t, &self.state);
            let critical = self
                .sys
                .critical_distance(&y)
                .is_some_and(|d| d < self.sys.critical_floor);
            if !critical {
                self.redraws += attempt;
                self.state = y;
                return Ok((y, t));
            }
        }
        Err(LabError::CriticalOrbitStuck(self.step))
    }
}

/// One orbit with its expansion and recurrence records.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    pub states: Vec<StateVector>,
    /// `log |Df(x_j)^{-1}|` for `j < n`.
    pub log_inv_norms: Vec<f64>,
    /// `log dist_delta(x_j, C)` for `j < n`, when a `delta` was supplied.
    pub log_trunc_dists: Option<Vec<f64>>,
    pub delta: Option<f64>,
    /// The noise actually applied, `t_1, ..., t_n`.
    pub noise: NoiseSequence,
    /// Number of noise redraws caused by near-critical states.
    pub resamples: usize,
}

impl OrbitTrace {
    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.log_inv_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_inv_norms.is_empty()
    }
}

fn records(
    sys: &MapSystem,
    states: &[StateVector],
    delta: Option<f64>,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = states.len() - 1;
    let mut inv = Vec::with_capacity(n);
    for x in &states[..n] {
        inv.push(sys.inv_tangent_norm(x)?.ln());
    }
    let dists = delta.map(|d| states[..n].iter().map(|x| sys.truncated_distance(x, d).ln()).collect());
    Ok((inv, dists))
}

fn check_delta(delta: Option<f64>) -> Result<()> {
    match delta {
        Some(d) if !(d > 0.0) => Err(LabError::InvalidParams(format!("delta = {d} must be positive"))),
        _ => Ok(()),
    }
}

/// Random orbit of length `n` from `x0` on stream `(seed, stream)`.
pub fn random_orbit(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    x0: StateVector,
    n: usize,
    delta: Option<f64>,
    seed: u64,
    stream: u64,
) -> Result<OrbitTrace> {
    check_delta(delta)?;
    let mut walker = Walker::new(sys, kernel, x0, seed, stream)?;
    let mut states = Vec::with_capacity(n + 1);
    let mut entries = Vec::with_capacity(n);
    states.push(x0);
    for _ in 0..n {
        let (y, t) = walker.advance()?;
        states.push(y);
        entries.push(t);
    }
    let (log_inv_norms, log_trunc_dists) = records(sys, &states, delta)?;
    Ok(OrbitTrace {
        states,
        log_inv_norms,
        log_trunc_dists,
        delta,
        noise: NoiseSequence { entries, seed, stream },
        resamples: walker.redraws,
    })
}

/// Orbit of `x0` under a prescribed noise sequence.
pub fn replay(
    sys: &MapSystem,
    kernel: &NoiseKernel,
    x0: StateVector,
    noise: &NoiseSequence,
    delta: Option<f64>,
) -> Result<OrbitTrace> {
    check_delta(delta)?;
    let mut states = Vec::with_capacity(noise.len() + 1);
    states.push(x0);
    let mut x = x0;
    for &t in &noise.entries {
        x = perturbed_step(sys, kernel, t, &x)?;
        states.push(x);
    }
    let (log_inv_norms, log_trunc_dists) = records(sys, &states, delta)?;
    Ok(OrbitTrace {
        states,
        log_inv_norms,
        log_trunc_dists,
        delta,
        noise: noise.clone(),
        resamples: 0,
    })
}

/// Deterministic orbit of `eval`.
pub fn deterministic_orbit(
    sys: &MapSystem,
    x0: StateVector,
    n: usize,
    delta: Option<f64>,
) -> Result<OrbitTrace> {
    let kernel = NoiseKernel::new(NoiseMode::Additive, 0.0, sys.dim())?;
    random_orbit(sys, &kernel, x0, n, delta, 0, 0)
}
