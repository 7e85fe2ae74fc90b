use std::f64::consts::PI;

use crate::domain::{PhaseDomain, StateVector};
use crate::error::{LabError, Result};

use super::histogram::HistogramMeasure;

/// One-dimensional factor basis: Fourier modes on circles, Chebyshev
/// polynomials on intervals.
///
/// Fourier index `0` is the constant, `2m - 1` is `cos(2 pi m u)` and `2m` is
/// `sin(2 pi m u)`. Chebyshev index `k` is `T_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    Fourier { origin: f64, length: f64 },
    Chebyshev { lo: f64, hi: f64 },
}

impl Factor {
    fn size(&self, max_degree: usize) -> usize {
        match self {
            Factor::Fourier { .. } => 2 * max_degree + 1,
            Factor::Chebyshev { .. } => max_degree + 1,
        }
    }

    fn degree(&self, index: usize) -> usize {
        match self {
            Factor::Fourier { .. } => index.div_ceil(2),
            Factor::Chebyshev { .. } => index,
        }
    }

    fn local(&self, x: f64) -> f64 {
        match *self {
            Factor::Fourier { origin, length } => (x - origin) / length,
            Factor::Chebyshev { lo, hi } => (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0),
        }
    }

    /// All basis values at `x`.
    fn values(&self, x: f64, out: &mut [f64]) {
        let t = self.local(x);
        match self {
            Factor::Fourier { .. } => {
                out[0] = 1.0;
                for m in 1..=(out.len() - 1) / 2 {
                    let (s, c) = (2.0 * PI * m as f64 * t).sin_cos();
                    out[2 * m - 1] = c;
                    out[2 * m] = s;
                }
            }
            Factor::Chebyshev { .. } => chebyshev_all(t, out),
        }
    }

    /// Averages of every basis function over `[a, b]` in original coordinates.
    fn averages(&self, a: f64, b: f64, out: &mut [f64]) {
        let (ta, tb) = (self.local(a), self.local(b));
        match self {
            Factor::Fourier { .. } => {
                out[0] = 1.0;
                let du = tb - ta;
                for m in 1..=(out.len() - 1) / 2 {
                    let w = 2.0 * PI * m as f64;
                    out[2 * m - 1] = ((w * tb).sin() - (w * ta).sin()) / (w * du);
                    out[2 * m] = -((w * tb).cos() - (w * ta).cos()) / (w * du);
                }
            }
            Factor::Chebyshev { .. } => {
                let n = out.len();
                let mut va = vec![0.0; n + 1];
                let mut vb = vec![0.0; n + 1];
                chebyshev_all(ta, &mut va);
                chebyshev_all(tb, &mut vb);
                let anti = |v: &[f64], t: f64, k: usize| match k {
                    0 => t,
                    1 => t * t / 2.0,
                    _ => 0.5 * (v[k + 1] / (k + 1) as f64 - v[k - 1] / (k - 1) as f64),
                };
                let dt = tb - ta;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = (anti(&vb, tb, k) - anti(&va, ta, k)) / dt;
                }
            }
        }
    }
}

fn chebyshev_all(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 2..out.len() {
        out[k] = 2.0 * t * out[k - 1] - out[k - 2];
    }
}

fn factors(domain: &PhaseDomain) -> Vec<Factor> {
    match *domain {
        PhaseDomain::Circle { origin, length } => vec![Factor::Fourier { origin, length }],
        PhaseDomain::Interval { lo, hi } => vec![Factor::Chebyshev { lo, hi }],
        PhaseDomain::Cylinder { lo, hi } => {
            vec![Factor::Fourier { origin: 0.0, length: 1.0 }, Factor::Chebyshev { lo, hi }]
        }
        PhaseDomain::Torus2 => vec![
            Factor::Fourier { origin: 0.0, length: 1.0 },
            Factor::Fourier { origin: 0.0, length: 1.0 },
        ],
    }
}

/// A fixed, ordered family of test functions `phi_1, phi_2, ...` with
/// weights `2^-n`, bounded by one in sup norm.
///
/// Members are products of factor basis functions ordered by total degree,
/// constant first. Bin averages are precomputed in closed form for one grid.
#[derive(Debug, Clone)]
pub struct TestFunctionFamily {
    pub domain: PhaseDomain,
    pub bins: usize,
    pub max_degree: usize,
    factors: Vec<Factor>,
    members: Vec<[usize; 2]>,
    weights: Vec<f64>,
    /// `averages[f][i][bin]`: average of factor basis `i` over bin `bin` of factor `f`.
    averages: Vec<Vec<Vec<f64>>>,
}

pub const DEFAULT_MAX_DEGREE: usize = 16;
pub const DEFAULT_MAX_MEMBERS: usize = 64;

impl TestFunctionFamily {
    pub fn new(domain: PhaseDomain, bins: usize) -> Result<Self> {
        Self::with_limits(domain, bins, DEFAULT_MAX_DEGREE, DEFAULT_MAX_MEMBERS)
    }

    pub fn with_limits(
        domain: PhaseDomain,
        bins: usize,
        max_degree: usize,
        max_members: usize,
    ) -> Result<Self> {
        if bins == 0 || max_members == 0 {
            return Err(LabError::InvalidParams("test family needs bins and members".into()));
        }
        let factors = factors(&domain);
        let mut members: Vec<[usize; 2]> = if factors.len() == 1 {
            (0..factors[0].size(max_degree)).map(|i| [i, 0]).collect()
        } else {
            let mut v = Vec::new();
            for i in 0..factors[0].size(max_degree) {
                for j in 0..factors[1].size(max_degree) {
                    v.push([i, j]);
                }
            }
            v.sort_by_key(|&[i, j]| (factors[0].degree(i) + factors[1].degree(j), i, j));
            v
        };
        members.truncate(max_members);
        let weights = (1..=members.len()).map(|n| 0.5f64.powi(n as i32)).collect();
        let ranges = domain.ranges();
        let averages = factors
            .iter()
            .zip(&ranges)
            .map(|(f, &(lo, hi))| {
                let size = f.size(max_degree);
                let mut per_basis = vec![vec![0.0; bins]; size];
                let mut buf = vec![0.0; size];
                for b in 0..bins {
                    let w = (hi - lo) / bins as f64;
                    f.averages(lo + w * b as f64, lo + w * (b + 1) as f64, &mut buf);
                    for (i, v) in buf.iter().enumerate() {
                        per_basis[i][b] = *v;
                    }
                }
                per_basis
            })
            .collect();
        let family = TestFunctionFamily { domain, bins, max_degree, factors, members, weights, averages };
        family.check_separation()?;
        Ok(family)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Every point mass must differ from the uniform measure on some member.
    fn check_separation(&self) -> Result<()> {
        let uniform = self.moments_unchecked(&HistogramMeasure::uniform(self.domain, self.bins));
        let cells = HistogramMeasure::cell_count(&self.domain, self.bins);
        for cell in 0..cells {
            let separated = self.members.iter().zip(&uniform).any(|(m, u)| {
                (self.cell_average(*m, cell) - u).abs() > 1e-12
            });
            if !separated {
                return Err(LabError::InvalidParams(format!(
                    "test family does not separate cell {cell} from the uniform measure"
                )));
            }
        }
        Ok(())
    }

    fn cell_average(&self, m: [usize; 2], cell: usize) -> f64 {
        if self.factors.len() == 1 {
            self.averages[0][m[0]][cell]
        } else {
            self.averages[0][m[0]][cell / self.bins] * self.averages[1][m[1]][cell % self.bins]
        }
    }

    fn check(&self, mu: &HistogramMeasure) -> Result<()> {
        if mu.domain != self.domain || mu.bins != self.bins {
            return Err(LabError::DomainMismatch);
        }
        Ok(())
    }

    /// `(integral of phi_n d mu)_n`.
    pub fn moments(&self, mu: &HistogramMeasure) -> Result<Vec<f64>> {
        self.check(mu)?;
        Ok(self.moments_unchecked(mu))
    }

    fn moments_unchecked(&self, mu: &HistogramMeasure) -> Vec<f64> {
        if self.factors.len() == 1 {
            self.members
                .iter()
                .map(|m| mu.masses.iter().zip(&self.averages[0][m[0]]).map(|(a, b)| a * b).sum())
                .collect()
        } else {
            let b = self.bins;
            // Row sums against the second factor, cached per distinct second index.
            let mut cache: Vec<Option<Vec<f64>>> = vec![None; self.averages[1].len()];
            self.members
                .iter()
                .map(|&[i, j]| {
                    let rows = cache[j].get_or_insert_with(|| {
                        let col = &self.averages[1][j];
                        (0..b)
                            .map(|r| mu.masses[r * b..(r + 1) * b].iter().zip(col).map(|(x, y)| x * y).sum())
                            .collect()
                    });
                    rows.iter().zip(&self.averages[0][i]).map(|(x, y)| x * y).sum()
                })
                .collect()
        }
    }

    /// `sum_n 2^-n |a_n - b_n|` for precomputed moment vectors.
    pub fn distance_from_moments(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * (x - y).abs()).sum()
    }

    /// Value of every member at a point.
    pub fn eval_all(&self, x: &StateVector) -> Vec<f64> {
        let c = x.coords();
        let vals: Vec<Vec<f64>> = self
            .factors
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let mut v = vec![0.0; f.size(self.max_degree)];
                f.values(c[k], &mut v);
                v
            })
            .collect();
        self.members
            .iter()
            .map(|&[i, j]| if vals.len() == 1 { vals[0][i] } else { vals[0][i] * vals[1][j] })
            .collect()
    }
}

/// The truncated weak* distance `d_P(mu, nu) = sum_n 2^-n |int phi_n d mu - int phi_n d nu|`.
pub fn weak_star_distance(
    mu: &HistogramMeasure,
    nu: &HistogramMeasure,
    family: &TestFunctionFamily,
) -> Result<f64> {
    mu.check_compatible(nu)?;
    let a = family.moments(mu)?;
    let b = family.moments(nu)?;
    Ok(family.distance_from_moments(&a, &b))
}
