//! The catalog of concrete dynamical systems.
//!
//! | id         | domain                   | map                                                  |
//! |------------|--------------------------|------------------------------------------------------|
//! | `doubling` | circle `[0,1)`           | `s -> k s mod 1`                                     |
//! | `fig1`     | circle `[-3,1)` (len 4)  | `1 - 2x^2` on `[-1,1]`, `2(x+2)^2 - 3` on `[-3,-1]`  |
//! | `fig2`     | interval `[-7,2]`        | `a - x^2`, `(x+5)^2 - 5 - a`, C² glue on `[-3,-2]`   |
//! | `viana`    | cylinder `S^1 × I`       | `(d s + kappa x, a0 + alpha sin(2 pi s) - x^2)`      |
//! | `torus`    | torus `T^2`              | `3z mod 1` with a damping bump in a disk `W`         |
//!
//! Every system is immutable once built and can be shared across threads.

pub mod fig2;
pub mod misiurewicz;
pub mod torus;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::domain::{wrap, PhaseDomain, StateVector};
use crate::error::{LabError, Result};

pub use fig2::Fig2Map;
pub use misiurewicz::{default_a0, find_misiurewicz_a0, MisiurewiczParam};
pub use torus::TorusMap;

/// Parameter record used to build systems from configuration.
pub type ParamRecord = BTreeMap<String, f64>;

/// Default distance below which a point counts as critical.
pub const CRITICAL_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CatalogId {
    Doubling,
    Fig1,
    Fig2,
    Viana,
    Torus,
}

impl CatalogId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CatalogId::Doubling => "doubling",
            CatalogId::Fig1 => "fig1",
            CatalogId::Fig2 => "fig2",
            CatalogId::Viana => "viana",
            CatalogId::Torus => "torus",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            CatalogId::Doubling => &["factor", "b"],
            CatalogId::Fig1 => &["b"],
            CatalogId::Fig2 => &["a", "pad", "b"],
            CatalogId::Viana => &["d", "a0", "alpha_skew", "coupling", "eta", "lo", "hi", "b"],
            CatalogId::Torus => &["eta", "amplitude", "b"],
        }
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CatalogId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doubling" => Ok(CatalogId::Doubling),
            "fig1" => Ok(CatalogId::Fig1),
            "fig2" => Ok(CatalogId::Fig2),
            "viana" => Ok(CatalogId::Viana),
            "torus" => Ok(CatalogId::Torus),
            other => Err(LabError::UnknownCatalogId(other.to_string())),
        }
    }
}

/// Constants of the non-degeneracy conditions near the critical set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    pub big_b: f64,
    pub beta: f64,
    pub b_exponent: f64,
}

impl SmoothnessConstants {
    pub fn new(big_b: f64, beta: f64, b_exponent: f64) -> Result<Self> {
        let cap = 0.5f64.min(1.0 / (2.0 * beta));
        if !(big_b > 1.0) || !(beta > 0.0) || !(b_exponent > 0.0 && b_exponent < cap) {
            return Err(LabError::InvalidParams(format!(
                "smoothness constants B = {big_b}, beta = {beta}, b = {b_exponent} \
                 violate B > 1, beta > 0, 0 < b < {cap}"
            )));
        }
        Ok(SmoothnessConstants { big_b, beta, b_exponent })
    }
}

/// Parameters of the skew-product on the cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VianaParams {
    pub d: u32,
    pub a0: f64,
    pub alpha_skew: f64,
    /// Horizontal coupling `kappa` in `s -> d s + kappa x`; zero gives the
    /// exact skew-product form.
    pub coupling: f64,
    pub lo: f64,
    pub hi: f64,
    pub eta: f64,
}

impl VianaParams {
    /// Smallest distance of `q(S^1 × I)` to the ends of `I`.
    pub fn trapping_margin(&self) -> f64 {
        let top = if self.lo <= 0.0 && self.hi >= 0.0 {
            self.a0 + self.alpha_skew
        } else {
            self.a0 + self.alpha_skew - self.lo.abs().min(self.hi.abs()).powi(2)
        };
        let bottom = self.a0 - self.alpha_skew - self.lo.abs().max(self.hi.abs()).powi(2);
        (self.hi - top).min(bottom - self.lo)
    }

    /// Numerical invariance check of `S^1 × I` on a 256×256 grid.
    pub fn invariance_scan(&self) -> bool {
        let n = 256;
        (0..n).all(|i| {
            let s = i as f64 / n as f64;
            let a = self.a0 + self.alpha_skew * (2.0 * PI * s).sin();
            (0..=n).all(|j| {
                let x = self.lo + (self.hi - self.lo) * j as f64 / n as f64;
                let y = a - x * x;
                y > self.lo && y < self.hi
            })
        })
    }

    /// Build with `I = [-1.9, 1.9]` shrunk by 1% steps until the invariance scan passes.
    pub fn with_shrunk_interval(
        d: u32,
        a0: f64,
        alpha_skew: f64,
        coupling: f64,
        eta: f64,
    ) -> Result<Self> {
        let mut half = 1.9;
        for _ in 0..200 {
            let p = VianaParams { d, a0, alpha_skew, coupling, lo: -half, hi: half, eta };
            if p.invariance_scan() && p.trapping_margin() > 0.0 {
                return Ok(p);
            }
            half *= 0.99;
        }
        Err(LabError::InvalidParams(format!(
            "viana: no invariant interval found for a0 = {a0}, alpha = {alpha_skew}"
        )))
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidParams(format!("viana: {msg}")));
        if self.d < 16 {
            return bad(format!("d = {} < 16", self.d));
        }
        if !(self.a0 > 1.0 && self.a0 < 2.0) {
            return bad(format!("a0 = {} outside (1, 2)", self.a0));
        }
        if !(self.alpha_skew > 0.0 && self.alpha_skew < 0.1) {
            return bad(format!("alpha_skew = {} outside (0, 0.1)", self.alpha_skew));
        }
        if !(self.coupling.abs() <= self.alpha_skew) {
            return bad(format!("|coupling| = {} exceeds alpha_skew", self.coupling.abs()));
        }
        if !(self.eta > 0.0 && self.eta < 0.25) {
            return bad(format!("eta = {} outside (0, 1/4)", self.eta));
        }
        if !(self.lo > -2.0 && self.hi < 2.0 && self.lo < self.hi) {
            return bad(format!("interval [{}, {}] not inside (-2, 2)", self.lo, self.hi));
        }
        if !self.invariance_scan() || !(self.trapping_margin() > 0.0) {
            return bad(format!(
                "S^1 × [{}, {}] is not mapped into its interior",
                self.lo, self.hi
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    Doubling { factor: u32 },
    Fig1,
    Fig2(Fig2Map),
    Viana(VianaParams),
    Torus(TorusMap),
}

/// A catalog system: evaluation, tangent data and critical-set geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSystem {
    pub id: CatalogId,
    pub domain: PhaseDomain,
    pub kind: SystemKind,
    pub constants: SmoothnessConstants,
    pub critical_floor: f64,
}

const FIG1_CRITICAL: [f64; 2] = [-2.0, 0.0];

fn take(params: &ParamRecord, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn as_integer(value: f64, key: &str) -> Result<u32> {
    if value.fract() != 0.0 || value < 0.0 || value > u32::MAX as f64 {
        return Err(LabError::InvalidParams(format!("{key} = {value} must be a non-negative integer")));
    }
    Ok(value as u32)
}

/// Build a catalog system from its id and a parameter record.
///
/// Missing parameters take their defaults; unknown parameter names are rejected.
pub fn build_system(name: &str, params: &ParamRecord) -> Result<MapSystem> {
    let id: CatalogId = name.parse()?;
    if let Some(bad) = params.keys().find(|k| !id.param_names().contains(&k.as_str())) {
        return Err(LabError::InvalidParams(format!("{id} has no parameter `{bad}`")));
    }
    let b = take(params, "b", 0.25);
    match id {
        CatalogId::Doubling => {
            let factor = as_integer(take(params, "factor", 2.0), "factor")?;
            if factor < 2 {
                return Err(LabError::InvalidParams(format!("doubling: factor = {factor} < 2")));
            }
            Ok(MapSystem {
                id,
                domain: PhaseDomain::unit_circle(),
                kind: SystemKind::Doubling { factor },
                constants: SmoothnessConstants::new(2.0, 1.0, b)?,
                critical_floor: CRITICAL_FLOOR,
            })
        }
        CatalogId::Fig1 => Ok(MapSystem {
            id,
            domain: PhaseDomain::Circle { origin: -3.0, length: 4.0 },
            kind: SystemKind::Fig1,
            constants: SmoothnessConstants::new(4.0, 1.0, b)?,
            critical_floor: CRITICAL_FLOOR,
        }),
        CatalogId::Fig2 => {
            let a = match params.get("a") {
                Some(&a) => a,
                None => default_a0(),
            };
            let map = Fig2Map::new(a, take(params, "pad", 0.05))?;
            Ok(MapSystem {
                id,
                domain: PhaseDomain::Interval { lo: fig2::DOMAIN.0, hi: fig2::DOMAIN.1 },
                kind: SystemKind::Fig2(map),
                constants: SmoothnessConstants::new(4.0, 1.0, b)?,
                critical_floor: CRITICAL_FLOOR,
            })
        }
        CatalogId::Viana => {
            let d = as_integer(take(params, "d", 16.0), "d")?;
            let a0 = match params.get("a0") {
                Some(&a) => a,
                None => default_a0(),
            };
            let alpha = take(params, "alpha_skew", 0.01);
            let coupling = take(params, "coupling", 0.0);
            let eta = take(params, "eta", 0.1);
            let vp = match (params.get("lo"), params.get("hi")) {
                (Some(&lo), Some(&hi)) => VianaParams { d, a0, alpha_skew: alpha, coupling, lo, hi, eta },
                (None, None) => {
                    if !(a0 > 1.0 && a0 < 2.0) || !(alpha > 0.0) {
                        return Err(LabError::InvalidParams(format!(
                            "viana: a0 = {a0}, alpha_skew = {alpha} out of range"
                        )));
                    }
                    VianaParams::with_shrunk_interval(d, a0, alpha, coupling, eta)?
                }
                _ => {
                    return Err(LabError::InvalidParams(
                        "viana: give both `lo` and `hi` or neither".into(),
                    ))
                }
            };
            vp.validate()?;
            Ok(MapSystem {
                id,
                domain: PhaseDomain::Cylinder { lo: vp.lo, hi: vp.hi },
                kind: SystemKind::Viana(vp),
                constants: SmoothnessConstants::new(4.0, 1.0, b)?,
                critical_floor: CRITICAL_FLOOR,
            })
        }
        CatalogId::Torus => {
            let eta = take(params, "eta", 0.2);
            let amplitude = take(params, "amplitude", TorusMap::default_amplitude(eta));
            Ok(MapSystem {
                id,
                domain: PhaseDomain::Torus2,
                kind: SystemKind::Torus(TorusMap::new(eta, amplitude)?),
                constants: SmoothnessConstants::new(4.0, 1.0, b)?,
                critical_floor: CRITICAL_FLOOR,
            })
        }
    }
}

fn fig1_raw(x: f64) -> (f64, f64) {
    if x >= -1.0 {
        (1.0 - 2.0 * x * x, -4.0 * x)
    } else {
        let y = x + 2.0;
        (2.0 * y * y - 3.0, 4.0 * y)
    }
}

impl MapSystem {
    pub fn name(&self) -> &'static str {
        self.id.as_str()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn viana(&self) -> Option<&VianaParams> {
        match &self.kind {
            SystemKind::Viana(p) => Some(p),
            _ => None,
        }
    }

    pub fn fig2(&self) -> Option<&Fig2Map> {
        match &self.kind {
            SystemKind::Fig2(m) => Some(m),
            _ => None,
        }
    }

    pub fn torus(&self) -> Option<&TorusMap> {
        match &self.kind {
            SystemKind::Torus(m) => Some(m),
            _ => None,
        }
    }

    /// Evaluate the map, checking that `x` lies in the domain.
    pub fn eval(&self, x: &StateVector) -> Result<StateVector> {
        self.domain.check(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Image with circle coordinates reduced into their charts.
    pub fn eval_unchecked(&self, x: &StateVector) -> StateVector {
        self.domain.normalize(self.eval_raw(x))
    }

    /// Image before reduction of circle coordinates.
    pub fn eval_raw(&self, x: &StateVector) -> StateVector {
        match (&self.kind, *x) {
            (SystemKind::Doubling { factor }, StateVector::One(s)) => {
                StateVector::One(*factor as f64 * s)
            }
            (SystemKind::Fig1, StateVector::One(v)) => StateVector::One(fig1_raw(v).0),
            (SystemKind::Fig2(m), StateVector::One(v)) => StateVector::One(m.eval(v)),
            (SystemKind::Viana(p), StateVector::Two(s, v)) => {
                let a = p.a0 + p.alpha_skew * (2.0 * PI * s).sin();
                StateVector::Two(p.d as f64 * s + p.coupling * v, a - v * v)
            }
            (SystemKind::Torus(m), StateVector::Two(a, b)) => {
                let (u, v) = m.eval_raw(a, b);
                StateVector::Two(u, v)
            }
            (_, x) => x,
        }
    }

    /// Tangent matrix at `x` (for 1-D systems only entry `[0][0]` is used).
    pub fn tangent(&self, x: &StateVector) -> [[f64; 2]; 2] {
        match (&self.kind, *x) {
            (SystemKind::Doubling { factor }, _) => [[*factor as f64, 0.0], [0.0, 0.0]],
            (SystemKind::Fig1, StateVector::One(v)) => [[fig1_raw(v).1, 0.0], [0.0, 0.0]],
            (SystemKind::Fig2(m), StateVector::One(v)) => [[m.derivative(v), 0.0], [0.0, 0.0]],
            (SystemKind::Viana(p), StateVector::Two(s, v)) => [
                [p.d as f64, p.coupling],
                [2.0 * PI * p.alpha_skew * (2.0 * PI * s).cos(), -2.0 * v],
            ],
            (SystemKind::Torus(m), StateVector::Two(a, b)) => m.tangent(a, b),
            _ => [[f64::NAN; 2]; 2],
        }
    }

    /// `|det Df(x)|`; zero at critical points.
    pub fn jac_det(&self, x: &StateVector) -> f64 {
        let m = self.tangent(x);
        if self.dim() == 1 {
            m[0][0].abs()
        } else {
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs()
        }
    }

    /// `|Df(x)^{-1}|`: `1/|f'|` in dimension one, the max-entry norm on the
    /// cylinder and the operator norm on the torus.
    pub fn inv_tangent_norm(&self, x: &StateVector) -> Result<f64> {
        if let Some(d) = self.critical_distance(x) {
            if d < self.critical_floor {
                return Err(LabError::CriticalPoint(x.to_string()));
            }
        }
        let m = self.tangent(x);
        let norm = match self.kind {
            SystemKind::Doubling { .. } | SystemKind::Fig1 | SystemKind::Fig2(_) => 1.0 / m[0][0].abs(),
            SystemKind::Viana(_) => {
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max) / det.abs()
            }
            SystemKind::Torus(_) => torus::inverse_operator_norm(m),
        };
        if norm.is_finite() {
            Ok(norm)
        } else {
            Err(LabError::CriticalPoint(x.to_string()))
        }
    }

    /// Critical points of a one-dimensional system.
    pub fn critical_points(&self) -> Vec<f64> {
        match &self.kind {
            SystemKind::Fig1 => FIG1_CRITICAL.to_vec(),
            SystemKind::Fig2(m) => m.critical_points.clone(),
            _ => Vec::new(),
        }
    }

    pub fn has_critical_set(&self) -> bool {
        matches!(self.kind, SystemKind::Fig1 | SystemKind::Fig2(_) | SystemKind::Viana(_))
    }

    /// Distance to the critical set, or `None` when it is empty.
    pub fn critical_distance(&self, x: &StateVector) -> Option<f64> {
        match (&self.kind, *x) {
            (SystemKind::Viana(_), StateVector::Two(_, v)) => Some(v.abs()),
            (SystemKind::Fig1, StateVector::One(v)) => Some(
                FIG1_CRITICAL
                    .iter()
                    .map(|&c| {
                        let d = (v - c).abs();
                        d.min(4.0 - d)
                    })
                    .fold(f64::INFINITY, f64::min),
            ),
            (SystemKind::Fig2(m), StateVector::One(v)) => Some(
                m.critical_points.iter().map(|c| (v - c).abs()).fold(f64::INFINITY, f64::min),
            ),
            _ => None,
        }
    }

    /// `dist_delta(x, C)`: the distance to `C` when it is below `delta`, else 1.
    pub fn truncated_distance(&self, x: &StateVector, delta: f64) -> f64 {
        match self.critical_distance(x) {
            Some(d) if d < delta => d,
            _ => 1.0,
        }
    }

    /// Distance from the image of the interval factor to its boundary (and to
    /// the trapping intervals for `fig2`); `None` for boundaryless domains.
    pub fn trapping_margin(&self) -> Option<f64> {
        match &self.kind {
            SystemKind::Fig2(m) => Some(m.trapping_margin),
            SystemKind::Viana(p) => Some(p.trapping_margin()),
            _ => None,
        }
    }

    /// Whether the system has a closed-form SRB reference and how many.
    pub fn srb_count(&self) -> Option<usize> {
        match self.kind {
            SystemKind::Doubling { .. } | SystemKind::Viana(_) | SystemKind::Torus(_) => Some(1),
            SystemKind::Fig1 | SystemKind::Fig2(_) => Some(2),
        }
    }

    /// Uniformly distributed point of the domain from two unit variates.
    pub fn point_from_unit(&self, u: [f64; 2]) -> StateVector {
        self.domain.from_unit(u)
    }

    /// Reduce a raw coordinate into the fig1 / doubling circle chart.
    pub fn wrap_circle(&self, v: f64) -> f64 {
        match self.domain {
            PhaseDomain::Circle { origin, length } => wrap(v, origin, length),
            _ => v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(name: &str) -> MapSystem {
        build_system(name, &ParamRecord::new()).unwrap()
    }

    #[test]
    fn doubling_examples() {
        let mut p = ParamRecord::new();
        p.insert("factor".into(), 2.0);
        let s = build_system("doubling", &p).unwrap();
        let y = s.eval(&StateVector::One(0.3)).unwrap();
        assert!((y.first() - 0.6).abs() < 1e-15);
        assert_eq!(s.inv_tangent_norm(&StateVector::One(0.77)).unwrap(), 0.5);
        assert_eq!(s.jac_det(&StateVector::One(0.1)), 2.0);
        assert_eq!(s.critical_distance(&StateVector::One(0.1)), None);
    }

    #[test]
    fn fig1_examples() {
        let s = sys("fig1");
        let y = s.eval(&StateVector::One(0.0)).unwrap();
        assert_eq!(s.domain.distance(&y, &StateVector::One(1.0)), 0.0);
        assert_eq!(s.eval(&StateVector::One(-2.0)).unwrap(), StateVector::One(-3.0));
        assert_eq!(s.eval(&StateVector::One(-3.0)).unwrap(), StateVector::One(-1.0));
        assert!(matches!(
            s.inv_tangent_norm(&StateVector::One(0.0)),
            Err(LabError::CriticalPoint(_))
        ));
        assert_eq!(s.jac_det(&StateVector::One(0.0)), 0.0);
        assert!((s.critical_distance(&StateVector::One(0.2)).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(s.truncated_distance(&StateVector::One(0.5), 0.1), 1.0);
        assert_eq!(s.truncated_distance(&StateVector::One(0.05), 0.1), 0.05);
        assert_eq!(s.truncated_distance(&StateVector::One(0.1), 0.1), 1.0);
        // x = 1 is the glue point -3
        assert_eq!(fig1_raw(1.0).0, -1.0);
    }

    #[test]
    fn fig2_examples() {
        let s = sys("fig2");
        let a = s.fig2().unwrap().a;
        assert_eq!(s.eval(&StateVector::One(0.0)).unwrap(), StateVector::One(a));
        assert!(s.trapping_margin().unwrap() > 0.0);
    }

    #[test]
    fn viana_examples() {
        let s = sys("viana");
        let p = *s.viana().unwrap();
        assert_eq!(s.eval(&StateVector::Two(0.0, 0.0)).unwrap(), StateVector::Two(0.0, p.a0));
        let y = s.eval(&StateVector::Two(0.25, 0.3)).unwrap();
        assert_eq!(y.first(), 0.0);
        assert!((s.inv_tangent_norm(&StateVector::Two(0.4, 0.25)).unwrap() - 2.0).abs() < 1e-15);
        let x = StateVector::Two(0.1, 0.7);
        assert!((s.jac_det(&x) - 2.0 * 16.0 * 0.7).abs() < 1e-12);
        assert_eq!(s.critical_distance(&StateVector::Two(0.9, 0.3)), Some(0.3));
        assert!(p.hi < 1.9 && p.lo > -1.9);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            build_system("henon", &ParamRecord::new()),
            Err(LabError::UnknownCatalogId(_))
        ));
        let mut p = ParamRecord::new();
        p.insert("d".into(), 8.0);
        assert!(matches!(build_system("viana", &p), Err(LabError::InvalidParams(_))));
        let mut p = ParamRecord::new();
        p.insert("alpha_skew".into(), -0.1);
        assert!(build_system("viana", &p).is_err());
        let mut p = ParamRecord::new();
        p.insert("nope".into(), 1.0);
        assert!(build_system("fig1", &p).is_err());
    }

    #[test]
    fn smoothness_constant_bounds() {
        assert!(SmoothnessConstants::new(2.0, 1.0, 0.49).is_ok());
        assert!(SmoothnessConstants::new(2.0, 2.0, 0.3).is_err());
        assert!(SmoothnessConstants::new(1.0, 1.0, 0.1).is_err());
    }
}
