//! Phase domains and points on them.
//!
//! Circle factors are stored in a chart `[origin, origin + length)` and all
//! distances wrap around. Interval factors are closed.

use std::fmt;

use crate::error::{LabError, Result};

/// A point of a one- or two-dimensional phase domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateVector {
    One(f64),
    Two(f64, f64),
}

impl StateVector {
    pub fn dim(&self) -> usize {
        match self {
            StateVector::One(_) => 1,
            StateVector::Two(..) => 2,
        }
    }

    /// First coordinate (the circle coordinate `s` on the cylinder).
    pub fn first(&self) -> f64 {
        match *self {
            StateVector::One(x) | StateVector::Two(x, _) => x,
        }
    }

    /// Last coordinate (the interval coordinate `x` on the cylinder).
    pub fn last(&self) -> f64 {
        match *self {
            StateVector::One(x) | StateVector::Two(_, x) => x,
        }
    }

    pub fn coords(&self) -> [f64; 2] {
        match *self {
            StateVector::One(x) => [x, 0.0],
            StateVector::Two(x, y) => [x, y],
        }
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateVector::One(x) => write!(f, "({x})"),
            StateVector::Two(x, y) => write!(f, "({x}, {y})"),
        }
    }
}

/// The compact manifold a system lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseDomain {
    /// Circle of the given length, charted as `[origin, origin + length)`.
    Circle { origin: f64, length: f64 },
    /// Closed interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// `R/Z × [lo, hi]`.
    Cylinder { lo: f64, hi: f64 },
    /// The flat torus `(R/Z)^2`.
    Torus2,
}

/// Reduce `x` into `[origin, origin + length)`.
pub fn wrap(x: f64, origin: f64, length: f64) -> f64 {
    let mut y = (x - origin).rem_euclid(length);
    // rem_euclid can round up to `length` for tiny negative inputs
    if y >= length {
        y = 0.0;
    }
    origin + y
}

/// Signed displacement `b - a` on a circle of the given length, in `[-L/2, L/2)`.
pub fn circle_delta(a: f64, b: f64, length: f64) -> f64 {
    let d = (b - a).rem_euclid(length);
    if d >= length / 2.0 {
        d - length
    } else {
        d
    }
}

impl PhaseDomain {
    pub fn unit_circle() -> Self {
        PhaseDomain::Circle { origin: 0.0, length: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            PhaseDomain::Circle { .. } | PhaseDomain::Interval { .. } => 1,
            PhaseDomain::Cylinder { .. } | PhaseDomain::Torus2 => 2,
        }
    }

    /// Coordinate ranges `[lo, hi]` of each factor, used for gridding and sampling.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        match *self {
            PhaseDomain::Circle { origin, length } => vec![(origin, origin + length)],
            PhaseDomain::Interval { lo, hi } => vec![(lo, hi)],
            PhaseDomain::Cylinder { lo, hi } => vec![(0.0, 1.0), (lo, hi)],
            PhaseDomain::Torus2 => vec![(0.0, 1.0), (0.0, 1.0)],
        }
    }

    /// Whether each factor is periodic.
    pub fn periodic(&self) -> Vec<bool> {
        match self {
            PhaseDomain::Circle { .. } => vec![true],
            PhaseDomain::Interval { .. } => vec![false],
            PhaseDomain::Cylinder { .. } => vec![true, false],
            PhaseDomain::Torus2 => vec![true, true],
        }
    }

    pub fn volume(&self) -> f64 {
        self.ranges().iter().map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &StateVector) -> bool {
        if x.dim() != self.dim() {
            return false;
        }
        let c = x.coords();
        self.ranges()
            .iter()
            .zip(self.periodic())
            .enumerate()
            .all(|(i, (&(lo, hi), per))| {
                let v = c[i];
                v.is_finite() && v >= lo && if per { v < hi } else { v <= hi }
            })
    }

    pub fn check(&self, x: &StateVector) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(LabError::OutOfDomain(x.to_string()))
        }
    }

    /// Reduce circle coordinates into their chart; interval coordinates are untouched.
    pub fn normalize(&self, x: StateVector) -> StateVector {
        match (*self, x) {
            (PhaseDomain::Circle { origin, length }, StateVector::One(v)) => {
                StateVector::One(wrap(v, origin, length))
            }
            (PhaseDomain::Cylinder { .. }, StateVector::Two(s, v)) => {
                StateVector::Two(wrap(s, 0.0, 1.0), v)
            }
            (PhaseDomain::Torus2, StateVector::Two(a, b)) => {
                StateVector::Two(wrap(a, 0.0, 1.0), wrap(b, 0.0, 1.0))
            }
            (_, x) => x,
        }
    }

    /// Per-coordinate signed displacement from `a` to `b` (wrapped on circle factors).
    pub fn displacement(&self, a: &StateVector, b: &StateVector) -> [f64; 2] {
        let (ca, cb) = (a.coords(), b.coords());
        let mut out = [0.0; 2];
        for (i, ((lo, hi), per)) in self.ranges().into_iter().zip(self.periodic()).enumerate() {
            out[i] = if per {
                circle_delta(ca[i], cb[i], hi - lo)
            } else {
                cb[i] - ca[i]
            };
        }
        out
    }

    /// Flat distance with wrap-around on circle factors.
    pub fn distance(&self, a: &StateVector, b: &StateVector) -> f64 {
        let d = self.displacement(a, b);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Map a point of the unit cube `[0,1)^dim` affinely onto the domain.
    pub fn from_unit(&self, u: [f64; 2]) -> StateVector {
        let r = self.ranges();
        let c0 = r[0].0 + u[0] * (r[0].1 - r[0].0);
        let x = if self.dim() == 1 {
            StateVector::One(c0)
        } else {
            StateVector::Two(c0, r[1].0 + u[1] * (r[1].1 - r[1].0))
        };
        self.normalize(x)
    }
}
