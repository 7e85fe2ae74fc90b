//! Configuration, experiment drivers and their file outputs.
//!
//! Every driver is deterministic given the configuration: orbit `i` of a batch
//! draws its noise from stream `i` of the configured seed, so reruns produce
//! byte-identical CSV files regardless of thread count.

mod config;
mod drivers;
mod output;
mod stability;

use std::fmt;

use crate::catalog::{MapSystem, SystemKind};
use crate::domain::StateVector;
use crate::error::LabError;

pub use config::{load_config, parse_config, Budget, ConfigError, ExperimentConfig, Thresholds};
pub use drivers::{
    orbit_output, run_physical_count, run_tail_experiment, run_viana_diagnostics, CountReport, CountRow,
    TailReport, TailRow, VianaReport, VianaRow,
};
pub use output::{emit_outputs, OutputSet};
pub use stability::{
    row_labels, run_stability_sweep, verdict, ClusterSummary, ReferenceKind, StabilityReport, StabilityRow, Verdict,
};

/// A driver failure carrying whatever was computed before the error.
#[derive(Debug, Clone)]
pub struct DriverFailure<R> {
    pub partial: R,
    pub error: LabError,
}

pub type DriverResult<R> = std::result::Result<R, DriverFailure<R>>;

/// Anything a driver reports.
pub trait Report {
    fn outputs(&self) -> OutputSet;
}

#[derive(Debug)]
pub enum ExperimentError {
    Config(ConfigError),
    Lab(LabError),
    Io(std::io::Error),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Config(e) => write!(f, "{e}"),
            ExperimentError::Lab(e) => write!(f, "{e}"),
            ExperimentError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<ConfigError> for ExperimentError {
    fn from(e: ConfigError) -> Self {
        ExperimentError::Config(e)
    }
}

impl From<LabError> for ExperimentError {
    fn from(e: LabError) -> Self {
        ExperimentError::Lab(e)
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e)
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const PLASTIC: f64 = 0.754_877_666_246_692_8;

fn frac(v: f64) -> f64 {
    v - v.floor()
}

/// Deterministic, well-spread start points.
///
/// `fig2` gets half of its starts in each trapping interval (left first); the
/// other systems use a Kronecker sequence over the whole domain. Points closer
/// to the critical set than the floor are nudged.
pub fn start_points(sys: &MapSystem, count: usize) -> Vec<StateVector> {
    let kron = |i: usize| [frac(0.2 + i as f64 * GOLDEN), frac(0.35 + i as f64 * PLASTIC)];
    (0..count)
        .map(|i| {
            let mut x = match &sys.kind {
                SystemKind::Fig2(m) => {
                    let left = count.div_ceil(2);
                    let (j, (lo, hi)) = if i < left { (i, m.left_trap) } else { (i - left, m.right_trap) };
                    StateVector::One(lo + (hi - lo) * (0.05 + 0.9 * kron(j)[0]))
                }
                _ => sys.point_from_unit(kron(i)),
            };
            while sys.critical_distance(&x).is_some_and(|d| d < 1e-9) {
                x = sys.domain.normalize(match x {
                    StateVector::One(a) => StateVector::One(a + 1e-6),
                    StateVector::Two(a, b) => StateVector::Two(a, b + 1e-6),
                });
            }
            x
        })
        .collect()
}
