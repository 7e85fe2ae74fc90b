//! Numerical laboratory for random perturbations of non-uniformly expanding maps.
//!
//! The crate is organized as
//!
//! * [`catalog`]: the concrete systems and their tangent and critical-set data,
//! * [`orbit`]: noise kernels and the seeded random-orbit engine,
//! * [`hyperbolic`]: Pliss selection, hyperbolic times and their tails,
//! * [`measure`]: histograms, the weak* metric and the estimators built on it,
//! * [`viana`]: diagnostics specific to the cylinder skew-product,
//! * [`experiment`]: configuration, experiment drivers and CSV output.

pub mod catalog;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod hyperbolic;
pub mod measure;
pub mod orbit;
pub mod viana;

pub use error::{LabError, Result};

/// Decimal rendering with 12 significant digits and no trailing zeros.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let prec = (11 - exp).clamp(0, 60) as usize;
    let mut s = format!("{v:.prec$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn significant_digit_rendering() {
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(123456.789), "123456.789");
        assert_eq!(fmt_sig(1e-5), "0.00001");
        assert_eq!(fmt_sig(2.0), "2");
        assert_eq!(fmt_sig(-1e-20), "-0.00000000000000000001");
        assert_eq!(fmt_sig(f64::NAN), "nan");
    }
}
