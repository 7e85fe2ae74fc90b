use std::io::Write;

use crate::domain::{PhaseDomain, StateVector};
use crate::error::{LabError, Result};

/// Piecewise-constant probability measure on a regular grid.
///
/// Cells are indexed with the first coordinate major:
/// `index = i0 * bins + i1` on two-dimensional domains.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramMeasure {
    pub domain: PhaseDomain,
    /// Bins per coordinate.
    pub bins: usize,
    pub masses: Vec<f64>,
}

pub(crate) fn coord_bin(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let u = ((v - lo) / (hi - lo) * bins as f64).floor();
    if u <= 0.0 {
        0
    } else {
        (u as usize).min(bins - 1)
    }
}

impl HistogramMeasure {
    pub fn cell_count(domain: &PhaseDomain, bins: usize) -> usize {
        bins.pow(domain.dim() as u32)
    }

    pub fn uniform(domain: PhaseDomain, bins: usize) -> Self {
        let n = Self::cell_count(&domain, bins);
        HistogramMeasure { domain, bins, masses: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(domain: PhaseDomain, bins: usize, x: &StateVector) -> Self {
        let mut masses = vec![0.0; Self::cell_count(&domain, bins)];
        masses[cell_of(&domain, bins, x)] = 1.0;
        HistogramMeasure { domain, bins, masses }
    }

    /// Normalized occupation counts.
    pub fn from_counts(domain: PhaseDomain, bins: usize, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(LabError::Empty("histogram without deposits".into()));
        }
        let masses = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(HistogramMeasure { domain, bins, masses })
    }

    /// Bin masses `F(hi) - F(lo)` of a one-dimensional distribution function.
    pub fn from_cdf<F: Fn(f64) -> f64>(domain: PhaseDomain, bins: usize, cdf: F) -> Result<Self> {
        if domain.dim() != 1 {
            return Err(LabError::NotOneDimensional);
        }
        let (lo, hi) = domain.ranges()[0];
        let edges: Vec<f64> = (0..=bins).map(|i| cdf(lo + (hi - lo) * i as f64 / bins as f64)).collect();
        let masses: Vec<f64> = edges.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
        let total: f64 = masses.iter().sum();
        Ok(HistogramMeasure { domain, bins, masses: masses.iter().map(|m| m / total).collect() })
    }

    /// `sum_i w_i mu_i`, renormalized.
    pub fn mixture(parts: &[&HistogramMeasure], weights: &[f64]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| LabError::Empty("empty mixture".into()))?;
        let mut masses = vec![0.0; first.masses.len()];
        for (p, &w) in parts.iter().zip(weights) {
            first.check_compatible(p)?;
            for (m, v) in masses.iter_mut().zip(&p.masses) {
                *m += w * v;
            }
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(LabError::Empty("mixture has no mass".into()));
        }
        masses.iter_mut().for_each(|m| *m /= total);
        Ok(HistogramMeasure { domain: first.domain, bins: first.bins, masses })
    }

    /// Equal-weight average.
    pub fn average(parts: &[HistogramMeasure]) -> Result<Self> {
        let refs: Vec<&HistogramMeasure> = parts.iter().collect();
        HistogramMeasure::mixture(&refs, &vec![1.0; parts.len()])
    }

    pub fn check_compatible(&self, other: &HistogramMeasure) -> Result<()> {
        if self.domain != other.domain || self.bins != other.bins {
            return Err(LabError::DomainMismatch);
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn l1_distance(&self, other: &HistogramMeasure) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.masses.iter().zip(&other.masses).map(|(a, b)| (a - b).abs()).sum())
    }

    pub fn cell_index(&self, x: &StateVector) -> usize {
        cell_of(&self.domain, self.bins, x)
    }

    /// Coordinate bounds `(lo, hi)` of a cell, one pair per coordinate.
    pub fn cell_bounds(&self, index: usize) -> Vec<(f64, f64)> {
        let ranges = self.domain.ranges();
        let idx: Vec<usize> = if ranges.len() == 1 {
            vec![index]
        } else {
            vec![index / self.bins, index % self.bins]
        };
        ranges
            .iter()
            .zip(idx)
            .map(|(&(lo, hi), i)| {
                let w = (hi - lo) / self.bins as f64;
                (lo + w * i as f64, lo + w * (i + 1) as f64)
            })
            .collect()
    }

    /// Cell widths per coordinate.
    pub fn widths(&self) -> Vec<f64> {
        self.domain.ranges().iter().map(|(lo, hi)| (hi - lo) / self.bins as f64).collect()
    }

    /// Mass of the cells whose centers satisfy the predicate.
    pub fn mass_where<F: Fn(&[f64]) -> bool>(&self, pred: F) -> f64 {
        (0..self.masses.len())
            .filter(|&i| {
                let c: Vec<f64> = self.cell_bounds(i).iter().map(|(a, b)| 0.5 * (a + b)).collect();
                pred(&c)
            })
            .map(|i| self.masses[i])
            .sum()
    }

    /// Write as CSV: `bin_index, coord1_lo, coord1_hi, [coord2_lo, coord2_hi,] mass`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        if self.domain.dim() == 1 {
            writeln!(out, "bin_index,coord1_lo,coord1_hi,mass")?;
        } else {
            writeln!(out, "bin_index,coord1_lo,coord1_hi,coord2_lo,coord2_hi,mass")?;
        }
        for (i, m) in self.masses.iter().enumerate() {
            let b = self.cell_bounds(i);
            write!(out, "{i}")?;
            for (lo, hi) in b {
                write!(out, ",{},{}", crate::fmt_sig(lo), crate::fmt_sig(hi))?;
            }
            writeln!(out, ",{}", crate::fmt_sig(*m))?;
        }
        Ok(())
    }
}

pub(crate) fn cell_of(domain: &PhaseDomain, bins: usize, x: &StateVector) -> usize {
    let r = domain.ranges();
    let c = x.coords();
    let i0 = coord_bin(c[0], r[0].0, r[0].1, bins);
    if r.len() == 1 {
        i0
    } else {
        i0 * bins + coord_bin(c[1], r[1].0, r[1].1, bins)
    }
}

/// Integer occupation counts; merging counters is exact and order-free.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationCounter {
    pub domain: PhaseDomain,
    pub bins: usize,
    pub counts: Vec<u64>,
}

impl OccupationCounter {
    pub fn new(domain: PhaseDomain, bins: usize) -> Self {
        OccupationCounter { domain, bins, counts: vec![0; HistogramMeasure::cell_count(&domain, bins)] }
    }

    #[inline]
    pub fn deposit(&mut self, x: &StateVector) {
        self.counts[cell_of(&self.domain, self.bins, x)] += 1;
    }

    pub fn merge(&mut self, other: &OccupationCounter) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn finish(&self) -> Result<HistogramMeasure> {
        HistogramMeasure::from_counts(self.domain, self.bins, &self.counts)
    }
}
