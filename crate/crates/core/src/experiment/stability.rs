use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::output::{Csv, OutputSet};
use super::{start_points, DriverFailure, DriverResult, Report};
use crate::catalog::{MapSystem, SystemKind};
use crate::domain::StateVector;
use crate::error::{LabError, Result};
use crate::fmt_sig;
use crate::measure::{
    birkhoff_histogram, cluster_measures, convex_fit, random_birkhoff_histogram, stationarity_residual,
    wasserstein_1d, weak_star_distance, HistogramMeasure, TestFunctionFamily,
};
use crate::viana::typical_birkhoff_histogram;

/// Whether distances are measured against closed-form SRB measures or
/// against unperturbed long-run histograms standing in for them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Exact,
    Proxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    StableConsistent,
    Inconclusive,
    Inconsistent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::StableConsistent => "stable-consistent",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub size: usize,
    /// Index of the closest reference measure.
    pub nearest: usize,
    pub d_weakstar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub epsilon: f64,
    /// `d_P` from the averaged `mu^eps` to the convex-fit reconstruction.
    pub d_weakstar: f64,
    /// Transport distance to the same reconstruction; NaN on surfaces.
    pub d_wasserstein: f64,
    pub l_clusters: usize,
    pub weights: Vec<f64>,
    pub fit_residual: f64,
    pub stationarity_residual: f64,
    /// Monte Carlo standard error of `d_weakstar`, from the spread across starts.
    pub standard_error: f64,
    pub clusters: Vec<ClusterSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub system: String,
    pub reference: ReferenceKind,
    pub p: usize,
    pub tolerance: f64,
    pub rows: Vec<StabilityRow>,
    pub verdict: Verdict,
}

fn slack(rows: &[StabilityRow], i: usize) -> f64 {
    rows[i - 1].standard_error.max(rows[i].standard_error)
}

/// The sweep verdict as a function of the rows alone.
///
/// Stable-consistent: `d_weakstar` never rises by more than one standard
/// error between consecutive rows and ends below `tol`. Inconsistent: it ends
/// at or above `tol` and rises somewhere. Anything else is inconclusive.
pub fn verdict(rows: &[StabilityRow], tol: f64) -> Verdict {
    let Some(last) = rows.last() else { return Verdict::Inconclusive };
    let monotone = (1..rows.len()).all(|i| rows[i].d_weakstar <= rows[i - 1].d_weakstar + slack(rows, i));
    let below = last.d_weakstar < tol;
    match (monotone, below) {
        (true, true) => Verdict::StableConsistent,
        (false, false) => Verdict::Inconsistent,
        _ => Verdict::Inconclusive,
    }
}

/// Per-row status: `rise` when `d_weakstar` exceeds the previous row by more
/// than the slack, otherwise `below-tol` or `above-tol`.
pub fn row_labels(rows: &[StabilityRow], tol: f64) -> Vec<&'static str> {
    (0..rows.len())
        .map(|i| {
            if i > 0 && rows[i].d_weakstar > rows[i - 1].d_weakstar + slack(rows, i) {
                "rise"
            } else if rows[i].d_weakstar < tol {
                "below-tol"
            } else {
                "above-tol"
            }
        })
        .collect()
}

fn arcsine_cdf(x: f64, center: f64) -> f64 {
    let y = x - center;
    if y <= -1.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        0.5 + y.asin() / PI
    }
}

/// SRB references on the histogram grid.
pub(crate) fn references(
    sys: &MapSystem,
    bins: usize,
    proxy_n: usize,
    seed: u64,
) -> Result<(Vec<HistogramMeasure>, ReferenceKind)> {
    match &sys.kind {
        SystemKind::Doubling { .. } => Ok((vec![HistogramMeasure::uniform(sys.domain, bins)], ReferenceKind::Exact)),
        SystemKind::Fig1 => Ok((
            vec![
                HistogramMeasure::from_cdf(sys.domain, bins, |x| arcsine_cdf(x, 0.0))?,
                HistogramMeasure::from_cdf(sys.domain, bins, |x| arcsine_cdf(x, -2.0))?,
            ],
            ReferenceKind::Exact,
        )),
        SystemKind::Fig2(_) => {
            let starts = start_points(sys, 2);
            let basis = starts
                .iter()
                .map(|x| birkhoff_histogram(sys, *x, proxy_n, bins))
                .collect::<Result<Vec<_>>>()?;
            Ok((basis, ReferenceKind::Proxy))
        }
        SystemKind::Viana(_) => {
            let x = start_points(sys, 1)[0];
            Ok((vec![typical_birkhoff_histogram(sys, x.last(), proxy_n, bins, seed)?], ReferenceKind::Proxy))
        }
        SystemKind::Torus(_) => {
            let x = start_points(sys, 1)[0];
            Ok((vec![birkhoff_histogram(sys, x, proxy_n, bins)?], ReferenceKind::Proxy))
        }
    }
}

fn sweep_row(
    cfg: &ExperimentConfig,
    sys: &MapSystem,
    family: &TestFunctionFamily,
    basis: &[HistogramMeasure],
    starts: &[StateVector],
    epsilon: f64,
) -> Result<StabilityRow> {
    let b = &cfg.budget;
    let kernel = cfg.kernel(sys, epsilon)?;
    let hists = starts
        .par_iter()
        .enumerate()
        .map(|(i, x)| random_birkhoff_histogram(sys, &kernel, *x, b.n, b.bins, b.seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let mu = HistogramMeasure::average(&hists)?;
    let fit = convex_fit(&mu, basis)?;
    let parts: Vec<&HistogramMeasure> = basis.iter().collect();
    let recon = HistogramMeasure::mixture(&parts, &fit.weights)?;
    let d_weakstar = weak_star_distance(&mu, &recon, family)?;
    let d_wasserstein = if sys.dim() == 1 { wasserstein_1d(&mu, &recon)? } else { f64::NAN };
    let clustering = cluster_measures(&hists, cfg.thresholds.merge, family)?;
    let mut clusters = Vec::with_capacity(clustering.l);
    for (c, rep) in clustering.representatives.iter().enumerate() {
        let mut best = (0, f64::INFINITY);
        for (k, r) in basis.iter().enumerate() {
            let d = weak_star_distance(rep, r, family)?;
            if d < best.1 {
                best = (k, d);
            }
        }
        let size = clustering.assignments.iter().filter(|&&a| a == c).count();
        clusters.push(ClusterSummary { size, nearest: best.0, d_weakstar: best.1 });
    }
    let stat = stationarity_residual(&mu, sys, &kernel, family, b.mc_samples, b.seed)?;
    let mut sq = 0.0;
    for h in &hists {
        sq += weak_star_distance(h, &mu, family)?.powi(2);
    }
    let n = hists.len() as f64;
    Ok(StabilityRow {
        epsilon,
        d_weakstar,
        d_wasserstein,
        l_clusters: clustering.l,
        weights: fit.weights,
        fit_residual: fit.residual,
        stationarity_residual: stat,
        standard_error: (sq / n).sqrt() / n.sqrt(),
        clusters,
    })
}

/// Estimate `mu^eps` at every noise level and compare it with the SRB references.
///
/// Start `i` uses noise stream `i` at every level, so the levels share their
/// underlying uniform draws.
pub fn run_stability_sweep(cfg: &ExperimentConfig) -> DriverResult<StabilityReport> {
    let mut report = StabilityReport {
        system: cfg.system.to_string(),
        reference: ReferenceKind::Exact,
        p: 0,
        tolerance: cfg.thresholds.stability_tol,
        rows: Vec::new(),
        verdict: Verdict::Inconclusive,
    };
    let setup = (|| -> Result<_> {
        let sys = cfg.build_system()?;
        let family = TestFunctionFamily::new(sys.domain, cfg.budget.bins)?;
        let proxy_n = cfg.budget.n.checked_mul(10).ok_or_else(|| LabError::InvalidParams("budget.n too large".into()))?;
        let (basis, kind) = references(&sys, cfg.budget.bins, proxy_n, cfg.budget.seed)?;
        Ok((sys, family, basis, kind))
    })();
    let (sys, family, basis, kind) = match setup {
        Ok(s) => s,
        Err(error) => return Err(DriverFailure { partial: report, error }),
    };
    report.reference = kind;
    report.p = basis.len();
    let starts = start_points(&sys, cfg.budget.starts);
    for &eps in &cfg.epsilons {
        match sweep_row(cfg, &sys, &family, &basis, &starts, eps) {
            Ok(row) => report.rows.push(row),
            Err(error) => return Err(DriverFailure { partial: report, error }),
        }
    }
    report.verdict = verdict(&report.rows, report.tolerance);
    Ok(report)
}

impl Report for StabilityReport {
    fn outputs(&self) -> OutputSet {
        let mut set = OutputSet::default();
        let mut header: Vec<String> = ["epsilon", "d_weakstar", "d_wasserstein", "l_clusters"].map(String::from).to_vec();
        header.extend((1..=self.p).map(|i| format!("w{i}")));
        header.extend(["fit_residual", "stationarity_residual", "verdict_row"].map(String::from));
        let mut csv = Csv::new(&header);
        let labels = row_labels(&self.rows, self.tolerance);
        for (row, label) in self.rows.iter().zip(&labels) {
            let mut cells = vec![
                fmt_sig(row.epsilon),
                fmt_sig(row.d_weakstar),
                fmt_sig(row.d_wasserstein),
                row.l_clusters.to_string(),
            ];
            cells.extend((0..self.p).map(|i| fmt_sig(row.weights.get(i).copied().unwrap_or(0.0))));
            cells.extend([fmt_sig(row.fit_residual), fmt_sig(row.stationarity_residual), label.to_string()]);
            csv.row(&cells);
        }
        set.add("stability.csv", csv.finish());

        let mut clusters = Csv::new(&["epsilon", "cluster", "size", "nearest_reference", "d_weakstar"].map(String::from));
        for row in &self.rows {
            for (c, s) in row.clusters.iter().enumerate() {
                clusters.row(&[
                    fmt_sig(row.epsilon),
                    (c + 1).to_string(),
                    s.size.to_string(),
                    (s.nearest + 1).to_string(),
                    fmt_sig(s.d_weakstar),
                ]);
            }
        }
        set.add("clusters.csv", clusters.finish());

        let curve = |f: fn(&StabilityRow) -> f64| -> Vec<(f64, f64)> {
            self.rows.iter().map(|r| (r.epsilon, f(r))).collect()
        };
        set.add_curve("d_weakstar.dat", &curve(|r| r.d_weakstar));
        set.add_curve("stationarity_residual.dat", &curve(|r| r.stationarity_residual));

        set.seeds.push("noise: stream i = start index i, identical at every epsilon".into());
        set.seeds.push("stationarity Monte Carlo: stream 2^64 - 1".into());
        let against = match self.reference {
            ReferenceKind::Exact => "exact SRB references",
            ReferenceKind::Proxy => "vs proxy (unperturbed Birkhoff histograms at 10x budget)",
        };
        set.notes.push(format!("distances: {against}"));
        set.notes.push(format!("verdict = {}", self.verdict));
        set
    }
}
