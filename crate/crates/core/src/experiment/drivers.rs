use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::output::{Csv, OutputSet};
use super::{start_points, DriverFailure, DriverResult, Report};
use crate::error::{LabError, Result};
use crate::fmt_sig;
use crate::hyperbolic::{fit_geometric_tail, recurrence_average, tail_profile, uniform_start, uniform_tail_statistic, TailFit, TailProfile};
use crate::measure::{cluster_measures, random_birkhoff_histogram, TestFunctionFamily};
use crate::orbit::{random_orbit, sample_noise};
use crate::viana::{
    central_expansion_average, deficit_fraction, depth_statistics, foliation_along_path, foliation_bound,
    foliation_fixed_point, write_depth_csv, DepthSample, FoliationField,
};

fn fail<R>(partial: R, error: LabError) -> DriverResult<R> {
    Err(DriverFailure { partial, error })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountRow {
    pub epsilon: f64,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub system: String,
    /// Number of SRB measures, when known.
    pub p: Option<usize>,
    pub rows: Vec<CountRow>,
}

impl CountReport {
    /// `l(eps)` is a nonincreasing function of `eps`: along the decreasing grid it never drops.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].l >= w[0].l)
    }

    pub fn bounded(&self) -> bool {
        self.p.is_none_or(|p| self.rows.iter().all(|r| r.l <= p))
    }

    pub fn consistent(&self) -> bool {
        self.monotone() && self.bounded()
    }
}

/// Number of distinct random physical measures seen from a start grid times
/// `budget.seeds` noise replicates; replicate `s` of start `i` uses stream `i * seeds + s`.
pub fn run_physical_count(cfg: &ExperimentConfig) -> DriverResult<CountReport> {
    let mut report = CountReport { system: cfg.system.to_string(), p: None, rows: Vec::new() };
    let sys = match cfg.build_system() {
        Ok(s) => s,
        Err(e) => return fail(report, e),
    };
    report.p = sys.srb_count();
    let b = &cfg.budget;
    let family = match TestFunctionFamily::new(sys.domain, b.bins) {
        Ok(f) => f,
        Err(e) => return fail(report, e),
    };
    let starts = start_points(&sys, b.starts);
    let jobs: Vec<(usize, usize)> = (0..starts.len()).flat_map(|i| (0..b.seeds).map(move |s| (i, s))).collect();
    for &eps in &cfg.epsilons {
        let level = (|| -> Result<usize> {
            let kernel = cfg.kernel(&sys, eps)?;
            let hists = jobs
                .par_iter()
                .map(|&(i, s)| {
                    let stream = (i * b.seeds + s) as u64;
                    random_birkhoff_histogram(&sys, &kernel, starts[i], b.n, b.bins, b.seed, stream)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(cluster_measures(&hists, cfg.thresholds.merge, &family)?.l)
        })();
        match level {
            Ok(l) => report.rows.push(CountRow { epsilon: eps, l }),
            Err(e) => return fail(report, e),
        }
    }
    Ok(report)
}

impl Report for CountReport {
    fn outputs(&self) -> OutputSet {
        let mut set = OutputSet::default();
        let mut csv = Csv::new(&["epsilon".to_string(), "l".to_string()]);
        for r in &self.rows {
            csv.row(&[fmt_sig(r.epsilon), r.l.to_string()]);
        }
        set.add("count.csv", csv.finish());
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.epsilon, r.l as f64)).collect();
        set.add_curve("l.dat", &pts);
        set.seeds.push("noise: stream = start index * budget.seeds + replicate".into());
        set.notes.push(format!("p = {}", self.p.map_or("unknown".to_string(), |p| p.to_string())));
        set.notes.push(format!("l monotone along the grid = {}", self.monotone()));
        set.notes.push(format!("l <= p = {}", self.bounded()));
        set
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailRow {
    pub profile: TailProfile,
    pub fit: Option<TailFit>,
    /// The tail statistic of this level alone.
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub system: String,
    pub cutoff: usize,
    pub rows: Vec<TailRow>,
    /// Maximum of the per-level statistics.
    pub uniform_statistic: f64,
}

impl TailReport {
    /// Spread `max tau - min tau` over levels with a fit.
    pub fn tau_spread(&self) -> Option<f64> {
        let taus: Vec<f64> = self.rows.iter().filter_map(|r| r.fit.map(|f| f.tau)).collect();
        if taus.len() < self.rows.len() || taus.is_empty() {
            return None;
        }
        let max = taus.iter().cloned().fold(f64::MIN, f64::max);
        let min = taus.iter().cloned().fold(f64::MAX, f64::min);
        Some(max - min)
    }
}

/// Empirical first-hyperbolic-time tails at every noise level.
///
/// Sample `i` starts from a uniform point drawn on its own stream and takes its noise from stream `i`.
pub fn run_tail_experiment(cfg: &ExperimentConfig) -> DriverResult<TailReport> {
    let mut report =
        TailReport { system: cfg.system.to_string(), cutoff: cfg.thresholds.tail_cutoff, rows: Vec::new(), uniform_statistic: 0.0 };
    let b = &cfg.budget;
    for &eps in &cfg.epsilons {
        let level = (|| -> Result<TailRow> {
            let sys = cfg.build_system()?;
            let kernel = cfg.kernel(&sys, eps)?;
            let hp = cfg.hyp_params(&sys)?;
            let profile = tail_profile(&sys, &kernel, &hp, b.samples, b.n_max, b.seed)?;
            let statistic = uniform_tail_statistic(std::slice::from_ref(&profile), cfg.thresholds.tail_cutoff)?;
            Ok(TailRow { fit: fit_geometric_tail(&profile), profile, statistic })
        })();
        match level {
            Ok(row) => {
                report.uniform_statistic = report.uniform_statistic.max(row.statistic);
                report.rows.push(row);
            }
            Err(e) => return fail(report, e),
        }
    }
    Ok(report)
}

impl Report for TailReport {
    fn outputs(&self) -> OutputSet {
        let mut set = OutputSet::default();
        let mut csv = Csv::new(&["epsilon", "k", "count", "p_gt_k"].map(String::from));
        let mut fits = Csv::new(&["epsilon", "slope", "tau", "fit_points", "censored", "statistic"].map(String::from));
        for (e, row) in self.rows.iter().enumerate() {
            let p = &row.profile;
            let survival = p.survival();
            for k in 1..=p.n_max {
                csv.row(&[fmt_sig(p.epsilon), k.to_string(), p.count(k).to_string(), fmt_sig(survival[k])]);
            }
            let (slope, tau, pts) = row.fit.map_or((f64::NAN, f64::NAN, 0), |f| (f.slope, f.tau, f.points));
            fits.row(&[
                fmt_sig(p.epsilon),
                fmt_sig(slope),
                fmt_sig(tau),
                pts.to_string(),
                p.censored.to_string(),
                fmt_sig(row.statistic),
            ]);
            let curve: Vec<(f64, f64)> = (1..=p.n_max).map(|k| (k as f64, survival[k])).collect();
            set.add_curve(format!("survival_{}.dat", e + 1), &curve);
        }
        set.add("tail.csv", csv.finish());
        set.add("tail_fit.csv", fits.finish());
        set.seeds.push("start of sample i: stream i of seed ^ 0x5eed57a700000001".into());
        set.seeds.push("noise of sample i: stream i".into());
        set.notes.push(format!("uniform tail statistic (N = {}) = {}", self.cutoff, fmt_sig(self.uniform_statistic)));
        if let Some(s) = self.tau_spread() {
            set.notes.push(format!("tau spread = {}", fmt_sig(s)));
        }
        set
    }
}

/// Grid of the foliation fields written by the Viana diagnostics.
pub const FOLIATION_GRID: (usize, usize) = (128, 64);
/// Length of the noise path used for the random foliation.
pub const FOLIATION_PATH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct VianaRow {
    pub epsilon: f64,
    pub expansion: Vec<f64>,
    pub recurrence: Vec<f64>,
    /// Fraction of orbits with expansion average at most `-c`.
    pub expansion_ok: f64,
    /// Fraction of orbits with recurrence average at most `gamma`.
    pub recurrence_ok: f64,
    pub depth: Vec<DepthSample>,
    pub b1_fraction: f64,
    pub b2_fraction: f64,
    pub foliation: FoliationField,
    pub foliation_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VianaReport {
    pub delta: f64,
    pub rows: Vec<VianaRow>,
    pub fixed_point: Option<FoliationField>,
}

/// Expansion, recurrence, return-depth and foliation diagnostics of the
/// skew-product at every noise level.
pub fn run_viana_diagnostics(cfg: &ExperimentConfig) -> DriverResult<VianaReport> {
    let mut report = VianaReport { delta: cfg.delta, rows: Vec::new(), fixed_point: None };
    let sys = match cfg.build_system() {
        Ok(s) => s,
        Err(e) => return fail(report, e),
    };
    let Some(params) = sys.viana().copied() else {
        return fail(report, LabError::InvalidParams(format!("viana-diag needs the viana system, got {}", sys.name())));
    };
    match foliation_fixed_point(&sys, FOLIATION_GRID, 1e-12, 500) {
        Ok(fp) => report.fixed_point = Some(fp.field),
        Err(e) => return fail(report, e),
    }
    let b = &cfg.budget;
    let t = &cfg.thresholds;
    for &eps in &cfg.epsilons {
        let level = (|| -> Result<VianaRow> {
            let kernel = cfg.kernel(&sys, eps)?;
            let averages = (0..b.starts as u64)
                .into_par_iter()
                .map(|i| {
                    let x0 = uniform_start(&sys, b.seed, i);
                    let tr = random_orbit(&sys, &kernel, x0, b.n, Some(cfg.delta), b.seed, i)?;
                    Ok((central_expansion_average(&tr), recurrence_average(&tr)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let (expansion, recurrence): (Vec<f64>, Vec<f64>) = averages.into_iter().unzip();
            let frac = |v: &[f64], ok: &dyn Fn(f64) -> bool| v.iter().filter(|x| ok(**x)).count() as f64 / v.len() as f64;
            let depth = depth_statistics(&sys, &kernel, b.n, b.samples, b.seed)?;
            let b2 = depth.iter().filter(|d| d.deep_return).count() as f64 / depth.len() as f64;
            let path = sample_noise(&kernel, FOLIATION_PATH, b.seed, u64::MAX - 1);
            Ok(VianaRow {
                epsilon: eps,
                expansion_ok: frac(&expansion, &|x| x <= -t.expansion_c),
                recurrence_ok: frac(&recurrence, &|x| x <= t.recurrence_gamma),
                expansion,
                recurrence,
                b1_fraction: deficit_fraction(&depth, t.recurrence_gamma),
                b2_fraction: b2,
                depth,
                foliation: foliation_along_path(&sys, FOLIATION_GRID, &path.entries)?,
                foliation_bound: foliation_bound(&params, eps),
            })
        })();
        match level {
            Ok(row) => report.rows.push(row),
            Err(e) => return fail(report, e),
        }
    }
    Ok(report)
}

fn field_csv(f: &FoliationField) -> String {
    let mut buf = Vec::new();
    f.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

impl Report for VianaReport {
    fn outputs(&self) -> OutputSet {
        let mut set = OutputSet::default();
        let mut orbits = Csv::new(&["epsilon", "sample", "expansion_average", "recurrence_average"].map(String::from));
        let mut summary = Csv::new(
            &[
                "epsilon",
                "expansion_ok_fraction",
                "recurrence_ok_fraction",
                "b1_fraction",
                "b2_fraction",
                "foliation_sup",
                "foliation_bound",
            ]
            .map(String::from),
        );
        for (e, row) in self.rows.iter().enumerate() {
            for (i, (x, r)) in row.expansion.iter().zip(&row.recurrence).enumerate() {
                orbits.row(&[fmt_sig(row.epsilon), i.to_string(), fmt_sig(*x), fmt_sig(*r)]);
            }
            summary.row(&[
                fmt_sig(row.epsilon),
                fmt_sig(row.expansion_ok),
                fmt_sig(row.recurrence_ok),
                fmt_sig(row.b1_fraction),
                fmt_sig(row.b2_fraction),
                fmt_sig(row.foliation.sup_norm()),
                fmt_sig(row.foliation_bound),
            ]);
            let mut depth = Vec::new();
            write_depth_csv(&row.depth, &mut depth).expect("writing to memory");
            set.add(format!("depth_{}.csv", e + 1), String::from_utf8(depth).expect("ascii csv"));
            set.add(format!("foliation_{}.csv", e + 1), field_csv(&row.foliation));
        }
        set.add("viana_orbits.csv", orbits.finish());
        set.add("viana_summary.csv", summary.finish());
        if let Some(f) = &self.fixed_point {
            set.add("foliation.csv", field_csv(f));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let exp: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.epsilon, mean(&r.expansion))).collect();
        let rec: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.epsilon, mean(&r.recurrence))).collect();
        set.add_curve("expansion_average.dat", &exp);
        set.add_curve("recurrence_average.dat", &rec);
        set.seeds.push("orbit i and depth sample i: start and noise on stream i".into());
        set.seeds.push("random foliation path: stream 2^64 - 2".into());
        set.notes.push(format!("delta = {}", fmt_sig(self.delta)));
        set
    }
}

/// One random orbit from the first start point at the first noise level.
pub fn orbit_output(cfg: &ExperimentConfig) -> Result<OutputSet> {
    let sys = cfg.build_system()?;
    let kernel = cfg.kernel(&sys, cfg.epsilons[0])?;
    let x0 = start_points(&sys, 1)[0];
    let delta = sys.has_critical_set().then_some(cfg.delta);
    let tr = random_orbit(&sys, &kernel, x0, cfg.budget.n, delta, cfg.budget.seed, 0)?;
    let mut header = vec!["j".to_string(), "coord1".to_string()];
    if sys.dim() == 2 {
        header.push("coord2".into());
    }
    header.extend(["log_inv_norm", "log_trunc_dist"].map(String::from));
    let mut csv = Csv::new(&header);
    for (j, x) in tr.states.iter().enumerate() {
        let mut cells = vec![j.to_string()];
        cells.extend(x.coords()[..sys.dim()].iter().map(|c| fmt_sig(*c)));
        let l = tr.log_inv_norms.get(j).map_or(String::new(), |v| fmt_sig(*v));
        let d = tr.log_trunc_dists.as_ref().and_then(|d| d.get(j)).map_or(String::new(), |v| fmt_sig(*v));
        cells.extend([l, d]);
        csv.row(&cells);
    }
    let mut set = OutputSet::default();
    set.add("orbit.csv", csv.finish());
    set.add_curve(
        "orbit.dat",
        &tr.states.iter().enumerate().map(|(j, x)| (j as f64, x.first())).collect::<Vec<_>>(),
    );
    set.seeds.push("noise: stream 0".into());
    set.notes.push(format!("noise redraws near the critical set = {}", tr.resamples));
    Ok(set)
}
