//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # doubling map, three noise levels
//! system.name = doubling
//! system.factor = 2
//! kernel.mode = additive
//! kernel.epsilons = 0.1, 0.05, 0.01
//! budget.n = 100000
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::catalog::{build_system, CatalogId, MapSystem, ParamRecord};
use crate::hyperbolic::HypParams;
use crate::orbit::{NoiseKernel, NoiseMode};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io { path: String, message: String },
    Parse { line: usize, key: String, message: String },
    Validation(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => write!(f, "cannot read {path}: {message}"),
            ConfigError::Parse { line, key, message } => write!(f, "line {line}, key `{key}`: {message}"),
            ConfigError::Validation(problems) => write!(f, "invalid configuration: {}", problems.join("; ")),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    /// Expansion constant `c`; orbits pass when their expansion average is at most `-c`.
    pub expansion_c: f64,
    pub recurrence_gamma: f64,
    /// Single-linkage merge threshold in `d_P`.
    pub merge: f64,
    pub stability_tol: f64,
    /// Cutoff `N` of the uniform tail statistic.
    pub tail_cutoff: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    /// Orbit length.
    pub n: usize,
    pub starts: usize,
    pub seeds: usize,
    pub bins: usize,
    pub n_max: usize,
    pub samples: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: CatalogId,
    pub system_params: ParamRecord,
    pub mode: NoiseMode,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub alpha: f64,
    pub delta: f64,
    pub thresholds: Thresholds,
    pub budget: Budget,
    pub output_dir: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "system.name",
    "kernel.mode",
    "kernel.epsilons",
    "hyp.alpha",
    "hyp.delta",
    "thresholds.expansion_c",
    "thresholds.recurrence_gamma",
    "thresholds.merge",
    "thresholds.stability_tol",
    "thresholds.tail_cutoff",
    "budget.n",
    "budget.starts",
    "budget.seeds",
    "budget.bins",
    "budget.n_max",
    "budget.samples",
    "budget.mc_samples",
    "budget.seed",
    "output.dir",
];

struct Entry {
    line: usize,
    value: String,
}

fn parse_err(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, key: key.to_string(), message: message.into() }
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parse_err(line, content, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        let known = KEYS.contains(&key) || key.starts_with("system.") && key.len() > "system.".len();
        if !known {
            return Err(parse_err(line, key, "unknown key"));
        }
        if value.is_empty() {
            return Err(parse_err(line, key, "missing value"));
        }
        if entries.contains_key(key) {
            return Err(parse_err(line, key, "duplicate key"));
        }
        entries.insert(key.to_string(), Entry { line, value: value.to_string() });
    }

    let name_entry = entries.get("system.name").ok_or_else(|| parse_err(0, "system.name", "required key missing"))?;
    let system: CatalogId =
        name_entry.value.parse().map_err(|_| parse_err(name_entry.line, "system.name", "unknown catalog id"))?;
    let mut system_params = ParamRecord::new();
    for (key, e) in entries.iter().filter(|(k, _)| k.starts_with("system.") && *k != "system.name") {
        let param = &key["system.".len()..];
        if !system.param_names().contains(&param) {
            return Err(parse_err(e.line, key, format!("not a parameter of `{system}`")));
        }
        system_params.insert(param.to_string(), number(key, e)?);
    }

    let mode = match entries.get("kernel.mode") {
        Some(e) => e.value.parse().map_err(|_| parse_err(e.line, "kernel.mode", "expected additive or rotational"))?,
        None => NoiseMode::Additive,
    };
    let eps_entry =
        entries.get("kernel.epsilons").ok_or_else(|| parse_err(0, "kernel.epsilons", "required key missing"))?;
    let epsilons = eps_entry
        .value
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| parse_err(eps_entry.line, "kernel.epsilons", format!("bad number `{}`", s.trim()))))
        .collect::<Result<Vec<_>, _>>()?;

    let real = |key: &str, default: f64| -> Result<f64, ConfigError> {
        entries.get(key).map_or(Ok(default), |e| number(key, e))
    };
    let count = |key: &str, default: usize| -> Result<usize, ConfigError> {
        entries.get(key).map_or(Ok(default), |e| {
            e.value.parse().map_err(|_| parse_err(e.line, key, format!("expected a nonnegative integer, got `{}`", e.value)))
        })
    };

    let expansion_c = real("thresholds.expansion_c", 0.5)?;
    let thresholds = Thresholds {
        expansion_c,
        recurrence_gamma: real("thresholds.recurrence_gamma", 0.05)?,
        merge: real("thresholds.merge", 0.02)?,
        stability_tol: real("thresholds.stability_tol", 0.02)?,
        tail_cutoff: count("thresholds.tail_cutoff", 2)?,
    };
    let budget = Budget {
        n: count("budget.n", 100_000)?,
        starts: count("budget.starts", 10)?,
        seeds: count("budget.seeds", 1)?,
        bins: count("budget.bins", 128)?,
        n_max: count("budget.n_max", 200)?,
        samples: count("budget.samples", 10_000)?,
        mc_samples: count("budget.mc_samples", 100_000)?,
        seed: match entries.get("budget.seed") {
            Some(e) => e.value.parse().map_err(|_| parse_err(e.line, "budget.seed", "expected a 64-bit unsigned integer"))?,
            None => 0,
        },
    };
    let cfg = ExperimentConfig {
        system,
        system_params,
        mode,
        epsilons,
        alpha: real("hyp.alpha", HypParams::alpha_from_expansion(expansion_c))?,
        delta: real("hyp.delta", 0.1)?,
        thresholds,
        budget,
        output_dir: entries.get("output.dir").map(|e| PathBuf::from(&e.value)),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn number(key: &str, e: &Entry) -> Result<f64, ConfigError> {
    let v: f64 = e.value.parse().map_err(|_| parse_err(e.line, key, format!("bad number `{}`", e.value)))?;
    if !v.is_finite() {
        return Err(parse_err(e.line, key, "value must be finite"));
    }
    Ok(v)
}

impl ExperimentConfig {
    /// Every violated invariant, reported together.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        if self.epsilons.is_empty() {
            problems.push("kernel.epsilons is empty".to_string());
        }
        if self.epsilons.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            problems.push("kernel.epsilons must be finite and nonnegative".to_string());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            problems.push("kernel.epsilons must be strictly decreasing".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            problems.push(format!("hyp.alpha = {} must lie in (0, 1)", self.alpha));
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("hyp.delta", self.delta),
            ("thresholds.expansion_c", t.expansion_c),
            ("thresholds.recurrence_gamma", t.recurrence_gamma),
            ("thresholds.merge", t.merge),
            ("thresholds.stability_tol", t.stability_tol),
        ] {
            if !(v > 0.0) {
                problems.push(format!("{name} = {v} must be positive"));
            }
        }
        let b = &self.budget;
        for (name, v) in [
            ("thresholds.tail_cutoff", t.tail_cutoff),
            ("budget.n", b.n),
            ("budget.starts", b.starts),
            ("budget.seeds", b.seeds),
            ("budget.bins", b.bins),
            ("budget.n_max", b.n_max),
            ("budget.samples", b.samples),
            ("budget.mc_samples", b.mc_samples),
        ] {
            if v < 1 {
                problems.push(format!("{name} must be at least 1"));
            }
        }
        if t.tail_cutoff > b.n_max {
            problems.push(format!("thresholds.tail_cutoff = {} exceeds budget.n_max = {}", t.tail_cutoff, b.n_max));
        }
        match self.build_system() {
            Err(e) => problems.push(format!("system: {e}")),
            Ok(sys) => {
                for &eps in &self.epsilons {
                    if let Err(e) = NoiseKernel::for_system(&sys, self.mode, eps) {
                        problems.push(format!("kernel at epsilon {eps}: {e}"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(problems))
        }
    }

    pub fn build_system(&self) -> crate::Result<MapSystem> {
        build_system(self.system.as_str(), &self.system_params)
    }

    pub fn kernel(&self, sys: &MapSystem, epsilon: f64) -> crate::Result<NoiseKernel> {
        NoiseKernel::for_system(sys, self.mode, epsilon)
    }

    pub fn hyp_params(&self, sys: &MapSystem) -> crate::Result<HypParams> {
        HypParams::new(self.alpha, self.delta, sys.constants.b_exponent)
    }

    /// Normalized `key = value` lines, one per effective setting.
    pub fn echo(&self) -> Vec<String> {
        let mut out = vec![format!("system.name = {}", self.system)];
        for (k, v) in &self.system_params {
            out.push(format!("system.{k} = {}", crate::fmt_sig(*v)));
        }
        out.push(format!("kernel.mode = {}", self.mode));
        let eps: Vec<String> = self.epsilons.iter().map(|e| crate::fmt_sig(*e)).collect();
        out.push(format!("kernel.epsilons = {}", eps.join(", ")));
        out.push(format!("hyp.alpha = {}", crate::fmt_sig(self.alpha)));
        out.push(format!("hyp.delta = {}", crate::fmt_sig(self.delta)));
        let t = &self.thresholds;
        out.push(format!("thresholds.expansion_c = {}", crate::fmt_sig(t.expansion_c)));
        out.push(format!("thresholds.recurrence_gamma = {}", crate::fmt_sig(t.recurrence_gamma)));
        out.push(format!("thresholds.merge = {}", crate::fmt_sig(t.merge)));
        out.push(format!("thresholds.stability_tol = {}", crate::fmt_sig(t.stability_tol)));
        out.push(format!("thresholds.tail_cutoff = {}", t.tail_cutoff));
        let b = &self.budget;
        for (k, v) in [
            ("n", b.n),
            ("starts", b.starts),
            ("seeds", b.seeds),
            ("bins", b.bins),
            ("n_max", b.n_max),
            ("samples", b.samples),
            ("mc_samples", b.mc_samples),
        ] {
            out.push(format!("budget.{k} = {v}"));
        }
        out.push(format!("budget.seed = {}", b.seed));
        if let Some(d) = &self.output_dir {
            out.push(format!("output.dir = {}", d.display()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "system.name = doubling\nkernel.epsilons = 0.05\n";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.system, CatalogId::Doubling);
        assert_eq!(c.epsilons, vec![0.05]);
        assert_eq!(c.thresholds.stability_tol, 0.02);
        assert_eq!(c.budget.bins, 128);
        assert_eq!(c.mode, NoiseMode::Additive);
    }

    #[test]
    fn comments_blank_lines_and_system_params() {
        let c = parse_config("# header\n\nsystem.name = fig2  # trailing\nsystem.pad = 0.1\nkernel.mode = additive\nkernel.epsilons = 0.02, 0.01\n").unwrap();
        assert_eq!(c.system_params.get("pad"), Some(&0.1));
        assert_eq!(c.epsilons, vec![0.02, 0.01]);
    }

    #[test]
    fn increasing_grid_is_a_validation_error() {
        let err = parse_config("system.name = doubling\nkernel.epsilons = 0.01, 0.05\n").unwrap_err();
        match err {
            ConfigError::Validation(p) => assert!(p.iter().any(|m| m.contains("strictly decreasing"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_names_the_key() {
        let err = parse_config("system.name = doubling\nkernel.epsilonn = 0.05\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Parse { line: 2, key: "kernel.epsilonn".into(), message: "unknown key".into() }
        );
        let err = parse_config("system.name = doubling\nsystem.d = 4\nkernel.epsilons = 0.05\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn malformed_values() {
        assert!(matches!(
            parse_config("system.name = doubling\nkernel.epsilons = 0.05\nbudget.n = -3\n"),
            Err(ConfigError::Parse { line: 3, .. })
        ));
        assert!(matches!(parse_config("system.name doubling\n"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_config("system.name = doubling\nsystem.name = fig1\n"),
            Err(ConfigError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn validation_lists_every_problem() {
        let err = parse_config("system.name = fig2\nkernel.epsilons = 0.5\nbudget.n = 0\nthresholds.merge = 0\n").unwrap_err();
        let ConfigError::Validation(p) = err else { panic!() };
        assert_eq!(p.len(), 3, "{p:?}");
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config("system.name = viana\nsystem.coupling = 0.005\nkernel.epsilons = 0.01, 0.001\nbudget.seed = 99\n").unwrap();
        let again = parse_config(&c.echo().join("\n")).unwrap();
        assert_eq!(c.echo(), again.echo());
        assert_eq!(c.system_params, again.system_params);
        assert_eq!(c.epsilons, again.epsilons);
    }
}
