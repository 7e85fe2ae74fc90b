use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::config::ExperimentConfig;
use crate::fmt_sig;

/// Named file contents produced by a driver, written in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSet {
    pub files: Vec<(String, String)>,
    /// Seeds and stream layouts, one line each, for the manifest.
    pub seeds: Vec<String>,
    /// Free-form lines for the manifest (labels, verdicts, flags).
    pub notes: Vec<String>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// A plot-ready two-column data file.
    pub fn add_curve(&mut self, name: impl Into<String>, points: &[(f64, f64)]) {
        let mut s = String::new();
        for (x, y) in points {
            let _ = writeln!(s, "{} {}", fmt_sig(*x), fmt_sig(*y));
        }
        self.add(name, s);
    }
}

/// Comma-joined CSV builder with fixed-precision floats.
pub(crate) struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        Csv { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Write every file of the set plus `manifest.txt` into `dir`.
pub fn emit_outputs(
    set: &OutputSet,
    dir: &Path,
    cfg: &ExperimentConfig,
    command: &str,
    wall_time: Duration,
) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(set.files.len() + 1);
    for (name, contents) in &set.files {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        written.push(path);
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest(set, cfg, command, wall_time))?;
    written.push(path);
    Ok(written)
}

fn manifest(set: &OutputSet, cfg: &ExperimentConfig, command: &str, wall_time: Duration) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "tool = perturb-lab {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "command = {command}");
    let _ = writeln!(m, "wall_time_seconds = {:.3}", wall_time.as_secs_f64());
    let _ = writeln!(m, "\n[config]");
    for line in cfg.echo() {
        let _ = writeln!(m, "{line}");
    }
    let _ = writeln!(m, "\n[seeds]");
    let _ = writeln!(m, "base = {}", cfg.budget.seed);
    for s in &set.seeds {
        let _ = writeln!(m, "{s}");
    }
    if !set.notes.is_empty() {
        let _ = writeln!(m, "\n[notes]");
        for n in &set.notes {
            let _ = writeln!(m, "{n}");
        }
    }
    let _ = writeln!(m, "\n[files]");
    for (name, _) in &set.files {
        let _ = writeln!(m, "{name}");
    }
    m
}
