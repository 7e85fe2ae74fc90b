//! Command-line front end for the experiment drivers.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use perturb_lab::experiment::{
    emit_outputs, load_config, orbit_output, run_physical_count, run_stability_sweep, run_tail_experiment,
    run_viana_diagnostics, DriverResult, ExperimentConfig, OutputSet, Report, Verdict,
};
use perturb_lab::fmt_sig;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_INCONSISTENT: u8 = 4;

#[derive(Parser)]
#[command(name = "perturb-lab", version, about = "Random perturbations of non-uniformly expanding maps")]
struct Cli {
    /// Configuration file (flat `key = value`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed; overrides `budget.seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Stochastic-stability sweep over the noise grid.
    Stability,
    /// Number of random physical measures per noise level.
    Count,
    /// First-hyperbolic-time tails.
    Tail,
    /// Expansion, recurrence and foliation diagnostics of the skew-product.
    VianaDiag,
    /// A single random orbit.
    Orbit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Stability => "stability",
            Command::Count => "count",
            Command::Tail => "tail",
            Command::VianaDiag => "viana-diag",
            Command::Orbit => "orbit",
        }
    }
}

/// Outputs of a finished or failed run and whether the result gates CI.
struct Outcome {
    set: OutputSet,
    error: Option<String>,
    inconsistent: bool,
    summary: Vec<String>,
}

fn outcome<R: Report>(result: DriverResult<R>, check: impl Fn(&R) -> (bool, Vec<String>)) -> Outcome {
    match result {
        Ok(r) => {
            let (inconsistent, summary) = check(&r);
            Outcome { set: r.outputs(), error: None, inconsistent, summary }
        }
        Err(f) => Outcome { set: f.partial.outputs(), error: Some(f.error.to_string()), inconsistent: false, summary: vec![] },
    }
}

fn run(command: Command, cfg: &ExperimentConfig) -> Outcome {
    match command {
        Command::Stability => outcome(run_stability_sweep(cfg), |r| {
            let mut lines: Vec<String> = r
                .rows
                .iter()
                .map(|row| format!("epsilon {}: d_P {} l {}", fmt_sig(row.epsilon), fmt_sig(row.d_weakstar), row.l_clusters))
                .collect();
            lines.push(format!("verdict: {}", r.verdict));
            (r.verdict == Verdict::Inconsistent, lines)
        }),
        Command::Count => outcome(run_physical_count(cfg), |r| {
            let mut lines: Vec<String> = r.rows.iter().map(|row| format!("epsilon {}: l = {}", fmt_sig(row.epsilon), row.l)).collect();
            lines.push(format!("monotone: {}, l <= p: {}", r.monotone(), r.bounded()));
            (!r.consistent(), lines)
        }),
        Command::Tail => outcome(run_tail_experiment(cfg), |r| {
            let mut lines: Vec<String> = r
                .rows
                .iter()
                .map(|row| {
                    let tau = row.fit.map_or("none".to_string(), |f| fmt_sig(f.tau));
                    format!("epsilon {}: tau {} statistic {}", fmt_sig(row.profile.epsilon), tau, fmt_sig(row.statistic))
                })
                .collect();
            lines.push(format!("uniform tail statistic: {}", fmt_sig(r.uniform_statistic)));
            (false, lines)
        }),
        Command::VianaDiag => outcome(run_viana_diagnostics(cfg), |r| {
            let lines = r
                .rows
                .iter()
                .map(|row| {
                    format!(
                        "epsilon {}: expansion ok {} recurrence ok {} B1 {} B2 {}",
                        fmt_sig(row.epsilon),
                        fmt_sig(row.expansion_ok),
                        fmt_sig(row.recurrence_ok),
                        fmt_sig(row.b1_fraction),
                        fmt_sig(row.b2_fraction)
                    )
                })
                .collect();
            (false, lines)
        }),
        Command::Orbit => match orbit_output(cfg) {
            Ok(set) => Outcome { set, error: None, inconsistent: false, summary: vec![] },
            Err(e) => Outcome { set: OutputSet::default(), error: Some(e.to_string()), inconsistent: false, summary: vec![] },
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(EXIT_CONFIG);
    };
    let mut cfg = match load_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.budget.seed = seed;
    }
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));

    let started = Instant::now();
    let result = run(cli.command, &cfg);
    if let Err(e) = emit_outputs(&result.set, &dir, &cfg, cli.command.name(), started.elapsed()) {
        eprintln!("error: writing outputs to {}: {e}", dir.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    if let Some(e) = result.error {
        eprintln!("error: {e} (partial results written to {})", dir.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    for line in &result.summary {
        println!("{line}");
    }
    println!("outputs written to {}", dir.display());
    if result.inconsistent {
        return ExitCode::from(EXIT_INCONSISTENT);
    }
    ExitCode::SUCCESS
}
