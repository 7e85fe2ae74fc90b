use std::fs;
use std::path::Path;
use std::time::Duration;

use perturb_lab::experiment::{
    emit_outputs, orbit_output, parse_config, run_physical_count, run_stability_sweep, run_tail_experiment,
    run_viana_diagnostics, ExperimentConfig, Report, Verdict,
};

fn config(text: &str) -> ExperimentConfig {
    parse_config(text).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "dat"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn doubling_sweep_is_stable() {
    let cfg = config(
        "system.name = doubling\nkernel.epsilons = 0.1, 0.05, 0.01\nbudget.n = 200000\nbudget.starts = 10\n",
    );
    let r = run_stability_sweep(&cfg).unwrap();
    assert_eq!(r.verdict, Verdict::StableConsistent);
    let last = r.rows.last().unwrap();
    assert!(last.d_weakstar < 0.02, "d_P {}", last.d_weakstar);
    assert!(r.rows.iter().all(|row| row.l_clusters == 1));
}

#[test]
fn fig1_sweep_mixes_both_components() {
    let cfg = config(
        "system.name = fig1\nkernel.mode = rotational\nkernel.epsilons = 0.1, 0.05, 0.02\n\
         budget.n = 200000\nbudget.starts = 20\n",
    );
    let r = run_stability_sweep(&cfg).unwrap();
    assert_eq!(r.p, 2);
    for row in &r.rows {
        assert_eq!(row.l_clusters, 1, "eps {}", row.epsilon);
        assert!(row.weights.iter().all(|&w| w > 0.1), "eps {}: weights {:?}", row.epsilon, row.weights);
        assert!(row.fit_residual < 0.05, "eps {}: residual {}", row.epsilon, row.fit_residual);
    }
}

#[test]
fn fig2_sweep_keeps_two_measures() {
    let cfg = config(
        "system.name = fig2\nkernel.epsilons = 0.04, 0.02, 0.01\nbudget.n = 100000\nbudget.starts = 10\n",
    );
    let r = run_stability_sweep(&cfg).unwrap();
    for row in &r.rows {
        assert_eq!(row.l_clusters, 2, "eps {}", row.epsilon);
        let mut nearest: Vec<usize> = row.clusters.iter().map(|c| c.nearest).collect();
        nearest.sort();
        assert_eq!(nearest, vec![0, 1]);
        assert!(row.clusters.iter().all(|c| c.d_weakstar < 0.05), "eps {}: {:?}", row.epsilon, row.clusters);
    }
}

#[test]
fn counts_match_the_examples() {
    for (name, mode, eps, p) in [
        ("doubling", "additive", "0.1, 0.05, 0.01", 1),
        ("fig1", "rotational", "0.1, 0.05, 0.02", 2),
        ("fig2", "additive", "0.04, 0.02, 0.01", 2),
    ] {
        let cfg = config(&format!(
            "system.name = {name}\nkernel.mode = {mode}\nkernel.epsilons = {eps}\n\
             budget.n = 50000\nbudget.starts = 10\nbudget.seeds = 2\n"
        ));
        let r = run_physical_count(&cfg).unwrap();
        assert_eq!(r.p, Some(p), "{name}");
        let expected_l = if name == "fig2" { 2 } else { 1 };
        assert!(r.rows.iter().all(|row| row.l == expected_l), "{name}: {:?}", r.rows);
        assert!(r.consistent());
    }
}

#[test]
fn torus_tails_do_not_depend_on_noise() {
    let cfg = config(
        "system.name = torus\nkernel.epsilons = 0.01, 0.005, 0.001\nhyp.alpha = 0.5\n\
         budget.samples = 20000\nbudget.n_max = 50\n",
    );
    let r = run_tail_experiment(&cfg).unwrap();
    assert!(r.rows.iter().all(|row| row.fit.is_some_and(|f| f.tau < 1.0)));
    let spread = r.tau_spread().unwrap();
    assert!(spread < 0.1, "spread {spread}");
    assert!(r.uniform_statistic.is_finite());
}

#[test]
fn skew_product_tail_statistic_is_stable() {
    let cfg = config(
        "system.name = viana\nkernel.epsilons = 0.01, 0.001\nhyp.delta = 0.25\n\
         budget.samples = 2000\nbudget.n_max = 400\n",
    );
    let r = run_tail_experiment(&cfg).unwrap();
    let stats: Vec<f64> = r.rows.iter().map(|row| row.statistic).collect();
    assert!(stats.iter().all(|s| s.is_finite()));
    let (lo, hi) = (stats[0].min(stats[1]), stats[0].max(stats[1]));
    assert!(hi <= 1.2 * lo, "{stats:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let runs = [
        "system.name = fig1\nkernel.mode = rotational\nkernel.epsilons = 0.1, 0.05\nbudget.n = 20000\nbudget.starts = 6\n",
        "system.name = torus\nkernel.epsilons = 0.01, 0.001\nhyp.alpha = 0.5\nbudget.samples = 2000\nbudget.n_max = 40\n",
        "system.name = viana\nkernel.epsilons = 0.001\nbudget.n = 2000\nbudget.samples = 200\nbudget.seeds = 4\nbudget.n_max = 100\n",
    ];
    for text in runs {
        let cfg = config(text);
        let produce = |dir: &Path| {
            let mut sets = vec![
                run_physical_count(&cfg).unwrap().outputs(),
                run_tail_experiment(&cfg).unwrap().outputs(),
                orbit_output(&cfg).unwrap(),
            ];
            if cfg.system.as_str() == "viana" {
                sets.push(run_viana_diagnostics(&cfg).unwrap().outputs());
            } else {
                sets.push(run_stability_sweep(&cfg).unwrap().outputs());
            }
            for set in &sets {
                emit_outputs(set, dir, &cfg, "test", Duration::ZERO).unwrap();
            }
            csv_files(dir)
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = produce(a.path());
        assert!(first.len() >= 6);
        assert_eq!(first, produce(b.path()));
    }
}

#[test]
fn manifest_records_config_and_seeds() {
    let cfg = config("system.name = doubling\nkernel.epsilons = 0.1, 0.05\nbudget.n = 5000\nbudget.seed = 42\n");
    let dir = tempfile::tempdir().unwrap();
    let set = run_stability_sweep(&cfg).unwrap().outputs();
    emit_outputs(&set, dir.path(), &cfg, "stability", Duration::from_millis(1500)).unwrap();
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    for needle in ["[config]", "[seeds]", "[files]", "budget.seed = 42", "stability.csv"] {
        assert!(manifest.contains(needle), "missing {needle}:\n{manifest}");
    }
}

#[test]
fn stability_table_has_one_weight_column_per_reference() {
    let cfg = config(
        "system.name = fig1\nkernel.mode = rotational\nkernel.epsilons = 0.1, 0.05\nbudget.n = 5000\nbudget.starts = 4\n",
    );
    let set = run_stability_sweep(&cfg).unwrap().outputs();
    let table = set.get("stability.csv").unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 7 + 2);
    assert_eq!(&header[4..6], &["w1", "w2"]);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').count() == header.len()));
}

#[test]
fn viana_diagnostics_cover_every_level() {
    let cfg = config("system.name = viana\nkernel.epsilons = 0.01, 0.001\nbudget.n = 5000\nbudget.samples = 300\n");
    let r = run_viana_diagnostics(&cfg).unwrap();
    assert_eq!(r.rows.len(), 2);
    for row in &r.rows {
        assert!(row.expansion.iter().all(|v| *v < 0.0));
        assert!(row.foliation.sup_norm() <= row.foliation_bound);
    }
    let set = r.outputs();
    for name in ["viana_orbits.csv", "viana_summary.csv", "foliation.csv"] {
        assert!(set.get(name).is_some(), "{name}");
    }
}
