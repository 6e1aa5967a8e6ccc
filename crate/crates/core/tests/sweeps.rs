use bloch_core::harness::{run_gauge_sweep, run_n_sweep, sweep_csv, ExperimentConfig, PSequence};
use bloch_core::potential::PeriodicPotential;

fn strip_timing(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn constant_sweep_is_exact_and_skips_fit() {
    let cfg = ExperimentConfig {
        potential: PeriodicPotential::constant(0.3),
        p: 0.5,
        n_range: (2, 32),
        ..ExperimentConfig::default()
    };
    let out = run_n_sweep(&cfg).unwrap();
    assert_eq!(out.records.len(), 5);
    assert!(out.records.iter().all(|r| r.density_error_sup.unwrap() <= 1e-9));
    assert_eq!(out.summary.density_order, None);
}

#[test]
fn empty_ranges_give_empty_output() {
    let cfg = ExperimentConfig {
        n_range: (9, 3),
        p_sequence: PSequence { j_min: 4, j_max: 2 },
        ..ExperimentConfig::default()
    };
    assert!(run_n_sweep(&cfg).unwrap().records.is_empty());
    assert!(run_gauge_sweep(&cfg).unwrap().records.is_empty());
}

#[test]
fn parallel_rows_match_sequential() {
    let base = ExperimentConfig {
        n_range: (10, 40),
        ..ExperimentConfig::default()
    };
    let seq = run_n_sweep(&base).unwrap();
    let par = run_n_sweep(&ExperimentConfig { jobs: 3, ..base }).unwrap();
    assert_eq!(strip_timing(&sweep_csv(&seq.records)), strip_timing(&sweep_csv(&par.records)));
}

#[test]
fn subcritical_gauge_is_a_config_level_failure() {
    let cfg = ExperimentConfig {
        p: 0.5,
        ..ExperimentConfig::default()
    };
    assert!(run_n_sweep(&cfg).is_err());
}

#[test]
fn sweep_rows_report_failures_instead_of_aborting() {
    // γ near 0 is the edge of the admissible interval; n = 5 has no certificate there.
    let cfg = ExperimentConfig {
        gamma: 1e-6,
        n_range: (5, 10),
        ..ExperimentConfig::default()
    };
    let out = run_n_sweep(&cfg).unwrap();
    assert_eq!(out.records.len(), 2);
    let r = &out.records[0];
    assert_eq!(r.status, "NoCertificate");
    assert!(r.density_error_sup.is_none());
    let row = sweep_csv(&out.records).lines().nth(1).unwrap().to_string();
    assert!(row.contains(",,NoCertificate,"));
    assert!(out.summary.failures >= 1);
}
