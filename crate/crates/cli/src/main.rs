use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use bloch_core::amplitude::{winding_number, PeriodMap};
use bloch_core::dispersion::{h_for, Kappa};
use bloch_core::harness::{
    convention_check, fmt_f64, run_gauge_sweep, run_regression, run_n_sweep, solve_at, sweep_csv,
    write_json, write_text, ExperimentConfig,
};
use bloch_core::oracle::{build_and_diagonalize, select_bloch_candidate, GaugedOperatorSpec};
use bloch_core::potential::PeriodicPotential;
use bloch_core::quadrature::ActionIntegrals;
use bloch_core::{BlochError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bloch", version, about = "Semiclassical Bloch states of gauged periodic Schrödinger operators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent sweep points.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Gauge convention: 1 or sqrt2.
    #[arg(long, global = true)]
    kappa: Option<Kappa>,
    /// Potential as JSON, e.g. '{"mean":0,"cos":[1]}'.
    #[arg(long, global = true)]
    potential: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuadKind {
    #[value(name = "inv_sqrt")]
    InvSqrt,
    Sqrt,
}

#[derive(Subcommand)]
enum Command {
    /// E₀(P) and derived quantities, or a CSV sweep.
    Dispersion {
        #[arg(long = "P", allow_hyphen_values = true)]
        p: Option<f64>,
        /// P0:P1:steps
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Action integrals I(E) or J(E).
    Quad {
        #[arg(long = "E", allow_hyphen_values = true)]
        energy: f64,
        #[arg(long, value_enum, default_value = "inv_sqrt")]
        kind: QuadKind,
        #[arg(long, default_value_t = bloch_core::DEFAULT_REL_TOL)]
        rel_tol: f64,
    },
    /// Periodic amplitude and Bloch state at one grid point.
    Solve {
        #[arg(long = "P")]
        p: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        n: u32,
    },
    /// Winding number of Ψ_h − id on |Z| = r.
    Winding {
        #[arg(long = "P")]
        p: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Sweep over n at fixed P.
    SweepN,
    /// Diagonal sweep P_j ↓ P̲.
    SweepP,
    /// Dense spectrum of the truncated operator.
    Oracle {
        #[arg(long)]
        h: f64,
        #[arg(long = "P", allow_hyphen_values = true)]
        p: f64,
        #[arg(long)]
        cutoff: usize,
        #[arg(long = "target-E", allow_hyphen_values = true)]
        target_e: Option<f64>,
    },
    /// Oracle cross-check of the constructed state at (P, n).
    Convention {
        #[arg(long = "P")]
        p: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        n: u32,
    },
    /// Compare recomputed quantities with a golden file.
    Regression {
        /// Defaults to the golden set compiled into the binary.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    if let Some(jobs) = g.jobs {
        cfg.jobs = jobs;
    }
    if let Some(kappa) = g.kappa {
        cfg.kappa = kappa;
    }
    if let Some(text) = &g.potential {
        cfg.potential = PeriodicPotential::from_json(text).map_err(|e| BlochError::Config(e.to_string()))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.global)?;
    let out_dir = cfg.output_dir.clone();
    match cli.command {
        Command::Dispersion { p, sweep } => {
            let disp = cfg.dispersion()?;
            if let Some(spec) = sweep {
                let parts: Vec<&str> = spec.split(':').collect();
                let bad = || BlochError::Config(format!("--sweep expects P0:P1:steps, got {spec:?}"));
                if parts.len() != 3 {
                    return Err(bad());
                }
                let p0: f64 = parts[0].parse().map_err(|_| bad())?;
                let p1: f64 = parts[1].parse().map_err(|_| bad())?;
                let steps: usize = parts[2].parse().map_err(|_| bad())?;
                let mut csv = String::from("P,E0,lambda,omega_bar\n");
                for dp in disp.sweep(p0, p1, steps)? {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        fmt_f64(dp.p),
                        fmt_f64(dp.e0),
                        fmt_f64(dp.lambda),
                        fmt_f64(dp.omega_bar)
                    );
                }
                if cli.global.out.is_some() {
                    write_text(&out_dir, "dispersion.csv", &csv)?;
                }
                print!("{csv}");
            } else {
                let dp = disp.point(p.unwrap_or(cfg.p))?;
                print_json(&serde_json::to_value(&dp)?)?;
            }
        }
        Command::Quad { energy, kind, rel_tol } => {
            let actions = ActionIntegrals::new(cfg.potential.clone())?;
            let r = match kind {
                QuadKind::InvSqrt => actions.inv_sqrt(energy, rel_tol)?,
                QuadKind::Sqrt => actions.sqrt(energy, rel_tol)?,
            };
            print_json(&serde_json::to_value(r)?)?;
        }
        Command::Solve { p, gamma, n } => {
            let dp = cfg.dispersion()?.point(p.unwrap_or(cfg.p))?;
            let out = solve_at(&cfg.potential, &dp, gamma.unwrap_or(cfg.gamma), n, &cfg.tolerances)?;
            write_text(&out_dir, "profile.csv", &out.profile_csv())?;
            write_json(&out_dir, "profile.json", &out.profile_json())?;
            write_text(&out_dir, "state.csv", &out.state_csv())?;
            let summary = out.state_summary_json();
            write_json(&out_dir, "state.json", &summary)?;
            print_json(&summary)?;
        }
        Command::Winding { p, gamma, n, r, samples } => {
            let dp = cfg.dispersion()?.point(p.unwrap_or(cfg.p))?;
            let h = h_for(&dp, gamma.unwrap_or(cfg.gamma), n)?;
            let winding = winding_number(&dp, &cfg.potential, h, r, samples)?;
            let map = PeriodMap::new(&dp, &cfg.potential, h, cfg.tolerances.step_control())?;
            print_json(&serde_json::json!({
                "n": n,
                "h": h,
                "r": r,
                "winding": winding,
                "steps": map.steps(),
            }))?;
        }
        Command::SweepN => {
            let outcome = run_n_sweep(&cfg)?;
            write_text(&out_dir, "sweep_n.csv", &sweep_csv(&outcome.records))?;
            write_json(&out_dir, "sweep_n_summary.json", &outcome.summary)?;
            print_json(&serde_json::to_value(&outcome.summary)?)?;
        }
        Command::SweepP => {
            let outcome = run_gauge_sweep(&cfg)?;
            write_text(&out_dir, "sweep_p.csv", &sweep_csv(&outcome.records))?;
            write_json(&out_dir, "sweep_p_summary.json", &outcome.summary)?;
            print_json(&serde_json::to_value(&outcome.summary)?)?;
        }
        Command::Oracle { h, p, cutoff, target_e } => {
            let spec = GaugedOperatorSpec::new(cfg.potential.clone(), h, p, cutoff);
            let spectrum = build_and_diagonalize(&spec)?;
            let mut csv = String::from("index,eigenvalue\n");
            for (i, e) in spectrum.eigenvalues.iter().enumerate() {
                let _ = writeln!(csv, "{i},{}", fmt_f64(*e));
            }
            write_text(&out_dir, "oracle_eigenvalues.csv", &csv)?;
            let grid = (2 * spec.dimension()).next_power_of_two().max(256);
            let target = target_e.unwrap_or(spectrum.eigenvalues[0]);
            let candidate = select_bloch_candidate(&spectrum, target, grid)?;
            let mut dens = String::from("x,density\n");
            for (j, d) in candidate.density.iter().enumerate() {
                let _ = writeln!(dens, "{},{}", fmt_f64(j as f64 / grid as f64), fmt_f64(*d));
            }
            write_text(&out_dir, "oracle_density.csv", &dens)?;
            print_json(&serde_json::json!({
                "dimension": spec.dimension(),
                "target": target,
                "index": candidate.index,
                "eigenvalue": candidate.eigenvalue,
                "min_amplitude": candidate.min_amplitude,
                "max_amplitude": candidate.max_amplitude,
            }))?;
        }
        Command::Convention { p, gamma, n } => {
            if let Some(p) = p {
                cfg.p = p;
            }
            let row = convention_check(
                &cfg.potential,
                cfg.kappa,
                cfg.p,
                gamma.unwrap_or(cfg.gamma),
                n,
                &cfg.tolerances,
            )?;
            print_json(&serde_json::to_value(&row)?)?;
        }
        Command::Regression { golden } => {
            let report = run_regression(&cfg, golden.as_deref())?;
            for row in &report.rows {
                println!("ok   {}", row.key);
            }
        }
    }
    Ok(())
}

fn exit_code(err: &BlochError) -> u8 {
    match err {
        BlochError::Config(_)
        | BlochError::InvalidInput(_)
        | BlochError::GammaOutOfRange(_)
        | BlochError::GaugeNotSupercritical { .. } => 2,
        BlochError::GoldenMismatch(_) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if let BlochError::GoldenMismatch(keys) = &err {
                for key in keys {
                    eprintln!("mismatch {key}");
                }
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
