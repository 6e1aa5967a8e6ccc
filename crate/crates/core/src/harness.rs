//! Experiment orchestration: the n-sweep toward the semiclassical limit, the
//! diagonal (P, n) schedule toward the critical gauge, the convention cross
//! check against the Fourier oracle, CSV/JSON persistence and golden
//! regression.
//!
//! Sweeps never abort on a single failing point: each row carries a status.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::amplitude::{find_periodic_with, PeriodicSolution, StepControl};
use crate::bloch::{
    assemble, concentration_metric, reconstruct_phase, recommended_residual_grid, BlochState, ResidualReport,
};
use crate::dispersion::{h_for, Dispersion, DispersionPoint, Kappa};
use crate::error::{BlochError, Result};
use crate::oracle::{build_and_diagonalize, select_bloch_candidate, GaugedOperatorSpec};
use crate::potential::{circle_distance, PeriodicPotential};
use crate::quadrature::ActionIntegrals;
use crate::stats::log_log_order;
use crate::DEFAULT_REL_TOL;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub max_step_fraction_of_h: f64,
    pub fixed_point_tol: f64,
    /// Largest radius of the winding certificate.
    pub r_max: f64,
    /// Diagonal schedule: h_n ≤ fraction·(E₀ − Ē)/Ω̄.
    pub schedule_fraction: f64,
    pub concentration_delta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel_tol: DEFAULT_REL_TOL,
            max_step_fraction_of_h: 1.0 / 40.0,
            fixed_point_tol: 1e-11,
            r_max: 0.5,
            schedule_fraction: 0.05,
            concentration_delta: 0.1,
        }
    }
}

impl Tolerances {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            max_step_fraction_of_h: self.max_step_fraction_of_h,
            abs_tol: self.fixed_point_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NSpacing {
    /// n_min, 2n_min, 4n_min, … ≤ n_max.
    Octave,
    Linear,
}

/// P_j = P̲(1 + 2^{−j}), j = j_min..=j_max.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PSequence {
    pub j_min: u32,
    pub j_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub potential: PeriodicPotential,
    pub kappa: Kappa,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "P_sequence")]
    pub p_sequence: PSequence,
    pub gamma: f64,
    pub n_range: (u32, u32),
    pub n_spacing: NSpacing,
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            potential: PeriodicPotential::cosine(1.0, 1),
            kappa: Kappa::One,
            p: 1.2,
            p_sequence: PSequence { j_min: 1, j_max: 6 },
            gamma: PI,
            n_range: (10, 80),
            n_spacing: NSpacing::Octave,
            tolerances: Tolerances::default(),
            output_dir: PathBuf::from("."),
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BlochError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        crate::dispersion::check_gamma(self.gamma).map_err(|e| BlochError::Config(e.to_string()))?;
        if self.n_range.0 < 1 {
            return Err(BlochError::Config("n_min must be at least 1".into()));
        }
        if self.jobs < 1 {
            return Err(BlochError::Config("jobs must be at least 1".into()));
        }
        let t = &self.tolerances;
        if !(t.max_step_fraction_of_h > 0.0 && t.max_step_fraction_of_h <= 1.0) {
            return Err(BlochError::Config("max_step_fraction_of_h must lie in (0, 1]".into()));
        }
        if !(t.r_max > 0.0) || !(t.schedule_fraction > 0.0) || !(t.fixed_point_tol > 0.0) {
            return Err(BlochError::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn n_values(&self) -> Vec<u32> {
        let (lo, hi) = self.n_range;
        match self.n_spacing {
            NSpacing::Linear => (lo..=hi).collect(),
            NSpacing::Octave => std::iter::successors(Some(lo), |&n| n.checked_mul(2))
                .take_while(|&n| n <= hi)
                .collect(),
        }
    }

    pub fn dispersion(&self) -> Result<Dispersion> {
        Ok(Dispersion::new(self.potential.clone(), self.kappa)?.with_rel_tol(self.tolerances.rel_tol))
    }
}

/// Everything computed for one (P, n).
#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub dp: DispersionPoint,
    pub n: u32,
    pub gamma: f64,
    pub h: f64,
    pub solution: PeriodicSolution,
    pub state: BlochState,
    pub residual: ResidualReport,
    pub residual_grid: usize,
}

impl SolveOutput {
    pub fn amplitude_error_sup(&self, v: &PeriodicPotential) -> f64 {
        self.solution.profile.deviation_from_limit(&self.dp, v)
    }

    /// CSV `x,A,dA` of the raw periodic amplitude.
    pub fn profile_csv(&self) -> String {
        let p = &self.solution.profile;
        let mut out = String::from("x,A,dA\n");
        for i in 0..=p.steps {
            let _ = writeln!(out, "{},{},{}", fmt_f64(p.x(i)), fmt_f64(p.a[i]), fmt_f64(p.da[i]));
        }
        out
    }

    /// CSV `x,A,theta,density` of the normalized state.
    pub fn state_csv(&self) -> String {
        let s = &self.state;
        let mut out = String::from("x,A,theta,density\n");
        for i in 0..=s.steps {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(s.x(i)),
                fmt_f64(s.a[i]),
                fmt_f64(s.theta[i]),
                fmt_f64(s.a[i] * s.a[i])
            );
        }
        out
    }

    /// Sidecar with residuals and the fixed point.
    pub fn profile_json(&self) -> serde_json::Value {
        serde_json::json!({
            "h": self.h,
            "n": self.n,
            "gamma": self.gamma,
            "steps": self.solution.profile.steps,
            "periodicity_residual": self.solution.profile.periodicity_residual,
            "fixed_point_residual": self.solution.fixed_point_residual,
            "newton_iters": self.solution.profile.newton_iters,
            "Z_star": { "re": self.solution.z_star.re, "im": self.solution.z_star.im },
            "certified_radius": self.solution.certified_radius,
            "certificates": self.solution.certificates,
            "dispersion": self.dp,
        })
    }

    /// `{h, n, gamma, P_in, P_recovered, E, residual, density_error_sup}`.
    pub fn state_summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "h": self.h,
            "n": self.n,
            "gamma": self.gamma,
            "P_in": self.state.p_in,
            "P_recovered": self.state.p_recovered,
            "E": self.state.e,
            "residual": self.residual.residual,
            "rayleigh_quotient": self.residual.rayleigh_quotient,
            "density_error_sup": self.state.density_error_sup,
        })
    }
}

/// Solves, assembles and measures one point of the quantized grid.
pub fn solve_at(
    v: &PeriodicPotential,
    dp: &DispersionPoint,
    gamma: f64,
    n: u32,
    tol: &Tolerances,
) -> Result<SolveOutput> {
    let h = h_for(dp, gamma, n)?;
    let solution = find_periodic_with(dp, v, h, tol.r_max, tol.step_control())?;
    let phase = reconstruct_phase(&solution.profile, dp);
    let mut state = assemble(&solution.profile, dp, &phase, v);
    let residual_grid = recommended_residual_grid(dp.omega_bar, h);
    let residual = state.measure_residual(v, residual_grid)?;
    Ok(SolveOutput {
        dp: dp.clone(),
        n,
        gamma,
        h,
        solution,
        state,
        residual,
        residual_grid,
    })
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub j: Option<u32>,
    pub n: u32,
    pub h: f64,
    pub p_in: f64,
    pub p_recovered: Option<f64>,
    pub e0: f64,
    pub energy_gap: f64,
    pub density_error_sup: Option<f64>,
    pub amplitude_error_sup: Option<f64>,
    pub eigen_residual: Option<f64>,
    pub periodicity_residual: Option<f64>,
    pub fixed_point_residual: Option<f64>,
    pub certified_radius: Option<f64>,
    pub concentration_outside: Option<f64>,
    pub density_argmax: Option<f64>,
    pub status: String,
    pub wall_time_ms: f64,
}

pub const SWEEP_CSV_HEADER: &str = "j,n,h,P_in,P_recovered,E0,energy_gap,density_error_sup,\
amplitude_error_sup,eigen_residual,periodicity_residual,fixed_point_residual,certified_radius,\
concentration_outside_0.1,density_argmax,status,wall_time_ms";

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn csv_row(&self) -> String {
        [
            self.j.map(|j| j.to_string()).unwrap_or_default(),
            self.n.to_string(),
            fmt_f64(self.h),
            fmt_f64(self.p_in),
            fmt_opt(self.p_recovered),
            fmt_f64(self.e0),
            fmt_f64(self.energy_gap),
            fmt_opt(self.density_error_sup),
            fmt_opt(self.amplitude_error_sup),
            fmt_opt(self.eigen_residual),
            fmt_opt(self.periodicity_residual),
            fmt_opt(self.fixed_point_residual),
            fmt_opt(self.certified_radius),
            fmt_opt(self.concentration_outside),
            fmt_opt(self.density_argmax),
            self.status.clone(),
            format!("{:.3}", self.wall_time_ms),
        ]
        .join(",")
    }
}

pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn measure_point(
    v: &PeriodicPotential,
    dp: &DispersionPoint,
    j: Option<u32>,
    n: u32,
    gamma: f64,
    tol: &Tolerances,
) -> SweepRecord {
    let started = Instant::now();
    let h = h_for(dp, gamma, n).unwrap_or(f64::NAN);
    let mut record = SweepRecord {
        j,
        n,
        h,
        p_in: dp.p,
        p_recovered: None,
        e0: dp.e0,
        energy_gap: dp.energy_gap(),
        density_error_sup: None,
        amplitude_error_sup: None,
        eigen_residual: None,
        periodicity_residual: None,
        fixed_point_residual: None,
        certified_radius: None,
        concentration_outside: None,
        density_argmax: None,
        status: String::new(),
        wall_time_ms: 0.0,
    };
    match solve_at(v, dp, gamma, n, tol) {
        Ok(out) => {
            let density = out.state.density();
            record.p_recovered = Some(out.state.p_recovered);
            record.density_error_sup = Some(out.state.density_error_sup);
            record.amplitude_error_sup = Some(out.amplitude_error_sup(v));
            record.eigen_residual = Some(out.residual.residual);
            record.periodicity_residual = Some(out.solution.profile.periodicity_residual);
            record.fixed_point_residual = Some(out.solution.fixed_point_residual);
            record.certified_radius = Some(out.solution.certified_radius);
            record.concentration_outside = Some(concentration_metric(&density, dp.x_max, tol.concentration_delta));
            record.density_argmax = Some(out.state.density_argmax());
            record.status = "ok".into();
        }
        Err(e) => record.status = status_label(&e),
    }
    record.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    record
}

fn status_label(e: &BlochError) -> String {
    let name = match e {
        BlochError::NoCertificate => "NoCertificate",
        BlochError::NewtonDiverged { .. } => "NewtonDiverged",
        BlochError::AmplitudeCollapse { .. } => "AmplitudeCollapse",
        BlochError::PeriodicityNotMet { .. } => "PeriodicityNotMet",
        BlochError::StepBudgetExceeded { .. } => "StepBudgetExceeded",
        BlochError::GridTooCoarse { .. } => "GridTooCoarse",
        _ => "Error",
    };
    name.to_string()
}

/// Maps `f` over `items` with at most `jobs` workers; output order follows input order.
fn map_ordered<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if jobs > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
    }
    let _ = jobs;
    items.iter().map(f).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NSweepSummary {
    pub kappa: Kappa,
    #[serde(rename = "P")]
    pub p: f64,
    pub gamma: f64,
    pub n_values: Vec<u32>,
    /// Log-log slope of density_error_sup against h; `None` when degenerate.
    pub density_order: Option<f64>,
    pub amplitude_order: Option<f64>,
    pub gauge_order: Option<f64>,
    /// Smallest n from which every later row succeeded.
    pub empirical_n_threshold: Option<u32>,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome<S> {
    pub records: Vec<SweepRecord>,
    pub summary: S,
}

/// Errors at or below this are treated as exact and excluded from order fits.
const ORDER_FIT_FLOOR: f64 = 1e-9;

/// n-sweep at fixed P along h_n = Ω̄/(2πn + γ).
pub fn run_n_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome<NSweepSummary>> {
    cfg.validate()?;
    let n_values = cfg.n_values();
    let disp = cfg.dispersion()?;
    let dp = disp.point(cfg.p)?;
    let v = &cfg.potential;
    let records = map_ordered(&n_values, cfg.jobs, |&n| measure_point(v, &dp, None, n, cfg.gamma, &cfg.tolerances));

    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let hs: Vec<f64> = ok.iter().map(|r| r.h).collect();
    let fit = |vals: Vec<f64>| log_log_order(&hs, &vals, ORDER_FIT_FLOOR);
    let density_order = fit(ok.iter().filter_map(|r| r.density_error_sup).collect());
    let amplitude_order = fit(ok.iter().filter_map(|r| r.amplitude_error_sup).collect());
    let gauge_order = fit(ok.iter().filter_map(|r| r.p_recovered.map(|p| (p - cfg.p).abs())).collect());
    let empirical_n_threshold = records
        .iter()
        .rposition(|r| !r.is_ok())
        .map_or(records.first().map(|r| r.n), |i| records.get(i + 1).map(|r| r.n));

    let summary = NSweepSummary {
        kappa: cfg.kappa,
        p: cfg.p,
        gamma: cfg.gamma,
        n_values,
        density_order,
        amplitude_order,
        gauge_order,
        empirical_n_threshold,
        failures: records.len() - ok.len(),
    };
    Ok(SweepOutcome { records, summary })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeSweepSummary {
    pub kappa: Kappa,
    pub gamma: f64,
    #[serde(rename = "P_crit")]
    pub p_crit: f64,
    pub x_max: f64,
    pub j_values: Vec<u32>,
    pub n_schedule: Vec<u32>,
    pub gaps_decreasing: bool,
    pub concentration_decreasing: bool,
    /// Circle distance from the final density maximum to x₀.
    pub final_argmax_distance: Option<f64>,
    pub failures: usize,
}

/// Smallest n ≥ 1 with h_n ≤ fraction·(E₀ − Ē)/Ω̄.
pub fn diagonal_n(dp: &DispersionPoint, gamma: f64, fraction: f64) -> u32 {
    let h_target = fraction * dp.energy_gap() / dp.omega_bar;
    let n = ((dp.omega_bar / h_target - gamma) / (2.0 * PI)).ceil();
    let mut n = n.max(1.0) as u32;
    // Guard the ceiling against rounding on either side.
    while n > 1 && dp.omega_bar / (2.0 * PI * (n - 1) as f64 + gamma) <= h_target {
        n -= 1;
    }
    while dp.omega_bar / (2.0 * PI * n as f64 + gamma) > h_target {
        n += 1;
    }
    n
}

/// Diagonal sweep P_j ↓ P̲ with n(j) from [`diagonal_n`].
pub fn run_gauge_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome<GaugeSweepSummary>> {
    cfg.validate()?;
    let disp = cfg.dispersion()?;
    let p_crit = disp.critical_gauge()?;
    let PSequence { j_min, j_max } = cfg.p_sequence;
    let j_values: Vec<u32> = (j_min..=j_max).collect();
    let points = j_values
        .iter()
        .map(|&j| disp.point(p_crit * (1.0 + 0.5f64.powi(j as i32))))
        .collect::<Result<Vec<_>>>()?;
    let schedule: Vec<(u32, u32, &DispersionPoint)> = j_values
        .iter()
        .zip(&points)
        .map(|(&j, dp)| (j, diagonal_n(dp, cfg.gamma, cfg.tolerances.schedule_fraction), dp))
        .collect();
    let v = &cfg.potential;
    let records = map_ordered(&schedule, cfg.jobs, |&(j, n, dp)| {
        measure_point(v, dp, Some(j), n, cfg.gamma, &cfg.tolerances)
    });

    let strictly_decreasing = |vals: &[Option<f64>]| {
        vals.iter().all(|v| v.is_some()) && vals.windows(2).all(|w| w[1] < w[0])
    };
    let gaps: Vec<Option<f64>> = records.iter().map(|r| Some(r.energy_gap)).collect();
    let conc: Vec<Option<f64>> = records.iter().map(|r| r.concentration_outside).collect();
    let x_max = disp.actions().profile().x_max;
    let summary = GaugeSweepSummary {
        kappa: cfg.kappa,
        gamma: cfg.gamma,
        p_crit,
        x_max,
        n_schedule: schedule.iter().map(|s| s.1).collect(),
        j_values,
        gaps_decreasing: strictly_decreasing(&gaps),
        concentration_decreasing: strictly_decreasing(&conc),
        final_argmax_distance: records
            .last()
            .and_then(|r| r.density_argmax)
            .map(|x| circle_distance(x, x_max)),
        failures: records.iter().filter(|r| !r.is_ok()).count(),
    };
    Ok(SweepOutcome { records, summary })
}

/// Oracle comparison of one constructed state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionRow {
    pub kappa: Kappa,
    pub n: u32,
    pub h: f64,
    pub p_recovered: f64,
    /// Eigenvalue carried by the constructed state.
    pub state_energy: f64,
    pub oracle_eigenvalue: f64,
    /// E₀(P_recovered) under the same convention.
    pub e0_at_recovered: f64,
    /// |oracle eigenvalue − E₀(P_recovered)|.
    pub discrepancy: f64,
    /// ‖oracle density − |ψ|²‖∞ on the oracle grid.
    pub density_mismatch: f64,
    pub cutoff: usize,
}

/// Builds the state at (P, n) and checks it against the dense spectrum of L_{h_n, P_recovered}.
pub fn convention_check(
    v: &PeriodicPotential,
    kappa: Kappa,
    p: f64,
    gamma: f64,
    n: u32,
    tol: &Tolerances,
) -> Result<ConventionRow> {
    let disp = Dispersion::new(v.clone(), kappa)?.with_rel_tol(tol.rel_tol);
    let dp = disp.point(p)?;
    let out = solve_at(v, &dp, gamma, n, tol)?;
    let state = &out.state;
    let cutoff = GaugedOperatorSpec::resolving_cutoff(dp.omega_bar, out.h);
    let spec = GaugedOperatorSpec::new(v.clone(), out.h, state.p_recovered, cutoff);
    let spectrum = build_and_diagonalize(&spec)?;
    let grid = (2 * spec.dimension()).next_power_of_two().max(256).min(state.steps);
    let candidate = select_bloch_candidate(&spectrum, state.e, grid)?;
    let e0_at_recovered = disp.point(state.p_recovered)?.e0;

    let stride = state.steps / grid;
    let density_mismatch = candidate
        .density
        .iter()
        .enumerate()
        .map(|(j, d)| (d - state.a[j * stride].powi(2)).abs())
        .fold(0.0, f64::max);
    Ok(ConventionRow {
        kappa,
        n,
        h: out.h,
        p_recovered: state.p_recovered,
        state_energy: state.e,
        oracle_eigenvalue: candidate.eigenvalue,
        e0_at_recovered,
        discrepancy: (candidate.eigenvalue - e0_at_recovered).abs(),
        density_mismatch,
        cutoff,
    })
}

pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenEntry {
    pub key: String,
    pub value: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenSet {
    pub kappa: Kappa,
    pub entries: Vec<GoldenEntry>,
}

/// The golden set shipped with the crate (κ = 1).
pub const DEFAULT_GOLDEN: &str = include_str!("../golden/kappa1.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub key: String,
    pub expected: f64,
    pub computed: Option<f64>,
    pub tol: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub kappa: Kappa,
    pub rows: Vec<RegressionRow>,
}

impl RegressionReport {
    pub fn failing_keys(&self) -> Vec<String> {
        self.rows.iter().filter(|r| !r.ok).map(|r| r.key.clone()).collect()
    }
}

/// Recomputes every quantity the golden files know about under convention `kappa`.
pub fn golden_quantities(kappa: Kappa) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let cos = PeriodicPotential::cosine(1.0, 1);
    let actions = ActionIntegrals::new(cos.clone())?;
    let tol = DEFAULT_REL_TOL;
    out.insert("quad.I.cos.E1.5".into(), actions.inv_sqrt(1.5, tol)?.value);
    out.insert("quad.I.cos.E2".into(), actions.inv_sqrt(2.0, tol)?.value);
    out.insert("quad.J.cos.E1".into(), actions.sqrt(1.0, tol)?.value);
    out.insert("quad.J.cos.E2".into(), actions.sqrt(2.0, tol)?.value);

    let disp = Dispersion::new(cos.clone(), kappa)?;
    out.insert("dispersion.P_crit.cos".into(), disp.critical_gauge()?);
    let dp = disp.point(1.2)?;
    out.insert("dispersion.E0.cos.P1.2".into(), dp.e0);
    out.insert("dispersion.lambda.cos.P1.2".into(), dp.lambda);
    out.insert("dispersion.omega_bar.cos.P1.2".into(), dp.omega_bar);

    let constant = PeriodicPotential::constant(0.3);
    let cdp = Dispersion::new(constant.clone(), kappa)?.point(0.5)?;
    out.insert("const.E0".into(), cdp.e0);
    out.insert("const.lambda".into(), cdp.lambda);
    out.insert("const.omega_bar".into(), cdp.omega_bar);

    let cspec = GaugedOperatorSpec::new(constant, 0.1, 0.5, 16);
    let cs = build_and_diagonalize(&cspec)?;
    out.insert("oracle.const.eig0".into(), cs.eigenvalues[0]);
    out.insert("oracle.const.eig1".into(), cs.eigenvalues[1]);
    let gspec = GaugedOperatorSpec::new(cos, 0.1, 0.0, 64);
    out.insert("oracle.cos.ground.h0.1".into(), build_and_diagonalize(&gspec)?.eigenvalues[0]);
    Ok(out)
}

/// Compares recomputed quantities against a golden set.
pub fn compare_golden(golden: &GoldenSet, kappa: Kappa) -> Result<RegressionReport> {
    let computed = golden_quantities(kappa)?;
    let rows = golden
        .entries
        .iter()
        .map(|e| {
            let value = computed.get(&e.key).copied();
            let ok = value.is_some_and(|c| (c - e.value).abs() <= e.tol);
            RegressionRow {
                key: e.key.clone(),
                expected: e.value,
                computed: value,
                tol: e.tol,
                ok,
            }
        })
        .collect();
    Ok(RegressionReport { kappa, rows })
}

/// Loads `path` (or the shipped set) and fails with `GoldenMismatch` on any offending key.
pub fn run_regression(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<RegressionReport> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|_| BlochError::GoldenMismatch(vec![format!("missing: {}", p.display())]))?,
        None => DEFAULT_GOLDEN.to_string(),
    };
    let golden: GoldenSet =
        serde_json::from_str(&text).map_err(|e| BlochError::GoldenMismatch(vec![format!("unreadable: {e}")]))?;
    let report = compare_golden(&golden, cfg.kappa)?;
    let failing = report.failing_keys();
    if failing.is_empty() {
        Ok(report)
    } else {
        Err(BlochError::GoldenMismatch(failing))
    }
}
