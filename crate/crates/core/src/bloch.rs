//! Assembly of ψ = A e^{iθ/h} from a periodic amplitude.
//!
//! Eliminating the phase from `L_{h,P}ψ = Eψ` gives `θ′ + P = c/A²` with
//! `c² = λ`, so a periodic θ forces `P = c∫₀¹A^{-2}`. That recovered gauge,
//! not the input P, is the one the assembled state is an eigenfunction for.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::amplitude::AmplitudeProfile;
use crate::dispersion::{limit_amplitude, DispersionPoint};
use crate::error::{BlochError, Result};
use crate::potential::PeriodicPotential;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReconstruction {
    /// θ on the closed grid, θ(0) = 0.
    pub theta: Vec<f64>,
    pub p_recovered: f64,
    /// Coefficient in θ′ + P = c/A².
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub h: f64,
    pub steps: usize,
    /// Unit-norm amplitude on the closed grid x_i = i/steps.
    pub a: Vec<f64>,
    pub da: Vec<f64>,
    pub theta: Vec<f64>,
    /// θ′ + P = c/A² for the normalized amplitude.
    pub c: f64,
    pub p_in: f64,
    pub p_recovered: f64,
    pub e: f64,
    pub omega_bar: f64,
    /// ‖A²/‖A‖² − A₀²‖∞ on the grid.
    pub density_error_sup: f64,
    /// ∫A² before normalization.
    pub norm: f64,
    pub eigen_residual: Option<f64>,
    pub rayleigh_quotient: Option<f64>,
}

impl BlochState {
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.steps as f64
    }

    /// |ψ|² on the open grid (the duplicate endpoint dropped).
    pub fn density(&self) -> Vec<f64> {
        self.a[..self.steps].iter().map(|a| a * a).collect()
    }

    /// Location of the density maximum.
    pub fn density_argmax(&self) -> f64 {
        let (i, _) = self.a[..self.steps]
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &a)| if a > best.1 { (i, a) } else { best });
        self.x(i)
    }

    /// Measures and stores the eigen-residual at the state's energy.
    pub fn measure_residual(&mut self, v: &PeriodicPotential, grid_size: usize) -> Result<ResidualReport> {
        let report = eigen_residual(self, v, grid_size)?;
        self.eigen_residual = Some(report.residual);
        self.rayleigh_quotient = Some(report.rayleigh_quotient);
        Ok(report)
    }
}

/// Trapezoid rule with the Euler–Maclaurin endpoint correction on a closed uniform grid.
fn corrected_trapezoid(f: &[f64], df: &[f64], dx: f64) -> f64 {
    let n = f.len() - 1;
    let interior: f64 = f[1..n].iter().sum();
    dx * (0.5 * (f[0] + f[n]) + interior) + dx * dx / 12.0 * (df[0] - df[n])
}

/// θ and the recovered gauge from a periodic amplitude.
pub fn reconstruct_phase(profile: &AmplitudeProfile, dp: &DispersionPoint) -> PhaseReconstruction {
    reconstruct_phase_with(&profile.a, &profile.da, dp.lambda.sqrt())
}

fn reconstruct_phase_with(a: &[f64], da: &[f64], c: f64) -> PhaseReconstruction {
    let steps = a.len() - 1;
    let dx = 1.0 / steps as f64;
    let g: Vec<f64> = a.iter().map(|a| a.powi(-2)).collect();
    let dg: Vec<f64> = a.iter().zip(da).map(|(a, d)| -2.0 * d * a.powi(-3)).collect();
    let p_recovered = c * corrected_trapezoid(&g, &dg, dx);

    let mut theta = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    theta.push(0.0);
    for i in 0..steps {
        let f0 = c * g[i] - p_recovered;
        let f1 = c * g[i + 1] - p_recovered;
        acc += 0.5 * dx * (f0 + f1) + dx * dx / 12.0 * c * (dg[i] - dg[i + 1]);
        theta.push(acc);
    }
    PhaseReconstruction {
        theta,
        p_recovered,
        c,
    }
}

/// Normalizes the amplitude and measures the density error against A₀².
pub fn assemble(
    profile: &AmplitudeProfile,
    dp: &DispersionPoint,
    phase: &PhaseReconstruction,
    v: &PeriodicPotential,
) -> BlochState {
    let steps = profile.steps;
    let dx = 1.0 / steps as f64;
    let sq: Vec<f64> = profile.a.iter().map(|a| a * a).collect();
    let dsq: Vec<f64> = profile.a.iter().zip(&profile.da).map(|(a, d)| 2.0 * a * d).collect();
    let norm = corrected_trapezoid(&sq, &dsq, dx);
    let s = norm.sqrt().recip();
    let a: Vec<f64> = profile.a.iter().map(|a| s * a).collect();
    let da: Vec<f64> = profile.da.iter().map(|d| s * d).collect();
    let density_error_sup = a
        .iter()
        .enumerate()
        .map(|(i, a)| (a * a - limit_amplitude(dp, v, i as f64 * dx).powi(2)).abs())
        .fold(0.0, f64::max);
    BlochState {
        h: profile.h,
        steps,
        a,
        da,
        theta: phase.theta.clone(),
        // A → sA rescales the ODE constant λ → λs⁴, i.e. c → cs².
        c: phase.c * s * s,
        p_in: dp.p,
        p_recovered: phase.p_recovered,
        e: dp.e0,
        omega_bar: dp.omega_bar,
        density_error_sup,
        norm,
        eigen_residual: None,
        rayleigh_quotient: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// ‖L_{h,P_n}ψ − Eψ‖₂ / ‖ψ‖₂.
    pub residual: f64,
    /// ⟨ψ, Lψ⟩ / ⟨ψ, ψ⟩.
    pub rayleigh_quotient: f64,
}

/// Smallest grid accepted by [`eigen_residual`] for the given scales.
pub fn minimum_residual_grid(omega_bar: f64, h: f64) -> usize {
    (4.0 * omega_bar / (PI * h)).ceil() as usize
}

/// Power-of-two grid that resolves the phase oscillation comfortably.
pub fn recommended_residual_grid(omega_bar: f64, h: f64) -> usize {
    let want = (16.0 * omega_bar / (2.0 * PI * h)).ceil() as usize;
    want.max(256).next_power_of_two()
}

/// ψ = A e^{iθ/h} sampled at x_j = j/n.
pub fn sample_wavefunction(state: &BlochState, n: usize) -> Vec<Complex64> {
    let m = state.steps;
    let at = |a: f64, theta: f64| Complex64::from_polar(a, theta / state.h);
    if m.is_multiple_of(n) {
        let stride = m / n;
        return (0..n).map(|j| at(state.a[j * stride], state.theta[j * stride])).collect();
    }
    // Cubic Hermite on (A, A′) and (θ, θ′ = c/A² − P).
    let dx = 1.0 / m as f64;
    let dtheta = |i: usize| state.c / (state.a[i] * state.a[i]) - state.p_recovered;
    (0..n)
        .map(|j| {
            let pos = j as f64 / n as f64 * m as f64;
            let i = (pos.floor() as usize).min(m - 1);
            let t = pos - i as f64;
            let a = hermite(state.a[i], state.a[i + 1], state.da[i], state.da[i + 1], dx, t);
            let th = hermite(state.theta[i], state.theta[i + 1], dtheta(i), dtheta(i + 1), dx, t);
            at(a, th)
        })
        .collect()
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, dx: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * dx * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * dx * d1
}

/// Applies −(h d/dx + iP)² by FFT to periodic samples.
pub fn apply_kinetic(psi: &[Complex64], h: f64, p: f64) -> Vec<Complex64> {
    let n = psi.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf = psi.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    let symbol = |k: f64| (2.0 * PI * h * k + p).powi(2);
    for (idx, c) in buf.iter_mut().enumerate() {
        let weight = if 2 * idx == n {
            let k = (n / 2) as f64;
            0.5 * (symbol(k) + symbol(-k))
        } else if 2 * idx < n {
            symbol(idx as f64)
        } else {
            symbol(idx as f64 - n as f64)
        };
        *c *= weight / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Relative residual of L_{h,P_n}ψ = Eψ at the state's energy.
pub fn eigen_residual(state: &BlochState, v: &PeriodicPotential, grid_size: usize) -> Result<ResidualReport> {
    eigen_residual_at(state, v, grid_size, state.e)
}

/// Relative residual with an arbitrary trial energy.
pub fn eigen_residual_at(
    state: &BlochState,
    v: &PeriodicPotential,
    grid_size: usize,
    energy: f64,
) -> Result<ResidualReport> {
    if grid_size < 256 || !grid_size.is_power_of_two() {
        return Err(BlochError::InvalidInput(format!(
            "residual grid must be a power of two >= 256, got {grid_size}"
        )));
    }
    let required = minimum_residual_grid(state.omega_bar, state.h);
    if grid_size < required {
        return Err(BlochError::GridTooCoarse { grid_size, required });
    }
    let psi = sample_wavefunction(state, grid_size);
    let kinetic = apply_kinetic(&psi, state.h, state.p_recovered);
    let mut res2 = 0.0;
    let mut norm2 = 0.0;
    let mut quad = 0.0;
    for (j, (&p, &t)) in psi.iter().zip(&kinetic).enumerate() {
        let vx = v.eval(j as f64 / grid_size as f64, 0);
        let lpsi = t + p * vx;
        res2 += (lpsi - p * energy).norm_sqr();
        norm2 += p.norm_sqr();
        quad += (p.conj() * lpsi).re;
    }
    Ok(ResidualReport {
        residual: (res2 / norm2).sqrt(),
        rayleigh_quotient: quad / norm2,
    })
}

/// Mass of a unit-mass density on x_j = j/N outside the arc |x − x₀| ≤ δ.
///
/// Each sample carries the cell [x_j − 1/2N, x_j + 1/2N]; partially covered
/// cells count fractionally.
pub fn concentration_metric(density: &[f64], x0: f64, delta: f64) -> f64 {
    let n = density.len();
    if delta >= 0.5 {
        return 0.0;
    }
    let w = 0.5 / n as f64;
    let mut outside = 0.0;
    for (j, &d) in density.iter().enumerate() {
        let s = (j as f64 / n as f64 - x0 + 0.5).rem_euclid(1.0) - 0.5;
        let covered: f64 = [-1.0, 0.0, 1.0]
            .iter()
            .map(|shift| {
                let lo = (s - w).max(shift - delta);
                let hi = (s + w).min(shift + delta);
                (hi - lo).max(0.0)
            })
            .sum();
        outside += d * (2.0 * w - covered.min(2.0 * w));
    }
    outside
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::find_periodic;
    use crate::dispersion::{h_for, invert_dispersion, Kappa};

    fn constant_state() -> (PeriodicPotential, DispersionPoint, BlochState) {
        let v = PeriodicPotential::constant(0.3);
        let dp = invert_dispersion(&v, 0.5, Kappa::One).unwrap();
        let h = h_for(&dp, PI, 8).unwrap();
        let sol = find_periodic(&dp, &v, h, 0.5).unwrap();
        let phase = reconstruct_phase(&sol.profile, &dp);
        let state = assemble(&sol.profile, &dp, &phase, &v);
        (v, dp, state)
    }

    #[test]
    fn constant_phase_is_trivial() {
        let (_, _, state) = constant_state();
        assert!((state.c - 0.5).abs() < 1e-10);
        assert!((state.p_recovered - 0.5).abs() < 1e-10);
        assert!(state.theta.iter().all(|t| t.abs() < 1e-10));
        assert!(state.density_error_sup <= 1e-10);
    }

    #[test]
    fn constant_state_is_exact_eigenfunction() {
        let (v, _, mut state) = constant_state();
        let grid = recommended_residual_grid(state.omega_bar, state.h);
        let report = state.measure_residual(&v, grid).unwrap();
        assert!(report.residual <= 1e-9, "{}", report.residual);
        assert!((report.rayleigh_quotient - 0.55).abs() < 1e-9);
        let shifted = eigen_residual_at(&state, &v, grid, state.e + 1e-3).unwrap();
        assert!((shifted.residual - 1e-3).abs() < 1e-6);
    }

    #[test]
    fn normalization_is_unit() {
        let (_, _, state) = constant_state();
        let sq: Vec<f64> = state.a.iter().map(|a| a * a).collect();
        let dsq: Vec<f64> = state.a.iter().zip(&state.da).map(|(a, d)| 2.0 * a * d).collect();
        let mass = corrected_trapezoid(&sq, &dsq, 1.0 / state.steps as f64);
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_is_scale_invariant() {
        let a: Vec<f64> = (0..=256).map(|i| 1.2 + 0.3 * (2.0 * PI * i as f64 / 256.0).cos()).collect();
        let da: Vec<f64> = (0..=256)
            .map(|i| -0.3 * 2.0 * PI * (2.0 * PI * i as f64 / 256.0).sin())
            .collect();
        let base = reconstruct_phase_with(&a, &da, 0.9);
        let s: f64 = 1.7;
        let sa: Vec<f64> = a.iter().map(|x| s * x).collect();
        let sda: Vec<f64> = da.iter().map(|x| s * x).collect();
        let scaled = reconstruct_phase_with(&sa, &sda, 0.9 * s * s);
        assert!((base.p_recovered - scaled.p_recovered).abs() < 1e-10);
        assert!(base.theta.iter().zip(&scaled.theta).all(|(x, y)| (x - y).abs() < 1e-10));
        assert!(base.theta.last().unwrap().abs() < 1e-12);
    }

    #[test]
    fn residual_grid_checks() {
        let (v, _, state) = constant_state();
        assert!(eigen_residual(&state, &v, 300).is_err());
        let required = minimum_residual_grid(state.omega_bar, state.h);
        if required > 256 {
            assert!(matches!(
                eigen_residual(&state, &v, 256),
                Err(BlochError::GridTooCoarse { .. })
            ));
        }
    }

    #[test]
    fn hermite_resampling_matches_subsampling() {
        let v = PeriodicPotential::cosine(1.0, 1);
        let dp = invert_dispersion(&v, 1.2, Kappa::One).unwrap();
        let h = h_for(&dp, PI, 10).unwrap();
        let sol = find_periodic(&dp, &v, h, 0.5).unwrap();
        let phase = reconstruct_phase(&sol.profile, &dp);
        let state = assemble(&sol.profile, &dp, &phase, &v);
        // Drop every other node and interpolate back onto the full grid.
        let mut coarse = state.clone();
        coarse.steps = state.steps / 2;
        coarse.a = state.a.iter().step_by(2).cloned().collect();
        coarse.da = state.da.iter().step_by(2).cloned().collect();
        coarse.theta = state.theta.iter().step_by(2).cloned().collect();
        let fine = sample_wavefunction(&state, state.steps);
        let interp = sample_wavefunction(&coarse, state.steps);
        let err = fine.iter().zip(&interp).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn concentration_examples() {
        let uniform = vec![1.0; 1000];
        assert!((concentration_metric(&uniform, 0.0, 0.1) - 0.8).abs() < 1e-12);
        assert!((concentration_metric(&uniform, 0.37, 0.1) - 0.8).abs() < 1e-12);
        assert_eq!(concentration_metric(&uniform, 0.2, 0.5), 0.0);
        let mut spike = vec![0.0; 100];
        spike[0] = 100.0;
        assert!(concentration_metric(&spike, 0.0, 0.1).abs() < 1e-12);
        assert!((concentration_metric(&spike, 0.5, 0.1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_density_concentrates_as_gauge_approaches_critical() {
        let v = PeriodicPotential::cosine(1.0, 1);
        let disp = crate::dispersion::Dispersion::new(v.clone(), Kappa::One).unwrap();
        let p_crit = disp.critical_gauge().unwrap();
        let n = 4096;
        let metrics: Vec<f64> = (1..=8)
            .map(|j| {
                let dp = disp.point(p_crit * (1.0 + 0.5f64.powi(j))).unwrap();
                let density: Vec<f64> = (0..n)
                    .map(|i| limit_amplitude(&dp, &v, i as f64 / n as f64).powi(2))
                    .collect();
                concentration_metric(&density, 0.0, 0.1)
            })
            .collect();
        assert!(metrics.windows(2).all(|w| w[1] < w[0]), "{metrics:?}");
    }
}
