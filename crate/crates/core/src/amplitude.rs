//! The amplitude equation `h²A″ = −(E − V)A + λA^{-3}`, its period map in
//! phase-plane coordinates, winding certificates and periodic solutions.
//!
//! The equation is integrated in the original variable x ∈ [0, 1] with a
//! fixed-step classical Runge–Kutta scheme; the step is a power-of-two
//! fraction of the period no larger than `h·max_step_fraction_of_h`, so the
//! fast oscillation at frequency Ω/h is resolved and sample grids nest.
//!
//! Phase-plane coordinates at x = 0 and x = 1 (where Ω takes the same value):
//! `Z = η/h + i η′/Ω`, with `η = A − A₀`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{limit_amplitude, limit_amplitude_derivative, omega, DispersionPoint};
use crate::error::{BlochError, Result};
use crate::potential::PeriodicPotential;

pub const MAX_STEPS: usize = 100_000_000;

/// Smallest radius tried by the winding certificate.
pub const MIN_CERTIFICATE_RADIUS: f64 = 1e-3;
/// Doublings of r_max tried when the first circle does not certify.
pub const MAX_WIDENINGS: usize = 12;

const MAX_WINDING_SAMPLES: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub max_step_fraction_of_h: f64,
    /// Accepted size of |Ψ_h(Z) − Z| at a fixed point.
    pub abs_tol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            max_step_fraction_of_h: 1.0 / 40.0,
            abs_tol: 1e-11,
        }
    }
}

impl StepControl {
    /// Power-of-two step count with `1/steps ≤ h·max_step_fraction_of_h`.
    pub fn steps_for(&self, h: f64) -> Result<usize> {
        if !(h > 0.0) || !(self.max_step_fraction_of_h > 0.0) {
            return Err(BlochError::InvalidInput(format!(
                "h and step fraction must be positive (h = {h})"
            )));
        }
        let needed = (1.0 / (h * self.max_step_fraction_of_h)).ceil();
        if needed > MAX_STEPS as f64 {
            return Err(BlochError::StepBudgetExceeded {
                steps: needed.min(usize::MAX as f64) as usize,
            });
        }
        let steps = (needed as usize).max(1).next_power_of_two();
        if steps > MAX_STEPS {
            return Err(BlochError::StepBudgetExceeded { steps });
        }
        Ok(steps)
    }
}

#[derive(Clone, Debug)]
pub struct AmplitudeIvp {
    pub h: f64,
    pub dp: DispersionPoint,
    pub a_init: f64,
    pub da_init: f64,
    pub step_control: StepControl,
}

/// Samples of (A, A′) at x_i = i/steps, i = 0..=steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeTrajectory {
    pub h: f64,
    pub steps: usize,
    pub a: Vec<f64>,
    pub da: Vec<f64>,
}

impl AmplitudeTrajectory {
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.steps as f64
    }

    pub fn end(&self) -> (f64, f64) {
        (self.a[self.steps], self.da[self.steps])
    }
}

/// A periodic amplitude A_h on the closed grid x_i = i/steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeProfile {
    pub h: f64,
    pub steps: usize,
    pub a: Vec<f64>,
    pub da: Vec<f64>,
    /// |A(1) − A(0)| + |A′(1) − A′(0)|.
    pub periodicity_residual: f64,
    pub newton_iters: usize,
}

impl AmplitudeProfile {
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.steps as f64
    }

    pub fn max_amplitude(&self) -> f64 {
        self.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_amplitude(&self) -> f64 {
        self.a.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// ‖A_h − A₀‖∞ on the sample grid.
    pub fn deviation_from_limit(&self, dp: &DispersionPoint, v: &PeriodicPotential) -> f64 {
        self.a
            .iter()
            .enumerate()
            .map(|(i, &a)| (a - limit_amplitude(dp, v, self.x(i))).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn kahan_add(sum: f64, comp: f64, increment: f64) -> (f64, f64) {
    let y = increment - comp;
    let t = sum + y;
    (t, (t - sum) - y)
}

/// The period-one map Ψ_h for fixed (V, E₀, λ, h), with the potential
/// pre-sampled on the Runge–Kutta stage nodes.
#[derive(Clone, Debug)]
pub struct PeriodMap {
    h: f64,
    steps: usize,
    lambda: f64,
    omega_bar: f64,
    /// E₀ − V on x = j/(2·steps), j = 0..=2·steps.
    gap: Vec<f64>,
    a0_start: f64,
    da0_start: f64,
    omega_start: f64,
    a0_min: f64,
}

impl PeriodMap {
    pub fn new(dp: &DispersionPoint, v: &PeriodicPotential, h: f64, control: StepControl) -> Result<Self> {
        let steps = control.steps_for(h)?;
        let nodes = 2 * steps;
        let gap: Vec<f64> = (0..=nodes)
            .map(|j| dp.e0 - v.eval(j as f64 / nodes as f64, 0))
            .collect();
        let a0_min = gap
            .iter()
            .map(|g| dp.lambda.powf(0.25) * g.powf(-0.25))
            .fold(f64::INFINITY, f64::min);
        Ok(PeriodMap {
            h,
            steps,
            lambda: dp.lambda,
            omega_bar: dp.omega_bar,
            gap,
            a0_start: limit_amplitude(dp, v, 0.0),
            da0_start: limit_amplitude_derivative(dp, v, 0.0),
            omega_start: omega(dp, v, 0.0),
            a0_min,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn omega_bar(&self) -> f64 {
        self.omega_bar
    }

    /// Upper bound on |Z| keeping A = A₀ + hRe Z away from zero.
    pub fn max_radius(&self) -> f64 {
        self.a0_min / (2.0 * self.h)
    }

    #[inline]
    fn accel(&self, gap: f64, a: f64, inv_h2: f64) -> f64 {
        let inv_a = a.recip();
        (self.lambda * inv_a * inv_a * inv_a - gap * a) * inv_h2
    }

    /// RK4 over [0, 1]; `record` receives (i, A, A′) at every grid node.
    fn integrate_with<F: FnMut(usize, f64, f64)>(&self, a_init: f64, da_init: f64, mut record: F) -> Result<(f64, f64)> {
        if !(a_init > 0.0) {
            return Err(BlochError::AmplitudeCollapse { x: 0.0 });
        }
        let dx = 1.0 / self.steps as f64;
        let half = 0.5 * dx;
        let inv_h2 = (self.h * self.h).recip();
        let (mut a, mut b) = (a_init, da_init);
        // Compensated accumulation keeps roundoff in η/h well below the fixed-point tolerance.
        let (mut comp_a, mut comp_b) = (0.0, 0.0);
        record(0, a, b);
        for i in 0..self.steps {
            let g0 = self.gap[2 * i];
            let g1 = self.gap[2 * i + 1];
            let g2 = self.gap[2 * i + 2];

            let k1a = b;
            let k1b = self.accel(g0, a, inv_h2);
            let a2 = a + half * k1a;
            let k2a = b + half * k1b;
            let k2b = self.accel(g1, a2, inv_h2);
            let a3 = a + half * k2a;
            let k3a = b + half * k2b;
            let k3b = self.accel(g1, a3, inv_h2);
            let a4 = a + dx * k3a;
            let k4a = b + dx * k3b;
            let k4b = self.accel(g2, a4, inv_h2);

            (a, comp_a) = kahan_add(a, comp_a, dx / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a));
            (b, comp_b) = kahan_add(b, comp_b, dx / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b));
            if !(a > 0.0) || a2 <= 0.0 || a3 <= 0.0 || a4 <= 0.0 || !b.is_finite() {
                return Err(BlochError::AmplitudeCollapse {
                    x: (i + 1) as f64 * dx,
                });
            }
            record(i + 1, a, b);
        }
        Ok((a, b))
    }

    pub fn endpoint(&self, a_init: f64, da_init: f64) -> Result<(f64, f64)> {
        self.integrate_with(a_init, da_init, |_, _, _| {})
    }

    pub fn trajectory(&self, a_init: f64, da_init: f64) -> Result<AmplitudeTrajectory> {
        let mut a = vec![0.0; self.steps + 1];
        let mut da = vec![0.0; self.steps + 1];
        self.integrate_with(a_init, da_init, |i, ai, bi| {
            a[i] = ai;
            da[i] = bi;
        })?;
        Ok(AmplitudeTrajectory {
            h: self.h,
            steps: self.steps,
            a,
            da,
        })
    }

    /// Initial data (A(0), A′(0)) for a phase-plane point Z.
    pub fn initial_data(&self, z: Complex64) -> (f64, f64) {
        (self.a0_start + self.h * z.re, self.da0_start + self.omega_start * z.im)
    }

    pub fn to_phase_plane(&self, a: f64, da: f64) -> Complex64 {
        Complex64::new((a - self.a0_start) / self.h, (da - self.da0_start) / self.omega_start)
    }

    /// Ψ_h(Z).
    pub fn apply(&self, z: Complex64) -> Result<Complex64> {
        if !(z.norm() < self.max_radius()) {
            return Err(BlochError::InvalidInput(format!(
                "|Z| = {} exceeds the admissible radius {}",
                z.norm(),
                self.max_radius()
            )));
        }
        let (a, da) = self.initial_data(z);
        let (a1, da1) = self.endpoint(a, da)?;
        Ok(self.to_phase_plane(a1, da1))
    }

    /// max over `samples` points of |Ψ_h(Z) − e^{−iγ}Z| on |Z| = r.
    pub fn rotation_defect(&self, gamma: f64, r: f64, samples: usize) -> Result<f64> {
        let rot = Complex64::from_polar(1.0, -gamma);
        circle_points(Complex64::new(0.0, 0.0), r, samples)
            .map(|z| Ok((self.apply(z)? - rot * z).norm()))
            .try_fold(0.0f64, |m, d: Result<f64>| Ok(m.max(d?)))
    }

    /// max over `samples` points of |e^{iΩ̄/h}Ψ_h(Z) − Z| on |Z| = r.
    pub fn unwound_defect(&self, r: f64, samples: usize) -> Result<f64> {
        let unwind = Complex64::from_polar(1.0, self.omega_bar / self.h);
        circle_points(Complex64::new(0.0, 0.0), r, samples)
            .map(|z| Ok((unwind * self.apply(z)? - z).norm()))
            .try_fold(0.0f64, |m, d: Result<f64>| Ok(m.max(d?)))
    }
}

fn circle_points(center: Complex64, r: f64, samples: usize) -> impl Iterator<Item = Complex64> {
    (0..samples).map(move |k| center + Complex64::from_polar(r, 2.0 * PI * k as f64 / samples as f64))
}

/// Integrates the amplitude equation from the given initial data.
pub fn integrate_amplitude(ivp: &AmplitudeIvp, v: &PeriodicPotential) -> Result<AmplitudeTrajectory> {
    if !(ivp.a_init > 0.0) {
        return Err(BlochError::InvalidInput("A_init must be positive".into()));
    }
    PeriodMap::new(&ivp.dp, v, ivp.h, ivp.step_control)?.trajectory(ivp.a_init, ivp.da_init)
}

/// Ψ_h(z) for a single point.
pub fn return_map(dp: &DispersionPoint, v: &PeriodicPotential, h: f64, z: Complex64) -> Result<Complex64> {
    PeriodMap::new(dp, v, h, StepControl::default())?.apply(z)
}

/// Winding number of `map(Z) − Z` around 0 along a closed contour `t ↦ contour(t)`, t ∈ [0, 1).
///
/// The sample count starts at `samples` and doubles until every consecutive
/// phase increment is below π/2 in magnitude.
pub fn winding_along<M, C>(mut map: M, contour: C, scale: f64, samples: usize) -> Result<i32>
where
    M: FnMut(Complex64) -> Result<Complex64>,
    C: Fn(f64) -> Complex64,
{
    let mut displacement = |t: f64| -> Result<Complex64> {
        let z = contour(t);
        let w = map(z)? - z;
        if w.norm() < 1e-12 * scale {
            return Err(BlochError::RootOnCircle { r: scale });
        }
        Ok(w)
    };
    let mut n = samples.max(4);
    let mut values = (0..n)
        .map(|k| displacement(k as f64 / n as f64))
        .collect::<Result<Vec<_>>>()?;
    loop {
        let increments: Vec<f64> = (0..n).map(|k| (values[(k + 1) % n] / values[k]).arg()).collect();
        if increments.iter().all(|d| d.abs() < 0.5 * PI) {
            let total: f64 = increments.iter().sum();
            return Ok((total / (2.0 * PI)).round() as i32);
        }
        if 2 * n > MAX_WINDING_SAMPLES {
            return Err(BlochError::InvalidInput(format!(
                "winding number unresolved with {n} samples"
            )));
        }
        let mut refined = Vec::with_capacity(2 * n);
        for (k, w) in values.iter().enumerate() {
            refined.push(*w);
            refined.push(displacement((2 * k + 1) as f64 / (2 * n) as f64)?);
        }
        values = refined;
        n *= 2;
    }
}

/// Winding number of `map(Z) − Z` along the circle |Z − center| = r.
pub fn winding_on_circle<M>(map: M, center: Complex64, r: f64, samples: usize) -> Result<i32>
where
    M: FnMut(Complex64) -> Result<Complex64>,
{
    winding_along(map, |t| center + Complex64::from_polar(r, 2.0 * PI * t), r, samples)
}

/// Winding number along the boundary of the square of half-side `half` around `center`.
pub fn winding_on_square<M>(map: M, center: Complex64, half: f64, samples: usize) -> Result<i32>
where
    M: FnMut(Complex64) -> Result<Complex64>,
{
    let contour = move |t: f64| {
        let s = 4.0 * t;
        let side = s.floor();
        let u = 2.0 * (s - side) - 1.0;
        let offset = match side as i32 {
            0 => Complex64::new(1.0, u),
            1 => Complex64::new(-u, 1.0),
            2 => Complex64::new(-1.0, -u),
            _ => Complex64::new(u, -1.0),
        };
        center + offset * half
    };
    winding_along(map, contour, half, samples)
}

/// Winding number of Ψ_h − id on |Z| = r.
pub fn winding_number(dp: &DispersionPoint, v: &PeriodicPotential, h: f64, r: f64, samples: usize) -> Result<i32> {
    if !(r > 0.0) || samples < 64 {
        return Err(BlochError::InvalidInput("winding needs r > 0 and at least 64 samples".into()));
    }
    let map = PeriodMap::new(dp, v, h, StepControl::default())?;
    winding_on_circle(|z| map.apply(z), Complex64::new(0.0, 0.0), r, samples)
}

/// One radius tested by the certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub r: f64,
    pub winding: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSolution {
    pub profile: AmplitudeProfile,
    pub z_star: Complex64,
    /// |Ψ_h(Z*) − Z*|.
    pub fixed_point_residual: f64,
    pub certificates: Vec<Certificate>,
    /// Smallest tested radius with winding 1.
    pub certified_radius: f64,
}

/// Certifies and computes the periodic amplitude for one h.
pub fn find_periodic(dp: &DispersionPoint, v: &PeriodicPotential, h: f64, r_max: f64) -> Result<PeriodicSolution> {
    find_periodic_with(dp, v, h, r_max, StepControl::default())
}

pub fn find_periodic_with(
    dp: &DispersionPoint,
    v: &PeriodicPotential,
    h: f64,
    r_max: f64,
    control: StepControl,
) -> Result<PeriodicSolution> {
    let map = PeriodMap::new(dp, v, h, control)?;
    let origin = Complex64::new(0.0, 0.0);
    let r_max = r_max.min(0.9 * map.max_radius());

    let certify = |r: f64| -> Result<Certificate> {
        let winding = match winding_on_circle(|z| map.apply(z), origin, r, 64) {
            Err(BlochError::RootOnCircle { .. }) => {
                let r = r * (1.0 - 1e-3);
                let winding = winding_on_circle(|z| map.apply(z), origin, r, 64).unwrap_or(0);
                return Ok(Certificate { r, winding });
            }
            // Out-of-range or collapsed trajectories: this radius is not certified.
            Err(BlochError::AmplitudeCollapse { .. }) | Err(BlochError::InvalidInput(_)) => 0,
            other => other?,
        };
        Ok(Certificate { r, winding })
    };

    let mut certificates = vec![certify(r_max)?];
    // When the fixed point sits just outside r_max, widen before giving up.
    let mut r = r_max;
    while certificates.last().is_some_and(|c| c.winding != 1) && certificates.len() <= MAX_WIDENINGS {
        r *= 2.0;
        if r > 0.5 * map.max_radius() {
            break;
        }
        certificates.push(certify(r)?);
    }
    if certificates.last().is_some_and(|c| c.winding == 1) {
        loop {
            r *= 0.5;
            if r < MIN_CERTIFICATE_RADIUS {
                break;
            }
            let c = certify(r)?;
            certificates.push(c);
            if c.winding != 1 {
                break;
            }
        }
    }
    let certified_radius = certificates
        .iter()
        .filter(|c| c.winding == 1)
        .map(|c| c.r)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
        .ok_or(BlochError::NoCertificate)?;

    let (z_star, newton_iters) = match newton_fixed_point(&map, origin, control.abs_tol) {
        Ok(found) => found,
        Err(_) => {
            let seed = locate_by_subdivision(&map, certified_radius)?;
            newton_fixed_point(&map, seed, control.abs_tol)?
        }
    };

    let (a0, da0) = map.initial_data(z_star);
    let traj = map.trajectory(a0, da0)?;
    let (a1, da1) = traj.end();
    let periodicity_residual = (a1 - traj.a[0]).abs() + (da1 - traj.da[0]).abs();
    let fixed_point_residual = (map.to_phase_plane(a1, da1) - z_star).norm();

    let profile = AmplitudeProfile {
        h,
        steps: traj.steps,
        a: traj.a,
        da: traj.da,
        periodicity_residual,
        newton_iters,
    };
    let limit = 1e-8 * profile.max_amplitude();
    if periodicity_residual > limit {
        return Err(BlochError::PeriodicityNotMet {
            residual: periodicity_residual,
            limit,
        });
    }
    Ok(PeriodicSolution {
        profile,
        z_star,
        fixed_point_residual,
        certificates,
        certified_radius,
    })
}

/// Newton on G(Z) = Ψ_h(Z) − Z with a forward-difference 2×2 Jacobian.
fn newton_fixed_point(map: &PeriodMap, seed: Complex64, tol: f64) -> Result<(Complex64, usize)> {
    let g = |z: Complex64| -> Result<Complex64> { Ok(map.apply(z)? - z) };
    let mut z = seed;
    let mut gz = g(z)?;
    for iter in 0..50 {
        if gz.norm() <= tol {
            return Ok((z, iter));
        }
        let s = 1e-7 * z.norm().max(1.0);
        let col_re = (g(z + Complex64::new(s, 0.0))? - gz) / s;
        let col_im = (g(z + Complex64::new(0.0, s))? - gz) / s;
        let det = col_re.re * col_im.im - col_im.re * col_re.im;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (-gz.re * col_im.im + gz.im * col_im.re) / det;
        let dy = (-col_re.re * gz.im + col_re.im * gz.re) / det;
        z += Complex64::new(dx, dy);
        gz = g(z)?;
    }
    if gz.norm() <= tol {
        return Ok((z, 50));
    }
    Err(BlochError::NewtonDiverged { residual: gz.norm() })
}

/// Shrinks a square with nonzero winding down to a small seed for Newton.
fn locate_by_subdivision(map: &PeriodMap, r: f64) -> Result<Complex64> {
    let apply = |z: Complex64| map.apply(z);
    let mut center = Complex64::new(0.0, 0.0);
    let mut half = r;
    if winding_on_square(apply, center, half, 64)? == 0 {
        return Err(BlochError::NewtonDiverged { residual: f64::NAN });
    }
    // Children overlap so a root on one child's edge is interior to another.
    for _ in 0..40 {
        let offset = 0.5 * half;
        let child_half = 0.6 * half;
        let quadrants = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        let next = quadrants.iter().find_map(|&(sx, sy)| {
            let c = center + Complex64::new(sx * offset, sy * offset);
            match winding_on_square(apply, c, child_half, 64) {
                Ok(w) if w != 0 => Some(c),
                _ => None,
            }
        });
        match next {
            Some(c) => {
                center = c;
                half = child_half;
            }
            None => break,
        }
    }
    Ok(center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{h_for, invert_dispersion, Kappa};

    fn constant_setup() -> (PeriodicPotential, DispersionPoint) {
        let v = PeriodicPotential::constant(0.3);
        let dp = invert_dispersion(&v, 0.5, Kappa::One).unwrap();
        (v, dp)
    }

    fn cosine_setup() -> (PeriodicPotential, DispersionPoint) {
        let v = PeriodicPotential::cosine(1.0, 1);
        let dp = invert_dispersion(&v, 1.2, Kappa::One).unwrap();
        (v, dp)
    }

    #[test]
    fn steps_are_power_of_two_and_fine_enough() {
        let c = StepControl::default();
        for &h in &[0.3, 0.05, 0.0123] {
            let s = c.steps_for(h).unwrap();
            assert!(s.is_power_of_two());
            assert!(1.0 / s as f64 <= h / 40.0);
        }
        assert!(matches!(c.steps_for(1e-9), Err(BlochError::StepBudgetExceeded { .. })));
    }

    #[test]
    fn constant_equilibrium_is_preserved() {
        let (v, dp) = constant_setup();
        for &h in &[0.2, 0.05] {
            let ivp = AmplitudeIvp {
                h,
                dp: dp.clone(),
                a_init: 1.0,
                da_init: 0.0,
                step_control: StepControl::default(),
            };
            let t = integrate_amplitude(&ivp, &v).unwrap();
            assert!(t.a.iter().all(|a| (a - 1.0).abs() < 1e-10));
            assert!(t.da.iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn first_integral_conserved_for_constant_potential() {
        let (v, dp) = constant_setup();
        let h = 0.05;
        let ivp = AmplitudeIvp {
            h,
            dp: dp.clone(),
            a_init: 1.1,
            da_init: 0.3,
            step_control: StepControl::default(),
        };
        let t = integrate_amplitude(&ivp, &v).unwrap();
        let gap = dp.e0 - 0.3;
        let energy = |a: f64, da: f64| 0.5 * h * h * da * da + 0.5 * gap * a * a + 0.5 * dp.lambda / (a * a);
        let e0 = energy(t.a[0], t.da[0]);
        let drift = t
            .a
            .iter()
            .zip(&t.da)
            .map(|(&a, &d)| (energy(a, d) - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-9, "{drift}");
    }

    #[test]
    fn collapse_is_reported() {
        let (v, dp) = constant_setup();
        let map = PeriodMap::new(&dp, &v, 0.1, StepControl::default()).unwrap();
        let err = map.endpoint(1.0, -100.0).unwrap_err();
        assert!(matches!(err, BlochError::AmplitudeCollapse { x } if x > 0.0 && x < 1.0));
    }

    #[test]
    fn cosine_start_on_limit_drifts_slightly() {
        let (v, dp) = cosine_setup();
        let start = (limit_amplitude(&dp, &v, 0.0), limit_amplitude_derivative(&dp, &v, 0.0));
        let deviation = |h: f64| {
            let map = PeriodMap::new(&dp, &v, h, StepControl::default()).unwrap();
            let (a, da) = map.endpoint(start.0, start.1).unwrap();
            (a - start.0).abs() + h * (da - start.1).abs()
        };
        let coarse = deviation(0.05);
        assert!(coarse > 1e-8 && coarse < 0.1, "{coarse}");
        assert!(deviation(0.0125) < 0.01);
        // A finer step must reproduce the endpoint (integrator convergence).
        let fine_control = StepControl {
            max_step_fraction_of_h: 1.0 / 160.0,
            ..StepControl::default()
        };
        let fine_map = PeriodMap::new(&dp, &v, 0.05, fine_control).unwrap();
        let (af, _) = fine_map.endpoint(start.0, start.1).unwrap();
        let coarse_map = PeriodMap::new(&dp, &v, 0.05, StepControl::default()).unwrap();
        let (ac, _) = coarse_map.endpoint(start.0, start.1).unwrap();
        assert!((af - ac).abs() < 1e-4);
    }

    #[test]
    fn constant_map_fixes_origin() {
        let (v, dp) = constant_setup();
        let z = return_map(&dp, &v, 0.1, Complex64::new(0.0, 0.0)).unwrap();
        assert!(z.norm() < 1e-12);
    }

    #[test]
    fn winding_of_model_maps() {
        let origin = Complex64::new(0.0, 0.0);
        let rot = Complex64::from_polar(1.0, -PI);
        assert_eq!(winding_on_circle(|z| Ok(rot * z), origin, 0.7, 64).unwrap(), 1);
        let shift = Complex64::new(2.5, 0.1);
        assert_eq!(winding_on_circle(|z| Ok(z + shift), origin, 1.0, 64).unwrap(), 0);
        // Z ↦ Z + Z² − Z... displacement Z² winds twice.
        assert_eq!(winding_on_circle(|z| Ok(z + z * z), origin, 0.5, 64).unwrap(), 2);
        assert_eq!(winding_on_square(|z| Ok(rot * z), origin, 0.5, 64).unwrap(), 1);
        assert_eq!(winding_on_square(|z| Ok(rot * z), Complex64::new(2.0, 0.0), 0.5, 64).unwrap(), 0);
        assert!(matches!(
            winding_on_circle(Ok, origin, 1.0, 64),
            Err(BlochError::RootOnCircle { .. })
        ));
    }

    #[test]
    fn winding_refines_fast_phase() {
        // Displacement Z^9 has increments 9·2π/64 > π/2 at 64 samples.
        let origin = Complex64::new(0.0, 0.0);
        assert_eq!(winding_on_circle(|z| Ok(z + z.powi(9)), origin, 1.0, 64).unwrap(), 9);
    }

    #[test]
    fn constant_potential_periodic_solution() {
        let (v, dp) = constant_setup();
        let h = h_for(&dp, PI, 5).unwrap();
        let sol = find_periodic(&dp, &v, h, 0.5).unwrap();
        assert!(sol.z_star.norm() < 1e-10);
        assert!(sol.profile.a.iter().all(|a| (a - 1.0).abs() < 1e-9));
    }

    #[test]
    fn fixed_point_just_outside_r_max_widens() {
        // At n = 10 the fixed point sits near |Z| ≈ 0.51.
        let (v, dp) = cosine_setup();
        let h = h_for(&dp, PI, 10).unwrap();
        let sol = find_periodic(&dp, &v, h, 0.5).unwrap();
        assert_eq!(sol.certificates[0], Certificate { r: 0.5, winding: 0 });
        assert_eq!(sol.certified_radius, 1.0);
        assert!(sol.z_star.norm() > 0.5 && sol.z_star.norm() < 1.0);
    }

    #[test]
    fn cosine_periodic_solution_at_n20() {
        let (v, dp) = cosine_setup();
        let h = h_for(&dp, PI, 20).unwrap();
        let sol = find_periodic(&dp, &v, h, 0.5).unwrap();
        assert_eq!(sol.certificates[0].winding, 1);
        assert!(sol.fixed_point_residual <= 1e-10);
        assert!(sol.profile.periodicity_residual <= 1e-8 * sol.profile.max_amplitude());
        assert!(sol.profile.min_amplitude() > 0.0);
        let dev = sol.profile.deviation_from_limit(&dp, &v);
        assert!(dev < 10.0 * h, "{dev}");
    }

    #[test]
    fn subdivision_locates_shifted_fixed_point() {
        let (v, dp) = cosine_setup();
        let h = h_for(&dp, PI, 20).unwrap();
        let map = PeriodMap::new(&dp, &v, h, StepControl::default()).unwrap();
        let seed = locate_by_subdivision(&map, 0.5).unwrap();
        let (z, _) = newton_fixed_point(&map, seed, 1e-11).unwrap();
        let (z0, _) = newton_fixed_point(&map, Complex64::new(0.0, 0.0), 1e-11).unwrap();
        assert!((z - z0).norm() < 1e-9);
        assert!((seed - z0).norm() < 1e-5);
    }
}
