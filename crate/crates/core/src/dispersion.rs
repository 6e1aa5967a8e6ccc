//! The super-critical Bloch branch: E₀(P) from `J(E₀) = κP`, the amplitude
//! constant λ = I(E₀)^{-2}, the mean frequency Ω̄ = 2J(E₀), the WKB amplitude
//! A₀ and the quantized grid h_n = Ω̄/(2πn + γ).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{BlochError, Result};
use crate::potential::PeriodicPotential;
use crate::quadrature::ActionIntegrals;
use crate::DEFAULT_REL_TOL;

/// Prefactor in the dispersion relation `∫₀¹√(E₀ − V) = κP`.
///
/// `One` is what the θ-elimination of the energy functional produces and what
/// the plane-wave spectrum of a constant potential confirms; `Sqrt2` keeps the
/// √2 normalization as an alternative mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Kappa {
    #[default]
    One,
    Sqrt2,
}

impl Kappa {
    pub fn value(self) -> f64 {
        match self {
            Kappa::One => 1.0,
            Kappa::Sqrt2 => std::f64::consts::SQRT_2,
        }
    }

    pub fn from_value(v: f64) -> Option<Kappa> {
        if (v - 1.0).abs() < 1e-9 {
            Some(Kappa::One)
        } else if (v - std::f64::consts::SQRT_2).abs() < 1e-9 {
            Some(Kappa::Sqrt2)
        } else {
            None
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Kappa::One => "1",
            Kappa::Sqrt2 => "sqrt2",
        }
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Kappa {
    type Err = BlochError;

    fn from_str(s: &str) -> Result<Kappa> {
        match s.trim() {
            "1" | "one" => Ok(Kappa::One),
            "sqrt2" | "√2" => Ok(Kappa::Sqrt2),
            other => other
                .parse::<f64>()
                .ok()
                .and_then(Kappa::from_value)
                .ok_or_else(|| BlochError::Config(format!("kappa must be 1 or sqrt2, got {other:?}"))),
        }
    }
}

impl Serialize for Kappa {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Kappa {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Kappa, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(v) => Kappa::from_value(v).ok_or_else(|| format!("kappa must be 1 or sqrt2, got {v}")),
            Raw::Text(t) => t.parse().map_err(|e: BlochError| e.to_string()),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// One point (P, E₀(P)) of the branch with the derived constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    #[serde(rename = "P")]
    pub p: f64,
    pub kappa: Kappa,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub lambda: f64,
    pub omega_bar: f64,
    #[serde(rename = "P_crit")]
    pub p_crit: f64,
    #[serde(rename = "I_at_E0")]
    pub i_at_e0: f64,
    /// Ē = max V.
    pub e_max: f64,
    /// Location x₀ of max V.
    pub x_max: f64,
}

impl DispersionPoint {
    /// E₀ − Ē.
    pub fn energy_gap(&self) -> f64 {
        self.e0 - self.e_max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalGrid {
    pub gamma: f64,
    pub n_values: Vec<u32>,
    pub h_values: Vec<f64>,
}

/// Dispersion solver for one potential and convention.
#[derive(Clone, Debug)]
pub struct Dispersion {
    actions: ActionIntegrals,
    kappa: Kappa,
    rel_tol: f64,
}

impl Dispersion {
    pub fn new(potential: PeriodicPotential, kappa: Kappa) -> Result<Self> {
        Ok(Dispersion {
            actions: ActionIntegrals::new(potential)?,
            kappa,
            rel_tol: DEFAULT_REL_TOL,
        })
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn actions(&self) -> &ActionIntegrals {
        &self.actions
    }

    pub fn potential(&self) -> &PeriodicPotential {
        self.actions.potential()
    }

    pub fn kappa(&self) -> Kappa {
        self.kappa
    }

    /// P̲ = J(Ē)/κ.
    pub fn critical_gauge(&self) -> Result<f64> {
        let e_max = self.actions.profile().e_max;
        Ok(self.actions.sqrt(e_max, self.rel_tol)?.value / self.kappa.value())
    }

    fn j(&self, e: f64) -> Result<f64> {
        Ok(self.actions.sqrt(e, self.rel_tol)?.value)
    }

    /// The unique E₀ > Ē with J(E₀) = κP, plus λ, Ω̄ and I(E₀).
    pub fn point(&self, p: f64) -> Result<DispersionPoint> {
        let profile = self.actions.profile();
        let e_max = profile.e_max;
        let range = profile.range();
        let p_crit = self.critical_gauge()?;
        if !(p > p_crit + 1e-12) {
            return Err(BlochError::GaugeNotSupercritical { p, p_crit });
        }
        let target = self.kappa.value() * p;

        // E − V ≥ (κP)² everywhere at the upper edge, so J ≥ κP there.
        let mut hi = e_max + target * target + range;
        if self.j(hi)? < target {
            return Err(BlochError::BracketFailure { lo: e_max, hi });
        }
        let mut lo = if range == 0.0 {
            e_max
        } else {
            let mut delta = 1e-6 * range;
            let mut halvings = 0;
            while self.j(e_max + delta)? >= target {
                delta *= 0.5;
                halvings += 1;
                if halvings > 200 {
                    return Err(BlochError::BracketFailure { lo: e_max + delta, hi });
                }
            }
            e_max + delta
        };

        let width_goal = 1e-13 * e_max.abs().max(1.0);
        while hi - lo > width_goal {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.j(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }

        // Newton polish with dJ/dE = I/2, kept inside the bracket.
        let mut e0 = 0.5 * (lo + hi);
        for _ in 0..3 {
            let i = self.actions.inv_sqrt(e0, self.rel_tol)?.value;
            let step = (self.j(e0)? - target) / (0.5 * i);
            let next = e0 - step;
            if next > e_max && next.is_finite() && (next - e0).abs() <= 10.0 * width_goal {
                e0 = next;
            }
        }

        let i_at_e0 = self.actions.inv_sqrt(e0, self.rel_tol)?.value;
        let omega_bar = 2.0 * self.j(e0)?;
        Ok(DispersionPoint {
            p,
            kappa: self.kappa,
            e0,
            lambda: i_at_e0.powi(-2),
            omega_bar,
            p_crit,
            i_at_e0,
            e_max,
            x_max: profile.x_max,
        })
    }

    /// Evenly spaced points `p0..=p1`.
    pub fn sweep(&self, p0: f64, p1: f64, steps: usize) -> Result<Vec<DispersionPoint>> {
        if steps == 0 {
            return Ok(Vec::new());
        }
        if steps == 1 {
            return Ok(vec![self.point(p0)?]);
        }
        (0..steps)
            .map(|i| self.point(p0 + (p1 - p0) * i as f64 / (steps - 1) as f64))
            .collect()
    }
}

pub fn critical_gauge(v: &PeriodicPotential, kappa: Kappa) -> Result<f64> {
    Dispersion::new(v.clone(), kappa)?.critical_gauge()
}

pub fn invert_dispersion(v: &PeriodicPotential, p: f64, kappa: Kappa) -> Result<DispersionPoint> {
    Dispersion::new(v.clone(), kappa)?.point(p)
}

/// A₀(x) = λ^{1/4}(E₀ − V(x))^{-1/4}.
pub fn limit_amplitude(dp: &DispersionPoint, v: &PeriodicPotential, x: f64) -> f64 {
    dp.lambda.powf(0.25) * (dp.e0 - v.eval(x, 0)).powf(-0.25)
}

/// A₀′(x) = λ^{1/4} V′(x) (E₀ − V(x))^{-5/4} / 4.
pub fn limit_amplitude_derivative(dp: &DispersionPoint, v: &PeriodicPotential, x: f64) -> f64 {
    let [val, d1, _] = v.eval_all(x);
    0.25 * dp.lambda.powf(0.25) * d1 * (dp.e0 - val).powf(-1.25)
}

/// Ω_λ(x) = 2√(E₀ − V(x)).
pub fn omega(dp: &DispersionPoint, v: &PeriodicPotential, x: f64) -> f64 {
    2.0 * (dp.e0 - v.eval(x, 0)).sqrt()
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 2.0 * PI {
        Ok(())
    } else {
        Err(BlochError::GammaOutOfRange(gamma))
    }
}

/// h_n = Ω̄/(2πn + γ) for a single n.
pub fn h_for(dp: &DispersionPoint, gamma: f64, n: u32) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(dp.omega_bar / (2.0 * PI * n as f64 + gamma))
}

/// h_n = Ω̄/(2πn + γ) for n in `n_min..=n_max`.
pub fn h_grid(dp: &DispersionPoint, gamma: f64, n_min: u32, n_max: u32) -> Result<SemiclassicalGrid> {
    check_gamma(gamma)?;
    if n_min < 1 {
        return Err(BlochError::InvalidInput("n_min must be at least 1".into()));
    }
    let n_values: Vec<u32> = (n_min..=n_max).collect();
    let h_values = n_values
        .iter()
        .map(|&n| dp.omega_bar / (2.0 * PI * n as f64 + gamma))
        .collect();
    Ok(SemiclassicalGrid {
        gamma,
        n_values,
        h_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn cosine() -> PeriodicPotential {
        PeriodicPotential::cosine(1.0, 1)
    }

    #[test]
    fn critical_gauge_closed_forms() {
        let v = cosine();
        assert!((critical_gauge(&v, Kappa::Sqrt2).unwrap() - 2.0 / PI).abs() < 1e-10);
        assert!((critical_gauge(&v, Kappa::One).unwrap() - 2.0 * SQRT_2 / PI).abs() < 1e-10);
        let c = PeriodicPotential::constant(0.3);
        assert_eq!(critical_gauge(&c, Kappa::One).unwrap(), 0.0);
        assert_eq!(critical_gauge(&c, Kappa::Sqrt2).unwrap(), 0.0);
    }

    #[test]
    fn constant_potential_closed_forms() {
        let c = PeriodicPotential::constant(0.3);
        let dp = invert_dispersion(&c, 0.5, Kappa::One).unwrap();
        assert!((dp.e0 - 0.55).abs() < 1e-12);
        assert!((dp.lambda - 0.25).abs() < 1e-12);
        assert!((dp.omega_bar - 1.0).abs() < 1e-12);
        assert!((limit_amplitude(&dp, &c, 0.123) - 1.0).abs() < 1e-12);
        assert!((omega(&dp, &c, 0.7) - 1.0).abs() < 1e-12);

        let dp2 = invert_dispersion(&c, 0.5, Kappa::Sqrt2).unwrap();
        assert!((dp2.e0 - 0.8).abs() < 1e-12);
        assert!((dp2.lambda - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_golden_point() {
        // 30-digit reference: E0 = 1.5304981117921859370, λ = 1.2490039980134140445.
        let dp = invert_dispersion(&cosine(), 1.2, Kappa::One).unwrap();
        assert!((dp.e0 - 1.530_498_111_792_185_9).abs() < 1e-10, "{}", dp.e0);
        assert!((dp.lambda - 1.249_003_998_013_414).abs() < 1e-9);
        assert!((dp.lambda * dp.i_at_e0.powi(2) - 1.0).abs() < 1e-10);
        assert!((dp.omega_bar - 2.4).abs() < 1e-9);
    }

    #[test]
    fn subcritical_gauge_rejected() {
        let err = invert_dispersion(&cosine(), 0.8, Kappa::One).unwrap_err();
        assert!(matches!(err, BlochError::GaugeNotSupercritical { .. }));
    }

    #[test]
    fn normalization_of_limit_amplitude() {
        let v = cosine();
        let dp = invert_dispersion(&v, 1.2, Kappa::One).unwrap();
        let n = 4096;
        let mass: f64 = (0..n)
            .map(|i| limit_amplitude(&dp, &v, i as f64 / n as f64).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((mass - 1.0).abs() < 1e-8);
        let mean_omega: f64 = (0..n).map(|i| omega(&dp, &v, i as f64 / n as f64)).sum::<f64>() / n as f64;
        assert!((mean_omega - dp.omega_bar).abs() < 1e-10);
    }

    #[test]
    fn omega_is_smallest_at_max() {
        let v = cosine();
        let dp = invert_dispersion(&v, 1.2, Kappa::One).unwrap();
        let at_max = omega(&dp, &v, 0.0);
        assert!((at_max - 2.0 * (dp.e0 - 1.0).sqrt()).abs() < 1e-14);
        assert!((1..200).all(|i| omega(&dp, &v, i as f64 / 200.0) > at_max));
        let a0_peak = limit_amplitude(&dp, &v, 0.0);
        assert!((a0_peak - dp.lambda.powf(0.25) * (dp.e0 - 1.0).powf(-0.25)).abs() < 1e-14);
    }

    #[test]
    fn amplitude_derivative_matches_finite_difference() {
        let v = PeriodicPotential::new(0.0, vec![1.0, 0.2], vec![0.3]).unwrap();
        let dp = invert_dispersion(&v, 2.0, Kappa::One).unwrap();
        let d = 1e-6;
        for &x in &[0.1, 0.4, 0.9] {
            let fd = (limit_amplitude(&dp, &v, x + d) - limit_amplitude(&dp, &v, x - d)) / (2.0 * d);
            assert!((fd - limit_amplitude_derivative(&dp, &v, x)).abs() < 1e-7);
        }
    }

    #[test]
    fn h_grid_examples() {
        let c = PeriodicPotential::constant(0.3);
        let dp = invert_dispersion(&c, 0.5, Kappa::One).unwrap();
        let grid = h_grid(&dp, PI / 2.0, 1, 5).unwrap();
        assert!((grid.h_values[0] - 0.127_323_954_473_516_27).abs() < 1e-12);
        assert!(grid.h_values.windows(2).all(|w| w[1] < w[0]));
        for (&n, &h) in grid.n_values.iter().zip(&grid.h_values) {
            assert!((h * (2.0 * PI * n as f64 + PI / 2.0) - 2.0 * 0.5).abs() < 1e-12);
        }
        assert!(matches!(h_grid(&dp, 0.0, 1, 3), Err(BlochError::GammaOutOfRange(_))));
        assert!(h_grid(&dp, 2.0 * PI, 1, 3).is_err());
        assert!(h_grid(&dp, 1.0, 4, 3).unwrap().h_values.is_empty());
    }

    #[test]
    fn kappa_parsing() {
        assert_eq!("sqrt2".parse::<Kappa>().unwrap(), Kappa::Sqrt2);
        assert_eq!("1".parse::<Kappa>().unwrap(), Kappa::One);
        assert_eq!("1.4142135623730951".parse::<Kappa>().unwrap(), Kappa::Sqrt2);
        assert!("2".parse::<Kappa>().is_err());
        let k: Kappa = serde_json::from_str("1.4142135623730951").unwrap();
        assert_eq!(k, Kappa::Sqrt2);
        let k: Kappa = serde_json::from_str("\"1\"").unwrap();
        assert_eq!(k, Kappa::One);
    }
}
