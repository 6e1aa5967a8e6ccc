//! Smooth 1-periodic potentials given as finite trigonometric series.
//!
//! `V(x) = mean + Σ_k (a_k cos 2πkx + b_k sin 2πkx)`, k = 1..K. Periodicity and
//! derivatives are exact by construction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{BlochError, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Wire form of a potential: `{"mean": r, "cos": [..], "sin": [..]}`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct PotentialSpec {
    #[serde(default)]
    mean: f64,
    #[serde(default)]
    cos: Vec<f64>,
    #[serde(default)]
    sin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct PeriodicPotential {
    mean: f64,
    /// `cos_coeffs[k - 1]` multiplies `cos 2πkx`.
    cos_coeffs: Vec<f64>,
    sin_coeffs: Vec<f64>,
}

impl TryFrom<PotentialSpec> for PeriodicPotential {
    type Error = BlochError;

    fn try_from(spec: PotentialSpec) -> Result<Self> {
        PeriodicPotential::new(spec.mean, spec.cos, spec.sin)
    }
}

impl From<PeriodicPotential> for PotentialSpec {
    fn from(v: PeriodicPotential) -> Self {
        PotentialSpec {
            mean: v.mean,
            cos: v.cos_coeffs,
            sin: v.sin_coeffs,
        }
    }
}

impl PeriodicPotential {
    /// Builds a series; the shorter coefficient list is zero-padded.
    pub fn new(mean: f64, mut cos_coeffs: Vec<f64>, mut sin_coeffs: Vec<f64>) -> Result<Self> {
        let all_finite = mean.is_finite()
            && cos_coeffs.iter().all(|c| c.is_finite())
            && sin_coeffs.iter().all(|c| c.is_finite());
        if !all_finite {
            return Err(BlochError::InvalidInput(
                "potential coefficients must be finite".into(),
            ));
        }
        let k = cos_coeffs.len().max(sin_coeffs.len());
        cos_coeffs.resize(k, 0.0);
        sin_coeffs.resize(k, 0.0);
        Ok(PeriodicPotential {
            mean,
            cos_coeffs,
            sin_coeffs,
        })
    }

    pub fn constant(value: f64) -> Self {
        PeriodicPotential {
            mean: value,
            cos_coeffs: Vec::new(),
            sin_coeffs: Vec::new(),
        }
    }

    /// `amplitude · cos 2πkx`.
    pub fn cosine(amplitude: f64, k: usize) -> Self {
        let mut cos_coeffs = vec![0.0; k];
        if k > 0 {
            cos_coeffs[k - 1] = amplitude;
        }
        PeriodicPotential {
            mean: 0.0,
            sin_coeffs: vec![0.0; k],
            cos_coeffs,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BlochError::Config(format!("potential: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("potential serializes")
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos_coeffs
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin_coeffs
    }

    /// Number of harmonics K.
    pub fn degree(&self) -> usize {
        self.cos_coeffs.len()
    }

    pub fn is_constant(&self) -> bool {
        self.cos_coeffs
            .iter()
            .chain(&self.sin_coeffs)
            .all(|&c| c == 0.0)
    }

    /// V(x − s).
    pub fn shifted(&self, s: f64) -> Self {
        let mut cos_coeffs = Vec::with_capacity(self.degree());
        let mut sin_coeffs = Vec::with_capacity(self.degree());
        for (k, (&a, &b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let phase = TWO_PI * (k + 1) as f64 * s;
            let (sn, cs) = phase.sin_cos();
            cos_coeffs.push(a * cs - b * sn);
            sin_coeffs.push(a * sn + b * cs);
        }
        PeriodicPotential {
            mean: self.mean,
            cos_coeffs,
            sin_coeffs,
        }
    }

    /// Coefficient of `e^{2πimx}` in the exponential form of the series.
    pub fn exp_coeff(&self, m: i64) -> num_complex::Complex64 {
        use num_complex::Complex64;
        if m == 0 {
            return Complex64::new(self.mean, 0.0);
        }
        let k = m.unsigned_abs() as usize;
        if k > self.degree() {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = (self.cos_coeffs[k - 1], self.sin_coeffs[k - 1]);
        if m > 0 {
            Complex64::new(0.5 * a, -0.5 * b)
        } else {
            Complex64::new(0.5 * a, 0.5 * b)
        }
    }

    /// V, V′ or V″ at `x` (taken mod 1).
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        assert!(order <= 2, "derivative order must be 0, 1 or 2");
        let [v, dv, d2v] = self.eval_all(x);
        match order {
            0 => v,
            1 => dv,
            _ => d2v,
        }
    }

    /// `[V, V′, V″]` at `x`, sharing one harmonic recurrence.
    pub fn eval_all(&self, x: f64) -> [f64; 3] {
        let x = x.rem_euclid(1.0);
        let (s1, c1) = (TWO_PI * x).sin_cos();
        let (mut sk, mut ck) = (0.0, 1.0);
        let mut out = [self.mean, 0.0, 0.0];
        for (k, (&a, &b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            // (c_k, s_k) ← rotate by 2πx
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
            let w = TWO_PI * (k + 1) as f64;
            let term = a * ck + b * sk;
            out[0] += term;
            out[1] += w * (b * ck - a * sk);
            out[2] -= w * w * term;
        }
        out
    }

    /// V(x₀) − V(x₀ + t) without the cancellation of subtracting two evaluations.
    pub fn drop_from(&self, x0: f64, t: f64) -> f64 {
        let mut out = 0.0;
        for (k, (&a, &b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let w = TWO_PI * (k + 1) as f64;
            let half = 0.5 * w * t.rem_euclid(1.0);
            let mid = (w * x0).rem_euclid(TWO_PI) + half;
            let (s_mid, c_mid) = mid.sin_cos();
            out += 2.0 * half.sin() * (a * s_mid - b * c_mid);
        }
        out
    }

    /// Global max/min with Newton polish, uniqueness and nondegeneracy checks.
    pub fn analyze(&self, grid_size: usize) -> Result<PotentialProfile> {
        if grid_size < 64 {
            return Err(BlochError::InvalidInput(format!(
                "analysis grid must have at least 64 points, got {grid_size}"
            )));
        }
        let samples: Vec<f64> = (0..grid_size)
            .map(|i| self.eval(i as f64 / grid_size as f64, 0))
            .collect();
        let (i_max, _) = argmax(&samples, |v| v);
        let (i_min, _) = argmax(&samples, |v| -v);
        let dx = 1.0 / grid_size as f64;

        let x_max = self.polish_critical_point(i_max as f64 * dx, dx);
        let x_min = self.polish_critical_point(i_min as f64 * dx, dx);
        let e_max = self.eval(x_max, 0).max(samples[i_max]);
        let e_min = self.eval(x_min, 0).min(samples[i_min]);
        let range = e_max - e_min;

        if range < 1e-14 {
            return Ok(PotentialProfile {
                x_max: 0.0,
                e_max,
                x_min: 0.0,
                e_min,
                second_deriv_at_max: 0.0,
                unique_max: false,
                constant: true,
            });
        }

        let second_deriv_at_max = self.eval(x_max, 2);
        if second_deriv_at_max.abs() < 1e-8 * range {
            return Err(BlochError::DegenerateExtremum {
                x: x_max,
                curvature: second_deriv_at_max,
            });
        }

        // A competing local maximum that ties the global one breaks uniqueness.
        let tie_tol = 1e-9 * range;
        let unique_max = (0..grid_size)
            .filter(|&i| {
                let prev = samples[(i + grid_size - 1) % grid_size];
                let next = samples[(i + 1) % grid_size];
                samples[i] >= prev && samples[i] >= next
            })
            .map(|i| self.polish_critical_point(i as f64 * dx, dx))
            .filter(|&x| circle_distance(x, x_max) > 2.0 * dx)
            .all(|x| self.eval(x, 0) < e_max - tie_tol);

        Ok(PotentialProfile {
            x_max,
            e_max,
            x_min,
            e_min,
            second_deriv_at_max,
            unique_max,
            constant: false,
        })
    }

    /// Newton on V′ from a grid seed; falls back to the seed if it wanders off.
    fn polish_critical_point(&self, seed: f64, dx: f64) -> f64 {
        let mut x = seed;
        for _ in 0..50 {
            let [_, d1, d2] = self.eval_all(x);
            if d2 == 0.0 {
                break;
            }
            let step = d1 / d2;
            x -= step;
            if step.abs() < 1e-13 {
                break;
            }
        }
        if circle_distance(x, seed) > 2.0 * dx || !x.is_finite() {
            return seed;
        }
        x.rem_euclid(1.0)
    }
}

fn argmax(values: &[f64], key: impl Fn(f64) -> f64) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if key(v) > best.1 {
                (i, key(v))
            } else {
                best
            }
        })
}

/// Distance on the unit circle ℝ/ℤ.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile {
    /// Location x₀ of the global maximum.
    pub x_max: f64,
    /// Ē = max V.
    pub e_max: f64,
    pub x_min: f64,
    pub e_min: f64,
    pub second_deriv_at_max: f64,
    pub unique_max: bool,
    /// Set when max V − min V < 1e-14; not an error.
    pub constant: bool,
}

impl PotentialProfile {
    pub fn range(&self) -> f64 {
        self.e_max - self.e_min
    }
}

/// I(Ē + ε) = ∫₀¹(Ē + ε − V)^{-1/2} for each ε.
///
/// For a nondegenerate maximum the values grow like `c·ln(1/ε)` with
/// `c = √(2/|V″(x₀)|)`, see [`predicted_log_slope`].
pub fn criticality_diagnostic(v: &PeriodicPotential, epsilons: &[f64]) -> Result<Vec<(f64, f64)>> {
    let actions = crate::quadrature::ActionIntegrals::new(v.clone())?;
    let profile = actions.profile();
    epsilons
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(BlochError::InvalidInput(format!("epsilon must be > 0, got {eps}")));
            }
            let i = actions.inv_sqrt(profile.e_max + eps, crate::DEFAULT_REL_TOL)?;
            Ok((eps, i.value))
        })
        .collect()
}

/// Least-squares slope of I against ln(1/ε).
pub fn log_growth_slope(samples: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(e, i)| ((1.0 / e).ln(), i)).collect();
    crate::stats::least_squares_slope(&pts)
}

/// Asymptotic growth rate of I(Ē + ε) per unit of ln(1/ε) at a quadratic maximum.
pub fn predicted_log_slope(profile: &PotentialProfile) -> f64 {
    (2.0 / profile.second_deriv_at_max.abs()).sqrt()
}
