//! Action integrals I(E) = ∫₀¹(E − V)^{-1/2} and J(E) = ∫₀¹√(E − V).
//!
//! Both integrands develop a sharp feature at the maximizer x₀ as E ↓ Ē: a
//! peak of width ~√(E − Ē) for I, a square-root kink for J at E = Ē. The
//! integration domain is taken as [x₀, x₀ + 1] so the feature always sits on
//! a panel boundary, and a global adaptive Gauss–Kronrod (7/15) scheme bisects
//! the worst panel until the summed error estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{BlochError, Result};
use crate::potential::{PeriodicPotential, PotentialProfile};

/// Evaluation budget per integral.
pub const MAX_EVALUATIONS: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub est_error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    // Largest error first; ties broken by position so the order is total.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Global adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Succeeds once the summed error estimate is at most `rel_tol·|value| + abs_tol`.
/// Panels are summed in order of their left endpoint so the result is
/// independent of refinement history.
pub fn adaptive_gk15<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_evaluations: usize,
) -> Result<QuadratureResult> {
    let mut heap = BinaryHeap::new();
    let mut frozen = Vec::new();
    let first = gk15(&f, a, b);
    let mut evaluations = 15;
    let mut total_value = first.value;
    let mut total_error = first.error;
    heap.push(first);

    loop {
        if total_error <= rel_tol * total_value.abs() + abs_tol {
            break;
        }
        if evaluations + 30 > max_evaluations {
            return Err(BlochError::ToleranceNotMet {
                evaluations,
                est_error: total_error,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Cannot bisect further in f64; the remaining error is roundoff.
            total_error -= worst.error;
            frozen.push(worst);
            continue;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        evaluations += 30;
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(frozen);
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let est_error = panels.iter().map(|p| p.error).sum();
    Ok(QuadratureResult {
        value,
        est_error,
        evaluations,
    })
}

fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if !(1e-14..=1e-3).contains(&rel_tol) {
        return Err(BlochError::InvalidInput(format!(
            "rel_tol must lie in [1e-14, 1e-3], got {rel_tol}"
        )));
    }
    Ok(())
}

/// A potential together with its extremum analysis, ready for action integrals.
#[derive(Clone, Debug)]
pub struct ActionIntegrals {
    potential: PeriodicPotential,
    profile: PotentialProfile,
}

impl ActionIntegrals {
    pub fn new(potential: PeriodicPotential) -> Result<Self> {
        let profile = potential.analyze(crate::ANALYSIS_GRID)?;
        Ok(ActionIntegrals { potential, profile })
    }

    pub fn potential(&self) -> &PeriodicPotential {
        &self.potential
    }

    pub fn profile(&self) -> &PotentialProfile {
        &self.profile
    }

    /// E − V(x₀ + t), written as (E − Ē) + (Ē − V) and clipped at zero.
    fn gap_fn(&self, energy: f64) -> impl Fn(f64) -> f64 + '_ {
        let x0 = self.profile.x_max;
        let excess = energy - self.profile.e_max;
        move |t| excess + self.potential.drop_from(x0, t).max(0.0)
    }

    /// I(E) = ∫₀¹(E − V)^{-1/2}; requires E > Ē.
    pub fn inv_sqrt(&self, energy: f64, rel_tol: f64) -> Result<QuadratureResult> {
        check_rel_tol(rel_tol)?;
        let e_max = self.profile.e_max;
        if !(energy > e_max + 1e-15 * e_max.abs().max(1.0)) {
            return Err(BlochError::EnergyNotAboveMax { energy, e_max });
        }
        let gap = self.gap_fn(energy);
        adaptive_gk15(|t| gap(t).sqrt().recip(), 0.0, 1.0, rel_tol, 1e-300, MAX_EVALUATIONS)
    }

    /// J(E) = ∫₀¹√(E − V); requires E ≥ Ē.
    pub fn sqrt(&self, energy: f64, rel_tol: f64) -> Result<QuadratureResult> {
        check_rel_tol(rel_tol)?;
        let e_max = self.profile.e_max;
        if energy < e_max {
            return Err(BlochError::EnergyNotAboveMax { energy, e_max });
        }
        let gap = self.gap_fn(energy);
        adaptive_gk15(|t| gap(t).sqrt(), 0.0, 1.0, rel_tol, 1e-300, MAX_EVALUATIONS)
    }
}

pub fn integral_inv_sqrt(v: &PeriodicPotential, energy: f64, rel_tol: f64) -> Result<QuadratureResult> {
    ActionIntegrals::new(v.clone())?.inv_sqrt(energy, rel_tol)
}

pub fn integral_sqrt(v: &PeriodicPotential, energy: f64, rel_tol: f64) -> Result<QuadratureResult> {
    ActionIntegrals::new(v.clone())?.sqrt(energy, rel_tol)
}
