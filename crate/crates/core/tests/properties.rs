use std::f64::consts::PI;

use bloch_core::dispersion::{Dispersion, Kappa};
use bloch_core::potential::PeriodicPotential;
use bloch_core::quadrature::ActionIntegrals;
use proptest::prelude::*;

fn small_potential() -> impl Strategy<Value = PeriodicPotential> {
    (
        -1.0..1.0f64,
        prop::collection::vec(-1.0..1.0f64, 1..4),
        prop::collection::vec(-1.0..1.0f64, 0..4),
    )
        .prop_map(|(m, c, s)| PeriodicPotential::new(m, c, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eval_is_periodic(v in small_potential(), x in -3.0..3.0f64, k in -4i32..4) {
        let shifted = x + k as f64;
        for order in 0..=2 {
            let a = v.eval(x, order);
            let b = v.eval(shifted, order);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn shift_moves_maximizer(s in 0.0..1.0f64) {
        let v = PeriodicPotential::new(0.1, vec![1.0, 0.3], vec![0.2]).unwrap();
        let base = v.analyze(4096).unwrap();
        let moved = v.shifted(s).analyze(4096).unwrap();
        prop_assert!((moved.e_max - base.e_max).abs() < 1e-12);
        let d = bloch_core::potential::circle_distance(moved.x_max, base.x_max + s);
        prop_assert!(d < 1e-9);
    }

    #[test]
    fn quadrature_is_shift_invariant(s in 0.0..1.0f64, e in 1.05..4.0f64) {
        let v = PeriodicPotential::new(0.0, vec![1.0, 0.3], vec![0.2]).unwrap();
        let e = e + v.analyze(4096).unwrap().e_max - 1.0;
        let a = ActionIntegrals::new(v.clone()).unwrap();
        let b = ActionIntegrals::new(v.shifted(s)).unwrap();
        let ia = a.inv_sqrt(e, 1e-12).unwrap().value;
        let ib = b.inv_sqrt(e, 1e-12).unwrap().value;
        prop_assert!((ia - ib).abs() < 1e-9 * ia);
    }

    #[test]
    fn action_derivative_identity(e in 1.01..5.0f64) {
        let a = ActionIntegrals::new(PeriodicPotential::cosine(1.0, 1)).unwrap();
        let d = 1e-4;
        let fd = (a.sqrt(e + d, 1e-12).unwrap().value - a.sqrt(e - d, 1e-12).unwrap().value) / (2.0 * d);
        prop_assert!((fd - 0.5 * a.inv_sqrt(e, 1e-12).unwrap().value).abs() < 1e-6);
    }

    #[test]
    fn dispersion_round_trip(v in small_potential(), excess in 0.01..2.0f64, kappa_one in any::<bool>()) {
        prop_assume!(!v.is_constant());
        let kappa = if kappa_one { Kappa::One } else { Kappa::Sqrt2 };
        let Ok(disp) = Dispersion::new(v, kappa) else { return Ok(()) };
        let pc = disp.critical_gauge().unwrap();
        let p = pc + excess;
        let dp = disp.point(p).unwrap();
        prop_assert!(dp.e0 > dp.e_max);
        let j = disp.actions().sqrt(dp.e0, 1e-12).unwrap().value;
        prop_assert!((j - kappa.value() * p).abs() < 1e-9 * (1.0 + j));
        prop_assert!((dp.omega_bar - 2.0 * kappa.value() * p).abs() < 1e-12 * (1.0 + dp.omega_bar));
    }
}

#[test]
fn dispersion_is_increasing() {
    let disp = Dispersion::new(PeriodicPotential::cosine(1.0, 1), Kappa::One).unwrap();
    let pts = disp.sweep(0.95, 3.0, 24).unwrap();
    assert!(pts.windows(2).all(|w| w[1].e0 > w[0].e0 && w[1].lambda > w[0].lambda));
}

#[test]
fn gauge_recovery_and_density_converge() {
    use bloch_core::harness::{solve_at, Tolerances};
    let v = PeriodicPotential::new(0.0, vec![0.7, 0.2], vec![0.3]).unwrap();
    let disp = Dispersion::new(v.clone(), Kappa::One).unwrap();
    let p = disp.critical_gauge().unwrap() * 1.4;
    let dp = disp.point(p).unwrap();
    let tol = Tolerances::default();
    let rows: Vec<(f64, f64)> = [16u32, 32, 64]
        .iter()
        .map(|&n| {
            let out = solve_at(&v, &dp, PI / 2.0, n, &tol).unwrap();
            ((out.state.p_recovered - p).abs(), out.state.density_error_sup)
        })
        .collect();
    assert!(rows.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1), "{rows:?}");
    assert!(rows[2].0 < 1e-3);
}
