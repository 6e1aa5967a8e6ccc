//! Browser bindings for the demo page in `www/`.
//!
//! Each export takes plain numbers plus a potential as JSON and returns a JSON
//! string. The `*_json` functions hold the logic and are testable natively.

use std::f64::consts::TAU;

use bloch_core::amplitude::{winding_on_circle, PeriodMap};
use bloch_core::dispersion::{h_for, limit_amplitude, Dispersion, Kappa};
use bloch_core::harness::{solve_at, Tolerances};
use bloch_core::potential::PeriodicPotential;
use num_complex::Complex64;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Points drawn per curve.
const PLOT_POINTS: usize = 512;

fn setup(potential_json: &str, kappa: f64) -> Result<Dispersion, String> {
    let v = PeriodicPotential::from_json(potential_json).map_err(|e| e.to_string())?;
    let kappa = Kappa::from_value(kappa).ok_or_else(|| format!("kappa must be 1 or sqrt(2), got {kappa}"))?;
    Dispersion::new(v, kappa).map_err(|e| e.to_string())
}

/// E₀, λ and Ω̄ at `steps` gauges spanning [p0, p1], plus V on a grid.
pub fn dispersion_curve_json(potential_json: &str, kappa: f64, p0: f64, p1: f64, steps: usize) -> Result<String, String> {
    let disp = setup(potential_json, kappa)?;
    let p_crit = disp.critical_gauge().map_err(|e| e.to_string())?;
    let points = disp.sweep(p0.max(p_crit * (1.0 + 1e-6)), p1, steps).map_err(|e| e.to_string())?;
    let v = disp.potential();
    let xs: Vec<f64> = (0..=PLOT_POINTS).map(|i| i as f64 / PLOT_POINTS as f64).collect();
    Ok(json!({
        "P_crit": p_crit,
        "e_max": disp.actions().profile().e_max,
        "points": points,
        "potential": { "x": xs, "V": xs.iter().map(|&x| v.eval(x, 0)).collect::<Vec<_>>() },
    })
    .to_string())
}

/// |ψ|² of the constructed state next to the normalized limit A₀².
pub fn solve_state_json(potential_json: &str, kappa: f64, p: f64, gamma: f64, n: u32) -> Result<String, String> {
    let disp = setup(potential_json, kappa)?;
    let dp = disp.point(p).map_err(|e| e.to_string())?;
    let v = disp.potential();
    let out = solve_at(v, &dp, gamma, n, &Tolerances::default()).map_err(|e| e.to_string())?;
    let density = out.state.density();
    let stride = (density.len() / PLOT_POINTS).max(1);
    let idx: Vec<usize> = (0..density.len()).step_by(stride).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| out.state.x(i)).collect();
    let limit_raw: Vec<f64> = (0..density.len())
        .map(|i| limit_amplitude(&dp, v, out.state.x(i)).powi(2))
        .collect();
    let mean = limit_raw.iter().sum::<f64>() / limit_raw.len() as f64;
    Ok(json!({
        "x": xs,
        "density": idx.iter().map(|&i| density[i]).collect::<Vec<_>>(),
        "limit": idx.iter().map(|&i| limit_raw[i] / mean).collect::<Vec<_>>(),
        "summary": out.state_summary_json(),
        "z_star": { "re": out.solution.z_star.re, "im": out.solution.z_star.im },
        "certified_radius": out.solution.certified_radius,
    })
    .to_string())
}

/// Image of the circle |Z| = r under Ψ_h − id and its winding number.
pub fn return_map_json(
    potential_json: &str,
    kappa: f64,
    p: f64,
    gamma: f64,
    n: u32,
    r: f64,
    samples: usize,
) -> Result<String, String> {
    let disp = setup(potential_json, kappa)?;
    let dp = disp.point(p).map_err(|e| e.to_string())?;
    let v = disp.potential();
    let h = h_for(&dp, gamma, n).map_err(|e| e.to_string())?;
    let map = PeriodMap::new(&dp, v, h, Tolerances::default().step_control()).map_err(|e| e.to_string())?;
    let samples = samples.clamp(16, 1024);
    let mut circle = Vec::with_capacity(samples);
    let mut image = Vec::with_capacity(samples);
    for k in 0..samples {
        let z = Complex64::from_polar(r, TAU * k as f64 / samples as f64);
        let g = map.apply(z).map_err(|e| e.to_string())? - z;
        circle.push([z.re, z.im]);
        image.push([g.re, g.im]);
    }
    let winding = winding_on_circle(|z| map.apply(z), Complex64::new(0.0, 0.0), r, 64).map_err(|e| e.to_string())?;
    Ok(json!({ "h": h, "r": r, "circle": circle, "displacement": image, "winding": winding }).to_string())
}

#[wasm_bindgen]
pub fn dispersion_curve(potential_json: &str, kappa: f64, p0: f64, p1: f64, steps: usize) -> Result<String, JsValue> {
    dispersion_curve_json(potential_json, kappa, p0, p1, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve_state(potential_json: &str, kappa: f64, p: f64, gamma: f64, n: u32) -> Result<String, JsValue> {
    solve_state_json(potential_json, kappa, p, gamma, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn return_map(
    potential_json: &str,
    kappa: f64,
    p: f64,
    gamma: f64,
    n: u32,
    r: f64,
    samples: usize,
) -> Result<String, JsValue> {
    return_map_json(potential_json, kappa, p, gamma, n, r, samples).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const COS: &str = r#"{"mean": 0, "cos": [1]}"#;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn dispersion_curve_starts_above_critical_gauge() {
        let v = parse(&dispersion_curve_json(COS, 1.0, 0.0, 2.0, 10).unwrap());
        let pc = v["P_crit"].as_f64().unwrap();
        let first = v["points"][0]["P"].as_f64().unwrap();
        assert!(first > pc);
        assert_eq!(v["points"].as_array().unwrap().len(), 10);
        assert_eq!(v["potential"]["V"].as_array().unwrap().len(), PLOT_POINTS + 1);
    }

    #[test]
    fn state_density_tracks_limit() {
        let v = parse(&solve_state_json(COS, 1.0, 1.2, std::f64::consts::PI, 40).unwrap());
        let d = v["density"].as_array().unwrap();
        let l = v["limit"].as_array().unwrap();
        assert_eq!(d.len(), l.len());
        let worst = d
            .iter()
            .zip(l)
            .map(|(a, b)| (a.as_f64().unwrap() - b.as_f64().unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
    }

    #[test]
    fn return_map_winding() {
        let v = parse(&return_map_json(COS, 1.0, 1.2, std::f64::consts::PI, 20, 0.5, 64).unwrap());
        assert_eq!(v["winding"], 1);
        assert_eq!(v["circle"].as_array().unwrap().len(), 64);
    }

    #[test]
    fn bad_inputs_are_messages() {
        assert!(dispersion_curve_json("{", 1.0, 1.0, 2.0, 4).is_err());
        assert!(solve_state_json(COS, 3.0, 1.2, 1.0, 10).is_err());
        assert!(solve_state_json(COS, 1.0, 0.5, 1.0, 10).is_err());
    }
}
