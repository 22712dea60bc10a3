//! Browser bindings. Each export takes plain numbers and returns a JSON
//! string; the page parses it and draws on a canvas.
//!
//! The `*_json` functions hold the logic so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use phasewave::reduction::{reconstruct_profile, DEFAULT_EPS_DIV};
use phasewave::solver::{amplitude_sweep, solve_wave};
use phasewave::spectral::{check_assumptions, dist_to_2pi_lattice, omega_matrix};
use phasewave::{DispersionData, ForceLaw, LawKind, ModeIndex, SolverConfig, TruncationSpec};

// keeps a click from freezing the tab
const MAX_N: usize = 12;
const MAX_GRID: usize = 128;
const MAX_RADIUS: i32 = 60;

fn law(name: &str) -> Result<ForceLaw, String> {
    let kind: LawKind = name.parse().map_err(|e: phasewave::Error| e.to_string())?;
    if kind == LawKind::Custom {
        return Err("the demo supports toda, quadratic and cubic".into());
    }
    ForceLaw::builtin(kind, 0.0, 8).map_err(|e| e.to_string())
}

fn setup(name: &str, gamma: f64, n: usize) -> Result<(ForceLaw, DispersionData, TruncationSpec), String> {
    let law = law(name)?;
    let d = DispersionData::from_law(&law, gamma).map_err(|e| e.to_string())?;
    let trunc = TruncationSpec::new(d.nu, n.clamp(1, MAX_N)).map_err(|e| e.to_string())?;
    Ok((law, d, trunc))
}

/// Amplitudes padded or cut to `nu` entries.
fn fit(a: &[f64], nu: usize) -> Vec<f64> {
    (0..nu).map(|j| a.get(j).copied().unwrap_or(0.0)).collect()
}

pub fn solve_json(law_name: &str, gamma: f64, a: &[f64], n: usize, grid: usize) -> Result<Value, String> {
    let (law, d, trunc) = setup(law_name, gamma, n)?;
    let a = fit(a, d.nu);
    let s = solve_wave(&law, gamma, &a, &trunc, &SolverConfig::new(d.nu)).map_err(|e| e.to_string())?;
    let grid = grid.clamp(8, MAX_GRID);
    let h = std::f64::consts::TAU / grid as f64;
    // profile on the (ξ_1, ξ_2) torus, remaining phases at 0
    let points: Vec<Vec<f64>> = (0..grid * grid)
        .map(|i| {
            let mut xi = vec![0.0; d.nu];
            xi[0] = h * (i % grid) as f64;
            if d.nu > 1 {
                xi[1] = h * (i / grid) as f64;
            }
            xi
        })
        .collect();
    let chi = reconstruct_profile(&s.u(), &s.omega, &points, DEFAULT_EPS_DIV).map_err(|e| e.to_string())?;
    Ok(json!({
        "nu": d.nu,
        "a": a,
        "omega": s.omega,
        "omega0": s.omega0,
        "p_residual": s.report.p_residual_norm,
        "min_divisor": s.report.min_divisor,
        "newton_trace": s.newton_trace,
        "modes": s.u().len(),
        "grid": grid,
        "profile": chi,
    }))
}

pub fn sweep_json(law_name: &str, gamma: f64, dir: &[f64], amin: f64, amax: f64, count: usize, n: usize) -> Result<Value, String> {
    let (law, d, trunc) = setup(law_name, gamma, n)?;
    if !(amin > 0.0 && amax > amin) {
        return Err(format!("need 0 < amin < amax, got {amin}, {amax}"));
    }
    let count = count.clamp(2, 24);
    let mut dir = fit(dir, d.nu);
    if dir.iter().all(|&x| x == 0.0) {
        dir = vec![1.0; d.nu];
    }
    let mags: Vec<f64> = (0..count)
        .map(|i| amin * (amax / amin).powf(i as f64 / (count - 1) as f64))
        .collect();
    let rows = amplitude_sweep(&law, gamma, &[dir], &mags, &trunc, &SolverConfig::new(d.nu)).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "magnitude": r.magnitude,
                "shift": r.omega.as_ref().map(|w| w.iter().zip(&d.omega0).map(|(x, y)| x - y).collect::<Vec<_>>()),
                "p_residual": r.p_residual,
                "error": r.error,
            })
        })
        .collect();
    Ok(json!({ "nu": d.nu, "omega0": d.omega0, "rows": rows }))
}

/// Scaled margins `dist(⟨ω⁽⁰⁾,m⟩, 2πZ)·|m|^τ` over the square `|m| ≤ radius`
/// in the first two phases, with the assumption summary.
pub fn divisors_json(law_name: &str, gamma: f64, radius: i32, tau: f64) -> Result<Value, String> {
    let law = law(law_name)?;
    let d = DispersionData::from_law(&law, gamma).map_err(|e| e.to_string())?;
    let radius = radius.clamp(1, MAX_RADIUS);
    let tau = if tau > 0.0 { tau } else { d.nu as f64 + 1.0 };
    let side = (2 * radius + 1) as usize;
    let mut margin = Vec::with_capacity(side * side);
    for m2 in -radius..=radius {
        for m1 in -radius..=radius {
            let mut c = vec![0; d.nu];
            c[0] = m1;
            if d.nu > 1 {
                c[1] = m2;
            } else if m2 != 0 {
                margin.push(Value::Null);
                continue;
            }
            let m = ModeIndex::new(&c);
            if m.is_zero() {
                margin.push(Value::Null);
                continue;
            }
            let dist = dist_to_2pi_lattice(m.dot(&d.omega0));
            margin.push(json!(dist * (m.norm() as f64).powf(tau)));
        }
    }
    let report = check_assumptions(&law, gamma, Some(tau), radius as usize);
    let omega = omega_matrix(&law, &d).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<f64>> = (0..d.nu).map(|j| (0..d.nu).map(|l| omega.entries[(j, l)]).collect()).collect();
    Ok(json!({
        "nu": d.nu,
        "omega0": d.omega0,
        "radius": radius,
        "tau": tau,
        "margin": margin,
        "a1_ok": report.a1_ok,
        "a2_ok": report.a2_ok,
        "a4_ok": report.a4_ok,
        "min_scaled_margin": report.a3_min_scaled_margin,
        "omega_matrix": rows,
    }))
}

fn export(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve(law: &str, gamma: f64, a: Vec<f64>, n: usize, grid: usize) -> Result<String, JsValue> {
    export(solve_json(law, gamma, &a, n, grid))
}

#[wasm_bindgen]
pub fn sweep(law: &str, gamma: f64, dir: Vec<f64>, amin: f64, amax: f64, count: usize, n: usize) -> Result<String, JsValue> {
    export(sweep_json(law, gamma, &dir, amin, amax, count, n))
}

#[wasm_bindgen]
pub fn divisors(law: &str, gamma: f64, radius: i32, tau: f64) -> Result<String, JsValue> {
    export(divisors_json(law, gamma, radius, tau))
}
