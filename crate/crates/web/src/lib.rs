//! Browser bindings: kernel sections, threshold constants and a small solve.
//!
//! The plain functions return `Result<_, String>` so they can be tested on
//! the host; the `#[wasm_bindgen]` wrappers only convert errors.

use fracbvp::config::parse_config;
use fracbvp::report::to_json;
use fracbvp::solver::{cone_metrics, solve_picard, ConeReport, Grid, PicardOptions};
use fracbvp::{ConstantsReport, KernelModel, ProblemParams, QuadratureSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn model(alpha: f64, beta: f64, eta: f64, b: f64) -> Result<KernelModel, String> {
    ProblemParams::new(alpha, beta, eta, b)
        .map(KernelModel::new)
        .map_err(|e| e.to_string())
}

/// `k(t, s_j)` followed by `Φ(s_j)` on `n` uniform points `s_j` of `[0, 1]`.
pub fn kernel_section(alpha: f64, beta: f64, eta: f64, b: f64, t: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 {
        return Err("need at least 2 points".into());
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(format!("t = {t} is outside [0, 1]"));
    }
    let m = model(alpha, beta, eta, b)?;
    let s = |j: usize| j as f64 / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|j| m.k(t, s(j))).collect();
    out.extend((0..n).map(|j| m.phi(s(j))));
    Ok(out)
}

/// [`ConstantsReport`] as JSON.
pub fn constants(alpha: f64, beta: f64, eta: f64, b: f64) -> Result<String, String> {
    let m = model(alpha, beta, eta, b)?;
    let report = ConstantsReport::compute(&m, &QuadratureSpec::default()).map_err(|e| e.to_string())?;
    to_json(&report).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SolveOutput {
    nodes: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    residual_sup: f64,
    iterations: usize,
    converged: bool,
    cone: ConeReport,
}

/// Solves the system described by a config document from zero.
pub fn solve(config: &str, n: usize, tol: f64, max_iter: usize, damping: f64) -> Result<String, String> {
    let cfg = parse_config(config).map_err(|e| e.to_string())?;
    let models = cfg.params.map(KernelModel::new);
    let grid = Grid::build(models, n, &cfg.settings.quad).map_err(|e| e.to_string())?;
    let zeros = vec![0.0; grid.len()];
    let [f1, f2] = &cfg.nonlinearities;
    let sol = solve_picard(
        &grid,
        [f1, f2],
        (zeros.clone(), zeros),
        &PicardOptions { tol, max_iter, damping },
    )
    .map_err(|e| e.to_string())?;
    let cone = cone_metrics(&sol, &models);
    let out = SolveOutput {
        nodes: sol.nodes,
        u: sol.u,
        v: sol.v,
        residual_sup: sol.residual_sup,
        iterations: sol.iterations,
        converged: sol.converged,
        cone,
    };
    to_json(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = kernelSection)]
pub fn kernel_section_js(alpha: f64, beta: f64, eta: f64, b: f64, t: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    kernel_section(alpha, beta, eta, b, t, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = constants)]
pub fn constants_js(alpha: f64, beta: f64, eta: f64, b: f64) -> Result<String, JsValue> {
    constants(alpha, beta, eta, b).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = solve)]
pub fn solve_js(config: &str, n: usize, tol: f64, max_iter: usize, damping: f64) -> Result<String, JsValue> {
    solve(config, n, tol, max_iter, damping).map_err(|e| JsValue::from_str(&e))
}
