//! Browser bindings for the demo page: load a bundled scenario, classify it,
//! and run a fixed-point scheme with a plot-sized trace. All values cross the
//! boundary as JSON strings so the page needs no framework.

use wasm_bindgen::prelude::*;

use perimap_core::classify;
use perimap_core::error::{Error, Result};
use perimap_core::report::to_canonical_json;
use perimap_core::scenario::{corpus, parse_scenario, Scenario};
use perimap_core::solve::{
    self, AnchoredOptions, DampedOptions, OrbitOptions, PicardOptions, ScheduleSpec, SolveResult,
};

/// Names of the bundled scenarios as a JSON array.
#[wasm_bindgen]
pub fn corpus_names() -> String {
    let names: Vec<&str> = corpus::bundled().iter().map(|(n, _)| *n).collect();
    serde_json::to_string(&names).expect("names serialize")
}

/// Raw JSON of a bundled scenario.
#[wasm_bindgen]
pub fn corpus_scenario(name: &str) -> std::result::Result<String, JsError> {
    let scenario = corpus::load(name).map_err(to_js)?;
    to_canonical_json(&scenario).map_err(to_js)
}

/// Classify a scenario and scan it for prime-period-2 points. Returns
/// `{classification, period2}` as JSON.
#[wasm_bindgen]
pub fn classify_scenario(scenario_json: &str) -> std::result::Result<String, JsError> {
    classify_impl(scenario_json).map_err(to_js)
}

/// Run one solver (`picard`, `damped`, `anchored`, `orbit`) with residual
/// tolerance `tol` and at most `n_max` stages or iterations. The trace is
/// downsampled to at most `trace_cap` entries for plotting.
#[wasm_bindgen]
pub fn solve_scenario(
    scenario_json: &str,
    method: &str,
    tol_fix: f64,
    n_max: u32,
    trace_cap: u32,
) -> std::result::Result<String, JsError> {
    solve_impl(scenario_json, method, tol_fix, n_max, trace_cap).map_err(to_js)
}

fn to_js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn classify_impl(scenario_json: &str) -> Result<String> {
    let s: Scenario = parse_scenario(scenario_json)?;
    let tol = s.tolerances();
    let cfg = s.sampler_or_default();
    let classification = classify::classify(&s.mapping, &s.domain, &s.norm, &cfg, &tol)?;
    let period2 =
        classify::detect_period2(&s.mapping, &s.domain, &s.norm, &cfg, tol.tol_fix, &tol)?;
    let value = serde_json::json!({
        "scenario": s.name,
        "classification": classification,
        "period2": period2,
    });
    to_canonical_json(&value)
}

fn solve_impl(
    scenario_json: &str,
    method: &str,
    tol_fix: f64,
    n_max: u32,
    trace_cap: u32,
) -> Result<String> {
    let s: Scenario = parse_scenario(scenario_json)?;
    let tol = s.tolerances();
    let n_max = n_max.max(1) as u64;
    let inner_tol = (tol_fix / 10.0).max(1e-12);
    let schedule = ScheduleSpec::Harmonic { n_max };

    let mut result: SolveResult = match method {
        "picard" => {
            let start = s.start_or_default()?;
            solve::picard(
                &s.mapping,
                &s.domain,
                &s.norm,
                &tol,
                &start,
                &PicardOptions { alpha_hint: 0.0, tol_fix, max_iter: n_max },
            )?
        }
        "orbit" => {
            let start = s.start_or_default()?;
            solve::orbit(
                &s.mapping,
                &s.domain,
                &s.norm,
                &tol,
                &start,
                &OrbitOptions { tol_fix, max_iter: n_max, cluster_window: 32 },
            )?
        }
        "damped" => solve::damped(
            &s.mapping,
            &s.domain,
            &s.norm,
            &tol,
            &schedule,
            &DampedOptions { tol_fix, inner_tol, max_inner: None, start: s.start.clone() },
            Some(&s.sampler_or_default()),
        )?,
        "anchored" => {
            let anchor = s.anchor_or_default()?;
            solve::anchored(
                &s.mapping,
                &s.domain,
                &s.norm,
                &tol,
                &anchor,
                &schedule,
                &AnchoredOptions { tol_fix, inner_tol, max_inner: None, start: s.start.clone() },
            )?
        }
        other => {
            return Err(Error::InvalidSpec(format!(
                "unknown method {other:?}; expected picard, damped, anchored or orbit"
            )))
        }
    };

    downsample_trace(&mut result, trace_cap.max(2) as usize);
    let value = serde_json::json!({
        "scenario": s.name,
        "method": method,
        "result": result,
    });
    to_canonical_json(&value)
}

/// Keep at most `cap` trace entries, evenly strided, always retaining the
/// first and last.
fn downsample_trace(result: &mut SolveResult, cap: usize) {
    let n = result.trace.len();
    if n <= cap {
        return;
    }
    let last = n - 1;
    let stride = (n as f64) / ((cap - 1) as f64);
    let mut keep: Vec<usize> = (0..cap - 1).map(|i| (i as f64 * stride) as usize).collect();
    keep.push(last);
    keep.dedup();
    result.trace = keep.into_iter().map(|i| result.trace[i].clone()).collect();
}
