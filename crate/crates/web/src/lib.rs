//! Browser bindings for the `scenopt` demo page. Every export returns a JSON
//! string; the plain functions below them are usable natively as well.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use scenopt::helly_bounds::{mpc_stage_bounds, MpcStageDims};
use scenopt::lp::SimplexSolver;
use scenopt::sample_complexity::{
    min_sample_size_exact, min_sample_size_explicit, vc_dim_affine, vc_sample_size,
    SampleSizeQuery, VcQuery,
};
use scenopt::support::{preset_family, verify_bound, Preset};

/// Largest trial count the page will run in one call.
pub const MAX_TRIALS: usize = 2000;
pub const MAX_SAMPLES: usize = 1000;

/// Exact and explicit sample sizes for `zeta`, plus the VC size for an
/// affine constraint with `r` rows in `R^d`.
pub fn sample_sizes(eps: f64, beta: f64, zeta: u64, r: u64, d: u64) -> scenopt::Result<Value> {
    let q = SampleSizeQuery::new(eps, beta, zeta)?;
    let vc = VcQuery::new(vc_dim_affine(r, d), eps, beta)?;
    Ok(json!({
        "exact": min_sample_size_exact(&q),
        "explicit": min_sample_size_explicit(&q),
        "vc": vc_sample_size(&vc),
        "vc_dimension": vc_dim_affine(r, d),
    }))
}

/// Stage bounds for `k = 1..=k_max`, one row per stage.
pub fn bound_table(
    k_max: usize,
    n_u: usize,
    n_delta: usize,
    n_f: usize,
    rank_f: usize,
) -> scenopt::Result<Value> {
    let rows = (1..=k_max)
        .map(|k| {
            let b = mpc_stage_bounds(&MpcStageDims::new(k, n_u, n_delta, n_f, rank_f))?;
            Ok(json!({ "k": k, "std": b.std, "srank": b.srank, "new": b.new }))
        })
        .collect::<scenopt::Result<Vec<Value>>>()?;
    Ok(Value::Array(rows))
}

/// Support counts over `trials` random programs of a preset family.
pub fn support_counts(
    preset: &str,
    n_samples: usize,
    trials: usize,
    seed: u64,
) -> scenopt::Result<Value> {
    if n_samples > MAX_SAMPLES || trials > MAX_TRIALS {
        return Err(scenopt::Error::domain(format!(
            "the page runs at most {MAX_TRIALS} trials of {MAX_SAMPLES} samples"
        )));
    }
    let preset = Preset::parse(preset)?;
    let family = preset_family(preset, preset.default_dims(), seed)?;
    let rep = verify_bound(&family, n_samples, trials, seed, &SimplexSolver::default())?;
    let mut histogram = vec![0usize; rep.n + 1];
    for r in &rep.records {
        if let Ok(c) = r.support_count {
            histogram[c.min(rep.n)] += 1;
        }
    }
    Ok(json!({
        "preset": preset.name(),
        "n": rep.n,
        "bound": rep.bound,
        "max": rep.max_support_count,
        "violations": rep.violations,
        "failed": rep.failed_trials,
        "histogram": histogram,
    }))
}

fn export(v: scenopt::Result<Value>) -> Result<String, JsError> {
    v.map(|v| v.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = sampleSizes)]
pub fn sample_sizes_js(eps: f64, beta: f64, zeta: u32, r: u32, d: u32) -> Result<String, JsError> {
    export(sample_sizes(eps, beta, zeta.into(), r.into(), d.into()))
}

#[wasm_bindgen(js_name = boundTable)]
pub fn bound_table_js(
    k_max: u32,
    n_u: u32,
    n_delta: u32,
    n_f: u32,
    rank_f: u32,
) -> Result<String, JsError> {
    export(bound_table(
        k_max as usize,
        n_u as usize,
        n_delta as usize,
        n_f as usize,
        rank_f as usize,
    ))
}

#[wasm_bindgen(js_name = supportCounts)]
pub fn support_counts_js(
    preset: &str,
    n_samples: u32,
    trials: u32,
    seed: u32,
) -> Result<String, JsError> {
    export(support_counts(
        preset,
        n_samples as usize,
        trials as usize,
        seed.into(),
    ))
}

#[wasm_bindgen(js_name = presetNames)]
pub fn preset_names() -> String {
    Value::from(Preset::ALL.iter().map(|p| p.name()).collect::<Vec<_>>()).to_string()
}
