//! Browser bindings: simulate a path, look up the regime constants, and
//! compute the exact second-moment curve.

use merw::closedform::{self, moments};
use merw::engine::{self, Engine, Record};
use merw::model::{self, FirstStep, WalkConfig};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn config(d: usize, p: f64, q: Option<f64>, n: u64, seed: u64) -> Result<WalkConfig, JsValue> {
    let first = match q {
        Some(q) => FirstStep::Biased { q },
        None => FirstStep::Uniform,
    };
    WalkConfig::new(d, p, n, seed).and_then(|c| c.with_first_step(first)).map_err(err)
}

/// Positions `S_1..S_n`, `d` coordinates per step, with the origin prepended.
#[wasm_bindgen]
pub fn simulate(d: usize, p: f64, q: Option<f64>, n: u32, seed: u32, stream: u32) -> Result<Vec<i32>, JsValue> {
    let cfg = config(d, p, q, n as u64, seed as u64)?;
    let traj = engine::simulate(&cfg, Engine::Reduced, stream as u64, Record::Positions).map_err(err)?;
    let mut out = vec![0i32; d];
    out.extend(traj.positions.iter().map(|&x| x as i32));
    Ok(out)
}

/// Regime, `a`, `p_d` and the limit constants as a JSON string.
#[wasm_bindgen]
pub fn limits(d: usize, p: f64, q: Option<f64>) -> Result<String, JsValue> {
    let cfg = config(d, p, q, 1, 0)?;
    let lc = moments::limit_constants(d, p, cfg.first_step, 1e-10).map_err(err)?;
    serde_json::to_string(&lc).map_err(err)
}

/// `E[||S_k||²] / k` and `v_k` for `k = 1..=n`, interleaved as pairs.
#[wasm_bindgen]
pub fn moment_curve(d: usize, p: f64, q: Option<f64>, n: u32) -> Result<Vec<f64>, JsValue> {
    let cfg = config(d, p, q, n as u64, 0)?;
    let table = moments::exact_second_moment(n as u64, d, p, cfg.first_step).map_err(err)?;
    let a = model::memory_to_a(d, p).map_err(err)?;
    let mut out = Vec::with_capacity(2 * n as usize);
    for row in &table.rows {
        let trace: f64 = (0..d).map(|i| row.second[i * d + i]).sum();
        let vn = closedform::vn(row.n, a).unwrap_or(f64::NAN);
        out.push(trace / row.n as f64);
        out.push(vn);
    }
    Ok(out)
}
