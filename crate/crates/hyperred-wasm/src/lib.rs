//! Browser bindings for the demo pipeline. Each export takes plain numbers
//! and returns a JSON string; the page does all rendering. Failures come back
//! as `{"error": "..."}` rather than trapping.

mod demo;

pub use demo::{error_sweep, simulate, train};

use wasm_bindgen::prelude::wasm_bindgen;

fn to_json<T: serde::Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(value) => serde_json::to_string(&value)
            .unwrap_or_else(|e| format!(r#"{{"error":"serialization: {e}"}}"#)),
        Err(message) => {
            serde_json::to_string(&serde_json::json!({ "error": message })).unwrap()
        }
    }
}

/// Integrates the reaction-diffusion scenario and returns solution frames.
#[wasm_bindgen]
pub fn demo_simulate(n_cells: usize, scenario: f64, max_frames: usize) -> String {
    to_json(demo::simulate(n_cells.clamp(16, 512), scenario.clamp(0.0, 1.0), max_frames))
}

/// Runs the snapshot/POD/compression/training pipeline and returns the
/// trained rule, spectrum, and compression figures.
#[wasm_bindgen]
pub fn demo_train(n_cells: usize, n_r: usize, m_c: usize, rel_tol: f64) -> String {
    to_json(demo::train(
        n_cells.clamp(16, 512),
        n_r.clamp(1, 16),
        m_c.max(1),
        rel_tol.clamp(1e-12, 0.5),
    ))
}

/// Sweeps rule cardinalities and returns complexity-reduced model errors for
/// both training modes.
#[wasm_bindgen]
pub fn demo_error_sweep(n_cells: usize, n_r: usize, rel_tol: f64, max_cardinality: usize) -> String {
    let top = max_cardinality.clamp(8, 64);
    let cardinalities = [top / 4, top / 2, 3 * top / 4, top];
    to_json(demo::error_sweep(
        n_cells.clamp(16, 256),
        n_r.clamp(1, 12),
        rel_tol.clamp(1e-12, 0.5),
        &cardinalities,
    ))
}
