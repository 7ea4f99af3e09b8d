//! Browser bindings for the `www/` demo page.
//!
//! Curves come back as flat `Float64Array`s in row-major order; structured
//! results come back as JSON strings.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(e: mvbound_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

/// See [`demo::regime_curves`].
#[wasm_bindgen(js_name = regimeCurves)]
pub fn regime_curves(regime: &str, m: usize, points: usize) -> Result<Vec<f64>, JsError> {
    demo::regime_curves(regime, m, points).map_err(js)
}

#[wasm_bindgen(js_name = regimeColumns)]
pub fn regime_columns() -> usize {
    demo::REGIME_COLUMNS
}

/// See [`demo::loss_bound_curves`].
#[wasm_bindgen(js_name = lossBoundCurves)]
pub fn loss_bound_curves(n: usize, kl: f64, delta: f64, points: usize) -> Result<Vec<f64>, JsError> {
    demo::loss_bound_curves(n, kl, delta, points).map_err(js)
}

#[wasm_bindgen]
pub struct ForestDemo(demo::Demo);

#[wasm_bindgen]
impl ForestDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(problem: &str, n: usize, trees: usize, reduced: bool, seed: u32) -> Result<ForestDemo, JsError> {
        demo::Demo::new(problem, n, trees, reduced, u64::from(seed))
            .map(ForestDemo)
            .map_err(js)
    }

    pub fn bounds(&self, delta: f64) -> Result<String, JsError> {
        to_json(&self.0.bounds(delta).map_err(js)?)
    }

    pub fn optimize(&self, kind: &str, delta: f64) -> Result<String, JsError> {
        to_json(&self.0.optimize(kind, delta).map_err(js)?)
    }
}
