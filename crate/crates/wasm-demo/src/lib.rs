//! Browser bindings for the static demo page in `www/`.
//!
//! [`Demo`] holds a synthetic province with its criteria already derived and
//! graded, so reweighting only repeats the overlay. The `wasm_bindgen`
//! wrappers at the bottom convert errors to JS exceptions. Everything else
//! is plain Rust and tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use solarsite_core::ahp::{self, PriorityVector};
use solarsite_core::mcda::{self, Scenario, SuitabilityResult};
use solarsite_core::pipeline::{self, config::judgment_values, render, synth, Judgment, SynthDataset, SynthSpec};
use solarsite_core::{presets, spatial, CriterionId, Grid};

/// Largest grid side the page offers; bigger grids take seconds per run.
pub const MAX_SIDE: usize = 256;

/// Weights and consistency of a judgment matrix given as JSON rows of
/// numbers or `"a/b"` strings.
pub fn evaluate_judgments(json: &str) -> Result<String, String> {
    let rows: Vec<Vec<Judgment>> =
        serde_json::from_str(json).map_err(|e| format!("expected rows of judgments: {e}"))?;
    if rows.len() > ahp::MAX_CRITERIA {
        return Err(format!("at most {} criteria are supported", ahp::MAX_CRITERIA));
    }
    let raw = judgment_values(&rows).map_err(|e| e.to_string())?;
    let eval = ahp::evaluate(&raw).map_err(|e| e.to_string())?;
    serde_json::to_string(&eval).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct AreaRow {
    pub class: u8,
    pub full_km2: f64,
    pub exploitable_km2: f64,
    pub exploitable_pct: f64,
    pub gp_exploitable_twh: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSummary {
    pub weights: Vec<f64>,
    pub groups: Vec<(String, f64)>,
    pub rows: Vec<AreaRow>,
    pub exploitable_km2: f64,
    pub capacity_mw_per_km2: Option<f64>,
}

pub struct Demo {
    dataset: SynthDataset,
    scenario: Scenario,
}

impl Demo {
    /// Synthesizes a `side` x `side` province and grades all criteria.
    pub fn new(seed: u64, side: usize) -> Result<Demo, String> {
        if !(16..=MAX_SIDE).contains(&side) {
            return Err(format!("grid side must be within 16..={MAX_SIDE}, got {side}"));
        }
        let spec = SynthSpec {
            seed,
            rows: side,
            cols: side,
            ..SynthSpec::default()
        };
        let mut dataset = pipeline::synth_dataset(&spec).map_err(|e| e.to_string())?;
        let config = dataset.approach_config(1).map_err(|e| e.to_string())?;
        let loaded = pipeline::build_scenario_from(config, &mut dataset, false).map_err(|e| e.to_string())?;
        Ok(Demo {
            dataset,
            scenario: loaded.scenario,
        })
    }

    pub fn side(&self) -> usize {
        self.dataset.header.ncols
    }

    pub fn criteria() -> Vec<&'static str> {
        presets::ORDER.iter().map(|c| c.as_str()).collect()
    }

    /// Published weights of approach `k` (1-based).
    pub fn approach_weights(k: usize) -> Result<Vec<f64>, String> {
        presets::approach(k)
            .map(|w| w.as_slice().to_vec())
            .ok_or_else(|| format!("no weighting approach {k}"))
    }

    /// Overlays with `weights` (any nonnegative scale, criteria in
    /// [`Demo::criteria`] order) and classifies.
    pub fn suitability(&self, weights: &[f64]) -> Result<(SuitabilityResult, MapSummary), String> {
        if weights.len() != presets::ORDER.len() {
            return Err(format!(
                "expected {} weights, got {}",
                presets::ORDER.len(),
                weights.len()
            ));
        }
        let w = PriorityVector::normalized(weights.to_vec()).map_err(|e| e.to_string())?;
        let mut scenario = self.scenario.clone();
        scenario.weights = w.clone();
        let result = mcda::evaluate(&scenario).map_err(|e| e.to_string())?;
        let rows = result
            .areas
            .rows
            .iter()
            .zip(&result.generation)
            .map(|(a, g)| AreaRow {
                class: a.class,
                full_km2: a.full_km2,
                exploitable_km2: a.exploitable_km2,
                exploitable_pct: a.exploitable_pct,
                gp_exploitable_twh: g.gp_exploitable_twh,
            })
            .collect();
        let summary = MapSummary {
            weights: w.as_slice().to_vec(),
            groups: presets::group_weights(&w).map_err(|e| e.to_string())?,
            rows,
            exploitable_km2: result.areas.exploitable_km2,
            capacity_mw_per_km2: result.capacity_mw_per_km2,
        };
        Ok((result, summary))
    }

    /// RGBA class map, constrained cells transparent when `exploitable_only`.
    pub fn class_map(&self, weights: &[f64], exploitable_only: bool) -> Result<(Vec<u8>, MapSummary), String> {
        let (result, summary) = self.suitability(weights)?;
        let grid = if exploitable_only {
            &result.exploitable_classes
        } else {
            &result.classes
        };
        Ok((render::class_map_rgba(grid, self.scenario.breaks.n_classes()), summary))
    }

    fn feature_layer(&self, layer: &str) -> Result<&Grid, String> {
        let file = match layer {
            "roads" => synth::ROADS_FILE,
            "grid_lines" => synth::GRID_LINES_FILE,
            "settlements" => synth::SETTLEMENTS_FILE,
            other => return Err(format!("unknown feature layer {other:?}")),
        };
        self.dataset.grid(file).ok_or_else(|| format!("dataset lacks {file}"))
    }

    /// Distance shading from a feature layer with the cells inside
    /// `radius_km` tinted. Features are drawn black.
    pub fn proximity(&self, layer: &str, radius_km: f64) -> Result<Vec<u8>, String> {
        let features = self.feature_layer(layer)?;
        if radius_km.is_nan() || radius_km < 0.0 {
            return Err(format!("radius must be >= 0 km, got {radius_km}"));
        }
        let dist = spatial::distance_transform(features).map_err(|e| e.to_string())?;
        let far = dist.min_max().map_or(1.0, |(_, hi)| hi.max(f64::MIN_POSITIVE));
        let radius_m = radius_km * 1000.0;
        let mut out = Vec::with_capacity(dist.values().len() * 4);
        for (d, f) in dist.cells().zip(features.cells()) {
            let px = match (d, f) {
                (_, Some(1.0)) => [0, 0, 0, 255],
                (Some(d), _) => {
                    let shade = (255.0 * (1.0 - (d / far).sqrt())).round() as u8;
                    if d <= radius_m {
                        [255, shade.max(96), 0, 255]
                    } else {
                        [shade / 2, shade / 2, shade, 255]
                    }
                }
                (None, _) => render::NODATA_RGBA,
            };
            out.extend_from_slice(&px);
        }
        Ok(out)
    }

    /// Share of cells within `radius_km` of the layer's features.
    pub fn buffer_share(&self, layer: &str, radius_km: f64) -> Result<f64, String> {
        let features = self.feature_layer(layer)?;
        let mask = spatial::buffer_mask(features, radius_km * 1000.0).map_err(|e| e.to_string())?;
        let inside = mask.values().iter().filter(|&&v| v == 1.0).count();
        Ok(inside as f64 / mask.values().len() as f64)
    }
}

fn js_err(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = evaluateJudgments)]
pub fn evaluate_judgments_js(json: &str) -> Result<String, JsError> {
    evaluate_judgments(json).map_err(js_err)
}

#[wasm_bindgen(js_name = criteria)]
pub fn criteria_js() -> String {
    serde_json::to_string(&Demo::criteria()).unwrap_or_default()
}

#[wasm_bindgen(js_name = approachWeights)]
pub fn approach_weights_js(k: usize) -> Result<Vec<f64>, JsError> {
    Demo::approach_weights(k).map_err(js_err)
}

#[wasm_bindgen(js_name = criterionName)]
pub fn criterion_name_js(id: &str) -> String {
    CriterionId::ALL
        .iter()
        .find(|c| c.as_str() == id)
        .map_or_else(|| id.to_string(), |c| c.display_name().to_string())
}

#[wasm_bindgen(js_name = Demo)]
pub struct DemoJs {
    inner: Demo,
    summary: Option<String>,
}

#[wasm_bindgen(js_class = Demo)]
impl DemoJs {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, side: usize) -> Result<DemoJs, JsError> {
        Ok(DemoJs {
            inner: Demo::new(u64::from(seed), side).map_err(js_err)?,
            summary: None,
        })
    }

    pub fn side(&self) -> usize {
        self.inner.side()
    }

    /// RGBA pixels; the matching area table is available from `summary()`.
    #[wasm_bindgen(js_name = classMap)]
    pub fn class_map(&mut self, weights: Vec<f64>, exploitable_only: bool) -> Result<Vec<u8>, JsError> {
        let (rgba, summary) = self.inner.class_map(&weights, exploitable_only).map_err(js_err)?;
        self.summary = Some(serde_json::to_string(&summary).map_err(|e| JsError::new(&e.to_string()))?);
        Ok(rgba)
    }

    pub fn summary(&self) -> Option<String> {
        self.summary.clone()
    }

    pub fn proximity(&self, layer: &str, radius_km: f64) -> Result<Vec<u8>, JsError> {
        self.inner.proximity(layer, radius_km).map_err(js_err)
    }

    #[wasm_bindgen(js_name = bufferShare)]
    pub fn buffer_share(&self, layer: &str, radius_km: f64) -> Result<f64, JsError> {
        self.inner.buffer_share(layer, radius_km).map_err(js_err)
    }
}
