//! Browser demo: small synthetic zero-shot experiments exposed to JavaScript.
//!
//! Every export returns a JSON string so the page can stay framework-free.

use mbfa::pipeline::training_views;
use mbfa::{
    fit_mbfa, fit_mcca, generate_synthetic, train, FusionWeights, SyntheticSpec, TrainOptions, ViewSpec, ZslDataset,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MCCA_REG: f64 = 1e-6;

/// Two side-information types that each see half of the latent space, so
/// neither alone separates the unseen classes but together they do.
pub fn complementary_dataset(seed: u64, noise: f64) -> mbfa::Result<ZslDataset> {
    generate_synthetic(&SyntheticSpec {
        latent_dim: 8,
        class_count: 24,
        instances_per_class: 20,
        unseen_count: 10,
        latent_sigma: noise,
        views: vec![
            ViewSpec::new(20, 0.05),
            ViewSpec::observing(10, 0.05, (0..4).collect()),
            ViewSpec::observing(10, 0.05, (4..8).collect()),
        ],
        seed,
    })
}

#[derive(Debug, Serialize)]
pub struct SweepCurve {
    pub d: Vec<usize>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub fused: Vec<f64>,
}

/// Accuracy against embedding dimension for each side-information type alone
/// and for both fused with equal weights.
pub fn dimension_sweep(seed: u64, noise: f64, d_max: usize) -> mbfa::Result<SweepCurve> {
    let ds = complementary_dataset(seed, noise)?;
    let mut curve = SweepCurve {
        d: Vec::new(),
        first: Vec::new(),
        second: Vec::new(),
        fused: Vec::new(),
    };
    for d in 1..=d_max.clamp(1, 10) {
        let opts = TrainOptions::mbfa(d);
        let acc = |selection: &[usize]| -> mbfa::Result<f64> {
            let zsl = train(&ds, selection, &opts)?;
            Ok(zsl
                .evaluate(&ds, &FusionWeights::uniform(selection.len()))?
                .mean_per_class_top1)
        };
        curve.d.push(d);
        curve.first.push(acc(&[0])?);
        curve.second.push(acc(&[1])?);
        curve.fused.push(acc(&[0, 1])?);
    }
    Ok(curve)
}

#[derive(Debug, Serialize)]
pub struct FusionCurve {
    pub alpha: Vec<f64>,
    pub accuracy: Vec<f64>,
}

/// Accuracy as the weight on the first side-information type goes 0 → 1.
pub fn fusion_curve(seed: u64, noise: f64, d: usize, points: usize) -> mbfa::Result<FusionCurve> {
    let ds = complementary_dataset(seed, noise)?;
    let zsl = train(&ds, &[0, 1], &TrainOptions::mbfa(d))?;
    let points = points.clamp(2, 101);
    let mut curve = FusionCurve {
        alpha: Vec::new(),
        accuracy: Vec::new(),
    };
    for i in 0..points {
        let alpha = i as f64 / (points - 1) as f64;
        let weights = FusionWeights::normalized(&[alpha, 1.0 - alpha])?;
        curve.alpha.push(alpha);
        curve.accuracy.push(zsl.evaluate(&ds, &weights)?.mean_per_class_top1);
    }
    Ok(curve)
}

#[derive(Debug, Serialize)]
pub struct Spectra {
    pub mbfa: Vec<f64>,
    pub mcca: Vec<f64>,
}

/// Leading eigenvalues of both methods after multiplying the visual view by
/// `scale`. MBFA's spectrum follows the scale, MCCA's does not.
pub fn spectrum_comparison(seed: u64, scale: f64, d: usize) -> mbfa::Result<Spectra> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(mbfa::Error::InvalidInput(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let ds = complementary_dataset(seed, 0.5)?;
    let seen = ds.instances_of(ds.seen());
    let mut views = training_views(&ds, &[0, 1], &seen)?;
    views[0] = views[0].scaled(scale);
    let d = d.clamp(1, 10);
    Ok(Spectra {
        mbfa: fit_mbfa(&views, d)?.eigenvalues,
        mcca: fit_mcca(&views, d, MCCA_REG)?.eigenvalues,
    })
}

fn to_js<T: Serialize>(result: mbfa::Result<T>) -> Result<String, JsError> {
    let value = result.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = dimensionSweep)]
pub fn dimension_sweep_js(seed: u32, noise: f64, d_max: u32) -> Result<String, JsError> {
    to_js(dimension_sweep(seed.into(), noise, d_max as usize))
}

#[wasm_bindgen(js_name = fusionCurve)]
pub fn fusion_curve_js(seed: u32, noise: f64, d: u32, points: u32) -> Result<String, JsError> {
    to_js(fusion_curve(seed.into(), noise, d as usize, points as usize))
}

#[wasm_bindgen(js_name = spectrumComparison)]
pub fn spectrum_comparison_js(seed: u32, scale: f64, d: u32) -> Result<String, JsError> {
    to_js(spectrum_comparison(seed.into(), scale, d as usize))
}
