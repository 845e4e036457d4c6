//! Browser bindings. Every exported function returns a JSON string that
//! `www/index.html` parses and draws.

use serde::Serialize;
use vibecycle_core::metrics::{averaged_power, xcross, Spectrum};
use vibecycle_core::signal::DomainLabel;
use vibecycle_core::synth::{generate_toy_record, simulate_response, Damage, ModalModel, SimulationSpec, ToyDomainSpec};
use wasm_bindgen::prelude::*;

const RATE: f64 = 1024.0;
const BLOCK: usize = 1024;

#[derive(Debug, Serialize)]
pub struct ToyView {
    pub spectrum: Spectrum,
    pub dominant_hz: f64,
}

/// Averaged spectrum of a tone-plus-noise record.
pub fn toy_view(freq_hz: f64, noise_std: f64, seconds: f64, seed: u64) -> Result<ToyView, String> {
    let spec = ToyDomainSpec {
        carrier_freq_hz: freq_hz,
        amplitude: 1.0,
        noise_std,
        sample_rate_hz: RATE,
        seed,
    };
    let rec = generate_toy_record(&spec, seconds, DomainLabel::Undamaged).map_err(|e| e.to_string())?;
    if rec.len() < BLOCK {
        return Err("record shorter than one second".into());
    }
    let spectrum = averaged_power(rec.samples(), RATE, BLOCK);
    Ok(ToyView {
        dominant_hz: spectrum.dominant_frequency(),
        spectrum,
    })
}

#[derive(Debug, Serialize)]
pub struct ModalView {
    pub freqs_undamaged_hz: Vec<f64>,
    pub freqs_damaged_hz: Vec<f64>,
    pub spectrum_undamaged: Spectrum,
    pub spectrum_damaged: Spectrum,
}

/// Three-storey chain with spring 2 scaled by `damage_factor`.
pub fn modal_view(damage_factor: f64, seconds: f64, seed: u64) -> Result<ModalView, String> {
    let k = (2.0 * std::f64::consts::PI * 10.0).powi(2);
    let (mass, stiffness) = ([1.0; 3], [k; 3]);
    let damage = Damage {
        spring: 2,
        factor: damage_factor,
    };
    let healthy = ModalModel::build(&mass, &stiffness, 0.02, None).map_err(|e| e.to_string())?;
    let damaged = ModalModel::build(&mass, &stiffness, 0.02, Some(damage)).map_err(|e| e.to_string())?;
    let sim = SimulationSpec {
        duration_s: seconds,
        seed,
        ..SimulationSpec::default()
    };
    let u = simulate_response(&healthy, &sim, DomainLabel::Undamaged).map_err(|e| e.to_string())?;
    let d = simulate_response(&damaged, &sim, DomainLabel::Damaged).map_err(|e| e.to_string())?;
    Ok(ModalView {
        freqs_undamaged_hz: healthy.natural_freqs_hz().to_vec(),
        freqs_damaged_hz: damaged.natural_freqs_hz().to_vec(),
        spectrum_undamaged: averaged_power(u.samples(), RATE, BLOCK),
        spectrum_damaged: averaged_power(d.samples(), RATE, BLOCK),
    })
}

#[derive(Debug, Serialize)]
pub struct XcrossView {
    /// Normalized circular cross-correlation, lag 0 first.
    pub sequence: Vec<f64>,
    pub peak_normalized: f64,
}

/// Cross-correlation of two one-second toy segments.
pub fn xcross_view(freq_a_hz: f64, freq_b_hz: f64, noise_std: f64, seed: u64) -> Result<XcrossView, String> {
    let seg = |f, s| {
        let spec = ToyDomainSpec {
            carrier_freq_hz: f,
            amplitude: 1.0,
            noise_std,
            sample_rate_hz: RATE,
            seed: s,
        };
        generate_toy_record(&spec, 1.0, DomainLabel::Undamaged).map_err(|e| e.to_string())
    };
    let (a, b) = (seg(freq_a_hz, seed)?, seg(freq_b_hz, seed.wrapping_add(1))?);
    let xc = xcross(a.samples(), b.samples()).map_err(|e| e.to_string())?;
    let norm = xc.peak_raw / xc.peak_normalized;
    let sequence = if norm.is_finite() && norm != 0.0 {
        xc.sequence.iter().map(|v| v / norm).collect()
    } else {
        xc.sequence
    };
    Ok(XcrossView {
        sequence,
        peak_normalized: xc.peak_normalized,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.map(|v| serde_json::to_string(&v).expect("plain data serializes"))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = toySpectrum)]
pub fn toy_spectrum(freq_hz: f64, noise_std: f64, seconds: f64, seed: u32) -> Result<String, JsValue> {
    to_js(toy_view(freq_hz, noise_std, seconds, seed.into()))
}

#[wasm_bindgen(js_name = modalSpectra)]
pub fn modal_spectra(damage_factor: f64, seconds: f64, seed: u32) -> Result<String, JsValue> {
    to_js(modal_view(damage_factor, seconds, seed.into()))
}

#[wasm_bindgen(js_name = crossCorrelation)]
pub fn cross_correlation(freq_a_hz: f64, freq_b_hz: f64, noise_std: f64, seed: u32) -> Result<String, JsValue> {
    to_js(xcross_view(freq_a_hz, freq_b_hz, noise_std, seed.into()))
}
