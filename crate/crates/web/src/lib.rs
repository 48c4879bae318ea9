//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! Every export returns a JSON string; errors come back as `{"error": ...}`
//! so the page never has to catch a thrown value.

use motionlink::codec::{self, CipherSuite, FrameHeader, MotionFrame, SessionKey};
use motionlink::gesture::{detect_stream, DetectorConfig};
use motionlink::latlab;
use motionlink::netsim::{ClockModel, LinkModel};
use motionlink::session::sim::{simulate, SimConfig};
use motionlink::trace::{generate, TraceSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const DEMO_SALT: [u8; 8] = *b"demosalt";

fn err(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

fn key(secret: &str, integrity_only: bool) -> SessionKey {
    let k = SessionKey::new(secret.as_bytes().to_vec(), DEMO_SALT);
    if integrity_only {
        k.with_suite(CipherSuite::IntegrityOnly)
    } else {
        k
    }
}

fn histogram(values: &[f64], bins: usize) -> Value {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(1e-9);
    let mut counts = vec![0u32; bins];
    for v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    json!({ "start_ms": lo, "width_ms": width, "counts": counts })
}

/// Virtual-time session at the given link model; latency report plus a
/// histogram of the raw per-frame latencies.
pub fn simulate_latency_value(
    frames: u32,
    delay_ms: f64,
    jitter_ms: f64,
    min_ms: f64,
    max_ms: f64,
    seed: u64,
    host_offset_ms: f64,
) -> Value {
    if frames == 0 || frames > 100_000 {
        return err("frames must be in 1..=100000");
    }
    let link = LinkModel {
        base_delay_ms: delay_ms,
        jitter_sigma_ms: jitter_ms,
        min_delay_ms: Some(min_ms),
        max_delay_ms: Some(max_ms),
        seed,
        ..LinkModel::default()
    };
    if let Err(e) = link.validate() {
        return err(e);
    }
    let samples = match generate(&TraceSpec {
        duration_s: frames as f64 / 10.0,
        ..Default::default()
    }) {
        Ok(s) => s,
        Err(e) => return err(e),
    };
    let mut cfg = SimConfig::new(samples, link);
    cfg.frames = frames as usize;
    cfg.host_clock = ClockModel {
        offset_ms: host_offset_ms,
        drift_ppm: 0.0,
    };
    let out = match simulate(&cfg, |_| {}) {
        Ok(o) => o,
        Err(e) => return err(e),
    };
    let analysis = match latlab::analyze(&out.merged) {
        Ok(a) => a,
        Err(e) => return err(e),
    };
    let raw = latlab::raw_latencies(&out.merged)
        .map(|s| s.values_ms)
        .unwrap_or_default();
    json!({
        "report": latlab::render_analysis(&analysis, latlab::ReportFormat::Text),
        "analysis": analysis,
        "histogram": histogram(&raw, 40),
    })
}

/// Synthetic trace with evenly spaced gestures and the detector's events.
pub fn gesture_trace_value(gestures: u32, noise_sigma: f64, seed: u64, tau: f64, refractory_ms: u32) -> Value {
    let spec = TraceSpec {
        duration_s: 2.0 + 2.0 * gestures.max(1) as f64,
        noise_sigma,
        seed,
        ..Default::default()
    }
    .with_pulse_train(gestures as usize, 1.0, 2.0, 1.0, 200.0);
    let frames = match generate(&spec) {
        Ok(f) => f,
        Err(e) => return err(e),
    };
    let cfg = DetectorConfig {
        tau,
        refractory_ms: refractory_ms as u64,
        ..DetectorConfig::default()
    };
    let events = match detect_stream(&frames, &cfg) {
        Ok(e) => e,
        Err(e) => return err(e),
    };
    json!({
        "t_ms": frames.iter().map(|f| f.timestamp_ms).collect::<Vec<_>>(),
        "ay": frames.iter().map(|f| f.accel[1]).collect::<Vec<_>>(),
        "events": events,
        "tau": tau,
    })
}

/// Encodes one motion frame and returns its hex.
#[allow(clippy::too_many_arguments)]
pub fn encode_frame_value(
    ts_ms: u64,
    accel: [f32; 3],
    gyro: [f32; 3],
    seq: u32,
    secret: &str,
    integrity_only: bool,
) -> Value {
    let f = MotionFrame::new(ts_ms, accel, gyro);
    match codec::encode_motion(&f, &key(secret, integrity_only), &FrameHeader::motion(0x4D4C_0001, seq)) {
        Ok(bytes) => json!({ "hex": hex::encode(&bytes), "len": bytes.len() }),
        Err(e) => err(e),
    }
}

/// Decodes a motion frame given as hex; `flip_bit` (if >= 0) is flipped first.
pub fn decode_frame_value(hex_str: &str, secret: &str, integrity_only: bool, flip_bit: i32) -> Value {
    let mut bytes = match hex::decode(hex_str.trim()) {
        Ok(b) => b,
        Err(e) => return err(e),
    };
    if flip_bit >= 0 {
        let bit = flip_bit as usize;
        if bit / 8 >= bytes.len() {
            return err(format!("bit {bit} is past the end of a {}-byte frame", bytes.len()));
        }
        bytes[bit / 8] ^= 1 << (bit % 8);
    }
    let hex = hex::encode(&bytes);
    match codec::decode_motion_with_header(&bytes, &key(secret, integrity_only)) {
        Ok((h, f)) => json!({
            "ok": true,
            "hex": hex,
            "sequence": h.sequence,
            "session_id": h.session_id,
            "timestamp_ms": f.timestamp_ms,
            "accel": f.accel,
            "gyro": f.gyro,
        }),
        Err(e) => json!({ "ok": false, "hex": hex, "error": e.to_string() }),
    }
}

#[wasm_bindgen]
pub fn simulate_latency(
    frames: u32,
    delay_ms: f64,
    jitter_ms: f64,
    min_ms: f64,
    max_ms: f64,
    seed: u32,
    host_offset_ms: f64,
) -> String {
    simulate_latency_value(frames, delay_ms, jitter_ms, min_ms, max_ms, seed as u64, host_offset_ms).to_string()
}

#[wasm_bindgen]
pub fn gesture_trace(gestures: u32, noise_sigma: f64, seed: u32, tau: f64, refractory_ms: u32) -> String {
    gesture_trace_value(gestures, noise_sigma, seed as u64, tau, refractory_ms).to_string()
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn encode_frame(
    ts_ms: f64,
    ax: f32,
    ay: f32,
    az: f32,
    gx: f32,
    gy: f32,
    gz: f32,
    seq: u32,
    secret: &str,
    integrity_only: bool,
) -> String {
    if !(ts_ms.is_finite() && ts_ms >= 0.0) {
        return err("timestamp must be a non-negative number").to_string();
    }
    encode_frame_value(ts_ms as u64, [ax, ay, az], [gx, gy, gz], seq, secret, integrity_only).to_string()
}

#[wasm_bindgen]
pub fn decode_frame(hex_str: &str, secret: &str, integrity_only: bool, flip_bit: i32) -> String {
    decode_frame_value(hex_str, secret, integrity_only, flip_bit).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_demo_runs() {
        let v = simulate_latency_value(200, 70.4, 3.7, 52.2, 82.2, 42, 0.0);
        assert!(v.get("error").is_none(), "{v}");
        let counts = v["histogram"]["counts"].as_array().unwrap();
        assert_eq!(counts.iter().map(|c| c.as_u64().unwrap()).sum::<u64>(), 200);
        assert!(simulate_latency_value(0, 70.4, 3.7, 52.2, 82.2, 42, 0.0)
            .get("error")
            .is_some());
    }

    #[test]
    fn gesture_demo_finds_each_pulse() {
        let v = gesture_trace_value(5, 0.05, 1, 0.5, 500);
        assert_eq!(v["events"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn encode_then_flip() {
        let enc = encode_frame_value(0, [0.0; 3], [0.0; 3], 0, "k", true);
        let hex = enc["hex"].as_str().unwrap();
        assert_eq!(enc["len"], 88);
        assert_eq!(decode_frame_value(hex, "k", true, -1)["ok"], true);
        let flipped = decode_frame_value(hex, "k", true, 52 * 8);
        assert!(flipped["error"].as_str().unwrap().contains("checksum"), "{flipped}");
        let keyed = encode_frame_value(0, [0.0; 3], [0.0; 3], 0, "k", false);
        let bad = decode_frame_value(keyed["hex"].as_str().unwrap(), "k", false, 3);
        assert!(bad["error"].as_str().unwrap().to_lowercase().contains("auth"), "{bad}");
    }
}
