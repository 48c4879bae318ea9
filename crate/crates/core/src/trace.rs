//! Synthetic IMU traces and CSV replay.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::MotionFrame;
use crate::gesture::Axis;
use crate::rng::SimRng;

pub const CSV_HEADER: &str = "t_ms,ax,ay,az,gx,gy,gz";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid trace spec: {0}")]
    InvalidSpec(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One scripted half-sine pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GesturePulse {
    pub onset_s: f64,
    /// Peak acceleration, m/s^2.
    pub amplitude: f64,
    pub width_ms: f64,
    #[serde(default)]
    pub axis: Axis,
}

impl GesturePulse {
    pub fn value_at(&self, t_s: f64) -> f64 {
        let width_s = self.width_ms / 1000.0;
        let dt = t_s - self.onset_s;
        if dt < 0.0 || dt > width_s {
            0.0
        } else {
            self.amplitude * (PI * dt / width_s).sin()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub duration_s: f64,
    pub rate_hz: f64,
    pub gestures: Vec<GesturePulse>,
    /// Per-sample, per-axis Gaussian noise on the accelerometer, m/s^2.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Timestamp of the first sample.
    #[serde(default)]
    pub start_ms: u64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            duration_s: 100.0,
            rate_hz: 10.0,
            gestures: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
            start_ms: 0,
        }
    }
}

impl TraceSpec {
    /// Evenly spaced identical pulses, first onset at `first_onset_s`.
    pub fn with_pulse_train(
        mut self,
        count: usize,
        first_onset_s: f64,
        spacing_s: f64,
        amplitude: f64,
        width_ms: f64,
    ) -> Self {
        self.gestures.extend((0..count).map(|i| GesturePulse {
            onset_s: first_onset_s + i as f64 * spacing_s,
            amplitude,
            width_ms,
            axis: Axis::Y,
        }));
        self
    }

    pub fn frame_count(&self) -> usize {
        // guard against 99.99999 * 10 style rounding just above an integer
        let exact = self.duration_s * self.rate_hz;
        (exact - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::InvalidSpec(m));
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return bad(format!("rate_hz must be > 0, got {}", self.rate_hz));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad(format!("duration_s must be >= 0, got {}", self.duration_s));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        for (i, g) in self.gestures.iter().enumerate() {
            if !(0.0..=self.duration_s).contains(&g.onset_s) {
                return bad(format!(
                    "gesture {i}: onset {} s outside [0, {}]",
                    g.onset_s, self.duration_s
                ));
            }
            if !(g.width_ms.is_finite() && g.width_ms > 0.0 && g.amplitude.is_finite()) {
                return bad(format!("gesture {i}: width and amplitude must be finite, width > 0"));
            }
        }
        Ok(())
    }
}

pub fn generate(spec: &TraceSpec) -> Result<Vec<MotionFrame>, TraceError> {
    spec.validate()?;
    let mut rng = SimRng::derive(spec.seed, 0x74_7261_6365); // "trace"
    let n = spec.frame_count();
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let t_s = i as f64 / spec.rate_hz;
        let mut accel = [0.0f64; 3];
        for g in &spec.gestures {
            accel[g.axis.index()] += g.value_at(t_s);
        }
        for a in accel.iter_mut() {
            let z = rng.normal();
            if spec.noise_sigma > 0.0 {
                *a += spec.noise_sigma * z;
            }
        }
        let t_ms = spec.start_ms + (i as f64 * 1000.0 / spec.rate_hz).round() as u64;
        frames.push(MotionFrame::new(
            t_ms,
            [accel[0] as f32, accel[1] as f32, accel[2] as f32],
            [0.0; 3],
        ));
    }
    Ok(frames)
}

pub fn write_csv_to<W: Write>(frames: &[MotionFrame], out: W) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_io)?;
    for f in frames {
        // f32 Display is the shortest string that parses back to the same bits
        let row = [
            f.timestamp_ms.to_string(),
            f.accel[0].to_string(),
            f.accel[1].to_string(),
            f.accel[2].to_string(),
            f.gyro[0].to_string(),
            f.gyro[1].to_string(),
            f.gyro[2].to_string(),
        ];
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(frames: &[MotionFrame], path: impl AsRef<Path>) -> Result<(), TraceError> {
    let file = std::fs::File::create(path)?;
    write_csv_to(frames, std::io::BufWriter::new(file))
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Vec<MotionFrame>, TraceError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut frames = Vec::new();
    let mut records = r.records();
    match records.next() {
        None => {
            return Err(TraceError::Parse {
                line: 1,
                message: format!("missing header, expected {CSV_HEADER}"),
            })
        }
        Some(rec) => {
            let rec = rec.map_err(|e| csv_parse(1, e))?;
            let got: Vec<&str> = rec.iter().collect();
            if got.join(",") != CSV_HEADER {
                return Err(TraceError::Parse {
                    line: 1,
                    message: format!("bad header {:?}, expected {CSV_HEADER}", got.join(",")),
                });
            }
        }
    }
    for rec in records {
        let rec = rec.map_err(|e| csv_parse(0, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 7 {
            return Err(TraceError::Parse {
                line,
                message: format!("expected 7 columns, found {}", rec.len()),
            });
        }
        let t_ms = rec[0].parse::<u64>().map_err(|e| TraceError::Parse {
            line,
            message: format!("t_ms {:?}: {e}", &rec[0]),
        })?;
        let mut v = [0f32; 6];
        for (k, slot) in v.iter_mut().enumerate() {
            let field = &rec[k + 1];
            *slot = field.parse::<f32>().map_err(|e| TraceError::Parse {
                line,
                message: format!("column {} {:?}: {e}", k + 2, field),
            })?;
        }
        frames.push(MotionFrame::new(t_ms, [v[0], v[1], v[2]], [v[3], v[4], v[5]]));
    }
    Ok(frames)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MotionFrame>, TraceError> {
    let file = std::fs::File::open(path)?;
    read_csv_from(std::io::BufReader::new(file))
}

fn csv_io(e: csv::Error) -> TraceError {
    TraceError::Io(std::io::Error::other(e))
}

fn csv_parse(fallback_line: u64, e: csv::Error) -> TraceError {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    TraceError::Parse {
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_and_spacing() {
        let frames = generate(&TraceSpec::default()).unwrap();
        assert_eq!(frames.len(), 1000);
        assert!(frames.windows(2).all(|w| w[1].timestamp_ms - w[0].timestamp_ms == 100));
        let spec = TraceSpec {
            duration_s: 0.25,
            ..Default::default()
        };
        assert_eq!(generate(&spec).unwrap().len(), 3);
    }

    #[test]
    fn quiet_trace_is_all_zero() {
        let frames = generate(&TraceSpec {
            duration_s: 5.0,
            ..Default::default()
        })
        .unwrap();
        assert!(frames.iter().all(|f| f.accel == [0.0; 3] && f.gyro == [0.0; 3]));
    }

    #[test]
    fn pulse_peak_on_center_sample() {
        // onset 0.9 s, width 200 ms: sample at 1.0 s sits on the crest
        let spec = TraceSpec {
            duration_s: 2.0,
            gestures: vec![GesturePulse {
                onset_s: 0.9,
                amplitude: 1.0,
                width_ms: 200.0,
                axis: Axis::Y,
            }],
            ..Default::default()
        };
        let frames = generate(&spec).unwrap();
        let peak = frames.iter().map(|f| f.accel[1]).fold(f32::MIN, f32::max);
        assert_eq!(peak, 1.0);
    }

    #[test]
    fn some_sample_exceeds_half_amplitude_at_any_phase() {
        // sweep the pulse onset across one sample period in 1 ms steps
        for phase_ms in 0..100 {
            let spec = TraceSpec {
                duration_s: 2.0,
                gestures: vec![GesturePulse {
                    onset_s: 0.5 + phase_ms as f64 / 1000.0,
                    amplitude: 1.0,
                    width_ms: 200.0,
                    axis: Axis::Y,
                }],
                ..Default::default()
            };
            let frames = generate(&spec).unwrap();
            let above = frames.iter().filter(|f| f.accel[1] > 0.5).count();
            assert!(above >= 1, "phase {phase_ms} ms");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = TraceSpec {
            duration_s: 10.0,
            noise_sigma: 0.1,
            seed: 5,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.bit_eq(y)));
        let c = generate(&TraceSpec { seed: 6, ..spec }).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| !x.bit_eq(y)));
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&TraceSpec {
            rate_hz: 0.0,
            ..Default::default()
        })
        .is_err());
        let spec = TraceSpec {
            duration_s: 1.0,
            ..Default::default()
        }
        .with_pulse_train(1, 2.0, 1.0, 1.0, 200.0);
        assert!(matches!(generate(&spec), Err(TraceError::InvalidSpec(_))));
    }

    #[test]
    fn csv_header_only() {
        let frames = read_csv_from(format!("{CSV_HEADER}\n").as_bytes()).unwrap();
        assert!(frames.is_empty());
    }

    #[test]
    fn csv_malformed_row_names_line() {
        let text = format!("{CSV_HEADER}\n0,0,0,0,0,0,0\n100,0,zero,0,0,0,0\n");
        match read_csv_from(text.as_bytes()) {
            Err(TraceError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("zero"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let short = format!("{CSV_HEADER}\n0,0,0\n");
        assert!(matches!(
            read_csv_from(short.as_bytes()),
            Err(TraceError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn csv_bad_header() {
        assert!(matches!(
            read_csv_from("time,ax\n".as_bytes()),
            Err(TraceError::Parse { line: 1, .. })
        ));
    }
}
