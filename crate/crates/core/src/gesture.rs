//! Threshold gesture detection on one acceleration axis.
//!
//! A gesture fires when the selected axis strictly exceeds `tau` on a rising
//! edge (previous sample at or below `tau`) and at least `refractory_ms` have
//! passed since the last fired gesture.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::MotionFrame;

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_REFRACTORY_MS: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Axis {
    X,
    #[default]
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl FromStr for Axis {
    type Err = GestureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(GestureError::InvalidConfig(format!("unknown axis {s:?}"))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GestureError {
    #[error("timestamp went backwards: {previous} ms then {current} ms")]
    OutOfOrderTimestamp { previous: u64, current: u64 },
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Threshold in m/s^2.
    pub tau: f64,
    pub refractory_ms: u64,
    pub axis: Axis,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            refractory_ms: DEFAULT_REFRACTORY_MS,
            axis: Axis::Y,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), GestureError> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(GestureError::InvalidConfig(format!(
                "tau must be > 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub frame_timestamp_ms: u64,
    pub peak_value: f64,
    /// Running count of emitted events, starting at 0.
    pub sequence: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectorState {
    last_timestamp_ms: Option<u64>,
    prev_above: bool,
    last_event_ms: Option<u64>,
    emitted: u32,
}

impl DetectorState {
    pub fn events_emitted(&self) -> u32 {
        self.emitted
    }
}

/// One detection step as a pure function of the previous state.
pub fn detect(
    frame: &MotionFrame,
    config: &DetectorConfig,
    state: DetectorState,
) -> Result<(Option<GestureEvent>, DetectorState), GestureError> {
    let ts = frame.timestamp_ms;
    if let Some(prev) = state.last_timestamp_ms {
        if ts < prev {
            return Err(GestureError::OutOfOrderTimestamp {
                previous: prev,
                current: ts,
            });
        }
    }
    let value = frame.accel[config.axis.index()] as f64;
    let above = value > config.tau;
    let rested = state.last_event_ms.is_none_or(|last| ts - last >= config.refractory_ms);

    let mut next = DetectorState {
        last_timestamp_ms: Some(ts),
        prev_above: above,
        ..state
    };
    let event = if above && !state.prev_above && rested {
        let ev = GestureEvent {
            frame_timestamp_ms: ts,
            peak_value: value,
            sequence: state.emitted,
        };
        next.last_event_ms = Some(ts);
        next.emitted += 1;
        Some(ev)
    } else {
        None
    };
    Ok((event, next))
}

/// Stateful wrapper used by the host session.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    state: DetectorState,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self, GestureError> {
        config.validate()?;
        Ok(Self {
            config,
            state: DetectorState::default(),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn state(&self) -> DetectorState {
        self.state
    }

    pub fn push(&mut self, frame: &MotionFrame) -> Result<Option<GestureEvent>, GestureError> {
        let (event, next) = detect(frame, &self.config, self.state)?;
        self.state = next;
        Ok(event)
    }
}

pub fn detect_stream(frames: &[MotionFrame], config: &DetectorConfig) -> Result<Vec<GestureEvent>, GestureError> {
    let mut detector = Detector::new(*config)?;
    let mut events = Vec::new();
    for f in frames {
        events.extend(detector.push(f)?);
    }
    Ok(events)
}
