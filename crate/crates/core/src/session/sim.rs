//! Both session roles stepped by one deterministic virtual-time scheduler.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{merge_logs, Controller, HapticActuation, Host, SessionError, SessionLog};
use crate::codec::{self, MotionFrame, SessionKey};
use crate::gesture::{DetectorConfig, GestureEvent};
use crate::netsim::{ms_to_us, ClockModel, Corruption, Endpoint, LinkModel, Micros, SimNetwork};

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub session_id: u32,
    pub key: SessionKey,
    pub rate_hz: f64,
    /// Number of motion frames to send.
    pub frames: usize,
    /// IMU samples; the controller restamps them with its own clock.
    pub samples: Vec<MotionFrame>,
    pub uplink: LinkModel,
    pub downlink: LinkModel,
    pub controller_clock: ClockModel,
    pub host_clock: ClockModel,
    /// Time between a frame's arrival and its haptic reply leaving the host.
    pub host_processing_ms: f64,
    pub detector: DetectorConfig,
    /// In-transit bit flips on the uplink.
    pub uplink_faults: Vec<Corruption>,
}

impl SimConfig {
    /// 10 Hz, `link` in both directions (downlink seeded `seed + 1`),
    /// synchronized clocks, instant host.
    pub fn new(samples: Vec<MotionFrame>, link: LinkModel) -> Self {
        let mut downlink = link.clone();
        downlink.seed = link.seed.wrapping_add(1);
        Self {
            session_id: 0x4D4C_0001,
            key: SessionKey::new(b"motionlink-sim".to_vec(), link.seed.to_le_bytes()),
            rate_hz: super::DEFAULT_RATE_HZ,
            frames: samples.len(),
            samples,
            uplink: link,
            downlink,
            controller_clock: ClockModel::default(),
            host_clock: ClockModel::default(),
            host_processing_ms: 0.0,
            detector: DetectorConfig::default(),
            uplink_faults: Vec::new(),
        }
    }

    /// `ceil(duration * rate)` frames.
    pub fn frames_for_duration(duration_s: f64, rate_hz: f64) -> usize {
        (duration_s * rate_hz - 1e-9).ceil().max(0.0) as usize
    }

    fn tick_us(&self, k: usize) -> Micros {
        (k as f64 * 1e6 / self.rate_hz).round() as Micros
    }
}

/// True one-way delay of one delivered message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub seq: u32,
    pub true_delay_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub controller_log: SessionLog,
    pub host_log: SessionLog,
    pub merged: SessionLog,
    /// Uplink motion frames, in delivery order.
    pub uplink_truth: Vec<GroundTruth>,
    /// Downlink haptic triggers keyed by haptic sequence.
    pub downlink_truth: Vec<GroundTruth>,
    pub events: Vec<GestureEvent>,
    pub actuations: Vec<HapticActuation>,
    pub end_us: Micros,
}

impl SimOutcome {
    pub fn true_delay_ms(&self, seq: u32) -> Option<f64> {
        self.uplink_truth.iter().find(|g| g.seq == seq).map(|g| g.true_delay_ms)
    }
}

/// Runs a whole session in virtual time. `sink` receives every gesture the
/// host detects.
pub fn simulate(cfg: &SimConfig, mut sink: impl FnMut(&GestureEvent)) -> Result<SimOutcome, SessionError> {
    if !(cfg.rate_hz.is_finite() && cfg.rate_hz > 0.0) {
        return Err(SessionError::InvalidConfig(format!(
            "rate must be > 0, got {}",
            cfg.rate_hz
        )));
    }
    if !(cfg.host_processing_ms.is_finite() && cfg.host_processing_ms >= 0.0) {
        return Err(SessionError::InvalidConfig("host processing delay must be >= 0".into()));
    }
    if cfg.samples.len() < cfg.frames {
        return Err(SessionError::SourceExhausted {
            needed: cfg.frames,
            available: cfg.samples.len(),
        });
    }
    let mut net = SimNetwork::new(cfg.uplink.clone(), cfg.downlink.clone())?;
    for f in &cfg.uplink_faults {
        net.corrupt(Endpoint::Controller, *f);
    }
    let mut controller = Controller::new(cfg.session_id, cfg.key.clone());
    let mut host = Host::new(cfg.session_id, cfg.key.clone(), cfg.detector)?;
    let processing_us = ms_to_us(cfg.host_processing_ms);

    // host replies waiting for processing to finish: (due, order) -> (frame seq, bytes)
    let mut pending: BinaryHeap<Reverse<(Micros, u64)>> = BinaryHeap::new();
    let mut pending_msgs: Vec<Option<(u32, Vec<u8>)>> = Vec::new();

    let mut uplink_truth = Vec::new();
    let mut downlink_truth = Vec::new();
    let mut next_tick = 0usize;
    let mut now: Micros = 0;

    loop {
        let tick_at = (next_tick < cfg.frames).then(|| cfg.tick_us(next_tick));
        let net_at = net.next_due();
        let pend_at = pending.peek().map(|Reverse((t, _))| *t);
        let Some(t) = [net_at, pend_at, tick_at].into_iter().flatten().min() else {
            break;
        };
        now = t;

        if net_at == Some(t) {
            for d in net.deliver_due(t) {
                match d.to {
                    Endpoint::Host => {
                        if let Ok(h) = codec::peek_header(&d.bytes) {
                            uplink_truth.push(GroundTruth {
                                seq: h.sequence,
                                true_delay_ms: d.true_delay_ms(),
                            });
                        }
                        let out = host.on_datagram(&d.bytes, cfg.host_clock.timestamp_us(t));
                        if let Some(ev) = &out.event {
                            sink(ev);
                        }
                        if let Some(reply) = out.reply {
                            let order = pending_msgs.len() as u64;
                            pending_msgs.push(Some(reply));
                            pending.push(Reverse((t + processing_us, order)));
                        }
                    }
                    Endpoint::Controller => {
                        if let Ok(h) = codec::peek_header(&d.bytes) {
                            downlink_truth.push(GroundTruth {
                                seq: h.sequence,
                                true_delay_ms: d.true_delay_ms(),
                            });
                        }
                        controller.on_datagram(&d.bytes, cfg.controller_clock.timestamp_us(t));
                    }
                }
            }
            continue;
        }

        if pend_at == Some(t) {
            while let Some(&Reverse((due, order))) = pending.peek() {
                if due > t {
                    break;
                }
                pending.pop();
                if let Some((frame_seq, bytes)) = pending_msgs[order as usize].take() {
                    net.send(Endpoint::Host, t, &bytes)?;
                    host.record_haptic_sent(frame_seq, cfg.host_clock.timestamp_us(t));
                }
            }
            continue;
        }

        let sample = cfg.samples[next_tick];
        let bytes = controller.emit(&sample, cfg.controller_clock.timestamp_us(t))?;
        net.send(Endpoint::Controller, t, &bytes)?;
        next_tick += 1;
    }

    let (controller_log, actuations) = controller.into_parts();
    let (host_log, events) = host.into_parts();
    let merged = merge_logs(&controller_log, &host_log)?;
    Ok(SimOutcome {
        controller_log,
        host_log,
        merged,
        uplink_truth,
        downlink_truth,
        events,
        actuations,
        end_us: now,
    })
}
