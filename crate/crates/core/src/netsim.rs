//! Deterministic link emulation and the transport contract.
//!
//! Virtual time is integer microseconds since session start. Each message
//! gets one delay sample from its link's [`LinkModel`]; the realized delay is
//! kept as ground truth so latency estimators can be checked exactly.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SimRng;

pub mod udp;

pub use udp::{Transport, UdpTransport};

/// Virtual or wall time in microseconds.
pub type Micros = i64;

/// Wall-clock origin of simulated sessions (UNIX ms).
pub const SIM_EPOCH_MS: u64 = 1_718_000_000_000;
const SIM_EPOCH_US: i64 = SIM_EPOCH_MS as i64 * 1000;

pub fn ms_to_us(ms: f64) -> Micros {
    (ms * 1000.0).round() as Micros
}

pub fn us_to_ms(us: Micros) -> f64 {
    us as f64 / 1000.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("endpoint {0:?} is closed")]
    EndpointClosed(Endpoint),
    #[error("invalid link model: {0}")]
    InvalidModel(String),
}

/// Shape of the per-message delay distribution around `base_delay_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayShape {
    /// Narrow mode slightly above the base delay plus a half-normal tail of
    /// early arrivals. Constants are calibrated so that after one 3-sigma
    /// outlier pass the sample mean and standard deviation come out at
    /// `base_delay_ms` and `jitter_sigma_ms`, with the 95th percentile about
    /// 0.76 sigma above the mean.
    #[default]
    EarlySkew,
    /// Normal around the base delay, truncated at +/- 3 sigma.
    Gaussian,
}

impl std::str::FromStr for DelayShape {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "early-skew" => Ok(DelayShape::EarlySkew),
            "gaussian" => Ok(DelayShape::Gaussian),
            _ => Err(NetError::InvalidModel(format!(
                "unknown delay shape {s:?} (early-skew | gaussian)"
            ))),
        }
    }
}

// EarlySkew, in units of jitter_sigma_ms relative to base_delay_ms
const SKEW_MODE_OFFSET: f64 = 0.52;
const SKEW_CORE_SPREAD: f64 = 0.16;
const SKEW_EARLY_WEIGHT: f64 = 0.34;
const SKEW_EARLY_SCALE: f64 = 2.52;

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    pub base_delay_ms: f64,
    pub jitter_sigma_ms: f64,
    pub min_delay_ms: Option<f64>,
    pub max_delay_ms: Option<f64>,
    pub loss_prob: f64,
    pub ordered: bool,
    pub seed: u64,
    pub shape: DelayShape,
}

impl Default for LinkModel {
    /// The measured Wi-Fi operating point: 70.4 ms, sigma 3.7, support
    /// [52.2, 82.2], lossless and ordered.
    fn default() -> Self {
        Self {
            base_delay_ms: 70.4,
            jitter_sigma_ms: 3.7,
            min_delay_ms: Some(52.2),
            max_delay_ms: Some(82.2),
            loss_prob: 0.0,
            ordered: true,
            seed: 42,
            shape: DelayShape::EarlySkew,
        }
    }
}

impl LinkModel {
    /// Constant delay, no jitter, no loss.
    pub fn fixed(delay_ms: f64) -> Self {
        Self {
            base_delay_ms: delay_ms,
            jitter_sigma_ms: 0.0,
            min_delay_ms: None,
            max_delay_ms: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidModel(m));
        if !(self.base_delay_ms.is_finite() && self.base_delay_ms >= 0.0) {
            return bad(format!("base_delay_ms must be >= 0, got {}", self.base_delay_ms));
        }
        if !(self.jitter_sigma_ms.is_finite() && self.jitter_sigma_ms >= 0.0) {
            return bad(format!("jitter_sigma_ms must be >= 0, got {}", self.jitter_sigma_ms));
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return bad(format!("loss_prob must be in [0, 1], got {}", self.loss_prob));
        }
        let lo = self.lower_bound();
        if let Some(hi) = self.max_delay_ms {
            if !(hi.is_finite() && hi >= lo) {
                return bad(format!("max_delay_ms {hi} below lower bound {lo}"));
            }
        }
        if self.base_delay_ms < lo || self.base_delay_ms > self.upper_bound() {
            return bad(format!(
                "base_delay_ms {} outside [{lo}, {}]",
                self.base_delay_ms,
                self.upper_bound()
            ));
        }
        Ok(())
    }

    fn lower_bound(&self) -> f64 {
        self.min_delay_ms.unwrap_or(0.0).max(0.0)
    }

    fn upper_bound(&self) -> f64 {
        self.max_delay_ms.unwrap_or(f64::INFINITY)
    }

    fn draw_unbounded(&self, rng: &mut SimRng) -> f64 {
        let (base, sigma) = (self.base_delay_ms, self.jitter_sigma_ms);
        match self.shape {
            DelayShape::EarlySkew => {
                let mode = base + SKEW_MODE_OFFSET * sigma;
                if rng.uniform() < SKEW_EARLY_WEIGHT {
                    mode - SKEW_EARLY_SCALE * sigma * rng.normal().abs()
                } else {
                    mode + SKEW_CORE_SPREAD * sigma * rng.normal()
                }
            }
            DelayShape::Gaussian => loop {
                let z = rng.normal();
                if z.abs() <= 3.0 {
                    break base + sigma * z;
                }
            },
        }
    }

    /// One realized delay in ms, inside `[max(0, min), max]`.
    pub fn sample_delay_ms(&self, rng: &mut SimRng) -> f64 {
        let (lo, hi) = (self.lower_bound(), self.upper_bound());
        for _ in 0..MAX_REJECTIONS {
            let d = self.draw_unbounded(rng);
            if d >= lo && d <= hi {
                return d;
            }
        }
        // bounds exclude essentially all of the mass
        self.base_delay_ms.clamp(lo, hi)
    }
}

/// Local clock of one device relative to true (virtual) time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockModel {
    /// Device clock minus true time, ms.
    pub offset_ms: f64,
    pub drift_ppm: f64,
}

impl ClockModel {
    /// Reading in ms relative to the simulation epoch, unquantized:
    /// `T + offset + drift * 1e-6 * T`.
    pub fn reading_ms(&self, true_us: Micros) -> f64 {
        let t_ms = us_to_ms(true_us);
        t_ms + self.offset_ms + self.drift_ppm * 1e-6 * t_ms
    }

    /// Device timestamp in UNIX microseconds, floored to the microsecond.
    pub fn timestamp_us(&self, true_us: Micros) -> Micros {
        let adjust_us = self.offset_ms * 1000.0 + self.drift_ppm * true_us as f64 / 1e6;
        SIM_EPOCH_US + true_us + adjust_us.floor() as Micros
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Controller,
    Host,
}

impl Endpoint {
    pub fn peer(self) -> Endpoint {
        match self {
            Endpoint::Controller => Endpoint::Host,
            Endpoint::Host => Endpoint::Controller,
        }
    }
}

/// Bit flip applied in transit to the n-th message sent on a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corruption {
    pub message_index: u64,
    pub byte: usize,
    pub bit: u8,
}

#[derive(Debug, Clone)]
struct SimLink {
    model: LinkModel,
    rng: SimRng,
    last_due: Micros,
    sent: u64,
    dropped: u64,
    corruptions: Vec<Corruption>,
}

impl SimLink {
    fn new(model: LinkModel, label: u64) -> Self {
        let rng = SimRng::derive(model.seed, label);
        Self {
            model,
            rng,
            last_due: Micros::MIN,
            sent: 0,
            dropped: 0,
            corruptions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub to: Endpoint,
    pub bytes: Vec<u8>,
    pub sent_at_us: Micros,
    pub delivered_at_us: Micros,
    /// Position of the message among those sent on its link.
    pub link_index: u64,
}

impl Delivery {
    /// Ground truth: true delivery time minus true send time.
    pub fn true_delay_ms(&self) -> f64 {
        us_to_ms(self.delivered_at_us - self.sent_at_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendOutcome {
    Queued { due_us: Micros },
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkStats {
    pub sent: u64,
    pub dropped: u64,
}

/// Two-endpoint emulated network: an uplink (controller to host) and a
/// downlink, each with its own model and RNG stream.
#[derive(Debug, Clone)]
pub struct SimNetwork {
    uplink: SimLink,
    downlink: SimLink,
    queue: BinaryHeap<Reverse<(Micros, u64)>>,
    in_flight: HashMap<u64, Delivery>,
    next_id: u64,
    closed: [bool; 2],
}

const UPLINK_STREAM: u64 = 0x7570; // "up"
const DOWNLINK_STREAM: u64 = 0x646f776e; // "down"

impl SimNetwork {
    pub fn new(uplink: LinkModel, downlink: LinkModel) -> Result<Self, NetError> {
        uplink.validate()?;
        downlink.validate()?;
        Ok(Self {
            uplink: SimLink::new(uplink, UPLINK_STREAM),
            downlink: SimLink::new(downlink, DOWNLINK_STREAM),
            queue: BinaryHeap::new(),
            in_flight: HashMap::new(),
            next_id: 0,
            closed: [false; 2],
        })
    }

    /// Same model in both directions, independent streams.
    pub fn symmetric(model: LinkModel) -> Result<Self, NetError> {
        Self::new(model.clone(), model)
    }

    fn link_mut(&mut self, from: Endpoint) -> &mut SimLink {
        match from {
            Endpoint::Controller => &mut self.uplink,
            Endpoint::Host => &mut self.downlink,
        }
    }

    fn slot(ep: Endpoint) -> usize {
        match ep {
            Endpoint::Controller => 0,
            Endpoint::Host => 1,
        }
    }

    pub fn corrupt(&mut self, from: Endpoint, corruption: Corruption) {
        self.link_mut(from).corruptions.push(corruption);
    }

    pub fn close(&mut self, ep: Endpoint) {
        self.closed[Self::slot(ep)] = true;
    }

    pub fn stats(&self, from: Endpoint) -> LinkStats {
        let l = match from {
            Endpoint::Controller => &self.uplink,
            Endpoint::Host => &self.downlink,
        };
        LinkStats {
            sent: l.sent,
            dropped: l.dropped,
        }
    }

    pub fn send(&mut self, from: Endpoint, now_us: Micros, bytes: &[u8]) -> Result<SendOutcome, NetError> {
        if self.closed[Self::slot(from)] {
            return Err(NetError::EndpointClosed(from));
        }
        if self.closed[Self::slot(from.peer())] {
            return Err(NetError::EndpointClosed(from.peer()));
        }
        let link = self.link_mut(from);
        let index = link.sent;
        link.sent += 1;
        let lost = link.rng.bernoulli(link.model.loss_prob);
        let delay_us = ms_to_us(link.model.sample_delay_ms(&mut link.rng));
        if lost {
            link.dropped += 1;
            return Ok(SendOutcome::Dropped);
        }
        let mut due = now_us + delay_us;
        if link.model.ordered {
            due = due.max(link.last_due);
        }
        link.last_due = link.last_due.max(due);
        let mut payload = bytes.to_vec();
        for c in link.corruptions.iter().filter(|c| c.message_index == index) {
            if let Some(b) = payload.get_mut(c.byte) {
                *b ^= 1 << (c.bit & 7);
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        self.in_flight.insert(
            id,
            Delivery {
                to: from.peer(),
                bytes: payload,
                sent_at_us: now_us,
                delivered_at_us: due,
                link_index: index,
            },
        );
        self.queue.push(Reverse((due, id)));
        Ok(SendOutcome::Queued { due_us: due })
    }

    pub fn next_due(&self) -> Option<Micros> {
        self.queue.peek().map(|Reverse((t, _))| *t)
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    /// Pops every message due at or before `up_to_us`, in delivery order
    /// (ties broken by send order).
    pub fn deliver_due(&mut self, up_to_us: Micros) -> Vec<Delivery> {
        let mut out = Vec::new();
        while let Some(&Reverse((t, id))) = self.queue.peek() {
            if t > up_to_us {
                break;
            }
            self.queue.pop();
            if let Some(d) = self.in_flight.remove(&id) {
                if !self.closed[Self::slot(d.to)] {
                    out.push(d);
                }
            }
        }
        out
    }
}
