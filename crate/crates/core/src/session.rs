//! Controller and host roles, their event logs, and the drivers that run
//! them over the emulated link or over UDP.
//!
//! Both roles are plain state machines fed with `(bytes, local_time)`; the
//! drivers in [`sim`] and [`live`] own time and transport.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodecError;
use crate::gesture::GestureError;
use crate::netsim::udp::TransportError;
use crate::netsim::{us_to_ms, Micros, NetError};

mod controller;
mod host;
pub mod live;
pub mod sim;

pub use controller::{Controller, HapticActuation};
pub use host::{Host, HostOutput};

pub const DEFAULT_RATE_HZ: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Gesture(#[from] GestureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("IMU source exhausted: needed {needed} samples, have {available}")]
    SourceExhausted { needed: usize, available: usize },
    #[error("session mismatch: controller log {controller:#010x}, host log {host:#010x}")]
    SessionMismatch { controller: u32, host: u32 },
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("log line {line}: {message}")]
    LogFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Controller,
    Host,
    #[default]
    Merged,
}

/// One motion frame's life. Times are integer microseconds on the clock of
/// the side that observed them: send and haptic receipt on the controller,
/// receipt and haptic send on the host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LogRecord {
    pub seq: u32,
    pub t_send_us: Option<Micros>,
    pub t_recv_us: Option<Micros>,
    pub gesture: bool,
    pub haptic_sent_us: Option<Micros>,
    pub haptic_recv_us: Option<Micros>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Counters {
    pub sent: u64,
    pub received: u64,
    pub lost: u64,
    pub auth_failures: u64,
    pub checksum_failures: u64,
    /// Datagrams carrying another session id.
    pub foreign_session: u64,
    /// Other undecodable datagrams (bad length, magic, version, type).
    pub malformed: u64,
    pub duplicates: u64,
    pub haptic_sent: u64,
    pub haptic_received: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionLog {
    pub session_id: u32,
    pub side: Side,
    pub records: Vec<LogRecord>,
    pub counters: Counters,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    seq: u32,
    t_send_ms: Option<f64>,
    t_recv_ms: Option<f64>,
    gesture: bool,
    haptic_sent_ms: Option<f64>,
    haptic_recv_ms: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct SummaryBody {
    session_id: u32,
    side: Side,
    #[serde(flatten)]
    counters: Counters,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: SummaryBody,
}

fn to_ms(us: Option<Micros>) -> Option<f64> {
    us.map(us_to_ms)
}

fn from_ms(ms: Option<f64>) -> Option<Micros> {
    ms.map(|v| (v * 1000.0).round() as Micros)
}

impl SessionLog {
    pub fn new(session_id: u32, side: Side) -> Self {
        Self {
            session_id,
            side,
            ..Default::default()
        }
    }

    pub fn record(&self, seq: u32) -> Option<&LogRecord> {
        self.records.iter().find(|r| r.seq == seq)
    }

    /// JSON-Lines: one object per record, then `{"summary": {...}}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), SessionError> {
        for r in &self.records {
            let line = RecordLine {
                seq: r.seq,
                t_send_ms: to_ms(r.t_send_us),
                t_recv_ms: to_ms(r.t_recv_us),
                gesture: r.gesture,
                haptic_sent_ms: to_ms(r.haptic_sent_us),
                haptic_recv_ms: to_ms(r.haptic_recv_us),
            };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        let summary = SummaryLine {
            summary: SummaryBody {
                session_id: self.session_id,
                side: self.side,
                counters: self.counters,
            },
        };
        serde_json::to_writer(&mut out, &summary).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, SessionError> {
        let mut log = SessionLog::default();
        let mut saw_summary = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: serde_json::Error| SessionError::LogFormat {
                line: lineno,
                message: e.to_string(),
            };
            let value: serde_json::Value = serde_json::from_str(&line).map_err(bad)?;
            if value.get("summary").is_some() {
                let s: SummaryLine = serde_json::from_value(value).map_err(bad)?;
                log.session_id = s.summary.session_id;
                log.side = s.summary.side;
                log.counters = s.summary.counters;
                saw_summary = true;
            } else {
                if saw_summary {
                    return Err(SessionError::LogFormat {
                        line: lineno,
                        message: "record after summary".into(),
                    });
                }
                let r: RecordLine = serde_json::from_value(value).map_err(bad)?;
                log.records.push(LogRecord {
                    seq: r.seq,
                    t_send_us: from_ms(r.t_send_ms),
                    t_recv_us: from_ms(r.t_recv_ms),
                    gesture: r.gesture,
                    haptic_sent_us: from_ms(r.haptic_sent_ms),
                    haptic_recv_us: from_ms(r.haptic_recv_ms),
                });
            }
        }
        Ok(log)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SessionError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }
}

/// Joins the controller's and host's views by sequence number. Every sent
/// sequence yields one record; sequences the host never saw are lost.
pub fn merge_logs(controller: &SessionLog, host: &SessionLog) -> Result<SessionLog, SessionError> {
    if controller.session_id != host.session_id {
        return Err(SessionError::SessionMismatch {
            controller: controller.session_id,
            host: host.session_id,
        });
    }
    let host_by_seq: BTreeMap<u32, &LogRecord> = host.records.iter().map(|r| (r.seq, r)).collect();
    let mut sent: Vec<&LogRecord> = controller.records.iter().collect();
    sent.sort_by_key(|r| r.seq);

    let mut merged = SessionLog::new(controller.session_id, Side::Merged);
    let mut received = 0u64;
    for c in sent {
        let mut rec = LogRecord {
            seq: c.seq,
            t_send_us: c.t_send_us,
            haptic_recv_us: c.haptic_recv_us,
            ..Default::default()
        };
        if let Some(h) = host_by_seq.get(&c.seq) {
            rec.t_recv_us = h.t_recv_us;
            rec.gesture = h.gesture;
            rec.haptic_sent_us = h.haptic_sent_us;
            received += 1;
        }
        merged.records.push(rec);
    }
    let sent = controller.counters.sent.max(merged.records.len() as u64);
    merged.counters = Counters {
        sent,
        received,
        lost: sent - received,
        auth_failures: host.counters.auth_failures + controller.counters.auth_failures,
        checksum_failures: host.counters.checksum_failures + controller.counters.checksum_failures,
        foreign_session: host.counters.foreign_session + controller.counters.foreign_session,
        malformed: host.counters.malformed + controller.counters.malformed,
        duplicates: host.counters.duplicates + controller.counters.duplicates,
        haptic_sent: host.counters.haptic_sent,
        haptic_received: controller.counters.haptic_received,
    };
    Ok(merged)
}
