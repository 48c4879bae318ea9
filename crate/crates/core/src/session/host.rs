use std::collections::HashMap;

use super::controller::count_decode_error;
use super::{LogRecord, SessionError, SessionLog, Side};
use crate::codec::{self, FrameHeader, HapticTrigger, MessageType, SessionKey};
use crate::gesture::{Detector, DetectorConfig, GestureError, GestureEvent};
use crate::netsim::Micros;

/// What the host wants done after one datagram.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HostOutput {
    /// Gesture to hand to the action sink.
    pub event: Option<GestureEvent>,
    /// Encoded haptic trigger and the motion sequence it acknowledges.
    pub reply: Option<(u32, Vec<u8>)>,
}

/// Receiving side: validates frames, runs the detector, answers each
/// gesture with exactly one haptic trigger.
#[derive(Debug, Clone)]
pub struct Host {
    key: SessionKey,
    detector: Detector,
    next_haptic_seq: u32,
    log: SessionLog,
    index_by_seq: HashMap<u32, usize>,
    events: Vec<GestureEvent>,
    out_of_order: u64,
}

impl Host {
    pub fn new(session_id: u32, key: SessionKey, detector: DetectorConfig) -> Result<Self, SessionError> {
        Ok(Self {
            key,
            detector: Detector::new(detector)?,
            next_haptic_seq: 0,
            log: SessionLog::new(session_id, Side::Host),
            index_by_seq: HashMap::new(),
            events: Vec::new(),
            out_of_order: 0,
        })
    }

    pub fn session_id(&self) -> u32 {
        self.log.session_id
    }

    pub fn on_datagram(&mut self, bytes: &[u8], now_us: Micros) -> HostOutput {
        let c = &mut self.log.counters;
        match codec::peek_header(bytes) {
            Ok(h) if h.session_id != self.log.session_id => {
                c.foreign_session += 1;
                return HostOutput::default();
            }
            Ok(h) if h.msg_type != MessageType::Motion as u8 => {
                c.malformed += 1;
                return HostOutput::default();
            }
            Ok(_) => {}
            Err(_) => {
                c.malformed += 1;
                return HostOutput::default();
            }
        }
        let (header, frame) = match codec::decode_motion_with_header(bytes, &self.key) {
            Ok(v) => v,
            Err(e) => {
                count_decode_error(&mut self.log.counters, &e);
                return HostOutput::default();
            }
        };
        if self.index_by_seq.contains_key(&header.sequence) {
            self.log.counters.duplicates += 1;
            return HostOutput::default();
        }
        self.log.counters.received += 1;
        self.index_by_seq.insert(header.sequence, self.log.records.len());
        let mut rec = LogRecord {
            seq: header.sequence,
            t_send_us: Some(frame.timestamp_ms as Micros * 1000),
            t_recv_us: Some(now_us),
            ..Default::default()
        };

        let event = match self.detector.push(&frame) {
            Ok(ev) => ev,
            // late frame on an unordered transport: logged, not classified
            Err(GestureError::OutOfOrderTimestamp { .. }) => {
                self.out_of_order += 1;
                None
            }
            Err(_) => None,
        };
        let mut out = HostOutput::default();
        if let Some(ev) = event {
            rec.gesture = true;
            let trigger = HapticTrigger::for_frame(frame.timestamp_ms);
            let hdr = FrameHeader::haptic(self.session_id(), self.next_haptic_seq);
            let bytes = codec::encode_haptic(&trigger, &self.key, &hdr).expect("default trigger is in range");
            self.next_haptic_seq += 1;
            self.events.push(ev);
            out.event = Some(ev);
            out.reply = Some((header.sequence, bytes));
        }
        self.log.records.push(rec);
        out
    }

    /// Records that the reply for `frame_seq` left the host at `now_us`.
    pub fn record_haptic_sent(&mut self, frame_seq: u32, now_us: Micros) {
        if let Some(&i) = self.index_by_seq.get(&frame_seq) {
            self.log.records[i].haptic_sent_us = Some(now_us);
            self.log.counters.haptic_sent += 1;
        }
    }

    pub fn events(&self) -> &[GestureEvent] {
        &self.events
    }

    pub fn out_of_order(&self) -> u64 {
        self.out_of_order
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn into_parts(self) -> (SessionLog, Vec<GestureEvent>) {
        (self.log, self.events)
    }
}
