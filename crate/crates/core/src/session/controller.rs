use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{LogRecord, SessionLog, Side};
use crate::codec::{self, CodecError, FrameHeader, MessageType, MotionFrame, SessionKey};
use crate::netsim::Micros;

/// A haptic transient the controller would play. We have no actuator, so
/// actuation is this log entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapticActuation {
    pub seq: u32,
    pub at_us: Micros,
    pub intensity: f32,
    pub sharpness: f32,
    pub duration_ms: u16,
}

/// Sending side: stamps and seals IMU samples, plays haptic triggers.
#[derive(Debug, Clone)]
pub struct Controller {
    key: SessionKey,
    next_seq: u32,
    log: SessionLog,
    seq_by_timestamp: HashMap<u64, u32>,
    index_by_seq: HashMap<u32, usize>,
    actuations: Vec<HapticActuation>,
}

impl Controller {
    pub fn new(session_id: u32, key: SessionKey) -> Self {
        Self {
            key,
            next_seq: 0,
            log: SessionLog::new(session_id, Side::Controller),
            seq_by_timestamp: HashMap::new(),
            index_by_seq: HashMap::new(),
            actuations: Vec::new(),
        }
    }

    pub fn session_id(&self) -> u32 {
        self.log.session_id
    }

    /// Stamps `sample` with the local clock and encodes it as the next
    /// motion frame.
    pub fn emit(&mut self, sample: &MotionFrame, now_us: Micros) -> Result<Vec<u8>, CodecError> {
        let seq = self.next_seq;
        let timestamp_ms = now_us.div_euclid(1000).max(0) as u64;
        let frame = MotionFrame {
            timestamp_ms,
            ..*sample
        };
        let bytes = codec::encode_motion(&frame, &self.key, &FrameHeader::motion(self.session_id(), seq))?;
        self.next_seq += 1;
        self.seq_by_timestamp.insert(timestamp_ms, seq);
        self.index_by_seq.insert(seq, self.log.records.len());
        self.log.records.push(LogRecord {
            seq,
            t_send_us: Some(now_us),
            ..Default::default()
        });
        self.log.counters.sent += 1;
        Ok(bytes)
    }

    /// Handles one inbound datagram. Undecodable input is counted and
    /// dropped.
    pub fn on_datagram(&mut self, bytes: &[u8], now_us: Micros) -> Option<HapticActuation> {
        let c = &mut self.log.counters;
        match codec::peek_header(bytes) {
            Ok(h) if h.session_id != self.log.session_id => {
                c.foreign_session += 1;
                return None;
            }
            Ok(h) if h.msg_type != MessageType::HapticTrigger as u8 => {
                c.malformed += 1;
                return None;
            }
            Ok(_) => {}
            Err(_) => {
                c.malformed += 1;
                return None;
            }
        }
        let trigger = match codec::decode_haptic(bytes, &self.key) {
            Ok(t) => t,
            Err(e) => {
                count_decode_error(&mut self.log.counters, &e);
                return None;
            }
        };
        let Some(&seq) = self.seq_by_timestamp.get(&trigger.ref_timestamp_ms) else {
            self.log.counters.malformed += 1;
            return None;
        };
        let idx = self.index_by_seq[&seq];
        let rec = &mut self.log.records[idx];
        if rec.haptic_recv_us.is_some() {
            self.log.counters.duplicates += 1;
            return None;
        }
        rec.haptic_recv_us = Some(now_us);
        self.log.counters.haptic_received += 1;
        let act = HapticActuation {
            seq,
            at_us: now_us,
            intensity: trigger.intensity,
            sharpness: trigger.sharpness,
            duration_ms: trigger.duration_ms,
        };
        self.actuations.push(act);
        Some(act)
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn actuations(&self) -> &[HapticActuation] {
        &self.actuations
    }

    pub fn into_parts(self) -> (SessionLog, Vec<HapticActuation>) {
        (self.log, self.actuations)
    }
}

pub(super) fn count_decode_error(c: &mut super::Counters, e: &CodecError) {
    match e {
        CodecError::AuthFailure { .. } => c.auth_failures += 1,
        CodecError::ChecksumMismatch { .. } => c.checksum_failures += 1,
        _ => c.malformed += 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::HapticTrigger;

    fn key() -> SessionKey {
        SessionKey::new(b"k".to_vec(), [0; 8])
    }

    #[test]
    fn sequences_and_timestamps() {
        let mut c = Controller::new(1, key());
        let s = MotionFrame::default();
        let a = c.emit(&s, 1_000_500).unwrap();
        let b = c.emit(&s, 1_100_500).unwrap();
        let (ha, fa) = codec::decode_motion_with_header(&a, &key()).unwrap();
        let (hb, fb) = codec::decode_motion_with_header(&b, &key()).unwrap();
        assert_eq!((ha.sequence, hb.sequence), (0, 1));
        assert_eq!((fa.timestamp_ms, fb.timestamp_ms), (1000, 1100));
        assert_eq!(c.log().counters.sent, 2);
        assert_eq!(c.log().records[1].t_send_us, Some(1_100_500));
    }

    #[test]
    fn haptic_is_matched_to_frame() {
        let mut c = Controller::new(1, key());
        c.emit(&MotionFrame::default(), 5_000_000).unwrap();
        c.emit(&MotionFrame::default(), 5_100_000).unwrap();
        let t = codec::encode_haptic(&HapticTrigger::for_frame(5_100), &key(), &FrameHeader::haptic(1, 0)).unwrap();
        let act = c.on_datagram(&t, 5_104_800).unwrap();
        assert_eq!(act.seq, 1);
        assert_eq!((act.intensity, act.sharpness, act.duration_ms), (1.0, 1.0, 20));
        assert_eq!(c.log().records[1].haptic_recv_us, Some(5_104_800));
        // replay is a duplicate
        assert!(c.on_datagram(&t, 5_200_000).is_none());
        assert_eq!(c.log().counters.duplicates, 1);
    }

    #[test]
    fn foreign_and_garbage_are_counted() {
        let mut c = Controller::new(1, key());
        let t = codec::encode_haptic(&HapticTrigger::default(), &key(), &FrameHeader::haptic(2, 0)).unwrap();
        assert!(c.on_datagram(&t, 0).is_none());
        assert!(c.on_datagram(b"junk", 0).is_none());
        assert_eq!(c.log().counters.foreign_session, 1);
        assert_eq!(c.log().counters.malformed, 1);
    }
}
