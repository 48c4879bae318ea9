//! Bit-exact wire format for motion frames and haptic triggers.
//!
//! Every message on the air is `header | envelope | payload`, little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "MLNK"
//!      4     1  version (1)
//!      5     1  msg_type (1 = motion, 2 = haptic trigger)
//!      6     4  session_id
//!     10     4  sequence (per session, per msg_type)
//!     14     2  payload_len
//!     16     2  flags (reserved, 0)
//!     18     1  env_version (1)
//!     19     1  cipher_id
//!     20    16  nonce = session_id | sequence | 8-byte session salt
//!     36    16  auth_tag
//!     52     -  payload (36 bytes motion, 18 bytes haptic)
//! ```
//!
//! Motion payload: timestamp u64 ms, a_x a_y a_z f32, w_x w_y w_z f32,
//! CRC-32 (IEEE, reflected) over the 32 preceding payload bytes stored as
//! raw `u32`. Haptic payload: ref timestamp u64, intensity f32, sharpness
//! f32, duration u16.

use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"MLNK";
pub const PROTOCOL_VERSION: u8 = 1;
pub const ENVELOPE_VERSION: u8 = 1;

pub const HEADER_LEN: usize = 18;
pub const ENVELOPE_LEN: usize = 34;
pub const MOTION_PAYLOAD_LEN: usize = 36;
pub const HAPTIC_PAYLOAD_LEN: usize = 18;
pub const MOTION_FRAME_LEN: usize = HEADER_LEN + ENVELOPE_LEN + MOTION_PAYLOAD_LEN;
pub const HAPTIC_FRAME_LEN: usize = HEADER_LEN + ENVELOPE_LEN + HAPTIC_PAYLOAD_LEN;

pub const NONCE_LEN: usize = 16;
pub const TAG_LEN: usize = 16;

const PAYLOAD_OFFSET: usize = HEADER_LEN + ENVELOPE_LEN;
const CHECKSUMMED_LEN: usize = 32;
const TAG_OFFSET: usize = HEADER_LEN + 2 + NONCE_LEN;

/// Default haptic pulse: full intensity, full sharpness, 20 ms.
pub const DEFAULT_INTENSITY: f32 = 1.0;
pub const DEFAULT_SHARPNESS: f32 = 1.0;
pub const DEFAULT_PULSE_MS: u16 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("non-finite sensor value in {field}")]
    NonFiniteSensorValue { field: &'static str },
    #[error("{field} = {value} outside [0, 1]")]
    OutOfRange { field: &'static str, value: f32 },
    #[error("frame too short: {len} bytes, need {need}")]
    TooShort { len: usize, need: usize },
    #[error("bad magic (seq {sequence})")]
    BadMagic { sequence: u32 },
    #[error("unsupported version {version} (seq {sequence})")]
    UnsupportedVersion { version: u8, sequence: u32 },
    #[error("unexpected message type {found} (seq {sequence})")]
    UnexpectedMessageType { found: u8, sequence: u32 },
    #[error("payload length {found} does not match message type (seq {sequence})")]
    LengthMismatch { found: u16, sequence: u32 },
    #[error("unsupported cipher id {cipher_id} (seq {sequence})")]
    UnsupportedCipher { cipher_id: u8, sequence: u32 },
    #[error("authentication failed (seq {sequence})")]
    AuthFailure { sequence: u32 },
    #[error("checksum mismatch (seq {sequence}): computed {computed:#010x}, stored {stored:#010x}")]
    ChecksumMismatch { sequence: u32, computed: u32, stored: u32 },
    #[error("header msg_type {0:?} cannot carry this payload")]
    WrongHeaderType(MessageType),
}

impl CodecError {
    /// Sequence number of the offending frame, when one was readable.
    pub fn sequence(&self) -> Option<u32> {
        match *self {
            CodecError::BadMagic { sequence }
            | CodecError::UnsupportedVersion { sequence, .. }
            | CodecError::UnexpectedMessageType { sequence, .. }
            | CodecError::LengthMismatch { sequence, .. }
            | CodecError::UnsupportedCipher { sequence, .. }
            | CodecError::AuthFailure { sequence }
            | CodecError::ChecksumMismatch { sequence, .. } => Some(sequence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum MessageType {
    Motion = 1,
    HapticTrigger = 2,
}

impl MessageType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(MessageType::Motion),
            2 => Some(MessageType::HapticTrigger),
            _ => None,
        }
    }

    pub fn payload_len(self) -> usize {
        match self {
            MessageType::Motion => MOTION_PAYLOAD_LEN,
            MessageType::HapticTrigger => HAPTIC_PAYLOAD_LEN,
        }
    }
}

/// One IMU sample as carried on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionFrame {
    pub timestamp_ms: u64,
    /// User acceleration, m/s^2.
    pub accel: [f32; 3],
    /// Angular velocity, rad/s.
    pub gyro: [f32; 3],
}

impl MotionFrame {
    pub fn new(timestamp_ms: u64, accel: [f32; 3], gyro: [f32; 3]) -> Self {
        Self {
            timestamp_ms,
            accel,
            gyro,
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        const NAMES: [&str; 6] = ["a_x", "a_y", "a_z", "w_x", "w_y", "w_z"];
        for (name, v) in NAMES.iter().zip(self.accel.iter().chain(self.gyro.iter())) {
            if !v.is_finite() {
                return Err(CodecError::NonFiniteSensorValue { field: name });
            }
        }
        Ok(())
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &MotionFrame) -> bool {
        self.timestamp_ms == other.timestamp_ms
            && self
                .accel
                .iter()
                .chain(self.gyro.iter())
                .zip(other.accel.iter().chain(other.gyro.iter()))
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Host to controller acknowledgment that fires a haptic transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapticTrigger {
    /// Timestamp of the motion frame that caused the trigger.
    pub ref_timestamp_ms: u64,
    pub intensity: f32,
    pub sharpness: f32,
    pub duration_ms: u16,
}

impl HapticTrigger {
    pub fn for_frame(ref_timestamp_ms: u64) -> Self {
        Self {
            ref_timestamp_ms,
            intensity: DEFAULT_INTENSITY,
            sharpness: DEFAULT_SHARPNESS,
            duration_ms: DEFAULT_PULSE_MS,
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        for (field, value) in [("intensity", self.intensity), ("sharpness", self.sharpness)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CodecError::OutOfRange { field, value });
            }
        }
        Ok(())
    }
}

impl Default for HapticTrigger {
    fn default() -> Self {
        Self::for_frame(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub msg_type: MessageType,
    pub session_id: u32,
    pub sequence: u32,
    pub flags: u16,
}

impl FrameHeader {
    pub fn motion(session_id: u32, sequence: u32) -> Self {
        Self {
            msg_type: MessageType::Motion,
            session_id,
            sequence,
            flags: 0,
        }
    }

    pub fn haptic(session_id: u32, sequence: u32) -> Self {
        Self {
            msg_type: MessageType::HapticTrigger,
            session_id,
            sequence,
            flags: 0,
        }
    }

    fn write(&self, out: &mut [u8]) {
        out[0..4].copy_from_slice(&MAGIC);
        out[4] = PROTOCOL_VERSION;
        out[5] = self.msg_type as u8;
        out[6..10].copy_from_slice(&self.session_id.to_le_bytes());
        out[10..14].copy_from_slice(&self.sequence.to_le_bytes());
        out[14..16].copy_from_slice(&(self.msg_type.payload_len() as u16).to_le_bytes());
        out[16..18].copy_from_slice(&self.flags.to_le_bytes());
    }
}

/// Raw header fields as found on the wire, before any validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawHeader {
    pub magic: [u8; 4],
    pub version: u8,
    pub msg_type: u8,
    pub session_id: u32,
    pub sequence: u32,
    pub payload_len: u16,
    pub flags: u16,
}

/// Reads header fields without authenticating them. Used for routing
/// (session filtering, message dispatch) and for `inspect`.
pub fn peek_header(bytes: &[u8]) -> Result<RawHeader, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::TooShort {
            len: bytes.len(),
            need: HEADER_LEN,
        });
    }
    Ok(RawHeader {
        magic: bytes[0..4].try_into().unwrap(),
        version: bytes[4],
        msg_type: bytes[5],
        session_id: le_u32(&bytes[6..10]),
        sequence: le_u32(&bytes[10..14]),
        payload_len: u16::from_le_bytes([bytes[14], bytes[15]]),
        flags: u16::from_le_bytes([bytes[16], bytes[17]]),
    })
}

/// Envelope fields as found on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Envelope {
    pub env_version: u8,
    pub cipher_id: u8,
    pub nonce: [u8; NONCE_LEN],
    pub auth_tag: [u8; TAG_LEN],
}

pub fn peek_envelope(bytes: &[u8]) -> Result<Envelope, CodecError> {
    if bytes.len() < PAYLOAD_OFFSET {
        return Err(CodecError::TooShort {
            len: bytes.len(),
            need: PAYLOAD_OFFSET,
        });
    }
    Ok(Envelope {
        env_version: bytes[HEADER_LEN],
        cipher_id: bytes[HEADER_LEN + 1],
        nonce: bytes[HEADER_LEN + 2..TAG_OFFSET].try_into().unwrap(),
        auth_tag: bytes[TAG_OFFSET..PAYLOAD_OFFSET].try_into().unwrap(),
    })
}

/// Envelope protection applied to header and payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CipherSuite {
    /// Plaintext payload, 16-byte tag = truncated HMAC-SHA256 under the
    /// session key over header, envelope preamble and payload.
    NullKeyed,
    /// Plaintext payload, zero tag, never verified. The CRC is the only
    /// integrity check. Used to exercise the checksum path.
    IntegrityOnly,
}

impl CipherSuite {
    pub fn id(self) -> u8 {
        match self {
            CipherSuite::NullKeyed => 0,
            CipherSuite::IntegrityOnly => 0xFF,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(CipherSuite::NullKeyed),
            0xFF => Some(CipherSuite::IntegrityOnly),
            _ => None,
        }
    }

    pub fn authenticates(self) -> bool {
        matches!(self, CipherSuite::NullKeyed)
    }
}

/// Out-of-band provisioned session secret plus the per-session nonce salt.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey {
    secret: Vec<u8>,
    salt: [u8; 8],
    suite: CipherSuite,
}

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionKey")
            .field("secret", &"<redacted>")
            .field("salt", &self.salt)
            .field("suite", &self.suite)
            .finish()
    }
}

impl SessionKey {
    pub fn new(secret: impl Into<Vec<u8>>, salt: [u8; 8]) -> Self {
        Self {
            secret: secret.into(),
            salt,
            suite: CipherSuite::NullKeyed,
        }
    }

    pub fn with_suite(mut self, suite: CipherSuite) -> Self {
        self.suite = suite;
        self
    }

    pub fn suite(&self) -> CipherSuite {
        self.suite
    }

    pub fn salt(&self) -> [u8; 8] {
        self.salt
    }

    fn nonce(&self, session_id: u32, sequence: u32) -> [u8; NONCE_LEN] {
        let mut n = [0u8; NONCE_LEN];
        n[0..4].copy_from_slice(&session_id.to_le_bytes());
        n[4..8].copy_from_slice(&sequence.to_le_bytes());
        n[8..16].copy_from_slice(&self.salt);
        n
    }

    fn tag(&self, frame: &[u8]) -> [u8; TAG_LEN] {
        let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(&self.secret).expect("HMAC accepts keys of any length");
        mac.update(&frame[..TAG_OFFSET]);
        mac.update(&frame[PAYLOAD_OFFSET..]);
        let full = mac.finalize().into_bytes();
        full[..TAG_LEN].try_into().unwrap()
    }

    fn seal(&self, frame: &mut [u8], header: &FrameHeader) {
        frame[HEADER_LEN] = ENVELOPE_VERSION;
        frame[HEADER_LEN + 1] = self.suite.id();
        frame[HEADER_LEN + 2..TAG_OFFSET].copy_from_slice(&self.nonce(header.session_id, header.sequence));
        let tag = match self.suite {
            CipherSuite::NullKeyed => self.tag(frame),
            CipherSuite::IntegrityOnly => [0u8; TAG_LEN],
        };
        frame[TAG_OFFSET..PAYLOAD_OFFSET].copy_from_slice(&tag);
    }

    fn open(&self, frame: &[u8], sequence: u32) -> Result<(), CodecError> {
        if self.suite.authenticates() {
            let expected = self.tag(frame);
            if !ct_eq(&expected, &frame[TAG_OFFSET..PAYLOAD_OFFSET]) {
                return Err(CodecError::AuthFailure { sequence });
            }
        }
        let env = peek_envelope(frame)?;
        if env.env_version != ENVELOPE_VERSION || env.cipher_id != self.suite.id() {
            return Err(CodecError::UnsupportedCipher {
                cipher_id: env.cipher_id,
                sequence,
            });
        }
        Ok(())
    }
}

fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().unwrap())
}

fn le_f32(b: &[u8]) -> f32 {
    f32::from_le_bytes(b.try_into().unwrap())
}

/// CRC-32 (IEEE 802.3, reflected, init and final XOR 0xFFFFFFFF).
pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

pub fn encode_motion(frame: &MotionFrame, key: &SessionKey, header: &FrameHeader) -> Result<Vec<u8>, CodecError> {
    if header.msg_type != MessageType::Motion {
        return Err(CodecError::WrongHeaderType(header.msg_type));
    }
    frame.validate()?;
    let mut out = vec![0u8; MOTION_FRAME_LEN];
    header.write(&mut out[..HEADER_LEN]);
    let p = &mut out[PAYLOAD_OFFSET..];
    p[0..8].copy_from_slice(&frame.timestamp_ms.to_le_bytes());
    for (i, v) in frame.accel.iter().chain(frame.gyro.iter()).enumerate() {
        p[8 + 4 * i..12 + 4 * i].copy_from_slice(&v.to_le_bytes());
    }
    let crc = crc32(&p[..CHECKSUMMED_LEN]);
    p[CHECKSUMMED_LEN..].copy_from_slice(&crc.to_le_bytes());
    key.seal(&mut out, header);
    Ok(out)
}

pub fn encode_haptic(trigger: &HapticTrigger, key: &SessionKey, header: &FrameHeader) -> Result<Vec<u8>, CodecError> {
    if header.msg_type != MessageType::HapticTrigger {
        return Err(CodecError::WrongHeaderType(header.msg_type));
    }
    trigger.validate()?;
    let mut out = vec![0u8; HAPTIC_FRAME_LEN];
    header.write(&mut out[..HEADER_LEN]);
    let p = &mut out[PAYLOAD_OFFSET..];
    p[0..8].copy_from_slice(&trigger.ref_timestamp_ms.to_le_bytes());
    p[8..12].copy_from_slice(&trigger.intensity.to_le_bytes());
    p[12..16].copy_from_slice(&trigger.sharpness.to_le_bytes());
    p[16..18].copy_from_slice(&trigger.duration_ms.to_le_bytes());
    key.seal(&mut out, header);
    Ok(out)
}

/// Length, authentication, then header semantics. Returns the frame slice
/// (trailing bytes beyond the declared frame are ignored).
fn open_frame<'a>(
    bytes: &'a [u8],
    key: &SessionKey,
    expected: MessageType,
) -> Result<(&'a [u8], FrameHeader), CodecError> {
    let need = PAYLOAD_OFFSET + expected.payload_len();
    if bytes.len() < need {
        return Err(CodecError::TooShort { len: bytes.len(), need });
    }
    let frame = &bytes[..need];
    let raw = peek_header(frame)?;
    let sequence = raw.sequence;
    key.open(frame, sequence)?;
    if raw.magic != MAGIC {
        return Err(CodecError::BadMagic { sequence });
    }
    if raw.version != PROTOCOL_VERSION {
        return Err(CodecError::UnsupportedVersion {
            version: raw.version,
            sequence,
        });
    }
    if raw.msg_type != expected as u8 {
        return Err(CodecError::UnexpectedMessageType {
            found: raw.msg_type,
            sequence,
        });
    }
    if raw.payload_len as usize != expected.payload_len() {
        return Err(CodecError::LengthMismatch {
            found: raw.payload_len,
            sequence,
        });
    }
    let header = FrameHeader {
        msg_type: expected,
        session_id: raw.session_id,
        sequence,
        flags: raw.flags,
    };
    Ok((frame, header))
}

pub fn decode_motion(bytes: &[u8], key: &SessionKey) -> Result<MotionFrame, CodecError> {
    decode_motion_with_header(bytes, key).map(|(_, f)| f)
}

pub fn decode_motion_with_header(bytes: &[u8], key: &SessionKey) -> Result<(FrameHeader, MotionFrame), CodecError> {
    let (frame, header) = open_frame(bytes, key, MessageType::Motion)?;
    let p = &frame[PAYLOAD_OFFSET..];
    let computed = crc32(&p[..CHECKSUMMED_LEN]);
    let stored = le_u32(&p[CHECKSUMMED_LEN..]);
    if computed != stored {
        return Err(CodecError::ChecksumMismatch {
            sequence: header.sequence,
            computed,
            stored,
        });
    }
    let f = |i: usize| le_f32(&p[8 + 4 * i..12 + 4 * i]);
    let motion = MotionFrame {
        timestamp_ms: u64::from_le_bytes(p[0..8].try_into().unwrap()),
        accel: [f(0), f(1), f(2)],
        gyro: [f(3), f(4), f(5)],
    };
    Ok((header, motion))
}

pub fn decode_haptic(bytes: &[u8], key: &SessionKey) -> Result<HapticTrigger, CodecError> {
    decode_haptic_with_header(bytes, key).map(|(_, t)| t)
}

pub fn decode_haptic_with_header(bytes: &[u8], key: &SessionKey) -> Result<(FrameHeader, HapticTrigger), CodecError> {
    let (frame, header) = open_frame(bytes, key, MessageType::HapticTrigger)?;
    let p = &frame[PAYLOAD_OFFSET..];
    let trigger = HapticTrigger {
        ref_timestamp_ms: u64::from_le_bytes(p[0..8].try_into().unwrap()),
        intensity: le_f32(&p[8..12]),
        sharpness: le_f32(&p[12..16]),
        duration_ms: u16::from_le_bytes([p[16], p[17]]),
    };
    trigger.validate()?;
    Ok((header, trigger))
}

/// Offered load of a fixed-size frame stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub rate_hz: f64,
    pub on_air_bytes: u32,
    pub bits_per_s: f64,
    pub kbit_per_s: f64,
    pub kibit_per_s: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("rate must be positive and finite, got {0}")]
pub struct InvalidRate(pub f64);

pub fn throughput_report(rate_hz: f64, on_air_bytes: u32) -> Result<Throughput, InvalidRate> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(InvalidRate(rate_hz));
    }
    let bits_per_s = rate_hz * on_air_bytes as f64 * 8.0;
    Ok(Throughput {
        rate_hz,
        on_air_bytes,
        bits_per_s,
        kbit_per_s: bits_per_s / 1000.0,
        kibit_per_s: bits_per_s / 1024.0,
    })
}

impl std::fmt::Display for Throughput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rate          {} Hz", self.rate_hz)?;
        writeln!(f, "frame size    {} bytes", self.on_air_bytes)?;
        writeln!(f, "throughput    {} bit/s", self.bits_per_s)?;
        writeln!(f, "              {} kbit/s", self.kbit_per_s)?;
        writeln!(f, "              {} kibit/s", self.kibit_per_s)?;
        if self.on_air_bytes == MOTION_FRAME_LEN as u32 && self.rate_hz == 10.0 {
            writeln!(
                f,
                "note: the commonly quoted \"7.0 kibit/s\" for 88-byte frames at 10 Hz is a \
                 rounding of 7.04 kbit/s (decimal); the binary-prefix value is 6.875 kibit/s."
            )?;
        }
        Ok(())
    }
}
