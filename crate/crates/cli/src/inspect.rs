use std::fmt::Write;
use std::path::Path;

use motionlink::codec::{self, CipherSuite, MessageType, SessionKey, HEADER_LEN, MOTION_FRAME_LEN};

use crate::CliError;

const PAYLOAD: usize = 52;

fn read_input(input: &str) -> Result<Vec<u8>, CliError> {
    let path = Path::new(input);
    if path.is_file() {
        let raw = std::fs::read(path).map_err(|e| crate::io_err(path, e))?;
        // hex text if it parses as such, raw bytes otherwise
        if let Ok(text) = std::str::from_utf8(&raw) {
            let compact: String = text.split_whitespace().collect();
            if let Ok(bytes) = hex::decode(&compact) {
                return Ok(bytes);
            }
        }
        return Ok(raw);
    }
    let compact: String = input.split_whitespace().collect();
    let compact = compact.trim_start_matches("0x");
    hex::decode(compact).map_err(|e| CliError::Usage(format!("not a file or hex string: {e}")))
}

fn row(out: &mut String, offset: usize, field: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{offset:>4}  {field:<14} {value}");
}

fn le_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Field dump of one frame, then the decoder's verdict under `secret`/`salt`
/// (suite taken from the frame's cipher id).
pub fn dump(bytes: &[u8], secret: &str, salt: [u8; 8]) -> (String, Result<(), codec::CodecError>) {
    let mut out = String::new();
    let _ = writeln!(out, "{} bytes", bytes.len());
    let _ = writeln!(out, "off   field          value");
    let header = match codec::peek_header(bytes) {
        Ok(h) => h,
        Err(e) => return (out, Err(e)),
    };
    let magic = String::from_utf8_lossy(&header.magic).into_owned();
    row(&mut out, 0, "magic", format!("{} {magic:?}", hex::encode(header.magic)));
    row(&mut out, 4, "version", header.version);
    let kind = match MessageType::from_u8(header.msg_type) {
        Some(MessageType::Motion) => "motion",
        Some(MessageType::HapticTrigger) => "haptic trigger",
        None => "unknown",
    };
    row(&mut out, 5, "msg_type", format!("{} ({kind})", header.msg_type));
    row(&mut out, 6, "session_id", format!("{:#010x}", header.session_id));
    row(&mut out, 10, "sequence", header.sequence);
    row(&mut out, 14, "payload_len", header.payload_len);
    row(&mut out, 16, "flags", format!("{:#06x}", header.flags));

    let env = match codec::peek_envelope(bytes) {
        Ok(e) => e,
        Err(e) => return (out, Err(e)),
    };
    let suite = CipherSuite::from_id(env.cipher_id);
    let suite_name = match suite {
        Some(CipherSuite::NullKeyed) => "keyed tag",
        Some(CipherSuite::IntegrityOnly) => "integrity only",
        None => "unknown",
    };
    row(&mut out, HEADER_LEN, "env_version", env.env_version);
    row(
        &mut out,
        HEADER_LEN + 1,
        "cipher_id",
        format!("{:#04x} ({suite_name})", env.cipher_id),
    );
    row(&mut out, HEADER_LEN + 2, "nonce", hex::encode(env.nonce));
    row(&mut out, HEADER_LEN + 18, "tag", hex::encode(env.auth_tag));

    let p = &bytes[PAYLOAD..];
    match MessageType::from_u8(header.msg_type) {
        Some(MessageType::Motion) if bytes.len() >= MOTION_FRAME_LEN => {
            row(&mut out, PAYLOAD, "timestamp_ms", le_u64(p, 0));
            for (i, name) in ["accel_x", "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z"]
                .iter()
                .enumerate()
            {
                row(&mut out, PAYLOAD + 8 + 4 * i, name, le_f32(p, 8 + 4 * i));
            }
            let stored = u32::from_le_bytes(p[32..36].try_into().unwrap());
            let computed = codec::crc32(&p[..32]);
            let verdict = if stored == computed { "ok" } else { "MISMATCH" };
            row(
                &mut out,
                PAYLOAD + 32,
                "checksum",
                format!("{stored:#010X} (computed {computed:#010X}, {verdict})"),
            );
        }
        Some(MessageType::HapticTrigger) if bytes.len() >= codec::HAPTIC_FRAME_LEN => {
            row(&mut out, PAYLOAD, "ref_ts_ms", le_u64(p, 0));
            row(&mut out, PAYLOAD + 8, "intensity", le_f32(p, 8));
            row(&mut out, PAYLOAD + 12, "sharpness", le_f32(p, 12));
            row(
                &mut out,
                PAYLOAD + 16,
                "duration_ms",
                u16::from_le_bytes([p[16], p[17]]),
            );
        }
        _ => {
            let _ = writeln!(out, "  payload        {}", hex::encode(p));
        }
    }

    let key = SessionKey::new(secret.as_bytes().to_vec(), salt).with_suite(suite.unwrap_or(CipherSuite::NullKeyed));
    let verdict = match MessageType::from_u8(header.msg_type) {
        Some(MessageType::HapticTrigger) => codec::decode_haptic(bytes, &key).map(drop),
        _ => codec::decode_motion(bytes, &key).map(drop),
    };
    (out, verdict)
}

pub fn run(input: &str, secret: &str, salt: [u8; 8]) -> Result<(), CliError> {
    let bytes = read_input(input)?;
    let (text, verdict) = dump(&bytes, secret, salt);
    print!("{text}");
    match verdict {
        Ok(()) => {
            println!("verdict: ok");
            Ok(())
        }
        Err(e) => {
            println!("verdict: {e}");
            Err(CliError::Protocol(e.to_string()))
        }
    }
}
