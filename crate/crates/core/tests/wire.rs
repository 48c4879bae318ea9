use motionlink::codec::{
    self, throughput_report, CipherSuite, CodecError, FrameHeader, HapticTrigger, MotionFrame, SessionKey,
    HAPTIC_FRAME_LEN, MOTION_FRAME_LEN,
};
use proptest::prelude::*;

const SESSION: u32 = 0x4D4C_0001;

fn fixture_key() -> SessionKey {
    SessionKey::new(b"motionlink-fixture".to_vec(), [1, 2, 3, 4, 5, 6, 7, 8])
}

fn fixture(name: &str) -> Vec<u8> {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    hex::decode(std::fs::read_to_string(path).unwrap().trim()).unwrap()
}

/// Bitwise reflected CRC-32, polynomial 0xEDB88320.
fn crc32_oracle(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 == 1 {
                (crc >> 1) ^ 0xEDB8_8320
            } else {
                crc >> 1
            };
        }
    }
    !crc
}

#[test]
fn crc_matches_bitwise_oracle() {
    assert_eq!(crc32_oracle(&[0u8; 32]), 0x190A_55AD);
    assert_eq!(codec::crc32(&[0u8; 32]), 0x190A_55AD);
    assert_eq!(codec::crc32(b"123456789"), 0xCBF4_3926);
    let data: Vec<u8> = (0..=255u8).cycle().take(1000).collect();
    for n in [0, 1, 31, 32, 33, 999] {
        assert_eq!(codec::crc32(&data[..n]), crc32_oracle(&data[..n]));
    }
}

#[test]
fn golden_zero_frame() {
    let bytes = codec::encode_motion(
        &MotionFrame::default(),
        &fixture_key(),
        &FrameHeader::motion(SESSION, 0),
    )
    .unwrap();
    assert_eq!(bytes, fixture("zero_motion.hex"));
    assert_eq!(&bytes[84..], &0x190A_55ADu32.to_le_bytes());

    let k = fixture_key().with_suite(CipherSuite::IntegrityOnly);
    let bytes = codec::encode_motion(&MotionFrame::default(), &k, &FrameHeader::motion(SESSION, 0)).unwrap();
    assert_eq!(bytes, fixture("zero_motion_integrity.hex"));
}

#[test]
fn golden_sample_frame() {
    let f = MotionFrame::new(1_718_000_000_000, [0.1, 0.6, -0.2], [0.0; 3]);
    let bytes = codec::encode_motion(&f, &fixture_key(), &FrameHeader::motion(SESSION, 7)).unwrap();
    assert_eq!(bytes, fixture("sample_motion.hex"));
    let back = codec::decode_motion(&bytes, &fixture_key()).unwrap();
    assert!(back.bit_eq(&f));
}

#[test]
fn golden_haptic_frame() {
    let t = HapticTrigger::for_frame(1_718_000_000_000);
    let bytes = codec::encode_haptic(&t, &fixture_key(), &FrameHeader::haptic(SESSION, 0)).unwrap();
    assert_eq!(bytes.len(), HAPTIC_FRAME_LEN);
    assert_eq!(bytes, fixture("default_haptic.hex"));
    assert_eq!(codec::decode_haptic(&bytes, &fixture_key()).unwrap(), t);
}

#[test]
fn every_payload_bit_flip_is_a_checksum_mismatch() {
    let k = fixture_key().with_suite(CipherSuite::IntegrityOnly);
    let good = fixture("zero_motion_integrity.hex");
    for bit in 0..256 {
        let mut b = good.clone();
        b[52 + bit / 8] ^= 1 << (bit % 8);
        match codec::decode_motion(&b, &k) {
            Err(CodecError::ChecksumMismatch { sequence: 0, .. }) => {}
            other => panic!("bit {bit}: {other:?}"),
        }
    }
}

#[test]
fn every_authenticated_bit_flip_is_an_auth_failure() {
    let k = fixture_key();
    let good = fixture("sample_motion.hex");
    for bit in 0..MOTION_FRAME_LEN * 8 {
        let mut b = good.clone();
        b[bit / 8] ^= 1 << (bit % 8);
        let r = codec::decode_motion(&b, &k);
        assert!(matches!(r, Err(CodecError::AuthFailure { .. })), "bit {bit}: {r:?}");
    }
}

#[test]
fn wrong_key_and_short_input() {
    let good = fixture("sample_motion.hex");
    let other = SessionKey::new(b"other".to_vec(), [1, 2, 3, 4, 5, 6, 7, 8]);
    assert!(matches!(
        codec::decode_motion(&good, &other),
        Err(CodecError::AuthFailure { sequence: 7 })
    ));
    assert!(matches!(
        codec::decode_motion(&good[..87], &fixture_key()),
        Err(CodecError::TooShort { .. })
    ));
}

#[test]
fn non_finite_values_are_rejected_at_encode() {
    for bad in [f32::NAN, f32::INFINITY, f32::NEG_INFINITY] {
        let f = MotionFrame::new(0, [0.0, bad, 0.0], [0.0; 3]);
        assert!(matches!(
            codec::encode_motion(&f, &fixture_key(), &FrameHeader::motion(1, 0)),
            Err(CodecError::NonFiniteSensorValue { .. })
        ));
    }
}

#[test]
fn throughput_arithmetic() {
    let t = throughput_report(10.0, 88).unwrap();
    assert_eq!(t.bits_per_s, 7040.0);
    assert_eq!(t.kbit_per_s, 7.04);
    assert_eq!(t.kibit_per_s, 6.875);
    assert!(t.to_string().contains("7.0 kibit/s"));
    assert!(throughput_report(0.0, 88).is_err());
}

fn finite() -> impl Strategy<Value = f32> {
    prop::num::f32::NORMAL | prop::num::f32::SUBNORMAL | prop::num::f32::ZERO
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn motion_roundtrip(
        ts in any::<u64>(),
        v in prop::array::uniform6(finite()),
        session in any::<u32>(),
        seq in any::<u32>(),
        salt in any::<[u8; 8]>(),
    ) {
        let key = SessionKey::new(b"prop".to_vec(), salt);
        let f = MotionFrame::new(ts, [v[0], v[1], v[2]], [v[3], v[4], v[5]]);
        let bytes = codec::encode_motion(&f, &key, &FrameHeader::motion(session, seq)).unwrap();
        prop_assert_eq!(bytes.len(), MOTION_FRAME_LEN);
        let (h, back) = codec::decode_motion_with_header(&bytes, &key).unwrap();
        prop_assert!(back.bit_eq(&f));
        prop_assert_eq!(h, FrameHeader::motion(session, seq));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn haptic_roundtrip(
        ts in any::<u64>(),
        intensity in 0.0f32..=1.0,
        sharpness in 0.0f32..=1.0,
        duration in any::<u16>(),
        seq in any::<u32>(),
    ) {
        let t = HapticTrigger { ref_timestamp_ms: ts, intensity, sharpness, duration_ms: duration };
        let bytes = codec::encode_haptic(&t, &fixture_key(), &FrameHeader::haptic(SESSION, seq)).unwrap();
        prop_assert_eq!(bytes.len(), HAPTIC_FRAME_LEN);
        prop_assert_eq!(codec::decode_haptic(&bytes, &fixture_key()).unwrap(), t);
    }
}
