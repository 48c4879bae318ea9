use motionlink::codec::MotionFrame;
use motionlink::gesture::{detect, detect_stream, DetectorConfig, DetectorState};
use motionlink::trace::{generate, TraceSpec};
use proptest::prelude::*;

fn stream(values: &[f32], step_ms: u64) -> Vec<MotionFrame> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| MotionFrame::new(i as u64 * step_ms, [0.0, v, 0.0], [0.0; 3]))
        .collect()
}

#[test]
fn twenty_scripted_gestures() {
    let spec = TraceSpec {
        duration_s: 105.0,
        noise_sigma: 0.1,
        seed: 7,
        ..Default::default()
    }
    .with_pulse_train(20, 2.0, 5.0, 1.0, 200.0);
    let events = detect_stream(&generate(&spec).unwrap(), &DetectorConfig::default()).unwrap();
    assert_eq!(events.len(), 20);

    let noise = TraceSpec {
        gestures: Vec::new(),
        ..spec
    };
    assert!(detect_stream(&generate(&noise).unwrap(), &DetectorConfig::default())
        .unwrap()
        .is_empty());
}

proptest! {
    #[test]
    fn events_respect_refractory_and_threshold(
        values in prop::collection::vec(-1.5f32..1.5, 0..400),
        step in 1u64..200,
    ) {
        let cfg = DetectorConfig::default();
        let frames = stream(&values, step);
        let events = detect_stream(&frames, &cfg).unwrap();
        for w in events.windows(2) {
            prop_assert!(w[1].frame_timestamp_ms - w[0].frame_timestamp_ms >= cfg.refractory_ms);
        }
        for (i, e) in events.iter().enumerate() {
            prop_assert!(e.peak_value > cfg.tau);
            prop_assert_eq!(e.sequence as usize, i);
        }
    }

    #[test]
    fn pure_fold_equals_stateful_detector(values in prop::collection::vec(-1.5f32..1.5, 0..200)) {
        let cfg = DetectorConfig::default();
        let frames = stream(&values, 100);
        let mut state = DetectorState::default();
        let mut folded = Vec::new();
        for f in &frames {
            let (ev, next) = detect(f, &cfg, state).unwrap();
            folded.extend(ev);
            state = next;
        }
        prop_assert_eq!(folded, detect_stream(&frames, &cfg).unwrap());
    }
}
