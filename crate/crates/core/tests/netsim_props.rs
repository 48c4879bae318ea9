use motionlink::netsim::{ClockModel, Endpoint, LinkModel, Micros, SimNetwork};
use proptest::prelude::*;

fn run(model: LinkModel, n: usize) -> Vec<(Vec<u8>, Micros)> {
    let mut net = SimNetwork::symmetric(model).unwrap();
    for k in 0..n {
        net.send(Endpoint::Controller, k as Micros * 100_000, &(k as u32).to_le_bytes())
            .unwrap();
    }
    net.deliver_due(Micros::MAX)
        .into_iter()
        .map(|d| (d.bytes, d.delivered_at_us))
        .collect()
}

#[test]
fn same_seed_same_deliveries() {
    let m = LinkModel {
        loss_prob: 0.1,
        ..LinkModel::default()
    };
    assert_eq!(run(m.clone(), 500), run(m.clone(), 500));
    let other = LinkModel { seed: 43, ..m.clone() };
    assert_ne!(run(m, 500), run(other, 500));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ordered_links_deliver_in_send_order(seed in any::<u64>(), sigma in 0.0f64..40.0) {
        let m = LinkModel {
            seed,
            jitter_sigma_ms: sigma,
            min_delay_ms: None,
            max_delay_ms: None,
            ..LinkModel::default()
        };
        let d = run(m, 200);
        prop_assert_eq!(d.len(), 200);
        for (k, (bytes, _)) in d.iter().enumerate() {
            prop_assert_eq!(bytes.as_slice(), &(k as u32).to_le_bytes()[..]);
        }
        prop_assert!(d.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn loss_only_removes(seed in any::<u64>(), p in 0.0f64..1.0) {
        let m = LinkModel { seed, loss_prob: p, ..LinkModel::default() };
        let d = run(m, 100);
        let mut last = None;
        for (bytes, _) in &d {
            let k = u32::from_le_bytes(bytes[..4].try_into().unwrap());
            prop_assert!(last.is_none_or(|l| k > l));
            last = Some(k);
        }
    }

    #[test]
    fn clock_is_monotone(offset in -1e6f64..1e6, drift in -500.0f64..500.0, a in 0i64..10_000_000_000, step in 0i64..1_000_000) {
        let c = ClockModel { offset_ms: offset, drift_ppm: drift };
        prop_assert!(c.timestamp_us(a) <= c.timestamp_us(a + step));
    }
}
