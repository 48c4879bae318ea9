use motionlink::latlab::{filter_3sigma, normalize_offset, spread, summarize, LatencySeries};
use motionlink::rng::SimRng;
use proptest::prelude::*;

fn clean(seed: u64) -> Vec<f64> {
    let mut rng = SimRng::new(seed);
    (0..1000).map(|_| 70.0 + 3.7 * rng.normal()).collect()
}

#[test]
fn five_injected_outliers_are_removed() {
    let base = clean(11);
    let mut dirty = base.clone();
    for i in [3, 200, 401, 650, 999] {
        dirty[i] = 570.0;
    }
    let (kept, removed) = filter_3sigma(&LatencySeries::from_values(dirty)).unwrap();
    assert_eq!(removed.len(), 5);
    assert!(removed.iter().all(|r| r.value_ms == 570.0));
    let clean_mean = summarize(&LatencySeries::from_values(base)).unwrap().mean_ms;
    assert!((summarize(&kept).unwrap().mean_ms - clean_mean).abs() <= 0.1);
}

proptest! {
    #[test]
    fn normalization_cancels_any_offset(
        values in prop::collection::vec(0.0f64..200.0, 1..300),
        offset in -1e5f64..1e5,
    ) {
        let a = normalize_offset(&LatencySeries::from_values(values.clone())).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + offset).collect();
        let b = normalize_offset(&LatencySeries::from_values(shifted)).unwrap();
        for (x, y) in a.values_ms.iter().zip(&b.values_ms) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn summary_ignores_order(mut values in prop::collection::vec(0.0f64..200.0, 1..300)) {
        let s1 = summarize(&LatencySeries::from_values(values.clone())).unwrap();
        values.reverse();
        let s2 = summarize(&LatencySeries::from_values(values.clone())).unwrap();
        prop_assert_eq!(s1.p95_ms, s2.p95_ms);
        prop_assert_eq!((s1.min_ms, s1.max_ms), (s2.min_ms, s2.max_ms));
        prop_assert!((s1.mean_ms - s2.mean_ms).abs() <= 1e-9);
        prop_assert!(s1.min_ms <= s1.p95_ms && s1.p95_ms <= s1.max_ms);
        let sp = spread(&LatencySeries::from_values(values)).unwrap();
        prop_assert!(sp.range_ms >= 0.0 && sp.p95_minus_median_ms >= 0.0);
    }
}
