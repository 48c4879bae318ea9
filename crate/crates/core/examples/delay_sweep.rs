//! Pass rate of the default delay model against the reference tolerances
//! across seeds: `cargo run --release --example delay_sweep -- 400`.

use motionlink::latlab::{filtered_summary, LatencySeries};
use motionlink::netsim::{Endpoint, LinkModel, Micros, SimNetwork};

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut pass = 0;
    let (mut mean, mut std) = (0.0, 0.0);
    for seed in 0..seeds {
        let mut net = SimNetwork::symmetric(LinkModel {
            seed,
            ..LinkModel::default()
        })
        .unwrap();
        for k in 0..1000 {
            net.send(Endpoint::Controller, k * 100_000, &[0]).unwrap();
        }
        let v: Vec<f64> = net.deliver_due(Micros::MAX).iter().map(|d| d.true_delay_ms()).collect();
        let (s, _) = filtered_summary(&LatencySeries::from_values(v)).unwrap();
        mean += s.mean_ms;
        std += s.std_ms;
        if (s.mean_ms - 70.4).abs() <= 0.5 && (s.p95_ms - 73.2).abs() <= 1.5 && (s.std_ms - 3.7).abs() <= 0.5 {
            pass += 1;
        }
    }
    let n = seeds as f64;
    println!(
        "seeds {seeds}  pass {:.4}  avg mean {:.3}  avg std {:.3}",
        pass as f64 / n,
        mean / n,
        std / n
    );
}
