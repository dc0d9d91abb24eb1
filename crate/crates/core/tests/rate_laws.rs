//! Virtual-time throughput against the closed-form rate ceilings.

use dtsim::netsim::LinkModel;
use dtsim::perfmodel::{rate_bounds, BoundsInput, CostModel};
use dtsim::studies::{self, one_d_rate, one_d_translation};

fn bounds(g: usize, c: f64, latency: f64, bandwidth: f64) -> dtsim::perfmodel::RateBounds {
    rate_bounds(BoundsInput {
        g: g as f64,
        r: 1.0,
        latency,
        c,
        payload_bytes: (g * 2 * 4) as f64,
        bandwidth,
        d: 1,
    })
}

#[test]
fn each_regime_reaches_its_ceiling() {
    let c = 1e-8;
    let g = 64;
    for (latency, bandwidth, regime) in [(1e-6, f64::INFINITY, "compute"), (1e-4, f64::INFINITY, "latency"), (1e-5, 1e8, "bandwidth")] {
        let b = bounds(g, c, latency, bandwidth);
        assert_eq!(b.limiter(), regime);
        let link = LinkModel::new(latency, bandwidth).unwrap();
        let got = one_d_rate(g, c, link, one_d_translation(g), 1500).unwrap();
        let err = (got - b.effective) / b.effective;
        println!("{regime}: {got:.4e} vs {:.4e} ({:+.2}%)", b.effective, 100.0 * err);
        assert!(err.abs() < 0.05, "{regime}: {got} vs {}", b.effective);
    }
}

#[test]
fn throughput_stays_under_the_ceiling() {
    let c = 1e-8;
    let g = 32;
    for latency in [0.0, 3e-6, 3e-5] {
        for bandwidth in [f64::INFINITY, 3e8] {
            let b = bounds(g, c, latency, bandwidth);
            let link = LinkModel::new(latency, bandwidth).unwrap();
            let got = one_d_rate(g, c, link, one_d_translation(g), 800).unwrap();
            // the fitted slope wobbles by a fraction of a step period
            assert!(got <= b.effective * 1.01, "lambda {latency} beta {bandwidth}: {got} > {}", b.effective);
        }
    }
}

#[test]
fn translation_hides_latency_that_static_pays() {
    let g = 128;
    let c = 3e-8;
    let lats = [0.0, 1e-6, 1e-5, 1e-4];
    assert!(lats.iter().all(|&l| (g * g) as f64 >= 4.0 * l / c));
    let rows = studies::latency_sweep(g, c, &lats, 1000).unwrap();
    let base = &rows[0];
    for row in &rows {
        let drift = (row.translation - base.translation).abs() / base.translation;
        let slowdown = base.static_rate / row.static_rate;
        let predicted = base.static_predicted / row.static_predicted;
        println!(
            "lambda {:.0e}: translation {:.4e} ({:+.3}%), static slowdown {slowdown:.3} vs {predicted:.3}",
            row.latency,
            row.translation,
            100.0 * drift
        );
        assert!(drift < 0.02);
        assert!((slowdown - predicted).abs() / predicted < 0.10);
    }
}

#[test]
fn weak_scaling_is_flat() {
    let link = LinkModel::new(2e-6, 5e9).unwrap();
    let cost = CostModel::quadratic_seconds(2e-9, studies::STUDY_CLOCK_HZ);
    let rates = studies::weak_scaling(16, &[2, 4, 6, 8], 120, link, cost).unwrap();
    let first = rates[0].1;
    for (workers, rate) in &rates {
        println!("{workers:3} workers: {rate:.6e}");
        assert!((rate - first).abs() / first < 0.01);
    }
}
