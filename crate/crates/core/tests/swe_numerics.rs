//! Convergence, wave propagation and conservation of the shallow-water
//! scheme on planar and basin geometries.

use dtsim::kernels::swe::{self, SweKernel, SweParams, SweState, H, U};
use dtsim::studies;

const DEPTH: f32 = 100.0;

#[test]
fn second_order_self_convergence() {
    let (order, ratio) = studies::self_convergence_order().unwrap();
    println!("observed order {order:.3} (error ratio {ratio:.3})");
    assert!((order - 2.0).abs() <= 0.3, "order {order}");
}

#[test]
fn gravity_wave_speed_matches_theory() {
    let (speed, c) = studies::measured_wave_speed().unwrap();
    println!("crest speed {speed:.3} m/s, sqrt(g s0) = {c:.3} m/s");
    assert!((speed - c).abs() / c <= 0.05, "speed {speed} vs {c}");
}

#[test]
fn coastal_reflection_conserves_volume() {
    let (nx, ny) = (96, 32);
    let dx = 2000.0;
    let c = (9.80665 * DEPTH as f64).sqrt();
    let k = SweKernel::new(SweParams::planar(ny, dx, 0.3 * dx / c)).unwrap();
    // land for x >= 64 (and the wrap column at x = 0 closes the basin)
    let land: Vec<bool> = (0..nx * ny).map(|i| i % nx >= 64 || i % nx == 0).collect();
    let mut st = SweState::at_rest(nx, ny, &vec![-DEPTH; nx * ny], &land, 0.0);
    for (i, &dry) in land.iter().enumerate() {
        let x = (i % nx) as f64;
        if !dry {
            // plane wave travelling toward the coast
            let e = 0.5 * (-((x - 30.0) / 4.0).powi(2)).exp();
            st.fields[H][i] = e as f32;
            st.fields[U][i] = (e * c / DEPTH as f64) as f32;
        }
    }
    st.refresh_centers();
    let m0 = st.mass(k.params());
    let momentum = |s: &SweState| s.fields[U].iter().map(|&u| u as f64).sum::<f64>();
    let p0 = momentum(&st);
    let mut peak_seen = 0.0f32;
    let mut cur = st;
    for _ in 0..100 {
        cur = swe::swe_steps(&k, &cur, 10).unwrap();
        peak_seen = peak_seen.max(cur.fields[H][16 * nx + 63]);
    }
    let drift = (cur.mass(k.params()) - m0).abs() / m0;
    let p1 = momentum(&cur);
    println!("volume drift {drift:.3e}, coastal peak {peak_seen:.3}, momentum {p0:.3} -> {p1:.3}");
    assert!(drift <= 1e-4);
    // the crest piles up against the wall and travels back offshore
    assert!(peak_seen > 0.7, "coastal peak {peak_seen}");
    assert!(p1 < -0.5 * p0, "momentum {p0} -> {p1}");
}
