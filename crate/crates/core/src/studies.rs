//! Reproducible experiments shared by the integration tests, the acceptance
//! suite and the CLI: throughput sweeps under virtual time and numerical
//! studies of the shallow-water scheme.

use crate::engine::{run, EngineError, Method, RunConfig};
use crate::grid::TorusGeometry;
use crate::kernels::swe::{self, SweKernel, SweParams, SweState, GRAVITY, H, U, V};
use crate::kernels::{Kernel, KernelError, LinearStencilKernel, Neighborhood, Scalar};
use crate::netsim::LinkModel;
use crate::perfmodel::{rate_bounds, BoundsInput, CostModel, RateBounds};

/// Radius-1 kernel that copies the centre point. Throughput experiments
/// take their timing from the cost model, so the arithmetic only has to be
/// cheap and exact.
#[derive(Debug, Clone, Copy, Default)]
pub struct Transport;

impl Kernel for Transport {
    fn name(&self) -> &str {
        "transport"
    }
    fn field_count(&self) -> usize {
        1
    }
    fn update_point<S: Scalar, N: Neighborhood<S>>(&self, _s: usize, nb: &N, _x: usize, _y: usize, out: &mut [S]) {
        out[0] = nb.at(0, 0, 0);
    }
}

/// Clock used to turn the seconds-per-point constants below into cycles.
pub const STUDY_CLOCK_HZ: f64 = 1e9;
/// Workers in the ring of the one-dimensional experiments.
pub const RING_WORKERS: usize = 4;

/// Grid of the three-regime experiment.
pub const RATE_GRID_SIDES: [usize; 3] = [32, 64, 128];
pub const RATE_GRID_LATENCIES: [f64; 3] = [1e-6, 1e-5, 1e-4];
pub const RATE_GRID_BANDWIDTHS: [f64; 3] = [f64::INFINITY, 1e9, 1e8];
/// Seconds per point of a one-dimensional sweep.
pub const RATE_GRID_C: f64 = 1e-8;

/// A ring of [`RING_WORKERS`] workers, each `g x g`, that behaves as a one
/// dimensional pipeline: full-height tiles, latency and bandwidth on the
/// horizontal links, ideal vertical links, and a step cost of `c * g`.
pub fn one_d_config(g: usize, c: f64, link: LinkModel, method: Method, iterations: usize) -> (TorusGeometry, RunConfig) {
    let geo = TorusGeometry::new(RING_WORKERS, 1, g).expect("positive extents");
    let mut cfg = RunConfig::new(method, iterations);
    cfg.horizontal = link;
    cfg.cost = CostModel::linear_seconds(c, STUDY_CLOCK_HZ);
    cfg.telemetry_every = 4;
    (geo, cfg)
}

/// Full-height translation tiles of the one-dimensional pipeline.
pub fn one_d_translation(g: usize) -> Method {
    Method::Translation { tile: Some((2, g)) }
}

/// Steady steps per second of the one-dimensional pipeline.
pub fn one_d_rate(g: usize, c: f64, link: LinkModel, method: Method, iterations: usize) -> Result<f64, EngineError> {
    let (geo, cfg) = one_d_config(g, c, link, method, iterations);
    let init = vec![vec![0.5f32; RING_WORKERS * g * g]];
    run(&Transport, &geo, &init, &cfg)?
        .steady_rate()
        .map_err(|e| EngineError::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCell {
    pub g: usize,
    pub latency: f64,
    pub bandwidth: f64,
    pub measured: f64,
    pub bounds: RateBounds,
}

impl RateCell {
    pub fn rel_error(&self) -> f64 {
        (self.measured - self.bounds.effective) / self.bounds.effective
    }
}

/// Measured translation throughput over every `(G, latency, bandwidth)`
/// combination of the study grid, next to the closed-form ceilings.
pub fn rate_grid(iterations: usize) -> Result<Vec<RateCell>, EngineError> {
    let mut cells = Vec::new();
    for &g in &RATE_GRID_SIDES {
        for &latency in &RATE_GRID_LATENCIES {
            for &bandwidth in &RATE_GRID_BANDWIDTHS {
                let link = LinkModel::new(latency, bandwidth).map_err(|e| EngineError::Config(e.to_string()))?;
                let measured = one_d_rate(g, RATE_GRID_C, link, one_d_translation(g), iterations)?;
                let bounds = rate_bounds(BoundsInput {
                    g: g as f64,
                    r: 1.0,
                    latency,
                    c: RATE_GRID_C,
                    payload_bytes: (g * 2 * 4) as f64,
                    bandwidth,
                    d: 1,
                });
                cells.push(RateCell {
                    g,
                    latency,
                    bandwidth,
                    measured,
                    bounds,
                });
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyRow {
    pub latency: f64,
    pub translation: f64,
    pub static_rate: f64,
    /// `1 / (T + latency)`: one blocking exchange per step; the vertical
    /// phase is free on the ideal vertical links.
    pub static_predicted: f64,
}

/// Translation and static throughput of the one-dimensional pipeline at a
/// fixed step cost, for each latency.
pub fn latency_sweep(g: usize, c: f64, latencies: &[f64], iterations: usize) -> Result<Vec<LatencyRow>, EngineError> {
    let t = c * g as f64;
    latencies
        .iter()
        .map(|&latency| {
            let link = LinkModel::latency_only(latency);
            Ok(LatencyRow {
                latency,
                translation: one_d_rate(g, c, link, one_d_translation(g), iterations)?,
                static_rate: one_d_rate(g, c, link, Method::Static, iterations)?,
                static_predicted: 1.0 / (t + latency),
            })
        })
        .collect()
}

/// Translation throughput of a `side x side` torus of `n x n` workers
/// running the five-point heat kernel, for each side.
pub fn weak_scaling(
    n: usize,
    sides: &[usize],
    iterations: usize,
    link: LinkModel,
    cost: CostModel,
) -> Result<Vec<(usize, f64)>, EngineError> {
    let k = LinearStencilKernel::heat5(0.1);
    sides
        .iter()
        .map(|&s| {
            let geo = TorusGeometry::new(s, s, n)?;
            let g = s * n;
            let init = vec![(0..g * g).map(|i| ((i * 7919) % 1000) as f32 * 1e-3).collect()];
            let mut cfg = RunConfig::new(Method::translation(), iterations).with_links(link).with_cost(cost);
            cfg.telemetry_every = 2;
            let rate = run(&k, &geo, &init, &cfg)?
                .steady_rate()
                .map_err(|e| EngineError::Config(e.to_string()))?;
            Ok((s * s, rate))
        })
        .collect()
}

const BASIN_DEPTH: f32 = 100.0;

/// Flat `BASIN_DEPTH` sea with a Gaussian bump of the surface.
pub fn gaussian_hump(n: usize, dx: f64, x0: f64, y0: f64, sigma: f64, amp: f64) -> SweState {
    let mut st = SweState::at_rest(n, n, &vec![-BASIN_DEPTH; n * n], &vec![false; n * n], 0.0);
    for y in 0..n {
        for x in 0..n {
            let (px, py) = (x as f64 * dx - x0, y as f64 * dx - y0);
            st.fields[H][y * n + x] = (amp * (-(px * px + py * py) / (2.0 * sigma * sigma)).exp()) as f32;
        }
    }
    st.refresh_centers();
    st
}

fn solve_hump(n: usize, length: f64, t_end: f64, steps: usize) -> Result<SweState, KernelError> {
    let dx = length / n as f64;
    let dt = t_end / steps as f64;
    let k = SweKernel::new(SweParams::planar(n, dx, dt))?;
    let st = gaussian_hump(n, dx, 0.5 * length, 0.5 * length, 0.08 * length, 1.0);
    swe::swe_steps(&k, &st, steps)
}

/// L2 difference of `h, u, v` between a coarse grid and the coincident
/// points of a grid `factor` times finer. Velocities are scaled by
/// `sqrt(s0 / g)` so all three carry metres.
fn restricted_l2(coarse: &SweState, fine: &SweState, factor: usize) -> f64 {
    let n = coarse.nx;
    let mut sum = 0.0;
    for f in [H, U, V] {
        let scale = if f == H { 1.0 } else { (BASIN_DEPTH as f64 / GRAVITY).sqrt() };
        for y in 0..n {
            for x in 0..n {
                let c = coarse.fields[f][y * n + x] as f64;
                let r = fine.fields[f][(y * factor) * fine.nx + x * factor] as f64;
                sum += ((c - r) * scale).powi(2);
            }
        }
    }
    (sum / (n * n) as f64).sqrt()
}

/// Observed order of accuracy and error ratio from two resolutions of a
/// smooth hump measured against an eight-times finer reference.
pub fn self_convergence_order() -> Result<(f64, f64), KernelError> {
    let length = 400_000.0;
    let t_end = 2400.0;
    let base = 32;
    let steps0 = 24;
    let reference = solve_hump(base * 8, length, t_end, steps0 * 8)?;
    let e1 = restricted_l2(&solve_hump(base, length, t_end, steps0)?, &reference, 8);
    let e2 = restricted_l2(&solve_hump(base * 2, length, t_end, steps0 * 2)?, &reference, 4);
    Ok(((e1 / e2).log2(), e1 / e2))
}

/// Radius of the ring crest along the +x ray from `(cx, cx)`, refined by a
/// parabola through the three samples around the maximum.
fn crest_radius(st: &SweState, cx: usize, dx: f64) -> f64 {
    let n = st.nx;
    let row = &st.fields[H][cx * n..(cx + 1) * n];
    let (mut best, mut at) = (f32::MIN, cx + 2);
    for (x, &v) in row.iter().enumerate().take(n - 1).skip(cx + 2) {
        if v > best {
            best = v;
            at = x;
        }
    }
    let (a, b, c) = (row[at - 1] as f64, row[at] as f64, row[at + 1] as f64);
    let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
    (at as f64 + shift - cx as f64) * dx
}

/// Crest speed of a small radial wave over the flat basin, and the
/// linear gravity-wave speed `sqrt(g s0)`.
pub fn measured_wave_speed() -> Result<(f64, f64), KernelError> {
    let n = 320;
    let dx = 1000.0;
    let c = (GRAVITY * BASIN_DEPTH as f64).sqrt();
    let dt = 0.3 * dx / c;
    let k = SweKernel::new(SweParams::planar(n, dx, dt))?;
    let mid = n / 2;
    let st = gaussian_hump(n, dx, mid as f64 * dx, mid as f64 * dx, 4.0 * dx, 0.05);
    let (s1, s2) = (250, 500);
    let a = swe::swe_steps(&k, &st, s1)?;
    let b = swe::swe_steps(&k, &a, s2 - s1)?;
    let speed = (crest_radius(&b, mid, dx) - crest_radius(&a, mid, dx)) / ((s2 - s1) as f64 * dt);
    Ok((speed, c))
}

/// Small global ocean for engine tests: smooth bathymetry around 3 km
/// deep with a few islands, closed clamp rows, a 1 m surface bump, and a
/// time step at `cfl` times the gravity-wave limit.
pub fn island_ocean(nx: usize, ny: usize, cfl: f64) -> Result<(SweKernel, SweState), KernelError> {
    let mut b = vec![0.0f32; nx * ny];
    let mut land = vec![false; nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            let (px, py) = (x as f64 / nx as f64, y as f64 / ny as f64);
            let z = -3000.0 + 2200.0 * (6.0 * std::f64::consts::PI * px).sin() * (4.0 * std::f64::consts::PI * py).cos()
                + 1200.0 * (2.0 * std::f64::consts::PI * (px + 2.0 * py)).sin();
            b[y * nx + x] = z as f32;
            land[y * nx + x] = z >= 0.0;
        }
    }
    let mut st = SweState::at_rest(nx, ny, &b, &land, 0.0);
    st.close_clamp_rows();
    let (cx, cy) = (nx as f64 * 0.3, ny as f64 * 0.55);
    for y in 0..ny {
        for x in 0..nx {
            let i = y * nx + x;
            if !st.is_land(i) {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                st.fields[H][i] = (-d2 / 8.0).exp() as f32;
            }
        }
    }
    st.refresh_centers();
    swe::apply_land_mask(&mut st);
    let probe = SweParams::global(nx, ny, 1.0);
    let dt = cfl / probe.cfl(st.max_depth() + 1.0);
    let k = SweKernel::new(SweParams::global(nx, ny, dt))?;
    Ok((k, st))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transport_is_exact_under_translation() {
        let (geo, cfg) = one_d_config(8, 1e-8, LinkModel::latency_only(1e-6), one_d_translation(8), 24);
        let init = vec![(0..4 * 64).map(|i| i as f32).collect::<Vec<_>>()];
        let out = run(&Transport, &geo, &init, &cfg).unwrap();
        assert_eq!(out.fields, init);
    }

    #[test]
    fn compute_bound_pipeline_runs_at_cost_rate() {
        let g = 32;
        let rate = one_d_rate(g, 1e-8, LinkModel::latency_only(1e-7), one_d_translation(g), 400).unwrap();
        let want = 1.0 / (1e-8 * g as f64);
        assert!((rate - want).abs() / want < 0.01, "{rate} vs {want}");
    }
}
