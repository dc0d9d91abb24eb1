//! Analytic performance model: per-sweep cost polynomials, the three rate
//! ceilings, ghost-region overheads, least-squares fits and cluster-level
//! predictions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Single-precision peak of one core, flops per cycle.
pub const PEAK_FLOPS_PER_CYCLE: f64 = 2.0;
/// Default node clock (Hz).
pub const DEFAULT_CLOCK_HZ: f64 = 0.75e9;
/// Bandwidth of one provisioned 100 Gbps link, bytes per second.
pub const LINK_100G_BYTES: f64 = 100e9 / 8.0;
/// Links provisioned per direction in the default configuration.
pub const DEFAULT_LINKS_PER_DIRECTION: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerfError {
    #[error("need at least {need} distinct sample points, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("design matrix is rank deficient (rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("target unachievable: f*lambda = {0} is not below G")]
    Unachievable(f64),
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

/// Cost of one sweep over an `n x n` block: `T(n) = a0 + a1 n + a2 n^2`
/// cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub clock_hz: f64,
    pub flops_per_point: f64,
}

impl CostModel {
    pub fn new(a0: f64, a1: f64, a2: f64, clock_hz: f64, flops_per_point: f64) -> Result<Self, PerfError> {
        let m = Self {
            a0,
            a1,
            a2,
            clock_hz,
            flops_per_point,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn heat5() -> Self {
        Self::new(105.0, 3.74, 6.72, DEFAULT_CLOCK_HZ, 9.0).unwrap()
    }

    pub fn heat9() -> Self {
        Self::new(97.0, 3.5, 9.37, DEFAULT_CLOCK_HZ, 17.0).unwrap()
    }

    pub fn swe() -> Self {
        Self::new(1026.0, 183.2, 137.6, DEFAULT_CLOCK_HZ, 155.0).unwrap()
    }

    /// A per-point cost `c` seconds in a one-dimensional sense: `T = c n`.
    pub fn linear_seconds(c: f64, clock_hz: f64) -> Self {
        Self {
            a0: 0.0,
            a1: c * clock_hz,
            a2: 0.0,
            clock_hz,
            flops_per_point: 0.0,
        }
    }

    /// A per-point cost `c` seconds over a square block: `T = c n^2`.
    pub fn quadratic_seconds(c: f64, clock_hz: f64) -> Self {
        Self {
            a0: 0.0,
            a1: 0.0,
            a2: c * clock_hz,
            clock_hz,
            flops_per_point: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self {
            a0: 0.0,
            a1: 0.0,
            a2: 0.0,
            clock_hz: DEFAULT_CLOCK_HZ,
            flops_per_point: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PerfError> {
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(PerfError::BadParameter("clock must be positive"));
        }
        if ![self.a0, self.a1, self.a2, self.flops_per_point].iter().all(|v| v.is_finite()) {
            return Err(PerfError::BadParameter("coefficients must be finite"));
        }
        if self.a0 < 0.0 || self.a1 < 0.0 || self.a2 < 0.0 {
            return Err(PerfError::BadParameter("coefficients must be non-negative"));
        }
        Ok(())
    }

    /// Same polynomial with every coefficient multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            a0: self.a0 * k,
            a1: self.a1 * k,
            a2: self.a2 * k,
            ..*self
        }
    }

    pub fn cycles(&self, n: f64) -> f64 {
        self.a0 + self.a1 * n + self.a2 * n * n
    }

    pub fn seconds(&self, n: f64) -> f64 {
        self.cycles(n) / self.clock_hz
    }

    /// Sustained flops per cycle at block side `n`.
    pub fn flops_per_cycle(&self, n: f64) -> f64 {
        self.flops_per_point * n * n / self.cycles(n)
    }

    pub fn utilization(&self, n: f64) -> f64 {
        self.flops_per_cycle(n) / PEAK_FLOPS_PER_CYCLE
    }

    /// Limit of [`Self::utilization`] as `n` grows.
    pub fn asymptotic_utilization(&self) -> f64 {
        self.flops_per_point / (PEAK_FLOPS_PER_CYCLE * self.a2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEval {
    pub cycles: f64,
    pub flops_per_cycle: f64,
}

pub fn eval_cost(model: &CostModel, n: usize) -> CostEval {
    let n = n as f64;
    CostEval {
        cycles: model.cycles(n),
        flops_per_cycle: model.flops_per_cycle(n),
    }
}

/// Inputs of [`rate_bounds`]. `c` is seconds per point update and `d` the
/// number of dimensions: a node sweeps `G^d` points per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsInput {
    pub g: f64,
    pub r: f64,
    pub latency: f64,
    pub c: f64,
    pub payload_bytes: f64,
    pub bandwidth: f64,
    pub d: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBounds {
    pub compute_rate: f64,
    pub latency_rate: f64,
    pub bandwidth_rate: f64,
    pub effective: f64,
    /// Side at which compute and latency ceilings cross.
    pub threshold_g: f64,
}

impl RateBounds {
    pub fn limiter(&self) -> &'static str {
        if self.effective == self.compute_rate {
            "compute"
        } else if self.effective == self.latency_rate {
            "latency"
        } else {
            "bandwidth"
        }
    }
}

pub fn rate_bounds(p: BoundsInput) -> RateBounds {
    let compute_rate = 1.0 / (p.c * p.g.powi(p.d as i32));
    let latency_rate = if p.latency > 0.0 {
        p.g / (2.0 * p.r * p.latency)
    } else {
        f64::INFINITY
    };
    let bandwidth_rate = if p.payload_bytes > 0.0 && p.bandwidth.is_finite() {
        p.bandwidth / p.payload_bytes
    } else {
        f64::INFINITY
    };
    RateBounds {
        compute_rate,
        latency_rate,
        bandwidth_rate,
        effective: compute_rate.min(latency_rate).min(bandwidth_rate),
        threshold_g: (2.0 * p.r * p.latency / p.c).powf(1.0 / (p.d as f64 + 1.0)),
    }
}

/// Overheads of the ghost-region method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostMath {
    /// Utilization multiplier `(1 - f lambda / G)^d`.
    pub multiplier: f64,
    /// Share of a node's points lying in the ghost band of width `w`.
    pub volume_fraction: f64,
}

/// `f` is the target step rate, `latency` the link latency, `g` the node
/// side and `w` the ghost width.
pub fn ghost_utilization(f: f64, latency: f64, g: f64, w: f64, d: u32) -> Result<GhostMath, PerfError> {
    let fl = f * latency;
    if fl >= g {
        return Err(PerfError::Unachievable(fl));
    }
    Ok(GhostMath {
        multiplier: (1.0 - fl / g).powi(d as i32),
        volume_fraction: ghost_volume_fraction(g, w, d),
    })
}

pub fn ghost_volume_fraction(g: f64, w: f64, d: u32) -> f64 {
    1.0 - ((g - 2.0 * w) / g).powi(d as i32)
}

/// Least-squares solution of `a x = b` with a rank check.
fn least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>, PerfError> {
    let cols = a.ncols();
    // column scaling keeps the rank test meaningful for Vandermonde data
    let scale: Vec<f64> = (0..cols)
        .map(|j| {
            let m = a.column(j).amax();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        })
        .collect();
    let mut s = a.clone();
    for (j, k) in scale.iter().enumerate() {
        s.column_mut(j).scale_mut(1.0 / k);
    }
    let svd = s.svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    let rank = svd.rank(tol);
    if rank < cols {
        return Err(PerfError::RankDeficient { rank, cols });
    }
    let x = svd.solve(&b, tol).map_err(|_| PerfError::RankDeficient { rank, cols })?;
    Ok(DVector::from_iterator(cols, x.iter().zip(&scale).map(|(v, k)| v / k)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostFit {
    pub model: CostModel,
    pub rms_residual: f64,
    pub max_relative_residual: f64,
}

/// Fit `T(n)` to `(n, cycles)` samples.
pub fn fit_cost_model(samples: &[(f64, f64)], clock_hz: f64, flops_per_point: f64) -> Result<CostFit, PerfError> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(PerfError::InsufficientData {
            need: 3,
            got: distinct.len(),
        });
    }
    let a = DMatrix::from_fn(samples.len(), 3, |i, j| samples[i].0.powi(j as i32));
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let x = least_squares(a, b)?;
    let model = CostModel {
        a0: x[0],
        a1: x[1],
        a2: x[2],
        clock_hz,
        flops_per_point,
    };
    let (mut ss, mut worst) = (0.0, 0.0f64);
    for &(n, t) in samples {
        let e = model.cycles(n) - t;
        ss += e * e;
        worst = worst.max(e.abs() / t.abs().max(f64::MIN_POSITIVE));
    }
    Ok(CostFit {
        model,
        rms_residual: (ss / samples.len() as f64).sqrt(),
        max_relative_residual: worst,
    })
}

/// Convert measured steps per second to cycles per step.
pub fn cycles_from_rate(rate: f64, clock_hz: f64) -> f64 {
    clock_hz / rate
}

/// Measured link payload per step for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadSample {
    pub n: f64,
    pub fabric_w: f64,
    pub fabric_h: f64,
    pub horizontal_bytes: f64,
    pub vertical_bytes: f64,
}

/// Horizontal payload `b . (n F_w, F_w, 1)`, vertical `d . (n F_h, F_h, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadRegression {
    pub b: [f64; 3],
    pub d: [f64; 3],
}

impl PayloadRegression {
    pub fn fit(samples: &[PayloadSample]) -> Result<Self, PerfError> {
        if samples.len() < 3 {
            return Err(PerfError::InsufficientData {
                need: 3,
                got: samples.len(),
            });
        }
        let solve = |fabric: fn(&PayloadSample) -> f64, bytes: fn(&PayloadSample) -> f64| {
            let a = DMatrix::from_fn(samples.len(), 3, |i, j| {
                let s = &samples[i];
                match j {
                    0 => s.n * fabric(s),
                    1 => fabric(s),
                    _ => 1.0,
                }
            });
            let y = DVector::from_iterator(samples.len(), samples.iter().map(bytes));
            least_squares(a, y).map(|x| [x[0], x[1], x[2]])
        };
        Ok(Self {
            b: solve(|s| s.fabric_w, |s| s.horizontal_bytes)?,
            d: solve(|s| s.fabric_h, |s| s.vertical_bytes)?,
        })
    }

    pub fn horizontal(&self, n: f64, fabric_w: f64) -> f64 {
        self.b[0] * n * fabric_w + self.b[1] * fabric_w + self.b[2]
    }

    pub fn vertical(&self, n: f64, fabric_h: f64) -> f64 {
        self.d[0] * n * fabric_h + self.d[1] * fabric_h + self.d[2]
    }
}

/// A node of `fabric_w x fabric_h` cores, each sweeping `n x n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub cost: CostModel,
    pub n: f64,
    pub fabric_w: f64,
    pub fabric_h: f64,
    pub radius: f64,
    pub fields_exchanged: f64,
    pub bytes_per_value: f64,
    /// Bytes per second available in each direction.
    pub bandwidth: f64,
    /// Send each node edge once instead of once per core with its
    /// neighbour columns.
    pub filter_redundant: bool,
}

impl ClusterConfig {
    /// A 720 x 720 fabric with four 100 Gb/s links per direction.
    pub fn large_fabric(cost: CostModel, n: f64) -> Self {
        Self {
            cost,
            n,
            fabric_w: 720.0,
            fabric_h: 720.0,
            radius: 1.0,
            fields_exchanged: 1.0,
            bytes_per_value: 4.0,
            bandwidth: DEFAULT_LINKS_PER_DIRECTION * LINK_100G_BYTES,
            filter_redundant: false,
        }
    }

    pub fn halo_width(&self) -> f64 {
        2.0 * self.radius
    }

    /// Bytes crossing the right node edge per step.
    pub fn horizontal_bytes(&self) -> f64 {
        let w = self.halo_width();
        self.fabric_h * self.n * w * self.fields_exchanged * self.bytes_per_value
    }

    /// Bytes crossing the top node edge per step, corner data included.
    pub fn vertical_bytes(&self) -> f64 {
        let w = self.halo_width();
        let values = if self.filter_redundant {
            (self.fabric_w * self.n + w) * w
        } else {
            self.fabric_w * (self.n + w) * w
        };
        values * self.fields_exchanged * self.bytes_per_value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterPrediction {
    pub compute_rate: f64,
    pub io_rate: f64,
    pub steps_per_s: f64,
    pub flops_per_s: f64,
    pub flops_per_core_cycle: f64,
    pub io_bound: bool,
}

pub fn predict_cluster(cfg: &ClusterConfig) -> ClusterPrediction {
    let compute_rate = 1.0 / cfg.cost.seconds(cfg.n);
    let bytes = cfg.horizontal_bytes().max(cfg.vertical_bytes());
    let io_rate = if bytes > 0.0 && cfg.bandwidth.is_finite() {
        cfg.bandwidth / bytes
    } else {
        f64::INFINITY
    };
    let steps_per_s = compute_rate.min(io_rate);
    let core_flops = cfg.cost.flops_per_point * cfg.n * cfg.n * steps_per_s;
    ClusterPrediction {
        compute_rate,
        io_rate,
        steps_per_s,
        flops_per_s: core_flops * cfg.fabric_w * cfg.fabric_h,
        flops_per_core_cycle: core_flops / cfg.cost.clock_hz,
        io_bound: io_rate < compute_rate,
    }
}

/// Smallest integer side in `1..=max_n` at which the node is compute bound.
pub fn compute_bound_crossover(cfg: &ClusterConfig, max_n: usize) -> Option<usize> {
    (1..=max_n).find(|&n| !predict_cluster(&ClusterConfig { n: n as f64, ..*cfg }).io_bound)
}

/// One row of a bound curve over the block side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub n: f64,
    pub compute_rate: f64,
    pub io_rate: f64,
    pub predicted_rate: f64,
    pub flops_per_core_cycle: f64,
}

pub fn prediction_curve(cfg: &ClusterConfig, ns: &[f64]) -> Vec<CurveRow> {
    ns.iter()
        .map(|&n| {
            let p = predict_cluster(&ClusterConfig { n, ..*cfg });
            CurveRow {
                n,
                compute_rate: p.compute_rate,
                io_rate: p.io_rate,
                predicted_rate: p.steps_per_s,
                flops_per_core_cycle: p.flops_per_core_cycle,
            }
        })
        .collect()
}
