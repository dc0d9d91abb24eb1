//! Execution of a kernel on a torus of workers under virtual time.
//!
//! Three methods share one window routine and one scheduler discipline:
//!
//! * [`Method::Translation`]: the grid-to-worker mapping moves `r` points
//!   downstream per iteration. Workers send right and up only, receive from
//!   the left and below, and forward the corner received from the left
//!   upward. Each worker's block is cut into tiles so it can run ahead of
//!   its upstream neighbours by up to one block width of iterations.
//! * [`Method::Static`]: fixed partitions with an `r`-wide halo exchanged
//!   in both directions before every iteration.
//! * [`Method::Ghost`]: fixed partitions with an `r * p` halo exchanged
//!   every `p` iterations; the overlap is recomputed redundantly.
//!
//! Every method evaluates the same per-point arithmetic in the same order,
//! so reassembled results are bit-identical across methods and worker
//! grids.

mod lockstep;
mod translation;

use crate::grid::{Direction, GridError, TorusGeometry};
use crate::kernels::{Kernel, KernelError};
use crate::netsim::{measured_rate, LinkModel, LinkStats, NetError, Sample, TraceEvent};
use crate::perfmodel::CostModel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("deadlock: no worker can progress and nothing is in flight ({0})")]
    Deadlock(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// `tile` is `(width, height)` of the scheduling unit inside a worker;
    /// both must be at least `2r` and divide `n`. `None` picks the smallest
    /// such square.
    Translation { tile: Option<(usize, usize)> },
    Static,
    /// Exchange a `r * steps_between`-wide halo every `steps_between`
    /// iterations.
    Ghost { steps_between: usize },
}

impl Method {
    pub fn translation() -> Self {
        Method::Translation { tile: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Translation { .. } => "translation",
            Method::Static => "static",
            Method::Ghost { .. } => "ghost",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    /// Kernel stage applications.
    pub iterations: usize,
    pub horizontal: LinkModel,
    pub vertical: LinkModel,
    /// Cycles for one iteration over an `n x n` block.
    pub cost: CostModel,
    /// Record a telemetry sample every this many iterations (and at the
    /// end).
    pub telemetry_every: usize,
    pub bytes_per_value: usize,
    pub record_trace: bool,
    /// Drop everything sent on this outgoing link.
    pub sever: Option<(usize, Direction)>,
}

impl RunConfig {
    pub fn new(method: Method, iterations: usize) -> Self {
        Self {
            method,
            iterations,
            horizontal: LinkModel::ideal(),
            vertical: LinkModel::ideal(),
            cost: CostModel::zero(),
            telemetry_every: 1,
            bytes_per_value: 4,
            record_trace: false,
            sever: None,
        }
    }

    pub fn with_links(mut self, link: LinkModel) -> Self {
        self.horizontal = link;
        self.vertical = link;
        self
    }

    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Global row-major fields, in load coordinates.
    pub fields: Vec<Vec<f32>>,
    /// Per-worker `(iteration, virtual time)` samples.
    pub telemetry: Vec<Vec<Sample>>,
    pub links: Vec<LinkStats>,
    pub final_time: f64,
    pub iterations: usize,
    /// Largest difference in completed iterations between two workers.
    pub max_skew: usize,
    /// Per worker: iterations with work done before the first package
    /// arrived (translation only).
    pub warmup_levels: Vec<usize>,
    pub trace: Vec<TraceEvent>,
}

impl RunOutput {
    /// Mean over workers of the telemetry slope restricted to the second
    /// half of the run.
    pub fn steady_rate(&self) -> Result<f64, NetError> {
        let half = (self.iterations / 2) as u64;
        let mut sum = 0.0;
        for t in &self.telemetry {
            let tail: Vec<Sample> = t.iter().copied().filter(|s| s.iteration >= half).collect();
            sum += measured_rate(&tail)?;
        }
        Ok(sum / self.telemetry.len() as f64)
    }

    pub fn messages_in(&self, dir: Direction) -> u64 {
        self.links.iter().filter(|l| l.direction == dir).map(|l| l.sent_messages).sum()
    }

    pub fn total_sent(&self) -> u64 {
        self.links.iter().map(|l| l.sent_messages).sum()
    }

    pub fn total_delivered(&self) -> u64 {
        self.links.iter().map(|l| l.delivered_messages).sum()
    }
}

/// Run `kernel` for `cfg.iterations` on the global fields `initial`
/// (row-major `G_x x G_y` each) distributed over `geometry`.
pub fn run<K: Kernel>(
    kernel: &K,
    geometry: &TorusGeometry,
    initial: &[Vec<f32>],
    cfg: &RunConfig,
) -> Result<RunOutput, EngineError> {
    let (gx, gy) = geometry.extent();
    if initial.len() != kernel.field_count() {
        return Err(EngineError::Config(format!(
            "kernel {} needs {} fields, got {}",
            kernel.name(),
            kernel.field_count(),
            initial.len()
        )));
    }
    if initial.iter().any(|f| f.len() != gx * gy) {
        return Err(EngineError::Config(format!("every field must hold {gx} x {gy} values")));
    }
    if cfg.telemetry_every == 0 {
        return Err(EngineError::Config("telemetry cadence must be at least 1".into()));
    }
    if let Some((w, _)) = cfg.sever {
        geometry.check_worker(w)?;
    }
    cfg.cost
        .validate()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    match cfg.method {
        Method::Translation { tile } => translation::run(kernel, geometry, initial, cfg, tile),
        Method::Static => lockstep::run(kernel, geometry, initial, cfg, 1),
        Method::Ghost { steps_between } => {
            if steps_between == 0 {
                return Err(EngineError::Config("ghost exchange interval must be at least 1".into()));
            }
            lockstep::run(kernel, geometry, initial, cfg, steps_between)
        }
    }
}

/// Copy the `n x n` block of worker `(wx, wy)`, shifted back by `shift`
/// points, out of the global fields.
pub(crate) fn scatter(
    global: &[Vec<f32>],
    geometry: &TorusGeometry,
    wx: usize,
    wy: usize,
    shift: usize,
) -> Vec<Vec<f32>> {
    let (gx, gy) = geometry.extent();
    let n = geometry.n;
    global
        .iter()
        .map(|f| {
            let mut out = Vec::with_capacity(n * n);
            for j in 0..n {
                let y = (wy * n + j + gy - shift % gy) % gy;
                for i in 0..n {
                    let x = (wx * n + i + gx - shift % gx) % gx;
                    out.push(f[y * gx + x]);
                }
            }
            out
        })
        .collect()
}

/// Inverse of [`scatter`].
pub(crate) fn gather(
    global: &mut [Vec<f32>],
    block: &[Vec<f32>],
    geometry: &TorusGeometry,
    wx: usize,
    wy: usize,
    shift: usize,
) {
    let (gx, gy) = geometry.extent();
    let n = geometry.n;
    for (g, b) in global.iter_mut().zip(block) {
        for j in 0..n {
            let y = (wy * n + j + gy - shift % gy) % gy;
            for i in 0..n {
                let x = (wx * n + i + gx - shift % gx) % gx;
                g[y * gx + x] = b[j * n + i];
            }
        }
    }
}

pub(crate) fn record(
    telemetry: &mut Vec<Sample>,
    level: usize,
    time: f64,
    cfg: &RunConfig,
) {
    if level.is_multiple_of(cfg.telemetry_every) || level == cfg.iterations {
        telemetry.push(Sample {
            iteration: level as u64,
            time,
        });
    }
}
