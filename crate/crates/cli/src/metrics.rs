//! Run metrics as CSV: per-worker rates, per-link counters, one summary
//! row and rate-bound curves over the block side.

use crate::CliError;
use dtsim::engine::RunOutput;
use dtsim::netsim::{measured_rate, LinkModel, Sample};
use dtsim::perfmodel::{rate_bounds, BoundsInput, CostModel, RateBounds};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkerRow {
    pub worker: usize,
    pub steps_per_second: f64,
    pub final_time: f64,
}

/// One row per run; also the row type of sweep results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kernel: String,
    pub method: String,
    pub workers_x: usize,
    pub workers_y: usize,
    pub n: usize,
    pub latency: f64,
    pub bandwidth: f64,
    pub steps: usize,
    pub virtual_time: f64,
    pub steps_per_second: f64,
    pub flops_per_second: f64,
    pub predicted_steps_per_second: f64,
    pub limiter: String,
    pub messages_sent: u64,
    pub bytes_sent: u64,
    pub max_skew: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub compute_rate: f64,
    pub latency_rate: f64,
    pub bandwidth_rate: f64,
    pub predicted_rate: f64,
}

/// What a run needs to turn engine output into rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunShape {
    pub n: usize,
    pub workers: usize,
    pub radius: usize,
    /// Engine iterations per model time step.
    pub stages: usize,
    /// Fields sent in each halo message.
    pub fields: usize,
    pub bytes_per_value: usize,
    pub flops_per_point: f64,
}

fn tail(samples: &[Sample], iterations: usize) -> Vec<Sample> {
    let half = (iterations / 2) as u64;
    let t: Vec<Sample> = samples.iter().copied().filter(|s| s.iteration >= half).collect();
    if t.len() >= 2 {
        t
    } else {
        samples.to_vec()
    }
}

/// Steps per second of each worker over the second half of the run.
pub fn worker_rows(out: &RunOutput, stages: usize) -> Vec<WorkerRow> {
    out.telemetry
        .iter()
        .enumerate()
        .map(|(worker, s)| WorkerRow {
            worker,
            steps_per_second: measured_rate(&tail(s, out.iterations)).unwrap_or(f64::NAN) / stages as f64,
            final_time: s.last().map_or(0.0, |x| x.time),
        })
        .collect()
}

/// Bounds for one worker block of side `n` exchanging `w = 2r` wide
/// strips of every field, in steps per second.
pub fn block_bounds(shape: &RunShape, n: usize, cost: &CostModel, link: &LinkModel) -> RateBounds {
    let g = n as f64;
    let stage = rate_bounds(BoundsInput {
        g,
        r: shape.radius as f64,
        latency: link.latency,
        c: cost.seconds(g) / (g * g),
        payload_bytes: g * (2 * shape.radius * shape.fields * shape.bytes_per_value) as f64,
        bandwidth: link.bandwidth,
        d: 2,
    });
    let k = shape.stages as f64;
    RateBounds {
        compute_rate: stage.compute_rate / k,
        latency_rate: stage.latency_rate / k,
        bandwidth_rate: stage.bandwidth_rate / k,
        effective: stage.effective / k,
        threshold_g: stage.threshold_g,
    }
}

pub fn bound_curve(shape: &RunShape, ns: &[usize], cost: &CostModel, link: &LinkModel) -> Vec<BoundRow> {
    ns.iter()
        .map(|&n| {
            let b = block_bounds(shape, n, cost, link);
            BoundRow {
                n,
                compute_rate: b.compute_rate,
                latency_rate: b.latency_rate,
                bandwidth_rate: b.bandwidth_rate,
                predicted_rate: b.effective,
            }
        })
        .collect()
}

pub struct SummaryInput<'a> {
    pub kernel: &'a str,
    pub method: &'a str,
    pub workers_x: usize,
    pub workers_y: usize,
    pub steps: usize,
    pub link: LinkModel,
    pub cost: CostModel,
}

pub fn summarize(out: &RunOutput, shape: &RunShape, s: &SummaryInput) -> Summary {
    let rate = out.steady_rate().unwrap_or(f64::NAN) / shape.stages as f64;
    let points = (shape.n * shape.n * shape.workers) as f64;
    let b = block_bounds(shape, shape.n, &s.cost, &s.link);
    Summary {
        kernel: s.kernel.into(),
        method: s.method.into(),
        workers_x: s.workers_x,
        workers_y: s.workers_y,
        n: shape.n,
        latency: s.link.latency,
        bandwidth: s.link.bandwidth,
        steps: s.steps,
        virtual_time: out.final_time,
        steps_per_second: rate,
        flops_per_second: rate * shape.stages as f64 * points * shape.flops_per_point,
        predicted_steps_per_second: b.effective,
        limiter: b.limiter().into(),
        messages_sent: out.total_sent(),
        bytes_sent: out.links.iter().map(|l| l.sent_bytes).sum(),
        max_skew: out.max_skew,
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Write `workers.csv`, `links.csv`, `summary.csv` and `bounds.csv` into
/// `dir`.
pub fn emit_metrics(
    dir: &Path,
    out: &RunOutput,
    shape: &RunShape,
    summary: &Summary,
    curve: &[BoundRow],
) -> Result<(), CliError> {
    write_rows(&dir.join("workers.csv"), &worker_rows(out, shape.stages))?;
    write_rows(&dir.join("links.csv"), &out.links)?;
    write_rows(&dir.join("summary.csv"), std::slice::from_ref(summary))?;
    write_rows(&dir.join("bounds.csv"), curve)
}
