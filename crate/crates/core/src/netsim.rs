//! Deterministic virtual-time transport.
//!
//! Links are store-and-forward FIFOs: a package leaves when the link is
//! free, occupies it for `bytes / bandwidth` and lands `latency` later.
//! Events are ordered by `(time, insertion sequence)`.

use crate::grid::Direction;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("latency must be finite and >= 0, got {0}")]
    BadLatency(f64),
    #[error("bandwidth must be > 0, got {0}")]
    BadBandwidth(f64),
    #[error("need at least 2 telemetry samples, got {0}")]
    InsufficientSamples(usize),
    #[error("telemetry samples span no time")]
    DegenerateSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    /// Seconds of flight.
    pub latency: f64,
    /// Bytes per second; `f64::INFINITY` for no serialization cost.
    pub bandwidth: f64,
}

impl LinkModel {
    pub fn new(latency: f64, bandwidth: f64) -> Result<Self, NetError> {
        if !(latency.is_finite() && latency >= 0.0) {
            return Err(NetError::BadLatency(latency));
        }
        if bandwidth.is_nan() || bandwidth <= 0.0 {
            return Err(NetError::BadBandwidth(bandwidth));
        }
        Ok(Self { latency, bandwidth })
    }

    pub fn ideal() -> Self {
        Self {
            latency: 0.0,
            bandwidth: f64::INFINITY,
        }
    }

    pub fn latency_only(latency: f64) -> Self {
        Self {
            latency,
            bandwidth: f64::INFINITY,
        }
    }

    pub fn serialization(&self, bytes: usize) -> f64 {
        bytes as f64 / self.bandwidth
    }
}

/// Per-link counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkStats {
    pub source: usize,
    pub direction: Direction,
    pub sent_messages: u64,
    pub sent_bytes: u64,
    pub delivered_messages: u64,
    pub delivered_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub model: LinkModel,
    free_at: f64,
    severed: bool,
    pub stats: LinkStats,
}

impl Link {
    pub fn new(model: LinkModel, source: usize, direction: Direction) -> Self {
        Self {
            model,
            free_at: 0.0,
            severed: false,
            stats: LinkStats {
                source,
                direction,
                sent_messages: 0,
                sent_bytes: 0,
                delivered_messages: 0,
                delivered_bytes: 0,
            },
        }
    }

    /// Queue `bytes` at `t_send`; returns the arrival time, or `None` when
    /// the link has been severed.
    pub fn send(&mut self, bytes: usize, t_send: f64) -> Option<f64> {
        self.stats.sent_messages += 1;
        self.stats.sent_bytes += bytes as u64;
        if self.severed {
            return None;
        }
        let start = t_send.max(self.free_at);
        let ser = self.model.serialization(bytes);
        self.free_at = start + ser;
        Some(start + ser + self.model.latency)
    }

    pub fn mark_delivered(&mut self, bytes: usize) {
        self.stats.delivered_messages += 1;
        self.stats.delivered_bytes += bytes as u64;
    }

    /// Silently drop everything sent from now on.
    pub fn sever(&mut self) {
        self.severed = true;
    }

    pub fn free_at(&self) -> f64 {
        self.free_at
    }
}

/// Outgoing links of every worker, indexed by `(worker, direction)`.
#[derive(Debug, Clone)]
pub struct Network {
    links: Vec<Link>,
}

impl Network {
    pub fn new(workers: usize, horizontal: LinkModel, vertical: LinkModel) -> Self {
        let mut links = Vec::with_capacity(workers * 4);
        for w in 0..workers {
            for d in Direction::ALL {
                let m = if d.is_horizontal() { horizontal } else { vertical };
                links.push(Link::new(m, w, d));
            }
        }
        Self { links }
    }

    pub fn link(&self, worker: usize, dir: Direction) -> &Link {
        &self.links[worker * 4 + dir.index()]
    }

    pub fn link_mut(&mut self, worker: usize, dir: Direction) -> &mut Link {
        &mut self.links[worker * 4 + dir.index()]
    }

    pub fn stats(&self) -> Vec<LinkStats> {
        self.links.iter().map(|l| l.stats).collect()
    }
}

/// Worker-local virtual clock.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VirtualClock {
    pub now: f64,
}

impl VirtualClock {
    /// Charge `cost` seconds of compute.
    pub fn advance(&mut self, cost: f64) -> f64 {
        debug_assert!(cost >= 0.0);
        self.now += cost;
        self.now
    }

    /// Block until `t`.
    pub fn wait_until(&mut self, t: f64) -> f64 {
        self.now = self.now.max(t);
        self.now
    }
}

struct Entry<E> {
    time: f64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Min-queue on `(time, insertion sequence)`.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }

    pub fn push(&mut self, time: f64, event: E) {
        self.heap.push(Entry {
            time,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(f64, E)> {
        self.heap.pop().map(|e| (e.time, e.event))
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// `(iteration, virtual time)` recorded by a worker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub iteration: u64,
    pub time: f64,
}

/// Least-squares slope of iteration against time, in iterations per second.
pub fn measured_rate(samples: &[Sample]) -> Result<f64, NetError> {
    if samples.len() < 2 {
        return Err(NetError::InsufficientSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mt = samples.iter().map(|s| s.time).sum::<f64>() / n;
    let mi = samples.iter().map(|s| s.iteration as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in samples {
        let dt = s.time - mt;
        sxy += dt * (s.iteration as f64 - mi);
        sxx += dt * dt;
    }
    if sxx <= 0.0 {
        return Err(NetError::DegenerateSamples);
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Send,
    Deliver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: TraceKind,
    pub source: usize,
    pub direction: Direction,
    pub iteration: usize,
    pub bytes: usize,
}

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceEvent]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in trace {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_link_stats_csv<W: Write>(out: W, stats: &[LinkStats]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in stats {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_latency_and_pure_serialization() {
        let mut l = Link::new(LinkModel::latency_only(10e-6), 0, Direction::Right);
        assert_eq!(l.send(1 << 20, 0.0), Some(10e-6));
        let mut l = Link::new(LinkModel::new(0.0, 1e9).unwrap(), 0, Direction::Right);
        let t = l.send(4000, 2.0).unwrap();
        assert!((t - (2.0 + 4e-6)).abs() < 1e-15);
    }

    #[test]
    fn back_to_back_packages_pipeline() {
        let m = LinkModel::new(5e-6, 1e9).unwrap();
        let mut l = Link::new(m, 0, Direction::Up);
        let a = l.send(1000, 0.0).unwrap();
        let b = l.send(1000, 0.0).unwrap();
        assert!((a - 6e-6).abs() < 1e-15);
        assert!((b - (a + 1e-6)).abs() < 1e-15);
        // a later send after the link drained pays only its own time
        let c = l.send(1000, 1.0).unwrap();
        assert!((c - (1.0 + 6e-6)).abs() < 1e-12);
    }

    #[test]
    fn invalid_models() {
        assert!(LinkModel::new(-1.0, 1.0).is_err());
        assert!(LinkModel::new(0.0, 0.0).is_err());
        assert!(LinkModel::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn queue_orders_by_time_then_sequence() {
        let mut q = EventQueue::new();
        q.push(2.0, 'a');
        q.push(1.0, 'b');
        q.push(2.0, 'c');
        q.push(1.0, 'd');
        let order: Vec<char> = std::iter::from_fn(|| q.pop().map(|e| e.1)).collect();
        assert_eq!(order, vec!['b', 'd', 'a', 'c']);
    }

    #[test]
    fn clock_advance() {
        let mut c = VirtualClock::default();
        assert_eq!(c.advance(0.0), 0.0);
        for _ in 0..10 {
            c.advance(0.25);
        }
        assert_eq!(c.now, 2.5);
        assert_eq!(c.wait_until(1.0), 2.5);
        assert_eq!(c.wait_until(3.0), 3.0);
    }

    #[test]
    fn rate_from_samples() {
        let s = [
            Sample { iteration: 0, time: 0.0 },
            Sample { iteration: 100, time: 1e-4 },
        ];
        assert!((measured_rate(&s).unwrap() - 1e6).abs() < 1e-3);
        let dense: Vec<Sample> = (0..50).map(|i| Sample { iteration: i, time: i as f64 * 0.5 }).collect();
        let sparse: Vec<Sample> = dense.iter().copied().step_by(7).collect();
        assert_eq!(measured_rate(&dense).unwrap(), 2.0);
        assert_eq!(measured_rate(&sparse).unwrap(), 2.0);
        assert_eq!(measured_rate(&s[..1]), Err(NetError::InsufficientSamples(1)));
    }

    #[test]
    fn severed_link_drops() {
        let mut l = Link::new(LinkModel::ideal(), 3, Direction::Left);
        l.sever();
        assert_eq!(l.send(8, 0.0), None);
        assert_eq!(l.stats.sent_messages, 1);
        assert_eq!(l.stats.delivered_messages, 0);
    }
}
