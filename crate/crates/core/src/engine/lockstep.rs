//! Fixed partitions: static halo exchange (`p = 1`) and ghost regions.
//!
//! Each worker keeps its block with an `h = r p` halo on every side. A
//! round exchanges left/right edges, then bottom/top rows spanning the
//! full padded width (which carries the corners), then runs `p` stages on
//! shrinking regions.

use super::{gather, record, scatter, EngineError, RunConfig, RunOutput};
use crate::grid::{Direction, TorusGeometry};
use crate::kernels::{apply_window, BlockOrigin, Kernel};
use crate::netsim::{EventQueue, Network, Sample, TraceEvent, TraceKind};
use std::collections::BTreeMap;

enum Event {
    Arrive {
        worker: usize,
        round: usize,
        slot: Direction,
        payload: Vec<f32>,
        from: usize,
        dir: Direction,
    },
    ComputeDone {
        worker: usize,
        stages: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Horizontal(usize),
    Vertical(usize),
    Computing(usize),
    Done,
}

struct Worker {
    wx: usize,
    wy: usize,
    buf: Vec<Vec<f32>>,
    inbox: BTreeMap<(usize, usize), Vec<f32>>,
    phase: Phase,
    level: usize,
    telemetry: Vec<Sample>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    h: usize,
    r: usize,
    p: usize,
    side: usize,
    gx: usize,
    gy: usize,
}

impl Layout {
    /// Columns `[x0, x0 + h)` of the interior rows.
    fn cols(&self, buf: &[Vec<f32>], x0: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(buf.len() * self.n * self.h);
        for f in buf {
            for y in self.h..self.h + self.n {
                out.extend_from_slice(&f[y * self.side + x0..y * self.side + x0 + self.h]);
            }
        }
        out
    }

    /// Rows `[y0, y0 + h)` across the full padded width.
    fn rows(&self, buf: &[Vec<f32>], y0: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(buf.len() * self.side * self.h);
        for f in buf {
            out.extend_from_slice(&f[y0 * self.side..(y0 + self.h) * self.side]);
        }
        out
    }

    fn put_cols(&self, buf: &mut [Vec<f32>], x0: usize, src: &[f32]) {
        let per = self.n * self.h;
        for (fi, f) in buf.iter_mut().enumerate() {
            let s = &src[fi * per..(fi + 1) * per];
            for (j, y) in (self.h..self.h + self.n).enumerate() {
                f[y * self.side + x0..y * self.side + x0 + self.h].copy_from_slice(&s[j * self.h..(j + 1) * self.h]);
            }
        }
    }

    fn put_rows(&self, buf: &mut [Vec<f32>], y0: usize, src: &[f32]) {
        let per = self.side * self.h;
        for (fi, f) in buf.iter_mut().enumerate() {
            f[y0 * self.side..(y0 + self.h) * self.side].copy_from_slice(&src[fi * per..(fi + 1) * per]);
        }
    }
}

struct Sim<'a> {
    lay: Layout,
    geometry: &'a TorusGeometry,
    cfg: &'a RunConfig,
    net: Network,
    queue: EventQueue<Event>,
    trace: Vec<TraceEvent>,
}

impl Sim<'_> {
    fn send(&mut self, from: usize, dir: Direction, round: usize, payload: Vec<f32>, t: f64) {
        let bytes = payload.len() * self.cfg.bytes_per_value;
        if self.cfg.record_trace {
            self.trace.push(TraceEvent {
                time: t,
                kind: TraceKind::Send,
                source: from,
                direction: dir,
                iteration: round * self.lay.p,
                bytes,
            });
        }
        if let Some(arrival) = self.net.link_mut(from, dir).send(bytes, t) {
            self.queue.push(
                arrival,
                Event::Arrive {
                    worker: self.geometry.neighbor(from, dir),
                    round,
                    slot: dir.opposite(),
                    payload,
                    from,
                    dir,
                },
            );
        }
    }

    fn send_horizontal(&mut self, wk: &Worker, id: usize, round: usize, t: f64) {
        let (h, n) = (self.lay.h, self.lay.n);
        let to_left = self.lay.cols(&wk.buf, h);
        let to_right = self.lay.cols(&wk.buf, n);
        self.send(id, Direction::Left, round, to_left, t);
        self.send(id, Direction::Right, round, to_right, t);
    }

    fn send_vertical(&mut self, wk: &Worker, id: usize, round: usize, t: f64) {
        let (h, n) = (self.lay.h, self.lay.n);
        let to_down = self.lay.rows(&wk.buf, h);
        let to_up = self.lay.rows(&wk.buf, n);
        self.send(id, Direction::Down, round, to_down, t);
        self.send(id, Direction::Up, round, to_up, t);
    }
}

fn take(wk: &mut Worker, round: usize, a: Direction, b: Direction) -> Option<(Vec<f32>, Vec<f32>)> {
    let ka = (round, a.index());
    let kb = (round, b.index());
    if wk.inbox.contains_key(&ka) && wk.inbox.contains_key(&kb) {
        Some((wk.inbox.remove(&ka).unwrap(), wk.inbox.remove(&kb).unwrap()))
    } else {
        None
    }
}

/// Run `q` stages from the worker's current level, returning the compute
/// time charged for each.
fn compute_round<K: Kernel>(kernel: &K, lay: &Layout, wk: &mut Worker, cfg: &RunConfig, q: usize) -> Result<Vec<f64>, EngineError> {
    let r = lay.r;
    let mut costs = Vec::with_capacity(q);
    let nf = wk.buf.len();
    let mut out = vec![Vec::new(); nf];
    for k in 0..q {
        let o = r * k;
        let m = lay.side - 2 * o;
        let window: Vec<Vec<f32>> = wk
            .buf
            .iter()
            .map(|f| {
                let mut v = Vec::with_capacity(m * m);
                for y in o..o + m {
                    v.extend_from_slice(&f[y * lay.side + o..y * lay.side + o + m]);
                }
                v
            })
            .collect();
        let src: Vec<&[f32]> = window.iter().map(|v| v.as_slice()).collect();
        let start = o + r;
        let origin = BlockOrigin {
            gx: (wk.wx * lay.n + lay.gx * 2 + start - lay.h) % lay.gx,
            gy: (wk.wy * lay.n + lay.gy * 2 + start - lay.h) % lay.gy,
            extent_x: lay.gx,
            extent_y: lay.gy,
        };
        let stage = (wk.level + k) % kernel.stages();
        apply_window(kernel, stage, &src, m, m, &mut out, origin)?;
        let mo = m - 2 * r;
        for (f, vals) in wk.buf.iter_mut().zip(&out) {
            for j in 0..mo {
                let row = (start + j) * lay.side + start;
                f[row..row + mo].copy_from_slice(&vals[j * mo..(j + 1) * mo]);
            }
        }
        costs.push(cfg.cost.seconds(mo as f64));
    }
    Ok(costs)
}

fn progress<K: Kernel>(kernel: &K, sim: &mut Sim, wk: &mut Worker, id: usize, t: f64) -> Result<(), EngineError> {
    loop {
        match wk.phase {
            Phase::Horizontal(k) => {
                let Some((from_left, from_right)) = take(wk, k, Direction::Left, Direction::Right) else {
                    return Ok(());
                };
                let lay = sim.lay;
                lay.put_cols(&mut wk.buf, 0, &from_left);
                lay.put_cols(&mut wk.buf, lay.n + lay.h, &from_right);
                sim.send_vertical(wk, id, k, t);
                wk.phase = Phase::Vertical(k);
            }
            Phase::Vertical(k) => {
                let Some((from_down, from_up)) = take(wk, k, Direction::Down, Direction::Up) else {
                    return Ok(());
                };
                let lay = sim.lay;
                lay.put_rows(&mut wk.buf, 0, &from_down);
                lay.put_rows(&mut wk.buf, lay.n + lay.h, &from_up);
                let q = lay.p.min(sim.cfg.iterations - wk.level);
                let costs = compute_round(kernel, &lay, wk, sim.cfg, q)?;
                let mut at = t;
                for (i, c) in costs.iter().enumerate() {
                    at += c;
                    record(&mut wk.telemetry, wk.level + i + 1, at, sim.cfg);
                }
                sim.queue.push(at, Event::ComputeDone { worker: id, stages: q });
                wk.phase = Phase::Computing(k);
                return Ok(());
            }
            Phase::Computing(_) | Phase::Done => return Ok(()),
        }
    }
}

pub(super) fn run<K: Kernel>(
    kernel: &K,
    geometry: &TorusGeometry,
    initial: &[Vec<f32>],
    cfg: &RunConfig,
    p: usize,
) -> Result<RunOutput, EngineError> {
    let r = kernel.radius();
    let h = r * p;
    let n = geometry.n;
    if h > n {
        return Err(EngineError::Config(format!(
            "halo width {h} exceeds the block side n = {n}; neighbours cannot supply it"
        )));
    }
    let (gx, gy) = geometry.extent();
    let lay = Layout {
        n,
        h,
        r,
        p,
        side: n + 2 * h,
        gx,
        gy,
    };
    let count = geometry.worker_count();
    let mut workers: Vec<Worker> = (0..count)
        .map(|id| {
            let (wx, wy) = geometry.worker_coords(id);
            let block = scatter(initial, geometry, wx, wy, 0);
            let buf = block
                .iter()
                .map(|b| {
                    let mut f = vec![f32::NAN; lay.side * lay.side];
                    for j in 0..n {
                        let row = (j + h) * lay.side + h;
                        f[row..row + n].copy_from_slice(&b[j * n..(j + 1) * n]);
                    }
                    f
                })
                .collect();
            let mut telemetry = Vec::new();
            record(&mut telemetry, 0, 0.0, cfg);
            Worker {
                wx,
                wy,
                buf,
                inbox: BTreeMap::new(),
                phase: if cfg.iterations == 0 { Phase::Done } else { Phase::Horizontal(0) },
                level: 0,
                telemetry,
            }
        })
        .collect();

    let mut sim = Sim {
        lay,
        geometry,
        cfg,
        net: Network::new(count, cfg.horizontal, cfg.vertical),
        queue: EventQueue::new(),
        trace: Vec::new(),
    };
    if let Some((id, dir)) = cfg.sever {
        sim.net.link_mut(id, dir).sever();
    }
    for (id, wk) in workers.iter_mut().enumerate() {
        if wk.phase != Phase::Done {
            sim.send_horizontal(wk, id, 0, 0.0);
        }
    }

    let mut levels = vec![0usize; count];
    let mut max_skew = 0;
    while let Some((t, ev)) = sim.queue.pop() {
        match ev {
            Event::Arrive {
                worker,
                round,
                slot,
                payload,
                from,
                dir,
            } => {
                let bytes = payload.len() * cfg.bytes_per_value;
                sim.net.link_mut(from, dir).mark_delivered(bytes);
                if cfg.record_trace {
                    sim.trace.push(TraceEvent {
                        time: t,
                        kind: TraceKind::Deliver,
                        source: from,
                        direction: dir,
                        iteration: round * p,
                        bytes,
                    });
                }
                let wk = &mut workers[worker];
                wk.inbox.insert((round, slot.index()), payload);
                progress(kernel, &mut sim, wk, worker, t)?;
            }
            Event::ComputeDone { worker, stages } => {
                let wk = &mut workers[worker];
                let Phase::Computing(k) = wk.phase else {
                    unreachable!("compute completion outside a compute phase")
                };
                wk.level += stages;
                levels[worker] = wk.level;
                max_skew = max_skew.max(levels.iter().max().unwrap() - levels.iter().min().unwrap());
                if wk.level >= cfg.iterations {
                    wk.phase = Phase::Done;
                } else {
                    sim.send_horizontal(wk, worker, k + 1, t);
                    wk.phase = Phase::Horizontal(k + 1);
                    progress(kernel, &mut sim, wk, worker, t)?;
                }
            }
        }
    }

    if workers.iter().any(|w| w.phase != Phase::Done) {
        let status: Vec<String> = workers
            .iter()
            .enumerate()
            .filter(|(_, w)| w.phase != Phase::Done)
            .map(|(i, w)| format!("worker {i} at iteration {} in {:?}", w.level, w.phase))
            .collect();
        return Err(EngineError::Deadlock(status.join("; ")));
    }

    let mut fields = vec![vec![0.0f32; gx * gy]; kernel.field_count()];
    for wk in &workers {
        let block: Vec<Vec<f32>> = wk
            .buf
            .iter()
            .map(|f| {
                let mut b = Vec::with_capacity(n * n);
                for j in 0..n {
                    let row = (j + h) * lay.side + h;
                    b.extend_from_slice(&f[row..row + n]);
                }
                b
            })
            .collect();
        gather(&mut fields, &block, geometry, wk.wx, wk.wy, 0);
    }
    let final_time = workers
        .iter()
        .filter_map(|w| w.telemetry.last().map(|s| s.time))
        .fold(0.0, f64::max);
    Ok(RunOutput {
        fields,
        telemetry: workers.into_iter().map(|w| w.telemetry).collect(),
        links: sim.net.stats(),
        final_time,
        iterations: cfg.iterations,
        max_skew,
        warmup_levels: vec![0; count],
        trace: sim.trace,
    })
}
