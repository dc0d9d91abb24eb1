//! Tile-pipelined translation.
//!
//! At level `L` (after `L` iterations) worker `(wx, wy)` holds, in interior
//! cell `i`, the global point `wx * n + i - r L`. Output cell `i` of level
//! `L + 1` is centred on input cell `i - r`, so it reads cells
//! `[i - 2r, i]`: every dependency lies on the low side. A tile of level
//! `L + 1` therefore needs its own tile and its left, lower and lower-left
//! neighbours at level `L`; tiles on the low edges take those values from
//! the packages of the upstream workers.
//!
//! Edges are streamed per tile: as soon as an edge tile of level `L` is
//! done its `w`-wide strip is sent, so a downstream tile waits only for the
//! strips it actually reads.

use super::{gather, record, scatter, EngineError, RunConfig, RunOutput};
use crate::grid::{Direction, TorusGeometry};
use crate::kernels::{apply_window, BlockOrigin, Kernel};
use crate::netsim::{EventQueue, Network, Sample, TraceEvent, TraceKind};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Right-edge strip of tile row `b` of the left neighbour, `ty` rows
    /// by `w` columns.
    Left(usize),
    /// Top-edge strip of tile column `a` of the lower neighbour, `w` rows
    /// by `tx` columns.
    Bottom(usize),
    /// Top-right `w x w` corner of the lower-left neighbour.
    Corner,
}

enum Event {
    TileDone {
        worker: usize,
    },
    Arrive {
        worker: usize,
        kind: Kind,
        level: usize,
        payload: Vec<f32>,
        from: usize,
        dir: Direction,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TileState {
    Pending,
    Queued,
    Done,
}

struct Level {
    level: usize,
    data: Vec<Vec<f32>>,
    state: Vec<TileState>,
    remaining: usize,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    w: usize,
    r: usize,
    tx: usize,
    ty: usize,
    sx: usize,
    sy: usize,
    nf: usize,
    gx: usize,
    gy: usize,
    iterations: usize,
}

impl Layout {
    fn new_level(&self, level: usize) -> Level {
        let tiles = self.sx * self.sy;
        Level {
            level,
            data: vec![vec![f32::NAN; self.n * self.n]; self.nf],
            state: vec![TileState::Pending; tiles],
            remaining: tiles,
        }
    }
}

struct Worker {
    wx: usize,
    wy: usize,
    levels: VecDeque<Level>,
    left: BTreeMap<(usize, usize), Vec<f32>>,
    bottom: BTreeMap<(usize, usize), Vec<f32>>,
    corner: BTreeMap<(usize, usize), Vec<f32>>,
    /// Keyed `(L + sx + sy - a - b, L, tile)`, smallest first: tiles
    /// released by the oldest upstream strip go first.
    ready: BinaryHeap<Reverse<(usize, usize, usize)>>,
    running: Option<(usize, usize)>,
    completed: usize,
    telemetry: Vec<Sample>,
    arrived: bool,
    warmup: usize,
}

impl Worker {
    fn level(&self, l: usize) -> Option<&Level> {
        let base = self.levels.front()?.level;
        l.checked_sub(base).and_then(|i| self.levels.get(i))
    }

    fn level_mut(&mut self, l: usize) -> Option<&mut Level> {
        let base = self.levels.front()?.level;
        l.checked_sub(base).and_then(move |i| self.levels.get_mut(i))
    }

    fn is_ready(&self, lay: &Layout, l: usize, a: usize, b: usize) -> bool {
        let Some(prev) = self.level(l - 1) else {
            return false;
        };
        for (da, db) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            if a >= da && b >= db && prev.state[(b - db) * lay.sx + (a - da)] != TileState::Done {
                return false;
            }
        }
        let p = l - 1;
        let strips = |m: &BTreeMap<(usize, usize), Vec<f32>>, i: usize| {
            m.contains_key(&(p, i)) && (i == 0 || m.contains_key(&(p, i - 1)))
        };
        (a > 0 || strips(&self.left, b))
            && (b > 0 || strips(&self.bottom, a))
            && (a > 0 || b > 0 || self.corner.contains_key(&(p, 0)))
    }

    /// Queue tile `(a, b)` of level `l` if all its inputs are present.
    fn consider(&mut self, lay: &Layout, l: usize, a: usize, b: usize) {
        if l == 0 || l > lay.iterations || a >= lay.sx || b >= lay.sy {
            return;
        }
        let Some(back) = self.levels.back().map(|v| v.level) else {
            return;
        };
        if l > back + 1 || self.level(l - 1).is_none() {
            return;
        }
        let k = b * lay.sx + a;
        if let Some(cur) = self.level(l) {
            if cur.state[k] != TileState::Pending {
                return;
            }
        }
        if !self.is_ready(lay, l, a, b) {
            return;
        }
        if l == back + 1 {
            self.levels.push_back(lay.new_level(l));
        }
        self.level_mut(l).unwrap().state[k] = TileState::Queued;
        self.ready.push(Reverse((l + lay.sx + lay.sy - a - b, l, k)));
    }

    /// Evaluate tile `(a, b)` of level `l`, returning `tx x ty` values per
    /// field.
    fn compute_tile<K: Kernel>(
        &self,
        kernel: &K,
        lay: &Layout,
        l: usize,
        a: usize,
        b: usize,
    ) -> Result<Vec<Vec<f32>>, EngineError> {
        let (n, w, tx, ty) = (lay.n, lay.w, lay.tx, lay.ty);
        let prev = self.level(l - 1).expect("input level present");
        let (ww, hh) = (tx + w, ty + w);
        let mut window = vec![vec![0.0f32; ww * hh]; lay.nf];
        for (f, buf) in window.iter_mut().enumerate() {
            let own = &prev.data[f];
            for yy in 0..hh {
                let row = &mut buf[yy * ww..(yy + 1) * ww];
                let y = (b * ty + yy) as isize - w as isize;
                if y >= 0 {
                    let y = y as usize;
                    if a == 0 {
                        let strip = &self.left[&(l - 1, y / ty)][f * ty * w..(f + 1) * ty * w];
                        let yr = y % ty;
                        row[..w].copy_from_slice(&strip[yr * w..(yr + 1) * w]);
                        row[w..].copy_from_slice(&own[y * n..y * n + tx]);
                    } else {
                        let x0 = a * tx - w;
                        row.copy_from_slice(&own[y * n + x0..y * n + x0 + ww]);
                    }
                } else {
                    let strip = |i: usize| &self.bottom[&(l - 1, i)][f * w * tx + yy * tx..f * w * tx + (yy + 1) * tx];
                    if a == 0 {
                        let corner = &self.corner[&(l - 1, 0)][f * w * w..(f + 1) * w * w];
                        row[..w].copy_from_slice(&corner[yy * w..(yy + 1) * w]);
                    } else {
                        row[..w].copy_from_slice(&strip(a - 1)[tx - w..]);
                    }
                    row[w..].copy_from_slice(strip(a));
                }
            }
        }
        let shift_x = (lay.r * l) % lay.gx;
        let shift_y = (lay.r * l) % lay.gy;
        let origin = BlockOrigin {
            gx: (self.wx * n + a * tx + lay.gx - shift_x) % lay.gx,
            gy: (self.wy * n + b * ty + lay.gy - shift_y) % lay.gy,
            extent_x: lay.gx,
            extent_y: lay.gy,
        };
        let src: Vec<&[f32]> = window.iter().map(|v| v.as_slice()).collect();
        let mut out = vec![Vec::new(); lay.nf];
        apply_window(kernel, (l - 1) % kernel.stages(), &src, ww, hh, &mut out, origin)?;
        Ok(out)
    }

    /// Right-edge strip of tile row `b`.
    fn right_strip(&self, lay: &Layout, l: usize, b: usize) -> Vec<f32> {
        let (n, w) = (lay.n, lay.w);
        let lv = self.level(l).expect("level present");
        let mut p = Vec::with_capacity(lay.nf * lay.ty * w);
        for f in &lv.data {
            for y in b * lay.ty..(b + 1) * lay.ty {
                p.extend_from_slice(&f[y * n + n - w..y * n + n]);
            }
        }
        p
    }

    /// Top-edge strip of tile column `a`.
    fn top_strip(&self, lay: &Layout, l: usize, a: usize) -> Vec<f32> {
        let (n, w) = (lay.n, lay.w);
        let lv = self.level(l).expect("level present");
        let mut p = Vec::with_capacity(lay.nf * w * lay.tx);
        for f in &lv.data {
            for y in n - w..n {
                p.extend_from_slice(&f[y * n + a * lay.tx..y * n + (a + 1) * lay.tx]);
            }
        }
        p
    }
}

/// Top `w` rows of the topmost left strip.
fn corner_of(strip: &[f32], lay: &Layout) -> Vec<f32> {
    let (ty, w) = (lay.ty, lay.w);
    let mut p = Vec::with_capacity(lay.nf * w * w);
    for f in 0..lay.nf {
        let blk = &strip[f * ty * w..(f + 1) * ty * w];
        p.extend_from_slice(&blk[(ty - w) * w..ty * w]);
    }
    p
}

/// Resolve the tile shape, defaulting to the smallest square of side at
/// least `w` that divides `n`.
fn tile_shape(n: usize, w: usize, tile: Option<(usize, usize)>) -> Result<(usize, usize), EngineError> {
    if n < w {
        return Err(EngineError::Config(format!(
            "block side n = {n} is smaller than the halo width 2r = {w}"
        )));
    }
    let (tx, ty) = match tile {
        Some(t) => t,
        None => {
            let d = (w..=n).find(|d| n.is_multiple_of(*d)).unwrap();
            (d, d)
        }
    };
    if tx < w || ty < w || !n.is_multiple_of(tx) || !n.is_multiple_of(ty) {
        return Err(EngineError::Config(format!(
            "tile {tx} x {ty} must be at least {w} wide and divide n = {n}"
        )));
    }
    Ok((tx, ty))
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
    #[allow(clippy::too_many_arguments)]
    fn send(&mut self, from: usize, dir: Direction, kind: Kind, level: usize, payload: Vec<f32>, t: f64) {
        let bytes = payload.len() * self.cfg.bytes_per_value;
        let to = self.geometry.neighbor(from, dir);
        if self.cfg.record_trace {
            self.trace.push(TraceEvent {
                time: t,
                kind: TraceKind::Send,
                source: from,
                direction: dir,
                iteration: level,
                bytes,
            });
        }
        if let Some(arrival) = self.net.link_mut(from, dir).send(bytes, t) {
            self.queue.push(
                arrival,
                Event::Arrive {
                    worker: to,
                    kind,
                    level,
                    payload,
                    from,
                    dir,
                },
            );
        }
    }

    /// Stream the edge strips of tile `(a, b)` of level `l`, if it lies on
    /// the right or top edge.
    fn send_edges(&mut self, worker: &Worker, id: usize, l: usize, a: usize, b: usize, t: f64) {
        if l >= self.lay.iterations {
            return;
        }
        if a == self.lay.sx - 1 {
            let p = worker.right_strip(&self.lay, l, b);
            self.send(id, Direction::Right, Kind::Left(b), l, p, t);
        }
        if b == self.lay.sy - 1 {
            let p = worker.top_strip(&self.lay, l, a);
            self.send(id, Direction::Up, Kind::Bottom(a), l, p, t);
        }
    }
}

pub(super) fn run<K: Kernel>(
    kernel: &K,
    geometry: &TorusGeometry,
    initial: &[Vec<f32>],
    cfg: &RunConfig,
    tile: Option<(usize, usize)>,
) -> Result<RunOutput, EngineError> {
    let r = kernel.radius();
    let w = 2 * r;
    let n = geometry.n;
    let (tx, ty) = tile_shape(n, w, tile)?;
    let (gx, gy) = geometry.extent();
    let lay = Layout {
        n,
        w,
        r,
        tx,
        ty,
        sx: n / tx,
        sy: n / ty,
        nf: kernel.field_count(),
        gx,
        gy,
        iterations: cfg.iterations,
    };
    let tile_cost = cfg.cost.seconds(n as f64) / (lay.sx * lay.sy) as f64;
    let count = geometry.worker_count();

    let mut workers: Vec<Worker> = (0..count)
        .map(|id| {
            let (wx, wy) = geometry.worker_coords(id);
            let mut l0 = lay.new_level(0);
            l0.data = scatter(initial, geometry, wx, wy, 0);
            l0.state.fill(TileState::Done);
            l0.remaining = 0;
            let mut telemetry = Vec::new();
            record(&mut telemetry, 0, 0.0, cfg);
            Worker {
                wx,
                wy,
                levels: VecDeque::from([l0]),
                left: BTreeMap::new(),
                bottom: BTreeMap::new(),
                corner: BTreeMap::new(),
                ready: BinaryHeap::new(),
                running: None,
                completed: 0,
                telemetry,
                arrived: false,
                warmup: 0,
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
        for b in 0..lay.sy {
            for a in 0..lay.sx {
                sim.send_edges(wk, id, 0, a, b, 0.0);
            }
        }
        for b in 1..lay.sy {
            for a in 1..lay.sx {
                wk.consider(&lay, 1, a, b);
            }
        }
        start_next(kernel, &mut sim, wk, id, 0.0, tile_cost)?;
    }

    let mut completed = vec![0usize; count];
    let mut max_skew = 0;
    while let Some((t, ev)) = sim.queue.pop() {
        match ev {
            Event::TileDone { worker: id } => {
                let wk = &mut workers[id];
                let (l, k) = wk.running.take().expect("a tile was running");
                let (a, b) = (k % lay.sx, k / lay.sx);
                if !wk.arrived {
                    wk.warmup = wk.warmup.max(l);
                }
                let lv = wk.level_mut(l).unwrap();
                lv.state[k] = TileState::Done;
                lv.remaining -= 1;
                let level_done = lv.remaining == 0;
                sim.send_edges(wk, id, l, a, b, t);
                if level_done {
                    wk.completed = l;
                    record(&mut wk.telemetry, l, t, cfg);
                    while wk.levels.front().is_some_and(|v| v.level < l) {
                        wk.levels.pop_front();
                    }
                    for m in [&mut wk.left, &mut wk.bottom, &mut wk.corner] {
                        *m = m.split_off(&(l, 0));
                    }
                    completed[id] = l;
                    let hi = completed.iter().max().unwrap();
                    let lo = completed.iter().min().unwrap();
                    max_skew = max_skew.max(hi - lo);
                }
                for (da, db) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    wk.consider(&lay, l + 1, a + da, b + db);
                }
                start_next(kernel, &mut sim, wk, id, t, tile_cost)?;
            }
            Event::Arrive {
                worker: id,
                kind,
                level,
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
                        iteration: level,
                        bytes,
                    });
                }
                let wk = &mut workers[id];
                wk.arrived = true;
                match kind {
                    Kind::Left(b) => {
                        if b == lay.sy - 1 {
                            let c = corner_of(&payload, &lay);
                            sim.send(id, Direction::Up, Kind::Corner, level, c, t);
                        }
                        wk.left.insert((level, b), payload);
                        wk.consider(&lay, level + 1, 0, b);
                        wk.consider(&lay, level + 1, 0, b + 1);
                    }
                    Kind::Bottom(a) => {
                        wk.bottom.insert((level, a), payload);
                        wk.consider(&lay, level + 1, a, 0);
                        wk.consider(&lay, level + 1, a + 1, 0);
                    }
                    Kind::Corner => {
                        wk.corner.insert((level, 0), payload);
                        wk.consider(&lay, level + 1, 0, 0);
                    }
                }
                start_next(kernel, &mut sim, wk, id, t, tile_cost)?;
            }
        }
    }

    if workers.iter().any(|w| w.completed < cfg.iterations) {
        let status: Vec<String> = workers
            .iter()
            .enumerate()
            .filter(|(_, w)| w.completed < cfg.iterations)
            .map(|(i, w)| {
                let c = w.completed;
                let count = |m: &BTreeMap<(usize, usize), Vec<f32>>| m.range((c, 0)..(c + 1, 0)).count();
                format!(
                    "worker {i} stuck after iteration {c} holding {}/{} left strips, {}/{} bottom strips, {}/1 corners",
                    count(&w.left),
                    lay.sy,
                    count(&w.bottom),
                    lay.sx,
                    count(&w.corner),
                )
            })
            .collect();
        return Err(EngineError::Deadlock(status.join("; ")));
    }

    let mut fields = vec![vec![0.0f32; gx * gy]; lay.nf];
    let mut final_time: f64 = 0.0;
    for wk in &workers {
        let last = wk.level(cfg.iterations).expect("final level kept");
        gather(&mut fields, &last.data, geometry, wk.wx, wk.wy, r * cfg.iterations);
        final_time = final_time.max(wk.telemetry.last().map_or(0.0, |s| s.time));
    }
    Ok(RunOutput {
        fields,
        telemetry: workers.iter().map(|w| w.telemetry.clone()).collect(),
        links: sim.net.stats(),
        final_time,
        iterations: cfg.iterations,
        max_skew,
        warmup_levels: workers.iter().map(|w| w.warmup).collect(),
        trace: sim.trace,
    })
}

fn start_next<K: Kernel>(
    kernel: &K,
    sim: &mut Sim,
    wk: &mut Worker,
    id: usize,
    t: f64,
    cost: f64,
) -> Result<(), EngineError> {
    if wk.running.is_some() {
        return Ok(());
    }
    let Some(Reverse((_, l, k))) = wk.ready.pop() else {
        return Ok(());
    };
    let lay = sim.lay;
    let (a, b) = (k % lay.sx, k / lay.sx);
    let out = wk.compute_tile(kernel, &lay, l, a, b)?;
    let lv = wk.level_mut(l).unwrap();
    for (dst, src) in lv.data.iter_mut().zip(&out) {
        for j in 0..lay.ty {
            let row = (b * lay.ty + j) * lay.n + a * lay.tx;
            dst[row..row + lay.tx].copy_from_slice(&src[j * lay.tx..(j + 1) * lay.tx]);
        }
    }
    wk.running = Some((l, k));
    sim.queue.push(t + cost, Event::TileDone { worker: id });
    Ok(())
}
