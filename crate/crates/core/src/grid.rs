//! Field storage with halo layout, torus geometry and the translation
//! bookkeeping that maps grid points to workers as the domain moves.
//!
//! Coordinates are `(x, y)` = (column, row). Storage is row-major, so the
//! value at `(x, y)` lives at `y * side + x`. In the translated layout a
//! worker holds an `(n + w) x (n + w)` array whose interior occupies
//! `[w, n + w)` on both axes and whose halo sits on the low (left/bottom)
//! side, where packages from upstream neighbours land.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("stencil radius must be at least 1")]
    ZeroRadius,
    #[error("interior size n = {n} is smaller than the halo width w = {w}")]
    InteriorTooSmall { n: usize, w: usize },
    #[error("local index ({x}, {y}) is outside the interior range [{lo}, {hi})")]
    OutsideInterior { x: usize, y: usize, lo: usize, hi: usize },
    #[error("worker {0} does not exist in this geometry")]
    NoSuchWorker(usize),
    #[error("torus needs at least one worker on each axis")]
    EmptyTorus,
}

/// Stencil reach and the derived communication-layer width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StencilSpec {
    radius: usize,
    fields_exchanged: usize,
}

impl StencilSpec {
    pub fn new(radius: usize, fields_exchanged: usize) -> Result<Self, GridError> {
        if radius == 0 {
            return Err(GridError::ZeroRadius);
        }
        Ok(Self {
            radius,
            fields_exchanged,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Width of the communication layer, always twice the radius.
    pub fn halo_width(&self) -> usize {
        2 * self.radius
    }

    pub fn fields_exchanged(&self) -> usize {
        self.fields_exchanged
    }
}

/// One scalar field of a worker: an `n x n` interior plus halo bands.
///
/// `lo` is the halo width on the left and bottom, `hi` on the right and
/// top. Domain translation uses `lo = w, hi = 0`; the fixed-partition
/// methods use a symmetric halo.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloField {
    n: usize,
    lo: usize,
    hi: usize,
    data: Vec<f32>,
}

impl HaloField {
    /// Translated layout: `(n + w)^2` values, interior at `[w, n + w)`.
    pub fn translated(n: usize, w: usize) -> Self {
        Self::with_halo(n, w, 0)
    }

    /// Symmetric layout with `h` halo cells on every side.
    pub fn padded(n: usize, h: usize) -> Self {
        Self::with_halo(n, h, h)
    }

    pub fn with_halo(n: usize, lo: usize, hi: usize) -> Self {
        let side = n + lo + hi;
        Self {
            n,
            lo,
            hi,
            data: vec![0.0; side * side],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    pub fn side(&self) -> usize {
        self.n + self.lo + self.hi
    }

    /// Interior index range on either axis.
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.lo..self.lo + self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.side() + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        let side = self.side();
        self.data[y * side + x] = v;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f32) {
        self.data.fill(v);
    }

    /// Overwrite every non-interior cell with `v`.
    pub fn fill_halo(&mut self, v: f32) {
        let side = self.side();
        let r = self.interior();
        for y in 0..side {
            for x in 0..side {
                if !(r.contains(&x) && r.contains(&y)) {
                    self.data[y * side + x] = v;
                }
            }
        }
    }

    /// Interior values, row-major `n x n`.
    pub fn interior_values(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for y in self.interior() {
            for x in self.interior() {
                out.push(self.get(x, y));
            }
        }
        out
    }

    /// Copy a row-major `n x n` block into the interior.
    pub fn set_interior(&mut self, values: &[f32]) {
        assert_eq!(values.len(), self.n * self.n, "interior size mismatch");
        let lo = self.lo;
        for y in 0..self.n {
            for x in 0..self.n {
                self.set(lo + x, lo + y, values[y * self.n + x]);
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn interior_finite(&self) -> bool {
        self.interior_values().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
    Down,
    Up,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Right,
        Direction::Down,
        Direction::Up,
    ];

    pub fn opposite(self) -> Self {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
            Direction::Down => 2,
            Direction::Up => 3,
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Direction::Left | Direction::Right)
    }
}

/// Workers arranged on a 2D torus, each owning `n x n` grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGeometry {
    pub workers_x: usize,
    pub workers_y: usize,
    pub n: usize,
}

impl TorusGeometry {
    pub fn new(workers_x: usize, workers_y: usize, n: usize) -> Result<Self, GridError> {
        if workers_x == 0 || workers_y == 0 || n == 0 {
            return Err(GridError::EmptyTorus);
        }
        Ok(Self {
            workers_x,
            workers_y,
            n,
        })
    }

    pub fn worker_count(&self) -> usize {
        self.workers_x * self.workers_y
    }

    /// Global extent `(Gx, Gy)`.
    pub fn extent(&self) -> (usize, usize) {
        (self.workers_x * self.n, self.workers_y * self.n)
    }

    pub fn worker_id(&self, wx: usize, wy: usize) -> usize {
        wy * self.workers_x + wx
    }

    pub fn worker_coords(&self, id: usize) -> (usize, usize) {
        (id % self.workers_x, id / self.workers_x)
    }

    /// Neighbour in the given direction, wrapping around the torus.
    pub fn neighbor(&self, id: usize, dir: Direction) -> usize {
        let (wx, wy) = self.worker_coords(id);
        let (nx, ny) = match dir {
            Direction::Left => ((wx + self.workers_x - 1) % self.workers_x, wy),
            Direction::Right => ((wx + 1) % self.workers_x, wy),
            Direction::Down => (wx, (wy + self.workers_y - 1) % self.workers_y),
            Direction::Up => (wx, (wy + 1) % self.workers_y),
        };
        self.worker_id(nx, ny)
    }

    pub fn check_worker(&self, id: usize) -> Result<(), GridError> {
        if id < self.worker_count() {
            Ok(())
        } else {
            Err(GridError::NoSuchWorker(id))
        }
    }
}

/// How far the grid has moved downstream relative to the workers.
///
/// Grid data travels toward `+x`/`+y` (it is sent right and up), so after
/// `t` iterations the point held at a given local cell is `r * t` points
/// further upstream than it was at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TranslationOffset {
    pub ox: usize,
    pub oy: usize,
}

impl TranslationOffset {
    pub fn new(ox: usize, oy: usize) -> Self {
        Self { ox, oy }
    }

    /// Offset after `t` iterations starting from zero.
    pub fn after(t: usize, r: usize, geometry: &TorusGeometry) -> Self {
        let (gx, gy) = geometry.extent();
        Self {
            ox: ((r as u128 * t as u128) % gx as u128) as usize,
            oy: ((r as u128 * t as u128) % gy as u128) as usize,
        }
    }

    pub fn advance(&mut self, r: usize, geometry: &TorusGeometry) {
        let (gx, gy) = geometry.extent();
        self.ox = (self.ox + r) % gx;
        self.oy = (self.oy + r) % gy;
    }
}

/// Torus coordinate of the grid point currently held in a worker's
/// interior cell `(local_x, local_y)` of the translated layout.
pub fn global_coord(
    geometry: &TorusGeometry,
    worker: usize,
    local_x: usize,
    local_y: usize,
    w: usize,
    offset: TranslationOffset,
) -> Result<(usize, usize), GridError> {
    geometry.check_worker(worker)?;
    let n = geometry.n;
    let hi = n + w;
    if !(w..hi).contains(&local_x) || !(w..hi).contains(&local_y) {
        return Err(GridError::OutsideInterior {
            x: local_x,
            y: local_y,
            lo: w,
            hi,
        });
    }
    let (wx, wy) = geometry.worker_coords(worker);
    let (gx, gy) = geometry.extent();
    Ok((
        wrap(wx * n + local_x - w, offset.ox, gx),
        wrap(wy * n + local_y - w, offset.oy, gy),
    ))
}

/// `(base - shift) mod extent` for unsigned inputs.
#[inline]
pub(crate) fn wrap(base: usize, shift: usize, extent: usize) -> usize {
    (base % extent + extent - shift % extent) % extent
}

/// Move the contents of a translated field by `r` cells toward its
/// downstream (right/top) edge, the pure data-motion part of one
/// translation step. The result's halo is poisoned with NaN because it
/// must be refilled by the next receive before it can be read.
pub fn shift_local(field: &HaloField, r: usize) -> HaloField {
    let mut out = HaloField::with_halo(field.n(), field.lo(), field.hi());
    out.fill(f32::NAN);
    let range = field.interior();
    for y in range.clone() {
        for x in range.clone() {
            out.set(x, y, field.get(x - r, y - r));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn stencil_spec_halo_is_twice_radius() {
        let s = StencilSpec::new(3, 1).unwrap();
        assert_eq!(s.halo_width(), 6);
        assert_eq!(StencilSpec::new(0, 1), Err(GridError::ZeroRadius));
    }

    #[test]
    fn zero_offset_maps_origin_to_origin() {
        let g = TorusGeometry::new(2, 2, 4).unwrap();
        let p = global_coord(&g, 0, 2, 2, 2, TranslationOffset::default()).unwrap();
        assert_eq!(p, (0, 0));
    }

    #[test]
    fn translated_origin_after_t_steps() {
        // the grid has moved r*t points downstream, so the origin cell now
        // holds the point r*t upstream of global zero
        let g = TorusGeometry::new(2, 3, 4).unwrap();
        let r = 1;
        for t in 0..40 {
            let off = TranslationOffset::after(t, r, &g);
            let (gx, gy) = g.extent();
            assert_eq!(off, TranslationOffset::new((r * t) % gx, (r * t) % gy));
            let p = global_coord(&g, 0, 2 * r, 2 * r, 2 * r, off).unwrap();
            assert_eq!(p, ((gx - (r * t) % gx) % gx, (gy - (r * t) % gy) % gy));
        }
    }

    #[test]
    fn mapping_is_bijective_after_three_steps() {
        let g = TorusGeometry::new(2, 2, 4).unwrap();
        let (r, w) = (1, 2);
        let off = TranslationOffset::after(3, r, &g);
        let mut seen = HashSet::new();
        for worker in 0..g.worker_count() {
            for y in w..g.n + w {
                for x in w..g.n + w {
                    assert!(seen.insert(global_coord(&g, worker, x, y, w, off).unwrap()));
                }
            }
        }
        assert_eq!(seen.len(), 64);
        assert!(seen.iter().all(|&(x, y)| x < 8 && y < 8));
    }

    #[test]
    fn out_of_interior_is_rejected() {
        let g = TorusGeometry::new(1, 1, 4).unwrap();
        let off = TranslationOffset::default();
        assert!(matches!(
            global_coord(&g, 0, 1, 2, 2, off),
            Err(GridError::OutsideInterior { .. })
        ));
        assert!(global_coord(&g, 0, 6, 2, 2, off).is_err());
        assert_eq!(global_coord(&g, 1, 2, 2, 2, off), Err(GridError::NoSuchWorker(1)));
    }

    #[test]
    fn neighbours_wrap_and_self_link() {
        let g = TorusGeometry::new(3, 1, 4).unwrap();
        assert_eq!(g.neighbor(0, Direction::Left), 2);
        assert_eq!(g.neighbor(2, Direction::Right), 0);
        assert_eq!(g.neighbor(1, Direction::Up), 1);
        assert_eq!(g.neighbor(1, Direction::Down), 1);
    }

    #[test]
    fn shift_of_constant_is_constant() {
        let mut f = HaloField::translated(6, 2);
        f.fill(3.5);
        let s = shift_local(&f, 1);
        assert!(s.interior_values().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn shift_moves_marker_downstream() {
        let mut f = HaloField::translated(6, 2);
        f.set(4, 5, 1.0);
        let s = shift_local(&f, 1);
        assert_eq!(s.get(5, 6), 1.0);
        let total: f32 = s.interior_values().iter().sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn n_over_r_shifts_on_single_worker_return_field() {
        let (n, r) = (6, 2);
        let w = 2 * r;
        let mut f = HaloField::translated(n, w);
        let mut k = 0.0;
        for y in f.interior() {
            for x in f.interior() {
                f.set(x, y, k);
                k += 1.0;
            }
        }
        let original = f.clone();
        let mut cur = f;
        for _ in 0..n / r {
            // refill the low halo from the self-linked right/top edges
            let side = cur.side();
            for y in 0..side {
                for x in 0..side {
                    if x < w || y < w {
                        let sx = if x < w { x + n } else { x };
                        let sy = if y < w { y + n } else { y };
                        let v = cur.get(sx, sy);
                        cur.set(x, y, v);
                    }
                }
            }
            cur = shift_local(&cur, r);
        }
        assert_eq!(cur.interior_values(), original.interior_values());
    }
}
