//! Per-point numerical updates and the machinery that applies them to
//! blocks of storage.
//!
//! A [`Kernel`] describes one point update in terms of the point's global
//! neighbourhood. Every execution method (single grid, translated workers,
//! fixed partitions with halos) evaluates exactly the same per-point
//! arithmetic in the same order, which is what makes results bit-identical
//! across partitions.

pub mod linear;
pub mod periodic;
mod scalar;
pub mod swe;
pub mod trig;

pub use linear::LinearStencilKernel;
pub use scalar::{count_flops, Counted, Scalar};
pub use swe::{SweKernel, SweParams, SweState};
pub use trig::TrigTables;

use crate::grid::HaloField;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("linear stencil needs 5 or 9 coefficients, got {0}")]
    CoefficientCount(usize),
    #[error("stencil coefficient {0} is not finite")]
    NonFiniteCoefficient(usize),
    #[error("latitude {0:.6} rad reaches a pole; secant is unbounded")]
    PoleIncluded(f64),
    #[error("non-finite value produced (CFL violation?) at global point ({x}, {y})")]
    Unstable { x: usize, y: usize },
    #[error("invalid SWE parameter: {0}")]
    BadParameter(&'static str),
    #[error("field layout mismatch: {0}")]
    Layout(&'static str),
}

/// Read access to the fields around the point being updated.
pub trait Neighborhood<S> {
    /// Value of `field` at offset `(dx, dy)` from the centre point.
    fn at(&self, field: usize, dx: isize, dy: isize) -> S;
}

pub trait Kernel: Sync {
    fn name(&self) -> &str;

    /// Number of per-point fields carried (all of them move with their
    /// grid point).
    fn field_count(&self) -> usize;

    /// Sub-steps making up one physical time step; the domain is remapped
    /// once per stage.
    fn stages(&self) -> usize {
        1
    }

    /// Manhattan reach of a single stage.
    fn radius(&self) -> usize {
        1
    }

    /// Compute every output field for the point at global `(gx, gy)`.
    fn update_point<S: Scalar, N: Neighborhood<S>>(
        &self,
        stage: usize,
        nb: &N,
        gx: usize,
        gy: usize,
        out: &mut [S],
    );
}

struct Window<'a> {
    fields: &'a [&'a [f32]],
    side: usize,
    cx: usize,
    cy: usize,
}

impl<S: Scalar> Neighborhood<S> for Window<'_> {
    #[inline(always)]
    fn at(&self, field: usize, dx: isize, dy: isize) -> S {
        let x = (self.cx as isize + dx) as usize;
        let y = (self.cy as isize + dy) as usize;
        S::from_f32(self.fields[field][y * self.side + x])
    }
}

/// Where an output block sits on the global torus.
#[derive(Debug, Clone, Copy)]
pub struct BlockOrigin {
    /// Global coordinate of output cell (0, 0).
    pub gx: usize,
    pub gy: usize,
    /// Global extent used to wrap coordinates.
    pub extent_x: usize,
    pub extent_y: usize,
}

impl BlockOrigin {
    /// Origin for kernels that do not depend on global position.
    pub fn local() -> Self {
        Self {
            gx: 0,
            gy: 0,
            extent_x: usize::MAX,
            extent_y: usize::MAX,
        }
    }
}

/// Apply one kernel stage to a rectangular input window.
///
/// `src[f]` is a `width x height` row-major block for field `f`. Output
/// cell `(i, j)` (row-major in `out[f]`, `width - 2r` wide) is the update of
/// the point centred at window cell `(i + r, j + r)`. A non-finite output
/// is reported with its global coordinate.
pub fn apply_window<K: Kernel>(
    kernel: &K,
    stage: usize,
    src: &[&[f32]],
    width: usize,
    height: usize,
    out: &mut [Vec<f32>],
    origin: BlockOrigin,
) -> Result<(), KernelError> {
    let r = kernel.radius();
    let nf = kernel.field_count();
    if src.len() != nf || out.len() != nf {
        return Err(KernelError::Layout("field count"));
    }
    let (mx, my) = match (width.checked_sub(2 * r), height.checked_sub(2 * r)) {
        (Some(mx), Some(my)) => (mx, my),
        _ => return Err(KernelError::Layout("window narrower than stencil")),
    };
    for o in out.iter_mut() {
        o.clear();
        o.resize(mx * my, 0.0);
    }
    let mut point = vec![0.0f32; nf];
    let mut bad = None;
    for j in 0..my {
        let gy = (origin.gy + j) % origin.extent_y;
        for i in 0..mx {
            let gx = (origin.gx + i) % origin.extent_x;
            let nb = Window {
                fields: src,
                side: width,
                cx: i + r,
                cy: j + r,
            };
            kernel.update_point(stage, &nb, gx, gy, &mut point);
            for (f, v) in point.iter().enumerate() {
                if bad.is_none() && !v.is_finite() {
                    bad = Some((gx, gy));
                }
                out[f][j * mx + i] = *v;
            }
        }
    }
    match bad {
        Some((x, y)) => Err(KernelError::Unstable { x, y }),
        None => Ok(()),
    }
}

/// Apply one stage to a set of halo fields and return fields in the same
/// layout with the interior replaced and the halo poisoned (NaN).
///
/// With the translated layout (`lo = 2r`, `hi = 0`) this is the listing's
/// compute step: output `(i + w, j + w)` is evaluated around input
/// `(i + r, j + r)`, so every point moves `r` cells downstream. With a
/// symmetric `r`-wide halo it is an ordinary in-place stencil sweep.
pub fn apply_fields<K: Kernel>(
    kernel: &K,
    stage: usize,
    fields: &[HaloField],
    origin: BlockOrigin,
) -> Result<Vec<HaloField>, KernelError> {
    let r = kernel.radius();
    let first = fields.first().ok_or(KernelError::Layout("no fields"))?;
    if first.lo() + first.hi() != 2 * r {
        return Err(KernelError::Layout("halo must total twice the radius"));
    }
    let side = first.side();
    let src: Vec<&[f32]> = fields.iter().map(|f| f.as_slice()).collect();
    let mut out = vec![Vec::new(); fields.len()];
    apply_window(kernel, stage, &src, side, side, &mut out, origin)?;
    Ok(out
        .into_iter()
        .zip(fields)
        .map(|(vals, f)| {
            let mut h = HaloField::with_halo(f.n(), f.lo(), f.hi());
            h.fill(f32::NAN);
            h.set_interior(&vals);
            h
        })
        .collect())
}
