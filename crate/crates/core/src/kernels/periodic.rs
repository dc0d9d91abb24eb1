//! Direct single-grid evaluation on a periodic domain. No halos, no
//! partitioning: every neighbour read wraps around the global extent. This
//! is the reference every distributed run is compared against.

use super::{Kernel, KernelError, Neighborhood, Scalar};

struct Wrapped<'a> {
    fields: &'a [Vec<f32>],
    nx: usize,
    ny: usize,
    x: usize,
    y: usize,
}

impl<S: Scalar> Neighborhood<S> for Wrapped<'_> {
    #[inline]
    fn at(&self, field: usize, dx: isize, dy: isize) -> S {
        let x = wrap(self.x, dx, self.nx);
        let y = wrap(self.y, dy, self.ny);
        S::from_f32(self.fields[field][y * self.nx + x])
    }
}

#[inline(always)]
fn wrap(i: usize, d: isize, n: usize) -> usize {
    let j = i as isize + d;
    if j < 0 {
        (j + n as isize) as usize
    } else if j as usize >= n {
        j as usize - n
    } else {
        j as usize
    }
}

/// One kernel stage over the whole `nx x ny` torus.
pub fn step<K: Kernel>(
    kernel: &K,
    stage: usize,
    fields: &[Vec<f32>],
    nx: usize,
    ny: usize,
) -> Result<Vec<Vec<f32>>, KernelError> {
    let nf = kernel.field_count();
    if fields.len() != nf || fields.iter().any(|f| f.len() != nx * ny) {
        return Err(KernelError::Layout("periodic grid size"));
    }
    let mut out = vec![vec![0.0f32; nx * ny]; nf];
    let mut point = vec![0.0f32; nf];
    for y in 0..ny {
        for x in 0..nx {
            let nb = Wrapped {
                fields,
                nx,
                ny,
                x,
                y,
            };
            kernel.update_point(stage, &nb, x, y, &mut point);
            for f in 0..nf {
                if !point[f].is_finite() {
                    return Err(KernelError::Unstable { x, y });
                }
                out[f][y * nx + x] = point[f];
            }
        }
    }
    Ok(out)
}

/// Advance `iterations` stages, cycling through the kernel's stages.
pub fn run<K: Kernel>(
    kernel: &K,
    fields: &[Vec<f32>],
    nx: usize,
    ny: usize,
    iterations: usize,
) -> Result<Vec<Vec<f32>>, KernelError> {
    let mut cur = fields.to_vec();
    for it in 0..iterations {
        cur = step(kernel, it % kernel.stages(), &cur, nx, ny)?;
    }
    Ok(cur)
}
