//! Generic linear 5-point and 9-point stencils with forward-Euler time
//! integration folded into the coefficients.

use super::{apply_fields, BlockOrigin, Kernel, KernelError, Neighborhood, Scalar};
use crate::grid::HaloField;
use serde::{Deserialize, Serialize};

/// Neighbour offsets in accumulation order: W, S, E, N, C, then the
/// diagonals SW, SE, NW, NE for the 9-point form.
pub const OFFSETS: [(isize, isize); 9] = [
    (-1, 0),
    (0, -1),
    (1, 0),
    (0, 1),
    (0, 0),
    (-1, -1),
    (1, -1),
    (-1, 1),
    (1, 1),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearStencilKernel {
    coeffs: Vec<f32>,
    name: String,
}

impl LinearStencilKernel {
    pub fn new(coeffs: Vec<f32>) -> Result<Self, KernelError> {
        if coeffs.len() != 5 && coeffs.len() != 9 {
            return Err(KernelError::CoefficientCount(coeffs.len()));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(KernelError::NonFiniteCoefficient(i));
        }
        let name = if coeffs.len() == 5 { "heat5" } else { "heat9" };
        Ok(Self {
            coeffs,
            name: name.to_string(),
        })
    }

    /// Explicit heat equation with the 5-point Laplacian;
    /// `alpha = kappa * dt / dx^2`.
    pub fn heat5(alpha: f32) -> Self {
        Self::new(vec![alpha, alpha, alpha, alpha, 1.0 - 4.0 * alpha]).expect("5 coefficients")
    }

    /// Explicit heat equation with the isotropic 9-point Laplacian
    /// `(4 * edges + corners - 20 * centre) / 6`.
    pub fn heat9(alpha: f32) -> Self {
        let e = alpha * 4.0 / 6.0;
        let c = alpha / 6.0;
        Self::new(vec![e, e, e, e, 1.0 - 20.0 * alpha / 6.0, c, c, c, c]).expect("9 coefficients")
    }

    pub fn coeffs(&self) -> &[f32] {
        &self.coeffs
    }

    pub fn points(&self) -> usize {
        self.coeffs.len()
    }

    /// Multiplies plus adds per point: 9 for 5 points, 17 for 9 points.
    pub fn flops_per_point(&self) -> usize {
        2 * self.coeffs.len() - 1
    }
}

impl Kernel for LinearStencilKernel {
    fn name(&self) -> &str {
        &self.name
    }

    fn field_count(&self) -> usize {
        1
    }

    #[inline]
    fn update_point<S: Scalar, N: Neighborhood<S>>(
        &self,
        _stage: usize,
        nb: &N,
        _gx: usize,
        _gy: usize,
        out: &mut [S],
    ) {
        let (dx, dy) = OFFSETS[0];
        let mut acc = S::from_f32(self.coeffs[0]) * nb.at(0, dx, dy);
        for (k, &(dx, dy)) in OFFSETS.iter().enumerate().take(self.coeffs.len()).skip(1) {
            acc = acc + S::from_f32(self.coeffs[k]) * nb.at(0, dx, dy);
        }
        out[0] = acc;
    }
}

/// One listing-style compute step on a single translated (or `r`-padded)
/// field.
pub fn apply_linear(field: &HaloField, kernel: &LinearStencilKernel) -> Result<HaloField, KernelError> {
    let mut out = apply_fields(kernel, 0, std::slice::from_ref(field), BlockOrigin::local())?;
    Ok(out.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{count_flops, periodic, Counted};

    #[test]
    fn rejects_bad_coefficients() {
        assert_eq!(
            LinearStencilKernel::new(vec![1.0; 4]),
            Err(KernelError::CoefficientCount(4))
        );
        assert_eq!(
            LinearStencilKernel::new(vec![1.0, f32::NAN, 0.0, 0.0, 0.0]),
            Err(KernelError::NonFiniteCoefficient(1))
        );
    }

    #[test]
    fn laplacian_keeps_constants() {
        // dyadic weights keep every partial sum exact
        let k = LinearStencilKernel::heat5(0.125);
        let mut f = HaloField::translated(8, 2);
        f.fill(2.0);
        let out = apply_linear(&f, &k).unwrap();
        assert!(out.interior_values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn impulse_spreads_to_neighbours() {
        let k = LinearStencilKernel::heat5(0.1);
        let mut f = HaloField::translated(8, 2);
        // impulse at (5, 5); after one step the pattern is centred one cell
        // downstream at (6, 6)
        f.set(5, 5, 1.0);
        let out = apply_linear(&f, &k).unwrap();
        assert!((out.get(6, 6) - 0.6).abs() < 1e-7);
        for (x, y) in [(5, 6), (7, 6), (6, 5), (6, 7)] {
            assert!((out.get(x, y) - 0.1).abs() < 1e-7);
        }
        let sum: f32 = out.interior_values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fourier_mode_decays_by_discrete_symbol() {
        let n = 32;
        let alpha = 0.2f32;
        let k = LinearStencilKernel::heat5(alpha);
        for mode in [1usize, 3, 5] {
            let kx = 2.0 * std::f64::consts::PI * mode as f64 / n as f64;
            let init: Vec<f32> = (0..n * n).map(|i| (kx * (i % n) as f64).cos() as f32).collect();
            let next = periodic::step(&k, 0, std::slice::from_ref(&init), n, n).unwrap();
            let factor = 1.0 - 4.0 * alpha as f64 * (kx / 2.0).sin().powi(2);
            for i in 0..n * n {
                let want = factor * init[i] as f64;
                assert!((next[0][i] as f64 - want).abs() < 1e-6, "mode {mode} cell {i}");
            }
        }
    }

    #[test]
    fn flop_counts_match_published_values() {
        for (k, want) in [
            (LinearStencilKernel::heat5(0.1), 9),
            (LinearStencilKernel::heat9(0.1), 17),
        ] {
            let mut f = HaloField::translated(1, 2);
            f.fill(1.0);
            let (_, flops) = count_flops(|| {
                let src = [f.as_slice()];
                let mut out = [Counted(0.0)];
                let nb = CountWin(src[0], 3);
                k.update_point(0, &nb, 0, 0, &mut out);
            });
            assert_eq!(flops, want);
            assert_eq!(k.flops_per_point() as u64, want);
        }
    }

    struct CountWin<'a>(&'a [f32], usize);

    impl Neighborhood<Counted> for CountWin<'_> {
        fn at(&self, _f: usize, dx: isize, dy: isize) -> Counted {
            let x = (1 + dx) as usize;
            let y = (1 + dy) as usize;
            Counted(self.0[y * self.1 + x])
        }
    }

    #[test]
    fn repeated_application_is_bit_identical() {
        let k = LinearStencilKernel::heat9(0.15);
        let mut f = HaloField::translated(6, 2);
        for (i, v) in f.as_mut_slice().iter_mut().enumerate() {
            *v = ((i * 37) % 11) as f32 * 0.1;
        }
        let a = apply_linear(&f, &k).unwrap();
        let b = apply_linear(&f, &k).unwrap();
        assert_eq!(
            a.interior_values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.interior_values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
