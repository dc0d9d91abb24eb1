use std::cell::Cell;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic the kernels are written against. `f32` is the production
/// type; [`Counted`] tallies every floating-point operation so per-point
/// FLOP counts can be measured instead of estimated.
pub trait Scalar:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f32(v: f32) -> Self;
    fn to_f32(self) -> f32;
}

impl Scalar for f32 {
    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        v
    }

    #[inline(always)]
    fn to_f32(self) -> f32 {
        self
    }
}

thread_local! {
    static FLOPS: Cell<u64> = const { Cell::new(0) };
}

/// `f32` that counts add, sub, mul and div on a thread-local tally.
/// Negation is a sign flip and is not counted.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Counted(pub f32);

#[inline]
fn bump() {
    FLOPS.with(|c| c.set(c.get() + 1));
}

impl Add for Counted {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        bump();
        Counted(self.0 + rhs.0)
    }
}

impl Sub for Counted {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        bump();
        Counted(self.0 - rhs.0)
    }
}

impl Mul for Counted {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        bump();
        Counted(self.0 * rhs.0)
    }
}

impl Div for Counted {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        bump();
        Counted(self.0 / rhs.0)
    }
}

impl Neg for Counted {
    type Output = Self;
    fn neg(self) -> Self {
        Counted(-self.0)
    }
}

impl Scalar for Counted {
    fn from_f32(v: f32) -> Self {
        Counted(v)
    }

    fn to_f32(self) -> f32 {
        self.0
    }
}

/// Run `f` and return its result with the number of counted operations
/// performed on this thread while it ran.
pub fn count_flops<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = FLOPS.with(|c| c.get());
    let r = f();
    let after = FLOPS.with(|c| c.get());
    (r, after - before)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_binary_ops_only() {
        let (v, n) = count_flops(|| {
            let a = Counted(2.0);
            let b = Counted(3.0);
            -(a * b + a - b / a)
        });
        assert_eq!(v.0, -(2.0 * 3.0 + 2.0 - 1.5));
        assert_eq!(n, 4);
    }
}
