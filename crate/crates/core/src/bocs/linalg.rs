//! Dense symmetric positive-definite helpers on row-major square matrices.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// In-place lower Cholesky factor `A = L L^T`; the upper triangle is zeroed.
pub fn cholesky<T: Scalar>(a: &mut [T], p: usize) -> Result<()> {
    debug_assert_eq!(a.len(), p * p);
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::Validation(format!("matrix not positive definite at pivot {j}")));
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
        for k in j + 1..p {
            a[j * p + k] = T::zero();
        }
    }
    Ok(())
}

/// Cholesky with diagonal jitter escalation for nearly singular inputs.
pub fn cholesky_jittered<T: Scalar>(a: &[T], p: usize) -> Result<Vec<T>> {
    let mean_diag = (0..p).map(|i| a[i * p + i].abs()).sum::<T>() / lit::<T>(p.max(1) as f64);
    let base = if mean_diag > T::zero() { mean_diag } else { T::one() };
    let mut jitter = T::zero();
    for _ in 0..12 {
        let mut l = a.to_vec();
        for i in 0..p {
            l[i * p + i] += jitter;
        }
        if cholesky(&mut l, p).is_ok() {
            return Ok(l);
        }
        jitter = if jitter == T::zero() {
            base * T::epsilon() * lit(16.0)
        } else {
            jitter * lit(100.0)
        };
    }
    Err(Error::Validation("matrix not positive definite even with jitter".into()))
}

/// Solves `L x = b` in place.
pub fn solve_lower<T: Scalar>(l: &[T], p: usize, b: &mut [T]) {
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
}

/// Solves `L^T x = b` in place.
pub fn solve_lower_transpose<T: Scalar>(l: &[T], p: usize, b: &mut [T]) {
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= l[k * p + i] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
}

/// Solves `(L L^T) x = b` in place.
pub fn solve_cholesky<T: Scalar>(l: &[T], p: usize, b: &mut [T]) {
    solve_lower(l, p, b);
    solve_lower_transpose(l, p, b);
}
