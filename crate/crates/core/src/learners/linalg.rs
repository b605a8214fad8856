use crate::scalar::Real;

/// In-place Cholesky factorization of a symmetric positive definite matrix
/// (row-major, lower triangle used). Returns false if a pivot is not
/// positive.
pub fn cholesky<T: Real>(a: &mut [T], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` in place given the factor from [`cholesky`].
pub fn cholesky_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `(A + shift·I) x = b` for symmetric `a`, growing the shift until
/// the factorization succeeds. Returns the shift used, or `None` if the
/// matrix could not be made positive definite.
pub fn solve_spd<T: Real>(a: &[T], n: usize, b: &mut [T]) -> Option<T> {
    let mut work = a.to_vec();
    if cholesky(&mut work, n) {
        cholesky_solve(&work, n, b);
        return Some(T::zero());
    }
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max).max(T::one());
    let mut shift = scale * T::epsilon().sqrt();
    for _ in 0..40 {
        work.copy_from_slice(a);
        for i in 0..n {
            work[i * n + i] += shift;
        }
        if cholesky(&mut work, n) {
            cholesky_solve(&work, n, b);
            return Some(shift);
        }
        shift *= T::lit(10.0);
    }
    None
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
