//! Dense symmetric solves for the Newton systems (row-major storage).

use alloc::vec::Vec;

use crate::math;

/// In-place lower Cholesky factor of an `n x n` matrix. Returns `false` if a
/// pivot is not strictly positive.
pub(crate) fn cholesky_in_place(n: usize, a: &mut [f64]) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = math::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L L^T x = b` given the factor from [`cholesky_in_place`].
pub(crate) fn cholesky_solve(n: usize, l: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Solves `(A + shift I) x = b` for symmetric `A`, raising `shift` until the
/// factorization succeeds. Returns the solution and the shift used.
pub(crate) fn regularized_solve(n: usize, a: &[f64], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    let mut work = a.to_vec();
    for _ in 0..30 {
        work.copy_from_slice(a);
        for i in 0..n {
            work[i * n + i] += shift;
        }
        if cholesky_in_place(n, &mut work) {
            return Some((cholesky_solve(n, &work, b), shift));
        }
        shift = if shift == 0.0 { 1e-12 * max_diag } else { shift * 100.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn solves_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum()).collect();
        let (sol, shift) = regularized_solve(3, &a, &b).unwrap();
        assert_eq!(shift, 0.0);
        for i in 0..3 {
            assert!((sol[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_gets_shifted() {
        let a = vec![1.0, 0.0, 0.0, -1.0];
        let (sol, shift) = regularized_solve(2, &a, &[1.0, 1.0]).unwrap();
        assert!(shift > 1.0);
        assert!(sol[0] > 0.0 && sol[1] > 0.0);
    }
}
