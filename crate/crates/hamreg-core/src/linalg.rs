//! Small dense matrix helpers for constraint projections and mass-matrix
//! solves. Row-major storage; everything here is O(n^3) on n <= 8.

use crate::error::{CoreError, Result};
use crate::math;
use alloc::vec;
use alloc::vec::Vec;

/// `out = a (m x k) * b (k x n)`, row-major.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for l in 0..k {
            let ail = a[i * k + l];
            for j in 0..n {
                out[i * n + j] += ail * b[l * n + j];
            }
        }
    }
    out
}

pub fn matvec(a: &[f64], x: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..n {
            acc += a[i * n + j] * x[j];
        }
        out[i] = acc;
    }
    out
}

pub fn transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// Solve `a x = rhs` for several right-hand sides (columns of `rhs`,
/// n x nrhs) by Gaussian elimination with partial pivoting. Returns a crude
/// condition diagnostic alongside the solution.
pub fn solve(
    a: &[f64],
    rhs: &[f64],
    n: usize,
    nrhs: usize,
    context: &'static str,
) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = rhs.to_vec();
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let mut piv = col;
        let mut best = math::abs(m[col * n + col]);
        for r in col + 1..n {
            let v = math::abs(m[r * n + col]);
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best > max_pivot {
            max_pivot = best;
        }
        if best < min_pivot {
            min_pivot = best;
        }
        if best == 0.0 || !best.is_finite() {
            return Err(CoreError::SingularSystem {
                context,
                cond: f64::INFINITY,
            });
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            for j in 0..nrhs {
                x.swap(col * nrhs + j, piv * nrhs + j);
            }
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
            for j in 0..nrhs {
                x[r * nrhs + j] -= f * x[col * nrhs + j];
            }
        }
    }
    let cond = max_pivot / min_pivot;
    if cond > 1e14 {
        return Err(CoreError::SingularSystem { context, cond });
    }
    for col in (0..n).rev() {
        let d = m[col * n + col];
        for j in 0..nrhs {
            let mut acc = x[col * nrhs + j];
            for l in col + 1..n {
                acc -= m[col * n + l] * x[l * nrhs + j];
            }
            x[col * nrhs + j] = acc / d;
        }
    }
    Ok(x)
}

/// Pivot-ratio condition diagnostic of a square matrix (no solve).
pub fn cond_estimate(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let mut piv = col;
        let mut best = math::abs(m[col * n + col]);
        for r in col + 1..n {
            let v = math::abs(m[r * n + col]);
            if v > best {
                best = v;
                piv = r;
            }
        }
        max_pivot = max_pivot.max(best);
        min_pivot = min_pivot.min(best);
        if best == 0.0 {
            return f64::INFINITY;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
        }
    }
    max_pivot / min_pivot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_2x2() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let rhs = [5.0, 10.0];
        let x = solve(&a, &rhs, 2, 1, "test").unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_detected() {
        let a = [1.0, 2.0, 2.0, 4.0];
        let err = solve(&a, &[1.0, 2.0], 2, 1, "test").unwrap_err();
        assert!(matches!(err, CoreError::SingularSystem { .. }));
    }

    #[test]
    fn multi_rhs_matches_inverse() {
        let a = [3.0, 1.0, -2.0, 4.0];
        // Identity rhs -> inverse.
        let inv = solve(&a, &[1.0, 0.0, 0.0, 1.0], 2, 2, "test").unwrap();
        let prod = matmul(&a, &inv, 2, 2, 2);
        for (i, &v) in prod.iter().enumerate() {
            let expect = if i % 3 == 0 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-14);
        }
    }
}
