//! Dense Cholesky kernels on row-major `f64` slices.
//!
//! A batch of equally sized matrices is laid out contiguously and factorized
//! in one parallel pass.

use rayon::prelude::*;

/// Relative jitter added to the diagonal on the single retry.
pub const JITTER_SCALE: f64 = 1e-10;

/// In-place lower Cholesky factorization of the `n x n` row-major matrix `a`.
///
/// Only the lower triangle is read and written. Returns `false` as soon as a
/// pivot is not strictly positive.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let row_j = j * n;
        let mut d = a[row_j + j];
        for k in 0..j {
            let l = a[row_j + k];
            d -= l * l;
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[row_j + j] = d;
        for i in (j + 1)..n {
            let row_i = i * n;
            let mut s = a[row_i + j];
            for k in 0..j {
                s -= a[row_i + k] * a[row_j + k];
            }
            a[row_i + j] = s / d;
        }
    }
    true
}

/// Sum of `2 log L_ii` over a factor produced by [`cholesky_in_place`].
fn factor_logdet(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| l[i * n + i].ln()).sum::<f64>() * 2.0
}

/// Log-determinant of a symmetric positive definite matrix.
///
/// A failed factorization is retried once with `1e-10 * trace / n` added to
/// the diagonal; `None` if that fails too. `scratch` is reused across calls.
pub fn logdet(a: &[f64], n: usize, scratch: &mut Vec<f64>) -> Option<f64> {
    if n == 0 {
        return Some(0.0);
    }
    scratch.clear();
    scratch.extend_from_slice(a);
    if cholesky_in_place(scratch, n) {
        return Some(factor_logdet(scratch, n));
    }
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let eps = JITTER_SCALE * trace / n as f64;
    scratch.clear();
    scratch.extend_from_slice(a);
    for i in 0..n {
        scratch[i * n + i] += eps;
    }
    if cholesky_in_place(scratch, n) {
        Some(factor_logdet(scratch, n))
    } else {
        None
    }
}

/// Log-determinants of `count` contiguous `dim x dim` matrices, computed in
/// parallel. On failure returns the index of the first matrix (in batch
/// order) that is not positive definite.
pub fn batched_logdet(mats: &[f64], dim: usize, count: usize) -> Result<Vec<f64>, usize> {
    let stride = dim * dim;
    if stride == 0 {
        return Ok(vec![0.0; count]);
    }
    debug_assert_eq!(mats.len(), stride * count);
    let out: Vec<Option<f64>> = mats
        .par_chunks(stride)
        .map_init(|| Vec::with_capacity(stride), |scratch, m| logdet(m, dim, scratch))
        .collect();
    out.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or(i))
        .collect()
}

/// Lower factor `L` with `L L^T = a` for a positive semi-definite matrix.
///
/// Pivots within `tol * max_diag` of zero are treated as exact zeros and the
/// column below them is zeroed, so rank-deficient covariances factor cleanly.
/// Returns `None` when a pivot is clearly negative.
pub fn psd_factor(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    if cholesky_in_place(&mut l, n) {
        clear_upper(&mut l, n);
        return Some(l);
    }
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = a.to_vec();
    for j in 0..n {
        let row_j = j * n;
        let mut d = l[row_j + j];
        for k in 0..j {
            d -= l[row_j + k] * l[row_j + k];
        }
        if d < -tol || !d.is_finite() {
            return None;
        }
        if d <= tol {
            l[row_j + j] = 0.0;
            for i in (j + 1)..n {
                l[i * n + j] = 0.0;
            }
            continue;
        }
        let d = d.sqrt();
        l[row_j + j] = d;
        for i in (j + 1)..n {
            let row_i = i * n;
            let mut s = l[row_i + j];
            for k in 0..j {
                s -= l[row_i + k] * l[row_j + k];
            }
            l[row_i + j] = s / d;
        }
    }
    clear_upper(&mut l, n);
    Some(l)
}

fn clear_upper(l: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            l[i * n + j] = 0.0;
        }
    }
}
