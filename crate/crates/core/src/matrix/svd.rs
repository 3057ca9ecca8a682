use std::cmp::Ordering;

use super::{DenseMatrix, MatrixError};
use crate::Scalar;

/// Sweep cap for the one-sided Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;
/// Larger dimension above which [`spectral_norm`] switches to power iteration.
pub const POWER_ITERATION_THRESHOLD: usize = 512;
pub const POWER_ITERATION_TOL: f64 = 1e-12;
pub const POWER_ITERATION_CAP: usize = 10_000;

/// Thin SVD `A = U diag(sigma) V^T` with `p = min(m, n)` retained triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors<T> {
    /// `m x p`, orthonormal columns.
    pub left_vectors: DenseMatrix<T>,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<T>,
    /// `n x p`, orthonormal columns.
    pub right_vectors: DenseMatrix<T>,
}

impl<T: Scalar> SvdFactors<T> {
    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let u = &self.left_vectors;
        let scaled = DenseMatrix::from_fn(u.rows(), u.cols(), |i, j| {
            u.get(i, j) * self.singular_values[j]
        });
        scaled.matmul(&self.right_vectors.transpose())
    }

    /// Leading `r` left singular vectors as an `m x r` matrix.
    pub fn left_leading(&self, r: usize) -> DenseMatrix<T> {
        self.left_vectors.columns(0, r)
    }
}

/// Computes the thin SVD by one-sided (Hestenes) Jacobi rotations.
///
/// The iteration runs on the columns of `A` when `m >= n` and on the columns
/// of `A^T` otherwise, so it always orthogonalizes `min(m, n)` columns. The
/// pair ordering is cyclic and fixed, which makes the result deterministic.
pub fn svd<T: Scalar>(a: &DenseMatrix<T>) -> Result<SvdFactors<T>, MatrixError> {
    let (m, n) = a.shape();
    let tall = m >= n;
    let work = if tall { a.clone() } else { a.transpose() };
    let (len, p) = work.shape();

    let mut cols: Vec<Vec<T>> = (0..p).map(|j| work.column(j)).collect();
    let mut rot: Vec<Vec<T>> = (0..p)
        .map(|j| {
            (0..p)
                .map(|i| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    jacobi_sweeps(&mut cols, Some(&mut rot))?;

    let norms: Vec<T> = cols.iter().map(|c| norm(c)).collect();
    let order = descending_order(&norms);
    let values: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let degenerate = negligible_norm(&cols);

    // Normalized left vectors of the working matrix; exact (or vanishing)
    // zeros get an orthonormal completion afterwards.
    let mut basis: Vec<Option<Vec<T>>> = order
        .iter()
        .map(|&j| {
            let s = norms[j];
            if s > degenerate && s > T::zero() {
                Some(cols[j].iter().map(|&x| x / s).collect())
            } else {
                None
            }
        })
        .collect();
    complete_orthonormal(&mut basis, len);
    let basis: Vec<Vec<T>> = basis.into_iter().map(|c| c.expect("completed")).collect();

    let work_left = from_columns(len, &basis);
    let sorted_rot: Vec<Vec<T>> = order.iter().map(|&j| rot[j].clone()).collect();
    let work_right = from_columns(p, &sorted_rot);

    let (left_vectors, right_vectors) = if tall {
        (work_left, work_right)
    } else {
        (work_right, work_left)
    };
    Ok(SvdFactors {
        left_vectors,
        singular_values: values,
        right_vectors,
    })
}

/// Singular values only, nonincreasing, length `min(m, n)`.
pub fn singular_values<T: Scalar>(a: &DenseMatrix<T>) -> Result<Vec<T>, MatrixError> {
    let (m, n) = a.shape();
    let work = if m >= n { a.clone() } else { a.transpose() };
    let mut cols: Vec<Vec<T>> = (0..work.cols()).map(|j| work.column(j)).collect();
    jacobi_sweeps(&mut cols, None)?;
    let mut values: Vec<T> = cols.iter().map(|c| norm(c)).collect();
    values.sort_by(|x, y| y.partial_cmp(x).unwrap_or(Ordering::Equal));
    Ok(values)
}

/// Spectral (operator 2-) norm, i.e. the largest singular value.
///
/// Uses the full SVD up to [`POWER_ITERATION_THRESHOLD`] on the larger
/// dimension and power iteration on `A^T A` beyond it.
pub fn spectral_norm<T: Scalar>(a: &DenseMatrix<T>) -> Result<T, MatrixError> {
    if a.is_zero() {
        return Ok(T::zero());
    }
    if a.rows().max(a.cols()) <= POWER_ITERATION_THRESHOLD {
        return Ok(singular_values(a)?[0]);
    }
    power_iteration(a)
}

fn power_iteration<T: Scalar>(a: &DenseMatrix<T>) -> Result<T, MatrixError> {
    let n = a.cols();
    let tol = T::lit(POWER_ITERATION_TOL);
    let start = T::one() / T::from_count(n).sqrt();
    let mut v = vec![start; n];
    let mut sigma = T::zero();
    for iter in 1..=POWER_ITERATION_CAP {
        let u = mat_vec(a, &v);
        let est = norm(&u);
        if est == T::zero() {
            // start vector orthogonal to the row space
            return Ok(singular_values(a)?[0]);
        }
        let z = mat_t_vec(a, &u);
        let nz = norm(&z);
        v = z.into_iter().map(|x| x / nz).collect();
        if iter > 1 && (est - sigma).abs() <= tol * est {
            return Ok(est.max(sigma));
        }
        sigma = est;
    }
    Err(MatrixError::ConvergenceFailure {
        iterations: POWER_ITERATION_CAP,
    })
}

/// Number of singular values strictly above `rel_tol * sigma_1`.
///
/// The default tolerance is `max(rows, cols) * eps` of the working precision.
pub fn numerical_rank<T: Scalar>(
    sv: &[T],
    rows: usize,
    cols: usize,
    rel_tol: Option<T>,
) -> Result<usize, MatrixError> {
    check_spectrum(sv)?;
    let Some(&top) = sv.first() else {
        return Ok(0);
    };
    if top == T::zero() {
        return Ok(0);
    }
    let rel_tol = rel_tol.unwrap_or_else(|| default_rank_tol::<T>(rows, cols));
    let threshold = rel_tol * top;
    Ok(sv.iter().take_while(|&&s| s > threshold).count())
}

pub(crate) fn default_rank_tol<T: Scalar>(rows: usize, cols: usize) -> T {
    T::from_count(rows.max(cols)) * T::epsilon()
}

/// Singular values of `k` side-by-side copies of a matrix with spectrum `sv`:
/// every value scaled by `sqrt(k)`.
pub fn replicated_spectrum<T: Scalar>(sv: &[T], k: usize) -> Result<Vec<T>, MatrixError> {
    if k == 0 {
        return Err(MatrixError::ZeroK);
    }
    check_spectrum(sv)?;
    let root = T::from_count(k).sqrt();
    Ok(sv.iter().map(|&s| s * root).collect())
}

pub(crate) fn check_spectrum<T: Scalar>(sv: &[T]) -> Result<(), MatrixError> {
    for (i, &s) in sv.iter().enumerate() {
        if !s.is_finite() || s < T::zero() || (i > 0 && s > sv[i - 1]) {
            return Err(MatrixError::UnsortedSpectrum { index: i });
        }
    }
    Ok(())
}

fn jacobi_sweeps<T: Scalar>(
    cols: &mut [Vec<T>],
    mut rot: Option<&mut Vec<Vec<T>>>,
) -> Result<(), MatrixError> {
    let p = cols.len();
    let len = cols.first().map_or(0, Vec::len);
    let tol = T::from_count(len.max(1)) * T::epsilon();
    let floor = negligible_norm(cols).powi(2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for j in 0..p {
            for k in (j + 1)..p {
                let (head, tail) = cols.split_at_mut(k);
                let (cj, ck) = (&mut head[j], &mut tail[0]);
                let alpha = dot(cj, cj);
                let beta = dot(ck, ck);
                let gamma = dot(cj, ck);
                if gamma == T::zero()
                    || alpha <= floor
                    || beta <= floor
                    || gamma.abs() <= tol * alpha.sqrt() * beta.sqrt()
                {
                    continue;
                }
                rotated = true;
                let two = T::one() + T::one();
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + T::one().hypot(zeta));
                let c = T::one() / T::one().hypot(t);
                let s = c * t;
                rotate(cj, ck, c, s);
                if let Some(r) = rot.as_deref_mut() {
                    let (rh, rt) = r.split_at_mut(k);
                    rotate(&mut rh[j], &mut rt[0], c, s);
                }
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(MatrixError::ConvergenceFailure {
        iterations: MAX_SWEEPS,
    })
}

/// Column norm at or below which a column is rounding noise:
/// `sqrt(len) * eps * ||A||_F`.
fn negligible_norm<T: Scalar>(cols: &[Vec<T>]) -> T {
    let len = cols.first().map_or(0, Vec::len);
    let fro = cols.iter().map(|c| dot(c, c)).sum::<T>().sqrt();
    T::from_count(len.max(1)).sqrt() * T::epsilon() * fro
}

#[inline]
fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

#[inline]
fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

#[inline]
fn norm<T: Scalar>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

fn mat_vec<T: Scalar>(a: &DenseMatrix<T>, v: &[T]) -> Vec<T> {
    (0..a.rows()).map(|i| dot(a.row(i), v)).collect()
}

fn mat_t_vec<T: Scalar>(a: &DenseMatrix<T>, u: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.cols()];
    for (i, &ui) in u.iter().enumerate() {
        for (o, &x) in out.iter_mut().zip(a.row(i)) {
            *o += ui * x;
        }
    }
    out
}

fn descending_order<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| {
        values[y]
            .partial_cmp(&values[x])
            .unwrap_or(Ordering::Equal)
            .then(x.cmp(&y))
    });
    order
}

/// Fills the `None` slots with unit vectors orthogonal to every other column,
/// choosing among the canonical basis vectors the one with the largest
/// residual after two Gram-Schmidt passes.
fn complete_orthonormal<T: Scalar>(basis: &mut [Option<Vec<T>>], len: usize) {
    for slot in 0..basis.len() {
        if basis[slot].is_some() {
            continue;
        }
        let mut best: Option<(T, Vec<T>)> = None;
        for e in 0..len {
            let mut v = vec![T::zero(); len];
            v[e] = T::one();
            for _ in 0..2 {
                for q in basis.iter().flatten() {
                    let proj = dot(q, &v);
                    for (vi, &qi) in v.iter_mut().zip(q) {
                        *vi -= proj * qi;
                    }
                }
            }
            let r = norm(&v);
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, v));
            }
        }
        let (r, v) = best.expect("nonempty working dimension");
        basis[slot] = Some(v.into_iter().map(|x| x / r).collect());
    }
}

fn from_columns<T: Scalar>(len: usize, cols: &[Vec<T>]) -> DenseMatrix<T> {
    DenseMatrix::from_fn(len, cols.len(), |i, j| cols[j][i])
}
