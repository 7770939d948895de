//! Small dense linear algebra and sample statistics.
//!
//! Everything here is a pure function over borrowed inputs. Matrices are at
//! most a few hundred rows, so a straightforward row-major layout and partial
//! pivoting Gaussian elimination are all that is needed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Pivots smaller than this in magnitude mark a matrix as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("linear system is inconsistent (residual {residual:e})")]
    Inconsistent { residual: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, NumericsError> {
        if rows * cols != data.len() {
            return Err(NumericsError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NumericsError::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>, NumericsError> {
        check_len(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot_unchecked(self.row(i), v)).collect())
    }

    /// `self · other`.
    pub fn mul_mat(&self, other: &Self) -> Result<Self, NumericsError> {
        check_len(self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Adds `scale · u vᵀ` in place.
    pub fn add_outer(&mut self, scale: T, u: &[T], v: &[T]) -> Result<(), NumericsError> {
        check_len(self.rows, u.len())?;
        check_len(self.cols, v.len())?;
        for (i, &ui) in u.iter().enumerate() {
            let s = scale * ui;
            if s == T::zero() {
                continue;
            }
            for (dst, &vj) in self.row_mut(i).iter_mut().zip(v) {
                *dst += s * vj;
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// True when `self == selfᵀ` within `tol` per entry.
    pub fn is_symmetric(&self, tol: T) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn check_len(expected: usize, got: usize) -> Result<(), NumericsError> {
    if expected == got {
        Ok(())
    } else {
        Err(NumericsError::DimensionMismatch { expected, got })
    }
}

/// Inner product without a length check; callers guarantee equal lengths.
#[inline]
pub(crate) fn dot_unchecked<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub fn dot<T: Scalar>(u: &[T], v: &[T]) -> Result<T, NumericsError> {
    check_len(u.len(), v.len())?;
    Ok(dot_unchecked(u, v))
}

pub fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Solves `A w = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    check_len(a.rows(), b.len())?;
    let n = a.rows();
    let tol = T::lit(PIVOT_TOLERANCE);
    let mut m = a.clone();
    let mut rhs = b.to_vec();

    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot < tol {
            return Err(NumericsError::Singular {
                column: col,
                pivot: pivot.as_f64(),
            });
        }
        if pivot_row != col {
            swap_rows(&mut m, &mut rhs, pivot_row, col);
        }
        eliminate_below(&mut m, &mut rhs, col, col);
    }

    let mut w = vec![T::zero(); n];
    for i in (0..n).rev() {
        let tail = dot_unchecked(&m.row(i)[i + 1..], &w[i + 1..]);
        w[i] = (rhs[i] - tail) / m[(i, i)];
    }
    Ok(w)
}

/// Finds one solution of a possibly singular but consistent square system.
///
/// Columns without an acceptable pivot become free variables fixed at zero.
/// Returns the particular solution and the numerical rank, or
/// [`NumericsError::Inconsistent`] when no solution exists.
pub fn solve_consistent<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &[T],
) -> Result<(Vec<T>, usize), NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    check_len(a.rows(), b.len())?;
    let n = a.rows();
    let tol = T::lit(PIVOT_TOLERANCE);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new();

    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let (pivot_row, pivot) = (row..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((row, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot < tol {
            continue;
        }
        if pivot_row != row {
            swap_rows(&mut m, &mut rhs, pivot_row, row);
        }
        eliminate_below(&mut m, &mut rhs, row, col);
        pivots.push((row, col));
        row += 1;
    }

    let mut w = vec![T::zero(); n];
    for &(r, c) in pivots.iter().rev() {
        let tail = dot_unchecked(&m.row(r)[c + 1..], &w[c + 1..]);
        w[c] = (rhs[r] - tail) / m[(r, c)];
    }

    let residual = a
        .mul_vec(&w)?
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (&aw, &bi)| acc.max((aw - bi).abs()));
    let scale = T::one() + max_abs(b);
    if residual > T::lit(1e-9) * scale {
        return Err(NumericsError::Inconsistent {
            residual: residual.as_f64(),
        });
    }
    Ok((w, pivots.len()))
}

/// Numerical rank by row reduction with the same pivot tolerance as the solvers.
pub fn rank<T: Scalar>(a: &DenseMatrix<T>) -> usize {
    let tol = T::lit(PIVOT_TOLERANCE);
    let mut m = a.clone();
    let mut scratch = vec![T::zero(); a.rows()];
    let mut row = 0;
    for col in 0..a.cols() {
        if row == a.rows() {
            break;
        }
        let (pivot_row, pivot) = (row..a.rows())
            .map(|r| (r, m[(r, col)].abs()))
            .fold((row, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot < tol {
            continue;
        }
        if pivot_row != row {
            swap_rows(&mut m, &mut scratch, pivot_row, row);
        }
        eliminate_below(&mut m, &mut scratch, row, col);
        row += 1;
    }
    row
}

fn swap_rows<T: Scalar>(m: &mut DenseMatrix<T>, rhs: &mut [T], i: usize, j: usize) {
    let cols = m.cols();
    for k in 0..cols {
        let tmp = m[(i, k)];
        m[(i, k)] = m[(j, k)];
        m[(j, k)] = tmp;
    }
    rhs.swap(i, j);
}

fn eliminate_below<T: Scalar>(m: &mut DenseMatrix<T>, rhs: &mut [T], row: usize, col: usize) {
    let n = m.rows();
    let cols = m.cols();
    let pivot = m[(row, col)];
    for r in row + 1..n {
        let factor = m[(r, col)] / pivot;
        if factor == T::zero() {
            continue;
        }
        for k in col..cols {
            let v = m[(row, k)];
            m[(r, k)] -= factor * v;
        }
        rhs[r] = rhs[r] - factor * rhs[row];
    }
}

/// Sample mean and standard error of the mean (`n − 1` denominator).
/// A single sample has zero standard error.
pub fn mean_and_stderr<T: Scalar>(samples: &[T]) -> Result<(T, T), NumericsError> {
    if samples.is_empty() {
        return Err(NumericsError::EmptyInput);
    }
    let n = T::from_usize(samples.len()).expect("sample count fits scalar");
    let mean = samples.iter().copied().sum::<T>() / n;
    if samples.len() == 1 {
        return Ok((mean, T::zero()));
    }
    let ss: T = samples.iter().map(|&x| (x - mean) * (x - mean)).sum();
    let var = ss / (n - T::one());
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(dot(&[0.0, 0.0], &[5.0, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn dot_length_mismatch() {
        assert_eq!(
            dot(&[1.0, 2.0], &[1.0]),
            Err(NumericsError::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let w = solve_linear(&DenseMatrix::<f64>::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w, vec![1.0, 2.0, 3.0]);

        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert_eq!(solve_linear(&a, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn solve_rank_one_is_singular() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            solve_linear(&a, &[1.0, 2.0]),
            Err(NumericsError::Singular { column: 1, .. })
        ));
    }

    #[test]
    fn solve_needs_pivoting() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(solve_linear(&a, &[3.0, 5.0]).unwrap(), vec![5.0, 3.0]);
    }

    #[test]
    fn consistent_singular_system() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let (w, rank) = solve_consistent(&a, &[3.0, 6.0]).unwrap();
        assert_eq!(rank, 1);
        assert!((w[0] + w[1] - 3.0).abs() < 1e-12);
        assert!(matches!(
            solve_consistent(&a, &[3.0, 7.0]),
            Err(NumericsError::Inconsistent { .. })
        ));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&DenseMatrix::<f64>::identity(4)), 4);
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(rank(&a), 1);
        assert_eq!(rank(&DenseMatrix::<f64>::zeros(3, 3)), 0);
    }

    #[test]
    fn stderr_examples() {
        assert_eq!(mean_and_stderr(&[5.0]).unwrap(), (5.0, 0.0));
        let (m, s) = mean_and_stderr::<f64>(&[1.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[2.0, 2.0, 2.0]).unwrap(), (2.0, 0.0));
        assert_eq!(mean_and_stderr::<f64>(&[]), Err(NumericsError::EmptyInput));
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(matches!(
            DenseMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]),
            Err(NumericsError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let a = DenseMatrix::from_rows(&[vec![2.0f32, 1.0], vec![1.0, 3.0]]).unwrap();
        let w = solve_linear(&a, &[3.0, 4.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-6 && (w[1] - 1.0).abs() < 1e-6);
    }

    /// Random matrix made well conditioned by diagonal dominance.
    fn well_conditioned(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.random_range(-1.0..1.0);
            }
            a[(i, i)] += n as f64 * if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        a
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solve_recovers_known_solution(n in 1usize..=50, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = well_conditioned(n, &mut rng);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let b = a.mul_vec(&w).unwrap();
            let got = solve_linear(&a, &b).unwrap();
            let scale = 1.0 + max_abs(&w);
            for (g, e) in got.iter().zip(&w) {
                prop_assert!((g - e).abs() <= 1e-8 * scale);
            }
            let resid = a.mul_vec(&got).unwrap();
            for (r, bi) in resid.iter().zip(&b) {
                prop_assert!((r - bi).abs() <= 1e-9 * (1.0 + max_abs(&b)));
            }
        }

        #[test]
        fn dot_symmetric_and_bilinear(
            u in prop::collection::vec(-100.0f64..100.0, 8),
            v in prop::collection::vec(-100.0f64..100.0, 8),
            z in prop::collection::vec(-100.0f64..100.0, 8),
            a in -10.0f64..10.0,
        ) {
            prop_assert_eq!(dot(&u, &v).unwrap(), dot(&v, &u).unwrap());
            let lhs: Vec<f64> = u.iter().zip(&z).map(|(x, y)| a * x + y).collect();
            let expect = a * dot(&u, &v).unwrap() + dot(&z, &v).unwrap();
            prop_assert!((dot(&lhs, &v).unwrap() - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }
}
