//! Dense linear-algebra kernels shared by every other module.
//!
//! Everything here operates on the row-major [`DenseMatrix`] type: LU and
//! cofactor determinants, a cyclic-Jacobi symmetric eigensolver, the SPD
//! inverse square root, Hilbert-Schmidt norms, and a constructive
//! triangularization `U = T E` with unit-determinant `E` whose entries obey
//! an explicit size bound.

use crate::tol;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum LinopsError {
    NonSquare { rows: usize, cols: usize },
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    NonFinite,
    NotSymmetric { max_asymmetry: f64 },
    NotPositiveDefinite { min_eigenvalue: f64 },
    Singular,
}

impl fmt::Display for LinopsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinopsError::NonSquare { rows, cols } => {
                write!(f, "matrix is {rows}x{cols}, expected square")
            }
            LinopsError::ShapeMismatch { expected, got } => write!(
                f,
                "shape mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            LinopsError::NonFinite => write!(f, "matrix has non-finite entries"),
            LinopsError::NotSymmetric { max_asymmetry } => {
                write!(f, "matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})")
            }
            LinopsError::NotPositiveDefinite { min_eigenvalue } => {
                write!(f, "matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")
            }
            LinopsError::Singular => write!(f, "matrix is numerically singular"),
        }
    }
}

impl std::error::Error for LinopsError {}

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, LinopsError> {
        if entries.len() != rows * cols {
            return Err(LinopsError::ShapeMismatch {
                expected: (rows, cols),
                got: (entries.len(), 1),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(LinopsError::NonFinite);
        }
        Ok(DenseMatrix { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, entries: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinopsError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(LinopsError::ShapeMismatch { expected: (r, c), got: (r, row.len()) });
            }
            entries.extend_from_slice(row);
        }
        DenseMatrix::new(r, c, entries)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinopsError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinopsError::ShapeMismatch {
                expected: (self.rows, self.cols),
                got: (other.rows, other.cols),
            });
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinopsError> {
        if self.cols != other.rows {
            return Err(LinopsError::ShapeMismatch {
                expected: (self.cols, other.rows),
                got: (other.rows, other.cols),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.entries[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinopsError> {
        if x.len() != self.cols {
            return Err(LinopsError::ShapeMismatch {
                expected: (self.cols, 1),
                got: (x.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect())
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// ℓ∞→ℓ∞ operator norm (maximum absolute row sum).
    pub fn inf_op_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Writes `block` with its (0,0) entry at position (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(r0 + i, c0 + j, block.get(i, j));
            }
        }
    }

    pub fn sub_block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |i, j| self.get(r0 + i, c0 + j))
    }

    fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Result of the constructive factorization `U = T E`.
#[derive(Debug, Clone)]
pub struct TriangularizationResult {
    /// Upper-triangular product `T E`.
    pub u: DenseMatrix,
    /// Unit-determinant right factor.
    pub e: DenseMatrix,
    /// Σ |E_{li}|, bounded by 2^d - 1 for a d×d input.
    pub entry_sum: f64,
}

/// Determinant; exact cofactor expansion for sizes up to 4, LU with partial
/// pivoting above that.
pub fn det(m: &DenseMatrix) -> Result<f64, LinopsError> {
    if !m.is_square() {
        return Err(LinopsError::NonSquare { rows: m.rows, cols: m.cols });
    }
    if m.rows <= 4 {
        Ok(det_cofactor(m))
    } else {
        Ok(det_lu(m))
    }
}

fn det_cofactor(m: &DenseMatrix) -> f64 {
    let n = m.rows;
    match n {
        0 => 1.0,
        1 => m.get(0, 0),
        2 => m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0),
        _ => {
            let mut acc = 0.0;
            let mut sign = 1.0;
            for j in 0..n {
                let a = m.get(0, j);
                if a != 0.0 {
                    let minor = DenseMatrix::from_fn(n - 1, n - 1, |r, c| {
                        m.get(r + 1, if c < j { c } else { c + 1 })
                    });
                    acc += sign * a * det_cofactor(&minor);
                }
                sign = -sign;
            }
            acc
        }
    }
}

fn det_lu(m: &DenseMatrix) -> f64 {
    let n = m.rows;
    let mut a = m.entries.clone();
    let mut sign = 1.0;
    let mut result = 1.0;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[col * n + col].abs();
        for r in (col + 1)..n {
            let v = a[r * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            sign = -sign;
        }
        let pivot = a[col * n + col];
        result *= pivot;
        for r in (col + 1)..n {
            let factor = a[r * n + col] / pivot;
            if factor != 0.0 {
                for j in col..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
            }
        }
    }
    sign * result
}

/// Solves `m x = b` by LU with partial pivoting.
pub fn solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinopsError> {
    if !m.is_square() {
        return Err(LinopsError::NonSquare { rows: m.rows, cols: m.cols });
    }
    let n = m.rows;
    if b.len() != n {
        return Err(LinopsError::ShapeMismatch { expected: (n, 1), got: (b.len(), 1) });
    }
    let mut a = m.entries.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[col * n + col].abs();
        for r in (col + 1)..n {
            let v = a[r * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val <= f64::MIN_POSITIVE {
            return Err(LinopsError::Singular);
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            x.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for r in (col + 1)..n {
            let factor = a[r * n + col] / pivot;
            if factor != 0.0 {
                for j in col..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
                x[r] -= factor * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= a[i * n + j] * x[j];
        }
        x[i] = acc / a[i * n + i];
    }
    Ok(x)
}

/// Inverse via LU column solves.
pub fn inverse(m: &DenseMatrix) -> Result<DenseMatrix, LinopsError> {
    if !m.is_square() {
        return Err(LinopsError::NonSquare { rows: m.rows, cols: m.cols });
    }
    let n = m.rows;
    let mut out = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(m, &e)?;
        for i in 0..n {
            out.set(i, j, col[i]);
        }
    }
    Ok(out)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the orthonormal eigenvector
/// matrix `v` (columns), so `m = v diag(λ) vᵀ`.
pub fn eigh(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), LinopsError> {
    if !m.is_square() {
        return Err(LinopsError::NonSquare { rows: m.rows, cols: m.cols });
    }
    let asym = m.max_asymmetry();
    if asym > tol::ABS * (1.0 + m.max_abs()) {
        return Err(LinopsError::NotSymmetric { max_asymmetry: asym });
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..200 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a.get(i, j).abs());
            }
        }
        if off <= 1e-15 * (1.0 + a.max_abs()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((eigenvalues, vectors))
}

/// SPD inverse square root `S` with `S m S = I`, via symmetric
/// eigendecomposition. `S` is symmetric.
pub fn spd_inverse_sqrt(m: &DenseMatrix) -> Result<DenseMatrix, LinopsError> {
    spd_power(m, -0.5)
}

/// Symmetric power `m^e` of an SPD matrix at default tolerances.
pub fn spd_power(m: &DenseMatrix, e: f64) -> Result<DenseMatrix, LinopsError> {
    spd_power_with(m, e, &tol::Tolerances::default())
}

/// Symmetric power `m^e` with caller-supplied tolerances; positivity is
/// required relative to `tols.abs` times the spectral radius.
pub fn spd_power_with(
    m: &DenseMatrix,
    e: f64,
    tols: &tol::Tolerances,
) -> Result<DenseMatrix, LinopsError> {
    let (vals, vecs) = eigh(m)?;
    let max = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let min = vals.iter().fold(f64::INFINITY, |acc, v| acc.min(*v));
    if min <= tols.abs * max {
        return Err(LinopsError::NotPositiveDefinite { min_eigenvalue: min });
    }
    let n = m.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let w = vals[k].powf(e);
        for i in 0..n {
            let vik = vecs.get(i, k);
            if vik == 0.0 {
                continue;
            }
            for j in 0..n {
                out.entries[i * n + j] += w * vik * vecs.get(j, k);
            }
        }
    }
    // Symmetrize away rounding noise.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, avg);
            out.set(j, i, avg);
        }
    }
    Ok(out)
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(m: &DenseMatrix) -> f64 {
    m.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Factors `U = T E` with `U` upper-triangular, `det E = 1`, and
/// Σ|E_{li}| ≤ 2^d − 1, by recursive elimination of the last row.
///
/// The last-row pivot is the entry of maximal magnitude; the column swap
/// that moves it into place is compensated by permuting rows of `E`, with
/// one column negated when the permutation sign would leave `det E = -1`.
pub fn upper_triangularize(t: &DenseMatrix) -> Result<TriangularizationResult, LinopsError> {
    if !t.is_square() {
        return Err(LinopsError::NonSquare { rows: t.rows, cols: t.cols });
    }
    let e = triangularize_e(t);
    let u = t.matmul(&e).expect("square shapes agree");
    let entry_sum = e.entries.iter().map(|x| x.abs()).sum();
    Ok(TriangularizationResult { u, e, entry_sum })
}

fn triangularize_e(t: &DenseMatrix) -> DenseMatrix {
    let d = t.rows();
    if d == 1 {
        return DenseMatrix::identity(1);
    }
    // Pivot: index maximizing |T_{d,i}|.
    let mut pivot = d - 1;
    let mut best = -1.0;
    for i in 0..d {
        let v = t.get(d - 1, i).abs();
        if v > best {
            best = v;
            pivot = i;
        }
    }
    let zero_last_row = best == 0.0;
    // Work on T with columns pivot <-> d-1 swapped.
    let tp = if pivot == d - 1 {
        t.clone()
    } else {
        DenseMatrix::from_fn(d, d, |i, j| {
            let jj = if j == pivot {
                d - 1
            } else if j == d - 1 {
                pivot
            } else {
                j
            };
            t.get(i, jj)
        })
    };
    let t_prime = if zero_last_row {
        tp.sub_block(0, 0, d - 1, d - 1)
    } else {
        let tdd = tp.get(d - 1, d - 1);
        DenseMatrix::from_fn(d - 1, d - 1, |j, i| {
            tp.get(j, i) - tp.get(d - 1, i) / tdd * tp.get(j, d - 1)
        })
    };
    let e_prime = triangularize_e(&t_prime);
    let mut e = DenseMatrix::zeros(d, d);
    e.set_block(0, 0, &e_prime);
    e.set(d - 1, d - 1, 1.0);
    if !zero_last_row {
        let tdd = tp.get(d - 1, d - 1);
        for i in 0..(d - 1) {
            let mut acc = 0.0;
            for l in 0..(d - 1) {
                acc += tp.get(d - 1, l) / tdd * e_prime.get(l, i);
            }
            e.set(d - 1, i, -acc);
        }
    }
    if pivot == d - 1 {
        return e;
    }
    // Undo the column swap of T by swapping the matching rows of E; a row
    // transposition flips det E, so negate one column to restore +1.
    let mut ep = DenseMatrix::from_fn(d, d, |i, j| {
        let ii = if i == pivot {
            d - 1
        } else if i == d - 1 {
            pivot
        } else {
            i
        };
        e.get(ii, j)
    });
    for i in 0..d {
        let v = ep.get(i, 0);
        ep.set(i, 0, -v);
    }
    ep
}
