//! Dense complex vectors and matrices, and the linear solves used by the
//! Newton updates.
//!
//! Matrices here are small (a layer Hessian is `(K_p K_{p-1})²`), so
//! everything is stored densely in row-major order and nothing tries to
//! exploit structure.

use std::ops::{Deref, DerefMut, Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative pivot magnitude below which [`solve`] reports a singular matrix.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Relative singular-value cutoff for [`min_norm_solve`].
pub const SINGULAR_VALUE_CUTOFF: f64 = 1e-12;

/// A dense complex column vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CVector(Vec<C64>);

impl CVector {
    pub fn new(entries: Vec<C64>) -> Self {
        Self(entries)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); len])
    }

    pub fn from_real(values: &[f64]) -> Self {
        values.iter().map(|&v| C64::new(v, 0.0)).collect()
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        self.iter().map(|z| z.conj()).collect()
    }

    /// `selfᴴ · other`.
    pub fn dot_h(&self, other: &CVector) -> C64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|z| z.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        self.iter().map(|z| z * factor).collect()
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, factor: C64, other: &CVector) {
        assert_eq!(self.len(), other.len(), "vector lengths differ");
        for (a, b) in self.0.iter_mut().zip(other.iter()) {
            *a += factor * b;
        }
    }

    pub fn sub(&self, other: &CVector) -> Self {
        assert_eq!(self.len(), other.len(), "vector lengths differ");
        self.iter().zip(other.iter()).map(|(a, b)| a - b).collect()
    }
}

impl Deref for CVector {
    type Target = [C64];

    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for CVector {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

impl FromIterator<C64> for CVector {
    fn from_iter<I: IntoIterator<Item = C64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl From<Vec<C64>> for CVector {
    fn from(entries: Vec<C64>) -> Self {
        Self(entries)
    }
}

/// Entrywise conjugate of a vector.
pub fn elementwise_conj(v: &CVector) -> CVector {
    v.conj()
}

/// A dense complex matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Entrywise conjugate (no transpose).
    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> CVector {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul_mat(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matrix-matrix shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    /// `vᴴ · self · w`.
    pub fn sesquilinear(&self, v: &[C64], w: &[C64]) -> C64 {
        let mw = self.mul_vec(w);
        v.iter().zip(mw.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// LU factors with partial pivoting, `P·A = L·U`, stored in place.
#[derive(Clone, Debug)]
pub struct LuFactors {
    lu: CMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "cannot factor a {}x{} matrix",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let scale = a.max_abs();
        // NaN scale falls through to the pivot checks below and fails there.
        if scale == 0.0 {
            return Err(Error::SingularMatrix);
        }
        let threshold = PIVOT_TOLERANCE * scale;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (pivot_row, pivot_mag) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].norm()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(pivot_mag >= threshold) {
                return Err(Error::SingularMatrix);
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve_vec(&self, b: &[C64]) -> Result<CVector> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "right-hand side of length {} for an {n}x{n} system",
                b.len()
            )));
        }
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        Ok(CVector::new(x))
    }
}

/// Solves `A·x = b` by Gaussian elimination with partial pivoting.
///
/// Fails with [`Error::SingularMatrix`] when a pivot falls below
/// [`PIVOT_TOLERANCE`] times the largest entry of `A`.
pub fn solve(a: &CMatrix, b: &[C64]) -> Result<CVector> {
    LuFactors::factor(a)?.solve_vec(b)
}

/// Minimum-norm least-squares solution of `A·x = b` through the SVD,
/// treating singular values below [`SINGULAR_VALUE_CUTOFF`]·σ_max as zero.
///
/// Fails with [`Error::SingularMatrix`] when the numerical rank is zero or the
/// decomposition does not converge (non-finite input).
pub fn min_norm_solve(a: &CMatrix, b: &[C64]) -> Result<CVector> {
    PseudoInverse::factor(a)?.solve_vec(b)
}

/// SVD factors used to apply the Moore-Penrose pseudo-inverse.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    svd: nalgebra::SVD<C64, nalgebra::Dyn, nalgebra::Dyn>,
    cutoff: f64,
    rows: usize,
}

impl PseudoInverse {
    pub fn factor(a: &CMatrix) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        let svd = nalgebra::SVD::try_new(a.to_nalgebra(), true, true, f64::EPSILON, 0)
            .ok_or(Error::SingularMatrix)?;
        let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        if !(sigma_max > 0.0) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self {
            svd,
            cutoff: SINGULAR_VALUE_CUTOFF * sigma_max,
            rows: a.rows,
        })
    }

    pub fn rank(&self) -> usize {
        self.svd
            .singular_values
            .iter()
            .filter(|&&s| s >= self.cutoff)
            .count()
    }

    pub fn solve_vec(&self, b: &[C64]) -> Result<CVector> {
        if b.len() != self.rows {
            return Err(Error::Dimension(format!(
                "right-hand side of length {} for a system with {} rows",
                b.len(),
                self.rows
            )));
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        // Singular values equal to the cutoff count as nonzero, matching `rank`.
        let x = self
            .svd
            .solve(&rhs, self.cutoff * (1.0 - f64::EPSILON))
            .map_err(|_| Error::SingularMatrix)?;
        Ok(x.iter().copied().collect())
    }
}

/// How the Newton-family updates apply inverse Hessians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Pivoted LU; any near-zero pivot is a singular-matrix failure.
    Lu,
    /// SVD pseudo-inverse; fails only on a numerically zero matrix.
    #[default]
    MinNorm,
}

/// A factored square system that can be solved against several right-hand sides.
#[derive(Clone, Debug)]
pub enum Factored {
    Lu(LuFactors),
    MinNorm(PseudoInverse),
}

impl Factored {
    pub fn new(kind: SolverKind, a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        if !a.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        match kind {
            SolverKind::Lu => LuFactors::factor(a).map(Factored::Lu),
            SolverKind::MinNorm => PseudoInverse::factor(a).map(Factored::MinNorm),
        }
    }

    pub fn solve_vec(&self, b: &[C64]) -> Result<CVector> {
        match self {
            Factored::Lu(f) => f.solve_vec(b),
            Factored::MinNorm(f) => f.solve_vec(b),
        }
    }

    /// Solves against every column of `b`.
    pub fn solve_mat(&self, b: &CMatrix) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let x = self.solve_vec(&b.column(j))?;
            for (i, v) in x.iter().enumerate() {
                out[(i, j)] = *v;
            }
        }
        Ok(out)
    }
}
