//! Dense complex matrices and the small linear-algebra vocabulary the rest
//! of the crate builds on.
//!
//! Everything here is immutable after construction and safe to share across
//! threads; randomness only ever enters through explicit seeds elsewhere.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::tolerance::ToleranceConfig;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
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

    /// Matrix unit with a one in entry `(i, j)` and zeros elsewhere.
    pub fn matrix_unit(n: usize, i: usize, j: usize) -> Self {
        assert!(i < n && j < n, "matrix unit index out of range");
        let mut m = Self::zeros(n, n);
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from nested rows, validating shape and finiteness.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self, CoreError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(CoreError::InvalidArgument(
                "matrix must have at least one row and one column".into(),
            ));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(CoreError::DimensionMismatch("ragged rows".into()));
        }
        let data: Vec<C64> = rows.into_iter().flatten().collect();
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self {
            rows: data.len() / cols,
            cols,
            data,
        })
    }

    /// Builds from real entries, mostly a test convenience.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
                .collect(),
        )
        .expect("literal matrix must be well formed")
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

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self { data, ..*self }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self { data, ..*self }
    }

    pub fn scale(&self, factor: C64) -> Self {
        let data = self.data.iter().map(|a| a * factor).collect();
        Self { data, ..*self }
    }

    /// In-place `self += factor * other`, the workhorse of projections.
    pub fn add_scaled(&mut self, other: &Self, factor: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "inner dimensions must agree in matrix product"
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Hilbert–Schmidt inner product `⟨x, y⟩ = trace(y* x)`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| y.conj() * x)
            .sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.frobenius_norm().max(1.0);
        self.sub(&self.adjoint()).frobenius_norm() <= tol * scale
    }

    /// Compression to the rows and columns listed in `keep`.
    pub fn compress(&self, keep: &[usize]) -> Self {
        assert!(self.is_square());
        Self::from_fn(keep.len(), keep.len(), |i, j| self[(keep[i], keep[j])])
    }

    /// Embeds a square block into an `n×n` identity, the block occupying the
    /// coordinates listed in `positions`. Used to lift local unitaries.
    pub fn embed_in_identity(&self, n: usize, positions: &[usize]) -> Self {
        assert!(self.is_square());
        assert_eq!(self.rows, positions.len());
        let mut out = Self::identity(n);
        for (bi, &pi) in positions.iter().enumerate() {
            out[(pi, pi)] = C64::new(0.0, 0.0);
            for (bj, &pj) in positions.iter().enumerate() {
                out[(pi, pj)] = self[(bi, bj)];
            }
        }
        out
    }

    /// Embeds a square block into an `n×n` zero matrix at `positions`.
    pub fn embed_in_zero(&self, n: usize, positions: &[usize]) -> Self {
        assert!(self.is_square());
        assert_eq!(self.rows, positions.len());
        let mut out = Self::zeros(n, n);
        for (bi, &pi) in positions.iter().enumerate() {
            for (bj, &pj) in positions.iter().enumerate() {
                out[(pi, pj)] = self[(bi, bj)];
            }
        }
        out
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols)
            && self.sub(other).frobenius_norm() <= tol
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self
                .row(i)
                .iter()
                .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// On-disk form: `{"rows": r, "cols": c, "data": [[[re, im], ...], ...]}`.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<MatrixRepr> for ComplexMatrix {
    type Error = CoreError;

    fn try_from(repr: MatrixRepr) -> Result<Self, CoreError> {
        if repr.rows == 0 || repr.cols == 0 {
            return Err(CoreError::Malformed(
                "matrix dimensions must be positive".into(),
            ));
        }
        if repr.data.len() != repr.rows || repr.data.iter().any(|r| r.len() != repr.cols) {
            return Err(CoreError::Malformed(format!(
                "matrix data does not match declared shape {}x{}",
                repr.rows, repr.cols
            )));
        }
        let rows = repr
            .data
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        ComplexMatrix::from_rows(rows)
            .map_err(|e| CoreError::Malformed(format!("invalid matrix payload: {e}")))
    }
}

impl From<ComplexMatrix> for MatrixRepr {
    fn from(m: ComplexMatrix) -> Self {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            data: (0..m.rows)
                .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

/// Square matrix validated (or trusted) to satisfy `‖U*U − I‖_F ≤ tol`.
/// Deliberately not deserializable on its own: loaders go through
/// [`UnitaryMatrix::new`] so the invariant survives round trips.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    pub fn new(matrix: ComplexMatrix, tol: &ToleranceConfig) -> Result<Self, CoreError> {
        if !matrix.is_square() {
            return Err(CoreError::InvalidArgument(
                "unitary matrices must be square".into(),
            ));
        }
        let residual = unitarity_residual(&matrix);
        if residual > tol.unitary {
            return Err(CoreError::InvalidArgument(format!(
                "matrix is not unitary: ‖U*U − I‖_F = {residual:.3e} exceeds {:.3e}",
                tol.unitary
            )));
        }
        Ok(Self(matrix))
    }

    /// For results of operations that preserve unitarity by construction.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        debug_assert!(
            unitarity_residual(&matrix) <= 1e-8,
            "internal unitary drifted: residual {:.3e}",
            unitarity_residual(&matrix)
        );
        Self(matrix)
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self · other`, i.e. the unitary that applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new_unchecked(self.0.mul(&other.0))
    }

    /// Lifts an `m×m` unitary to act on the listed coordinates of an
    /// `n`-dimensional space, fixing every other coordinate.
    pub fn embed(&self, n: usize, positions: &[usize]) -> Self {
        Self::new_unchecked(self.0.embed_in_identity(n, positions))
    }

    /// Conjugation `U x U*`.
    pub fn conjugate_matrix(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.0.mul(x).mul(&self.0.adjoint())
    }

    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.0)
    }
}

pub fn unitarity_residual(matrix: &ComplexMatrix) -> f64 {
    let n = matrix.rows();
    matrix
        .adjoint()
        .mul(matrix)
        .sub(&ComplexMatrix::identity(n))
        .frobenius_norm()
}

/// Diagonal 0/1 projection onto a set of coordinates, `Σ_{i∈S} E_{i,i}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexProjection {
    n: usize,
    indices: Vec<usize>,
}

impl IndexProjection {
    pub fn new(n: usize, mut indices: Vec<usize>) -> Result<Self, CoreError> {
        if n == 0 {
            return Err(CoreError::InvalidArgument(
                "ambient dimension must be positive".into(),
            ));
        }
        indices.sort_unstable();
        indices.dedup();
        if indices.iter().any(|&i| i >= n) {
            return Err(CoreError::InvalidArgument(format!(
                "projection index out of range for dimension {n}"
            )));
        }
        Ok(Self { n, indices })
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            indices: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> Self {
        Self {
            n: self.n,
            indices: (0..self.n).filter(|i| !self.contains(*i)).collect(),
        }
    }

    /// The projection as a matrix; idempotent and Hermitian exactly.
    pub fn matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.n, self.n);
        for &i in &self.indices {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨x, y⟩ = Σ conj(y_i) x_i`, matching the matrix-level convention.
pub fn vec_inner(x: &[C64], y: &[C64]) -> C64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| b.conj() * a).sum()
}

pub fn vec_normalize(v: &[C64]) -> Option<Vec<C64>> {
    let norm = vec_norm(v);
    if norm == 0.0 {
        return None;
    }
    Some(v.iter().map(|z| z / norm).collect())
}

/// Rank-one matrix `e_row · v^T`, supported on a single row.
pub fn row_matrix(n: usize, row: usize, v: &[C64]) -> ComplexMatrix {
    assert!(row < n && v.len() == n);
    let mut m = ComplexMatrix::zeros(n, n);
    for (j, &z) in v.iter().enumerate() {
        m[(row, j)] = z;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_adjoint_agree_with_hand_computation() {
        let a = ComplexMatrix::from_rows(vec![
            vec![C64::new(1.0, 1.0), C64::new(0.0, 2.0)],
            vec![C64::new(3.0, 0.0), C64::new(-1.0, 0.5)],
        ])
        .unwrap();
        let b = ComplexMatrix::identity(2);
        assert!(a.mul(&b).approx_eq(&a, 0.0));
        let adj = a.adjoint();
        assert_eq!(adj[(0, 1)], C64::new(3.0, 0.0));
        assert_eq!(adj[(1, 0)], C64::new(0.0, -2.0));
    }

    #[test]
    fn hs_inner_is_trace_of_adjoint_product() {
        let x = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let y = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let direct = x.hs_inner(&y);
        let via_trace = y.adjoint().mul(&x).trace();
        assert!((direct - via_trace).norm() < 1e-14);
    }

    #[test]
    fn matrix_units_are_hs_orthonormal() {
        for i in 0..3 {
            for j in 0..3 {
                let e = ComplexMatrix::matrix_unit(3, i, j);
                assert!((e.hs_inner(&e) - C64::new(1.0, 0.0)).norm() < 1e-15);
                let f = ComplexMatrix::matrix_unit(3, (i + 1) % 3, j);
                assert!(e.hs_inner(&f).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn index_projection_is_idempotent_and_hermitian() {
        let p = IndexProjection::new(4, vec![2, 0]).unwrap();
        assert_eq!(p.indices(), &[0, 2]);
        let m = p.matrix();
        assert!(m.mul(&m).approx_eq(&m, 0.0));
        assert!(m.adjoint().approx_eq(&m, 0.0));
        let q = p.complement();
        assert_eq!(q.indices(), &[1, 3]);
        assert!(m
            .add(&q.matrix())
            .approx_eq(&ComplexMatrix::identity(4), 0.0));
    }

    #[test]
    fn index_projection_rejects_out_of_range() {
        assert!(IndexProjection::new(2, vec![2]).is_err());
        assert!(IndexProjection::new(0, vec![]).is_err());
    }

    #[test]
    fn embed_in_identity_fixes_complement() {
        let block = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let lifted = block.embed_in_identity(4, &[1, 3]);
        assert_eq!(lifted[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(lifted[(2, 2)], C64::new(1.0, 0.0));
        assert_eq!(lifted[(1, 3)], C64::new(1.0, 0.0));
        assert_eq!(lifted[(3, 1)], C64::new(1.0, 0.0));
        assert_eq!(lifted[(1, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn json_round_trip_preserves_entries() {
        let m = ComplexMatrix::from_rows(vec![
            vec![C64::new(0.5, -0.25), C64::new(1.0, 0.0)],
            vec![C64::new(0.0, 3.0), C64::new(-2.0, 1e-17)],
        ])
        .unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"rows\":2"));
        let back: ComplexMatrix = serde_json::from_str(&text).unwrap();
        assert!(back.approx_eq(&m, 0.0));
    }

    #[test]
    fn json_rejects_bad_shape_and_nonfinite() {
        let bad_shape = r#"{"rows":2,"cols":2,"data":[[[1,0],[0,0]]]}"#;
        assert!(serde_json::from_str::<ComplexMatrix>(bad_shape).is_err());
        let nan = r#"{"rows":1,"cols":1,"data":[[[null,0]]]}"#;
        assert!(serde_json::from_str::<ComplexMatrix>(nan).is_err());
    }

    #[test]
    fn unitary_validation_catches_non_unitary() {
        let tol = ToleranceConfig::default();
        let swap = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(UnitaryMatrix::new(swap, &tol).is_ok());
        let shear = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(UnitaryMatrix::new(shear, &tol).is_err());
    }
}
