//! Unital subalgebras of `M_n(C)` represented by Hilbert–Schmidt-orthonormal
//! bases, together with the subspace-level queries the triangularization
//! pipeline consumes: membership, conjugation, corners, row witnesses and
//! coordinate supports.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::graph::SupportDigraph;
use crate::matrix::{row_matrix, ComplexMatrix, IndexProjection, UnitaryMatrix, C64};
use crate::svd::svd;
use crate::tolerance::ToleranceConfig;

/// Ordered composition `(n_1, …, n_k)` of `n`; the order is significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self, CoreError> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(CoreError::InvalidArgument(
                "partition parts must be positive and nonempty".into(),
            ));
        }
        Ok(Self(parts))
    }

    pub fn n(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn block_count(&self) -> usize {
        self.0.len()
    }

    /// Block index of coordinate `i` (0-based).
    pub fn block_of(&self, i: usize) -> usize {
        let mut acc = 0;
        for (b, &p) in self.0.iter().enumerate() {
            acc += p;
            if i < acc {
                return b;
            }
        }
        panic!("coordinate {i} out of range for partition of {}", self.n());
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    /// `Σ_{i≤j} n_i n_j`, the dimension of the block upper triangular
    /// algebra with these block sizes.
    pub fn nest_dimension(&self) -> usize {
        let k = self.0.len();
        let mut dim = 0;
        for i in 0..k {
            for j in i..k {
                dim += self.0[i] * self.0[j];
            }
        }
        dim
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = CoreError;
    fn try_from(parts: Vec<usize>) -> Result<Self, CoreError> {
        Partition::new(parts)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.0
    }
}

/// Orthonormal basis of the subspace `{v : e_row · v^T ∈ A}`; emptiness is a
/// legal outcome and signals that no single-row element lives on `row`.
#[derive(Debug, Clone)]
pub struct RowWitnessBasis {
    pub row: usize,
    pub vectors: Vec<Vec<C64>>,
}

impl RowWitnessBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// The deterministic representative: the direction of numerically
    /// maximal in-algebra support.
    pub fn leading(&self) -> Option<&Vec<C64>> {
        self.vectors.first()
    }
}

/// On-disk algebra format; the loader re-orthonormalizes and validates
/// closure before handing out a [`Subalgebra`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraFile {
    pub n: usize,
    pub basis: Vec<ComplexMatrix>,
    pub unital: bool,
}

/// Unital subalgebra of `M_n(C)` spanned by an HS-orthonormal basis.
#[derive(Debug, Clone)]
pub struct Subalgebra {
    n: usize,
    basis: Vec<ComplexMatrix>,
    unital: bool,
}

/// SVD-based orthonormalization of a family of `n×n` matrices under the
/// Hilbert–Schmidt inner product, with relative rank cutoff `rel_cutoff`.
pub fn orthonormalize(mats: &[ComplexMatrix], rel_cutoff: f64) -> Vec<ComplexMatrix> {
    if mats.is_empty() {
        return Vec::new();
    }
    let n = mats[0].rows();
    let stacked = ComplexMatrix::from_fn(n * n, mats.len(), |i, j| mats[j].entries()[i]);
    let s = svd(&stacked);
    let rank = s.rank(rel_cutoff);
    (0..rank)
        .map(|j| {
            let col = s.left_vector(j);
            ComplexMatrix::from_fn(n, n, |r, c| col[r * n + c])
        })
        .collect()
}

impl Subalgebra {
    pub(crate) fn from_parts(n: usize, basis: Vec<ComplexMatrix>, unital: bool) -> Self {
        debug_assert!(basis.iter().all(|b| b.rows() == n && b.cols() == n));
        debug_assert!(!basis.is_empty());
        Self { n, basis, unital }
    }

    /// Builds from spanning elements: orthonormalizes and validates that the
    /// span is an algebra (and contains the identity when `unital` is set).
    pub fn from_elements(
        n: usize,
        elements: &[ComplexMatrix],
        unital: bool,
        tol: &ToleranceConfig,
    ) -> Result<Self, CoreError> {
        if n == 0 {
            return Err(CoreError::InvalidArgument(
                "ambient dimension must be positive".into(),
            ));
        }
        for (idx, e) in elements.iter().enumerate() {
            if e.rows() != n || e.cols() != n {
                return Err(CoreError::DimensionMismatch(format!(
                    "element {idx} is {}x{}, expected {n}x{n}",
                    e.rows(),
                    e.cols()
                )));
            }
            if !e.all_finite() {
                return Err(CoreError::InvalidArgument(format!(
                    "element {idx} has non-finite entries"
                )));
            }
        }
        let basis = orthonormalize(elements, tol.rank);
        if basis.is_empty() {
            return Err(CoreError::InvalidArgument(
                "elements span the zero subspace".into(),
            ));
        }
        let algebra = Self::from_parts(n, basis, unital);
        algebra.validate(tol)?;
        Ok(algebra)
    }

    /// Loads the JSON representation, re-orthonormalizing and rejecting
    /// non-algebras with residual diagnostics.
    pub fn from_file_repr(file: &AlgebraFile, tol: &ToleranceConfig) -> Result<Self, CoreError> {
        if file.basis.is_empty() {
            return Err(CoreError::Malformed(
                "algebra file has an empty basis".into(),
            ));
        }
        Self::from_elements(file.n, &file.basis, file.unital, tol)
            .map_err(|e| CoreError::Malformed(format!("algebra rejected: {e}")))
    }

    pub fn from_json(text: &str, tol: &ToleranceConfig) -> Result<Self, CoreError> {
        let file: AlgebraFile = serde_json::from_str(text)
            .map_err(|e| CoreError::Malformed(format!("algebra JSON: {e}")))?;
        Self::from_file_repr(&file, tol)
    }

    pub fn to_file_repr(&self) -> AlgebraFile {
        AlgebraFile {
            n: self.n,
            basis: self.basis.clone(),
            unital: self.unital,
        }
    }

    /// Checks pairwise orthonormality, closure under products, and (when
    /// flagged) membership of the identity.
    pub fn validate(&self, tol: &ToleranceConfig) -> Result<(), CoreError> {
        for (i, x) in self.basis.iter().enumerate() {
            for (j, y) in self.basis.iter().enumerate() {
                let g = x.hs_inner(y);
                let expected = if i == j { 1.0 } else { 0.0 };
                if (g - C64::new(expected, 0.0)).norm() > tol.member.max(1e-10) {
                    return Err(CoreError::RankInconsistency(format!(
                        "basis not orthonormal: ⟨b{i}, b{j}⟩ = {g}"
                    )));
                }
            }
        }
        let mut worst = (0.0f64, 0usize, 0usize);
        for (i, x) in self.basis.iter().enumerate() {
            for (j, y) in self.basis.iter().enumerate() {
                let residual = self.membership_residual(&x.mul(y));
                if residual > worst.0 {
                    worst = (residual, i, j);
                }
            }
        }
        if worst.0 > tol.member {
            return Err(CoreError::PreconditionViolation(format!(
                "span is not closed under products: residual {:.3e} for basis pair ({}, {})",
                worst.0, worst.1, worst.2
            )));
        }
        if self.unital {
            let residual = self.membership_residual(&ComplexMatrix::identity(self.n));
            if residual > tol.member * (self.n as f64).sqrt().max(1.0) {
                return Err(CoreError::PreconditionViolation(format!(
                    "declared unital but the identity is missing: residual {residual:.3e}"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    /// HS-orthogonal projection of `x` onto the span of the basis.
    pub fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n, self.n);
        for b in &self.basis {
            out.add_scaled(b, x.hs_inner(b));
        }
        out
    }

    /// `‖x − Proj_A(x)‖_F`.
    pub fn membership_residual(&self, x: &ComplexMatrix) -> f64 {
        x.sub(&self.project(x)).frobenius_norm()
    }

    /// Membership test: true iff the residual stays below
    /// `tol.member · max(1, ‖x‖_F)`. Returns the residual alongside.
    pub fn contains(&self, x: &ComplexMatrix, tol: &ToleranceConfig) -> (bool, f64) {
        let residual = self.membership_residual(x);
        (
            residual <= tol.member * x.frobenius_norm().max(1.0),
            residual,
        )
    }

    /// `b ↦ U b U*` on the basis; unitary conjugation is an HS isometry, so
    /// orthonormality and closure survive.
    pub fn conjugate(&self, u: &UnitaryMatrix) -> Self {
        assert_eq!(u.n(), self.n, "conjugating unitary has wrong dimension");
        let basis = self.basis.iter().map(|b| u.conjugate_matrix(b)).collect();
        Self::from_parts(self.n, basis, self.unital)
    }

    /// Element-wise conjugate transpose of the basis.
    pub fn adjoint_algebra(&self) -> Self {
        let basis = self.basis.iter().map(|b| b.adjoint()).collect();
        Self::from_parts(self.n, basis, self.unital)
    }

    /// Compression `{P a P : a ∈ A}` re-indexed into `M_{|S|}`. Requires the
    /// projection to be a member, which is what makes the corner an algebra.
    pub fn corner(&self, keep: &IndexProjection, tol: &ToleranceConfig) -> Result<Self, CoreError> {
        if keep.n() != self.n {
            return Err(CoreError::DimensionMismatch(format!(
                "projection lives in dimension {}, algebra in {}",
                keep.n(),
                self.n
            )));
        }
        if keep.is_empty() {
            return Err(CoreError::InvalidArgument(
                "corner needs a nonempty index set".into(),
            ));
        }
        if keep.len() == self.n {
            return Ok(self.clone());
        }
        let (inside, residual) = self.contains(&keep.matrix(), tol);
        if !inside {
            return Err(CoreError::PreconditionViolation(format!(
                "projection onto {:?} is not a member (residual {residual:.3e}); \
                 the compression would not be an algebra",
                keep.indices()
            )));
        }
        let compressed: Vec<ComplexMatrix> = self
            .basis
            .iter()
            .map(|b| b.compress(keep.indices()))
            .collect();
        let basis = orthonormalize(&compressed, tol.rank);
        if basis.is_empty() {
            return Err(CoreError::RankInconsistency(
                "corner collapsed to the zero space".into(),
            ));
        }
        Ok(Self::from_parts(keep.len(), basis, true))
    }

    /// Support digraph: edge `(i, j)` iff some basis element carries weight
    /// at entry `(i, j)` above `tol.zero` relative to the basis scale. Exact
    /// for subspaces: a coordinate functional vanishes on the span iff it
    /// vanishes on every basis element.
    pub fn support_relation(&self, tol: &ToleranceConfig) -> SupportDigraph {
        let scale = self
            .basis
            .iter()
            .map(|b| b.max_abs())
            .fold(0.0f64, f64::max);
        let mut g = SupportDigraph::new(self.n);
        if scale == 0.0 {
            return g;
        }
        for i in 0..self.n {
            for j in 0..self.n {
                let weight = self
                    .basis
                    .iter()
                    .map(|b| b[(i, j)].norm())
                    .fold(0.0f64, f64::max);
                if weight > tol.zero * scale {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    /// Orthonormal basis of `{v : e_row v^T ∈ A}`, extracted from the SVD of
    /// the stacked projections of the row's matrix units: a direction is a
    /// witness exactly when its projection keeps full length.
    pub fn row_witness_basis(&self, row: usize, tol: &ToleranceConfig) -> RowWitnessBasis {
        assert!(row < self.n, "row index out of range");
        let n = self.n;
        let mut stacked = ComplexMatrix::zeros(n * n, n);
        for j in 0..n {
            let proj = self.project(&ComplexMatrix::matrix_unit(n, row, j));
            for (idx, &z) in proj.entries().iter().enumerate() {
                stacked[(idx, j)] = z;
            }
        }
        let s = svd(&stacked);
        let mut vectors = Vec::new();
        for (j, &sigma) in s.singular_values.iter().enumerate() {
            if 1.0 - sigma > tol.rank {
                break; // sorted descending: nothing further is a witness
            }
            let v = s.right_vector(j);
            let candidate = row_matrix(n, row, &v);
            if self.membership_residual(&candidate) <= tol.member {
                vectors.push(v);
            }
        }
        RowWitnessBasis { row, vectors }
    }
}

/// Smallest subspace containing the generators (and the identity when
/// `include_unit` is set) that is closed under products. Alternates
/// product expansion with re-orthonormalization until the dimension
/// stabilizes; bounded by `n²` dimensions and `2n` rounds.
pub fn close_under_products(
    n: usize,
    generators: &[ComplexMatrix],
    include_unit: bool,
    tol: &ToleranceConfig,
) -> Result<Subalgebra, CoreError> {
    if n == 0 {
        return Err(CoreError::InvalidArgument(
            "ambient dimension must be positive".into(),
        ));
    }
    for (idx, g) in generators.iter().enumerate() {
        if g.rows() != n || g.cols() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "generator {idx} is {}x{}, expected {n}x{n}",
                g.rows(),
                g.cols()
            )));
        }
    }
    let mut seed: Vec<ComplexMatrix> = generators.to_vec();
    if include_unit {
        seed.push(ComplexMatrix::identity(n));
    }
    if seed.is_empty() {
        return Err(CoreError::InvalidArgument(
            "no generators and no unit requested".into(),
        ));
    }
    let mut basis = orthonormalize(&seed, tol.rank);
    if basis.is_empty() {
        return Err(CoreError::InvalidArgument(
            "generators span the zero subspace".into(),
        ));
    }
    for _ in 0..(2 * n).max(2) {
        if basis.len() > n * n {
            return Err(CoreError::RankInconsistency(format!(
                "closure dimension {} exceeds n² = {}",
                basis.len(),
                n * n
            )));
        }
        let mut candidates = basis.clone();
        for x in &basis {
            for y in &basis {
                candidates.push(x.mul(y));
            }
        }
        let next = orthonormalize(&candidates, tol.rank);
        if next.len() == basis.len() {
            let algebra = Subalgebra::from_parts(n, next, include_unit);
            debug_assert!(algebra.validate(tol).is_ok());
            return Ok(algebra);
        }
        basis = next;
    }
    Err(CoreError::RankInconsistency(format!(
        "closure did not stabilize within {} rounds",
        (2 * n).max(2)
    )))
}

/// Block upper triangular algebra of an ordered partition: the span of all
/// matrix units `E_{i,j}` with `block(i) ≤ block(j)`.
pub fn nest_algebra(partition: &Partition) -> Subalgebra {
    let n = partition.n();
    let mut basis = Vec::with_capacity(partition.nest_dimension());
    for i in 0..n {
        for j in 0..n {
            if partition.block_of(i) <= partition.block_of(j) {
                basis.push(ComplexMatrix::matrix_unit(n, i, j));
            }
        }
    }
    Subalgebra::from_parts(n, basis, true)
}

/// Subspace equality at tolerance `tol.verify`: equal dimensions and every
/// basis element of each side a member of the other.
pub fn equals_algebra(a: &Subalgebra, b: &Subalgebra, tol: &ToleranceConfig) -> bool {
    algebra_distance(a, b).is_some_and(|d| d <= tol.verify)
}

/// Worst membership residual across both directions, or `None` when the
/// dimensions already disagree.
pub fn algebra_distance(a: &Subalgebra, b: &Subalgebra) -> Option<f64> {
    if a.n() != b.n() || a.dim() != b.dim() {
        return None;
    }
    let mut worst = 0.0f64;
    for x in a.basis() {
        worst = worst.max(b.membership_residual(x));
    }
    for y in b.basis() {
        worst = worst.max(a.membership_residual(y));
    }
    Some(worst)
}
