//! Deterministic test-instance generation: Haar-conjugated block upper
//! triangular algebras for the positive corpus, plus registered
//! non-logmodular algebras for tampered variants.

use lma_core::{
    haar_unitary, nest_algebra, ComplexMatrix, CoreError, Partition, Subalgebra, ToleranceConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TamperKind {
    None,
    /// Emit the diagonal algebra D_n instead of the conjugated nest.
    ReplaceWithDiagonal,
    /// Emit a registered closed proper subalgebra that fails the endgame
    /// (or, for n = 2, the nilpotent span missing a row witness).
    DropBasisElement,
}

impl TamperKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "none" => Some(TamperKind::None),
            "replace-with-diagonal" => Some(TamperKind::ReplaceWithDiagonal),
            "drop-basis-element" => Some(TamperKind::DropBasisElement),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub partition: Partition,
    pub seed: u64,
    pub tamper: TamperKind,
}

fn unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    ComplexMatrix::matrix_unit(n, i, j)
}

fn diagonal_algebra(n: usize, tol: &ToleranceConfig) -> Result<Subalgebra, CoreError> {
    let basis: Vec<ComplexMatrix> = (0..n).map(|i| unit(n, i, i)).collect();
    Subalgebra::from_elements(n, &basis, true, tol)
}

/// Registered non-logmodular family for the drop-basis-element tamper:
/// span{I, E_01} for n = 2, span of all diagonal units plus the first row's
/// off-diagonal units for n ≥ 3. Both are closed, unital, and refutable.
fn dropped_basis_algebra(n: usize, tol: &ToleranceConfig) -> Result<Subalgebra, CoreError> {
    if n < 2 {
        return Err(CoreError::InvalidArgument(
            "every unital subalgebra of M_1 is logmodular; tampering needs n ≥ 2".into(),
        ));
    }
    if n == 2 {
        let elements = vec![ComplexMatrix::identity(2), unit(2, 0, 1)];
        return Subalgebra::from_elements(2, &elements, true, tol);
    }
    let mut elements: Vec<ComplexMatrix> = (0..n).map(|i| unit(n, i, i)).collect();
    for j in 1..n {
        elements.push(unit(n, 0, j));
    }
    Subalgebra::from_elements(n, &elements, true, tol)
}

/// Builds the instance algebra; untampered specs emit the nest algebra of
/// the partition conjugated by a seeded Haar unitary, tampered specs emit
/// their registered non-logmodular counterparts (which still pass the
/// loader's closure validation by construction).
pub fn generate_instance(
    spec: &InstanceSpec,
    tol: &ToleranceConfig,
) -> Result<Subalgebra, CoreError> {
    let n = spec.partition.n();
    match spec.tamper {
        TamperKind::None => {
            let u = haar_unitary(n, spec.seed)?;
            Ok(nest_algebra(&spec.partition).conjugate(&u))
        }
        TamperKind::ReplaceWithDiagonal => diagonal_algebra(n, tol),
        TamperKind::DropBasisElement => dropped_basis_algebra(n, tol),
    }
}

/// Serialized instance file; byte-identical across runs for equal specs.
pub fn instance_json(spec: &InstanceSpec, tol: &ToleranceConfig) -> Result<String, CoreError> {
    let algebra = generate_instance(spec, tol)?;
    let mut text = serde_json::to_string_pretty(&algebra.to_file_repr())
        .map_err(|e| CoreError::Malformed(format!("serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Entry magnitude sum, a cheap order-independent fingerprint for tests.
pub fn basis_mass(algebra: &Subalgebra) -> f64 {
    algebra
        .basis()
        .iter()
        .flat_map(|b| b.entries().iter())
        .map(|z| z.norm())
        .sum()
}
