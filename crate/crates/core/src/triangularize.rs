//! The constructive engine: promote diagonal matrix units into the algebra
//! one coordinate at a time, recurse into corners when an absorbing index
//! set appears, and finish by sorting the diagonal support order into a
//! block partition. Success yields a [`Certificate`]; every dead end is a
//! [`Failure`] naming the violated necessary condition, which certifies
//! that no conjugation to block upper triangular form exists.

use serde::{Deserialize, Serialize};

use crate::algebra::{algebra_distance, nest_algebra, Partition, Subalgebra};
use crate::error::CoreError;
use crate::factor::{householder_to_e1, invert_permutation, permutation_unitary};
use crate::graph::SupportDigraph;
use crate::matrix::{row_matrix, vec_norm, ComplexMatrix, IndexProjection, UnitaryMatrix, C64};
use crate::tolerance::ToleranceConfig;

/// Which necessary condition broke, with the offending coordinates in the
/// local frame of the corner that was being worked on.
#[derive(Debug, Clone, PartialEq)]
pub enum FailureStage {
    /// No nonzero `e_row · v^T` lives in the algebra.
    RowWitnessMissing { offset: usize, row: usize },
    /// No support path escapes from `column` past the first `offset`
    /// coordinates, so a row element cannot be shifted out of them.
    ShiftBlocked { offset: usize, column: usize },
    /// A word product along `path` fell below the support threshold.
    CliqueConstructionFailed { offset: usize, path: Vec<usize> },
    /// Two coordinates carry no support in either direction although every
    /// diagonal unit is present.
    EndgameNotTotal { first: usize, second: usize },
    /// The assembled unitary does not carry the algebra onto the nest
    /// algebra of the recovered partition.
    VerificationMismatch,
}

impl FailureStage {
    pub fn kind_name(&self) -> &'static str {
        match self {
            FailureStage::RowWitnessMissing { .. } => "row_witness_missing",
            FailureStage::ShiftBlocked { .. } => "shift_blocked",
            FailureStage::CliqueConstructionFailed { .. } => "clique_construction_failed",
            FailureStage::EndgameNotTotal { .. } => "endgame_not_total",
            FailureStage::VerificationMismatch => "verification_mismatch",
        }
    }

    /// Offending coordinates, local to the working corner.
    pub fn local_indices(&self) -> Vec<usize> {
        match self {
            FailureStage::RowWitnessMissing { row, .. } => vec![*row],
            FailureStage::ShiftBlocked { column, .. } => vec![*column],
            FailureStage::CliqueConstructionFailed { path, .. } => path.clone(),
            FailureStage::EndgameNotTotal { first, second } => vec![*first, *second],
            FailureStage::VerificationMismatch => Vec::new(),
        }
    }

    pub fn offset(&self) -> Option<usize> {
        match self {
            FailureStage::RowWitnessMissing { offset, .. }
            | FailureStage::ShiftBlocked { offset, .. }
            | FailureStage::CliqueConstructionFailed { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

/// A refutation detected by a single stage, before pipeline context is
/// attached.
#[derive(Debug, Clone, thiserror::Error)]
#[error("stage refutation: {stage:?}")]
pub struct StageFailure {
    pub stage: FailureStage,
    pub residuals: Vec<f64>,
}

/// Stage operations either refute logmodularity or break numerically.
#[derive(Debug, Clone, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Refuted(#[from] StageFailure),
    #[error(transparent)]
    Numeric(#[from] CoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    PromoteUnit,
    CornerRecursion,
    Endgame,
}

impl StageKind {
    pub fn name(&self) -> &'static str {
        match self {
            StageKind::PromoteUnit => "promote_unit",
            StageKind::CornerRecursion => "corner_recursion",
            StageKind::Endgame => "endgame",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "promote_unit" => Some(StageKind::PromoteUnit),
            "corner_recursion" => Some(StageKind::CornerRecursion),
            "endgame" => Some(StageKind::Endgame),
            _ => None,
        }
    }
}

/// One entry of the stage log. `indices` are ambient coordinates (0-based in
/// memory, 1-based on disk); `unitary` is the ambient conjugation the stage
/// applied and is dropped on serialization. Corner-recursion markers carry
/// no conjugation of their own, the recursed stages follow them in the log.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub kind: StageKind,
    pub indices: Vec<usize>,
    pub unitary: Option<ComplexMatrix>,
}

/// Proof object for a positive verdict: conjugating the input by `unitary`
/// yields the block upper triangular algebra of `partition`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CertificateRepr", into = "CertificateRepr")]
pub struct Certificate {
    pub n: usize,
    pub unitary: UnitaryMatrix,
    pub partition: Partition,
    pub stages: Vec<StageRecord>,
    /// Optional `(B, a)` factorization pairs with `a*a = B`, attached by the
    /// verdict layer.
    pub witnesses: Vec<(ComplexMatrix, ComplexMatrix)>,
}

impl Certificate {
    /// Ordered product of the logged stage conjugations; on freshly built
    /// certificates this reproduces `unitary`.
    pub fn replay_unitary(&self) -> ComplexMatrix {
        let mut u = ComplexMatrix::identity(self.n);
        for record in &self.stages {
            if let Some(stage_u) = &record.unitary {
                u = stage_u.mul(&u);
            }
        }
        u
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        serde_json::from_str(text)
            .map_err(|e| CoreError::Malformed(format!("certificate JSON: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct StageRepr {
    kind: String,
    indices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CertWitnessRepr {
    #[serde(rename = "B")]
    b: ComplexMatrix,
    a: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct CertificateRepr {
    n: usize,
    partition: Vec<usize>,
    unitary: ComplexMatrix,
    stages: Vec<StageRepr>,
    witnesses: Vec<CertWitnessRepr>,
}

impl From<Certificate> for CertificateRepr {
    fn from(c: Certificate) -> Self {
        CertificateRepr {
            n: c.n,
            partition: c.partition.parts().to_vec(),
            unitary: c.unitary.into_matrix(),
            stages: c
                .stages
                .into_iter()
                .map(|s| StageRepr {
                    kind: s.kind.name().to_string(),
                    indices: s.indices.iter().map(|i| i + 1).collect(),
                })
                .collect(),
            witnesses: c
                .witnesses
                .into_iter()
                .map(|(b, a)| CertWitnessRepr { b, a })
                .collect(),
        }
    }
}

impl TryFrom<CertificateRepr> for Certificate {
    type Error = CoreError;

    fn try_from(repr: CertificateRepr) -> Result<Self, CoreError> {
        let partition = Partition::new(repr.partition)
            .map_err(|e| CoreError::Malformed(format!("certificate partition: {e}")))?;
        if partition.n() != repr.n {
            return Err(CoreError::Malformed(format!(
                "partition sums to {} but n = {}",
                partition.n(),
                repr.n
            )));
        }
        if repr.unitary.rows() != repr.n || repr.unitary.cols() != repr.n {
            return Err(CoreError::Malformed(
                "certificate unitary has wrong shape".into(),
            ));
        }
        let stages = repr
            .stages
            .into_iter()
            .map(|s| {
                let kind = StageKind::from_name(&s.kind).ok_or_else(|| {
                    CoreError::Malformed(format!("unknown stage kind `{}`", s.kind))
                })?;
                let indices = s
                    .indices
                    .iter()
                    .map(|&i| {
                        i.checked_sub(1)
                            .ok_or_else(|| CoreError::Malformed("stage indices are 1-based".into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(StageRecord {
                    kind,
                    indices,
                    unitary: None,
                })
            })
            .collect::<Result<Vec<_>, CoreError>>()?;
        Ok(Certificate {
            n: repr.n,
            unitary: UnitaryMatrix::new(repr.unitary, &ToleranceConfig::default())
                .map_err(|e| CoreError::Malformed(format!("certificate unitary: {e}")))?,
            partition,
            stages,
            witnesses: repr.witnesses.into_iter().map(|w| (w.b, w.a)).collect(),
        })
    }
}

/// Stage-tagged refutation with enough context to re-check the cited
/// condition: rebuild `corner(conjugate(original, unitary), retained)` and
/// scan it directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "FailureRepr", into = "FailureRepr")]
pub struct Failure {
    pub stage: FailureStage,
    pub residuals: Vec<f64>,
    /// Ambient coordinates the working corner lived on at failure time.
    pub retained: Vec<usize>,
    /// Ambient conjugation accumulated before the failure.
    pub unitary: ComplexMatrix,
    /// Partition candidate, present only for verification mismatches.
    pub partition: Option<Partition>,
    pub stages: Vec<StageRecord>,
}

impl Failure {
    pub fn local_indices(&self) -> Vec<usize> {
        self.stage.local_indices()
    }

    /// Offending coordinates mapped back to ambient positions.
    pub fn ambient_indices(&self) -> Vec<usize> {
        self.stage
            .local_indices()
            .iter()
            .map(|&i| self.retained.get(i).copied().unwrap_or(i))
            .collect()
    }

    /// Rebuilds the working algebra at failure time and re-checks the cited
    /// necessary condition by a direct scan.
    pub fn recheck(&self, original: &Subalgebra, tol: &ToleranceConfig) -> Result<bool, CoreError> {
        let n = original.n();
        let u = UnitaryMatrix::new(self.unitary.clone(), tol)?;
        let conjugated = original.conjugate(&u);

        if let FailureStage::VerificationMismatch = self.stage {
            let partition = self.partition.as_ref().ok_or_else(|| {
                CoreError::InvalidArgument("verification failure lost its partition".into())
            })?;
            let target = nest_algebra(partition);
            let agrees = algebra_distance(&conjugated, &target).is_some_and(|d| d <= tol.verify);
            return Ok(!agrees);
        }

        let working = if self.retained.len() == n {
            conjugated
        } else {
            let keep = IndexProjection::new(n, self.retained.clone())?;
            match conjugated.corner(&keep, tol) {
                Ok(c) => c,
                Err(_) => return Ok(false),
            }
        };

        Ok(match &self.stage {
            FailureStage::RowWitnessMissing { row, .. } => {
                working.row_witness_basis(*row, tol).is_empty()
            }
            FailureStage::ShiftBlocked { offset, column } => {
                let graph = working.support_relation(tol);
                escape_path(&graph, *column, *offset).is_none()
            }
            FailureStage::CliqueConstructionFailed { .. } => self
                .residuals
                .first()
                .is_some_and(|&magnitude| magnitude <= tol.zero),
            FailureStage::EndgameNotTotal { first, second } => {
                let scale = working
                    .basis()
                    .iter()
                    .map(|b| b.max_abs())
                    .fold(0.0f64, f64::max);
                working.basis().iter().all(|b| {
                    b[(*first, *second)].norm() <= tol.zero * scale
                        && b[(*second, *first)].norm() <= tol.zero * scale
                })
            }
            FailureStage::VerificationMismatch => unreachable!("handled above"),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FailureRepr {
    stage: String,
    indices: Vec<usize>,
    local_indices: Vec<usize>,
    offset: Option<usize>,
    residuals: Vec<f64>,
    retained: Vec<usize>,
    partition: Option<Vec<usize>>,
    unitary: ComplexMatrix,
    stages: Vec<StageRepr>,
}

impl From<Failure> for FailureRepr {
    fn from(f: Failure) -> Self {
        FailureRepr {
            stage: f.stage.kind_name().to_string(),
            indices: f.ambient_indices().iter().map(|i| i + 1).collect(),
            local_indices: f.stage.local_indices().iter().map(|i| i + 1).collect(),
            offset: f.stage.offset(),
            residuals: f.residuals.clone(),
            retained: f.retained.iter().map(|i| i + 1).collect(),
            partition: f.partition.as_ref().map(|p| p.parts().to_vec()),
            unitary: f.unitary.clone(),
            stages: f
                .stages
                .iter()
                .map(|s| StageRepr {
                    kind: s.kind.name().to_string(),
                    indices: s.indices.iter().map(|i| i + 1).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<FailureRepr> for Failure {
    type Error = CoreError;

    fn try_from(repr: FailureRepr) -> Result<Self, CoreError> {
        let shift = |v: &[usize]| -> Result<Vec<usize>, CoreError> {
            v.iter()
                .map(|&i| {
                    i.checked_sub(1)
                        .ok_or_else(|| CoreError::Malformed("indices are 1-based".into()))
                })
                .collect()
        };
        let local = shift(&repr.local_indices)?;
        let stage = match repr.stage.as_str() {
            "row_witness_missing" => FailureStage::RowWitnessMissing {
                offset: repr.offset.unwrap_or(0),
                row: *local.first().ok_or_else(|| {
                    CoreError::Malformed("row_witness_missing needs a row index".into())
                })?,
            },
            "shift_blocked" => FailureStage::ShiftBlocked {
                offset: repr.offset.unwrap_or(0),
                column: *local.first().ok_or_else(|| {
                    CoreError::Malformed("shift_blocked needs a column index".into())
                })?,
            },
            "clique_construction_failed" => FailureStage::CliqueConstructionFailed {
                offset: repr.offset.unwrap_or(0),
                path: local,
            },
            "endgame_not_total" => {
                if local.len() != 2 {
                    return Err(CoreError::Malformed(
                        "endgame_not_total needs a pair".into(),
                    ));
                }
                FailureStage::EndgameNotTotal {
                    first: local[0],
                    second: local[1],
                }
            }
            "verification_mismatch" => FailureStage::VerificationMismatch,
            other => {
                return Err(CoreError::Malformed(format!(
                    "unknown failure stage `{other}`"
                )));
            }
        };
        Ok(Failure {
            stage,
            residuals: repr.residuals,
            retained: shift(&repr.retained)?,
            unitary: repr.unitary,
            partition: repr.partition.map(Partition::new).transpose()?,
            stages: repr
                .stages
                .into_iter()
                .map(|s| {
                    Ok(StageRecord {
                        kind: StageKind::from_name(&s.kind).ok_or_else(|| {
                            CoreError::Malformed(format!("unknown stage kind `{}`", s.kind))
                        })?,
                        indices: shift(&s.indices)?,
                        unitary: None,
                    })
                })
                .collect::<Result<Vec<_>, CoreError>>()?,
        })
    }
}

#[derive(Debug, Clone)]
pub enum TriangularizeOutcome {
    Certified(Certificate),
    Refuted(Failure),
}

impl TriangularizeOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            TriangularizeOutcome::Certified(c) => Some(c),
            TriangularizeOutcome::Refuted(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&Failure> {
        match self {
            TriangularizeOutcome::Certified(_) => None,
            TriangularizeOutcome::Refuted(f) => Some(f),
        }
    }
}

/// Single-row elements prepared for one promotion step: for each row `t`
/// past the offset, a unit vector supported on the trailing coordinates and
/// the algebra element realizing it.
#[derive(Debug, Clone)]
pub struct CornerRowSet {
    pub offset: usize,
    pub rows: Vec<CornerRow>,
}

#[derive(Debug, Clone)]
pub struct CornerRow {
    /// Ambient row index.
    pub row: usize,
    /// Unit row vector in corner coordinates (length `n − offset`).
    pub vector: Vec<C64>,
    /// The realizing element `e_row · w^T`, ambient-sized, a member of the
    /// algebra.
    pub element: ComplexMatrix,
}

/// Result of the common-row extraction: a set of labels `members` carrying
/// single-row elements that are all scalar multiples of the same unit row
/// `common_row` (indexed by the sorted members), plus those word-product
/// elements themselves.
#[derive(Debug, Clone)]
pub struct CliqueOutcome {
    pub members: Vec<usize>,
    pub anchor: usize,
    pub common_row: Vec<C64>,
    pub elements: Vec<ComplexMatrix>,
    pub paths: Vec<Vec<usize>>,
}

/// Shortest path `from → … → to` of length at least one in `g`.
fn shortest_positive_path(g: &SupportDigraph, from: usize, to: usize) -> Option<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    for w in g.out_neighbors(from) {
        if let Some(tail) = g.path_to_targets(w, &[to]) {
            let mut path = vec![from];
            path.extend(tail);
            if best.as_ref().is_none_or(|b| path.len() < b.len()) {
                best = Some(path);
            }
        }
    }
    best
}

/// BFS from `start` over edges departing from the first `offset` vertices;
/// returns a path whose final vertex is the first one at or past `offset`.
fn escape_path(g: &SupportDigraph, start: usize, offset: usize) -> Option<Vec<usize>> {
    let m = g.vertex_count();
    let mut pred = vec![usize::MAX; m];
    let mut queue = std::collections::VecDeque::new();
    pred[start] = start;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        if v >= offset {
            continue; // edges may only depart from the leading block
        }
        for w in g.out_neighbors(v) {
            if pred[w] != usize::MAX {
                continue;
            }
            pred[w] = v;
            if w >= offset {
                let mut path = vec![w];
                let mut cur = v;
                loop {
                    path.push(cur);
                    if cur == start {
                        break;
                    }
                    cur = pred[cur];
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(w);
        }
    }
    None
}

/// From a family of labeled nonzero row vectors, finds a set of labels `W`
/// whose word products realize single-row elements sharing one common row
/// supported inside `W`.
///
/// The word-support relation of single-row generators is exactly path
/// existence in the one-step digraph with an edge `(i, j)` whenever
/// `v_i(j)` is nonzero, so the terminal full subgraph of its transitive
/// closure plays the role of the label set.
pub fn clique_common_rows(
    rows: &[(usize, Vec<C64>)],
    tol: &ToleranceConfig,
) -> Result<CliqueOutcome, PipelineError> {
    let m = rows.len();
    if m == 0 {
        return Err(CoreError::InvalidArgument("no rows given".into()).into());
    }
    let mut slots: Vec<Option<&Vec<C64>>> = vec![None; m];
    for (label, v) in rows {
        if *label >= m || slots[*label].is_some() {
            return Err(CoreError::InvalidArgument(format!(
                "labels must be distinct and cover 0..{m}"
            ))
            .into());
        }
        if v.len() != m {
            return Err(CoreError::DimensionMismatch(format!(
                "row {label} has length {}, expected {m}",
                v.len()
            ))
            .into());
        }
        slots[*label] = Some(v);
    }
    let vectors: Vec<&Vec<C64>> = slots.into_iter().map(Option::unwrap).collect();
    let scale = vectors
        .iter()
        .flat_map(|v| v.iter())
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(CoreError::InvalidArgument("all rows are zero".into()).into());
    }

    let mut one_step = SupportDigraph::new(m);
    for (i, v) in vectors.iter().enumerate() {
        for (j, z) in v.iter().enumerate() {
            if z.norm() > tol.zero * scale {
                one_step.add_edge(i, j);
            }
        }
    }
    let closure = one_step.transitive_closure();
    let members = closure.terminal_full_subgraph()?;
    let anchor = members[0];

    let generators: Vec<ComplexMatrix> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| row_matrix(m, i, v))
        .collect();

    let mut elements = Vec::with_capacity(members.len());
    let mut paths = Vec::with_capacity(members.len());
    for &i in &members {
        let path = shortest_positive_path(&one_step, i, anchor).ok_or_else(|| {
            CoreError::RankInconsistency(format!(
                "no one-step path {i} → {anchor} although the closure has the edge"
            ))
        })?;
        let mut product = generators[path[0]].clone();
        for &p in &path[1..] {
            product = product.mul(&generators[p]);
        }
        let magnitude = product.frobenius_norm();
        if magnitude <= tol.zero {
            return Err(StageFailure {
                stage: FailureStage::CliqueConstructionFailed {
                    offset: 0,
                    path: path.clone(),
                },
                residuals: vec![magnitude],
            }
            .into());
        }
        elements.push(product);
        paths.push(path);
    }

    let common_full = vectors[anchor];
    let restricted: Vec<C64> = members.iter().map(|&j| common_full[j]).collect();
    let common_row = crate::matrix::vec_normalize(&restricted).ok_or_else(|| {
        CoreError::RankInconsistency("anchor row vanished on the member set".into())
    })?;

    Ok(CliqueOutcome {
        members,
        anchor,
        common_row,
        elements,
        paths,
    })
}

/// Moves the support of a single-row element past the first `offset`
/// columns by multiplying with a word that escapes the leading block,
/// following a support path realized by concrete projected matrix units.
///
/// Returns the element unchanged when its support already avoids the
/// leading columns. A missing escape path is the refutation
/// [`FailureStage::ShiftBlocked`].
pub fn shift_row_out(
    algebra: &Subalgebra,
    offset: usize,
    row: usize,
    row_element: &ComplexMatrix,
    tol: &ToleranceConfig,
) -> Result<ComplexMatrix, PipelineError> {
    let n = algebra.n();
    if row < offset || row >= n {
        return Err(
            CoreError::InvalidArgument(format!("row {row} must lie in {offset}..{n}")).into(),
        );
    }
    let (inside, residual) = algebra.contains(row_element, tol);
    if !inside {
        return Err(CoreError::PreconditionViolation(format!(
            "row element is not a member (residual {residual:.3e})"
        ))
        .into());
    }
    let scale = row_element.max_abs();
    for i in 0..n {
        if i == row {
            continue;
        }
        let weight = row_element
            .row(i)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if weight > tol.zero * scale {
            return Err(CoreError::PreconditionViolation(format!(
                "element is not supported on row {row} alone (row {i} carries {weight:.3e})"
            ))
            .into());
        }
    }

    let leading = row_element.row(row)[..offset]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .filter(|(_, z)| z.norm() > tol.zero * scale);
    let column = match leading {
        Some((i, _)) => i,
        None => return Ok(row_element.clone()), // already clear of the leading block
    };

    let graph = algebra.support_relation(tol);
    let path = escape_path(&graph, column, offset).ok_or(StageFailure {
        stage: FailureStage::ShiftBlocked { offset, column },
        residuals: vec![],
    })?;

    // word = E_{p0,p0} a_0 E_{p1,p1} a_1 ⋯ a_last, each edge realized by the
    // projection of its matrix unit: that projection is a member and its
    // (p, q) entry equals Σ_b |b(p,q)|², real positive whenever the edge
    // exists, so the telescoped product cannot cancel.
    let mut word = ComplexMatrix::matrix_unit(n, column, column);
    for step in path.windows(2) {
        let realizer = algebra.project(&ComplexMatrix::matrix_unit(n, step[0], step[1]));
        word = word
            .mul(&ComplexMatrix::matrix_unit(n, step[0], step[0]))
            .mul(&realizer);
    }

    let mask = IndexProjection::new(n, (offset..n).collect())?.matrix();
    let picked = ComplexMatrix::matrix_unit(n, column, column);
    let shifted = row_element.mul(&picked).mul(&word).mul(&mask);

    let magnitude = shifted.frobenius_norm();
    if magnitude <= tol.zero * scale {
        return Err(CoreError::RankInconsistency(format!(
            "shifted row collapsed numerically (norm {magnitude:.3e})"
        ))
        .into());
    }
    Ok(shifted)
}

/// Searches the first `offset` coordinates for a nonempty reach-set that
/// stays inside them; such a set absorbs all support and triggers the
/// corner recursion.
pub fn absorbing_subset(
    algebra: &Subalgebra,
    offset: usize,
    tol: &ToleranceConfig,
) -> Result<Option<IndexProjection>, CoreError> {
    let n = algebra.n();
    if offset > n {
        return Err(CoreError::InvalidArgument(format!(
            "offset {offset} exceeds dimension {n}"
        )));
    }
    let graph = algebra.support_relation(tol);
    for i in 0..offset {
        let mut reach = graph.reachable_from(i);
        if !reach.contains(&i) {
            reach.push(i);
            reach.sort_unstable();
        }
        if reach.iter().all(|&v| v < offset) {
            return Ok(Some(IndexProjection::new(n, reach)?));
        }
    }
    Ok(None)
}

/// One promotion step with `offset` diagonal units already present: extract
/// a single-row witness for every later row, shift leading support out,
/// find the common-row label set, and conjugate so that the next diagonal
/// unit becomes a member.
#[derive(Debug)]
pub struct PromoteStep {
    /// Conjugation applied by the step; acts as the identity on the first
    /// `offset` coordinates.
    pub unitary: UnitaryMatrix,
    pub conjugated: Subalgebra,
    pub corner_rows: CornerRowSet,
    pub clique: CliqueOutcome,
}

pub fn promote_next_unit(
    algebra: &Subalgebra,
    offset: usize,
    tol: &ToleranceConfig,
) -> Result<PromoteStep, PipelineError> {
    let n = algebra.n();
    if offset >= n {
        return Err(CoreError::InvalidArgument(format!(
            "offset {offset} leaves nothing to promote in dimension {n}"
        ))
        .into());
    }
    for i in 0..offset {
        let (ok, residual) = algebra.contains(&ComplexMatrix::matrix_unit(n, i, i), tol);
        if !ok {
            return Err(CoreError::PreconditionViolation(format!(
                "diagonal unit {i} is not a member (residual {residual:.3e})"
            ))
            .into());
        }
    }

    let corner_dim = n - offset;
    let mut corner_rows = Vec::with_capacity(corner_dim);
    for t in offset..n {
        let witnesses = algebra.row_witness_basis(t, tol);
        let vector = witnesses.leading().ok_or(StageFailure {
            stage: FailureStage::RowWitnessMissing { offset, row: t },
            residuals: vec![],
        })?;
        let mut element = row_matrix(n, t, vector);
        let touches_leading = vector[..offset].iter().any(|z| z.norm() > tol.zero);
        if touches_leading {
            element = shift_row_out(algebra, offset, t, &element, tol)?;
        }
        // rebuild as an exact single-row matrix vanishing on the leading
        // columns; the scrubbed sub-threshold weight keeps the membership
        // residual far below `member`
        let mut full_row = element.row(t).to_vec();
        for entry in full_row.iter_mut().take(offset) {
            *entry = C64::new(0.0, 0.0);
        }
        let norm = vec_norm(&full_row);
        if norm == 0.0 {
            return Err(CoreError::RankInconsistency(format!(
                "row {t} vanished during preparation"
            ))
            .into());
        }
        for entry in full_row.iter_mut() {
            *entry /= norm;
        }
        let element = row_matrix(n, t, &full_row);
        let vector: Vec<C64> = full_row[offset..].to_vec();
        corner_rows.push(CornerRow {
            row: t,
            vector,
            element,
        });
    }

    let labeled: Vec<(usize, Vec<C64>)> = corner_rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.vector.clone()))
        .collect();
    let clique = clique_common_rows(&labeled, tol).map_err(|e| match e {
        PipelineError::Refuted(StageFailure {
            stage: FailureStage::CliqueConstructionFailed { path, .. },
            residuals,
        }) => PipelineError::Refuted(StageFailure {
            stage: FailureStage::CliqueConstructionFailed {
                offset,
                path: path.iter().map(|p| p + offset).collect(),
            },
            residuals,
        }),
        other => other,
    })?;

    // permutation moving the member labels to the front of the corner,
    // then a Householder alignment of the common row with e_1
    let mut order = clique.members.clone();
    order.extend((0..corner_dim).filter(|i| !clique.members.contains(i)));
    let perm = permutation_unitary(&invert_permutation(&order))?;

    let align = householder_to_e1(&clique.common_row, tol)?;
    let front: Vec<usize> = (0..clique.members.len()).collect();
    let align_conj = align.adjoint().embed(corner_dim, &front);

    let corner_unitary = align_conj.compose(&perm);
    let positions: Vec<usize> = (offset..n).collect();
    let unitary = corner_unitary.embed(n, &positions);
    let conjugated = algebra.conjugate(&unitary);

    for i in 0..=offset {
        let (ok, residual) = conjugated.contains(&ComplexMatrix::matrix_unit(n, i, i), tol);
        if !ok {
            return Err(CoreError::RankInconsistency(format!(
                "promotion lost diagonal unit {i} (residual {residual:.3e})"
            ))
            .into());
        }
    }

    Ok(PromoteStep {
        unitary,
        conjugated,
        corner_rows: CornerRowSet {
            offset,
            rows: corner_rows,
        },
        clique,
    })
}

/// With every diagonal unit present, reads the support quasi-order
/// `i ≼ j ⟺ edge (i, j)`, demands totality, and sorts the mutual-support
/// classes into a chain.
#[derive(Debug)]
pub struct EndgameStep {
    /// Original coordinates listed in chain order.
    pub order: Vec<usize>,
    pub partition: Partition,
}

pub fn diagonal_endgame(
    algebra: &Subalgebra,
    tol: &ToleranceConfig,
) -> Result<EndgameStep, PipelineError> {
    let n = algebra.n();
    for i in 0..n {
        let (ok, residual) = algebra.contains(&ComplexMatrix::matrix_unit(n, i, i), tol);
        if !ok {
            return Err(CoreError::PreconditionViolation(format!(
                "diagonal unit {i} is not a member (residual {residual:.3e})"
            ))
            .into());
        }
    }
    let raw = algebra.support_relation(tol);
    // with every diagonal unit present the support relation is transitive
    // (compression through E_jj realizes compositions); closing it only
    // guards numerical borderline entries
    let relation = raw.transitive_closure();
    for i in 0..n {
        for j in (i + 1)..n {
            if !relation.has_edge(i, j) && !relation.has_edge(j, i) {
                let weight = |p: usize, q: usize| {
                    algebra
                        .basis()
                        .iter()
                        .map(|b| b[(p, q)].norm())
                        .fold(0.0f64, f64::max)
                };
                return Err(StageFailure {
                    stage: FailureStage::EndgameNotTotal {
                        first: i,
                        second: j,
                    },
                    residuals: vec![weight(i, j), weight(j, i)],
                }
                .into());
            }
        }
    }
    let mut classes = relation.strongly_connected_components();
    classes.sort_by(|a, b| {
        if relation.has_edge(a[0], b[0]) && !relation.has_edge(b[0], a[0]) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });
    let order: Vec<usize> = classes.iter().flatten().copied().collect();
    let partition = Partition::new(classes.iter().map(|c| c.len()).collect())?;
    Ok(EndgameStep { order, partition })
}

/// Residual report of [`verify_certificate`]; `matches` is the sole
/// authority behind positive verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub matches: bool,
    pub algebra_residual: f64,
    pub unitary_residual: f64,
}

pub fn verify_certificate(
    algebra: &Subalgebra,
    certificate: &Certificate,
    tol: &ToleranceConfig,
) -> VerifyReport {
    let unitary_residual = certificate.unitary.unitarity_residual();
    if certificate.n != algebra.n() || certificate.partition.n() != algebra.n() {
        return VerifyReport {
            matches: false,
            algebra_residual: f64::MAX,
            unitary_residual,
        };
    }
    let conjugated = algebra.conjugate(&certificate.unitary);
    let target = nest_algebra(&certificate.partition);
    let algebra_residual = algebra_distance(&conjugated, &target).unwrap_or(f64::MAX);
    VerifyReport {
        matches: algebra_residual <= tol.verify && unitary_residual <= tol.unitary,
        algebra_residual,
        unitary_residual,
    }
}

enum LocalOutcome {
    Done {
        unitary: ComplexMatrix,
        partition: Partition,
    },
    Refuted(Failure),
}

fn build_failure(
    sf: StageFailure,
    map: &[usize],
    ambient_n: usize,
    stages: &[StageRecord],
) -> Failure {
    let mut unitary = ComplexMatrix::identity(ambient_n);
    for record in stages {
        if let Some(u) = &record.unitary {
            unitary = u.mul(&unitary);
        }
    }
    Failure {
        stage: sf.stage,
        residuals: sf.residuals,
        retained: map.to_vec(),
        unitary,
        partition: None,
        stages: stages.to_vec(),
    }
}

fn triangularize_at(
    algebra: Subalgebra,
    map: &[usize],
    ambient_n: usize,
    tol: &ToleranceConfig,
    stages: &mut Vec<StageRecord>,
) -> Result<LocalOutcome, CoreError> {
    let m = algebra.n();
    if m == 1 {
        return Ok(LocalOutcome::Done {
            unitary: ComplexMatrix::identity(1),
            partition: Partition::new(vec![1]).expect("singleton partition"),
        });
    }

    let mut working = algebra;
    let mut local_u = ComplexMatrix::identity(m);
    let mut promoted = 0usize;

    while promoted < m {
        if promoted > 0 {
            if let Some(absorbing) = absorbing_subset(&working, promoted, tol)? {
                let keep = absorbing.complement();
                stages.push(StageRecord {
                    kind: StageKind::CornerRecursion,
                    indices: absorbing.indices().iter().map(|&i| map[i]).collect(),
                    unitary: None,
                });
                let corner = working.corner(&keep, tol)?;
                let sub_map: Vec<usize> = keep.indices().iter().map(|&i| map[i]).collect();
                match triangularize_at(corner, &sub_map, ambient_n, tol, stages)? {
                    LocalOutcome::Refuted(f) => return Ok(LocalOutcome::Refuted(f)),
                    LocalOutcome::Done { unitary, .. } => {
                        let lift = UnitaryMatrix::new_unchecked(unitary).embed(m, keep.indices());
                        working = working.conjugate(&lift);
                        local_u = lift.matrix().mul(&local_u);
                        break; // every diagonal unit is now present
                    }
                }
            }
        }
        match promote_next_unit(&working, promoted, tol) {
            Ok(step) => {
                stages.push(StageRecord {
                    kind: StageKind::PromoteUnit,
                    indices: vec![map[promoted]],
                    unitary: Some(step.unitary.matrix().embed_in_identity(ambient_n, map)),
                });
                local_u = step.unitary.matrix().mul(&local_u);
                working = step.conjugated;
                promoted += 1;
            }
            Err(PipelineError::Refuted(sf)) => {
                return Ok(LocalOutcome::Refuted(build_failure(
                    sf, map, ambient_n, stages,
                )));
            }
            Err(PipelineError::Numeric(e)) => return Err(e),
        }
    }

    match diagonal_endgame(&working, tol) {
        Ok(EndgameStep { order, partition }) => {
            let perm = permutation_unitary(&invert_permutation(&order))?;
            local_u = perm.matrix().mul(&local_u);
            stages.push(StageRecord {
                kind: StageKind::Endgame,
                indices: order.iter().map(|&i| map[i]).collect(),
                unitary: Some(perm.matrix().embed_in_identity(ambient_n, map)),
            });
            Ok(LocalOutcome::Done {
                unitary: local_u,
                partition,
            })
        }
        Err(PipelineError::Refuted(sf)) => Ok(LocalOutcome::Refuted(build_failure(
            sf, map, ambient_n, stages,
        ))),
        Err(PipelineError::Numeric(e)) => Err(e),
    }
}

/// Runs the full pipeline: promotion loop with absorbing-set recursion,
/// diagonal endgame, and final verification against the nest algebra of the
/// recovered partition. Verification is the sole authority for positive
/// outcomes; every stage dead end comes back as a [`Failure`].
pub fn triangularize(
    algebra: &Subalgebra,
    tol: &ToleranceConfig,
) -> Result<TriangularizeOutcome, CoreError> {
    let n = algebra.n();
    tol.validate(n)?;
    if !algebra.is_unital() {
        return Err(CoreError::PreconditionViolation(
            "triangularization needs a unital algebra".into(),
        ));
    }
    let (has_unit, residual) = algebra.contains(&ComplexMatrix::identity(n), tol);
    if !has_unit {
        return Err(CoreError::PreconditionViolation(format!(
            "identity is not a member (residual {residual:.3e})"
        )));
    }

    let map: Vec<usize> = (0..n).collect();
    let mut stages = Vec::new();
    match triangularize_at(algebra.clone(), &map, n, tol, &mut stages)? {
        LocalOutcome::Refuted(f) => Ok(TriangularizeOutcome::Refuted(f)),
        LocalOutcome::Done { unitary, partition } => {
            let certificate = Certificate {
                n,
                unitary: UnitaryMatrix::new_unchecked(unitary),
                partition: partition.clone(),
                stages: stages.clone(),
                witnesses: Vec::new(),
            };
            let report = verify_certificate(algebra, &certificate, tol);
            if report.matches {
                Ok(TriangularizeOutcome::Certified(certificate))
            } else {
                Ok(TriangularizeOutcome::Refuted(Failure {
                    stage: FailureStage::VerificationMismatch,
                    residuals: vec![report.algebra_residual, report.unitary_residual],
                    retained: map,
                    unitary: certificate.unitary.matrix().clone(),
                    partition: Some(partition),
                    stages,
                }))
            }
        }
    }
}
