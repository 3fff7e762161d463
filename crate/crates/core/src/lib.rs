//! Constructive structure recovery for unital subalgebras of `M_n(C)`.
//!
//! The crate decides whether a subalgebra is unitarily equivalent to a block
//! upper triangular (nest) algebra — equivalently, whether it is logmodular —
//! by building the conjugating unitary and block partition stage by stage.
//! Positive answers come with a machine-checkable [`Certificate`]; negative
//! answers carry a stage-tagged [`Failure`] naming the violated necessary
//! condition, plus optimization-based residual evidence.

pub mod algebra;
pub mod error;
pub mod factor;
pub mod graph;
pub mod logmod;
pub mod matrix;
pub mod svd;
pub mod tolerance;
pub mod triangularize;

pub use algebra::{
    algebra_distance, close_under_products, equals_algebra, nest_algebra, orthonormalize,
    AlgebraFile, Partition, RowWitnessBasis, Subalgebra,
};
pub use error::CoreError;
pub use factor::{
    cholesky_upper, haar_unitary, householder_to_e1, invert_permutation, permutation_unitary,
    reverse_cholesky_upper, sample_pd, solve_with_cholesky,
};
pub use graph::SupportDigraph;
pub use matrix::{ComplexMatrix, IndexProjection, UnitaryMatrix, C64};
pub use svd::{svd, Svd};
pub use tolerance::ToleranceConfig;
pub use triangularize::{
    absorbing_subset, clique_common_rows, diagonal_endgame, promote_next_unit, shift_row_out,
    triangularize, verify_certificate, Certificate, CliqueOutcome, CornerRow, CornerRowSet,
    EndgameStep, Failure, FailureStage, PipelineError, PromoteStep, StageFailure, StageKind,
    StageRecord, TriangularizeOutcome, VerifyReport,
};

pub use logmod::{
    factor_positive, factor_positive_dual, factorization_search, is_logmodular, Decision,
    FactorizationWitness, OracleProbe, SearchOptions, SearchResult, Verdict, WitnessPair,
};
