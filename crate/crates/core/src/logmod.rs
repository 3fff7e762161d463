//! Logmodularity verdicts. A positive verdict carries a verified
//! certificate together with exact factorization witnesses `B = a*a = cc*`
//! transported through the certificate's unitary; a negative verdict
//! carries the stage-tagged refutation plus least-squares residual evidence
//! that probe targets cannot be factored inside the algebra.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::Subalgebra;
use crate::error::CoreError;
use crate::factor::{cholesky_upper, reverse_cholesky_upper, sample_pd, solve_with_cholesky};
use crate::matrix::{ComplexMatrix, C64};
use crate::svd::svd;
use crate::tolerance::ToleranceConfig;
use crate::triangularize::{
    triangularize, verify_certificate, Certificate, Failure, TriangularizeOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Logmodular,
    NotLogmodular,
}

/// One exact factorization `B = factor* · factor` (or `factor · factor*`
/// for the dual orientation), with its residuals and the smallest singular
/// value of the factor as the invertibility margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationWitness {
    #[serde(rename = "B")]
    pub target: ComplexMatrix,
    pub factor: ComplexMatrix,
    pub factor_residual: f64,
    pub membership_residual: f64,
    pub min_singular_value: f64,
}

/// Dual witness pair: `left` satisfies `a*a = B`, `right` satisfies
/// `c c* = B`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessPair {
    pub left: FactorizationWitness,
    pub right: FactorizationWitness,
}

/// Residual evidence from the least-squares probe on one target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleProbe {
    #[serde(rename = "B")]
    pub target: ComplexMatrix,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub certificate: Option<Certificate>,
    pub failure: Option<Failure>,
    pub witnesses: Vec<WitnessPair>,
    pub oracle: Vec<OracleProbe>,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serialization cannot fail")
    }
}

fn min_singular_value(m: &ComplexMatrix) -> f64 {
    svd(m).singular_values.last().copied().unwrap_or(0.0)
}

fn witness_from_factor(
    algebra: &Subalgebra,
    target: &ComplexMatrix,
    factor: ComplexMatrix,
    product: ComplexMatrix,
) -> FactorizationWitness {
    FactorizationWitness {
        target: target.clone(),
        factor_residual: product.sub(target).frobenius_norm(),
        membership_residual: algebra.membership_residual(&factor),
        min_singular_value: min_singular_value(&factor),
        factor,
    }
}

/// Exact factorization `B = a*a` with `a` a member: factor `U B U*` by the
/// Cholesky routine and pull the upper-triangular factor back through the
/// certificate's unitary. Upper triangular matrices belong to every nest
/// algebra, so the pullback lands in the algebra whenever the certificate
/// verifies.
pub fn factor_positive(
    algebra: &Subalgebra,
    certificate: &Certificate,
    target: &ComplexMatrix,
    tol: &ToleranceConfig,
) -> Result<FactorizationWitness, CoreError> {
    let report = verify_certificate(algebra, certificate, tol);
    if !report.matches {
        return Err(CoreError::PreconditionViolation(format!(
            "certificate does not verify (algebra residual {:.3e})",
            report.algebra_residual
        )));
    }
    let u = certificate.unitary.matrix();
    let moved = u.mul(target).mul(&u.adjoint());
    let r = cholesky_upper(&moved, tol)?;
    let factor = u.adjoint().mul(&r).mul(u);
    let product = factor.adjoint().mul(&factor);
    Ok(witness_from_factor(algebra, target, factor, product))
}

/// Dual orientation `B = c c*`, through the reverse Cholesky factor.
pub fn factor_positive_dual(
    algebra: &Subalgebra,
    certificate: &Certificate,
    target: &ComplexMatrix,
    tol: &ToleranceConfig,
) -> Result<FactorizationWitness, CoreError> {
    let report = verify_certificate(algebra, certificate, tol);
    if !report.matches {
        return Err(CoreError::PreconditionViolation(format!(
            "certificate does not verify (algebra residual {:.3e})",
            report.algebra_residual
        )));
    }
    let u = certificate.unitary.matrix();
    let moved = u.mul(target).mul(&u.adjoint());
    let r = reverse_cholesky_upper(&moved, tol)?;
    let factor = u.adjoint().mul(&r).mul(u);
    let product = factor.mul(&factor.adjoint());
    Ok(witness_from_factor(algebra, target, factor, product))
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iters: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub minimizer: ComplexMatrix,
    pub residual: f64,
}

/// Evaluates `a = Σ x_j b_j` and the residual matrix `a*a − B`.
struct SearchProblem<'a> {
    algebra: &'a Subalgebra,
    target: &'a ComplexMatrix,
}

impl SearchProblem<'_> {
    fn dim(&self) -> usize {
        2 * self.algebra.dim()
    }

    fn assemble(&self, coords: &[f64]) -> ComplexMatrix {
        let n = self.algebra.n();
        let mut a = ComplexMatrix::zeros(n, n);
        for (j, b) in self.algebra.basis().iter().enumerate() {
            a.add_scaled(b, C64::new(coords[2 * j], coords[2 * j + 1]));
        }
        a
    }

    fn residual_vec(&self, a: &ComplexMatrix) -> Vec<f64> {
        let diff = a.adjoint().mul(a).sub(self.target);
        let mut out = Vec::with_capacity(2 * diff.entries().len());
        for z in diff.entries() {
            out.push(z.re);
            out.push(z.im);
        }
        out
    }

    /// Columns: d(a*a)/dx_j = b_j* a + a* b_j and the imaginary-part analog
    /// i(a* b_j − b_j* a), stacked as real and imaginary entries.
    fn jacobian(&self, a: &ComplexMatrix) -> Vec<Vec<f64>> {
        let a_adj = a.adjoint();
        let mut cols = Vec::with_capacity(self.dim());
        for b in self.algebra.basis() {
            let real_dir = b.adjoint().mul(a).add(&a_adj.mul(b));
            let imag_dir = a_adj
                .mul(b)
                .sub(&b.adjoint().mul(a))
                .scale(C64::new(0.0, 1.0));
            for dir in [real_dir, imag_dir] {
                let mut col = Vec::with_capacity(2 * dir.entries().len());
                for z in dir.entries() {
                    col.push(z.re);
                    col.push(z.im);
                }
                cols.push(col);
            }
        }
        cols
    }
}

/// Least-squares probe of factorability: minimizes `‖a*a − B‖_F²` over the
/// algebra by Gauss–Newton with Levenberg–Marquardt damping and multiple
/// seeded restarts, keeping the best local minimizer (ties go to the
/// earliest restart).
///
/// A small residual is evidence only; a residual bounded away from zero
/// across restarts is evidence that no member factors the target.
pub fn factorization_search(
    algebra: &Subalgebra,
    target: &ComplexMatrix,
    options: &SearchOptions,
    tol: &ToleranceConfig,
) -> Result<SearchResult, CoreError> {
    let n = algebra.n();
    if target.rows() != n || target.cols() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "target is {}x{}, algebra lives in M_{n}",
            target.rows(),
            target.cols()
        )));
    }
    if !target.is_hermitian(tol.unitary) {
        return Err(CoreError::InvalidArgument(
            "search target must be Hermitian".into(),
        ));
    }
    let problem = SearchProblem { algebra, target };
    let d = problem.dim();
    let coord_scale = target.frobenius_norm().sqrt() / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut best: Option<SearchResult> = None;
    for _ in 0..options.restarts.max(1) {
        let mut coords: Vec<f64> = (0..d)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                g * coord_scale
            })
            .collect();
        let mut a = problem.assemble(&coords);
        let mut residual = problem.residual_vec(&a);
        let mut cost: f64 = residual.iter().map(|r| r * r).sum();
        let mut lambda = 1e-3;

        for _ in 0..options.max_iters {
            let jac = problem.jacobian(&a);
            // normal equations (JᵀJ + λI) δ = −Jᵀr
            let mut jtj = ComplexMatrix::zeros(d, d);
            for p in 0..d {
                for q in p..d {
                    let dot: f64 = jac[p].iter().zip(&jac[q]).map(|(x, y)| x * y).sum();
                    jtj[(p, q)] = C64::new(dot, 0.0);
                    jtj[(q, p)] = C64::new(dot, 0.0);
                }
            }
            let grad: Vec<f64> = jac
                .iter()
                .map(|col| col.iter().zip(&residual).map(|(x, r)| x * r).sum())
                .collect();
            let grad_inf = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
            if grad_inf < 1e-12 * cost.sqrt().max(1.0) {
                break;
            }

            let mut damped = jtj.clone();
            for p in 0..d {
                damped[(p, p)] += C64::new(lambda, 0.0);
            }
            let chol = match cholesky_upper(&damped, tol) {
                Ok(r) => r,
                Err(_) => {
                    lambda = (lambda * 10.0).min(1e12);
                    continue;
                }
            };
            let rhs: Vec<C64> = grad.iter().map(|&g| C64::new(-g, 0.0)).collect();
            let delta = solve_with_cholesky(&chol, &rhs);

            let trial: Vec<f64> = coords.iter().zip(&delta).map(|(x, d)| x + d.re).collect();
            let trial_a = problem.assemble(&trial);
            let trial_residual = problem.residual_vec(&trial_a);
            let trial_cost: f64 = trial_residual.iter().map(|r| r * r).sum();

            if trial_cost < cost {
                let step: f64 = delta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                coords = trial;
                a = trial_a;
                residual = trial_residual;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                if step < 1e-14 {
                    break;
                }
            } else {
                lambda = (lambda * 10.0).min(1e12);
                if lambda >= 1e12 {
                    break;
                }
            }
        }

        let achieved = cost.sqrt();
        if best.as_ref().is_none_or(|b| achieved < b.residual) {
            best = Some(SearchResult {
                minimizer: a,
                residual: achieved,
            });
        }
    }
    Ok(best.expect("at least one restart ran"))
}

fn probe_targets(n: usize, seed: u64) -> Result<Vec<ComplexMatrix>, CoreError> {
    // identity-plus-rank-one, then Ginibre targets at two conditionings
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let y: Vec<C64> = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    let mut rank_one = ComplexMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            rank_one[(i, j)] += y[i] * y[j].conj();
        }
    }
    // force exact Hermitian symmetry for the solver preconditions
    for i in 0..n {
        rank_one[(i, i)] = C64::new(rank_one[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (rank_one[(i, j)] + rank_one[(j, i)].conj()) * 0.5;
            rank_one[(i, j)] = avg;
            rank_one[(j, i)] = avg.conj();
        }
    }
    Ok(vec![
        rank_one,
        sample_pd(n, seed.wrapping_add(1), 1.0)?,
        sample_pd(n, seed.wrapping_add(2), 1e-4)?,
    ])
}

/// Full decision procedure. On a certificate, attaches `witness_count`
/// sampled positive-definite targets with dual factorization witnesses; on
/// a refutation, attaches the failure plus search residuals over the fixed
/// probe set.
pub fn is_logmodular(
    algebra: &Subalgebra,
    tol: &ToleranceConfig,
    witness_count: usize,
    seed: u64,
) -> Result<Verdict, CoreError> {
    match triangularize(algebra, tol)? {
        TriangularizeOutcome::Certified(mut certificate) => {
            let n = algebra.n();
            let mut witnesses = Vec::with_capacity(witness_count);
            for k in 0..witness_count {
                let ridge = if k % 2 == 0 { 1.0 } else { 1e-2 };
                let target = sample_pd(n, seed.wrapping_add(k as u64), ridge)?;
                let left = factor_positive(algebra, &certificate, &target, tol)?;
                let right = factor_positive_dual(algebra, &certificate, &target, tol)?;
                witnesses.push(WitnessPair { left, right });
            }
            certificate.witnesses = witnesses
                .iter()
                .map(|w| (w.left.target.clone(), w.left.factor.clone()))
                .collect();
            Ok(Verdict {
                decision: Decision::Logmodular,
                certificate: Some(certificate),
                failure: None,
                witnesses,
                oracle: Vec::new(),
            })
        }
        TriangularizeOutcome::Refuted(failure) => {
            let mut oracle = Vec::new();
            for target in probe_targets(algebra.n(), seed)? {
                let result =
                    factorization_search(algebra, &target, &SearchOptions::default(), tol)?;
                oracle.push(OracleProbe {
                    target,
                    residual: result.residual,
                });
            }
            Ok(Verdict {
                decision: Decision::NotLogmodular,
                certificate: None,
                failure: Some(failure),
                witnesses: Vec::new(),
                oracle,
            })
        }
    }
}
