//! Factorizations and structured unitaries: Cholesky in both orientations,
//! Householder alignment of a row vector with the first coordinate,
//! permutation unitaries, and seeded Haar-random unitaries.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::CoreError;
use crate::matrix::{vec_norm, ComplexMatrix, UnitaryMatrix, C64};
use crate::tolerance::ToleranceConfig;

/// Upper-triangular factor `R` with real positive diagonal and `R*R = B`.
///
/// Positive definiteness is detected during elimination: a pivot at or below
/// `tol.zero * ‖B‖_F` aborts with the failing index.
pub fn cholesky_upper(
    b: &ComplexMatrix,
    tol: &ToleranceConfig,
) -> Result<ComplexMatrix, CoreError> {
    if !b.is_square() {
        return Err(CoreError::InvalidArgument(
            "Cholesky factorization needs a square matrix".into(),
        ));
    }
    if !b.is_hermitian(tol.unitary) {
        return Err(CoreError::InvalidArgument(
            "Cholesky factorization needs a Hermitian matrix".into(),
        ));
    }
    let n = b.rows();
    let scale = b.frobenius_norm();
    let mut r = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let mut s = b[(i, i)].re;
        for k in 0..i {
            s -= r[(k, i)].norm_sqr();
        }
        if s <= tol.zero * scale {
            return Err(CoreError::NotPositiveDefinite { pivot: i, value: s });
        }
        let d = s.sqrt();
        r[(i, i)] = C64::new(d, 0.0);
        for j in (i + 1)..n {
            let mut acc = b[(i, j)];
            for k in 0..i {
                acc -= r[(k, i)].conj() * r[(k, j)];
            }
            r[(i, j)] = acc / d;
        }
    }
    Ok(r)
}

/// Upper-triangular factor `R` with real positive diagonal and `R·R* = B`.
///
/// Implemented through the index-reversal trick: factor `J B J` with the
/// standard routine and conjugate back, so a single elimination kernel
/// serves both orientations.
pub fn reverse_cholesky_upper(
    b: &ComplexMatrix,
    tol: &ToleranceConfig,
) -> Result<ComplexMatrix, CoreError> {
    let n = b.rows();
    let flipped = ComplexMatrix::from_fn(n, n, |i, j| b[(n - 1 - i, n - 1 - j)]);
    let r = cholesky_upper(&flipped, tol)?;
    // J R* J is upper triangular again with the reversed diagonal.
    let adj = r.adjoint();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        adj[(n - 1 - i, n - 1 - j)]
    }))
}

/// Solves `R* R x = rhs` for the upper-triangular `R` of [`cholesky_upper`].
pub fn solve_with_cholesky(r: &ComplexMatrix, rhs: &[C64]) -> Vec<C64> {
    let n = r.rows();
    assert_eq!(rhs.len(), n);
    let mut y = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = rhs[i];
        for j in 0..i {
            acc -= r[(j, i)].conj() * y[j];
        }
        y[i] = acc / r[(i, i)].conj();
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in (i + 1)..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    x
}

/// Unitary `U` with `v·U = (1, 0, …, 0)` for a unit row vector `v`.
///
/// The first entry of `v·U` comes out real and positive, so the output is a
/// deterministic function of `v`. Built from a Householder reflection with a
/// trailing phase correction.
pub fn householder_to_e1(v: &[C64], tol: &ToleranceConfig) -> Result<UnitaryMatrix, CoreError> {
    let m = v.len();
    if m == 0 {
        return Err(CoreError::InvalidArgument("empty vector".into()));
    }
    let norm = vec_norm(v);
    if (norm - 1.0).abs() > tol.unitary.max(1e-12) {
        return Err(CoreError::InvalidArgument(format!(
            "input must be a unit vector, got norm {norm:.12}"
        )));
    }

    let w0 = v[0];
    let phase = if w0.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        w0 / w0.norm()
    };
    // u = w − phase·‖w‖·e_1, with the first entry computed in its
    // cancellation-free form −phase·Σ_{j≥1}|w_j|² / (|w_0| + ‖w‖).
    let tail_sq: f64 = v[1..].iter().map(|z| z.norm_sqr()).sum();
    let mut u: Vec<C64> = v.to_vec();
    u[0] = -phase * (tail_sq / (w0.norm() + norm));
    let u_sq: f64 = u.iter().map(|z| z.norm_sqr()).sum();

    let mut h = ComplexMatrix::identity(m);
    if u_sq > 1e-30 {
        let scale = 2.0 / u_sq;
        for i in 0..m {
            for j in 0..m {
                h[(i, j)] -= scale * u[i] * u[j].conj();
            }
        }
    }
    // U = H^T · diag(conj(phase), 1, …, 1)
    let mut out = h.adjoint();
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = out[(i, j)].conj();
        }
    }
    for i in 0..m {
        out[(i, 0)] *= phase.conj();
    }
    Ok(UnitaryMatrix::new_unchecked(out))
}

/// Permutation unitary with `U e_i = e_{perm[i]}`; entries are exact 0/1.
pub fn permutation_unitary(perm: &[usize]) -> Result<UnitaryMatrix, CoreError> {
    let n = perm.len();
    if n == 0 {
        return Err(CoreError::InvalidArgument("empty permutation".into()));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(CoreError::InvalidArgument(format!(
                "not a bijection on 0..{n}: {perm:?}"
            )));
        }
        seen[p] = true;
    }
    let mut m = ComplexMatrix::zeros(n, n);
    for (i, &p) in perm.iter().enumerate() {
        m[(p, i)] = C64::new(1.0, 0.0);
    }
    Ok(UnitaryMatrix::new_unchecked(m))
}

/// Inverse of a permutation given as `i ↦ perm[i]`.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

fn ginibre(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * inv_sqrt2, im * inv_sqrt2)
    })
}

/// Haar-distributed random unitary, deterministic in the seed.
///
/// QR of a complex Ginibre matrix via modified Gram–Schmidt with
/// reorthogonalization; the positive diagonal of `R` that Gram–Schmidt
/// produces makes the decomposition canonical, hence the `Q` Haar.
pub fn haar_unitary(n: usize, seed: u64) -> Result<UnitaryMatrix, CoreError> {
    if n == 0 {
        return Err(CoreError::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = ComplexMatrix::zeros(n, n);
    let mut j = 0;
    while j < n {
        let mut col: Vec<C64> = (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        for _ in 0..2 {
            for i in 0..j {
                let coef: C64 = (0..n).map(|r| q[(r, i)].conj() * col[r]).sum();
                for r in 0..n {
                    let qe = q[(r, i)];
                    col[r] -= coef * qe;
                }
            }
        }
        let norm = vec_norm(&col);
        if norm < 1e-12 * (n as f64).sqrt() {
            continue; // essentially impossible; redraw deterministically
        }
        for r in 0..n {
            q[(r, j)] = col[r] / norm;
        }
        j += 1;
    }
    Ok(UnitaryMatrix::new_unchecked(q))
}

/// Hermitian positive-definite sample `G*G + ridge·I` from a seeded Ginibre
/// `G`; Hermitian symmetry holds exactly by construction.
pub fn sample_pd(n: usize, seed: u64, ridge: f64) -> Result<ComplexMatrix, CoreError> {
    if n == 0 {
        return Err(CoreError::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    if !ridge.is_finite() || ridge <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "ridge must be positive, got {ridge}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ginibre(n, &mut rng);
    let mut b = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += g[(k, i)].conj() * g[(k, j)];
            }
            if i == j {
                b[(i, i)] = C64::new(acc.re + ridge, 0.0);
            } else {
                b[(i, j)] = acc;
                b[(j, i)] = acc.conj();
            }
        }
    }
    Ok(b)
}
