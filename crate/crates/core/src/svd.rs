//! One-sided Jacobi singular value decomposition for dense complex matrices.
//!
//! Every rank and subspace-intersection decision in the crate funnels through
//! this routine. One-sided Jacobi delivers high relative accuracy on the
//! small matrices we care about, which is what makes relative singular-value
//! cutoffs trustworthy.

use crate::matrix::{ComplexMatrix, C64};

const MAX_SWEEPS: usize = 64;
const PAIR_EPS: f64 = 1e-15;

pub struct Svd {
    /// Left singular vectors as columns; columns beyond the numerical rank
    /// of the input are zero.
    pub u: ComplexMatrix,
    /// Singular values in non-increasing order.
    pub singular_values: Vec<f64>,
    /// Right singular vectors as columns, unitary.
    pub v: ComplexMatrix,
}

impl Svd {
    /// Number of singular values strictly above `rel_cutoff * σ_max`.
    pub fn rank(&self, rel_cutoff: f64) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .take_while(|&&s| s > rel_cutoff * smax)
            .count()
    }

    pub fn right_vector(&self, j: usize) -> Vec<C64> {
        self.v.col(j)
    }

    pub fn left_vector(&self, j: usize) -> Vec<C64> {
        self.u.col(j)
    }
}

/// Computes a full SVD `a = U Σ V*` by orthogonalizing the columns of `a`
/// with complex Jacobi rotations accumulated into `V`.
pub fn svd(a: &ComplexMatrix) -> Svd {
    let m = a.rows();
    let n = a.cols();
    let mut b = a.clone();
    let mut v = ComplexMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = C64::new(0.0, 0.0);
                for i in 0..m {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    app += bp.norm_sqr();
                    aqq += bq.norm_sqr();
                    apq += bp.conj() * bq;
                }
                if app == 0.0 || aqq == 0.0 {
                    continue;
                }
                let g = apq.norm();
                if g <= PAIR_EPS * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = apq / g;
                let zeta = (aqq - app) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Columns (p, q) are mixed by the unitary
                //   [ c          s·phase ]
                //   [ -s·conj(phase)  c  ]
                // applied on the right; the same mixing is accumulated in V.
                let sp = s * phase;
                let spc = s * phase.conj();
                for i in 0..m {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    b[(i, p)] = c * bp - spc * bq;
                    b[(i, q)] = sp * bp + c * bq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - spc * vq;
                    v[(i, q)] = sp * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| b[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap());

    let mut u = ComplexMatrix::zeros(m, n);
    let mut v_sorted = ComplexMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        singular_values.push(sigma);
        if sigma > 0.0 {
            for i in 0..m {
                u[(i, dst)] = b[(i, src)] / sigma;
            }
        }
        for i in 0..n {
            v_sorted[(i, dst)] = v[(i, src)];
        }
    }

    Svd {
        u,
        singular_values,
        v: v_sorted,
    }
}
