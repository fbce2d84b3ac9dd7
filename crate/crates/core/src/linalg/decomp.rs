//! Dense symmetric eigendecomposition, Cholesky, and SVD.
//!
//! Everything here is sized for desk-scale problems (dimension up to a few
//! hundred). Cyclic Jacobi is used for both the symmetric eigenproblem and the
//! (one-sided) SVD: it is slow compared to tridiagonal QR but accurate to
//! working precision, including for small eigenvalues.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Output of [`sym_eig`]: eigenvalues in descending order and the matching
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

/// Relative tolerance used to decide whether an input is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

pub(crate) fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted descending; ties keep the order in which Jacobi left
/// them on the diagonal. Each eigenvector is signed so that its first entry
/// with magnitude above `1e-12` is positive.
pub fn sym_eig(m: &Matrix) -> Result<SymEigResult> {
    check_symmetric(m)?;
    let n = m.rows();
    let mut a = m.symmetrize();
    let mut v = Matrix::identity(n);
    let total = a.frobenius_norm();

    if total > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let off = off_diagonal_norm(&a);
            if off <= 1e-15 * total {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    // Skip rotations that cannot change the diagonal in working precision.
                    if apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
                        a[(p, q)] = 0.0;
                        a[(q, p)] = 0.0;
                        continue;
                    }
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    rotate(&mut a, &mut v, p, q, c, s);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.diag();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("finite eigenvalues"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = v.select_columns(&order);
    fix_signs(&mut eigenvectors);
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// `A ← JᵀAJ`, `V ← VJ` for the plane rotation `J` acting on `(p, q)`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Flips columns so the first entry above `1e-12` in magnitude is positive.
pub fn fix_signs(vectors: &mut Matrix) {
    for j in 0..vectors.cols() {
        let first = (0..vectors.rows())
            .map(|i| vectors[(i, j)])
            .find(|x| x.abs() > 1e-12);
        if let Some(x) = first {
            if x < 0.0 {
                for i in 0..vectors.rows() {
                    vectors[(i, j)] = -vectors[(i, j)];
                }
            }
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `B = LLᵀ`.
pub fn cholesky(b: &Matrix) -> Result<Matrix> {
    check_symmetric(b)?;
    let n = b.rows();
    let max_diag = b.diag().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let tol = (n as f64) * f64::EPSILON * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `B X = R` for symmetric positive definite `B`.
pub fn solve_spd(b: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let l = cholesky(b)?;
    let n = l.rows();
    if rhs.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} rows, system has {n}",
            rhs.rows()
        )));
    }
    let mut x = rhs.clone();
    for c in 0..x.cols() {
        // forward substitution
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // back substitution with Lᵀ
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Symmetric inverse square root `S = (B + jitter·I)^{-1/2}`.
///
/// Positive definiteness is established by Cholesky first; `S` itself comes
/// from the eigendecomposition so that it is symmetric.
pub fn chol_inv_sqrt(b: &Matrix, jitter: f64) -> Result<Matrix> {
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(Error::InvalidParameter(format!("jitter must be >= 0, got {jitter}")));
    }
    check_symmetric(b)?;
    let mut bj = b.symmetrize();
    for i in 0..bj.rows() {
        bj[(i, i)] += jitter;
    }
    cholesky(&bj)?;
    let eig = sym_eig(&bj)?;
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let q = &eig.eigenvectors;
    let scaled = Matrix::from_fn(q.rows(), q.cols(), |i, j| q[(i, j)] / eig.eigenvalues[j].sqrt());
    Ok(scaled.matmul_t(q).symmetrize())
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × r` with orthonormal columns, `r = min(rows, cols)`.
    pub u: Matrix,
    /// Descending, length `r`.
    pub singular_values: Vec<f64>,
    /// `cols × r` with orthonormal columns.
    pub v: Matrix,
}

/// One-sided (Hestenes) Jacobi SVD. Left singular vectors belonging to zero
/// singular values are completed to an orthonormal set.
pub fn svd(a: &Matrix) -> Svd {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let (m, n) = a.shape();
    // Work column-wise.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).expect("finite singular values"));
    let smax = order.first().map_or(0.0, |&i| sigma[i]);
    let tiny = smax * (m as f64) * f64::EPSILON;

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (j, &src) in order.iter().enumerate() {
        let s = sigma[src];
        singular_values.push(s);
        v.set_column(j, &vcols[src]);
        if s > tiny && s > 0.0 {
            let col: Vec<f64> = cols[src].iter().map(|x| x / s).collect();
            u.set_column(j, &col);
        } else {
            missing.push(j);
        }
    }
    if !missing.is_empty() {
        complete_orthonormal(&mut u, &missing);
    }
    Svd {
        u,
        singular_values,
        v,
    }
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column, drawing candidates from the standard basis.
fn complete_orthonormal(u: &mut Matrix, missing: &[usize]) {
    let m = u.rows();
    let mut filled: Vec<usize> = (0..u.cols()).filter(|j| !missing.contains(j)).collect();
    let mut candidate = 0;
    for &j in missing {
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &k in &filled {
                    let col = u.column(k);
                    let proj = dot(&col, &e);
                    for (x, c) in e.iter_mut().zip(&col) {
                        *x -= proj * c;
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-8 {
                e.iter_mut().for_each(|x| *x /= norm);
                u.set_column(j, &e);
                filled.push(j);
                break;
            }
        }
    }
}

/// Numerical rank: singular values above `rel_tol · σ_max`.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    let s = svd(a).singular_values;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Principal angles (radians, ascending) between the column spans of `a` and
/// `b` under the inner product `⟨x, y⟩ = xᵀ G y`; `G = I` when `metric` is
/// `None`. Both inputs must have full column rank in that metric.
pub fn principal_angles(a: &Matrix, b: &Matrix, metric: Option<&Matrix>) -> Result<Vec<f64>> {
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch("principal angles need equal row counts".into()));
    }
    let qa = metric_orthonormalize(a, metric)?;
    let qb = metric_orthonormalize(b, metric)?;
    let cross = match metric {
        Some(g) => qa.t_matmul(&g.matmul(&qb)),
        None => qa.t_matmul(&qb),
    };
    let mut angles: Vec<f64> = svd(&cross)
        .singular_values
        .iter()
        .map(|c| c.clamp(0.0, 1.0).acos())
        .collect();
    angles.sort_by(|x, y| x.partial_cmp(y).expect("finite angles"));
    Ok(angles)
}

/// `X (XᵀGX)^{-1/2}`: columns orthonormal in the metric `G`.
pub fn metric_orthonormalize(x: &Matrix, metric: Option<&Matrix>) -> Result<Matrix> {
    let gram = match metric {
        Some(g) => x.t_matmul(&g.matmul(x)),
        None => x.t_matmul(x),
    };
    let s = chol_inv_sqrt(&gram.symmetrize(), 0.0).map_err(|_| Error::RankDeficient)?;
    Ok(x.matmul(&s))
}

/// Orthonormal basis of the column span via modified Gram-Schmidt (with one
/// re-orthogonalization pass). Panics if the columns are dependent.
pub fn orthonormal_columns(x: &Matrix) -> Matrix {
    let (m, n) = x.shape();
    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        let mut v = x.column(j);
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let r = dot(&qk, &v);
                for (vi, qi) in v.iter_mut().zip(&qk) {
                    *vi -= r * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        assert!(norm > 1e-12, "dependent columns in orthonormal_columns");
        v.iter_mut().for_each(|vi| *vi /= norm);
        q.set_column(j, &v);
    }
    q
}
