//! Thin wrappers around faer factorizations, operating on `ndarray`
//! matrices so the rest of the crate stays in one container type.

use faer::MatRef;
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

fn to_faer(a: &Array2<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_faer(m: MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `A = U diag(s) Vt` with singular values sorted descending.
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub vt: Array2<f64>,
}

pub fn svd(a: &Array2<f64>) -> Result<Svd> {
    let f = to_faer(a).thin_svd().map_err(|_| Error::SvdFailure)?;
    Ok(Svd {
        u: from_faer(f.U()),
        s: Array1::from_iter(f.S().column_vector().iter().copied()),
        vt: from_faer(f.V().transpose()),
    })
}

pub fn singular_values(a: &Array2<f64>) -> Result<Array1<f64>> {
    let vals = to_faer(a).singular_values().map_err(|_| Error::SvdFailure)?;
    Ok(Array1::from_vec(vals))
}

/// Singular values of a wide matrix via the eigenvalues of `A A^T`.
///
/// Avoids bidiagonalizing very wide unfoldings (e.g. `n1 x n2*n3`); accuracy
/// is `sqrt(eps)`-limited near zero, which is enough for gap detection.
pub fn singular_values_gram(a: &Array2<f64>) -> Result<Array1<f64>> {
    let g = a.dot(&a.t());
    let mut vals = to_faer(&g)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::SvdFailure)?;
    vals.reverse(); // ascending to descending
    Ok(Array1::from_iter(vals.into_iter().map(|l| l.max(0.0).sqrt())))
}

/// Thin QR `A = Q R`, `Q` with orthonormal columns (`m x min(m,n)`).
pub fn thin_qr(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let f = to_faer(a).qr();
    (
        from_faer(f.compute_thin_Q().as_ref()),
        from_faer(f.thin_R()),
    )
}

/// LQ factorization `A = L Q` with `Q` having orthonormal rows.
pub fn lq(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let at = a.t().to_owned();
    let (q, r) = thin_qr(&at);
    (r.t().to_owned(), q.t().to_owned())
}

/// Number of singular values above `tol_rel * s[0]`.
pub fn numerical_rank(s: &Array1<f64>, tol_rel: f64) -> usize {
    if s.is_empty() || s[0] <= 0.0 {
        return 0;
    }
    let thresh = tol_rel * s[0];
    s.iter().filter(|&&x| x > thresh).count()
}

pub fn inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    use faer::linalg::solvers::DenseSolveCore;
    if a.nrows() != a.ncols() {
        return Err(Error::RankDeficient("matrix not square".into()));
    }
    let inv = from_faer(to_faer(a).partial_piv_lu().inverse().as_ref());
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient("matrix not invertible".into()));
    }
    Ok(inv)
}

/// Orthonormal basis of the orthogonal complement of `range(U)`, for `U`
/// with orthonormal columns. Householder QR of `U`, reflectors applied to
/// the trailing columns of the identity; no `n x n` intermediate.
pub fn orthonormal_complement(u: &Array2<f64>) -> Array2<f64> {
    let n = u.nrows();
    let r = u.ncols();
    if r >= n {
        return Array2::zeros((n, 0));
    }
    // Householder vectors for the QR of u.
    let mut work = u.clone();
    let mut reflectors: Vec<Array1<f64>> = Vec::with_capacity(r);
    for k in 0..r {
        let mut v = Array1::zeros(n);
        for i in k..n {
            v[i] = work[[i, k]];
        }
        let alpha = -v[k].signum() * v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v[k] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            v.mapv_inplace(|x| x / vnorm);
        }
        // apply reflector to the remaining columns of work
        for j in k..r {
            let dot: f64 = (k..n).map(|i| v[i] * work[[i, j]]).sum();
            for i in k..n {
                work[[i, j]] -= 2.0 * dot * v[i];
            }
        }
        reflectors.push(v);
    }
    // Q_full[:, r..] = H_1 H_2 ... H_r * I[:, r..]
    let mut comp = Array2::zeros((n, n - r));
    for j in 0..n - r {
        comp[[r + j, j]] = 1.0;
    }
    for k in (0..r).rev() {
        let v = &reflectors[k];
        for j in 0..n - r {
            let dot: f64 = (k..n).map(|i| v[i] * comp[[i, j]]).sum();
            for i in k..n {
                comp[[i, j]] -= 2.0 * dot * v[i];
            }
        }
    }
    comp
}
