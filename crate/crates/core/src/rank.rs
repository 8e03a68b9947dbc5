//! TT-rank estimation from singular-value gaps of the gradient side
//! matrices.
//!
//! At a candidate solution `X` with gauged cores `(X1', X2, X3'')`, the
//! normal directions that allow first-order rank increases live in the
//! ranges of two matrices built from the Euclidean gradient `G`:
//!
//! * `M1 = (G . X3''^T)^L`, an `n1 x (n2 r2)` matrix, for the first rank,
//! * `M2 = (X1'^T . G)^R`, an `(r1 n2) x n3` matrix, for the second rank.
//!
//! Each rank surplus is read off from the largest relative gap in the
//! leading singular values, capped at `s`. The proposed TT-rank is the
//! current rank plus the two gap positions.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::completion::{self, CompletionProblem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{contract_left, contract_right, DenseTensor3, SampleSet};
use crate::tt::GaugedTT;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Cap on the gap search: only gaps at positions `j <= s` are considered.
    pub s: usize,
    /// Absolute threshold under which a side matrix counts as zero
    /// (estimated surplus 0). `None` selects `1e-12 * max(matrix dims)`.
    pub zero_tol: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            s: 20,
            zero_tol: None,
        }
    }
}

fn default_zero_tol(nrows: usize, ncols: usize) -> f64 {
    1e-12 * nrows.max(ncols) as f64
}

/// Position of the largest relative gap `(sigma_j - sigma_{j+1}) / sigma_j`
/// among `j <= s`, with ties broken towards the smallest `j`. Returns 0 for
/// a (numerically) zero matrix.
///
/// Only gaps between existing singular values are considered: the list has
/// `min(m, n)` entries and there is no `sigma` after the last one, so `j`
/// is capped at `len - 1` (a full-rank matrix has no detectable gap at its
/// own rank). Values at or below `zero_tol` terminate the search, so a
/// numerically rank-deficient matrix still yields its numerical rank.
pub fn estimated_rank(sv: &[f64], s: usize, zero_tol: f64) -> usize {
    if sv.is_empty() || sv[0] <= zero_tol {
        return 0;
    }
    if s + 1 > sv.len() {
        log::warn!(
            "gap cap s = {s} exceeds the {} available gaps; search truncated",
            sv.len().saturating_sub(1)
        );
    }
    let mut best_j = 0;
    let mut best_gap = f64::NEG_INFINITY;
    for j in 1..=s.min(sv.len().saturating_sub(1)) {
        let sj = sv[j - 1];
        if sj <= zero_tol {
            break;
        }
        let gap = (sj - sv[j]) / sj;
        if gap > best_gap {
            best_gap = gap;
            best_j = j;
        }
    }
    best_j
}

/// Relative gaps `(sigma_j - sigma_{j+1}) / sigma_j` for
/// `j = 1..=min(s, len - 1)`.
pub fn relative_gaps(sv: &[f64], s: usize) -> Vec<f64> {
    (1..=s.min(sv.len().saturating_sub(1)))
        .map(|j| {
            let sj = sv[j - 1];
            if sj <= 0.0 {
                return 0.0;
            }
            (sj - sv[j]) / sj
        })
        .collect()
}

/// Side matrices `(M1, M2)` from a scattered (sparse) gradient.
///
/// Cost `O(|supp(G)| (r1 + r2))` plus the two small products; the dense
/// gradient is never formed.
pub fn side_matrices(x: &GaugedTT, g: &SampleSet) -> Result<(Array2<f64>, Array2<f64>)> {
    let dims = x.dims();
    if g.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: format!("{dims:?}"),
            got: format!("{:?}", g.dims()),
        });
    }
    let (r1, r2) = x.ranks();
    let x1p = x.x1p();
    let x3pp = x.x3pp();
    // T = G . X3''^T accumulated columnwise, S = X1'^T . G rowwise
    let t_dims = crate::tensor::Dims::new(dims.n1, dims.n2, r2);
    let s_dims = crate::tensor::Dims::new(r1, dims.n2, dims.n3);
    let mut t = DenseTensor3::zeros(t_dims);
    let mut s = DenseTensor3::zeros(s_dims);
    for (idx, &v) in g.indices().iter().zip(g.values()) {
        let [i1, i2, i3] = *idx;
        for b in 0..r2 {
            t.data_mut()[t_dims.linear(i1, i2, b)] += v * x3pp[[b, i3]];
        }
        for a in 0..r1 {
            s.data_mut()[s_dims.linear(a, i2, i3)] += v * x1p[[i1, a]];
        }
    }
    Ok((t.left_unfold(), s.right_unfold()))
}

/// Side matrices from a dense gradient (oracle path for small problems).
pub fn side_matrices_dense(x: &GaugedTT, g: &DenseTensor3) -> Result<(Array2<f64>, Array2<f64>)> {
    let m1 = contract_right(g, &x.x3pp().t().to_owned())?.left_unfold();
    let m2 = contract_left(&x.x1p().t().to_owned(), g)?.right_unfold();
    Ok((m1, m2))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankEstimate {
    pub base_rank: (usize, usize),
    /// Estimated rank surpluses of the two side matrices.
    pub delta: (usize, usize),
    /// `base_rank + delta`, the suggested restart rank.
    pub proposed: (usize, usize),
    pub grad_norm_sq: f64,
    pub sv1: Vec<f64>,
    pub sv2: Vec<f64>,
    pub gaps1: Vec<f64>,
    pub gaps2: Vec<f64>,
    pub s: usize,
    pub zero_tol: (f64, f64),
}

impl RankEstimate {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, s)?;
        Ok(())
    }

    /// CSV with header `j,sigma_m1,gap_m1,sigma_m2,gap_m2`; rows padded with
    /// empty fields where one list is shorter.
    pub fn write_sv_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("j,sigma_m1,gap_m1,sigma_m2,gap_m2\n");
        let rows = self.sv1.len().max(self.sv2.len());
        let field = |v: Option<&f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for j in 0..rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                j + 1,
                field(self.sv1.get(j)),
                field(self.gaps1.get(j)),
                field(self.sv2.get(j)),
                field(self.gaps2.get(j)),
            )
            .unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Rank estimate at `x` for the given completion problem: computes the
/// Riemannian gradient norm and the gap positions of both side matrices of
/// the Euclidean gradient.
pub fn estimate_tt_rank(
    x: &GaugedTT,
    p: &CompletionProblem,
    cfg: &EstimatorConfig,
) -> Result<RankEstimate> {
    let (grad, resid) = completion::riemannian_gradient(x, p)?;
    let (m1, m2) = side_matrices(x, &resid)?;
    let ztol1 = cfg
        .zero_tol
        .unwrap_or_else(|| default_zero_tol(m1.nrows(), m1.ncols()));
    let ztol2 = cfg
        .zero_tol
        .unwrap_or_else(|| default_zero_tol(m2.nrows(), m2.ncols()));
    let sv1: Vec<f64> = linalg::singular_values(&m1)?.to_vec();
    let sv2: Vec<f64> = linalg::singular_values(&m2)?.to_vec();
    let d1 = estimated_rank(&sv1, cfg.s, ztol1);
    let d2 = estimated_rank(&sv2, cfg.s, ztol2);
    let base = x.ranks();
    Ok(RankEstimate {
        base_rank: base,
        delta: (d1, d2),
        proposed: (base.0 + d1, base.1 + d2),
        grad_norm_sq: grad.norm_sq(),
        gaps1: relative_gaps(&sv1, cfg.s),
        gaps2: relative_gaps(&sv2, cfg.s),
        sv1,
        sv2,
        s: cfg.s,
        zero_tol: (ztol1, ztol2),
    })
}

/// Baseline estimator that ignores the TT structure: the gap position of
/// the singular values of the left unfolding of the scattered gradient.
pub fn naive_estimate(g: &SampleSet, cfg: &EstimatorConfig) -> Result<usize> {
    let unfold = g.scatter().left_unfold();
    let sv = linalg::singular_values_gram(&unfold)?;
    let ztol = cfg
        .zero_tol
        .unwrap_or_else(|| default_zero_tol(unfold.nrows(), unfold.ncols()));
    Ok(estimated_rank(sv.as_slice().expect("contiguous"), cfg.s, ztol))
}

/// Diagnostics for the structure that full-data stationary points exhibit:
/// `range(X1')` inside `range(A1')`, `range(X3''^T)` inside `range(A3''^T)`,
/// and `X2 = X1'^T . A . X3''^T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryStructureReport {
    pub grad_norm_sq: f64,
    /// Whether the gradient was small enough (`<= tol`) for the residuals
    /// to be meaningful.
    pub conclusive: bool,
    /// `|X1' - A1' A1'^T X1'|_F / |X1'|_F`
    pub range_residual_left: f64,
    /// `|X3'' - X3'' A3''^T A3''|_F / |X3''|_F`
    pub range_residual_right: f64,
    /// `|X2 - X1'^T A X3''^T|_F / |X2|_F`
    pub core_residual: f64,
}

/// Check the range-containment structure of `x` against the full data
/// tensor `a` (both in gauged form). `tol` bounds the squared gradient
/// norm below which the check is conclusive.
pub fn verify_stationary_structure(
    x: &GaugedTT,
    a: &GaugedTT,
    tol: f64,
) -> Result<StationaryStructureReport> {
    if x.dims() != a.dims() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", a.dims()),
            got: format!("{:?}", x.dims()),
        });
    }
    let a_dense = a.contract_full();
    let p = CompletionProblem::lrtap(&a_dense, x.ranks())?;
    let (grad, _) = completion::riemannian_gradient(x, &p)?;
    let gn2 = grad.norm_sq();

    let frob = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let x1p = x.x1p();
    let a1p = a.x1p();
    let left = x1p - &a1p.dot(&a1p.t().dot(x1p));
    let range_residual_left = frob(&left) / frob(x1p).max(f64::MIN_POSITIVE);

    let x3pp = x.x3pp();
    let a3pp = a.x3pp();
    let right = x3pp - &x3pp.dot(&a3pp.t()).dot(a3pp);
    let range_residual_right = frob(&right) / frob(x3pp).max(f64::MIN_POSITIVE);

    let core = contract_left(
        &x1p.t().to_owned(),
        &contract_right(&a_dense, &x3pp.t().to_owned())?,
    )?;
    let core_residual =
        x.x2().sub(&core)?.norm() / x.x2().norm().max(f64::MIN_POSITIVE);

    Ok(StationaryStructureReport {
        grad_norm_sq: gn2,
        conclusive: gn2 <= tol,
        range_residual_left,
        range_residual_right,
        core_residual,
    })
}
