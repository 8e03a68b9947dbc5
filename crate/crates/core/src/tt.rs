//! Tensor-train decompositions of third-order tensors.
//!
//! A TT decomposition is `X = X1 . X2 . X3` with `X1: n1 x r1`,
//! `X2: r1 x n2 x r2`, `X3: r2 x n3`, where `.` contracts a matrix with the
//! adjacent core index. [`GaugedTT`] holds the simultaneously orthogonalized
//! representation used by the manifold machinery: `X1'` with orthonormal
//! columns, `X2'` with orthonormal right-unfolding columns, and the gauge
//! factors `R`, `C` making `X2'' = R . X2' . C` left-orthogonal and
//! `X3'' = C^-1 X3` row-orthonormal.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{contract_left, contract_right, DenseTensor3, Dims, SampleSet};

/// Plain TT decomposition; stored ranks need not be minimal.
#[derive(Debug, Clone)]
pub struct TTTensor {
    x1: Array2<f64>,
    x2: DenseTensor3,
    x3: Array2<f64>,
}

impl TTTensor {
    pub fn new(x1: Array2<f64>, x2: DenseTensor3, x3: Array2<f64>) -> Result<Self> {
        let (r1, n2, r2) = (x2.dims().n1, x2.dims().n2, x2.dims().n3);
        if x1.ncols() != r1 || x3.nrows() != r2 {
            return Err(Error::DimensionMismatch {
                expected: format!("core ranks ({r1}, {r2})"),
                got: format!("x1 cols {}, x3 rows {}", x1.ncols(), x3.nrows()),
            });
        }
        if x1.nrows() == 0 || n2 == 0 || x3.ncols() == 0 || r1 == 0 || r2 == 0 {
            return Err(Error::DegenerateDims);
        }
        Ok(TTTensor { x1, x2, x3 })
    }

    /// Rank-(1,1) all-zero representation (the zero-tensor convention).
    pub fn zero(dims: Dims) -> Self {
        TTTensor {
            x1: Array2::zeros((dims.n1, 1)),
            x2: DenseTensor3::zeros(Dims::new(1, dims.n2, 1)),
            x3: Array2::zeros((1, dims.n3)),
        }
    }

    pub fn x1(&self) -> &Array2<f64> {
        &self.x1
    }

    pub fn x2(&self) -> &DenseTensor3 {
        &self.x2
    }

    pub fn x3(&self) -> &Array2<f64> {
        &self.x3
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.x1.nrows(), self.x2.dims().n2, self.x3.ncols())
    }

    pub fn ranks(&self) -> (usize, usize) {
        (self.x2.dims().n1, self.x2.dims().n3)
    }

    /// Dense tensor represented by the train.
    pub fn contract_full(&self) -> DenseTensor3 {
        let b = contract_left(&self.x1, &self.x2).expect("ranks validated");
        contract_right(&b, &self.x3).expect("ranks validated")
    }

    /// Single-entry evaluation in `O(r1 r2)` operations.
    pub fn evaluate_entry(&self, i1: usize, i2: usize, i3: usize) -> Result<f64> {
        let d = self.dims();
        if !d.contains(i1, i2, i3) {
            return Err(Error::IndexOutOfRange(i1, i2, i3, d.n1, d.n2, d.n3));
        }
        let (r1, r2) = self.ranks();
        let mut v = 0.0;
        for b in 0..r2 {
            let mut t = 0.0;
            for a in 0..r1 {
                t += self.x1[[i1, a]] * self.x2.get(a, i2, b);
            }
            v += t * self.x3[[b, i3]];
        }
        Ok(v)
    }

    pub fn evaluate_samples(&self, omega: &[[usize; 3]]) -> Result<SampleSet> {
        let entries = omega
            .iter()
            .map(|&[i1, i2, i3]| Ok(([i1, i2, i3], self.evaluate_entry(i1, i2, i3)?)))
            .collect::<Result<Vec<_>>>()?;
        SampleSet::new(self.dims(), entries)
    }

    /// TT-rounding to `target` ranks: right-orthogonalization sweep followed
    /// by two truncated SVDs. Quasi-optimal; exact when the represented
    /// tensor has TT-rank at most `target`.
    pub fn truncate(&self, target: (usize, usize)) -> Result<TTTensor> {
        let (r1, r2) = self.ranks();
        let (k1, k2) = target;
        if k1 > r1 || k2 > r2 || k1 == 0 || k2 == 0 {
            return Err(Error::RankTarget(k1, k2, r1, r2));
        }
        let dims = self.dims();
        // right-orthogonalize cores 3 and 2
        let (l3, q3) = linalg::lq(&self.x3);
        let mut x3 = q3;
        let mut x2 = contract_right(&self.x2, &l3)?;
        let (l2, q2) = linalg::lq(&x2.left_unfold());
        let m2 = l2.ncols();
        x2 = DenseTensor3::fold_left(&q2, Dims::new(m2, dims.n2, x3.nrows()))?;
        let mut x1 = self.x1.dot(&l2);
        // truncated SVD at the first bond
        let f1 = linalg::svd(&x1)?;
        let k1e = k1.min(f1.s.len());
        x1 = f1.u.slice(s![.., ..k1e]).to_owned();
        let carry = Array2::from_diag(&f1.s.slice(s![..k1e]).to_owned())
            .dot(&f1.vt.slice(s![..k1e, ..]));
        x2 = contract_left(&carry, &x2)?;
        // truncated SVD at the second bond
        let f2 = linalg::svd(&x2.right_unfold())?;
        let k2e = k2.min(f2.s.len());
        let u2 = f2.u.slice(s![.., ..k2e]).to_owned();
        x2 = DenseTensor3::fold_right(&u2, Dims::new(k1e, dims.n2, k2e))?;
        let carry2 = Array2::from_diag(&f2.s.slice(s![..k2e]).to_owned())
            .dot(&f2.vt.slice(s![..k2e, ..]));
        x3 = carry2.dot(&x3);
        TTTensor::new(x1, x2, x3)
    }

    /// Binary container: magic `TT3 v1\n`, dims and ranks as little-endian
    /// u64, then the three cores as little-endian f64 in column-major order.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(b"TT3 v1\n")?;
        let d = self.dims();
        let (r1, r2) = self.ranks();
        for v in [d.n1, d.n2, d.n3, r1, r2] {
            f.write_all(&(v as u64).to_le_bytes())?;
        }
        let write_colmajor = |f: &mut std::fs::File, m: &Array2<f64>| -> Result<()> {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    f.write_all(&m[[i, j]].to_le_bytes())?;
                }
            }
            Ok(())
        };
        write_colmajor(&mut f, &self.x1)?;
        for v in self.x2.data() {
            f.write_all(&v.to_le_bytes())?;
        }
        write_colmajor(&mut f, &self.x3)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        let mut magic = [0u8; 7];
        f.read_exact(&mut magic)?;
        if &magic != b"TT3 v1\n" {
            return Err(Error::Parse("bad TT3 magic".into()));
        }
        let read_u64 = |f: &mut std::fs::File| -> Result<usize> {
            let mut b = [0u8; 8];
            f.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b) as usize)
        };
        let n1 = read_u64(&mut f)?;
        let n2 = read_u64(&mut f)?;
        let n3 = read_u64(&mut f)?;
        let r1 = read_u64(&mut f)?;
        let r2 = read_u64(&mut f)?;
        let read_f64s = |f: &mut std::fs::File, n: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            let mut b = [0u8; 8];
            for _ in 0..n {
                f.read_exact(&mut b)?;
                out.push(f64::from_le_bytes(b));
            }
            Ok(out)
        };
        let colmajor = |data: Vec<f64>, rows: usize, cols: usize| -> Array2<f64> {
            Array2::from_shape_fn((rows, cols), |(i, j)| data[i + rows * j])
        };
        let x1 = colmajor(read_f64s(&mut f, n1 * r1)?, n1, r1);
        let x2 = DenseTensor3::from_vec(Dims::new(r1, n2, r2), read_f64s(&mut f, r1 * n2 * r2)?)?;
        let x3 = colmajor(read_f64s(&mut f, r2 * n3)?, r2, n3);
        TTTensor::new(x1, x2, x3)
    }
}

fn feasible(dims: Dims, ranks: (usize, usize)) -> bool {
    let (r1, r2) = ranks;
    r1 >= 1
        && r2 >= 1
        && r1 <= dims.n1.min(dims.n2 * r2)
        && r2 <= dims.n3.min(r1 * dims.n2)
}

/// TT cores with independent standard normal entries, deterministic for a
/// fixed seed. Entries of the represented tensor then have standard
/// deviation `sqrt(r1 * r2)`.
pub fn random_tt(dims: Dims, ranks: (usize, usize), seed: u64) -> Result<TTTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tt_with(dims, ranks, &mut rng)
}

/// Same as [`random_tt`] but drawing from a caller-provided generator.
/// Cores are filled in order `X1`, `X2`, `X3`, each column-major.
pub fn random_tt_with(dims: Dims, ranks: (usize, usize), rng: &mut impl Rng) -> Result<TTTensor> {
    if !feasible(dims, ranks) {
        return Err(Error::InfeasibleRanks(
            ranks.0, ranks.1, dims.n1, dims.n2, dims.n3,
        ));
    }
    let (r1, r2) = ranks;
    let fill_colmajor = |rows: usize, cols: usize, rng: &mut dyn rand::RngCore| {
        let mut m = Array2::zeros((rows, cols));
        for j in 0..cols {
            for i in 0..rows {
                m[[i, j]] = rng.sample(StandardNormal);
            }
        }
        m
    };
    let x1 = fill_colmajor(dims.n1, r1, rng);
    let mut core = vec![0.0; r1 * dims.n2 * r2];
    for v in core.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let x2 = DenseTensor3::from_vec(Dims::new(r1, dims.n2, r2), core)?;
    let x3 = fill_colmajor(r2, dims.n3, rng);
    TTTensor::new(x1, x2, x3)
}

/// TT-SVD: successive thin SVDs of the unfoldings, truncating singular
/// values below `tol * sigma_1` and capping ranks at `max_ranks`.
pub fn tt_svd(t: &DenseTensor3, max_ranks: (usize, usize), tol: f64) -> Result<TTTensor> {
    let dims = t.dims();
    if dims.is_empty() {
        return Err(Error::DegenerateDims);
    }
    let (k1, k2) = max_ranks;
    if k1 > dims.n1.min(dims.n2 * dims.n3) || k2 > (dims.n1 * dims.n2).min(dims.n3) {
        return Err(Error::InfeasibleRanks(k1, k2, dims.n1, dims.n2, dims.n3));
    }
    if k1 == 0 || k2 == 0 {
        return Err(Error::InfeasibleRanks(k1, k2, dims.n1, dims.n2, dims.n3));
    }
    let f1 = linalg::svd(&t.left_unfold())?;
    let r1 = linalg::numerical_rank(&f1.s, tol.max(f64::EPSILON)).min(k1);
    if r1 == 0 {
        return Ok(TTTensor::zero(dims));
    }
    let x1 = f1.u.slice(s![.., ..r1]).to_owned();
    let w = Array2::from_diag(&f1.s.slice(s![..r1]).to_owned()).dot(&f1.vt.slice(s![..r1, ..]));
    let w = DenseTensor3::fold_left(&w, Dims::new(r1, dims.n2, dims.n3))?;
    let f2 = linalg::svd(&w.right_unfold())?;
    let r2 = linalg::numerical_rank(&f2.s, tol.max(f64::EPSILON)).min(k2);
    if r2 == 0 {
        return Ok(TTTensor::zero(dims));
    }
    let x2 = DenseTensor3::fold_right(&f2.u.slice(s![.., ..r2]).to_owned(), Dims::new(r1, dims.n2, r2))?;
    let x3 = Array2::from_diag(&f2.s.slice(s![..r2]).to_owned()).dot(&f2.vt.slice(s![..r2, ..]));
    TTTensor::new(x1, x2, x3)
}

/// Default relative threshold for numerical-rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// TT-rank of a dense tensor: numerical ranks of the two unfoldings at
/// threshold `tol * sigma_1` per unfolding. The zero tensor reports (0, 0).
pub fn tt_rank(t: &DenseTensor3, tol: f64) -> Result<(usize, usize)> {
    let s_l = linalg::singular_values(&t.left_unfold())?;
    let s_r = linalg::singular_values(&t.right_unfold())?;
    Ok((
        linalg::numerical_rank(&s_l, tol),
        linalg::numerical_rank(&s_r, tol),
    ))
}

/// Simultaneously orthogonalized TT representation of a point on the
/// fixed-rank manifold.
///
/// Stores the gauge triple `(X1', X2', X3)` with the factors `R`, `C`, plus
/// the derived cores so the three reconstructions
/// `X1'.X2'.X3 = X1'.X2.X3'' = X1.X2''.X3''` are all available without
/// re-factorizing.
#[derive(Debug, Clone)]
pub struct GaugedTT {
    x1p: Array2<f64>,
    x2p: DenseTensor3,
    x3: Array2<f64>,
    r: Array2<f64>,
    c: Array2<f64>,
    // derived
    x1: Array2<f64>,
    x2: DenseTensor3,
    x2pp: DenseTensor3,
    x3pp: Array2<f64>,
}

fn check_triangular_full_rank(r: &Array2<f64>, what: &str) -> Result<()> {
    let n = r.nrows().min(r.ncols());
    if r.nrows() < r.ncols() {
        return Err(Error::RankDeficient(format!("{what}: wide triangular factor")));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..n {
        let d = r[[i, i]].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if !(lo > 1e-12 * hi) || hi == 0.0 {
        return Err(Error::RankDeficient(format!(
            "{what}: diagonal ratio {lo:.3e} / {hi:.3e}"
        )));
    }
    Ok(())
}

impl GaugedTT {
    /// Orthogonalize a minimal-rank TT into the gauged representation.
    ///
    /// Errors with [`Error::RankDeficient`] when a core does not have full
    /// rank, i.e. when the input is not on the fixed-rank manifold of its
    /// stored ranks.
    pub fn orthogonalize(x: &TTTensor) -> Result<GaugedTT> {
        let dims = x.dims();
        let (r1, r2) = x.ranks();
        if !feasible(dims, (r1, r2)) {
            return Err(Error::InfeasibleRanks(r1, r2, dims.n1, dims.n2, dims.n3));
        }
        // left-to-right QR sweep: X1', X2'
        let (q1, rr1) = linalg::thin_qr(x.x1());
        check_triangular_full_rank(&rr1, "X1")?;
        let b2 = contract_left(&rr1, x.x2())?;
        let (q2, rr2) = linalg::thin_qr(&b2.right_unfold());
        check_triangular_full_rank(&rr2, "X2^R")?;
        let x2p = DenseTensor3::fold_right(&q2, Dims::new(r1, dims.n2, r2))?;
        let x3t = rr2.dot(x.x3());
        // C from the LQ of X3: X3 = C X3'' with row-orthonormal X3''
        let (c, x3pp) = linalg::lq(&x3t);
        check_triangular_full_rank(&c.t().to_owned(), "X3")?;
        let x2 = contract_right(&x2p, &c)?;
        // R from the QR of (X2^L)^T: X2'' = R . X2 is left-orthogonal
        let (qm, sm) = linalg::thin_qr(&x2.left_unfold().t().to_owned());
        check_triangular_full_rank(&sm, "X2^L")?;
        let x2pp = DenseTensor3::fold_left(&qm.t().to_owned(), Dims::new(r1, dims.n2, r2))?;
        let r_inv = sm.t().to_owned();
        let r = linalg::inverse(&r_inv)?;
        let x1 = q1.dot(&r_inv);
        Ok(GaugedTT {
            x1p: q1,
            x2p,
            x3: x3t,
            r,
            c,
            x1,
            x2,
            x2pp,
            x3pp,
        })
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.x1p.nrows(), self.x2p.dims().n2, self.x3.ncols())
    }

    pub fn ranks(&self) -> (usize, usize) {
        (self.x2p.dims().n1, self.x2p.dims().n3)
    }

    /// `X1'`: orthonormal columns.
    pub fn x1p(&self) -> &Array2<f64> {
        &self.x1p
    }

    /// `X2'`: core with orthonormal right-unfolding columns.
    pub fn x2p(&self) -> &DenseTensor3 {
        &self.x2p
    }

    pub fn x3(&self) -> &Array2<f64> {
        &self.x3
    }

    pub fn r_gauge(&self) -> &Array2<f64> {
        &self.r
    }

    pub fn c_gauge(&self) -> &Array2<f64> {
        &self.c
    }

    /// `X1 = X1' R^-1`.
    pub fn x1(&self) -> &Array2<f64> {
        &self.x1
    }

    /// `X2 = X2' . C`.
    pub fn x2(&self) -> &DenseTensor3 {
        &self.x2
    }

    /// `X2'' = R . X2' . C`: left-orthogonal core.
    pub fn x2pp(&self) -> &DenseTensor3 {
        &self.x2pp
    }

    /// `X3'' = C^-1 X3`: orthonormal rows.
    pub fn x3pp(&self) -> &Array2<f64> {
        &self.x3pp
    }

    pub fn to_tt(&self) -> TTTensor {
        TTTensor::new(self.x1p.clone(), self.x2p.clone(), self.x3.clone())
            .expect("gauged shapes are consistent")
    }

    pub fn contract_full(&self) -> DenseTensor3 {
        self.to_tt().contract_full()
    }

    pub fn evaluate_entry(&self, i1: usize, i2: usize, i3: usize) -> Result<f64> {
        self.to_tt().evaluate_entry(i1, i2, i3)
    }

    /// Entry evaluation via the `(X1', X2, X3'')` gauge; avoids rebuilding a
    /// train per call.
    pub fn evaluate_samples(&self, omega: &[[usize; 3]]) -> Result<SampleSet> {
        let d = self.dims();
        let (r1, r2) = self.ranks();
        let entries = omega
            .iter()
            .map(|&[i1, i2, i3]| {
                if !d.contains(i1, i2, i3) {
                    return Err(Error::IndexOutOfRange(i1, i2, i3, d.n1, d.n2, d.n3));
                }
                let mut v = 0.0;
                for b in 0..r2 {
                    let mut t = 0.0;
                    for a in 0..r1 {
                        t += self.x1p[[i1, a]] * self.x2.get(a, i2, b);
                    }
                    v += t * self.x3pp[[b, i3]];
                }
                Ok(([i1, i2, i3], v))
            })
            .collect::<Result<Vec<_>>>()?;
        SampleSet::new(d, entries)
    }
}

/// Frobenius norm of `A^T A - I`; residual of column orthonormality.
pub fn orthonormality_residual_cols(a: &Array2<f64>) -> f64 {
    let g = a.t().dot(a);
    let mut acc = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let e = g[[i, j]] - if i == j { 1.0 } else { 0.0 };
            acc += e * e;
        }
    }
    acc.sqrt()
}

/// Frobenius norm of `A A^T - I`; residual of row orthonormality.
pub fn orthonormality_residual_rows(a: &Array2<f64>) -> f64 {
    orthonormality_residual_cols(&a.t().to_owned())
}
