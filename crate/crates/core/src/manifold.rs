//! Tangent space and tangent cone of the fixed-rank TT manifold.
//!
//! At a gauged point `X = X1'.X2'.X3` the tangent space is parameterized by
//! the triple `(W1, W2, W3)` through
//!
//! ```text
//! xi = X1'.X2'.W3 + X1'.W2.X3'' + W1.X2''.X3''
//! ```
//!
//! with the gauge conditions `W1^T X1' = 0` and `W3 X3''^T = 0`, which make
//! the three terms mutually orthogonal so `|xi|^2 = |W1|^2 + |W2|^2 +
//! |W3|^2`. The tangent cone of the bounded-rank variety adds the five
//! blocks `U1, U2, Z2, V2, V3` of the block-train parametrization; any
//! ambient tensor decomposes into six mutually orthogonal train terms.
//!
//! Orthogonal projections are always applied in factored form `U (U^T .)`;
//! no `n x n` projector matrices are formed.

use ndarray::{concatenate, s, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{contract_left, contract_right, DenseTensor3, Dims, SampleSet};
use crate::tt::{GaugedTT, TTTensor};

/// Tangent vector at a gauged base point, in gauged parameters.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: GaugedTT,
    w1: Array2<f64>,
    w2: DenseTensor3,
    w3: Array2<f64>,
}

impl TangentVector {
    pub fn zero(base: &GaugedTT) -> Self {
        let d = base.dims();
        let (r1, r2) = base.ranks();
        TangentVector {
            base: base.clone(),
            w1: Array2::zeros((d.n1, r1)),
            w2: DenseTensor3::zeros(Dims::new(r1, d.n2, r2)),
            w3: Array2::zeros((r2, d.n3)),
        }
    }

    pub fn base(&self) -> &GaugedTT {
        &self.base
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    pub fn w2(&self) -> &DenseTensor3 {
        &self.w2
    }

    pub fn w3(&self) -> &Array2<f64> {
        &self.w3
    }

    /// `|W1|^2 + |W2|^2 + |W3|^2`, equal to the ambient squared norm.
    pub fn norm_sq(&self) -> f64 {
        self.w1.iter().map(|x| x * x).sum::<f64>()
            + self.w2.norm_sq()
            + self.w3.iter().map(|x| x * x).sum::<f64>()
    }

    /// Ambient inner product of two tangent vectors at the same base.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        debug_assert_eq!(self.base.dims(), other.base.dims());
        let a: f64 = self.w1.iter().zip(other.w1.iter()).map(|(x, y)| x * y).sum();
        let b = self.w2.inner(&other.w2).expect("matching core shapes");
        let c: f64 = self.w3.iter().zip(other.w3.iter()).map(|(x, y)| x * y).sum();
        a + b + c
    }

    pub fn scale(&self, a: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            w1: self.w1.mapv(|x| a * x),
            w2: self.w2.scale(a),
            w3: self.w3.mapv(|x| a * x),
        }
    }

    /// `self + a * other` (same base assumed).
    pub fn add_scaled(&self, a: f64, other: &TangentVector) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            w1: &self.w1 + &other.w1.mapv(|x| a * x),
            w2: self.w2.add_scaled(a, &other.w2).expect("matching core shapes"),
            w3: &self.w3 + &other.w3.mapv(|x| a * x),
        }
    }

    /// Exact TT form of the ambient tensor, ranks `(2 r1, 2 r2)`.
    pub fn ambient_tt(&self) -> TTTensor {
        let b = &self.base;
        let d = b.dims();
        let (r1, r2) = b.ranks();
        let g1 = concatenate![Axis(1), b.x1p().view(), self.w1.view()];
        let g3 = concatenate![Axis(0), b.x3pp().view(), self.w3.view()];
        let mut g2 = DenseTensor3::zeros(Dims::new(2 * r1, d.n2, 2 * r2));
        for a in 0..r1 {
            for j in 0..d.n2 {
                for c in 0..r2 {
                    g2.set(a, j, c, self.w2.get(a, j, c));
                    g2.set(a, j, r2 + c, b.x2p().get(a, j, c));
                    g2.set(r1 + a, j, c, b.x2pp().get(a, j, c));
                }
            }
        }
        TTTensor::new(g1, g2, g3).expect("shapes consistent")
    }

    pub fn ambient_dense(&self) -> DenseTensor3 {
        self.ambient_tt().contract_full()
    }
}

fn check_dims(base: &GaugedTT, got: Dims) -> Result<()> {
    if base.dims() != got {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", base.dims()),
            got: format!("{got:?}"),
        });
    }
    Ok(())
}

/// Shared tail of the tangent projection, from the two contractions
/// `T = Y . X3''^T` and `S = X1'^T . Y`.
fn project_from_contractions(
    base: &GaugedTT,
    t: &DenseTensor3,
    s_core: &DenseTensor3,
) -> TangentVector {
    let x1p = base.x1p();
    let x2pl = base.x2pp().left_unfold();
    let x2pr = base.x2p().right_unfold();
    let w2 = contract_left(&x1p.t().to_owned(), t).expect("shapes consistent");
    let w1 = (&t.left_unfold() - &x1p.dot(&w2.left_unfold())).dot(&x2pl.t());
    let pr = x2pr.t();
    let w3 = &pr.dot(&s_core.right_unfold()) - &pr.dot(&w2.right_unfold()).dot(base.x3pp());
    TangentVector {
        base: base.clone(),
        w1,
        w2,
        w3,
    }
}

/// Orthogonal projection of a dense tensor onto the tangent space.
pub fn project_dense(base: &GaugedTT, y: &DenseTensor3) -> Result<TangentVector> {
    check_dims(base, y.dims())?;
    let t = contract_right(y, &base.x3pp().t().to_owned())?;
    let s_core = contract_left(&base.x1p().t().to_owned(), y)?;
    Ok(project_from_contractions(base, &t, &s_core))
}

/// Projection of a sparse tensor (zero off the sample set) without ever
/// materializing it densely; `O(|Omega| (r1 + r2))` plus mode-sized terms.
pub fn project_samples(base: &GaugedTT, y: &SampleSet) -> Result<TangentVector> {
    check_dims(base, y.dims())?;
    let d = base.dims();
    let (r1, r2) = base.ranks();
    let x1p = base.x1p();
    let x3pp = base.x3pp();
    let mut t = DenseTensor3::zeros(Dims::new(d.n1, d.n2, r2));
    let mut s_core = DenseTensor3::zeros(Dims::new(r1, d.n2, d.n3));
    for ([i1, i2, i3], v) in y.iter() {
        for b in 0..r2 {
            let cur = t.get(i1, i2, b);
            t.set(i1, i2, b, cur + v * x3pp[[b, i3]]);
        }
        for a in 0..r1 {
            let cur = s_core.get(a, i2, i3);
            s_core.set(a, i2, i3, cur + v * x1p[[i1, a]]);
        }
    }
    Ok(project_from_contractions(base, &t, &s_core))
}

/// Projection of a tensor given in TT form; cost linear in the mode sizes.
pub fn project_tt(base: &GaugedTT, y: &TTTensor) -> Result<TangentVector> {
    check_dims(base, y.dims())?;
    let b = y.x3().dot(&base.x3pp().t());
    let c2 = contract_right(y.x2(), &b)?;
    let t = contract_left(y.x1(), &c2)?;
    let d = base.x1p().t().dot(y.x1());
    let dcore = contract_left(&d, y.x2())?;
    let s_core = contract_right(&dcore, y.x3())?;
    Ok(project_from_contractions(base, &t, &s_core))
}

/// Retraction onto the fixed-rank manifold: the exact train for
/// `X + step * xi` (ranks at most `(2 r1, 2 r2)`) rounded back to
/// `(r1, r2)` and re-orthogonalized.
pub fn retract(xi: &TangentVector, step: f64) -> Result<GaugedTT> {
    let b = xi.base();
    let d = b.dims();
    let (r1, r2) = b.ranks();
    let g1 = concatenate![Axis(1), b.x1p().view(), xi.w1.view()];
    let g3 = concatenate![Axis(0), b.x3pp().view(), xi.w3.view()];
    let mut g2 = DenseTensor3::zeros(Dims::new(2 * r1, d.n2, 2 * r2));
    for a in 0..r1 {
        for j in 0..d.n2 {
            for c in 0..r2 {
                g2.set(a, j, c, b.x2().get(a, j, c) + step * xi.w2.get(a, j, c));
                g2.set(a, j, r2 + c, step * b.x2p().get(a, j, c));
                g2.set(r1 + a, j, c, step * b.x2pp().get(a, j, c));
            }
        }
    }
    let sum = TTTensor::new(g1, g2, g3).expect("shapes consistent");
    let rounded = sum.truncate((r1, r2))?;
    GaugedTT::orthogonalize(&rounded)
}

/// Vector transport by re-projection onto the tangent space at `new_base`.
/// Non-expansive: the transported norm never exceeds the original.
pub fn transport(xi: &TangentVector, new_base: &GaugedTT) -> Result<TangentVector> {
    project_tt(new_base, &xi.ambient_tt())
}

/// The eight-block tangent-cone parametrization of an ambient tensor at a
/// base point of lower rank.
#[derive(Debug, Clone)]
pub struct ConeElement {
    base: GaugedTT,
    u1: Array2<f64>,
    u2: DenseTensor3,
    z2: DenseTensor3,
    v2dot: DenseTensor3,
    v3: Array2<f64>,
    w1: Array2<f64>,
    w2: DenseTensor3,
    w3: Array2<f64>,
}

impl ConeElement {
    pub fn base(&self) -> &GaugedTT {
        &self.base
    }

    pub fn u1(&self) -> &Array2<f64> {
        &self.u1
    }

    pub fn u2(&self) -> &DenseTensor3 {
        &self.u2
    }

    pub fn z2(&self) -> &DenseTensor3 {
        &self.z2
    }

    pub fn v2dot(&self) -> &DenseTensor3 {
        &self.v2dot
    }

    pub fn v3(&self) -> &Array2<f64> {
        &self.v3
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    pub fn w2(&self) -> &DenseTensor3 {
        &self.w2
    }

    pub fn w3(&self) -> &Array2<f64> {
        &self.w3
    }

    /// Block widths `(s1, s2)`.
    pub fn widths(&self) -> (usize, usize) {
        (self.u1.ncols(), self.v3.nrows())
    }

    /// The tangent-space part `(W1, W2, W3)` as a [`TangentVector`].
    pub fn tangent_part(&self) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            w1: self.w1.clone(),
            w2: self.w2.clone(),
            w3: self.w3.clone(),
        }
    }

    /// The six expanded train terms, mutually orthogonal, summing to the
    /// decomposed tensor.
    pub fn terms(&self) -> Result<[DenseTensor3; 6]> {
        let b = &self.base;
        let t_w2 = contract_right(&contract_left(b.x1p(), &self.w2)?, b.x3pp())?;
        let t_w1 = contract_right(&contract_left(&self.w1, b.x2pp())?, b.x3pp())?;
        let t_w3 = contract_right(&contract_left(b.x1p(), b.x2p())?, &self.w3)?;
        let t_v2 = contract_right(&contract_left(&self.u1, &self.v2dot)?, b.x3pp())?;
        let t_u2 = contract_left(b.x1p(), &contract_right(&self.u2, &self.v3)?)?;
        let t_z2 = contract_right(&contract_left(&self.u1, &self.z2)?, &self.v3)?;
        Ok([t_w2, t_w1, t_w3, t_v2, t_u2, t_z2])
    }

    pub fn reconstruct(&self) -> Result<DenseTensor3> {
        let terms = self.terms()?;
        let mut acc = DenseTensor3::zeros(self.base.dims());
        for t in &terms {
            acc = acc.add_scaled(1.0, t)?;
        }
        Ok(acc)
    }
}

/// Decompose an ambient tensor into the eight cone blocks at `base`, with
/// widths `s1 = n1 - r1`, `s2 = n3 - r2` (before reduction).
pub fn decompose_cone(base: &GaugedTT, y: &DenseTensor3) -> Result<ConeElement> {
    check_dims(base, y.dims())?;
    let d = base.dims();
    let (r1, r2) = base.ranks();
    let q1 = linalg::orthonormal_complement(base.x1p());
    let q3 = linalg::orthonormal_complement(&base.x3pp().t().to_owned());
    let t = contract_right(y, &base.x3pp().t().to_owned())?;
    let s_core = contract_left(&base.x1p().t().to_owned(), y)?;
    let tang = project_from_contractions(base, &t, &s_core);

    let x2ppl = base.x2pp().left_unfold();
    let q1t_tl = q1.t().dot(&t.left_unfold());
    let v2l = &q1t_tl - &q1t_tl.dot(&x2ppl.t()).dot(&x2ppl);
    let v2dot = DenseTensor3::fold_left(&v2l, Dims::new(q1.ncols(), d.n2, r2))?;

    let x2pr = base.x2p().right_unfold();
    let sr_q3 = s_core.right_unfold().dot(&q3);
    let u2r = &sr_q3 - &x2pr.dot(&x2pr.t().dot(&sr_q3));
    let u2 = DenseTensor3::fold_right(&u2r, Dims::new(r1, d.n2, q3.ncols()))?;

    let z2 = contract_left(&q1.t().to_owned(), &contract_right(y, &q3)?)?;

    Ok(ConeElement {
        base: base.clone(),
        v3: q3.t().to_owned(),
        u1: q1,
        u2,
        z2,
        v2dot,
        w1: tang.w1,
        w2: tang.w2,
        w3: tang.w3,
    })
}

/// Shrink the cone widths to the numerical ranks of the factor products
/// `U1 V2^L` and `U2^R V3`, re-factoring through their SVDs at relative
/// threshold `rank_tol`. `Z2` is updated consistently.
pub fn reduce_cone_factors(e: &ConeElement, rank_tol: f64) -> Result<ConeElement> {
    let d = e.base.dims();
    let (r1, r2) = e.base.ranks();

    let p1 = e.u1.dot(&e.v2dot.left_unfold());
    let f1 = linalg::svd(&p1)?;
    let s1 = linalg::numerical_rank(&f1.s, rank_tol);
    let u1_new = f1.u.slice(s![.., ..s1]).to_owned();
    let v2l_new = Array2::from_diag(&f1.s.slice(s![..s1]).to_owned()).dot(&f1.vt.slice(s![..s1, ..]));
    let v2dot_new = DenseTensor3::fold_left(&v2l_new, Dims::new(s1, d.n2, r2))?;

    let p2 = e.u2.right_unfold().dot(&e.v3);
    let f2 = linalg::svd(&p2)?;
    let s2 = linalg::numerical_rank(&f2.s, rank_tol);
    let u2r_new = f2
        .u
        .slice(s![.., ..s2])
        .dot(&Array2::from_diag(&f2.s.slice(s![..s2]).to_owned()));
    let u2_new = DenseTensor3::fold_right(&u2r_new, Dims::new(r1, d.n2, s2))?;
    let v3_new = f2.vt.slice(s![..s2, ..]).to_owned();

    let m1 = u1_new.t().dot(&e.u1);
    let m3 = e.v3.dot(&v3_new.t());
    let z2_new = contract_left(&m1, &contract_right(&e.z2, &m3)?)?;

    Ok(ConeElement {
        base: e.base.clone(),
        u1: u1_new,
        u2: u2_new,
        z2: z2_new,
        v2dot: v2dot_new,
        v3: v3_new,
        w1: e.w1.clone(),
        w2: e.w2.clone(),
        w3: e.w3.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::random_tt;

    fn frob(a: &Array2<f64>) -> f64 {
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn random_base(dims: Dims, ranks: (usize, usize), seed: u64) -> GaugedTT {
        GaugedTT::orthogonalize(&random_tt(dims, ranks, seed).unwrap()).unwrap()
    }

    fn random_dense(dims: Dims, seed: u64) -> DenseTensor3 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DenseTensor3::from_fn(dims, |_, _, _| rng.sample(rand_distr::StandardNormal))
    }

    #[test]
    fn projection_is_idempotent() {
        let base = random_base(Dims::new(8, 9, 10), (2, 3), 1);
        let xi = project_dense(&base, &random_dense(base.dims(), 2)).unwrap();
        let again = project_dense(&base, &xi.ambient_dense()).unwrap();
        let scale = xi.norm_sq().sqrt();
        assert!(frob(&(&again.w1 - &xi.w1)) <= 1e-11 * scale);
        assert!(again.w2.sub(&xi.w2).unwrap().norm() <= 1e-11 * scale);
        assert!(frob(&(&again.w3 - &xi.w3)) <= 1e-11 * scale);
    }

    #[test]
    fn gauge_conditions_and_norm_identity() {
        let base = random_base(Dims::new(8, 9, 10), (2, 3), 3);
        let xi = project_dense(&base, &random_dense(base.dims(), 4)).unwrap();
        assert!(frob(&xi.w1().t().dot(base.x1p())) <= 1e-12 * frob(xi.w1()));
        assert!(frob(&xi.w3().dot(&base.x3pp().t())) <= 1e-12 * frob(xi.w3()));
        let amb = xi.ambient_dense();
        assert!((amb.norm_sq() - xi.norm_sq()).abs() <= 1e-12 * amb.norm_sq());
    }

    #[test]
    fn projection_annihilates_orthogonal_input() {
        let base = random_base(Dims::new(7, 6, 8), (2, 2), 5);
        let q1 = linalg::orthonormal_complement(base.x1p());
        let q3 = linalg::orthonormal_complement(&base.x3pp().t().to_owned());
        let z = random_dense(Dims::new(q1.ncols(), 6, q3.ncols()), 6);
        // Y = Q1 . Z . Q3^T lies in the sixth term of the decomposition
        let y = contract_left(&q1, &contract_right(&z, &q3.t().to_owned()).unwrap()).unwrap();
        let xi = project_dense(&base, &y).unwrap();
        assert!(xi.norm_sq().sqrt() <= 1e-12 * y.norm());
    }

    #[test]
    fn projection_is_linear() {
        let base = random_base(Dims::new(6, 7, 8), (2, 2), 7);
        let y = random_dense(base.dims(), 8);
        let z = random_dense(base.dims(), 9);
        let (a, b) = (0.7, -1.3);
        let combo = project_dense(&base, &y.scale(a).add_scaled(b, &z).unwrap()).unwrap();
        let py = project_dense(&base, &y).unwrap();
        let pz = project_dense(&base, &z).unwrap();
        let lin = py.scale(a).add_scaled(b, &pz);
        let scale = combo.norm_sq().sqrt();
        assert!(frob(&(&combo.w1 - &lin.w1)) <= 1e-12 * scale);
        assert!(combo.w2.sub(&lin.w2).unwrap().norm() <= 1e-12 * scale);
        assert!(frob(&(&combo.w3 - &lin.w3)) <= 1e-12 * scale);
    }

    #[test]
    fn sparse_and_tt_projections_match_dense_oracle() {
        let base = random_base(Dims::new(6, 5, 7), (2, 2), 10);
        let dense = random_dense(base.dims(), 11);
        // sparse: restrict to a third of the entries
        let dims = base.dims();
        let omega: Vec<[usize; 3]> = (0..dims.len()).filter(|l| l % 3 == 0).map(|l| dims.unlinear(l)).collect();
        let samples = SampleSet::mask(&dense, &omega).unwrap();
        let via_sparse = project_samples(&base, &samples).unwrap();
        let via_dense = project_dense(&base, &samples.scatter()).unwrap();
        assert!(frob(&(&via_sparse.w1 - &via_dense.w1)) <= 1e-12 * frob(&via_dense.w1));
        assert!(via_sparse.w2.sub(&via_dense.w2).unwrap().norm() <= 1e-12);
        assert!(frob(&(&via_sparse.w3 - &via_dense.w3)) <= 1e-12 * frob(&via_dense.w3));
        // TT input
        let y_tt = random_tt(dims, (2, 3), 12).unwrap();
        let via_tt = project_tt(&base, &y_tt).unwrap();
        let via_dense2 = project_dense(&base, &y_tt.contract_full()).unwrap();
        assert!(frob(&(&via_tt.w1 - &via_dense2.w1)) <= 1e-11 * frob(&via_dense2.w1));
        assert!(via_tt.w2.sub(&via_dense2.w2).unwrap().norm() <= 1e-11 * via_dense2.w2.norm());
        assert!(frob(&(&via_tt.w3 - &via_dense2.w3)) <= 1e-11 * frob(&via_dense2.w3));
    }

    #[test]
    fn best_approximation_among_random_tangents() {
        let base = random_base(Dims::new(5, 6, 7), (2, 2), 13);
        let y = random_dense(base.dims(), 14);
        let proj = project_dense(&base, &y).unwrap();
        let best = y.sub(&proj.ambient_dense()).unwrap().norm();
        for seed in 0..100 {
            let zeta = project_dense(&base, &random_dense(base.dims(), 1000 + seed)).unwrap();
            let other = y.sub(&zeta.ambient_dense()).unwrap().norm();
            assert!(best <= other + 1e-12);
        }
    }

    #[test]
    fn retract_step_zero_is_base() {
        let base = random_base(Dims::new(7, 8, 9), (2, 2), 15);
        let xi = project_dense(&base, &random_dense(base.dims(), 16)).unwrap();
        let back = retract(&xi, 0.0).unwrap();
        let d = back.contract_full().sub(&base.contract_full()).unwrap().norm();
        assert!(d <= 1e-12 * base.contract_full().norm());
    }

    #[test]
    fn retract_is_exact_for_in_rank_updates() {
        let base = random_base(Dims::new(6, 6, 6), (2, 2), 17);
        // xi with only the W2 block: X + xi = X1'.(X2 + W2).X3'' has rank <= (2,2)
        let mut xi = TangentVector::zero(&base);
        xi.w2 = random_dense(Dims::new(2, 6, 2), 18);
        let expect = base.contract_full().add_scaled(1.0, &xi.ambient_dense()).unwrap();
        let got = retract(&xi, 1.0).unwrap().contract_full();
        assert!(got.sub(&expect).unwrap().norm() <= 1e-11 * expect.norm());
    }

    #[test]
    fn transport_properties() {
        let base = random_base(Dims::new(6, 7, 8), (2, 2), 19);
        let xi = project_dense(&base, &random_dense(base.dims(), 20)).unwrap();
        // same base: unchanged
        let same = transport(&xi, &base).unwrap();
        assert!(frob(&(&same.w1 - &xi.w1)) <= 1e-11 * xi.norm_sq().sqrt());
        // new base: norm non-increasing
        let other = random_base(base.dims(), (2, 2), 21);
        let moved = transport(&xi, &other).unwrap();
        assert!(moved.norm_sq() <= xi.norm_sq() * (1.0 + 1e-12));
        // zero transports to zero
        let z = transport(&TangentVector::zero(&base), &other).unwrap();
        assert!(z.norm_sq() == 0.0 || z.norm_sq().sqrt() <= 1e-14);
    }

    #[test]
    fn cone_of_base_tensor_is_pure_w2() {
        let base = random_base(Dims::new(7, 6, 8), (2, 3), 22);
        let x = base.contract_full();
        let e = decompose_cone(&base, &x).unwrap();
        let scale = x.norm();
        assert!(frob(&e.w1) <= 1e-12 * scale);
        assert!(frob(&e.w3) <= 1e-12 * scale);
        assert!(e.v2dot.norm() <= 1e-12 * scale);
        assert!(e.u2.norm() <= 1e-12 * scale);
        assert!(e.z2.norm() <= 1e-12 * scale);
        assert!(e.w2.sub(base.x2()).unwrap().norm() <= 1e-12 * scale);
    }

    #[test]
    fn cone_reconstructs_random_tensor() {
        let base = random_base(Dims::new(8, 9, 10), (2, 3), 23);
        let y = random_dense(base.dims(), 24);
        let e = decompose_cone(&base, &y).unwrap();
        assert_eq!(e.widths(), (6, 7));
        let rec = e.reconstruct().unwrap();
        assert!(rec.sub(&y).unwrap().norm() <= 1e-11 * y.norm());
        // modified orthogonality conditions
        let b = e.base();
        assert!(frob(&e.u1().t().dot(b.x1p())) <= 1e-12);
        assert!(frob(&e.w1().t().dot(b.x1p())) <= 1e-12 * frob(e.w1()));
        assert!(frob(&e.u2().right_unfold().t().dot(&b.x2p().right_unfold())) <= 1e-11 * e.u2().norm());
        assert!(frob(&e.w3().dot(&b.x3pp().t())) <= 1e-12 * frob(e.w3()));
        assert!(frob(&e.v3().dot(&b.x3pp().t())) <= 1e-12);
        assert!(frob(&e.v2dot().left_unfold().dot(&b.x2pp().left_unfold().t())) <= 1e-11 * e.v2dot().norm());
        // pairwise orthogonality of the six terms
        let terms = e.terms().unwrap();
        for i in 0..6 {
            for j in i + 1..6 {
                let ip = terms[i].inner(&terms[j]).unwrap();
                let scale = terms[i].norm() * terms[j].norm();
                assert!(ip.abs() <= 1e-10 * scale.max(1e-30), "terms {i},{j}: {ip}");
            }
        }
    }

    #[test]
    fn cone_of_zero_is_zero() {
        let base = random_base(Dims::new(5, 5, 5), (2, 2), 25);
        let e = decompose_cone(&base, &DenseTensor3::zeros(base.dims())).unwrap();
        assert!(e.reconstruct().unwrap().norm() == 0.0);
        let r = reduce_cone_factors(&e, 1e-8).unwrap();
        assert_eq!(r.widths(), (0, 0));
    }

    #[test]
    fn reduce_shrinks_rank_one_products() {
        let base = random_base(Dims::new(7, 6, 8), (2, 2), 26);
        let y = random_dense(base.dims(), 27);
        let mut e = decompose_cone(&base, &y).unwrap();
        // overwrite U1/V2 with an exact rank-1 product, U2/V3 with rank 1
        let (s1, s2) = e.widths();
        let col = Array2::from_shape_fn((7, s1), |(i, j)| if j == 0 { e.u1[[i, 0]] } else { 0.0 });
        e.u1 = col;
        let p2r = e.u2.right_unfold();
        let keep = p2r.slice(s![.., ..1]).to_owned();
        let mut u2r = Array2::zeros((p2r.nrows(), s2));
        u2r.slice_mut(s![.., ..1]).assign(&keep);
        e.u2 = DenseTensor3::fold_right(&u2r, e.u2.dims()).unwrap();
        let r = reduce_cone_factors(&e, 1e-10).unwrap();
        assert_eq!(r.widths(), (1, 1));
        // factor products preserved
        let before = e.u1.dot(&e.v2dot.left_unfold());
        let after = r.u1.dot(&r.v2dot.left_unfold());
        assert!(
            frob(&(&before - &after)) <= 1e-11 * frob(&before).max(1e-30),
            "err {} scale {}",
            frob(&(&before - &after)),
            frob(&before)
        );
        let before2 = e.u2.right_unfold().dot(&e.v3);
        let after2 = r.u2.right_unfold().dot(&r.v3);
        assert!(
            frob(&(&before2 - &after2)) <= 1e-11 * frob(&before2).max(1e-30),
            "err {} scale {}",
            frob(&(&before2 - &after2)),
            frob(&before2)
        );
    }

    #[test]
    fn reduce_preserves_full_sum_generic() {
        let base = random_base(Dims::new(7, 6, 8), (2, 2), 28);
        let y = random_dense(base.dims(), 29);
        let e = decompose_cone(&base, &y).unwrap();
        let r = reduce_cone_factors(&e, 1e-12).unwrap();
        assert_eq!(r.widths(), (5, 6));
        let rec = r.reconstruct().unwrap();
        assert!(rec.sub(&y).unwrap().norm() <= 1e-11 * y.norm());
    }
}
