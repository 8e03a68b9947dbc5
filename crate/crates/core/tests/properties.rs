//! Randomized property tests for the tensor containers, the gauged TT
//! representation, and the gap estimator.

use proptest::prelude::*;
use ttcomplete::linalg;
use ttcomplete::rank::estimated_rank;
use ttcomplete::tensor::{DenseTensor3, Dims, SampleSet};
use ttcomplete::tt::{orthonormality_residual_cols, orthonormality_residual_rows, random_tt, GaugedTT};

fn dims_strategy() -> impl Strategy<Value = Dims> {
    (1usize..6, 1usize..6, 1usize..6).prop_map(|(a, b, c)| Dims::new(a, b, c))
}

fn tensor_strategy() -> impl Strategy<Value = DenseTensor3> {
    dims_strategy().prop_flat_map(|d| {
        proptest::collection::vec(-10.0f64..10.0, d.len())
            .prop_map(move |v| DenseTensor3::from_vec(d, v).unwrap())
    })
}

proptest! {
    #[test]
    fn unfold_fold_round_trips_exactly(t in tensor_strategy()) {
        let l = DenseTensor3::fold_left(&t.left_unfold(), t.dims()).unwrap();
        let r = DenseTensor3::fold_right(&t.right_unfold(), t.dims()).unwrap();
        // bitwise round trip: unfoldings only reinterpret the buffer
        prop_assert_eq!(t.data(), l.data());
        prop_assert_eq!(t.data(), r.data());
    }

    #[test]
    fn inner_product_is_symmetric_and_bilinear(
        d in dims_strategy(),
        seed in 0u64..1000,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut gen = |_| DenseTensor3::from_fn(d, |_, _, _| rng.gen_range(-1.0..1.0));
        let (x, y, z) = (gen(0), gen(1), gen(2));
        let sym = (x.inner(&y).unwrap() - y.inner(&x).unwrap()).abs();
        prop_assert!(sym <= 1e-12 * (x.norm() * y.norm()).max(1.0));
        // <a x + b y, z> = a <x, z> + b <y, z>
        let combo = x.scale(a).add_scaled(b, &y).unwrap();
        let lhs = combo.inner(&z).unwrap();
        let rhs = a * x.inner(&z).unwrap() + b * y.inner(&z).unwrap();
        let scale = (x.norm() + y.norm()) * z.norm() * (a.abs() + b.abs());
        prop_assert!((lhs - rhs).abs() <= 1e-11 * scale.max(1.0));
    }

    #[test]
    fn mask_scatter_mask_is_identity(t in tensor_strategy(), stride in 1usize..5) {
        let omega: Vec<[usize; 3]> = (0..t.dims().len())
            .filter(|l| l % stride == 0)
            .map(|l| t.dims().unlinear(l))
            .collect();
        let s = SampleSet::mask(&t, &omega).unwrap();
        let again = SampleSet::mask(&s.scatter(), &omega).unwrap();
        prop_assert_eq!(s.values(), again.values());
        prop_assert_eq!(s.indices(), again.indices());
    }

    #[test]
    fn gap_estimator_matches_direct_oracle(
        mut sv in proptest::collection::vec(1e-6f64..100.0, 0..12),
        s in 1usize..15,
    ) {
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let got = estimated_rank(&sv, s, 0.0);
        // direct argmax over the existing consecutive gaps, ties to the
        // smallest position
        let mut best = 0usize;
        let mut best_gap = f64::NEG_INFINITY;
        for j in 1..=s.min(sv.len().saturating_sub(1)) {
            let gap = (sv[j - 1] - sv[j]) / sv[j - 1];
            if gap > best_gap {
                best_gap = gap;
                best = j;
            }
        }
        prop_assert_eq!(got, best);
        // scale invariance
        let scaled: Vec<f64> = sv.iter().map(|v| v * 1e5).collect();
        prop_assert_eq!(estimated_rank(&scaled, s, 0.0), got);
    }

    #[test]
    fn gauged_representation_satisfies_all_orthogonality_conditions(
        seed in 0u64..500,
        n1 in 2usize..7,
        n2 in 2usize..7,
        n3 in 2usize..7,
    ) {
        let dims = Dims::new(n1, n2, n3);
        let r1 = 1 + seed as usize % n1.min(4);
        let r2 = 1 + (seed / 7) as usize % n3.min(4);
        let Ok(x) = random_tt(dims, (r1, r2), seed) else { return Ok(()) };
        let Ok(g) = GaugedTT::orthogonalize(&x) else { return Ok(()) };
        prop_assert!(orthonormality_residual_cols(g.x1p()) <= 1e-12);
        prop_assert!(orthonormality_residual_cols(&g.x2p().right_unfold()) <= 1e-12);
        prop_assert!(orthonormality_residual_rows(&g.x2pp().left_unfold()) <= 1e-12);
        prop_assert!(orthonormality_residual_rows(g.x3pp()) <= 1e-12);
        // same tensor as the input
        let err = g.contract_full().sub(&x.contract_full()).unwrap().norm();
        prop_assert!(err <= 1e-10 * x.contract_full().norm().max(1e-30));
    }

    #[test]
    fn qr_complement_spans_orthogonal_subspace(
        n in 2usize..10,
        r in 1usize..5,
        seed in 0u64..300,
    ) {
        prop_assume!(r < n);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = ndarray::Array2::from_shape_fn((n, r), |_| rng.gen_range(-1.0..1.0));
        let (u, _) = linalg::thin_qr(&m);
        let c = linalg::orthonormal_complement(&u);
        prop_assert_eq!(c.shape(), &[n, n - r]);
        let cross = u.t().dot(&c);
        prop_assert!(cross.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-11);
        let gram = c.t().dot(&c);
        for i in 0..n - r {
            for j in 0..n - r {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[[i, j]] - expect).abs() <= 1e-11);
            }
        }
    }
}
