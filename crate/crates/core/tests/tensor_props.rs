use dstt_kit::rank1::{angle_between, canonical_sign};
use dstt_kit::TensorOneM;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vec_strategy(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0f64, n).prop_map(DVector::from_vec)
}

fn unit_strategy(n: usize) -> impl Strategy<Value = DVector<f64>> {
    vec_strategy(n).prop_filter("nonzero", |v| v.norm() > 1e-3).prop_map(|v| v.normalize())
}

fn tensor_strategy() -> impl Strategy<Value = TensorOneM> {
    (2usize..=4, 1usize..=3).prop_flat_map(|(n, m)| {
        prop::collection::vec(-3.0..3.0f64, n * n.pow(m as u32))
            .prop_map(move |d| TensorOneM::from_entries(n, m, d).unwrap())
    })
}

fn close(a: &DVector<f64>, b: &DVector<f64>, scale: f64) -> bool {
    (a - b).norm() <= 1e-12 * scale.max(1.0)
}

proptest! {
    #[test]
    fn contraction_is_homogeneous(phi in tensor_strategy(), alpha in -3.0..3.0f64, seed in 0u64..1000) {
        let n = phi.n_in();
        let x = DVector::from_fn(n, |i, _| ((seed + i as u64) as f64 * 0.37).sin());
        let a = phi.contract_full(&(&x * alpha)).unwrap();
        let b = phi.contract_full(&x).unwrap() * alpha.powi(phi.order() as i32);
        prop_assert!(close(&a, &b, b.norm() + phi.frobenius_norm()));
    }

    #[test]
    fn frobenius_identity_for_any_unit_direction(phi in tensor_strategy(), seed in 0u64..1000) {
        let n = phi.n_in();
        let v = DVector::from_fn(n, |i, _| ((seed * 7 + i as u64) as f64).cos() + 0.1).normalize();
        let u = phi.contract_full(&v).unwrap();
        let lhs = phi.sub(&TensorOneM::rank1_outer(&u, &v, phi.order())).unwrap().frobenius_norm().powi(2);
        let rhs = phi.frobenius_norm().powi(2) - u.norm_squared();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * phi.frobenius_norm().powi(2).max(1.0));
    }

    #[test]
    fn rank1_contraction_and_sign_invariance(
        (u, v, x) in (2usize..=5).prop_flat_map(|n| (vec_strategy(n), unit_strategy(n), vec_strategy(n))),
        m in 1usize..=3,
    ) {
        let t = TensorOneM::rank1_outer(&u, &v, m);
        let want = &u * v.dot(&x).powi(m as i32);
        let got = t.contract_full(&x).unwrap();
        prop_assert!(close(&got, &want, want.norm()));
        let flipped = if m % 2 == 0 {
            TensorOneM::rank1_outer(&u, &(-&v), m)
        } else {
            TensorOneM::rank1_outer(&(-&u), &(-&v), m)
        };
        prop_assert!(close(&flipped.contract_full(&x).unwrap(), &got, got.norm()));
        prop_assert!(t.symmetry_defect() == 0.0 || m == 1);
    }

    #[test]
    fn identity_basis_change_is_a_no_op(phi in tensor_strategy()) {
        let same = phi.change_basis(&DMatrix::identity(phi.n_in(), phi.n_in())).unwrap();
        prop_assert!(same.sub(&phi).unwrap().frobenius_norm() <= 1e-14 * phi.frobenius_norm().max(1.0));
    }

    #[test]
    fn csv_round_trip_is_exact(phi in tensor_strategy()) {
        prop_assert_eq!(TensorOneM::from_csv(&phi.to_csv()).unwrap(), phi);
    }

    #[test]
    fn angle_is_sign_invariant_and_folded(
        (a, b) in (2usize..=6).prop_flat_map(|n| (unit_strategy(n), unit_strategy(n))),
    ) {
        let t = angle_between(&a, &b);
        prop_assert!((0.0..=90.0).contains(&t));
        prop_assert!((angle_between(&a, &(-&b)) - t).abs() < 1e-9);
        prop_assert!((angle_between(&b, &a) - t).abs() < 1e-12);
        prop_assert!(angle_between(&canonical_sign(&a), &a) < 1e-6);
    }
}
