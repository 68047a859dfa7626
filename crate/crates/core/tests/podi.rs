mod common;

use common::jacobi_svd;
use lvad_core::podi::{pod_basis, train, InterpolationKind, RbfKernel, SnapshotSet};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_matrix(rng: &mut StdRng, n: usize, ns: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, ns, |_, _| rng.random_range(-1.0..1.0))
}

fn set_of(a: &DMatrix<f64>, weights: Option<Vec<f64>>) -> SnapshotSet {
    let params = (0..a.ncols()).map(|j| j as f64).collect();
    SnapshotSet::from_matrix("f", params, a.clone(), weights).unwrap()
}

#[test]
fn singular_values_and_modes_match_dense_svd() {
    let mut rng = StdRng::seed_from_u64(17);
    for trial in 0..100 {
        let ns = rng.random_range(2..=12);
        let n = rng.random_range(ns..=80);
        let a = random_matrix(&mut rng, n, ns);
        let (sv, vecs) = jacobi_svd(&a);
        let basis = pod_basis(&set_of(&a, None), 1.0).unwrap();
        assert_eq!(basis.singular_values.len(), ns);
        for (i, (x, y)) in basis.singular_values.iter().zip(&sv).enumerate() {
            assert!(
                (x - y).abs() <= 1e-8 * y,
                "trial {trial} sigma_{i}: {x} vs {y}"
            );
        }
        for j in 0..basis.k {
            let dot = basis.modes.column(j).dot(&vecs.column(j));
            let diff = (basis.modes.column(j) - vecs.column(j) * dot.signum()).amax();
            assert!(diff <= 1e-8, "trial {trial} mode {j}: {diff}");
        }
    }
}

#[test]
fn truncation_error_equals_discarded_energy() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..100 {
        let ns = rng.random_range(3..=10);
        let n = rng.random_range(ns..=60);
        let a = random_matrix(&mut rng, n, ns);
        let (sv, _) = jacobi_svd(&a);
        for threshold in [0.5, 0.8, 0.95] {
            let basis = pod_basis(&set_of(&a, None), threshold).unwrap();
            let u = &basis.modes;
            let residual = (&a - u * (u.transpose() * &a)).norm();
            let expected = sv[basis.k..].iter().map(|s| s * s).sum::<f64>().sqrt();
            if basis.k < ns {
                assert!(
                    (residual - expected).abs() <= 1e-8 * expected,
                    "{residual} vs {expected}"
                );
            } else {
                assert!(residual <= 1e-12 * a.norm());
            }
            let gram = u.transpose() * u;
            let off = (gram - DMatrix::identity(basis.k, basis.k)).amax();
            assert!(off <= 1e-10, "orthonormality defect {off}");
        }
    }
}

#[test]
fn weighted_truncation_uses_weighted_norm() {
    // the weighted POD of S equals the plain POD of W^(1/2) S
    let mut rng = StdRng::seed_from_u64(9);
    let a = random_matrix(&mut rng, 40, 6);
    let w: Vec<f64> = (0..40).map(|_| rng.random_range(0.1..3.0)).collect();
    let scaled = DMatrix::from_fn(40, 6, |i, j| w[i].sqrt() * a[(i, j)]);
    let (sv, _) = jacobi_svd(&scaled);
    let basis = pod_basis(&set_of(&a, Some(w.clone())), 0.9).unwrap();
    for (x, y) in basis.singular_values.iter().zip(&sv) {
        assert!((x - y).abs() <= 1e-8 * y);
    }
    let wdiag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w.clone()));
    let u = &basis.modes;
    let gram = u.transpose() * &wdiag * u;
    assert!((gram - DMatrix::identity(basis.k, basis.k)).amax() <= 1e-10);
    let r = &a - u * (u.transpose() * &wdiag * &a);
    let residual = (r.transpose() * &wdiag * &r).trace().sqrt();
    let expected = sv[basis.k..].iter().map(|s| s * s).sum::<f64>().sqrt();
    assert!((residual - expected).abs() <= 1e-8 * expected);
}

#[test]
fn full_threshold_keeps_numerical_rank() {
    let mut rng = StdRng::seed_from_u64(3);
    let left = random_matrix(&mut rng, 30, 3);
    let right = random_matrix(&mut rng, 3, 7);
    let a = left * right;
    let basis = pod_basis(&set_of(&a, None), 1.0).unwrap();
    assert_eq!(basis.k, 3);
    let u = &basis.modes;
    for j in 0..7 {
        let col = a.column(j).into_owned();
        let rec = u * (u.transpose() * &col);
        assert!((rec - &col).norm() <= 1e-10 * col.norm());
    }
}

#[test]
fn full_threshold_resolves_weak_directions() {
    // a smooth family whose variation is 1e-8 of its mean, like a pressure sweep
    let mut rng = StdRng::seed_from_u64(5);
    let base = random_matrix(&mut rng, 200, 1);
    let bump = random_matrix(&mut rng, 200, 1);
    let a = DMatrix::from_fn(200, 9, |i, j| base[i] + 1e-8 * (j as f64) * bump[i]);
    let basis = pod_basis(&set_of(&a, None), 1.0).unwrap();
    assert_eq!(basis.k, 2);
    let u = &basis.modes;
    for j in 0..9 {
        let col = a.column(j).into_owned();
        let rec = u * (u.transpose() * &col);
        assert!((rec - &col).norm() <= 1e-10 * col.norm(), "column {j}");
    }
}

#[test]
fn mode_count_grows_with_threshold() {
    let mut rng = StdRng::seed_from_u64(23);
    for _ in 0..20 {
        let a = random_matrix(&mut rng, 25, 8);
        let set = set_of(&a, None);
        let mut last = 0;
        for t in [0.5, 0.9, 0.999, 0.9999, 1.0] {
            let k = pod_basis(&set, t).unwrap().k;
            assert!(k >= last);
            last = k;
        }
    }
}

const KINDS: [InterpolationKind; 3] = [
    InterpolationKind::Linear,
    InterpolationKind::Rbf(RbfKernel::Gaussian),
    InterpolationKind::Rbf(RbfKernel::ThinPlate),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn predictions_at_training_points_equal_projections(
        seed in any::<u64>(),
        ns in 2usize..9,
        threshold in 0.3f64..1.0,
        kind in 0usize..3,
    ) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = 20;
        let a = random_matrix(&mut rng, n, ns);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let params: Vec<f64> = (0..ns).map(|j| 3.0 + 2.0 * j as f64 / (ns - 1) as f64).collect();
        let set = SnapshotSet::from_matrix("u_x", params.clone(), a.clone(), Some(w.clone())).unwrap();
        let model = train(&set, threshold, KINDS[kind]).unwrap();
        let u = &model.basis().modes;
        for (j, &p) in params.iter().enumerate() {
            let wcol = nalgebra::DVector::from_fn(n, |i, _| w[i] * a[(i, j)]);
            let projected = u * (u.transpose() * wcol);
            let predicted = nalgebra::DVector::from_vec(model.predict(p, false).unwrap());
            let rel = (&predicted - &projected).norm() / projected.norm().max(f64::MIN_POSITIVE);
            prop_assert!(rel <= 1e-9, "param {} relative {}", p, rel);
        }
    }

    #[test]
    fn cumulative_energy_is_monotone(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut sv: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv[0] += 0.1;
        let e = lvad_core::podi::cumulative_energy(&sv).unwrap();
        prop_assert!(e.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(*e.last().unwrap(), 1.0);
    }
}
