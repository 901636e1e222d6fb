mod common;

use common::{random_system, rng, orthonormal_completion, random_speeds};
use hyperdelay_core::model::{diagonalize, sk_check_eigvec, sk_check_kalman, source_matrix, validate_system};
use hyperdelay_core::Mat;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn sk_forms_agree(seed in any::<u64>(), n in 2usize..=6) {
        let rs = random_system(seed, n);
        let report = validate_system(&rs.system).unwrap();
        prop_assert!(report.passed(), "{:?}", report);
        let eigs = diagonalize(rs.system.flux()).unwrap();
        let b = rs.system.full_damping().unwrap();
        let by_eigvec = sk_check_eigvec(&eigs, &b);
        prop_assert_eq!(by_eigvec, sk_check_kalman(rs.system.flux(), &b));
        if let Some(expected) = rs.planted_sk {
            prop_assert_eq!(by_eigvec, expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn diagonalizing_the_diagonal_form_gives_identity(seed in any::<u64>(), n in 2usize..=6) {
        let rs = random_system(seed, n);
        let a = rs.system.flux();
        let eigs = diagonalize(a).unwrap();
        let p = eigs.basis();
        let d = p.transpose().matmul(a).matmul(p).symmetric_part();
        let again = diagonalize(&d).unwrap();
        let scale = a.max_abs();
        for (l1, l2) in eigs.lambdas().iter().zip(again.lambdas()) {
            prop_assert!((l1 - l2).abs() <= 1e-9 * scale);
        }
        prop_assert!(again.basis().sub(&Mat::identity(n)).max_abs() <= 1e-9);
    }

    #[test]
    fn eigen_structure_invariants(seed in any::<u64>(), n in 2usize..=6) {
        let rs = random_system(seed, n);
        let a = rs.system.flux();
        let eigs = diagonalize(a).unwrap();
        let p = eigs.basis();
        prop_assert!(p.transpose().matmul(p).sub(&Mat::identity(n)).max_abs() <= 1e-10);
        let resid = p.transpose().matmul(a).matmul(p).sub(&Mat::diag(eigs.lambdas())).max_abs();
        prop_assert!(resid <= 1e-9 * a.max_abs());
        prop_assert!(eigs.lambdas().windows(2).all(|w| w[0] < w[1]));
        for j in 0..n {
            let col = p.column(j);
            let lead = col.iter().find(|x| x.abs() > 1e-12).unwrap();
            prop_assert!(*lead > 0.0);
        }
        prop_assert_eq!(eigs.negatives(), rs.speeds.iter().filter(|s| **s < 0.0).count());
        for (l, s) in eigs.lambdas().iter().zip(&rs.speeds) {
            prop_assert!((l - s).abs() < 1e-9);
        }
    }

    #[test]
    fn source_matrix_preserves_quadratic_form(seed in any::<u64>(), n in 2usize..=6, v in prop::collection::vec(-1.0f64..1.0, 6)) {
        let rs = random_system(seed, n);
        let eigs = diagonalize(rs.system.flux()).unwrap();
        let b = rs.system.full_damping().unwrap();
        let m = source_matrix(&eigs, &b);
        let v = &v[..n];
        let mv = m.matvec(v);
        let lhs: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        let pv = eigs.basis().matvec(v);
        let bpv = b.matrix().matvec(&pv);
        let rhs: f64 = pv.iter().zip(&bpv).map(|(a, b)| a * b).sum();
        let scale = b.matrix().max_abs() * v.iter().map(|x| x * x).sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE));
        prop_assert!((m.trace() - b.matrix().trace()).abs() <= 1e-10 * b.matrix().max_abs() * n as f64);
    }
}

#[test]
fn decoupled_undamped_block_fails_both_forms() {
    let mut r = rng(7);
    for n in 2..=6 {
        let speeds = random_speeds(&mut r, n);
        let q = orthonormal_completion(&mut r, n, Some({
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        }));
        let a = q.matmul(&Mat::diag(&speeds)).matmul(&q.transpose()).symmetric_part();
        let sys = hyperdelay_core::HyperbolicSystem::new(1, a, Mat::identity(n - 1), None).unwrap();
        let eigs = diagonalize(sys.flux()).unwrap();
        let b = sys.full_damping().unwrap();
        assert!(!sk_check_eigvec(&eigs, &b));
        assert!(!sk_check_kalman(sys.flux(), &b));
    }
}
