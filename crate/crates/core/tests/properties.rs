use std::f64::consts::E;

use proptest::prelude::*;

use nodim::caratheodory::{greedy_approximate_caratheodory, verify_caratheodory};
use nodim::feasibility::{ConvexSet, DykstraOptions};
use nodim::helly::{check_kwise_feasibility, witness_violation, SubsetPolicy, VectorConstraint};
use nodim::instances::{gen_caratheodory_instance, gen_quantum_instance, gen_regression_instance, gen_signal_ensemble};
use nodim::numkernel::{eigh, project_l1_ball, project_simplex, singular_values, DenseMatrix};
use nodim::quantum::{project_density, solve_global_state, DensityMatrix, StateOptions};
use nodim::rng::SeededRng;
use nodim::sketch::{greedy_sketch, greedy_sketch_ladder};
use nodim::spaces::{dimension_back_exponent, lp_norm, Extreme, SpaceSpec};

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1..12)
}

proptest! {
    #[test]
    fn simplex_projection_is_idempotent(v in vec_strategy(), mass in 0.1f64..4.0) {
        let once = project_simplex(&v, mass).unwrap();
        let twice = project_simplex(&once, mass).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!(once.iter().all(|&x| x >= 0.0));
        prop_assert!((once.iter().sum::<f64>() - mass).abs() < 1e-12 * (1.0 + mass));
    }

    #[test]
    fn simplex_projection_is_permutation_equivariant(v in vec_strategy(), shift in 0usize..12) {
        let n = v.len();
        let rotated: Vec<f64> = (0..n).map(|i| v[(i + shift) % n]).collect();
        let a = project_simplex(&v, 1.0).unwrap();
        let b = project_simplex(&rotated, 1.0).unwrap();
        for i in 0..n {
            prop_assert!((b[i] - a[(i + shift) % n]).abs() < 1e-12);
        }
    }

    #[test]
    fn l1_projection_is_idempotent(v in vec_strategy(), radius in 0.1f64..4.0) {
        let once = project_l1_ball(&v, radius).unwrap();
        prop_assert!(lp_norm(&once, 1.0) <= radius * (1.0 + 1e-12));
        let twice = project_l1_ball(&once, radius).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn slab_projection_is_translation_equivariant(
        x in prop::collection::vec(-3.0f64..3.0, 4),
        y in prop::collection::vec(-3.0f64..3.0, 4),
        a in prop::collection::vec(-1.0f64..1.0, 4),
        b in -2.0f64..2.0,
        r in 0.0f64..1.0,
    ) {
        prop_assume!(a.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let shift: f64 = a.iter().zip(&y).map(|(p, q)| p * q).sum();
        let mut base = VectorConstraint::slab(a.clone(), b, r);
        let mut moved = VectorConstraint::slab(a, b + shift, r);
        let px = base.project(&x).unwrap();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
        let pxy = moved.project(&xy).unwrap();
        for i in 0..4 {
            prop_assert!((pxy[i] - (px[i] + y[i])).abs() < 1e-10);
        }
        prop_assert!(moved.violation(&pxy).unwrap() < 1e-12);
    }

    #[test]
    fn sum_norm_sandwich_holds(seed in any::<u64>(), d in 3usize..40) {
        let mut rng = SeededRng::new(seed);
        let x = rng.gaussian_vec(d);
        let q = dimension_back_exponent(Extreme::SumNorm, d).unwrap();
        let ratio = lp_norm(&x, 1.0) / lp_norm(&x, q);
        prop_assert!((1.0 - 1e-12..=E + 1e-12).contains(&ratio));
    }

    #[test]
    fn greedy_meets_per_step_bound(seed in any::<u64>(), p in 2.0f64..8.0, d in 1usize..30, n in 2usize..40) {
        let space = SpaceSpec::lp(p, d).unwrap();
        let cloud = gen_caratheodory_instance(seed, space, n).unwrap();
        let sol = greedy_approximate_caratheodory(&cloud, 64).unwrap();
        let report = verify_caratheodory(&cloud, &sol);
        prop_assert!(report.pass, "{}", report.summary());
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>()) {
        let space = SpaceSpec::schatten(3.0, 3).unwrap();
        prop_assert_eq!(
            gen_caratheodory_instance(seed, space, 5).unwrap(),
            gen_caratheodory_instance(seed, space, 5).unwrap()
        );
        prop_assert_eq!(
            gen_regression_instance(seed, 5, 8, 1.5, 0.1, 0.05, 3).unwrap(),
            gen_regression_instance(seed, 5, 8, 1.5, 0.1, 0.05, 3).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn eigh_reconstructs(seed in any::<u64>(), d in 1usize..=32, complex in any::<bool>()) {
        let mut rng = SeededRng::new(seed);
        let a = rng.hermitian(d, complex);
        let dec = eigh(&a).unwrap();
        let scale = 1.0 + a.frobenius_norm();
        prop_assert!(dec.reconstruct().sub(&a).max_abs() < 1e-10 * scale);
        let gram = dec.eigenvectors.adjoint().matmul(&dec.eigenvectors).unwrap();
        prop_assert!(gram.sub(&DenseMatrix::identity(d)).max_abs() < 1e-10);
        prop_assert!(dec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn density_projection_returns_a_state(seed in any::<u64>(), d in 1usize..10) {
        let mut rng = SeededRng::new(seed);
        let rho = project_density(&rng.hermitian(d, true)).unwrap();
        let (min, trace_gap) = DensityMatrix::defects(&rho.matrix).unwrap();
        prop_assert!(min >= -1e-9 && trace_gap <= 1e-9);
        let again = project_density(&rho.matrix).unwrap();
        prop_assert!(again.matrix.sub(&rho.matrix).max_abs() < 1e-10);
    }

    #[test]
    fn schatten_sandwich_on_hermitian_differences(seed in any::<u64>(), d in 3usize..12) {
        let mut rng = SeededRng::new(seed);
        let delta = rng.hermitian(d, true);
        let s = singular_values(&delta).unwrap();
        let q = dimension_back_exponent(Extreme::SumNorm, d).unwrap();
        let ratio = lp_norm(&s, 1.0) / lp_norm(&s, q);
        prop_assert!((1.0 - 1e-12..=E + 1e-12).contains(&ratio));
    }

    #[test]
    fn feasible_witnesses_check_out(seed in any::<u64>()) {
        let planted = gen_regression_instance(seed, 8, 30, 1.5, 0.1, 0.1, 4).unwrap();
        let opts = DykstraOptions::default();
        let reports = check_kwise_feasibility(&planted.instance, SubsetPolicy::Sample { count: 5, seed }, opts).unwrap();
        for r in reports {
            prop_assert!(r.feasible);
            let w = r.witness.unwrap();
            prop_assert!(witness_violation(&planted.instance, &r.subset, &w) <= opts.tol);
        }
    }

    #[test]
    fn sketch_ladder_is_prefix_consistent(seed in any::<u64>()) {
        let ensemble = gen_signal_ensemble(seed, 5, 40).unwrap();
        let ladder = greedy_sketch_ladder(&ensemble, &[3, 9, 20]).unwrap();
        prop_assert_eq!(&ladder[1], &greedy_sketch(&ensemble, 9).unwrap());
    }
}

#[test]
fn quantum_residuals_are_unitarily_covariant() {
    let planted = gen_quantum_instance(17, 5, 12, 0.05, 0.05, 3, true).unwrap();
    let mut rng = SeededRng::new(4);
    let u = eigh(&rng.hermitian(5, true)).unwrap().eigenvectors;
    let conj = |m: &DenseMatrix| u.matmul(m).unwrap().matmul(&u.adjoint()).unwrap().hermitian_part();
    let mut rotated = planted.instance.clone();
    rotated.a = planted.instance.a.iter().map(conj).collect();
    let rho0 = conj(&planted.hidden.matrix);
    for i in 0..planted.instance.m() {
        let a = planted.instance.residual(i, &planted.hidden.matrix);
        let b = rotated.residual(i, &rho0);
        assert!((a - b).abs() < 1e-8);
    }
    let x = solve_global_state(&planted.instance, StateOptions::default()).unwrap();
    let y = solve_global_state(&rotated, StateOptions::default()).unwrap();
    assert!((x.max_residual - y.max_residual).abs() < 1e-8, "{} vs {}", x.max_residual, y.max_residual);
}
