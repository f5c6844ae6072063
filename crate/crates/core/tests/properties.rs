use approx::assert_relative_eq;
use cutlab_core::cutoff::{spectral_projection, tail_norm};
use cutlab_core::dynamics::heisenberg;
use cutlab_core::linop::{hermitian_eig, operator_norm, propagator, SpectralDecomposition};
use cutlab_core::seminorms::{quasi_uniform_seminorm, TestFunction};
use cutlab_core::{OperatorMatrix, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(d: usize, seed: u64) -> OperatorMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    OperatorMatrix::from_fn(d, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn hermitian(d: usize, seed: u64) -> OperatorMatrix {
    let a = random(d, seed);
    (&a + &a.adjoint()).scale_real(0.5)
}

// spectrum in [1, 1 + 2d], unevenly spaced
fn generator(d: usize, seed: u64) -> SpectralDecomposition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut ev: Vec<f64> = (0..d).map(|_| 1.0 + rng.random_range(0.0..2.0 * d as f64)).collect();
    ev.sort_by(f64::total_cmp);
    let u = hermitian_eig(&hermitian(d, seed)).unwrap().eigenvectors().clone();
    SpectralDecomposition::from_parts(ev, u).unwrap()
}

fn test_function() -> impl Strategy<Value = TestFunction> {
    prop_oneof![
        (0.2..2.0f64).prop_map(TestFunction::exp),
        (0.05..1.0f64).prop_map(TestFunction::gauss),
        (1..4u32, 0.2..2.0f64).prop_map(|(m, a)| TestFunction::poly_exp(m, a)),
    ]
}

fn norm(x: &OperatorMatrix) -> f64 {
    operator_norm(x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn seminorm_is_a_seminorm(d in 2..10usize, seed: u64, f in test_function(), k in 0..4u32, c in -3.0..3.0f64) {
        let s = generator(d, seed);
        let a = random(d, seed.wrapping_add(1));
        let b = random(d, seed.wrapping_add(2));
        let na = quasi_uniform_seminorm(&a, &s, &f, k).unwrap();
        let nb = quasi_uniform_seminorm(&b, &s, &f, k).unwrap();
        let nsum = quasi_uniform_seminorm(&(&a + &b), &s, &f, k).unwrap();
        let nscaled = quasi_uniform_seminorm(&a.scale_real(c), &s, &f, k).unwrap();
        prop_assert!(na.value >= 0.0);
        prop_assert_eq!(na.value, na.left.max(na.right));
        prop_assert!(nsum.value <= (na.value + nb.value) * (1.0 + 1e-12) + 1e-300);
        assert_relative_eq!(nscaled.value, c.abs() * na.value, max_relative = 1e-10, epsilon = 1e-300);
    }

    #[test]
    fn seminorm_orderings_swap_under_adjoint(d in 2..10usize, seed: u64, f in test_function(), k in 0..4u32) {
        let s = generator(d, seed);
        let a = random(d, seed.wrapping_add(3));
        let n = quasi_uniform_seminorm(&a, &s, &f, k).unwrap();
        let nstar = quasi_uniform_seminorm(&a.adjoint(), &s, &f, k).unwrap();
        assert_relative_eq!(n.left, nstar.right, max_relative = 1e-10, epsilon = 1e-300);
        assert_relative_eq!(n.right, nstar.left, max_relative = 1e-10, epsilon = 1e-300);
    }

    #[test]
    fn operator_norm_is_submultiplicative(d in 1..12usize, seed: u64) {
        let a = random(d, seed);
        let b = random(d, seed.wrapping_add(7));
        prop_assert!(norm(&(&a * &b)) <= norm(&a) * norm(&b) * (1.0 + 1e-12));
        prop_assert!(norm(&(&a + &b)) <= (norm(&a) + norm(&b)) * (1.0 + 1e-12));
        assert_relative_eq!(norm(&a.adjoint()), norm(&a), max_relative = 1e-12);
    }

    #[test]
    fn propagator_group_law(d in 1..12usize, seed: u64, s in -5.0..5.0f64, t in -5.0..5.0f64) {
        let h = hermitian(d, seed);
        let us = propagator(&h, s).unwrap().matrix;
        let ut = propagator(&h, t).unwrap().matrix;
        let ust = propagator(&h, s + t).unwrap().matrix;
        prop_assert!((&us * &ut).max_abs_diff(&ust) < 1e-10);
        prop_assert!((&ut * &ut.adjoint()).max_abs_diff(&OperatorMatrix::identity(d)) < 1e-10);
        let back = propagator(&h, -t).unwrap().matrix;
        prop_assert!(back.max_abs_diff(&ut.adjoint()) < 1e-10);
    }

    #[test]
    fn heisenberg_map_is_multiplicative(d in 1..10usize, seed: u64, t in -3.0..3.0f64) {
        let h = hermitian(d, seed);
        let a = random(d, seed.wrapping_add(11));
        let b = random(d, seed.wrapping_add(12));
        let lhs = heisenberg(&h, &(&a * &b), t).unwrap();
        let rhs = &heisenberg(&h, &a, t).unwrap() * &heisenberg(&h, &b, t).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
        prop_assert!((norm(&heisenberg(&h, &a, t).unwrap()) - norm(&a)).abs() < 1e-9 * norm(&a).max(1.0));
    }

    #[test]
    fn spectral_projections_are_orthogonal_and_nested(d in 2..12usize, seed: u64, l1 in 0.0..30.0f64, dl in 0.0..10.0f64) {
        let s = generator(d, seed);
        let q1 = spectral_projection(&s, l1);
        let q2 = spectral_projection(&s, l1 + dl);
        prop_assert!((&q1 * &q1).max_abs_diff(&q1) < 1e-10);
        prop_assert!(q1.max_abs_diff(&q1.adjoint()) < 1e-12);
        prop_assert!((&q1 * &q2).max_abs_diff(&q1) < 1e-10);
        let gen = s.reconstruct();
        prop_assert!((&gen * &q1).max_abs_diff(&(&q1 * &gen)) < 1e-9 * s.max());
    }

    #[test]
    fn tail_norm_is_non_increasing(d in 2..12usize, seed: u64, l1 in 0.0..30.0f64, dl in 0.0..10.0f64, ell in 1..4u32) {
        let s = generator(d, seed);
        let t1 = tail_norm(&s, l1, ell).unwrap();
        let t2 = tail_norm(&s, l1 + dl, ell).unwrap();
        prop_assert!(t2 <= t1 * (1.0 + 1e-12));
        prop_assert!(t1 <= 1.0 + 1e-12);
        let next = s.eigenvalues().iter().copied().find(|&x| x > l1 + 1e-12);
        match next {
            Some(x) => assert_relative_eq!(t1, x.powi(-(ell as i32)), max_relative = 1e-9),
            None => prop_assert!(t1 < 1e-12),
        }
    }
}

#[test]
fn eigendecomposition_reconstructs_at_dim_512() {
    let h = hermitian(512, 42);
    let s = hermitian_eig(&h).unwrap();
    let scale = norm(&h);
    assert!(s.reconstruct().max_abs_diff(&h) < 1e-10 * scale);
    assert!(s.unitarity_defect() < 1e-10);
    assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
}
