mod common;

use common::{concurrence_oracle, random_qubit, random_state, random_unitary, two_term_matrix};
use pdc_entangle::jointstate::density_matrix;
use pdc_entangle::metrics::{concurrence, fidelity, purity};
use pdc_entangle::{Complex64, DensityMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn two_term_concurrence_is_twice_the_coherence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let alpha: f64 = rng.random_range(0.0..=1.0);
        let beta = 1.0 - alpha;
        let bound = (alpha * beta).sqrt();
        let d = Complex64::from_polar(rng.random_range(0.0..=bound), rng.random_range(-3.2..3.2));
        let rho = density_matrix(alpha, beta, d).unwrap();
        assert_eq!(rho.matrix(), &two_term_matrix(alpha, beta, d));
        let conc = concurrence(&rho).unwrap();
        assert!((conc - 2.0 * d.norm()).abs() < 1e-12, "{conc} vs {}", 2.0 * d.norm());
        // the eigenvalue oracle loses precision on rank-deficient states
        assert!((conc - concurrence_oracle(rho.matrix())).abs() < 1e-6);
        let p = purity(&rho);
        assert!((p - (alpha * alpha + beta * beta + 2.0 * d.norm_sqr())).abs() < 1e-12);
    }
}

#[test]
fn full_rank_states_agree_with_the_eigenvalue_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let rho = random_state(&mut rng, 4);
        assert!((concurrence(&rho).unwrap() - concurrence_oracle(rho.matrix())).abs() < 1e-9);
    }
}

#[test]
fn product_states_are_unentangled() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let rho = DensityMatrix::product(&random_qubit(&mut rng), &random_qubit(&mut rng)).unwrap();
        assert!(concurrence(&rho).unwrap() < 1e-10);
    }
}

proptest! {
    #[test]
    fn fidelity_is_symmetric_and_unitarily_invariant(seed in any::<u64>(), ra in 1usize..=4, rb in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_state(&mut rng, ra), random_state(&mut rng, rb));
        let u = random_unitary(&mut rng);
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - fidelity(&b, &a).unwrap()).abs() < 1e-10);
        let fu = fidelity(&a.transform(&u).unwrap(), &b.transform(&u).unwrap()).unwrap();
        prop_assert!((f - fu).abs() < 1e-10);
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn metric_ranges(seed in any::<u64>(), rank in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, rank);
        let p = purity(&rho);
        prop_assert!((0.25 - 1e-12..=1.0 + 1e-12).contains(&p));
        let conc = concurrence(&rho).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&conc));
    }
}

#[test]
fn pure_state_fidelity_is_the_overlap_modulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let u = nalgebra::Vector4::from_fn(|_, _| common::gaussian_complex(&mut rng)).normalize();
        let v = nalgebra::Vector4::from_fn(|_, _| common::gaussian_complex(&mut rng)).normalize();
        let f = fidelity(&DensityMatrix::pure(&u).unwrap(), &DensityMatrix::pure(&v).unwrap()).unwrap();
        assert!((f - u.dotc(&v).norm()).abs() < 1e-12);
    }
}
