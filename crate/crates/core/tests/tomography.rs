mod common;

use common::{assert_physical, c, random_state};
use nalgebra::Vector4;
use pdc_entangle::jointstate::density_matrix;
use pdc_entangle::metrics::fidelity;
use pdc_entangle::tomography::{
    design_matrix, estimate_accidentals, expected_rates, linear_inversion, mle_reconstruct, projection_index,
    projection_pairs, projector, sample_counts, subtract_accidentals, visibility, Basis, CountModel, CountRecord,
    CountTable, Family, MleOptions, PROJECTIONS,
};
use pdc_entangle::{DensityMatrix, Error};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn bell() -> DensityMatrix {
    DensityMatrix::pure(&Vector4::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))).unwrap()
}

/// Two-term state near the measured case with a small diagonal background.
fn case_state() -> DensityMatrix {
    density_matrix(0.547, 0.453, c(0.361, 0.132)).unwrap().with_background(0.0125).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

#[test]
fn the_36_projectors_span_hermitian_operators() {
    let a = design_matrix();
    assert_eq!(a.shape(), (PROJECTIONS, 16));
    let sv = a.clone().svd(false, false).singular_values;
    let rank = sv.iter().filter(|&&s| s > 1e-10 * sv.max()).count();
    assert_eq!(rank, 16);
    let sum = projection_pairs().fold(nalgebra::Matrix4::zeros(), |acc, (x, y)| acc + projector(x, y));
    assert!((sum - nalgebra::Matrix4::identity() * c(9.0, 0.0)).norm() < 1e-12);
}

#[test]
fn projector_examples() {
    let hv = projector(Basis::H, Basis::V);
    for r in 0..4 {
        for col in 0..4 {
            let want = if (r, col) == (1, 1) { 1.0 } else { 0.0 };
            assert!((hv[(r, col)] - c(want, 0.0)).norm() < 1e-15);
        }
    }
    assert!(projector(Basis::Dp, Basis::Dp).iter().all(|z| (z - c(0.25, 0.0)).norm() < 1e-15));
    for (x, y) in projection_pairs() {
        let p = projector(x, y);
        assert!((p * p - p).norm() < 1e-12);
        assert!((p.trace() - c(1.0, 0.0)).norm() < 1e-12);
        assert!((p - p.adjoint()).norm() < 1e-15);
    }
}

#[test]
fn linear_inversion_is_exact_on_noiseless_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..50 {
        let rho = random_state(&mut rng, 1 + i % 4);
        let counts = expected_rates(&rho, 8.0, 0.0, 120.0);
        let est = linear_inversion(&counts).unwrap();
        assert!((est.matrix - rho.matrix()).norm() < 1e-10);
        assert!((est.intensity - 8.0 * 120.0).abs() < 1e-9);
    }
}

fn flagged_seeds(rho: &DensityMatrix) -> usize {
    let model = CountModel {
        pair_rate: CountModel::calibrated_pair_rate(rho, 4.0).unwrap(),
        ..CountModel::default()
    };
    let means = model.expected_counts(rho);
    (0..200u64)
        .filter(|&seed| {
            let table = sample_counts(&means, &model, seed).unwrap();
            let est = linear_inversion(&subtract_accidentals(&table)).unwrap();
            assert_eq!(est.nonphysical, est.min_eigenvalue < -1e-10);
            est.nonphysical
        })
        .count()
}

#[test]
fn noisy_linear_inversion_flags_boundary_states_only() {
    // a pure state has three zero eigenvalues, so shot noise pushes one below zero
    assert!(flagged_seeds(&bell()) > 0);
    // every eigenvalue of I/4 is far above the noise floor
    assert_eq!(flagged_seeds(&DensityMatrix::maximally_mixed()), 0);
}

#[test]
fn poisson_samples_stay_within_five_sigma() {
    let model = CountModel {
        pair_rate: 0.0,
        singles_rate: 0.0,
        ..CountModel::default()
    };
    let mut means = [0.0; PROJECTIONS];
    means[projection_index(Basis::H, Basis::V)] = 480.0;
    let bound = 5.0 * 480f64.sqrt();
    let seeds = 10_000u64;
    let outside = (0..seeds)
        .into_par_iter()
        .filter(|&seed| {
            let t = sample_counts(&means, &model, seed).unwrap();
            assert_eq!(t.record(Basis::V, Basis::H).coincidences, 0);
            (t.record(Basis::H, Basis::V).coincidences as f64 - 480.0).abs() > bound
        })
        .count();
    // 99.99 % of 10 000 seeds
    assert!(outside <= 1, "{outside}");
}

#[test]
fn sampling_is_deterministic_in_the_seed() {
    let model = CountModel::default();
    let means = model.expected_counts(&case_state());
    let a = sample_counts(&means, &model, 42).unwrap();
    assert_eq!(a, sample_counts(&means, &model, 42).unwrap());
    assert_ne!(a, sample_counts(&means, &model, 43).unwrap());
}

#[test]
fn accidental_estimates() {
    let rec = CountRecord::new(Basis::H, Basis::V, 480, 870 * 120, 870 * 120);
    let acc = estimate_accidentals(&rec, 1.9e6, 120.0).unwrap();
    assert!((acc - 870.0 * 870.0 * 120.0 / 1.9e6).abs() < 1e-9);
    assert!((acc - 47.8).abs() < 0.05);
    let rec2 = CountRecord::new(Basis::H, Basis::V, 960, 870 * 240, 870 * 240);
    assert!((estimate_accidentals(&rec2, 1.9e6, 240.0).unwrap() - 2.0 * acc).abs() < 1e-9);
    let none = CountRecord::new(Basis::H, Basis::V, 480, 0, 0);
    assert_eq!(estimate_accidentals(&none, 1.9e6, 120.0).unwrap(), 0.0);
}

#[test]
fn subtraction_clamps_at_zero() {
    let records = projection_pairs()
        .map(|(a, b)| {
            let coinc = if (a, b) == (Basis::H, Basis::H) { 10 } else { 480 };
            CountRecord::new(a, b, coinc, 870 * 120, 870 * 120)
        })
        .collect();
    let table = CountTable::new(records, 120.0, 1.9e6).unwrap();
    let corrected = subtract_accidentals(&table);
    let acc = table.record(Basis::H, Basis::V).accidentals;
    assert_eq!(corrected[projection_index(Basis::H, Basis::H)], 0.0);
    assert!((corrected[projection_index(Basis::H, Basis::V)] - (480.0 - acc)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn mle_round_trip_on_noiseless_counts(seed in any::<u64>(), rank in 1usize..=4) {
        let rho = random_state(&mut ChaCha8Rng::seed_from_u64(seed), rank);
        let counts = expected_rates(&rho, 8.0, 0.0, 120.0);
        let rec = mle_reconstruct(&counts, None, &MleOptions::default()).unwrap();
        assert_physical(&rec.state);
        prop_assert!(fidelity(&rho, &rec.state).unwrap() > 0.9999);
    }

    #[test]
    fn mle_output_is_physical_on_noisy_counts(seed in any::<u64>(), rank in 1usize..=4) {
        let rho = random_state(&mut ChaCha8Rng::seed_from_u64(seed), rank);
        let model = CountModel::default();
        let table = sample_counts(&model.expected_counts(&rho), &model, seed).unwrap();
        let rec = mle_reconstruct(&subtract_accidentals(&table), None, &MleOptions::default()).unwrap();
        assert_physical(&rec.state);
    }
}

#[test]
fn uniform_counts_reconstruct_the_maximally_mixed_state() {
    let counts = [100.0; PROJECTIONS];
    let rec = mle_reconstruct(&counts, None, &MleOptions::default()).unwrap();
    let target = DensityMatrix::maximally_mixed();
    assert!((rec.state.matrix() - target.matrix()).norm() < 1e-6);
}

#[test]
fn fidelity_improves_with_acquisition_time() {
    let rho = case_state();
    let medians: Vec<f64> = [30.0, 120.0, 480.0]
        .iter()
        .map(|&t| {
            let model = CountModel {
                pair_rate: CountModel::calibrated_pair_rate(&rho, 4.0).unwrap(),
                acquisition_time: t,
                ..CountModel::default()
            };
            let means = model.expected_counts(&rho);
            let fids = (0..100u64)
                .into_par_iter()
                .map(|seed| {
                    let table = sample_counts(&means, &model, seed).unwrap();
                    let rec = mle_reconstruct(&subtract_accidentals(&table), None, &MleOptions::default()).unwrap();
                    fidelity(&rho, &rec.state).unwrap()
                })
                .collect();
            median(fids)
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] >= w[0]), "{medians:?}");
}

#[test]
fn visibility_limits() {
    let bell_counts = expected_rates(&bell(), 8.0, 0.0, 120.0);
    let mixed = expected_rates(&DensityMatrix::maximally_mixed(), 8.0, 0.0, 120.0);
    for f in [Family::HV, Family::DD, Family::RL] {
        assert!((visibility(&bell_counts, f).unwrap() - 1.0).abs() < 1e-12);
        assert!(visibility(&mixed, f).unwrap().abs() < 1e-12);
    }
    assert!(matches!(visibility(&[0.0; PROJECTIONS], Family::HV), Err(Error::UndefinedVisibility(_))));
}

#[test]
fn count_table_round_trip_and_missing_rows() {
    let model = CountModel::default();
    let table = sample_counts(&model.expected_counts(&case_state()), &model, 7).unwrap();
    let mut buf = Vec::new();
    table.write(&mut buf).unwrap();
    assert_eq!(CountTable::read(buf.as_slice()).unwrap(), table);

    let text = String::from_utf8(buf).unwrap();
    let dropped: String = text
        .lines()
        .filter(|l| !l.starts_with("Dp R "))
        .map(|l| format!("{l}\n"))
        .collect();
    let err = CountTable::read(dropped.as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Format { .. }));
    assert!(err.to_string().contains("(Dp, R)"), "{err}");
}
