mod common;

use common::{assert_physical, brute_force, c, random_amplitudes, random_grid, random_jsa, random_splitter};
use pdc_entangle::dichroic::{SplitterResponse, TransmitSide};
use pdc_entangle::jointstate::{
    apply_degradation, calibrate_edge_split, d_parameter, delay_sweep, density_matrix, diagonal_weights,
    fit_degradation, post_select, DegradationModel, ExchangeKernel, PostSelectedAmplitudes,
};
use pdc_entangle::metrics::purity;
use pdc_entangle::spectral::{build_jsa, FrequencyGrid, PdcModel};
use pdc_entangle::units::{FEMTOSECOND, NANOMETRE};
use pdc_entangle::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn amps_from_seed(seed: u64, n: usize) -> PostSelectedAmplitudes {
    random_amplitudes(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn default_amps(points: usize) -> PostSelectedAmplitudes {
    let grid = FrequencyGrid::window(1535.2 * NANOMETRE, 40.0 * NANOMETRE, points).unwrap();
    let jsa = build_jsa(&PdcModel::default(), &grid).unwrap();
    post_select(&jsa, &SplitterResponse::default()).unwrap()
}

proptest! {
    #[test]
    fn matches_the_quadruple_loop_oracle(seed in any::<u64>(), n in 2usize..=8, tau_ps in -2.0f64..2.0) {
        let amps = amps_from_seed(seed, n);
        let tau = tau_ps * 1e-12;
        let (a, b, d) = brute_force(&amps, tau);
        let (alpha, beta) = diagonal_weights(&amps);
        prop_assert!((alpha - a).abs() < 1e-12 && (beta - b).abs() < 1e-12);
        prop_assert!((alpha + beta - 1.0).abs() < 1e-12);
        let got = d_parameter(&amps, tau).unwrap();
        prop_assert!((got - d).norm() < 1e-12, "{got} vs {d}");
    }

    #[test]
    fn coherence_obeys_cauchy_schwarz(seed in any::<u64>(), n in 2usize..=16, tau_ps in -5.0f64..5.0) {
        let amps = amps_from_seed(seed, n);
        let (alpha, beta) = diagonal_weights(&amps);
        let d = d_parameter(&amps, tau_ps * 1e-12).unwrap();
        prop_assert!(d.norm() <= (alpha * beta).sqrt() * (1.0 + 1e-12) + 1e-15);
        let rho = density_matrix(alpha, beta, d).unwrap();
        assert_physical(&rho);
        prop_assert!((purity(&rho) - (alpha * alpha + beta * beta + 2.0 * d.norm_sqr())).abs() < 1e-12);
    }

    #[test]
    fn delaying_the_signal_shifts_tau(seed in any::<u64>(), n in 2usize..=12, tau_fs in -300.0f64..300.0, delta_fs in -300.0f64..300.0) {
        let amps = amps_from_seed(seed, n);
        let (tau, delta) = (tau_fs * FEMTOSECOND, delta_fs * FEMTOSECOND);
        let grid = *amps.grid();
        let (ns, ni) = grid.shape();
        // both g and h carry the signal photon on their first argument
        let phase = |idx: usize| Complex64::cis(-grid.signal().value(idx / ni) * delta);
        let g = (0..ns * ni).map(|i| amps.g()[i] * phase(i)).collect();
        let h = (0..ns * ni).map(|i| amps.h()[i] * phase(i)).collect();
        let delayed = PostSelectedAmplitudes::from_parts(grid, g, h).unwrap();
        let lhs = d_parameter(&delayed, tau).unwrap();
        let rhs = d_parameter(&amps, tau + delta).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn post_selection_never_amplifies(seed in any::<u64>(), n in 2usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, n);
        let jsa = random_jsa(&mut rng, grid);
        let splitter = random_splitter(&mut rng, &grid);
        let amps = post_select(&jsa, &splitter).unwrap();
        for ((f, g), h) in jsa.amplitude().iter().zip(amps.g()).zip(amps.h()) {
            prop_assert!(g.norm_sqr() <= f.norm_sqr() * (1.0 + 1e-12));
            prop_assert!(h.norm_sqr() <= f.norm_sqr() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn sweep_records_are_consistent_and_unwrapped() {
    let amps = amps_from_seed(5, 12);
    let sweep = delay_sweep(&amps, -2e-12, 2e-12, 2001).unwrap();
    let (alpha, beta) = diagonal_weights(&amps);
    for s in sweep.samples() {
        assert!((s.purity - (s.alpha * s.alpha + s.beta * s.beta + 2.0 * s.d.norm_sqr())).abs() < 1e-12);
        assert_eq!((s.alpha, s.beta), (alpha, beta));
        assert!((Complex64::cis(s.phase) * s.d.norm() - s.d).norm() < 1e-12);
        assert_physical(&density_matrix(s.alpha, s.beta, s.d).unwrap());
    }
    for w in sweep.samples().windows(2) {
        assert!(w[1].tau > w[0].tau);
        if w[0].d.norm() > 1e-6 && w[1].d.norm() > 1e-6 {
            assert!((w[1].phase - w[0].phase).abs() < std::f64::consts::PI);
        }
    }
}

#[test]
fn default_sweep_decays_below_five_percent_at_the_window_edges() {
    let amps = default_amps(512);
    let sweep = delay_sweep(&amps, -400.0 * FEMTOSECOND, 400.0 * FEMTOSECOND, 801).unwrap();
    let peak = sweep.peak().d.norm();
    let s = sweep.samples();
    let (first, last) = (s[0].d.norm(), s[s.len() - 1].d.norm());
    assert!(peak > 0.4, "{peak}");
    assert!(
        first < 0.05 && last < 0.05,
        "|D| at -400 fs = {first:.4}, at +400 fs = {last:.4}; peak {peak:.4} at {:.1} fs",
        sweep.peak().tau / FEMTOSECOND
    );
}

#[test]
fn exchange_kernel_agrees_with_single_delay_evaluation() {
    let amps = default_amps(128);
    let kernel = ExchangeKernel::new(&amps).unwrap();
    let sweep = delay_sweep(&amps, -100.0 * FEMTOSECOND, 100.0 * FEMTOSECOND, 21).unwrap();
    for s in sweep.samples() {
        assert_eq!(kernel.evaluate(s.tau), s.d);
        assert_eq!(d_parameter(&amps, s.tau).unwrap(), s.d);
    }
}

#[test]
fn degradation_round_trip_through_the_fit() {
    let amps = default_amps(128);
    let sweep = delay_sweep(&amps, -400.0 * FEMTOSECOND, 400.0 * FEMTOSECOND, 1601).unwrap();
    for (scale, offset_fs) in [(0.76, 21.25), (0.3, -57.0), (1.0, 0.0), (0.9, 3.1)] {
        let truth = DegradationModel::new(scale, offset_fs * FEMTOSECOND).unwrap();
        let obs: Vec<(f64, Complex64)> = [-40.0, -25.9, 0.0, 25.9, 60.0]
            .iter()
            .map(|t| (t * FEMTOSECOND, truth.evaluate(&sweep, t * FEMTOSECOND).unwrap()))
            .collect();
        let fit = fit_degradation(&sweep, &obs).unwrap();
        assert!((fit.model.amplitude_scale() - scale).abs() < 1e-6);
        assert!((fit.model.time_offset() - offset_fs * FEMTOSECOND).abs() < 0.5 * FEMTOSECOND);
        assert!(fit.cost < 1e-10);
    }
}

#[test]
fn degradation_scales_without_rotating() {
    let amps = default_amps(128);
    let sweep = delay_sweep(&amps, -200.0 * FEMTOSECOND, 200.0 * FEMTOSECOND, 401).unwrap();
    let same = apply_degradation(&sweep, &DegradationModel::identity()).unwrap();
    assert_eq!(same.uncovered, 0);
    for (a, b) in same.sweep.samples().iter().zip(sweep.samples()) {
        assert!((a.d - b.d).norm() < 1e-9);
    }
    let half = apply_degradation(&sweep, &DegradationModel::new(0.5, 0.0).unwrap()).unwrap();
    for (a, b) in half.sweep.samples().iter().zip(sweep.samples()) {
        assert!((a.d.norm() - 0.5 * b.d.norm()).abs() < 1e-12);
        if b.d.norm() > 1e-9 {
            assert!((a.d / a.d.norm() - b.d / b.d.norm()).norm() < 1e-9);
        }
    }
    let lost = apply_degradation(&sweep, &DegradationModel::new(1.0, 1e-12).unwrap()).unwrap();
    assert!(lost.coverage_lost());
}

#[test]
fn measured_values_need_a_reduced_amplitude_and_a_shift() {
    let amps = default_amps(256);
    let sweep = delay_sweep(&amps, -400.0 * FEMTOSECOND, 400.0 * FEMTOSECOND, 1601).unwrap();
    let obs = [
        (0.0, c(0.243, 0.259)),
        (25.9 * FEMTOSECOND, c(0.361, 0.132)),
        (-25.9 * FEMTOSECOND, c(0.097, 0.242)),
    ];
    let fit = fit_degradation(&sweep, &obs).unwrap();
    assert!(fit.model.amplitude_scale() < 1.0);
    assert!(fit.model.time_offset().abs() > 1.0 * FEMTOSECOND);
}

#[test]
fn edge_split_calibration_hits_the_target_weight() {
    let grid = FrequencyGrid::window(1535.2 * NANOMETRE, 40.0 * NANOMETRE, 128).unwrap();
    let jsa = build_jsa(&PdcModel::default(), &grid).unwrap();
    let (center, step, side) = (1535.2 * NANOMETRE, 7.0 * NANOMETRE, TransmitSide::LongWavelengths);
    for target in [0.3, 0.52 / 0.95, 0.7] {
        let split = calibrate_edge_split(&jsa, center, step, side, target, 15.0 * NANOMETRE).unwrap();
        let resp = SplitterResponse::logistic(center + split, center - split, step, side);
        let (alpha, _) = diagonal_weights(&post_select(&jsa, &resp).unwrap());
        assert!((alpha - target).abs() < 1e-9, "{alpha} vs {target}");
    }
    assert!(calibrate_edge_split(&jsa, center, step, side, 0.999, 1.0 * NANOMETRE).is_err());
}
