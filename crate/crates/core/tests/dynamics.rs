use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use qudit_core::atom::{builtin_spec, full_hamiltonian, AtomSpec, FieldConfig};
use qudit_core::dynamics::*;
use qudit_core::effective::{effective_hamiltonian, scattered_photons_bound};
use qudit_core::matrix::{c, ComplexMatrix};
use qudit_core::units::{khz, linspace, mhz};
use qudit_core::{QuditError, C64};

fn yb3() -> AtomSpec {
    builtin_spec("Yb173_3P1").unwrap()
}

fn reference_point() -> FieldConfig {
    FieldConfig::new(500.0, mhz(-3000.0), mhz(15.0), 0.0).unwrap()
}

fn lenient() -> FlipOptions {
    FlipOptions {
        require_feasible: false,
        ..FlipOptions::default()
    }
}

fn at_magic(flip: &FlipTrace) -> FieldConfig {
    FieldConfig {
        theta: flip.theta_star,
        ..reference_point()
    }
}

#[test]
fn reference_flip_transfers_population() {
    let flip = simulate_flip(&yb3(), &reference_point(), -0.5, &lenient()).unwrap();
    assert_eq!(flip.trace.times.len(), 801);
    assert!((flip.trace.times[800] - TAU / flip.raman_rabi).abs() < 1e-15);
    let up = flip.p_upper.iter().cloned().fold(0.0, f64::max);
    assert!(up >= 0.95, "{up}");
    let pe = flip.p_excited.iter().cloned().fold(0.0, f64::max);
    assert!(pe <= 2e-2, "{pe}");
    let leak = flip.leakage.iter().cloned().fold(0.0, f64::max);
    assert!(leak <= 2e-2, "{leak}");
    assert_eq!((flip.lower, flip.upper), (3, 2));
}

#[test]
fn strict_mode_names_the_failed_condition() {
    match simulate_flip(&yb3(), &reference_point(), -0.5, &FlipOptions::default()) {
        Err(QuditError::Infeasible(reason)) => assert!(reason.contains("leakage"), "{reason}"),
        other => panic!("expected infeasible, got {other:?}"),
    }
    let weak = FieldConfig::new(500.0, mhz(-3000.0), 15e6, 0.0).unwrap();
    match simulate_flip(&yb3(), &weak, -0.5, &lenient()) {
        Err(QuditError::Infeasible(reason)) => assert!(reason.contains("magic"), "{reason}"),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn full_propagation_is_unitary_and_conserves_energy() {
    let s = yb3();
    let flip = simulate_flip(&s, &reference_point(), -0.5, &lenient()).unwrap();
    let h = full_hamiltonian(&s, &at_magic(&flip));
    let e0 = h.expectation(&flip.trace.states[0]).re;
    for (n, psi) in flip.trace.norm.iter().zip(&flip.trace.states) {
        assert!((n - 1.0).abs() <= 1e-10);
        let e = h.expectation(psi).re;
        assert!((e - e0).abs() <= 1e-10 * h.spectral_norm());
    }
}

#[test]
fn decay_only_removes_norm() {
    let s = yb3();
    let opts = FlipOptions {
        with_decay: true,
        samples: 4001,
        ..lenient()
    };
    let flip = simulate_flip(&s, &reference_point(), -0.5, &opts).unwrap();
    for w in flip.trace.norm.windows(2) {
        assert!(w[1] <= w[0] + 1e-14);
    }
    let t = &flip.trace.times;
    let norm2: Vec<f64> = flip.trace.norm.iter().map(|n| n * n).collect();
    let (mut raw, mut conditional) = (0.0, 0.0);
    for k in 1..t.len() {
        let dt = t[k] - t[k - 1];
        raw += 0.5 * (flip.p_excited[k] + flip.p_excited[k - 1]) * dt;
        conditional += 0.5 * (flip.p_excited[k] / norm2[k] + flip.p_excited[k - 1] / norm2[k - 1]) * dt;
    }
    let last = norm2[t.len() - 1];
    let expect = (-s.decay_rate * conditional).exp();
    assert!((last - expect).abs() <= 1e-3 * (1.0 - expect), "{last} vs {expect}");
    // unnormalized populations obey the linear balance instead
    let lost = s.decay_rate * raw;
    assert!(((1.0 - last) - lost).abs() <= 1e-3 * lost);
}

#[test]
fn effective_and_full_populations_agree() {
    let s = yb3();
    let flip = simulate_flip(&s, &reference_point(), -0.5, &lenient()).unwrap();
    let model = effective_hamiltonian(&s, &at_magic(&flip)).unwrap();
    let eff = effective_propagate(&model, &basis_state(6, flip.lower), &flip.trace.times).unwrap();
    let mut worst: f64 = 0.0;
    for (full, e) in flip.trace.populations.iter().zip(&eff.populations) {
        for k in 0..6 {
            worst = worst.max((full[k] - e[k]).abs());
        }
    }
    assert!(worst <= 0.05, "{worst}");
}

#[test]
fn effective_flop_runs_at_the_raman_rate() {
    let s = yb3();
    let flip = simulate_flip(&s, &reference_point(), -0.5, &lenient()).unwrap();
    let model = effective_hamiltonian(&s, &at_magic(&flip)).unwrap();
    let times = linspace(0.0, 4.0 * TAU / flip.raman_rabi, 1601);
    let eff = effective_propagate(&model, &basis_state(6, flip.lower), &times).unwrap();
    let diff: Vec<f64> = eff.populations.iter().map(|p| p[flip.lower] - p[flip.upper]).collect();
    let fit = fit_frequency(&times, &diff).unwrap();
    assert!((fit.omega / flip.raman_rabi - 1.0).abs() < 0.05);
}

#[test]
fn undriven_effective_model_is_stationary() {
    let s = yb3();
    let model = effective_hamiltonian(&s, &reference_point()).unwrap();
    let psi: Vec<C64> = (0..6).map(|k| c(if k < 2 { 0.5f64.sqrt() } else { 0.0 }, 0.0)).collect();
    let tr = effective_propagate(&model, &psi, &linspace(0.0, 1e-4, 21)).unwrap();
    for p in &tr.populations {
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }
    // the relative phase still evolves
    let last = &tr.states[20];
    assert!((last[0] * last[1].conj() - c(0.5, 0.0)).norm() > 1e-3);
}

#[test]
fn reference_validation_passes() {
    let (report, flip) = validate_effective(&yb3(), &reference_point(), -0.5, 3.0, &lenient()).unwrap();
    assert!(report.relative_deviation <= MAX_DEVIATION, "{}", report.relative_deviation);
    assert!(report.max_p_e <= MAX_EXCITED);
    assert!(report.max_leakage <= MAX_LEAKAGE);
    assert!(report.pass);
    assert_eq!(report.verdict(), "pass");
    assert!(flip.trace.times.len() >= 600);
    assert!(report.max_p_e_trace >= report.max_p_e);
    let expect = scattered_photons_bound(&yb3(), report.max_p_e, report.raman_rabi_predicted / TAU).unwrap();
    assert_eq!(report.n_sc_estimate, expect);
}

#[test]
fn scattering_estimate_example() {
    let n = scattered_photons_bound(&yb3(), 0.01, 1e5).unwrap();
    assert!((n - 0.115).abs() < 1e-3, "{n}");
}

#[test]
fn non_oscillatory_signal_fails_the_fit() {
    let t = linspace(0.0, 1.0, 64);
    assert!(matches!(fit_frequency(&t, &[0.3; 64]), Err(QuditError::FitFailed(_))));
    assert!(fit_frequency(&t[..4], &[0.0, 1.0, 0.0, 1.0]).is_err());
}

#[test]
fn rejects_unnormalized_state() {
    let h = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
    let err = propagate(&h, &[c(0.9, 0.0), c(0.0, 0.0)], &[0.0], None).unwrap_err();
    assert!(matches!(err, QuditError::NotNormalized(_)));
}

#[test]
fn resonant_two_level_transfers_at_pi_over_omega() {
    let w = khz(80.0);
    let mut h = ComplexMatrix::zeros(2);
    h[(0, 1)] = c(w / 2.0, 0.0);
    h[(1, 0)] = c(w / 2.0, 0.0);
    let tr = propagate(&h, &basis_state(2, 0), &[PI / w], None).unwrap();
    assert!((tr.populations[0][1] - 1.0).abs() < 1e-12);
}

fn random_state(parts: &[f64]) -> Vec<C64> {
    let v: Vec<C64> = parts.chunks(2).map(|p| c(p[0], p[1])).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagators_compose(parts in prop::collection::vec(-1.0f64..1.0, 48), t1 in 0.0f64..5e-6, t2 in 0.0f64..5e-6) {
        prop_assume!(parts.iter().any(|x| x.abs() > 0.1));
        let h = full_hamiltonian(&yb3(), &FieldConfig::new(500.0, mhz(-3000.0), mhz(15.0), 0.67).unwrap());
        let psi = random_state(&parts);
        let a = propagate(&h, &psi, &[t1], None).unwrap();
        let b = propagate(&h, &a.states[0], &[t2], None).unwrap();
        let direct = propagate(&h, &psi, &[t1 + t2], None).unwrap();
        for (x, y) in b.states[0].iter().zip(&direct.states[0]) {
            prop_assert!((x - y).norm() <= 1e-10);
        }
    }

    #[test]
    fn fit_recovers_synthetic_frequency(f in 20.0f64..200.0, phase in 0.0f64..TAU, amp in 0.2f64..1.0, off in -0.5f64..0.5) {
        let w = TAU * f * 1e3;
        let times = linspace(0.0, 8.0 * TAU / w, 1201);
        let y: Vec<f64> = times.iter().map(|t| off + amp * (w * t + phase).cos()).collect();
        let fit = fit_frequency(&times, &y).unwrap();
        prop_assert!((fit.omega / w - 1.0).abs() <= 1e-6);
        prop_assert!((fit.amplitude - amp).abs() <= 1e-6);
    }
}
