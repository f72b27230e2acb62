//! Acceptance suite. Prints one line per criterion and exits non-zero if a
//! criterion fails that is not listed in `KNOWN_RED`.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::process::ExitCode;
use std::time::Instant;

use qudit_core::atom::*;
use qudit_core::dynamics::{propagate, basis_state, validate_effective, FlipOptions, MAX_DEVIATION, MAX_EXCITED, MAX_LEAKAGE};
use qudit_core::effective::{effective_hamiltonian, ExcitedResolvent, DELTA_FLOOR};
use qudit_core::matrix::commutator;
use qudit_core::phase::{scan_phase_rates, PhasePolarization};
use qudit_core::raman::*;
use qudit_core::readout::{scan_readout, Addressing};
use qudit_core::units::{arange, ghz, hz, khz, linspace, logspace, mhz, to_khz};
use qudit_core::universality::*;
use qudit_core::Execution;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Criteria that cannot be met with the given constants; they stay red.
const KNOWN_RED: [&str; 3] = ["1", "S1", "S2"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn yb3() -> AtomSpec {
    builtin_spec("Yb173_3P1").unwrap()
}

fn yb1() -> AtomSpec {
    builtin_spec("Yb173_1P1").unwrap()
}

fn reference_point() -> FieldConfig {
    FieldConfig::new(500.0, mhz(-3000.0), mhz(15.0), 0.0).unwrap()
}

fn one_significant_figure(x: f64) -> f64 {
    let e = x.abs().log10().floor();
    let p = 10f64.powf(e);
    (x / p).round() * p
}

fn conversion_table() -> Outcome {
    let s = yb3();
    let mut ok = true;
    let mut parts = Vec::new();
    for (f, expect) in [(10.0, 0.02), (20.0, 0.08), (40.0, 0.3)] {
        let i = rabi_to_intensity(&s, mhz(f));
        let hit = (one_significant_figure(i) - expect).abs() < 1e-12;
        ok &= hit;
        parts.push(format!("{f} MHz -> {i:.4} W/cm2 (table {expect})"));
    }
    // the tabulated values are reproduced if the drive is read in rad/s without 2π
    let bare: Vec<String> = [10.0, 20.0, 40.0]
        .iter()
        .map(|f| format!("{:.4}", rabi_to_intensity(&s, f * 1e6)))
        .collect();
    outcome(ok, format!("{}; same formula at 1e7, 2e7, 4e7 rad/s: {}", parts.join(", "), bare.join(", ")))
}

fn five_diagonal() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let specs = [yb3(), yb1()];
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 100 {
        let s = &specs[n % 2];
        let b = rng.random_range(50.0..2000.0);
        let mean = -shifted_detuning(s, b, 0.0);
        let delta = mean + ghz(rng.random_range(-5.0..5.0));
        if ExcitedResolvent::new(s, b).min_detuning(delta) <= DELTA_FLOOR {
            continue;
        }
        let cfg = FieldConfig::new(b, delta, mhz(rng.random_range(1.0..100.0)), rng.random_range(0.0..FRAC_PI_2)).unwrap();
        let h = effective_hamiltonian(s, &cfg).unwrap().h_eff;
        let norm = h.spectral_norm();
        for r in 0..6usize {
            for c in 0..6usize {
                if r.abs_diff(c) > 2 {
                    worst = worst.max(h[(r, c)].norm() / norm);
                }
            }
        }
        n += 1;
    }
    outcome(worst <= 1e-12, format!("100 samples, max |h_rc|/||h|| beyond second diagonal = {worst:.2e}"))
}

fn magic_angle_reference() -> Outcome {
    let m = effective_hamiltonian(&yb3(), &reference_point()).unwrap();
    let r = magic_angle(&m, -0.5).unwrap();
    let Some(theta) = r.theta_star else {
        return outcome(false, format!("no magic angle: {:?}", r.reason));
    };
    let numeric = numeric_magic_angle(&m, -0.5).unwrap();
    let residual = r.residual.unwrap();
    let gap = (theta - numeric).abs();
    outcome(
        residual <= hz(1.0) && gap <= 1e-8,
        format!("theta* = {theta:.10} rad, residual = {residual:.2e} rad/s, |closed - numeric| = {gap:.1e} rad"),
    )
}

fn full_dynamics() -> Outcome {
    let opts = FlipOptions {
        require_feasible: false,
        ..FlipOptions::default()
    };
    let (rep, flip) = validate_effective(&yb3(), &reference_point(), -0.5, 3.0, &opts).unwrap();
    let up = flip.p_upper.iter().cloned().fold(0.0, f64::max);
    outcome(
        rep.relative_deviation <= MAX_DEVIATION && rep.max_p_e <= MAX_EXCITED && rep.max_leakage <= MAX_LEAKAGE && up >= 0.95,
        format!(
            "fitted {:.1} kHz vs Omega_R {:.1} kHz (dev {:.3}), max p_E {:.2e}, leakage {:.2e}, max upper {:.3}",
            to_khz(rep.fitted_flip_frequency),
            to_khz(rep.raman_rabi_predicted),
            rep.relative_deviation,
            rep.max_p_e,
            rep.max_leakage,
            up
        ),
    )
}

fn gate_speeds() -> Outcome {
    let s = yb3();
    let fields = arange(500.0, 1000.0 + 1.0, 25.0);
    let cells = scan_feasibility_map(
        &s,
        &fields,
        &DetuningGrid::default(),
        &default_rabi_grid(),
        &transitions(&s),
        &Thresholds::default(),
        Execution::Parallel,
    )
    .unwrap();
    let fast_fields = fields
        .iter()
        .filter(|b| {
            cells
                .iter()
                .any(|c| c.b_gauss == **b && c.best.as_ref().is_some_and(|r| r.feasible && r.raman_rabi >= khz(100.0)))
        })
        .count();
    let best = cells
        .iter()
        .filter_map(|c| c.best.as_ref())
        .filter(|r| r.feasible)
        .map(|r| r.raman_rabi)
        .fold(0.0, f64::max);
    let grid = DetuningGrid::default().at(&s, 500.0);
    let phase = scan_phase_rates(&s, 500.0, &grid, 1e-2, PhasePolarization::Parallel, Execution::Parallel).unwrap();
    let shift = phase.iter().map(|p| p.max_abs_shift()).fold(0.0, f64::max);
    outcome(
        fast_fields == fields.len() && shift >= khz(100.0),
        format!(
            "Omega_R >= 100 kHz at {fast_fields}/{} fields (best {:.1} kHz); max |S_m| at 500 G = {:.1} kHz",
            fields.len(),
            to_khz(best),
            to_khz(shift)
        ),
    )
}

fn universality() -> Outcome {
    let s = yb3();
    let points = points_from_scans(&s, 500.0, &Thresholds::default(), Execution::Parallel).unwrap();
    let set = build_control_set(&s, 500.0, &points).unwrap();
    let report = lie_closure(&set.matrices(), CLOSURE_TOLERANCE).unwrap();
    let phi = &set.phase().unwrap().matrix;
    let mut worst: f64 = 0.0;
    for t in transitions(&s) {
        let j = pair_index(&s, t).unwrap();
        let iso = isolate_coupling(&set.flip(t).unwrap().matrix, phi, j).unwrap().matrix;
        let a = iso[(j, j + 1)].norm();
        for r in 0..6 {
            for c in 0..6 {
                if (r, c) != (j, j + 1) && (r, c) != (j + 1, j) {
                    worst = worst.max(iso[(r, c)].norm() / a);
                }
            }
        }
    }
    outcome(
        report.dimension == 35 && worst <= 1e-8,
        format!(
            "closure dimension {} (history {:?}), isolation off-target {:.1e}",
            report.dimension, report.basis_rank_history, worst
        ),
    )
}

fn readout_regimes() -> Outcome {
    let fields = linspace(100.0, 1000.0, 19);
    let s1 = yb1();
    let singlet = scan_readout(
        &s1,
        &fields,
        &logspace(mhz(0.5), mhz(50.0), 41),
        &Addressing::for_spec(&s1),
        0.0,
        Execution::Parallel,
    )
    .unwrap();
    let hit1 = singlet.iter().find(|p| {
        let rd = p.r_d / s1.decay_rate;
        p.contrast >= 10f64.powf(1.5) && p.contrast <= 1e3 && p.r_b > mhz(1.0) && (1e-4..=1e-2).contains(&rd)
    });
    let s3 = yb3();
    let triplet = scan_readout(
        &s3,
        &fields,
        &logspace(khz(10.0), mhz(10.0), 31),
        &Addressing::for_spec(&s3),
        0.0,
        Execution::Parallel,
    )
    .unwrap();
    let hit3 = triplet
        .iter()
        .find(|p| p.contrast >= 1e5 && p.r_d / s3.decay_rate <= 1e-5 && p.r_b <= s3.decay_rate / 2.0);
    let describe = |p: Option<&qudit_core::readout::ReadoutPoint>, g: f64| match p {
        Some(p) => format!(
            "B={} G, Omega={:.2} MHz: R_B={:.1} kHz, C={:.3e}, R_D/Gamma={:.1e}",
            p.b_gauss,
            p.rabi / TAU / 1e6,
            to_khz(p.r_b),
            p.contrast,
            p.r_d / g
        ),
        None => "no cell".into(),
    };
    outcome(
        hit1.is_some() && hit3.is_some(),
        format!(
            "1P1 {}; 3P1 {}",
            describe(hit1, s1.decay_rate),
            describe(hit3, s3.decay_rate)
        ),
    )
}

fn structural_invariants() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let specs = [yb3(), yb1()];
    let mut herm: f64 = 0.0;
    let mut fz: f64 = 0.0;
    let mut stretched: f64 = 0.0;
    for s in &specs {
        for _ in 0..20 {
            let cfg = FieldConfig::new(
                rng.random_range(0.0..2000.0),
                ghz(rng.random_range(-5.0..5.0)),
                mhz(rng.random_range(0.0..100.0)),
                rng.random_range(0.0..FRAC_PI_2),
            )
            .unwrap();
            let h = full_hamiltonian(s, &cfg);
            herm = herm.max(h.hermiticity_error() / h.max_abs());
            let h0 = &h_zeeman(s, cfg.b_gauss) + &h_hyperfine(s);
            fz = fz.max(commutator(&h0, &f_z(s)).unwrap().max_abs() / h0.max_abs());
        }
        let top = s.nuclear_spin.value();
        for b in linspace(0.0, 2000.0, 81) {
            let he = excited_hamiltonian(s, b, 0.0);
            for (m_j, m_i) in [(1, top), (-1, -top)] {
                let k = s.excited_index(m_j, s.nuc_index(m_i).unwrap());
                let r: f64 = (0..he.dim())
                    .filter(|&r| r != k)
                    .map(|r| he[(r, k)].norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                stretched = stretched.max(r / he.spectral_norm());
            }
        }
    }
    let mut far: f64 = 0.0;
    for b in [100.0, 500.0, 2000.0] {
        for d in [ghz(-3000.0), ghz(-1000.0), ghz(1000.0), ghz(3000.0)] {
            let m = effective_hamiltonian(&specs[0], &FieldConfig::new(b, d, mhz(10.0), 0.0).unwrap()).unwrap();
            for sz in &m.s_z {
                far = far.max((sz * d + 1.0).abs());
            }
        }
    }
    let h = full_hamiltonian(&specs[0], &FieldConfig { theta: 0.67, ..reference_point() });
    let tr = propagate(&h, &basis_state(24, 3), &linspace(0.0, 2e-5, 201), None).unwrap();
    let norm = tr.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        herm <= 1e-12 && fz <= 1e-12 && stretched <= 1e-10 && far <= 1e-2 && norm <= 1e-10,
        format!(
            "hermiticity {herm:.1e}, [H0,F_z] {fz:.1e}, stretched residual {stretched:.1e}, far-detuned {far:.1e}, norm {norm:.1e}"
        ),
    )
}

fn paschen_back_limit() -> Outcome {
    let (global, pairwise) = product_basis_mixing(&yb3(), 1e5);
    outcome(
        pairwise < 1e-2,
        format!("at 1e5 G: max |H_rc|/|H_rr - H_cc| = {pairwise:.4}, Frobenius ratio = {global:.4}"),
    )
}

fn reference_leakage_bound() -> Outcome {
    let m = effective_hamiltonian(&yb3(), &reference_point()).unwrap();
    let theta = magic_angle(&m, -0.5).unwrap().theta_star.unwrap();
    let (_, max) = leakage_bounds(&m, -0.5, theta).unwrap();
    outcome(max <= 1e-2, format!("leakage_max = {max:.3e} at theta* = {theta:.4}"))
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1", "Rabi frequency to intensity table", conversion_table),
        ("2", "five-diagonal effective Hamiltonian", five_diagonal),
        ("3", "magic angle at the reference point", magic_angle_reference),
        ("4", "full vs effective dynamics", full_dynamics),
        ("5", "gate speeds", gate_speeds),
        ("6", "universality", universality),
        ("7", "readout regimes", readout_regimes),
        ("8", "structural invariants", structural_invariants),
        ("S1", "product-basis mixing below 1e-2 at 1e5 G", paschen_back_limit),
        ("S2", "leakage bound at the reference point", reference_leakage_bound),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let known = KNOWN_RED.contains(&id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known unattainable)",
            (false, false) => "FAIL",
        };
        if !o.pass && !known {
            unexpected += 1;
        }
        println!(
            "criterion {id:>2} {tag}: {name} [{:.2} s] {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    }
}
