//! One function per subcommand. Each returns its output and whether the
//! result is feasible; only the caller decides exit codes and file paths.

use std::f64::consts::TAU;

use qudit_core::atom::{AtomSpec, FieldConfig};
use qudit_core::breit_rabi::{breit_rabi, Manifold};
use qudit_core::dynamics::{validate_effective, FlipOptions, FlipTrace, MAX_DEVIATION, MAX_EXCITED, MAX_LEAKAGE};
use qudit_core::effective::{ExcitedResolvent, DELTA_FLOOR};
use qudit_core::phase::{scan_phase_rates, summarize_phase_vs_b};
use qudit_core::raman::{
    evaluate_point, scan_feasibility_map, scan_phase_diagram, summarize_vs_b,
    MINIMIZER_TOLERANCE, RESIDUAL_TOLERANCE,
};
use qudit_core::readout::scan_readout;
use qudit_core::units::{self, mhz, to_khz, to_mhz};
use qudit_core::universality::{
    build_control_set, isolate_coupling, lie_closure, pair_index, points_from_scans, GeneratorKind, OperatingPoint,
    CLOSURE_TOLERANCE, DISTINCTNESS_TOLERANCE,
};
use qudit_core::{atom, Execution, QuditError};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, Output, Table};

pub struct Outcome {
    pub output: Output,
    /// Operating point or result fails its acceptance conditions.
    pub infeasible: Option<String>,
}

impl Outcome {
    fn ok(output: Output) -> Self {
        Self { output, infeasible: None }
    }
}

/// Half-integer label such as `+5/2`, `-1/2` or `0`.
pub fn half_label(x: f64) -> String {
    let twice = (2.0 * x).round() as i64;
    let sign = if twice > 0 { "+" } else { "" };
    if twice % 2 == 0 {
        format!("{sign}{}", twice / 2)
    } else {
        format!("{sign}{twice}/2")
    }
}

fn hz(w: f64) -> f64 {
    w / TAU
}

/// Single-point commands refuse detunings inside the singular floor rather
/// than reporting them as infeasible.
fn require_regular(spec: &AtomSpec, point: &FieldConfig) -> Result<(), CliError> {
    let delta_min = ExcitedResolvent::new(spec, point.b_gauss).min_detuning(point.detuning);
    if delta_min <= DELTA_FLOOR {
        return Err(QuditError::SingularExcitedManifold {
            delta_min,
            floor: DELTA_FLOOR,
        }
        .into());
    }
    Ok(())
}

pub fn breit_rabi_table(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let curves = breit_rabi(&spec, &cfg.breit_rabi_grid())?;
    let mut t = Table::new([
        "B_gauss",
        "level_label",
        "manifold",
        "m_F",
        "energy_MHz",
        "dominant_mJ",
        "dominant_mI",
        "dominant_weight",
    ]);
    for c in curves.curves() {
        let manifold = match c.manifold {
            Manifold::Ground => "ground",
            Manifold::Excited => "excited",
        };
        for ((b, e), ch) in curves.field_grid.iter().zip(&c.energies).zip(&c.characters) {
            t.push(vec![
                (*b).into(),
                c.label.as_str().into(),
                manifold.into(),
                c.m_f.into(),
                to_mhz(*e).into(),
                ch.m_j.into(),
                ch.m_i.into(),
                ch.weight.into(),
            ]);
        }
    }
    Ok(Outcome::ok(Output::Table(t)))
}

pub fn magic_angle_report(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let point = cfg.point()?;
    require_regular(&spec, &point)?;
    let th = cfg.thresholds();
    let rec = evaluate_point(&spec, &point, cfg.point.transition, &th)?;
    let m = &rec.magic;
    let report = json!({
        "spec": spec.label,
        "transition_mI": cfg.point.transition,
        "transition_label": format!("{} <-> {}", half_label(cfg.point.transition), half_label(cfg.point.transition + 1.0)),
        "B_gauss": point.b_gauss,
        "detuning_MHz": to_mhz(point.detuning),
        "shifted_detuning_MHz": to_mhz(rec.cell.shifted_detuning),
        "rabi_MHz": to_mhz(point.rabi),
        "magic_exists": m.exists,
        "theta_star_rad": m.theta_star,
        "theta_star_deg": m.theta_star.map(f64::to_degrees),
        "sin2_theta_star": m.sin2,
        "residual_Hz": m.residual.map(hz),
        "raman_rabi_kHz": to_khz(rec.raman_rabi),
        "delta_min_MHz": to_mhz(rec.delta_min),
        "p_e_bound": rec.p_e_bound,
        "leakage_max": rec.leakage_max,
        "p_max": th.p_max,
        "leak_max": th.leak_max,
        "feasible": rec.feasible,
        "reason": rec.reason,
    });
    Ok(Outcome {
        output: Output::Report(report),
        infeasible: (!rec.feasible).then(|| rec.reason.clone().unwrap_or_else(|| "infeasible".into())),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum RamanView {
    /// Best drive per `(B, Δ, transition)` cell.
    Cells,
    /// Every `(B, Δ, Ω_E, transition)` record.
    Records,
    /// Per-field medians of the Raman frequency.
    Summary,
}

pub fn scan_raman(cfg: &RunConfig, view: RamanView, exec: Execution) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let (bs, grid, rabi, trans, th) = (cfg.b_grid(), cfg.detuning_grid(), cfg.rabi_grid(), cfg.transitions(&spec)?, cfg.thresholds());
    let mut t;
    match view {
        RamanView::Records => {
            let recs = scan_phase_diagram(&spec, &bs, &grid, &rabi, &trans, &th, exec)?;
            t = Table::new([
                "B_gauss",
                "detuning_MHz",
                "shifted_detuning_MHz",
                "rabi_MHz",
                "transition_mI",
                "magic_exists",
                "theta_star_rad",
                "residual_Hz",
                "raman_rabi_kHz",
                "delta_min_MHz",
                "p_e_bound",
                "leakage_max",
                "feasible",
                "reason",
            ]);
            for r in recs {
                t.push(vec![
                    r.cell.b_gauss.into(),
                    to_mhz(r.cell.detuning).into(),
                    to_mhz(r.cell.shifted_detuning).into(),
                    to_mhz(r.cell.rabi).into(),
                    r.cell.transition.into(),
                    r.magic.exists.into(),
                    r.magic.theta_star.into(),
                    r.magic.residual.map(hz).into(),
                    to_khz(r.raman_rabi).into(),
                    to_mhz(r.delta_min).into(),
                    r.p_e_bound.into(),
                    r.leakage_max.into(),
                    r.feasible.into(),
                    r.reason.into(),
                ]);
            }
        }
        RamanView::Cells | RamanView::Summary => {
            let cells = scan_feasibility_map(&spec, &bs, &grid, &rabi, &trans, &th, exec)?;
            if view == RamanView::Summary {
                t = Table::new([
                    "B_gauss",
                    "median_of_medians_kHz",
                    "median_of_maxima_kHz",
                    "min_rabi_for_magic_MHz",
                    "feasible_cells",
                    "empty",
                ]);
                for s in summarize_vs_b(&cells) {
                    t.push(vec![
                        s.b_gauss.into(),
                        s.median_of_medians.map(to_khz).into(),
                        s.median_of_maxima.map(to_khz).into(),
                        s.min_rabi_for_magic.map(to_mhz).into(),
                        s.feasible_cells.into(),
                        s.empty.into(),
                    ]);
                }
            } else {
                t = Table::new([
                    "B_gauss",
                    "detuning_MHz",
                    "shifted_detuning_MHz",
                    "transition_mI",
                    "feasible",
                    "feasible_rabi_count",
                    "min_rabi_for_magic_MHz",
                    "best_rabi_MHz",
                    "best_theta_star_rad",
                    "best_raman_rabi_kHz",
                    "best_p_e_bound",
                    "best_leakage_max",
                ]);
                for c in cells {
                    let best = c.best.as_ref();
                    t.push(vec![
                        c.b_gauss.into(),
                        to_mhz(c.detuning).into(),
                        to_mhz(c.shifted_detuning).into(),
                        c.transition.into(),
                        c.feasible.into(),
                        c.feasible_count.into(),
                        c.min_rabi_for_magic.map(to_mhz).into(),
                        best.map(|r| to_mhz(r.cell.rabi)).into(),
                        best.and_then(|r| r.magic.theta_star).into(),
                        best.map(|r| to_khz(r.raman_rabi)).into(),
                        best.map(|r| r.p_e_bound).into(),
                        best.map(|r| r.leakage_max).into(),
                    ]);
                }
            }
        }
    }
    Ok(Outcome::ok(Output::Table(t)))
}

pub fn scan_phase(cfg: &RunConfig, summary: bool, exec: Execution) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let grid = cfg.detuning_grid();
    let pol = cfg.polarization();
    let per_b: Vec<_> = exec
        .map(&cfg.b_grid(), |&b| {
            scan_phase_rates(&spec, b, &grid.at(&spec, b), cfg.thresholds.p_max, pol, Execution::Sequential)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let profiles: Vec<_> = per_b.into_iter().flatten().collect();
    let mut t;
    if summary {
        t = Table::new([
            "B_gauss",
            "median_of_medians_kHz",
            "median_of_maxima_kHz",
            "rabi_median_of_medians_MHz",
            "rabi_median_of_maxima_MHz",
            "feasible_profiles",
            "empty",
        ]);
        for s in summarize_phase_vs_b(&profiles) {
            t.push(vec![
                s.b_gauss.into(),
                s.median_of_medians.map(to_khz).into(),
                s.median_of_maxima.map(to_khz).into(),
                s.rabi_median_of_medians.map(to_mhz).into(),
                s.rabi_median_of_maxima.map(to_mhz).into(),
                s.feasible_profiles.into(),
                s.empty.into(),
            ]);
        }
    } else {
        let mut cols: Vec<String> = ["B_gauss", "detuning_MHz", "shifted_detuning_MHz", "delta_min_MHz", "rabi_max_MHz"]
            .map(String::from)
            .to_vec();
        for k in 0..spec.nuc_dim() {
            cols.push(format!("S_mI={}_kHz", half_label(spec.m_i(k))));
        }
        cols.extend(["max_abs_shift_kHz", "dominant_mI", "feasible"].map(String::from));
        t = Table::new(cols);
        for p in profiles {
            let mut row: Vec<Cell> = vec![
                p.b_gauss.into(),
                to_mhz(p.detuning).into(),
                to_mhz(p.shifted_detuning).into(),
                to_mhz(p.delta_min).into(),
                to_mhz(p.rabi_max).into(),
            ];
            row.extend(p.shifts.iter().map(|s| Cell::from(to_khz(*s))));
            row.push(to_khz(p.max_abs_shift()).into());
            row.push(p.dominant_level.into());
            row.push(p.feasible.into());
            t.push(row);
        }
    }
    Ok(Outcome::ok(Output::Table(t)))
}

pub fn scan_readout_table(cfg: &RunConfig, exec: Execution) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let addr = cfg.addressing(&spec);
    let points = scan_readout(
        &spec,
        &cfg.readout_b_grid(),
        &cfg.readout_rabi_grid(),
        &addr,
        mhz(cfg.readout.probe_detuning_mhz),
        exec,
    )?;
    let mut t = Table::new([
        "B_gauss",
        "rabi_MHz",
        "probe_detuning_MHz",
        "transition",
        "polarization",
        "addressed_mJ",
        "addressed_mI",
        "R_B_per_s",
        "R_D_per_s",
        "R_B_over_Gamma",
        "R_D_over_Gamma",
        "contrast",
        "dominant_dark_mI",
        "dominant_dark_mF",
        "dominant_dark_detuning_MHz",
    ]);
    let gamma = spec.decay_rate;
    for p in points {
        let dom = p.dominant();
        t.push(vec![
            p.b_gauss.into(),
            to_mhz(p.rabi).into(),
            to_mhz(p.probe_detuning).into(),
            p.transition.as_str().into(),
            format!("{:?}", p.addressed.polarization).into(),
            p.addressed.m_j.into(),
            p.addressed.m_i.into(),
            p.r_b.into(),
            p.r_d.into(),
            (p.r_b / gamma).into(),
            (p.r_d / gamma).into(),
            p.contrast.into(),
            dom.map(|c| c.ground_m_i).into(),
            dom.map(|c| c.excited_m_f).into(),
            dom.map(|c| to_mhz(c.detuning)).into(),
        ]);
    }
    Ok(Outcome::ok(Output::Table(t)))
}

fn flip_options(cfg: &RunConfig) -> FlipOptions {
    FlipOptions {
        samples: cfg.dynamics.samples,
        with_decay: cfg.dynamics.with_decay,
        require_feasible: cfg.dynamics.require_feasible,
        thresholds: cfg.thresholds(),
        ..FlipOptions::default()
    }
}

pub fn validate_report(cfg: &RunConfig) -> Result<(Outcome, FlipTrace), CliError> {
    let spec = cfg.spec()?;
    let point = cfg.point()?;
    require_regular(&spec, &point)?;
    let (r, flip) = validate_effective(&spec, &point, cfg.point.transition, cfg.dynamics.periods, &flip_options(cfg))?;
    let report = json!({
        "spec": spec.label,
        "transition_mI": r.transition,
        "B_gauss": point.b_gauss,
        "detuning_MHz": to_mhz(point.detuning),
        "rabi_MHz": to_mhz(point.rabi),
        "theta_star_rad": r.theta_star,
        "theta_star_deg": r.theta_star.to_degrees(),
        "fitted_flip_frequency_kHz": to_khz(r.fitted_flip_frequency),
        "raman_rabi_predicted_kHz": to_khz(r.raman_rabi_predicted),
        "relative_deviation": r.relative_deviation,
        "max_p_e": r.max_p_e,
        "max_leakage": r.max_leakage,
        "max_p_e_trace": r.max_p_e_trace,
        "max_leakage_trace": r.max_leakage_trace,
        "n_sc_estimate": r.n_sc_estimate,
        "with_decay": cfg.dynamics.with_decay,
        "limits": {
            "relative_deviation": MAX_DEVIATION,
            "p_e": MAX_EXCITED,
            "leakage": MAX_LEAKAGE,
        },
        "verdict": r.verdict(),
    });
    let outcome = Outcome {
        output: Output::Report(report),
        infeasible: (!r.pass).then(|| "validation failed".to_string()),
    };
    Ok((outcome, flip))
}

pub fn trace_table(flip: &FlipTrace) -> Table {
    let mut t = Table::new(["time_us", "p_lower", "p_upper", "p_excited", "leakage", "norm"]);
    for k in 0..flip.trace.times.len() {
        t.push(vec![
            (flip.trace.times[k] * 1e6).into(),
            flip.p_lower[k].into(),
            flip.p_upper[k].into(),
            flip.p_excited[k].into(),
            flip.leakage[k].into(),
            flip.trace.norm[k].into(),
        ]);
    }
    t
}

fn off_target(m: &qudit_core::ComplexMatrix, j: usize) -> f64 {
    let a = m[(j, j + 1)].norm();
    let mut worst: f64 = 0.0;
    for r in 0..m.dim() {
        for c in 0..m.dim() {
            if (r, c) != (j, j + 1) && (r, c) != (j + 1, j) {
                worst = worst.max(m[(r, c)].norm());
            }
        }
    }
    worst / a
}

pub fn universality_report(cfg: &RunConfig, exec: Execution) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let b = cfg.point.b_gauss;
    let points = points_from_scans(&spec, b, &cfg.thresholds(), exec)?;
    let set = build_control_set(&spec, b, &points)?;
    let closure = lie_closure(&set.matrices(), CLOSURE_TOLERANCE)?;
    let target = spec.nuc_dim() * spec.nuc_dim() - 1;
    let generators: Vec<Value> = set
        .generators
        .iter()
        .map(|g| {
            let kind = match g.kind {
                GeneratorKind::Flip { transition, theta } => json!({
                    "kind": "flip",
                    "transition_mI": transition,
                    "theta_rad": theta,
                }),
                GeneratorKind::Phase { id } => json!({"kind": "phase", "id": id}),
            };
            json!({
                "generator": kind,
                "detuning_MHz": to_mhz(g.cfg.detuning),
                "rabi_MHz": to_mhz(g.cfg.rabi),
            })
        })
        .collect();
    let mut isolation = Vec::new();
    if let Some(phi) = set.phase() {
        for p in &points {
            if let OperatingPoint::Flip { transition, .. } = p {
                let j = pair_index(&spec, *transition)?;
                if let Some(g) = set.flip(*transition) {
                    let iso = isolate_coupling(&g.matrix, &phi.matrix, j)?;
                    isolation.push(json!({
                        "transition_mI": transition,
                        "polynomial_degree": iso.degree,
                        "off_target_ratio": off_target(&iso.matrix, j),
                    }));
                }
            }
        }
    }
    let universal = closure.dimension == target;
    let report = json!({
        "spec": spec.label,
        "B_gauss": b,
        "target_dimension": target,
        "dimension": closure.dimension,
        "converged": closure.converged,
        "basis_rank_history": closure.basis_rank_history,
        "closure_tolerance": closure.tolerance,
        "distinctness_tolerance": DISTINCTNESS_TOLERANCE,
        "generators": generators,
        "isolation": isolation,
        "universal": universal,
    });
    Ok(Outcome {
        output: Output::Report(report),
        infeasible: (!universal).then(|| format!("closure dimension {} below {target}", closure.dimension)),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Quantity {
    /// Electronic Rabi frequency Ω_E/2π, MHz.
    Rabi,
    /// Peak intensity, W/cm².
    Intensity,
    /// Gaussian-beam power, W (needs a waist).
    Power,
}

impl Quantity {
    fn unit(self) -> &'static str {
        match self {
            Quantity::Rabi => "MHz",
            Quantity::Intensity => "W/cm^2",
            Quantity::Power => "W",
        }
    }
}

pub fn convert(cfg: &RunConfig, value: f64, from: Quantity, to: Quantity, waist_um: Option<f64>) -> Result<Outcome, CliError> {
    if !value.is_finite() || value < 0.0 {
        return Err(CliError::Config(format!("cannot convert {value}")));
    }
    let spec = cfg.spec()?;
    let waist = || -> Result<f64, CliError> {
        match waist_um {
            Some(w) if w.is_finite() && w > 0.0 => Ok(w * 1e-6),
            _ => Err(CliError::Config("power conversions need a positive --waist-um".into())),
        }
    };
    let intensity = match from {
        Quantity::Rabi => atom::rabi_to_intensity(&spec, mhz(value)),
        Quantity::Intensity => value,
        Quantity::Power => value / atom::power_for_waist(1.0, waist()?),
    };
    let out = match to {
        Quantity::Rabi => to_mhz(atom::intensity_to_rabi(&spec, intensity)),
        Quantity::Intensity => intensity,
        Quantity::Power => atom::power_for_waist(intensity, waist()?),
    };
    let report = json!({
        "spec": spec.label,
        "input": value,
        "input_unit": from.unit(),
        "output": out,
        "output_unit": to.unit(),
        "waist_um": waist_um,
    });
    Ok(Outcome::ok(Output::Report(report)))
}

fn spec_json(spec: &AtomSpec) -> Value {
    json!({
        "label": spec.label,
        "nuclear_spin": spec.nuclear_spin.value(),
        "excited_j": spec.excited_j.value(),
        "g_j": spec.g_j,
        "g_i": spec.g_i,
        "hyperfine_a_MHz": to_mhz(spec.hyperfine_a),
        "hyperfine_q_MHz": to_mhz(spec.hyperfine_q),
        "decay_rate_per_s": spec.decay_rate,
        "linewidth_kHz": to_khz(spec.decay_rate),
        "dipole_au": spec.dipole_au,
        "wavelength_nm": spec.wavelength_m * 1e9,
    })
}

pub fn constants_json(cfg: &RunConfig) -> Result<Value, CliError> {
    let spec = cfg.spec()?;
    Ok(json!({
        "spec": spec_json(&spec),
        "physical": {
            "mu_B_Hz_per_G": units::MU_B_HZ_PER_G,
            "mu_N_Hz_per_G": units::MU_N_HZ_PER_G,
            "hbar_J_s": units::HBAR,
            "epsilon_0_F_per_m": units::EPSILON_0,
            "speed_of_light_m_per_s": units::SPEED_OF_LIGHT,
            "atomic_dipole_C_m": units::AU_DIPOLE_CM,
        },
        "model": {
            "delta_floor_MHz": to_mhz(DELTA_FLOOR),
            "magic_residual_tolerance_Hz": hz(RESIDUAL_TOLERANCE),
            "minimizer_tolerance": MINIMIZER_TOLERANCE,
            "p_max": cfg.thresholds.p_max,
            "leak_max": cfg.thresholds.leak_max,
        },
    }))
}

pub fn constants(cfg: &RunConfig) -> Result<Outcome, CliError> {
    Ok(Outcome::ok(Output::Report(constants_json(cfg)?)))
}
