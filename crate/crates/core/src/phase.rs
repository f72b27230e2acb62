//! Diagonal phase operations from state-dependent light shifts.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::atom::{AtomSpec, FieldConfig};
use crate::effective::{EffectiveModel, ExcitedResolvent, DELTA_FLOOR};
use crate::error::{QuditError, Result};
use crate::exec::Execution;
use crate::raman::median;

/// Polarization used for phase operations.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub enum PhasePolarization {
    /// `θ = 0`, π-polarized light; the ground Hamiltonian stays diagonal.
    #[default]
    Parallel,
    /// `θ = π/2`; only the diagonal of `h_eff` is kept.
    Perpendicular,
}

impl PhasePolarization {
    pub fn theta(self) -> f64 {
        match self {
            PhasePolarization::Parallel => 0.0,
            PhasePolarization::Perpendicular => FRAC_PI_2,
        }
    }
}

/// Diagonal of `h_eff` at `θ = 0`, with the off-diagonal part certified to
/// vanish.
pub fn diagonal_hamiltonian(model: &EffectiveModel) -> Result<Vec<f64>> {
    if model.cfg.theta != 0.0 {
        return Err(QuditError::InvalidArgument(format!(
            "phase Hamiltonian requires θ = 0, got {}",
            model.cfg.theta
        )));
    }
    let ratio = model.h_eff.off_diagonal_ratio();
    if ratio > 1e-12 {
        return Err(QuditError::InvalidArgument(format!(
            "θ = 0 Hamiltonian has off-diagonal ratio {ratio:.3e}"
        )));
    }
    Ok(model.h_eff.real_diagonal())
}

fn centered(values: &[f64], scale: f64) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|s| -scale * (s - mean)).collect()
}

/// `S_m = −(Ω_E²/4)(s^z_m − ⟨s^z⟩)`.
pub fn centered_shifts(model: &EffectiveModel) -> Vec<f64> {
    centered(&model.s_z, model.cfg.rabi * model.cfg.rabi / 4.0)
}

/// Centered light shifts for either phase polarization.
pub fn centered_shifts_for(model: &EffectiveModel, pol: PhasePolarization) -> Vec<f64> {
    let s = match pol {
        PhasePolarization::Parallel => &model.s_z,
        PhasePolarization::Perpendicular => &model.s_x,
    };
    centered(s, model.cfg.rabi * model.cfg.rabi / 4.0)
}

/// `Ω_E,max = 2 δ_min √p_max`.
pub fn max_rabi_for(delta_min: f64, p_max: f64) -> Result<f64> {
    if delta_min <= DELTA_FLOOR {
        return Err(QuditError::SingularExcitedManifold {
            delta_min,
            floor: DELTA_FLOOR,
        });
    }
    if p_max < 0.0 {
        return Err(QuditError::InvalidArgument("p_max must be non-negative".into()));
    }
    Ok(2.0 * delta_min * p_max.sqrt())
}

/// Largest `Ω_E` compatible with `p_E ≤ p_max` at `(B, Δ)`.
pub fn max_rabi_under_population(spec: &AtomSpec, b_gauss: f64, detuning: f64, p_max: f64) -> Result<f64> {
    max_rabi_for(ExcitedResolvent::new(spec, b_gauss).min_detuning(detuning), p_max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseShiftProfile {
    pub b_gauss: f64,
    pub detuning: f64,
    pub shifted_detuning: f64,
    pub delta_min: f64,
    pub rabi_max: f64,
    /// Centered shifts in basis order (descending `m_I`), rad/s.
    pub shifts: Vec<f64>,
    /// `argmax_m |S_m|`, ties resolved to the lower `m_I`.
    pub dominant_level: Option<f64>,
    pub feasible: bool,
}

impl PhaseShiftProfile {
    pub fn max_abs_shift(&self) -> f64 {
        self.shifts.iter().map(|s| s.abs()).fold(0.0, f64::max)
    }
}

fn dominant(spec: &AtomSpec, shifts: &[f64]) -> Option<f64> {
    let mut best: Option<(usize, f64)> = None;
    // scan from the lowest m_I so that ties keep it
    for k in (0..shifts.len()).rev() {
        let a = shifts[k].abs();
        if best.is_none_or(|b| a > b.1) {
            best = Some((k, a));
        }
    }
    best.filter(|b| b.1 > 0.0).map(|b| spec.m_i(b.0))
}

fn profile(
    spec: &AtomSpec,
    res: &ExcitedResolvent,
    detuning: f64,
    shifted: f64,
    p_max: f64,
    pol: PhasePolarization,
) -> Result<PhaseShiftProfile> {
    let delta_min = res.min_detuning(detuning);
    let empty = |delta_min| PhaseShiftProfile {
        b_gauss: res.b_gauss,
        detuning,
        shifted_detuning: shifted,
        delta_min,
        rabi_max: 0.0,
        shifts: vec![0.0; spec.nuc_dim()],
        dominant_level: None,
        feasible: false,
    };
    let alpha = match res.polarizability(detuning) {
        Ok(a) => a,
        Err(QuditError::SingularExcitedManifold { delta_min, .. }) => return Ok(empty(delta_min)),
        Err(e) => return Err(e),
    };
    let rabi_max = max_rabi_for(delta_min, p_max)?;
    let cfg = FieldConfig::new(res.b_gauss, detuning, rabi_max, pol.theta())?;
    let model = EffectiveModel::from_tensor(&alpha, res.ground_energies(), spec.nuclear_spin, cfg);
    let shifts = centered_shifts_for(&model, pol);
    Ok(PhaseShiftProfile {
        b_gauss: res.b_gauss,
        detuning,
        shifted_detuning: shifted,
        delta_min,
        rabi_max,
        dominant_level: dominant(spec, &shifts),
        shifts,
        feasible: true,
    })
}

/// Maximal centered light shifts over a detuning grid at field `b_gauss`.
/// `detunings` holds `(Δ, Δ̃)` pairs; cells inside the singular floor are
/// emitted with `feasible = false`.
pub fn scan_phase_rates(
    spec: &AtomSpec,
    b_gauss: f64,
    detunings: &[(f64, f64)],
    p_max: f64,
    pol: PhasePolarization,
    exec: Execution,
) -> Result<Vec<PhaseShiftProfile>> {
    let res = ExcitedResolvent::new(spec, b_gauss);
    exec.map(detunings, |&(d, t)| profile(spec, &res, d, t, p_max, pol))
        .into_iter()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub b_gauss: f64,
    /// Median across levels of the per-level median `|S_m|`.
    pub median_of_medians: Option<f64>,
    /// Median across levels of the per-level maximum `|S_m|`.
    pub median_of_maxima: Option<f64>,
    /// Same statistics of the drive `Ω_E,max` at which they occur.
    pub rabi_median_of_medians: Option<f64>,
    pub rabi_median_of_maxima: Option<f64>,
    pub feasible_profiles: usize,
    pub empty: bool,
}

/// Per-field statistics over feasible profiles, in order of first appearance.
pub fn summarize_phase_vs_b(profiles: &[PhaseShiftProfile]) -> Vec<PhaseSummary> {
    let mut fields: Vec<f64> = Vec::new();
    for p in profiles {
        if !fields.contains(&p.b_gauss) {
            fields.push(p.b_gauss);
        }
    }
    fields
        .into_iter()
        .map(|b| {
            let at_b: Vec<&PhaseShiftProfile> =
                profiles.iter().filter(|p| p.b_gauss == b && p.feasible).collect();
            let levels = at_b.first().map_or(0, |p| p.shifts.len());
            let (mut med, mut max, mut rmed, mut rmax) = (vec![], vec![], vec![], vec![]);
            for k in 0..levels {
                let mut pairs: Vec<(f64, f64)> = at_b.iter().map(|p| (p.shifts[k].abs(), p.rabi_max)).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut s: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let mut r: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                if let (Some(m), Some(rm)) = (median(&mut s), median(&mut r)) {
                    med.push(m);
                    rmed.push(rm);
                    let top = pairs[pairs.len() - 1];
                    max.push(top.0);
                    rmax.push(top.1);
                }
            }
            PhaseSummary {
                b_gauss: b,
                median_of_medians: median(&mut med),
                median_of_maxima: median(&mut max),
                rabi_median_of_medians: median(&mut rmed),
                rabi_median_of_maxima: median(&mut rmax),
                feasible_profiles: at_b.len(),
                empty: at_b.is_empty(),
            }
        })
        .collect()
}
