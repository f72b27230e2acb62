//! Magic-angle Raman flips between neighbouring nuclear levels and the
//! feasibility maps built from them.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::Serialize;

use crate::atom::{excited_levels, AtomSpec, FieldConfig};
use crate::effective::{excited_population_bound, EffectiveModel, ExcitedResolvent};
use crate::error::{QuditError, Result};
use crate::exec::Execution;
use crate::units::{arange, logspace, mhz};

/// Largest allowed `|δE_eff(θ*)|`, rad/s.
pub const RESIDUAL_TOLERANCE: f64 = TAU * 1.0;
/// Angular tolerance of the golden-section minimizer, rad.
pub const MINIMIZER_TOLERANCE: f64 = 1e-10;
/// `|δs^x − δs^z|` below this fraction of the largest coefficient is degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub p_max: f64,
    pub leak_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            p_max: 1e-2,
            leak_max: 1e-2,
        }
    }
}

/// Lower labels of the five neighbouring pairs, `m_I = −5/2 … +3/2`.
pub fn transitions(spec: &AtomSpec) -> Vec<f64> {
    let i = spec.nuclear_spin.value();
    (0..spec.nuc_dim() - 1).map(|k| -i + k as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagicAngleResult {
    /// Lower state of the pair.
    pub transition: f64,
    pub exists: bool,
    pub theta_star: Option<f64>,
    /// `|δE_eff(θ*)|`, rad/s.
    pub residual: Option<f64>,
    pub raman_rabi: Option<f64>,
    /// Closed-form `sin²θ*`, when the coefficients are not degenerate.
    pub sin2: Option<f64>,
    pub reason: Option<String>,
}

/// Pair indices `(lower, upper)` of the transition with lower label `m_i`.
fn pair(model: &EffectiveModel, m_i: f64) -> Result<(usize, usize)> {
    let lower = model.nuc_index(m_i)?;
    if lower == 0 {
        return Err(QuditError::InvalidArgument(format!(
            "m_I = {m_i} has no upper neighbour"
        )));
    }
    Ok((lower, lower - 1))
}

/// `δE_eff = E_eff(m+1) − E_eff(m)` at angle `theta`.
pub fn effective_splitting(model: &EffectiveModel, m_i: f64, theta: f64) -> Result<f64> {
    let (lo, up) = pair(model, m_i)?;
    let d = model.diagonal_at(theta);
    Ok(d[up] - d[lo])
}

/// Closed-form `sin²θ*` from the diagonal coefficients.
pub fn magic_sin2(model: &EffectiveModel, m_i: f64) -> Result<f64> {
    let (lo, up) = pair(model, m_i)?;
    let k = model.cfg.rabi * model.cfg.rabi / 4.0;
    let d_eg = model.ground[up] - model.ground[lo];
    let d_sz = model.s_z[up] - model.s_z[lo];
    let d_sx = model.s_x[up] - model.s_x[lo];
    let scale = model.s_z[up]
        .abs()
        .max(model.s_z[lo].abs())
        .max(model.s_x[up].abs())
        .max(model.s_x[lo].abs());
    let denom = d_sx - d_sz;
    if k == 0.0 {
        return Err(QuditError::DegenerateCoefficients(0.0));
    }
    if denom.abs() <= DEGENERACY_TOLERANCE * scale {
        return Err(QuditError::DegenerateCoefficients(denom.abs()));
    }
    Ok((d_eg / k - d_sz) / denom)
}

/// Numeric `argmin_θ |δE_eff(θ)|` on `[0, π/2]` by golden-section search.
/// Ties resolve to the smaller angle.
pub fn numeric_magic_angle(model: &EffectiveModel, m_i: f64) -> Result<f64> {
    pair(model, m_i)?;
    let f = |t: f64| effective_splitting(model, m_i, t).map(f64::abs).unwrap_or(f64::INFINITY);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, FRAC_PI_2);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > MINIMIZER_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // endpoints can win when the zero lies outside the interval
    let best = [(0.0, f(0.0)), (mid, f(mid)), (FRAC_PI_2, f(FRAC_PI_2))]
        .into_iter()
        .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    Ok(best.0)
}

/// `Ω_R = (Ω_E²/2) |g_m sinθ cosθ|`.
pub fn raman_rabi(model: &EffectiveModel, m_i: f64, theta: f64) -> Result<f64> {
    let g = model.g_for(m_i)?;
    let (s, c) = theta.sin_cos();
    Ok(model.cfg.rabi * model.cfg.rabi / 2.0 * (g * s * c).norm())
}

/// Magic angle of one transition, with the Raman frequency it produces.
pub fn magic_angle(model: &EffectiveModel, m_i: f64) -> Result<MagicAngleResult> {
    let mut out = MagicAngleResult {
        transition: m_i,
        exists: false,
        theta_star: None,
        residual: None,
        raman_rabi: None,
        sin2: None,
        reason: None,
    };
    let sin2 = match magic_sin2(model, m_i) {
        Ok(v) => v,
        Err(QuditError::DegenerateCoefficients(d)) => {
            out.reason = Some(if model.cfg.rabi == 0.0 {
                "no magic angle: no drive".into()
            } else {
                format!("no magic angle: degenerate coefficients ({d:.3e})")
            });
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    out.sin2 = Some(sin2);
    if !(sin2 > 0.0 && sin2 < 1.0) {
        out.reason = Some(format!("no magic angle: sin²θ* = {sin2:.6} is not interior"));
        return Ok(out);
    }
    let theta = sin2.sqrt().asin();
    let residual = effective_splitting(model, m_i, theta)?.abs();
    out.exists = true;
    out.theta_star = Some(theta);
    out.residual = Some(residual);
    out.raman_rabi = Some(raman_rabi(model, m_i, theta)?);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeakageChannel {
    /// Basis indices of the coupled pair (row above column).
    pub upper: usize,
    pub lower: usize,
    pub coupling: f64,
    pub detuning: f64,
    pub leakage: f64,
}

/// `L_k = Ω_k² / (Ω_k² + δ_k²)` for every off-diagonal channel of
/// `h_eff(θ)` other than the target pair; returns the channels and the
/// largest value.
pub fn leakage_bounds(model: &EffectiveModel, m_i: f64, theta: f64) -> Result<(Vec<LeakageChannel>, f64)> {
    let (lo, up) = pair(model, m_i)?;
    let h = model.assemble(theta);
    let n = model.dim();
    let mut channels = Vec::new();
    for r in 0..n {
        for c in r + 1..(r + 3).min(n) {
            if (r, c) == (up, lo) {
                continue;
            }
            let coupling = 2.0 * h[(r, c)].norm();
            let detuning = h[(r, r)].re - h[(c, c)].re;
            let denom = coupling * coupling + detuning * detuning;
            let leakage = if denom == 0.0 {
                0.0
            } else {
                coupling * coupling / denom
            };
            channels.push(LeakageChannel {
                upper: r,
                lower: c,
                coupling,
                detuning,
                leakage,
            });
        }
    }
    let max = channels.iter().map(|c| c.leakage).fold(0.0, f64::max);
    Ok((channels, max))
}

/// Excited levels adiabatically connected to the `m_J = −1` manifold: the
/// lowest state of each `m_F` sector that contains an `m_J = −1` component.
pub fn lower_manifold_energies(spec: &AtomSpec, b_gauss: f64) -> Vec<f64> {
    let i = spec.nuclear_spin.value();
    let levels = excited_levels(spec, b_gauss);
    let mut out: Vec<f64> = levels
        .iter()
        .filter(|l| l.rank_in_sector == 0 && l.m_f <= i - 1.0 + 1e-9)
        .map(|l| l.energy)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Mean energy of the `m_J = −1` manifold at field `b_gauss`.
pub fn lower_manifold_mean(spec: &AtomSpec, b_gauss: f64) -> f64 {
    let e = lower_manifold_energies(spec, b_gauss);
    e.iter().sum::<f64>() / e.len() as f64
}

/// `Δ̃ = Δ − ⟨E⟩_{m_J=−1}`.
pub fn shifted_detuning(spec: &AtomSpec, b_gauss: f64, detuning: f64) -> f64 {
    detuning - lower_manifold_mean(spec, b_gauss)
}

/// Grid cell of a feasibility scan.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub b_gauss: f64,
    pub detuning: f64,
    pub shifted_detuning: f64,
    pub rabi: f64,
    pub transition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityRecord {
    pub cell: Cell,
    pub magic: MagicAngleResult,
    pub delta_min: f64,
    pub p_e_bound: f64,
    pub leakage_max: f64,
    pub feasible: bool,
    /// Raman frequency, zero when no magic angle exists.
    pub raman_rabi: f64,
    /// First failed condition, if any.
    pub reason: Option<String>,
}

/// Feasibility of one transition for a model at any θ.
pub fn assess(model: &EffectiveModel, m_i: f64, shifted: f64, th: &Thresholds) -> Result<FeasibilityRecord> {
    let magic = magic_angle(model, m_i)?;
    let p_e_bound = excited_population_bound(model.cfg.rabi, model.delta_min)?;
    let leakage_max = match magic.theta_star {
        Some(t) => leakage_bounds(model, m_i, t)?.1,
        None => f64::NAN,
    };
    let reason = if !magic.exists {
        magic.reason.clone()
    } else if magic.residual.is_some_and(|r| r > RESIDUAL_TOLERANCE) {
        Some("magic-angle residual".into())
    } else if p_e_bound > th.p_max {
        Some("population bound".into())
    } else if leakage_max > th.leak_max {
        Some("leakage".into())
    } else {
        None
    };
    Ok(FeasibilityRecord {
        cell: Cell {
            b_gauss: model.cfg.b_gauss,
            detuning: model.cfg.detuning,
            shifted_detuning: shifted,
            rabi: model.cfg.rabi,
            transition: m_i,
        },
        raman_rabi: magic.raman_rabi.unwrap_or(0.0),
        magic,
        delta_min: model.delta_min,
        p_e_bound,
        leakage_max,
        feasible: reason.is_none(),
        reason,
    })
}

fn singular_record(cell: Cell, delta_min: f64) -> FeasibilityRecord {
    FeasibilityRecord {
        cell,
        magic: MagicAngleResult {
            transition: cell.transition,
            exists: false,
            theta_star: None,
            residual: None,
            raman_rabi: None,
            sin2: None,
            reason: Some("singular excited manifold".into()),
        },
        delta_min,
        p_e_bound: f64::INFINITY,
        leakage_max: f64::NAN,
        feasible: false,
        raman_rabi: 0.0,
        reason: Some("singular excited manifold".into()),
    }
}

/// Feasibility at one operating point `(B, Δ, Ω_E)` for transition `m_i`.
pub fn evaluate_point(spec: &AtomSpec, cfg: &FieldConfig, m_i: f64, th: &Thresholds) -> Result<FeasibilityRecord> {
    let res = ExcitedResolvent::new(spec, cfg.b_gauss);
    let shifted = shifted_detuning(spec, cfg.b_gauss, cfg.detuning);
    match res.polarizability(cfg.detuning) {
        Ok(alpha) => {
            let model = EffectiveModel::from_tensor(&alpha, res.ground_energies(), spec.nuclear_spin, *cfg);
            assess(&model, m_i, shifted, th)
        }
        Err(QuditError::SingularExcitedManifold { delta_min, .. }) => Ok(singular_record(
            Cell {
                b_gauss: cfg.b_gauss,
                detuning: cfg.detuning,
                shifted_detuning: shifted,
                rabi: cfg.rabi,
                transition: m_i,
            },
            delta_min,
        )),
        Err(e) => Err(e),
    }
}

/// Detuning axis of a scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DetuningGrid {
    /// Absolute `Δ` values, rad/s.
    Absolute(Vec<f64>),
    /// `Δ̃` values, rad/s, re-centred at every field.
    Shifted(Vec<f64>),
    /// `Δ̃` covering the `m_J = −1` manifold plus `margin` on both sides.
    Manifold { margin: f64, step: f64 },
}

impl Default for DetuningGrid {
    fn default() -> Self {
        DetuningGrid::Manifold {
            margin: mhz(3000.0),
            step: mhz(10.0),
        }
    }
}

impl DetuningGrid {
    /// `(Δ, Δ̃)` pairs at field `b_gauss`.
    pub fn at(&self, spec: &AtomSpec, b_gauss: f64) -> Vec<(f64, f64)> {
        let mean = lower_manifold_mean(spec, b_gauss);
        match self {
            DetuningGrid::Absolute(v) => v.iter().map(|&d| (d, d - mean)).collect(),
            DetuningGrid::Shifted(v) => v.iter().map(|&t| (t + mean, t)).collect(),
            DetuningGrid::Manifold { margin, step } => {
                let e = lower_manifold_energies(spec, b_gauss);
                let lo = e[0] - mean - margin;
                let hi = e[e.len() - 1] - mean + margin;
                arange(lo, hi, *step).into_iter().map(|t| (t + mean, t)).collect()
            }
        }
    }
}

/// Default field grid, Gauss.
pub fn default_b_grid() -> Vec<f64> {
    arange(50.0, 2000.0, 25.0)
}

/// Default drive grid, rad/s.
pub fn default_rabi_grid() -> Vec<f64> {
    logspace(mhz(1.0), mhz(100.0), 40)
}

/// Records at every `(B, Δ, Ω_E, transition)`, in that nesting order.
pub fn scan_phase_diagram(
    spec: &AtomSpec,
    b_grid: &[f64],
    detunings: &DetuningGrid,
    rabi_grid: &[f64],
    transitions: &[f64],
    th: &Thresholds,
    exec: Execution,
) -> Result<Vec<FeasibilityRecord>> {
    let per_b = exec.map(b_grid, |&b| -> Result<Vec<FeasibilityRecord>> {
        let res = ExcitedResolvent::new(spec, b);
        let mut out = Vec::new();
        for (delta, shifted) in detunings.at(spec, b) {
            out.extend(cell_records(&res, spec, delta, shifted, rabi_grid, transitions, th)?);
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for r in per_b {
        all.extend(r?);
    }
    Ok(all)
}

fn cell_records(
    res: &ExcitedResolvent,
    spec: &AtomSpec,
    delta: f64,
    shifted: f64,
    rabi_grid: &[f64],
    transitions: &[f64],
    th: &Thresholds,
) -> Result<Vec<FeasibilityRecord>> {
    let mut out = Vec::with_capacity(rabi_grid.len() * transitions.len());
    match res.polarizability(delta) {
        Ok(alpha) => {
            for &rabi in rabi_grid {
                let cfg = FieldConfig::new(res.b_gauss, delta, rabi, 0.0)?;
                let model = EffectiveModel::from_tensor(&alpha, res.ground_energies(), spec.nuclear_spin, cfg);
                for &m in transitions {
                    out.push(assess(&model, m, shifted, th)?);
                }
            }
        }
        Err(QuditError::SingularExcitedManifold { delta_min, .. }) => {
            for &rabi in rabi_grid {
                for &m in transitions {
                    out.push(singular_record(
                        Cell {
                            b_gauss: res.b_gauss,
                            detuning: delta,
                            shifted_detuning: shifted,
                            rabi,
                            transition: m,
                        },
                        delta_min,
                    ));
                }
            }
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Existential-over-`Ω_E` reduction of one `(B, Δ, transition)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellBest {
    pub b_gauss: f64,
    pub detuning: f64,
    pub shifted_detuning: f64,
    pub transition: f64,
    pub feasible: bool,
    /// Feasible record with the largest `Ω_R`.
    pub best: Option<FeasibilityRecord>,
    /// Number of drive values that were feasible.
    pub feasible_count: usize,
    /// Smallest drive at which a magic angle exists.
    pub min_rabi_for_magic: Option<f64>,
}

/// Reduces records ordered as produced by [`scan_phase_diagram`] to one
/// entry per `(B, Δ, transition)`, in grid order.
pub fn best_over_rabi(records: &[FeasibilityRecord]) -> Vec<CellBest> {
    let mut out: Vec<CellBest> = Vec::new();
    let mut index: std::collections::HashMap<(u64, u64, u64), usize> = Default::default();
    for r in records {
        let key = (r.cell.b_gauss.to_bits(), r.cell.detuning.to_bits(), r.cell.transition.to_bits());
        let k = *index.entry(key).or_insert_with(|| {
            out.push(CellBest {
                b_gauss: r.cell.b_gauss,
                detuning: r.cell.detuning,
                shifted_detuning: r.cell.shifted_detuning,
                transition: r.cell.transition,
                feasible: false,
                best: None,
                feasible_count: 0,
                min_rabi_for_magic: None,
            });
            out.len() - 1
        });
        let c = &mut out[k];
        if r.magic.exists {
            c.min_rabi_for_magic = Some(c.min_rabi_for_magic.map_or(r.cell.rabi, |m| m.min(r.cell.rabi)));
        }
        if r.feasible {
            c.feasible = true;
            c.feasible_count += 1;
            if c.best.as_ref().is_none_or(|b| r.raman_rabi > b.raman_rabi) {
                c.best = Some(r.clone());
            }
        }
    }
    out
}

/// Cell-reduced scan; memory scales with the `(B, Δ)` grid only.
pub fn scan_feasibility_map(
    spec: &AtomSpec,
    b_grid: &[f64],
    detunings: &DetuningGrid,
    rabi_grid: &[f64],
    transitions: &[f64],
    th: &Thresholds,
    exec: Execution,
) -> Result<Vec<CellBest>> {
    let cells: Vec<(usize, f64, f64)> = b_grid
        .iter()
        .enumerate()
        .flat_map(|(k, &b)| detunings.at(spec, b).into_iter().map(move |(d, t)| (k, d, t)))
        .collect();
    let resolvents: Vec<ExcitedResolvent> = exec.map(b_grid, |&b| ExcitedResolvent::new(spec, b));
    let per_cell = exec.map(&cells, |&(k, d, t)| -> Result<Vec<CellBest>> {
        let res = &resolvents[k];
        Ok(best_over_rabi(&cell_records(res, spec, d, t, rabi_grid, transitions, th)?))
    });
    let mut out = Vec::with_capacity(cells.len() * transitions.len());
    for c in per_cell {
        out.extend(c?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RamanSummary {
    pub b_gauss: f64,
    /// Median across transitions of the per-transition median `Ω_R`.
    pub median_of_medians: Option<f64>,
    /// Median across transitions of the per-transition maximum `Ω_R`.
    pub median_of_maxima: Option<f64>,
    /// Smallest `Ω_E` at which any magic angle exists.
    pub min_rabi_for_magic: Option<f64>,
    pub feasible_cells: usize,
    /// No feasible cell at this field.
    pub empty: bool,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Per-field summary of a cell-reduced scan, in order of first appearance.
pub fn summarize_vs_b(cells: &[CellBest]) -> Vec<RamanSummary> {
    let mut fields: Vec<f64> = Vec::new();
    for c in cells {
        if !fields.contains(&c.b_gauss) {
            fields.push(c.b_gauss);
        }
    }
    fields
        .into_iter()
        .map(|b| {
            let at_b: Vec<&CellBest> = cells.iter().filter(|c| c.b_gauss == b).collect();
            let mut labels: Vec<f64> = Vec::new();
            for c in &at_b {
                if !labels.contains(&c.transition) {
                    labels.push(c.transition);
                }
            }
            let mut medians = Vec::new();
            let mut maxima = Vec::new();
            for m in labels {
                let mut rates: Vec<f64> = at_b
                    .iter()
                    .filter(|c| c.transition == m)
                    .filter_map(|c| c.best.as_ref().map(|r| r.raman_rabi))
                    .collect();
                if let Some(med) = median(&mut rates) {
                    medians.push(med);
                    maxima.push(rates.iter().cloned().fold(f64::MIN, f64::max));
                }
            }
            let feasible_cells = at_b.iter().filter(|c| c.feasible).count();
            RamanSummary {
                b_gauss: b,
                median_of_medians: median(&mut medians),
                median_of_maxima: median(&mut maxima),
                min_rabi_for_magic: at_b
                    .iter()
                    .filter_map(|c| c.min_rabi_for_magic)
                    .reduce(f64::min),
                feasible_cells,
                empty: feasible_cells == 0,
            }
        })
        .collect()
}
