//! Controllability of the nuclear-spin qudit: Lie closure of the available
//! flip and phase Hamiltonians, and the constructive pairwise su(2) argument.

use serde::Serialize;

use crate::atom::{AtomSpec, FieldConfig};
use crate::effective::{effective_from_resolvent, ExcitedResolvent};
use crate::error::{QuditError, Result};
use crate::exec::Execution;
use crate::matrix::{commutator, re, ComplexMatrix, C64, I};
use crate::phase::{scan_phase_rates, PhasePolarization, PhaseShiftProfile};
use crate::raman::{magic_angle, scan_feasibility_map, transitions, DetuningGrid, Thresholds};

/// Relative tolerance of the phase-gap distinctness test.
pub const DISTINCTNESS_TOLERANCE: f64 = 1e-6;
/// Rank cutoff of the Lie closure, relative to unit-normalized elements.
pub const CLOSURE_TOLERANCE: f64 = 1e-9;
/// Couplings below this fraction of the largest entry are treated as absent.
pub const COUPLING_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum GeneratorKind {
    Flip { transition: f64, theta: f64 },
    Phase { id: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct Generator {
    pub kind: GeneratorKind,
    pub cfg: FieldConfig,
    #[serde(skip)]
    pub matrix: ComplexMatrix,
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlSet {
    pub b_gauss: f64,
    pub generators: Vec<Generator>,
}

impl ControlSet {
    pub fn matrices(&self) -> Vec<ComplexMatrix> {
        self.generators.iter().map(|g| g.matrix.clone()).collect()
    }

    pub fn phase(&self) -> Option<&Generator> {
        self.generators
            .iter()
            .find(|g| matches!(g.kind, GeneratorKind::Phase { .. }))
    }

    pub fn flip(&self, transition: f64) -> Option<&Generator> {
        self.generators
            .iter()
            .find(|g| matches!(g.kind, GeneratorKind::Flip { transition: t, .. } if t == transition))
    }
}

/// Operating point contributing one generator.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub enum OperatingPoint {
    /// Magic-angle flip of `transition` at `(Δ, Ω_E)`.
    Flip { transition: f64, detuning: f64, rabi: f64 },
    /// `θ = 0` phase Hamiltonian at `(Δ, Ω_E)`.
    Phase { detuning: f64, rabi: f64 },
}

/// `H − tr(H)/d · 𝟙`.
pub fn traceless(h: &ComplexMatrix) -> ComplexMatrix {
    let n = h.dim();
    let shift = h.trace() / n as f64;
    h - &ComplexMatrix::identity(n).scale_c(shift)
}

/// Nearest-neighbour gaps `λ_j − λ_{j+1}` of a diagonal Hamiltonian.
pub fn neighbour_gaps(h_phi: &ComplexMatrix) -> Vec<f64> {
    let d = h_phi.real_diagonal();
    d.windows(2).map(|w| w[0] - w[1]).collect()
}

/// Requires the squared neighbour gaps to be nonzero and pairwise distinct.
pub fn check_distinct(h_phi: &ComplexMatrix) -> Result<()> {
    let sq: Vec<f64> = neighbour_gaps(h_phi).iter().map(|g| g * g).collect();
    let scale = sq.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(QuditError::DistinctnessViolation("all gaps vanish".into()));
    }
    for (j, a) in sq.iter().enumerate() {
        if *a <= DISTINCTNESS_TOLERANCE * scale {
            return Err(QuditError::DistinctnessViolation(format!("gap {j} vanishes")));
        }
        for (k, b) in sq.iter().enumerate().skip(j + 1) {
            if (a - b).abs() <= DISTINCTNESS_TOLERANCE * scale {
                return Err(QuditError::DistinctnessViolation(format!(
                    "gaps {j} and {k} have equal magnitude"
                )));
            }
        }
    }
    Ok(())
}

/// Traceless generators at field `b_gauss`. Needs one flip per neighbouring
/// pair and at least one phase point whose gaps are distinct.
pub fn build_control_set(spec: &AtomSpec, b_gauss: f64, points: &[OperatingPoint]) -> Result<ControlSet> {
    let res = ExcitedResolvent::new(spec, b_gauss);
    let mut generators = Vec::new();
    let mut phase_id = 0;
    for p in points {
        match *p {
            OperatingPoint::Flip {
                transition,
                detuning,
                rabi,
            } => {
                let cfg = FieldConfig::new(b_gauss, detuning, rabi, 0.0)?;
                let model = effective_from_resolvent(&res, &cfg)?;
                let magic = magic_angle(&model, transition)?;
                let theta = magic.theta_star.ok_or_else(|| {
                    QuditError::Infeasible(format!(
                        "transition {transition}: {}",
                        magic.reason.unwrap_or_default()
                    ))
                })?;
                let model = model.at_theta(theta);
                generators.push(Generator {
                    kind: GeneratorKind::Flip { transition, theta },
                    cfg: model.cfg,
                    matrix: traceless(&model.h_eff),
                });
            }
            OperatingPoint::Phase { detuning, rabi } => {
                let cfg = FieldConfig::new(b_gauss, detuning, rabi, 0.0)?;
                let model = effective_from_resolvent(&res, &cfg)?;
                let h = traceless(&model.h_eff);
                check_distinct(&h)?;
                generators.push(Generator {
                    kind: GeneratorKind::Phase { id: phase_id },
                    cfg,
                    matrix: h,
                });
                phase_id += 1;
            }
        }
    }
    for t in transitions(spec) {
        let covered = generators
            .iter()
            .any(|g| matches!(g.kind, GeneratorKind::Flip { transition, .. } if transition == t));
        if !covered {
            return Err(QuditError::InvalidArgument(format!("no flip generator for transition {t}")));
        }
    }
    if phase_id == 0 {
        return Err(QuditError::InvalidArgument("no phase generator".into()));
    }
    Ok(ControlSet { b_gauss, generators })
}

/// Operating points drawn from default scans at `b_gauss`: the feasible
/// cell with the largest `Ω_R` per transition and the phase profile with the
/// largest shift whose gaps are distinct.
pub fn points_from_scans(spec: &AtomSpec, b_gauss: f64, th: &Thresholds, exec: Execution) -> Result<Vec<OperatingPoint>> {
    let grid = DetuningGrid::default();
    let cells = scan_feasibility_map(
        spec,
        &[b_gauss],
        &grid,
        &crate::raman::default_rabi_grid(),
        &transitions(spec),
        th,
        exec,
    )?;
    let mut points = Vec::new();
    for t in transitions(spec) {
        let best = cells
            .iter()
            .filter(|c| c.transition == t)
            .filter_map(|c| c.best.as_ref())
            .fold(None, |acc: Option<&crate::raman::FeasibilityRecord>, r| match acc {
                Some(a) if a.raman_rabi >= r.raman_rabi => Some(a),
                _ => Some(r),
            })
            .ok_or_else(|| QuditError::Infeasible(format!("no feasible cell for transition {t} at {b_gauss} G")))?;
        points.push(OperatingPoint::Flip {
            transition: t,
            detuning: best.cell.detuning,
            rabi: best.cell.rabi,
        });
    }
    let profiles = scan_phase_rates(
        spec,
        b_gauss,
        &grid.at(spec, b_gauss),
        th.p_max,
        PhasePolarization::Parallel,
        exec,
    )?;
    let phase = best_distinct_profile(spec, &profiles)
        .ok_or_else(|| QuditError::DistinctnessViolation(format!("no phase profile at {b_gauss} G")))?;
    points.push(OperatingPoint::Phase {
        detuning: phase.detuning,
        rabi: phase.rabi_max,
    });
    Ok(points)
}

/// Feasible profile with the largest shift whose neighbour gaps are distinct.
pub fn best_distinct_profile<'a>(spec: &AtomSpec, profiles: &'a [PhaseShiftProfile]) -> Option<&'a PhaseShiftProfile> {
    profiles
        .iter()
        .filter(|p| p.feasible)
        .filter(|p| {
            let ground = crate::atom::ground_energies(spec, p.b_gauss);
            let mean = ground.iter().sum::<f64>() / ground.len() as f64;
            let diag: Vec<f64> = ground.iter().zip(&p.shifts).map(|(g, s)| g - mean + s).collect();
            check_distinct(&ComplexMatrix::from_real_diagonal(&diag)).is_ok()
        })
        .fold(None, |acc: Option<&PhaseShiftProfile>, p| match acc {
            Some(a) if a.max_abs_shift() >= p.max_abs_shift() => Some(a),
            _ => Some(p),
        })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LieClosureReport {
    pub dimension: usize,
    pub basis_rank_history: Vec<usize>,
    pub converged: bool,
    pub tolerance: f64,
}

fn unit(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = m.hs_norm();
    (n > 0.0).then(|| m.scale(1.0 / n))
}

/// Projects `m` off an orthonormal basis (real inner product `Re tr(A†B)`)
/// twice, returning the normalized remainder if it exceeds `tol`.
fn orthogonalize(basis: &[ComplexMatrix], m: &ComplexMatrix, tol: f64) -> Option<ComplexMatrix> {
    let mut v = unit(m)?;
    for _ in 0..2 {
        for b in basis {
            let c = b.hs_inner(&v).re;
            v = &v - &b.scale(c);
        }
    }
    let r = v.hs_norm();
    (r > tol).then(|| v.scale(1.0 / r))
}

/// Real Lie algebra generated by `{iH}`: repeatedly adds normalized
/// commutators until no new direction appears.
pub fn lie_closure(gens: &[ComplexMatrix], tol: f64) -> Result<LieClosureReport> {
    let first = gens.first().ok_or_else(|| QuditError::Empty("generator list".into()))?;
    let n = first.dim();
    let cap = n * n;
    let mut basis: Vec<ComplexMatrix> = Vec::new();
    let mut history = Vec::new();
    for g in gens {
        if g.dim() != n {
            return Err(QuditError::DimensionMismatch {
                expected: n,
                found: g.dim(),
            });
        }
        if let Some(v) = orthogonalize(&basis, &g.scale_c(I), tol) {
            basis.push(v);
        }
    }
    history.push(basis.len());
    let mut frontier = 0;
    let mut converged = false;
    while basis.len() < cap {
        let start_len = basis.len();
        let mut k = frontier;
        while k < basis.len() {
            for j in 0..k {
                let c = commutator(&basis[j], &basis[k])?;
                if let Some(v) = orthogonalize(&basis, &c, tol) {
                    basis.push(v);
                }
            }
            k += 1;
        }
        frontier = start_len;
        history.push(basis.len());
        if basis.len() == start_len {
            converged = true;
            break;
        }
    }
    if basis.len() >= cap {
        converged = true;
    }
    Ok(LieClosureReport {
        dimension: basis.len(),
        basis_rank_history: history,
        converged,
        tolerance: tol,
    })
}

/// `X_j^(1) = |j⟩⟨j+1| + |j+1⟩⟨j|` in basis-index order.
pub fn pair_x(n: usize, j: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n);
    m[(j, j + 1)] = re(1.0);
    m[(j + 1, j)] = re(1.0);
    m
}

/// Pair index `j` of the transition with lower label `m_i` (basis index of
/// `m_i + 1`).
pub fn pair_index(spec: &AtomSpec, m_i: f64) -> Result<usize> {
    let lower = spec.nuc_index(m_i)?;
    lower
        .checked_sub(1)
        .ok_or_else(|| QuditError::InvalidArgument(format!("m_I = {m_i} has no upper neighbour")))
}

#[derive(Clone, Debug)]
pub struct Isolation {
    pub matrix: ComplexMatrix,
    /// Degree of the interpolating polynomial.
    pub degree: usize,
}

/// `p_j(L) h_flip` with `L(A) = [h_φ, [h_φ, A]]` and `p_j` the Lagrange
/// polynomial that is one on `Δ_j²` and zero on `0` and every other squared
/// gap carried by `h_flip`.
pub fn isolate_coupling(h_flip: &ComplexMatrix, h_phi: &ComplexMatrix, j: usize) -> Result<Isolation> {
    let n = h_phi.dim();
    if h_flip.dim() != n {
        return Err(QuditError::DimensionMismatch {
            expected: n,
            found: h_flip.dim(),
        });
    }
    if j + 1 >= n {
        return Err(QuditError::InvalidArgument(format!("pair index {j} out of range")));
    }
    // rescale for conditioning; the map is homogeneous in h_φ
    let scale = neighbour_gaps(h_phi).iter().map(|g| g.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(QuditError::DistinctnessViolation("phase Hamiltonian has no gaps".into()));
    }
    let phi = ComplexMatrix::from_real_diagonal(
        &h_phi.real_diagonal().iter().map(|x| x / scale).collect::<Vec<_>>(),
    );
    let lam = phi.real_diagonal();
    let target = (lam[j] - lam[j + 1]).powi(2);
    let cutoff = COUPLING_CUTOFF * h_flip.max_abs();
    let mut nodes = vec![0.0];
    for r in 0..n {
        for c in r + 1..(r + 3).min(n) {
            if (r, c) == (j, j + 1) || h_flip[(r, c)].norm() <= cutoff {
                continue;
            }
            let x = (lam[r] - lam[c]).powi(2);
            if (x - target).abs() <= DISTINCTNESS_TOLERANCE * target.max(x) {
                return Err(QuditError::DistinctnessViolation(format!(
                    "squared gap of ({r}, {c}) coincides with the target pair {j}"
                )));
            }
            if !nodes.iter().any(|y: &f64| (y - x).abs() <= DISTINCTNESS_TOLERANCE * target) {
                nodes.push(x);
            }
        }
    }
    let ell = |a: &ComplexMatrix| -> Result<ComplexMatrix> { commutator(&phi, &commutator(&phi, a)?) };
    let mut out = h_flip.clone();
    for x in &nodes {
        let l = ell(&out)?;
        out = (&l - &out.scale(*x)).scale(1.0 / (target - x));
    }
    Ok(Isolation {
        matrix: out,
        degree: nodes.len(),
    })
}

/// `(X, Y, Z)` spanning su(2) on pair `j`, from a coupling proportional to
/// `X_j^(1)` and a diagonal `h_φ`.
pub fn pair_su2(x_j: &ComplexMatrix, h_phi: &ComplexMatrix, j: usize) -> Result<(ComplexMatrix, ComplexMatrix, ComplexMatrix)> {
    let gaps = neighbour_gaps(h_phi);
    let delta = *gaps
        .get(j)
        .ok_or_else(|| QuditError::InvalidArgument(format!("pair index {j} out of range")))?;
    let scale = gaps.iter().map(|g| g.abs()).fold(0.0, f64::max);
    if delta.abs() <= DISTINCTNESS_TOLERANCE * scale {
        return Err(QuditError::DistinctnessViolation(format!("gap {j} vanishes")));
    }
    let a = x_j[(j, j + 1)].norm();
    if a == 0.0 {
        return Err(QuditError::InvalidArgument(format!("no coupling on pair {j}")));
    }
    let x = x_j.scale(1.0 / a);
    let y = commutator(h_phi, &x)?.scale_c(C64::new(0.0, -1.0 / delta));
    let z = commutator(&x, &y)?.scale_c(C64::new(0.0, -0.5));
    Ok((x, y, z))
}
