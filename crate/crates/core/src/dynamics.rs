//! Exact propagation of the full rotating-frame Hamiltonian, used to check
//! the effective model against the dynamics it approximates.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::atom::{full_hamiltonian, AtomSpec, FieldConfig};
use crate::effective::{scattered_photons_bound, EffectiveModel};
use crate::error::{QuditError, Result};
use crate::matrix::{re, ComplexMatrix, C64, I};
use crate::raman::{evaluate_point, Thresholds};
use crate::units::linspace;

/// Tolerance on `‖ψ₀‖ − 1`.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Validation thresholds, twice the design thresholds.
pub const MAX_DEVIATION: f64 = 0.10;
pub const MAX_EXCITED: f64 = 2e-2;
pub const MAX_LEAKAGE: f64 = 2e-2;

/// Population loss `−i(Γ/2)` on the listed basis states.
#[derive(Clone, Debug)]
pub struct Decay {
    pub rate: f64,
    pub channels: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationTrace {
    /// Seconds.
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub norm: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<Vec<C64>>,
}

impl PropagationTrace {
    /// Summed population of `indices` at every time.
    pub fn population_of(&self, indices: &[usize]) -> Vec<f64> {
        self.populations
            .iter()
            .map(|p| indices.iter().map(|&k| p[k]).sum())
            .collect()
    }
}

fn check_normalized(psi0: &[C64]) -> Result<()> {
    let n = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(QuditError::NotNormalized(n));
    }
    Ok(())
}

fn record(trace: &mut PropagationTrace, t: f64, psi: Vec<C64>) {
    let pops: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    trace.norm.push(pops.iter().sum::<f64>().sqrt());
    trace.times.push(t);
    trace.populations.push(pops);
    trace.states.push(psi);
}

/// `ψ(t) = exp(−iHt) ψ₀` on every time in `times`.
///
/// Without decay the Hermitian eigendecomposition of `h` is used. With decay
/// the non-Hermitian generator `h − i(Γ/2)P` is exponentiated by scaling and
/// squaring; on a uniform grid a single step propagator is reused.
pub fn propagate(
    h: &ComplexMatrix,
    psi0: &[C64],
    times: &[f64],
    decay: Option<&Decay>,
) -> Result<PropagationTrace> {
    if psi0.len() != h.dim() {
        return Err(QuditError::DimensionMismatch {
            expected: h.dim(),
            found: psi0.len(),
        });
    }
    check_normalized(psi0)?;
    let mut trace = PropagationTrace {
        times: Vec::with_capacity(times.len()),
        populations: Vec::with_capacity(times.len()),
        norm: Vec::with_capacity(times.len()),
        states: Vec::with_capacity(times.len()),
    };
    let v0 = DVector::from_column_slice(psi0);
    match decay {
        None => {
            let eig = h.eigh();
            let vecs = eig.vectors.as_dmatrix();
            let c0 = vecs.adjoint() * &v0;
            for &t in times {
                let ct = DVector::from_iterator(
                    c0.len(),
                    c0.iter().zip(&eig.values).map(|(c, l)| c * (-I * l * t).exp()),
                );
                record(&mut trace, t, (vecs * ct).iter().copied().collect());
            }
        }
        Some(d) => {
            let mut gen = h.as_dmatrix().clone();
            for &k in &d.channels {
                gen[(k, k)] -= I * (d.rate / 2.0);
            }
            let step = |dt: f64| -> DMatrix<C64> { (&gen * (-I * dt)).exp() };
            let uniform = times.len() > 2 && {
                let dt = times[1] - times[0];
                let span = times[times.len() - 1].abs().max(dt.abs());
                times
                    .iter()
                    .enumerate()
                    .all(|(k, t)| (t - times[0] - dt * k as f64).abs() <= 1e-12 * span)
            };
            if uniform {
                let u = step(times[1] - times[0]);
                let mut psi = step(times[0]) * &v0;
                for &t in times {
                    record(&mut trace, t, psi.iter().copied().collect());
                    psi = &u * psi;
                }
            } else {
                for &t in times {
                    record(&mut trace, t, (step(t) * &v0).iter().copied().collect());
                }
            }
        }
    }
    Ok(trace)
}

/// Basis vector `e_k` of dimension `n`.
pub fn basis_state(n: usize, k: usize) -> Vec<C64> {
    let mut v = vec![re(0.0); n];
    v[k] = re(1.0);
    v
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FlipOptions {
    /// Defaults to one full flop, `2π / Ω_R`.
    pub duration: Option<f64>,
    pub samples: usize,
    pub with_decay: bool,
    /// Reject operating points that fail the feasibility conditions.
    pub require_feasible: bool,
    pub thresholds: Thresholds,
}

impl Default for FlipOptions {
    fn default() -> Self {
        Self {
            duration: None,
            samples: 801,
            with_decay: false,
            require_feasible: true,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlipTrace {
    pub trace: PropagationTrace,
    pub transition: f64,
    pub theta_star: f64,
    pub raman_rabi: f64,
    /// Full-space indices of `|g, m⟩` and `|g, m+1⟩`.
    pub lower: usize,
    pub upper: usize,
    pub p_lower: Vec<f64>,
    pub p_upper: Vec<f64>,
    pub p_excited: Vec<f64>,
    /// Ground population outside the target pair.
    pub leakage: Vec<f64>,
}

/// Full 24-level propagation of a Raman flip of transition `m_i`, starting
/// in `|g, m_i⟩`, at the magic angle of `cfg`'s `(B, Δ, Ω_E)`.
pub fn simulate_flip(spec: &AtomSpec, cfg: &FieldConfig, m_i: f64, opts: &FlipOptions) -> Result<FlipTrace> {
    let rec = evaluate_point(spec, cfg, m_i, &opts.thresholds)?;
    let theta = match rec.magic.theta_star {
        Some(t) => t,
        None => {
            return Err(QuditError::Infeasible(
                rec.reason.unwrap_or_else(|| "no magic angle".into()),
            ))
        }
    };
    if opts.require_feasible && !rec.feasible {
        return Err(QuditError::Infeasible(rec.reason.unwrap_or_default()));
    }
    let omega_r = rec.raman_rabi;
    let duration = opts.duration.unwrap_or(TAU / omega_r);
    let cfg = FieldConfig { theta, ..*cfg };
    let h = full_hamiltonian(spec, &cfg);
    let n = spec.nuc_dim();
    let lower = spec.nuc_index(m_i)?;
    let upper = lower - 1;
    let excited: Vec<usize> = (n..spec.full_dim()).collect();
    let decay = opts.with_decay.then(|| Decay {
        rate: spec.decay_rate,
        channels: excited.clone(),
    });
    let times = linspace(0.0, duration, opts.samples.max(2));
    let trace = propagate(&h, &basis_state(spec.full_dim(), lower), &times, decay.as_ref())?;
    let others: Vec<usize> = (0..n).filter(|&k| k != lower && k != upper).collect();
    Ok(FlipTrace {
        p_lower: trace.population_of(&[lower]),
        p_upper: trace.population_of(&[upper]),
        p_excited: trace.population_of(&excited),
        leakage: trace.population_of(&others),
        trace,
        transition: m_i,
        theta_star: theta,
        raman_rabi: omega_r,
        lower,
        upper,
    })
}

/// Propagation under the 6×6 effective Hamiltonian.
pub fn effective_propagate(model: &EffectiveModel, psi0: &[C64], times: &[f64]) -> Result<PropagationTrace> {
    propagate(&model.h_eff, psi0, times, None)
}

/// `a + c cos ωt + s sin ωt` fitted to a uniformly sampled signal.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub omega: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub rms_residual: f64,
}

fn linear_fit(times: &[f64], y: &[f64], omega: f64) -> Option<(Vector3<f64>, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&t, &v) in times.iter().zip(y) {
        let row = Vector3::new(1.0, (omega * t).cos(), (omega * t).sin());
        ata += row * row.transpose();
        aty += row * v;
    }
    let coef = ata.cholesky()?.solve(&aty);
    let ss: f64 = times
        .iter()
        .zip(y)
        .map(|(&t, &v)| {
            let m = coef[0] + coef[1] * (omega * t).cos() + coef[2] * (omega * t).sin();
            (v - m).powi(2)
        })
        .sum();
    Some((coef, ss))
}

/// Dominant angular frequency of a uniformly sampled signal: FFT peak
/// followed by a least-squares refinement of ω.
pub fn fit_frequency(times: &[f64], y: &[f64]) -> Result<SinusoidFit> {
    let n = times.len();
    if n < 8 || y.len() != n {
        return Err(QuditError::FitFailed("need at least 8 uniform samples".into()));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if dt <= 0.0 {
        return Err(QuditError::FitFailed("time grid is not increasing".into()));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let pad = (4 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = y.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(pad, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(pad).process(&mut buf);
    let (peak, power) = buf[1..pad / 2]
        .iter()
        .enumerate()
        .map(|(k, z)| (k + 1, z.norm_sqr()))
        .fold((0, 0.0), |a, x| if x.1 > a.1 { x } else { a });
    let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if peak == 0 || total <= 1e-20 * n as f64 || power == 0.0 {
        return Err(QuditError::FitFailed("signal is not oscillatory".into()));
    }
    let bin = TAU / (pad as f64 * dt);
    let cost = |w: f64| linear_fit(times, y, w).map_or(f64::INFINITY, |f| f.1);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((peak as f64 - 1.0) * bin, (peak as f64 + 1.0) * bin);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while b - a > 1e-13 * b {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = cost(d);
        }
    }
    let omega = 0.5 * (a + b);
    let (coef, ss) = linear_fit(times, y, omega)
        .ok_or_else(|| QuditError::FitFailed("singular normal equations".into()))?;
    Ok(SinusoidFit {
        omega,
        offset: coef[0],
        amplitude: coef[1].hypot(coef[2]),
        phase: (-coef[2]).atan2(coef[1]),
        rms_residual: (ss / n as f64).sqrt(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub transition: f64,
    pub theta_star: f64,
    pub fitted_flip_frequency: f64,
    pub raman_rabi_predicted: f64,
    pub relative_deviation: f64,
    /// Maxima over the first flop, `t ≤ 2π/Ω_R`.
    pub max_p_e: f64,
    pub max_leakage: f64,
    /// Maxima over the whole fitted trace.
    pub max_p_e_trace: f64,
    pub max_leakage_trace: f64,
    pub n_sc_estimate: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "pass"
        } else {
            "fail"
        }
    }
}

/// Compares the full dynamics at an operating point against the effective
/// prediction `Ω_R` over `periods` flops.
pub fn validate_effective(
    spec: &AtomSpec,
    cfg: &FieldConfig,
    m_i: f64,
    periods: f64,
    opts: &FlipOptions,
) -> Result<(ValidationReport, FlipTrace)> {
    let probe = evaluate_point(spec, cfg, m_i, &opts.thresholds)?;
    let omega_r = probe
        .magic
        .raman_rabi
        .ok_or_else(|| QuditError::Infeasible(probe.reason.clone().unwrap_or_default()))?;
    let opts = FlipOptions {
        duration: Some(periods.max(3.0) * TAU / omega_r),
        samples: opts.samples.max((periods.max(3.0) * 200.0) as usize),
        ..*opts
    };
    let flip = simulate_flip(spec, cfg, m_i, &opts)?;
    let diff: Vec<f64> = flip.p_lower.iter().zip(&flip.p_upper).map(|(a, b)| a - b).collect();
    let fit = fit_frequency(&flip.trace.times, &diff)?;
    let report = report_from(spec, &flip, fit.omega)?;
    Ok((report, flip))
}

fn report_from(spec: &AtomSpec, flip: &FlipTrace, fitted: f64) -> Result<ValidationReport> {
    let flop = TAU / flip.raman_rabi * (1.0 + 1e-12);
    let window = |v: &[f64]| {
        flip.trace
            .times
            .iter()
            .zip(v)
            .filter(|(t, _)| **t <= flop)
            .map(|(_, x)| *x)
            .fold(0.0, f64::max)
    };
    let max_p_e = window(&flip.p_excited);
    let max_leakage = window(&flip.leakage);
    let dev = (fitted - flip.raman_rabi).abs() / flip.raman_rabi;
    let n_sc = scattered_photons_bound(spec, max_p_e, flip.raman_rabi / TAU)?;
    Ok(ValidationReport {
        transition: flip.transition,
        theta_star: flip.theta_star,
        fitted_flip_frequency: fitted,
        raman_rabi_predicted: flip.raman_rabi,
        relative_deviation: dev,
        max_p_e,
        max_leakage,
        max_p_e_trace: flip.p_excited.iter().cloned().fold(0.0, f64::max),
        max_leakage_trace: flip.leakage.iter().cloned().fold(0.0, f64::max),
        n_sc_estimate: n_sc,
        pass: dev <= MAX_DEVIATION && max_p_e <= MAX_EXCITED && max_leakage <= MAX_LEAKAGE,
    })
}
