//! State-selective fluorescence readout on a stretched cycling transition.

use serde::Serialize;

use crate::atom::{excited_levels, ground_energies, AtomSpec};
use crate::error::{QuditError, Result};
use crate::exec::Execution;

/// Couplings weaker than this (relative) are not counted as dark channels.
pub const BETA_CUTOFF: f64 = 1e-6;

/// Circular probe polarization; `σ+` drives `m_J = +1`, `σ−` drives `m_J = −1`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Circular {
    SigmaPlus,
    SigmaMinus,
}

impl Circular {
    pub fn m_j(self) -> i32 {
        match self {
            Circular::SigmaPlus => 1,
            Circular::SigmaMinus => -1,
        }
    }
}

/// Stretched cycling transition addressed by the probe.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Addressing {
    pub polarization: Circular,
    /// Excited stretched state `(m_J, m_I)`.
    pub m_j: i32,
    pub m_i: f64,
}

impl Addressing {
    /// Lower stretched state `|m_J = −1, m_I = −I⟩` with `σ−` light.
    pub fn lower(spec: &AtomSpec) -> Self {
        Self {
            polarization: Circular::SigmaMinus,
            m_j: -1,
            m_i: -spec.nuclear_spin.value(),
        }
    }

    /// Upper stretched state `|m_J = +1, m_I = +I⟩` with `σ+` light.
    pub fn upper(spec: &AtomSpec) -> Self {
        Self {
            polarization: Circular::SigmaPlus,
            m_j: 1,
            m_i: spec.nuclear_spin.value(),
        }
    }

    /// Default scheme: upper stretched state for the singlet line, lower for
    /// everything else.
    pub fn for_spec(spec: &AtomSpec) -> Self {
        if spec.label.contains("1P1") {
            Self::upper(spec)
        } else {
            Self::lower(spec)
        }
    }
}

/// `R = (Γ/2) s / (1 + s + (2δ/Γ)²)`, `s = 2Ω²/Γ²`.
pub fn bright_rate(gamma: f64, rabi: f64, detuning: f64) -> f64 {
    let s = 2.0 * rabi * rabi / (gamma * gamma);
    let d = 2.0 * detuning / gamma;
    0.5 * gamma * s / (1.0 + s + d * d)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DarkChannel {
    /// Ground `m_I` the channel starts from.
    pub ground_m_i: f64,
    /// `m_F` of the excited eigenstate.
    pub excited_m_f: f64,
    pub rank_in_sector: usize,
    /// Relative coupling `|⟨e|ε_σ·D|g,k⟩|`.
    pub beta: f64,
    /// Probe detuning from this channel, rad/s.
    pub detuning: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DarkRates {
    pub channels: Vec<DarkChannel>,
    /// `max_k R_k`.
    pub r_d: f64,
}

impl DarkRates {
    pub fn dominant(&self) -> Option<&DarkChannel> {
        self.channels
            .iter()
            .fold(None, |acc: Option<&DarkChannel>, c| match acc {
                Some(a) if a.rate >= c.rate => Some(a),
                _ => Some(c),
            })
    }
}

/// Transition energies `E_e − E_g` needed by the rate model at one field.
struct Spectrum {
    addressed: f64,
    /// `(ground m_I, m_F, rank, β, transition energy)`.
    channels: Vec<(f64, f64, usize, f64, f64)>,
    /// Coupling of the addressed channel itself.
    beta_addressed: f64,
}

fn spectrum(spec: &AtomSpec, b_gauss: f64, addr: &Addressing) -> Result<Spectrum> {
    let ground = ground_energies(spec, b_gauss);
    let g_addr = spec.nuc_index(addr.m_i)?;
    let target = spec.excited_index(addr.m_j, g_addr);
    let levels = excited_levels(spec, b_gauss);
    let m_j = addr.polarization.m_j();
    let mut addressed = None;
    let mut beta_addressed = 0.0;
    let mut channels = Vec::new();
    for l in &levels {
        for (k, &g_k) in ground.iter().enumerate() {
            let beta = l.vector[spec.excited_index(m_j, k)].norm();
            if beta <= BETA_CUTOFF {
                continue;
            }
            let energy = l.energy - g_k;
            if k == g_addr {
                if l.vector[target].norm() > 1.0 - 1e-9 {
                    addressed = Some(energy);
                    beta_addressed = beta;
                }
                continue;
            }
            channels.push((spec.m_i(k), l.m_f, l.rank_in_sector, beta, energy));
        }
    }
    let addressed = addressed.ok_or_else(|| {
        QuditError::InvalidArgument(format!(
            "({}, {}) is not driven by {:?}",
            addr.m_j, addr.m_i, addr.polarization
        ))
    })?;
    Ok(Spectrum {
        addressed,
        channels,
        beta_addressed,
    })
}

fn dark_from(spec: &AtomSpec, sp: &Spectrum, rabi: f64, probe_detuning: f64) -> DarkRates {
    let channels: Vec<DarkChannel> = sp
        .channels
        .iter()
        .map(|&(m_i, m_f, rank, beta, energy)| {
            let detuning = energy - sp.addressed + probe_detuning;
            DarkChannel {
                ground_m_i: m_i,
                excited_m_f: m_f,
                rank_in_sector: rank,
                beta,
                detuning,
                rate: bright_rate(spec.decay_rate, beta * rabi, detuning),
            }
        })
        .collect();
    let r_d = channels.iter().map(|c| c.rate).fold(0.0, f64::max);
    DarkRates { channels, r_d }
}

/// Off-resonant scattering from every non-addressed ground state, with the
/// probe at detuning `probe_detuning` from the addressed transition.
pub fn dark_rates(spec: &AtomSpec, b_gauss: f64, rabi: f64, addr: &Addressing, probe_detuning: f64) -> Result<DarkRates> {
    Ok(dark_from(spec, &spectrum(spec, b_gauss, addr)?, rabi, probe_detuning))
}

/// Relative coupling of the addressed stretched channel.
pub fn addressed_coupling(spec: &AtomSpec, b_gauss: f64, addr: &Addressing) -> Result<f64> {
    Ok(spectrum(spec, b_gauss, addr)?.beta_addressed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReadoutPoint {
    pub b_gauss: f64,
    pub rabi: f64,
    pub probe_detuning: f64,
    pub transition: String,
    pub addressed: Addressing,
    pub r_b: f64,
    pub r_d: f64,
    /// `R_B / R_D`; infinite when no dark channel scatters.
    pub contrast: f64,
    pub channels: Vec<DarkChannel>,
}

impl ReadoutPoint {
    pub fn dominant(&self) -> Option<&DarkChannel> {
        self.channels
            .iter()
            .fold(None, |acc: Option<&DarkChannel>, c| match acc {
                Some(a) if a.rate >= c.rate => Some(a),
                _ => Some(c),
            })
    }
}

fn point(spec: &AtomSpec, b: f64, sp: &Spectrum, addr: &Addressing, rabi: f64, delta: f64) -> ReadoutPoint {
    let dark = dark_from(spec, sp, rabi, delta);
    let r_b = bright_rate(spec.decay_rate, rabi, delta);
    ReadoutPoint {
        b_gauss: b,
        rabi,
        probe_detuning: delta,
        transition: spec.label.clone(),
        addressed: *addr,
        r_b,
        r_d: dark.r_d,
        contrast: if dark.r_d > 0.0 { r_b / dark.r_d } else { f64::INFINITY },
        channels: dark.channels,
    }
}

/// One readout operating point.
pub fn readout_point(spec: &AtomSpec, b_gauss: f64, rabi: f64, addr: &Addressing, probe_detuning: f64) -> Result<ReadoutPoint> {
    let sp = spectrum(spec, b_gauss, addr)?;
    Ok(point(spec, b_gauss, &sp, addr, rabi, probe_detuning))
}

/// Readout map over `(B, Ω_E)`, B-major.
pub fn scan_readout(
    spec: &AtomSpec,
    b_grid: &[f64],
    rabi_grid: &[f64],
    addr: &Addressing,
    probe_detuning: f64,
    exec: Execution,
) -> Result<Vec<ReadoutPoint>> {
    if b_grid.is_empty() || rabi_grid.is_empty() {
        return Err(QuditError::Empty("readout grid".into()));
    }
    let rows = exec.map(b_grid, |&b| -> Result<Vec<ReadoutPoint>> {
        let sp = spectrum(spec, b, addr)?;
        Ok(rabi_grid
            .iter()
            .map(|&w| point(spec, b, &sp, addr, w, probe_detuning))
            .collect())
    });
    let mut out = Vec::with_capacity(b_grid.len() * rabi_grid.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bright_rate_algebra() {
        let g = 1.0e6;
        assert!((bright_rate(g, g / 2f64.sqrt(), 0.0) - g / 4.0).abs() < 1e-9);
        assert!((bright_rate(g, g / 2f64.sqrt(), g) - g / 12.0).abs() < 1e-9);
        assert!((bright_rate(g, 1e4 * g, 0.0) / (g / 2.0) - 1.0).abs() < 1e-7);
        assert_eq!(bright_rate(g, 0.0, 0.0), 0.0);
    }
}
