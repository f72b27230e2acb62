//! Physical constants and unit helpers. Energies are angular frequencies
//! (rad/s) with ħ = 1; magnetic fields are in Gauss.

use std::f64::consts::TAU;

/// Bohr magneton over Planck's constant, Hz/G.
pub const MU_B_HZ_PER_G: f64 = 1.399_624_604e6;
/// Nuclear magneton over Planck's constant, Hz/G.
pub const MU_N_HZ_PER_G: f64 = 762.2593;
/// Atomic unit of electric dipole moment, C·m.
pub const AU_DIPOLE_CM: f64 = 8.478_353_6e-30;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// `μ_B` in rad/s per Gauss.
pub const MU_B: f64 = TAU * MU_B_HZ_PER_G;
/// `μ_N` in rad/s per Gauss.
pub const MU_N: f64 = TAU * MU_N_HZ_PER_G;

/// Frequency in Hz to angular frequency.
#[inline]
pub fn hz(f: f64) -> f64 {
    TAU * f
}

#[inline]
pub fn khz(f: f64) -> f64 {
    TAU * f * 1e3
}

#[inline]
pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e6
}

#[inline]
pub fn ghz(f: f64) -> f64 {
    TAU * f * 1e9
}

/// Angular frequency to MHz (`ω / 2π / 10⁶`).
#[inline]
pub fn to_mhz(w: f64) -> f64 {
    w / TAU / 1e6
}

#[inline]
pub fn to_khz(w: f64) -> f64 {
    w / TAU / 1e3
}

/// `n` points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|k| start + step * k as f64).collect()
        }
    }
}

/// `n` logarithmically spaced points from `start` to `stop` inclusive.
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Inclusive arithmetic range `start, start + step, …` not exceeding `stop`.
pub fn arange(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "step must be positive");
    let n = ((stop - start) / step + 1e-9).floor();
    if n < 0.0 {
        return Vec::new();
    }
    (0..=n as usize).map(|k| start + step * k as f64).collect()
}
