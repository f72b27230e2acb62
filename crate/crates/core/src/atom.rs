//! Atomic constants and the Zeeman, hyperfine and atom–field Hamiltonians on
//! the `¹S₀ ⊕ (J = 1)` ⊗ nuclear-spin space.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{QuditError, Result};
use crate::matrix::{kron, re, ComplexMatrix, HermitianEigen, C64};
use crate::spinops::{
    dipole_components, Spin, SpinOperators, ELECTRONIC_DIM, EXCITED_MINUS, EXCITED_PLUS,
    EXCITED_ZERO, GROUND,
};
use crate::units::{mhz, AU_DIPOLE_CM, EPSILON_0, HBAR, MU_B, MU_N, SPEED_OF_LIGHT};

/// Constants of one `¹S₀ → J = 1` transition of an atom with nuclear spin `I`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomSpec {
    pub label: String,
    pub nuclear_spin: Spin,
    pub excited_j: Spin,
    pub g_j: f64,
    pub g_i: f64,
    /// Magnetic-dipole hyperfine constant, rad/s.
    pub hyperfine_a: f64,
    /// Electric-quadrupole hyperfine constant, rad/s.
    pub hyperfine_q: f64,
    /// Excited-state decay rate Γ, rad/s.
    pub decay_rate: f64,
    /// Transition dipole moment in atomic units (e·a₀).
    pub dipole_au: f64,
    pub wavelength_m: f64,
}

pub const BUILTIN_SPECS: [&str; 2] = ["Yb173_3P1", "Yb173_1P1"];

/// Default `g_J` for the singlet `¹P₁` level (pure `L = 1, S = 0`).
pub const G_J_1P1_DEFAULT: f64 = 1.0;

impl AtomSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        nuclear_spin: f64,
        g_j: f64,
        g_i: f64,
        hyperfine_a: f64,
        hyperfine_q: f64,
        decay_rate: f64,
        dipole_au: f64,
        wavelength_m: f64,
    ) -> Result<Self> {
        let nuclear_spin = Spin::from_f64(nuclear_spin)?;
        if nuclear_spin.twice() < 2 {
            return Err(QuditError::InvalidArgument(
                "quadrupole hyperfine term needs I >= 1".into(),
            ));
        }
        if decay_rate <= 0.0 || dipole_au <= 0.0 {
            return Err(QuditError::InvalidArgument(
                "decay rate and dipole moment must be positive".into(),
            ));
        }
        Ok(Self {
            label: label.into(),
            nuclear_spin,
            excited_j: Spin::from_twice(2),
            g_j,
            g_i,
            hyperfine_a,
            hyperfine_q,
            decay_rate,
            dipole_au,
            wavelength_m,
        })
    }

    pub fn with_g_j(mut self, g_j: f64) -> Self {
        self.g_j = g_j;
        self
    }

    /// Nuclear dimension `2I + 1`.
    pub fn nuc_dim(&self) -> usize {
        self.nuclear_spin.dim()
    }

    pub fn full_dim(&self) -> usize {
        ELECTRONIC_DIM * self.nuc_dim()
    }

    pub fn excited_dim(&self) -> usize {
        (ELECTRONIC_DIM - 1) * self.nuc_dim()
    }

    /// Full-space index of `|electronic, m_I⟩`.
    pub fn full_index(&self, electronic: usize, nuc: usize) -> usize {
        electronic * self.nuc_dim() + nuc
    }

    /// Excited-block index of `|m_J, m_I index⟩` (excited block starts at `m_J = +1`).
    pub fn excited_index(&self, m_j: i32, nuc: usize) -> usize {
        (crate::spinops::excited_index(m_j) - 1) * self.nuc_dim() + nuc
    }

    /// `m_J` and nuclear index of an excited-block index.
    pub fn excited_labels(&self, idx: usize) -> (i32, usize) {
        let el = idx / self.nuc_dim() + 1;
        let m_j = match el {
            EXCITED_PLUS => 1,
            EXCITED_ZERO => 0,
            EXCITED_MINUS => -1,
            _ => unreachable!(),
        };
        (m_j, idx % self.nuc_dim())
    }

    pub fn m_i(&self, nuc: usize) -> f64 {
        self.nuclear_spin.m_at(nuc)
    }

    pub fn nuc_index(&self, m_i: f64) -> Result<usize> {
        self.nuclear_spin
            .index_of(m_i)
            .ok_or_else(|| QuditError::InvalidArgument(format!("m_I = {m_i} is not a valid label")))
    }
}

/// Built-in constants for ¹⁷³Yb.
pub fn builtin_spec(name: &str) -> Result<AtomSpec> {
    match name {
        "Yb173_3P1" => AtomSpec::new(
            name,
            2.5,
            1.5,
            -0.67989,
            mhz(-1094.361),
            mhz(-836.351),
            TAU * 183e3,
            0.54 / 3f64.sqrt(),
            556e-9,
        ),
        "Yb173_1P1" => AtomSpec::new(
            name,
            2.5,
            G_J_1P1_DEFAULT,
            -0.67989,
            mhz(57.91),
            mhz(610.47),
            TAU * 29.1e6,
            4.4 / 3f64.sqrt(),
            399e-9,
        ),
        other => Err(QuditError::UnknownSpec(other.to_string())),
    }
}

/// One operating point of the control laser.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct FieldConfig {
    /// Magnetic field along +z, Gauss.
    pub b_gauss: f64,
    /// Detuning `Δ = ω₀ − ω`, rad/s.
    pub detuning: f64,
    /// Electronic Rabi frequency Ω_E, rad/s.
    pub rabi: f64,
    /// Polarization angle θ from the field axis, radians.
    pub theta: f64,
}

impl FieldConfig {
    pub fn new(b_gauss: f64, detuning: f64, rabi: f64, theta: f64) -> Result<Self> {
        if b_gauss < 0.0 || rabi < 0.0 || !(b_gauss.is_finite() && rabi.is_finite()) {
            return Err(QuditError::InvalidArgument(
                "field and Rabi frequency must be finite and non-negative".into(),
            ));
        }
        if !(-1e-12..=PI / 2.0 + 1e-12).contains(&theta) {
            return Err(QuditError::InvalidArgument(format!(
                "polarization angle {theta} outside [0, π/2]"
            )));
        }
        Ok(Self {
            b_gauss,
            detuning,
            rabi,
            theta,
        })
    }

    /// Linear polarization `ε(θ) = (sin θ, 0, cos θ)`.
    pub fn polarization(&self) -> [C64; 3] {
        [re(self.theta.sin()), re(0.0), re(self.theta.cos())]
    }
}

/// Electronic angular-momentum operators embedded in the 4-dim electronic
/// space (zero on `¹S₀`).
fn electronic_j_ops() -> [ComplexMatrix; 3] {
    let one = SpinOperators::new(Spin::from_twice(2));
    let embed = |m: &ComplexMatrix| {
        ComplexMatrix::from_fn(ELECTRONIC_DIM, |r, c| {
            if r == GROUND || c == GROUND {
                re(0.0)
            } else {
                m[(r - 1, c - 1)]
            }
        })
    };
    [embed(&one.jx), embed(&one.jy), embed(&one.jz)]
}

fn excited_projector_electronic() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[0.0, 1.0, 1.0, 1.0])
}

/// Zeeman Hamiltonian `(g_J μ_B Ĵ − g_I μ_N Î)·B ẑ` on the full space.
pub fn h_zeeman(spec: &AtomSpec, b_gauss: f64) -> ComplexMatrix {
    let [_, _, jz] = electronic_j_ops();
    let nuc = SpinOperators::new(spec.nuclear_spin);
    let id_n = ComplexMatrix::identity(spec.nuc_dim());
    let id_e = ComplexMatrix::identity(ELECTRONIC_DIM);
    let elec = kron(&jz, &id_n).scale(spec.g_j * MU_B * b_gauss);
    let nucl = kron(&id_e, &nuc.jz).scale(-spec.g_i * MU_N * b_gauss);
    &elec + &nucl
}

/// `Î·Ĵ` on the full space (zero on the ground manifold).
pub fn i_dot_j(spec: &AtomSpec) -> ComplexMatrix {
    let j = electronic_j_ops();
    let nuc = SpinOperators::new(spec.nuclear_spin);
    let terms = [
        kron(&j[0], &nuc.jx),
        kron(&j[1], &nuc.jy),
        kron(&j[2], &nuc.jz),
    ];
    &(&terms[0] + &terms[1]) + &terms[2]
}

/// Magnetic-dipole plus electric-quadrupole hyperfine Hamiltonian, acting on
/// the excited manifold only.
pub fn h_hyperfine(spec: &AtomSpec) -> ComplexMatrix {
    let idj = i_dot_j(spec);
    let i = spec.nuclear_spin.value();
    let j = spec.excited_j.value();
    let p_e = kron(
        &excited_projector_electronic(),
        &ComplexMatrix::identity(spec.nuc_dim()),
    );
    let two_idj_plus_one = &idj.scale(2.0) + &p_e;
    let quad_num = &(&idj * &two_idj_plus_one).scale(1.5) - &p_e.scale(i * (i + 1.0) * j * (j + 1.0));
    let denom = 2.0 * i * j * (2.0 * i - 1.0) * (2.0 * j - 1.0);
    &idj.scale(spec.hyperfine_a) + &quad_num.scale(spec.hyperfine_q / denom)
}

/// Closed-form hyperfine energy of the `F` manifold.
pub fn hyperfine_casimir_energy(spec: &AtomSpec, f: f64) -> f64 {
    let i = spec.nuclear_spin.value();
    let j = spec.excited_j.value();
    let k = f * (f + 1.0) - i * (i + 1.0) - j * (j + 1.0);
    spec.hyperfine_a * k / 2.0
        + spec.hyperfine_q * (1.5 * k * (k + 1.0) - 2.0 * i * (i + 1.0) * j * (j + 1.0))
            / (4.0 * i * j * (2.0 * i - 1.0) * (2.0 * j - 1.0))
}

/// `F_z = J_z + I_z` on the full space.
pub fn f_z(spec: &AtomSpec) -> ComplexMatrix {
    let [_, _, jz] = electronic_j_ops();
    let nuc = SpinOperators::new(spec.nuclear_spin);
    let a = kron(&jz, &ComplexMatrix::identity(spec.nuc_dim()));
    let b = kron(&ComplexMatrix::identity(ELECTRONIC_DIM), &nuc.jz);
    &a + &b
}

/// Atom–field coupling `(Ω_E/2)(ε·D̂ + h.c.) ⊗ 𝟙`.
pub fn h_atom_field(spec: &AtomSpec, rabi: f64, eps: [C64; 3]) -> ComplexMatrix {
    let d = dipole_components().project(eps);
    let up = kron(&d, &ComplexMatrix::identity(spec.nuc_dim()));
    (&up + &up.dagger()).scale(rabi / 2.0)
}

/// Full rotating-frame Hamiltonian `H_Z + H_HF − Δ P_E + H_AF`.
pub fn full_hamiltonian(spec: &AtomSpec, cfg: &FieldConfig) -> ComplexMatrix {
    let p_e = kron(
        &excited_projector_electronic(),
        &ComplexMatrix::identity(spec.nuc_dim()),
    );
    let static_part = &(&h_zeeman(spec, cfg.b_gauss) + &h_hyperfine(spec)) - &p_e.scale(cfg.detuning);
    &static_part + &h_atom_field(spec, cfg.rabi, cfg.polarization())
}

/// Blocks of the full Hamiltonian with respect to ground ⊕ excited.
#[derive(Clone, Debug)]
pub struct HamiltonianBlocks {
    pub h_g: ComplexMatrix,
    pub h_e: ComplexMatrix,
    /// Ground rows × excited columns.
    pub w: DMatrix<C64>,
}

pub fn split_blocks(spec: &AtomSpec, h: &ComplexMatrix) -> HamiltonianBlocks {
    let n = spec.nuc_dim();
    let g: Vec<usize> = (0..n).collect();
    let e: Vec<usize> = (n..spec.full_dim()).collect();
    let w = DMatrix::from_fn(n, e.len(), |r, c| h[(g[r], e[c])]);
    HamiltonianBlocks {
        h_g: h.submatrix(&g),
        h_e: h.submatrix(&e),
        w,
    }
}

/// Ground-manifold Zeeman energies, one per nuclear index.
pub fn ground_energies(spec: &AtomSpec, b_gauss: f64) -> Vec<f64> {
    spec.nuclear_spin
        .projections()
        .map(|m| -spec.g_i * MU_N * b_gauss * m)
        .collect()
}

/// Excited block `P_E (H_Z + H_HF − Δ) P_E`.
pub fn excited_hamiltonian(spec: &AtomSpec, b_gauss: f64, detuning: f64) -> ComplexMatrix {
    let h = &h_zeeman(spec, b_gauss) + &h_hyperfine(spec);
    let e: Vec<usize> = (spec.nuc_dim()..spec.full_dim()).collect();
    let he = h.submatrix(&e);
    &he - &ComplexMatrix::identity(e.len()).scale(detuning)
}

/// Eigendecomposition of the excited block, eigenvalues ascending.
pub fn excited_spectrum(spec: &AtomSpec, b_gauss: f64, detuning: f64) -> HermitianEigen {
    excited_hamiltonian(spec, b_gauss, detuning).eigh()
}

/// `min_ν |E_ν(B) − Δ|` with `E_ν` the excited eigenenergies at `Δ = 0`.
pub fn min_detuning(spec: &AtomSpec, b_gauss: f64, detuning: f64) -> f64 {
    min_detuning_from(&excited_spectrum(spec, b_gauss, 0.0).values, detuning)
}

pub fn min_detuning_from(energies: &[f64], detuning: f64) -> f64 {
    energies
        .iter()
        .map(|e| (e - detuning).abs())
        .fold(f64::INFINITY, f64::min)
}

/// One excited eigenstate with definite `m_F`.
#[derive(Clone, Debug)]
pub struct ExcitedLevel {
    /// Energy at `Δ = 0`, rad/s.
    pub energy: f64,
    pub m_f: f64,
    /// Position within its `m_F` sector, counted from the lowest energy.
    pub rank_in_sector: usize,
    /// Amplitudes on the excited product basis.
    pub vector: Vec<C64>,
}

impl ExcitedLevel {
    /// Population of each `m_J ∈ {+1, 0, −1}` (in that order).
    pub fn m_j_weights(&self, spec: &AtomSpec) -> [f64; 3] {
        let n = spec.nuc_dim();
        let mut w = [0.0; 3];
        for (k, a) in self.vector.iter().enumerate() {
            w[k / n] += a.norm_sqr();
        }
        w
    }

    /// Dominant product-basis component `(m_J, m_I)` and its weight.
    pub fn dominant(&self, spec: &AtomSpec) -> (i32, f64, f64) {
        let (k, w) = self
            .vector
            .iter()
            .enumerate()
            .map(|(k, a)| (k, a.norm_sqr()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let (m_j, nuc) = spec.excited_labels(k);
        (m_j, spec.m_i(nuc), w)
    }
}

/// Excited eigenstates obtained by diagonalizing each `m_F` sector separately,
/// sorted by energy. Every returned vector has a definite `m_F`, even at
/// accidental crossings between sectors.
pub fn excited_levels(spec: &AtomSpec, b_gauss: f64) -> Vec<ExcitedLevel> {
    let he = excited_hamiltonian(spec, b_gauss, 0.0);
    let dim = spec.excited_dim();
    let m_f_of = |k: usize| {
        let (m_j, nuc) = spec.excited_labels(k);
        m_j as f64 + spec.m_i(nuc)
    };
    let mut sectors: Vec<f64> = (0..dim).map(m_f_of).collect();
    sectors.sort_by(|a, b| b.total_cmp(a));
    sectors.dedup();
    let mut levels = Vec::with_capacity(dim);
    for m_f in sectors {
        let idx: Vec<usize> = (0..dim).filter(|&k| (m_f_of(k) - m_f).abs() < 1e-9).collect();
        let eig = he.submatrix(&idx).eigh();
        for (rank, &energy) in eig.values.iter().enumerate() {
            let mut vector = vec![re(0.0); dim];
            for (local, &k) in idx.iter().enumerate() {
                vector[k] = eig.vectors[(local, rank)];
            }
            levels.push(ExcitedLevel {
                energy,
                m_f,
                rank_in_sector: rank,
                vector,
            });
        }
    }
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(b.m_f.total_cmp(&a.m_f)));
    levels
}

/// Intensity in W/cm² needed for electronic Rabi frequency `rabi` (rad/s),
/// from `ħ Ω = D √(2 I / ε₀ c)`.
pub fn rabi_to_intensity(spec: &AtomSpec, rabi: f64) -> f64 {
    let d = spec.dipole_au * AU_DIPOLE_CM;
    let e0 = HBAR * rabi / d;
    0.5 * EPSILON_0 * SPEED_OF_LIGHT * e0 * e0 / 1e4
}

/// Inverse of [`rabi_to_intensity`]; intensity in W/cm².
pub fn intensity_to_rabi(spec: &AtomSpec, intensity_w_cm2: f64) -> f64 {
    let d = spec.dipole_au * AU_DIPOLE_CM;
    let i = intensity_w_cm2 * 1e4;
    d * (2.0 * i / (EPSILON_0 * SPEED_OF_LIGHT)).sqrt() / HBAR
}

/// Optical power (W) of a Gaussian beam with waist `w0` (m) whose peak
/// intensity is `intensity_w_cm2`, from `I = 2P / (π w₀²)`.
pub fn power_for_waist(intensity_w_cm2: f64, waist_m: f64) -> f64 {
    intensity_w_cm2 * 1e4 * PI * waist_m * waist_m / 2.0
}

/// Hyperfine mixing of the excited product basis at field `b_gauss`:
/// `(‖offdiag‖_F / diagonal spread, max_rc |H_rc| / |H_rr − H_cc|)`.
pub fn product_basis_mixing(spec: &AtomSpec, b: f64) -> (f64, f64) {
    let he = excited_hamiltonian(spec, b, 0.0);
    let n = he.dim();
    let diag = he.real_diagonal();
    let mut worst: f64 = 0.0;
    let mut off2 = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c && he[(r, c)].norm() > 0.0 {
                off2 += he[(r, c)].norm_sqr();
                worst = worst.max(he[(r, c)].norm() / (diag[r] - diag[c]).abs());
            }
        }
    }
    let spread = diag.iter().cloned().fold(f64::MIN, f64::max)
        - diag.iter().cloned().fold(f64::MAX, f64::min);
    (off2.sqrt() / spread, worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::commutator;
    use crate::units::khz;

    fn yb3() -> AtomSpec {
        builtin_spec("Yb173_3P1").unwrap()
    }

    #[test]
    fn builtin_constants() {
        let s = yb3();
        assert_eq!(s.hyperfine_a, mhz(-1094.361));
        assert_eq!(s.g_i, -0.67989);
        assert_eq!(s.nuc_dim(), 6);
        let p = builtin_spec("Yb173_1P1").unwrap();
        assert_eq!(p.hyperfine_q, mhz(610.47));
        assert_eq!(p.g_j, 1.0);
        assert!(matches!(builtin_spec("Sr87"), Err(QuditError::UnknownSpec(_))));
    }

    #[test]
    fn ground_zeeman_ladder() {
        let s = yb3();
        let hz = h_zeeman(&s, 500.0);
        let d = hz.real_diagonal();
        for k in 0..5 {
            // descending order: index k holds m_I, index k+1 holds m_I − 1
            let split = d[k] - d[k + 1];
            assert!((split - khz(259.1)).abs() < khz(0.05), "split {split}");
        }
        assert_eq!(h_zeeman(&s, 0.0).max_abs(), 0.0);
        let c = commutator(&hz, &f_z(&s)).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn hyperfine_manifolds_match_casimir() {
        let s = yb3();
        let hf = h_hyperfine(&s);
        assert!(hf.is_hermitian(1e-14));
        assert!(commutator(&hf, &f_z(&s)).unwrap().max_abs() < 1e-12 * hf.max_abs());
        let e = excited_spectrum(&s, 0.0, 0.0).values;
        let mut expected = Vec::new();
        for (f, deg) in [(1.5, 4), (2.5, 6), (3.5, 8)] {
            for _ in 0..deg {
                expected.push(hyperfine_casimir_energy(&s, f));
            }
        }
        expected.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn stretched_hyperfine_element() {
        let s = yb3();
        let hf = h_hyperfine(&s);
        let k = s.full_index(EXCITED_MINUS, 5);
        // I·J = m_I m_J = 5/2 on the stretched state, K = 5 for F = 7/2
        let expected = hyperfine_casimir_energy(&s, 3.5);
        assert!((hf[(k, k)].re - expected).abs() < 1e-6);
        for c in 0..s.full_dim() {
            if c != k {
                assert!(hf[(k, c)].norm() < 1e-9);
            }
        }
    }

    #[test]
    fn blocks_and_polarization_structure() {
        let s = yb3();
        let cfg = FieldConfig::new(500.0, mhz(-3000.0), 0.0, 0.3).unwrap();
        let b = split_blocks(&s, &full_hamiltonian(&s, &cfg));
        assert_eq!(b.w.iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
        assert_eq!(b.h_g.off_diagonal_ratio(), 0.0);

        let cfg = FieldConfig::new(500.0, mhz(-3000.0), mhz(15.0), 0.0).unwrap();
        let b = split_blocks(&s, &full_hamiltonian(&s, &cfg));
        for c in 0..s.excited_dim() {
            let (m_j, _) = s.excited_labels(c);
            if m_j != 0 {
                for r in 0..6 {
                    assert_eq!(b.w[(r, c)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn coupling_norm_is_half_rabi() {
        let s = yb3();
        let rabi = mhz(20.0);
        for k in 0..=10 {
            let theta = PI / 2.0 * k as f64 / 10.0;
            let cfg = FieldConfig::new(300.0, 0.0, rabi, theta).unwrap();
            let h = full_hamiltonian(&s, &cfg);
            assert!(h.is_hermitian(1e-12));
            let w = split_blocks(&s, &h).w;
            let smax = w.svd(false, false).singular_values.max();
            assert!((smax - rabi / 2.0).abs() < 1e-9 * rabi);
        }
    }

    #[test]
    fn detuning_shifts_spectrum() {
        let s = yb3();
        let a = excited_spectrum(&s, 400.0, 0.0).values;
        let d = mhz(123.0);
        let b = excited_spectrum(&s, 400.0, d).values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - d - y).abs() < 1e-12 * x.abs().max(d));
        }
    }

    #[test]
    fn stretched_states_are_exact_eigenvectors() {
        for spec in [yb3(), builtin_spec("Yb173_1P1").unwrap()] {
            for b in [0.0, 1.0, 137.0, 500.0, 1000.0, 2000.0] {
                let he = excited_hamiltonian(&spec, b, 0.0);
                let norm = he.spectral_norm();
                for (m_j, nuc) in [(-1, 5usize), (1, 0usize)] {
                    let k = spec.excited_index(m_j, nuc);
                    let mut v = vec![re(0.0); spec.excited_dim()];
                    v[k] = re(1.0);
                    let hv = he.matvec(&v);
                    let lambda = hv[k];
                    let resid: f64 = hv
                        .iter()
                        .zip(&v)
                        .map(|(a, b)| (a - lambda * b).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    assert!(resid <= 1e-10 * norm);
                }
            }
        }
    }

    #[test]
    fn min_detuning_cases() {
        let s = yb3();
        let e = excited_spectrum(&s, 500.0, 0.0).values;
        assert!(min_detuning(&s, 500.0, e[3]) < 1e-3);
        let far = -mhz(1e7);
        let md = min_detuning(&s, 500.0, far);
        assert!((md / far.abs() - 1.0).abs() < 1e-3);
        let d = mhz(-3000.0);
        let brute = e.iter().map(|x| (x - d).abs()).fold(f64::INFINITY, f64::min);
        assert_eq!(min_detuning(&s, 500.0, d), brute);
    }

    #[test]
    fn sector_levels_cover_spectrum() {
        let s = yb3();
        let lv = excited_levels(&s, 500.0);
        let e = excited_spectrum(&s, 500.0, 0.0).values;
        assert_eq!(lv.len(), 18);
        for (a, b) in lv.iter().zip(&e) {
            assert!((a.energy - b).abs() < 1e-3);
        }
        let stretched: Vec<_> = lv.iter().filter(|l| (l.m_f + 3.5).abs() < 1e-9).collect();
        assert_eq!(stretched.len(), 1);
        assert_eq!(stretched[0].dominant(&s).0, -1);
    }

    #[test]
    fn intensity_round_trip_and_power() {
        let s = yb3();
        assert_eq!(rabi_to_intensity(&s, 0.0), 0.0);
        for w in [mhz(1.0), mhz(10.0), mhz(77.0)] {
            let i = rabi_to_intensity(&s, w);
            assert!((intensity_to_rabi(&s, i) / w - 1.0).abs() < 1e-12);
        }
        // 2P/(π w0²) inverted
        let p = power_for_waist(1.0, 1e-4);
        assert!((2.0 * p / (PI * 1e-8) / 1e4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paschen_back_off_diagonal_ratio() {
        let s = yb3();
        // first-order mixing decays as 1/B and is ~1.2e-2 at 1e5 G
        let (g1, p1) = product_basis_mixing(&s, 1e5);
        let (g2, p2) = product_basis_mixing(&s, 2e5);
        assert!((p1 / p2 - 2.0).abs() < 0.05, "{p1} {p2}");
        assert!((g1 / g2 - 2.0).abs() < 0.05, "{g1} {g2}");
        assert!(p1 < 1.5e-2);
        assert!(product_basis_mixing(&s, 1.5e5).1 < 1e-2);
    }
}
