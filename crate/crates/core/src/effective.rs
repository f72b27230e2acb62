//! Adiabatic elimination of the excited manifold.
//!
//! The polarizability tensor `α_ij = P_G D_i† H_E⁻¹ D_j P_G` is built from the
//! excited eigendecomposition, which depends on the field only: a single
//! [`ExcitedResolvent`] serves every detuning at that field.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::atom::{excited_spectrum, ground_energies, min_detuning_from, AtomSpec, FieldConfig};
use crate::error::{QuditError, Result};
use crate::matrix::{re, ComplexMatrix, C64};
use crate::spinops::{dipole_components, Spin, GROUND};

/// Minimum detuning from every excited level below which the resolvent is
/// treated as singular (2π × 1 MHz).
pub const DELTA_FLOOR: f64 = TAU * 1e6;

/// Excited-manifold eigen-data at one field, with the dipole matrix elements
/// `⟨ν| D_j ⊗ 𝟙 |g, m⟩` precomputed.
#[derive(Clone, Debug)]
pub struct ExcitedResolvent {
    pub b_gauss: f64,
    pub nuclear_spin: Spin,
    /// Excited eigenenergies at `Δ = 0`, ascending.
    pub energies: Vec<f64>,
    /// Per cartesian component, an `n_excited × n_ground` array.
    proj: [DMatrix<C64>; 3],
    ground: Vec<f64>,
}

impl ExcitedResolvent {
    pub fn new(spec: &AtomSpec, b_gauss: f64) -> Self {
        let eig = excited_spectrum(spec, b_gauss, 0.0);
        let dip = dipole_components();
        let n_g = spec.nuc_dim();
        let n_e = spec.excited_dim();
        let proj = [0, 1, 2].map(|j| {
            let d = dip.component(j);
            DMatrix::from_fn(n_e, n_g, |nu, m| {
                // D_j |g, m⟩ only populates |m_J, m⟩
                [1, 0, -1]
                    .iter()
                    .map(|&m_j| {
                        let el = crate::spinops::excited_index(m_j);
                        let k = spec.excited_index(m_j, m);
                        eig.vectors[(k, nu)].conj() * d[(el, GROUND)]
                    })
                    .sum()
            })
        });
        Self {
            b_gauss,
            nuclear_spin: spec.nuclear_spin,
            energies: eig.values,
            proj,
            ground: ground_energies(spec, b_gauss),
        }
    }

    pub fn min_detuning(&self, detuning: f64) -> f64 {
        min_detuning_from(&self.energies, detuning)
    }

    pub fn ground_energies(&self) -> &[f64] {
        &self.ground
    }

    /// Polarizability tensor at detuning `Δ`.
    pub fn polarizability(&self, detuning: f64) -> Result<PolarizabilityTensor> {
        let delta_min = self.min_detuning(detuning);
        if delta_min <= DELTA_FLOOR {
            return Err(QuditError::SingularExcitedManifold {
                delta_min,
                floor: DELTA_FLOOR,
            });
        }
        let inv: Vec<f64> = self.energies.iter().map(|e| 1.0 / (e - detuning)).collect();
        let n = self.nuclear_spin.dim();
        let block = |i: usize, j: usize| {
            let (a, b) = (&self.proj[i], &self.proj[j]);
            ComplexMatrix::from_fn(n, |m, mp| {
                inv.iter()
                    .enumerate()
                    .map(|(nu, w)| a[(nu, m)].conj() * b[(nu, mp)] * *w)
                    .sum()
            })
        };
        let components = [0, 1, 2].map(|i| [0, 1, 2].map(|j| block(i, j)));
        Ok(PolarizabilityTensor {
            components,
            delta_min,
        })
    }
}

/// Operator-valued polarizability `α_ij`, `i, j ∈ {x, y, z}`, in 1/(rad/s).
#[derive(Clone, Debug)]
pub struct PolarizabilityTensor {
    pub components: [[ComplexMatrix; 3]; 3],
    /// Minimum excited detuning at which the tensor was evaluated.
    pub delta_min: f64,
}

pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;

impl PolarizabilityTensor {
    pub fn get(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.components[i][j]
    }

    /// `ε† α ε`.
    pub fn contract(&self, eps: [C64; 3]) -> ComplexMatrix {
        let n = self.components[0][0].dim();
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..3 {
            for j in 0..3 {
                let w = eps[i].conj() * eps[j];
                if w != re(0.0) {
                    out = &out + &self.components[i][j].scale_c(w);
                }
            }
        }
        out
    }

    /// Block-Hermiticity error `max |α_ij(m,m′) − α_ji(m′,m)*|`, relative.
    pub fn block_hermiticity_error(&self) -> f64 {
        let scale = self
            .components
            .iter()
            .flatten()
            .map(|m| m.max_abs())
            .fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d = &self.components[i][j] - &self.components[j][i].dagger();
                worst = worst.max(d.max_abs());
            }
        }
        worst / scale
    }
}

/// Polarizability at `(B, Δ)`.
pub fn polarizability(spec: &AtomSpec, b_gauss: f64, detuning: f64) -> Result<PolarizabilityTensor> {
    ExcitedResolvent::new(spec, b_gauss).polarizability(detuning)
}

/// Effective ground-manifold Hamiltonian and its five-diagonal coefficients.
///
/// Per-level vectors (`ground`, `s_z`, `s_x`) are indexed by nuclear basis
/// index (descending `m_I`). `g[k]` is `⟨m|α_xz + α_zx|m+1⟩` where `m+1`
/// has index `k` and `m` index `k + 1`; `h[k]` is `⟨m|α_xx|m+2⟩` with `m+2`
/// at index `k`.
#[derive(Clone, Debug, Serialize)]
pub struct EffectiveModel {
    #[serde(skip)]
    pub h_eff: ComplexMatrix,
    pub ground: Vec<f64>,
    pub s_z: Vec<f64>,
    pub s_x: Vec<f64>,
    pub g: Vec<C64>,
    pub h: Vec<C64>,
    pub cfg: FieldConfig,
    pub delta_min: f64,
    pub nuclear_spin: Spin,
}

impl EffectiveModel {
    pub fn from_tensor(
        alpha: &PolarizabilityTensor,
        ground: &[f64],
        nuclear_spin: Spin,
        cfg: FieldConfig,
    ) -> Self {
        let n = ground.len();
        let h_g = ComplexMatrix::from_real_diagonal(ground);
        let light = alpha.contract(cfg.polarization());
        let h_eff = &h_g - &light.scale(cfg.rabi * cfg.rabi / 4.0);
        let azz = alpha.get(Z, Z);
        let axx = alpha.get(X, X);
        let cross = alpha.get(X, Z) + alpha.get(Z, X);
        Self {
            h_eff,
            ground: ground.to_vec(),
            s_z: azz.real_diagonal(),
            s_x: axx.real_diagonal(),
            g: (0..n.saturating_sub(1)).map(|k| cross[(k + 1, k)]).collect(),
            h: (0..n.saturating_sub(2)).map(|k| axx[(k + 2, k)]).collect(),
            cfg,
            delta_min: alpha.delta_min,
            nuclear_spin,
        }
    }

    pub fn dim(&self) -> usize {
        self.ground.len()
    }

    fn light_scale(&self) -> f64 {
        self.cfg.rabi * self.cfg.rabi / 4.0
    }

    /// Diagonal effective energies at polarization angle `theta`.
    pub fn diagonal_at(&self, theta: f64) -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        let k = self.light_scale();
        (0..self.dim())
            .map(|m| self.ground[m] - k * (self.s_z[m] * c * c + self.s_x[m] * s * s))
            .collect()
    }

    /// Five-diagonal Hamiltonian assembled from `(E^G, s^z, s^x, g, h)` at
    /// angle `theta`.
    pub fn assemble(&self, theta: f64) -> ComplexMatrix {
        let (s, c) = theta.sin_cos();
        let k = self.light_scale();
        let mut m = ComplexMatrix::from_real_diagonal(&self.diagonal_at(theta));
        for (idx, g) in self.g.iter().enumerate() {
            // ⟨m|H|m+1⟩ with m at idx+1, m+1 at idx
            let v = *g * (-k * s * c);
            m[(idx + 1, idx)] = v;
            m[(idx, idx + 1)] = v.conj();
        }
        for (idx, h) in self.h.iter().enumerate() {
            let v = *h * (-k * s * s);
            m[(idx + 2, idx)] = v;
            m[(idx, idx + 2)] = v.conj();
        }
        m
    }

    /// Copy of this model at another polarization angle.
    pub fn at_theta(&self, theta: f64) -> Self {
        let mut out = self.clone();
        out.cfg.theta = theta;
        out.h_eff = self.assemble(theta);
        out
    }

    pub fn nuc_index(&self, m_i: f64) -> Result<usize> {
        self.nuclear_spin
            .index_of(m_i)
            .ok_or_else(|| QuditError::InvalidArgument(format!("m_I = {m_i} is not a valid label")))
    }

    /// Coefficient `g` of the transition whose lower state is `m_i`.
    pub fn g_for(&self, m_i: f64) -> Result<C64> {
        let lower = self.nuc_index(m_i)?;
        if lower == 0 {
            return Err(QuditError::InvalidArgument(format!(
                "m_I = {m_i} has no upper neighbour"
            )));
        }
        Ok(self.g[lower - 1])
    }
}

/// `H_eff = H_G − (Ω_E²/4) ε†(θ) α ε(θ)` at one operating point.
pub fn effective_hamiltonian(spec: &AtomSpec, cfg: &FieldConfig) -> Result<EffectiveModel> {
    let res = ExcitedResolvent::new(spec, cfg.b_gauss);
    effective_from_resolvent(&res, cfg)
}

pub fn effective_from_resolvent(res: &ExcitedResolvent, cfg: &FieldConfig) -> Result<EffectiveModel> {
    let alpha = res.polarizability(cfg.detuning)?;
    Ok(EffectiveModel::from_tensor(
        &alpha,
        res.ground_energies(),
        res.nuclear_spin,
        *cfg,
    ))
}

/// Crude excited-population bound `Ω_E² / (4 δ_min²)`.
pub fn excited_population_bound(rabi: f64, delta_min: f64) -> Result<f64> {
    if delta_min <= 0.0 {
        return Err(QuditError::InvalidArgument(
            "minimum detuning must be positive".into(),
        ));
    }
    Ok(rabi * rabi / (4.0 * delta_min * delta_min))
}

/// Scattered photons per operation `Γ p_E / f_op`, with `f_op` in Hz.
pub fn scattered_photons_bound(spec: &AtomSpec, p_e: f64, f_op_hz: f64) -> Result<f64> {
    if f_op_hz <= 0.0 {
        return Err(QuditError::InvalidArgument(
            "operation frequency must be positive".into(),
        ));
    }
    Ok(spec.decay_rate * p_e / f_op_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{builtin_spec, excited_hamiltonian};
    use crate::units::{ghz, khz, mhz};
    use std::f64::consts::FRAC_PI_2;

    fn yb3() -> AtomSpec {
        builtin_spec("Yb173_3P1").unwrap()
    }

    /// Independent route: solve `H_E x = D_j |g, m′⟩` column by column.
    fn polarizability_by_solve(spec: &AtomSpec, b: f64, delta: f64) -> [[DMatrix<C64>; 3]; 3] {
        let he = excited_hamiltonian(spec, b, delta).into_dmatrix();
        let lu = he.lu();
        let dip = dipole_components();
        let n = spec.nuc_dim();
        let ne = spec.excited_dim();
        let col = |j: usize, m: usize| {
            let mut v = nalgebra::DVector::<C64>::zeros(ne);
            for m_j in [1, 0, -1] {
                let el = crate::spinops::excited_index(m_j);
                v[spec.excited_index(m_j, m)] = dip.component(j)[(el, GROUND)];
            }
            v
        };
        [0, 1, 2].map(|i| {
            [0, 1, 2].map(|j| {
                DMatrix::from_fn(n, n, |m, mp| {
                    let x = lu.solve(&col(j, mp)).unwrap();
                    col(i, m).dotc(&x)
                })
            })
        })
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn eigen_route_matches_linear_solve() {
        let s = yb3();
        for (b, d) in [(500.0, mhz(-3000.0)), (137.0, mhz(1234.0)), (1800.0, mhz(-250.0))] {
            let a = polarizability(&s, b, d).unwrap();
            let o = polarizability_by_solve(&s, b, d);
            let scale = a.components.iter().flatten().map(|m| m.max_abs()).fold(0.0, f64::max);
            for i in 0..3 {
                for j in 0..3 {
                    let diff = (a.get(i, j).as_dmatrix() - &o[i][j]).iter().map(|z| z.norm()).fold(0.0, f64::max);
                    assert!(diff <= 1e-10 * scale, "({i},{j}) diff {diff:e} scale {scale:e}");
                }
            }
        }
    }

    #[test]
    fn far_detuned_limit() {
        let s = yb3();
        let d = ghz(1000.0);
        let a = polarizability(&s, 500.0, -d).unwrap();
        // H_E ≈ −Δ ⇒ α_zz ≈ −𝟙/Δ with Δ = −d
        for m in 0..6 {
            let v = a.get(Z, Z)[(m, m)].re;
            assert!((v / (1.0 / d) - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn tensor_structure() {
        let s = yb3();
        let a = polarizability(&s, 700.0, mhz(-1500.0)).unwrap();
        assert!(a.block_hermiticity_error() < 1e-12);
        for m in 0..6 {
            assert!((a.get(Z, X)[(m, m)] - a.get(X, Z)[(m, m)].conj()).norm() < 1e-20);
        }
        let scale = a.get(X, X).max_abs();
        for r in 0..6usize {
            for c in 0..6usize {
                if r.abs_diff(c) > 2 {
                    assert!(a.get(X, X)[(r, c)].norm() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn singular_manifold_rejected() {
        let s = yb3();
        let e = ExcitedResolvent::new(&s, 500.0);
        let at = e.energies[4] + mhz(0.5);
        assert!(matches!(
            e.polarizability(at),
            Err(QuditError::SingularExcitedManifold { .. })
        ));
    }

    #[test]
    fn zero_drive_gives_zeeman() {
        let s = yb3();
        let cfg = FieldConfig::new(500.0, mhz(-3000.0), 0.0, 0.7).unwrap();
        let m = effective_hamiltonian(&s, &cfg).unwrap();
        let hg = ComplexMatrix::from_real_diagonal(&ground_energies(&s, 500.0));
        assert_eq!(m.h_eff, hg);
    }

    #[test]
    fn theta_zero_is_diagonal() {
        let s = yb3();
        let cfg = FieldConfig::new(500.0, mhz(-3000.0), mhz(15.0), 0.0).unwrap();
        let m = effective_hamiltonian(&s, &cfg).unwrap();
        assert!(m.h_eff.off_diagonal_ratio() < 1e-12);
        let k = cfg.rabi * cfg.rabi / 4.0;
        for i in 0..6 {
            let expected = m.ground[i] - k * m.s_z[i];
            assert!((m.h_eff[(i, i)].re - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn reconstruction_identity() {
        let s = yb3();
        for theta in [0.0, 0.3, 0.9, FRAC_PI_2] {
            let cfg = FieldConfig::new(640.0, mhz(-2200.0), mhz(40.0), theta).unwrap();
            let m = effective_hamiltonian(&s, &cfg).unwrap();
            let rebuilt = m.assemble(theta);
            assert!((&rebuilt - &m.h_eff).max_abs() <= 1e-12 * m.h_eff.max_abs());
            assert!(m.h_eff.is_hermitian(1e-12));
        }
    }

    #[test]
    fn theta_quadrature_decomposition() {
        let s = yb3();
        let res = ExcitedResolvent::new(&s, 800.0);
        let at = |theta: f64| {
            let cfg = FieldConfig::new(800.0, mhz(-900.0), mhz(25.0), theta).unwrap();
            effective_from_resolvent(&res, &cfg).unwrap().h_eff
        };
        let h0 = at(0.0);
        let h90 = at(FRAC_PI_2);
        let t = 0.6_f64;
        let cross = {
            // recover the cross term from the sample at t
            let (sn, cs) = t.sin_cos();
            let rest = &at(t) - &(&h0.scale(cs * cs) + &h90.scale(sn * sn));
            rest.scale(1.0 / (sn * cs))
        };
        for theta in [0.2_f64, 1.1, 1.4] {
            let (sn, cs) = theta.sin_cos();
            let pred = &(&h0.scale(cs * cs) + &h90.scale(sn * sn)) + &cross.scale(sn * cs);
            assert!((&pred - &at(theta)).max_abs() <= 1e-10 * h0.max_abs());
        }
    }

    #[test]
    fn population_and_scattering_bounds() {
        let dm = mhz(100.0);
        assert!((excited_population_bound(0.2 * dm, dm).unwrap() - 0.01).abs() < 1e-15);
        assert!((excited_population_bound(2.0 * dm, dm).unwrap() - 1.0).abs() < 1e-15);
        assert!((excited_population_bound(mhz(20.0), ghz(1.0)).unwrap() - 1e-4).abs() < 1e-18);
        assert!(excited_population_bound(1.0, 0.0).is_err());

        let s = yb3();
        let n = scattered_photons_bound(&s, 0.01, 100e3).unwrap();
        assert!((n - 0.115).abs() < 1e-3);
        assert_eq!(scattered_photons_bound(&s, 0.0, 100e3).unwrap(), 0.0);
        let half = scattered_photons_bound(&s, 0.01, 200e3).unwrap();
        assert!((half * 2.0 - n).abs() < 1e-15);
        let _ = khz(1.0);
    }
}
