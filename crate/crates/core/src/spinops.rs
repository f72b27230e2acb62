//! Angular-momentum matrices and the electronic dipole operators.
//!
//! Basis order everywhere is descending projection, `m = +j, …, −j`. On the
//! product space the electronic index varies slowest:
//! `full = electronic * (2I + 1) + nuclear`.

use crate::error::{QuditError, Result};
use crate::matrix::{re, ComplexMatrix, C64};

/// Half-integer spin quantum number stored as `2j`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Spin(u32);

impl Spin {
    pub fn from_f64(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !j.is_finite() || j < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(QuditError::InvalidSpin(j));
        }
        Ok(Self(twice.round() as u32))
    }

    pub const fn from_twice(twice_j: u32) -> Self {
        Self(twice_j)
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// Projection at basis index `k` (descending order).
    pub fn m_at(self, k: usize) -> f64 {
        self.value() - k as f64
    }

    /// Basis index of projection `m`, if `m` is a valid projection.
    pub fn index_of(self, m: f64) -> Option<usize> {
        let k = self.value() - m;
        if k < -1e-9 || (k - k.round()).abs() > 1e-9 {
            return None;
        }
        let k = k.round() as usize;
        (k < self.dim()).then_some(k)
    }

    pub fn projections(self) -> impl Iterator<Item = f64> {
        (0..self.dim()).map(move |k| self.m_at(k))
    }
}

#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub j: Spin,
    pub jx: ComplexMatrix,
    pub jy: ComplexMatrix,
    pub jz: ComplexMatrix,
    pub jplus: ComplexMatrix,
    pub jminus: ComplexMatrix,
}

impl SpinOperators {
    pub fn new(j: Spin) -> Self {
        let n = j.dim();
        let jv = j.value();
        let mut jz = ComplexMatrix::zeros(n);
        let mut jplus = ComplexMatrix::zeros(n);
        for k in 0..n {
            let m = j.m_at(k);
            jz[(k, k)] = re(m);
            // ⟨m+1| J+ |m⟩ sits one row above
            if k > 0 {
                jplus[(k - 1, k)] = re((jv * (jv + 1.0) - m * (m + 1.0)).sqrt());
            }
        }
        let jminus = jplus.dagger();
        let jx = (&jplus + &jminus).scale(0.5);
        let jy = (&jplus - &jminus).scale_c(C64::new(0.0, -0.5));
        Self {
            j,
            jx,
            jy,
            jz,
            jplus,
            jminus,
        }
    }

    /// `J² = Jx² + Jy² + Jz²`.
    pub fn casimir(&self) -> ComplexMatrix {
        let xx = &self.jx * &self.jx;
        let yy = &self.jy * &self.jy;
        let zz = &self.jz * &self.jz;
        &(&xx + &yy) + &zz
    }
}

/// Spin matrices for spin `j` in the descending-m basis.
pub fn spin_matrices(j: f64) -> Result<SpinOperators> {
    Ok(SpinOperators::new(Spin::from_f64(j)?))
}

/// Electronic basis: `¹S₀` followed by the `J = 1` triplet `m_J = +1, 0, −1`.
pub const ELECTRONIC_DIM: usize = 4;
pub const GROUND: usize = 0;
pub const EXCITED_PLUS: usize = 1;
pub const EXCITED_ZERO: usize = 2;
pub const EXCITED_MINUS: usize = 3;

/// Electronic index of an excited `m_J ∈ {+1, 0, −1}`.
pub fn excited_index(m_j: i32) -> usize {
    match m_j {
        1 => EXCITED_PLUS,
        0 => EXCITED_ZERO,
        -1 => EXCITED_MINUS,
        _ => panic!("m_J = {m_j} is outside the J = 1 manifold"),
    }
}

#[derive(Clone, Debug)]
pub struct DipoleComponents {
    pub dx: ComplexMatrix,
    pub dy: ComplexMatrix,
    pub dz: ComplexMatrix,
}

impl DipoleComponents {
    /// Cartesian component by index `0 = x, 1 = y, 2 = z`.
    pub fn component(&self, i: usize) -> &ComplexMatrix {
        match i {
            0 => &self.dx,
            1 => &self.dy,
            2 => &self.dz,
            _ => panic!("cartesian index {i} out of range"),
        }
    }

    /// `ε · D̂` for a (possibly complex) polarization vector.
    pub fn project(&self, eps: [C64; 3]) -> ComplexMatrix {
        let x = self.dx.scale_c(eps[0]);
        let y = self.dy.scale_c(eps[1]);
        let z = self.dz.scale_c(eps[2]);
        &(&x + &y) + &z
    }
}

/// Normalized dipole operators on the 4-dim electronic space, mapping the
/// ground state into the excited triplet.
pub fn dipole_components() -> DipoleComponents {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut dx = ComplexMatrix::zeros(ELECTRONIC_DIM);
    let mut dy = ComplexMatrix::zeros(ELECTRONIC_DIM);
    let mut dz = ComplexMatrix::zeros(ELECTRONIC_DIM);
    dx[(EXCITED_MINUS, GROUND)] = re(s);
    dx[(EXCITED_PLUS, GROUND)] = re(-s);
    dy[(EXCITED_MINUS, GROUND)] = C64::new(0.0, s);
    dy[(EXCITED_PLUS, GROUND)] = C64::new(0.0, s);
    dz[(EXCITED_ZERO, GROUND)] = re(1.0);
    DipoleComponents { dx, dy, dz }
}
