//! Field-dependent level curves with adiabatic-continuation labels.

use serde::Serialize;

use crate::atom::{excited_levels, ground_energies, AtomSpec};
use crate::error::{QuditError, Result};
use crate::matrix::C64;

/// Minimum eigenvector overlap between successive fields for a label to be
/// continued.
pub const MIN_TRACKING_OVERLAP: f64 = 0.5;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Manifold {
    Ground,
    Excited,
}

/// Dominant product-basis character at one field.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Character {
    /// `None` for the ground manifold, which has no electronic angular momentum.
    pub m_j: Option<i32>,
    pub m_i: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelCurve {
    pub label: String,
    pub manifold: Manifold,
    pub m_f: f64,
    /// Energies at `Δ = 0`, rad/s, one per field.
    pub energies: Vec<f64>,
    pub characters: Vec<Character>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumCurve {
    pub field_grid: Vec<f64>,
    pub excited: Vec<LevelCurve>,
    pub ground: Vec<LevelCurve>,
    /// Smallest successive overlap met while tracking.
    pub min_overlap: f64,
}

impl SpectrumCurve {
    pub fn curves(&self) -> impl Iterator<Item = &LevelCurve> {
        self.ground.iter().chain(&self.excited)
    }
}

fn overlap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

/// Breit–Rabi diagram over an ascending field grid.
///
/// Levels are continued from one field to the next by maximal eigenvector
/// overlap within each `m_F` sector.
pub fn breit_rabi(spec: &AtomSpec, b_grid: &[f64]) -> Result<SpectrumCurve> {
    if b_grid.is_empty() {
        return Err(QuditError::Empty("field grid".into()));
    }
    if b_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QuditError::InvalidArgument(
            "field grid must be strictly ascending".into(),
        ));
    }

    let first = excited_levels(spec, b_grid[0]);
    let mut excited: Vec<LevelCurve> = first
        .iter()
        .map(|l| {
            let (m_j, m_i, weight) = l.dominant(spec);
            LevelCurve {
                label: format!("e:mF={:+}/2:{}", (2.0 * l.m_f).round() as i32, l.rank_in_sector),
                manifold: Manifold::Excited,
                m_f: l.m_f,
                energies: vec![l.energy],
                characters: vec![Character {
                    m_j: Some(m_j),
                    m_i,
                    weight,
                }],
            }
        })
        .collect();
    let mut vectors: Vec<Vec<C64>> = first.into_iter().map(|l| l.vector).collect();
    let mut min_overlap: f64 = 1.0;

    for w in b_grid.windows(2) {
        let levels = excited_levels(spec, w[1]);
        let mut taken = vec![false; levels.len()];
        let mut next_vectors = vectors.clone();
        for (c, curve) in excited.iter_mut().enumerate() {
            let best = levels
                .iter()
                .enumerate()
                .filter(|(k, l)| !taken[*k] && (l.m_f - curve.m_f).abs() < 1e-9)
                .map(|(k, l)| (k, overlap(&vectors[c], &l.vector)))
                .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                    Some(a) if a.1 >= x.1 => Some(a),
                    _ => Some(x),
                });
            let (k, ov) = best.unwrap_or((usize::MAX, 0.0));
            if ov < MIN_TRACKING_OVERLAP {
                return Err(QuditError::TrackingLost {
                    b_lo: w[0],
                    b_hi: w[1],
                    overlap: ov,
                });
            }
            min_overlap = min_overlap.min(ov);
            taken[k] = true;
            let l = &levels[k];
            let (m_j, m_i, weight) = l.dominant(spec);
            curve.energies.push(l.energy);
            curve.characters.push(Character {
                m_j: Some(m_j),
                m_i,
                weight,
            });
            next_vectors[c] = l.vector.clone();
        }
        vectors = next_vectors;
    }

    let per_b: Vec<Vec<f64>> = b_grid.iter().map(|&b| ground_energies(spec, b)).collect();
    let ground = (0..spec.nuc_dim())
        .map(|n| {
            let m_i = spec.m_i(n);
            LevelCurve {
                label: format!("g:mI={:+}/2", (2.0 * m_i).round() as i32),
                manifold: Manifold::Ground,
                m_f: m_i,
                energies: per_b.iter().map(|e| e[n]).collect(),
                characters: vec![
                    Character {
                        m_j: None,
                        m_i,
                        weight: 1.0,
                    };
                    b_grid.len()
                ],
            }
        })
        .collect();

    Ok(SpectrumCurve {
        field_grid: b_grid.to_vec(),
        excited,
        ground,
        min_overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{builtin_spec, hyperfine_casimir_energy};
    use crate::units::{arange, MU_B, MU_N};

    #[test]
    fn counts_and_linear_ground() {
        let s = builtin_spec("Yb173_3P1").unwrap();
        let grid = arange(0.0, 2000.0, 25.0);
        let sc = breit_rabi(&s, &grid).unwrap();
        assert_eq!(sc.excited.len(), 18);
        assert_eq!(sc.ground.len(), 6);
        for g in &sc.ground {
            let slope = (g.energies[1] - g.energies[0]) / 25.0;
            for (b, e) in grid.iter().zip(&g.energies) {
                assert!((e - slope * b).abs() <= 1e-9 * e.abs().max(1.0));
            }
        }
        let mut zero: Vec<f64> = sc.excited.iter().map(|c| c.energies[0]).collect();
        zero.sort_by(f64::total_cmp);
        for e in zero {
            let ok = [1.5, 2.5, 3.5]
                .iter()
                .any(|&f| (e - hyperfine_casimir_energy(&s, f)).abs() <= 1e-6 * e.abs());
            assert!(ok, "{e}");
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let s = builtin_spec("Yb173_3P1").unwrap();
        assert!(breit_rabi(&s, &[]).is_err());
        assert!(breit_rabi(&s, &[10.0, 5.0]).is_err());
    }

    #[test]
    fn high_field_slopes_approach_uncoupled() {
        for s in [builtin_spec("Yb173_3P1").unwrap(), builtin_spec("Yb173_1P1").unwrap()] {
            let sc = breit_rabi(&s, &[9.9e4, 1e5]).unwrap();
            for c in &sc.excited {
                let slope = (c.energies[1] - c.energies[0]) / 1e3;
                let ch = c.characters[1];
                let m_j = ch.m_j.unwrap() as f64;
                let expected = s.g_j * MU_B * m_j - s.g_i * MU_N * ch.m_i;
                // hyperfine curvature leaves a residual of order A²/(μ_B B)²
                assert!((slope - expected).abs() <= 2e-3 * s.g_j * MU_B, "{} {slope} {expected}", c.label);
                assert!(ch.weight > 0.9);
            }
        }
    }

    #[test]
    fn coarse_grid_keeps_sector_continuity() {
        let s = builtin_spec("Yb173_1P1").unwrap();
        let sc = breit_rabi(&s, &[0.0, 100.0, 400.0, 1600.0]).unwrap();
        assert!(sc.min_overlap >= MIN_TRACKING_OVERLAP);
        for c in &sc.excited {
            assert_eq!(c.energies.len(), 4);
        }
    }
}
