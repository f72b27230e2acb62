//! Run configuration: `[section]` headers with `key = value` lines.

use std::path::Path;

use qudit_core::atom::{builtin_spec, AtomSpec, FieldConfig};
use qudit_core::phase::PhasePolarization;
use qudit_core::raman::{transitions, DetuningGrid, Thresholds};
use qudit_core::readout::Addressing;
use qudit_core::units::{arange, linspace, logspace, mhz};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomSection,
    pub point: PointSection,
    pub grid: GridSection,
    pub thresholds: ThresholdSection,
    pub breit_rabi: BreitRabiSection,
    pub phase: PhaseSection,
    pub readout: ReadoutSection,
    pub dynamics: DynamicsSection,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSection {
    /// Built-in transition, `Yb173_3P1` or `Yb173_1P1`.
    pub spec: String,
    /// Overrides the built-in Landé factor of the excited level.
    pub g_j: Option<f64>,
}

impl Default for AtomSection {
    fn default() -> Self {
        Self {
            spec: "Yb173_3P1".into(),
            g_j: None,
        }
    }
}

/// Single operating point for `magic-angle`, `validate` and `universality`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointSection {
    pub b_gauss: f64,
    /// Laser detuning Δ/2π from the bare ¹S₀ → J = 1 line.
    pub detuning_mhz: f64,
    /// Electronic Rabi frequency Ω_E/2π.
    pub rabi_mhz: f64,
    /// Lower `m_I` of the flipped pair.
    pub transition: f64,
}

impl Default for PointSection {
    fn default() -> Self {
        Self {
            b_gauss: 500.0,
            detuning_mhz: -3000.0,
            rabi_mhz: 15.0,
            transition: -0.5,
        }
    }
}

#[derive(Copy, Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DetuningAxis {
    /// Δ̃ covering the lower excited manifold plus `margin_mhz` on each side.
    Manifold,
    /// Δ̃ from `detuning_start_mhz` to `detuning_stop_mhz`.
    Shifted,
    /// Δ from `detuning_start_mhz` to `detuning_stop_mhz`.
    Absolute,
}

/// Scan axes for `scan raman` and `scan phase`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub b_start: f64,
    pub b_stop: f64,
    pub b_step: f64,
    pub detuning: DetuningAxis,
    pub margin_mhz: f64,
    pub detuning_start_mhz: f64,
    pub detuning_stop_mhz: f64,
    pub detuning_step_mhz: f64,
    /// Log-spaced Ω_E/2π grid.
    pub rabi_min_mhz: f64,
    pub rabi_max_mhz: f64,
    pub rabi_count: usize,
    /// Lower `m_I` labels to scan; all five pairs when absent.
    pub transitions: Option<Vec<f64>>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            b_start: 50.0,
            b_stop: 2000.0,
            b_step: 25.0,
            detuning: DetuningAxis::Manifold,
            margin_mhz: 3000.0,
            detuning_start_mhz: -3000.0,
            detuning_stop_mhz: 3000.0,
            detuning_step_mhz: 10.0,
            rabi_min_mhz: 1.0,
            rabi_max_mhz: 100.0,
            rabi_count: 40,
            transitions: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    /// Bound on the excited-state population.
    pub p_max: f64,
    /// Bound on the per-channel leakage out of the target pair.
    pub leak_max: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let t = Thresholds::default();
        Self {
            p_max: t.p_max,
            leak_max: t.leak_max,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreitRabiSection {
    pub b_start: f64,
    pub b_stop: f64,
    pub b_count: usize,
}

impl Default for BreitRabiSection {
    fn default() -> Self {
        Self {
            b_start: 0.0,
            b_stop: 2000.0,
            b_count: 201,
        }
    }
}

#[derive(Copy, Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// π light along the field.
    Parallel,
    /// Linear light perpendicular to the field.
    Perpendicular,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSection {
    pub polarization: Polarization,
}

impl Default for PhaseSection {
    fn default() -> Self {
        Self {
            polarization: Polarization::Parallel,
        }
    }
}

#[derive(Copy, Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum AddressingChoice {
    /// Upper stretched state for ¹P₁, lower for everything else.
    Auto,
    Lower,
    Upper,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutSection {
    pub b_start: f64,
    pub b_stop: f64,
    pub b_step: f64,
    pub rabi_min_mhz: f64,
    pub rabi_max_mhz: f64,
    pub rabi_count: usize,
    /// Probe detuning δ/2π from the addressed cycling transition.
    pub probe_detuning_mhz: f64,
    pub addressing: AddressingChoice,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        Self {
            b_start: 100.0,
            b_stop: 1000.0,
            b_step: 50.0,
            rabi_min_mhz: 0.1,
            rabi_max_mhz: 100.0,
            rabi_count: 31,
            probe_detuning_mhz: 0.0,
            addressing: AddressingChoice::Auto,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    /// Number of Raman flops fitted by `validate` (at least 3).
    pub periods: f64,
    pub samples: usize,
    /// Non-Hermitian `−iΓ/2` on the excited block.
    pub with_decay: bool,
    /// Refuse to simulate points that fail the feasibility conditions.
    pub require_feasible: bool,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            periods: 3.0,
            samples: 801,
            with_decay: false,
            require_feasible: false,
        }
    }
}

fn check(ok: bool, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(what.into()))
    }
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl RunConfig {
    /// Parses a config file, then applies `section.key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse()
                    .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.point;
        check(finite(&[p.b_gauss, p.detuning_mhz, p.rabi_mhz, p.transition]), "point values must be finite")?;
        check(p.b_gauss >= 0.0 && p.rabi_mhz >= 0.0, "point b_gauss and rabi_mhz must be non-negative")?;
        let g = &self.grid;
        check(
            finite(&[
                g.b_start,
                g.b_stop,
                g.b_step,
                g.margin_mhz,
                g.detuning_start_mhz,
                g.detuning_stop_mhz,
                g.detuning_step_mhz,
                g.rabi_min_mhz,
                g.rabi_max_mhz,
            ]),
            "grid values must be finite",
        )?;
        check(g.b_start >= 0.0 && g.b_start <= g.b_stop && g.b_step > 0.0, "grid field axis must be ascending")?;
        check(g.detuning_start_mhz <= g.detuning_stop_mhz, "grid detuning axis must be ascending")?;
        check(g.detuning_step_mhz > 0.0 && g.margin_mhz >= 0.0, "grid detuning step must be positive")?;
        check(
            g.rabi_min_mhz > 0.0 && g.rabi_min_mhz <= g.rabi_max_mhz && g.rabi_count > 0,
            "grid drive axis must be positive and ascending",
        )?;
        let t = &self.thresholds;
        check(
            t.p_max.is_finite() && t.leak_max.is_finite() && t.p_max > 0.0 && t.leak_max > 0.0 && t.p_max < 1.0,
            "thresholds must be positive, p_max below one",
        )?;
        let br = &self.breit_rabi;
        check(
            finite(&[br.b_start, br.b_stop]) && br.b_start >= 0.0 && br.b_start <= br.b_stop && br.b_count > 0,
            "breit_rabi field axis must be ascending",
        )?;
        let r = &self.readout;
        check(
            finite(&[r.b_start, r.b_stop, r.b_step, r.rabi_min_mhz, r.rabi_max_mhz, r.probe_detuning_mhz]),
            "readout values must be finite",
        )?;
        check(r.b_start >= 0.0 && r.b_start <= r.b_stop && r.b_step > 0.0, "readout field axis must be ascending")?;
        check(
            r.rabi_min_mhz > 0.0 && r.rabi_min_mhz <= r.rabi_max_mhz && r.rabi_count > 0,
            "readout drive axis must be positive and ascending",
        )?;
        let d = &self.dynamics;
        check(d.periods.is_finite() && d.periods > 0.0 && d.samples >= 2, "dynamics periods and samples must be positive")?;
        if let Some(g_j) = self.atom.g_j {
            check(g_j.is_finite(), "atom g_j must be finite")?;
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<AtomSpec, CliError> {
        let s = builtin_spec(&self.atom.spec).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(match self.atom.g_j {
            Some(g) => s.with_g_j(g),
            None => s,
        })
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            p_max: self.thresholds.p_max,
            leak_max: self.thresholds.leak_max,
        }
    }

    pub fn point(&self) -> Result<FieldConfig, CliError> {
        let p = &self.point;
        Ok(FieldConfig::new(p.b_gauss, mhz(p.detuning_mhz), mhz(p.rabi_mhz), 0.0)?)
    }

    pub fn b_grid(&self) -> Vec<f64> {
        arange(self.grid.b_start, self.grid.b_stop, self.grid.b_step)
    }

    pub fn detuning_grid(&self) -> DetuningGrid {
        let g = &self.grid;
        let axis = || arange(mhz(g.detuning_start_mhz), mhz(g.detuning_stop_mhz), mhz(g.detuning_step_mhz));
        match g.detuning {
            DetuningAxis::Manifold => DetuningGrid::Manifold {
                margin: mhz(g.margin_mhz),
                step: mhz(g.detuning_step_mhz),
            },
            DetuningAxis::Shifted => DetuningGrid::Shifted(axis()),
            DetuningAxis::Absolute => DetuningGrid::Absolute(axis()),
        }
    }

    pub fn rabi_grid(&self) -> Vec<f64> {
        logspace(mhz(self.grid.rabi_min_mhz), mhz(self.grid.rabi_max_mhz), self.grid.rabi_count)
    }

    pub fn transitions(&self, spec: &AtomSpec) -> Result<Vec<f64>, CliError> {
        let all = transitions(spec);
        match &self.grid.transitions {
            None => Ok(all),
            Some(list) => {
                for t in list {
                    check(all.contains(t), &format!("grid transition {t} is not a lower pair label"))?;
                }
                Ok(list.clone())
            }
        }
    }

    pub fn breit_rabi_grid(&self) -> Vec<f64> {
        let b = &self.breit_rabi;
        linspace(b.b_start, b.b_stop, b.b_count)
    }

    pub fn polarization(&self) -> PhasePolarization {
        match self.phase.polarization {
            Polarization::Parallel => PhasePolarization::Parallel,
            Polarization::Perpendicular => PhasePolarization::Perpendicular,
        }
    }

    pub fn readout_b_grid(&self) -> Vec<f64> {
        arange(self.readout.b_start, self.readout.b_stop, self.readout.b_step)
    }

    pub fn readout_rabi_grid(&self) -> Vec<f64> {
        logspace(mhz(self.readout.rabi_min_mhz), mhz(self.readout.rabi_max_mhz), self.readout.rabi_count)
    }

    pub fn addressing(&self, spec: &AtomSpec) -> Addressing {
        match self.readout.addressing {
            AddressingChoice::Auto => Addressing::for_spec(spec),
            AddressingChoice::Lower => Addressing::lower(spec),
            AddressingChoice::Upper => Addressing::upper(spec),
        }
    }
}

/// `section.key=value`, with the value parsed as a TOML literal and falling
/// back to a bare string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let bad = || CliError::Config(format!("override `{item}` is not of the form section.key=value"));
    let (path, raw) = item.split_once('=').ok_or_else(bad)?;
    let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").ok_or_else(bad)?,
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("`{section}` is not a section"))),
    }
}
