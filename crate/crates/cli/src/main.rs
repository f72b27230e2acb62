//! `qudit`: scans and reports for nuclear-spin qudit control with optical
//! Raman and light-shift drives.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use qudit_core::Execution;
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{Outcome, Quantity, RamanView};
use config::RunConfig;
use error::CliError;
use output::{render, sidecar_path, write_atomic, Format, Output};

#[derive(Parser, Debug)]
#[command(name = "qudit", version, about = "Hyperfine qudit control scans and reports")]
struct Cli {
    /// Built-in transition (overrides `[atom] spec`).
    #[arg(long, global = true)]
    spec: Option<String>,
    /// Config file with `[section]` headers and `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `section.key=value` override, applied after the config file.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Output file; stdout when absent. Also writes `<out>.meta.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for grid scans. Never changes the output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground and excited level energies against field.
    BreitRabi,
    /// Magic angle and feasibility at `[point]`; exits 4 when infeasible.
    MagicAngle,
    /// Grid scans.
    Scan {
        #[command(subcommand)]
        kind: ScanKind,
    },
    /// Full against effective dynamics at `[point]`; exits 4 on a failed verdict.
    Validate {
        /// CSV of the simulated populations.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Lie closure of the control set at `[point] b_gauss`; exits 4 below su(d).
    Universality,
    /// Rabi frequency, intensity and beam power conversions.
    Convert {
        value: f64,
        #[arg(long, value_enum)]
        from: Quantity,
        #[arg(long, value_enum)]
        to: Quantity,
        /// Gaussian beam waist for power conversions, µm.
        #[arg(long)]
        waist_um: Option<f64>,
    },
    /// Atomic and physical constants in use.
    Constants,
}

#[derive(Subcommand, Debug)]
enum ScanKind {
    /// Magic-angle feasibility over `(B, Δ, Ω_E, transition)`.
    Raman {
        #[arg(long, value_enum, default_value_t = RamanView::Cells)]
        view: RamanView,
    },
    /// Centered light shifts at the largest drive allowed by `p_max`.
    Phase {
        /// Per-field medians instead of every profile.
        #[arg(long)]
        summary: bool,
    },
    /// Bright and dark scattering rates of the cycling readout.
    Readout,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::BreitRabi => "breit-rabi".into(),
            Command::MagicAngle => "magic-angle".into(),
            Command::Scan { kind } => match kind {
                ScanKind::Raman { .. } => "scan raman".into(),
                ScanKind::Phase { .. } => "scan phase".into(),
                ScanKind::Readout => "scan readout".into(),
            },
            Command::Validate { .. } => "validate".into(),
            Command::Universality => "universality".into(),
            Command::Convert { .. } => "convert".into(),
            Command::Constants => "constants".into(),
        }
    }
}

fn configure_threads(n: Option<usize>) -> Result<(), CliError> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut overrides = Vec::new();
    if let Some(s) = &cli.spec {
        overrides.push(format!("atom.spec=\"{s}\""));
    }
    overrides.extend(cli.set.iter().cloned());
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    cfg.spec()?;
    Ok(cfg)
}

/// Invocation arguments that determine the output bytes.
fn arguments(cli: &Cli) -> serde_json::Value {
    match &cli.command {
        Command::Scan {
            kind: ScanKind::Raman { view },
        } => json!({"view": format!("{view:?}").to_lowercase()}),
        Command::Scan {
            kind: ScanKind::Phase { summary },
        } => json!({"summary": summary}),
        Command::Convert { value, from, to, waist_um } => json!({
            "value": value,
            "from": format!("{from:?}").to_lowercase(),
            "to": format!("{to:?}").to_lowercase(),
            "waist_um": waist_um,
        }),
        _ => json!({}),
    }
}

fn emit(path: Option<&Path>, bytes: &[u8], meta: &serde_json::Value) -> Result<(), CliError> {
    match path {
        Some(p) => {
            write_atomic(p, bytes)?;
            let mut m = serde_json::to_vec_pretty(meta).map_err(|e| CliError::Io(e.into()))?;
            m.push(b'\n');
            write_atomic(&sidecar_path(p), &m)
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<Option<String>, CliError> {
    configure_threads(cli.threads)?;
    let cfg = load_config(cli)?;
    let exec = Execution::Parallel;
    let mut trace = None;
    let outcome: Outcome = match &cli.command {
        Command::BreitRabi => commands::breit_rabi_table(&cfg)?,
        Command::MagicAngle => commands::magic_angle_report(&cfg)?,
        Command::Scan { kind } => match kind {
            ScanKind::Raman { view } => commands::scan_raman(&cfg, *view, exec)?,
            ScanKind::Phase { summary } => commands::scan_phase(&cfg, *summary, exec)?,
            ScanKind::Readout => commands::scan_readout_table(&cfg, exec)?,
        },
        Command::Validate { trace: path } => {
            let (outcome, flip) = commands::validate_report(&cfg)?;
            if let Some(p) = path {
                trace = Some((p.clone(), commands::trace_table(&flip)));
            }
            outcome
        }
        Command::Universality => commands::universality_report(&cfg, exec)?,
        Command::Convert { value, from, to, waist_um } => commands::convert(&cfg, *value, *from, *to, *waist_um)?,
        Command::Constants => commands::constants(&cfg)?,
    };

    let resolved = json!({
        "command": cli.command.name(),
        "arguments": arguments(cli),
        "format": cli.format,
        "config": cfg,
    });
    let canonical = serde_json::to_vec(&resolved).map_err(|e| CliError::Io(e.into()))?;
    let hash: String = Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect();
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "tool": "qudit",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": hash,
        "run": resolved,
        "constants": commands::constants_json(&cfg)?,
        "timestamp_unix": timestamp,
    });

    if let Some((p, table)) = trace {
        write_atomic(&p, &render(&Output::Table(table), Format::Csv)?)?;
    }
    emit(cli.out.as_deref(), &render(&outcome.output, cli.format)?, &meta)?;
    Ok(outcome.infeasible)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(reason)) => {
            eprintln!("infeasible: {reason}");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
