//! Subcommand implementations behind the `ehd2d` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::analysis::{default_window, fit_decay_rate, DecayFit};
use crate::error::{EhdError, Result};
use crate::fluid::Advection;
use crate::functionals::{j_functional, LyapunovForm};
use crate::io::{self, DiagnosticsWriter};
use crate::sim::{init_state, SimConfig, SimState, Simulator};
use crate::steady::{self, pressure_identity_residual, solve_steady};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.json";
pub const STEADY_SUMMARY_FILE: &str = "steady_summary.txt";

/// Options that are not part of the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub lyapunov_form: LyapunovForm,
    pub advection: Advection,
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    pub step: Option<u64>,
    pub exit_code: i32,
}

impl ErrorRecord {
    pub fn from_error(e: &EhdError) -> Self {
        let step = match e {
            EhdError::Step { step, .. } => Some(*step),
            _ => None,
        };
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
            step,
            exit_code: e.exit_code(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: String,
    pub start_time_unix: f64,
    pub end_time_unix: f64,
    pub outputs: Vec<String>,
    pub status: String,
    pub error: Option<ErrorRecord>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| EhdError::Format {
        what: path.display().to_string(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| EhdError::io(path, e))
}

fn snapshot_name(field: &str, step: u64) -> String {
    format!("{field}_{step:08}.ehd2")
}

fn write_state_snapshots(dir: &Path, state: &SimState, outputs: &mut Vec<String>) -> Result<()> {
    for (name, f) in [
        ("v", &state.charges.v),
        ("w", &state.charges.w),
        ("phi", &state.phi),
        ("p", &state.u.p),
    ] {
        let file = snapshot_name(name, state.step);
        io::write_snapshot(&dir.join(&file), name, f, state.t)?;
        outputs.push(file);
    }
    Ok(())
}

/// Runs a simulation and writes diagnostics and snapshots of the first and
/// last state into `out_dir`. The manifest is left to the caller.
pub fn simulate(config: &SimConfig, out_dir: &Path, outputs: &mut Vec<String>) -> Result<SimState> {
    fs::create_dir_all(out_dir).map_err(|e| EhdError::io(out_dir, e))?;
    let sim = Simulator::new(config.clone())?;
    let initial = init_state(config)?;
    let mut writer = DiagnosticsWriter::create(&out_dir.join(DIAGNOSTICS_FILE))?;
    outputs.push(DIAGNOSTICS_FILE.to_string());
    write_state_snapshots(out_dir, &initial, outputs)?;
    let final_state = sim.run_from(initial, true, &mut |_, rec| writer.write(rec))?;
    write_state_snapshots(out_dir, &final_state, outputs)?;
    Ok(final_state)
}

fn finish(
    command: &str,
    config_text: String,
    out_dir: &Path,
    start: f64,
    outputs: Vec<String>,
    result: Result<()>,
) -> i32 {
    let (status, error, code) = match &result {
        Ok(()) => ("ok".to_string(), None, 0),
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            let rec = ErrorRecord::from_error(e);
            let code = rec.exit_code;
            if out_dir.is_dir() {
                let _ = write_json(&out_dir.join(ERROR_FILE), &rec);
            }
            ("error".to_string(), Some(rec), code)
        }
    };
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config_text,
        start_time_unix: start,
        end_time_unix: now(),
        outputs,
        status,
        error,
    };
    if out_dir.is_dir() {
        if let Err(e) = write_json(&out_dir.join(MANIFEST_FILE), &manifest) {
            eprintln!("error: {e}");
            return if code == 0 { e.exit_code() } else { code };
        }
    }
    code
}

/// `simulate` subcommand; returns the process exit code.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path, opts: RunOptions) -> i32 {
    let start = now();
    let mut outputs = Vec::new();
    let mut config_text = String::new();
    let result = (|| -> Result<()> {
        let mut cfg = io::read_config(config_path)?;
        cfg.lyapunov_form = opts.lyapunov_form;
        cfg.advection = opts.advection;
        config_text = io::config_to_string(&cfg);
        fs::create_dir_all(out_dir).map_err(|e| EhdError::io(out_dir, e))?;
        let fin = simulate(&cfg, out_dir, &mut outputs)?;
        log::info!("finished at step {} (t = {})", fin.step, fin.t);
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::create_dir_all(out_dir);
    }
    finish("simulate", config_text, out_dir, start, outputs, result)
}

/// `steady` subcommand: solves the steady state for the masses of the
/// configured initial data.
pub fn cmd_steady(config_path: &Path, out_dir: &Path) -> i32 {
    let start = now();
    let mut outputs = Vec::new();
    let mut config_text = String::new();
    let result = (|| -> Result<()> {
        let cfg = io::read_config(config_path)?;
        config_text = io::config_to_string(&cfg);
        fs::create_dir_all(out_dir).map_err(|e| EhdError::io(out_dir, e))?;
        let s0 = init_state(&cfg)?;
        let st = solve_steady(cfg.grid, s0.mu_v, s0.mu_w, steady::DEFAULT_TOL)?;
        for (name, f) in [("Phi", &st.phi), ("V", &st.v), ("W", &st.w)] {
            let file = format!("{name}.ehd2");
            io::write_snapshot(&out_dir.join(&file), name, f, 0.0)?;
            outputs.push(file);
        }
        let summary = [
            ("residual", format!("{:.16e}", st.residual)),
            ("iterations", st.iterations.to_string()),
            (
                "j_value",
                format!("{:.16e}", j_functional(&st.phi, st.mu_v, st.mu_w)?),
            ),
            ("mu_v", format!("{:.16e}", st.mu_v)),
            ("mu_w", format!("{:.16e}", st.mu_w)),
            ("min_v", format!("{:.16e}", st.v.min())),
            ("max_v", format!("{:.16e}", st.v.max())),
            ("min_w", format!("{:.16e}", st.w.min())),
            ("max_w", format!("{:.16e}", st.w.max())),
            (
                "pressure_identity_residual",
                format!("{:.16e}", pressure_identity_residual(&st)?),
            ),
        ];
        let text: String = summary
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        print!("{text}");
        let path = out_dir.join(STEADY_SUMMARY_FILE);
        fs::write(&path, text).map_err(|e| EhdError::io(&path, e))?;
        outputs.push(STEADY_SUMMARY_FILE.to_string());
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::create_dir_all(out_dir);
    }
    finish("steady", config_text, out_dir, start, outputs, result)
}

pub fn fit_report(column: &str, fit: &DecayFit) -> String {
    format!(
        "column = {column}\nlambda = {:.16e}\nc_dagger = {:.16e}\nr_squared = {:.16e}\nwindow_start = {:.16e}\nwindow_end = {:.16e}\npoints = {}\n",
        fit.lambda, fit.c_dagger, fit.r_squared, fit.window.0, fit.window.1, fit.points
    )
}

/// Default report path: next to the diagnostics file.
pub fn default_report_path(diagnostics: &Path, column: &str) -> PathBuf {
    diagnostics
        .parent()
        .unwrap_or(Path::new("."))
        .join(format!("fit_{column}.txt"))
}

pub fn analyze(diagnostics: &Path, column: &str, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let series = io::read_diagnostics(diagnostics)?;
    let window = match window {
        Some(w) => w,
        None => default_window(&series, column)?,
    };
    fit_decay_rate(&series, column, window)
}

/// `analyze` subcommand: fits an exponential decay rate to one column.
pub fn cmd_analyze(
    diagnostics: &Path,
    column: &str,
    window: Option<(f64, f64)>,
    out: Option<&Path>,
) -> i32 {
    let result = (|| -> Result<()> {
        let fit = analyze(diagnostics, column, window)?;
        let report = fit_report(column, &fit);
        print!("{report}");
        let path = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| default_report_path(diagnostics, column));
        fs::write(&path, report).map_err(|e| EhdError::io(&path, e))
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Ok(s) = serde_json::to_string(&ErrorRecord::from_error(&e)) {
                eprintln!("{s}");
            }
            e.exit_code()
        }
    }
}
