//! `pinloc` command-line tool.
//!
//! Thread count for the parallel commands can be pinned with the
//! `PINLOC_THREADS` environment variable.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use pinloc::config::{parse_config, parse_map_spec, parse_sweep_spec, ScenarioConfig};
use pinloc::estimator::{ml_estimate, wls_amplitude_baseline, Estimator};
use pinloc::fisher::{crlb, peb_map};
use pinloc::grid::{Bounds, GridSpec};
use pinloc::io;
use pinloc::montecarlo::{run_error_map, run_sweep, summarize};
use pinloc::{synthesize_observation, AntennaLayout, SystemConfig, UserPosition};

use manifest::{now, sha256_hex, write_artifact};

const DEFAULT_CONFIG: &str = include_str!("../../../configs/evaluation.cfg");
const THREADS_ENV: &str = "PINLOC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "pinloc",
    version,
    about = "Pinching-antenna localization: bounds, estimators and Monte-Carlo runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// System config file (`key = value`); defaults to the built-in evaluation setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the noise power in dBm.
    #[arg(long, allow_hyphen_values = true)]
    noise_dbm: Option<f64>,
    /// Override the antenna layout with N uniformly spaced antennas.
    #[arg(long)]
    n_pas: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fisher information, CRLB and PEB at one position.
    Crlb {
        #[command(flatten)]
        system: SystemArgs,
        /// User position `x,y` in meters.
        #[arg(long, value_parser = parse_xy, allow_hyphen_values = true)]
        u: UserPosition,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PEB over a grid of positions, as CSV.
    PebMap {
        #[command(flatten)]
        system: SystemArgs,
        /// Grid spacing in meters.
        #[arg(long, default_value_t = 0.1)]
        spacing: f64,
        /// Grid bounds `x_min,x_max,y_min,y_max`; defaults to the deployment area.
        #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
        bounds: Option<Bounds>,
        /// Place nodes at cell centres instead of on the lattice through the corner.
        #[arg(long)]
        cell_centers: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a noisy observation as `n,re,im` CSV.
    Gen {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long, value_parser = parse_xy, allow_hyphen_values = true)]
        u: UserPosition,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the user position from an observation CSV.
    Estimate {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "ml")]
        estimator: Estimator,
        #[arg(long)]
        grid_spacing: Option<f64>,
        #[arg(long)]
        num_candidates: Option<usize>,
        #[arg(long)]
        min_separation: Option<f64>,
        #[arg(long)]
        lm_max_iterations: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error-versus-noise Monte-Carlo sweep.
    McSweep {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spatial Monte-Carlo error map.
    McMap {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("cannot parse `{p}`"))
        })
        .collect::<std::result::Result<_, _>>()?;
    if parts.len() != n || parts.iter().any(|v| !v.is_finite()) {
        return Err(format!("expected {n} comma-separated finite numbers"));
    }
    Ok(parts)
}

fn parse_xy(s: &str) -> std::result::Result<UserPosition, String> {
    let v = parse_floats(s, 2)?;
    Ok(UserPosition::new(v[0], v[1]))
}

fn parse_bounds(s: &str) -> std::result::Result<Bounds, String> {
    let v = parse_floats(s, 4)?;
    let b = Bounds::new(v[0], v[1], v[2], v[3]);
    b.validate().map_err(|e| e.to_string())?;
    Ok(b)
}

/// Parsed config plus CLI overrides.
struct Loaded {
    scenario: ScenarioConfig,
    system: SystemConfig,
    config_hash: String,
    echo: Value,
}

fn load_system(args: &SystemArgs) -> Result<Loaded> {
    let (text, source) = match &args.config {
        Some(path) => (
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            path.display().to_string(),
        ),
        None => (DEFAULT_CONFIG.to_string(), "<built-in>".to_string()),
    };
    let scenario = parse_config(&text).with_context(|| format!("config {source}"))?;
    let mut system = scenario.system.clone();
    if let Some(n) = args.n_pas {
        system = system.with_antennas(&AntennaLayout::Uniform(n))?;
    }
    if let Some(dbm) = args.noise_dbm {
        system = system.with_noise_dbm(dbm)?;
    }
    let echo = json!({
        "config": source,
        "noise_dbm_override": args.noise_dbm,
        "n_pas_override": args.n_pas,
        "derived": {
            "wavelength_m": system.wavelength_m(),
            "alpha_np_per_m": system.alpha_np_per_m(),
            "beta_rad_per_m": system.beta_rad_per_m(),
            "noise_variance_w": system.noise_variance_w(),
            "antenna_positions_m": system.antenna_positions_m(),
        },
    });
    Ok(Loaded {
        config_hash: sha256_hex(scenario.canonical_text.as_bytes()),
        scenario,
        system,
        echo,
    })
}

/// Row-major nested array from a column-major 2x2 slice.
fn matrix_json(m: &[f64]) -> Value {
    json!([[m[0], m[2]], [m[1], m[3]]])
}

fn emit(
    out: Option<&Path>,
    data: &str,
    command: &str,
    loaded: &Loaded,
    echo: Value,
    started: String,
) -> Result<()> {
    match out {
        Some(path) => write_artifact(path, data, command, &loaded.config_hash, echo, started),
        None => {
            print!("{data}");
            Ok(())
        }
    }
}

fn with_extra(mut echo: Value, extra: Value) -> Value {
    if let (Some(base), Value::Object(more)) = (echo.as_object_mut(), extra) {
        base.extend(more);
    }
    echo
}

fn run(cli: Cli) -> Result<()> {
    let started = now();
    match cli.command {
        Command::Crlb { system, u, out } => {
            let loaded = load_system(&system)?;
            let s = crlb(&loaded.system, &u);
            let finite = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
            let data = json!({
                "u_x": u.x,
                "u_y": u.y,
                "noise_dbm": loaded.system.noise_dbm(),
                "n_pas": loaded.system.num_antennas(),
                "fim": matrix_json(s.fim.as_slice()),
                "cov": s.cov_bound.map(|c| matrix_json(c.as_slice())),
                "var_x_bound_m2": finite(s.var_x_bound),
                "var_y_bound_m2": finite(s.var_y_bound),
                "peb_m": finite(s.peb),
                "singular": s.singular,
            });
            let text = serde_json::to_string_pretty(&data)? + "\n";
            let echo = with_extra(loaded.echo.clone(), json!({"u": [u.x, u.y]}));
            emit(out.as_deref(), &text, "crlb", &loaded, echo, started)
        }
        Command::PebMap {
            system,
            spacing,
            bounds,
            cell_centers,
            out,
        } => {
            let loaded = load_system(&system)?;
            let bounds = bounds.unwrap_or_else(|| loaded.system.area());
            let grid = if cell_centers {
                GridSpec::cell_centers(&bounds, spacing)?
            } else {
                GridSpec::covering(&bounds, spacing)?
            };
            let map = peb_map(&loaded.system, &grid);
            let grid_json = json!({
                "x0": grid.x0, "y0": grid.y0, "spacing": grid.spacing, "nx": grid.nx, "ny": grid.ny,
                "order": "row-major, y outer",
            });
            let header = json!({
                "config_hash": loaded.config_hash,
                "grid": grid_json,
                "noise_dbm": loaded.system.noise_dbm(),
                "n_pas": loaded.system.num_antennas(),
                "singular": "inf",
            });
            let text = io::write_peb_map_csv(&map, &serde_json::to_string(&header)?);
            let echo = with_extra(loaded.echo.clone(), json!({"grid": grid_json}));
            emit(Some(&out), &text, "peb-map", &loaded, echo, started)
        }
        Command::Gen {
            system,
            u,
            seed,
            out,
        } => {
            let loaded = load_system(&system)?;
            let r = synthesize_observation(&loaded.system, &u, seed);
            let text = io::write_observation_csv(&r);
            let echo = with_extra(loaded.echo.clone(), json!({"u": [u.x, u.y], "seed": seed}));
            emit(out.as_deref(), &text, "gen", &loaded, echo, started)
        }
        Command::Estimate {
            system,
            input,
            estimator,
            grid_spacing,
            num_candidates,
            min_separation,
            lm_max_iterations,
            out,
        } => {
            let loaded = load_system(&system)?;
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let input_sha256 = sha256_hex(text.as_bytes());
            let r = io::parse_observation_csv(&text)
                .with_context(|| format!("observation {}", input.display()))?;
            if r.len() != loaded.system.num_antennas() {
                bail!(
                    "observation has {} samples but the configuration has {} antennas",
                    r.len(),
                    loaded.system.num_antennas()
                );
            }
            let mut gcfg = loaded.scenario.grid_config(&loaded.system);
            if let Some(v) = grid_spacing {
                gcfg.spacing_m = v;
            }
            if let Some(v) = num_candidates {
                gcfg.num_candidates = v;
            }
            if let Some(v) = min_separation {
                gcfg.min_separation_m = v;
            }
            let mut lcfg = loaded.scenario.lm;
            if let Some(v) = lm_max_iterations {
                lcfg.max_iterations = v;
            }
            let est = match estimator {
                Estimator::Ml => ml_estimate(&loaded.system, &r, &gcfg, &lcfg)?,
                Estimator::Wls => wls_amplitude_baseline(&loaded.system, &r)?,
            };
            let data = json!({
                "estimator": estimator.name(),
                "estimate_x_m": est.position.x,
                "estimate_y_m": est.position.y,
                "residual": est.residual,
                "iterations": est.lm_iterations_total,
                "candidates_evaluated": est.candidates_evaluated,
                "converged": est.converged,
                "flags": est.flags.names(),
            });
            let text = serde_json::to_string_pretty(&data)? + "\n";
            let echo = with_extra(
                loaded.echo.clone(),
                json!({
                    "input": input.display().to_string(),
                    "input_sha256": input_sha256,
                    "estimator": estimator.name(),
                    "grid_spacing_m": gcfg.spacing_m,
                    "num_candidates": gcfg.num_candidates,
                    "min_separation_m": gcfg.min_separation_m,
                    "lm_max_iterations": lcfg.max_iterations,
                }),
            );
            emit(out.as_deref(), &text, "estimate", &loaded, echo, started)
        }
        Command::McSweep { system, spec, out } => {
            let loaded = load_system(&system)?;
            let spec_text =
                fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let file = parse_sweep_spec(&spec_text)
                .with_context(|| format!("sweep spec {}", spec.display()))?;
            let gcfg = loaded.scenario.grid_config(&loaded.system);
            let result = run_sweep(
                &loaded.system,
                &gcfg,
                &loaded.scenario.lm,
                &file.spec,
                &file.estimators,
            )?;
            let rows = summarize(&result);
            let failed: usize = rows.iter().map(|r| r.trials_failed).sum();
            if failed > 0 {
                eprintln!(
                    "warning: {failed} trial estimates failed and were excluded from the means"
                );
            }
            let text = io::write_sweep_csv(&rows);
            let echo = with_extra(
                loaded.echo.clone(),
                json!({"spec": spec.display().to_string(), "spec_canonical": file.canonical_text}),
            );
            emit(Some(&out), &text, "mc-sweep", &loaded, echo, started)
        }
        Command::McMap { system, spec, out } => {
            let loaded = load_system(&system)?;
            let spec_text =
                fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let file = parse_map_spec(&spec_text)
                .with_context(|| format!("map spec {}", spec.display()))?;
            let gcfg = loaded.scenario.grid_config(&loaded.system);
            let map = run_error_map(
                &loaded.system,
                &gcfg,
                &loaded.scenario.lm,
                &file.spec,
                &file.estimators,
            )?;
            let failed: usize = map.trials_failed.iter().flatten().sum();
            if failed > 0 {
                eprintln!(
                    "warning: {failed} trial estimates failed and were excluded from the means"
                );
            }
            let text = io::write_error_map_csv(&map.rows());
            let echo = with_extra(
                loaded.echo.clone(),
                json!({"spec": spec.display().to_string(), "spec_canonical": file.canonical_text}),
            );
            emit(Some(&out), &text, "mc-map", &loaded, echo, started)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
