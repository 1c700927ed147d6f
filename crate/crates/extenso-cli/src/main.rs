//! `extenso` — run extensivity check suites over declarative system configs.
//!
//! Exit codes: 0 all selected checks passed; 1 a check failed (or a one-shot
//! subcommand exceeded its bound); 2 configuration or usage error.

mod config;
mod runner;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use extenso_core::exterior::VectorField;
use extenso_core::flows::{extensive_chart_from_field, flow, pushforward};
use extenso_core::extensivity::{recover_entropy, SampleSpec};

use config::{load_config, Loaded};
use runner::{run_checks, Format, RunOptions};

#[derive(Parser)]
#[command(
    name = "extenso",
    version,
    about = "Extensivity and scaling-structure checks on open boxes of R^n"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// Human-readable report lines plus a summary.
    Text,
    /// One flat key=value record per check; byte-stable for a fixed seed.
    Records,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the checks declared in a config file.
    Check {
        config: PathBuf,
        /// Only run checks whose name matches this glob (* and ?).
        #[arg(long)]
        filter: Option<String>,
        /// Override every check's seed (base value; offset by declaration
        /// index). Falls back to the EXTENSO_SEED environment variable.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for check execution.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        /// Multiply every tolerance (tol, rel_tol) — exploratory runs only.
        #[arg(long = "tol-scale", default_value_t = 1.0)]
        tol_scale: f64,
    },
    /// Recover the entropy at a target point by integrating θ/θ(ρ).
    Entropy {
        config: PathBuf,
        /// Base point, comma-separated coordinates.
        #[arg(long)]
        from: String,
        /// Target point, comma-separated coordinates.
        #[arg(long)]
        to: String,
        /// Entropy at the base point; defaults to the direct evaluation.
        #[arg(long)]
        s0: Option<f64>,
        /// Quadrature tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Print trajectory samples of a vector-field flow.
    Flow {
        config: PathBuf,
        /// Field name from the config; defaults to the radial field rho.
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        from: String,
        /// Total flow time.
        #[arg(long)]
        time: f64,
        /// Number of output intervals.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Build an extensivity-adapted chart around a point and report the
    /// pushforward residuals over sampled chart-domain points.
    Chart {
        config: PathBuf,
        /// Field name from the config; defaults to the radial field rho.
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        at: String,
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 4242)]
        seed: u64,
        /// Largest acceptable sampled residual (exit 1 beyond this).
        #[arg(long = "max-residual", default_value_t = 1e-6)]
        max_residual: f64,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &PathBuf) -> Result<Loaded, String> {
    load_config(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_point_arg(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let coords: Result<Vec<f64>, _> = s.split(',').map(|c| c.trim().parse::<f64>()).collect();
    let coords = coords.map_err(|_| format!("expected comma-separated coordinates, got '{s}'"))?;
    if coords.len() != n {
        return Err(format!("expected {n} coordinates, got {}", coords.len()));
    }
    Ok(coords)
}

fn resolve_field<'a>(loaded: &'a Loaded, name: Option<&str>) -> Result<&'a VectorField, String> {
    match name.unwrap_or("rho") {
        "rho" => Ok(loaded.system.rho()),
        other => loaded
            .fields
            .get(other)
            .ok_or_else(|| format!("no field '{other}' in the config")),
    }
}

fn env_seed() -> Result<Option<u64>, String> {
    match std::env::var("EXTENSO_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| format!("EXTENSO_SEED must be an integer, got '{v}'")),
        Err(_) => Ok(None),
    }
}

fn dispatch() -> Result<u8, String> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Check {
            config,
            filter,
            seed,
            jobs,
            format,
            tol_scale,
        } => {
            if !(tol_scale > 0.0 && tol_scale.is_finite()) {
                return Err(format!("--tol-scale must be positive and finite, got {tol_scale}"));
            }
            if jobs == 0 {
                return Err("--jobs must be at least 1".into());
            }
            let loaded = load(&config)?;
            let seed = match seed {
                Some(s) => Some(s),
                None => env_seed()?,
            };
            let opts = RunOptions {
                filter,
                seed,
                jobs,
                format: match format {
                    FormatArg::Text => Format::Text,
                    FormatArg::Records => Format::Records,
                },
                tol_scale,
            };
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let code = run_checks(&loaded, &opts, &mut out).map_err(|e| e.to_string())?;
            Ok(code as u8)
        }
        Cmd::Entropy {
            config,
            from,
            to,
            s0,
            tol,
        } => {
            let loaded = load(&config)?;
            let n = loaded.system.dim();
            let from = parse_point_arg(&from, n)?;
            let to = parse_point_arg(&to, n)?;
            let sys = &loaded.system;
            let s_from = match s0 {
                Some(v) => v,
                None => sys
                    .entropy()
                    .value_at(&from)
                    .map_err(|e| format!("evaluating the equation at the base point: {e}"))?,
            };
            match recover_entropy(sys.heat_form(), sys.rho(), &from, s_from, &to, tol) {
                Ok(recovered) => {
                    let direct = sys.entropy().value_at(&to).ok();
                    match direct {
                        Some(d) => println!(
                            "recovered={recovered:.12e} direct={d:.12e} relative_gap={:.3e}",
                            ((recovered - d) / d).abs()
                        ),
                        None => println!("recovered={recovered:.12e}"),
                    }
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("entropy recovery failed: {e}");
                    Ok(1)
                }
            }
        }
        Cmd::Flow {
            config,
            field,
            from,
            time,
            samples,
            tol,
        } => {
            let loaded = load(&config)?;
            let x = resolve_field(&loaded, field.as_deref())?;
            let p = parse_point_arg(&from, loaded.system.dim())?;
            let steps = samples.max(1);
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for k in 0..=steps {
                let t = time * k as f64 / steps as f64;
                let endpoint = if t == 0.0 {
                    p.clone()
                } else {
                    match flow(x, &p, t, tol) {
                        Ok(r) => r.endpoint,
                        Err(e) => {
                            eprintln!("flow failed at t = {t}: {e}");
                            return Ok(1);
                        }
                    }
                };
                let coords: Vec<String> = endpoint.iter().map(|c| format!("{c:.12e}")).collect();
                writeln!(out, "t={t:.6e} point=[{}]", coords.join(","))
                    .map_err(|e| e.to_string())?;
            }
            Ok(0)
        }
        Cmd::Chart {
            config,
            field,
            at,
            radius,
            tol,
            count,
            seed,
            max_residual,
        } => {
            let loaded = load(&config)?;
            let x = resolve_field(&loaded, field.as_deref())?;
            let p = parse_point_arg(&at, loaded.system.dim())?;
            let chart = match extensive_chart_from_field(x, &p, radius, tol) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("chart construction failed: {e}");
                    return Ok(1);
                }
            };
            let spec = SampleSpec::new(chart.domain.shrunk(0.75), count, seed);
            let points = spec.points().map_err(|e| e.to_string())?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let mut worst = 0.0_f64;
            let mut evaluated = 0usize;
            let mut skipped = 0usize;
            for q in &points {
                let residual = pushforward(&chart.forward, x, q).and_then(|pushed| {
                    let image = chart.forward.eval_at(q)?;
                    Ok(pushed
                        .iter()
                        .zip(&image)
                        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
                });
                match residual {
                    Ok(r) => {
                        worst = worst.max(r);
                        evaluated += 1;
                        let coords: Vec<String> = q.iter().map(|c| format!("{c:.6e}")).collect();
                        writeln!(out, "point=[{}] residual={r:.3e}", coords.join(","))
                            .map_err(|e| e.to_string())?;
                    }
                    Err(_) => skipped += 1,
                }
            }
            writeln!(
                out,
                "max_residual={worst:.3e} samples={evaluated} skipped={skipped}"
            )
            .map_err(|e| e.to_string())?;
            Ok(if evaluated > 0 && worst <= max_residual { 0 } else { 1 })
        }
    }
}
