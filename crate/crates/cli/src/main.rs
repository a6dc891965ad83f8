use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use hotspot_cli::config::parse_config;
use hotspot_cli::scenario::{self, EXIT_COMPLETED, EXIT_ERROR};
use hotspot_cli::sweep;
use hotspot_core::verify::DEFAULT_AUDIT_TOL;

/// Blow-up laboratory for 1D thermoviscoelasticity with temperature-dependent
/// viscosity.
///
/// Exit codes: 0 completed, 2 blow-up detected, 1 error (including aborted
/// runs and failed audits). Config defaults: power law gamma = (1+xi)^2,
/// f = 0; domain (0, 1) with 256 cells; a = D = horizon = 1; zero initial
/// data; dt_init 1e-6, dt_min 1e-12, dt_max 1e-2, step_rel_tol 1e-5,
/// theta_blowup_threshold 1e8, checkpoint_every horizon/100.
#[derive(Parser)]
#[command(name = "hotspot", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Certify, integrate and audit one configuration.
    Simulate {
        config: PathBuf,
        /// Run directory [default: runs/<config stem>]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the blow-up certificates for the initial data as JSON.
    Certify { config: PathBuf },
    /// Re-audit a run directory and write audit.json.
    Verify {
        run_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_AUDIT_TOL)]
        tol: f64,
    },
    /// Scalar comparison problem theta' = c gamma(theta).
    Ode {
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        c: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        theta0: Option<f64>,
    },
    /// Run one configuration per value of a dotted parameter, e.g.
    /// initial.u0.height.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, conflicts_with = "bisect", required_unless_present = "bisect", allow_hyphen_values = true)]
        values: Option<String>,
        /// Bracket LO HI for the smallest value that blows up.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
        bisect: Option<Vec<f64>>,
        /// Bisection stops when the bracket is at most tol*max(|LO|,|HI|).
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
        /// Output directory [default: sweeps/<config stem>]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    let vals = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| anyhow::anyhow!("bad value {t:?}")))
        .collect::<Result<Vec<_>>>()?;
    if vals.is_empty() {
        bail!("values list is empty");
    }
    Ok(vals)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.10e}"))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Simulate { config, out } => {
            let cfg = parse_config(&config)?;
            let out = out.unwrap_or_else(|| Path::new("runs").join(stem(&config)));
            let r = scenario::run_scenario(&cfg, &out)?;
            println!("outcome {} t_detect {} dir {}", r.outcome, fmt_opt(r.t_detect), out.display());
            for c in &r.certificates {
                println!("certificate {:?} {:?} margin {:e}", c.certificate, c.verdict, c.margin);
            }
            for a in &r.audits {
                println!("audit {:?} pass {} worst_margin {:e}", a.inequality_id, a.pass, a.worst_margin);
            }
            Ok(r.exit_code())
        }
        Cmd::Certify { config } => {
            let reports = scenario::certify(&parse_config(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&reports)?);
            Ok(EXIT_COMPLETED)
        }
        Cmd::Verify { run_dir, tol } => {
            let audits = scenario::verify_run(&run_dir, tol)?;
            println!("{}", serde_json::to_string_pretty(&audits)?);
            Ok(if audits.iter().all(|a| a.pass) { EXIT_COMPLETED } else { EXIT_ERROR })
        }
        Cmd::Ode { config, c, theta0 } => {
            let report = scenario::ode(&parse_config(&config)?, c, theta0)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(EXIT_COMPLETED)
        }
        Cmd::Sweep { config, param, values, bisect, tol, out } => {
            let cfg = parse_config(&config)?;
            let out = out.unwrap_or_else(|| Path::new("sweeps").join(stem(&config)));
            if let Some(b) = bisect {
                let (bracket, _) = sweep::bisect(&cfg, &param, b[0], b[1], tol, &out)?;
                println!("{}", serde_json::to_string_pretty(&bracket)?);
            } else {
                let vals = parse_values(values.as_deref().unwrap_or_default())?;
                let rows = sweep::sweep(&cfg, &param, &vals, &out)?;
                for r in rows {
                    println!("{} {} {}", r.value, r.outcome, fmt_opt(r.t_detect));
                }
            }
            println!("summary {}", out.join(sweep::SUMMARY_FILE).display());
            Ok(EXIT_COMPLETED)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors must not collide with the blow-up exit code.
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
