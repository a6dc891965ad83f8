//! One run: certificates on the initial data, time integration, audits, and
//! the run directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use hotspot_core::certificates::{self, CertificateReport};
use hotspot_core::dynamics::{advance, RunOutcome, State};
use hotspot_core::functionals::{FunctionalContext, InitialSummary};
use hotspot_core::io;
use hotspot_core::verify::{audit_all, AuditResult, TrajectoryRecord, DEFAULT_AUDIT_TOL};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CERTIFICATES_FILE: &str = "certificates.json";
pub const AUDIT_FILE: &str = "audit.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

pub const EXIT_COMPLETED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub certificates: Vec<serde_json::Value>,
    pub outcome: String,
    pub t_detect: Option<f64>,
    pub detection_rule: Option<String>,
    pub extrapolated_blowup_time: Option<f64>,
    pub abort_reason: Option<String>,
    pub audits: Vec<AuditResult>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Summary of a finished scenario.
#[derive(Debug, Clone)]
pub struct ExitReport {
    pub run_dir: PathBuf,
    pub outcome: String,
    pub t_detect: Option<f64>,
    pub certificates: Vec<CertificateReport>,
    pub audits: Vec<AuditResult>,
}

impl ExitReport {
    pub fn exit_code(&self) -> i32 {
        match self.outcome.as_str() {
            "completed" => EXIT_COMPLETED,
            "blowup_detected" => EXIT_BLOWUP,
            _ => EXIT_ERROR,
        }
    }

    pub fn margin(&self, kind: certificates::CertificateKind) -> f64 {
        self.certificates.iter().find(|c| c.certificate == kind).map_or(f64::NAN, |c| c.margin)
    }

    pub fn any_guaranteed(&self) -> bool {
        self.certificates.iter().any(CertificateReport::is_guaranteed)
    }
}

fn initial_summary(cfg: &RunConfig, state: &State) -> Result<InitialSummary> {
    let params = cfg.params()?;
    let ctx = FunctionalContext::new(&params).ok();
    Ok(InitialSummary::from_state(state, params.a, ctx.as_ref().map(|c| c.psi())))
}

/// Certificates evaluated on the initial data of `cfg`.
pub fn certify(cfg: &RunConfig) -> Result<Vec<CertificateReport>> {
    let state = cfg.initial_state()?;
    let data = initial_summary(cfg, &state)?;
    let law = cfg.law()?;
    let a = cfg.physics.a;
    let t = cfg.certify_horizon();
    let c = cfg.certify.clone().unwrap_or_default();
    Ok(vec![
        certificates::check_theorem65(&data, &law, a, t, c.mode.into()),
        certificates::check_theorem66(&data, &law, a, t, c.eta, c.m),
        certificates::check_lemma64(&data, &law, a, t),
        certificates::check_remark_i(&data, &law, a, t),
    ])
}

/// Scalar comparison certificate from the `[ode]` section, with overrides.
pub fn ode(cfg: &RunConfig, c: Option<f64>, theta0: Option<f64>) -> Result<CertificateReport> {
    let sec = cfg.ode.clone();
    let c = c.or(sec.as_ref().map(|o| o.c)).unwrap_or(1.0);
    let theta0 = theta0.or(sec.as_ref().map(|o| o.theta0)).unwrap_or(0.0);
    anyhow::ensure!(c > 0.0 && c.is_finite(), "ode c must be positive");
    anyhow::ensure!(theta0 >= 0.0 && theta0.is_finite(), "ode theta0 nonnegative");
    Ok(certificates::check_ode(&cfg.law()?, c, theta0))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

/// Runs `cfg` and writes everything into `out`.
pub fn run_scenario(cfg: &RunConfig, out: &Path) -> Result<ExitReport> {
    let start = Instant::now();
    let certs = certify(cfg)?;
    let params = cfg.params()?;
    let outcome = advance(cfg.initial_state()?, &params)?;
    let record = TrajectoryRecord::from_outcome(&outcome, params.a);
    let audits = audit_all(&record, &params.law, DEFAULT_AUDIT_TOL);

    io::write_run(out, &outcome, params.a)?;
    fs::write(out.join(CONFIG_ECHO_FILE), cfg.to_string())?;
    write_json(&out.join(CERTIFICATES_FILE), &certs)?;
    write_json(&out.join(AUDIT_FILE), &audits)?;

    let (rule, extrapolated, reason) = match &outcome {
        RunOutcome::BlowUpDetected { rule, extrapolated_blowup_time, .. } => {
            (Some(serde_json::to_value(rule)?.as_str().unwrap_or_default().to_string()), *extrapolated_blowup_time, None)
        }
        RunOutcome::Aborted { reason, .. } => (None, None, Some(reason.clone())),
        RunOutcome::Completed(_) => (None, None, None),
    };
    let traj = outcome.trajectory();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        certificates: certs.iter().map(serde_json::to_value).collect::<Result<_, _>>()?,
        outcome: outcome.label().to_string(),
        t_detect: outcome.t_detect(),
        detection_rule: rule,
        extrapolated_blowup_time: extrapolated,
        abort_reason: reason,
        audits: audits.clone(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(ExitReport {
        run_dir: out.to_path_buf(),
        outcome: outcome.label().to_string(),
        t_detect: outcome.t_detect(),
        certificates: certs,
        audits,
    })
}

/// Re-audits a stored run with the law echoed in its manifest and writes
/// `audit.json`.
pub fn verify_run(dir: &Path, tol: f64) -> Result<Vec<AuditResult>> {
    let manifest = Manifest::read(dir)?;
    let law = manifest.config.law()?;
    let record = io::read_run(dir).with_context(|| format!("reading run in {}", dir.display()))?;
    let audits = audit_all(&record, &law, tol);
    write_json(&dir.join(AUDIT_FILE), &audits)?;
    Ok(audits)
}
