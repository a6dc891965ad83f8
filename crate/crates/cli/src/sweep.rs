//! Parameter sweeps over a dotted config path, e.g. `initial.u0.height`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hotspot_core::certificates::CertificateKind;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, RunConfig};
use crate::scenario::{run_scenario, ExitReport};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const BISECT_FILE: &str = "bisect.json";
pub const THREADS_ENV: &str = "HOTSPOT_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: String,
    pub t_detect: Option<f64>,
    pub certified: bool,
    pub thm65_margin: f64,
    pub thm66_margin: f64,
    pub lemma64_margin: f64,
    pub remark_i_margin: f64,
    pub run_dir: PathBuf,
}

impl SweepRow {
    fn new(value: f64, r: &ExitReport) -> Self {
        Self {
            value,
            outcome: r.outcome.clone(),
            t_detect: r.t_detect,
            certified: r.any_guaranteed(),
            thm65_margin: r.margin(CertificateKind::Thm65),
            thm66_margin: r.margin(CertificateKind::Thm66),
            lemma64_margin: r.margin(CertificateKind::Lemma64Necessary),
            remark_i_margin: r.margin(CertificateKind::RemarkI),
            run_dir: r.run_dir.clone(),
        }
    }

    pub fn is_blowup(&self) -> bool {
        self.outcome == "blowup_detected"
    }
}

/// Copy of `cfg` with the float at dotted `path` replaced by `value`.
pub fn with_param(cfg: &RunConfig, path: &str, value: f64) -> Result<RunConfig> {
    let mut root = toml::Value::try_from(cfg)?;
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().ok_or_else(|| anyhow!("empty parameter path"))?;
    let mut node = &mut root;
    for k in parents {
        node = node.get_mut(*k).ok_or_else(|| anyhow!("parameter path {path}: no section {k}"))?;
    }
    let table = node.as_table_mut().ok_or_else(|| anyhow!("parameter path {path}: {} is not a section", parents.join(".")))?;
    let slot = match table.get(*last) {
        Some(toml::Value::Integer(_)) => {
            if value.fract() != 0.0 {
                bail!("parameter {path} is an integer, got {value}");
            }
            toml::Value::Integer(value as i64)
        }
        Some(toml::Value::Float(_)) | None => toml::Value::Float(value),
        Some(other) => bail!("parameter {path} is a {}, not a number", other.type_str()),
    };
    table.insert(last.to_string(), slot);
    config::from_value(root).with_context(|| format!("setting {path} = {value}"))
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var(THREADS_ENV) {
        let n: usize = s.trim().parse().with_context(|| format!("{THREADS_ENV}={s:?}"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be at least 1");
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn point_dir(out: &Path, prefix: &str, i: usize) -> PathBuf {
    out.join(format!("{prefix}_{i:03}"))
}

/// Independent runs, one per value, in parallel. Rows come back in input
/// order; the seed only shuffles the order in which work is handed out.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        bail!("values list is empty");
    }
    let configs = values.iter().map(|&v| with_param(cfg, param, v)).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    std::fs::create_dir_all(out)?;
    let mut rows: Vec<(usize, SweepRow)> = pool()?.install(|| {
        order
            .par_iter()
            .map(|&i| {
                let r = run_scenario(&configs[i], &point_dir(out, "point", i))?;
                Ok((i, SweepRow::new(values[i], &r)))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by_key(|(i, _)| *i);
    let rows: Vec<SweepRow> = rows.into_iter().map(|(_, r)| r).collect();
    write_summary(&out.join(SUMMARY_FILE), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct Bracket {
    pub param: String,
    /// Largest value seen without blow-up.
    pub lo: f64,
    /// Smallest value seen with blow-up.
    pub hi: f64,
    pub width: f64,
    /// `max(|lo₀|, |hi₀|)` of the starting bracket.
    pub scale: f64,
    pub tol: f64,
}

/// Bisects on `param` until the bracket is at most `tol·max(|lo|, |hi|)`
/// wide. `lo` must not blow up and `hi` must.
pub fn bisect(cfg: &RunConfig, param: &str, lo: f64, hi: f64, tol: f64, out: &Path) -> Result<(Bracket, Vec<SweepRow>)> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        bail!("bisection needs finite lo < hi, got [{lo}, {hi}]");
    }
    if !(tol > 0.0) {
        bail!("bisection tolerance must be positive");
    }
    std::fs::create_dir_all(out)?;
    let scale = lo.abs().max(hi.abs());
    let mut rows = vec![];
    let eval = |v: f64, rows: &mut Vec<SweepRow>| -> Result<bool> {
        let r = run_scenario(&with_param(cfg, param, v)?, &point_dir(out, "bisect", rows.len()))?;
        let row = SweepRow::new(v, &r);
        let b = row.is_blowup();
        rows.push(row);
        Ok(b)
    };
    if eval(lo, &mut rows)? {
        bail!("{param} = {lo} already blows up; lower the bracket");
    }
    if !eval(hi, &mut rows)? {
        bail!("{param} = {hi} does not blow up; raise the bracket");
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol * scale {
        let mid = 0.5 * (a + b);
        if eval(mid, &mut rows)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    write_summary(&out.join(SUMMARY_FILE), &rows)?;
    let bracket = Bracket { param: param.into(), lo: a, hi: b, width: b - a, scale, tol };
    std::fs::write(out.join(BISECT_FILE), serde_json::to_string_pretty(&bracket)?)?;
    Ok((bracket, rows))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "value",
        "outcome",
        "t_detect",
        "certified",
        "thm65_margin",
        "thm66_margin",
        "lemma64_margin",
        "remark_i_margin",
        "run_dir",
    ])?;
    for r in rows {
        w.write_record([
            fmt(r.value),
            r.outcome.clone(),
            r.t_detect.map(fmt).unwrap_or_default(),
            r.certified.to_string(),
            fmt(r.thm65_margin),
            fmt(r.thm66_margin),
            fmt(r.lemma64_margin),
            fmt(r.remark_i_margin),
            r.run_dir.display().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
