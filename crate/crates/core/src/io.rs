//! Run-directory files: nodal snapshots, the checkpoint trace and the audit
//! sidecar. Floats are written with 17 significant digits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Accumulators, RunOutcome, State};
use crate::error::{Error, Result};
use crate::verify::{CheckpointRecord, TrajectoryRecord};

pub const TRACE_FILE: &str = "trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoints.csv";
pub const RECORD_FILE: &str = "record.json";

pub const TRACE_HEADER: [&str; 10] = [
    "t",
    "dt",
    "theta_max",
    "theta_min",
    "int_grad_ut_sq",
    "int_grad_v_gamma",
    "int_grad_u_sq",
    "int_grad_uav_sq",
    "psi_integral",
    "y_energy",
];
const CHECKPOINT_HEADER: [&str; 6] = ["k", "t", "theta_running_min", "grad_u_sq", "l2_u", "l2_v"];

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad number {s:?} in {what}")))
}

pub fn snapshot_name(k: usize) -> String {
    format!("snapshot_{k}.csv")
}

pub fn write_snapshot(path: &Path, state: &State) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "u", "v", "theta"])?;
    for (i, x) in state.grid.nodes().into_iter().enumerate() {
        w.write_record([fmt(x), fmt(state.u.values[i]), fmt(state.v.values[i]), fmt(state.theta.values[i])])?;
    }
    w.flush()?;
    Ok(())
}

/// Nodal columns of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotColumns {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotColumns> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["x", "u", "v", "theta"] {
        return Err(Error::Format(format!("{} does not have header x,u,v,theta", path.display())));
    }
    let mut cols = SnapshotColumns { x: vec![], u: vec![], v: vec![], theta: vec![] };
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Format("snapshot row must have 4 fields".into()));
        }
        cols.x.push(parse(&rec[0], "snapshot")?);
        cols.u.push(parse(&rec[1], "snapshot")?);
        cols.v.push(parse(&rec[2], "snapshot")?);
        cols.theta.push(parse(&rec[3], "snapshot")?);
    }
    Ok(cols)
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordMeta {
    a: f64,
    lambda: f64,
    completed: bool,
    initial: crate::functionals::InitialSummary,
}

/// Writes snapshots, `trace.csv`, `checkpoints.csv` and `record.json` for
/// every checkpoint of a run.
pub fn write_run(dir: &Path, outcome: &RunOutcome, a: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let traj = outcome.trajectory();
    let mut trace = csv::Writer::from_path(dir.join(TRACE_FILE))?;
    trace.write_record(TRACE_HEADER)?;
    let mut cks = csv::Writer::from_path(dir.join(CHECKPOINT_FILE))?;
    cks.write_record(CHECKPOINT_HEADER)?;
    for (k, ck) in traj.checkpoints.iter().enumerate() {
        write_snapshot(&dir.join(snapshot_name(k)), &ck.state)?;
        let s = &ck.snapshot;
        let acc = &ck.state.accum;
        trace.write_record(
            [
                s.t,
                ck.dt,
                s.theta_max,
                s.theta_min,
                acc.int_grad_ut_sq,
                acc.int_grad_v_gamma,
                acc.int_grad_u_sq,
                acc.int_grad_uav_sq,
                s.psi_integral,
                s.y_energy,
            ]
            .map(fmt),
        )?;
        cks.write_record([k.to_string(), fmt(s.t), fmt(ck.state.theta_running_min), fmt(s.grad_u_sq), fmt(s.l2_u), fmt(s.l2_v)])?;
    }
    trace.flush()?;
    cks.flush()?;
    let meta = RecordMeta { a, lambda: traj.lambda, completed: outcome.is_completed(), initial: traj.initial };
    // Non-finite values come out as null; read_run maps them back.
    fs::write(dir.join(RECORD_FILE), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if got != header {
        return Err(Error::Format(format!("{} has header {:?}", path.display(), got)));
    }
    let mut rows = vec![];
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Format(format!("{}: row with {} fields", path.display(), rec.len())));
        }
        rows.push(rec.iter().map(|s| parse(s, &path.display().to_string())).collect::<Result<Vec<f64>>>()?);
    }
    Ok(rows)
}

/// Reads back what the audits need from a run directory.
pub fn read_run(dir: &Path) -> Result<TrajectoryRecord> {
    let meta_text = fs::read_to_string(dir.join(RECORD_FILE))?;
    let mut value: serde_json::Value = serde_json::from_str(&meta_text)?;
    let lambda_missing = value["lambda"].is_null();
    if lambda_missing {
        value["lambda"] = serde_json::json!(0.0);
    }
    for key in ["psi_integral", "l2_u0", "l2_u0t", "grad_u0_sq", "theta0_inf", "omega_measure"] {
        if value["initial"][key].is_null() {
            value["initial"][key] = serde_json::json!(0.0);
            if key == "psi_integral" {
                value["initial"]["psi_integral_missing"] = serde_json::json!(true);
            }
        }
    }
    let psi_missing = value["initial"]["psi_integral_missing"].as_bool().unwrap_or(false);
    let mut meta: RecordMeta = serde_json::from_value(value)?;
    if lambda_missing {
        meta.lambda = f64::INFINITY;
    }
    if psi_missing {
        meta.initial.psi_integral = f64::NAN;
    }

    let trace = read_rows(&dir.join(TRACE_FILE), &TRACE_HEADER)?;
    let cks = read_rows(&dir.join(CHECKPOINT_FILE), &CHECKPOINT_HEADER)?;
    if trace.len() != cks.len() || trace.is_empty() {
        return Err(Error::Format("trace.csv and checkpoints.csv disagree in length".into()));
    }
    let checkpoints = trace
        .iter()
        .zip(&cks)
        .map(|(tr, ck)| CheckpointRecord {
            t: tr[0],
            theta_min: tr[3],
            theta_running_min: ck[2],
            grad_u_sq: ck[3],
            accum: Accumulators { int_grad_ut_sq: tr[4], int_grad_v_gamma: tr[5], int_grad_u_sq: tr[6], int_grad_uav_sq: tr[7] },
        })
        .collect();
    Ok(TrajectoryRecord { a: meta.a, lambda: meta.lambda, initial: meta.initial, checkpoints, completed: meta.completed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{advance, Params};
    use crate::grid::{Bc, Field, Grid1D};
    use crate::material::CoefficientLaw;
    use std::f64::consts::PI;

    fn outcome(law: CoefficientLaw) -> RunOutcome {
        let g = Grid1D::unit(32).unwrap();
        let u0 = Field::from_fn(&g, Bc::DirichletZero, |x| 0.3 * (PI * x).sin()).unwrap();
        let u0t = Field::zeros(&g, Bc::DirichletZero);
        let th = Field::from_fn(&g, Bc::NeumannZero, |x| 1.0 + 0.5 * (PI * x).cos()).unwrap();
        let s = State::from_initial_data(g, u0, u0t, th, 1.0).unwrap();
        let mut p = Params::new(1.0, 1.0, law, 0.1);
        p.checkpoint_every = 0.05;
        advance(s, &p).unwrap()
    }

    #[test]
    fn run_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = outcome(CoefficientLaw::power_law(1.0, 2.0, 0.2));
        write_run(dir.path(), &out, 1.0).unwrap();
        let rec = read_run(dir.path()).unwrap();
        assert_eq!(rec, TrajectoryRecord::from_outcome(&out, 1.0));
        let snap = read_snapshot(&dir.path().join(snapshot_name(2))).unwrap();
        assert_eq!(snap.theta, out.trajectory().checkpoints[2].state.theta.values);
        let text = fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap();
        assert!(text.starts_with(&TRACE_HEADER.join(",")));
    }

    #[test]
    fn non_integrable_law_round_trips_with_missing_constants() {
        let dir = tempfile::tempdir().unwrap();
        let out = outcome(CoefficientLaw::power_law(1.0, 1.0, 0.5));
        write_run(dir.path(), &out, 1.0).unwrap();
        let rec = read_run(dir.path()).unwrap();
        assert!(rec.lambda.is_infinite());
        assert!(rec.initial.psi_integral.is_nan());
    }

    #[test]
    fn malformed_trace_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let out = outcome(CoefficientLaw::power_law(1.0, 2.0, 0.0));
        write_run(dir.path(), &out, 1.0).unwrap();
        fs::write(dir.path().join(TRACE_FILE), "t,dt\n1,2\n").unwrap();
        assert!(matches!(read_run(dir.path()), Err(Error::Format(_))));
    }
}
