//! Post-hoc audits of the a-priori estimates along a computed trajectory.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Accumulators, RunOutcome};
use crate::functionals::{self, EstimateConstants, InitialSummary};
use crate::material::CoefficientLaw;

pub const DEFAULT_AUDIT_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InequalityId {
    /// `∫₀^T∫|∇u_t|² ≤ 2∫ψ(Θ₀) + Λ|Ω|T/γ₀(T)`
    L601,
    /// `∫|∇u₀|² ≤ 2∫|∇u(t)|² + 2t∫₀^t∫|∇u_t|²`
    L63,
    /// Bound on `∫₀^T∫|∇u_t + a∇u|²`.
    L61,
    /// Bound on `∫₀^T∫|∇u|²`.
    L62,
    /// Necessary condition on `∫|∇u₀|²` for existence on `[0, T]`.
    L64,
    /// `Θ ≥ inf Θ₀ − Λt/4`
    L99,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub inequality_id: InequalityId,
    pub times_checked: Vec<f64>,
    /// Smallest `(RHS − LHS)/max(|RHS|, 1)` over the checked times. JSON
    /// writes NaN as null, so null reads back as NaN.
    #[serde(deserialize_with = "null_as_nan")]
    pub worst_margin: f64,
    pub pass: bool,
    /// Why the audit could not be evaluated, if it could not.
    pub unavailable: Option<String>,
}

impl AuditResult {
    fn unavailable(id: InequalityId, reason: impl Into<String>) -> Self {
        Self { inequality_id: id, times_checked: vec![], worst_margin: f64::NAN, pass: true, unavailable: Some(reason.into()) }
    }

    fn from_pairs(id: InequalityId, pairs: impl IntoIterator<Item = (f64, f64, f64)>, tol: f64) -> Self {
        let mut times = vec![];
        let mut worst = f64::INFINITY;
        for (t, lhs, rhs) in pairs {
            times.push(t);
            let m = (rhs - lhs) / rhs.abs().max(1.0);
            // NaN margins must count as failures.
            worst = if m.is_nan() { f64::NAN } else if worst.is_nan() { worst } else { worst.min(m) };
        }
        let pass = worst >= -tol;
        Self { inequality_id: id, times_checked: times, worst_margin: worst, pass, unavailable: None }
    }
}

fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// What the audits need from one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub t: f64,
    pub theta_min: f64,
    pub theta_running_min: f64,
    pub grad_u_sq: f64,
    pub accum: Accumulators,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub a: f64,
    pub lambda: f64,
    pub initial: InitialSummary,
    pub checkpoints: Vec<CheckpointRecord>,
    /// The run reached its horizon.
    pub completed: bool,
}

impl TrajectoryRecord {
    pub fn from_outcome(outcome: &RunOutcome, a: f64) -> Self {
        let traj = outcome.trajectory();
        let checkpoints = traj
            .checkpoints
            .iter()
            .map(|ck| CheckpointRecord {
                t: ck.state.t,
                theta_min: ck.snapshot.theta_min,
                theta_running_min: ck.state.theta_running_min,
                grad_u_sq: ck.snapshot.grad_u_sq,
                accum: ck.state.accum,
            })
            .collect();
        Self { a, lambda: traj.lambda, initial: traj.initial, checkpoints, completed: outcome.is_completed() }
    }

    fn constants(&self) -> EstimateConstants {
        EstimateConstants::new(self.a, self.lambda, self.initial.omega_measure)
    }
}

fn gamma0(law: &CoefficientLaw, ck: &CheckpointRecord) -> f64 {
    law.gamma(ck.theta_running_min.max(0.0))
}

fn needs_lambda(rec: &TrajectoryRecord, id: InequalityId) -> Option<AuditResult> {
    if !rec.lambda.is_finite() {
        return Some(AuditResult::unavailable(id, "sup f^2/gamma is infinite"));
    }
    None
}

fn needs_psi(rec: &TrajectoryRecord, id: InequalityId) -> Option<AuditResult> {
    if !rec.initial.psi_integral.is_finite() {
        return Some(AuditResult::unavailable(id, "psi is not defined for this law"));
    }
    None
}

pub fn audit_lemma601(rec: &TrajectoryRecord, law: &CoefficientLaw, tol: f64) -> AuditResult {
    let id = InequalityId::L601;
    if let Some(r) = needs_lambda(rec, id).or_else(|| needs_psi(rec, id)) {
        return r;
    }
    let c = rec.constants();
    let pairs = rec.checkpoints.iter().map(|ck| {
        let rhs = functionals::lemma601_rhs(rec.initial.psi_integral, gamma0(law, ck), &c, ck.t).unwrap_or(f64::NAN);
        (ck.t, ck.accum.int_grad_ut_sq, rhs)
    });
    AuditResult::from_pairs(id, pairs, tol)
}

pub fn audit_lemma63(rec: &TrajectoryRecord, tol: f64) -> AuditResult {
    let pairs = rec.checkpoints.iter().map(|ck| {
        (ck.t, rec.initial.grad_u0_sq, functionals::lemma63_rhs(ck.grad_u_sq, ck.accum.int_grad_ut_sq, ck.t))
    });
    AuditResult::from_pairs(InequalityId::L63, pairs, tol)
}

pub fn audit_lemma61(rec: &TrajectoryRecord, law: &CoefficientLaw, tol: f64) -> AuditResult {
    let id = InequalityId::L61;
    if let Some(r) = needs_lambda(rec, id) {
        return r;
    }
    let c = rec.constants();
    let pairs = rec.checkpoints.iter().map(|ck| {
        let rhs = functionals::lemma61_rhs(&rec.initial, gamma0(law, ck), &c, ck.t).unwrap_or(f64::NAN);
        (ck.t, ck.accum.int_grad_uav_sq, rhs)
    });
    AuditResult::from_pairs(id, pairs, tol)
}

pub fn audit_lemma62(rec: &TrajectoryRecord, law: &CoefficientLaw, tol: f64) -> AuditResult {
    let id = InequalityId::L62;
    if let Some(r) = needs_lambda(rec, id).or_else(|| needs_psi(rec, id)) {
        return r;
    }
    let c = rec.constants();
    let pairs = rec.checkpoints.iter().map(|ck| {
        let rhs = functionals::lemma62_rhs(&rec.initial, gamma0(law, ck), &c, ck.t).unwrap_or(f64::NAN);
        (ck.t, ck.accum.int_grad_u_sq, rhs)
    });
    AuditResult::from_pairs(id, pairs, tol)
}

/// Consistency of a completed run with the necessary condition at its final time.
pub fn audit_lemma64(rec: &TrajectoryRecord, law: &CoefficientLaw, tol: f64) -> AuditResult {
    let id = InequalityId::L64;
    if let Some(r) = needs_lambda(rec, id).or_else(|| needs_psi(rec, id)) {
        return r;
    }
    if !rec.completed {
        return AuditResult::unavailable(id, "run did not reach its horizon");
    }
    let Some(ck) = rec.checkpoints.last().filter(|ck| ck.t > 0.0) else {
        return AuditResult::unavailable(id, "no checkpoint after t = 0");
    };
    let rhs = functionals::lemma64_rhs(&rec.initial, gamma0(law, ck), &rec.constants(), ck.t).unwrap_or(f64::NAN);
    AuditResult::from_pairs(id, [(ck.t, rec.initial.grad_u0_sq, rhs)], tol)
}

pub fn audit_lemma99(rec: &TrajectoryRecord, tol: f64) -> AuditResult {
    let id = InequalityId::L99;
    if let Some(r) = needs_lambda(rec, id) {
        return r;
    }
    // Θ_min ≥ bound is audited as RHS = Θ_min, LHS = bound.
    let pairs = rec.checkpoints.iter().map(|ck| {
        (ck.t, functionals::minimum_principle_bound(rec.initial.theta0_inf, rec.lambda, ck.t), ck.theta_min)
    });
    AuditResult::from_pairs(id, pairs, tol)
}

pub fn audit_all(rec: &TrajectoryRecord, law: &CoefficientLaw, tol: f64) -> Vec<AuditResult> {
    vec![
        audit_lemma601(rec, law, tol),
        audit_lemma63(rec, tol),
        audit_lemma61(rec, law, tol),
        audit_lemma62(rec, law, tol),
        audit_lemma64(rec, law, tol),
        audit_lemma99(rec, tol),
    ]
}
