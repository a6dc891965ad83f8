//! Scalar functionals of a state and the right-hand sides of the a-priori
//! estimates built from them.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Params, State};
use crate::error::{Error, Result};
use crate::grid;
use crate::material::{self, CoefficientLaw, PsiTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSnapshot {
    pub t: f64,
    pub theta_max: f64,
    pub theta_min: f64,
    /// `∫ψ(Θ)`; NaN when `ψ` is not defined for the law.
    pub psi_integral: f64,
    pub grad_u_sq: f64,
    pub grad_ut_sq: f64,
    /// `½∫v² + (a²/2)∫u²`
    pub y_energy: f64,
    pub l2_u: f64,
    pub l2_v: f64,
    /// `γ` at the running minimum of `Θ`.
    pub gamma0_so_far: f64,
}

/// Integrals of the initial data that enter the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSummary {
    pub psi_integral: f64,
    pub l2_u0: f64,
    pub l2_u0t: f64,
    pub grad_u0_sq: f64,
    pub theta0_inf: f64,
    pub omega_measure: f64,
}

impl InitialSummary {
    pub fn from_state(state: &State, a: f64, psi: Option<&PsiTable>) -> Self {
        let g = &state.grid;
        let u0t = state.u_t(a);
        let psi_integral = match psi {
            Some(table) => psi_integral(table, &state.theta.values, g).unwrap_or(f64::NAN),
            None => f64::NAN,
        };
        Self {
            psi_integral,
            l2_u0: l2(&state.u.values, g),
            l2_u0t: l2(&u0t, g),
            grad_u0_sq: grid::dirichlet_energy(&state.u.values, g),
            theta0_inf: state.theta.min(),
            omega_measure: g.measure(),
        }
    }
}

fn l2(values: &[f64], g: &grid::Grid1D) -> f64 {
    let sq: Vec<f64> = values.iter().map(|x| x * x).collect();
    grid::integrate(&sq, g)
}

fn psi_integral(table: &PsiTable, theta: &[f64], g: &grid::Grid1D) -> Result<f64> {
    let vals = theta.iter().map(|&t| table.eval(t.max(0.0))).collect::<Result<Vec<f64>>>()?;
    Ok(grid::integrate(&vals, g))
}

/// Per-run context holding the memoized `ψ` table.
#[derive(Debug, Clone)]
pub struct FunctionalContext {
    psi: PsiTable,
}

impl FunctionalContext {
    pub fn new(params: &Params) -> Result<Self> {
        let top = (10.0 * params.theta_blowup_threshold).max(1.0);
        Ok(Self { psi: PsiTable::new(&params.law, top)? })
    }

    pub fn psi(&self) -> &PsiTable {
        &self.psi
    }

    pub fn snapshot(&self, state: &State, params: &Params) -> Result<FunctionalSnapshot> {
        Self::snapshot_opt(Some(self), state, params)
    }

    /// Like [`snapshot`](Self::snapshot) but reports `psi_integral = NaN`
    /// without a context.
    pub fn snapshot_opt(ctx: Option<&Self>, state: &State, params: &Params) -> Result<FunctionalSnapshot> {
        let g = &state.grid;
        let a = params.a;
        let psi_integral = match ctx {
            Some(c) => psi_integral(&c.psi, &state.theta.values, g)?,
            None => f64::NAN,
        };
        let l2_u = l2(&state.u.values, g);
        let l2_v = l2(&state.v.values, g);
        Ok(FunctionalSnapshot {
            t: state.t,
            theta_max: state.theta.max(),
            theta_min: state.theta.min(),
            psi_integral,
            grad_u_sq: grid::dirichlet_energy(&state.u.values, g),
            grad_ut_sq: grid::dirichlet_energy(&state.u_t(a), g),
            y_energy: 0.5 * l2_v + 0.5 * a * a * l2_u,
            l2_u,
            l2_v,
            gamma0_so_far: params.law.gamma(state.theta_running_min.max(0.0)),
        })
    }
}

/// Functionals of one state. Fails with `DivergentIntegral` when `ψ` is not
/// defined for the law.
pub fn snapshot(state: &State, params: &Params) -> Result<FunctionalSnapshot> {
    FunctionalContext::new(params)?.snapshot(state, params)
}

/// Constants shared by the estimate right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateConstants {
    pub a: f64,
    pub lambda: f64,
    pub omega: f64,
}

impl EstimateConstants {
    pub fn new(a: f64, lambda: f64, omega: f64) -> Self {
        Self { a, lambda, omega }
    }

    pub fn from_law(law: &CoefficientLaw, a: f64, omega: f64) -> Self {
        let lambda = material::lambda_bound(law, material::DEFAULT_LAMBDA_WINDOW, material::DEFAULT_LAMBDA_SAMPLES)
            .unwrap_or(f64::INFINITY);
        Self { a, lambda, omega }
    }

    fn finite_lambda(&self) -> Result<f64> {
        if self.lambda.is_finite() {
            Ok(self.lambda)
        } else {
            Err(Error::InfiniteLambda)
        }
    }
}

/// Bound on `∫₀^T∫|∇u_t|²`.
pub fn lemma601_rhs(psi0: f64, gamma0: f64, c: &EstimateConstants, t: f64) -> Result<f64> {
    let lam = c.finite_lambda()?;
    Ok(2.0 * psi0 + lam * c.omega * t / gamma0)
}

/// Bound on `∫|∇u₀|²` in terms of the solution at time `t`.
pub fn lemma63_rhs(grad_u_sq_t: f64, int_grad_ut_sq: f64, t: f64) -> f64 {
    2.0 * grad_u_sq_t + 2.0 * t * int_grad_ut_sq
}

/// Bound on `∫₀^T∫|∇u_t + a∇u|²`.
pub fn lemma61_rhs(data: &InitialSummary, gamma0: f64, c: &EstimateConstants, t: f64) -> Result<f64> {
    let lam = c.finite_lambda()?;
    let a = c.a;
    let e = (2.0 * a * t).exp();
    Ok(3.0 * a * a * e / gamma0 * data.l2_u0
        + 2.0 * e / gamma0 * data.l2_u0t
        + lam * c.omega * e / (2.0 * a * gamma0)
        + lam * c.omega * t / gamma0)
}

/// Bound on `∫₀^T∫|∇u|²`.
pub fn lemma62_rhs(data: &InitialSummary, gamma0: f64, c: &EstimateConstants, t: f64) -> Result<f64> {
    let lam = c.finite_lambda()?;
    let a = c.a;
    let a2 = a * a;
    let e = (2.0 * a * t).exp();
    Ok(4.0 / a2 * data.psi_integral
        + 6.0 * e / gamma0 * data.l2_u0
        + 4.0 * e / (a2 * gamma0) * data.l2_u0t
        + lam * c.omega * e / (a2 * a * gamma0)
        + 4.0 * lam * c.omega * t / (a2 * gamma0))
}

/// Upper bound on `∫|∇u₀|²` valid for every solution that exists on `[0, T]`.
pub fn lemma64_rhs(data: &InitialSummary, gamma0: f64, c: &EstimateConstants, t: f64) -> Result<f64> {
    let lam = c.finite_lambda()?;
    let a = c.a;
    let a2 = a * a;
    let e = (2.0 * a * t).exp();
    let lo = lam * c.omega;
    Ok((8.0 / (a2 * t) + 4.0 * t) * data.psi_integral
        + 12.0 * e / (t * gamma0) * data.l2_u0
        + 8.0 * e / (a2 * t * gamma0) * data.l2_u0t
        + 2.0 * lo * e / (a2 * a * t * gamma0)
        + 8.0 * lo / (a2 * gamma0)
        + 2.0 * lo * t * t / gamma0)
}

/// Threshold on `∫|∇u₀|²` above which a solution with `f ≡ 0` cannot exist
/// on `[0, T]`.
pub fn remark_i_threshold(data: &InitialSummary, law: &CoefficientLaw, a: f64, t: f64) -> f64 {
    let a2 = a * a;
    let e = (2.0 * a * t).exp();
    let g = law.gamma(data.theta0_inf.max(0.0));
    (4.0 / (a2 * t) + 2.0 * t) * data.psi_integral + 4.0 * e / (a2 * t) / g * (1.5 * a2 * data.l2_u0 + data.l2_u0t)
}

/// Lower bound on the temperature at time `t`.
pub fn minimum_principle_bound(theta0_inf: f64, lambda: f64, t: f64) -> f64 {
    theta0_inf - lambda * t / 4.0
}
