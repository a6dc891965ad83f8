//! Time integration of the viscous-wave/heat system in the variables
//! `v = u_t + a u`, `u`, `Θ`:
//!
//! ```text
//! v_t = (γ(Θ) v_x)_x + a v − a² u + f(Θ)_x
//! u_t = v − a u
//! Θ_t = D Θ_xx + γ(Θ) |v_x − a u_x|² + f(Θ) (v_x − a u_x)
//! ```
//!
//! with `u = v = 0` and `Θ_x = 0` on the boundary.
//!
//! One step is backward Euler for the two diffusion operators (with `γ`
//! frozen at the old temperature) and forward Euler for everything else.
//! [`advance`] wraps it in step-doubling error control and watches the
//! temperature for blow-up.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{FunctionalContext, FunctionalSnapshot, InitialSummary};
use crate::grid::{self, Bc, Field, Grid1D};
use crate::material::{self, CoefficientLaw};
use crate::tridiag::Tridiagonal;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct Params {
    pub a: f64,
    /// Heat diffusivity `D`.
    pub diffusivity: f64,
    pub law: CoefficientLaw,
    pub horizon: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub theta_blowup_threshold: f64,
    pub step_rel_tol: f64,
    /// Spacing of recorded checkpoints; non-positive means start and end only.
    pub checkpoint_every: f64,
    pub max_steps: usize,
}

impl Params {
    pub fn new(a: f64, diffusivity: f64, law: CoefficientLaw, horizon: f64) -> Self {
        Self {
            a,
            diffusivity,
            law,
            horizon,
            dt_init: 1e-6,
            dt_min: 1e-12,
            dt_max: 1e-2,
            theta_blowup_threshold: 1e8,
            step_rel_tol: 1e-5,
            checkpoint_every: horizon / 100.0,
            max_steps: 2_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.a > 0.0 && self.a.is_finite()) {
            return fail("a must be positive");
        }
        if !(self.diffusivity > 0.0 && self.diffusivity.is_finite()) {
            return fail("D must be positive");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return fail("horizon must be positive");
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init && self.dt_init <= self.dt_max) {
            return fail("need 0 < dt_min < dt_init <= dt_max");
        }
        if !(self.step_rel_tol > 0.0) {
            return fail("step_rel_tol must be positive");
        }
        if !(self.theta_blowup_threshold > 0.0) {
            return fail("theta_blowup_threshold must be positive");
        }
        Ok(())
    }
}

/// Running time integrals, advanced by the trapezoid rule over accepted steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct Accumulators {
    /// `∫₀^t ∫|∇u_t|²`
    pub int_grad_ut_sq: f64,
    /// `∫₀^t ∫γ(Θ)|∇v|²`
    pub int_grad_v_gamma: f64,
    /// `∫₀^t ∫|∇u|²`
    pub int_grad_u_sq: f64,
    /// `∫₀^t ∫|∇u_t + a∇u|²`
    pub int_grad_uav_sq: f64,
}

/// Spatial integrands of the accumulators at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub grad_ut_sq: f64,
    pub grad_v_gamma: f64,
    pub grad_u_sq: f64,
    pub grad_uav_sq: f64,
}

impl Accumulators {
    fn advance(&mut self, dt: f64, old: &Rates, new: &Rates) {
        let trap = |a: f64, b: f64| 0.5 * dt * (a + b);
        self.int_grad_ut_sq += trap(old.grad_ut_sq, new.grad_ut_sq);
        self.int_grad_v_gamma += trap(old.grad_v_gamma, new.grad_v_gamma);
        self.int_grad_u_sq += trap(old.grad_u_sq, new.grad_u_sq);
        self.int_grad_uav_sq += trap(old.grad_uav_sq, new.grad_uav_sq);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub grid: Grid1D,
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub theta: Field,
    /// Smallest nodal temperature seen so far.
    pub theta_running_min: f64,
    pub accum: Accumulators,
}

impl State {
    /// Builds the state at `t = 0` from `(u₀, u₀t, Θ₀)`, with `v₀ = u₀t + a u₀`.
    pub fn from_initial_data(grid: Grid1D, u0: Field, u0t: Field, theta0: Field, a: f64) -> Result<Self> {
        let n = grid.n_nodes();
        if u0.len() != n || u0t.len() != n || theta0.len() != n {
            return Err(Error::InvalidInitialData("initial fields do not match the grid".into()));
        }
        if u0.bc != Bc::DirichletZero || u0t.bc != Bc::DirichletZero {
            return Err(Error::InvalidInitialData("u0 and u0t must be Dirichlet fields".into()));
        }
        if theta0.bc != Bc::NeumannZero {
            return Err(Error::InvalidInitialData("theta0 must be a Neumann field".into()));
        }
        if theta0.min() < 0.0 {
            return Err(Error::InvalidInitialData(format!("theta0 must be nonnegative (min {})", theta0.min())));
        }
        let v = u0t.values.iter().zip(&u0.values).map(|(ut, u)| ut + a * u).collect();
        let v = Field::new(v, Bc::DirichletZero)?;
        Ok(Self {
            grid,
            t: 0.0,
            theta_running_min: theta0.min(),
            u: u0,
            v,
            theta: theta0,
            accum: Accumulators::default(),
        })
    }

    /// `u_t = v − a u` at the nodes.
    pub fn u_t(&self, a: f64) -> Vec<f64> {
        self.v.values.iter().zip(&self.u.values).map(|(v, u)| v - a * u).collect()
    }

    pub fn rates(&self, params: &Params) -> Result<Rates> {
        let temps = coefficient_temperatures(&self.theta)?;
        let gamma = eval_gamma(&params.law, &temps)?;
        Ok(self.rates_with(params.a, &gamma))
    }

    fn rates_with(&self, a: f64, gamma: &[f64]) -> Rates {
        let g = &self.grid;
        Rates {
            grad_ut_sq: grid::dirichlet_energy(&self.u_t(a), g),
            grad_v_gamma: grid::weighted_dirichlet_energy(&self.v.values, gamma, g),
            grad_u_sq: grid::dirichlet_energy(&self.u.values, g),
            grad_uav_sq: grid::dirichlet_energy(&self.v.values, g),
        }
    }
}

/// Temperatures at which the coefficients are evaluated: roundoff-level
/// negatives are clamped to zero, anything below `-1e-10·max(1, ‖Θ‖∞)` is an
/// error.
fn coefficient_temperatures(theta: &Field) -> Result<Vec<f64>> {
    let scale = theta.max_abs().max(1.0);
    let min = theta.min();
    if !min.is_finite() || !theta.max().is_finite() {
        return Err(Error::NonFiniteState);
    }
    if min < -1e-10 * scale {
        return Err(Error::NegativeTemperature { min });
    }
    Ok(theta.values.iter().map(|&t| t.max(0.0)).collect())
}

fn eval_gamma(law: &CoefficientLaw, temps: &[f64]) -> Result<Vec<f64>> {
    let gamma: Vec<f64> = temps.iter().map(|&t| law.gamma(t)).collect();
    if let Some(i) = gamma.iter().position(|g| !g.is_finite()) {
        return Err(Error::Evaluation { xi: temps[i] });
    }
    grid::check_positive(&gamma)?;
    Ok(gamma)
}

/// Explicitly treated pieces of the right-hand side, evaluated at one state.
struct Forcing {
    gamma: Vec<f64>,
    /// `f(Θ)_x`
    div_f: Vec<f64>,
    /// `γ(Θ)|w_x|² + f(Θ) w_x` with `w = v − a u = u_t`.
    heating: Vec<f64>,
}

fn forcing(state: &State, params: &Params) -> Result<Forcing> {
    let g = &state.grid;
    let temps = coefficient_temperatures(&state.theta)?;
    let gamma = eval_gamma(&params.law, &temps)?;
    let fval: Vec<f64> = temps.iter().map(|&t| params.law.f(t)).collect();
    if let Some(i) = fval.iter().position(|f| !f.is_finite()) {
        return Err(Error::Evaluation { xi: temps[i] });
    }

    let w = Field { values: state.u_t(params.a), bc: Bc::DirichletZero };
    let faces = grid::face_gradient(&w.values, g);
    let n = w.len() - 1;
    // Inside, |w_x|² is the mean of the two adjacent cell values and w_x the
    // mean of the cell slopes, so γ s + f w_x ≥ −f²/(4γ) holds node by node.
    // Boundary nodes take their single cell, which keeps the trapezoid sum of
    // the heating equal to the midpoint rule.
    let heating = (0..=n)
        .map(|i| {
            let (sq, slope) = if i == 0 {
                (faces[0].powi(2), faces[0])
            } else if i == n {
                (faces[n - 1].powi(2), faces[n - 1])
            } else {
                (0.5 * (faces[i - 1].powi(2) + faces[i].powi(2)), 0.5 * (faces[i - 1] + faces[i]))
            };
            gamma[i] * sq + fval[i] * slope
        })
        .collect();
    let div_f = grid::gradient(&Field { values: fval, bc: Bc::NeumannZero }, g);
    Ok(Forcing { gamma, div_f, heating })
}

/// Time derivatives `(v_t, u_t, Θ_t)` at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dv: Vec<f64>,
    pub du: Vec<f64>,
    pub dtheta: Vec<f64>,
}

pub fn rhs(state: &State, params: &Params) -> Result<Derivative> {
    let g = &state.grid;
    let a = params.a;
    let frc = forcing(state, params)?;
    let mut dv = grid::div_gamma_grad(&state.v, &frc.gamma, g)?;
    let n = dv.len() - 1;
    for i in 1..n {
        dv[i] += a * state.v.values[i] - a * a * state.u.values[i] + frc.div_f[i];
    }
    let du = state.u_t(a);
    let lap = grid::laplacian_neumann(&state.theta, g);
    let dtheta = lap.iter().zip(&frc.heating).map(|(l, q)| params.diffusivity * l + q).collect();
    Ok(Derivative { dv, du, dtheta })
}

/// One IMEX step of size `dt`.
pub fn step(state: &State, dt: f64, params: &Params) -> Result<State> {
    let g = &state.grid;
    let a = params.a;
    let n = g.n_cells();
    let h2 = g.h() * g.h();
    let frc = forcing(state, params)?;
    let (u, v, theta) = (&state.u.values, &state.v.values, &state.theta.values);

    // v: (I − dt ∂x γⁿ ∂x) vⁿ⁺¹ = vⁿ + dt (a vⁿ − a² uⁿ + f(Θⁿ)_x)
    let gf = grid::face_average(&frc.gamma);
    let mut mat = Tridiagonal::identity(n + 1);
    let mut v_new = vec![0.0; n + 1];
    for i in 1..n {
        let (left, right) = (dt * gf[i - 1] / h2, dt * gf[i] / h2);
        mat.lower[i] = -left;
        mat.upper[i] = -right;
        mat.diag[i] = 1.0 + left + right;
        v_new[i] = v[i] + dt * (a * v[i] - a * a * u[i] + frc.div_f[i]);
    }
    mat.solve_in_place(&mut v_new)?;
    v_new[0] = 0.0;
    v_new[n] = 0.0;

    let u_new: Vec<f64> = u.iter().zip(v).map(|(u, v)| u + dt * (v - a * u)).collect();

    // Θ: (I − dt D Δ_N) Θⁿ⁺¹ = Θⁿ + dt·heating
    let r = dt * params.diffusivity / h2;
    let mut mat = Tridiagonal { lower: vec![-r; n + 1], diag: vec![1.0 + 2.0 * r; n + 1], upper: vec![-r; n + 1] };
    mat.upper[0] = -2.0 * r;
    mat.lower[n] = -2.0 * r;
    let mut theta_new: Vec<f64> = theta.iter().zip(&frc.heating).map(|(t, q)| t + dt * q).collect();
    mat.solve_in_place(&mut theta_new)?;

    if v_new.iter().chain(&u_new).chain(&theta_new).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState);
    }

    let mut next = State {
        grid: *g,
        t: state.t + dt,
        u: Field { values: u_new, bc: Bc::DirichletZero },
        v: Field { values: v_new, bc: Bc::DirichletZero },
        theta: Field { values: theta_new, bc: Bc::NeumannZero },
        theta_running_min: state.theta_running_min,
        accum: state.accum,
    };
    next.theta_running_min = next.theta_running_min.min(next.theta.min());
    let old_rates = state.rates_with(a, &frc.gamma);
    let new_rates = next.rates(params)?;
    next.accum.advance(dt, &old_rates, &new_rates);
    Ok(next)
}

/// Why a run was flagged as blowing up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionRule {
    /// `‖Θ‖∞` reached the configured threshold.
    Threshold,
    /// The error controller asked for `dt < dt_min` while `‖Θ‖∞` was growing.
    StepUnderflow,
    /// The state stopped being finite while `‖Θ‖∞` was growing.
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub state: State,
    pub snapshot: FunctionalSnapshot,
    /// Last accepted step size when the checkpoint was taken.
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub initial: InitialSummary,
    /// `Λ` of the law, `+∞` when unbounded.
    pub lambda: f64,
    /// `(t, ‖Θ‖∞)` after every accepted step.
    pub history: Vec<(f64, f64)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("trajectory always holds the initial checkpoint")
    }
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Completed(Trajectory),
    BlowUpDetected {
        t_detect: f64,
        rule: DetectionRule,
        /// Zero of a linear fit of `(1+‖Θ‖∞)^{1−μ}` against `t` over the last
        /// decade of growth. Diagnostic only.
        extrapolated_blowup_time: Option<f64>,
        trajectory: Trajectory,
    },
    Aborted {
        reason: String,
        trajectory: Trajectory,
    },
}

impl RunOutcome {
    pub fn trajectory(&self) -> &Trajectory {
        match self {
            RunOutcome::Completed(t) => t,
            RunOutcome::BlowUpDetected { trajectory, .. } | RunOutcome::Aborted { trajectory, .. } => trajectory,
        }
    }

    pub fn t_detect(&self) -> Option<f64> {
        match self {
            RunOutcome::BlowUpDetected { t_detect, .. } => Some(*t_detect),
            _ => None,
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, RunOutcome::BlowUpDetected { .. })
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, RunOutcome::Completed(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunOutcome::Completed(_) => "completed",
            RunOutcome::BlowUpDetected { .. } => "blowup_detected",
            RunOutcome::Aborted { .. } => "aborted",
        }
    }
}

/// Normalized step-doubling error between one full step and two half steps.
fn doubling_error(full: &State, fine: &State) -> f64 {
    [(&full.u, &fine.u), (&full.v, &fine.v), (&full.theta, &fine.theta)]
        .iter()
        .map(|(a, b)| {
            let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            diff / b.max_abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

fn attempt(state: &State, dt: f64, params: &Params) -> Result<(State, f64)> {
    let full = step(state, dt, params)?;
    let half = step(state, 0.5 * dt, params)?;
    let fine = step(&half, 0.5 * dt, params)?;
    let err = doubling_error(&full, &fine);
    Ok((fine, err))
}

fn growth_factor(err: f64, tol: f64) -> f64 {
    if err == 0.0 {
        FAC_MAX
    } else {
        (SAFETY * (tol / err).sqrt()).clamp(FAC_MIN, FAC_MAX)
    }
}

/// Integrates from `state0` to the horizon, or until blow-up is detected.
pub fn advance(state0: State, params: &Params) -> Result<RunOutcome> {
    params.validate()?;
    if state0.theta.min() < 0.0 {
        return Err(Error::InvalidInitialData("theta0 must be nonnegative".into()));
    }
    let ctx = FunctionalContext::new(params).ok();
    let lambda = material::lambda_bound(&params.law, material::DEFAULT_LAMBDA_WINDOW, material::DEFAULT_LAMBDA_SAMPLES)
        .unwrap_or(f64::INFINITY);
    let initial = InitialSummary::from_state(&state0, params.a, ctx.as_ref().map(|c| c.psi()));

    let take = |state: &State, dt: f64| -> Result<Checkpoint> {
        let snapshot = FunctionalContext::snapshot_opt(ctx.as_ref(), state, params)?;
        Ok(Checkpoint { state: state.clone(), snapshot, dt })
    };

    let horizon = params.horizon;
    let every = if params.checkpoint_every > 0.0 { params.checkpoint_every } else { f64::INFINITY };
    let mut next_ck_index = 1usize;
    let next_ck = |k: usize| (every * k as f64).min(horizon);

    let mut traj = Trajectory {
        checkpoints: vec![take(&state0, params.dt_init)?],
        initial,
        lambda,
        history: vec![(0.0, state0.theta.max())],
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut state = state0;
    let mut dt = params.dt_init;


    loop {
        if traj.accepted_steps + traj.rejected_steps >= params.max_steps {
            return Ok(RunOutcome::Aborted { reason: "step budget exhausted".into(), trajectory: traj });
        }
        let target = next_ck(next_ck_index);
        let gap = target - state.t;
        let truncated = dt >= gap;
        let dt_try = if truncated { gap } else { dt };

        match attempt(&state, dt_try, params) {
            Ok((mut next, err)) if err <= params.step_rel_tol => {
                next.t = if truncated { target } else { state.t + dt_try };
                state = next;
                traj.accepted_steps += 1;
                let theta_max = state.theta.max();
                traj.history.push((state.t, theta_max));

                let fac = growth_factor(err, params.step_rel_tol);
                dt = if truncated && fac >= 1.0 { dt } else { dt_try * fac };
                dt = dt.clamp(params.dt_min, params.dt_max);

                if theta_max >= params.theta_blowup_threshold {
                    traj.checkpoints.push(take(&state, dt_try)?);
                    return Ok(blowup(traj, state.t, DetectionRule::Threshold, &params.law));
                }
                if truncated {
                    traj.checkpoints.push(take(&state, dt_try)?);
                    if target >= horizon {
                        return Ok(RunOutcome::Completed(traj));
                    }
                    next_ck_index += 1;
                }
            }
            Ok((_, err)) => {
                traj.rejected_steps += 1;
                if dt_try <= params.dt_min {
                    return Ok(stalled(traj, state, dt_try, &take, params));
                }
                dt = (dt_try * growth_factor(err, params.step_rel_tol)).max(params.dt_min);
            }
            Err(Error::InvalidParams(m)) => return Err(Error::InvalidParams(m)),
            Err(e) => {
                traj.rejected_steps += 1;
                if dt_try <= params.dt_min {
                    if is_growing(&traj.history) {
                        traj.checkpoints.push(take(&state, dt_try)?);
                        let t = state.t;
                        return Ok(blowup(traj, t, DetectionRule::NonFinite, &params.law));
                    }
                    traj.checkpoints.push(take(&state, dt_try)?);
                    return Ok(RunOutcome::Aborted { reason: e.to_string(), trajectory: traj });
                }
                dt = (0.25 * dt_try).max(params.dt_min);
            }
        }
    }
}

fn stalled<F>(
    mut traj: Trajectory,
    state: State,
    dt: f64,
    take: &F,
    params: &Params,
) -> RunOutcome
where
    F: Fn(&State, f64) -> Result<Checkpoint>,
{
    let growing = is_growing(&traj.history);
    if let Ok(ck) = take(&state, dt) {
        traj.checkpoints.push(ck);
    }
    if growing {
        blowup(traj, state.t, DetectionRule::StepUnderflow, &params.law)
    } else {
        RunOutcome::Aborted { reason: "step size fell below dt_min without temperature growth".into(), trajectory: traj }
    }
}

fn is_growing(h: &[(f64, f64)]) -> bool {
    h.len() >= 2 && h[h.len() - 1].1 > h[h.len() - 2].1
}

fn blowup(traj: Trajectory, t_detect: f64, rule: DetectionRule, law: &CoefficientLaw) -> RunOutcome {
    let extrapolated_blowup_time = extrapolate_blowup(&traj.history, law);
    RunOutcome::BlowUpDetected { t_detect, rule, extrapolated_blowup_time, trajectory: traj }
}

/// Fits `(1+‖Θ‖∞)^{1−μ}` linearly in `t` over the samples within a decade of
/// the final maximum and returns the zero of the fit.
pub fn extrapolate_blowup(history: &[(f64, f64)], law: &CoefficientLaw) -> Option<f64> {
    let &(_, last) = history.last()?;
    let mu = law.growth_exponent(last);
    if !(mu > 1.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = history
        .iter()
        .filter(|p| p.1 >= 0.1 * last)
        .map(|&(t, th)| (t, (1.0 + th).powf(1.0 - mu)))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mq = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stq: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mq)).sum();
    if stt == 0.0 {
        return None;
    }
    let slope = stq / stt;
    if !(slope < 0.0) {
        return None;
    }
    Some(mt - mq / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn linear_law() -> CoefficientLaw {
        CoefficientLaw::power_law(1.0, 0.0, 0.0)
    }

    fn state(n: usize, u0: impl Fn(f64) -> f64, v0: impl Fn(f64) -> f64, th0: impl Fn(f64) -> f64) -> State {
        let g = Grid1D::unit(n).unwrap();
        let u = Field::from_fn(&g, Bc::DirichletZero, u0).unwrap();
        let v = Field::from_fn(&g, Bc::DirichletZero, v0).unwrap();
        let th = Field::from_fn(&g, Bc::NeumannZero, th0).unwrap();
        State { grid: g, t: 0.0, theta_running_min: th.min(), u, v, theta: th, accum: Accumulators::default() }
    }

    #[test]
    fn equilibrium_has_zero_rhs_and_is_a_fixed_point() {
        let s = state(32, |_| 0.0, |_| 0.0, |_| 1.5);
        let p = Params::new(1.0, 1.0, CoefficientLaw::power_law(1.0, 2.0, 0.0), 1.0);
        let d = rhs(&s, &p).unwrap();
        assert!(d.dv.iter().chain(&d.du).chain(&d.dtheta).all(|&x| x == 0.0));
        let next = step(&s, 1e-3, &p).unwrap();
        for (a, b) in next.theta.values.iter().zip(&s.theta.values) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(next.u.values.iter().chain(&next.v.values).all(|&x| x == 0.0));
    }

    #[test]
    fn heating_specializes_to_squared_gradient() {
        let g = Grid1D::unit(64).unwrap();
        let s = state(64, |_| 0.0, |x| (PI * x).sin(), |x| 1.0 + (PI * x).cos());
        let p = Params::new(1e-3, 0.7, linear_law(), 1.0);
        let d = rhs(&s, &p).unwrap();
        let lap = grid::laplacian_neumann(&s.theta, &g);
        let faces = grid::face_gradient(&s.v.values, &g);
        for i in 1..64 {
            let sq = 0.5 * (faces[i - 1].powi(2) + faces[i].powi(2));
            assert!((d.dtheta[i] - (0.7 * lap[i] + sq)).abs() < 1e-9);
        }
    }

    #[test]
    fn manufactured_solution_residual_is_second_order() {
        // u = e^{-t} sin(πx), v = u_t + a u, Θ = 2 + cos(πx) at t = 0; γ ≡ 1, f ≡ 0.
        let a = 2.0;
        let d_coef = 0.5;
        let residual = |n: usize| {
            let s = state(n, |x| (PI * x).sin(), |x| (a - 1.0) * (PI * x).sin(), |x| 2.0 + (PI * x).cos());
            let p = Params::new(a, d_coef, linear_law(), 1.0);
            let d = rhs(&s, &p).unwrap();
            let mut worst: f64 = 0.0;
            for (i, x) in s.grid.nodes().into_iter().enumerate() {
                let sn = (PI * x).sin();
                let cs = (PI * x).cos();
                // v_xx + a v − a² u with v = (a−1) sin, u = sin
                let dv = (a - 1.0) * (-PI * PI * sn) + a * (a - 1.0) * sn - a * a * sn;
                // w = v − a u = −sin, so w_x² = π² cos²
                let dth = -d_coef * PI * PI * cs + PI * PI * cs * cs;
                if i > 0 && i < n {
                    worst = worst.max((d.dv[i] - dv).abs());
                }
                worst = worst.max((d.dtheta[i] - dth).abs());
                worst = worst.max((d.du[i] - (-sn)).abs());
            }
            worst
        };
        let (e1, e2, e3) = (residual(64), residual(128), residual(256));
        assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
        assert!((e2 / e3).log2() > 1.9, "{e2} {e3}");
    }

    #[test]
    fn pure_heat_mode_decays_at_the_diffusive_rate() {
        let d_coef = 0.5;
        let mut s = state(128, |_| 0.0, |_| 0.0, |x| 2.0 + (PI * x).cos());
        let p = Params::new(1.0, d_coef, linear_law(), 1.0);
        let dt = 1e-5;
        for _ in 0..2000 {
            s = step(&s, dt, &p).unwrap();
        }
        let t = 2000.0 * dt;
        let amp = 0.5 * (s.theta.values[0] - s.theta.values[128]);
        let expected = (-d_coef * PI * PI * t).exp();
        assert!((amp / expected - 1.0).abs() < 1e-2, "{amp} vs {expected}");
    }

    #[test]
    fn single_step_v_energy_growth_is_bounded() {
        let a = 1.0;
        let s = state(64, |_| 0.0, |x| (PI * x).sin() + 0.3 * (3.0 * PI * x).sin(), |_| 0.0);
        let p = Params::new(a, 1.0, linear_law(), 1.0);
        let dt = 1e-3;
        let next = step(&s, dt, &p).unwrap();
        let l2 = |f: &Field| grid::integrate(&f.values.iter().map(|x| x * x).collect::<Vec<_>>(), &s.grid);
        assert!(l2(&next.v) <= l2(&s.v) * (2.0 * a * dt).exp());
    }

    #[test]
    fn dirichlet_rows_stay_zero_and_accumulators_grow() {
        let mut s = state(32, |x| 0.3 * (PI * x).sin(), |x| (2.0 * PI * x).sin(), |_| 0.5);
        let p = Params::new(1.0, 1.0, CoefficientLaw::power_law(1.0, 2.0, 0.4), 1.0);
        let mut prev = s.accum;
        for _ in 0..50 {
            s = step(&s, 1e-3, &p).unwrap();
            for f in [&s.u, &s.v] {
                assert_eq!(f.values[0], 0.0);
                assert_eq!(f.values[32], 0.0);
            }
            assert!(s.accum.int_grad_ut_sq >= prev.int_grad_ut_sq);
            assert!(s.accum.int_grad_v_gamma >= prev.int_grad_v_gamma);
            assert!(s.accum.int_grad_u_sq >= prev.int_grad_u_sq);
            assert!(s.accum.int_grad_uav_sq >= prev.int_grad_uav_sq);
            prev = s.accum;
        }
    }

    #[test]
    fn negative_temperature_is_rejected() {
        let s = state(16, |_| 0.0, |_| 0.0, |x| if x < 0.5 { -1e-3 } else { 1.0 });
        let p = Params::new(1.0, 1.0, linear_law(), 1.0);
        assert!(matches!(step(&s, 1e-3, &p), Err(Error::NegativeTemperature { .. })));
        let tiny = state(16, |_| 0.0, |_| 0.0, |x| if x < 0.5 { -1e-14 } else { 1.0 });
        assert!(step(&tiny, 1e-3, &p).is_ok());
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = Params::new(1.0, 1.0, linear_law(), 1.0);
        p.dt_min = p.dt_init;
        assert!(p.validate().is_err());
        let p = Params::new(0.0, 1.0, linear_law(), 1.0);
        assert!(p.validate().is_err());
        let p = Params::new(1.0, -1.0, linear_law(), 1.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_data_completes_with_constant_trajectory() {
        let s = state(32, |_| 0.0, |_| 0.0, |_| 1.0);
        let mut p = Params::new(1.0, 1.0, linear_law(), 0.5);
        p.checkpoint_every = 0.1;
        let out = advance(s, &p).unwrap();
        let RunOutcome::Completed(traj) = out else { panic!("{}", out.label()) };
        assert_eq!(traj.checkpoints.len(), 6);
        assert_eq!(traj.last().state.t, 0.5);
        for ck in &traj.checkpoints {
            assert!(ck.state.theta.values.iter().all(|&x| (x - 1.0).abs() < 1e-13));
        }
    }

    #[test]
    fn extrapolation_recovers_ode_blowup_time() {
        // θ(t) = 1/(1−t) − 1 solves θ' = (1+θ)².
        let law = CoefficientLaw::power_law(1.0, 2.0, 0.0);
        let h: Vec<(f64, f64)> = (0..200).map(|k| 1.0 - 10f64.powf(-(k as f64) / 20.0)).map(|t| (t, 1.0 / (1.0 - t) - 1.0)).collect();
        let t_star = extrapolate_blowup(&h, &law).unwrap();
        assert!((t_star - 1.0).abs() < 1e-9);
    }
}
