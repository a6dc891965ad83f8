//! Explicit sufficient conditions for finite-time blow-up, the necessary
//! condition for existence on `[0, T]`, and the comparison ODE `θ' = cγ(θ)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{self, EstimateConstants, InitialSummary};
use crate::material::{self, CoefficientLaw};

/// Relative inflation that turns the strict inequalities of the sufficient
/// conditions into non-strict ones.
pub const STRICT_INFLATION: f64 = 1e-12;
/// Upper end of the temperature search for the large-temperature certificate.
pub const C_SEARCH_CAP: f64 = 1e12;
const C_REL_TOL: f64 = 1e-6;
/// The comparison ODE is integrated until `θ` passes this value.
pub const ODE_THETA_CUTOFF: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Large `∫|∇u₀|²` against the data norms.
    Thm65,
    /// Large initial temperature.
    Thm66,
    /// Sharper threshold for `f ≡ 0`.
    RemarkI,
    /// Contrapositive of the necessary condition for existence on `[0, T]`.
    Lemma64Necessary,
    OdeComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BlowupGuaranteed,
    ConditionNotMet,
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub certificate: CertificateKind,
    pub constants: BTreeMap<String, f64>,
    pub verdict: Verdict,
    /// `LHS − RHS` of the deciding inequality; NaN when unavailable.
    pub margin: f64,
}

impl CertificateReport {
    fn unavailable(certificate: CertificateKind, reason: impl Into<String>) -> Self {
        Self { certificate, constants: BTreeMap::new(), verdict: Verdict::Unavailable(reason.into()), margin: f64::NAN }
    }

    fn decide(certificate: CertificateKind, constants: BTreeMap<String, f64>, margin: f64, strict: bool) -> Self {
        let met = if strict { margin > 0.0 } else { margin >= 0.0 };
        let verdict = if met { Verdict::BlowupGuaranteed } else { Verdict::ConditionNotMet };
        Self { certificate, constants, verdict, margin }
    }

    pub fn is_guaranteed(&self) -> bool {
        self.verdict == Verdict::BlowupGuaranteed
    }
}

/// `γ(0)`, `ψ(0)` and `Λ` of a law satisfying all structural assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawConstants {
    pub gamma0: f64,
    pub psi0: f64,
    pub lambda: f64,
}

pub fn law_constants(law: &CoefficientLaw) -> Result<LawConstants> {
    let report = material::validate_assumptions(law, &material::default_sample_grid())?;
    if let Some(reason) = report.failure() {
        return Err(Error::AssumptionViolated(reason));
    }
    let lambda = material::lambda_bound(law, material::DEFAULT_LAMBDA_WINDOW, material::DEFAULT_LAMBDA_SAMPLES)?;
    if !lambda.is_finite() {
        return Err(Error::InfiniteLambda);
    }
    Ok(LawConstants { gamma0: law.gamma(0.0), psi0: material::psi_eval(law, 0.0, material::PSI_TOL)?, lambda })
}

/// The three coefficients `(C₁, C₂, C₃)` such that existence on `[0, T]`
/// forces `∫|∇u₀|² ≤ C₁∫u₀² + C₂∫u₀t² + C₃` for every `Θ₀ ≥ 0`.
fn theorem65_coefficients(k: &LawConstants, a: f64, t: f64, omega: f64) -> [f64; 3] {
    let a2 = a * a;
    let e = (2.0 * a * t).exp();
    let g = k.gamma0;
    let lo = k.lambda * omega;
    [
        12.0 * e / (t * g),
        8.0 * e / (a2 * t * g),
        (8.0 / (a2 * t) + 4.0 * t) * omega * k.psi0
            + 2.0 * lo * e / (a2 * a * t * g)
            + 8.0 * lo / (a2 * g)
            + 2.0 * lo * t * t / g,
    ]
}

/// Uniform constant `C` such that `∫|∇u₀|² ≥ C(∫u₀² + ∫u₀t² + 1)` forces
/// blow-up no later than `T`.
pub fn theorem65_constant(law: &CoefficientLaw, a: f64, t: f64, omega: f64) -> Result<f64> {
    check_positive_inputs(a, t)?;
    let k = law_constants(law)?;
    let c = theorem65_coefficients(&k, a, t, omega);
    Ok((1.0 + STRICT_INFLATION) * c[0].max(c[1]).max(c[2]))
}

fn check_positive_inputs(a: f64, t: f64) -> Result<()> {
    if !(a > 0.0 && t > 0.0) {
        return Err(Error::InvalidParams("a and T must be positive".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Thm65Mode {
    /// One constant multiplying all three data terms.
    #[default]
    Uniform,
    /// Separate coefficients for `∫u₀²`, `∫u₀t²` and the constant term.
    ThreeCoefficient,
}

pub fn check_theorem65(data: &InitialSummary, law: &CoefficientLaw, a: f64, t: f64, mode: Thm65Mode) -> CertificateReport {
    let kind = CertificateKind::Thm65;
    if let Err(e) = check_positive_inputs(a, t) {
        return CertificateReport::unavailable(kind, e.to_string());
    }
    let k = match law_constants(law) {
        Ok(k) => k,
        Err(e) => return CertificateReport::unavailable(kind, e.to_string()),
    };
    let c = theorem65_coefficients(&k, a, t, data.omega_measure);
    let mut constants = BTreeMap::from([
        ("gamma_0".to_string(), k.gamma0),
        ("psi_0".to_string(), k.psi0),
        ("lambda".to_string(), k.lambda),
        ("c_u0".to_string(), c[0]),
        ("c_u0t".to_string(), c[1]),
        ("c_const".to_string(), c[2]),
    ]);
    let inflate = 1.0 + STRICT_INFLATION;
    let rhs = match mode {
        Thm65Mode::Uniform => {
            let big_c = inflate * c[0].max(c[1]).max(c[2]);
            constants.insert("C".into(), big_c);
            big_c * (data.l2_u0 + data.l2_u0t + 1.0)
        }
        Thm65Mode::ThreeCoefficient => inflate * (c[0] * data.l2_u0 + c[1] * data.l2_u0t + c[2]),
    };
    constants.insert("lhs".into(), data.grad_u0_sq);
    constants.insert("rhs".into(), rhs);
    CertificateReport::decide(kind, constants, data.grad_u0_sq - rhs, false)
}

/// Smallest `C ≥ ΛT/2` meeting both temperature conditions, together with
/// the coefficients `c₁..c₄`.
pub fn theorem66_constant(law: &CoefficientLaw, a: f64, t: f64, omega: f64, eta: f64, m: f64) -> Result<(f64, [f64; 4])> {
    check_positive_inputs(a, t)?;
    if !(eta > 0.0 && m >= 0.0) {
        return Err(Error::InvalidParams("need eta > 0 and M >= 0".into()));
    }
    let k = law_constants(law)?;
    let a2 = a * a;
    let e = (2.0 * a * t).exp();
    let lo_om = k.lambda * omega;
    let c = [
        8.0 / (a2 * t) + 4.0 * t,
        12.0 * e / t,
        8.0 * e / (a2 * t),
        2.0 * lo_om * e / (a2 * a) + 8.0 * lo_om / a2 + 2.0 * lo_om * t * t,
    ];
    let quarter = eta / 4.0;
    let admissible = |big_c: f64| -> Result<bool> {
        let psi = material::psi_eval(law, big_c, material::PSI_TOL)?;
        let g = law.gamma(big_c / 2.0);
        Ok(c[0] * omega * psi <= quarter && (c[1] * m + c[2] * m + c[3]) / g <= quarter)
    };

    let floor = k.lambda * t / 2.0;
    if admissible(floor)? {
        return Ok((floor, c));
    }
    let mut lo = floor;
    let mut hi = floor.max(1.0) * 2.0;
    while !admissible(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > C_SEARCH_CAP {
            return Err(Error::InvalidParams(format!("no admissible temperature below {C_SEARCH_CAP:e}")));
        }
    }
    while hi - lo > C_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if admissible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, c))
}

/// Large-temperature certificate. `eta` and `m` default to `∫|∇u₀|²` and
/// `∫u₀² + ∫u₀t²`.
pub fn check_theorem66(
    data: &InitialSummary,
    law: &CoefficientLaw,
    a: f64,
    t: f64,
    eta: Option<f64>,
    m: Option<f64>,
) -> CertificateReport {
    let kind = CertificateKind::Thm66;
    let eta = eta.unwrap_or(data.grad_u0_sq);
    let m = m.unwrap_or(data.l2_u0 + data.l2_u0t);
    if data.grad_u0_sq < eta {
        return CertificateReport::unavailable(kind, format!("grad u0 energy {} is below eta = {eta}", data.grad_u0_sq));
    }
    if data.l2_u0 + data.l2_u0t > m {
        return CertificateReport::unavailable(kind, format!("data norm {} exceeds M = {m}", data.l2_u0 + data.l2_u0t));
    }
    match theorem66_constant(law, a, t, data.omega_measure, eta, m) {
        Ok((big_c, c)) => {
            let constants = BTreeMap::from([
                ("eta".to_string(), eta),
                ("M".to_string(), m),
                ("c1".to_string(), c[0]),
                ("c2".to_string(), c[1]),
                ("c3".to_string(), c[2]),
                ("c4".to_string(), c[3]),
                ("C".to_string(), big_c),
                ("theta0_inf".to_string(), data.theta0_inf),
            ]);
            CertificateReport::decide(kind, constants, data.theta0_inf - big_c, false)
        }
        Err(e) => CertificateReport::unavailable(kind, e.to_string()),
    }
}

/// Lower bound for `γ` along any solution on `[0, T]`.
pub fn gamma0_lower_bound(law: &CoefficientLaw, theta0_inf: f64, lambda: f64, t: f64) -> f64 {
    law.gamma(functionals::minimum_principle_bound(theta0_inf, lambda, t).max(0.0))
}

pub fn check_lemma64(data: &InitialSummary, law: &CoefficientLaw, a: f64, t: f64) -> CertificateReport {
    let kind = CertificateKind::Lemma64Necessary;
    if let Err(e) = check_positive_inputs(a, t) {
        return CertificateReport::unavailable(kind, e.to_string());
    }
    let k = match law_constants(law) {
        Ok(k) => k,
        Err(e) => return CertificateReport::unavailable(kind, e.to_string()),
    };
    if !data.psi_integral.is_finite() {
        return CertificateReport::unavailable(kind, "psi integral of theta0 is not available");
    }
    let gamma0 = gamma0_lower_bound(law, data.theta0_inf, k.lambda, t);
    let c = EstimateConstants::new(a, k.lambda, data.omega_measure);
    let rhs = match functionals::lemma64_rhs(data, gamma0, &c, t) {
        Ok(r) => r * (1.0 + STRICT_INFLATION),
        Err(e) => return CertificateReport::unavailable(kind, e.to_string()),
    };
    let constants = BTreeMap::from([
        ("gamma0_lower".to_string(), gamma0),
        ("lambda".to_string(), k.lambda),
        ("lhs".to_string(), data.grad_u0_sq),
        ("rhs".to_string(), rhs),
    ]);
    CertificateReport::decide(kind, constants, data.grad_u0_sq - rhs, true)
}

/// Sharper threshold for uncoupled heating. Reported unavailable when
/// `f ≢ 0`, since the temperature may then drop below its initial infimum.
pub fn check_remark_i(data: &InitialSummary, law: &CoefficientLaw, a: f64, t: f64) -> CertificateReport {
    let kind = CertificateKind::RemarkI;
    if let Err(e) = check_positive_inputs(a, t) {
        return CertificateReport::unavailable(kind, e.to_string());
    }
    let k = match law_constants(law) {
        Ok(k) => k,
        Err(e) => return CertificateReport::unavailable(kind, e.to_string()),
    };
    if k.lambda > 0.0 {
        return CertificateReport::unavailable(kind, "requires f = 0");
    }
    if !data.psi_integral.is_finite() {
        return CertificateReport::unavailable(kind, "psi integral of theta0 is not available");
    }
    let rhs = functionals::remark_i_threshold(data, law, a, t) * (1.0 + STRICT_INFLATION);
    let constants = BTreeMap::from([("lhs".to_string(), data.grad_u0_sq), ("rhs".to_string(), rhs)]);
    CertificateReport::decide(kind, constants, data.grad_u0_sq - rhs, true)
}

/// Blow-up time `ψ(θ₀)/c` of `θ' = cγ(θ)`, or `+∞` when `1/γ` is not
/// integrable.
pub fn ode_blowup_time(law: &CoefficientLaw, c: f64, theta0: f64) -> f64 {
    match material::psi_eval(law, theta0, material::PSI_TOL) {
        Ok(psi) => psi / c,
        Err(_) => f64::INFINITY,
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Blow-up time of `θ' = cγ(θ)` by adaptive Dormand–Prince integration up to
/// `θ = 10¹⁰` (or until the rest is negligible), plus the local power-law
/// tail `(1+θ)/(cγ(θ)(μ−1))` beyond it.
/// Returns `+∞` if the tail exponent does not exceed one, and `None` if the
/// integration stalls.
pub fn ode_blowup_time_integrated(law: &CoefficientLaw, c: f64, theta0: f64) -> Option<f64> {
    let rhs = |y: f64| c * law.gamma(y);
    let (rtol, atol) = (1e-11, 1e-12);
    let mut t = 0.0;
    let mut y = theta0;
    let mut h = 1e-3 / rhs(y).max(1e-300) * (1.0 + y);
    let mut k1 = rhs(y);
    for _ in 0..1_000_000 {
        let mu = law.growth_exponent(y);
        let tail = (1.0 + y) / (rhs(y) * (mu - 1.0));
        // Fast-growing laws overflow long before the cutoff; stop once the
        // tail is negligible.
        if y >= ODE_THETA_CUTOFF || (mu > 1.0 && tail <= 1e-12 * t) {
            if !(mu > 1.0) {
                return Some(f64::INFINITY);
            }
            return Some(t + tail);
        }
        let mut k = [k1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for s in 0..6 {
            let incr: f64 = (0..=s).map(|j| A[s][j] * k[j]).sum();
            k[s + 1] = rhs(y + h * incr);
        }
        // The last stage is evaluated at the fifth-order solution.
        let y_new = y + h * (0..6).map(|j| A[5][j] * k[j]).sum::<f64>();
        let err_abs = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
        let scale = atol + rtol * y.abs().max(y_new.abs());
        let err = if y_new.is_finite() && k.iter().all(|v| v.is_finite()) { (err_abs / scale).abs() } else { f64::INFINITY };
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k[6];
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 1.0) } else { 0.1 };
        }
        if !(h > 0.0) || h < 1e-300 {
            return None;
        }
    }
    None
}

/// Comparison-ODE report: both blow-up times and their relative gap.
pub fn check_ode(law: &CoefficientLaw, c: f64, theta0: f64) -> CertificateReport {
    let kind = CertificateKind::OdeComparison;
    if !(c > 0.0 && theta0 >= 0.0) {
        return CertificateReport::unavailable(kind, "need c > 0 and theta0 >= 0");
    }
    let quad = ode_blowup_time(law, c, theta0);
    let mut constants = BTreeMap::from([("t_star_quadrature".to_string(), quad)]);
    if !quad.is_finite() {
        return CertificateReport { certificate: kind, constants, verdict: Verdict::ConditionNotMet, margin: f64::NAN };
    }
    match ode_blowup_time_integrated(law, c, theta0) {
        Some(t_int) => {
            constants.insert("t_star_integration".into(), t_int);
            let rel = (t_int - quad).abs() / quad;
            constants.insert("relative_gap".into(), rel);
            CertificateReport { certificate: kind, constants, verdict: Verdict::BlowupGuaranteed, margin: quad }
        }
        None => {
            let mut r = CertificateReport::unavailable(kind, "ODE integration stalled");
            r.constants = constants;
            r
        }
    }
}
