//! Temperature-dependent material coefficients.
//!
//! A [`CoefficientLaw`] bundles the viscosity `γ(ξ)` (the elastic stiffness is
//! `a·γ(ξ)`) and the thermal dilation `f(ξ)`, both defined for temperatures
//! `ξ ≥ 0`. From a law we derive the two scalars that drive every blow-up
//! estimate: the decreasing function `ψ(ξ) = ∫_ξ^∞ dσ/γ(σ)` and the dilation
//! bound `Λ = sup |f|²/γ`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::quadrature;

/// Window and sample count used for `Λ` when callers do not choose their own.
pub const DEFAULT_LAMBDA_WINDOW: f64 = 1e6;
pub const DEFAULT_LAMBDA_SAMPLES: usize = 20_001;

/// Tolerance used for the `ψ` values that enter certificates.
pub const PSI_TOL: f64 = 1e-12;

/// Number of nodes in the memoized `ψ` table.
pub const PSI_TABLE_NODES: usize = 2048;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tabulated coefficients `(ξ, γ, f)` with linear interpolation.
///
/// Beyond the last node `γ` continues as the power law through the last two
/// nodes (in `1 + ξ`) and `f` continues linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    xi: Vec<f64>,
    gamma: Vec<f64>,
    f: Vec<f64>,
    tail_exponent: f64,
}

#[derive(Debug, Deserialize)]
struct TableRow {
    xi: f64,
    gamma: f64,
    f: f64,
}

impl Table {
    pub fn new(xi: Vec<f64>, gamma: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if xi.len() < 2 || xi.len() != gamma.len() || xi.len() != f.len() {
            return Err(Error::InvalidParams(
                "coefficient table needs at least two rows of equal length".into(),
            ));
        }
        if xi[0] != 0.0 {
            return Err(Error::InvalidParams("coefficient table must start at xi = 0".into()));
        }
        if xi.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("coefficient table xi must be strictly increasing".into()));
        }
        if xi.iter().chain(&gamma).chain(&f).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("coefficient table contains non-finite entries".into()));
        }
        let n = xi.len();
        let tail_exponent = (gamma[n - 1] / gamma[n - 2]).ln() / ((1.0 + xi[n - 1]) / (1.0 + xi[n - 2])).ln();
        Ok(Self { xi, gamma, f, tail_exponent })
    }

    /// Reads a CSV file with header `xi,gamma,f`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut xi = Vec::new();
        let mut gamma = Vec::new();
        let mut f = Vec::new();
        for row in reader.deserialize() {
            let row: TableRow = row?;
            xi.push(row.xi);
            gamma.push(row.gamma);
            f.push(row.f);
        }
        Self::new(xi, gamma, f)
    }

    fn segment(&self, x: f64) -> usize {
        match self.xi.partition_point(|&v| v <= x) {
            0 => 0,
            k => (k - 1).min(self.xi.len() - 2),
        }
    }

    fn lerp(&self, ys: &[f64], x: f64) -> f64 {
        let k = self.segment(x);
        let w = (x - self.xi[k]) / (self.xi[k + 1] - self.xi[k]);
        ys[k] + w * (ys[k + 1] - ys[k])
    }

    fn gamma(&self, x: f64) -> f64 {
        let last = self.xi.len() - 1;
        if x > self.xi[last] {
            let g = self.gamma[last];
            g * ((1.0 + x) / (1.0 + self.xi[last])).powf(self.tail_exponent)
        } else {
            self.lerp(&self.gamma, x)
        }
    }

    fn f(&self, x: f64) -> f64 {
        self.lerp(&self.f, x)
    }

    /// Exponent of the power-law continuation of `γ` past the last row.
    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }
}

/// Closed-form coefficient handles supplied by the caller.
#[derive(Clone)]
pub struct ClosureLaw {
    gamma: ScalarFn,
    f: ScalarFn,
}

impl fmt::Debug for ClosureLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClosureLaw { .. }")
    }
}

#[derive(Debug, Clone)]
pub enum LawKind {
    /// `γ(ξ) = γ⋆ (1+ξ)^μ`, `f(ξ) = f⋆ ξ`.
    PowerLaw { gamma_star: f64, mu: f64, f_star: f64 },
    Tabulated(Table),
    Closure(ClosureLaw),
}

#[derive(Debug, Clone)]
pub struct CoefficientLaw {
    kind: LawKind,
}

impl CoefficientLaw {
    pub fn power_law(gamma_star: f64, mu: f64, f_star: f64) -> Self {
        Self { kind: LawKind::PowerLaw { gamma_star, mu, f_star } }
    }

    pub fn tabulated(table: Table) -> Self {
        Self { kind: LawKind::Tabulated(table) }
    }

    pub fn custom<G, F>(gamma: G, f: F) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { kind: LawKind::Closure(ClosureLaw { gamma: Arc::new(gamma), f: Arc::new(f) }) }
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn gamma(&self, xi: f64) -> f64 {
        match &self.kind {
            LawKind::PowerLaw { gamma_star, mu, .. } => gamma_star * (1.0 + xi).powf(*mu),
            LawKind::Tabulated(t) => t.gamma(xi),
            LawKind::Closure(c) => (c.gamma)(xi),
        }
    }

    pub fn f(&self, xi: f64) -> f64 {
        match &self.kind {
            LawKind::PowerLaw { f_star, .. } => f_star * xi,
            LawKind::Tabulated(t) => t.f(xi),
            LawKind::Closure(c) => (c.f)(xi),
        }
    }

    pub fn gamma_prime(&self, xi: f64) -> f64 {
        match &self.kind {
            LawKind::PowerLaw { gamma_star, mu, .. } => {
                if *mu == 0.0 {
                    0.0
                } else {
                    gamma_star * mu * (1.0 + xi).powf(mu - 1.0)
                }
            }
            _ => difference(|x| self.gamma(x), xi),
        }
    }

    pub fn f_prime(&self, xi: f64) -> f64 {
        match &self.kind {
            LawKind::PowerLaw { f_star, .. } => *f_star,
            _ => difference(|x| self.f(x), xi),
        }
    }

    pub fn try_gamma(&self, xi: f64) -> Result<f64> {
        let g = self.gamma(xi);
        if g.is_finite() {
            Ok(g)
        } else {
            Err(Error::Evaluation { xi })
        }
    }

    pub fn try_f(&self, xi: f64) -> Result<f64> {
        let v = self.f(xi);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { xi })
        }
    }

    /// Local growth exponent `d ln γ / d ln(1+ξ)`.
    pub fn growth_exponent(&self, xi: f64) -> f64 {
        match &self.kind {
            LawKind::PowerLaw { mu, .. } => *mu,
            _ => (1.0 + xi) * self.gamma_prime(xi) / self.gamma(xi),
        }
    }
}

fn difference<G: Fn(f64) -> f64>(g: G, xi: f64) -> f64 {
    let h = 1e-6 * (1.0 + xi.abs());
    if xi < h {
        (g(xi + h) - g(xi)) / h
    } else {
        (g(xi + h) - g(xi - h)) / (2.0 * h)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AssumptionReport {
    /// `γ > 0` at every sample.
    pub positive: bool,
    /// `f(0) = 0`.
    pub f_vanishes_at_zero: bool,
    /// `γ' ≥ 0` at every positive sample.
    pub monotone: bool,
    /// `1/γ` integrable on `(0, ∞)`.
    pub integrable: bool,
    pub first_nonpositive: Option<f64>,
    pub first_decreasing: Option<f64>,
    pub f_at_zero: f64,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.positive && self.f_vanishes_at_zero && self.monotone && self.integrable
    }

    /// First violated assumption, phrased for reports.
    pub fn failure(&self) -> Option<String> {
        if !self.positive {
            Some(format!("gamma not positive at xi = {:?}", self.first_nonpositive))
        } else if !self.f_vanishes_at_zero {
            Some(format!("f(0) = {} is not zero", self.f_at_zero))
        } else if !self.monotone {
            Some(format!("gamma decreasing at xi = {:?}", self.first_decreasing))
        } else if !self.integrable {
            Some("1/gamma is not integrable at infinity".into())
        } else {
            None
        }
    }
}

/// Log-spaced temperatures on `[0, 1e6]` used when no explicit grid is given.
pub fn default_sample_grid() -> Vec<f64> {
    let n = 2001;
    let top = (1.0f64 + 1e6).ln();
    (0..n).map(|i| (top * i as f64 / (n - 1) as f64).exp() - 1.0).collect()
}

pub fn validate_assumptions(law: &CoefficientLaw, sample_grid: &[f64]) -> Result<AssumptionReport> {
    if sample_grid.is_empty() {
        return Err(Error::InvalidParams("sample grid is empty".into()));
    }
    if sample_grid.iter().any(|&x| !(x >= 0.0)) || sample_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("sample grid must be nonnegative and sorted".into()));
    }

    let mut first_nonpositive = None;
    let mut first_decreasing = None;
    for &xi in sample_grid {
        let g = law.try_gamma(xi)?;
        law.try_f(xi)?;
        if g <= 0.0 && first_nonpositive.is_none() {
            first_nonpositive = Some(xi);
        }
        if xi > 0.0 && first_decreasing.is_none() {
            let gp = law.gamma_prime(xi);
            if !gp.is_finite() {
                return Err(Error::Evaluation { xi });
            }
            // Difference quotients of a flat γ may come out at roundoff level.
            if gp < -1e-9 * (1.0 + g.abs()) {
                first_decreasing = Some(xi);
            }
        }
    }
    let f_at_zero = law.try_f(0.0)?;
    let positive = first_nonpositive.is_none();
    let integrable = positive
        && match psi_eval(law, 0.0, 1e-8) {
            Ok(_) => true,
            Err(Error::DivergentIntegral(_)) => false,
            Err(e) => return Err(e),
        };
    Ok(AssumptionReport {
        positive,
        f_vanishes_at_zero: f_at_zero.abs() <= 1e-12,
        monotone: first_decreasing.is_none(),
        integrable,
        first_nonpositive,
        first_decreasing,
        f_at_zero,
    })
}

/// `ψ(ξ) = ∫_ξ^∞ dσ/γ(σ)` to within `abs_tol`.
///
/// Power laws use the closed form; everything else goes through
/// [`psi_quadrature`].
pub fn psi_eval(law: &CoefficientLaw, xi: f64, abs_tol: f64) -> Result<f64> {
    match law.kind() {
        LawKind::PowerLaw { gamma_star, mu, .. } => {
            if *mu <= 1.0 {
                Err(Error::DivergentIntegral(format!("power law with mu = {mu} <= 1")))
            } else {
                Ok((1.0 + xi).powf(1.0 - mu) / (gamma_star * (mu - 1.0)))
            }
        }
        _ => psi_quadrature(law, xi, abs_tol),
    }
}

const MAX_STALLED_BLOCKS: usize = 64;

/// Quadrature route to `ψ(ξ)`.
///
/// The half-line is split into blocks `[X_k, 2X_k + 1]` (so that `1 + X`
/// doubles per block). Each block is integrated adaptively. For monotone `γ`
/// the next block is bounded by `b_k = (X+1)/γ(X)` at the current cutoff; with
/// `r = b_k/b_{k-1} < 1` the remaining tail is at most `b_k/(1-r)`. Blocks are
/// added until that bound drops below `abs_tol/2`, and the tail is then filled
/// in with the local power-law extrapolation `b_k / log2(1/r)`.
pub fn psi_quadrature(law: &CoefficientLaw, xi: f64, abs_tol: f64) -> Result<f64> {
    if !(abs_tol > 0.0) || !(xi >= 0.0) {
        return Err(Error::InvalidParams(format!("psi needs xi >= 0 and abs_tol > 0 (xi = {xi}, tol = {abs_tol})")));
    }
    let inv = |s: f64| 1.0 / law.gamma(s);
    let mut lo = xi;
    let mut total = 0.0;
    let mut prev_bound = (lo + 1.0) / law.try_gamma(lo)?;
    let mut stalled = 0usize;
    for k in 0.. {
        let hi = 2.0 * lo + 1.0;
        if !hi.is_finite() || hi > 1e300 {
            break;
        }
        let block_tol = (abs_tol * 0.5f64.powi(k.min(1000) + 2)).max(f64::MIN_POSITIVE);
        let r = quadrature::integrate(inv, lo, hi, block_tol, 1e-13);
        if !r.value.is_finite() {
            return Err(Error::Evaluation { xi: hi });
        }
        total += r.value;
        lo = hi;

        let bound = (lo + 1.0) / law.try_gamma(lo)?;
        let ratio = bound / prev_bound;
        prev_bound = bound;
        if ratio < 1.0 {
            stalled = 0;
            let tail_bound = bound / (1.0 - ratio);
            if tail_bound <= 0.5 * abs_tol {
                let tail = (bound / -ratio.log2()).min(tail_bound);
                return Ok(total + tail);
            }
        } else {
            stalled += 1;
            if stalled >= MAX_STALLED_BLOCKS {
                break;
            }
        }
    }
    Err(Error::DivergentIntegral(format!("tail of 1/gamma beyond xi = {lo:e} does not shrink")))
}

/// `Λ = sup_{ξ≥0} |f|²(ξ)/γ(ξ)`, estimated on `[0, xi_max]`.
///
/// Samples are uniform in `ln(1+ξ)`; the best sample is refined by a
/// golden-section search over its neighbours. When the ratio is still rising at
/// `xi_max`, power laws fall back to their exact supremum and every other law
/// reports `+∞`.
pub fn lambda_bound(law: &CoefficientLaw, xi_max: f64, n_samples: usize) -> Result<f64> {
    if !(xi_max > 0.0) || n_samples < 2 {
        return Err(Error::InvalidParams("lambda_bound needs xi_max > 0 and at least 2 samples".into()));
    }
    let ratio = |x: f64| -> Result<f64> {
        let f = law.try_f(x)?;
        let g = law.try_gamma(x)?;
        let r = f * f / g;
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::Evaluation { xi: x })
        }
    };
    let top = (1.0 + xi_max).ln();
    let xs: Vec<f64> = (0..n_samples).map(|i| (top * i as f64 / (n_samples - 1) as f64).exp() - 1.0).collect();
    let mut best = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    let mut vals = Vec::with_capacity(n_samples);
    for (i, &x) in xs.iter().enumerate() {
        let r = ratio(x)?;
        if r > best_val {
            best = i;
            best_val = r;
        }
        vals.push(r);
    }

    if best == n_samples - 1 && vals[n_samples - 1] > vals[n_samples - 2] {
        return Ok(match law.kind() {
            LawKind::PowerLaw { gamma_star, mu, f_star } => power_law_lambda(*gamma_star, *mu, *f_star).max(best_val),
            _ => f64::INFINITY,
        });
    }

    let lo = xs[best.saturating_sub(1)];
    let hi = xs[(best + 1).min(n_samples - 1)];
    let refined = golden_max(|x| ratio(x).unwrap_or(f64::NEG_INFINITY), lo, hi);
    Ok(best_val.max(refined))
}

/// Exact supremum of `f⋆² ξ² / (γ⋆ (1+ξ)^μ)` over `ξ ≥ 0`.
pub fn power_law_lambda(gamma_star: f64, mu: f64, f_star: f64) -> f64 {
    let c = f_star * f_star / gamma_star;
    if c == 0.0 {
        0.0
    } else if (mu - 2.0).abs() < 1e-12 {
        c
    } else if mu < 2.0 {
        f64::INFINITY
    } else {
        let x = 2.0 / (mu - 2.0);
        c * x * x / (1.0 + x).powf(mu)
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}

/// Memoized `ψ` on `[0, xi_top]`: nodes uniform in `s = ln(1+ξ)`, monotone
/// cubic Hermite interpolation with the exact slope `dψ/ds = -(1+ξ)/γ(ξ)`.
/// Arguments above `xi_top` fall through to [`psi_eval`].
#[derive(Debug, Clone)]
pub struct PsiTable {
    law: CoefficientLaw,
    xi_top: f64,
    ds: f64,
    values: Vec<f64>,
    // Fritsch–Carlson limited end slopes per segment.
    slopes: Vec<(f64, f64)>,
}

impl PsiTable {
    pub fn new(law: &CoefficientLaw, xi_top: f64) -> Result<Self> {
        let n = PSI_TABLE_NODES;
        let s_top = (1.0 + xi_top).ln();
        let ds = s_top / (n - 1) as f64;
        let xi_at = |k: usize| if k == n - 1 { xi_top } else { (ds * k as f64).exp() - 1.0 };

        let mut values = vec![0.0; n];
        match law.kind() {
            LawKind::PowerLaw { .. } => {
                for (k, v) in values.iter_mut().enumerate() {
                    *v = psi_eval(law, xi_at(k), PSI_TOL)?;
                }
            }
            _ => {
                values[n - 1] = psi_eval(law, xi_top, PSI_TOL)?;
                for k in (0..n - 1).rev() {
                    let seg = quadrature::integrate(|s| 1.0 / law.gamma(s), xi_at(k), xi_at(k + 1), 1e-15, 1e-13);
                    values[k] = values[k + 1] + seg.value;
                }
            }
        }

        let mut derivs = Vec::with_capacity(n);
        for k in 0..n {
            let x = xi_at(k);
            derivs.push(-(1.0 + x) / law.try_gamma(x)?);
        }
        let slopes = (0..n - 1)
            .map(|k| {
                let secant = (values[k + 1] - values[k]) / ds;
                let (mut m0, mut m1) = (derivs[k], derivs[k + 1]);
                if secant == 0.0 {
                    return (0.0, 0.0);
                }
                let (a, b) = ((m0 / secant).max(0.0), (m1 / secant).max(0.0));
                let norm = a * a + b * b;
                if norm > 9.0 {
                    let tau = 3.0 / norm.sqrt();
                    m0 = tau * a * secant;
                    m1 = tau * b * secant;
                } else {
                    m0 = a * secant;
                    m1 = b * secant;
                }
                (m0, m1)
            })
            .collect();

        Ok(Self { law: law.clone(), xi_top, ds, values, slopes })
    }

    pub fn xi_top(&self) -> f64 {
        self.xi_top
    }

    pub fn eval(&self, xi: f64) -> Result<f64> {
        let xi = xi.max(0.0);
        if xi > self.xi_top {
            return psi_eval(&self.law, xi, PSI_TOL);
        }
        let s = xi.ln_1p() / self.ds;
        let k = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - k as f64;
        let (m0, m1) = self.slopes[k];
        let (t2, t3) = (t * t, t * t * t);
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * self.values[k]
            + (t3 - 2.0 * t2 + t) * self.ds * m0
            + (-2.0 * t3 + 3.0 * t2) * self.values[k + 1]
            + (t3 - t2) * self.ds * m1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quadratic() -> CoefficientLaw {
        CoefficientLaw::power_law(1.0, 2.0, 0.0)
    }

    #[test]
    fn quadratic_law_satisfies_all_assumptions() {
        let r = validate_assumptions(&quadratic(), &default_sample_grid()).unwrap();
        assert!(r.all_hold(), "{r:?}");
    }

    #[test]
    fn constant_viscosity_is_not_integrable() {
        let r = validate_assumptions(&CoefficientLaw::power_law(1.0, 0.0, 0.0), &[0.0, 1.0, 2.0]).unwrap();
        assert!(r.positive && r.monotone);
        assert!(!r.integrable);
        assert_eq!(r.failure().unwrap(), "1/gamma is not integrable at infinity");
    }

    #[test]
    fn linear_dilation_vanishes_at_zero() {
        let r = validate_assumptions(&CoefficientLaw::power_law(1.0, 2.0, 1.0), &[0.0, 0.5]).unwrap();
        assert!(r.f_vanishes_at_zero);
    }

    #[test]
    fn detects_violations() {
        let law = CoefficientLaw::custom(|x| 2.0 - x, |x| x + 0.5);
        let r = validate_assumptions(&law, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(!r.positive);
        assert_eq!(r.first_nonpositive, Some(2.0));
        assert_eq!(r.first_decreasing, Some(1.0));
        assert!(!r.f_vanishes_at_zero);
    }

    #[test]
    fn non_finite_coefficient_is_an_error() {
        let law = CoefficientLaw::custom(|x| if x > 1.5 { f64::NAN } else { 1.0 + x }, |_| 0.0);
        match validate_assumptions(&law, &[0.0, 1.0, 2.0]) {
            Err(Error::Evaluation { xi }) => assert_eq!(xi, 2.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_sample_grid_rejected() {
        assert!(validate_assumptions(&quadratic(), &[]).is_err());
        assert!(validate_assumptions(&quadratic(), &[1.0, 0.5]).is_err());
        assert!(validate_assumptions(&quadratic(), &[-1.0]).is_err());
    }

    // Independent oracle: plain composite Simpson on [ξ, R] for increasing R.
    fn simpson_psi(gamma: impl Fn(f64) -> f64, xi: f64, mu: f64, gamma_star: f64) -> f64 {
        let r = 1e4;
        let n = 2_000_000;
        // substitute σ = ξ + t/(1-t) would hide truncation; keep it literal and
        // add the exact power-law remainder beyond R.
        let h = (r - xi) / n as f64;
        let mut s = 1.0 / gamma(xi) + 1.0 / gamma(r);
        for i in 1..n {
            let x = xi + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } / gamma(x);
        }
        s * h / 3.0 + (1.0 + r).powf(1.0 - mu) / (gamma_star * (mu - 1.0))
    }

    #[test]
    fn psi_reference_values() {
        let cases = [(1.0, 2.0, 0.0, 1.0), (1.0, 2.0, 1.0, 0.5), (2.0, 3.0, 0.0, 0.25)];
        for (gs, mu, xi, expected) in cases {
            let law = CoefficientLaw::power_law(gs, mu, 0.0);
            let oracle = simpson_psi(|x| gs * (1.0 + x).powf(mu), xi, mu, gs);
            assert!((oracle - expected).abs() < 1e-6, "oracle {oracle}");
            assert!((psi_eval(&law, xi, 1e-10).unwrap() - expected).abs() < 1e-12);
            assert!((psi_quadrature(&law, xi, 1e-10).unwrap() - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn psi_divergence() {
        for mu in [0.0, 0.5, 1.0] {
            let law = CoefficientLaw::power_law(1.0, mu, 0.0);
            assert!(matches!(psi_eval(&law, 0.0, 1e-8), Err(Error::DivergentIntegral(_))));
            assert!(matches!(psi_quadrature(&law, 0.0, 1e-8), Err(Error::DivergentIntegral(_))));
        }
    }

    #[test]
    fn psi_of_non_power_law() {
        // γ = e^ξ gives ψ(ξ) = e^{-ξ}.
        let law = CoefficientLaw::custom(f64::exp, |_| 0.0);
        for xi in [0.0, 0.3, 2.0, 10.0] {
            assert!((psi_eval(&law, xi, 1e-12).unwrap() - (-xi).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_reference_values() {
        let lam = lambda_bound(&CoefficientLaw::power_law(1.0, 2.0, 1.0), 1e6, 10_001).unwrap();
        assert!((lam - 1.0).abs() < 1e-15);
        let zero = lambda_bound(&CoefficientLaw::power_law(1.0, 3.0, 0.0), 1e3, 100).unwrap();
        assert_eq!(zero, 0.0);

        // Brute-force oracle for ξ²/(1+ξ)⁴ on a fine linear grid.
        let brute = (0..=400_000)
            .map(|i| i as f64 * 1e-5)
            .map(|x| x * x / (1.0 + x).powi(4))
            .fold(0.0f64, f64::max);
        assert!((brute - 1.0 / 16.0).abs() < 1e-10);
        let quartic = CoefficientLaw::custom(|x| (1.0 + x).powi(4), |x| x);
        let lam = lambda_bound(&quartic, 1e6, 20_001).unwrap();
        assert!((lam - 1.0 / 16.0).abs() < 1e-12, "{lam}");
    }

    #[test]
    fn lambda_unbounded_custom_is_infinite() {
        let law = CoefficientLaw::custom(|x| 1.0 + x, |x| x);
        assert_eq!(lambda_bound(&law, 1e6, 1000).unwrap(), f64::INFINITY);
        assert_eq!(power_law_lambda(1.0, 1.5, 1.0), f64::INFINITY);
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let xi = vec![0.0, 1.0, 3.0];
        let gamma: Vec<f64> = xi.iter().map(|x: &f64| (1.0 + x).powi(2)).collect();
        let f = vec![0.0, 0.5, 1.5];
        let t = Table::new(xi, gamma, f).unwrap();
        assert!((t.tail_exponent() - 2.0).abs() < 1e-12);
        let law = CoefficientLaw::tabulated(t);
        assert!((law.gamma(0.5) - 2.5).abs() < 1e-12);
        assert!((law.gamma(7.0) - 64.0).abs() < 1e-9);
        assert!((law.f(5.0) - 2.5).abs() < 1e-12);
        // ψ(3) = 1/4 exactly because the tail is the exact quadratic law.
        assert!((psi_eval(&law, 3.0, 1e-10).unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn table_rejects_unsorted() {
        assert!(Table::new(vec![0.0, 2.0, 1.0], vec![1.0; 3], vec![0.0; 3]).is_err());
        assert!(Table::new(vec![0.5, 2.0], vec![1.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn psi_table_matches_direct_evaluation() {
        let law = CoefficientLaw::custom(|x| (1.0 + x).powf(2.5) + x.sin().abs(), |_| 0.0);
        let table = PsiTable::new(&law, 1e6).unwrap();
        for xi in [0.0, 0.01, 0.7, 3.3, 150.0, 9e5, 2e6] {
            let direct = psi_eval(&law, xi, 1e-12).unwrap();
            let memo = table.eval(xi).unwrap();
            assert!((direct - memo).abs() < 1e-7 * direct.max(1e-3), "xi={xi} {direct} {memo}");
        }
    }

    #[test]
    fn analytic_derivatives() {
        let law = CoefficientLaw::power_law(2.0, 3.0, 0.5);
        let table = CoefficientLaw::custom(|x| 2.0 * (1.0 + x).powi(3), |x| 0.5 * x);
        for xi in [0.0, 0.4, 2.0] {
            assert!((law.gamma_prime(xi) - table.gamma_prime(xi)).abs() < 1e-5 * (1.0 + law.gamma_prime(xi)));
            assert!((law.f_prime(xi) - table.f_prime(xi)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn psi_is_monotone(x1 in 0.0f64..1e4, dx in 0.0f64..1e4, mu in 1.2f64..5.0) {
            let law = CoefficientLaw::power_law(1.0, mu, 0.0);
            let tol = 1e-9;
            let a = psi_eval(&law, x1, tol).unwrap();
            let b = psi_eval(&law, x1 + dx, tol).unwrap();
            prop_assert!(a >= b - tol);
            prop_assert!(b >= 0.0);
        }

        #[test]
        fn psi_derivative_is_minus_inverse_gamma(xi in 0.0f64..100.0, mu in 1.5f64..4.0, gs in 0.5f64..3.0) {
            let law = CoefficientLaw::power_law(gs, mu, 0.0);
            let h = 1e-4 * (1.0 + xi);
            let d = (psi_eval(&law, xi + h, 1e-12).unwrap() - psi_eval(&law, xi - h.min(xi), 1e-12).unwrap())
                / (h + h.min(xi));
            let expected = -1.0 / law.gamma(xi);
            prop_assert!(((d - expected) / expected).abs() < 1e-6_f64.max(1e-3 * h));
        }

        #[test]
        fn closed_form_and_quadrature_agree(xi in 0.0f64..50.0, mu in 1.5f64..6.0, gs in 0.2f64..5.0) {
            let law = CoefficientLaw::power_law(gs, mu, 0.0);
            let tol = 1e-9;
            let closed = psi_eval(&law, xi, tol).unwrap();
            let quad = psi_quadrature(&law, xi, tol).unwrap();
            prop_assert!((closed - quad).abs() <= tol, "{} vs {}", closed, quad);
        }
    }

    #[test]
    fn lambda_dominates_random_samples() {
        use proptest::test_runner::{Config, TestRunner};
        let law = CoefficientLaw::power_law(1.5, 3.0, 0.8);
        let lam = lambda_bound(&law, 1e6, DEFAULT_LAMBDA_SAMPLES).unwrap();
        let mut runner = TestRunner::new(Config { cases: 10_000, ..Config::default() });
        runner
            .run(&(0.0f64..1e3), |x| {
                let r = law.f(x).powi(2) / law.gamma(x);
                prop_assert!(r <= lam * (1.0 + 1e-12));
                Ok(())
            })
            .unwrap();
    }
}
