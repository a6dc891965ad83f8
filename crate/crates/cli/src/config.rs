//! Run configuration: a sectioned TOML file.
//!
//! ```toml
//! seed = 7
//!
//! [material]
//! kind = "power_law"        # or kind = "custom", table = "coeffs.csv"
//! gamma_star = 1.0
//! mu = 2.0
//! f_star = 0.0
//!
//! [domain]
//! x_left = 0.0
//! x_right = 1.0
//! n_cells = 256
//!
//! [physics]
//! a = 1.0
//! D = 1.0
//! horizon = 1.0
//!
//! [initial]
//! u0 = { kind = "hat", center = 0.5, width = 0.05, height = 2.0 }
//! u0t = { kind = "zero" }
//! theta0 = { kind = "const", value = 1.0 }
//!
//! [solver]
//! step_rel_tol = 1e-5
//! ```
//!
//! Every section and key may be omitted; see [`RunConfig`] for defaults.
//! Relative file paths are resolved against the directory of the config file.

use std::fmt;
use std::path::{Path, PathBuf};

use hotspot_core::certificates::Thm65Mode;
use hotspot_core::dynamics::{Params, State};
use hotspot_core::grid::{Bc, Field, Grid1D};
use hotspot_core::material::{CoefficientLaw, Table};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation { field: field.into(), message: message.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the execution order of sweeps. Runs themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeConfig>,
}

/// `γ⋆(1+ξ)^μ` and `f⋆ξ`, or a tabulated `xi,gamma,f` CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialConfig {
    PowerLaw {
        #[serde(default = "one")]
        gamma_star: f64,
        #[serde(default = "two")]
        mu: f64,
        #[serde(default)]
        f_star: f64,
    },
    Custom { table: PathBuf },
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig::PowerLaw { gamma_star: 1.0, mu: 2.0, f_star: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default)]
    pub x_left: f64,
    #[serde(default = "one")]
    pub x_right: f64,
    #[serde(default = "default_cells")]
    pub n_cells: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { x_left: 0.0, x_right: 1.0, n_cells: default_cells() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "one")]
    pub a: f64,
    #[serde(rename = "D", default = "one")]
    pub diffusivity: f64,
    #[serde(default = "one")]
    pub horizon: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { a: 1.0, diffusivity: 1.0, horizon: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub u0: Profile,
    #[serde(default)]
    pub u0t: Profile,
    #[serde(default)]
    pub theta0: Profile,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { u0: Profile::Zero, u0t: Profile::Zero, theta0: Profile::Zero }
    }
}

/// Named initial profile on `[x_left, x_right]`, with `L = x_right − x_left`
/// and `s = (x − x_left)/L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    #[default]
    Zero,
    Const { value: f64 },
    /// `amplitude · sin(mode·π·s)`
    Sine { amplitude: f64, mode: f64 },
    /// `offset + amplitude · cos(mode·π·s)`; handy for temperatures.
    Cosine { offset: f64, amplitude: f64, mode: f64 },
    /// `height · max(0, 1 − |x − center|/width)`
    Hat { center: f64, width: f64, height: f64 },
    /// Linear interpolation of a CSV with header `x,value`.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "d_dt_init")]
    pub dt_init: f64,
    #[serde(default = "d_dt_min")]
    pub dt_min: f64,
    #[serde(default = "d_dt_max")]
    pub dt_max: f64,
    #[serde(default = "d_tol")]
    pub step_rel_tol: f64,
    #[serde(default = "d_threshold")]
    pub theta_blowup_threshold: f64,
    /// Defaults to `horizon/100`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: d_dt_init(),
            dt_min: d_dt_min(),
            dt_max: d_dt_max(),
            step_rel_tol: d_tol(),
            theta_blowup_threshold: d_threshold(),
            checkpoint_every: None,
        }
    }
}

/// Optional overrides for the pre-run certificates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    /// Certificate horizon; defaults to `physics.horizon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default)]
    pub mode: ModeConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    #[default]
    Uniform,
    ThreeCoefficient,
}

impl From<ModeConfig> for Thm65Mode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::Uniform => Thm65Mode::Uniform,
            ModeConfig::ThreeCoefficient => Thm65Mode::ThreeCoefficient,
        }
    }
}

/// Scalar comparison problem `θ' = c·γ(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub theta0: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_cells() -> usize {
    256
}
fn d_dt_init() -> f64 {
    1e-6
}
fn d_dt_min() -> f64 {
    1e-12
}
fn d_dt_max() -> f64 {
    1e-2
}
fn d_tol() -> f64 {
    1e-5
}
fn d_threshold() -> f64 {
    1e8
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

/// Parses config text; relative paths are resolved against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    cfg.resolve_paths(base);
    cfg.validate()?;
    Ok(cfg)
}

/// Rebuilds a config from a TOML value tree, e.g. after a sweep edit.
pub fn from_value(value: toml::Value) -> Result<RunConfig> {
    let cfg: RunConfig =
        value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse { line: 0, message: e.message().to_string() })?;
    cfg.validate()?;
    Ok(cfg)
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be finite, got {v}")))
    }
}

impl RunConfig {
    fn resolve_paths(&mut self, base: &Path) {
        if let MaterialConfig::Custom { table } = &mut self.material {
            resolve(base, table);
        }
        for p in [&mut self.initial.u0, &mut self.initial.u0t, &mut self.initial.theta0] {
            if let Profile::Csv { path } = p {
                resolve(base, path);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        finite("domain.x_left", d.x_left)?;
        finite("domain.x_right", d.x_right)?;
        if d.x_right <= d.x_left {
            return Err(ConfigError::invalid("domain.x_right", "must exceed x_left"));
        }
        if d.n_cells < 4 {
            return Err(ConfigError::invalid("domain.n_cells", "need at least 4 cells"));
        }
        positive("physics.a", self.physics.a)?;
        positive("physics.D", self.physics.diffusivity)?;
        positive("physics.horizon", self.physics.horizon)?;
        let s = &self.solver;
        positive("solver.dt_min", s.dt_min)?;
        positive("solver.dt_init", s.dt_init)?;
        positive("solver.dt_max", s.dt_max)?;
        if s.dt_init < s.dt_min || s.dt_max < s.dt_init {
            return Err(ConfigError::invalid("solver.dt_init", "need dt_min <= dt_init <= dt_max"));
        }
        positive("solver.step_rel_tol", s.step_rel_tol)?;
        positive("solver.theta_blowup_threshold", s.theta_blowup_threshold)?;
        if let Some(c) = s.checkpoint_every {
            positive("solver.checkpoint_every", c)?;
        }
        if let Some(c) = &self.certify {
            for (name, v) in [("certify.horizon", c.horizon), ("certify.eta", c.eta), ("certify.m", c.m)] {
                if let Some(v) = v {
                    positive(name, v)?;
                }
            }
        }
        if let Some(o) = &self.ode {
            positive("ode.c", o.c)?;
            finite("ode.theta0", o.theta0)?;
            if o.theta0 < 0.0 {
                return Err(ConfigError::invalid("ode.theta0", "theta0 nonnegative"));
            }
        }
        if let MaterialConfig::PowerLaw { gamma_star, mu, f_star } = self.material {
            positive("material.gamma_star", gamma_star)?;
            finite("material.mu", mu)?;
            finite("material.f_star", f_star)?;
        }
        self.law()?;
        self.initial_state()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.domain.x_left, self.domain.x_right, self.domain.n_cells)
            .map_err(|e| ConfigError::invalid("domain", e.to_string()))
    }

    pub fn law(&self) -> Result<CoefficientLaw> {
        match &self.material {
            MaterialConfig::PowerLaw { gamma_star, mu, f_star } => Ok(CoefficientLaw::power_law(*gamma_star, *mu, *f_star)),
            MaterialConfig::Custom { table } => Table::from_csv(table)
                .map(CoefficientLaw::tabulated)
                .map_err(|e| ConfigError::invalid("material.table", format!("{}: {e}", table.display()))),
        }
    }

    pub fn params(&self) -> Result<Params> {
        let p = &self.physics;
        let mut params = Params::new(p.a, p.diffusivity, self.law()?, p.horizon);
        let s = &self.solver;
        params.dt_init = s.dt_init;
        params.dt_min = s.dt_min;
        params.dt_max = s.dt_max;
        params.step_rel_tol = s.step_rel_tol;
        params.theta_blowup_threshold = s.theta_blowup_threshold;
        if let Some(c) = s.checkpoint_every {
            params.checkpoint_every = c;
        }
        params.validate().map_err(|e| ConfigError::invalid("solver", e.to_string()))?;
        Ok(params)
    }

    pub fn initial_state(&self) -> Result<State> {
        let grid = self.grid()?;
        let u0 = self.sample("initial.u0", &self.initial.u0, &grid, Bc::DirichletZero)?;
        let u0t = self.sample("initial.u0t", &self.initial.u0t, &grid, Bc::DirichletZero)?;
        let theta0 = self.sample("initial.theta0", &self.initial.theta0, &grid, Bc::NeumannZero)?;
        let min = theta0.min();
        if min < 0.0 {
            return Err(ConfigError::invalid("initial.theta0", format!("theta0 nonnegative (minimum {min})")));
        }
        State::from_initial_data(grid, u0, u0t, theta0, self.physics.a)
            .map_err(|e| ConfigError::invalid("initial", e.to_string()))
    }

    /// Horizon used by the pre-run certificates.
    pub fn certify_horizon(&self) -> f64 {
        self.certify.as_ref().and_then(|c| c.horizon).unwrap_or(self.physics.horizon)
    }

    fn sample(&self, field: &str, profile: &Profile, grid: &Grid1D, bc: Bc) -> Result<Field> {
        let f = profile.evaluator(field, self.domain.x_left, self.domain.x_right)?;
        Field::from_fn(grid, bc, f).map_err(|e| ConfigError::invalid(field, e.to_string()))
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match toml::to_string(self) {
            Ok(s) => f.write_str(&s),
            Err(_) => Err(fmt::Error),
        }
    }
}

type Eval = Box<dyn Fn(f64) -> f64>;

impl Profile {
    fn evaluator(&self, field: &str, xl: f64, xr: f64) -> Result<Eval> {
        let len = xr - xl;
        let pi = std::f64::consts::PI;
        Ok(match *self {
            Profile::Zero => Box::new(|_| 0.0),
            Profile::Const { value } => {
                finite(field, value)?;
                Box::new(move |_| value)
            }
            Profile::Sine { amplitude, mode } => {
                finite(field, amplitude)?;
                positive(field, mode)?;
                Box::new(move |x| amplitude * (mode * pi * (x - xl) / len).sin())
            }
            Profile::Cosine { offset, amplitude, mode } => {
                finite(field, offset)?;
                finite(field, amplitude)?;
                positive(field, mode)?;
                Box::new(move |x| offset + amplitude * (mode * pi * (x - xl) / len).cos())
            }
            Profile::Hat { center, width, height } => {
                finite(field, center)?;
                finite(field, height)?;
                positive(field, width)?;
                Box::new(move |x| height * (1.0 - (x - center).abs() / width).max(0.0))
            }
            Profile::Csv { ref path } => {
                let (xs, ys) = read_profile_csv(path).map_err(|m| ConfigError::invalid(field, m))?;
                if xs[0] > xl + 1e-12 * len || xs[xs.len() - 1] < xr - 1e-12 * len {
                    return Err(ConfigError::invalid(field, format!("{} does not cover the domain", path.display())));
                }
                Box::new(move |x| interpolate(&xs, &ys, x))
            }
        })
    }
}

fn read_profile_csv(path: &Path) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    #[derive(Deserialize)]
    struct Row {
        x: f64,
        value: f64,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut xs, mut ys) = (vec![], vec![]);
    for row in r.deserialize() {
        let row: Row = row.map_err(|e| format!("{}: {e}", path.display()))?;
        xs.push(row.x);
        ys.push(row.value);
    }
    if xs.len() < 2 {
        return Err(format!("{}: need at least two rows", path.display()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(format!("{}: x must be strictly increasing and values finite", path.display()));
    }
    Ok((xs, ys))
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let w = ((x - xs[k - 1]) / (xs[k] - xs[k - 1])).clamp(0.0, 1.0);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}
