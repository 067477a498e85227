//! JSON run configuration.

use serde::{Deserialize, Serialize};
use serde_json::error::Category;

use crate::dynamics::grid::{Field, Grid, State};
use crate::dynamics::nonlinearity::{make_power_nonlinearity, Nonlinearity};
use crate::dynamics::spec::{Forcing, Physics, ProblemSpec};
use crate::error::{Error, Result};
use crate::noise::{generate_wiener, ou_from_integral, Interp, OUSample, WienerPath, DEFAULT_TAIL_TOL};
use crate::pullback::{geometric_lags, BumpFamily, InitialFamily, PullbackOptions, RadiusOptions, ZeroFamily};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    pub physics: Physics,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default = "default_forcing")]
    pub forcing: Forcing,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub ou_check: OuCheckConfig,
    #[serde(default)]
    pub pullback: PullbackConfig,
    #[serde(default)]
    pub tails: TailsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_forcing() -> Forcing {
    Forcing::Zero
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            n_points: 201,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
    pub sample_every: usize,
    /// Refinement levels of the energy-audit study (`dt`, `dt/2`, ...).
    pub audit_levels: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t0: 0.0,
            t1: 5.0,
            sample_every: 10,
            audit_levels: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Power,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearityConfig {
    pub family: Family,
    pub gamma: f64,
    pub a: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            family: Family::Power,
            gamma: 3.0,
            a: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Zero,
    /// See [`BumpFamily`].
    Bump {
        amplitudes: Vec<f64>,
        #[serde(default)]
        center: f64,
        width: f64,
        #[serde(default)]
        velocity_ratio: f64,
        #[serde(default)]
        growth: f64,
    },
    /// `u = A sin(jπ(x + L)/2L)`, `z = 0`.
    Mode { mode: u32, amplitude: f64 },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Bump {
            amplitudes: vec![1.0],
            center: 0.0,
            width: 1.0,
            velocity_ratio: 0.0,
            growth: 0.0,
        }
    }
}

/// Single sine mode as a constant family.
#[derive(Clone, Copy, Debug)]
pub struct ModeFamily {
    pub mode: u32,
    pub amplitude: f64,
}

impl ModeFamily {
    pub fn profile(&self, grid: &Grid) -> Field {
        let l = grid.half_width();
        let k = self.mode as f64 * std::f64::consts::PI / (2.0 * l);
        Field::dirichlet(grid, |x| self.amplitude * (k * (x + l)).sin())
    }
}

impl InitialFamily for ModeFamily {
    fn states(&self, _start: f64, _lag: f64, grid: &Grid) -> Vec<State> {
        vec![State {
            u: self.profile(grid),
            v: Field::zeros(grid),
        }]
    }

    fn envelope(&self, _lag: f64) -> f64 {
        self.amplitude.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpConfig {
    Linear,
    CubicHermite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Path lattice step.
    pub dt: f64,
    /// Extra history before the first OU time needed, for the improper
    /// integral.
    pub burn_in: f64,
    pub tail_tol: f64,
    pub interp: InterpConfig,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            burn_in: 40.0,
            tail_tol: DEFAULT_TAIL_TOL,
            interp: InterpConfig::CubicHermite,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuCheckConfig {
    pub seeds: u64,
    pub t_end: f64,
    pub m_values: Vec<u32>,
}

impl Default for OuCheckConfig {
    fn default() -> Self {
        Self {
            seeds: 20,
            t_end: 200.0,
            m_values: vec![10, 20, 50, 100],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LagSchedule {
    /// `t0·2^j`, `j = 0..=levels`.
    Geometric { t0: f64, levels: usize },
    Explicit { lags: Vec<f64> },
}

impl LagSchedule {
    pub fn lags(&self) -> Vec<f64> {
        match self {
            LagSchedule::Geometric { t0, levels } => geometric_lags(*t0, *levels),
            LagSchedule::Explicit { lags } => lags.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PullbackConfig {
    pub tau: f64,
    pub lag_schedule: LagSchedule,
    pub ensemble_size: usize,
    pub eta_sel: f64,
    pub tol: f64,
    /// Constants of the absorbing radius.
    pub m: f64,
    pub c: f64,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        Self {
            tau: 0.0,
            lag_schedule: LagSchedule::Geometric { t0: 1.25, levels: 6 },
            ensemble_size: 1,
            eta_sel: 1e-8,
            tol: 1e-3,
            m: 1.0,
            c: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailsConfig {
    /// Reported tail radius as a fraction of `L`.
    pub k_frac: f64,
    /// Number of radii in the sweep.
    pub sweep_points: usize,
    /// Relative tail threshold.
    pub eta: f64,
}

impl Default for TailsConfig {
    fn default() -> Self {
        Self {
            k_frac: 0.5,
            sweep_points: 20,
            eta: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn constraint_path(constraint: &str) -> &'static str {
    match constraint {
        "alpha" => "physics.alpha",
        "lambda" => "physics.lambda",
        "epsilon" => "physics.epsilon",
        "delta" | "kappa" => "physics.delta",
        "f1" | "f2" | "f3" => "nonlinearity",
        "forcing" => "forcing",
        _ => "physics",
    }
}

fn lift(e: Error) -> Error {
    match e {
        Error::Constraint { constraint, detail } => config_err(
            constraint_path(constraint),
            format!("constraint ({constraint}) violated: {detail}"),
        ),
        other => other,
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = match serde_path_to_error::deserialize(de) {
        Ok(c) => c,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            return Err(match inner.classify() {
                Category::Data => config_err(&path, inner.to_string()),
                _ => Error::Parse {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                },
            });
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.time;
        if !(t.dt > 0.0) {
            return Err(config_err("time.dt", "must be positive"));
        }
        if !(t.t1 > t.t0) {
            return Err(config_err("time.t1", "must exceed time.t0"));
        }
        if t.sample_every == 0 {
            return Err(config_err("time.sample_every", "must be positive"));
        }
        if t.audit_levels == 0 {
            return Err(config_err("time.audit_levels", "must be positive"));
        }
        let n = &self.noise;
        if !(n.dt > 0.0) {
            return Err(config_err("noise.dt", "must be positive"));
        }
        if !(n.burn_in >= 0.0) {
            return Err(config_err("noise.burn_in", "must be nonnegative"));
        }
        if !(n.tail_tol > 0.0) {
            return Err(config_err("noise.tail_tol", "must be positive"));
        }
        let p = &self.pullback;
        let lags = p.lag_schedule.lags();
        if lags.is_empty() || lags.windows(2).any(|w| !(w[0] < w[1])) || lags[0] < 0.0 {
            return Err(config_err("pullback.lag_schedule", "lags must be nonnegative and increasing"));
        }
        if !(p.tol > 0.0) {
            return Err(config_err("pullback.tol", "must be positive"));
        }
        if !(p.eta_sel >= 0.0) {
            return Err(config_err("pullback.eta_sel", "must be nonnegative"));
        }
        if !(p.m > 0.0) || !(p.c > 0.0) {
            return Err(config_err("pullback.m", "M and c must be positive"));
        }
        if !(self.tails.k_frac > 0.0 && self.tails.k_frac < 1.0) {
            return Err(config_err("tails.k_frac", "must lie in (0, 1)"));
        }
        if self.tails.sweep_points < 2 {
            return Err(config_err("tails.sweep_points", "must be at least 2"));
        }
        if self.ou_check.seeds == 0 || !(self.ou_check.t_end > 0.0) {
            return Err(config_err("ou_check", "needs seeds >= 1 and t_end > 0"));
        }
        if let InitialConfig::Bump { amplitudes, width, .. } = &self.initial {
            if amplitudes.is_empty() || !(*width > 0.0) {
                return Err(config_err("initial", "bump needs amplitudes and a positive width"));
            }
        }
        if let InitialConfig::Mode { mode, .. } = &self.initial {
            if *mode == 0 {
                return Err(config_err("initial.mode", "must be >= 1"));
            }
        }
        let spec = self.problem_spec()?;
        if self.time.dt > spec.max_dt() * (1.0 + 1e-12) {
            return Err(config_err(
                "time.dt",
                format!("exceeds the stability bound {}", spec.max_dt()),
            ));
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        match self.nonlinearity.family {
            Family::Power => make_power_nonlinearity(self.nonlinearity.gamma, self.nonlinearity.a).map_err(lift),
            Family::None => Ok(Nonlinearity::zero()),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.half_width, self.grid.n_points).map_err(|e| config_err("grid", e.to_string()))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::new(self.physics, self.nonlinearity()?, self.forcing, self.grid()?).map_err(lift)
    }

    pub fn family(&self) -> Box<dyn InitialFamily> {
        match &self.initial {
            InitialConfig::Zero => Box::new(ZeroFamily),
            InitialConfig::Bump {
                amplitudes,
                center,
                width,
                velocity_ratio,
                growth,
            } => Box::new(BumpFamily {
                amplitudes: amplitudes.clone(),
                center: *center,
                width: *width,
                velocity_ratio: *velocity_ratio,
                growth: *growth,
            }),
            InitialConfig::Mode { mode, amplitude } => Box::new(ModeFamily {
                mode: *mode,
                amplitude: *amplitude,
            }),
        }
    }

    /// Brownian path covering OU times `[from, to]` plus the burn-in.
    pub fn wiener(&self, from: f64, to: f64) -> Result<WienerPath> {
        let dt = self.noise.dt;
        let lo = (from.min(0.0) - self.noise.burn_in) / dt;
        let hi = to.max(0.0) / dt;
        generate_wiener(self.seed, lo.floor() * dt, hi.ceil() * dt, dt)
    }

    /// OU sample on `[from, to]` (rounded outwards to the noise lattice).
    pub fn ou(&self, from: f64, to: f64) -> Result<OUSample> {
        let dt = self.noise.dt;
        let path = self.wiener(from, to)?;
        let a = (from / dt).floor() * dt;
        let b = (to / dt).ceil() * dt;
        let interp = match self.noise.interp {
            InterpConfig::Linear => Interp::Linear,
            InterpConfig::CubicHermite => Interp::CubicHermite,
        };
        Ok(ou_from_integral(&path, self.physics.alpha, a, b, self.noise.tail_tol)?.with_interp(interp))
    }

    pub fn pullback_options(&self) -> PullbackOptions {
        PullbackOptions {
            dt: self.time.dt,
            ensemble_size: self.pullback.ensemble_size,
            eta_sel: self.pullback.eta_sel,
            seed: self.seed,
            ..Default::default()
        }
    }

    pub fn radius_options(&self) -> RadiusOptions {
        RadiusOptions {
            m: self.pullback.m,
            c: self.pullback.c,
            h: self.noise.dt,
            ..Default::default()
        }
    }
}
