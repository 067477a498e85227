use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::grid::{Field, Grid};
use super::nonlinearity::Nonlinearity;
use super::ops;
use crate::error::{Error, Result};

/// Physical coefficients of `u_tt + αu_t − Δu + λu + f = g + εu∘dw/dt` and
/// the shift `δ` in `z = u_t + δu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl Physics {
    /// `λ + δ² − αδ`
    pub fn kappa(&self) -> f64 {
        self.lambda + self.delta * self.delta - self.alpha * self.delta
    }
}

/// `σ = min{δ/2, (α−δ)/4, δc₂/4}`; the last term is dropped when `c₂` is
/// not constrained (linear case).
pub fn sigma_of(physics: &Physics, nonlinearity: &Nonlinearity) -> f64 {
    let base = (0.5 * physics.delta).min(0.25 * (physics.alpha - physics.delta));
    match nonlinearity.c2 {
        Some(c2) => base.min(0.25 * physics.delta * c2),
        None => base,
    }
}

/// Deterministic forcing `g(t, x) = a(t)·exp(−((x − c)/w)²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    Zero,
    /// Time-independent Gaussian profile.
    GaussianPulse {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// Profile modulated by `bias + sin(2πt/period)`.
    Periodic {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
        #[serde(default)]
        bias: f64,
        period: f64,
    },
}

impl Forcing {
    pub fn time_factor(&self, t: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::GaussianPulse { amplitude, .. } => amplitude,
            Forcing::Periodic {
                amplitude,
                bias,
                period,
                ..
            } => amplitude * (bias + (2.0 * PI * t / period).sin()),
        }
    }

    pub fn profile(&self, x: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::GaussianPulse { center, width, .. } | Forcing::Periodic { center, width, .. } => {
                let s = (x - center) / width;
                (-s * s).exp()
            }
        }
    }

    pub fn period(&self) -> Option<f64> {
        match *self {
            Forcing::Periodic { period, .. } => Some(period),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |detail: String| Error::Constraint {
            constraint: "forcing",
            detail,
        };
        match *self {
            Forcing::Zero => Ok(()),
            Forcing::GaussianPulse { amplitude, width, .. } => {
                if !amplitude.is_finite() || !(width > 0.0) {
                    return Err(bad(format!("pulse needs finite amplitude and positive width, got ({amplitude}, {width})")));
                }
                Ok(())
            }
            Forcing::Periodic {
                amplitude,
                width,
                period,
                bias,
                ..
            } => {
                if !amplitude.is_finite() || !bias.is_finite() || !(width > 0.0) || !(period > 0.0) {
                    return Err(bad(format!(
                        "periodic forcing needs finite amplitude/bias and positive width/period, got ({amplitude}, {bias}, {width}, {period})"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// A fully specified pathwise problem on a grid.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub physics: Physics,
    pub sigma: f64,
    pub nonlinearity: Nonlinearity,
    pub forcing: Forcing,
    pub grid: Grid,
    profile: Field,
    profile_norm_sq: f64,
}

impl ProblemSpec {
    /// Builds and validates; fails with the first violated constraint.
    pub fn new(
        physics: Physics,
        nonlinearity: Nonlinearity,
        forcing: Forcing,
        grid: Grid,
    ) -> Result<Self> {
        forcing.validate()?;
        let spec = Self::new_unchecked(physics, nonlinearity, forcing, grid);
        validate_spec(&spec).into_result()?;
        Ok(spec)
    }

    /// Builds without validation; `sigma` is computed from the constants.
    pub fn new_unchecked(
        physics: Physics,
        nonlinearity: Nonlinearity,
        forcing: Forcing,
        grid: Grid,
    ) -> Self {
        let profile = Field::dirichlet(&grid, |x| forcing.profile(x));
        let profile_norm_sq = ops::norm_sq(&grid, &profile);
        Self {
            physics,
            sigma: sigma_of(&physics, &nonlinearity),
            nonlinearity,
            forcing,
            grid,
            profile,
            profile_norm_sq,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.physics.kappa()
    }

    /// Spatial profile of `g` on the grid (zero at the Dirichlet nodes).
    pub fn forcing_profile(&self) -> &Field {
        &self.profile
    }

    pub fn forcing_at(&self, t: f64) -> Field {
        let a = self.forcing.time_factor(t);
        Field::from_vec(self.profile.iter().map(|p| a * p).collect())
    }

    /// `‖g(t, ·)‖²`
    pub fn forcing_norm_sq(&self, t: f64) -> f64 {
        let a = self.forcing.time_factor(t);
        a * a * self.profile_norm_sq
    }

    /// Returns a copy with a different forcing.
    pub fn with_forcing(&self, forcing: Forcing) -> Result<Self> {
        Self::new(self.physics, self.nonlinearity, forcing, self.grid.clone())
    }

    /// Largest stable time step for the explicit integrator.
    pub fn max_dt(&self) -> f64 {
        super::integrate::STABILITY_CONSTANT * self.grid.dx()
    }
}

/// One checked inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub constraint: &'static str,
    pub passed: bool,
    pub skipped: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, constraint: &'static str, passed: bool, detail: String) {
        self.checks.push(Check {
            constraint,
            passed,
            skipped: false,
            detail,
        });
    }

    fn skip(&mut self, constraint: &'static str, detail: String) {
        self.checks.push(Check {
            constraint,
            passed: true,
            skipped: true,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn into_result(self) -> Result<()> {
        match self.first_failure() {
            None => Ok(()),
            Some(c) => Err(Error::Constraint {
                constraint: c.constraint,
                detail: c.detail.clone(),
            }),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.skipped {
                "skip"
            } else if c.passed {
                "ok"
            } else {
                "FAIL"
            };
            writeln!(f, "[{tag}] ({}) {}", c.constraint, c.detail)?;
        }
        Ok(())
    }
}

const PROBE_U: [f64; 15] = [
    -100.0, -10.0, -3.0, -1.5, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 1.5, 3.0, 10.0, 100.0,
];

/// Checks the parameter constraints and probes the three structural
/// inequalities of `f` on a deterministic `(x, u)` lattice. Never panics.
pub fn validate_spec(spec: &ProblemSpec) -> ValidationReport {
    let p = &spec.physics;
    let mut r = ValidationReport::default();
    let finite = [p.alpha, p.lambda, p.epsilon, p.delta]
        .iter()
        .all(|v| v.is_finite());
    r.push("finite", finite, format!("parameters {p:?}"));
    r.push("alpha", p.alpha > 0.0, format!("alpha = {} must be > 0", p.alpha));
    r.push("lambda", p.lambda > 0.0, format!("lambda = {} must be > 0", p.lambda));
    r.push(
        "epsilon",
        (0.0..1.0).contains(&p.epsilon),
        format!("epsilon = {} must lie in [0, 1)", p.epsilon),
    );
    r.push("delta", p.delta >= 0.0, format!("delta = {} must be >= 0", p.delta));
    r.push(
        "delta",
        p.alpha - p.delta > 0.0,
        format!("alpha - delta = {} must be > 0", p.alpha - p.delta),
    );
    r.push(
        "delta",
        p.kappa() > 0.0,
        format!("lambda + delta^2 - alpha*delta = {} must be > 0", p.kappa()),
    );

    let sigma = sigma_of(p, &spec.nonlinearity);
    r.push(
        "kappa",
        (spec.sigma - sigma).abs() <= 1e-15 * sigma.abs().max(1.0),
        format!("sigma = {} (recomputed {sigma})", spec.sigma),
    );
    // sign facts used by the energy estimates
    r.push(
        "kappa",
        p.alpha - p.delta - 2.0 * spec.sigma > 0.0,
        format!("alpha - delta - 2 sigma = {} must be > 0", p.alpha - p.delta - 2.0 * spec.sigma),
    );
    r.push(
        "kappa",
        p.delta - 2.0 * spec.sigma >= 0.0,
        format!("delta - 2 sigma = {} must be >= 0", p.delta - 2.0 * spec.sigma),
    );

    let nl = &spec.nonlinearity;
    let gamma = nl.gamma;
    r.push("f1", gamma >= 1.0, format!("gamma = {gamma} must be >= 1"));
    let stride = (spec.grid.n_points() / 16).max(1);
    let xs: Vec<f64> = (0..spec.grid.n_points())
        .step_by(stride)
        .map(|i| spec.grid.x(i))
        .collect();

    let mut worst = [0.0f64; 3];
    let mut where_ = [(0.0, 0.0); 3];
    for &x in &xs {
        for &u in &PROBE_U {
            let f = nl.f(x, u);
            let big = nl.antiderivative(x, u);
            let scale = 1.0 + u.abs().powf(gamma + 1.0);
            let v1 = f.abs() - (nl.c1 * u.abs().powf(gamma) + nl.phi1(x));
            let v2 = nl.c2.map_or(0.0, |c2| nl.phi2(x) - (f * u - c2 * big));
            let v3 = nl
                .c3
                .map_or(0.0, |c3| (c3 * u.abs().powf(gamma + 1.0) - nl.phi3(x)) - big);
            for (k, v) in [v1, v2, v3].into_iter().enumerate() {
                let rel = v / scale;
                if rel > worst[k] {
                    worst[k] = rel;
                    where_[k] = (x, u);
                }
            }
        }
    }
    let tol = 1e-12;
    for (k, name) in ["f1", "f2", "f3"].into_iter().enumerate() {
        let applicable = match k {
            1 => nl.c2.is_some(),
            2 => nl.c3.is_some(),
            _ => true,
        };
        if !applicable {
            r.skip(name, "not applicable: f is identically zero".into());
            continue;
        }
        r.push(
            name,
            worst[k] <= tol,
            format!(
                "worst relative violation {:.3e} at (x, u) = ({}, {})",
                worst[k], where_[k].0, where_[k].1
            ),
        );
    }
    r
}
