//! Method-of-lines integration of the pathwise system
//!
//! ```text
//! u_t = −δu + v + εy u
//! v_t = −(α−δ)v − (λ+δ²−αδ)u + Δu − f(x,u) + g(t) − εy v − ε(εy − 2δ)y u
//! ```
//!
//! with classical RK4 in time. The coefficient `y = y(θ_t ω)` comes from a
//! [`Driver`] evaluated at the stage times.

use super::grid::{Grid, State};
use super::ops;
use super::spec::ProblemSpec;
use crate::error::{Error, Result};
use crate::noise::{lattice_index, Driver};

/// `dt ≤ STABILITY_CONSTANT · dx`
pub const STABILITY_CONSTANT: f64 = 0.5;

/// Nodal magnitude above which a run is declared blown up.
pub const DEFAULT_CEILING: f64 = 1e8;

/// Boundary-cell mass fraction above which the tail monitor warns.
pub const BOUNDARY_WARN_FRACTION: f64 = 1e-6;

struct Coefficients {
    delta: f64,
    alpha_minus_delta: f64,
    kappa: f64,
}

impl Coefficients {
    fn new(spec: &ProblemSpec) -> Self {
        let p = &spec.physics;
        Self {
            delta: p.delta,
            alpha_minus_delta: p.alpha - p.delta,
            kappa: p.kappa(),
        }
    }
}

/// Unchecked right-hand side into caller buffers.
#[allow(clippy::too_many_arguments)]
fn eval_rhs(
    u: &[f64],
    v: &[f64],
    t: f64,
    y: f64,
    spec: &ProblemSpec,
    c: &Coefficients,
    du: &mut [f64],
    dv: &mut [f64],
) {
    let n = u.len();
    let eps = spec.physics.epsilon;
    let ey = eps * y;
    let cross = eps * (ey - 2.0 * c.delta) * y;
    let g_amp = spec.forcing.time_factor(t);
    let profile = spec.forcing_profile();
    let nl = &spec.nonlinearity;
    let inv_dx2 = 1.0 / (spec.grid.dx() * spec.grid.dx());
    du[0] = 0.0;
    dv[0] = 0.0;
    du[n - 1] = 0.0;
    dv[n - 1] = 0.0;
    for i in 1..n - 1 {
        let ui = u[i];
        let vi = v[i];
        let lap = (u[i + 1] - 2.0 * ui + u[i - 1]) * inv_dx2;
        du[i] = -c.delta * ui + vi + ey * ui;
        dv[i] = -c.alpha_minus_delta * vi - c.kappa * ui + lap - nl.f(0.0, ui)
            + g_amp * profile[i]
            - ey * vi
            - cross * ui;
    }
}

/// Time derivative `(du/dt, dv/dt)` at `(state, t)` with coefficient `y`.
pub fn rhs(state: &State, t: f64, y: f64, spec: &ProblemSpec) -> Result<State> {
    state.check_grid(&spec.grid)?;
    state.check_finite()?;
    if !y.is_finite() {
        return Err(Error::NonFinite { field: "y", node: 0 });
    }
    let mut out = State::zeros(&spec.grid);
    eval_rhs(
        &state.u,
        &state.v,
        t,
        y,
        spec,
        &Coefficients::new(spec),
        &mut out.u,
        &mut out.v,
    );
    Ok(out)
}

/// Reusable RK4 workspace.
pub struct Stepper<'a> {
    spec: &'a ProblemSpec,
    coeffs: Coefficients,
    k: [State; 4],
    stage: State,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a ProblemSpec) -> Self {
        let z = State::zeros(&spec.grid);
        Self {
            spec,
            coeffs: Coefficients::new(spec),
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            stage: z,
        }
    }

    /// One RK4 step in place. No precondition checks.
    pub fn advance(&mut self, state: &mut State, t: f64, dt: f64, driver: &dyn Driver) {
        let spec = self.spec;
        let half = 0.5 * dt;
        let y0 = driver.y(t);
        let ym = driver.y(t + half);
        let y1 = driver.y(t + dt);
        let n = state.u.len();

        let [k1, k2, k3, k4] = &mut self.k;
        eval_rhs(&state.u, &state.v, t, y0, spec, &self.coeffs, &mut k1.u, &mut k1.v);
        for i in 0..n {
            self.stage.u[i] = state.u[i] + half * k1.u[i];
            self.stage.v[i] = state.v[i] + half * k1.v[i];
        }
        eval_rhs(&self.stage.u, &self.stage.v, t + half, ym, spec, &self.coeffs, &mut k2.u, &mut k2.v);
        for i in 0..n {
            self.stage.u[i] = state.u[i] + half * k2.u[i];
            self.stage.v[i] = state.v[i] + half * k2.v[i];
        }
        eval_rhs(&self.stage.u, &self.stage.v, t + half, ym, spec, &self.coeffs, &mut k3.u, &mut k3.v);
        for i in 0..n {
            self.stage.u[i] = state.u[i] + dt * k3.u[i];
            self.stage.v[i] = state.v[i] + dt * k3.v[i];
        }
        eval_rhs(&self.stage.u, &self.stage.v, t + dt, y1, spec, &self.coeffs, &mut k4.u, &mut k4.v);
        let w = dt / 6.0;
        for i in 0..n {
            state.u[i] += w * (k1.u[i] + 2.0 * k2.u[i] + 2.0 * k3.u[i] + k4.u[i]);
            state.v[i] += w * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
        }
    }
}

fn check_step(dt: f64, spec: &ProblemSpec) -> Result<()> {
    let max_dt = spec.max_dt();
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::precondition(format!("time step must be positive, got {dt}")));
    }
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, max_dt });
    }
    Ok(())
}

fn check_dirichlet(state: &State, grid: &Grid) -> Result<()> {
    let n = grid.n_points();
    for (field, f) in [("u", &state.u), ("v", &state.v)] {
        if f[0] != 0.0 || f[n - 1] != 0.0 {
            return Err(Error::precondition(format!(
                "{field} must vanish at the Dirichlet nodes x = ±L"
            )));
        }
    }
    Ok(())
}

/// One RK4 step from `t` to `t + dt`.
pub fn step(state: &State, t: f64, dt: f64, driver: &dyn Driver, spec: &ProblemSpec) -> Result<State> {
    check_step(dt, spec)?;
    state.check_grid(&spec.grid)?;
    state.check_finite()?;
    if !driver.covers(t, t + dt) {
        return Err(Error::Window(format!("noise does not cover [{t}, {}]", t + dt)));
    }
    let mut next = state.clone();
    Stepper::new(spec).advance(&mut next, t, dt, driver);
    Ok(next)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Record every `sample_every`-th step (the first and last states are
    /// always recorded).
    pub sample_every: usize,
    pub ceiling: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            sample_every: 1,
            ceiling: DEFAULT_CEILING,
        }
    }
}

impl SolveOptions {
    pub fn every(sample_every: usize) -> Self {
        Self {
            sample_every,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowUp {
    pub time: f64,
    pub max_abs: f64,
}

/// Sampled solution of the pathwise system.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub sample_every: usize,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Coefficient `y` at the sample times, as seen by the integrator.
    pub y: Vec<f64>,
    /// `‖u‖²_{H¹} + ‖v‖² + ‖u‖^{γ+1}_{L^{γ+1}}` at each sample.
    pub bound: Vec<f64>,
    pub max_bound: f64,
    /// Sample times where mass in the two outermost cells exceeded the
    /// warning fraction.
    pub tail_warnings: Vec<f64>,
    pub blow_up: Option<BlowUp>,
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn completed(&self) -> bool {
        self.blow_up.is_none()
    }

    /// Spacing between consecutive samples.
    pub fn sample_dt(&self) -> f64 {
        self.dt * self.sample_every as f64
    }
}

/// Monitored a-priori quantity `‖u‖²_{H¹} + ‖v‖² + ∫|u|^{γ+1}`.
pub fn running_bound(state: &State, spec: &ProblemSpec) -> f64 {
    let g = &spec.grid;
    let p = spec.nonlinearity.gamma + 1.0;
    let lp = g.integrate(|i| state.u[i].abs().powf(p));
    ops::state_norm_sq(g, state) + lp
}

fn boundary_fraction(state: &State, grid: &Grid) -> f64 {
    let k = grid.half_width() - 2.0 * grid.dx();
    let total = ops::state_norm_sq(grid, state);
    if total == 0.0 {
        return 0.0;
    }
    ops::region_mass(grid, state, k) / total
}

/// Integrates from `tau0` to `tau1`. A blow-up stops the run and returns the
/// partial trajectory with [`Trajectory::blow_up`] set.
pub fn solve(
    initial: &State,
    tau0: f64,
    tau1: f64,
    dt: f64,
    driver: &dyn Driver,
    spec: &ProblemSpec,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    if !(tau0 < tau1) {
        return Err(Error::precondition(format!("need tau0 < tau1, got [{tau0}, {tau1}]")));
    }
    check_step(dt, spec)?;
    initial.check_grid(&spec.grid)?;
    initial.check_finite()?;
    check_dirichlet(initial, &spec.grid)?;
    if opts.sample_every == 0 {
        return Err(Error::precondition("sample_every must be positive"));
    }
    let steps = lattice_index(tau1 - tau0, dt)?;
    if !driver.covers(tau0, tau1) {
        return Err(Error::Window(format!("noise does not cover [{tau0}, {tau1}]")));
    }
    let steps = steps as usize;

    let mut traj = Trajectory {
        dt,
        sample_every: opts.sample_every,
        times: Vec::new(),
        states: Vec::new(),
        y: Vec::new(),
        bound: Vec::new(),
        max_bound: 0.0,
        tail_warnings: Vec::new(),
        blow_up: None,
    };
    let record = |traj: &mut Trajectory, t: f64, s: &State| {
        let b = running_bound(s, spec);
        traj.max_bound = traj.max_bound.max(b);
        if boundary_fraction(s, &spec.grid) > BOUNDARY_WARN_FRACTION {
            traj.tail_warnings.push(t);
        }
        traj.times.push(t);
        traj.y.push(driver.y(t));
        traj.bound.push(b);
        traj.states.push(s.clone());
    };

    let mut state = initial.clone();
    record(&mut traj, tau0, &state);
    let mut stepper = Stepper::new(spec);
    for k in 0..steps {
        let t = tau0 + k as f64 * dt;
        stepper.advance(&mut state, t, dt, driver);
        let t_next = if k + 1 == steps { tau1 } else { tau0 + (k + 1) as f64 * dt };
        let peak = state.max_abs();
        if !peak.is_finite() || peak > opts.ceiling {
            traj.blow_up = Some(BlowUp {
                time: t_next,
                max_abs: peak,
            });
            return Ok(traj);
        }
        if (k + 1) % opts.sample_every == 0 || k + 1 == steps {
            record(&mut traj, t_next, &state);
        }
    }
    Ok(traj)
}
