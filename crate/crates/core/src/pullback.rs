//! Pullback construction, absorbing radius, tail diagnostics and attractor
//! estimation.
//!
//! Time conventions: a pullback run to target `τ` treats OU time `0` as the
//! absolute time `τ`, so at absolute time `r` the coefficient is
//! `y(θ_{r−τ} ω)`. A run with lag `t` starts at `τ − t` and needs the OU
//! sample on `[−t, 0]`.
//!
//! Solution sets are approximated by finite ensembles, so every semidistance
//! reported here is a lower bound on the distance between the true sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::grid::{Field, Grid, State};
use crate::dynamics::integrate::{solve, SolveOptions, DEFAULT_CEILING};
use crate::dynamics::ops;
use crate::dynamics::spec::ProblemSpec;
use crate::dynamics::transform::{v_from_z, z_from_v};
use crate::error::{Error, Result};
use crate::noise::{Driver, Shifted};

pub use crate::dynamics::spec::sigma_of;

/// Weight below which the improper integrals are cut off.
pub const WEIGHT_TOL: f64 = 1e-10;

/// Noted on every report that compares solution sets.
pub const LOWER_BOUND_NOTE: &str =
    "solution sets are finite ensembles; semidistances are lower bounds on set distances";

// ---------------------------------------------------------------------------
// forcing admissibility

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ForcingCheck {
    /// `∫_{−T_g}^0 e^{σs/(2γ+2)} ‖g(s+τ)‖² ds`
    pub value: f64,
    pub truncation: f64,
    /// Value with the truncation doubled.
    pub doubled: f64,
    /// Whether doubling the truncation changed the value by less than 1e-6
    /// relative.
    pub converged: bool,
}

fn weighted_integral(rate: f64, tau: f64, t_end: f64, h: f64, g2: &impl Fn(f64) -> f64) -> f64 {
    let n = (t_end / h).ceil() as usize;
    let h = t_end / n as f64;
    let mut total = 0.0;
    for k in 0..=n {
        let s = -(k as f64) * h;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        total += w * (rate * s).exp() * g2(s + tau);
    }
    total * h
}

/// Estimates the admissibility integral for the forcing with `‖g(t)‖² =
/// norm_sq(t)`.
///
/// The integral is truncated where the weight falls below [`WEIGHT_TOL`]
/// and recomputed with the truncation doubled; growth by more than a factor
/// two, or a non-finite value, means the forcing is not admissible.
pub fn check_forcing(
    norm_sq: impl Fn(f64) -> f64,
    tau: f64,
    sigma: f64,
    gamma: f64,
    h: f64,
) -> Result<ForcingCheck> {
    if !(sigma > 0.0) || !(h > 0.0) {
        return Err(Error::precondition("check_forcing needs sigma > 0 and h > 0"));
    }
    let rate = sigma / (2.0 * gamma + 2.0);
    let t_g = -WEIGHT_TOL.ln() / rate;
    let value = weighted_integral(rate, tau, t_g, h, &norm_sq);
    let doubled = weighted_integral(rate, tau, 2.0 * t_g, h, &norm_sq);
    if !value.is_finite() || !doubled.is_finite() || doubled > 2.0 * value {
        return Err(Error::ForcingInadmissible(format!(
            "weighted integral grows from {value:e} to {doubled:e} when the truncation doubles from {t_g} to {}",
            2.0 * t_g
        )));
    }
    Ok(ForcingCheck {
        value,
        truncation: t_g,
        doubled,
        converged: (doubled - value).abs() <= 1e-6 * doubled.abs().max(f64::MIN_POSITIVE),
    })
}

// ---------------------------------------------------------------------------
// absorbing radius

/// Ball `‖u‖²_{H¹} + ‖z‖² ≤ radius_l` absorbing tempered families at time `τ`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AbsorbingSet {
    pub tau: f64,
    pub radius_l: f64,
    /// Lag at which the improper integral was cut.
    pub truncation_t: f64,
    /// Estimate of the dropped remainder.
    pub truncation_bound: f64,
    pub m: f64,
    pub c: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RadiusOptions {
    pub m: f64,
    pub c: f64,
    /// Quadrature step, normally the OU lattice step.
    pub h: f64,
    pub weight_tol: f64,
}

impl Default for RadiusOptions {
    fn default() -> Self {
        Self {
            m: 1.0,
            c: 1.0,
            h: 0.01,
            weight_tol: WEIGHT_TOL,
        }
    }
}

/// ```text
/// L = M(1 + εy(ω)²)·(1 + ∫_{−∞}^0 exp{∫_0^s (2σ − εc − εc y(θ_r ω)²) dr}
///                                 ·(1 + ‖g(s+τ)‖² + εy(θ_s ω)²) ds)
/// ```
///
/// Both integrals use the trapezoid rule with step `opts.h`, marching
/// backwards from `s = 0` until the weight drops below `opts.weight_tol`.
pub fn absorbing_radius(
    tau: f64,
    driver: &dyn Driver,
    spec: &ProblemSpec,
    opts: &RadiusOptions,
) -> Result<AbsorbingSet> {
    let eps = spec.physics.epsilon;
    let (m, c, h) = (opts.m, opts.c, opts.h);
    if !(m > 0.0) || !(c > 0.0) || !(h > 0.0) || !(opts.weight_tol > 0.0) {
        return Err(Error::precondition("absorbing radius needs M, c, h and the weight tolerance positive"));
    }
    if !driver.covers(-h, 0.0) {
        return Err(Error::Window("noise does not cover s = 0".into()));
    }
    let sigma = spec.sigma;
    let rate = |y: f64| 2.0 * sigma - eps * c - eps * c * y * y;
    let integrand = |s: f64, y: f64| 1.0 + spec.forcing_norm_sq(s + tau) + eps * y * y;

    let y0 = driver.y(0.0);
    let mut r_prev = rate(y0);
    let mut phi_prev = integrand(0.0, y0);
    let mut exponent = 0.0;
    let mut weight = 1.0;
    let mut total = 0.0;
    let mut s;
    let mut k = 0u64;
    loop {
        k += 1;
        let s_next = -(k as f64) * h;
        if !driver.covers(s_next, 0.0) {
            return Err(Error::Truncation {
                requested: opts.weight_tol,
                achievable: weight,
            });
        }
        let y = driver.y(s_next);
        let r = rate(y);
        exponent -= 0.5 * h * (r_prev + r);
        let w = exponent.exp();
        let phi = integrand(s_next, y);
        total += 0.5 * h * (weight * phi_prev + w * phi);
        weight = w;
        phi_prev = phi;
        r_prev = r;
        s = s_next;
        if weight < opts.weight_tol {
            break;
        }
    }
    // Remainder ≈ weight·integrand/decay, with the decay rate averaged over
    // the computed window.
    let mean_rate = (-exponent / -s).max(f64::MIN_POSITIVE);
    let truncation_bound = weight * phi_prev / mean_rate;
    let radius_l = m * (1.0 + eps * y0 * y0) * (1.0 + total);
    if !radius_l.is_finite() {
        return Err(Error::NonFinite { field: "L", node: 0 });
    }
    Ok(AbsorbingSet {
        tau,
        radius_l,
        truncation_t: -s,
        truncation_bound,
        m,
        c,
    })
}

// ---------------------------------------------------------------------------
// initial families

/// A tempered family of initial data in `(u, z)` form.
pub trait InitialFamily: Sync {
    /// States at pullback start time `start = τ − lag`; `State::v` holds `z`.
    fn states(&self, start: f64, lag: f64, grid: &Grid) -> Vec<State>;
    /// Declared radius bound `R(lag)` in the `H¹ × L²` norm.
    fn envelope(&self, lag: f64) -> f64;
}

/// Smooth bumps `a·R(s)·cos²(πx/2L)·exp(−((x−x₀)/w)²)` with
/// `R(s) = e^{growth·s}`, one member per amplitude.
#[derive(Clone, Debug)]
pub struct BumpFamily {
    pub amplitudes: Vec<f64>,
    pub center: f64,
    pub width: f64,
    /// Ratio `z/u` of the velocity profile.
    pub velocity_ratio: f64,
    pub growth: f64,
}

impl BumpFamily {
    pub fn new(amplitudes: Vec<f64>, width: f64) -> Self {
        Self {
            amplitudes,
            center: 0.0,
            width,
            velocity_ratio: 0.5,
            growth: 0.0,
        }
    }

    pub fn profile(&self, grid: &Grid) -> Field {
        let l = grid.half_width();
        let (c, w) = (self.center, self.width);
        Field::dirichlet(grid, |x| {
            let cap = (std::f64::consts::FRAC_PI_2 * x / l).cos();
            let s = (x - c) / w;
            cap * cap * (-s * s).exp()
        })
    }
}

impl InitialFamily for BumpFamily {
    fn states(&self, _start: f64, lag: f64, grid: &Grid) -> Vec<State> {
        let base = self.profile(grid);
        let scale = (self.growth * lag).exp();
        self.amplitudes
            .iter()
            .map(|&a| {
                let u = Field::from_vec(base.iter().map(|p| a * scale * p).collect());
                let z = Field::from_vec(u.iter().map(|p| self.velocity_ratio * p).collect());
                State { u, v: z }
            })
            .collect()
    }

    fn envelope(&self, lag: f64) -> f64 {
        let amax = self.amplitudes.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        amax * (1.0 + self.velocity_ratio.abs()) * (self.growth * lag).exp()
    }
}

/// The single zero state.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFamily;

impl InitialFamily for ZeroFamily {
    fn states(&self, _start: f64, _lag: f64, grid: &Grid) -> Vec<State> {
        vec![State::zeros(grid)]
    }

    fn envelope(&self, _lag: f64) -> f64 {
        0.0
    }
}

/// `e^{−σs}R(s)^{γ+1}` at each lag.
pub fn tempered_profile(family: &dyn InitialFamily, sigma: f64, gamma: f64, lags: &[f64]) -> Vec<f64> {
    lags.iter()
        .map(|&s| (-sigma * s).exp() * family.envelope(s).powf(gamma + 1.0))
        .collect()
}

/// Sampled temperedness: the profile is nonincreasing over the last two lags
/// and ends no higher than it starts.
pub fn check_tempered(family: &dyn InitialFamily, sigma: f64, gamma: f64, lags: &[f64]) -> bool {
    let p = tempered_profile(family, sigma, gamma, lags);
    if !p.iter().all(|v| v.is_finite()) {
        return false;
    }
    let n = p.len();
    n < 2 || (p[n - 1] <= p[n - 2] && p[n - 1] <= p[0])
}

// ---------------------------------------------------------------------------
// evolution

#[derive(Clone, Copy, Debug)]
pub struct PullbackOptions {
    pub dt: f64,
    /// Total ensemble size; members beyond the family are perturbed copies.
    pub ensemble_size: usize,
    pub eta_sel: f64,
    pub seed: u64,
    pub ceiling: f64,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            ensemble_size: 1,
            eta_sel: 1e-8,
            seed: 0,
            ceiling: DEFAULT_CEILING,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Excluded {
    pub member: usize,
    pub time: f64,
    pub max_abs: f64,
}

/// Solution set at the target time reached from one lag.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub lag: f64,
    /// Terminal states in `(u, v)` form.
    pub states: Vec<State>,
    /// The same states in `(u, z)` form.
    pub uz: Vec<State>,
    /// Index of each surviving member in the ensemble.
    pub members: Vec<usize>,
    pub excluded: Vec<Excluded>,
}

fn with_v(u: Field, v: Field) -> State {
    State { u, v }
}

fn perturb(state: &State, eta: f64, seed: u64, member: usize) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64 + 2);
    let mut out = state.clone();
    let n = out.u.len();
    for i in 1..n - 1 {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        out.u[i] += eta * a;
        out.v[i] += eta * b;
    }
    out
}

/// Initial ensemble in `(u, z)` form.
fn ensemble(family: &dyn InitialFamily, start: f64, lag: f64, grid: &Grid, opts: &PullbackOptions) -> Vec<State> {
    let base = family.states(start, lag, grid);
    let n = base.len().max(opts.ensemble_size);
    (0..n)
        .map(|j| {
            if j < base.len() {
                base[j].clone()
            } else {
                perturb(&base[j % base.len()], opts.eta_sel, opts.seed, j)
            }
        })
        .collect()
}

/// Evolves `(u, z)` initial data from `start` to `end`, with OU time `0` at
/// absolute time `offset`.
fn evolve_set(
    initial_uz: &[State],
    start: f64,
    end: f64,
    offset: f64,
    driver: &dyn Driver,
    spec: &ProblemSpec,
    opts: &PullbackOptions,
) -> Result<(Vec<State>, Vec<usize>, Vec<Excluded>)> {
    let eps = spec.physics.epsilon;
    let shifted = Shifted { inner: driver, offset };
    if !shifted.covers(start, end) {
        return Err(Error::Window(format!(
            "noise does not cover OU times [{}, {}]",
            start - offset,
            end - offset
        )));
    }
    let y_start = shifted.y(start);
    let steps = ((end - start) / opts.dt).round().max(1.0) as usize;
    let solve_opts = SolveOptions {
        sample_every: steps,
        ceiling: opts.ceiling,
    };
    let results: Vec<Result<(usize, std::result::Result<State, Excluded>)>> = initial_uz
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            let v0 = v_from_z(&s.u, &s.v, y_start, eps);
            let init = with_v(s.u.clone(), v0);
            let traj = solve(&init, start, end, opts.dt, &shifted, spec, &solve_opts)?;
            Ok(match traj.blow_up {
                Some(b) => (
                    j,
                    Err(Excluded {
                        member: j,
                        time: b.time,
                        max_abs: b.max_abs,
                    }),
                ),
                None => (j, Ok(traj.last().clone())),
            })
        })
        .collect();
    let mut states = Vec::new();
    let mut members = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        match r? {
            (j, Ok(s)) => {
                states.push(s);
                members.push(j);
            }
            (_, Err(e)) => excluded.push(e),
        }
    }
    if states.is_empty() {
        let e = excluded[0];
        return Err(Error::BlowUp {
            time: e.time,
            max_abs: e.max_abs,
        });
    }
    Ok((states, members, excluded))
}

/// `Φ(lag, τ − lag, θ_{−lag} ω, D(τ − lag, θ_{−lag} ω))` as a finite
/// ensemble. Members that blow up are dropped and listed in
/// [`Snapshot::excluded`].
pub fn pullback_evolve(
    tau: f64,
    lag: f64,
    family: &dyn InitialFamily,
    driver: &dyn Driver,
    spec: &ProblemSpec,
    opts: &PullbackOptions,
) -> Result<Snapshot> {
    if !(lag >= 0.0) {
        return Err(Error::precondition(format!("lag must be nonnegative, got {lag}")));
    }
    let eps = spec.physics.epsilon;
    let start = tau - lag;
    if lag == 0.0 {
        let uz = family.states(start, 0.0, &spec.grid);
        let y = driver.y(0.0);
        let states = uz
            .iter()
            .map(|s| with_v(s.u.clone(), v_from_z(&s.u, &s.v, y, eps)))
            .collect();
        let members = (0..uz.len()).collect();
        return Ok(Snapshot {
            lag,
            states,
            uz,
            members,
            excluded: Vec::new(),
        });
    }
    let init = ensemble(family, start, lag, &spec.grid, opts);
    let (states, members, excluded) = evolve_set(&init, start, tau, tau, driver, spec, opts)?;
    let y = driver.y(0.0);
    let uz = states.iter().map(|s| with_v(s.u.clone(), z_from_v(s, y, eps))).collect();
    Ok(Snapshot {
        lag,
        states,
        uz,
        members,
        excluded,
    })
}

// ---------------------------------------------------------------------------
// set distances and tails

/// `sup_{a∈A} inf_{b∈B} ‖a − b‖` in `H¹ × L²`.
pub fn hausdorff_semidistance(a: &[State], b: &[State], grid: &Grid) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::precondition("semidistance needs nonempty sets"));
    }
    let d = a
        .par_iter()
        .map(|x| {
            b.iter()
                .map(|y| ops::state_dist_sq(grid, x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(d.sqrt())
}

/// `∫_{|x|≥K} (|u|² + |∇u|² + |v|²) dx` with partial cells at `|x| = K`.
pub fn tail_mass(state: &State, k: f64, grid: &Grid) -> Result<f64> {
    if !(k > 0.0 && k < grid.half_width()) {
        return Err(Error::precondition(format!(
            "tail radius K must lie in (0, {}), got {k}",
            grid.half_width()
        )));
    }
    Ok(ops::region_mass(grid, state, k))
}

/// `0` on `|s| ≤ 1`, `1` on `|s| ≥ 2`, smoothstep `3w² − 2w³` in between with
/// `w = |s| − 1`.
pub fn cutoff_rho(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        0.0
    } else if a >= 2.0 {
        1.0
    } else {
        let w = a - 1.0;
        w * w * (3.0 - 2.0 * w)
    }
}

/// `ρ(x²/k²)` at the nodes.
pub fn cutoff_field(grid: &Grid, k: f64) -> Result<Field> {
    if !(k > 0.0) {
        return Err(Error::precondition(format!("cutoff radius must be positive, got {k}")));
    }
    Ok(Field::sample(grid, |x| cutoff_rho(x * x / (k * k))))
}

/// `∫ ρ(x²/k²)(|u|² + |∇u|² + |v|²) dx`, the gradient term weighted at link
/// midpoints.
pub fn weighted_tail_energy(state: &State, k: f64, grid: &Grid) -> Result<f64> {
    let rho = cutoff_field(grid, k)?;
    let nodal = grid.integrate(|i| rho[i] * (state.u[i] * state.u[i] + state.v[i] * state.v[i]));
    let dx = grid.dx();
    let links: f64 = (0..grid.n_points() - 1)
        .map(|i| {
            let xm = 0.5 * (grid.x(i) + grid.x(i + 1));
            let g = state.u[i + 1] - state.u[i];
            cutoff_rho(xm * xm / (k * k)) * g * g
        })
        .sum::<f64>()
        / dx;
    Ok(nodal + links)
}

// ---------------------------------------------------------------------------
// attractor estimation

#[derive(Clone, Debug, Serialize)]
pub struct AbsorptionReport {
    pub set: AbsorbingSet,
    /// `max ‖u‖²_{H¹} + ‖z‖²` over each snapshot.
    pub member_max: Vec<f64>,
    /// Smallest power of two `≥ 1` whose multiple of `L` contains the final
    /// snapshot.
    pub empirical_factor: f64,
    /// First lag from which every later snapshot lies in the scaled ball.
    pub entry_lag: Option<f64>,
}

fn uz_norm_sq(grid: &Grid, s: &State) -> f64 {
    ops::state_norm_sq(grid, s)
}

pub fn absorption_report(snapshots: &[Snapshot], set: AbsorbingSet, grid: &Grid) -> AbsorptionReport {
    let member_max: Vec<f64> = snapshots
        .iter()
        .map(|s| s.uz.iter().map(|m| uz_norm_sq(grid, m)).fold(0.0, f64::max))
        .collect();
    let last = member_max.last().copied().unwrap_or(0.0);
    let mut factor = 1.0;
    while last > factor * set.radius_l && factor < 1e300 {
        factor *= 2.0;
    }
    let bound = factor * set.radius_l;
    let mut entry = None;
    for (j, &m) in member_max.iter().enumerate().rev() {
        if m <= bound {
            entry = Some(snapshots[j].lag);
        } else {
            break;
        }
    }
    AbsorptionReport {
        set,
        member_max,
        empirical_factor: factor,
        entry_lag: entry,
    }
}

#[derive(Clone, Debug)]
pub struct PullbackRun {
    pub tau: f64,
    pub lags: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// `d(snapshot_j, snapshot_last)` for every lag.
    pub semidistance_history: Vec<f64>,
    /// `d(snapshot_j, snapshot_{j+1})`.
    pub successive: Vec<f64>,
    pub converged: bool,
    pub tol: f64,
    pub absorption: Option<AbsorptionReport>,
}

impl PullbackRun {
    /// The attractor estimate `A(τ, ω)`.
    pub fn estimate(&self) -> &Snapshot {
        self.snapshots.last().expect("a run holds at least one snapshot")
    }

    pub fn summary(&self) -> serde_json::Value {
        let absorption = self.absorption.as_ref();
        serde_json::json!({
            "tau": self.tau,
            "lags": self.lags,
            "semidistance_history": self.semidistance_history,
            "successive_semidistances": self.successive,
            "converged": self.converged,
            "tol": self.tol,
            "L": absorption.map(|a| a.set.radius_l),
            "M": absorption.map(|a| a.set.m),
            "c": absorption.map(|a| a.set.c),
            "entry_lag": absorption.and_then(|a| a.entry_lag),
            "empirical_factor": absorption.map(|a| a.empirical_factor),
            "member_max": absorption.map(|a| a.member_max.clone()),
            "excluded": self.snapshots.iter().map(|s| s.excluded.len()).collect::<Vec<_>>(),
            "note": LOWER_BOUND_NOTE,
        })
    }
}

/// Geometric lag schedule `t₀·2^j`, `j = 0..=levels`.
pub fn geometric_lags(t0: f64, levels: usize) -> Vec<f64> {
    (0..=levels).map(|j| t0 * 2f64.powi(j as i32)).collect()
}

/// Runs [`pullback_evolve`] at every lag and applies the Cauchy criterion:
/// the two lags before the last are within `tol` of the final snapshot in
/// both directions and the largest member norm has settled to within `tol`.
pub fn estimate_attractor(
    tau: f64,
    family: &dyn InitialFamily,
    driver: &dyn Driver,
    spec: &ProblemSpec,
    lags: &[f64],
    tol: f64,
    opts: &PullbackOptions,
) -> Result<PullbackRun> {
    if lags.is_empty() || lags.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::precondition("lag schedule must be nonempty and increasing"));
    }
    if !(tol > 0.0) {
        return Err(Error::precondition("tol must be positive"));
    }
    let snapshots = lags
        .par_iter()
        .map(|&lag| pullback_evolve(tau, lag, family, driver, spec, opts))
        .collect::<Result<Vec<_>>>()?;
    let grid = &spec.grid;
    let last = &snapshots[snapshots.len() - 1];
    let semidistance_history = snapshots
        .iter()
        .map(|s| hausdorff_semidistance(&s.states, &last.states, grid))
        .collect::<Result<Vec<_>>>()?;
    let successive = snapshots
        .windows(2)
        .map(|w| hausdorff_semidistance(&w[0].states, &w[1].states, grid))
        .collect::<Result<Vec<_>>>()?;

    let k = snapshots.len();
    let converged = if k < 3 {
        false
    } else {
        let max_norm = |s: &Snapshot| {
            s.states
                .iter()
                .map(|m| ops::state_norm_sq(grid, m).sqrt())
                .fold(0.0, f64::max)
        };
        let back = hausdorff_semidistance(&last.states, &snapshots[k - 2].states, grid)?;
        semidistance_history[k - 3] < tol
            && semidistance_history[k - 2] < tol
            && back < tol
            && (max_norm(&snapshots[k - 2]) - max_norm(last)).abs() < tol
    };
    Ok(PullbackRun {
        tau,
        lags: lags.to_vec(),
        snapshots,
        semidistance_history,
        successive,
        converged,
        tol,
        absorption: None,
    })
}

/// One forward step of the estimate against the estimate at `τ + h`:
/// returns `(d(Φ(h)A(τ), A(τ+h)), d(A(τ+h), Φ(h)A(τ)))`, where `A(τ+h)` is
/// pulled back with the longest lag plus `h` on the same noise.
pub fn one_step_invariance(
    run: &PullbackRun,
    h: f64,
    family: &dyn InitialFamily,
    driver: &dyn Driver,
    spec: &ProblemSpec,
    opts: &PullbackOptions,
) -> Result<(f64, f64)> {
    let tau = run.tau;
    let est = run.estimate();
    let forward = evolve_set(&est.uz, tau, tau + h, tau, driver, spec, opts)?.0;
    let lag = run.lags[run.lags.len() - 1] + h;
    let start = tau - run.lags[run.lags.len() - 1];
    let init = ensemble(family, start, lag, &spec.grid, opts);
    let target = evolve_set(&init, start, tau + h, tau, driver, spec, opts)?.0;
    Ok((
        hausdorff_semidistance(&forward, &target, &spec.grid)?,
        hausdorff_semidistance(&target, &forward, &spec.grid)?,
    ))
}

// ---------------------------------------------------------------------------
// linear reference

/// Slowest decay rate of `u_tt + αu_t − Δ_h u + λu = 0` over the Dirichlet
/// modes of the grid: `α/2` when the lowest mode is underdamped, otherwise
/// the smaller real root.
pub fn slowest_linear_rate(alpha: f64, lambda: f64, grid: &Grid) -> f64 {
    let k = std::f64::consts::PI / (2.0 * grid.half_width());
    let dx = grid.dx();
    let mu = (2.0 / dx * (0.5 * k * dx).sin()).powi(2);
    let disc = alpha * alpha - 4.0 * (lambda + mu);
    if disc < 0.0 {
        0.5 * alpha
    } else {
        0.5 * (alpha - disc.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::nonlinearity::{make_power_nonlinearity, Nonlinearity};
    use crate::dynamics::spec::{Forcing, Physics};
    use crate::noise::Quiet;

    fn physics(alpha: f64, delta: f64, epsilon: f64) -> Physics {
        Physics {
            alpha,
            lambda: 1.0,
            epsilon,
            delta,
        }
    }

    fn linear_spec(forcing: Forcing) -> ProblemSpec {
        ProblemSpec::new(
            physics(1.0, 0.5, 0.0),
            Nonlinearity::zero(),
            forcing,
            Grid::new(5.0, 51).unwrap(),
        )
        .unwrap()
    }

    fn opts() -> PullbackOptions {
        PullbackOptions {
            dt: 0.05,
            ..Default::default()
        }
    }

    #[test]
    fn sigma_examples() {
        let nl = make_power_nonlinearity(3.0, 1.0).unwrap();
        assert!((sigma_of(&physics(1.0, 0.1, 0.0), &nl) - 0.05).abs() < 1e-15);
        let nl = make_power_nonlinearity(1.0, 1.0).unwrap();
        assert_eq!(sigma_of(&physics(2.0, 1.0, 0.0), &nl), 0.25);
        assert_eq!(sigma_of(&physics(1.0, 0.0, 0.0), &nl), 0.0);
    }

    #[test]
    fn forcing_check_closed_forms() {
        let zero = check_forcing(|_| 0.0, 0.0, 0.125, 3.0, 0.05).unwrap();
        assert_eq!(zero.value, 0.0);
        let c = 2.5;
        let r = check_forcing(|_| c, 3.0, 0.125, 3.0, 0.05).unwrap();
        let exact = c * 8.0 / 0.125;
        assert!((r.value - exact).abs() < 1e-6 * exact, "{} vs {exact}", r.value);
        assert!(r.converged);
        let e = check_forcing(|t: f64| (2.0 * t.abs()).exp(), 0.0, 0.125, 3.0, 0.05);
        assert!(matches!(e, Err(Error::ForcingInadmissible(_))));
    }

    #[test]
    fn radius_reduces_to_closed_form_without_noise() {
        let spec = linear_spec(Forcing::Zero);
        let sigma = spec.sigma;
        let set = absorbing_radius(0.0, &Quiet, &spec, &RadiusOptions::default()).unwrap();
        let exact = 1.0 + 1.0 / (2.0 * sigma);
        assert!((set.radius_l - exact).abs() < 1e-6 * exact, "{}", set.radius_l);
        assert!(set.truncation_bound < 1e-8);

        let pulse = Forcing::GaussianPulse {
            amplitude: 0.7,
            center: 0.0,
            width: 1.0,
        };
        let spec = linear_spec(pulse);
        let cg = spec.forcing_norm_sq(0.0);
        let opts = RadiusOptions {
            m: 3.0,
            ..Default::default()
        };
        let set = absorbing_radius(0.0, &Quiet, &spec, &opts).unwrap();
        let exact = 3.0 * (1.0 + (1.0 + cg) / (2.0 * sigma));
        assert!((set.radius_l - exact).abs() < 1e-6 * exact);
    }

    fn family() -> BumpFamily {
        BumpFamily::new(vec![0.5, 1.0, -1.0], 1.0)
    }

    #[test]
    fn zero_lag_is_identity() {
        let spec = linear_spec(Forcing::Zero);
        let f = family();
        let snap = pullback_evolve(2.0, 0.0, &f, &Quiet, &spec, &opts()).unwrap();
        assert_eq!(snap.uz, f.states(2.0, 0.0, &spec.grid));
        assert_eq!(snap.states, snap.uz);
    }

    #[test]
    fn zero_problem_stays_zero() {
        let spec = linear_spec(Forcing::Zero);
        for lag in [0.5, 2.0] {
            let snap = pullback_evolve(0.0, lag, &ZeroFamily, &Quiet, &spec, &opts()).unwrap();
            assert!(snap.states.iter().all(|s| s.max_abs() == 0.0));
        }
    }

    #[test]
    fn cocycle_without_noise() {
        let spec = linear_spec(Forcing::GaussianPulse {
            amplitude: 0.3,
            center: 1.0,
            width: 1.0,
        });
        let init = family().states(0.0, 0.0, &spec.grid);
        let o = opts();
        let (one, _, _) = evolve_set(&init, 0.0, 3.0, 0.0, &Quiet, &spec, &o).unwrap();
        let (mid, _, _) = evolve_set(&init, 0.0, 1.0, 0.0, &Quiet, &spec, &o).unwrap();
        let (two, _, _) = evolve_set(&mid, 1.0, 3.0, 1.0, &Quiet, &spec, &o).unwrap();
        for (a, b) in one.iter().zip(&two) {
            let d = ops::state_dist_sq(&spec.grid, a, b).sqrt();
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn semidistance_basics() {
        let g = Grid::new(2.0, 21).unwrap();
        let a = State::from_fns(&g, |x| (-x * x).exp(), |_| 0.0);
        let b = State::zeros(&g);
        let set = vec![a.clone(), b.clone()];
        assert_eq!(hausdorff_semidistance(&set, &set, &g).unwrap(), 0.0);
        assert_eq!(hausdorff_semidistance(std::slice::from_ref(&a), &set, &g).unwrap(), 0.0);
        let d = hausdorff_semidistance(std::slice::from_ref(&a), std::slice::from_ref(&b), &g).unwrap();
        assert!((d - ops::state_norm_sq(&g, &a).sqrt()).abs() < 1e-15);
        assert!(hausdorff_semidistance(&[], &set, &g).is_err());
    }

    #[test]
    fn tail_mass_properties() {
        let g = Grid::new(5.0, 101).unwrap();
        let inner = State::from_fns(&g, |x| if x.abs() < 1.0 { (1.0 - x * x).powi(2) } else { 0.0 }, |_| 0.0);
        assert_eq!(tail_mass(&inner, 2.0, &g).unwrap(), 0.0);
        let s = State::from_fns(&g, |x| (-x * x / 4.0).exp(), |x| 0.1 * x.cos());
        let full = ops::state_norm_sq(&g, &s);
        assert!((tail_mass(&s, 1e-9, &g).unwrap() - full).abs() < 1e-6 * full);
        let mut prev = f64::INFINITY;
        for j in 1..50 {
            let m = tail_mass(&s, 0.1 * j as f64, &g).unwrap();
            assert!(m <= prev);
            prev = m;
        }
        assert!(tail_mass(&s, 5.0, &g).is_err());
        assert!(tail_mass(&s, 0.0, &g).is_err());
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff_rho(0.5), 0.0);
        assert_eq!(cutoff_rho(3.0), 1.0);
        assert_eq!(cutoff_rho(1.5), 0.5);
        assert_eq!(cutoff_rho(-1.5), 0.5);
        let g = Grid::new(4.0, 81).unwrap();
        let f = cutoff_field(&g, 1.0).unwrap();
        assert!(f.iter().all(|&r| (0.0..=1.0).contains(&r)));
        assert!(cutoff_field(&g, 0.0).is_err());
    }

    #[test]
    fn temperedness_on_envelope() {
        let lags = geometric_lags(1.0, 6);
        let mut f = family();
        assert!(check_tempered(&f, 0.125, 3.0, &lags));
        f.growth = 0.02;
        assert!(check_tempered(&f, 0.125, 3.0, &lags));
        f.growth = 0.1;
        assert!(!check_tempered(&f, 0.125, 3.0, &lags));
    }

    #[test]
    fn perturbed_members_are_deterministic() {
        let spec = linear_spec(Forcing::Zero);
        let o = PullbackOptions {
            ensemble_size: 6,
            seed: 9,
            ..opts()
        };
        let a = ensemble(&family(), 0.0, 1.0, &spec.grid, &o);
        let b = ensemble(&family(), 0.0, 1.0, &spec.grid, &o);
        assert_eq!(a.len(), 6);
        assert_eq!(a, b);
        assert_eq!(a[0], family().states(0.0, 1.0, &spec.grid)[0]);
        let d = ops::state_dist_sq(&spec.grid, &a[0], &a[3]).sqrt();
        assert!(d > 0.0 && d < 1e-6);
    }

    #[test]
    fn linear_attractor_is_zero() {
        let spec = linear_spec(Forcing::Zero);
        let lags = geometric_lags(5.0, 4);
        let run = estimate_attractor(0.0, &family(), &Quiet, &spec, &lags, 1e-3, &opts()).unwrap();
        assert!(run.converged, "{:?}", run.semidistance_history);
        let zero = [State::zeros(&spec.grid)];
        let d = hausdorff_semidistance(&run.estimate().states, &zero, &spec.grid).unwrap();
        assert!(d < 1e-3);
        assert_eq!(*run.semidistance_history.last().unwrap(), 0.0);
    }

    #[test]
    fn absorption_factor_and_entry() {
        let spec = linear_spec(Forcing::Zero);
        let lags = geometric_lags(0.25, 6);
        let mut run = estimate_attractor(0.0, &family(), &Quiet, &spec, &lags, 1e-3, &opts()).unwrap();
        let set = absorbing_radius(0.0, &Quiet, &spec, &RadiusOptions::default()).unwrap();
        let rep = absorption_report(&run.snapshots, set, &spec.grid);
        assert_eq!(rep.empirical_factor, 1.0);
        assert!(rep.entry_lag.is_some());
        run.absorption = Some(rep);
        let s = run.summary();
        assert_eq!(s["L"].as_f64().unwrap(), set.radius_l);
    }

    #[test]
    fn underdamped_rate() {
        let g = Grid::new(10.0, 201).unwrap();
        assert_eq!(slowest_linear_rate(1.0, 1.0, &g), 0.5);
        let r = slowest_linear_rate(4.0, 0.0, &g);
        assert!(r > 0.0 && r < 0.01);
    }
}
