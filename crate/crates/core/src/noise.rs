//! Sampled two-sided Wiener paths, the shift group acting on them, and the
//! stationary Ornstein–Uhlenbeck process `y(θ_t ω)` solving `dy + αy dt = dω`.
//!
//! Paths live on an integer lattice `t_k = k·dt` that always contains `t = 0`.
//! A path stores the raw cumulative walk together with a base value, so that
//! `ω(t) = raw(t) − base`. Shifting by `s` only re-indexes the walk and swaps
//! the base for `raw(s)`, which makes the group law exact in floating point.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Default tolerance for truncating the improper integral defining `y`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

const ALIGN_TOL: f64 = 1e-9;

/// Index `k` such that `k·dt == t` up to rounding, or an alignment error.
pub(crate) fn lattice_index(t: f64, dt: f64) -> Result<i64> {
    let k = (t / dt).round();
    if !k.is_finite() || (k * dt - t).abs() > ALIGN_TOL * dt.max(t.abs()).max(1.0) {
        return Err(Error::Alignment { time: t, dt });
    }
    Ok(k as i64)
}

/// A sampled path `ω` on the canonical two-sided Wiener space.
#[derive(Clone, Debug)]
pub struct WienerPath {
    seed: u64,
    dt: f64,
    first: i64,
    raw: Arc<[f64]>,
    base: f64,
}

impl WienerPath {
    /// Builds a deterministic path from a closure, pinned so that `ω(0) = 0`.
    pub fn from_fn(t_min: f64, t_max: f64, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let (first, last) = window_indices(t_min, t_max, dt)?;
        let raw: Vec<f64> = (first..=last).map(|k| f(k as f64 * dt)).collect();
        let base = raw[(-first) as usize];
        Ok(Self {
            seed: 0,
            dt,
            first,
            raw: raw.into(),
            base,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Lattice index of the first sample.
    pub fn first_index(&self) -> i64 {
        self.first
    }

    pub fn t_min(&self) -> f64 {
        self.first as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        (self.first + self.raw.len() as i64 - 1) as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        (self.first + k as i64) as f64 * self.dt
    }

    pub fn value(&self, k: usize) -> f64 {
        self.raw[k] - self.base
    }

    /// Sample position of time `t`, if `t` is on the lattice and inside the window.
    pub fn position(&self, t: f64) -> Result<usize> {
        let k = lattice_index(t, self.dt)?;
        let pos = k - self.first;
        if pos < 0 || pos >= self.raw.len() as i64 {
            return Err(Error::Window(format!(
                "t = {t} outside path window [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(pos as usize)
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        Ok(self.value(self.position(t)?))
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.value(k)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(move |k| (self.time(k), self.value(k)))
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.len()).map(|k| self.value(k).abs()).fold(0.0, f64::max)
    }

    /// The same path restricted to `[from, to]`. The window must contain 0.
    pub fn restrict(&self, from: f64, to: f64) -> Result<Self> {
        if from > 0.0 || to < 0.0 {
            return Err(Error::Window(format!(
                "restricted window [{from}, {to}] must contain 0"
            )));
        }
        let a = self.position(from)?;
        let b = self.position(to)?;
        Ok(Self {
            seed: self.seed,
            dt: self.dt,
            first: self.first + a as i64,
            raw: self.raw[a..=b].into(),
            base: self.base,
        })
    }

    /// Keeps every `factor`-th lattice point (those with index divisible by
    /// `factor`), giving the same Brownian path on a coarser grid.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::precondition("coarsening factor must be positive"));
        }
        let f = factor as i64;
        let last = self.first + self.raw.len() as i64 - 1;
        let lo = self.first.div_euclid(f) + i64::from(self.first.rem_euclid(f) != 0);
        let hi = last.div_euclid(f);
        let raw: Vec<f64> = (lo..=hi)
            .map(|j| self.raw[(j * f - self.first) as usize])
            .collect();
        Ok(Self {
            seed: self.seed,
            dt: self.dt * factor as f64,
            first: lo,
            raw: raw.into(),
            base: self.base,
        })
    }

    /// Sample-wise sum of two paths on the same lattice window.
    pub fn add(&self, other: &WienerPath) -> Result<Self> {
        if self.dt != other.dt || self.first != other.first || self.len() != other.len() {
            return Err(Error::precondition("paths must share the same sample lattice"));
        }
        let raw: Vec<f64> = (0..self.len())
            .map(|k| self.value(k) + other.value(k))
            .collect();
        Ok(Self {
            seed: self.seed,
            dt: self.dt,
            first: self.first,
            raw: raw.into(),
            base: 0.0,
        })
    }

    /// CSV with header `t,omega`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,omega")?;
        for (t, x) in self.iter() {
            writeln!(w, "{},{}", crate::io::fmt_f64(t), crate::io::fmt_f64(x))?;
        }
        Ok(())
    }
}

fn window_indices(t_min: f64, t_max: f64, dt: f64) -> Result<(i64, i64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::precondition(format!("dt must be positive, got {dt}")));
    }
    if !(t_min <= 0.0 && t_max >= 0.0) {
        return Err(Error::precondition(format!(
            "window [{t_min}, {t_max}] must contain t = 0"
        )));
    }
    Ok((lattice_index(t_min, dt)?, lattice_index(t_max, dt)?))
}

/// Samples a two-sided Brownian path with `ω(0) = 0`.
///
/// The forward half `t > 0` and the backward half `t < 0` come from two
/// independent ChaCha streams of the same seed, so the forward samples do not
/// depend on how far back the window reaches.
pub fn generate_wiener(seed: u64, t_min: f64, t_max: f64, dt: f64) -> Result<WienerPath> {
    let (first, last) = window_indices(t_min, t_max, dt)?;
    let n_back = (-first) as usize;
    let n_fwd = last as usize;
    let mut raw = vec![0.0; n_back + n_fwd + 1];
    let scale = dt.sqrt();

    let mut fwd = ChaCha8Rng::seed_from_u64(seed);
    fwd.set_stream(0);
    let mut acc = 0.0;
    for slot in raw[n_back + 1..].iter_mut() {
        let z: f64 = StandardNormal.sample(&mut fwd);
        acc += scale * z;
        *slot = acc;
    }

    let mut back = ChaCha8Rng::seed_from_u64(seed);
    back.set_stream(1);
    acc = 0.0;
    for slot in raw[..n_back].iter_mut().rev() {
        let z: f64 = StandardNormal.sample(&mut back);
        acc += scale * z;
        *slot = acc;
    }

    Ok(WienerPath {
        seed,
        dt,
        first,
        raw: raw.into(),
        base: 0.0,
    })
}

/// `θ_s ω = ω(· + s) − ω(s)`. `s` must be a lattice point inside the window.
pub fn shift_path(path: &WienerPath, s: f64) -> Result<WienerPath> {
    let j = lattice_index(s, path.dt)?;
    let pos = j - path.first;
    if pos < 0 || pos >= path.raw.len() as i64 {
        return Err(Error::Window(format!(
            "shift {s} leaves no sample of ω(s) in [{}, {}]",
            path.t_min(),
            path.t_max()
        )));
    }
    Ok(WienerPath {
        seed: path.seed,
        dt: path.dt,
        first: path.first - j,
        raw: Arc::clone(&path.raw),
        base: path.raw[pos as usize],
    })
}

/// How the OU samples are evaluated between lattice points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Interp {
    Linear,
    /// C¹ cubic Hermite with centred-difference slopes.
    #[default]
    CubicHermite,
}

/// Samples of `y(θ_t ω)` on a lattice window.
#[derive(Clone, Debug)]
pub struct OUSample {
    alpha: f64,
    dt: f64,
    first: i64,
    values: Vec<f64>,
    truncation_bound: f64,
    interp: Interp,
}

impl OUSample {
    pub fn new(alpha: f64, dt: f64, t_start: f64, values: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::precondition("OU rate alpha must be positive"));
        }
        if values.len() < 2 {
            return Err(Error::precondition("OU sample needs at least two values"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { field: "y", node: k });
        }
        Ok(Self {
            alpha,
            dt,
            first: lattice_index(t_start, dt)?,
            values,
            truncation_bound: 0.0,
            interp: Interp::default(),
        })
    }

    pub fn with_interp(mut self, interp: Interp) -> Self {
        self.interp = interp;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, k: usize) -> f64 {
        (self.first + k as i64) as f64 * self.dt
    }

    pub fn t_min(&self) -> f64 {
        self.time(0)
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    /// Upper bound on the error from truncating the improper integral,
    /// `e^{α(t_min − t)}·max|ω|` at the first reported time.
    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }

    pub fn position(&self, t: f64) -> Result<usize> {
        let k = lattice_index(t, self.dt)? - self.first;
        if k < 0 || k >= self.values.len() as i64 {
            return Err(Error::Window(format!(
                "t = {t} outside OU window [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(k as usize)
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.position(t)?])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &y)| (self.time(k), y))
    }

    fn slope(&self, k: usize) -> f64 {
        let n = self.values.len();
        let y = &self.values;
        if k == 0 {
            (y[1] - y[0]) / self.dt
        } else if k == n - 1 {
            (y[n - 1] - y[n - 2]) / self.dt
        } else {
            (y[k + 1] - y[k - 1]) / (2.0 * self.dt)
        }
    }

    /// Interpolated value at an arbitrary time inside the window.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let s = t / self.dt - self.first as f64;
        let k = (s.floor().max(0.0) as usize).min(n - 2);
        let w = s - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        match self.interp {
            Interp::Linear => y0 + w * (y1 - y0),
            Interp::CubicHermite => {
                let w2 = w * w;
                let w3 = w2 * w;
                let h00 = 2.0 * w3 - 3.0 * w2 + 1.0;
                let h10 = w3 - 2.0 * w2 + w;
                let h01 = -2.0 * w3 + 3.0 * w2;
                let h11 = w3 - w2;
                h00 * y0
                    + h10 * self.dt * self.slope(k)
                    + h01 * y1
                    + h11 * self.dt * self.slope(k + 1)
            }
        }
    }

    /// CSV with header `t,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,y")?;
        for (t, y) in self.iter() {
            writeln!(w, "{},{}", crate::io::fmt_f64(t), crate::io::fmt_f64(y))?;
        }
        Ok(())
    }
}

/// A time-dependent scalar coefficient `t ↦ y` feeding the pathwise PDE.
pub trait Driver: Sync {
    fn y(&self, t: f64) -> f64;
    fn covers(&self, t0: f64, t1: f64) -> bool;
}

impl Driver for OUSample {
    fn y(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn covers(&self, t0: f64, t1: f64) -> bool {
        let slack = ALIGN_TOL * self.dt;
        t0 >= self.t_min() - slack && t1 <= self.t_max() + slack
    }
}

/// The zero coefficient, for deterministic runs.
#[derive(Clone, Copy, Debug, Default)]
pub struct Quiet;

impl Driver for Quiet {
    fn y(&self, _t: f64) -> f64 {
        0.0
    }

    fn covers(&self, _t0: f64, _t1: f64) -> bool {
        true
    }
}

/// `t ↦ inner(t − offset)`; turns `y(θ_r ω)` into `y(θ_{t−τ} ω)`.
pub struct Shifted<'a> {
    pub inner: &'a dyn Driver,
    pub offset: f64,
}

impl Driver for Shifted<'_> {
    fn y(&self, t: f64) -> f64 {
        self.inner.y(t - self.offset)
    }

    fn covers(&self, t0: f64, t1: f64) -> bool {
        self.inner.covers(t0 - self.offset, t1 - self.offset)
    }
}

/// `y(θ_t ω) = −α e^{−αt} ∫_{−∞}^t e^{ατ} ω(τ) dτ + ω(t)` on `[from, to]`.
///
/// The integral starts at the path's first sample; the dropped tail is bounded
/// by `e^{α(t_min − t)}·max|ω|`, which must not exceed `tail_tol` at `from`.
/// Quadrature is the trapezoid rule on the path lattice, run as a recursion.
pub fn ou_from_integral(
    path: &WienerPath,
    alpha: f64,
    from: f64,
    to: f64,
    tail_tol: f64,
) -> Result<OUSample> {
    if !(alpha > 0.0) {
        return Err(Error::precondition("OU rate alpha must be positive"));
    }
    if !(tail_tol > 0.0) {
        return Err(Error::precondition("tail tolerance must be positive"));
    }
    if from > to {
        return Err(Error::Window(format!("empty OU window [{from}, {to}]")));
    }
    let a = path.position(from)?;
    let b = path.position(to)?;
    let bound = (alpha * (path.t_min() - from)).exp() * path.max_abs();
    if bound > tail_tol {
        return Err(Error::Truncation {
            requested: tail_tol,
            achievable: bound,
        });
    }

    let dt = path.dt;
    let decay = (-alpha * dt).exp();
    let mut integral = 0.0;
    let mut values = Vec::with_capacity(b - a + 1);
    let mut prev = path.value(0);
    for k in 0..=b {
        let w = path.value(k);
        if k > 0 {
            integral = decay * integral + 0.5 * dt * (decay * prev + w);
        }
        prev = w;
        if k >= a {
            values.push(-alpha * integral + w);
        }
    }
    let mut out = OUSample::new(alpha, dt, from, values)?;
    out.truncation_bound = bound;
    Ok(out)
}

/// Recursion `y_{k+1} = e^{−α dt} y_k + Δω_k` over the whole path window,
/// started from `y0` at the path's first sample.
pub fn ou_from_sde(path: &WienerPath, alpha: f64, y0: f64) -> Result<OUSample> {
    if !y0.is_finite() {
        return Err(Error::precondition("initial OU value must be finite"));
    }
    if path.len() < 2 {
        return Err(Error::precondition("path needs at least two samples"));
    }
    let decay = (-alpha * path.dt).exp();
    let mut values = Vec::with_capacity(path.len());
    let mut y = y0;
    values.push(y);
    for k in 1..path.len() {
        y = decay * y + (path.value(k) - path.value(k - 1));
        values.push(y);
    }
    OUSample::new(alpha, path.dt, path.t_min(), values)
}

/// `(1/t) ∫_0^t y² dr` by the trapezoid rule.
pub fn ergodic_average(ou: &OUSample, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Window(format!("averaging horizon must be positive, got {t}")));
    }
    let start = ou.position(0.0)?;
    let end = ou.position(t)?;
    let y = &ou.values;
    let sum: f64 = (start..end)
        .map(|k| 0.5 * (y[k] * y[k] + y[k + 1] * y[k + 1]))
        .sum();
    let horizon = (end - start) as f64 * ou.dt;
    Ok(sum * ou.dt / horizon)
}

/// Outcome of testing a path against the defining inequalities of `Ω_m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OmegaMReport {
    pub m: u32,
    /// `|ω(t)| ≤ |t|` for every sampled `|t| ≥ m`.
    pub path_ok: bool,
    /// `|∫_0^t y² dr| ≤ |t|/α` for every sampled `|t| ≥ m`.
    pub ergodic_ok: bool,
    /// `|y(θ_t ω)| ≤ 2|t| + 1/α` for every sampled `t ≤ −m`.
    pub bound_check: bool,
}

impl OmegaMReport {
    pub fn member(&self) -> bool {
        self.path_ok && self.ergodic_ok
    }
}

pub fn omega_m_check(path: &WienerPath, ou: &OUSample, m: u32) -> Result<OmegaMReport> {
    if m == 0 {
        return Err(Error::precondition("m must be at least 1"));
    }
    let mf = f64::from(m);
    if !(ou.t_min() < -mf && ou.t_max() > mf) || !(path.t_min() < -mf && path.t_max() > mf) {
        return Err(Error::precondition(format!(
            "window must extend beyond ±{m} (OU covers [{}, {}])",
            ou.t_min(),
            ou.t_max()
        )));
    }
    let alpha = ou.alpha;

    let path_ok = path
        .iter()
        .filter(|(t, _)| t.abs() >= mf)
        .all(|(t, w)| w.abs() <= t.abs());

    // cumulative ∫_0^t y² in both directions from the sample at 0
    let zero = ou.position(0.0)?;
    let y = &ou.values;
    let dt = ou.dt;
    let mut ergodic_ok = true;
    let mut acc = 0.0;
    for k in zero + 1..y.len() {
        acc += 0.5 * dt * (y[k - 1] * y[k - 1] + y[k] * y[k]);
        let t = ou.time(k);
        if t >= mf && acc > t / alpha {
            ergodic_ok = false;
            break;
        }
    }
    if ergodic_ok {
        acc = 0.0;
        for k in (0..zero).rev() {
            acc += 0.5 * dt * (y[k] * y[k] + y[k + 1] * y[k + 1]);
            let t = ou.time(k);
            if -t >= mf && acc > -t / alpha {
                ergodic_ok = false;
                break;
            }
        }
    }

    let bound_check = ou
        .iter()
        .filter(|(t, _)| *t <= -mf)
        .all(|(t, yt)| yt.abs() <= 2.0 * t.abs() + 1.0 / alpha);

    Ok(OmegaMReport {
        m,
        path_ok,
        ergodic_ok,
        bound_check,
    })
}
