//! Energy functional `E`, production functional `G`, and a-posteriori audits of
//! the energy balance along computed trajectories.
//!
//! With `κ = λ + δ² − αδ`,
//!
//! ```text
//! E(u,v) = ‖v‖² + κ‖u‖² + ‖∇u‖² + 2∫F(x,u)dx
//! dE/dt + (4σ − 2ε|y|)E = G(u,v)
//! ```
//!
//! Three audits are offered: the differential balance above, its integrated
//! (variation-of-constants) form, and the untransformed balance in which the
//! `σ` and `|y|` terms do not appear. The first and third differ only by an
//! algebraic rearrangement, so their residual series agree to rounding.

use std::io::Write;

use crate::dynamics::grid::State;
use crate::dynamics::integrate::Trajectory;
use crate::dynamics::ops;
use crate::dynamics::spec::ProblemSpec;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    /// `‖v‖²`
    pub v_part: f64,
    /// `κ‖u‖²`
    pub u_part: f64,
    /// `‖∇u‖²`
    pub grad_part: f64,
    /// `2∫F(x,u)dx`
    pub potential: f64,
    pub total: f64,
}

pub fn energy_e(state: &State, spec: &ProblemSpec) -> EnergyBreakdown {
    let g = &spec.grid;
    let nl = &spec.nonlinearity;
    let v_part = ops::norm_sq(g, &state.v);
    let u_part = spec.kappa() * ops::norm_sq(g, &state.u);
    let grad_part = ops::grad_norm_sq(g, &state.u);
    let potential = 2.0 * g.integrate(|i| nl.antiderivative(g.x(i), state.u[i]));
    EnergyBreakdown {
        v_part,
        u_part,
        grad_part,
        potential,
        total: v_part + u_part + grad_part + potential,
    }
}

struct Pairings {
    v2: f64,
    u2: f64,
    grad2: f64,
    gv: f64,
    uv: f64,
    fu: f64,
    big_f: f64,
}

fn pairings(state: &State, t: f64, spec: &ProblemSpec) -> Pairings {
    let g = &spec.grid;
    let nl = &spec.nonlinearity;
    let amp = spec.forcing.time_factor(t);
    let profile = spec.forcing_profile();
    let (u, v) = (&state.u, &state.v);
    Pairings {
        v2: ops::norm_sq(g, v),
        u2: ops::norm_sq(g, u),
        grad2: ops::grad_norm_sq(g, u),
        gv: amp * ops::inner(g, profile, v),
        uv: ops::inner(g, u, v),
        fu: g.integrate(|i| nl.f(g.x(i), u[i]) * u[i]),
        big_f: g.integrate(|i| nl.antiderivative(g.x(i), u[i])),
    }
}

/// All seven terms of `G(u, v)` at time `t` with coefficient `y`.
pub fn production_g(state: &State, t: f64, y: f64, spec: &ProblemSpec) -> f64 {
    let p = pairings(state, t, spec);
    production_from(&p, y, spec)
}

fn production_from(p: &Pairings, y: f64, spec: &ProblemSpec) -> f64 {
    let ph = &spec.physics;
    let (alpha, delta, eps, sigma) = (ph.alpha, ph.delta, ph.epsilon, spec.sigma);
    let kappa = ph.kappa();
    let ay = y.abs();
    -2.0 * (alpha - delta - 2.0 * sigma + eps * (ay + y)) * p.v2
        - 2.0 * kappa * (delta - 2.0 * sigma + eps * (ay - y)) * p.u2
        - 2.0 * (delta - 2.0 * sigma + eps * (ay - y)) * p.grad2
        + 2.0 * p.gv
        - 2.0 * eps * (eps * y - 2.0 * delta) * y * p.uv
        + 2.0 * (eps * y - delta) * p.fu
        + 4.0 * (2.0 * sigma - eps * ay) * p.big_f
}

/// `dE/dt` predicted by the untransformed balance: the eight right-hand terms
/// minus the four dissipative left-hand terms.
fn untransformed_rate(p: &Pairings, y: f64, spec: &ProblemSpec) -> f64 {
    let ph = &spec.physics;
    let (alpha, delta, eps) = (ph.alpha, ph.delta, ph.epsilon);
    let kappa = ph.kappa();
    let left = 2.0 * (alpha - delta) * p.v2
        + 2.0 * delta * kappa * p.u2
        + 2.0 * delta * p.grad2
        + 2.0 * delta * p.fu;
    let right = 2.0 * p.gv - 2.0 * eps * y * p.v2 - 2.0 * eps * (eps * y - 2.0 * delta) * y * p.uv
        + 2.0 * eps * kappa * y * p.u2
        + 2.0 * eps * y * p.grad2
        + 2.0 * eps * y * p.fu;
    right - left
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditKind {
    Differential,
    Integrated,
    Untransformed,
}

impl AuditKind {
    pub fn name(&self) -> &'static str {
        match self {
            AuditKind::Differential => "differential",
            AuditKind::Integrated => "integrated",
            AuditKind::Untransformed => "untransformed",
        }
    }
}

/// Result of checking an energy balance along a trajectory.
#[derive(Clone, Debug)]
pub struct EnergyAudit {
    pub kind: AuditKind,
    pub times: Vec<f64>,
    pub e_series: Vec<f64>,
    pub g_series: Vec<f64>,
    /// Times at which `residual_series` is evaluated.
    pub residual_times: Vec<f64>,
    pub residual_series: Vec<f64>,
    /// Left side of the integrated form (`E(t)`); empty for the other audits.
    pub integrated_lhs: Vec<f64>,
    pub integrated_rhs: Vec<f64>,
    pub max_rel_residual: f64,
}

impl EnergyAudit {
    /// CSV `t,E,G,residual` at the residual times.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,E,G,residual")?;
        let offset = self.times.len() - self.residual_times.len();
        let offset = offset / 2;
        for (k, (&t, &r)) in self.residual_times.iter().zip(&self.residual_series).enumerate() {
            let j = k + offset;
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(t),
                fmt_f64(self.e_series[j]),
                fmt_f64(self.g_series[j]),
                fmt_f64(r)
            )?;
        }
        Ok(())
    }
}

const NORM_FLOOR: f64 = 1e-12;

fn sample_spacing(traj: &Trajectory) -> Result<f64> {
    let n = traj.times.len();
    if n < 3 {
        return Err(Error::precondition(format!(
            "energy audit needs at least 3 samples, got {n}"
        )));
    }
    let h = traj.times[1] - traj.times[0];
    for w in traj.times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::precondition(
                "energy audit needs uniformly spaced samples",
            ));
        }
    }
    Ok(h)
}

struct Series {
    h: f64,
    e: Vec<f64>,
    pairs: Vec<Pairings>,
}

fn series(traj: &Trajectory, spec: &ProblemSpec) -> Result<Series> {
    let h = sample_spacing(traj)?;
    let e = traj.states.iter().map(|s| energy_e(s, spec).total).collect();
    let pairs = traj
        .states
        .iter()
        .zip(&traj.times)
        .map(|(s, &t)| pairings(s, t, spec))
        .collect();
    Ok(Series { h, e, pairs })
}

fn central_difference(e: &[f64], h: f64) -> Vec<f64> {
    e.windows(3).map(|w| (w[2] - w[0]) / (2.0 * h)).collect()
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Residual of `dE/dt + (4σ − 2ε|y|)E − G` with centred differences for
/// `dE/dt`, relative to `max(max|dE/dt|, max|G|)`.
pub fn audit_differential(traj: &Trajectory, spec: &ProblemSpec) -> Result<EnergyAudit> {
    let s = series(traj, spec)?;
    let eps = spec.physics.epsilon;
    let g: Vec<f64> = s
        .pairs
        .iter()
        .zip(&traj.y)
        .map(|(p, &y)| production_from(p, y, spec))
        .collect();
    let de = central_difference(&s.e, s.h);
    let residual: Vec<f64> = de
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let j = k + 1;
            d + (4.0 * spec.sigma - 2.0 * eps * traj.y[j].abs()) * s.e[j] - g[j]
        })
        .collect();
    let scale = max_abs(&de).max(max_abs(&g[1..g.len() - 1])).max(NORM_FLOOR);
    Ok(EnergyAudit {
        kind: AuditKind::Differential,
        times: traj.times.clone(),
        max_rel_residual: max_abs(&residual) / scale,
        residual_times: traj.times[1..traj.times.len() - 1].to_vec(),
        residual_series: residual,
        e_series: s.e,
        g_series: g,
        integrated_lhs: Vec::new(),
        integrated_rhs: Vec::new(),
    })
}

/// Checks `E(t) = e^{−W(t)}E(τ) + ∫_τ^t e^{W(s)−W(t)} G ds` with
/// `W(t) = ∫_τ^t (4σ − 2ε|y|) dr`, both integrals by the trapezoid rule.
pub fn audit_integrated(traj: &Trajectory, spec: &ProblemSpec) -> Result<EnergyAudit> {
    let s = series(traj, spec)?;
    let eps = spec.physics.epsilon;
    let h = s.h;
    let rate: Vec<f64> = traj
        .y
        .iter()
        .map(|y| 4.0 * spec.sigma - 2.0 * eps * y.abs())
        .collect();
    let g: Vec<f64> = s
        .pairs
        .iter()
        .zip(&traj.y)
        .map(|(p, &y)| production_from(p, y, spec))
        .collect();

    let n = s.e.len();
    let mut rhs = Vec::with_capacity(n);
    let mut decay_total = 1.0; // e^{−W(t_k)}
    let mut forced = 0.0; // ∫_τ^{t_k} e^{W(s) − W(t_k)} G ds
    rhs.push(s.e[0]);
    for k in 1..n {
        let decay = (-0.5 * h * (rate[k - 1] + rate[k])).exp();
        decay_total *= decay;
        forced = decay * forced + 0.5 * h * (decay * g[k - 1] + g[k]);
        rhs.push(decay_total * s.e[0] + forced);
    }
    let residual: Vec<f64> = s.e.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    let scale = max_abs(&s.e).max(NORM_FLOOR);
    Ok(EnergyAudit {
        kind: AuditKind::Integrated,
        times: traj.times.clone(),
        max_rel_residual: max_abs(&residual) / scale,
        residual_times: traj.times.clone(),
        residual_series: residual,
        integrated_lhs: s.e.clone(),
        integrated_rhs: rhs,
        e_series: s.e,
        g_series: g,
    })
}

/// Residual of the untransformed balance, `dE/dt` (centred) minus the rate it
/// predicts, relative to `max(max|dE/dt|, max|predicted|)`.
pub fn audit_ener1(traj: &Trajectory, spec: &ProblemSpec) -> Result<EnergyAudit> {
    let s = series(traj, spec)?;
    let predicted: Vec<f64> = s
        .pairs
        .iter()
        .zip(&traj.y)
        .map(|(p, &y)| untransformed_rate(p, y, spec))
        .collect();
    let g: Vec<f64> = s
        .pairs
        .iter()
        .zip(&traj.y)
        .map(|(p, &y)| production_from(p, y, spec))
        .collect();
    let de = central_difference(&s.e, s.h);
    let residual: Vec<f64> = de
        .iter()
        .enumerate()
        .map(|(k, d)| d - predicted[k + 1])
        .collect();
    let scale = max_abs(&de)
        .max(max_abs(&predicted[1..predicted.len() - 1]))
        .max(NORM_FLOOR);
    Ok(EnergyAudit {
        kind: AuditKind::Untransformed,
        times: traj.times.clone(),
        max_rel_residual: max_abs(&residual) / scale,
        residual_times: traj.times[1..traj.times.len() - 1].to_vec(),
        residual_series: residual,
        e_series: s.e,
        g_series: g,
        integrated_lhs: Vec::new(),
        integrated_rhs: Vec::new(),
    })
}

/// Runs all three audits.
pub fn audit_all(traj: &Trajectory, spec: &ProblemSpec) -> Result<[EnergyAudit; 3]> {
    Ok([
        audit_differential(traj, spec)?,
        audit_integrated(traj, spec)?,
        audit_ener1(traj, spec)?,
    ])
}
