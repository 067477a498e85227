//! Subcommand runners behind the `pullwave` binary.
//!
//! Every runner writes its files under the output directory and returns an
//! [`Outcome`]; [`execute`] adds `manifest.json` and maps the result to the
//! exit-code contract (0 success, 1 invalid input, 2 numerical failure).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde_json::{json, Value};

use pullwave_core::config::RunConfig;
use pullwave_core::dynamics::integrate::{solve, SolveOptions, Trajectory};
use pullwave_core::dynamics::ops;
use pullwave_core::dynamics::transform::{v_from_z, z_from_v};
use pullwave_core::dynamics::{ProblemSpec, State};
use pullwave_core::energy::{audit_all, EnergyAudit};
use pullwave_core::io::{
    canonical_json, canonical_json_compact, fmt_f64, sha256_hex, write_snapshot_csv,
    write_trajectory_csv, Manifest, OutputEntry,
};
use pullwave_core::noise::{
    ergodic_average, generate_wiener, omega_m_check, ou_from_integral, Driver, Quiet,
};
use pullwave_core::pullback::{
    absorbing_radius, absorption_report, check_forcing, estimate_attractor, pullback_evolve,
    tail_mass, weighted_tail_energy, PullbackRun, Snapshot, LOWER_BOUND_NOTE, WEIGHT_TOL,
};
use pullwave_core::refine::observed_orders;
use pullwave_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    OuCheck,
    Simulate,
    EnergyAudit,
    Absorb,
    Pullback,
    Tails,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::OuCheck => "ou-check",
            Command::Simulate => "simulate",
            Command::EnergyAudit => "energy-audit",
            Command::Absorb => "absorb",
            Command::Pullback => "pullback",
            Command::Tails => "tails",
        }
    }
}

/// What a runner produced. A `failure` is a numerical failure (blow-up,
/// non-convergence) reported after the outputs were written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub notes: BTreeMap<String, Value>,
    pub failure: Option<String>,
}

impl Outcome {
    fn note(&mut self, key: &str, value: Value) {
        self.notes.insert(key.to_string(), value);
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.failure.is_none() => EXIT_OK,
        Ok(_) => EXIT_NUMERICAL,
        Err(e) if e.is_validation() => EXIT_INVALID,
        Err(_) => EXIT_NUMERICAL,
    }
}

/// Reads and validates the configuration, applying a seed override.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut cfg = pullwave_core::parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Runs `command` and writes the manifest. `out` overrides the configured
/// output directory.
pub fn execute(command: Command, cfg: &RunConfig, out: Option<&Path>, threads: usize) -> Result<Outcome> {
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    std::fs::create_dir_all(&dir)?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let mut outcome = match command {
        Command::OuCheck => ou_check(cfg, &dir),
        Command::Simulate => simulate(cfg, &dir),
        Command::EnergyAudit => energy_audit(cfg, &dir),
        Command::Absorb => absorb(cfg, &dir),
        Command::Pullback => pullback(cfg, &dir),
        Command::Tails => tails(cfg, &dir),
    }?;
    outcome.files.sort();
    let outputs = outcome
        .files
        .iter()
        .map(|f| OutputEntry::from_file(&dir, f))
        .collect::<Result<Vec<_>>>()?;
    if let Some(reason) = &outcome.failure {
        outcome.note("failure", json!(reason));
    }
    let manifest = Manifest {
        command: command.name().to_string(),
        config_sha256: sha256_hex(canonical_json_compact(cfg)?.as_bytes()),
        seed: cfg.seed,
        threads,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        rustc_target: std::env::consts::ARCH.to_string() + "-" + std::env::consts::OS,
        started_unix: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        outputs,
        config: serde_json::to_value(cfg)?,
        notes: outcome.notes.clone(),
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(outcome)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    std::fs::write(path, canonical_json(value)?)?;
    Ok(())
}

/// The noise coefficient on OU times `[from, to]`, or [`Quiet`] without noise.
fn driver(cfg: &RunConfig, from: f64, to: f64) -> Result<Box<dyn Driver>> {
    if cfg.physics.epsilon == 0.0 {
        Ok(Box::new(Quiet))
    } else {
        Ok(Box::new(cfg.ou(from, to)?))
    }
}

fn initial_state(cfg: &RunConfig, spec: &ProblemSpec, y0: f64) -> Result<State> {
    let family = cfg.family();
    let uz = family
        .states(cfg.time.t0, 0.0, &spec.grid)
        .into_iter()
        .next()
        .ok_or_else(|| Error::Precondition("initial family is empty".into()))?;
    let v = v_from_z(&uz.u, &uz.v, y0, spec.physics.epsilon);
    State::new(uz.u, v)
}

// ---------------------------------------------------------------------------

fn ou_check(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let oc = &cfg.ou_check;
    let alpha = cfg.physics.alpha;
    let t_end = oc.t_end;
    let dt = cfg.noise.dt;
    let burn = cfg.noise.burn_in;
    let ms: Vec<u32> = oc.m_values.iter().copied().filter(|&m| f64::from(m) < t_end).collect();

    let rows = (0..oc.seeds)
        .into_par_iter()
        .map(|j| {
            let seed = cfg.seed + j;
            let path = generate_wiener(seed, -t_end - burn, t_end, dt)?;
            let ou = ou_from_integral(&path, alpha, -t_end, t_end, cfg.noise.tail_tol)?;
            let avg = ergodic_average(&ou, t_end)?;
            let members = ms
                .iter()
                .map(|&m| omega_m_check(&path, &ou, m).map(|r| r.member()))
                .collect::<Result<Vec<_>>>()?;
            Ok((seed, avg, members))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Outcome::default();
    let csv = dir.join("ou_check.csv");
    {
        let mut w = create(&csv)?;
        let header: Vec<String> = ms.iter().map(|m| format!("member_m{m}")).collect();
        writeln!(w, "seed,ergodic_average,{}", header.join(","))?;
        for (seed, avg, members) in &rows {
            let flags: Vec<&str> = members.iter().map(|&b| if b { "1" } else { "0" }).collect();
            writeln!(w, "{seed},{},{}", fmt_f64(*avg), flags.join(","))?;
        }
        w.flush()?;
    }
    out.files.push(csv);

    let target = 0.5 / alpha;
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let within = rows.iter().filter(|r| (r.1 - target).abs() <= 0.1 * target).count() as f64 / n;
    let fractions: Vec<f64> = (0..ms.len())
        .map(|i| rows.iter().filter(|r| r.2[i]).count() as f64 / n)
        .collect();
    let summary = json!({
        "alpha": alpha,
        "t_end": t_end,
        "seeds": oc.seeds,
        "target": target,
        "mean_ergodic_average": mean,
        "fraction_within_10_percent": within,
        "m_values": ms,
        "membership_fraction": fractions,
    });
    let path = dir.join("ou_check.json");
    write_json(&path, &summary)?;
    out.files.push(path);
    out.note("mean_ergodic_average", json!(mean));
    Ok(out)
}

fn write_audits(dir: &Path, prefix: &str, audits: &[EnergyAudit], out: &mut Outcome) -> Result<()> {
    for a in audits {
        let path = dir.join(format!("{prefix}{}.csv", a.kind.name()));
        let mut w = create(&path)?;
        a.write_csv(&mut w)?;
        w.flush()?;
        out.files.push(path);
    }
    Ok(())
}

fn run_trajectory(cfg: &RunConfig, spec: &ProblemSpec, dt: f64, sample_every: usize) -> Result<Trajectory> {
    let t = &cfg.time;
    let drv = driver(cfg, t.t0, t.t1)?;
    let init = initial_state(cfg, spec, drv.y(t.t0))?;
    let opts = SolveOptions {
        sample_every,
        ..Default::default()
    };
    solve(&init, t.t0, t.t1, dt, drv.as_ref(), spec, &opts)
}

fn simulate(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let spec = cfg.problem_spec()?;
    let traj = run_trajectory(cfg, &spec, cfg.time.dt, cfg.time.sample_every)?;
    let mut out = Outcome::default();
    let k = cfg.tails.k_frac * spec.grid.half_width();

    let path = dir.join("trajectory.csv");
    let mut w = create(&path)?;
    write_trajectory_csv(&mut w, &traj, &spec, k)?;
    w.flush()?;
    out.files.push(path);

    let path = dir.join("snapshot_final.csv");
    let mut w = create(&path)?;
    write_snapshot_csv(&mut w, &spec.grid, traj.last())?;
    w.flush()?;
    out.files.push(path);

    let residuals = if traj.times.len() >= 3 {
        let audits = audit_all(&traj, &spec)?;
        write_audits(dir, "audit_", &audits, &mut out)?;
        audits
            .iter()
            .map(|a| (a.kind.name().to_string(), json!(a.max_rel_residual)))
            .collect::<BTreeMap<_, _>>()
    } else {
        BTreeMap::new()
    };

    let summary = json!({
        "completed": traj.completed(),
        "blow_up_time": traj.blow_up.as_ref().map(|b| b.time),
        "samples": traj.times.len(),
        "max_bound": traj.max_bound,
        "tail_warnings": traj.tail_warnings.len(),
        "max_rel_residual": residuals,
    });
    let path = dir.join("simulate.json");
    write_json(&path, &summary)?;
    out.files.push(path);
    if let Some(b) = traj.blow_up {
        out.failure = Some(format!("blow-up at t = {}", b.time));
    }
    Ok(out)
}

fn energy_audit(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let spec = cfg.problem_spec()?;
    let levels = cfg.time.audit_levels;
    let results = (0..levels)
        .into_par_iter()
        .map(|l| {
            let dt = cfg.time.dt / f64::from(1u32 << l);
            let traj = run_trajectory(cfg, &spec, dt, 1)?;
            if let Some(b) = traj.blow_up {
                return Err(Error::BlowUp {
                    time: b.time,
                    max_abs: b.max_abs,
                });
            }
            let audits = audit_all(&traj, &spec)?;
            Ok((dt, audits.map(|a| a.max_rel_residual)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Outcome::default();
    let path = dir.join("audit_study.csv");
    let mut w = create(&path)?;
    writeln!(w, "level,dt,differential,integrated,untransformed")?;
    for (l, (dt, r)) in results.iter().enumerate() {
        writeln!(w, "{l},{},{},{},{}", fmt_f64(*dt), fmt_f64(r[0]), fmt_f64(r[1]), fmt_f64(r[2]))?;
    }
    w.flush()?;
    out.files.push(path);

    let names = ["differential", "integrated", "untransformed"];
    let mut orders = serde_json::Map::new();
    for (i, name) in names.iter().enumerate() {
        let errs: Vec<f64> = results.iter().map(|r| r.1[i]).collect();
        orders.insert(name.to_string(), json!(observed_orders(&errs)));
    }
    let summary = json!({
        "dt": results.iter().map(|r| r.0).collect::<Vec<_>>(),
        "max_rel_residual": names.iter().enumerate().map(|(i, n)| (n.to_string(), json!(results.iter().map(|r| r.1[i]).collect::<Vec<_>>()))).collect::<serde_json::Map<_, _>>(),
        "observed_order": orders,
    });
    let path = dir.join("energy_audit.json");
    write_json(&path, &summary)?;
    out.files.push(path);
    Ok(out)
}

/// History the absorbing-radius integral needs before its weight drops
/// below the cut-off, padded by a factor two.
fn radius_history(cfg: &RunConfig, spec: &ProblemSpec) -> Result<f64> {
    let eps = cfg.physics.epsilon;
    let c = cfg.pullback.c;
    let rate = 2.0 * spec.sigma - eps * c * (1.0 + 0.5 / cfg.physics.alpha);
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::Truncation {
            requested: WEIGHT_TOL,
            achievable: 1.0,
        });
    }
    Ok(2.0 * -WEIGHT_TOL.ln() / rate)
}

struct PullbackSetup {
    spec: ProblemSpec,
    driver: Box<dyn Driver>,
    lags: Vec<f64>,
}

fn pullback_setup(cfg: &RunConfig) -> Result<PullbackSetup> {
    let spec = cfg.problem_spec()?;
    let lags = cfg.pullback.lag_schedule.lags();
    let history = radius_history(cfg, &spec)?.max(lags[lags.len() - 1]);
    let driver = driver(cfg, -history, 0.0)?;
    Ok(PullbackSetup { spec, driver, lags })
}

fn write_snapshot_members(path: &Path, spec: &ProblemSpec, snap: &Snapshot) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "member,x,u,v")?;
    for (j, s) in snap.members.iter().zip(&snap.states) {
        for i in 0..spec.grid.n_points() {
            writeln!(w, "{j},{},{},{}", fmt_f64(spec.grid.x(i)), fmt_f64(s.u[i]), fmt_f64(s.v[i]))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run_pullback(cfg: &RunConfig, setup: &PullbackSetup) -> Result<PullbackRun> {
    let p = &cfg.pullback;
    let family = cfg.family();
    let mut run = estimate_attractor(
        p.tau,
        family.as_ref(),
        setup.driver.as_ref(),
        &setup.spec,
        &setup.lags,
        p.tol,
        &cfg.pullback_options(),
    )?;
    let set = absorbing_radius(p.tau, setup.driver.as_ref(), &setup.spec, &cfg.radius_options())?;
    run.absorption = Some(absorption_report(&run.snapshots, set, &setup.spec.grid));
    Ok(run)
}

fn absorb(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let setup = pullback_setup(cfg)?;
    let spec = &setup.spec;
    let tau = cfg.pullback.tau;
    let gamma = spec.nonlinearity.gamma;
    let forcing = check_forcing(|t| spec.forcing_norm_sq(t), tau, spec.sigma, gamma, cfg.noise.dt.max(0.01))?;
    let run = run_pullback(cfg, &setup)?;
    let rep = run.absorption.as_ref().expect("absorption computed");
    let mut out = Outcome::default();

    let path = dir.join("absorb_lags.csv");
    let mut w = create(&path)?;
    writeln!(w, "lag,max_norm_sq,inside")?;
    let bound = rep.empirical_factor * rep.set.radius_l;
    for (lag, m) in run.lags.iter().zip(&rep.member_max) {
        writeln!(w, "{},{},{}", fmt_f64(*lag), fmt_f64(*m), u8::from(*m <= bound))?;
    }
    w.flush()?;
    out.files.push(path);

    let summary = json!({
        "tau": tau,
        "absorbing_set": rep.set,
        "forcing_check": forcing,
        "empirical_factor": rep.empirical_factor,
        "entry_lag": rep.entry_lag,
        "member_max": rep.member_max,
        "note": LOWER_BOUND_NOTE,
    });
    let path = dir.join("absorb.json");
    write_json(&path, &summary)?;
    out.files.push(path);
    out.note("L", json!(rep.set.radius_l));
    if rep.entry_lag.is_none() {
        out.failure = Some("no entry lag found in the schedule".into());
    }
    Ok(out)
}

fn pullback(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let setup = pullback_setup(cfg)?;
    let run = run_pullback(cfg, &setup)?;
    let mut out = Outcome::default();
    for (j, snap) in run.snapshots.iter().enumerate() {
        let path = dir.join(format!("snapshot_lag_{j:02}.csv"));
        write_snapshot_members(&path, &setup.spec, snap)?;
        out.files.push(path);
    }
    let path = dir.join("pullback_summary.json");
    write_json(&path, &run.summary())?;
    out.files.push(path);
    out.note("converged", json!(run.converged));
    if !run.converged {
        out.failure = Some("pullback estimate did not converge within the lag schedule".into());
    }
    Ok(out)
}

fn tails(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let setup = pullback_setup(cfg)?;
    let spec = &setup.spec;
    let grid = &spec.grid;
    let lag = setup.lags[setup.lags.len() - 1];
    let family = cfg.family();
    let snap = pullback_evolve(
        cfg.pullback.tau,
        lag,
        family.as_ref(),
        setup.driver.as_ref(),
        spec,
        &cfg.pullback_options(),
    )?;
    let eps = spec.physics.epsilon;
    let y = setup.driver.y(0.0);
    let members: Vec<State> = snap.states.iter().map(|s| State { u: s.u.clone(), v: z_from_v(s, y, eps) }).collect();
    let totals: Vec<f64> = members.iter().map(|s| ops::state_norm_sq(grid, s)).collect();

    let l = grid.half_width();
    let n = cfg.tails.sweep_points;
    let ks: Vec<f64> = (1..=n).map(|j| l * j as f64 / (n + 1) as f64).collect();
    let mut out = Outcome::default();
    let path = dir.join("tails.csv");
    let mut w = create(&path)?;
    writeln!(w, "K,max_tail_mass,max_relative_tail,max_weighted_tail_energy")?;
    let mut monotone = true;
    let mut prev = vec![f64::INFINITY; members.len()];
    for &k in &ks {
        let mut max_mass: f64 = 0.0;
        let mut max_rel: f64 = 0.0;
        let mut max_weighted: f64 = 0.0;
        for (i, s) in members.iter().enumerate() {
            let m = tail_mass(s, k, grid)?;
            monotone &= m <= prev[i];
            prev[i] = m;
            max_mass = max_mass.max(m);
            if totals[i] > 0.0 {
                max_rel = max_rel.max(m / totals[i]);
            }
            max_weighted = max_weighted.max(weighted_tail_energy(s, k, grid)?);
        }
        writeln!(w, "{},{},{},{}", fmt_f64(k), fmt_f64(max_mass), fmt_f64(max_rel), fmt_f64(max_weighted))?;
    }
    w.flush()?;
    out.files.push(path);

    let k = cfg.tails.k_frac * l;
    let rel_at_k = members
        .iter()
        .zip(&totals)
        .map(|(s, &t)| tail_mass(s, k, grid).map(|m| if t > 0.0 { m / t } else { 0.0 }))
        .collect::<Result<Vec<_>>>()?;
    let worst = rel_at_k.iter().fold(0.0f64, |a, &b| a.max(b));
    let summary = json!({
        "lag": lag,
        "K": k,
        "max_relative_tail_at_K": worst,
        "eta": cfg.tails.eta,
        "below_eta": worst < cfg.tails.eta,
        "monotone_in_K": monotone,
        "members": members.len(),
    });
    let path = dir.join("tails.json");
    write_json(&path, &summary)?;
    out.files.push(path);
    Ok(out)
}
