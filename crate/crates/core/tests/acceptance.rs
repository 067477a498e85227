//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. All tolerances are fixed here.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use pullwave_core::dynamics::integrate::{solve, SolveOptions};
use pullwave_core::dynamics::ops::{state_dist_sq, state_norm_sq};
use pullwave_core::dynamics::transform::{v_from_z, z_from_v};
use pullwave_core::dynamics::{
    make_power_nonlinearity, Field, Forcing, Grid, Nonlinearity, Physics, ProblemSpec, State,
};
use pullwave_core::energy::{audit_differential, audit_ener1, audit_integrated, energy_e};
use pullwave_core::noise::{
    ergodic_average, generate_wiener, omega_m_check, ou_from_integral, shift_path, Driver, OUSample,
    Quiet, Shifted,
};
use pullwave_core::pullback::{
    absorbing_radius, absorption_report, estimate_attractor, geometric_lags,
    hausdorff_semidistance, slowest_linear_rate, tail_mass, BumpFamily, PullbackOptions,
    PullbackRun, RadiusOptions,
};
use pullwave_core::refine::observed_orders;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn physics(alpha: f64, lambda: f64, epsilon: f64, delta: f64) -> Physics {
    Physics {
        alpha,
        lambda,
        epsilon,
        delta,
    }
}

fn cubic() -> Nonlinearity {
    make_power_nonlinearity(3.0, 1.0).unwrap()
}

fn pulse(amplitude: f64, width: f64) -> Forcing {
    Forcing::GaussianPulse {
        amplitude,
        center: 0.0,
        width,
    }
}

/// OU sample on `[from, to]` with `burn` extra history for the improper integral.
fn ou(seed: u64, alpha: f64, from: f64, to: f64, dt: f64, burn: f64) -> OUSample {
    let path = generate_wiener(seed, from - burn, to, dt).unwrap();
    ou_from_integral(&path, alpha, from, to, 1e-8).unwrap()
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn rel_dist(grid: &Grid, a: &State, b: &State) -> f64 {
    (state_dist_sq(grid, a, b) / state_norm_sq(grid, b)).sqrt()
}

// ---------------------------------------------------------------------------

const C1_SEEDS: u64 = 100;
const C1_MEAN_TOL: f64 = 0.02;
const C1_PATH_TOL: f64 = 0.10;
const C1_PATH_FRACTION: f64 = 0.95;

fn ou_ergodicity() -> Verdict {
    let avgs: Vec<f64> = (0..C1_SEEDS)
        .into_par_iter()
        .map(|seed| {
            let y = ou(seed, 1.0, 0.0, 2000.0, 0.01, 40.0);
            ergodic_average(&y, 2000.0).unwrap()
        })
        .collect();
    let mean = avgs.iter().sum::<f64>() / avgs.len() as f64;
    let within = avgs.iter().filter(|a| (*a - 0.5).abs() <= C1_PATH_TOL * 0.5).count() as f64
        / avgs.len() as f64;
    verdict(
        (mean - 0.5).abs() <= C1_MEAN_TOL * 0.5 && within >= C1_PATH_FRACTION,
        format!("mean {mean:.5} (target 0.5 +/- 2%), {:.1}% of paths within 10%", 100.0 * within),
    )
}

const C2_SEEDS: u64 = 1000;
const C2_MS: [u32; 4] = [10, 20, 50, 100];
const C2_MIN_FRACTION: f64 = 0.99;

fn omega_m_coverage() -> Verdict {
    let members: Vec<[bool; 4]> = (0..C2_SEEDS)
        .into_par_iter()
        .map(|seed| {
            let path = generate_wiener(10_000 + seed, -230.0, 200.0, 0.01).unwrap();
            let y = ou_from_integral(&path, 1.0, -200.0, 200.0, 1e-8).unwrap();
            C2_MS.map(|m| omega_m_check(&path, &y, m).unwrap().member())
        })
        .collect();
    let fractions: Vec<f64> = (0..4)
        .map(|i| members.iter().filter(|m| m[i]).count() as f64 / C2_SEEDS as f64)
        .collect();
    let monotone = fractions.windows(2).all(|w| w[0] <= w[1]);
    verdict(
        monotone && fractions[3] >= C2_MIN_FRACTION,
        format!("membership fractions for m = {C2_MS:?}: {fractions:?}"),
    )
}

/// Exact solution of `a'' + αa' + ω²a = 0`, `a(0) = 1`, `a'(0) = 0` (underdamped).
fn damped_mode(alpha: f64, omega_sq: f64, t: f64) -> (f64, f64) {
    let beta = (omega_sq - 0.25 * alpha * alpha).sqrt();
    let decay = (-0.5 * alpha * t).exp();
    let a = decay * ((beta * t).cos() + 0.5 * alpha / beta * (beta * t).sin());
    let da = -decay * omega_sq / beta * (beta * t).sin();
    (a, da)
}

fn mode_run(n: usize, dt: f64, t_end: f64, discrete_oracle: bool) -> f64 {
    let l = 10.0;
    let grid = Grid::new(l, n).unwrap();
    let spec = ProblemSpec::new(physics(1.0, 1.0, 0.0, 0.0), Nonlinearity::zero(), Forcing::Zero, grid).unwrap();
    let k = PI / (2.0 * l);
    let shape = Field::dirichlet(&spec.grid, |x| (k * (x + l)).sin());
    let init = State::new(shape.clone(), Field::zeros(&spec.grid)).unwrap();
    let steps = (t_end / dt).round() as usize;
    let traj = solve(&init, 0.0, t_end, dt, &Quiet, &spec, &SolveOptions::every(steps)).unwrap();
    let dx = spec.grid.dx();
    let k2 = if discrete_oracle {
        (2.0 / dx * (0.5 * k * dx).sin()).powi(2)
    } else {
        k * k
    };
    let (a, da) = damped_mode(1.0, 1.0 + k2, t_end);
    let exact = State::new(
        Field::from_vec(shape.iter().map(|s| a * s).collect()),
        Field::from_vec(shape.iter().map(|s| da * s).collect()),
    )
    .unwrap();
    rel_dist(&spec.grid, traj.last(), &exact)
}

const C3_REL_TOL: f64 = 1e-4;
const C3_DX_RATIO: (f64, f64) = (3.6, 4.4);
const C3_DT_RATIO: (f64, f64) = (14.0, 18.0);

fn linear_oracle() -> Verdict {
    let base = mode_run(401, 1e-3, 5.0, false);
    let fine_dx = mode_run(801, 1e-3, 5.0, false);
    let dx_ratio = base / fine_dx;
    // the temporal error at dt = 1e-3 sits at round-off, so the dt study runs
    // at coarser steps against the semi-discrete solution
    let dt_errs: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| mode_run(401, dt, 5.0, true)).collect();
    let dt_ratios: Vec<f64> = dt_errs.windows(2).map(|w| w[0] / w[1]).collect();
    let in_range = |r: f64, (lo, hi): (f64, f64)| r >= lo && r <= hi;
    verdict(
        base <= C3_REL_TOL && in_range(dx_ratio, C3_DX_RATIO) && dt_ratios.iter().all(|&r| in_range(r, C3_DT_RATIO)),
        format!("rel error {base:.3e}, dx-halving ratio {dx_ratio:.3}, dt-halving ratios {dt_ratios:.3?}"),
    )
}

/// Level-0 residuals observed when the study was frozen, times 1.5.
const C4_THRESHOLDS: [f64; 3] = [C4_LEVEL0[0] * 1.5, C4_LEVEL0[1] * 1.5, C4_LEVEL0[2] * 1.5];
const C4_LEVEL0: [f64; 3] = [8.363e-5, 2.669e-7, 8.362e-5];
const C4_MIN_ORDER: f64 = 1.9;

fn energy_identity() -> Verdict {
    let spec = ProblemSpec::new(
        physics(1.0, 1.0, 0.05, 0.5),
        cubic(),
        pulse(1.0, 1.5),
        Grid::new(10.0, 401).unwrap(),
    )
    .unwrap();
    let y = ou(4, 1.0, 0.0, 1.0, 0.01, 40.0);
    let init_uz = State::from_fns(&spec.grid, |x| 1.5 * (-x * x).exp(), |x| -0.5 * x * (-x * x).exp());
    let v0 = v_from_z(&init_uz.u, &init_uz.v, y.y(0.0), 0.05);
    let init = State::new(init_uz.u.clone(), v0).unwrap();
    let levels = [1e-3, 5e-4, 2.5e-4];
    let res: Vec<[f64; 3]> = levels
        .par_iter()
        .map(|&dt| {
            let traj = solve(&init, 0.0, 1.0, dt, &y, &spec, &SolveOptions::default()).unwrap();
            [
                audit_differential(&traj, &spec).unwrap().max_rel_residual,
                audit_integrated(&traj, &spec).unwrap().max_rel_residual,
                audit_ener1(&traj, &spec).unwrap().max_rel_residual,
            ]
        })
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, name) in ["differential", "integrated", "untransformed"].iter().enumerate() {
        let errs: Vec<f64> = res.iter().map(|r| r[i]).collect();
        let orders = observed_orders(&errs);
        let ok = orders.iter().all(|&p| p >= C4_MIN_ORDER) && errs[0] <= C4_THRESHOLDS[i];
        pass &= ok;
        parts.push(format!("{name} {} orders {orders:.3?}", sci(&errs)));
    }
    verdict(pass, parts.join("; "))
}

const C5_STATES: u64 = 20;
const C5_REL_TOL: f64 = 1e-10;

fn dissipativity() -> Verdict {
    let spec = ProblemSpec::new(physics(1.0, 1.0, 0.0, 0.5), cubic(), Forcing::Zero, Grid::new(10.0, 201).unwrap()).unwrap();
    let l = spec.grid.half_width();
    let worst = (0..C5_STATES)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let cu: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cv: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let series = |c: &[f64], x: f64| {
                c.iter()
                    .enumerate()
                    .map(|(j, a)| a * ((j + 1) as f64 * PI * (x + l) / (2.0 * l)).sin() / (j + 1) as f64)
                    .sum::<f64>()
            };
            let init = State::from_fns(&spec.grid, |x| 2.0 * series(&cu, x), |x| series(&cv, x));
            let traj = solve(&init, 0.0, 10.0, 0.01, &Quiet, &spec, &SolveOptions::default()).unwrap();
            let e: Vec<f64> = traj.states.iter().map(|s| energy_e(s, &spec).total).collect();
            e.windows(2).map(|w| (w[1] - w[0]) / e[0]).fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    verdict(
        worst <= C5_REL_TOL,
        format!("largest relative one-step increase of E over {C5_STATES} states: {worst:.3e}"),
    )
}

const C6_CLOSED_TOL: f64 = 1e-3;
const C6_REFINE_TOL: f64 = 1e-2;

fn absorbing_closed_forms() -> Verdict {
    let grid = Grid::new(10.0, 201).unwrap();
    let mut closed_err: f64 = 0.0;
    for (forcing, m) in [(Forcing::Zero, 1.0), (pulse(1.0, 1.0), 1.0), (pulse(2.0, 0.5), 2.5)] {
        let spec = ProblemSpec::new(physics(1.0, 1.0, 0.0, 0.5), cubic(), forcing, grid.clone()).unwrap();
        let cg = spec.forcing_norm_sq(0.0);
        let opts = RadiusOptions {
            m,
            ..Default::default()
        };
        let set = absorbing_radius(0.0, &Quiet, &spec, &opts).unwrap();
        let exact = m * (1.0 + (1.0 + cg) / (2.0 * spec.sigma));
        closed_err = closed_err.max((set.radius_l - exact).abs() / exact);
    }

    let spec = ProblemSpec::new(physics(1.0, 1.0, 0.05, 0.5), cubic(), pulse(1.0, 1.0), grid).unwrap();
    let refine_err = (0..5u64)
        .into_par_iter()
        .map(|seed| {
            let fine_path = generate_wiener(700 + seed, -440.0, 0.0, 0.005).unwrap();
            let coarse_path = fine_path.coarsen(2).unwrap();
            let radius = |path, h| {
                let y = ou_from_integral(path, 1.0, -400.0, 0.0, 1e-8).unwrap();
                let opts = RadiusOptions {
                    h,
                    ..Default::default()
                };
                absorbing_radius(0.0, &y, &spec, &opts).unwrap().radius_l
            };
            let fine = radius(&fine_path, 0.005);
            let coarse = radius(&coarse_path, 0.01);
            (fine - coarse).abs() / fine
        })
        .reduce(|| 0.0, f64::max);
    verdict(
        closed_err <= C6_CLOSED_TOL && refine_err <= C6_REFINE_TOL,
        format!("closed-form rel error {closed_err:.3e} (eps = 0), OU-grid halving rel change {refine_err:.3e} (eps = 0.05)"),
    )
}

const C7_LINEAR_TOL: f64 = 1e-6;
const C7_NONLINEAR_TOL: f64 = 1e-3;

fn nonlinear_run() -> (ProblemSpec, PullbackRun) {
    let spec = ProblemSpec::new(physics(1.0, 1.0, 0.05, 0.5), cubic(), pulse(1.0, 2.0), Grid::new(20.0, 401).unwrap()).unwrap();
    let lags = geometric_lags(2.5, 5);
    let y = ou(2024, 1.0, -400.0, 0.0, 0.01, 40.0);
    let mut family = BumpFamily::new(vec![-2.0, 0.5, 2.0], 2.0);
    family.velocity_ratio = 0.5;
    let opts = PullbackOptions {
        dt: 0.05,
        ensemble_size: 6,
        eta_sel: 1e-8,
        seed: 11,
        ..Default::default()
    };
    let mut run = estimate_attractor(0.0, &family, &y, &spec, &lags, C7_NONLINEAR_TOL, &opts).unwrap();
    let set = absorbing_radius(0.0, &y, &spec, &RadiusOptions::default()).unwrap();
    run.absorption = Some(absorption_report(&run.snapshots, set, &spec.grid));
    (spec, run)
}

fn pullback_attraction(nonlinear: &(ProblemSpec, PullbackRun)) -> Verdict {
    let spec = ProblemSpec::new(physics(1.0, 1.0, 0.0, 0.5), Nonlinearity::zero(), Forcing::Zero, Grid::new(10.0, 201).unwrap()).unwrap();
    let rate = slowest_linear_rate(1.0, 1.0, &spec.grid);
    let deadline = 40.0 / rate;
    let lags = geometric_lags(1.25, 8);
    let mut family = BumpFamily::new(vec![0.5, 1.0], 1.5);
    family.velocity_ratio = 0.5;
    let opts = PullbackOptions {
        dt: 0.05,
        ..Default::default()
    };
    let run = estimate_attractor(0.0, &family, &Quiet, &spec, &lags, C7_LINEAR_TOL, &opts).unwrap();
    let below_from = run
        .lags
        .iter()
        .zip(&run.semidistance_history)
        .rev()
        .take_while(|(_, &d)| d < C7_LINEAR_TOL)
        .last()
        .map(|(l, _)| *l)
        .unwrap_or(f64::INFINITY);
    let zero = [State::zeros(&spec.grid)];
    let to_zero = hausdorff_semidistance(&run.estimate().states, &zero, &spec.grid).unwrap();
    let linear_ok = run.converged && below_from <= deadline && to_zero < C7_LINEAR_TOL;

    let (_, nl) = nonlinear;
    let rep = nl.absorption.as_ref().unwrap();
    let bound = rep.empirical_factor * rep.set.radius_l;
    let late_inside = match rep.entry_lag {
        Some(entry) => nl
            .lags
            .iter()
            .zip(&rep.member_max)
            .filter(|(l, _)| **l >= entry)
            .all(|(_, m)| *m <= bound),
        None => false,
    };
    let nonlinear_ok = nl.converged && late_inside;
    verdict(
        linear_ok && nonlinear_ok,
        format!(
            "linear: converged {}, below {C7_LINEAR_TOL:e} from lag {below_from} (deadline {deadline}), d(A, {{0}}) {to_zero:.3e}; \
             nonlinear: converged {}, history {}, L {:.4}, factor {}, entry lag {:?}",
            run.converged,
            nl.converged,
            sci(&nl.semidistance_history),
            rep.set.radius_l,
            rep.empirical_factor,
            rep.entry_lag
        ),
    )
}

const C8_TOL: f64 = 1e-3;

fn periodicity() -> Verdict {
    let period = 4.0;
    let forcing = Forcing::Periodic {
        amplitude: 1.0,
        center: 0.0,
        width: 2.0,
        bias: 0.5,
        period,
    };
    let spec = ProblemSpec::new(physics(1.0, 1.0, 0.0, 0.5), cubic(), forcing, Grid::new(20.0, 401).unwrap()).unwrap();
    let lags = geometric_lags(4.0, 5);
    let family = BumpFamily::new(vec![-1.0, 1.0], 2.0);
    let opts = PullbackOptions {
        dt: 0.05,
        ..Default::default()
    };
    let runs: Vec<PullbackRun> = [0.0, period]
        .par_iter()
        .map(|&tau| estimate_attractor(tau, &family, &Quiet, &spec, &lags, C8_TOL, &opts).unwrap())
        .collect();
    let (a, b) = (&runs[0].estimate().states, &runs[1].estimate().states);
    let d = hausdorff_semidistance(a, b, &spec.grid)
        .unwrap()
        .max(hausdorff_semidistance(b, a, &spec.grid).unwrap());
    verdict(
        runs.iter().all(|r| r.converged) && d <= 2.0 * C8_TOL,
        format!("converged {:?}, d(A(0), A(T)) {d:.3e}", runs.iter().map(|r| r.converged).collect::<Vec<_>>()),
    )
}

const C9_REL_TOL: f64 = 1e-6;

fn tail_uniformity(nonlinear: &(ProblemSpec, PullbackRun)) -> Verdict {
    let (spec, run) = nonlinear;
    let grid = &spec.grid;
    let l = grid.half_width();
    let members = &run.estimate().uz;
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for s in members {
        let total = state_norm_sq(grid, s);
        worst = worst.max(tail_mass(s, 0.5 * l, grid).unwrap() / total);
        let mut prev = f64::INFINITY;
        for j in 1..200 {
            let m = tail_mass(s, l * j as f64 / 200.0, grid).unwrap();
            monotone &= m <= prev;
            prev = m;
        }
    }
    verdict(
        run.converged && worst < C9_REL_TOL && monotone,
        format!("{} members, worst tail fraction at K = L/2: {worst:.3e}, monotone {monotone}", members.len()),
    )
}

const C10_EXACT_TOL: f64 = 1e-10;
const C10_NOISE_TOL: f64 = 1e-6;

/// One-leg versus two-leg evolution in `(u, z)` form.
fn cocycle_gap(epsilon: f64) -> f64 {
    let spec = ProblemSpec::new(physics(1.0, 1.0, epsilon, 0.5), cubic(), pulse(0.8, 1.5), Grid::new(10.0, 201).unwrap()).unwrap();
    let (tau, s, t, dt) = (1.0, 2.0, 3.0, 0.01);
    let path = generate_wiener(99, -45.0, s + t + 1.0, 0.001).unwrap();
    let y = ou_from_integral(&path, 1.0, -2.0, s + t + 0.5, 1e-8).unwrap();
    let shifted_path = shift_path(&path, s).unwrap();
    let y_shift = ou_from_integral(&shifted_path, 1.0, -2.0, t + 0.5, 1e-8).unwrap();
    let (first, second): (Box<dyn Driver>, Box<dyn Driver>) = if epsilon == 0.0 {
        (Box::new(Quiet), Box::new(Quiet))
    } else {
        (Box::new(y), Box::new(y_shift))
    };
    let leg1 = Shifted { inner: first.as_ref(), offset: tau };
    let leg2 = Shifted { inner: second.as_ref(), offset: tau + s };

    let uz0 = State::from_fns(&spec.grid, |x| (-x * x / 2.0).exp(), |x| 0.3 * x * (-x * x).exp());
    let to_v = |uz: &State, y: f64| State::new(uz.u.clone(), v_from_z(&uz.u, &uz.v, y, epsilon)).unwrap();
    let to_z = |uv: &State, y: f64| State::new(uv.u.clone(), z_from_v(uv, y, epsilon)).unwrap();
    let run = |init: &State, a: f64, b: f64, d: &dyn Driver| {
        let steps = ((b - a) / dt).round() as usize;
        solve(init, a, b, dt, d, &spec, &SolveOptions::every(steps)).unwrap().last().clone()
    };

    let one = to_z(&run(&to_v(&uz0, leg1.y(tau)), tau, tau + s + t, &leg1), leg1.y(tau + s + t));
    let mid = to_z(&run(&to_v(&uz0, leg1.y(tau)), tau, tau + s, &leg1), leg1.y(tau + s));
    let two = to_z(&run(&to_v(&mid, leg2.y(tau + s)), tau + s, tau + s + t, &leg2), leg2.y(tau + s + t));
    rel_dist(&spec.grid, &two, &one)
}

fn cocycle_law() -> Verdict {
    let exact = cocycle_gap(0.0);
    let noisy = cocycle_gap(0.05);
    verdict(
        exact <= C10_EXACT_TOL && noisy <= C10_NOISE_TOL,
        format!("relative gap {exact:.3e} (eps = 0), {noisy:.3e} (eps = 0.05)"),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, budget_s: u64, run: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget_s);
        let pass = v.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {n:>2} {:<28} {}  [{:.1}s of {budget_s}s] {}",
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            v.detail
        );
    };
    report(1, "OU ergodicity", 60, &ou_ergodicity);
    report(2, "Omega_m coverage", 120, &omega_m_coverage);
    report(3, "linear modal oracle", 60, &linear_oracle);
    report(4, "energy identity order", 180, &energy_identity);
    report(5, "dissipativity", 60, &dissipativity);
    report(6, "absorbing radius", 30, &absorbing_closed_forms);
    let start = Instant::now();
    let nl = nonlinear_run();
    let shared = start.elapsed().as_secs();
    report(7, "pullback attraction", 600 - shared.min(600), &|| pullback_attraction(&nl));
    report(8, "periodicity", 600, &periodicity);
    report(9, "tail uniformity", 60, &|| tail_uniformity(&nl));
    report(10, "cocycle law", 60, &cocycle_law);
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
