//! Fixtures shared by the benchmarks.

use pullwave_core::dynamics::{make_power_nonlinearity, Forcing, Grid, Physics, ProblemSpec, State};

/// Cubic damped wave problem with a Gaussian pulse on `n` nodes over `[-20, 20]`.
pub fn cubic_problem(n: usize, epsilon: f64) -> ProblemSpec {
    let physics = Physics {
        alpha: 1.0,
        lambda: 1.0,
        epsilon,
        delta: 0.5,
    };
    let forcing = Forcing::GaussianPulse {
        amplitude: 1.0,
        center: 0.0,
        width: 2.0,
    };
    let nonlinearity = make_power_nonlinearity(3.0, 1.0).expect("valid exponent");
    ProblemSpec::new(physics, nonlinearity, forcing, Grid::new(20.0, n).expect("valid grid"))
        .expect("valid problem")
}

pub fn bump(grid: &Grid, amplitude: f64) -> State {
    State::from_fns(grid, |x| amplitude * (-x * x / 4.0).exp(), |x| -0.1 * x * (-x * x / 4.0).exp())
}

/// `count` distinct states scaled from one bump.
pub fn state_set(grid: &Grid, count: usize) -> Vec<State> {
    (0..count).map(|j| bump(grid, 0.5 + 0.1 * j as f64)).collect()
}
