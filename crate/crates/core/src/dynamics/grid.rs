use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Uniform 1-D grid on `[-L, L]`. The two end nodes carry the homogeneous
/// Dirichlet condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    half_width: f64,
    n_points: usize,
    dx: f64,
}

impl Grid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::precondition(format!(
                "grid needs at least 3 points, got {n_points}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::precondition(format!(
                "grid half width must be positive, got {half_width}"
            )));
        }
        Ok(Self {
            half_width,
            n_points,
            dx: 2.0 * half_width / (n_points - 1) as f64,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Node coordinate, computed symmetrically so that `x(i) == -x(n-1-i)`.
    pub fn x(&self, i: usize) -> f64 {
        let m = (self.n_points - 1) as f64;
        (2.0 * i as f64 - m) * self.half_width / m
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        i == 0 || i + 1 == self.n_points
    }

    /// Trapezoid rule for `∫ h(x_i) dx`.
    pub fn integrate(&self, mut h: impl FnMut(usize) -> f64) -> f64 {
        (0..self.n_points).map(|i| self.weight(i) * h(i)).sum()
    }
}

/// Grid function, one value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.n_points()])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Samples `f` at every node, boundary included.
    pub fn sample(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self(grid.nodes().map(f).collect())
    }

    /// Samples `f` and zeroes the two Dirichlet nodes.
    pub fn dirichlet(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let mut field = Self::sample(grid, f);
        field.apply_dirichlet();
        field
    }

    pub fn apply_dirichlet(&mut self) {
        if let Some(first) = self.0.first_mut() {
            *first = 0.0;
        }
        if let Some(last) = self.0.last_mut() {
            *last = 0.0;
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }

    /// `self + a·other`
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        Field(self.0.iter().zip(&other.0).map(|(x, y)| x + a * y).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Phase point `(u, v)` of the pathwise system.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            u: Field::zeros(grid),
            v: Field::zeros(grid),
        }
    }

    pub fn new(u: Field, v: Field) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::precondition(format!(
                "u and v lengths differ ({} vs {})",
                u.len(),
                v.len()
            )));
        }
        Ok(Self { u, v })
    }

    /// Builds a Dirichlet-compatible state from profiles.
    pub fn from_fns(grid: &Grid, u: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> Self {
        Self {
            u: Field::dirichlet(grid, u),
            v: Field::dirichlet(grid, v),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(node) = self.u.first_non_finite() {
            return Err(Error::NonFinite { field: "u", node });
        }
        if let Some(node) = self.v.first_non_finite() {
            return Err(Error::NonFinite { field: "v", node });
        }
        Ok(())
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.u.len() != grid.n_points() || self.v.len() != grid.n_points() {
            return Err(Error::precondition(format!(
                "state has {} nodes, grid has {}",
                self.u.len(),
                grid.n_points()
            )));
        }
        Ok(())
    }

    pub fn axpy(&self, a: f64, other: &State) -> State {
        State {
            u: self.u.axpy(a, &other.u),
            v: self.v.axpy(a, &other.v),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }
}
