//! Changes of variable between `(u, u_t)`, `(u, z)` and `(u, v)`:
//! `z = u_t + δu` and `v = z − εy u`.

use super::grid::{Field, State};

/// `z = v + ε·y·u`
pub fn z_from_v(state: &State, y: f64, epsilon: f64) -> Field {
    let ey = epsilon * y;
    Field::from_vec(state.v.iter().zip(state.u.iter()).map(|(v, u)| v + ey * u).collect())
}

/// `v = z − ε·y·u`
pub fn v_from_z(u: &Field, z: &Field, y: f64, epsilon: f64) -> Field {
    let ey = epsilon * y;
    Field::from_vec(z.iter().zip(u.iter()).map(|(z, u)| z - ey * u).collect())
}

/// `u_t = z − δu`
pub fn ut_from_z(u: &Field, z: &Field, delta: f64) -> Field {
    Field::from_vec(z.iter().zip(u.iter()).map(|(z, u)| z - delta * u).collect())
}
