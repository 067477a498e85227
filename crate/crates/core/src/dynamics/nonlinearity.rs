use crate::error::{Error, Result};

fn zero_profile(_x: f64) -> f64 {
    0.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NonlinearityKind {
    /// `f(x,u) = a|u|^{γ−1}u`
    Power { gamma: f64, a: f64 },
    /// `f ≡ 0`, the linear wave equation.
    Zero,
}

/// Nonlinearity `f` with antiderivative `F` and the constants certifying the
/// growth, coercivity and lower-bound conditions
///
/// ```text
/// |f(x,u)| ≤ c₁|u|^γ + φ₁(x)
/// f(x,u)u − c₂F(x,u) ≥ φ₂(x)
/// F(x,u) ≥ c₃|u|^{γ+1} − φ₃(x)
/// ```
///
/// `c2`/`c3` are `None` when the corresponding inequality carries no
/// information (the linear case).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    pub gamma: f64,
    pub c1: f64,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub phi: [fn(f64) -> f64; 3],
}

pub fn make_power_nonlinearity(gamma: f64, a: f64) -> Result<Nonlinearity> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::Constraint {
            constraint: "f1",
            detail: format!("growth exponent gamma must be >= 1, got {gamma}"),
        });
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Constraint {
            constraint: "f1",
            detail: format!("amplitude a must be positive, got {a}"),
        });
    }
    Ok(Nonlinearity {
        kind: NonlinearityKind::Power { gamma, a },
        gamma,
        c1: a,
        c2: Some(gamma + 1.0),
        c3: Some(a / (gamma + 1.0)),
        phi: [zero_profile; 3],
    })
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Zero,
            gamma: 1.0,
            c1: 0.0,
            c2: None,
            c3: None,
            phi: [zero_profile; 3],
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Zero)
    }

    #[inline]
    pub fn f(&self, _x: f64, u: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Power { gamma, a } => {
                if gamma == 3.0 {
                    a * u * u * u
                } else if gamma == 1.0 {
                    a * u
                } else {
                    a * u.abs().powf(gamma - 1.0) * u
                }
            }
        }
    }

    #[inline]
    pub fn antiderivative(&self, _x: f64, u: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Power { gamma, a } => {
                if gamma == 3.0 {
                    let u2 = u * u;
                    0.25 * a * u2 * u2
                } else {
                    a * u.abs().powf(gamma + 1.0) / (gamma + 1.0)
                }
            }
        }
    }

    pub fn phi1(&self, x: f64) -> f64 {
        (self.phi[0])(x)
    }

    pub fn phi2(&self, x: f64) -> f64 {
        (self.phi[1])(x)
    }

    pub fn phi3(&self, x: f64) -> f64 {
        (self.phi[2])(x)
    }
}
