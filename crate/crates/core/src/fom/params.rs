//! Model parameters, fixed constants and initial shape functions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Osmotic coefficient. It is tied to the other constants of the model, so
/// it is not a parameter.
pub const GAMMA: f64 = 0.1;
/// External concentration.
pub const U_EXT: f64 = 0.0;
/// Initial concentration (homogeneous).
pub const U_INIT: f64 = 1.0;

/// `μ = (α, β, δ_1, …, δ_L)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector<T> {
    /// Diffusivity.
    pub alpha: T,
    /// Surface tension.
    pub beta: T,
    /// Shape coefficients, one per shape function.
    pub delta: Vec<T>,
}

impl<T: Scalar> ParameterVector<T> {
    pub fn new(alpha: T, beta: T, delta: Vec<T>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > T::zero()) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta.is_finite() && beta > T::zero()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config("shape coefficients must be finite".into()));
        }
        Ok(ParameterVector { alpha, beta, delta })
    }

    /// Flat representation `(α, β, δ…)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = vec![self.alpha, self.beta];
        v.extend_from_slice(&self.delta);
        v
    }

    pub fn from_slice(v: &[T]) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::Config("parameter vector needs alpha and beta".into()));
        }
        Self::new(v[0], v[1], v[2..].to_vec())
    }
}

/// Axis-aligned parameter box.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterDomain {
    /// `(low, high)` per parameter in the order `(α, β, δ…)`.
    pub bounds: Vec<(f64, f64)>,
}

impl ParameterDomain {
    /// `[0.1, 1] × [0.001, 0.1] × [0, 1]²`.
    pub fn standard() -> Self {
        ParameterDomain {
            bounds: vec![(0.1, 1.0), (0.001, 0.1), (0.0, 1.0), (0.0, 1.0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim() && mu.iter().zip(&self.bounds).all(|(&x, &(lo, hi))| lo <= x && x <= hi)
    }
}

/// Shape functions perturbing the initial boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `r1(x) = exp(-θ²) x`, a bump towards angle zero.
    Bump,
    /// `r2(x) = 0.1 sin(10 θ) x`, a ten-fold wave.
    Wave,
}

impl Shape {
    pub fn standard() -> Vec<Shape> {
        vec![Shape::Bump, Shape::Wave]
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Bump => "bump",
            Shape::Wave => "wave",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "bump" => Some(Shape::Bump),
            "wave" => Some(Shape::Wave),
            _ => None,
        }
    }

    /// Displacement at `x`; `θ = atan2(x2, x1) ∈ (-π, π]`.
    pub fn eval<T: Scalar>(self, x: [T; 2]) -> [T; 2] {
        let theta = x[1].atan2(x[0]);
        let s = match self {
            Shape::Bump => (-theta * theta).exp(),
            Shape::Wave => T::lit(0.1) * (T::lit(10.0) * theta).sin(),
        };
        [s * x[0], s * x[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_at_angle_zero() {
        let r = Shape::Bump.eval([1.0f64, 0.0]);
        assert_eq!(r, [1.0, 0.0]);
        let w = Shape::Wave.eval([1.0f64, 0.0]);
        assert!(w[0].abs() < 1e-15 && w[1].abs() < 1e-15);
    }

    #[test]
    fn bump_is_small_opposite() {
        let r = Shape::Bump.eval([-1.0f64, 0.0]);
        let e = (-std::f64::consts::PI * std::f64::consts::PI).exp();
        assert!((r[0] + e).abs() < 1e-15);
    }

    #[test]
    fn parameter_validation() {
        assert!(ParameterVector::new(0.0, 0.1, vec![]).is_err());
        assert!(ParameterVector::new(0.1, -1.0, vec![]).is_err());
        assert!(ParameterVector::new(0.1, 0.1, vec![f64::NAN]).is_err());
        let mu = ParameterVector::new(0.1, 0.1, vec![1.0, 0.5]).unwrap();
        assert_eq!(ParameterVector::from_slice(&mu.to_vec()).unwrap(), mu);
        assert!(ParameterDomain::standard().contains(&[0.1, 0.001, 0.0, 0.0]));
    }
}
