//! Smooth test functions `h` with polynomial growth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm_sq;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `x_i`
    Coordinate { index: usize },
    /// `‖x‖²`
    SquaredNorm,
    /// `exp(−‖x − c‖²/(2w²))`
    SmoothBump { center: Vec<f64>, width: f64 },
    /// `Σ_j coeffs[j]·x_i^j`, degree at most 4.
    Polynomial { index: usize, coeffs: Vec<f64> },
}

impl TestFunction {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TestFunction::Coordinate { index } | TestFunction::Polynomial { index, .. } if *index >= dim => {
                Err(Error::Input(format!("test function index {index} out of range for dimension {dim}")))
            }
            TestFunction::Polynomial { coeffs, .. } if coeffs.is_empty() || coeffs.len() > 5 => {
                Err(Error::Input("polynomial test function needs 1 to 5 coefficients".into()))
            }
            TestFunction::SmoothBump { center, width } => {
                if center.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: center.len(),
                    });
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::Input("smooth bump width must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Coordinate { index } => x[*index],
            TestFunction::SquaredNorm => norm_sq(x),
            TestFunction::SmoothBump { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
            TestFunction::Polynomial { index, coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x[*index] + c)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Coordinate { index } => format!("x{index}"),
            TestFunction::SquaredNorm => "sq_norm".into(),
            TestFunction::SmoothBump { .. } => "bump".into(),
            TestFunction::Polynomial { index, .. } => format!("poly_x{index}"),
        }
    }

    /// Every coordinate, the squared norm, and a bump of width ½ centred at
    /// `(½, …, ½)`.
    pub fn default_set(dim: usize) -> Vec<TestFunction> {
        let mut set: Vec<_> = (0..dim).map(|index| TestFunction::Coordinate { index }).collect();
        set.push(TestFunction::SquaredNorm);
        set.push(TestFunction::SmoothBump {
            center: vec![0.5; dim],
            width: 0.5,
        });
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluations() {
        let x = [1.0, -2.0];
        assert_eq!(TestFunction::Coordinate { index: 1 }.eval(&x), -2.0);
        assert_eq!(TestFunction::SquaredNorm.eval(&x), 5.0);
        let bump = TestFunction::SmoothBump {
            center: vec![1.0, -2.0],
            width: 0.3,
        };
        assert_eq!(bump.eval(&x), 1.0);
        let p = TestFunction::Polynomial {
            index: 0,
            coeffs: vec![1.0, 2.0, 0.0, 0.0, 1.0],
        };
        assert_eq!(p.eval(&[2.0]), 1.0 + 4.0 + 16.0);
    }

    #[test]
    fn validation() {
        assert!(TestFunction::Coordinate { index: 2 }.validate(2).is_err());
        assert!(TestFunction::Polynomial {
            index: 0,
            coeffs: vec![0.0; 6]
        }
        .validate(1)
        .is_err());
        for h in TestFunction::default_set(3) {
            h.validate(3).unwrap();
        }
        assert_eq!(TestFunction::default_set(2).len(), 4);
    }
}
