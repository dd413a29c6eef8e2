//! Test functions with hand-written derivatives, shifted to start at `a`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::diffusive::{DerivativeProblem, SupNorms, TimeFn};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Constant,
    /// `(t - a)^p`
    Power(f64),
    /// `exp(t - a)`
    Exp,
    /// `sin(t - a)`
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub name: &'static str,
    pub shape: Shape,
}

pub const CORPUS: [TestFunction; 7] = [
    TestFunction {
        name: "const",
        shape: Shape::Constant,
    },
    TestFunction {
        name: "pow1",
        shape: Shape::Power(1.0),
    },
    TestFunction {
        name: "pow2",
        shape: Shape::Power(2.0),
    },
    TestFunction {
        name: "pow3",
        shape: Shape::Power(3.0),
    },
    TestFunction {
        name: "pow2.5",
        shape: Shape::Power(2.5),
    },
    TestFunction {
        name: "exp",
        shape: Shape::Exp,
    },
    TestFunction {
        name: "sin",
        shape: Shape::Sin,
    },
];

pub fn by_name(name: &str) -> Option<TestFunction> {
    CORPUS.iter().copied().find(|f| f.name == name)
}

/// Names of the corpus entries that are `C^∞` on the closed interval.
pub fn smooth_names() -> impl Iterator<Item = &'static str> {
    CORPUS
        .iter()
        .filter(|f| !matches!(f.shape, Shape::Power(p) if p.fract() != 0.0))
        .map(|f| f.name)
}

fn falling_factorial(p: f64, j: u32) -> f64 {
    (0..j).map(|i| p - i as f64).product()
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0
}

impl TestFunction {
    /// `y^(order)` as a function of absolute time.
    pub fn derivative(&self, order: u32, a: f64) -> TimeFn {
        match self.shape {
            Shape::Constant => {
                if order == 0 {
                    Arc::new(|_| 1.0)
                } else {
                    Arc::new(|_| 0.0)
                }
            }
            Shape::Power(p) => {
                if is_integer(p) && order as f64 > p {
                    return Arc::new(|_| 0.0);
                }
                let coef = falling_factorial(p, order);
                let e = p - order as f64;
                Arc::new(move |t: f64| coef * (t - a).max(0.0).powf(e))
            }
            Shape::Exp => Arc::new(move |t: f64| (t - a).exp()),
            Shape::Sin => {
                let shift = order as f64 * FRAC_PI_2;
                Arc::new(move |t: f64| (t - a + shift).sin())
            }
        }
    }

    /// Closed-form `D^alpha y(t)` where one is known.
    pub fn exact_caputo(&self, alpha: f64, a: f64, t: f64) -> Option<f64> {
        let m = alpha.ceil();
        let s = t - a;
        match self.shape {
            Shape::Constant => Some(0.0),
            Shape::Power(p) if is_integer(p) && p < m => Some(0.0),
            Shape::Power(p) if p > m - 1.0 => {
                if s <= 0.0 {
                    return Some(0.0);
                }
                Some(gamma(p + 1.0) / gamma(p + 1.0 - alpha) * s.powf(p - alpha))
            }
            _ => None,
        }
    }

    /// Exact `sup |y^(order)|` on `[a, a + T]`, where trivial.
    pub fn exact_sup_norm(&self, order: u32, length: f64) -> Option<f64> {
        match self.shape {
            Shape::Constant => Some(if order == 0 { 1.0 } else { 0.0 }),
            Shape::Power(p) => {
                if is_integer(p) && order as f64 > p {
                    Some(0.0)
                } else if p - order as f64 >= 0.0 {
                    Some(falling_factorial(p, order).abs() * length.powf(p - order as f64))
                } else {
                    Some(f64::INFINITY)
                }
            }
            Shape::Exp => Some(length.exp()),
            Shape::Sin => None,
        }
    }

    /// The derivative problem for this function, with `y^(m+1)` attached and
    /// exact sup-norms when available.
    pub fn problem(&self, alpha: f64, a: f64, length: f64) -> Result<DerivativeProblem> {
        let m = alpha.ceil() as u32;
        let mut problem = DerivativeProblem::from_shared(alpha, a, length, self.derivative(m, a))?
            .with_shared_next_derivative(self.derivative(m + 1, a));
        if let (Some(upper), Some(upper_plus)) = (
            self.exact_sup_norm(m, length),
            self.exact_sup_norm(m + 1, length),
        ) {
            problem = problem.with_sup_norms(SupNorms { upper, upper_plus });
        }
        Ok(problem)
    }
}
