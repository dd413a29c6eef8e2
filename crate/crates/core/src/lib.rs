//! Caputo fractional derivatives through a diffusive representation.
//!
//! `D^alpha y(t)` is written as an integral over an auxiliary variable `w` of
//! functions `φ(w, t)` that each solve a scalar linear ODE driven by
//! `y^(ceil(alpha))`. The integral is discretised with a K-point
//! Gauss–Laguerre rule and the 2K ODEs are advanced with an A-stable one-step
//! method, so the cost is `O(N K)` time and `O(K)` memory for `N` output points.
//!
//! ```
//! use diffrep_core::{evaluate_derivative, gauss_laguerre_rule, DerivativeProblem, Method, TimeGrid};
//!
//! // y(t) = t on [0, 1]; its half derivative at t = 1 is 2 / sqrt(pi)
//! let problem = DerivativeProblem::new(0.5, 0.0, 1.0, |_| 1.0).unwrap();
//! let rule = gauss_laguerre_rule(30).unwrap();
//! let grid = TimeGrid::uniform(0.0, 1.0, 2000).unwrap();
//! let values = evaluate_derivative(&problem, &rule, &grid, Method::BackwardEuler, None).unwrap();
//! assert!((values[2000] - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-2);
//! ```

pub mod analysis;
pub mod diffusive;
pub mod error;
pub mod logspace;
pub mod oracle;
pub mod quadrature;
pub mod steppers;

pub use analysis::{decompose_error, fit_rate, ode_error_constant, ErrorDecomposition, RateFit};
pub use diffusive::{build_system, q_d, DerivativeProblem, DiffusiveSystem, TimeGrid};
pub use error::{Error, Result};
pub use logspace::LogMagnitude;
pub use quadrature::{gauss_laguerre_rule, truncate_rule, QuadratureRule};
pub use steppers::{evaluate_derivative, Method, SolverState};
