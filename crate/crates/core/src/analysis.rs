//! Error decomposition and convergence measurements.
//!
//! The total error at `t_n` splits as `R = R^Q + R^ODE`:
//!
//! * `R^Q = ∫_0^∞ e^{-w} φ̂(w, t_n) dw - Σ a_k φ̂(x_k, t_n)` (quadrature only),
//! * `R^ODE = Σ a_k (φ̂(x_k, t_n) - φ̂_{k,n})` (time stepping only).
//!
//! The three terms are measured against independent oracles: `R` against the
//! Caputo definition, the integral in `R^Q` by nested adaptive quadrature,
//! and `φ̂(x_k, t_n)` from the explicit integral for `φ`. The identity
//! `R = R^Q + R^ODE` therefore holds only up to oracle error, which is what
//! makes it a check.

use rayon::prelude::*;

use crate::diffusive::{build_system, DerivativeProblem, DiffusiveSystem, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::logspace::{log_add_exp, LogMagnitude};
use crate::oracle::{
    self, brute_force_caputo, reference_quadrature, sampled_sup_norm, SUP_NORM_SAMPLES,
};
use crate::quadrature::{gauss_laguerre_rule, QuadratureRule};
use crate::steppers::{Evaluator, Method};

/// Error components at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    pub n: usize,
    pub t: f64,
    pub r_total: f64,
    pub r_q: f64,
    pub r_ode: f64,
    pub oracle_tol: f64,
}

impl ErrorDecomposition {
    /// `|R - (R^Q + R^ODE)|`.
    pub fn identity_gap(&self) -> f64 {
        (self.r_total - (self.r_q + self.r_ode)).abs()
    }
}

/// `Σ_k a_k e^{x_k} (f_-(k)/q + f_+(k)/(1-q))` with exact φ values, each node
/// evaluated so the whole sum is accurate to `tol`.
fn exact_node_values(
    problem: &DerivativeProblem,
    system: &DiffusiveSystem,
    t: f64,
    tol: f64,
) -> Result<Vec<(f64, f64)>> {
    let q = system.q();
    let spread = 1.0 / q + 1.0 / (1.0 - q);
    let k = system.len();
    (0..k)
        .map(|i| {
            let each = tol / (k as f64 * system.scaled_weight(i) * spread);
            oracle::phi_pair(problem, system.nodes()[i], t, each)
        })
        .collect()
}

fn weighted_sum(system: &DiffusiveSystem, pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let q = system.q();
    pairs
        .enumerate()
        .map(|(i, (m, p))| system.scaled_weight(i) * (m / q + p / (1.0 - q)))
        .sum()
}

fn check_truth_tol(truth_tol: f64) -> Result<()> {
    if !(oracle::MIN_TOL..=1e-8).contains(&truth_tol) {
        return Err(invalid(
            "truth_tol",
            format!(
                "must lie in [{:e}, 1e-8], got {truth_tol:e}",
                oracle::MIN_TOL
            ),
        ));
    }
    Ok(())
}

/// The numerical states `φ_{n}` at every grid point (index 0 is all zeros).
fn numerical_states(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    grid: &TimeGrid,
    method: Method,
) -> Result<Vec<Vec<f64>>> {
    if !grid.matches(problem) {
        return Err(invalid("grid", "grid does not span the problem interval"));
    }
    let mut eval = Evaluator::new(problem, rule, method)?;
    let mut states = Vec::with_capacity(grid.points().len());
    states.push(eval.state().phi.clone());
    for (n, &t) in grid.points().iter().enumerate().skip(1) {
        eval.advance(t, grid.step_to(n))?;
        states.push(eval.state().phi.clone());
    }
    Ok(states)
}

/// `R^ODE` at one point from the numerical state and exact node values.
fn ode_error(system: &DiffusiveSystem, state: &[f64], exact: &[(f64, f64)]) -> f64 {
    let k = system.len();
    let (minus, plus) = state.split_at(k);
    weighted_sum(
        system,
        exact
            .iter()
            .enumerate()
            .map(|(i, &(m, p))| (m - minus[i], p - plus[i])),
    )
}

/// Split the error of the scheme at every grid point into its quadrature
/// and time-stepping parts.
pub fn decompose_error(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    grid: &TimeGrid,
    method: Method,
    truth_tol: f64,
) -> Result<Vec<ErrorDecomposition>> {
    check_truth_tol(truth_tol)?;
    let system = build_system(problem, rule)?;
    let states = numerical_states(problem, rule, grid, method)?;
    grid.points()
        .par_iter()
        .zip(states.par_iter())
        .enumerate()
        .map(|(n, (&t, state))| {
            let approx = if n == 0 { 0.0 } else { system.assemble(state) };
            let exact = exact_node_values(problem, &system, t, 0.5 * truth_tol)?;
            let node_sum = weighted_sum(&system, exact.iter().copied());
            let diffusive = reference_quadrature(problem, t, 0.5 * truth_tol)?;
            let truth = brute_force_caputo(problem, t, truth_tol)?;
            Ok(ErrorDecomposition {
                n,
                t,
                r_total: truth - approx,
                r_q: diffusive - node_sum,
                r_ode: ode_error(&system, state, &exact),
                oracle_tol: truth_tol,
            })
        })
        .collect()
}

/// `R^ODE` alone at every grid point; avoids the expensive reference integral.
pub fn ode_error_profile(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    grid: &TimeGrid,
    method: Method,
    truth_tol: f64,
) -> Result<Vec<f64>> {
    check_truth_tol(truth_tol)?;
    let system = build_system(problem, rule)?;
    let states = numerical_states(problem, rule, grid, method)?;
    grid.points()
        .par_iter()
        .zip(states.par_iter())
        .map(|(&t, state)| {
            let exact = exact_node_values(problem, &system, t, truth_tol)?;
            Ok(ode_error(&system, state, &exact))
        })
        .collect()
}

/// `R^Q` at a single time for any (possibly truncated) rule.
pub fn quadrature_error(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    t: f64,
    truth_tol: f64,
) -> Result<f64> {
    check_truth_tol(truth_tol)?;
    let reference = reference_quadrature(problem, t, 0.5 * truth_tol)?;
    quadrature_error_against(problem, rule, t, reference, truth_tol)
}

fn quadrature_error_against(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    t: f64,
    reference: f64,
    truth_tol: f64,
) -> Result<f64> {
    let system = build_system(problem, rule)?;
    let exact = exact_node_values(problem, &system, t, 0.5 * truth_tol)?;
    Ok(reference - weighted_sum(&system, exact.into_iter()))
}

/// `sup |y^(m)|` and `sup |y^(m+1)|` over the problem interval: the exact
/// values when the problem carries them, otherwise a 10001-point sampling
/// estimate.
pub fn sup_norms(problem: &DerivativeProblem) -> Result<(f64, f64)> {
    if !problem.has_d_upper_plus() {
        return Err(Error::Unsupported(
            "the error constant needs y^(ceil(alpha)+1); none was supplied".into(),
        ));
    }
    if let Some(n) = problem.sup_norms() {
        return Ok((n.upper, n.upper_plus));
    }
    let (a, b) = (problem.a(), problem.end());
    let upper = sampled_sup_norm(|t| problem.d_upper(t), a, b, SUP_NORM_SAMPLES);
    let upper_plus = sampled_sup_norm(
        |t| problem.d_upper_plus(t).unwrap_or(f64::NAN),
        a,
        b,
        SUP_NORM_SAMPLES,
    );
    Ok((upper, upper_plus))
}

/// The backward-Euler constant
/// `C(K) = |sin απ|/(2π) e^{X q/(1-q)} (‖y^(m+1)‖ + 2 e^{X/(1-q)} ‖y^(m)‖)`,
/// `X` the largest node, assembled in log space.
pub fn ode_error_constant(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
) -> Result<LogMagnitude> {
    let (upper, upper_plus) = sup_norms(problem)?;
    if !(upper.is_finite() && upper_plus.is_finite()) {
        return Err(Error::Unsupported(format!(
            "derivative sup-norms are not finite (‖y^(m)‖ = {upper}, ‖y^(m+1)‖ = {upper_plus})"
        )));
    }
    let q = problem.q();
    let x = rule.max_node();
    let sine = (std::f64::consts::PI * q).sin();
    let inner = log_add_exp(
        upper_plus.ln(),
        std::f64::consts::LN_2 + x / (1.0 - q) + upper.ln(),
    );
    if inner == f64::NEG_INFINITY {
        return Ok(LogMagnitude::ZERO);
    }
    let ln = (sine / (2.0 * std::f64::consts::PI)).ln() + x * q / (1.0 - q) + inner;
    Ok(LogMagnitude::from_ln(ln))
}

/// `h exp((1+q)/(1-q) (4K+2))`, the step-size term of the combined error
/// estimate, in log form.
pub fn combined_ode_term(alpha: f64, nodes: usize, h: f64) -> Result<LogMagnitude> {
    let q = crate::diffusive::q_d(alpha)?;
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidStep(h));
    }
    Ok(LogMagnitude::from_ln(
        h.ln() + (1.0 + q) / (1.0 - q) * (4.0 * nodes as f64 + 2.0),
    ))
}

/// One resolution of the `|R^ODE| <= C(K) T h` check.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeBoundCheck {
    pub steps: usize,
    pub h: f64,
    pub max_abs_r_ode: f64,
    pub constant: LogMagnitude,
    /// `C(K) T h`, if it fits in an `f64`.
    pub bound: Option<f64>,
    /// `max |R^ODE| <= C T h` (up to oracle tolerance); `None` when the bound overflows.
    pub holds: Option<bool>,
    /// `|R^ODE(t_n)| <= C t_n h` at every point.
    pub holds_pointwise: Option<bool>,
}

impl OdeBoundCheck {
    /// `C T h / max |R^ODE|`.
    pub fn margin(&self) -> Option<f64> {
        self.bound.map(|b| b / self.max_abs_r_ode)
    }
}

/// Check the backward-Euler bound on uniform grids with `N` in `steps_list`.
pub fn verify_ode_error_bound(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    steps_list: &[usize],
    truth_tol: f64,
) -> Result<Vec<OdeBoundCheck>> {
    let constant = ode_error_constant(problem, rule)?;
    steps_list
        .iter()
        .map(|&steps| {
            let grid = TimeGrid::uniform(problem.a(), problem.length(), steps)?;
            let h = grid.step().expect("uniform grid");
            let profile =
                ode_error_profile(problem, rule, &grid, Method::BackwardEuler, truth_tol)?;
            let max_abs_r_ode = profile.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            let bound = constant.scale(problem.length() * h).to_f64();
            let (holds, holds_pointwise) = match constant.to_f64() {
                Some(c) => (
                    Some(max_abs_r_ode <= c * problem.length() * h + truth_tol),
                    Some(
                        grid.points()
                            .iter()
                            .zip(&profile)
                            .all(|(&t, r)| r.abs() <= c * (t - problem.a()) * h + truth_tol),
                    ),
                ),
                None => (None, None),
            };
            Ok(OdeBoundCheck {
                steps,
                h,
                max_abs_r_ode,
                constant,
                bound,
                holds: bound.and(holds),
                holds_pointwise: bound.and(holds_pointwise),
            })
        })
        .collect()
}

/// Least-squares fit of `ln err = slope ln x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub xs: Vec<f64>,
    pub errs: Vec<f64>,
    pub slope: f64,
    pub r2: f64,
}

pub fn fit_rate(xs: &[f64], errs: &[f64]) -> Result<RateFit> {
    if xs.len() != errs.len() {
        return Err(invalid("errs", "length differs from xs"));
    }
    if xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid("xs", "resolutions must be positive"));
    }
    let increasing = xs.windows(2).all(|p| p[0] < p[1]);
    let decreasing = xs.windows(2).all(|p| p[0] > p[1]);
    if !(increasing || decreasing) {
        return Err(invalid("xs", "resolutions must be strictly monotone"));
    }
    let (kept_x, kept_e): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(errs)
        .filter(|(x, &e)| {
            let ok = e > 0.0 && e.is_finite();
            if !ok {
                log::warn!("dropping error {e} at resolution {x} from rate fit");
            }
            ok
        })
        .map(|(&x, &e)| (x, e))
        .unzip();
    if kept_x.len() < 3 {
        return Err(Error::InsufficientData {
            usable: kept_x.len(),
            required: 3,
        });
    }
    let lx: Vec<f64> = kept_x.iter().map(|x| x.ln()).collect();
    let le: Vec<f64> = kept_e.iter().map(|e| e.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let me = le.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxe: f64 = lx.iter().zip(&le).map(|(x, e)| (x - mx) * (e - me)).sum();
    let see: f64 = le.iter().map(|e| (e - me).powi(2)).sum();
    let slope = sxe / sxx;
    let r2 = if see == 0.0 {
        1.0
    } else {
        (sxe * sxe) / (sxx * see)
    };
    Ok(RateFit {
        xs: kept_x,
        errs: kept_e,
        slope,
        r2,
    })
}

/// `|R^Q|` for a sequence of rule sizes at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDecay {
    /// `(K, |R^Q|)` in the order given.
    pub errors: Vec<(usize, f64)>,
    /// `(K, p_K)` with `p_K = ln(e_K / e_{2K}) / ln 2`, for each doubling whose
    /// errors both lie above the noise floor.
    pub local_orders: Vec<(usize, f64)>,
    /// `10 · truth_tol`; errors below it are oracle noise.
    pub noise_floor: f64,
}

pub fn quadrature_decay_study(
    problem: &DerivativeProblem,
    t: f64,
    k_list: &[usize],
    truth_tol: f64,
) -> Result<QuadratureDecay> {
    check_truth_tol(truth_tol)?;
    if k_list.windows(2).any(|p| p[0] >= p[1]) {
        return Err(invalid("K_list", "must be strictly increasing"));
    }
    let reference = reference_quadrature(problem, t, 0.5 * truth_tol)?;
    let errors = k_list
        .par_iter()
        .map(|&k| {
            let rule = gauss_laguerre_rule(k)?;
            Ok((
                k,
                quadrature_error_against(problem, &rule, t, reference, truth_tol)?.abs(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let noise_floor = 10.0 * truth_tol;
    let local_orders = errors
        .iter()
        .filter_map(|&(k, e)| {
            let (_, e2) = errors.iter().find(|(k2, _)| *k2 == 2 * k)?;
            (e > noise_floor && *e2 > noise_floor)
                .then(|| (k, (e / e2).ln() / std::f64::consts::LN_2))
        })
        .collect();
    Ok(QuadratureDecay {
        errors,
        local_orders,
        noise_floor,
    })
}

/// Largest `|exact - approx|` over grid points `n >= 1`.
pub fn max_grid_error<F>(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    grid: &TimeGrid,
    method: Method,
    k_star: Option<usize>,
    truth: F,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let values = crate::steppers::evaluate_derivative(problem, rule, grid, method, k_star)?;
    let errs = grid.points()[1..]
        .par_iter()
        .zip(values[1..].par_iter())
        .map(|(&t, &v)| Ok((truth(t)? - v).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}
