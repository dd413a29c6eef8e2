//! Ground truth for the scheme, computed without any Gauss–Laguerre machinery.
//!
//! * [`exact_phi`]: the auxiliary function from its explicit integral
//!   `φ(w, t) = c e^{w q} ∫_a^t y^(m)(τ) exp(-(t - τ) e^w) dτ`;
//! * [`reference_quadrature`]: the diffusive integral `∫_0^∞ e^{-w} φ̂(w, t) dw`
//!   by nested adaptive quadrature;
//! * [`brute_force_caputo`]: the Caputo definition, with the weak endpoint
//!   singularity removed by a change of variables.
//!
//! All three use the adaptive Gauss–Kronrod integrator in [`adaptive`].

pub mod adaptive;
pub mod corpus;

use statrs::function::gamma::gamma;

use crate::diffusive::{diffusive_coefficient, q_d, DerivativeProblem};
use crate::error::{invalid, Error, Result};
use adaptive::{integrate, DEFAULT_MAX_INTERVALS};

/// Boundary-layer width, in units of `e^{-w}`, kept by [`exact_phi`].
pub const BOUNDARY_LAYER_WIDTHS: f64 = 40.0;
pub const MIN_TOL: f64 = 1e-14;
pub const MAX_TOL: f64 = 1e-6;
/// Relative accuracy below which the inner integrals are not pushed.
const RELATIVE_FLOOR: f64 = 1e-14;
/// Points used to estimate sup-norms by sampling.
pub const SUP_NORM_SAMPLES: usize = 10_001;

fn check_tol(tol: f64) -> Result<()> {
    if (MIN_TOL..=MAX_TOL).contains(&tol) {
        Ok(())
    } else {
        Err(invalid(
            "tol",
            format!("must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {tol:e}"),
        ))
    }
}

fn check_time(problem: &DerivativeProblem, t: f64) -> Result<()> {
    let slack = 1e-12 * problem.length().max(1.0);
    if t.is_finite() && t >= problem.a() - slack && t <= problem.end() + slack {
        Ok(())
    } else {
        Err(invalid(
            "t",
            format!("{t} outside [{}, {}]", problem.a(), problem.end()),
        ))
    }
}

/// `max |f|` over `samples` equispaced points of `[lo, hi]`. An estimate, not a bound.
pub fn sampled_sup_norm<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, samples: usize) -> f64 {
    let samples = samples.max(2);
    let step = (hi - lo) / (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            let t = if i + 1 == samples {
                hi
            } else {
                lo + i as f64 * step
            };
            f(t).abs()
        })
        .fold(0.0, f64::max)
}

/// Integrate to absolute error `tol` after scaling by `exp(log_prefactor)`,
/// but never beyond a relative accuracy of `RELATIVE_FLOOR`.
fn adaptive_with_floor<F: Fn(f64) -> f64>(
    kernel: F,
    lo: f64,
    hi: f64,
    tol: f64,
    log_prefactor: f64,
) -> (adaptive::Integral, f64) {
    let rough = integrate(&kernel, lo, hi, f64::INFINITY, 1).value.abs();
    let target = (tol.ln() - log_prefactor).exp().max(RELATIVE_FLOOR * rough);
    (
        integrate(&kernel, lo, hi, target, DEFAULT_MAX_INTERVALS),
        target,
    )
}

/// `φ(w, t)` with an absolute error target `tol`; no range check on `tol`.
pub(crate) fn phi_value(problem: &DerivativeProblem, w: f64, t: f64, tol: f64) -> Result<f64> {
    let a = problem.a();
    if t <= a {
        return Ok(0.0);
    }
    let c = diffusive_coefficient(problem.alpha())?;
    let q = q_d(problem.alpha())?;
    // For w > 0 substitute u = (t - τ) e^w: the boundary layer at τ = t becomes
    // the fixed profile e^{-u}, clipped at u = 40 (τ = t - 40 e^{-w}).
    let (log_prefactor, result) = if w > 0.0 {
        let shrink = (-w).exp();
        let upper = BOUNDARY_LAYER_WIDTHS.min((t - a) / shrink);
        let kernel = |u: f64| problem.d_upper((t - u * shrink).max(a)) * (-u).exp();
        let log_prefactor = c.abs().ln() + w * (q - 1.0);
        (
            log_prefactor,
            adaptive_with_floor(kernel, 0.0, upper, tol, log_prefactor),
        )
    } else {
        let rate = w.exp();
        let kernel = |tau: f64| problem.d_upper(tau) * (-(t - tau) * rate).exp();
        let log_prefactor = c.abs().ln() + w * q;
        (
            log_prefactor,
            adaptive_with_floor(kernel, a, t, tol, log_prefactor),
        )
    };
    let (result, target) = result;
    if !result.value.is_finite() {
        return Err(Error::Oracle(format!(
            "non-finite φ integral at w = {w}, t = {t}"
        )));
    }
    if !result.converged && result.error > target * 10.0 {
        return Err(Error::Oracle(format!(
            "φ integral at w = {w}, t = {t} did not reach tolerance (error {:e}, target {target:e})",
            result.error
        )));
    }
    if result.value == 0.0 {
        return Ok(0.0);
    }
    let magnitude = (log_prefactor + result.value.abs().ln()).exp();
    Ok(magnitude * c.signum() * result.value.signum())
}

/// The auxiliary function `φ(w, t)` evaluated from its explicit integral.
///
/// For large `w` the integrand is a boundary layer of width `e^{-w}` at
/// `τ = t`; only `[max(a, t - 40 e^{-w}), t]` is integrated.
pub fn exact_phi(problem: &DerivativeProblem, w: f64, t: f64, tol: f64) -> Result<f64> {
    check_time(problem, t)?;
    check_tol(tol)?;
    if !w.is_finite() {
        return Err(invalid("w", "must be finite"));
    }
    phi_value(problem, w, t, tol)
}

/// `(φ(-x/q, t), φ(x/(1-q), t))`, each to absolute error `tol_each`.
pub(crate) fn phi_pair(
    problem: &DerivativeProblem,
    x: f64,
    t: f64,
    tol_each: f64,
) -> Result<(f64, f64)> {
    let q = problem.q();
    Ok((
        phi_value(problem, -x / q, t, tol_each)?,
        phi_value(problem, x / (1.0 - q), t, tol_each)?,
    ))
}

/// `φ̂(w, t) = e^w (φ(-w/q, t) / q + φ(w/(1-q), t) / (1-q))` from exact φ values.
pub fn exact_phi_hat(problem: &DerivativeProblem, w: f64, t: f64, tol: f64) -> Result<f64> {
    check_time(problem, t)?;
    check_tol(tol)?;
    if !(w >= 0.0 && w.is_finite()) {
        return Err(invalid("w", format!("must be nonnegative, got {w}")));
    }
    let q = problem.q();
    let each = 0.5 * tol * q.min(1.0 - q) * (-w).exp();
    let (minus, plus) = phi_pair(problem, w, t, each)?;
    Ok(w.exp() * (minus / q + plus / (1.0 - q)))
}

/// `D^alpha y(t)` as `∫_0^∞ e^{-w} φ̂(w, t) dw`, with estimated error at most `2 tol`.
///
/// The tail beyond `W` is bounded by `B e^{-W}` with
/// `B = |c| ‖y^(m)‖ ((t - a)/q + 1/(1 - q))`; `W` is chosen so this is `tol / 2`.
pub fn reference_quadrature(problem: &DerivativeProblem, t: f64, tol: f64) -> Result<f64> {
    check_time(problem, t)?;
    check_tol(tol)?;
    let a = problem.a();
    if t <= a {
        return Ok(0.0);
    }
    let q = problem.q();
    let c = diffusive_coefficient(problem.alpha())?;
    let sup = match problem.sup_norms() {
        Some(n) => n.upper,
        None => 2.0 * sampled_sup_norm(|s| problem.d_upper(s), a, t, 1001),
    };
    if !sup.is_finite() {
        return Err(Error::Oracle(format!(
            "sup-norm of y^(m) on [{a}, {t}] is not finite"
        )));
    }
    let bound = c.abs() * sup * ((t - a) / q + 1.0 / (1.0 - q));
    if bound == 0.0 {
        return Ok(0.0);
    }
    let w_max = (bound / (0.5 * tol)).ln().max(1.0);
    // inner errors contribute at most w_max * 2 δ / min(q, 1-q) = tol / 20
    let inner = tol * q.min(1.0 - q) / (40.0 * w_max);

    let failure = std::cell::RefCell::new(None);
    let integrand = |w: f64| match phi_pair(problem, w, t, inner) {
        Ok((minus, plus)) => minus / q + plus / (1.0 - q),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let result = integrate(integrand, 0.0, w_max, 0.5 * tol, DEFAULT_MAX_INTERVALS);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if !result.converged || !result.value.is_finite() {
        return Err(Error::Oracle(format!(
            "diffusive integral at t = {t} did not converge (error {:e})",
            result.error
        )));
    }
    Ok(result.value)
}

/// Caputo derivative from its definition
/// `(1/Γ(m-α)) ∫_a^t (t-τ)^{m-α-1} y^(m)(τ) dτ`.
///
/// With `β = m - α` and `τ = t - σ^{1/β}` this becomes
/// `(1/Γ(β+1)) ∫_0^{(t-a)^β} y^(m)(t - σ^{1/β}) dσ`, which has no singularity.
pub fn brute_force_caputo(problem: &DerivativeProblem, t: f64, tol: f64) -> Result<f64> {
    check_time(problem, t)?;
    check_tol(tol)?;
    let a = problem.a();
    if t <= a {
        return Ok(0.0);
    }
    let beta = problem.derivative_order() as f64 - problem.alpha();
    let inv_beta = 1.0 / beta;
    let upper = (t - a).powf(beta);
    let norm = gamma(beta + 1.0);
    let integrand = |sigma: f64| problem.d_upper((t - sigma.powf(inv_beta)).max(a));
    let result = integrate(integrand, 0.0, upper, tol * norm, DEFAULT_MAX_INTERVALS);
    if !result.converged || !result.value.is_finite() {
        return Err(Error::Oracle(format!(
            "Caputo integral at t = {t} did not converge (error {:e})",
            result.error
        )));
    }
    Ok(result.value / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn unit_forcing(alpha: f64) -> DerivativeProblem {
        DerivativeProblem::new(alpha, 0.0, 1.0, |_| 1.0).unwrap()
    }

    /// `c e^{w(q-1)} (1 - exp(-(t-a) e^w))` for constant forcing 1.
    fn analytic_phi(alpha: f64, w: f64, dt: f64) -> f64 {
        let q = q_d(alpha).unwrap();
        let c = diffusive_coefficient(alpha).unwrap();
        c * (w * (q - 1.0)).exp() * (-(-dt * w.exp()).exp_m1())
    }

    #[test]
    fn phi_vanishes_at_start() {
        let p = unit_forcing(0.5);
        for w in [-30.0, 0.0, 30.0] {
            assert_eq!(exact_phi(&p, w, 0.0, 1e-12).unwrap(), 0.0);
        }
    }

    #[test]
    fn phi_constant_forcing_at_zero_exponent() {
        let p = unit_forcing(0.5);
        let v = exact_phi(&p, 0.0, 1.0, 1e-13).unwrap();
        let expect = (1.0 - (-1f64).exp()) / PI;
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        assert!((expect - 0.201_209_8).abs() < 5e-7);
    }

    #[test]
    fn phi_matches_analytic_form_over_wide_exponent_range() {
        for alpha in [0.3, 0.5, 1.7] {
            let p = unit_forcing(alpha);
            let mut w = -40.0;
            while w <= 60.0 {
                let v = exact_phi(&p, w, 0.8, 1e-14).unwrap();
                let expect = analytic_phi(alpha, w, 0.8);
                assert!(
                    (v - expect).abs() <= 1e-13 + 1e-11 * expect.abs(),
                    "alpha={alpha} w={w}: {v} vs {expect}"
                );
                w += 2.5;
            }
        }
    }

    #[test]
    fn phi_decay_ratio_between_20_and_25() {
        let p = unit_forcing(0.5);
        let r = exact_phi(&p, 25.0, 1.0, 1e-14).unwrap() / exact_phi(&p, 20.0, 1.0, 1e-14).unwrap();
        let expect = (-0.5f64 * 5.0).exp();
        assert!((r / expect - 1.0).abs() < 0.05);
    }

    #[test]
    fn phi_hat_examples() {
        let p = unit_forcing(0.5);
        assert_eq!(exact_phi_hat(&p, 1.0, 0.0, 1e-12).unwrap(), 0.0);
        let at_zero = exact_phi_hat(&p, 0.0, 1.0, 1e-12).unwrap();
        let phi0 = exact_phi(&p, 0.0, 1.0, 1e-14).unwrap();
        assert!((at_zero - 4.0 * phi0).abs() < 1e-11);
        let v = exact_phi_hat(&p, 1.0, 1.0, 1e-12).unwrap();
        let expect = E * (2.0 * analytic_phi(0.5, -2.0, 1.0) + 2.0 * analytic_phi(0.5, 2.0, 1.0));
        assert!((v - expect).abs() < 1e-11, "{v} vs {expect}");
        assert!(exact_phi_hat(&p, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn argument_validation() {
        let p = unit_forcing(0.5);
        assert!(exact_phi(&p, 0.0, 1.5, 1e-10).is_err());
        assert!(exact_phi(&p, 0.0, -0.1, 1e-10).is_err());
        assert!(exact_phi(&p, 0.0, 0.5, 1e-3).is_err());
        assert!(exact_phi(&p, 0.0, 0.5, 1e-16).is_err());
        assert!(brute_force_caputo(&p, 2.0, 1e-10).is_err());
        assert!(reference_quadrature(&p, 0.5, 0.0).is_err());
    }

    #[test]
    fn caputo_of_identity() {
        let p = unit_forcing(0.5);
        let expect = 2.0 / PI.sqrt();
        assert!((brute_force_caputo(&p, 1.0, 1e-12).unwrap() - expect).abs() < 1e-11);
        assert!((reference_quadrature(&p, 1.0, 1e-10).unwrap() - expect).abs() < 1e-8);
    }

    #[test]
    fn caputo_of_square() {
        let p = DerivativeProblem::new(0.5, 0.0, 1.0, |t| 2.0 * t).unwrap();
        let expect = 2.0 / gamma(2.5);
        assert!((expect - 1.504_505_6).abs() < 1e-7);
        assert!((brute_force_caputo(&p, 1.0, 1e-12).unwrap() - expect).abs() < 1e-11);
    }

    #[test]
    fn zero_forcing_gives_zero_everywhere() {
        let p = DerivativeProblem::new(0.4, 0.0, 1.0, |_| 0.0).unwrap();
        assert_eq!(reference_quadrature(&p, 0.7, 1e-10).unwrap(), 0.0);
        assert_eq!(brute_force_caputo(&p, 0.7, 1e-10).unwrap(), 0.0);
        assert_eq!(exact_phi(&p, 3.0, 0.7, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn sampled_norm() {
        assert!((sampled_sup_norm(|t: f64| t.sin(), 0.0, PI, 10_001) - 1.0).abs() < 1e-7);
        assert_eq!(sampled_sup_norm(|t| t, 0.0, 2.0, 3), 2.0);
    }
}
