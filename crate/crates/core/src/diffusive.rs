//! Problem description and the diffusive system built from it.
//!
//! For a Caputo derivative of order `alpha`, the auxiliary functions
//! `phi(w, t)` solve
//!
//! ```text
//! d/dt phi(w, t) = -e^w phi(w, t) + c e^{w q} y^(m)(t),   phi(w, a) = 0,
//! ```
//!
//! with `m = ceil(alpha)`, `q = alpha - m + 1` and
//! `c = (-1)^floor(alpha) sin(alpha pi) / pi`. The Gauss–Laguerre nodes `x_k`
//! are mapped to the two node sets `-x_k / q` and `x_k / (1 - q)`.

use std::f64::consts::{LN_10, PI};
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::QuadratureRule;

/// Orders closer than this to an integer are rejected.
pub const INTEGER_ORDER_TOL: f64 = 1e-12;

/// A real function of time, shareable across threads.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Known sup-norms of `y^(m)` and `y^(m+1)` on the problem interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNorms {
    pub upper: f64,
    pub upper_plus: f64,
}

/// What to differentiate: the order, the interval `[a, a + T]` and the
/// caller-supplied derivative `y^(ceil(alpha))` (optionally also the next one).
#[derive(Clone)]
pub struct DerivativeProblem {
    alpha: f64,
    a: f64,
    length: f64,
    d_upper: TimeFn,
    d_upper_plus: Option<TimeFn>,
    sup_norms: Option<SupNorms>,
}

impl fmt::Debug for DerivativeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DerivativeProblem")
            .field("alpha", &self.alpha)
            .field("a", &self.a)
            .field("length", &self.length)
            .field("has_d_upper_plus", &self.d_upper_plus.is_some())
            .field("sup_norms", &self.sup_norms)
            .finish()
    }
}

fn check_order(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 || (alpha - alpha.round()).abs() <= INTEGER_ORDER_TOL {
        return Err(Error::InvalidOrder(alpha));
    }
    Ok(())
}

impl DerivativeProblem {
    pub fn new<F>(alpha: f64, a: f64, length: f64, d_upper: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_shared(alpha, a, length, Arc::new(d_upper))
    }

    pub fn from_shared(alpha: f64, a: f64, length: f64, d_upper: TimeFn) -> Result<Self> {
        check_order(alpha)?;
        if !a.is_finite() {
            return Err(invalid("a", format!("must be finite, got {a}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("T", format!("must be positive, got {length}")));
        }
        Ok(Self {
            alpha,
            a,
            length,
            d_upper,
            d_upper_plus: None,
            sup_norms: None,
        })
    }

    /// Attach `y^(ceil(alpha) + 1)`, needed for the backward-Euler error constant.
    pub fn with_next_derivative<F>(mut self, d_upper_plus: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.d_upper_plus = Some(Arc::new(d_upper_plus));
        self
    }

    pub fn with_shared_next_derivative(mut self, d_upper_plus: TimeFn) -> Self {
        self.d_upper_plus = Some(d_upper_plus);
        self
    }

    pub fn with_sup_norms(mut self, norms: SupNorms) -> Self {
        self.sup_norms = Some(norms);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn end(&self) -> f64 {
        self.a + self.length
    }

    /// `ceil(alpha)`, the order of the supplied derivative.
    pub fn derivative_order(&self) -> u32 {
        self.alpha.ceil() as u32
    }

    pub fn q(&self) -> f64 {
        self.alpha - self.alpha.ceil() + 1.0
    }

    pub fn d_upper(&self, t: f64) -> f64 {
        (self.d_upper)(t)
    }

    /// `y^(m)(t)`, rejecting non-finite values.
    pub fn forcing(&self, t: f64) -> Result<f64> {
        let value = (self.d_upper)(t);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Evaluation { t, value })
        }
    }

    pub fn d_upper_plus(&self, t: f64) -> Option<f64> {
        self.d_upper_plus.as_ref().map(|f| f(t))
    }

    pub fn has_d_upper_plus(&self) -> bool {
        self.d_upper_plus.is_some()
    }

    pub fn sup_norms(&self) -> Option<SupNorms> {
        self.sup_norms
    }

    /// The same problem with a different derivative function.
    pub fn with_forcing(&self, d_upper: TimeFn) -> Self {
        Self {
            d_upper,
            d_upper_plus: None,
            sup_norms: None,
            ..self.clone()
        }
    }
}

/// `q_D = alpha - ceil(alpha) + 1`, in `(0, 1)`.
pub fn q_d(alpha: f64) -> Result<f64> {
    check_order(alpha)?;
    Ok(alpha - alpha.ceil() + 1.0)
}

/// `(-1)^floor(alpha) sin(alpha pi) / pi`.
///
/// Equal to `sin(q pi) / pi`, which is what is evaluated: it avoids the
/// cancellation in `sin(alpha pi)` for large `alpha`.
pub fn diffusive_coefficient(alpha: f64) -> Result<f64> {
    let q = q_d(alpha)?;
    Ok((q * PI).sin() / PI)
}

/// Output grid `a = t_0 < t_1 < ... < t_N = a + T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    step: Option<f64>,
}

impl TimeGrid {
    pub fn uniform(a: f64, length: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("N", "need at least one step"));
        }
        if !(length.is_finite() && length > 0.0) || !a.is_finite() {
            return Err(invalid("T", format!("must be positive, got {length}")));
        }
        let h = length / steps as f64;
        let mut points: Vec<f64> = (0..steps).map(|n| a + n as f64 * h).collect();
        points.push(a + length);
        Ok(Self {
            points,
            step: Some(h),
        })
    }

    /// `t_n = a + T (n / N)^exponent`; clusters points near `a` for `exponent > 1`.
    pub fn graded(a: f64, length: f64, steps: usize, exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(invalid(
                "grid",
                format!("grading exponent must be positive, got {exponent}"),
            ));
        }
        if exponent == 1.0 {
            return Self::uniform(a, length, steps);
        }
        if steps == 0 {
            return Err(invalid("N", "need at least one step"));
        }
        let n = steps as f64;
        let mut points: Vec<f64> = (0..steps)
            .map(|i| a + length * (i as f64 / n).powf(exponent))
            .collect();
        points.push(a + length);
        Self::from_points(points)
    }

    /// Arbitrary strictly increasing points. Marked uniform only if the spacing
    /// is constant to `1e-12 * T`.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("grid", "need at least two points"));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(invalid("grid", "points must be finite"));
        }
        if points.windows(2).any(|p| p[1] <= p[0]) {
            return Err(invalid("grid", "points must be strictly increasing"));
        }
        let length = points[points.len() - 1] - points[0];
        let h = length / (points.len() - 1) as f64;
        let uniform = points
            .windows(2)
            .all(|p| (p[1] - p[0] - h).abs() <= 1e-12 * length);
        Ok(Self {
            points,
            step: uniform.then_some(h),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of steps `N` (one less than the number of points).
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_uniform(&self) -> bool {
        self.step.is_some()
    }

    /// `h = T / N` for uniform grids.
    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Step leading to point `n` (`n >= 1`). Uniform grids report `T / N` exactly.
    pub fn step_to(&self, n: usize) -> f64 {
        self.step
            .unwrap_or_else(|| self.points[n] - self.points[n - 1])
    }

    /// Whether the grid spans the problem interval.
    pub fn matches(&self, problem: &DerivativeProblem) -> bool {
        let tol = 1e-12 * problem.length().max(1.0);
        (self.start() - problem.a()).abs() <= tol && (self.end() - problem.end()).abs() <= tol
    }
}

/// The 2K auxiliary equations: decay rates (as exponents), forcing prefactor
/// and the quadrature weights folded with `e^{x_k}` for assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusiveSystem {
    q: f64,
    c: f64,
    w_minus: Vec<f64>,
    w_plus: Vec<f64>,
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl DiffusiveSystem {
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `-x_k / q`, same order as the rule's nodes.
    pub fn w_minus(&self) -> &[f64] {
        &self.w_minus
    }

    /// `x_k / (1 - q)`, same order as the rule's nodes.
    pub fn w_plus(&self) -> &[f64] {
        &self.w_plus
    }

    /// Number of quadrature nodes K (the system has 2K equations).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// All 2K exponents, `W-` block first.
    pub fn exponents(&self) -> impl Iterator<Item = f64> + '_ {
        self.w_minus.iter().chain(&self.w_plus).copied()
    }

    /// `a_k e^{x_k}`, formed from `ln a_k + x_k`.
    pub fn scaled_weight(&self, k: usize) -> f64 {
        (self.log_weights[k] + self.nodes[k]).exp()
    }

    /// `Σ_k a_k φ̂(x_k)` from the 2K values `phi` (`W-` block then `W+` block).
    pub fn assemble(&self, phi: &[f64]) -> f64 {
        let k = self.len();
        debug_assert_eq!(phi.len(), 2 * k);
        let (minus, plus) = phi.split_at(k);
        let inv_q = 1.0 / self.q;
        let inv_p = 1.0 / (1.0 - self.q);
        (0..k)
            .map(|i| self.scaled_weight(i) * (minus[i] * inv_q + plus[i] * inv_p))
            .sum()
    }
}

pub fn build_system(problem: &DerivativeProblem, rule: &QuadratureRule) -> Result<DiffusiveSystem> {
    let q = q_d(problem.alpha())?;
    let c = diffusive_coefficient(problem.alpha())?;
    let nodes = rule.nodes().to_vec();
    Ok(DiffusiveSystem {
        q,
        c,
        w_minus: nodes.iter().map(|x| -x / q).collect(),
        w_plus: nodes.iter().map(|x| x / (1.0 - q)).collect(),
        log_weights: rule.log_weights().to_vec(),
        nodes,
    })
}

/// `φ̂(w, t) = e^w (φ(-w/q, t) / q + φ(w/(1-q), t) / (1-q))`.
///
/// Only sensible for moderate `w`; the assembled sum uses [`DiffusiveSystem::assemble`].
pub fn phi_hat(
    system: &DiffusiveSystem,
    phi_at_minus: f64,
    phi_at_plus: f64,
    w: f64,
) -> Result<f64> {
    if w.is_nan() || w < 0.0 {
        return Err(invalid("w", format!("must be nonnegative, got {w}")));
    }
    let q = system.q();
    Ok(w.exp() * (phi_at_minus / q + phi_at_plus / (1.0 - q)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessEntry {
    /// 1-based position in the state vector (`W-` block first).
    pub index: usize,
    pub w: f64,
    /// `log10` of the Lipschitz constant `e^w`.
    pub log10_lipschitz: f64,
    /// `e^w` exceeds `1 / ulp(1)`.
    pub stiff: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessReport {
    pub entries: Vec<StiffnessEntry>,
    /// `log10 L_{K,+}` with `L_{K,+} = exp(x_K / (1 - q))`.
    pub max_log10_lipschitz: f64,
}

impl StiffnessReport {
    pub fn is_stiff(&self) -> bool {
        self.entries.iter().any(|e| e.stiff)
    }
}

pub fn stiffness_report(system: &DiffusiveSystem) -> StiffnessReport {
    let threshold = (1.0 / f64::EPSILON).ln();
    let entries: Vec<StiffnessEntry> = system
        .exponents()
        .enumerate()
        .map(|(i, w)| StiffnessEntry {
            index: i + 1,
            w,
            log10_lipschitz: w / LN_10,
            stiff: w > threshold,
        })
        .collect();
    let max_log10_lipschitz = system
        .w_plus()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        / LN_10;
    StiffnessReport {
        entries,
        max_log10_lipschitz,
    }
}
