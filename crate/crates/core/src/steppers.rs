//! Implicit one-step integration of the 2K auxiliary equations and assembly
//! of the derivative approximation.
//!
//! Each equation is linear with constant decay rate `λ = e^w`, so both schemes
//! reduce to `φ_{n+1} = A φ_n + G · forcing`. The coefficients are evaluated
//! from `s = ln(1 + h' e^w)` (a softplus in `w + ln h'`), which never forms
//! `e^w` itself:
//!
//! * backward Euler: `h' = h`, `A = e^{-s}`, `G = exp(ln h + w q - s)`,
//!   forcing `c y^(m)(t_{n+1})`;
//! * trapezoidal: `h' = h/2`, `A = -tanh(z/2)` with `z = w + ln(h/2)`,
//!   `G = exp(ln(h/2) + w q - s)`, forcing `c (y^(m)(t_n) + y^(m)(t_{n+1}))`.

use crate::diffusive::{build_system, DerivativeProblem, DiffusiveSystem, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::logspace::softplus;
use crate::quadrature::{truncate_rule, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    BackwardEuler,
    Trapezoidal,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backward-euler" => Ok(Method::BackwardEuler),
            "trapezoidal" => Ok(Method::Trapezoidal),
            other => Err(invalid(
                "method",
                format!("expected `backward-euler` or `trapezoidal`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::BackwardEuler => "backward-euler",
            Method::Trapezoidal => "trapezoidal",
        })
    }
}

/// Grid index plus the 2K values `φ_n(w)`, `W-` block first.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub n: usize,
    pub phi: Vec<f64>,
}

impl SolverState {
    /// Zero initial state for a system with `nodes` quadrature nodes.
    pub fn new(nodes: usize) -> Self {
        Self {
            n: 0,
            phi: vec![0.0; 2 * nodes],
        }
    }

    pub fn for_system(system: &DiffusiveSystem) -> Self {
        Self::new(system.len())
    }

    pub fn minus(&self) -> &[f64] {
        &self.phi[..self.phi.len() / 2]
    }

    pub fn plus(&self) -> &[f64] {
        &self.phi[self.phi.len() / 2..]
    }
}

/// `ln A(w, h)` for backward Euler; strictly negative and finite for every
/// real `w` and `h > 0`, i.e. `A ∈ (0, 1)` even where `A` itself rounds to 0 or 1.
pub fn backward_euler_log_amplification(w: f64, h: f64) -> f64 {
    -softplus(w + h.ln())
}

/// Backward-Euler amplification factor `1 / (1 + h e^w)`.
pub fn backward_euler_amplification(w: f64, h: f64) -> f64 {
    backward_euler_log_amplification(w, h).exp()
}

/// Trapezoidal amplification factor `(1 - h e^w / 2) / (1 + h e^w / 2)`.
pub fn trapezoidal_amplification(w: f64, h: f64) -> f64 {
    -(0.5 * (w + (0.5 * h).ln())).tanh()
}

fn check_step(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidStep(h))
    }
}

/// Per-node update coefficients for one step size.
#[derive(Debug, Clone)]
pub struct StepCoefficients {
    method: Method,
    h: f64,
    amplification: Vec<f64>,
    gain: Vec<f64>,
}

impl StepCoefficients {
    pub fn new(system: &DiffusiveSystem, method: Method, h: f64) -> Result<Self> {
        check_step(h)?;
        let mut coeffs = Self {
            method,
            h: f64::NAN,
            amplification: Vec::with_capacity(2 * system.len()),
            gain: Vec::with_capacity(2 * system.len()),
        };
        coeffs.refresh(system, h);
        Ok(coeffs)
    }

    fn refresh(&mut self, system: &DiffusiveSystem, h: f64) {
        if h.to_bits() == self.h.to_bits() {
            return;
        }
        self.h = h;
        self.amplification.clear();
        self.gain.clear();
        let q = system.q();
        let log_h = match self.method {
            Method::BackwardEuler => h.ln(),
            Method::Trapezoidal => (0.5 * h).ln(),
        };
        for w in system.exponents() {
            let z = w + log_h;
            let s = softplus(z);
            let a = match self.method {
                Method::BackwardEuler => (-s).exp(),
                Method::Trapezoidal => -(0.5 * z).tanh(),
            };
            self.amplification.push(a);
            self.gain.push((log_h + w * q - s).exp());
        }
    }

    pub fn amplification(&self) -> &[f64] {
        &self.amplification
    }

    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    /// `φ ← A φ + G · forcing`, where `forcing` already includes `c`.
    fn apply(&self, phi: &mut [f64], forcing: f64) {
        for ((p, &a), &g) in phi.iter_mut().zip(&self.amplification).zip(&self.gain) {
            *p = a * *p + g * forcing;
        }
    }
}

/// One backward-Euler step to `t_next` with step `h`.
pub fn backward_euler_step(
    state: &mut SolverState,
    system: &DiffusiveSystem,
    problem: &DerivativeProblem,
    t_next: f64,
    h: f64,
) -> Result<()> {
    let coeffs = StepCoefficients::new(system, Method::BackwardEuler, h)?;
    let g = problem.forcing(t_next)?;
    coeffs.apply(&mut state.phi, system.c() * g);
    state.n += 1;
    Ok(())
}

/// One trapezoidal step from `t_next - h` to `t_next`.
pub fn trapezoidal_step(
    state: &mut SolverState,
    system: &DiffusiveSystem,
    problem: &DerivativeProblem,
    t_next: f64,
    h: f64,
) -> Result<()> {
    let coeffs = StepCoefficients::new(system, Method::Trapezoidal, h)?;
    let g0 = problem.forcing(t_next - h)?;
    let g1 = problem.forcing(t_next)?;
    coeffs.apply(&mut state.phi, system.c() * (g0 + g1));
    state.n += 1;
    Ok(())
}

/// Streaming evaluator: holds the 2K-entry state and the coefficients for the
/// most recent step size, nothing that grows with the number of steps.
#[derive(Debug, Clone)]
pub struct Evaluator<'p> {
    problem: &'p DerivativeProblem,
    system: DiffusiveSystem,
    state: SolverState,
    coeffs: StepCoefficients,
    t: f64,
    last_forcing: f64,
}

impl<'p> Evaluator<'p> {
    pub fn new(
        problem: &'p DerivativeProblem,
        rule: &QuadratureRule,
        method: Method,
    ) -> Result<Self> {
        let system = build_system(problem, rule)?;
        let coeffs = StepCoefficients {
            method,
            h: f64::NAN,
            amplification: Vec::with_capacity(2 * system.len()),
            gain: Vec::with_capacity(2 * system.len()),
        };
        let t = problem.a();
        let last_forcing = match method {
            Method::Trapezoidal => problem.forcing(t)?,
            Method::BackwardEuler => 0.0,
        };
        Ok(Self {
            problem,
            state: SolverState::for_system(&system),
            system,
            coeffs,
            t,
            last_forcing,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn system(&self) -> &DiffusiveSystem {
        &self.system
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Advance to `t_next` with step `h` and return the approximation there.
    pub fn advance(&mut self, t_next: f64, h: f64) -> Result<f64> {
        check_step(h)?;
        self.coeffs.refresh(&self.system, h);
        let g = self.problem.forcing(t_next)?;
        let forcing = match self.coeffs.method {
            Method::BackwardEuler => g,
            Method::Trapezoidal => self.last_forcing + g,
        };
        self.last_forcing = g;
        self.coeffs
            .apply(&mut self.state.phi, self.system.c() * forcing);
        self.state.n += 1;
        self.t = t_next;
        let value = self.value();
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: format!("derivative approximation at t = {t_next}"),
            });
        }
        Ok(value)
    }

    /// `Σ_k a_k φ̂_{k,n}` for the current state.
    pub fn value(&self) -> f64 {
        self.system.assemble(&self.state.phi)
    }
}

fn effective_rule(rule: &QuadratureRule, k_star: Option<usize>) -> Result<QuadratureRule> {
    match k_star {
        Some(k) => truncate_rule(rule, k),
        None => Ok(rule.clone()),
    }
}

/// Approximate `D^alpha y(t_n)` at every grid point in one pass.
///
/// `k_star` keeps only the first `K*` quadrature terms (and equations).
pub fn evaluate_derivative(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    grid: &TimeGrid,
    method: Method,
    k_star: Option<usize>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.points().len());
    for_each_value(problem, rule, grid, method, k_star, |_, _, v| out.push(v))?;
    Ok(out)
}

/// Like [`evaluate_derivative`] but hands each `(n, t_n, value)` to `sink`
/// instead of collecting; memory use is independent of the grid length.
pub fn for_each_value<F>(
    problem: &DerivativeProblem,
    rule: &QuadratureRule,
    grid: &TimeGrid,
    method: Method,
    k_star: Option<usize>,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(usize, f64, f64),
{
    if !grid.matches(problem) {
        return Err(invalid(
            "grid",
            format!(
                "grid [{}, {}] does not span the problem interval [{}, {}]",
                grid.start(),
                grid.end(),
                problem.a(),
                problem.end()
            ),
        ));
    }
    let rule = effective_rule(rule, k_star)?;
    let mut eval = Evaluator::new(problem, &rule, method)?;
    let points = grid.points();
    sink(0, points[0], 0.0);
    for (n, &t) in points.iter().enumerate().skip(1) {
        let v = eval.advance(t, grid.step_to(n))?;
        sink(n, t, v);
    }
    Ok(())
}
