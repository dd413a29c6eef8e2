use std::sync::Arc;

use diffrep_core::diffusive::{build_system, DerivativeProblem, TimeGrid};
use diffrep_core::quadrature::gauss_laguerre_rule;
use diffrep_core::steppers::{
    backward_euler_amplification, backward_euler_log_amplification, backward_euler_step,
    evaluate_derivative, trapezoidal_step, Evaluator, Method, SolverState, StepCoefficients,
};
use proptest::prelude::*;

/// Constant forcing `g = 1`: from zero, `φ_n = (b/λ)(1 - r^n)` with the
/// method's amplification `r` and `b = c e^{w q}`.
fn constant_forcing_oracle(lambda: f64, b: f64, h: f64, n: i32, method: Method) -> f64 {
    let r = match method {
        Method::BackwardEuler => 1.0 / (1.0 + h * lambda),
        Method::Trapezoidal => (1.0 - 0.5 * h * lambda) / (1.0 + 0.5 * h * lambda),
    };
    (b / lambda) * (1.0 - r.powi(n))
}

#[test]
fn constant_forcing_matches_closed_form_recurrence() {
    let problem = DerivativeProblem::new(0.5, 0.0, 1.0, |_| 1.0).unwrap();
    let system = build_system(&problem, &gauss_laguerre_rule(1).unwrap()).unwrap();
    let q = system.q();
    for method in [Method::BackwardEuler, Method::Trapezoidal] {
        for (slot, &w) in [system.w_minus()[0], system.w_plus()[0]].iter().enumerate() {
            let lambda = w.exp();
            let b = system.c() * (w * q).exp();
            for lambda_h in [1e-3, 1.0, 1e3] {
                let h = lambda_h / lambda;
                let mut state = SolverState::for_system(&system);
                let mut worst: f64 = 0.0;
                for n in 1..=1000 {
                    let t = n as f64 * h;
                    match method {
                        Method::BackwardEuler => {
                            backward_euler_step(&mut state, &system, &problem, t, h)
                        }
                        Method::Trapezoidal => {
                            trapezoidal_step(&mut state, &system, &problem, t, h)
                        }
                    }
                    .unwrap();
                    let expect = constant_forcing_oracle(lambda, b, h, n, method);
                    worst = worst.max((state.phi[slot] - expect).abs());
                }
                assert!(
                    worst <= 1e-13,
                    "{method} w={w} λh={lambda_h}: max deviation {worst:e}"
                );
            }
        }
    }
}

#[test]
fn backward_euler_is_a_stable_over_sweep() {
    let hs = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
    let mut w = -50.0;
    while w <= 750.0 {
        for &h in &hs {
            let log_a = backward_euler_log_amplification(w, h);
            assert!(
                log_a < 0.0 && log_a.is_finite(),
                "w={w} h={h}: ln A = {log_a}"
            );
            let a = backward_euler_amplification(w, h);
            assert!((0.0..=1.0).contains(&a));
        }
        w += 0.25;
    }
}

#[test]
fn stiff_system_stays_finite() {
    let problem = DerivativeProblem::new(0.9, 0.0, 1.0, |t: f64| t.cos()).unwrap();
    let rule = gauss_laguerre_rule(60).unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, 500).unwrap();
    for method in [Method::BackwardEuler, Method::Trapezoidal] {
        let out = evaluate_derivative(&problem, &rule, &grid, method, None).unwrap();
        assert_eq!(out[0], 0.0);
        assert!(out.iter().all(|v| v.is_finite()), "{method}");
    }
    let system = build_system(&problem, &rule).unwrap();
    let coeffs = StepCoefficients::new(&system, Method::BackwardEuler, 1e-3).unwrap();
    assert!(coeffs.amplification().iter().all(|a| a.is_finite()));
    assert!(coeffs.gain().iter().all(|g| g.is_finite()));
}

#[test]
fn state_entries_finite_for_all_rules_up_to_64() {
    for k in [1, 8, 32, 64] {
        for alpha in [0.05, 0.5, 0.95, 1.9] {
            let problem = DerivativeProblem::new(alpha, 0.0, 1.0, |t: f64| 1.0 + t).unwrap();
            let rule = gauss_laguerre_rule(k).unwrap();
            let mut eval = Evaluator::new(&problem, &rule, Method::BackwardEuler).unwrap();
            for n in 1..=100 {
                eval.advance(n as f64 / 100.0, 0.01).unwrap();
                assert!(eval.state().phi.iter().all(|p| p.is_finite()));
            }
        }
    }
}

#[test]
fn graded_grid_runs() {
    let problem = DerivativeProblem::new(0.5, 1.0, 2.0, |_| 1.0).unwrap();
    let rule = gauss_laguerre_rule(20).unwrap();
    let grid = TimeGrid::graded(1.0, 2.0, 200, 2.0).unwrap();
    assert!(!grid.is_uniform());
    let out = evaluate_derivative(&problem, &rule, &grid, Method::BackwardEuler, None).unwrap();
    assert_eq!(out[0], 0.0);
    assert_eq!(out.len(), 201);
    // y = t - 1: derivative (t-1)^{1/2} / Γ(3/2); at t = 3 that is √2 / 0.886...
    let exact = 2f64.sqrt() / 0.886_226_925_452_758;
    assert!((out[200] - exact).abs() < 0.05, "{} vs {exact}", out[200]);
}

#[test]
fn state_size_is_independent_of_grid_length() {
    let problem = DerivativeProblem::new(0.5, 0.0, 1.0, |t: f64| t.sin()).unwrap();
    let rule = gauss_laguerre_rule(16).unwrap();
    for steps in [10usize, 10_000] {
        let mut eval = Evaluator::new(&problem, &rule, Method::Trapezoidal).unwrap();
        let h = 1.0 / steps as f64;
        for n in 1..=steps {
            eval.advance(n as f64 * h, h).unwrap();
        }
        assert_eq!(eval.state().phi.len(), 32);
        assert_eq!(eval.state().n, steps);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Discrete maximum principle of the backward-Euler recurrence.
    #[test]
    fn backward_euler_bounded_by_forcing(
        alpha in 0.05f64..2.95,
        bound in 0.1f64..10.0,
        freq in 0.5f64..20.0,
        phase in 0.0f64..6.3,
        steps in 5usize..200,
        k in 1usize..24,
    ) {
        prop_assume!((alpha - alpha.round()).abs() > 1e-3);
        let problem = DerivativeProblem::new(alpha, 0.0, 1.0, move |t: f64| bound * (freq * t + phase).sin()).unwrap();
        let rule = gauss_laguerre_rule(k).unwrap();
        let system = build_system(&problem, &rule).unwrap();
        let mut state = SolverState::for_system(&system);
        let h = 1.0 / steps as f64;
        let q = system.q();
        let limits: Vec<f64> = system
            .exponents()
            .map(|w| bound * system.c().abs() * (w * (q - 1.0)).exp())
            .collect();
        for n in 1..=steps {
            backward_euler_step(&mut state, &system, &problem, n as f64 * h, h).unwrap();
            for (p, lim) in state.phi.iter().zip(&limits) {
                prop_assert!(p.abs() <= lim * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn evaluation_is_linear_in_forcing(
        b1 in -3.0f64..3.0,
        b2 in -3.0f64..3.0,
        alpha in 0.1f64..0.9,
        trapezoidal in any::<bool>(),
    ) {
        let method = if trapezoidal { Method::Trapezoidal } else { Method::BackwardEuler };
        let g1: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(|t: f64| t * t);
        let g2: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(|t: f64| (2.0 * t).cos());
        let base = DerivativeProblem::new(alpha, 0.0, 1.0, |_| 0.0).unwrap();
        let rule = gauss_laguerre_rule(20).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 64).unwrap();
        let run = |g: Arc<dyn Fn(f64) -> f64 + Send + Sync>| {
            evaluate_derivative(&base.with_forcing(g), &rule, &grid, method, None).unwrap()
        };
        let (c1, c2) = (g1.clone(), g2.clone());
        let combined = run(Arc::new(move |t| b1 * c1(t) + b2 * c2(t)));
        let o1 = run(g1);
        let o2 = run(g2);
        for i in 0..combined.len() {
            let lin = b1 * o1[i] + b2 * o2[i];
            let scale = (b1 * o1[i]).abs() + (b2 * o2[i]).abs();
            prop_assert!((combined[i] - lin).abs() <= 1e-10 * scale.max(1e-300) + 1e-15);
        }
    }
}
