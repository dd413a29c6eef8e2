//! Benchmarks live in `benches/`; run them with `cargo bench -p diffrep-bench`.

use diffrep_core::oracle::corpus::by_name;
use diffrep_core::DerivativeProblem;

/// The `sin` corpus problem on `[0, 1]` used by the benches.
pub fn sine_problem(alpha: f64) -> DerivativeProblem {
    by_name("sin")
        .expect("corpus has sin")
        .problem(alpha, 0.0, 1.0)
        .expect("valid order")
}
