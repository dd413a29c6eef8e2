//! Small log-domain helpers shared by the steppers and the analysis code.
//!
//! The decay rates `e^w` of the auxiliary equations reach `exp(700)` and beyond
//! for moderate rule sizes, so every quantity that combines them is assembled
//! from logarithms and exponentiated only once the result is known to be in
//! range.

use std::f64::consts::LN_10;

/// `ln(1 + e^z)` without overflow for large `z` or cancellation for very negative `z`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `ln(e^x + e^y)`.
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// A nonnegative quantity stored by its natural logarithm.
///
/// Zero is represented by `ln = -inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMagnitude {
    pub ln: f64,
}

impl LogMagnitude {
    pub const ZERO: LogMagnitude = LogMagnitude {
        ln: f64::NEG_INFINITY,
    };

    pub fn from_ln(ln: f64) -> Self {
        Self { ln }
    }

    pub fn is_zero(&self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    /// The value as an `f64`, or `None` when it would overflow.
    pub fn to_f64(&self) -> Option<f64> {
        let v = self.ln.exp();
        v.is_finite().then_some(v)
    }

    pub fn log10(&self) -> f64 {
        self.ln / LN_10
    }

    /// Scientific form `(m, e)` with `value = m * 10^e` and `1 <= m < 10`.
    /// Zero maps to `(0.0, 0)`.
    pub fn mantissa_exponent(&self) -> (f64, i64) {
        if self.is_zero() {
            return (0.0, 0);
        }
        let l10 = self.log10();
        let mut e = l10.floor();
        let mut m = 10f64.powf(l10 - e);
        if m >= 10.0 {
            m /= 10.0;
            e += 1.0;
        }
        (m, e as i64)
    }

    /// Multiply by a positive scalar.
    pub fn scale(&self, factor: f64) -> Self {
        Self {
            ln: self.ln + factor.ln(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &z in &[-30.0, -5.0, -1e-3, 0.0, 1e-3, 2.0, 20.0] {
            let naive = (1.0 + f64::exp(z)).ln();
            assert_relative_eq!(softplus(z), naive, max_relative = 1e-14);
        }
    }

    #[test]
    fn softplus_extremes() {
        assert_eq!(softplus(800.0), 800.0);
        let tiny = softplus(-700.0);
        assert!(tiny > 0.0 && tiny < 1e-300);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn log_add_exp_handles_zero_and_overflow() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert_relative_eq!(log_add_exp(1000.0, 1000.0), 1000.0 + 2f64.ln());
        assert_relative_eq!(log_add_exp(0.0, 0.0), 2f64.ln());
    }

    #[test]
    fn mantissa_exponent_of_large_value() {
        let v = LogMagnitude::from_ln(1000.0 * LN_10 + 2.5f64.ln());
        let (m, e) = v.mantissa_exponent();
        assert_eq!(e, 1000);
        assert_relative_eq!(m, 2.5, max_relative = 1e-10);
        assert!(v.to_f64().is_none());
        assert_eq!(LogMagnitude::ZERO.mantissa_exponent(), (0.0, 0));
    }
}
