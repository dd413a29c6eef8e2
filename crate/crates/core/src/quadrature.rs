//! Gauss–Laguerre rules for the weight `e^{-w}` on `[0, ∞)`.
//!
//! Nodes are the zeros of the Laguerre polynomial `L_K`, found by Newton's
//! method on the three-term recurrence. Weights follow from the derivative of
//! `L_K` at each node and are kept in logarithmic form: for `K` near 64 the
//! trailing weights underflow while `e^{x_k}` overflows, and only the product
//! `a_k e^{x_k}` is ever needed downstream.

use crate::error::{invalid, Error, Result};

/// Largest supported rule size.
pub const MAX_NODES: usize = 256;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;
/// Rescaling threshold for the recurrence; keeps `L_K(x)` in range for `K = 256`.
const RESCALE_AT: f64 = 1e150;

/// A K-point Gauss–Laguerre rule, possibly truncated to its first `K*` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    generating_order: usize,
}

impl QuadratureRule {
    /// Number of nodes in use.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Size of the rule the nodes were generated from (differs from `len()` after truncation).
    pub fn generating_order(&self) -> usize {
        self.generating_order
    }

    pub fn is_truncated(&self) -> bool {
        self.len() < self.generating_order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights `a_k`; trailing entries may underflow to zero for large K.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ln a_k`, computed directly rather than from the (possibly underflowed) weight.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Largest node in use.
    pub fn max_node(&self) -> f64 {
        *self.nodes.last().expect("rules are never empty")
    }

    /// `Σ a_k f(x_k)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &a)| a * f(x))
            .sum()
    }
}

/// Laguerre values `(L_K(x), L_{K-1}(x))` scaled by `e^{-log_scale}`.
fn laguerre_pair(order: usize, x: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0;
    let mut log_scale = 0.0;
    for j in 1..=order {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0 - x) * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = next;
        if p.abs() > RESCALE_AT {
            p /= RESCALE_AT;
            p_prev /= RESCALE_AT;
            log_scale += RESCALE_AT.ln();
        }
    }
    (p, p_prev, log_scale)
}

fn initial_guess(index: usize, order: usize, previous: &[f64]) -> f64 {
    let n = order as f64;
    match index {
        0 => 3.0 / (1.0 + 2.4 * n),
        1 => previous[0] + 15.0 / (1.0 + 2.5 * n),
        _ => {
            let ai = (index - 1) as f64;
            let z = previous[index - 1];
            z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - previous[index - 2])
        }
    }
}

/// Generate the K-point Gauss–Laguerre rule.
///
/// Deterministic: the same `order` always yields a bit-identical rule.
pub fn gauss_laguerre_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_NODES {
        return Err(invalid(
            "K",
            format!("node count must lie in 1..={MAX_NODES}, got {order}"),
        ));
    }
    let n = order as f64;
    let mut nodes: Vec<f64> = Vec::with_capacity(order);
    let mut log_weights = Vec::with_capacity(order);

    for index in 0..order {
        let mut z = initial_guess(index, order, &nodes);
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, p_prev, _) = laguerre_pair(order, z);
            // x L_K'(x) = K (L_K(x) - L_{K-1}(x))
            let dp = n * (p - p_prev) / z;
            let step = p / dp;
            z -= step;
            if !z.is_finite() {
                break;
            }
            if step.abs() <= NEWTON_TOL * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        let lower = nodes.last().copied().unwrap_or(0.0);
        if !converged || z <= lower {
            return Err(Error::NodeConvergence { index, order });
        }
        // a_k = 1 / (x_k L_K'(x_k)^2) = x_k / (K L_{K-1}(x_k))^2
        let (_, p_prev, log_scale) = laguerre_pair(order, z);
        let log_weight = z.ln() - 2.0 * (n.ln() + p_prev.abs().ln() + log_scale);
        nodes.push(z);
        log_weights.push(log_weight);
    }

    let weights = log_weights.iter().map(|l: &f64| l.exp()).collect();
    Ok(QuadratureRule {
        nodes,
        weights,
        log_weights,
        generating_order: order,
    })
}

/// Keep only the first `k_star` terms of `rule`.
pub fn truncate_rule(rule: &QuadratureRule, k_star: usize) -> Result<QuadratureRule> {
    if k_star == 0 || k_star > rule.len() {
        return Err(invalid(
            "K_star",
            format!("must lie in 1..={}, got {k_star}", rule.len()),
        ));
    }
    Ok(QuadratureRule {
        nodes: rule.nodes[..k_star].to_vec(),
        weights: rule.weights[..k_star].to_vec(),
        log_weights: rule.log_weights[..k_star].to_vec(),
        generating_order: rule.generating_order,
    })
}
