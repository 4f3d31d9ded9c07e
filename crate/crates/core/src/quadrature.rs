//! Gauss–Legendre rules and a small adaptive integrator built on them.
//!
//! Node tables are computed once by Newton iteration on the Legendre
//! recurrence and are immutable afterwards, so a rule can be shared freely
//! between threads.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// An n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Build the rule with `n` nodes. Nodes are returned in increasing order.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterate over `(node, weight)` pairs on [-1, 1].
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integrate `f` over `[a, b]` with a single application of the rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let sum: f64 = self.iter().map(|(x, w)| w * f(mid + half * x)).sum();
        sum * half
    }

    /// Integrate `f` over `[a, b]` split into `panels` equal sub-intervals.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        panels: usize,
    ) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                let hi = if k + 1 == panels { b } else { lo + h };
                self.integrate(&mut f, lo, hi)
            })
            .sum()
    }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// The shared 20-point rule used by the bivariate normal kernel.
pub fn gauss_legendre_20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
}

/// Adaptive bisection with a 20-point Gauss–Legendre rule: an interval is
/// accepted when the single-panel value agrees with the two half-panel values
/// to within its share of `abs_tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Integral {
    let rule = gauss_legendre_20();
    let mut stack = vec![(a, b, rule.integrate(&f, a, b), 0u32)];
    let width = (b - a).abs().max(f64::MIN_POSITIVE);
    let mut value = 0.0;
    let mut err = 0.0;
    let mut converged = true;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(&f, lo, mid);
        let right = rule.integrate(&f, mid, hi);
        let diff = (left + right - whole).abs();
        let share = abs_tol * (hi - lo).abs() / width;
        if diff <= share.max(1e-300) || depth >= 40 {
            if depth >= 40 && diff > share {
                converged = false;
            }
            value += left + right;
            err += diff;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Integral {
        value,
        error_estimate: err,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 10, 20, 33] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n}: {s}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let rule = GaussLegendre::new(20);
        for w in rule.nodes().windows(2) {
            assert!(w[0] < w[1]);
        }
        for i in 0..10 {
            assert_eq!(rule.nodes()[i], -rule.nodes()[19 - i]);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(10);
        // ∫_{-1}^{1} x^18 dx = 2/19
        let v = rule.integrate(|x| x.powi(18), -1.0, 1.0);
        assert!((v - 2.0 / 19.0).abs() < 1e-15);
        let v = rule.integrate(|x| x.powi(19), -1.0, 1.0);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn twenty_point_nodes_match_tabulated_values() {
        // Largest node and its weight, from standard tables.
        let rule = gauss_legendre_20();
        assert!((rule.nodes()[19] - 0.993_128_599_185_094_9).abs() < 1e-15);
        assert!((rule.weights()[19] - 0.017_614_007_139_152_12).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let r = integrate_adaptive(|x| (-(x * x) * 400.0).exp(), -3.0, 5.0, 1e-13);
        let exact = (PI / 400.0).sqrt();
        assert!(r.converged);
        assert!((r.value - exact).abs() < 1e-13, "{} vs {}", r.value, exact);
    }

    #[test]
    fn composite_matches_closed_form() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate_composite(f64::exp, 0.0, 3.0, 7);
        assert!((v - (3f64.exp() - 1.0)).abs() < 1e-13);
    }
}
