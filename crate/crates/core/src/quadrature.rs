//! Gauss-Legendre rules and the trapezoid helpers used on sampled traces.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
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
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss-Legendre nodes/weights on `[a, b]` with `panels` equal panels.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (ref_nodes, ref_weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let left = a + p as f64 * h;
        for (x, w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(left + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    (nodes, weights)
}

/// Running trapezoid integral of `values` over `times`; element `k` is `∫_{t_0}^{t_k}`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    debug_assert_eq!(times.len(), values.len());
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn composite_rule_integrates_sine() {
        let (x, w) = composite_rule(0.0, PI, 4, 8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin()).sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_is_exact_for_linear_data() {
        let t = [0.0, 0.5, 2.0];
        let v = [1.0, 2.0, 5.0];
        let q = cumulative_trapezoid(&t, &v);
        assert_eq!(q, vec![0.0, 0.75, 6.0]);
    }
}
