//! Gauss-Legendre rules and composite panel quadrature.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre polynomial, seeded with the Chebyshev
/// approximation of the roots. Accurate to machine precision for the orders
/// used here (<= 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// A reusable Gauss-Legendre rule.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        GaussRule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to the interval [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Integrate `f` over [a, b] with a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Integrate over [a, b] split into `panels` equal panels.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let pa = a + p as f64 * h;
            sum += self.integrate(pa, pa + h, &mut f);
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_rules_match_known_values() {
        let (n2, w2) = gauss_legendre(2);
        let r = 1.0 / 3.0f64.sqrt();
        assert!((n2[0] + r).abs() < 1e-14 && (n2[1] - r).abs() < 1e-14);
        assert!((w2[0] - 1.0).abs() < 1e-14 && (w2[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn polynomial_exactness() {
        for order in [4usize, 8, 16] {
            let rule = GaussRule::new(order);
            for k in 0..2 * order {
                let exact = (1.0 - (-1.0f64).powi(k as i32 + 1)) / (k as f64 + 1.0);
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(k as i32));
                assert!((got - exact).abs() < 1e-12, "order {order} moment {k}");
            }
        }
    }

    #[test]
    fn panel_integration_of_smooth_function() {
        let rule = GaussRule::new(8);
        let got = rule.integrate_panels(0.0, 2.0, 16, |x| (x * x).exp() * x);
        let exact = 0.5 * ((4.0f64).exp() - 1.0);
        assert!((got - exact).abs() < 1e-10);
    }
}
