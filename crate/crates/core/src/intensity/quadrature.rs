//! Tensor-product Gauss–Legendre quadrature over axis-aligned windows.

use std::sync::OnceLock;

use crate::domain::Window;
use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from Chebyshev initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn cached(order: usize) -> &'static GaussLegendre {
    static R16: OnceLock<GaussLegendre> = OnceLock::new();
    static R32: OnceLock<GaussLegendre> = OnceLock::new();
    static R48: OnceLock<GaussLegendre> = OnceLock::new();
    match order {
        16 => R16.get_or_init(|| GaussLegendre::new(16)),
        32 => R32.get_or_init(|| GaussLegendre::new(32)),
        48 => R48.get_or_init(|| GaussLegendre::new(48)),
        _ => panic!("uncached order {order}"),
    }
}

/// Composite rule: each axis split into `panels` equal panels, `order` nodes per panel.
#[derive(Debug, Clone)]
pub struct TensorRule {
    rule: GaussLegendre,
    panels: usize,
}

/// An integral with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureValue {
    pub value: f64,
    pub abs_error: f64,
}

impl TensorRule {
    pub fn new(order: usize, panels: usize) -> Self {
        let rule = match order {
            16 | 32 | 48 => cached(order).clone(),
            _ => GaussLegendre::new(order),
        };
        Self { rule, panels: panels.max(1) }
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// Flattened 1-d rule on `[lo, hi)`; returns (nodes, weights).
    fn axis(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let h = (hi - lo) / self.panels as f64;
        let n = self.rule.order() * self.panels;
        let mut xs = Vec::with_capacity(n);
        let mut ws = Vec::with_capacity(n);
        for p in 0..self.panels {
            let a = lo + p as f64 * h;
            for (x, w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                xs.push(a + 0.5 * h * (x + 1.0));
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }

    /// Calls `visit(x, w)` for every tensor node in the window.
    pub fn for_each_node<F: FnMut(&[f64], f64)>(&self, window: &Window, mut visit: F) {
        let d = window.dim();
        let axes: Vec<(Vec<f64>, Vec<f64>)> =
            (0..d).map(|k| self.axis(window.lower()[k], window.upper()[k])).collect();
        let m = axes[0].0.len();
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        loop {
            let mut w = 1.0;
            for k in 0..d {
                x[k] = axes[k].0[idx[k]];
                w *= axes[k].1[idx[k]];
            }
            visit(&x, w);
            let mut k = 0;
            loop {
                if k == d {
                    return;
                }
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, window: &Window, mut f: F) -> f64 {
        let mut acc = 0.0;
        self.for_each_node(window, |x, w| acc += w * f(x));
        acc
    }
}

/// Integrates with the default 32-node rule, estimating the error against
/// the 48-node rule on the same panels. When the two disagree beyond
/// `rel_tol`, the panels are doubled per axis (at most `max_refine` times).
pub fn integrate_checked<F: FnMut(&[f64]) -> f64>(
    window: &Window,
    mut f: F,
    rel_tol: f64,
    max_refine: usize,
) -> Result<QuadratureValue> {
    let mut panels = 1;
    let mut last_rel = f64::INFINITY;
    for _ in 0..=max_refine {
        let coarse = TensorRule::new(32, panels).integrate(window, &mut f);
        let fine = TensorRule::new(48, panels).integrate(window, &mut f);
        let abs_error = (fine - coarse).abs();
        let scale = fine.abs().max(f64::MIN_POSITIVE);
        last_rel = abs_error / scale;
        if last_rel <= rel_tol || abs_error <= 1e-300 {
            return Ok(QuadratureValue { value: fine, abs_error });
        }
        panels *= 2;
    }
    Err(Error::QuadratureNotConverged { rel_err: last_rel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TorusDomain;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        for n in [1, 2, 5, 16, 32, 48] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "order {n}: {s}");
            for i in 0..n {
                assert!((r.nodes[i] + r.nodes[n - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let r = GaussLegendre::new(5);
        for k in 0..10u32 {
            let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "x^{k}: {q} vs {exact}");
        }
    }

    #[test]
    fn integrates_separable_function_on_window() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let w = Window::new(&dom, vec![0.5, 1.0], vec![2.0, 3.5]).unwrap();
        let v = integrate_checked(&w, |x| x[0].sin() * x[1].exp(), 1e-12, 3).unwrap();
        let exact = (0.5f64.cos() - 2.0f64.cos()) * (3.5f64.exp() - 1.0f64.exp());
        assert!((v.value - exact).abs() < 1e-11 * exact.abs());
    }
}
