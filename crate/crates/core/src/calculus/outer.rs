use std::ops;

use serde::{Deserialize, Serialize};

/// Outer function `g: Rⁿ → R` of a cylinder function, kept symbolic so that
/// first and second partials are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outer {
    Var(usize),
    Const(f64),
    Add(Box<Outer>, Box<Outer>),
    Mul(Box<Outer>, Box<Outer>),
    Tanh(Box<Outer>),
    Powi(Box<Outer>, i32),
}

/// Value, gradient and Hessian (row-major `n×n`) at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet {
    fn constant(n: usize, value: f64) -> Self {
        Self { value, grad: vec![0.0; n], hess: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.n() + j]
    }

    /// `χ ∘ self` for a scalar `χ` with derivatives `(c1, c2)` at `self.value`.
    fn compose(&self, value: f64, c1: f64, c2: f64) -> Jet {
        let n = self.n();
        let grad = self.grad.iter().map(|g| c1 * g).collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = c1 * self.hess[i * n + j] + c2 * self.grad[i] * self.grad[j];
            }
        }
        Jet { value, grad, hess }
    }
}

impl Outer {
    pub fn var(i: usize) -> Self {
        Self::Var(i)
    }

    pub fn constant(c: f64) -> Self {
        Self::Const(c)
    }

    pub fn tanh(self) -> Self {
        Self::Tanh(Box::new(self))
    }

    pub fn powi(self, k: i32) -> Self {
        Self::Powi(Box::new(self), k)
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Self::Var(i) => i + 1,
            Self::Const(_) => 0,
            Self::Add(a, b) | Self::Mul(a, b) => a.arity().max(b.arity()),
            Self::Tanh(a) | Self::Powi(a, _) => a.arity(),
        }
    }

    pub fn eval(&self, args: &[f64]) -> f64 {
        match self {
            Self::Var(i) => args[*i],
            Self::Const(c) => *c,
            Self::Add(a, b) => a.eval(args) + b.eval(args),
            Self::Mul(a, b) => a.eval(args) * b.eval(args),
            Self::Tanh(a) => a.eval(args).tanh(),
            Self::Powi(a, k) => a.eval(args).powi(*k),
        }
    }

    /// Forward-mode second-order evaluation.
    pub fn jet(&self, args: &[f64]) -> Jet {
        let n = args.len();
        match self {
            Self::Var(i) => {
                let mut j = Jet::constant(n, args[*i]);
                j.grad[*i] = 1.0;
                j
            }
            Self::Const(c) => Jet::constant(n, *c),
            Self::Add(a, b) => {
                let (ja, jb) = (a.jet(args), b.jet(args));
                Jet {
                    value: ja.value + jb.value,
                    grad: ja.grad.iter().zip(&jb.grad).map(|(x, y)| x + y).collect(),
                    hess: ja.hess.iter().zip(&jb.hess).map(|(x, y)| x + y).collect(),
                }
            }
            Self::Mul(a, b) => {
                let (ja, jb) = (a.jet(args), b.jet(args));
                let grad = (0..n).map(|i| ja.value * jb.grad[i] + jb.value * ja.grad[i]).collect();
                let mut hess = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        hess[i * n + j] = ja.value * jb.hess[i * n + j]
                            + jb.value * ja.hess[i * n + j]
                            + ja.grad[i] * jb.grad[j]
                            + jb.grad[i] * ja.grad[j];
                    }
                }
                Jet { value: ja.value * jb.value, grad, hess }
            }
            Self::Tanh(a) => {
                let ja = a.jet(args);
                let t = ja.value.tanh();
                let c1 = 1.0 - t * t;
                ja.compose(t, c1, -2.0 * t * c1)
            }
            Self::Powi(a, k) => {
                let ja = a.jet(args);
                let k = *k;
                let x = ja.value;
                let c1 = if k == 0 { 0.0 } else { k as f64 * x.powi(k - 1) };
                let c2 = if k == 0 || k == 1 { 0.0 } else { (k * (k - 1)) as f64 * x.powi(k - 2) };
                ja.compose(x.powi(k), c1, c2)
            }
        }
    }

    /// Symbolic `∂g/∂x_i`.
    pub fn derivative(&self, i: usize) -> Outer {
        match self {
            Self::Var(j) => Self::Const(if *j == i { 1.0 } else { 0.0 }),
            Self::Const(_) => Self::Const(0.0),
            Self::Add(a, b) => a.derivative(i) + b.derivative(i),
            Self::Mul(a, b) => (**a).clone() * b.derivative(i) + a.derivative(i) * (**b).clone(),
            Self::Tanh(a) => {
                let t = (**a).clone().tanh();
                (Self::Const(1.0) + Self::Const(-1.0) * t.powi(2)) * a.derivative(i)
            }
            Self::Powi(a, k) => {
                if *k == 0 {
                    Self::Const(0.0)
                } else {
                    Self::Const(*k as f64) * (**a).clone().powi(k - 1) * a.derivative(i)
                }
            }
        }
    }
}

impl ops::Add for Outer {
    type Output = Outer;
    fn add(self, rhs: Outer) -> Outer {
        Outer::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Outer {
    type Output = Outer;
    fn mul(self, rhs: Outer) -> Outer {
        Outer::Mul(Box::new(self), Box::new(rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Outer {
        // tanh(x0·x1 + 0.5) + x1³ − 2·x0²
        (Outer::var(0) * Outer::var(1) + Outer::constant(0.5)).tanh()
            + Outer::var(1).powi(3)
            + Outer::constant(-2.0) * Outer::var(0).powi(2)
    }

    #[test]
    fn jet_matches_finite_differences() {
        let g = sample();
        let x = [0.3, -0.7];
        let j = g.jet(&x);
        assert!((j.value - g.eval(&x)).abs() < 1e-15);
        let h = 1e-5;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (g.eval(&xp) - g.eval(&xm)) / (2.0 * h);
            assert!((fd - j.grad[i]).abs() < 1e-8);
            for k in 0..2 {
                let fdh = (g.jet(&xp).grad[k] - g.jet(&xm).grad[k]) / (2.0 * h);
                assert!((fdh - j.hess_at(i, k)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn symbolic_derivative_agrees_with_jet() {
        let g = sample();
        let x = [1.1, 0.4];
        let j = g.jet(&x);
        for i in 0..2 {
            let di = g.derivative(i);
            assert!((di.eval(&x) - j.grad[i]).abs() < 1e-13);
            let jd = di.jet(&x);
            for k in 0..2 {
                assert!((jd.grad[k] - j.hess_at(i, k)).abs() < 1e-12);
            }
        }
        assert_eq!(g.arity(), 2);
    }
}
