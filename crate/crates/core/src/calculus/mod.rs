//! Differential calculus on configuration space, lifted from the torus.
//!
//! For a cylinder function `F(γ) = g(⟨f₁,γ⟩, …, ⟨f_N,γ⟩)`:
//!
//! - gradient: `(∇^Γ F)(γ)(x) = Σᵢ ∂ᵢg · ∇fᵢ(x)` for `x ∈ γ`,
//! - directional derivative: `∇_v^Γ F = ⟨∇^Γ F, v⟩ = Σ_{x∈γ} ⟨∇^Γ F(x), v(x)⟩`,
//! - divergence of `V = Σ Fᵢ vᵢ`: `Σᵢ (∇_{vᵢ}^Γ Fᵢ + Fᵢ ⟨div vᵢ, γ⟩)`,
//! - Laplacian: `Σᵢⱼ ∂ᵢ∂ⱼg ⟨⟨∇fᵢ,∇fⱼ⟩,γ⟩ + Σᵢ ∂ᵢg ⟨Δfᵢ,γ⟩`.
//!
//! The Gibbsian first-order terms use the pair potential: the interaction
//! term is `−Σ_{{x,y}⊂γ} ⟨∇φ(x−y), v(x) − v(y)⟩` and the logarithmic
//! derivative adds `⟨div v, γ⟩` to it.

mod bump;
mod outer;

use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::domain::TorusDomain;
use crate::error::{Error, Result};
use crate::intensity::IntensityMeasure;
use crate::potential::{self, PairPotential};

pub use bump::{BumpFunction, BumpSum};
pub use outer::{Jet, Outer};

/// Fixed RK4 step bound in flow time.
pub const FLOW_STEP: f64 = 1e-3;

/// Smooth compactly supported vector field on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorField {
    /// One bump combination per axis.
    Components(Vec<BumpSum>),
    /// `∇f`; its divergence is `Δf`.
    Gradient(BumpSum),
    Sum(Vec<VectorField>),
    Scaled(f64, Box<VectorField>),
}

impl VectorField {
    pub fn zero(dim: usize) -> Self {
        Self::Components(vec![BumpSum::zero(); dim])
    }

    /// Adds `scale·v(x)` into `out`.
    pub fn add_value(&self, dom: &TorusDomain, x: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Self::Components(cs) => {
                for (o, c) in out.iter_mut().zip(cs) {
                    *o += scale * c.value(dom, x);
                }
            }
            Self::Gradient(f) => f.add_gradient(dom, x, scale, out),
            Self::Sum(vs) => vs.iter().for_each(|v| v.add_value(dom, x, scale, out)),
            Self::Scaled(c, v) => v.add_value(dom, x, scale * c, out),
        }
    }

    pub fn value(&self, dom: &TorusDomain, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; dom.dim()];
        self.add_value(dom, x, 1.0, &mut out);
        out
    }

    /// Pointwise divergence.
    pub fn divergence(&self, dom: &TorusDomain, x: &[f64]) -> f64 {
        match self {
            Self::Components(cs) => cs.iter().enumerate().map(|(k, c)| {
                c.bumps.iter().map(|b| b.partial(dom, x, k)).sum::<f64>()
            }).sum(),
            Self::Gradient(f) => f.laplacian(dom, x),
            Self::Sum(vs) => vs.iter().map(|v| v.divergence(dom, x)).sum(),
            Self::Scaled(c, v) => c * v.divergence(dom, x),
        }
    }

    /// `div_σ v = ⟨β^σ, v⟩ + div v`.
    pub fn divergence_sigma(&self, dom: &TorusDomain, sigma: &IntensityMeasure, x: &[f64]) -> f64 {
        let div = self.divergence(dom, x);
        match sigma {
            IntensityMeasure::Uniform { .. } => div,
            IntensityMeasure::Density(_) => {
                let mut beta = vec![0.0; dom.dim()];
                sigma.log_derivative(dom, x, &mut beta);
                let v = self.value(dom, x);
                div + beta.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
            }
        }
    }

    /// Values at every point of `γ`, flat `n·d`.
    pub fn values_on(&self, g: &Configuration) -> Vec<f64> {
        let d = g.dim();
        let mut out = vec![0.0; g.len() * d];
        for (i, x) in g.points().enumerate() {
            self.add_value(g.domain(), x, 1.0, &mut out[i * d..(i + 1) * d]);
        }
        out
    }
}

/// Element of `T_γΓ = L²(X → TX; γ)`: one vector per point of `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    dim: usize,
    data: Vec<f64>,
}

impl TangentVector {
    pub fn zeros(dim: usize, n: usize) -> Self {
        Self { dim, data: vec![0.0; dim * n] }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len() % dim, 0);
        Self { dim, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// `Σ_{x∈γ} ⟨V(x), W(x)⟩`.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "tangent vectors over different configurations");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

/// `F(γ) = g(⟨f₁,γ⟩, …, ⟨f_N,γ⟩)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    pub outer: Outer,
    pub inner: Vec<BumpSum>,
}

impl CylinderFunction {
    pub fn new(outer: Outer, inner: Vec<BumpSum>) -> Result<Self> {
        if inner.is_empty() {
            return Err(Error::InvalidParameter("cylinder function needs at least one test function".into()));
        }
        if outer.arity() > inner.len() {
            return Err(Error::InvalidParameter(format!(
                "outer function uses {} arguments but only {} test functions given",
                outer.arity(),
                inner.len()
            )));
        }
        Ok(Self { outer, inner })
    }

    /// `⟨f, ·⟩` itself.
    pub fn linear(f: BumpSum) -> Self {
        Self { outer: Outer::var(0), inner: vec![f] }
    }

    /// Constant function `c` (a single dummy test function keeps `N >= 1`).
    pub fn constant(c: f64) -> Self {
        Self { outer: Outer::constant(c), inner: vec![BumpSum::zero()] }
    }

    pub fn n_args(&self) -> usize {
        self.inner.len()
    }

    pub fn pairings(&self, g: &Configuration) -> Vec<f64> {
        let dom = g.domain();
        self.inner.iter().map(|f| g.pair_unchecked(|x| f.value(dom, x))).collect()
    }

    pub fn eval(&self, g: &Configuration) -> f64 {
        self.outer.eval(&self.pairings(g))
    }

    /// `∇^Γ F(γ)`.
    pub fn gradient(&self, g: &Configuration) -> TangentVector {
        let jet = self.outer.jet(&self.pairings(g));
        self.gradient_with(&jet.grad, g)
    }

    fn gradient_with(&self, dg: &[f64], g: &Configuration) -> TangentVector {
        let d = g.dim();
        let dom = g.domain();
        let mut tv = TangentVector::zeros(d, g.len());
        for (i, x) in g.points().enumerate() {
            let out = &mut tv.data[i * d..(i + 1) * d];
            for (f, &c) in self.inner.iter().zip(dg) {
                if c != 0.0 {
                    f.add_gradient(dom, x, c, out);
                }
            }
        }
        tv
    }

    /// `∇_v^Γ F(γ) = ⟨∇^Γ F(γ), v⟩_{T_γΓ}`.
    pub fn directional_derivative(&self, v: &VectorField, g: &Configuration) -> f64 {
        let grad = self.gradient(g);
        let vals = VectorField::values_on(v, g);
        grad.flat().iter().zip(&vals).map(|(a, b)| a * b).sum()
    }

    /// `Δ^Γ F(γ)`.
    pub fn laplacian(&self, g: &Configuration) -> f64 {
        let jet = self.outer.jet(&self.pairings(g));
        self.laplacian_with(&jet, g)
    }

    fn laplacian_with(&self, jet: &Jet, g: &Configuration) -> f64 {
        let n = self.n_args();
        let d = g.dim();
        let dom = g.domain();
        // ⟨⟨∇fᵢ,∇fⱼ⟩, γ⟩ and ⟨Δfᵢ, γ⟩
        let mut gram = vec![0.0; n * n];
        let mut lap = vec![0.0; n];
        let mut grads = vec![0.0; n * d];
        for x in g.points() {
            grads.iter_mut().for_each(|v| *v = 0.0);
            for (i, f) in self.inner.iter().enumerate() {
                f.add_gradient(dom, x, 1.0, &mut grads[i * d..(i + 1) * d]);
                lap[i] += f.laplacian(dom, x);
            }
            for i in 0..n {
                for j in i..n {
                    let dot: f64 = (0..d).map(|k| grads[i * d + k] * grads[j * d + k]).sum();
                    gram[i * n + j] += dot;
                }
            }
        }
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let gij = if i <= j { gram[i * n + j] } else { gram[j * n + i] };
                acc += jet.hess_at(i, j) * gij;
            }
            acc += jet.grad[i] * lap[i];
        }
        acc
    }

    /// `∂ᵢg(⟨f,·⟩)` as a cylinder function, used to write `∇^Γ F` as `Σ Fᵢ ∇fᵢ`.
    pub fn partial(&self, i: usize) -> CylinderFunction {
        CylinderFunction { outer: self.outer.derivative(i), inner: self.inner.clone() }
    }

    /// The finitely based representation `∇^Γ F = Σᵢ (∂ᵢg ∘ pairings)·∇fᵢ`.
    pub fn gradient_representation(&self) -> Vec<(CylinderFunction, VectorField)> {
        (0..self.n_args())
            .map(|i| (self.partial(i), VectorField::Gradient(self.inner[i].clone())))
            .collect()
    }

    pub fn product(&self, other: &CylinderFunction) -> CylinderFunction {
        let shift = self.n_args();
        CylinderFunction {
            outer: self.outer.clone() * shift_vars(&other.outer, shift),
            inner: self.inner.iter().chain(&other.inner).cloned().collect(),
        }
    }

    /// `χ ∘ F` where `χ` is an outer expression in one variable.
    pub fn compose(&self, chi: &Outer) -> CylinderFunction {
        CylinderFunction { outer: substitute(chi, &self.outer), inner: self.inner.clone() }
    }
}

fn shift_vars(e: &Outer, by: usize) -> Outer {
    match e {
        Outer::Var(i) => Outer::Var(i + by),
        Outer::Const(c) => Outer::Const(*c),
        Outer::Add(a, b) => shift_vars(a, by) + shift_vars(b, by),
        Outer::Mul(a, b) => shift_vars(a, by) * shift_vars(b, by),
        Outer::Tanh(a) => shift_vars(a, by).tanh(),
        Outer::Powi(a, k) => shift_vars(a, by).powi(*k),
    }
}

fn substitute(chi: &Outer, inner: &Outer) -> Outer {
    match chi {
        Outer::Var(_) => inner.clone(),
        Outer::Const(c) => Outer::Const(*c),
        Outer::Add(a, b) => substitute(a, inner) + substitute(b, inner),
        Outer::Mul(a, b) => substitute(a, inner) * substitute(b, inner),
        Outer::Tanh(a) => substitute(a, inner).tanh(),
        Outer::Powi(a, k) => substitute(a, inner).powi(*k),
    }
}

/// One RK4 step of `ẋ = v(x)` on the torus.
fn rk4_step(v: &VectorField, dom: &TorusDomain, x: &mut [f64], h: f64, scratch: &mut [Vec<f64>; 5]) {
    let [k1, k2, k3, k4, tmp] = scratch;
    let d = x.len();
    let eval = |p: &[f64], out: &mut Vec<f64>| {
        out.iter_mut().for_each(|c| *c = 0.0);
        v.add_value(dom, p, 1.0, out);
    };
    eval(x, k1);
    for k in 0..d {
        tmp[k] = x[k] + 0.5 * h * k1[k];
    }
    eval(tmp, k2);
    for k in 0..d {
        tmp[k] = x[k] + 0.5 * h * k2[k];
    }
    eval(tmp, k3);
    for k in 0..d {
        tmp[k] = x[k] + h * k3[k];
    }
    eval(tmp, k4);
    for k in 0..d {
        x[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    dom.wrap_in_place(x);
}

/// `ψ_t^v(γ) = {ψ_t^v(x) | x ∈ γ}`, integrated by RK4 with step `t/⌈|t|/10⁻³⌉`.
pub fn lift_flow(v: &VectorField, t: f64, g: &Configuration) -> Configuration {
    let mut out = g.clone();
    if t == 0.0 {
        return out;
    }
    let steps = (t.abs() / FLOW_STEP).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let dom = *g.domain();
    let d = dom.dim();
    let mut scratch = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    for i in 0..out.len() {
        let x = out.point_mut(i);
        if v.value(&dom, x).iter().all(|&c| c == 0.0) && v.divergence(&dom, x) == 0.0 {
            // outside supp v the flow is the identity
            continue;
        }
        for _ in 0..steps {
            rk4_step(v, &dom, x, h, &mut scratch);
        }
    }
    out
}

/// `∇_v^Γ F(γ)`.
pub fn directional_derivative(f: &CylinderFunction, v: &VectorField, g: &Configuration) -> f64 {
    f.directional_derivative(v, g)
}

/// `div^Γ V` for `V = Σᵢ Fᵢ·vᵢ`.
pub fn divergence(terms: &[(CylinderFunction, VectorField)], g: &Configuration) -> f64 {
    let dom = g.domain();
    terms
        .iter()
        .map(|(f, v)| {
            let div_pair = g.pair_unchecked(|x| v.divergence(dom, x));
            f.directional_derivative(v, g) + f.eval(g) * div_pair
        })
        .sum()
}

/// `Δ^Γ F(γ)`.
pub fn laplacian(f: &CylinderFunction, g: &Configuration) -> f64 {
    f.laplacian(g)
}

/// Interaction term `−Σ_{{x,y}⊂γ} ⟨∇φ(x−y), v(x) − v(y)⟩`.
pub fn interaction_term(phi: &PairPotential, v: &VectorField, g: &Configuration) -> Result<f64> {
    if phi.is_zero() || g.len() < 2 {
        return Ok(0.0);
    }
    let d = g.dim();
    let dom = g.domain();
    let vals = v.values_on(g);
    let mut disp = vec![0.0; d];
    let mut acc = 0.0;
    let mut err = None;
    potential::visit_pairs_within(g, phi.r_cut(), |i, j, r| {
        if err.is_some() {
            return;
        }
        if r == 0.0 || !phi.eval(r).is_finite() {
            err = Some(Error::SingularGradient { r });
            return;
        }
        dom.displacement_into(g.point(i), g.point(j), &mut disp);
        let c = phi.radial_derivative(r) / r;
        let mut dot = 0.0;
        for k in 0..d {
            dot += c * disp[k] * (vals[i * d + k] - vals[j * d + k]);
        }
        acc -= dot;
    });
    match err {
        Some(e) => Err(e),
        None => Ok(acc),
    }
}

/// Logarithmic derivative `B_v^φ = interaction term + ⟨div v, γ⟩`.
pub fn log_derivative(phi: &PairPotential, v: &VectorField, g: &Configuration) -> Result<f64> {
    let dom = g.domain();
    Ok(interaction_term(phi, v, g)? + g.pair_unchecked(|x| v.divergence(dom, x)))
}

/// As [`log_derivative`] with `div v` replaced by `div_σ v = ⟨β^σ, v⟩ + div v`.
pub fn log_derivative_sigma(
    phi: &PairPotential,
    sigma: &IntensityMeasure,
    v: &VectorField,
    g: &Configuration,
) -> Result<f64> {
    let dom = g.domain();
    Ok(interaction_term(phi, v, g)? + g.pair_unchecked(|x| v.divergence_sigma(dom, sigma, x)))
}

/// Generator of the interacting diffusion applied to `F`:
/// `Δ^Γ F(γ) − Σ_{x∈γ} Σ_{y≠x} ⟨∇φ(x−y), ∇^Γ F(γ)(x)⟩`.
pub fn generator_apply(phi: &PairPotential, f: &CylinderFunction, g: &Configuration) -> Result<f64> {
    let jet = f.outer.jet(&f.pairings(g));
    let lap = f.laplacian_with(&jet, g);
    if phi.is_zero() || g.len() < 2 || f.n_args() == 0 {
        return Ok(lap);
    }
    let b = potential::drift(phi, g)?;
    let grad = f.gradient_with(&jet.grad, g);
    Ok(lap + grad.flat().iter().zip(&b).map(|(a, c)| a * c).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn dom() -> TorusDomain {
        TorusDomain::new(2, 6.0).unwrap()
    }

    fn bump(c: [f64; 2], r: f64, a: f64) -> BumpSum {
        BumpSum::single(BumpFunction::new(&dom(), c.to_vec(), r, a).unwrap())
    }

    fn config(n: usize, seed: u64) -> Configuration {
        let mut rng = stream_rng(seed, 0);
        let flat: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>() * 6.0).collect();
        Configuration::from_flat(dom(), flat).unwrap()
    }

    fn field() -> VectorField {
        VectorField::Components(vec![bump([3.0, 3.0], 2.0, 0.8), bump([2.5, 3.5], 1.7, -0.6)])
    }

    #[test]
    fn eval_trivial_cases() {
        let f = bump([3.0, 3.0], 1.5, 1.0);
        let g0 = Configuration::empty(dom());
        let cf = CylinderFunction::new(Outer::var(0).tanh() + Outer::constant(0.25), vec![f.clone()]).unwrap();
        assert_eq!(cf.eval(&g0), 0.25);
        let g = config(15, 1);
        let lin = CylinderFunction::linear(f.clone());
        assert_eq!(lin.eval(&g), g.pair(|x| f.value(&dom(), x)).unwrap());
    }

    #[test]
    fn arity_is_checked() {
        assert!(CylinderFunction::new(Outer::var(2), vec![BumpSum::zero()]).is_err());
        assert!(CylinderFunction::new(Outer::var(0), vec![]).is_err());
    }

    #[test]
    fn gradient_special_cases() {
        let g = config(10, 2);
        let c = CylinderFunction::constant(3.0);
        assert!(c.gradient(&g).flat().iter().all(|&v| v == 0.0));
        let f = bump([3.0, 3.0], 2.0, 1.0);
        let lin = CylinderFunction::linear(f.clone());
        let grad = lin.gradient(&g);
        for (i, x) in g.points().enumerate() {
            assert_eq!(grad.at(i), f.gradient(&dom(), x).as_slice());
        }
    }

    #[test]
    fn flow_identity_cases_and_group_property() {
        let g = config(12, 3);
        assert_eq!(lift_flow(&field(), 0.0, &g), g);
        assert_eq!(lift_flow(&VectorField::zero(2), 0.3, &g), g);
        let (t, s) = (0.013, 0.021);
        let two_leg = lift_flow(&field(), t, &lift_flow(&field(), s, &g));
        let one_leg = lift_flow(&field(), t + s, &g);
        for i in 0..g.len() {
            assert!(dom().distance(two_leg.point(i), one_leg.point(i)) < 1e-8);
        }
    }

    #[test]
    fn directional_derivative_matches_flow_difference() {
        let f1 = bump([3.0, 3.0], 2.2, 1.0);
        let f2 = bump([2.0, 4.0], 1.5, 0.7);
        let cf = CylinderFunction::new(
            (Outer::var(0) * Outer::var(1) + Outer::var(0)).tanh() + Outer::var(1).powi(2),
            vec![f1, f2],
        )
        .unwrap();
        let v = field();
        for seed in 0..10 {
            let g = config(20, 10 + seed);
            let an = cf.directional_derivative(&v, &g);
            let t = 1e-4;
            let fd = (cf.eval(&lift_flow(&v, t, &g)) - cf.eval(&lift_flow(&v, -t, &g))) / (2.0 * t);
            assert!((an - fd).abs() <= 1e-5 * (1.0 + an.abs()), "{an} vs {fd}");
        }
    }

    #[test]
    fn divergence_of_constant_functional_is_pairing() {
        let g = config(25, 4);
        let v = field();
        let div = divergence(&[(CylinderFunction::constant(1.0), v.clone())], &g);
        let pair = g.pair(|x| v.divergence(&dom(), x)).unwrap();
        assert!((div - pair).abs() < 1e-14);
        assert_eq!(divergence(&[(CylinderFunction::constant(1.0), v)], &Configuration::empty(dom())), 0.0);
    }

    #[test]
    fn laplacian_of_square_pairing() {
        let f = bump([3.0, 3.0], 2.0, 1.3);
        let sq = CylinderFunction::new(Outer::var(0).powi(2), vec![f.clone()]).unwrap();
        let g = config(30, 5);
        let d = dom();
        let grad2 = g.pair(|x| f.gradient(&d, x).iter().map(|c| c * c).sum()).unwrap();
        let pf = g.pair(|x| f.value(&d, x)).unwrap();
        let lf = g.pair(|x| f.laplacian(&d, x)).unwrap();
        let expect = 2.0 * grad2 + 2.0 * pf * lf;
        assert!((sq.laplacian(&g) - expect).abs() < 1e-10 * (1.0 + expect.abs()));
        let lin = CylinderFunction::linear(f.clone());
        assert!((lin.laplacian(&g) - lf).abs() < 1e-14);
    }

    #[test]
    fn interaction_term_trivial_cases() {
        let lj = PairPotential::lennard_jones_tapered(1.0, 1.0, 2.5, 0.5).unwrap();
        let v = field();
        assert_eq!(interaction_term(&lj, &v, &Configuration::empty(dom())).unwrap(), 0.0);
        let one = Configuration::from_points(dom(), &[[2.0, 2.0]]).unwrap();
        assert_eq!(interaction_term(&lj, &v, &one).unwrap(), 0.0);
        let two = Configuration::from_points(dom(), &[[2.0, 2.0], [3.1, 2.4]]).unwrap();
        let disp = dom().displacement(two.point(0), two.point(1));
        let gphi = lj.grad(&disp).unwrap();
        let v0 = v.value(&dom(), two.point(0));
        let v1 = v.value(&dom(), two.point(1));
        let expect = -(0..2).map(|k| gphi[k] * (v0[k] - v1[k])).sum::<f64>();
        assert!((interaction_term(&lj, &v, &two).unwrap() - expect).abs() < 1e-15);
        let overlap = Configuration::from_points(dom(), &[[2.0, 2.0], [2.0, 2.0]]).unwrap();
        assert!(interaction_term(&lj, &v, &overlap).is_err());
    }

    #[test]
    fn log_derivative_free_case() {
        let g = config(20, 6);
        let v = field();
        let b = log_derivative(&PairPotential::Zero, &v, &g).unwrap();
        assert_eq!(b, g.pair(|x| v.divergence(&dom(), x)).unwrap());
        assert_eq!(log_derivative(&PairPotential::Zero, &v, &Configuration::empty(dom())).unwrap(), 0.0);
    }

    #[test]
    fn generator_reduces_to_laplacian() {
        let f = CylinderFunction::new(Outer::var(0).tanh(), vec![bump([3.0, 3.0], 2.0, 1.0)]).unwrap();
        let g = config(10, 7);
        assert_eq!(generator_apply(&PairPotential::Zero, &f, &g).unwrap(), f.laplacian(&g));
        let lj = PairPotential::lennard_jones_tapered(1.0, 1.0, 2.5, 0.5).unwrap();
        let one = Configuration::from_points(dom(), &[[3.2, 2.9]]).unwrap();
        assert_eq!(generator_apply(&lj, &f, &one).unwrap(), f.laplacian(&one));
    }
}
