//! Intensity measures `σ = ρ·m`, (mixed) Poisson sampling on windows, and
//! the closed-form targets those samplers are checked against.

pub mod quadrature;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::calculus::BumpSum;
use crate::configuration::Configuration;
use crate::domain::{TorusDomain, Window};
use crate::error::{Error, Result};

pub use quadrature::{integrate_checked, GaussLegendre, QuadratureValue, TensorRule};

/// Relative tolerance for the 32-vs-48 node comparison.
pub const QUADRATURE_REL_TOL: f64 = 1e-8;
pub const MAX_REFINE: usize = 4;

/// A smooth density `ρ(x) = base + Σ bumps(x)` with a declared upper bound
/// used for rejection sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothDensity {
    pub base: f64,
    pub bumps: BumpSum,
    pub rho_max: f64,
}

impl SmoothDensity {
    pub fn new(base: f64, bumps: BumpSum, rho_max: f64) -> Result<Self> {
        if !(base >= 0.0 && base.is_finite()) {
            return Err(Error::InvalidParameter(format!("density base {base} must be >= 0")));
        }
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(Error::InvalidParameter(format!("rho_max {rho_max} must be positive")));
        }
        Ok(Self { base, bumps, rho_max })
    }

    #[inline]
    pub fn value(&self, dom: &TorusDomain, x: &[f64]) -> f64 {
        self.base + self.bumps.value(dom, x)
    }

    /// Logarithmic derivative `β = ∇ρ/ρ`, zero where `ρ = 0`.
    pub fn log_derivative(&self, dom: &TorusDomain, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let rho = self.value(dom, x);
        if rho <= 0.0 {
            return;
        }
        self.bumps.add_gradient(dom, x, 1.0 / rho, out);
    }

    pub fn scaled(&self, c: f64) -> SmoothDensity {
        SmoothDensity {
            base: self.base * c,
            bumps: self.bumps.scaled(c),
            rho_max: self.rho_max * c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityMeasure {
    /// `σ = z·m`.
    Uniform { z: f64 },
    /// `σ = ρ·m`.
    Density(SmoothDensity),
}

impl IntensityMeasure {
    pub fn uniform(z: f64) -> Result<Self> {
        if !(z >= 0.0 && z.is_finite()) {
            return Err(Error::InvalidParameter(format!("activity {z} must be finite and >= 0")));
        }
        Ok(Self::Uniform { z })
    }

    /// Density `ρ(x)` of `σ` against Lebesgue measure.
    #[inline]
    pub fn density(&self, dom: &TorusDomain, x: &[f64]) -> f64 {
        match self {
            Self::Uniform { z } => *z,
            Self::Density(d) => d.value(dom, x),
        }
    }

    /// `z·σ`.
    pub fn scaled(&self, c: f64) -> IntensityMeasure {
        match self {
            Self::Uniform { z } => Self::Uniform { z: z * c },
            Self::Density(d) => Self::Density(d.scaled(c)),
        }
    }

    /// `β^σ(x)`; identically zero for the uniform kind.
    pub fn log_derivative(&self, dom: &TorusDomain, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Uniform { .. } => out.iter_mut().for_each(|v| *v = 0.0),
            Self::Density(d) => d.log_derivative(dom, x, out),
        }
    }
}

/// `σ(Λ)`: exact for the uniform kind, Gauss–Legendre for densities.
pub fn window_mass(sigma: &IntensityMeasure, dom: &TorusDomain, window: &Window) -> Result<f64> {
    match sigma {
        IntensityMeasure::Uniform { z } => Ok(z * window.volume()),
        IntensityMeasure::Density(d) => {
            Ok(integrate_checked(window, |x| d.value(dom, x), QUADRATURE_REL_TOL, MAX_REFINE)?.value)
        }
    }
}

/// Fixed-order variant of [`window_mass`] (no convergence check).
pub fn window_mass_with_order(
    sigma: &IntensityMeasure,
    dom: &TorusDomain,
    window: &Window,
    order: usize,
) -> f64 {
    match sigma {
        IntensityMeasure::Uniform { z } => z * window.volume(),
        IntensityMeasure::Density(d) => TensorRule::new(order, 1).integrate(window, |x| d.value(dom, x)),
    }
}

/// Poisson sampler for a fixed `(σ, Λ)` with the window mass precomputed.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    sigma: IntensityMeasure,
    dom: TorusDomain,
    window: Window,
    mass: f64,
}

impl PoissonSampler {
    pub fn new(sigma: IntensityMeasure, dom: TorusDomain, window: Window) -> Result<Self> {
        let mass = window_mass(&sigma, &dom, &window)?;
        if !mass.is_finite() {
            return Err(Error::InvalidParameter("window mass must be finite".into()));
        }
        Ok(Self { sigma, dom, window, mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn sigma(&self) -> &IntensityMeasure {
        &self.sigma
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Configuration> {
        self.sample_scaled(1.0, rng)
    }

    /// Sample from `π_{zσ}` restricted to the window.
    pub fn sample_scaled<R: Rng + ?Sized>(&self, z: f64, rng: &mut R) -> Result<Configuration> {
        let mass = z * self.mass;
        let n = poisson_count(mass, rng);
        let d = self.dom.dim();
        let mut coords = Vec::with_capacity(n * d);
        let mut u = vec![0.0; d];
        let mut x = vec![0.0; d];
        match &self.sigma {
            IntensityMeasure::Uniform { .. } => {
                for _ in 0..n {
                    u.iter_mut().for_each(|v| *v = rng.random::<f64>());
                    self.window.from_unit(&u, &mut x);
                    coords.extend_from_slice(&x);
                }
            }
            IntensityMeasure::Density(dens) => {
                for _ in 0..n {
                    loop {
                        u.iter_mut().for_each(|v| *v = rng.random::<f64>());
                        self.window.from_unit(&u, &mut x);
                        let rho = dens.value(&self.dom, &x);
                        if rho > dens.rho_max {
                            return Err(Error::DensityBoundExceeded { value: rho, bound: dens.rho_max });
                        }
                        if rng.random::<f64>() * dens.rho_max < rho {
                            break;
                        }
                    }
                    coords.extend_from_slice(&x);
                }
            }
        }
        Ok(Configuration::from_flat_unchecked(self.dom, coords))
    }
}

/// `N ~ Poisson(mass)`, with `mass = 0` giving 0.
pub fn poisson_count<R: Rng + ?Sized>(mass: f64, rng: &mut R) -> usize {
    if mass <= 0.0 {
        return 0;
    }
    let p = Poisson::new(mass).expect("positive finite Poisson mean");
    let n: f64 = p.sample(rng);
    n as usize
}

/// One-shot Poisson sample on `Λ`.
pub fn sample_poisson<R: Rng + ?Sized>(
    sigma: &IntensityMeasure,
    dom: &TorusDomain,
    window: &Window,
    rng: &mut R,
) -> Result<Configuration> {
    PoissonSampler::new(sigma.clone(), *dom, window.clone())?.sample(rng)
}

/// Finitely supported mixing law `λ = Σ p_k δ_{z_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingLaw {
    atoms: Vec<(f64, f64)>,
}

impl MixingLaw {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("mixing law needs at least one atom"));
        }
        let mut total = 0.0;
        for &(z, p) in &atoms {
            if !(z >= 0.0 && z.is_finite()) {
                return Err(Error::InvalidParameter(format!("mixing atom z = {z} must be >= 0")));
            }
            if !(p > 0.0) {
                return Err(Error::InvalidParameter(format!("mixing weight {p} must be > 0")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixing weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(z: f64) -> Result<Self> {
        Self::new(vec![(z, 1.0)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `∫ z λ(dz)`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(z, p)| z * p).sum()
    }

    /// `∫ z² λ(dz)`.
    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|(z, p)| z * z * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    pub fn sample_z<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.atoms.len() == 1 {
            return self.atoms[0].0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(z, p) in &self.atoms {
            acc += p;
            if u < acc {
                return z;
            }
        }
        self.atoms[self.atoms.len() - 1].0
    }
}

/// Draws `z ~ λ`, then a Poisson sample with intensity `z·σ`.
pub fn sample_mixed_poisson<R: Rng + ?Sized>(
    law: &MixingLaw,
    sampler: &PoissonSampler,
    rng: &mut R,
) -> Result<(f64, Configuration)> {
    let z = law.sample_z(rng);
    let g = sampler.sample_scaled(z, rng)?;
    Ok((z, g))
}

/// `exp(∫_Λ (e^f − 1) dσ)` for `f ≤ 0` supported in `Λ`.
///
/// `f` may return `-∞` (giving the void probability in the limit).
pub fn laplace_transform_target<F: Fn(&[f64]) -> f64>(
    f: F,
    sigma: &IntensityMeasure,
    dom: &TorusDomain,
    window: &Window,
) -> Result<QuadratureValue> {
    let mut positive = None;
    let integrand = |x: &[f64]| {
        let v = f(x);
        if v > 0.0 && positive.is_none() {
            positive = Some(v);
        }
        (v.exp() - 1.0) * sigma.density(dom, x)
    };
    let q = integrate_checked(window, integrand, QUADRATURE_REL_TOL, MAX_REFINE)?;
    if let Some(v) = positive {
        return Err(Error::InvalidParameter(format!("Laplace functional needs f <= 0, saw {v}")));
    }
    let value = q.value.exp();
    Ok(QuadratureValue { value, abs_error: value * q.abs_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::BumpFunction;
    use crate::rng::stream_rng;

    fn dom() -> TorusDomain {
        TorusDomain::new(2, 4.0).unwrap()
    }

    fn bump_density() -> SmoothDensity {
        let b = BumpFunction::new(&dom(), vec![2.0, 2.0], 1.5, 3.0).unwrap();
        SmoothDensity::new(0.5, BumpSum::single(b), 0.5 + 3.0 / std::f64::consts::E).unwrap()
    }

    #[test]
    fn uniform_mass_is_exact() {
        let d = dom();
        let unit = Window::cube(&d, 0.0, 1.0).unwrap();
        assert_eq!(window_mass(&IntensityMeasure::uniform(1.0).unwrap(), &d, &unit).unwrap(), 1.0);
        let c = SmoothDensity::new(2.5, BumpSum::zero(), 3.0).unwrap();
        let w = Window::new(&d, vec![0.5, 1.0], vec![2.0, 3.0]).unwrap();
        let m = window_mass(&IntensityMeasure::Density(c), &d, &w).unwrap();
        assert!((m - 2.5 * 3.0).abs() < 1e-13);
    }

    #[test]
    fn bump_mass_matches_independent_monte_carlo() {
        let d = dom();
        let w = d.whole();
        let dens = bump_density();
        let q = window_mass(&IntensityMeasure::Density(dens.clone()), &d, &w).unwrap();
        let mut rng = stream_rng(11, 0);
        let n = 200_000;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = [rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0];
            let v = dens.value(&d, &x) * 16.0;
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(((mean - q) / se).abs() < 4.0, "quadrature {q}, mc {mean} ± {se}");
    }

    #[test]
    fn zero_mass_gives_empty() {
        let d = dom();
        let s = PoissonSampler::new(IntensityMeasure::uniform(0.0).unwrap(), d, d.whole()).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            assert!(s.sample(&mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn density_above_bound_is_an_error() {
        let d = dom();
        let mut dens = bump_density();
        dens.rho_max = 0.6;
        let s = PoissonSampler::new(IntensityMeasure::Density(dens), d, d.whole()).unwrap();
        let mut rng = stream_rng(2, 0);
        let mut saw = false;
        for _ in 0..50 {
            if let Err(Error::DensityBoundExceeded { .. }) = s.sample(&mut rng) {
                saw = true;
                break;
            }
        }
        assert!(saw);
    }

    #[test]
    fn samples_stay_in_window() {
        let d = dom();
        let w = Window::new(&d, vec![1.0, 0.5], vec![2.0, 3.0]).unwrap();
        let s = PoissonSampler::new(IntensityMeasure::Density(bump_density()), d, w.clone()).unwrap();
        let mut rng = stream_rng(3, 0);
        for _ in 0..200 {
            let g = s.sample(&mut rng).unwrap();
            assert!(g.points().all(|x| w.contains(x)));
        }
    }

    #[test]
    fn mixing_law_validation_and_moments() {
        assert!(MixingLaw::new(vec![]).is_err());
        assert!(MixingLaw::new(vec![(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(MixingLaw::new(vec![(-1.0, 1.0)]).is_err());
        let l = MixingLaw::new(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        assert_eq!(l.mean(), 2.0);
        assert_eq!(l.second_moment(), 5.0);
        assert_eq!(l.variance(), 1.0);
        let mut rng = stream_rng(4, 0);
        let pm = MixingLaw::point_mass(2.5).unwrap();
        assert!((0..10).all(|_| pm.sample_z(&mut rng) == 2.5));
    }

    #[test]
    fn laplace_target_trivial_cases() {
        let d = dom();
        let sigma = IntensityMeasure::uniform(2.0).unwrap();
        let w = Window::cube(&d, 0.0, 2.0).unwrap();
        let one = laplace_transform_target(|_| 0.0, &sigma, &d, &w).unwrap();
        assert_eq!(one.value, 1.0);
        let void = laplace_transform_target(|_| f64::NEG_INFINITY, &sigma, &d, &w).unwrap();
        assert!((void.value - (-8.0f64).exp()).abs() < 1e-15);
        assert!(laplace_transform_target(|_| 0.1, &sigma, &d, &w).is_err());
    }
}
