use serde::{Deserialize, Serialize};

use crate::domain::TorusDomain;
use crate::error::{Error, Result};

/// `a·exp(−1/(1 − s²))` with `s = |x − c| / R`, zero for `s ≥ 1`.
///
/// The profile is written in terms of `q = s²`, `ψ(q) = exp(−1/(1 − q))`:
/// `ψ' = −ψ/(1−q)²`, `ψ'' = ψ(2q − 1)/(1−q)⁴`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl BumpFunction {
    pub fn new(dom: &TorusDomain, center: Vec<f64>, radius: f64, amplitude: f64) -> Result<Self> {
        dom.check_dim(center.len())?;
        if !(radius > 0.0 && radius < 0.5 * dom.side()) {
            return Err(Error::InvalidParameter(format!(
                "bump radius {radius} must lie in (0, L/2)"
            )));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidParameter("bump amplitude must be finite".into()));
        }
        let center = dom.wrap(&center)?.into_coords();
        Ok(Self { center, radius, amplitude })
    }

    /// Returns `(q, u)` where `u = x − c` (minimal image) written into `u`.
    #[inline]
    fn rel(&self, dom: &TorusDomain, x: &[f64], u: &mut [f64]) -> f64 {
        dom.displacement_into(x, &self.center, u);
        let r2: f64 = u.iter().map(|v| v * v).sum();
        r2 / (self.radius * self.radius)
    }

    #[inline]
    pub fn value(&self, dom: &TorusDomain, x: &[f64]) -> f64 {
        let q = dom.distance_sq(x, &self.center) / (self.radius * self.radius);
        if q >= 1.0 {
            0.0
        } else {
            self.amplitude * (-1.0 / (1.0 - q)).exp()
        }
    }

    /// Adds `scale·∇f(x)` into `out`.
    #[inline]
    pub fn add_gradient(&self, dom: &TorusDomain, x: &[f64], scale: f64, out: &mut [f64]) {
        let d = dom.dim();
        let mut buf = [0.0f64; 8];
        let mut heap;
        let u: &mut [f64] = if d <= 8 {
            &mut buf[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let q = self.rel(dom, x, u);
        if q >= 1.0 {
            return;
        }
        let om = 1.0 - q;
        let psi = (-1.0 / om).exp();
        let dpsi = -psi / (om * om);
        let c = scale * self.amplitude * dpsi * 2.0 / (self.radius * self.radius);
        for (o, &ui) in out.iter_mut().zip(u.iter()) {
            *o += c * ui;
        }
    }

    /// Single component `∂f/∂x_axis`.
    pub fn partial(&self, dom: &TorusDomain, x: &[f64], axis: usize) -> f64 {
        let mut g = vec![0.0; dom.dim()];
        self.add_gradient(dom, x, 1.0, &mut g);
        g[axis]
    }

    #[inline]
    pub fn laplacian(&self, dom: &TorusDomain, x: &[f64]) -> f64 {
        let q = dom.distance_sq(x, &self.center) / (self.radius * self.radius);
        if q >= 1.0 {
            return 0.0;
        }
        let om = 1.0 - q;
        let psi = (-1.0 / om).exp();
        let dpsi = -psi / (om * om);
        let d2psi = psi * (2.0 * q - 1.0) / (om * om * om * om);
        let r2 = self.radius * self.radius;
        let d = dom.dim() as f64;
        // |∇q|² = 4q/R², Δq = 2d/R²
        self.amplitude * (d2psi * 4.0 * q / r2 + dpsi * 2.0 * d / r2)
    }

    /// `sup |∇f|` of the radial profile, found on a fine 1-d grid in `s`.
    pub fn gradient_sup(&self) -> f64 {
        let n = 20_000;
        let mut best = 0.0f64;
        for k in 1..n {
            let s = k as f64 / n as f64;
            let q = s * s;
            let om = 1.0 - q;
            let psi = (-1.0 / om).exp();
            let g = psi / (om * om) * 2.0 * s / self.radius;
            best = best.max(g);
        }
        best * self.amplitude.abs()
    }
}

/// Finite linear combination of bumps; the space of test functions used
/// throughout the calculus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BumpSum {
    pub bumps: Vec<BumpFunction>,
}

impl BumpSum {
    pub fn new(bumps: Vec<BumpFunction>) -> Self {
        Self { bumps }
    }

    pub fn single(b: BumpFunction) -> Self {
        Self { bumps: vec![b] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    #[inline]
    pub fn value(&self, dom: &TorusDomain, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.value(dom, x)).sum()
    }

    #[inline]
    pub fn add_gradient(&self, dom: &TorusDomain, x: &[f64], scale: f64, out: &mut [f64]) {
        for b in &self.bumps {
            b.add_gradient(dom, x, scale, out);
        }
    }

    pub fn gradient(&self, dom: &TorusDomain, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; dom.dim()];
        self.add_gradient(dom, x, 1.0, &mut g);
        g
    }

    #[inline]
    pub fn laplacian(&self, dom: &TorusDomain, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.laplacian(dom, x)).sum()
    }

    pub fn scaled(&self, c: f64) -> BumpSum {
        BumpSum {
            bumps: self
                .bumps
                .iter()
                .map(|b| BumpFunction { amplitude: b.amplitude * c, ..b.clone() })
                .collect(),
        }
    }

    pub fn plus(&self, other: &BumpSum) -> BumpSum {
        let mut bumps = self.bumps.clone();
        bumps.extend(other.bumps.iter().cloned());
        BumpSum { bumps }
    }

    /// Bounding window of the support (as a list of per-bump centers and radii).
    pub fn support_radius(&self) -> f64 {
        self.bumps.iter().map(|b| b.radius).fold(0.0, f64::max)
    }

    /// Lipschitz constant `sup|∇f|` estimated on a grid over the box.
    pub fn lipschitz_on_grid(&self, dom: &TorusDomain) -> f64 {
        if self.bumps.is_empty() {
            return 0.0;
        }
        if self.bumps.len() == 1 {
            return self.bumps[0].gradient_sup();
        }
        let min_r = self.bumps.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
        let d = dom.dim();
        let budget = 2_000_000f64;
        let mut per_axis = (dom.side() / (min_r / 60.0)).ceil();
        per_axis = per_axis.min(budget.powf(1.0 / d as f64).floor()).max(2.0);
        let m = per_axis as usize;
        let h = dom.side() / per_axis;
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        let mut g = vec![0.0; d];
        let mut best = 0.0f64;
        loop {
            for k in 0..d {
                x[k] = idx[k] as f64 * h;
            }
            g.iter_mut().for_each(|v| *v = 0.0);
            self.add_gradient(dom, &x, 1.0, &mut g);
            best = best.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
            let mut k = 0;
            loop {
                if k == d {
                    return best;
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
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom() -> TorusDomain {
        TorusDomain::new(2, 5.0).unwrap()
    }

    fn bump() -> BumpFunction {
        BumpFunction::new(&dom(), vec![4.5, 2.0], 1.3, 1.7).unwrap()
    }

    #[test]
    fn value_and_support() {
        let b = bump();
        let d = dom();
        assert!((b.value(&d, &[4.5, 2.0]) - 1.7 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(b.value(&d, &[2.0, 2.0]), 0.0);
        // wraps around the x = 0 face
        assert!(b.value(&d, &[0.2, 2.0]) > 0.0);
    }

    #[test]
    fn radius_must_fit_in_half_box() {
        assert!(BumpFunction::new(&dom(), vec![1.0, 1.0], 2.5, 1.0).is_err());
        assert!(BumpFunction::new(&dom(), vec![1.0, 1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn gradient_and_laplacian_match_finite_differences() {
        let b = bump();
        let d = dom();
        let pts = [[4.0, 2.3], [0.1, 1.5], [4.9, 2.9], [3.6, 1.4]];
        for x in pts {
            let g = BumpSum::single(b.clone()).gradient(&d, &x);
            let h = 1e-6;
            let mut lap_fd = 0.0;
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (b.value(&d, &xp) - b.value(&d, &xm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-7 * (1.0 + g[k].abs()), "{fd} vs {}", g[k]);
                let h2 = 1e-4;
                let mut xp = x;
                let mut xm = x;
                xp[k] += h2;
                xm[k] -= h2;
                lap_fd += (b.value(&d, &xp) - 2.0 * b.value(&d, &x) + b.value(&d, &xm)) / (h2 * h2);
            }
            let lap = b.laplacian(&d, &x);
            assert!((lap - lap_fd).abs() < 1e-5 * (1.0 + lap.abs()), "{lap} vs {lap_fd}");
        }
    }

    #[test]
    fn lipschitz_grid_close_to_radial_sup() {
        let d = dom();
        let b1 = BumpFunction::new(&d, vec![1.0, 1.0], 0.8, 1.0).unwrap();
        let b2 = BumpFunction::new(&d, vec![3.5, 3.5], 0.8, -2.0).unwrap();
        let s = BumpSum::new(vec![b1.clone(), b2.clone()]);
        let grid = s.lipschitz_on_grid(&d);
        let exact = b1.gradient_sup().max(b2.gradient_sup());
        assert!(grid <= exact * (1.0 + 1e-6));
        assert!(grid * 1.01 >= exact);
    }
}
