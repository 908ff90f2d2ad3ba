//! Monte Carlo identity tests and the estimator plumbing they share.

mod estimator;
pub mod stats;
pub mod suites;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{self, CylinderFunction, VectorField};
use crate::configuration::Configuration;
use crate::domain::Window;
use crate::error::{Error, Result};
use crate::intensity::{IntensityMeasure, TensorRule};
use crate::potential::{InsertionEnergy, PairPotential};

pub use estimator::{aggregate, merge_columns, run_sharded, z_score, EstimatorResult, Moments, SHARD_SIZE};

/// Two-sided acceptance threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 4.0;
/// Power checks must exceed this.
pub const POWER_Z: f64 = 6.0;
/// Largest tolerated fraction of rejected samples.
pub const MAX_REJECTION_FRACTION: f64 = 1e-3;

/// One JSON result line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub test: String,
    pub params_hash: String,
    pub seed: u64,
    pub n: u64,
    pub mean: f64,
    pub stderr: f64,
    pub target: Option<f64>,
    pub z: Option<f64>,
    pub pass: bool,
}

impl ResultRecord {
    pub fn from_result(test: &str, params_hash: &str, seed: u64, r: &EstimatorResult, pass: bool) -> Self {
        Self {
            test: test.to_string(),
            params_hash: params_hash.to_string(),
            seed,
            n: r.n_samples,
            mean: r.mean,
            stderr: r.std_error,
            target: r.target,
            z: r.z_score,
            pass,
        }
    }
}

/// Both sides of an identity and the z-score of their paired difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lhs: EstimatorResult,
    pub rhs: EstimatorResult,
    pub difference: EstimatorResult,
}

impl IdentityReport {
    fn from_columns(cols: &[Moments]) -> Self {
        Self {
            lhs: EstimatorResult::from_moments(cols[0], None),
            rhs: EstimatorResult::from_moments(cols[1], None),
            difference: EstimatorResult::from_moments(cols[2], Some(0.0)),
        }
    }

    pub fn z(&self) -> f64 {
        self.difference.z_score.unwrap_or(0.0)
    }
}

/// `h(γ, x)`.
pub type PairFunctional = dyn Fn(&Configuration, &[f64]) -> f64 + Sync;

/// Everything the right-hand side of the Mecke identity needs besides `h`.
#[derive(Debug, Clone)]
pub struct MeckeSetup {
    pub sigma: IntensityMeasure,
    pub phi: PairPotential,
    /// Frozen points outside the sampling window (empty on the torus).
    pub boundary: Configuration,
    /// Support of `h` in `x`.
    pub h_window: Window,
    /// Gauss–Legendre nodes per panel and largest panel side.
    pub order: usize,
    pub max_panel: f64,
    /// Power check: omit `e^{−E_x}` from the right side.
    pub drop_energy_factor: bool,
}

impl MeckeSetup {
    pub fn new(sigma: IntensityMeasure, phi: PairPotential, boundary: Configuration, h_window: Window) -> Self {
        Self { sigma, phi, boundary, h_window, order: 8, max_panel: 0.25, drop_energy_factor: false }
    }

    fn rule(&self) -> TensorRule {
        let widest = (0..self.h_window.dim()).map(|k| self.h_window.extent(k)).fold(0.0, f64::max);
        let panels = (widest / self.max_panel).ceil().max(1.0) as usize;
        TensorRule::new(self.order, panels)
    }
}

/// Mecke identity: `E Σ_{x∈γ} h(γ,x)` against
/// `E ∫_{Λ_h} h(γ+ε_x, x)·e^{−E_x(γ)} σ(dx)`, sample by sample.
pub fn mecke_test(samples: &[Configuration], setup: &MeckeSetup, h: &PairFunctional) -> Result<IdentityReport> {
    if samples.is_empty() {
        return Err(Error::Empty("sample list"));
    }
    let dom = *samples[0].domain();
    let mut nodes = Vec::new();
    setup.rule().for_each_node(&setup.h_window, |x, w| {
        nodes.push((x.to_vec(), w * setup.sigma.density(&dom, x)));
    });
    let boundary = InsertionEnergy::new(&setup.phi, &setup.boundary);
    let shards: Vec<Result<Vec<Moments>>> = samples
        .par_chunks(SHARD_SIZE)
        .map(|chunk| {
            let mut cols = vec![Moments::default(); 3];
            for g in chunk {
                let lhs: f64 = g.points().map(|x| h(g, x)).sum();
                let inner = InsertionEnergy::new(&setup.phi, g);
                let mut scratch = g.clone();
                let mut rhs = 0.0;
                for (x, w) in &nodes {
                    scratch.push_unchecked(x);
                    let hv = h(&scratch, x);
                    scratch.pop_unchecked();
                    if hv == 0.0 {
                        continue;
                    }
                    let factor = if setup.drop_energy_factor {
                        1.0
                    } else {
                        (-(inner.at(x) + boundary.at(x))).exp()
                    };
                    rhs += w * hv * factor;
                }
                if !rhs.is_finite() {
                    return Err(Error::QuadratureNotConverged { rel_err: f64::NAN });
                }
                cols[0].push(lhs);
                cols[1].push(rhs);
                cols[2].push(lhs - rhs);
            }
            Ok(cols)
        })
        .collect();
    let shards = shards.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(IdentityReport::from_columns(&merge_columns(&shards)))
}

/// A triple `(F, G, v)` for the integration-by-parts statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbpCase {
    pub f: CylinderFunction,
    pub g: CylinderFunction,
    pub v: VectorField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IbpReport {
    pub result: EstimatorResult,
    pub rejected: u64,
    pub rejection_fraction: f64,
}

impl IbpReport {
    pub fn passes(&self) -> bool {
        self.result.passes(Z_THRESHOLD) && self.rejection_fraction <= MAX_REJECTION_FRACTION
    }
}

/// `E[∇_v F·G + F·∇_v G + F·G·B_v]` against 0. With a density intensity the
/// divergence term uses `div_σ v`. Samples with a singular interaction term
/// are rejected and counted.
pub fn ibp_test(
    samples: &[Configuration],
    phi: &PairPotential,
    sigma: &IntensityMeasure,
    case: &IbpCase,
) -> Result<IbpReport> {
    if samples.is_empty() {
        return Err(Error::Empty("sample list"));
    }
    let shards: Vec<(Moments, u64)> = samples
        .par_chunks(SHARD_SIZE)
        .map(|chunk| {
            let mut m = Moments::default();
            let mut rejected = 0;
            for g in chunk {
                let b = match calculus::log_derivative_sigma(phi, sigma, &case.v, g) {
                    Ok(b) => b,
                    Err(_) => {
                        rejected += 1;
                        continue;
                    }
                };
                let (fv, gv) = (case.f.eval(g), case.g.eval(g));
                let s = case.f.directional_derivative(&case.v, g) * gv
                    + fv * case.g.directional_derivative(&case.v, g)
                    + fv * gv * b;
                m.push(s);
            }
            (m, rejected)
        })
        .collect();
    let m = shards.iter().fold(Moments::default(), |acc, (s, _)| acc.merge(s));
    let rejected: u64 = shards.iter().map(|(_, r)| r).sum();
    Ok(IbpReport {
        result: EstimatorResult::from_moments(m, Some(0.0)),
        rejected,
        rejection_fraction: rejected as f64 / samples.len() as f64,
    })
}

/// `E[⟨V, ∇^Γ F⟩ + div^Γ V · F]` against 0 for `V = Σ Fᵢ vᵢ`.
pub fn volume_element_test(
    samples: &[Configuration],
    terms: &[(CylinderFunction, VectorField)],
    f: &CylinderFunction,
) -> Result<EstimatorResult> {
    if samples.is_empty() {
        return Err(Error::Empty("sample list"));
    }
    let shards: Vec<Moments> = samples
        .par_chunks(SHARD_SIZE)
        .map(|chunk| {
            let mut m = Moments::default();
            for g in chunk {
                let inner: f64 = terms.iter().map(|(fi, vi)| fi.eval(g) * f.directional_derivative(vi, g)).sum();
                m.push(inner + calculus::divergence(terms, g) * f.eval(g));
            }
            m
        })
        .collect();
    let m = shards.iter().fold(Moments::default(), |acc, s| acc.merge(s));
    Ok(EstimatorResult::from_moments(m, Some(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{BumpFunction, BumpSum, Outer};
    use crate::domain::TorusDomain;
    use crate::intensity::PoissonSampler;

    fn poisson_samples(dom: TorusDomain, z: f64, n: usize, seed: u64) -> Vec<Configuration> {
        let sampler = PoissonSampler::new(IntensityMeasure::uniform(z).unwrap(), dom, dom.whole()).unwrap();
        run_sharded(seed, 0, n, |rng, _, k| (0..k).map(|_| sampler.sample(rng).unwrap()).collect::<Vec<_>>())
            .into_iter()
            .flatten()
            .collect()
    }

    #[test]
    fn mecke_free_indicator_both_sides_are_mass() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let w = Window::cube(&dom, 1.0, 2.0).unwrap();
        let samples = poisson_samples(dom, 1.5, 4_000, 1);
        let setup = MeckeSetup::new(IntensityMeasure::uniform(1.5).unwrap(), PairPotential::Zero, Configuration::empty(dom), w.clone());
        let wc = w.clone();
        let rep = mecke_test(&samples, &setup, &move |_, x| if wc.contains(x) { 1.0 } else { 0.0 }).unwrap();
        // RHS integrates the mass exactly on every sample
        assert!((rep.rhs.mean - 6.0).abs() < 1e-10);
        assert!(rep.rhs.std_error < 1e-10);
        assert!(rep.z().abs() < 4.0);
    }

    #[test]
    fn mecke_free_count_weighted() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let w = Window::cube(&dom, 1.0, 2.0).unwrap();
        let samples = poisson_samples(dom, 1.0, 20_000, 2);
        let setup = MeckeSetup::new(IntensityMeasure::uniform(1.0).unwrap(), PairPotential::Zero, Configuration::empty(dom), w.clone());
        let wc = w.clone();
        let h = move |g: &Configuration, x: &[f64]| if wc.contains(x) { g.count(&wc) as f64 } else { 0.0 };
        let rep = mecke_test(&samples, &setup, &h).unwrap();
        let m = 4.0;
        assert!(((rep.lhs.mean - (m + m * m)) / rep.lhs.std_error).abs() < 4.0);
        assert!(rep.z().abs() < 4.0);
    }

    #[test]
    fn ibp_trivial_constants() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let samples = poisson_samples(dom, 2.0, 2_000, 3);
        let one = CylinderFunction::constant(1.0);
        let v = VectorField::Components(vec![
            BumpSum::single(BumpFunction::new(&dom, vec![2.0, 2.0], 1.5, 1.0).unwrap()),
            BumpSum::zero(),
        ]);
        let case = IbpCase { f: one.clone(), g: one, v };
        let rep = ibp_test(&samples, &PairPotential::Zero, &IntensityMeasure::uniform(2.0).unwrap(), &case).unwrap();
        assert!(rep.passes());
        assert_eq!(rep.rejected, 0);
    }

    #[test]
    fn volume_element_trivial_cases() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let samples = poisson_samples(dom, 2.0, 1_000, 4);
        let f = CylinderFunction::new(
            Outer::var(0).tanh(),
            vec![BumpSum::single(BumpFunction::new(&dom, vec![2.0, 2.0], 1.5, 1.0).unwrap())],
        )
        .unwrap();
        let zero = volume_element_test(&samples, &[(f.clone(), VectorField::zero(2))], &f).unwrap();
        assert_eq!((zero.mean, zero.std_error), (0.0, 0.0));
        let v = VectorField::Gradient(BumpSum::single(BumpFunction::new(&dom, vec![1.0, 2.5], 1.2, 0.8).unwrap()));
        let r = volume_element_test(&samples, &[(f, v)], &CylinderFunction::constant(1.0)).unwrap();
        assert!(r.passes(4.0));
    }
}
