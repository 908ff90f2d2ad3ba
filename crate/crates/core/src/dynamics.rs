//! Free and interacting diffusions on the torus and the semigroup checks
//! built on them.
//!
//! Base generator is `Δ` (not `½Δ`), so one coordinate diffuses with variance
//! `2t`. The interacting process is `dXⁱ = √2 dWⁱ − Σ_{j≠i} ∇φ(Xⁱ−Xʲ) dt`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{self, BumpSum, CylinderFunction};
use crate::configuration::Configuration;
use crate::domain::{TorusDomain, Window};
use crate::error::{Error, Result};
use crate::gibbs;
use crate::intensity::{MixingLaw, PoissonSampler};
use crate::potential::{self, PairPotential};
use crate::rng::StreamRng;
use crate::verify::{run_sharded, stats, EstimatorResult, Moments, SHARD_SIZE, Z_THRESHOLD};

/// Halvings allowed when a step lands inside a hard core.
pub const MAX_STEP_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    pub dt: f64,
    pub n_steps: usize,
    /// Save every `save_every` steps (the start is always saved).
    pub save_every: usize,
    pub seed: u64,
}

impl TrajectoryParams {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        let p = Self { dt, n_steps, save_every: 1, seed: 0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be finite and > 0, got {}", self.dt)));
        }
        if self.n_steps == 0 || self.save_every == 0 {
            return Err(Error::InvalidParameter("n_steps and save_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Configuration>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn add_noise<R: Rng + ?Sized>(g: &mut Configuration, std: f64, rng: &mut R) {
    for c in g.flat_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        *c += std * xi;
    }
}

fn wrap_all(g: &mut Configuration) {
    let dom = *g.domain();
    for c in g.flat_mut() {
        *c = dom.wrap_coord(*c);
    }
}

/// Independent Brownian increments with standard deviation `√(2dt)`.
pub fn free_step<R: Rng + ?Sized>(g: &Configuration, dt: f64, rng: &mut R) -> Configuration {
    let mut out = g.clone();
    free_step_in_place(&mut out, dt, rng);
    out
}

pub fn free_step_in_place<R: Rng + ?Sized>(g: &mut Configuration, dt: f64, rng: &mut R) {
    add_noise(g, (2.0 * dt).sqrt(), rng);
    wrap_all(g);
}

fn violates_core(phi: &PairPotential, g: &Configuration) -> bool {
    let Some(r) = phi.hard_core_radius() else {
        return false;
    };
    let mut hit = false;
    potential::visit_pairs_within(g, r, |_, _, _| hit = true);
    hit
}

/// A step whose drift would move some point further than this fraction of
/// the interaction range is split in two. The test looks only at the
/// pre-step state, so it selects nothing about the noise.
pub const DRIFT_STEP_FRACTION: f64 = 0.02;

fn drift_cap(phi: &PairPotential, g: &Configuration) -> f64 {
    let r = phi.r_cut();
    let range = if r.is_finite() && r > 0.0 { r } else { 0.5 * g.domain().side() };
    DRIFT_STEP_FRACTION * range
}

fn max_point_norm(b: &[f64], d: usize) -> f64 {
    b.chunks(d).map(|v| v.iter().map(|c| c * c).sum::<f64>()).fold(0.0, f64::max).sqrt()
}

/// Advances by `dt`, splitting into half steps while the drift is too large
/// or the proposal lands in a hard core. `visit(state, h)` sees every
/// accepted sub-step in order.
fn advance<R: Rng + ?Sized>(
    phi: &PairPotential,
    g: &Configuration,
    dt: f64,
    depth: usize,
    rng: &mut R,
    visit: &mut dyn FnMut(&Configuration, f64) -> Result<()>,
) -> Result<Configuration> {
    let b = potential::drift(phi, g)?;
    if max_point_norm(&b, g.dim()) * dt <= drift_cap(phi, g) {
        let mut next = g.clone();
        for (c, bi) in next.flat_mut().iter_mut().zip(&b) {
            *c += bi * dt;
        }
        add_noise(&mut next, (2.0 * dt).sqrt(), rng);
        wrap_all(&mut next);
        if !violates_core(phi, &next) {
            visit(&next, dt)?;
            return Ok(next);
        }
    }
    if depth >= MAX_STEP_HALVINGS {
        return Err(Error::StepRejectionExhausted { retries: MAX_STEP_HALVINGS });
    }
    let mid = advance(phi, g, 0.5 * dt, depth + 1, rng, visit)?;
    advance(phi, &mid, 0.5 * dt, depth + 1, rng, visit)
}

/// One Euler–Maruyama step with drift from the pre-step configuration. Steps
/// with an oversized drift, or landing inside a hard core, are redone as two
/// half steps, recursively.
pub fn interacting_step<R: Rng + ?Sized>(
    phi: &PairPotential,
    g: &Configuration,
    dt: f64,
    rng: &mut R,
) -> Result<Configuration> {
    if phi.is_zero() {
        return Ok(free_step(g, dt, rng));
    }
    advance(phi, g, dt, 0, rng, &mut |_, _| Ok(()))
}

/// Simulates the interacting (or, for `φ = 0`, free) process.
pub fn simulate<R: Rng + ?Sized>(
    phi: &PairPotential,
    start: &Configuration,
    params: &TrajectoryParams,
    rng: &mut R,
) -> Result<Trajectory> {
    params.validate()?;
    let mut times = vec![0.0];
    let mut states = vec![start.clone()];
    let mut g = start.clone();
    for k in 1..=params.n_steps {
        g = interacting_step(phi, &g, params.dt, rng)?;
        if k % params.save_every == 0 || k == params.n_steps {
            times.push(k as f64 * params.dt);
            states.push(g.clone());
        }
    }
    Ok(Trajectory { times, states })
}

/// Both sides of the multi-time Laplace functional and their difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceReport {
    pub lhs: EstimatorResult,
    pub rhs: EstimatorResult,
    pub z: f64,
}

impl LaplaceReport {
    pub fn passes(&self) -> bool {
        self.z.abs() < Z_THRESHOLD
    }
}

#[derive(Debug, Clone)]
pub struct LaplaceSetup {
    pub dom: TorusDomain,
    pub law: MixingLaw,
    /// Non-positive fields with values above −1, one per time.
    pub fields: Vec<BumpSum>,
    pub times: Vec<f64>,
    pub n_systems: usize,
    pub n_singles: usize,
}

fn log1p_field(f: &BumpSum, dom: &TorusDomain, x: &[f64]) -> Result<f64> {
    let v = f.value(dom, x);
    if !(v > -1.0 && v <= 0.0) {
        return Err(Error::InvalidParameter(format!("test field value {v} outside (-1, 0]")));
    }
    Ok(v.ln_1p())
}

/// `E exp(Σᵢ ⟨log(1+fᵢ), X_{tᵢ}⟩)` for free dynamics from a mixed Poisson
/// start, against `Σ_k p_k exp(z_k·Lᵈ·E_x[Πᵢ(1+fᵢ(X_{tᵢ})) − 1])` with `x`
/// uniform. Both sides are Monte Carlo; the right side's error is carried by
/// the delta method.
pub fn laplace_functional_test(setup: &LaplaceSetup, seed: u64) -> Result<LaplaceReport> {
    let dom = setup.dom;
    if setup.fields.len() != setup.times.len() || setup.times.is_empty() {
        return Err(Error::InvalidParameter("need one field per time and at least one time".into()));
    }
    if setup.times[0] < 0.0 || setup.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("times must be >= 0 and strictly increasing".into()));
    }
    let gaps: Vec<f64> = std::iter::once(setup.times[0]).chain(setup.times.windows(2).map(|w| w[1] - w[0])).collect();
    let evolve = |x: &mut [f64], gap: f64, rng: &mut StreamRng| {
        if gap > 0.0 {
            let s = (2.0 * gap).sqrt();
            for c in x.iter_mut() {
                let xi: f64 = rng.sample(StandardNormal);
                *c = dom.wrap_coord(*c + s * xi);
            }
        }
    };
    let unit = crate::intensity::IntensityMeasure::uniform(1.0)?;
    let sampler = PoissonSampler::new(unit, dom, dom.whole())?;
    let lhs_shards = run_sharded(seed, 0, setup.n_systems, |rng, _, n| -> Result<Moments> {
        let mut m = Moments::default();
        for _ in 0..n {
            let (_, g) = crate::intensity::sample_mixed_poisson(&setup.law, &sampler, rng)?;
            let mut flat = g.flat().to_vec();
            let mut log_prod = 0.0;
            for (f, &gap) in setup.fields.iter().zip(&gaps) {
                evolve(&mut flat, gap, rng);
                for x in flat.chunks_exact(dom.dim()) {
                    log_prod += log1p_field(f, &dom, x)?;
                }
            }
            m.push(log_prod.exp());
        }
        Ok(m)
    });
    let rhs_shards = run_sharded(seed, 1 << 32, setup.n_singles, |rng, _, n| -> Result<Moments> {
        let mut m = Moments::default();
        let mut x = vec![0.0; dom.dim()];
        for _ in 0..n {
            x.iter_mut().for_each(|c| *c = rng.random::<f64>() * dom.side());
            let mut log_prod = 0.0;
            for (f, &gap) in setup.fields.iter().zip(&gaps) {
                evolve(&mut x, gap, rng);
                log_prod += log1p_field(f, &dom, &x)?;
            }
            m.push(log_prod.exp_m1());
        }
        Ok(m)
    });
    let lhs = lhs_shards.into_iter().try_fold(Moments::default(), |a, m| m.map(|m| a.merge(&m)))?;
    let single = rhs_shards.into_iter().try_fold(Moments::default(), |a, m| m.map(|m| a.merge(&m)))?;
    let v = dom.volume();
    let (mut rhs, mut slope) = (0.0, 0.0);
    for &(z, p) in setup.law.atoms() {
        let e = (z * v * single.mean).exp();
        rhs += p * e;
        slope += p * z * v * e;
    }
    let rhs_se = slope.abs() * single.std_error();
    let lhs_r = EstimatorResult::from_moments(lhs, None);
    let pooled = (lhs_r.std_error.powi(2) + rhs_se * rhs_se).sqrt();
    let z = crate::verify::z_score(lhs_r.mean, pooled, rhs);
    Ok(LaplaceReport { lhs: lhs_r, rhs: EstimatorResult::new(single.n, rhs, rhs_se, None), z })
}

/// Starting law of a martingale or invariance run.
#[derive(Debug, Clone)]
pub enum StartLaw {
    Poisson(PoissonSampler),
    /// Path `k` starts from sample `k mod len`.
    Samples(Vec<Configuration>),
    Fixed(Configuration),
}

impl StartLaw {
    fn draw(&self, k: usize, rng: &mut StreamRng) -> Result<Configuration> {
        match self {
            Self::Poisson(s) => s.sample(rng),
            Self::Samples(v) => {
                if v.is_empty() {
                    return Err(Error::Empty("start samples"));
                }
                Ok(v[k % v.len()].clone())
            }
            Self::Fixed(g) => Ok(g.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub coarse: EstimatorResult,
    pub fine: EstimatorResult,
    pub dt: f64,
    /// `|m(dt) − m(dt/2)| < 4·pooled SE`.
    pub consistent: bool,
}

impl MartingaleReport {
    pub fn passes(&self) -> bool {
        self.consistent && self.coarse.passes(Z_THRESHOLD) && self.fine.passes(Z_THRESHOLD)
    }
}

#[allow(clippy::too_many_arguments)]
fn martingale_run(
    phi: &PairPotential,
    f: &CylinderFunction,
    start: &StartLaw,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    stream: u64,
) -> Result<EstimatorResult> {
    let steps = (horizon / dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let shards = run_sharded(seed, stream, n_paths, |rng, first, n| -> Result<Moments> {
        let mut m = Moments::default();
        for k in first..first + n {
            let mut g = start.draw(k, rng)?;
            let f0 = f.eval(&g);
            let mut lf_prev = calculus::generator_apply(phi, f, &g)?;
            let mut integral = 0.0;
            let mut visit = |state: &Configuration, h: f64| -> Result<()> {
                let lf = calculus::generator_apply(phi, f, state)?;
                integral += 0.5 * h * (lf_prev + lf);
                lf_prev = lf;
                Ok(())
            };
            for _ in 0..steps {
                g = if phi.is_zero() { free_step(&g, dt, rng) } else { advance(phi, &g, dt, 0, rng, &mut visit)? };
                if phi.is_zero() {
                    visit(&g, dt)?;
                }
            }
            m.push(f.eval(&g) - f0 - integral);
        }
        Ok(m)
    });
    let m = shards.into_iter().try_fold(Moments::default(), |a, m| m.map(|m| a.merge(&m)))?;
    Ok(EstimatorResult::from_moments(m, Some(0.0)))
}

/// `F(X_T) − F(X_0) − ∫₀ᵀ LF(X_s) ds` (trapezoid rule over the sub-steps taken) against 0, at `dt`
/// and `dt/2` on independent paths.
pub fn martingale_test(
    phi: &PairPotential,
    f: &CylinderFunction,
    start: &StartLaw,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(Error::InvalidParameter("horizon and dt must be > 0".into()));
    }
    let coarse = martingale_run(phi, f, start, horizon, dt, n_paths, seed, 0)?;
    let fine = martingale_run(phi, f, start, horizon, 0.5 * dt, n_paths, seed, 1 << 32)?;
    let pooled = (coarse.std_error.powi(2) + fine.std_error.powi(2)).sqrt();
    let consistent = crate::verify::z_score(coarse.mean, pooled, fine.mean).abs() < Z_THRESHOLD;
    Ok(MartingaleReport { coarse, fine, dt, consistent })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceBin {
    pub lo: f64,
    pub hi: f64,
    pub before: f64,
    pub after: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub bins: Vec<InvarianceBin>,
    pub energy_before: EstimatorResult,
    pub energy_after: EstimatorResult,
    pub energy_z: f64,
    /// Per-comparison threshold (Bonferroni over bins plus energy).
    pub threshold: f64,
}

impl InvarianceReport {
    pub fn passes(&self) -> bool {
        self.energy_z.abs() < self.threshold && self.bins.iter().all(|b| b.z.abs() < self.threshold)
    }
}

/// Evolves every sample by the interacting dynamics for `horizon` and compares
/// pair-correlation bins and mean energy before and after.
pub fn invariance_test(
    phi: &PairPotential,
    samples: &[Configuration],
    horizon: f64,
    dt: f64,
    edges: &[f64],
    seed: u64,
) -> Result<InvarianceReport> {
    let after = evolve_all(phi, samples, horizon, dt, seed)?;
    let dom = *samples.first().ok_or(Error::Empty("sample list"))?.domain();
    let whole = dom.whole();
    let before_c = gibbs::estimate_correlations(samples, &whole, edges)?;
    let after_c = gibbs::estimate_correlations(&after, &whole, edges)?;
    let threshold = stats::bonferroni_threshold(Z_THRESHOLD, before_c.pair_correlation.len() + 1);
    let bins = before_c
        .pair_correlation
        .iter()
        .zip(&after_c.pair_correlation)
        .map(|(b, a)| {
            let pooled = (b.stderr.powi(2) + a.stderr.powi(2)).sqrt();
            InvarianceBin { lo: b.lo, hi: b.hi, before: b.value, after: a.value, z: crate::verify::z_score(a.value, pooled, b.value) }
        })
        .collect();
    let energies = |set: &[Configuration]| {
        let e: Vec<f64> = set.iter().map(|g| potential::total_energy(phi, g)).collect();
        EstimatorResult::from_samples(&e, None)
    };
    let (eb, ea) = (energies(samples), energies(&after));
    let pooled = (eb.std_error.powi(2) + ea.std_error.powi(2)).sqrt();
    let energy_z = crate::verify::z_score(ea.mean, pooled, eb.mean);
    Ok(InvarianceReport { bins, energy_before: eb, energy_after: ea, energy_z, threshold })
}

/// Runs every sample forward for `horizon`, sharded deterministically.
pub fn evolve_all(
    phi: &PairPotential,
    samples: &[Configuration],
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<Configuration>> {
    if horizon == 0.0 {
        return Ok(samples.to_vec());
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let shards: Vec<Result<Vec<Configuration>>> = samples
        .par_chunks(SHARD_SIZE)
        .enumerate()
        .map(|(k, chunk)| {
            let mut rng = crate::rng::stream_rng(seed, k as u64);
            chunk
                .iter()
                .map(|g| {
                    let mut g = g.clone();
                    for _ in 0..steps {
                        g = interacting_step(phi, &g, dt, &mut rng)?;
                    }
                    Ok(g)
                })
                .collect()
        })
        .collect();
    Ok(shards.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

/// Count law in `window` of evolved free samples: chi-square p-value against Poisson.
pub fn free_count_pvalue(samples: &[Configuration], window: &Window, mean: f64) -> f64 {
    let counts: Vec<usize> = samples.iter().map(|g| g.count(window)).collect();
    stats::poisson_chi_square_pvalue(&counts, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{BumpFunction, Outer};
    use crate::intensity::IntensityMeasure;
    use crate::rng::stream_rng;

    fn lj() -> PairPotential {
        PairPotential::lennard_jones_tapered(1.0, 1.0, 2.5, 0.5).unwrap()
    }

    #[test]
    fn free_step_second_moment() {
        let dom = TorusDomain::new(1, 1000.0).unwrap();
        let mut rng = stream_rng(1, 0);
        let flat: Vec<f64> = (0..100_000).map(|_| 500.0).collect();
        let g = Configuration::from_flat(dom, flat).unwrap();
        let dt = 1e-3;
        let h = free_step(&g, dt, &mut rng);
        assert_eq!(h.len(), g.len());
        let sq: Vec<f64> = h.flat().iter().map(|x| (x - 500.0).powi(2)).collect();
        let (m, se) = stats::mean_se(&sq);
        assert!(((m - 2.0 * dt) / se).abs() < 4.0, "{m}");
    }

    #[test]
    fn free_single_point_is_wrapped_normal() {
        let dom = TorusDomain::new(1, 1.0).unwrap();
        let mut rng = stream_rng(2, 0);
        let x0 = 0.9;
        let start = Configuration::from_points(dom, &[[x0]]).unwrap();
        let t: f64 = 0.05;
        let params = TrajectoryParams { dt: 0.005, n_steps: 10, save_every: 10, seed: 0 };
        let end: Vec<f64> = (0..4_000)
            .map(|_| simulate(&PairPotential::Zero, &start, &params, &mut rng).unwrap().states[1].point(0)[0])
            .collect();
        let s = (2.0 * t).sqrt();
        let p = stats::ks_pvalue(&end, |y| stats::wrapped_normal_cdf(y, x0, s, 1.0));
        assert!(p > 1e-3, "p = {p}");
    }

    #[test]
    fn drift_vanishes_at_potential_minimum() {
        let dom = TorusDomain::new(2, 6.0).unwrap();
        let r = 2f64.powf(1.0 / 6.0);
        let g = Configuration::from_points(dom, &[[1.0, 1.0], [1.0 + r, 1.0]]).unwrap();
        let b = potential::drift(&lj(), &g).unwrap();
        assert!(b.iter().all(|c| c.abs() <= 1e-8), "{b:?}");
    }

    #[test]
    fn drift_is_minus_energy_gradient_and_sums_to_zero() {
        let dom = TorusDomain::new(2, 7.0).unwrap();
        let mut rng = stream_rng(3, 0);
        let spec = gibbs::GibbsSpec::torus(dom, 0.3, lj()).unwrap();
        let params = gibbs::McmcParams { burn_in: 5_000, thinning: 10, n_samples: 1, ..gibbs::McmcParams::default() };
        let g = gibbs::gc_sample(&spec, &params, &mut rng).unwrap().pop().unwrap();
        let b = potential::drift(&lj(), &g).unwrap();
        let total: f64 = b.iter().sum();
        assert!(total.abs() < 1e-10);
        let e = |g: &Configuration| potential::conditional_energy(&lj(), g, &dom.whole(), &Configuration::empty(dom)).total;
        for i in 0..g.len().min(6) {
            for k in 0..2 {
                let h = 1e-6;
                let mut gp = g.clone();
                let mut gm = g.clone();
                gp.point_mut(i)[k] += h;
                gm.point_mut(i)[k] -= h;
                let fd = -(e(&gp) - e(&gm)) / (2.0 * h);
                let an = b[i * 2 + k];
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn zero_potential_interacting_equals_free() {
        let dom = TorusDomain::new(2, 3.0).unwrap();
        let g = Configuration::from_points(dom, &[[1.0, 1.0], [2.0, 0.5]]).unwrap();
        let a = interacting_step(&PairPotential::Zero, &g, 0.01, &mut stream_rng(4, 0)).unwrap();
        let b = free_step(&g, 0.01, &mut stream_rng(4, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn hard_core_steps_never_overlap() {
        let dom = TorusDomain::new(2, 3.0).unwrap();
        let hc = PairPotential::hard_core(0.5).unwrap();
        let g = Configuration::from_points(dom, &[[1.0, 1.0], [1.52, 1.0], [2.5, 2.5]]).unwrap();
        let mut rng = stream_rng(5, 0);
        let params = TrajectoryParams { dt: 0.01, n_steps: 200, save_every: 1, seed: 0 };
        let tr = simulate(&hc, &g, &params, &mut rng).unwrap();
        assert!(tr.states.iter().all(|s| !violates_core(&hc, s) && s.len() == 3));
        assert_eq!(tr.len(), 201);
    }

    #[test]
    fn laplace_trivial_cases() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let setup = LaplaceSetup {
            dom,
            law: MixingLaw::point_mass(2.0).unwrap(),
            fields: vec![BumpSum::zero()],
            times: vec![0.3],
            n_systems: 500,
            n_singles: 500,
        };
        let rep = laplace_functional_test(&setup, 1).unwrap();
        assert_eq!((rep.lhs.mean, rep.rhs.mean, rep.z), (1.0, 1.0, 0.0));
        // t = 0 reduces to the static Laplace transform
        let f = BumpSum::single(BumpFunction::new(&dom, vec![2.0, 2.0], 1.5, -0.9).unwrap());
        let setup = LaplaceSetup { fields: vec![f.clone()], times: vec![0.0], n_systems: 20_000, n_singles: 200_000, ..setup };
        let rep = laplace_functional_test(&setup, 2).unwrap();
        let sigma = IntensityMeasure::uniform(2.0).unwrap();
        let target = crate::intensity::laplace_transform_target(|x| f.value(&dom, x).ln_1p(), &sigma, &dom, &dom.whole())
            .unwrap()
            .value;
        assert!(((rep.lhs.mean - target) / rep.lhs.std_error).abs() < 4.0);
        assert!(rep.passes(), "{rep:?}");
    }

    #[test]
    fn martingale_constant_is_identically_zero() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let start = Configuration::from_points(dom, &[[0.5, 0.5], [1.7, 0.6], [2.5, 3.0]]).unwrap();
        let rep = martingale_test(&lj(), &CylinderFunction::constant(2.0), &StartLaw::Fixed(start), 0.01, 1e-3, 50, 1)
            .unwrap();
        assert_eq!((rep.coarse.mean, rep.coarse.std_error), (0.0, 0.0));
        assert!(rep.passes());
    }

    #[test]
    fn martingale_free_small() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let sampler = PoissonSampler::new(IntensityMeasure::uniform(1.0).unwrap(), dom, dom.whole()).unwrap();
        let f = CylinderFunction::new(
            Outer::var(0).tanh(),
            vec![BumpSum::single(BumpFunction::new(&dom, vec![2.0, 2.0], 1.5, 2.0).unwrap())],
        )
        .unwrap();
        let rep = martingale_test(&PairPotential::Zero, &f, &StartLaw::Poisson(sampler), 0.1, 2e-3, 2_000, 3).unwrap();
        assert!(rep.passes(), "{rep:?}");
    }

    #[test]
    fn invariance_zero_horizon_and_free_counts() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let sampler = PoissonSampler::new(IntensityMeasure::uniform(1.0).unwrap(), dom, dom.whole()).unwrap();
        let mut rng = stream_rng(6, 0);
        let samples: Vec<_> = (0..3_000).map(|_| sampler.sample(&mut rng).unwrap()).collect();
        let edges = gibbs::uniform_edges(2.0, 5);
        let rep = invariance_test(&PairPotential::Zero, &samples, 0.0, 1e-3, &edges, 1).unwrap();
        assert!(rep.bins.iter().all(|b| b.before == b.after && b.z == 0.0));
        let after = evolve_all(&PairPotential::Zero, &samples, 0.1, 1e-2, 2).unwrap();
        let w = Window::cube(&dom, 0.5, 1.5).unwrap();
        assert!(free_count_pvalue(&after, &w, 2.25) > 1e-3);
    }
}
