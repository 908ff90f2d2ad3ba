//! Birth–death–move Metropolis–Hastings samplers for finite-window Gibbs
//! specifications, and empirical correlation estimators.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::domain::{TorusDomain, Window};
use crate::error::{Error, Result};
use crate::intensity::GaussLegendre;
use crate::potential::{CellList, PairPotential};

/// Restarts allowed when searching a hard-core feasible canonical start.
pub const FEASIBLE_RESTARTS: usize = 1000;
/// Uniform draws per point before a restart.
pub const FEASIBLE_TRIES_PER_POINT: usize = 1000;

/// Grand canonical specification: activity, pair potential, window and a
/// frozen boundary configuration outside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec {
    pub dom: TorusDomain,
    pub z: f64,
    pub phi: PairPotential,
    pub window: Window,
    pub boundary: Configuration,
}

impl GibbsSpec {
    pub fn new(
        dom: TorusDomain,
        z: f64,
        phi: PairPotential,
        window: Window,
        boundary: Configuration,
    ) -> Result<Self> {
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::InvalidParameter(format!("activity must be finite and > 0, got {z}")));
        }
        dom.check_dim(window.dim())?;
        if *boundary.domain() != dom {
            return Err(Error::InvalidParameter("boundary configuration lives on a different domain".into()));
        }
        if boundary.points().any(|x| window.contains(x)) {
            return Err(Error::InvalidParameter("boundary points must lie outside the window".into()));
        }
        if !(z * window.volume()).is_finite() {
            return Err(Error::InvalidParameter("z·vol(Λ) overflows".into()));
        }
        Ok(Self { dom, z, phi, window, boundary })
    }

    /// The torus Gibbs specification: whole box, no boundary term.
    pub fn torus(dom: TorusDomain, z: f64, phi: PairPotential) -> Result<Self> {
        Self::new(dom, z, phi, dom.whole(), Configuration::empty(dom))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcParams {
    pub p_birth: f64,
    pub p_death: f64,
    pub p_move: f64,
    pub move_scale: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Debug switch: accept every proposal. Breaks stationarity on purpose.
    pub force_accept: bool,
}

impl Default for McmcParams {
    fn default() -> Self {
        Self {
            p_birth: 0.35,
            p_death: 0.35,
            p_move: 0.30,
            move_scale: 0.25,
            burn_in: 100_000,
            thinning: 1_000,
            n_samples: 1_000,
            seed: 0,
            force_accept: false,
        }
    }
}

impl McmcParams {
    /// Defaults with `move_scale = 0.1·r_cut` (or 0.1·L for infinite range).
    pub fn for_potential(phi: &PairPotential, dom: &TorusDomain) -> Self {
        let r = phi.r_cut();
        let scale = if r.is_finite() && r > 0.0 { 0.1 * r } else { 0.1 * dom.side() };
        Self { move_scale: scale, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [self.p_birth, self.p_death, self.p_move];
        if ps.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (ps.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "proposal probabilities must be >= 0 and sum to 1, got {ps:?}"
            )));
        }
        if !(self.move_scale.is_finite() && self.move_scale > 0.0) {
            return Err(Error::InvalidParameter("move_scale must be > 0".into()));
        }
        if self.thinning == 0 || self.n_samples == 0 {
            return Err(Error::InvalidParameter("thinning and n_samples must be positive".into()));
        }
        Ok(())
    }

    /// The move-only variant used by canonical runs.
    pub fn canonical(&self) -> Self {
        Self { p_birth: 0.0, p_death: 0.0, p_move: 1.0, ..self.clone() }
    }
}

/// Acceptance bookkeeping of a chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ChainStats {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

#[derive(Clone, Copy)]
enum Kind {
    Birth = 0,
    Death = 1,
    Move = 2,
}

/// Metropolis–Hastings chain on configurations inside the window.
#[derive(Debug, Clone)]
pub struct GibbsChain {
    spec: GibbsSpec,
    params: McmcParams,
    state: Configuration,
    cells: Option<CellList>,
    boundary: Configuration,
    boundary_cells: Option<CellList>,
    whole: bool,
    log_zv: f64,
    stats: ChainStats,
    scratch: Vec<f64>,
}

/// Cell lists only pay off once the box holds at least three cells per axis.
fn wants_cells(phi: &PairPotential, dom: &TorusDomain) -> bool {
    let r = phi.r_cut();
    !phi.is_zero() && r.is_finite() && r > 0.0 && dom.side() / r >= 3.0
}

impl GibbsChain {
    pub fn new(spec: GibbsSpec, params: McmcParams, start: Configuration) -> Result<Self> {
        params.validate()?;
        if start.points().any(|x| !spec.window.contains(x)) {
            return Err(Error::InvalidParameter("start configuration must lie inside the window".into()));
        }
        let range = spec.phi.r_cut();
        // only boundary points that can reach the window matter
        let boundary = if spec.phi.is_zero() || spec.boundary.is_empty() {
            Configuration::empty(spec.dom)
        } else {
            let pts: Vec<&[f64]> = spec
                .boundary
                .points()
                .filter(|y| dist_to_window(&spec.dom, &spec.window, y) < range)
                .collect();
            Configuration::from_points(spec.dom, &pts)?
        };
        let use_cells = wants_cells(&spec.phi, &spec.dom);
        let cells = use_cells.then(|| CellList::new(&start, range));
        let boundary_cells = (use_cells && boundary.len() >= 32).then(|| CellList::new(&boundary, range));
        let whole = spec.window.is_whole(&spec.dom);
        let log_zv = (spec.z * spec.window.volume()).ln();
        let d = spec.dom.dim();
        Ok(Self {
            spec,
            params,
            state: start,
            cells,
            boundary,
            boundary_cells,
            whole,
            log_zv,
            stats: ChainStats::default(),
            scratch: vec![0.0; d],
        })
    }

    pub fn state(&self) -> &Configuration {
        &self.state
    }

    pub fn stats(&self) -> ChainStats {
        self.stats
    }

    pub fn spec(&self) -> &GibbsSpec {
        &self.spec
    }

    /// `Σ_{y} φ(x−y)` over chain points other than `skip` plus the boundary.
    fn local_energy(&self, x: &[f64], skip: Option<usize>) -> f64 {
        let phi = &self.spec.phi;
        if phi.is_zero() {
            return 0.0;
        }
        let dom = &self.spec.dom;
        let r2max = phi.r_cut() * phi.r_cut();
        let mut e = 0.0;
        let mut visit = |g: &Configuration, j: usize| {
            let r2 = dom.distance_sq(x, g.point(j));
            if r2 < r2max {
                e += phi.eval(r2.sqrt());
            }
        };
        match &self.cells {
            Some(cl) => cl.for_each_candidate(x, |j| {
                if Some(j) != skip {
                    visit(&self.state, j)
                }
            }),
            None => (0..self.state.len()).filter(|&j| Some(j) != skip).for_each(|j| visit(&self.state, j)),
        }
        match &self.boundary_cells {
            Some(cl) => cl.for_each_candidate(x, |j| visit(&self.boundary, j)),
            None => (0..self.boundary.len()).for_each(|j| visit(&self.boundary, j)),
        }
        e
    }

    fn accept<R: Rng + ?Sized>(&mut self, log_ratio: f64, rng: &mut R) -> bool {
        if self.params.force_accept {
            return true;
        }
        if log_ratio >= 0.0 {
            return true;
        }
        if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
            return false;
        }
        rng.random::<f64>() < log_ratio.exp()
    }

    /// One proposal; returns whether it was accepted.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        let kind = if u < self.params.p_birth {
            Kind::Birth
        } else if u < self.params.p_birth + self.params.p_death {
            Kind::Death
        } else {
            Kind::Move
        };
        self.stats.proposed[kind as usize] += 1;
        let ok = match kind {
            Kind::Birth => self.birth(rng),
            Kind::Death => self.death(rng),
            Kind::Move => self.move_point(rng),
        };
        if ok {
            self.stats.accepted[kind as usize] += 1;
        }
        ok
    }

    fn birth<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let d = self.spec.dom.dim();
        let mut unit = std::mem::take(&mut self.scratch);
        unit.iter_mut().for_each(|c| *c = rng.random());
        let mut x = vec![0.0; d];
        self.spec.window.from_unit(&unit, &mut x);
        self.scratch = unit;
        let n = self.state.len();
        let de = self.local_energy(&x, None);
        let log_ratio = self.log_zv - ((n + 1) as f64).ln() - de;
        if !self.accept(log_ratio, rng) {
            return false;
        }
        self.state.push_unchecked(&x);
        if let Some(cl) = &mut self.cells {
            cl.insert(n, &x);
        }
        true
    }

    fn death<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let n = self.state.len();
        if n == 0 {
            return false;
        }
        let i = rng.random_range(0..n);
        let de = self.local_energy(self.state.point(i), Some(i));
        let log_ratio = (n as f64).ln() - self.log_zv + de;
        if !self.accept(log_ratio, rng) {
            return false;
        }
        if let Some(cl) = &mut self.cells {
            cl.swap_remove(i, self.state.point(i), n - 1, self.state.point(n - 1));
        }
        self.state.swap_remove(i);
        true
    }

    fn move_point<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let n = self.state.len();
        if n == 0 {
            return false;
        }
        let i = rng.random_range(0..n);
        let s = self.params.move_scale;
        let mut y: Vec<f64> = self.state.point(i).to_vec();
        for c in y.iter_mut() {
            let xi: f64 = rng.sample(StandardNormal);
            *c += s * xi;
        }
        self.spec.dom.wrap_in_place(&mut y);
        if !self.whole && !self.spec.window.contains(&y) && !self.params.force_accept {
            return false;
        }
        let e_old = self.local_energy(self.state.point(i), Some(i));
        let e_new = self.local_energy(&y, Some(i));
        let de = if e_new == f64::INFINITY { f64::INFINITY } else { e_new - e_old };
        if !self.accept(-de, rng) {
            return false;
        }
        if let Some(cl) = &mut self.cells {
            cl.remove(i, self.state.point(i));
            cl.insert(i, &y);
        }
        self.state.point_mut(i).copy_from_slice(&y);
        true
    }

    pub fn run<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) {
        for _ in 0..steps {
            self.step(rng);
        }
    }

    /// Burn-in, then `n_samples` states spaced by `thinning` proposals.
    pub fn collect<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<Configuration> {
        self.run(self.params.burn_in, rng);
        let mut out = Vec::with_capacity(self.params.n_samples);
        for _ in 0..self.params.n_samples {
            self.run(self.params.thinning, rng);
            out.push(self.state.clone());
        }
        out
    }
}

/// Torus distance from `y` to the closed box `window`.
fn dist_to_window(dom: &TorusDomain, window: &Window, y: &[f64]) -> f64 {
    let l = dom.side();
    let mut s = 0.0;
    for (k, &c) in y.iter().enumerate().take(dom.dim()) {
        let (lo, hi) = (window.lower()[k], window.upper()[k]);
        let dk = if c >= lo && c <= hi {
            0.0
        } else {
            let a = (lo - c).rem_euclid(l);
            let b = (c - hi).rem_euclid(l);
            a.min(b)
        };
        s += dk * dk;
    }
    s.sqrt()
}

/// Grand canonical samples in `Λ` started from the empty configuration.
pub fn gc_sample<R: Rng + ?Sized>(spec: &GibbsSpec, params: &McmcParams, rng: &mut R) -> Result<Vec<Configuration>> {
    let mut chain = GibbsChain::new(spec.clone(), params.clone(), Configuration::empty(spec.dom))?;
    Ok(chain.collect(rng))
}

/// Uniform sequential placement with restarts until the energy is finite.
pub fn feasible_start<R: Rng + ?Sized>(spec: &GibbsSpec, n: usize, rng: &mut R) -> Result<Configuration> {
    let d = spec.dom.dim();
    let mut unit = vec![0.0; d];
    let mut x = vec![0.0; d];
    for _ in 0..FEASIBLE_RESTARTS {
        let mut g = Configuration::empty(spec.dom);
        let mut probe = GibbsChain::new(spec.clone(), McmcParams::default(), Configuration::empty(spec.dom))?;
        let mut failed = false;
        for _ in 0..n {
            let mut placed = false;
            for _ in 0..FEASIBLE_TRIES_PER_POINT {
                unit.iter_mut().for_each(|c| *c = rng.random());
                spec.window.from_unit(&unit, &mut x);
                if probe.local_energy(&x, None).is_finite() {
                    placed = true;
                    break;
                }
            }
            if !placed {
                failed = true;
                break;
            }
            g.push_unchecked(&x);
            probe.state.push_unchecked(&x);
            if let Some(cl) = &mut probe.cells {
                cl.insert(probe.state.len() - 1, &x);
            }
        }
        if !failed {
            return Ok(g);
        }
    }
    Err(Error::FeasibleStartExhausted { attempts: FEASIBLE_RESTARTS })
}

/// Canonical samples with exactly `n` points in `Λ`; `spec.z` is unused.
pub fn canonical_sample<R: Rng + ?Sized>(
    spec: &GibbsSpec,
    n: usize,
    params: &McmcParams,
    rng: &mut R,
) -> Result<Vec<Configuration>> {
    let params = params.canonical();
    params.validate()?;
    if n == 0 {
        return Ok(vec![Configuration::empty(spec.dom); params.n_samples]);
    }
    let start = feasible_start(spec, n, rng)?;
    let mut chain = GibbsChain::new(spec.clone(), params, start)?;
    Ok(chain.collect(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBin {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
    pub stderr: f64,
    /// No pair ever fell in this bin.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub intensity_estimate: f64,
    pub intensity_stderr: f64,
    pub pair_correlation: Vec<CorrelationBin>,
    /// `max(ρ̂, sup_bins (ρ̂²·g)^{1/2})`; diagnostic only.
    pub xi_hat: f64,
}

fn ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// `∫_{R₁≤|u|<R₂} C(u) du` for the set covariogram of a `w×h` rectangle.
fn rectangle_shell_mass(w: f64, h: f64, r1: f64, r2: f64) -> f64 {
    // radial part is a polynomial, integrated exactly; θ by Gauss–Legendre on kink-free pieces
    let radial = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let rmax = (if c > 0.0 { w / c } else { f64::INFINITY }).min(if s > 0.0 { h / s } else { f64::INFINITY });
        let top = r2.min(rmax);
        if top <= r1 {
            return 0.0;
        }
        let prim = |r: f64| w * h * r * r / 2.0 - (w * s + h * c) * r.powi(3) / 3.0 + c * s * r.powi(4) / 4.0;
        prim(top) - prim(r1)
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut cuts = vec![0.0, half_pi, h.atan2(w)];
    for r in [r1, r2] {
        if r > w {
            cuts.push((w / r).acos());
        }
        if r > h {
            cuts.push((h / r).asin());
        }
    }
    cuts.retain(|t| (0.0..=half_pi).contains(t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let gl = GaussLegendre::new(32);
    let mut acc = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (t, wt) in gl.nodes.iter().zip(&gl.weights) {
            acc += wt * half * radial(mid + half * t);
        }
    }
    4.0 * acc
}

/// `K = ∫_Λ∫_Λ 1{lo ≤ |x−y| < hi} dx dy` (torus distance).
fn pair_reference(dom: &TorusDomain, window: &Window, lo: f64, hi: f64) -> Result<f64> {
    let d = dom.dim();
    let half = 0.5 * dom.side();
    if window.is_whole(dom) {
        if hi > half {
            return Err(Error::Unsupported(format!(
                "pair correlation radius {hi} exceeds half the box side {half}"
            )));
        }
        return Ok(dom.volume() * ball_volume(d) * (hi.powi(d as i32) - lo.powi(d as i32)));
    }
    if (0..d).any(|k| window.extent(k) > half) {
        return Err(Error::Unsupported("pair correlation on a sub-window wider than half the box".into()));
    }
    match d {
        1 => {
            let l = window.extent(0);
            let prim = |r: f64| {
                let r = r.min(l);
                2.0 * (l * r - r * r / 2.0)
            };
            Ok(prim(hi) - prim(lo))
        }
        2 => Ok(rectangle_shell_mass(window.extent(0), window.extent(1), lo, hi)),
        _ => Err(Error::Unsupported(format!("pair correlation on a {d}-dimensional sub-window"))),
    }
}

/// Intensity and radial pair correlation from samples restricted to `Λ`.
/// `edges` are increasing bin edges.
pub fn estimate_correlations(samples: &[Configuration], window: &Window, edges: &[f64]) -> Result<CorrelationEstimate> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("correlation estimate needs >= 2 samples".into()));
    }
    if edges.len() < 2 || edges[0] < 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("bin edges must be >= 0 and strictly increasing".into()));
    }
    let dom = *samples[0].domain();
    let nb = edges.len() - 1;
    let refs: Vec<f64> =
        (0..nb).map(|b| pair_reference(&dom, window, edges[b], edges[b + 1])).collect::<Result<_>>()?;
    let vol = window.volume();
    let m = samples.len() as f64;
    let rmax = edges[nb];
    let mut counts = Vec::with_capacity(samples.len());
    let mut pairs = vec![vec![0.0; samples.len()]; nb];
    for (s, g) in samples.iter().enumerate() {
        let inside = if window.is_whole(&dom) { g.clone() } else { g.restrict(window) };
        counts.push(inside.len() as f64);
        crate::potential::visit_pairs_within(&inside, rmax, |_, _, r| {
            if r >= edges[0] {
                let b = edges.partition_point(|&e| e <= r) - 1;
                if b < nb {
                    // ordered pairs
                    pairs[b][s] += 2.0;
                }
            }
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / m;
    let n_bar = mean(&counts);
    let var_n = counts.iter().map(|c| (c - n_bar).powi(2)).sum::<f64>() / (m - 1.0);
    let rho = n_bar / vol;
    let rho_se = (var_n / m).sqrt() / vol;
    let mut bins = Vec::with_capacity(nb);
    let mut sup_g = 0.0f64;
    for b in 0..nb {
        let p = &pairs[b];
        let p_bar = mean(p);
        if p_bar == 0.0 || n_bar == 0.0 {
            bins.push(CorrelationBin { lo: edges[b], hi: edges[b + 1], value: 0.0, stderr: 0.0, empty: true });
            continue;
        }
        let var_p = p.iter().map(|x| (x - p_bar).powi(2)).sum::<f64>() / (m - 1.0);
        let cov = p.iter().zip(&counts).map(|(x, c)| (x - p_bar) * (c - n_bar)).sum::<f64>() / (m - 1.0);
        let g = p_bar * vol * vol / (n_bar * n_bar * refs[b]);
        let rel_var = (var_p / (p_bar * p_bar) + 4.0 * var_n / (n_bar * n_bar) - 4.0 * cov / (p_bar * n_bar)) / m;
        sup_g = sup_g.max(g);
        bins.push(CorrelationBin {
            lo: edges[b],
            hi: edges[b + 1],
            value: g,
            stderr: g * rel_var.max(0.0).sqrt(),
            empty: false,
        });
    }
    let xi_hat = rho.max((rho * rho * sup_g).sqrt());
    Ok(CorrelationEstimate { intensity_estimate: rho, intensity_stderr: rho_se, pair_correlation: bins, xi_hat })
}

/// Evenly spaced edges on `[0, r_max]`.
pub fn uniform_edges(r_max: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| r_max * k as f64 / bins as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential;
    use crate::rng::stream_rng;
    use crate::verify::stats;

    fn quick(n_samples: usize, thinning: usize) -> McmcParams {
        McmcParams { burn_in: 20_000, thinning, n_samples, ..McmcParams::default() }
    }

    #[test]
    fn spec_validation() {
        let dom = TorusDomain::new(2, 6.0).unwrap();
        let w = Window::cube(&dom, 1.0, 2.0).unwrap();
        let inside = Configuration::from_points(dom, &[[1.5, 1.5]]).unwrap();
        assert!(GibbsSpec::new(dom, 1.0, PairPotential::Zero, w.clone(), inside).is_err());
        assert!(GibbsSpec::new(dom, 0.0, PairPotential::Zero, w.clone(), Configuration::empty(dom)).is_err());
        assert!(GibbsSpec::new(dom, f64::INFINITY, PairPotential::Zero, w, Configuration::empty(dom)).is_err());
        let bad = McmcParams { p_move: 0.5, ..McmcParams::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn free_count_law_is_poisson() {
        let dom = TorusDomain::new(1, 10.0).unwrap();
        let w = Window::new(&dom, vec![0.0], vec![5.0]).unwrap();
        let spec = GibbsSpec::new(dom, 1.0, PairPotential::Zero, w, Configuration::empty(dom)).unwrap();
        let params = McmcParams { n_samples: 10_000, thinning: 100, ..McmcParams::default() };
        let samples = gc_sample(&spec, &params, &mut stream_rng(11, 0)).unwrap();
        let counts: Vec<usize> = samples.iter().map(|g| g.len()).collect();
        let p = stats::poisson_chi_square_pvalue(&counts, 5.0);
        assert!(p > 1e-3, "p = {p}");
    }

    #[test]
    fn single_slot_hard_core_occupancy() {
        let dom = TorusDomain::new(2, 10.0).unwrap();
        let w = Window::cube(&dom, 3.0, 1.0).unwrap();
        let z = 0.8;
        let spec = GibbsSpec::new(dom, z, PairPotential::hard_core(2.0).unwrap(), w, Configuration::empty(dom)).unwrap();
        let samples = gc_sample(&spec, &quick(10_000, 50), &mut stream_rng(12, 0)).unwrap();
        assert!(samples.iter().all(|g| g.len() <= 1));
        let ones: Vec<f64> = samples.iter().map(|g| g.len() as f64).collect();
        let (m, se) = stats::mean_se(&ones);
        let target = z / (1.0 + z);
        assert!(((m - target) / se).abs() < 4.0, "{m} vs {target} (se {se})");
    }

    #[test]
    fn boundary_hard_core_blocks_window() {
        let dom = TorusDomain::new(2, 10.0).unwrap();
        let w = Window::cube(&dom, 3.0, 1.0).unwrap();
        let wall = Configuration::from_points(dom, &[[2.9, 3.5]]).unwrap();
        let spec = GibbsSpec::new(dom, 5.0, PairPotential::hard_core(2.0).unwrap(), w, wall).unwrap();
        let samples = gc_sample(&spec, &quick(200, 20), &mut stream_rng(13, 0)).unwrap();
        assert!(samples.iter().all(|g| g.is_empty()));
    }

    #[test]
    fn canonical_trivial_and_free() {
        let dom = TorusDomain::new(2, 6.0).unwrap();
        let spec = GibbsSpec::torus(dom, 1.0, PairPotential::Zero).unwrap();
        let empty = canonical_sample(&spec, 0, &quick(5, 1), &mut stream_rng(1, 0)).unwrap();
        assert!(empty.iter().all(|g| g.is_empty()));
        // large moves so that thinned samples are close to independent
        let params = McmcParams { move_scale: 2.0, ..quick(3_000, 20) };
        let samples = canonical_sample(&spec, 4, &params, &mut stream_rng(14, 0)).unwrap();
        assert!(samples.iter().all(|g| g.len() == 4));
        for axis in 0..2 {
            let xs: Vec<f64> = samples.iter().map(|g| g.point(0)[axis] / 6.0).collect();
            let p = stats::ks_uniform_pvalue(&xs);
            assert!(p > 1e-3, "axis {axis}: p = {p}");
        }
    }

    #[test]
    fn canonical_hard_core_infeasible() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let w = Window::cube(&dom, 0.0, 1.0).unwrap();
        let spec =
            GibbsSpec::new(dom, 1.0, PairPotential::hard_core(3.0).unwrap(), w, Configuration::empty(dom)).unwrap();
        let err = canonical_sample(&spec, 2, &quick(1, 1), &mut stream_rng(2, 0)).unwrap_err();
        assert!(matches!(err, Error::FeasibleStartExhausted { .. }));
    }

    #[test]
    fn cell_list_chain_matches_energy_oracle() {
        let dom = TorusDomain::new(2, 12.0).unwrap();
        let phi = PairPotential::lennard_jones_tapered(1.0, 1.0, 2.5, 0.5).unwrap();
        let spec = GibbsSpec::torus(dom, 0.3, phi.clone()).unwrap();
        let params = McmcParams::for_potential(&phi, &dom);
        let mut chain = GibbsChain::new(spec, params, Configuration::empty(dom)).unwrap();
        assert!(chain.cells.is_some());
        let mut rng = stream_rng(3, 0);
        for _ in 0..20 {
            chain.run(2_000, &mut rng);
            let g = chain.state();
            for i in 0..g.len() {
                let naive = potential::one_point_energy_of_member(&phi, g, i);
                let fast = chain.local_energy(g.point(i), Some(i));
                assert!((naive - fast).abs() <= 1e-12 * (1.0 + naive.abs()));
            }
        }
        assert!(chain.state().len() > 10);
    }

    #[test]
    fn forced_acceptance_is_not_stationary() {
        let dom = TorusDomain::new(2, 6.0).unwrap();
        let phi = PairPotential::lennard_jones_tapered(1.0, 1.0, 2.5, 0.5).unwrap();
        let spec = GibbsSpec::torus(dom, 10.0 / 36.0, phi.clone()).unwrap();
        let base = McmcParams { burn_in: 20_000, thinning: 200, n_samples: 400, ..McmcParams::for_potential(&phi, &dom) };
        let good = gc_sample(&spec, &base, &mut stream_rng(4, 0)).unwrap();
        let e: Vec<f64> = good.iter().map(|g| potential::total_energy(&phi, g)).collect();
        let (m1, s1) = stats::mean_se(&e[..200]);
        let (m2, s2) = stats::mean_se(&e[200..]);
        assert!((m1 - m2).abs() < 4.0 * (s1 * s1 + s2 * s2).sqrt());
        let forced = McmcParams { force_accept: true, ..base };
        let bad = gc_sample(&spec, &forced, &mut stream_rng(4, 0)).unwrap();
        let n_good = good.iter().map(|g| g.len()).sum::<usize>() as f64 / good.len() as f64;
        let n_bad = bad.iter().map(|g| g.len()).sum::<usize>() as f64 / bad.len() as f64;
        assert!(n_bad > 3.0 * n_good, "{n_bad} vs {n_good}");
    }

    #[test]
    fn shell_mass_oracles() {
        // small radii: Ripley's closed form
        let (w, h) = (2.0, 1.5);
        let a = |r: f64| std::f64::consts::PI * w * h * r * r - 4.0 * (w + h) * r.powi(3) / 3.0 + r.powi(4) / 2.0;
        let m = rectangle_shell_mass(w, h, 0.2, 1.1);
        assert!((m - (a(1.1) - a(0.2))).abs() < 1e-12);
        // the full disk of radius diam covers everything: (wh)²
        let all = rectangle_shell_mass(w, h, 0.0, 3.0);
        assert!((all - (w * h).powi(2)).abs() < 1e-11);
    }

    #[test]
    fn poisson_correlation_is_flat() {
        let dom = TorusDomain::new(2, 6.0).unwrap();
        let sampler =
            crate::intensity::PoissonSampler::new(crate::IntensityMeasure::uniform(1.0).unwrap(), dom, dom.whole())
                .unwrap();
        let mut rng = stream_rng(5, 0);
        let samples: Vec<_> = (0..4_000).map(|_| sampler.sample(&mut rng).unwrap()).collect();
        let est = estimate_correlations(&samples, &dom.whole(), &uniform_edges(3.0, 6)).unwrap();
        assert!(((est.intensity_estimate - 1.0) / est.intensity_stderr).abs() < 4.0);
        for b in &est.pair_correlation {
            assert!(((b.value - 1.0) / b.stderr).abs() < 4.0, "{b:?}");
        }
        let w = Window::cube(&dom, 0.5, 2.5).unwrap();
        let est = estimate_correlations(&samples, &w, &uniform_edges(2.0, 4)).unwrap();
        for b in &est.pair_correlation {
            assert!(((b.value - 1.0) / b.stderr).abs() < 4.0, "{b:?}");
        }
        assert!(est.xi_hat >= est.intensity_estimate);
    }

    #[test]
    fn hard_core_correlation_vanishes_inside_core() {
        let dom = TorusDomain::new(2, 6.0).unwrap();
        let spec = GibbsSpec::torus(dom, 1.0, PairPotential::hard_core(0.5).unwrap()).unwrap();
        let samples = gc_sample(&spec, &quick(300, 100), &mut stream_rng(6, 0)).unwrap();
        let est = estimate_correlations(&samples, &dom.whole(), &uniform_edges(1.0, 10)).unwrap();
        for b in est.pair_correlation.iter().filter(|b| b.hi <= 0.5) {
            assert_eq!(b.value, 0.0);
            assert!(b.empty);
        }
    }

    #[test]
    fn unsupported_geometry() {
        let dom = TorusDomain::new(3, 6.0).unwrap();
        let g = Configuration::empty(dom);
        let w = Window::cube(&dom, 0.0, 1.0).unwrap();
        assert!(estimate_correlations(&[g.clone(), g.clone()], &w, &[0.0, 0.5]).is_err());
        assert!(estimate_correlations(&[g.clone(), g], &dom.whole(), &[0.0, 3.5]).is_err());
    }
}
