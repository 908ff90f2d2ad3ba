//! Pair potentials, conditional energies and stability diagnostics.
//!
//! Energies may be `+∞` (hard-core overlap); `+∞` propagates through sums and
//! `exp(−∞)` is `0`, so samplers can treat overlaps as ordinary rejections.

mod cell_list;
mod tabulated;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::configuration::Configuration;
use crate::domain::{TorusDomain, Window};
use crate::error::{Error, Result};
use crate::intensity::TensorRule;

pub use cell_list::CellList;
pub use tabulated::TabulatedPotential;

/// Below this many points a plain double loop beats building a cell list.
const NAIVE_BELOW: usize = 48;

/// Quintic smoothstep cutoff: 1 on `[0, r_cut − width]`, 0 beyond `r_cut`,
/// value and first two derivatives continuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Taper {
    pub r_cut: f64,
    pub width: f64,
}

impl Taper {
    /// Returns `(S(r), S'(r))`.
    #[inline]
    fn eval(&self, r: f64) -> (f64, f64) {
        let start = self.r_cut - self.width;
        if r <= start {
            return (1.0, 0.0);
        }
        if r >= self.r_cut {
            return (0.0, 0.0);
        }
        let t = (r - start) / self.width;
        let t2 = t * t;
        let s = 1.0 - t2 * t * (10.0 - 15.0 * t + 6.0 * t2);
        let ds = -30.0 * t2 * (1.0 - t) * (1.0 - t) / self.width;
        (s, ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairPotential {
    Zero,
    /// `+∞` for `r < radius`, else 0.
    HardCore { radius: f64 },
    /// `a/r¹² − b/r⁶`, optionally multiplied by a smooth cutoff.
    LennardJones { a: f64, b: f64, taper: Option<Taper> },
    Tabulated(TabulatedPotential),
}

impl PairPotential {
    pub fn hard_core(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("hard-core radius {radius} must be > 0")));
        }
        Ok(Self::HardCore { radius })
    }

    /// Untapered Lennard-Jones (infinite range).
    pub fn lennard_jones(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidParameter("Lennard-Jones needs a > 0 and b > 0".into()));
        }
        Ok(Self::LennardJones { a, b, taper: None })
    }

    pub fn lennard_jones_tapered(a: f64, b: f64, r_cut: f64, width: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidParameter("Lennard-Jones needs a > 0 and b > 0".into()));
        }
        if !(r_cut.is_finite() && width > 0.0 && width <= r_cut) {
            return Err(Error::InvalidParameter(format!(
                "taper needs 0 < width <= r_cut < inf, got width {width}, r_cut {r_cut}"
            )));
        }
        Ok(Self::LennardJones { a, b, taper: Some(Taper { r_cut, width }) })
    }

    /// Interaction range; `φ ≡ 0` for `r >= r_cut`. Infinite for untapered LJ.
    pub fn r_cut(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::HardCore { radius } => *radius,
            Self::LennardJones { taper: Some(t), .. } => t.r_cut,
            Self::LennardJones { taper: None, .. } => f64::INFINITY,
            Self::Tabulated(t) => t.r_cut(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Radius below which `φ = +∞`, if any.
    pub fn hard_core_radius(&self) -> Option<f64> {
        match self {
            Self::HardCore { radius } => Some(*radius),
            Self::Tabulated(t) => t.core_radius(),
            _ => None,
        }
    }

    /// `φ(r)`, possibly `+∞`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::HardCore { radius } => {
                if r < *radius {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Self::LennardJones { a, b, taper } => {
                if r == 0.0 {
                    return f64::INFINITY;
                }
                let (s, _) = match taper {
                    Some(t) => {
                        if r >= t.r_cut {
                            return 0.0;
                        }
                        t.eval(r)
                    }
                    None => (1.0, 0.0),
                };
                let ir6 = 1.0 / (r * r * r).powi(2);
                (a * ir6 * ir6 - b * ir6) * s
            }
            Self::Tabulated(t) => t.eval(r),
        }
    }

    /// `φ'(r)`; the caller guarantees `r > 0` and `φ(r)` finite.
    #[inline]
    pub fn radial_derivative(&self, r: f64) -> f64 {
        match self {
            Self::Zero | Self::HardCore { .. } => 0.0,
            Self::LennardJones { a, b, taper } => {
                let ir = 1.0 / r;
                let ir6 = ir.powi(6);
                let base = a * ir6 * ir6 - b * ir6;
                let dbase = (-12.0 * a * ir6 * ir6 + 6.0 * b * ir6) * ir;
                match taper {
                    Some(t) => {
                        let (s, ds) = t.eval(r);
                        dbase * s + base * ds
                    }
                    None => dbase,
                }
            }
            Self::Tabulated(t) => t.derivative(r),
        }
    }

    /// `∇φ(v)` for a displacement `v`, written into `out`.
    pub fn grad_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r == 0.0 || !self.eval(r).is_finite() {
            return Err(Error::SingularGradient { r });
        }
        let c = if r >= self.r_cut() { 0.0 } else { self.radial_derivative(r) / r };
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = c * vi;
        }
        Ok(())
    }

    pub fn grad(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.grad_into(v, &mut out)?;
        Ok(out)
    }

    /// Stable short identifier derived from the serialized parameters.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("potential serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Split of `H_Λ(γ) = E_Λ(γ_Λ) + W(γ_Λ | boundary)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub internal: f64,
    pub boundary: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(internal: f64, boundary: f64) -> Self {
        let total = if internal == f64::INFINITY || boundary == f64::INFINITY {
            f64::INFINITY
        } else {
            internal + boundary
        };
        Self { internal, boundary, total }
    }
}

/// Calls `f(i, j, r)` for every unordered pair `i < j` at distance `r < range`.
/// Uses a cell list unless the configuration is small or the range infinite.
pub fn visit_pairs_within<F: FnMut(usize, usize, f64)>(g: &Configuration, range: f64, mut f: F) {
    if range <= 0.0 || g.len() < 2 {
        return;
    }
    let dom = g.domain();
    let range2 = range * range;
    if !range.is_finite() || g.len() < NAIVE_BELOW {
        for i in 0..g.len() {
            let xi = g.point(i);
            for j in i + 1..g.len() {
                let r2 = dom.distance_sq(xi, g.point(j));
                if r2 < range2 {
                    f(i, j, r2.sqrt());
                }
            }
        }
        return;
    }
    let cl = CellList::new(g, range);
    cl.for_each_candidate_pair(g, |i, j| {
        let r2 = dom.distance_sq(g.point(i), g.point(j));
        if r2 < range2 {
            f(i, j, r2.sqrt());
        }
    });
}

/// `Σ_{{x,y}⊂γ} φ(x−y)` over all unordered pairs (torus distance).
pub fn total_energy(phi: &PairPotential, g: &Configuration) -> f64 {
    if phi.is_zero() {
        return 0.0;
    }
    let mut e = 0.0;
    visit_pairs_within(g, phi.r_cut(), |_, _, r| e += phi.eval(r));
    e
}

/// Energy between two disjoint point sets, `Σ_{x∈a, y∈b} φ(x−y)`.
pub fn cross_energy(phi: &PairPotential, a: &Configuration, b: &Configuration) -> f64 {
    if phi.is_zero() || a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let range = phi.r_cut();
    if !range.is_finite() || b.len() < NAIVE_BELOW {
        return a.points().map(|x| one_point_energy_naive(phi, b, x)).sum();
    }
    let cl = CellList::new(b, range);
    a.points().map(|x| one_point_energy_cells(phi, b, &cl, x)).sum()
}

/// `(E_Λ(γ_Λ), W(γ_Λ | boundary), total)`.
pub fn conditional_energy(
    phi: &PairPotential,
    g: &Configuration,
    window: &Window,
    boundary: &Configuration,
) -> EnergyBreakdown {
    let inside = if window.is_whole(g.domain()) { g.clone() } else { g.restrict(window) };
    let internal = total_energy(phi, &inside);
    let w = cross_energy(phi, &inside, boundary);
    EnergyBreakdown::new(internal, w)
}

fn one_point_energy_naive(phi: &PairPotential, g: &Configuration, x: &[f64]) -> f64 {
    let dom = g.domain();
    let range2 = phi.r_cut() * phi.r_cut();
    let mut e = 0.0;
    for y in g.points() {
        let r2 = dom.distance_sq(x, y);
        if r2 < range2 {
            e += phi.eval(r2.sqrt());
            if e == f64::INFINITY {
                return e;
            }
        }
    }
    e
}

fn one_point_energy_cells(phi: &PairPotential, g: &Configuration, cl: &CellList, x: &[f64]) -> f64 {
    let dom = g.domain();
    let range2 = phi.r_cut() * phi.r_cut();
    let mut e = 0.0;
    cl.for_each_candidate(x, |j| {
        let r2 = dom.distance_sq(x, g.point(j));
        if r2 < range2 {
            e += phi.eval(r2.sqrt());
        }
    });
    e
}

/// `Σ_{y∈γ} φ(x−y)`: the energy cost of inserting `x` into `γ`.
pub fn one_point_energy(phi: &PairPotential, g: &Configuration, x: &[f64]) -> f64 {
    if phi.is_zero() || g.is_empty() {
        return 0.0;
    }
    let range = phi.r_cut();
    if !range.is_finite() || g.len() < NAIVE_BELOW {
        return one_point_energy_naive(phi, g, x);
    }
    let cl = CellList::new(g, range);
    one_point_energy_cells(phi, g, &cl, x)
}

/// Insertion energies `x ↦ Σ_{y∈γ} φ(x−y)` for many query points against one
/// fixed configuration; builds the cell list once.
pub struct InsertionEnergy<'a> {
    phi: &'a PairPotential,
    g: &'a Configuration,
    cells: Option<CellList>,
}

impl<'a> InsertionEnergy<'a> {
    pub fn new(phi: &'a PairPotential, g: &'a Configuration) -> Self {
        let r = phi.r_cut();
        let cells = (!phi.is_zero() && r.is_finite() && g.len() >= NAIVE_BELOW).then(|| CellList::new(g, r));
        Self { phi, g, cells }
    }

    pub fn at(&self, x: &[f64]) -> f64 {
        if self.phi.is_zero() || self.g.is_empty() {
            return 0.0;
        }
        match &self.cells {
            Some(cl) => one_point_energy_cells(self.phi, self.g, cl, x),
            None => one_point_energy_naive(self.phi, self.g, x),
        }
    }
}

/// Interaction of point `index` with every other point of `γ`.
pub fn one_point_energy_of_member(phi: &PairPotential, g: &Configuration, index: usize) -> f64 {
    if phi.is_zero() {
        return 0.0;
    }
    let dom = g.domain();
    let x = g.point(index);
    let range2 = phi.r_cut() * phi.r_cut();
    let mut e = 0.0;
    for (j, y) in g.points().enumerate() {
        if j == index {
            continue;
        }
        let r2 = dom.distance_sq(x, y);
        if r2 < range2 {
            e += phi.eval(r2.sqrt());
        }
    }
    e
}

/// Drift `b(x_i) = −Σ_{j≠i} ∇φ(x_i − x_j)` for every point, flat `n·d` layout.
pub fn drift(phi: &PairPotential, g: &Configuration) -> Result<Vec<f64>> {
    let d = g.dim();
    let mut b = vec![0.0; g.len() * d];
    if phi.is_zero() {
        return Ok(b);
    }
    let dom = g.domain();
    let mut v = vec![0.0; d];
    let mut err = None;
    visit_pairs_within(g, phi.r_cut(), |i, j, r| {
        if err.is_some() {
            return;
        }
        if r == 0.0 || !phi.eval(r).is_finite() {
            err = Some(Error::SingularGradient { r });
            return;
        }
        dom.displacement_into(g.point(i), g.point(j), &mut v);
        let c = phi.radial_derivative(r) / r;
        for k in 0..d {
            let gk = c * v[k];
            b[i * d + k] -= gk;
            b[j * d + k] += gk;
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(b),
    }
}

/// Output of [`stability_report`]. Purely diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `inf E(γ)/|γ|` over the non-empty finite-energy samples.
    pub min_energy_per_point: Option<f64>,
    /// Least-squares `(A, B)` in `E ≈ A Σ_r |γ_r|² − B |γ|` over unit subcells.
    pub superstability_fit: Option<(f64, f64)>,
    pub n_used: usize,
    pub n_infinite: usize,
}

pub fn stability_report(phi: &PairPotential, samples: &[Configuration]) -> StabilityReport {
    let mut min_epp: Option<f64> = None;
    let (mut sqq, mut sqn, mut snn, mut seq, mut sen) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut n_used = 0;
    let mut n_infinite = 0;
    for g in samples {
        if g.is_empty() {
            continue;
        }
        let e = total_energy(phi, g);
        if !e.is_finite() {
            n_infinite += 1;
            continue;
        }
        n_used += 1;
        let n = g.len() as f64;
        let epp = e / n;
        min_epp = Some(min_epp.map_or(epp, |m: f64| m.min(epp)));
        let q = subcell_square_count(g);
        // regress e on (q, -n)
        sqq += q * q;
        sqn += q * n;
        snn += n * n;
        seq += e * q;
        sen += e * n;
    }
    let det = sqq * snn - sqn * sqn;
    let fit = if n_used >= 2 && det.abs() > 1e-12 * (sqq * snn).max(1.0) {
        let a = (seq * snn - sen * sqn) / det;
        let neg_b = (sqq * sen - sqn * seq) / det;
        Some((a, -neg_b))
    } else {
        None
    };
    StabilityReport { min_energy_per_point: min_epp, superstability_fit: fit, n_used, n_infinite }
}

/// `Σ_r |γ_r|²` over the partition of the box into cells of side close to 1.
fn subcell_square_count(g: &Configuration) -> f64 {
    let dom = g.domain();
    let per_axis = (dom.side().floor() as usize).max(1);
    let side = dom.side() / per_axis as f64;
    let mut counts = std::collections::HashMap::<Vec<usize>, usize>::new();
    for x in g.points() {
        let key: Vec<usize> = x.iter().map(|&c| ((c / side) as usize).min(per_axis - 1)).collect();
        *counts.entry(key).or_default() += 1;
    }
    counts.values().map(|&c| (c * c) as f64).sum()
}

/// Output of [`dfr_bounds_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct DfrReport {
    /// `φ(t) >= s₁(t)` at every grid point of `(0, d₁]`.
    pub lower_bound_holds: bool,
    /// First grid radius where the lower bound fails.
    pub lower_witness: Option<f64>,
    /// `|φ(t)| <= s₂(t)` at every grid point of `[d₂, r_cut]`.
    pub upper_bound_holds: bool,
    pub upper_witness: Option<f64>,
    /// `∫_{d₂}^{r_cut} t^{d−1} s₂(t) dt`.
    pub tail_integral: f64,
    /// `∫_{d₁/1000}^{d₁} t^{d−1} s₁(t) dt`, a truncated view of the divergence condition.
    pub core_integral_truncated: f64,
}

/// Grid check of the pointwise bounds behind the superstability / lower
/// regularity criterion. The integral conditions are reported, not decided.
pub fn dfr_bounds_check<S1, S2>(
    phi: &PairPotential,
    dim: usize,
    d1: f64,
    d2: f64,
    s1: S1,
    s2: S2,
) -> Result<DfrReport>
where
    S1: Fn(f64) -> f64,
    S2: Fn(f64) -> f64,
{
    if !(d1 > 0.0 && d1 < d2) {
        return Err(Error::InvalidParameter(format!("need 0 < d1 < d2, got {d1}, {d2}")));
    }
    let n = 2000;
    let mut lower_witness = None;
    for k in 1..=n {
        let t = d1 * k as f64 / n as f64;
        if !(phi.eval(t) >= s1(t)) {
            lower_witness = Some(t);
            break;
        }
    }
    let r_cut = phi.r_cut();
    let upper_end = if r_cut.is_finite() { r_cut.max(d2) } else { 1000.0 * d2 };
    let mut upper_witness = None;
    for k in 0..=n {
        // geometric grid resolves the long untapered tail
        let t = d2 * (upper_end / d2).powf(k as f64 / n as f64);
        if !(phi.eval(t).abs() <= s2(t)) {
            upper_witness = Some(t);
            break;
        }
    }
    let p = (dim - 1) as i32;
    let dom1 = TorusDomain::new(1, 1.0)?;
    let unit = dom1.whole();
    let rule = TensorRule::new(48, 16);
    let tail_integral = if r_cut.is_finite() {
        if r_cut <= d2 {
            0.0
        } else {
            rule.integrate(&unit, |u| {
                let t = d2 + u[0] * (r_cut - d2);
                t.powi(p) * s2(t) * (r_cut - d2)
            })
        }
    } else {
        // t = d₂/u maps (0, 1] onto [d₂, ∞)
        rule.integrate(&unit, |u| {
            let t = d2 / u[0];
            t.powi(p) * s2(t) * d2 / (u[0] * u[0])
        })
    };
    let lo = d1 * 1e-3;
    let core_integral_truncated = rule.integrate(&unit, |u| {
        let t = lo * (d1 / lo).powf(u[0]);
        t.powi(p) * s1(t) * t * (d1 / lo).ln()
    });
    Ok(DfrReport {
        lower_bound_holds: lower_witness.is_none(),
        lower_witness,
        upper_bound_holds: upper_witness.is_none(),
        upper_witness,
        tail_integral,
        core_integral_truncated,
    })
}
