//! Optimal-matching distance between finite configurations.

use serde::Serialize;

use crate::calculus::BumpSum;
use crate::configuration::Configuration;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingResult {
    /// `ρ(γ, ω)`, `+∞` across unequal masses.
    pub cost: f64,
    /// `assignment[i]` is the index in `ω` matched to `γ_i`; empty when infinite.
    pub assignment: Vec<usize>,
}

impl MatchingResult {
    pub fn is_finite(&self) -> bool {
        self.cost.is_finite()
    }
}

/// Minimum-cost perfect matching on a dense `n×n` cost matrix by shortest
/// augmenting paths with potentials. Returns `assignment[row] = col`.
pub fn solve_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based with a virtual column 0
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[row_of_col[j] - 1] = j - 1;
    }
    assignment
}

fn cost_matrix(g: &Configuration, w: &Configuration) -> Vec<f64> {
    let dom = g.domain();
    let n = g.len();
    let mut c = vec![0.0; n * n];
    for (i, x) in g.points().enumerate() {
        for (j, y) in w.points().enumerate() {
            c[i * n + j] = dom.distance_sq(x, y);
        }
    }
    c
}

/// Total squared cost of `assignment`. Terms are summed in sorted order so
/// the result does not depend on which side is the row index.
fn assignment_cost(n: usize, cost: &[f64], assignment: &[usize]) -> f64 {
    let mut terms: Vec<f64> = (0..n).map(|i| cost[i * n + assignment[i]]).collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// `ρ(γ, ω)`.
pub fn rho(g: &Configuration, w: &Configuration) -> Result<MatchingResult> {
    if g.domain() != w.domain() {
        return Err(Error::InvalidParameter("configurations on different domains".into()));
    }
    if g.len() != w.len() {
        return Ok(MatchingResult { cost: f64::INFINITY, assignment: Vec::new() });
    }
    let n = g.len();
    let c = cost_matrix(g, w);
    let assignment = solve_assignment(n, &c);
    let cost = assignment_cost(n, &c, &assignment).sqrt();
    Ok(MatchingResult { cost, assignment })
}

/// `ρ_A(γ) = min_{ω∈A} ρ(ω, γ)`.
pub fn rho_to_set(g: &Configuration, set: &[Configuration]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty("reference set"));
    }
    let mut best = f64::INFINITY;
    for w in set {
        best = best.min(rho(w, g)?.cost);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    /// Grid Lipschitz constant after 1% inflation.
    pub lipschitz: f64,
    pub checked: usize,
    /// Largest `|Δ⟨f,·⟩| / (Lip·√n·ρ)` seen.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzViolation {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Checks `|⟨f,γ⟩ − ⟨f,ω⟩| ≤ Lip(f)·√n·ρ(γ, ω)` on every pair.
pub fn lipschitz_certificate(
    f: &BumpSum,
    pairs: &[(Configuration, Configuration)],
) -> Result<std::result::Result<LipschitzReport, LipschitzViolation>> {
    let Some((first, _)) = pairs.first() else {
        return Err(Error::Empty("pair list"));
    };
    let dom = *first.domain();
    let lip = 1.01 * f.lipschitz_on_grid(&dom);
    let mut worst = 0.0f64;
    for (k, (g, w)) in pairs.iter().enumerate() {
        if g.len() != w.len() {
            return Err(Error::InvalidParameter(format!("pair {k} has unequal cardinalities")));
        }
        let lhs = (g.pair_unchecked(|x| f.value(&dom, x)) - w.pair_unchecked(|x| f.value(&dom, x))).abs();
        let r = rho(g, w)?.cost;
        let rhs = lip * (g.len() as f64).sqrt() * r;
        if lhs > rhs {
            return Ok(Err(LipschitzViolation { index: k, lhs, rhs }));
        }
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    Ok(Ok(LipschitzReport { lipschitz: lip, checked: pairs.len(), worst_ratio: worst }))
}

/// Exhaustive `n!` oracle: `(min squared cost, permutation)`.
pub fn brute_force(g: &Configuration, w: &Configuration) -> (f64, Vec<usize>) {
    let n = g.len();
    assert_eq!(n, w.len());
    let c = cost_matrix(g, w);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (assignment_cost(n, &c, &perm), perm.clone());
    // Heap's algorithm
    let mut stack = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            let s = assignment_cost(n, &c, &perm);
            if s < best.0 {
                best = (s, perm.clone());
            }
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::BumpFunction;
    use crate::domain::TorusDomain;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random(dom: TorusDomain, n: usize, rng: &mut impl Rng) -> Configuration {
        let flat = (0..n * dom.dim()).map(|_| rng.random::<f64>() * dom.side()).collect();
        Configuration::from_flat(dom, flat).unwrap()
    }

    #[test]
    fn examples() {
        let dom = TorusDomain::new(1, 10.0).unwrap();
        let g = Configuration::from_points(dom, &[[0.0], [4.0]]).unwrap();
        let w = Configuration::from_points(dom, &[[1.0], [5.0]]).unwrap();
        let m = rho(&g, &w).unwrap();
        assert_eq!(m.cost, 2f64.sqrt());
        assert_eq!(m.assignment, vec![0, 1]);
        assert_eq!(brute_force(&g, &w).0, 2.0);
        let same = rho(&g, &g).unwrap();
        assert_eq!(same.cost, 0.0);
        assert_eq!(same.assignment, vec![0, 1]);
        let x = Configuration::from_points(dom, &[[9.5]]).unwrap();
        let y = Configuration::from_points(dom, &[[0.5]]).unwrap();
        assert_eq!(rho(&x, &y).unwrap().cost, dom.distance(&[9.5], &[0.5]));
        assert_eq!(rho(&g, &x).unwrap().cost, f64::INFINITY);
        assert_eq!(rho(&Configuration::empty(dom), &Configuration::empty(dom)).unwrap().cost, 0.0);
    }

    #[test]
    fn rho_to_set_cases() {
        let dom = TorusDomain::new(2, 3.0).unwrap();
        let mut rng = stream_rng(1, 0);
        let g = random(dom, 4, &mut rng);
        let others: Vec<_> = (0..5).map(|_| random(dom, 4, &mut rng)).collect();
        let expect = others.iter().map(|w| rho(w, &g).unwrap().cost).fold(f64::INFINITY, f64::min);
        assert_eq!(rho_to_set(&g, &others).unwrap(), expect);
        let mut with = others.clone();
        with.push(g.clone());
        assert_eq!(rho_to_set(&g, &with).unwrap(), 0.0);
        let wrong: Vec<_> = (0..3).map(|_| random(dom, 3, &mut rng)).collect();
        assert_eq!(rho_to_set(&g, &wrong).unwrap(), f64::INFINITY);
        assert!(rho_to_set(&g, &[]).is_err());
    }

    #[test]
    fn hungarian_equals_brute_force() {
        let mut rng = stream_rng(2, 0);
        for d in 1..=3 {
            let dom = TorusDomain::new(d, 2.0).unwrap();
            for n in 0..=7 {
                for _ in 0..6 {
                    let g = random(dom, n, &mut rng);
                    let w = random(dom, n, &mut rng);
                    let m = rho(&g, &w).unwrap();
                    let (bf, _) = brute_force(&g, &w);
                    assert_eq!(m.cost, bf.sqrt(), "d={d} n={n}");
                }
            }
        }
    }

    #[test]
    fn lipschitz_cases() {
        let dom = TorusDomain::new(2, 4.0).unwrap();
        let f = BumpSum::new(vec![
            BumpFunction::new(&dom, vec![1.0, 1.0], 1.2, 1.0).unwrap(),
            BumpFunction::new(&dom, vec![2.5, 3.0], 0.9, -0.7).unwrap(),
        ]);
        let mut rng = stream_rng(3, 0);
        let g = random(dom, 5, &mut rng);
        let rep = lipschitz_certificate(&f, &[(g.clone(), g.clone())]).unwrap().unwrap();
        assert_eq!(rep.worst_ratio, 0.0);
        let pairs: Vec<_> = (0..1000)
            .map(|k| {
                let n = 1 + k % 8;
                (random(dom, n, &mut rng), random(dom, n, &mut rng))
            })
            .collect();
        let rep = lipschitz_certificate(&f, &pairs).unwrap().unwrap();
        assert_eq!(rep.checked, 1000);
        assert!(rep.worst_ratio <= 1.0);
    }

    proptest! {
        #[test]
        fn pseudo_metric_axioms(seed in any::<u64>(), n in 0usize..9) {
            let dom = TorusDomain::new(2, 3.0).unwrap();
            let mut rng = stream_rng(seed, 0);
            let a = random(dom, n, &mut rng);
            let b = random(dom, n, &mut rng);
            let c = random(dom, n, &mut rng);
            let ab = rho(&a, &b).unwrap();
            prop_assert_eq!(ab.cost, rho(&b, &a).unwrap().cost);
            let ac = rho(&a, &c).unwrap().cost;
            let bc = rho(&b, &c).unwrap().cost;
            prop_assert!(ac <= ab.cost + bc + 1e-9);
            let mut seen = vec![false; n];
            for &j in &ab.assignment {
                prop_assert!(!seen[j]);
                seen[j] = true;
            }
            let aa = rho(&a, &a).unwrap();
            prop_assert_eq!(aa.cost, 0.0);
            for (i, &j) in aa.assignment.iter().enumerate() {
                prop_assert_eq!(a.point(i), a.point(j));
            }
        }
    }
}
