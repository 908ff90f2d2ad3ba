//! Cubic cell lists with side at least the interaction range.

use crate::configuration::Configuration;
use crate::domain::TorusDomain;

/// Spatial hash of a configuration. Cells have side `>= range`, so every
/// partner within `range` of a point lies in the `3^d` block of cells around
/// it. With fewer than three cells per axis the block wraps onto itself and
/// duplicate cells are dropped.
#[derive(Debug, Clone)]
pub struct CellList {
    dom: TorusDomain,
    per_axis: usize,
    cell_side: f64,
    cells: Vec<Vec<usize>>,
}

impl CellList {
    pub fn new(points: &Configuration, range: f64) -> Self {
        let dom = *points.domain();
        let per_axis = if range.is_finite() && range > 0.0 {
            ((dom.side() / range).floor() as usize).max(1)
        } else {
            1
        };
        let cell_side = dom.side() / per_axis as f64;
        let n_cells = per_axis.pow(dom.dim() as u32);
        let mut list = Self { dom, per_axis, cell_side, cells: vec![Vec::new(); n_cells] };
        for (i, x) in points.points().enumerate() {
            let c = list.cell_of(x);
            list.cells[c].push(i);
        }
        list
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    #[inline]
    fn axis_index(&self, c: f64) -> usize {
        ((c / self.cell_side) as usize).min(self.per_axis - 1)
    }

    #[inline]
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for &c in x.iter().rev() {
            idx = idx * self.per_axis + self.axis_index(c);
        }
        idx
    }

    pub(crate) fn insert(&mut self, index: usize, x: &[f64]) {
        let c = self.cell_of(x);
        self.cells[c].push(index);
    }

    pub(crate) fn remove(&mut self, index: usize, x: &[f64]) {
        let c = self.cell_of(x);
        let slot = &mut self.cells[c];
        if let Some(k) = slot.iter().position(|&j| j == index) {
            slot.swap_remove(k);
        }
    }

    /// Mirrors `Configuration::swap_remove(index)`: drops `index` (at `x`) and
    /// renames `last` (at `x_last`) to `index`.
    pub(crate) fn swap_remove(&mut self, index: usize, x: &[f64], last: usize, x_last: &[f64]) {
        self.remove(index, x);
        if index != last {
            let c = self.cell_of(x_last);
            if let Some(j) = self.cells[c].iter_mut().find(|j| **j == last) {
                *j = index;
            }
        }
    }

    /// Cells whose points may lie within range of `x`.
    fn neighbor_cells(&self, x: &[f64], out: &mut Vec<usize>) {
        out.clear();
        let d = self.dom.dim();
        if self.per_axis == 1 {
            out.push(0);
            return;
        }
        let base: Vec<usize> = x.iter().map(|&c| self.axis_index(c)).collect();
        let n = self.per_axis as isize;
        let mut off = vec![-1isize; d];
        loop {
            let mut idx = 0usize;
            for k in (0..d).rev() {
                let a = (base[k] as isize + off[k]).rem_euclid(n) as usize;
                idx = idx * self.per_axis + a;
            }
            out.push(idx);
            let mut k = 0;
            loop {
                if k == d {
                    if self.per_axis < 3 {
                        out.sort_unstable();
                        out.dedup();
                    }
                    return;
                }
                off[k] += 1;
                if off[k] <= 1 {
                    break;
                }
                off[k] = -1;
                k += 1;
            }
        }
    }

    /// Calls `f(j)` for every indexed point that may be within range of `x`.
    /// Each candidate is visited exactly once.
    pub fn for_each_candidate<F: FnMut(usize)>(&self, x: &[f64], mut f: F) {
        let mut cells = Vec::with_capacity(3usize.pow(self.dom.dim() as u32));
        self.neighbor_cells(x, &mut cells);
        for &c in &cells {
            for &j in &self.cells[c] {
                f(j);
            }
        }
    }

    /// Calls `f(i, j)` once for every unordered candidate pair `i < j`.
    pub fn for_each_candidate_pair<F: FnMut(usize, usize)>(&self, points: &Configuration, mut f: F) {
        let mut cells = Vec::with_capacity(3usize.pow(self.dom.dim() as u32));
        for (i, x) in points.points().enumerate() {
            self.neighbor_cells(x, &mut cells);
            for &c in &cells {
                for &j in &self.cells[c] {
                    if j > i {
                        f(i, j);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_config(d: usize, l: f64, n: usize, seed: u64) -> Configuration {
        let dom = TorusDomain::new(d, l).unwrap();
        let mut rng = stream_rng(seed, 0);
        let flat: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>() * l).collect();
        Configuration::from_flat(dom, flat).unwrap()
    }

    fn brute_pairs(g: &Configuration, range: f64) -> Vec<(usize, usize)> {
        let dom = g.domain();
        let mut v = Vec::new();
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                if dom.distance(g.point(i), g.point(j)) < range {
                    v.push((i, j));
                }
            }
        }
        v
    }

    #[test]
    fn pair_candidates_cover_all_close_pairs_exactly_once() {
        for (d, l, range) in [(2, 10.0, 1.0), (2, 5.0, 2.5), (3, 6.0, 1.9), (1, 7.0, 3.0), (2, 4.0, 3.0)] {
            let g = random_config(d, l, 150, d as u64 * 31 + l as u64);
            let cl = CellList::new(&g, range);
            let mut got = Vec::new();
            cl.for_each_candidate_pair(&g, |i, j| {
                if g.domain().distance(g.point(i), g.point(j)) < range {
                    got.push((i, j));
                }
            });
            got.sort_unstable();
            let mut seen = got.clone();
            seen.dedup();
            assert_eq!(seen.len(), got.len(), "duplicate pair visit");
            assert_eq!(got, brute_pairs(&g, range), "d={d} L={l} r={range}");
        }
    }

    #[test]
    fn single_point_candidates_unique() {
        let g = random_config(2, 5.0, 80, 5);
        let cl = CellList::new(&g, 2.0);
        let x = [0.1, 4.9];
        let mut seen = Vec::new();
        cl.for_each_candidate(&x, |j| seen.push(j));
        let mut dedup = seen.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), seen.len());
        for j in 0..g.len() {
            if g.domain().distance(&x, g.point(j)) < 2.0 {
                assert!(seen.contains(&j));
            }
        }
    }
}
