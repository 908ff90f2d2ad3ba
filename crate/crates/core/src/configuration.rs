//! Finite point configurations.

use crate::domain::{Point, TorusDomain, Window};
use crate::error::{Error, Result};

/// A finite configuration of points in the torus, stored as a flat
/// coordinate array. Semantics are those of a multiset: order is an
/// implementation detail and duplicates are representable.
#[derive(Debug, Clone)]
pub struct Configuration {
    dom: TorusDomain,
    coords: Vec<f64>,
}

impl Configuration {
    pub fn empty(dom: TorusDomain) -> Self {
        Self { dom, coords: Vec::new() }
    }

    /// Builds from a flat coordinate array; every coordinate must already be in `[0, L)`.
    pub fn from_flat(dom: TorusDomain, coords: Vec<f64>) -> Result<Self> {
        let d = dom.dim();
        if !coords.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch { expected: d, got: coords.len() % d });
        }
        for (i, &c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFiniteCoordinate { axis: i % d, value: c });
            }
            if !(0.0..dom.side()).contains(&c) {
                return Err(Error::InvalidParameter(format!(
                    "coordinate {c} of point {} lies outside [0, {})",
                    i / d,
                    dom.side()
                )));
            }
        }
        Ok(Self { dom, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(dom: TorusDomain, points: &[P]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dom.dim());
        for p in points {
            let p = p.as_ref();
            dom.check_dim(p.len())?;
            coords.extend_from_slice(p);
        }
        Self::from_flat(dom, coords)
    }

    pub(crate) fn from_flat_unchecked(dom: TorusDomain, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len() % dom.dim(), 0);
        Self { dom, coords }
    }

    #[inline]
    pub fn domain(&self) -> &TorusDomain {
        &self.dom
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dom.dim()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dom.dim()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dom.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    #[inline]
    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.dom.dim();
        &mut self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dom.dim())
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    /// `⟨f, γ⟩ = Σ_{x∈γ} f(x)`.
    pub fn pair<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (index, x) in self.points().enumerate() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteField { index, value: v });
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Sum without the finiteness check; used in hot loops on bounded fields.
    #[inline]
    pub fn pair_unchecked<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.points().map(f).sum()
    }

    /// `N_B(γ)`: number of points in the window.
    pub fn count(&self, window: &Window) -> usize {
        self.points().filter(|x| window.contains(x)).count()
    }

    /// `γ_Λ`.
    pub fn restrict(&self, window: &Window) -> Configuration {
        let mut coords = Vec::new();
        for x in self.points().filter(|x| window.contains(x)) {
            coords.extend_from_slice(x);
        }
        Self { dom: self.dom, coords }
    }

    /// `γ + ε_x`.
    pub fn add_point(&self, x: &Point) -> Result<Configuration> {
        let mut out = self.clone();
        out.push(x.coords())?;
        Ok(out)
    }

    /// Removes the point at `index` (the relative order of the rest is kept).
    pub fn remove_point(&self, index: usize) -> Result<Configuration> {
        let mut out = self.clone();
        out.remove(index)?;
        Ok(out)
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        self.dom.check_dim(x.len())?;
        for (axis, &c) in x.iter().enumerate() {
            if !(c.is_finite() && (0.0..self.dom.side()).contains(&c)) {
                return Err(Error::NonFiniteCoordinate { axis, value: c });
            }
        }
        self.coords.extend_from_slice(x);
        Ok(())
    }

    #[inline]
    pub(crate) fn push_unchecked(&mut self, x: &[f64]) {
        self.coords.extend_from_slice(x);
    }

    pub(crate) fn pop_unchecked(&mut self) {
        let d = self.dom.dim();
        let n = self.coords.len();
        self.coords.truncate(n - d);
    }

    pub fn remove(&mut self, index: usize) -> Result<()> {
        let len = self.len();
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        let d = self.dom.dim();
        self.coords.drain(index * d..(index + 1) * d);
        Ok(())
    }

    /// Removes `index` by moving the last point into its slot.
    pub(crate) fn swap_remove(&mut self, index: usize) {
        let d = self.dom.dim();
        let last = self.len() - 1;
        if index != last {
            let (head, tail) = self.coords.split_at_mut(last * d);
            head[index * d..(index + 1) * d].copy_from_slice(&tail[..d]);
        }
        self.coords.truncate(last * d);
    }

    /// True when no two points coincide exactly.
    pub fn is_simple(&self) -> bool {
        let mut pts: Vec<&[f64]> = self.points().collect();
        pts.sort_by(|a, b| cmp_points(a, b));
        pts.windows(2).all(|w| w[0] != w[1])
    }

    /// Exact multiset equality (bitwise coordinates, order ignored).
    pub fn multiset_eq(&self, other: &Configuration) -> bool {
        if self.dom != other.dom || self.len() != other.len() {
            return false;
        }
        let mut a: Vec<&[f64]> = self.points().collect();
        let mut b: Vec<&[f64]> = other.points().collect();
        a.sort_by(|x, y| cmp_points(x, y));
        b.sort_by(|x, y| cmp_points(x, y));
        a == b
    }
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.multiset_eq(other)
    }
}

fn cmp_points(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}
