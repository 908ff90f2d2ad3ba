//! Flat periodic box geometry.
//!
//! All displacements use the minimal-image convention with components in
//! `[-L/2, L/2)`; a component exactly at `L/2` maps to `-L/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The box `[0, L)^d` with opposite faces identified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusDomain {
    dim: usize,
    side: f64,
}

impl TorusDomain {
    pub fn new(dim: usize, side: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidDomain(format!("side length must be positive, got {side}")));
        }
        Ok(Self { dim, side })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Largest possible torus distance, `(L/2)·√d`.
    pub fn max_distance(&self) -> f64 {
        0.5 * self.side * (self.dim as f64).sqrt()
    }

    /// Reduces a coordinate modulo `L` into `[0, L)`.
    #[inline]
    pub fn wrap_coord(&self, x: f64) -> f64 {
        let l = self.side;
        let mut r = x - l * (x / l).floor();
        // `x` slightly below a multiple of L can round up to exactly L.
        if r >= l {
            r -= l;
        }
        if r < 0.0 {
            r = 0.0;
        }
        r
    }

    /// Wraps a raw coordinate vector into the box.
    pub fn wrap(&self, raw: &[f64]) -> Result<Point> {
        self.check_dim(raw.len())?;
        let mut coords = Vec::with_capacity(self.dim);
        for (axis, &x) in raw.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFiniteCoordinate { axis, value: x });
            }
            coords.push(self.wrap_coord(x));
        }
        Ok(Point(coords))
    }

    /// Wraps in place; the caller guarantees finite input.
    #[inline]
    pub fn wrap_in_place(&self, x: &mut [f64]) {
        for c in x {
            *c = self.wrap_coord(*c);
        }
    }

    #[inline]
    pub fn min_image(&self, v: f64) -> f64 {
        let l = self.side;
        let half = 0.5 * l;
        let mut r = v - l * (v / l + 0.5).floor();
        if r >= half {
            r -= l;
        } else if r < -half {
            r += l;
        }
        r
    }

    /// Shortest vector `v` with `wrap(y + v) = x`, written into `out`.
    #[inline]
    pub fn displacement_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
            *o = self.min_image(a - b);
        }
    }

    pub fn displacement(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.displacement_into(x, y, &mut out);
        out
    }

    #[inline]
    pub fn distance_sq(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(&a, &b)| {
                let v = self.min_image(a - b);
                v * v
            })
            .sum()
    }

    #[inline]
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.distance_sq(x, y).sqrt()
    }

    pub fn whole(&self) -> Window {
        Window {
            lower: vec![0.0; self.dim],
            upper: vec![self.side; self.dim],
        }
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }
}

/// A point of the box. Coordinates always lie in `[0, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(pub(crate) Vec<f64>);

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Axis-aligned box `[lower, upper)` inside the torus (no wrapping).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Window {
    pub fn new(dom: &TorusDomain, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        dom.check_dim(lower.len())?;
        dom.check_dim(upper.len())?;
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo >= 0.0 && lo < hi && hi <= dom.side()) {
                return Err(Error::InvalidParameter(format!(
                    "window axis {i}: need 0 <= lower < upper <= L, got [{lo}, {hi})"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Cube `[lo, lo + side)^d`.
    pub fn cube(dom: &TorusDomain, lo: f64, side: f64) -> Result<Self> {
        Self::new(dom, vec![lo; dom.dim()], vec![lo + side; dom.dim()])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.extent(i)).product()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&c, (&lo, &hi))| c >= lo && c < hi)
    }

    pub fn is_whole(&self, dom: &TorusDomain) -> bool {
        self.lower.iter().all(|&v| v == 0.0) && self.upper.iter().all(|&v| v == dom.side())
    }

    /// Intersection, or `None` when it has zero volume.
    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let lo = self.lower[i].max(other.lower[i]);
            let hi = self.upper[i].min(other.upper[i]);
            if lo >= hi {
                return None;
            }
            lower.push(lo);
            upper.push(hi);
        }
        Some(Window { lower, upper })
    }

    /// Maps a point of `[0,1)^d` affinely onto the window.
    pub fn from_unit(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = self.lower[i] + u[i] * self.extent(i);
        }
    }
}
