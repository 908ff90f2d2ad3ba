use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial table with cubic Hermite interpolation between nodes.
///
/// Below the first node the potential is a hard core (`+∞`) when the first
/// node is at `r > 0`; at and beyond the last node it is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPotential {
    radii: Vec<f64>,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    r_cut: f64,
}

impl TabulatedPotential {
    pub fn new(radii: Vec<f64>, values: Vec<f64>, derivatives: Vec<f64>, r_cut: f64) -> Result<Self> {
        let n = radii.len();
        if n < 2 || values.len() != n || derivatives.len() != n {
            return Err(Error::InvalidParameter(
                "tabulated potential needs >= 2 nodes with matching value and gradient columns".into(),
            ));
        }
        if radii[0] < 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("tabulated radii must be >= 0 and strictly increasing".into()));
        }
        if values.iter().chain(&derivatives).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("tabulated values must be finite".into()));
        }
        if !(r_cut.is_finite() && r_cut >= radii[n - 1]) {
            return Err(Error::InvalidParameter(format!(
                "r_cut {r_cut} must be finite and >= last node {}",
                radii[n - 1]
            )));
        }
        Ok(Self { radii, values, derivatives, r_cut })
    }

    pub fn r_cut(&self) -> f64 {
        self.r_cut
    }

    pub fn core_radius(&self) -> Option<f64> {
        (self.radii[0] > 0.0).then_some(self.radii[0])
    }

    fn segment(&self, r: f64) -> Option<(usize, f64, f64)> {
        let n = self.radii.len();
        if r < self.radii[0] || r >= self.radii[n - 1] {
            return None;
        }
        let k = self.radii.partition_point(|&x| x <= r) - 1;
        let h = self.radii[k + 1] - self.radii[k];
        Some((k, (r - self.radii[k]) / h, h))
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r < self.radii[0] {
            return f64::INFINITY;
        }
        match self.segment(r) {
            None => 0.0,
            Some((k, t, h)) => {
                let t2 = t * t;
                let t3 = t2 * t;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                h00 * self.values[k]
                    + h10 * h * self.derivatives[k]
                    + h01 * self.values[k + 1]
                    + h11 * h * self.derivatives[k + 1]
            }
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self.segment(r) {
            None => 0.0,
            Some((k, t, h)) => {
                let t2 = t * t;
                let d00 = 6.0 * t2 - 6.0 * t;
                let d10 = 3.0 * t2 - 4.0 * t + 1.0;
                let d01 = -6.0 * t2 + 6.0 * t;
                let d11 = 3.0 * t2 - 2.0 * t;
                (d00 * self.values[k] + d01 * self.values[k + 1]) / h
                    + d10 * self.derivatives[k]
                    + d11 * self.derivatives[k + 1]
            }
        }
    }

    /// Parses the text table: header `n r_cut`, then `n` lines `r value gradient`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let mut h = header.split_whitespace();
        let n: usize = parse_field(h.next(), hl, "n")?;
        let r_cut: f64 = parse_field(h.next(), hl, "r_cut")?;
        let mut radii = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let mut derivatives = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, l) = lines.next().ok_or(Error::Parse { line: hl + n, msg: "too few table rows".into() })?;
            let mut f = l.split_whitespace();
            radii.push(parse_field(f.next(), ln, "r")?);
            values.push(parse_field(f.next(), ln, "value")?);
            derivatives.push(parse_field(f.next(), ln, "gradient")?);
        }
        Self::new(radii, values, derivatives, r_cut)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {:.16e}\n", self.radii.len(), self.r_cut);
        for k in 0..self.radii.len() {
            s.push_str(&format!(
                "{:.16e} {:.16e} {:.16e}\n",
                self.radii[k], self.values[k], self.derivatives[k]
            ));
        }
        s
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize, name: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse { line, msg: format!("missing field `{name}`") })?;
    tok.parse()
        .map_err(|_| Error::Parse { line, msg: format!("field `{name}`: cannot parse `{tok}`") })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_of(f: impl Fn(f64) -> (f64, f64), lo: f64, hi: f64, n: usize) -> TabulatedPotential {
        let radii: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        let (values, derivs): (Vec<f64>, Vec<f64>) = radii.iter().map(|&r| f(r)).unzip();
        TabulatedPotential::new(radii, values, derivs, hi).unwrap()
    }

    #[test]
    fn reproduces_cubic_exactly() {
        // Hermite interpolation is exact on cubics.
        let t = table_of(|r| (r * r * r - 2.0 * r, 3.0 * r * r - 2.0), 0.5, 3.0, 6);
        for r in [0.5, 0.77, 1.3, 2.2, 2.99] {
            assert!((t.eval(r) - (r * r * r - 2.0 * r)).abs() < 1e-12);
            assert!((t.derivative(r) - (3.0 * r * r - 2.0)).abs() < 1e-11);
        }
        assert_eq!(t.eval(0.4), f64::INFINITY);
        assert_eq!(t.eval(3.0), 0.0);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let t = table_of(|r| ((-r).exp() * r.cos(), -(-r).exp() * (r.cos() + r.sin())), 0.8, 2.5, 12);
        for r in [0.9, 1.11, 1.7, 2.3] {
            let h = 1e-6 * r;
            let fd = (t.eval(r + h) - t.eval(r - h)) / (2.0 * h);
            assert!((fd - t.derivative(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn text_round_trip_and_errors() {
        let t = table_of(|r| (1.0 / r, -1.0 / (r * r)), 1.0, 2.0, 4);
        let back = TabulatedPotential::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(matches!(TabulatedPotential::parse("2 1.0\n0.5 1 0\n"), Err(Error::Parse { .. })));
        assert!(TabulatedPotential::parse("2 1.0\n0.5 1 0\n0.4 1 0\n").is_err());
        assert!(matches!(TabulatedPotential::parse("x 1.0\n"), Err(Error::Parse { line: 1, .. })));
    }
}
