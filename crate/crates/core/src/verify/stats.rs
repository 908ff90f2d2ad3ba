//! Small goodness-of-fit helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = super::Moments::from_slice(xs);
    (m.mean, m.std_error())
}

/// `Q_KS(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 2.0;
    let mut prev = 0.0f64;
    for k in 1..=100 {
        let term = sign * (a * (k * k) as f64).exp();
        sum += term;
        if term.abs() <= 1e-10 * prev || term.abs() <= 1e-16 * sum.abs() {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term.abs();
    }
    1.0
}

/// One-sample Kolmogorov–Smirnov p-value against a continuous cdf.
pub fn ks_pvalue<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let n = samples.len();
    if n == 0 {
        return 1.0;
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let sn = nf.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

pub fn ks_uniform_pvalue(samples: &[f64]) -> f64 {
    ks_pvalue(samples, |x| x.clamp(0.0, 1.0))
}

/// Pearson chi-square p-value. Adjacent cells are pooled until every
/// expected count is at least 5.
pub fn chi_square_pvalue(observed: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

/// Chi-square test of integer counts against Poisson(`mean`).
pub fn poisson_chi_square_pvalue(counts: &[usize], mean: f64) -> f64 {
    let n = counts.len() as f64;
    let kmax = counts.iter().copied().max().unwrap_or(0).max((mean + 10.0 * mean.sqrt() + 10.0) as usize);
    let mut observed = vec![0.0; kmax + 1];
    for &c in counts {
        observed[c] += 1.0;
    }
    let mut expected = Vec::with_capacity(kmax + 1);
    let mut p = (-mean).exp();
    let mut cum = 0.0;
    for k in 0..=kmax {
        if k > 0 {
            p *= mean / k as f64;
        }
        cum += p;
        expected.push(n * p);
    }
    // upper tail into the last cell
    *expected.last_mut().unwrap() += n * (1.0 - cum).max(0.0);
    chi_square_pvalue(&observed, &expected)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Per-test `|z|` threshold for `k` tests whose family-wise false alarm
/// equals that of a single two-sided test at `base_z`.
pub fn bonferroni_threshold(base_z: f64, k: usize) -> f64 {
    let n = Normal::standard();
    let alpha = 2.0 * n.cdf(-base_z);
    -n.inverse_cdf(alpha / (2.0 * k.max(1) as f64))
}

/// Total variation between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// CDF on `[0, L)` of `x0 + N(0, s²)` wrapped onto the circle of length `L`.
pub fn wrapped_normal_cdf(y: f64, x0: f64, s: f64, l: f64) -> f64 {
    let k = ((8.0 * s / l).ceil() as i64) + 1;
    let mut acc = 0.0;
    for j in -k..=k {
        let shift = j as f64 * l - x0;
        acc += normal_cdf((y + shift) / s) - normal_cdf(shift / s);
    }
    acc.clamp(0.0, 1.0)
}
