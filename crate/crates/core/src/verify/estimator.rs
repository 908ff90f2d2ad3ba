use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};

/// Samples per shard. Fixed, so results do not depend on the worker count.
pub const SHARD_SIZE: usize = 1_000;

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    /// Exact pairwise merge.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * nb / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub n_samples: u64,
    pub mean: f64,
    pub std_error: f64,
    pub target: Option<f64>,
    pub z_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<Moments>,
}

/// `(mean − target)/se`, with `0/0 := 0`.
pub fn z_score(mean: f64, se: f64, target: f64) -> f64 {
    let diff = mean - target;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

impl EstimatorResult {
    pub fn from_moments(m: Moments, target: Option<f64>) -> Self {
        let se = m.std_error();
        Self {
            n_samples: m.n,
            mean: m.mean,
            std_error: se,
            target,
            z_score: target.map(|t| z_score(m.mean, se, t)),
            moments: Some(m),
        }
    }

    pub fn from_samples(xs: &[f64], target: Option<f64>) -> Self {
        Self::from_moments(Moments::from_slice(xs), target)
    }

    /// A summary without retained moments.
    pub fn new(n_samples: u64, mean: f64, std_error: f64, target: Option<f64>) -> Self {
        Self {
            n_samples,
            mean,
            std_error,
            target,
            z_score: target.map(|t| z_score(mean, std_error, t)),
            moments: None,
        }
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.z_score.is_none_or(|z| z.abs() < threshold)
    }
}

/// Pools results that estimate the same quantity. With retained moments on
/// every input the merge is exact; otherwise inputs are precision weighted.
pub fn aggregate(results: &[EstimatorResult]) -> Result<EstimatorResult> {
    let first = results.first().ok_or(Error::Empty("result list"))?;
    if results.iter().any(|r| r.target != first.target) {
        return Err(Error::InvalidParameter("cannot pool results with different targets".into()));
    }
    let target = first.target;
    if results.iter().all(|r| r.moments.is_some()) {
        let m = results.iter().fold(Moments::default(), |acc, r| acc.merge(r.moments.as_ref().unwrap()));
        return Ok(EstimatorResult::from_moments(m, target));
    }
    let n: u64 = results.iter().map(|r| r.n_samples).sum();
    let exact: Vec<&EstimatorResult> = results.iter().filter(|r| r.std_error == 0.0).collect();
    if !exact.is_empty() {
        let mean = exact.iter().map(|r| r.mean).sum::<f64>() / exact.len() as f64;
        return Ok(EstimatorResult::new(n, mean, 0.0, target));
    }
    let (mut sw, mut swm) = (0.0, 0.0);
    for r in results {
        let w = 1.0 / (r.std_error * r.std_error);
        sw += w;
        swm += w * r.mean;
    }
    Ok(EstimatorResult::new(n, swm / sw, 1.0 / sw.sqrt(), target))
}

/// Runs `n` samples in fixed-size shards, shard `k` on stream
/// `(seed, stream_base + k)`, and returns the shard outputs in shard order.
/// `f(rng, first, count)` handles samples `first..first + count`.
pub fn run_sharded<T, F>(seed: u64, stream_base: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, usize, usize) -> T + Sync,
{
    let shards = n.div_ceil(SHARD_SIZE);
    (0..shards)
        .into_par_iter()
        .map(|k| {
            let count = SHARD_SIZE.min(n - k * SHARD_SIZE);
            let mut rng = stream_rng(seed, stream_base + k as u64);
            f(&mut rng, k * SHARD_SIZE, count)
        })
        .collect()
}

/// Merges per-shard moment vectors component-wise, in shard order.
pub fn merge_columns(shards: &[Vec<Moments>]) -> Vec<Moments> {
    let width = shards.first().map_or(0, |s| s.len());
    let mut out = vec![Moments::default(); width];
    for s in shards {
        for (o, m) in out.iter_mut().zip(s) {
            *o = o.merge(m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn single_and_pair() {
        let r = EstimatorResult::new(10, 1.5, 0.2, Some(1.0));
        assert_eq!(aggregate(std::slice::from_ref(&r)).unwrap(), r);
        let a = EstimatorResult::new(10, 1.0, 0.2, Some(0.0));
        let b = EstimatorResult::new(10, 2.0, 0.2, Some(0.0));
        let p = aggregate(&[a, b]).unwrap();
        assert!((p.mean - 1.5).abs() < 1e-15);
        assert!((p.std_error - 0.2 / 2f64.sqrt()).abs() < 1e-15);
        assert!(aggregate(&[]).is_err());
        let c = EstimatorResult::new(10, 2.0, 0.2, Some(1.0));
        assert!(aggregate(&[p, c]).is_err());
    }

    #[test]
    fn z_score_edge_cases() {
        assert_eq!(z_score(1.0, 0.0, 1.0), 0.0);
        assert_eq!(z_score(2.0, 0.0, 1.0), f64::INFINITY);
        assert_eq!(z_score(2.0, 0.5, 1.0), 2.0);
    }

    #[test]
    fn split_versus_whole() {
        let mut rng = stream_rng(9, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>().powi(3) * 7.0 - 1.0).collect();
        let whole = EstimatorResult::from_samples(&xs, Some(0.0));
        let shards: Vec<_> = xs.chunks(1_000).map(|c| EstimatorResult::from_samples(c, Some(0.0))).collect();
        let pooled = aggregate(&shards).unwrap();
        assert!((pooled.mean - whole.mean).abs() <= 1e-12 * whole.mean.abs());
        assert!((pooled.std_error - whole.std_error).abs() <= 1e-12 * whole.std_error);
        assert_eq!(pooled.n_samples, 10_000);
    }

    #[test]
    fn sharding_is_deterministic() {
        let run = || {
            let parts = run_sharded(5, 100, 2_500, |rng, _, n| {
                let mut m = Moments::default();
                (0..n).for_each(|_| m.push(rng.random()));
                vec![m]
            });
            merge_columns(&parts)[0]
        };
        let a = run();
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        assert_eq!(a, b);
        assert_eq!(a.n, 2_500);
    }

    proptest! {
        #[test]
        fn merge_is_associative_and_commutative(
            xs in proptest::collection::vec(-1e3f64..1e3, 3..60),
            cut1 in 0usize..60,
            cut2 in 0usize..60,
        ) {
            let n = xs.len();
            let (i, j) = { let (a, b) = (cut1 % n, cut2 % n); (a.min(b), a.max(b)) };
            let (a, b, c) = (
                Moments::from_slice(&xs[..i]),
                Moments::from_slice(&xs[i..j]),
                Moments::from_slice(&xs[j..]),
            );
            let left = a.merge(&b).merge(&c);
            let right = a.merge(&b.merge(&c));
            let swapped = c.merge(&a).merge(&b);
            let tol = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()));
            prop_assert_eq!(left.n, right.n);
            prop_assert!(tol(left.mean, right.mean) && tol(left.m2, right.m2));
            prop_assert!(tol(left.mean, swapped.mean) && tol(left.m2, swapped.m2));
        }
    }
}
