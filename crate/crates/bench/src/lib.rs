//! Fixtures shared by the benchmarks.

use confspace::rng::stream_rng;
use confspace::{Configuration, PairPotential, TorusDomain};
use rand::Rng;

/// `n` uniform points on a torus of side `l`.
pub fn uniform_config(d: usize, l: f64, n: usize, seed: u64) -> Configuration {
    let dom = TorusDomain::new(d, l).expect("valid domain");
    let mut rng = stream_rng(seed, 0);
    let flat = (0..n * d).map(|_| rng.random::<f64>() * l).collect();
    Configuration::from_flat(dom, flat).expect("in range")
}

/// Plain double loop, the baseline for the cell list.
pub fn naive_energy(phi: &PairPotential, g: &Configuration) -> f64 {
    let dom = g.domain();
    let mut e = 0.0;
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            e += phi.eval(dom.distance(g.point(i), g.point(j)));
        }
    }
    e
}

pub fn reference_lj() -> PairPotential {
    PairPotential::lennard_jones_tapered(1.0, 1.0, 2.5, 0.5).expect("valid potential")
}
