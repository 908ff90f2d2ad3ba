//! End to end through the public API: sample, write, read back, estimate.

use confspace::gibbs::{self, GibbsChain};
use confspace::intensity::PoissonSampler;
use confspace::io;
use confspace::rng::stream_rng;
use confspace::verify::suites::{run_criterion, SuiteOptions};
use confspace::{Configuration, GibbsSpec, IntensityMeasure, McmcParams, PairPotential, TorusDomain};

#[test]
fn poisson_samples_survive_a_file_round_trip() {
    let dom = TorusDomain::new(2, 5.0).unwrap();
    let sampler = PoissonSampler::new(IntensityMeasure::uniform(0.8).unwrap(), dom, dom.whole()).unwrap();
    let mut rng = stream_rng(8, 0);
    let samples: Vec<Configuration> = (0..2_000).map(|_| sampler.sample(&mut rng).unwrap()).collect();
    let mut buf = Vec::new();
    io::write_sample_set(&mut buf, &serde_json::json!({"seed": 8}), &samples).unwrap();
    let back = io::read_sample_set(buf.as_slice()).unwrap();
    assert_eq!(back.samples, samples);

    let est = gibbs::estimate_correlations(&back.samples, &dom.whole(), &gibbs::uniform_edges(2.0, 4)).unwrap();
    assert!((est.intensity_estimate - 0.8).abs() < 4.0 * est.intensity_stderr);
    for b in &est.pair_correlation {
        assert!((b.value - 1.0).abs() < 4.0 * b.stderr, "{b:?}");
    }
}

#[test]
fn hard_core_chain_never_overlaps() {
    let dom = TorusDomain::new(2, 6.0).unwrap();
    let spec = GibbsSpec::torus(dom, 2.0, PairPotential::hard_core(0.7).unwrap()).unwrap();
    let params = McmcParams { burn_in: 5_000, thinning: 100, n_samples: 200, ..McmcParams::default() };
    let mut chain = GibbsChain::new(spec, params, Configuration::empty(dom)).unwrap();
    for g in chain.collect(&mut stream_rng(2, 0)) {
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                assert!(dom.distance(g.point(i), g.point(j)) >= 0.7);
            }
        }
    }
}

#[test]
fn suites_are_reproducible_and_thread_count_free() {
    let opts = SuiteOptions { seed: 5, scale: 0.05 };
    let a = run_criterion(2, &opts).unwrap();
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run_criterion(2, &opts).unwrap());
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.mean, x.stderr, x.pass), (y.mean, y.stderr, y.pass));
    }
}
