use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use confspace::dynamics::{self, TrajectoryParams};
use confspace::gibbs::{self, McmcParams};
use confspace::intensity::{self, PoissonSampler};
use confspace::io::{self, RunConfig};
use confspace::rng::{derive_seed, stream_rng};
use confspace::verify::suites::{self, Suite, SuiteOptions};
use confspace::verify::run_sharded;
use confspace::{metric, Configuration, PairPotential};

use crate::{Cli, Command, Format, EXIT_RUNTIME, EXIT_USAGE, EXIT_VERIFY_FAILED};

const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<confspace::Error> for CliError {
    fn from(e: confspace::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

struct Context {
    cfg: RunConfig,
    hash: String,
    seed: u64,
    out: PathBuf,
    format: Format,
}

impl Context {
    fn manifest(&self, command: &str, extra: Value) -> Value {
        let mut m = json!({
            "command": command,
            "config_hash": self.hash,
            "seed": self.seed,
        });
        if let (Value::Object(m), Value::Object(extra)) = (&mut m, extra) {
            m.extend(extra);
        }
        m
    }

    fn create(&self, name: &str) -> CliResult<(PathBuf, BufWriter<File>)> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok((path, BufWriter::new(f)))
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let parsed = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?,
        None => RunConfig::parse(DEFAULT_CONFIG).map_err(|e| CliError::Usage(format!("built-in config: {e}")))?,
    };
    Ok(parsed)
}

pub fn run(cli: &Cli) -> CliResult<u8> {
    let cfg = load_config(cli)?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let ctx = Context {
        hash: cfg.hash(),
        seed: cli.seed.unwrap_or(cfg.run.seed),
        out: cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir)),
        format: cli.format,
        cfg,
    };
    match &cli.command {
        Command::SamplePoisson => sample_poisson(&ctx),
        Command::SampleGibbs => sample_gibbs(&ctx),
        Command::SimulateFree { start } => simulate(&ctx, start.as_deref(), false),
        Command::SimulateInteracting { start } => simulate(&ctx, start.as_deref(), true),
        Command::Verify { suite } => verify(&ctx, suite),
        Command::Distance { a, b } => distance(a, b),
        Command::Correlate { samples } => correlate(&ctx, samples),
    }
}

fn count_summary(samples: &[Configuration]) -> String {
    let counts: Vec<usize> = samples.iter().map(|g| g.len()).collect();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
    let (lo, hi) = (counts.iter().min().copied().unwrap_or(0), counts.iter().max().copied().unwrap_or(0));
    format!("{} samples, points per sample: mean {mean:.4}, min {lo}, max {hi}", samples.len())
}

fn sample_poisson(ctx: &Context) -> CliResult<u8> {
    let cfg = &ctx.cfg;
    let dom = cfg.domain()?;
    let window = cfg.window(&dom)?;
    let law = cfg.mixing_law()?;
    let n = cfg.run.n_samples;
    let seed = derive_seed(ctx.seed, "sample-poisson");
    let mixed = !cfg.mixing.atoms.is_empty();
    let sigma = cfg.intensity_measure(&dom)?;
    let shards = if mixed {
        // mixing atoms multiply the configured intensity
        let unit = PoissonSampler::new(sigma.clone(), dom, window.clone())?;
        run_sharded(seed, 0, n, |rng, _, k| {
            (0..k)
                .map(|_| intensity::sample_mixed_poisson(&law, &unit, rng).map(|(_, g)| g))
                .collect::<confspace::Result<Vec<_>>>()
        })
    } else {
        let sampler = PoissonSampler::new(sigma.clone(), dom, window.clone())?;
        run_sharded(seed, 0, n, |rng, _, k| (0..k).map(|_| sampler.sample(rng)).collect())
    };
    let samples: Vec<Configuration> = shards.into_iter().collect::<confspace::Result<Vec<_>>>()?.concat();
    let manifest = ctx.manifest(
        "sample-poisson",
        json!({"intensity": sigma, "mixing": law.atoms(), "window": window, "n_samples": n}),
    );
    let (path, mut w) = ctx.create("poisson_samples.txt")?;
    io::write_sample_set(&mut w, &manifest, &samples)?;
    w.flush()?;
    println!("{}", count_summary(&samples));
    println!("wrote {}", path.display());
    Ok(0)
}

fn sample_gibbs(ctx: &Context) -> CliResult<u8> {
    let spec = ctx.cfg.gibbs_spec()?;
    let params = McmcParams { seed: ctx.seed, ..ctx.cfg.mcmc.clone() };
    let mut rng = stream_rng(derive_seed(ctx.seed, "sample-gibbs"), 0);
    let samples = gibbs::gc_sample(&spec, &params, &mut rng)?;
    let manifest = ctx.manifest(
        "sample-gibbs",
        json!({"z": spec.z, "potential": spec.phi, "potential_hash": spec.phi.hash(),
               "window": spec.window, "mcmc": params}),
    );
    let (path, mut w) = ctx.create("gibbs_samples.txt")?;
    io::write_sample_set(&mut w, &manifest, &samples)?;
    w.flush()?;
    println!("{}", count_summary(&samples));
    println!("wrote {}", path.display());
    Ok(0)
}

fn first_configuration(path: &Path) -> CliResult<Configuration> {
    let f = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let set = io::read_sample_set(BufReader::new(f)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    set.samples.into_iter().next().ok_or_else(|| CliError::Usage(format!("{}: no configuration", path.display())))
}

fn simulate(ctx: &Context, start: Option<&Path>, interacting: bool) -> CliResult<u8> {
    let cfg = &ctx.cfg;
    let dom = cfg.domain()?;
    let phi = if interacting { cfg.potential()? } else { PairPotential::Zero };
    let params = TrajectoryParams { seed: ctx.seed, ..cfg.trajectory_params()? };
    let label = if interacting { "simulate-interacting" } else { "simulate-free" };
    let seed = derive_seed(ctx.seed, label);
    let given = start.map(first_configuration).transpose()?;
    if let Some(g) = &given {
        if *g.domain() != dom {
            return Err(CliError::Usage("start configuration lives on a different domain than the config".into()));
        }
    }
    let n_paths = cfg.trajectory.n_paths;
    let paths: Vec<confspace::Result<dynamics::Trajectory>> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let g0 = match &given {
                Some(g) => g.clone(),
                None if interacting && !phi.is_zero() => {
                    let spec = cfg.gibbs_spec()?;
                    let p = McmcParams { n_samples: 1, ..cfg.mcmc.clone() };
                    gibbs::gc_sample(&spec, &p, &mut rng)?.remove(0)
                }
                None => PoissonSampler::new(cfg.intensity_measure(&dom)?, dom, dom.whole())?.sample(&mut rng)?,
            };
            dynamics::simulate(&phi, &g0, &params, &mut rng)
        })
        .collect();
    let mut written = Vec::new();
    for (k, traj) in paths.into_iter().enumerate() {
        let traj = traj?;
        let manifest = ctx.manifest(
            label,
            json!({"trajectory": params, "potential": phi, "potential_hash": phi.hash(), "path": k}),
        );
        let (path, mut w) = ctx.create(&format!("trajectory_{k}.txt"))?;
        io::write_trajectory(&mut w, &manifest, &traj)?;
        w.flush()?;
        written.push(path);
    }
    println!("{n_paths} paths, {} saved states each, horizon {}", params.n_steps / params.save_every + 1, params.horizon());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(0)
}

fn verify(ctx: &Context, name: &str) -> CliResult<u8> {
    let suite = Suite::parse(name).ok_or_else(|| {
        CliError::Usage(format!("unknown suite `{name}`; expected one of {}", Suite::NAMES.join(", ")))
    })?;
    let opts = SuiteOptions { seed: ctx.seed, scale: ctx.cfg.verify.scale };
    let reports = suites::run_suite(suite, &opts)?;
    let mut all_pass = true;
    for r in &reports {
        println!("{}", r.summary_line());
        all_pass &= r.records.iter().all(|c| c.pass);
    }
    // timings stay on stdout so files are reproducible
    let criteria: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "criterion": r.criterion,
                "title": r.title,
                "pass": r.records.iter().all(|c| c.pass),
                "checks": r.records,
            })
        })
        .collect();
    let manifest = ctx.manifest("verify", json!({"suite": name, "scale": opts.scale}));
    let path = match ctx.format {
        Format::Json => {
            let doc = json!({"manifest": manifest, "pass": all_pass, "criteria": criteria});
            let (path, mut w) = ctx.create(&format!("verify_{name}.json"))?;
            serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(w)?;
            w.flush()?;
            path
        }
        Format::Csv => {
            let (path, mut w) = ctx.create(&format!("verify_{name}.csv"))?;
            writeln!(w, "{}{manifest}", io::MANIFEST_PREFIX)?;
            writeln!(w, "criterion,test,params_hash,seed,n,mean,stderr,target,z,pass")?;
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            for r in &reports {
                for c in &r.records {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{},{},{}",
                        r.criterion,
                        c.test,
                        c.params_hash,
                        c.seed,
                        c.n,
                        c.mean,
                        c.stderr,
                        opt(c.target),
                        opt(c.z),
                        c.pass
                    )?;
                }
            }
            w.flush()?;
            path
        }
    };
    println!("wrote {}", path.display());
    Ok(if all_pass { 0 } else { EXIT_VERIFY_FAILED })
}

fn distance(a: &Path, b: &Path) -> CliResult<u8> {
    let (ga, gb) = (first_configuration(a)?, first_configuration(b)?);
    let m = metric::rho(&ga, &gb).map_err(|e| CliError::Usage(e.to_string()))?;
    if !m.is_finite() {
        println!("inf");
        return Ok(0);
    }
    println!("{}", m.cost);
    for (i, j) in m.assignment.iter().enumerate() {
        println!("{i} {j}");
    }
    Ok(0)
}

fn correlate(ctx: &Context, samples: &Path) -> CliResult<u8> {
    let f = File::open(samples).map_err(|e| CliError::Usage(format!("{}: {e}", samples.display())))?;
    let set = io::read_sample_set(BufReader::new(f))?;
    let first = set.samples.first().ok_or_else(|| CliError::Usage("sample set is empty".into()))?;
    let dom = *first.domain();
    let window = ctx.cfg.window(&dom)?;
    let edges = gibbs::uniform_edges(ctx.cfg.run.r_max, ctx.cfg.run.bins);
    let est = gibbs::estimate_correlations(&set.samples, &window, &edges)?;
    let source = io::hash_bytes(&fs::read(samples)?);
    let manifest = ctx.manifest(
        "correlate",
        json!({"samples_hash": source, "window": window, "edges": edges, "n_samples": set.samples.len()}),
    );
    let (path, mut w) = ctx.create("correlation.csv")?;
    io::write_correlation_csv(&mut w, &manifest, &est)?;
    w.flush()?;
    println!("intensity {:.6} ± {:.2e}, xi_hat {:.6}", est.intensity_estimate, est.intensity_stderr, est.xi_hat);
    println!("wrote {}", path.display());
    if ctx.format == Format::Json {
        let (path, mut w) = ctx.create("correlation.json")?;
        let doc = json!({"manifest": manifest, "estimate": est});
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}
