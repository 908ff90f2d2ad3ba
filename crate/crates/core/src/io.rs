//! Text formats, run configuration and hashing.
//!
//! Snapshot: line `d L n`, then `n` lines of `d` coordinates written with 17
//! significant digits, which round-trips every `f64` exactly. Sample sets and
//! trajectories are a `#manifest {json}` line followed by snapshot blocks.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::calculus::{BumpFunction, BumpSum};
use crate::configuration::Configuration;
use crate::domain::{TorusDomain, Window};
use crate::dynamics::{Trajectory, TrajectoryParams};
use crate::error::{Error, Result};
use crate::gibbs::{CorrelationEstimate, GibbsSpec, McmcParams};
use crate::intensity::{IntensityMeasure, MixingLaw, SmoothDensity};
use crate::potential::PairPotential;

pub const MANIFEST_PREFIX: &str = "#manifest ";

/// First 8 bytes of the SHA-256 digest, hex encoded.
pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

pub fn hash_json(v: &Value) -> String {
    hash_bytes(v.to_string().as_bytes())
}

fn fmt_coord(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_snapshot<W: Write>(out: &mut W, g: &Configuration) -> Result<()> {
    let dom = g.domain();
    writeln!(out, "{} {} {}", dom.dim(), fmt_coord(dom.side()), g.len())?;
    for x in g.points() {
        let line: Vec<String> = x.iter().map(|&c| fmt_coord(c)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn snapshot_string(g: &Configuration) -> String {
    let mut buf = Vec::new();
    write_snapshot(&mut buf, g).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

/// Line-numbered reader over non-blank lines.
struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    line: usize,
    peeked: Option<String>,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self { inner: r.lines(), line: 0, peeked: None }
    }

    fn peek(&mut self) -> Result<Option<&str>> {
        if self.peeked.is_none() {
            loop {
                match self.inner.next() {
                    None => break,
                    Some(l) => {
                        self.line += 1;
                        let l = l?;
                        if !l.trim().is_empty() {
                            self.peeked = Some(l);
                            break;
                        }
                    }
                }
            }
        }
        Ok(self.peeked.as_deref())
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        self.peek()?;
        Ok(self.peeked.take())
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, lines: &Lines<impl BufRead>) -> Result<T> {
    s.parse().map_err(|_| lines.err(format!("bad {what} `{s}`")))
}

fn read_snapshot_from<R: BufRead>(lines: &mut Lines<R>) -> Result<Option<Configuration>> {
    let Some(header) = lines.next_line()? else {
        return Ok(None);
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(lines.err(format!("expected header `d L n`, got `{header}`")));
    }
    let d: usize = parse_num(parts[0], "dimension", lines)?;
    let l: f64 = parse_num(parts[1], "side length", lines)?;
    let n: usize = parse_num(parts[2], "point count", lines)?;
    let dom = TorusDomain::new(d, l).map_err(|e| lines.err(e.to_string()))?;
    let mut flat = Vec::with_capacity(n * d);
    for _ in 0..n {
        let row = lines.next_line()?.ok_or_else(|| lines.err("snapshot ended early"))?;
        let before = flat.len();
        for tok in row.split_whitespace() {
            flat.push(parse_num::<f64>(tok, "coordinate", lines)?);
        }
        if flat.len() - before != d {
            return Err(lines.err(format!("expected {d} coordinates, got {}", flat.len() - before)));
        }
    }
    Configuration::from_flat(dom, flat).map(Some).map_err(|e| lines.err(e.to_string()))
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<Configuration> {
    read_snapshot_from(&mut Lines::new(r))?.ok_or(Error::Empty("snapshot"))
}

pub fn parse_snapshot(s: &str) -> Result<Configuration> {
    read_snapshot(s.as_bytes())
}

/// A file of snapshots with its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub manifest: Value,
    pub samples: Vec<Configuration>,
}

pub fn write_sample_set<W: Write>(out: &mut W, manifest: &Value, samples: &[Configuration]) -> Result<()> {
    writeln!(out, "{MANIFEST_PREFIX}{manifest}")?;
    for g in samples {
        write_snapshot(out, g)?;
    }
    Ok(())
}

fn read_manifest<R: BufRead>(lines: &mut Lines<R>) -> Result<Value> {
    let Some(first) = lines.peek()? else {
        return Ok(Value::Null);
    };
    let Some(json) = first.strip_prefix(MANIFEST_PREFIX) else {
        return Ok(Value::Null);
    };
    let v = serde_json::from_str(json).map_err(|e| lines.err(format!("bad manifest: {e}")))?;
    lines.next_line()?;
    Ok(v)
}

/// Reads a sample set. A missing manifest line gives `Value::Null`, so bare
/// snapshot files are accepted too.
pub fn read_sample_set<R: BufRead>(r: R) -> Result<SampleSet> {
    let mut lines = Lines::new(r);
    let manifest = read_manifest(&mut lines)?;
    let mut samples = Vec::new();
    while let Some(g) = read_snapshot_from(&mut lines)? {
        samples.push(g);
    }
    Ok(SampleSet { manifest, samples })
}

pub fn write_trajectory<W: Write>(out: &mut W, manifest: &Value, traj: &Trajectory) -> Result<()> {
    writeln!(out, "{MANIFEST_PREFIX}{manifest}")?;
    for (t, g) in traj.times.iter().zip(&traj.states) {
        writeln!(out, "time {}", fmt_coord(*t))?;
        write_snapshot(out, g)?;
    }
    Ok(())
}

pub fn read_trajectory<R: BufRead>(r: R) -> Result<(Value, Trajectory)> {
    let mut lines = Lines::new(r);
    let manifest = read_manifest(&mut lines)?;
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    while let Some(l) = lines.next_line()? {
        let t = l.strip_prefix("time ").ok_or_else(|| lines.err(format!("expected `time T`, got `{l}`")))?;
        traj.times.push(parse_num(t.trim(), "time", &lines)?);
        let g = read_snapshot_from(&mut lines)?.ok_or_else(|| lines.err("missing snapshot after time line"))?;
        traj.states.push(g);
    }
    Ok((manifest, traj))
}

/// CSV with header `bin_lo,bin_hi,g2,stderr`, preceded by a manifest comment.
pub fn write_correlation_csv<W: Write>(out: &mut W, manifest: &Value, est: &CorrelationEstimate) -> Result<()> {
    writeln!(out, "{MANIFEST_PREFIX}{manifest}")?;
    writeln!(out, "bin_lo,bin_hi,g2,stderr")?;
    for b in &est.pair_correlation {
        writeln!(out, "{},{},{},{}", b.lo, b.hi, b.value, b.stderr)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- run config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub d: usize,
    #[serde(rename = "L")]
    pub side: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensitySection {
    /// `uniform` or `density`.
    #[serde(default = "uniform_kind")]
    pub kind: String,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub base: f64,
    #[serde(default)]
    pub rho_max: f64,
    #[serde(default)]
    pub bump_centers: Vec<Vec<f64>>,
    #[serde(default)]
    pub bump_radii: Vec<f64>,
    #[serde(default)]
    pub bump_amplitudes: Vec<f64>,
}

fn uniform_kind() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    /// `[[z, weight], ...]`.
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// `zero`, `hard_core` or `lennard_jones`.
    pub kind: String,
    #[serde(default)]
    pub radius: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default)]
    pub r_cut: Option<f64>,
    #[serde(default)]
    pub taper_width: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { kind: "zero".into(), radius: 0.0, a: 1.0, b: 1.0, r_cut: None, taper_width: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub dt: f64,
    pub n_steps: usize,
    pub save_every: usize,
    /// Independent paths per simulate run.
    pub n_paths: usize,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self { dt: 1e-3, n_steps: 100, save_every: 10, n_paths: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub suite: String,
    /// Multiplies every sample size of the suites.
    pub scale: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { suite: "all".into(), scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: String,
    /// Sample count for `sample-poisson`.
    pub n_samples: usize,
    /// Upper edge and bin count for correlation estimates.
    pub r_max: f64,
    pub bins: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 1, out_dir: "out".into(), n_samples: 100, r_max: 2.0, bins: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub intensity: IntensitySection,
    #[serde(default)]
    pub mixing: MixingSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub mcmc: McmcParams,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub run: RunSection,
}

/// A configuration problem pinned to a field and, when found, a line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub msg: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.msg),
            (Some(l), None) => write!(f, "line {l}: {}", self.msg),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.msg),
            (None, None) => write!(f, "{}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of `key` inside `[section]`, or of the section header.
fn locate(text: &str, section: &str, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(k) = key {
                let lhs = l.split('=').next().unwrap_or("").trim();
                if l.contains('=') && lhs == k {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl RunConfig {
    /// Parses and validates; every error names a line and field when known.
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            field: None,
            msg: e.message().to_string(),
        })?;
        cfg.validate().map_err(|(section, key, msg)| ConfigError {
            line: locate(text, section, key),
            field: Some(match key {
                Some(k) => format!("{section}.{k}"),
                None => section.to_string(),
            }),
            msg,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            field: None,
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, Option<&'static str>, String)> {
        let dom = self.domain().map_err(|e| ("domain", None, e.to_string()))?;
        self.intensity_measure(&dom).map_err(|e| ("intensity", self.intensity_field(), e.to_string()))?;
        if !self.mixing.atoms.is_empty() {
            self.mixing_law().map_err(|e| ("mixing", Some("atoms"), e.to_string()))?;
        }
        self.potential().map_err(|e| ("potential", None, e.to_string()))?;
        self.window(&dom).map_err(|e| ("window", None, e.to_string()))?;
        self.mcmc.validate().map_err(|e| ("mcmc", None, e.to_string()))?;
        self.trajectory_params().map_err(|e| ("trajectory", None, e.to_string()))?;
        if self.trajectory.n_paths == 0 {
            return Err(("trajectory", Some("n_paths"), "must be >= 1".into()));
        }
        if crate::verify::suites::Suite::parse(&self.verify.suite).is_none() {
            return Err(("verify", Some("suite"), format!("unknown suite `{}`", self.verify.suite)));
        }
        if !(self.verify.scale.is_finite() && self.verify.scale > 0.0) {
            return Err(("verify", Some("scale"), "must be finite and > 0".into()));
        }
        if !(self.run.r_max.is_finite() && self.run.r_max > 0.0) || self.run.bins == 0 {
            return Err(("run", Some("r_max"), "r_max must be > 0 with bins >= 1".into()));
        }
        Ok(())
    }

    fn intensity_field(&self) -> Option<&'static str> {
        match self.intensity.kind.as_str() {
            "uniform" => Some("z"),
            "density" => None,
            _ => Some("kind"),
        }
    }

    pub fn domain(&self) -> Result<TorusDomain> {
        TorusDomain::new(self.domain.d, self.domain.side)
    }

    pub fn intensity_measure(&self, dom: &TorusDomain) -> Result<IntensityMeasure> {
        let s = &self.intensity;
        match s.kind.as_str() {
            "uniform" => IntensityMeasure::uniform(s.z),
            "density" => {
                let k = s.bump_centers.len();
                if s.bump_radii.len() != k || s.bump_amplitudes.len() != k {
                    return Err(Error::InvalidParameter(
                        "bump_centers, bump_radii and bump_amplitudes must have equal length".into(),
                    ));
                }
                let bumps = (0..k)
                    .map(|i| BumpFunction::new(dom, s.bump_centers[i].clone(), s.bump_radii[i], s.bump_amplitudes[i]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(IntensityMeasure::Density(SmoothDensity::new(s.base, BumpSum::new(bumps), s.rho_max)?))
            }
            other => Err(Error::InvalidParameter(format!("unknown intensity kind `{other}`"))),
        }
    }

    /// The configured mixing law, or a point mass at `intensity.z`.
    pub fn mixing_law(&self) -> Result<MixingLaw> {
        if self.mixing.atoms.is_empty() {
            MixingLaw::point_mass(self.intensity.z.max(0.0))
        } else {
            MixingLaw::new(self.mixing.atoms.iter().map(|a| (a[0], a[1])).collect())
        }
    }

    pub fn potential(&self) -> Result<PairPotential> {
        let p = &self.potential;
        match p.kind.as_str() {
            "zero" => Ok(PairPotential::Zero),
            "hard_core" => PairPotential::hard_core(p.radius),
            "lennard_jones" => match (p.r_cut, p.taper_width) {
                (Some(r), Some(w)) => PairPotential::lennard_jones_tapered(p.a, p.b, r, w),
                (None, None) => PairPotential::lennard_jones(p.a, p.b),
                _ => Err(Error::InvalidParameter("r_cut and taper_width go together".into())),
            },
            other => Err(Error::InvalidParameter(format!("unknown potential kind `{other}`"))),
        }
    }

    pub fn window(&self, dom: &TorusDomain) -> Result<Window> {
        match (&self.window.lower, &self.window.upper) {
            (None, None) => Ok(dom.whole()),
            (Some(lo), Some(hi)) => Window::new(dom, lo.clone(), hi.clone()),
            _ => Err(Error::InvalidParameter("window needs both lower and upper".into())),
        }
    }

    pub fn gibbs_spec(&self) -> Result<GibbsSpec> {
        let dom = self.domain()?;
        GibbsSpec::new(dom, self.intensity.z, self.potential()?, self.window(&dom)?, Configuration::empty(dom))
    }

    pub fn trajectory_params(&self) -> Result<TrajectoryParams> {
        let t = &self.trajectory;
        let p = TrajectoryParams { dt: t.dt, n_steps: t.n_steps, save_every: t.save_every, seed: self.run.seed };
        p.validate()?;
        Ok(p)
    }

    /// Hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        hash_json(&serde_json::to_value(self).expect("config serializes"))
    }
}
