use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use confspace::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_confspace"))
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = r#"
[domain]
d = 2
L = 4.0

[intensity]
z = 1.5

[potential]
kind = "hard_core"
radius = 0.3

[mcmc]
burn_in = 2000
thinning = 50
n_samples = 40
move_scale = 0.2

[trajectory]
dt = 0.001
n_steps = 20
save_every = 5
n_paths = 3

[run]
seed = 11
n_samples = 2500
r_max = 1.5
bins = 6
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn verify_poisson_identities_with_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config();
    let o = run(&["verify", "poisson-identities", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify_poisson-identities.json")).unwrap()).unwrap();
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["criteria"].as_array().unwrap().len(), 2);
    assert!(doc["manifest"]["config_hash"].is_string());
}

#[test]
fn failing_verification_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // one sample per estimator: zero standard error, so any deviation fails
    let cfg = write_config(dir.path(), &format!("{SMALL}\n[verify]\nscale = 1e-6\n"));
    let o = run(&["verify", "poisson-identities", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn usage_and_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["verify", "nope"]).status.code(), Some(1));

    let bad = write_config(dir.path(), "[domain]\nd = 2\nL = -4.0\n[intensity]\nz = 1.0\n");
    let o = run(&["sample-poisson", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1") && err.contains("domain"), "{err}");

    let typo = write_config(dir.path(), "[domain]\nd = 2\nL = 4.0\n[intensity]\nzz = 1.0\n");
    let o = run(&["sample-poisson", "--config", typo.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn distance_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().to_str().unwrap();
    assert!(run(&["sample-poisson", "--config", cfg.to_str().unwrap(), "--out", out]).status.success());
    let f = dir.path().join("poisson_samples.txt");
    let o = run(&["distance", f.to_str().unwrap(), f.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("0"));

    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    fs::write(&a, "1 2.0 2\n0.1\n0.9\n").unwrap();
    fs::write(&b, "1 2.0 1\n0.5\n").unwrap();
    let o = run(&["distance", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "inf");
    fs::write(&b, "1 2.0 2\n1.0\n0.0\n").unwrap();
    let o = run(&["distance", a.to_str().unwrap(), b.to_str().unwrap()]);
    let text = stdout(&o);
    let mut lines = text.lines();
    let rho: f64 = lines.next().unwrap().parse().unwrap();
    assert!((rho - (0.01f64 + 0.01).sqrt()).abs() < 1e-12);
    assert_eq!(lines.collect::<Vec<_>>(), vec!["0 1", "1 0"]);
}

#[test]
fn zero_activity_gives_empty_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("z = 1.5", "z = 0.0"));
    let o = run(&["sample-poisson", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let set = io::read_sample_set(fs::read(dir.path().join("poisson_samples.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(set.samples.len(), 2500);
    assert!(set.samples.iter().all(|g| g.is_empty()));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut files = Vec::new();
    for w in ["1", "1", "3"] {
        let out = dir.path().join(format!("w{w}-{}", files.len()));
        for cmd in ["sample-poisson", "sample-gibbs", "simulate-interacting"] {
            let o = run(&[cmd, "--config", cfg.to_str().unwrap(), "--workers", w, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let read = |n: &str| fs::read(out.join(n)).unwrap();
        files.push((read("poisson_samples.txt"), read("gibbs_samples.txt"), read("trajectory_2.txt")));
    }
    assert!(files[0] == files[1]);
    assert!(files[0] == files[2]);
    let manifest = String::from_utf8_lossy(&files[0].1).lines().next().unwrap().to_string();
    assert!(manifest.starts_with("#manifest ") && manifest.contains("config_hash") && manifest.contains("\"seed\":11"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let go = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        assert!(run(&["sample-poisson", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()])
            .status
            .success());
        fs::read(out.join("poisson_samples.txt")).unwrap()
    };
    assert_ne!(go("1", "a"), go("2", "b"));
}

#[test]
fn simulate_and_correlate_write_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().to_str().unwrap();
    assert!(run(&["simulate-free", "--config", cfg.to_str().unwrap(), "--out", out]).status.success());
    let (manifest, traj) = io::read_trajectory(fs::read(dir.path().join("trajectory_0.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(traj.len(), 5);
    assert!((traj.times[4] - 0.02).abs() < 1e-12);
    assert_eq!(manifest["path"], 0);

    assert!(run(&["sample-gibbs", "--config", cfg.to_str().unwrap(), "--out", out]).status.success());
    let samples = dir.path().join("gibbs_samples.txt");
    let o = run(&["correlate", samples.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", out, "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("correlation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("#manifest "));
    assert_eq!(lines[1], "bin_lo,bin_hi,g2,stderr");
    assert_eq!(lines.len(), 2 + 6);
    // hard core of 0.3: nothing in the first bin [0, 0.25)
    assert!(lines[2].starts_with("0,0.25,0,"), "{}", lines[2]);
}
