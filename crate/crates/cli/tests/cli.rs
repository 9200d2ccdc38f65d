use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use momlab_cli::RunConfig;
use tempfile::TempDir;

const QUAD: &str = r#"
[landscape]
kind = "quadratic"
a = [[1.0, 0.0], [0.0, 4.0]]
b = [0.0, 0.0]

[init]
x0 = [1.0, 1.0]
"#;

fn momlab(dir: &Path, sub: &str, toml: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{sub}.toml"));
    std::fs::write(&cfg, toml).unwrap();
    let out = dir.join(format!("out-{sub}-{}", extra.join("")));
    let output = Command::new(env!("CARGO_BIN_EXE_momlab"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (output, out)
}

fn simulate_config(n_seeds: usize, eta: f64, steps: usize) -> String {
    format!(
        r#"experiment = "simulate"
seed = 3
n_seeds = {n_seeds}
{QUAD}
[schedule]
eta = {eta}
beta = 0.9
steps = {steps}

[simulate]
methods = ["sgd", "sgdm", "sde"]
sde_substeps = 5
"#
    )
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let (o, out) = momlab(dir.path(), "simulate", &simulate_config(1, 0.05, 37), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for m in ["sgd", "sgdm", "sde"] {
        let rows = read_csv(&out.join(format!("trajectory_{m}.csv")));
        assert_eq!(rows.len(), 38, "{m}");
        assert_eq!(rows[0], vec!["0", "1", "1"]);
        assert_eq!(rows[37][0], "37");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(!out.join("ensemble.csv").exists());
}

#[test]
fn repeated_runs_hash_identically() {
    use sha2::{Digest, Sha256};
    let dir = TempDir::new().unwrap();
    let toml = simulate_config(40, 0.05, 30);
    let digest = |out: &Path| {
        let mut names: Vec<_> = std::fs::read_dir(out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        names.sort();
        let mut h = Sha256::new();
        for p in names {
            h.update(std::fs::read(p).unwrap());
        }
        hex::encode(h.finalize())
    };
    let (a, out_a) = momlab(dir.path(), "simulate", &toml, &["--threads", "1"]);
    let (b, out_b) = momlab(dir.path(), "simulate", &toml, &["--threads", "3"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(digest(&out_a), digest(&out_b));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let toml = simulate_config(1, 0.05, 10);
    let (_, a) = momlab(dir.path(), "simulate", &toml, &[]);
    let (_, b) = momlab(dir.path(), "simulate", &toml, &["--seed", "99"]);
    let read = |p: &Path| std::fs::read(p.join("trajectory_sgd.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        simulate_config(1, 0.05, 10).replace("n_seeds = 1", "n_seeds = 0"),
        simulate_config(1, 0.05, 10).replace("beta = 0.9", "beta = 0.9\nbogus = 1"),
        simulate_config(1, 0.05, 10).replace("beta = 0.9", "beta = 1.5"),
        simulate_config(1, 0.05, 10).replace("x0 = [1.0, 1.0]", "x0 = [1.0]"),
    ];
    for toml in cases {
        let (o, _) = momlab(dir.path(), "simulate", &toml, &[]);
        assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    }
    // config for one experiment given to another subcommand
    let (o, _) = momlab(dir.path(), "warmup", &simulate_config(1, 0.05, 10), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("subcommand"));
}

#[test]
fn divergence_exits_with_three() {
    let dir = TempDir::new().unwrap();
    for n in [1, 8] {
        let (o, _) = momlab(dir.path(), "simulate", &simulate_config(n, 1.5, 400), &[]);
        assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn single_learning_rate_omits_slope_with_warning() {
    let dir = TempDir::new().unwrap();
    let toml = format!(
        r#"experiment = "weak-approx"
n_seeds = 50
{QUAD}
[weak_approx]
etas = [0.05]
horizon = 0.5
lambda = 0.1
"#
    );
    let (o, out) = momlab(dir.path(), "weak-approx", &toml, &[]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("slope omitted"));
    assert_eq!(read_csv(&out.join("weak_approx.csv")).len(), 1);
    assert!(read_csv(&out.join("weak_approx_slopes.csv")).is_empty());
    assert!(out.join("weak_approx.svg").exists());
}

#[test]
fn noiseless_svag_sweep_is_gradient_descent() {
    let dir = TempDir::new().unwrap();
    let (eta, steps) = (0.05, 20);
    let toml = format!(
        r#"experiment = "svag-sweep"
n_seeds = 4
{QUAD}
[oracle]
sigma = 0.0

[record]
test_functions = [{{ kind = "coordinate", index = 0 }}, {{ kind = "coordinate", index = 1 }}]

[svag]
ells = [1.0, 2.0, 4.0]
eta = {eta}
beta = 0.9
steps = {steps}
"#
    );
    let (o, out) = momlab(dir.path(), "svag-sweep", &toml, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("svag_sweep.csv"));
    let mut checked = 0;
    for r in rows.iter().filter(|r| r[1] == "sgd") {
        let ell: f64 = r[0].parse().unwrap();
        let curvature = if r[3] == "x0" { 1.0 } else { 4.0 };
        let gd = (1.0 - curvature * eta / ell).powi((steps as f64 * ell) as i32);
        let mean: f64 = r[4].parse().unwrap();
        assert!((mean - gd).abs() < 1e-12, "ell {ell} {}: {mean} vs {gd}", r[3]);
        assert_eq!(r[5], r[6]);
        checked += 1;
    }
    assert_eq!(checked, 6);
}

#[test]
fn convert_emits_a_loadable_schedule() {
    let dir = TempDir::new().unwrap();
    let toml = r#"experiment = "convert"

[standard_schedule]
gamma = [0.1]
mu = [0.9]
tau = [0.0]
steps = 5
"#;
    let (o, out) = momlab(dir.path(), "convert", toml, &[]);
    assert!(o.status.success());
    let frag = std::fs::read_to_string(out.join("converted_schedule.toml")).unwrap();
    let parsed: toml::Value = toml::from_str(&frag).unwrap();
    assert_eq!(parsed["schedule"]["eta_k"].as_array().unwrap().len(), 5);
    // τ = 0: α_{k+1} = α_k/(α_k + 0.9) from α₀ = 1
    let rows = read_csv(&out.join("convert.csv"));
    let alpha1: f64 = rows[1][6].parse().unwrap();
    assert!((alpha1 - 1.0 / 1.9).abs() < 1e-15);
}

#[test]
fn config_survives_canonical_round_trip() {
    let cfg = RunConfig::from_toml(&simulate_config(10, 0.05, 10)).unwrap();
    let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.hash(), again.hash());
}
