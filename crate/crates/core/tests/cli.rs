use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ruinbound"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str], cfg: &Path) -> Output {
    bin().args(args).arg("--config").arg(cfg).output().unwrap()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ruinbound-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_merton_is_unconstrained() {
    let v = json(&run(&["solve"], &config("merton.conf")));
    assert_eq!(v["P"], 0.0);
    assert_eq!(v["case"], "i");
    assert_eq!(v["psi"], 0.0);
    assert_eq!(v["y_bar"], "inf");
    assert!((v["c"].as_f64().unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn solve_calibrated_power_meets_target() {
    let v = json(&run(&["solve"], &config("power2.conf")));
    assert_eq!(v["case"], "ii");
    assert_eq!(v["binding"], true);
    assert!((v["psi"].as_f64().unwrap() - 0.05).abs() <= 1e-6);
    assert!(v["iterations"].as_u64().unwrap() <= 200);
}

#[test]
fn frontier_ruin_column_is_nondecreasing() {
    let out = run(&["frontier", "--format", "csv"], &config("power2.conf"));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("P,case,psi,V"));
    let psi: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(psi.len(), 50);
    assert!(psi.windows(2).all(|w| w[1] >= w[0] - 1e-10));
}

#[test]
fn policy_table_has_default_grid() {
    let out = run(
        &["policy", "--format", "csv"],
        &config("shifted_case_iii.conf"),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("x,V,c,pi,psi\n"));
    assert_eq!(text.lines().count(), 102);
    assert!(text.ends_with('\n') && !text.contains('\r'));
    let first: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert!((first[0] - 0.1).abs() < 1e-15);
}

#[test]
fn check_passes_on_all_five_regimes() {
    for name in [
        "merton.conf",
        "power2.conf",
        "shifted_case_i.conf",
        "shifted_case_iii.conf",
        "shifted_case_iv.conf",
        "shifted_case_v.conf",
    ] {
        let out = run(&["check"], &config(name));
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn output_file_and_seed_flags() {
    let out_path = std::env::temp_dir().join(format!("ruinbound-out-{}.json", std::process::id()));
    let cfg = scratch(
        "sim.conf",
        "r = 0.02\nmu = 0.06\nsigma = 0.2\nbeta = 0.04\nutility.kind = power\nutility.p = 2\nwealth = 10\n\
         phi = 0.05\nn_paths = 200\ndt = 0.05\n",
    );
    let a = bin()
        .args(["simulate", "--seed", "4", "--out"])
        .arg(&out_path)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(a.status.success());
    let first = std::fs::read(&out_path).unwrap();
    let b = bin()
        .args(["simulate", "--seed", "4", "--out"])
        .arg(&out_path)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(b.status.success());
    assert_eq!(first, std::fs::read(&out_path).unwrap());
    let c = run(&["simulate", "--seed", "5"], &cfg);
    assert_ne!(first, c.stdout);
    let _ = std::fs::remove_file(out_path);
}

#[test]
fn exit_codes() {
    let bad = scratch(
        "bad.conf",
        "r = 0.02\nmu = 0.06\nsigma = 0.2\nbeta = 0.04\nwealth = 1\ncolour = red\n",
    );
    assert_eq!(run(&["solve"], &bad).status.code(), Some(1));
    let missing = scratch("missing.conf", "r = 0.02\n");
    assert_eq!(run(&["solve"], &missing).status.code(), Some(1));
    let infinite = scratch(
        "infinite.conf",
        "r = 0.02\nmu = 0.06\nsigma = 0.2\nbeta = 0.04\nutility.kind = power\nutility.p = 0.3\nwealth = 1\n",
    );
    assert_eq!(run(&["solve"], &infinite).status.code(), Some(2));
    let no_optimum = scratch(
        "slack.conf",
        "r = 0.02\nmu = 0.06\nsigma = 0.2\nbeta = 0.04\nutility.kind = power\nutility.p = 2\nwealth = 1\npenalty = 0\n",
    );
    assert_eq!(run(&["solve"], &no_optimum).status.code(), Some(2));
}

#[test]
fn custom_grid_file_is_read_relative_to_config() {
    let mut grid = String::from("c,marginal\n");
    for k in 0..=80 {
        let c = 10f64.powf(-3.0 + 6.0 * k as f64 / 80.0);
        grid.push_str(&format!("{c},{}\n", c.powi(-2)));
    }
    scratch("grid.csv", &grid);
    let cfg = scratch(
        "custom.conf",
        "r = 0.02\nmu = 0.06\nsigma = 0.2\nbeta = 0.04\nutility.kind = custom\nutility.grid_file = grid.csv\n\
         utility.K = 1000\nwealth = 10\npenalty = -50\n",
    );
    let v = json(&run(&["solve"], &cfg));
    assert_eq!(v["case"], "ii");
}
