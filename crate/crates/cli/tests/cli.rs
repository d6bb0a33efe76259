use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sysrisk::fluctuations::stationary_covariance;
use sysrisk::ModelParams;

const BASELINE: &str = "h0=0.5\nsigma0=0.1\ntheta0=0.1\nsigma=1.0\ntheta=10\nN=100\nT=1000\ndt=0.001\nseed=1\n";
const UNIT_LDP: [&str; 12] = [
    "--set", "sigma=1", "--set", "theta0=1", "--set", "theta=1", "--set", "N=100", "--set", "T=10", "--set",
    "dt=0.01",
];

fn sysrisk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sysrisk"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn one(dir: &Path, suffix: &str) -> String {
    let hits: Vec<PathBuf> = files(dir)
        .into_iter()
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    assert_eq!(hits.len(), 1, "{suffix}: {hits:?}");
    fs::read_to_string(&hits[0]).unwrap()
}

fn baseline_config(dir: &Path) -> String {
    let path = dir.join("baseline.cfg");
    fs::write(&path, BASELINE).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn fluctuation_sweep_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = baseline_config(tmp.path());
    let out = tmp.path().join("out");
    let r = sysrisk(&out, &["fluctuations", "--config", &cfg, "--sweep", "h0:0.1:1.0:100"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = one(&out, "_summary.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 101);
    assert!(lines[0].starts_with("h0,var_z0,var_zbar,cov"));
    assert!(!csv.contains('\r'));
    for (i, line) in lines[1..].iter().enumerate() {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let h0 = 0.1 + 0.9 * i as f64 / 99.0;
        assert!((cells[0] - h0).abs() < 1e-14);
        let p = ModelParams::new(cells[0], 0.0, 0.1, 1.0, 0.1, 10.0, 100).unwrap();
        let r = stationary_covariance(&p, -1.0).unwrap();
        assert_eq!(cells[1], r.var_z0);
        assert_eq!(cells[2], r.var_zbar);
        assert_eq!(cells[3], r.cov);
    }
}

#[test]
fn names_embed_command_hash_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = baseline_config(tmp.path());
    let out = tmp.path().join("out");
    let r = sysrisk(&out, &["simulate", "--config", &cfg, "--seed", "17", "--set", "T=10"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let names: Vec<String> = files(&out)
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 3, "{names:?}");
    let hash = names[0].split('_').nth(1).unwrap().to_string();
    assert_eq!(hash.len(), 12);
    for n in &names {
        assert!(n.starts_with(&format!("simulate_{hash}_seed17_")), "{n}");
    }
    let manifest = one(&out, "_manifest.txt");
    for key in ["command=simulate", "h0=0.5", "sigma0=0.1", "seed=17", "T=10.0", "status=ok"] {
        assert!(manifest.lines().any(|l| l == key), "{key} missing from\n{manifest}");
    }
    assert!(manifest.contains(&format!("config_hash={hash}")));
    // a different seed changes the stamp and the hash
    let r = sysrisk(&out, &["simulate", "--config", &cfg, "--seed", "18", "--set", "T=10"]);
    assert!(r.status.success());
    assert_eq!(files(&out).len(), 6);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = baseline_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, jobs) in [(&a, "1"), (&b, "4")] {
        let r = sysrisk(dir, &["simulate", "--config", &cfg, "--set", "T=20", "--sweep", "theta:5:15:6", "--jobs", jobs]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let r = sysrisk(dir, &["control-demo", "--config", &cfg, "--set", "T=20", "--set", "theta_c=2"]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        if x.extension().is_some_and(|e| e == "csv") {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{x:?}");
        }
    }
}

#[test]
fn ldp_sweep_over_h0() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["ldp-sweep", "--h0", "0,0.5,1,2", "--mesh", "500", "--set", "h0=0"];
    args.extend(UNIT_LDP);
    let r = sysrisk(tmp.path(), &args);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = one(tmp.path(), "_summary.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "h0,rate_infimum,converged,iterations,log_probability,ode_residual");
    let rates: Vec<f64> = lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            assert_eq!(c[2], "true");
            let rate: f64 = c[1].parse().unwrap();
            let logp: f64 = c[4].parse().unwrap();
            assert!((logp + 100.0 * rate).abs() < 1e-9 * rate.max(1.0) * 100.0);
            rate
        })
        .collect();
    assert_eq!(rates.len(), 4);
    assert!(rates.windows(2).all(|w| w[1] >= w[0]), "{rates:?}");
    // h0 = 0 rate equals the explicit infimum 8 (1+e)/(10 (1+e) - (1-e)), e = exp(-20),
    // up to the second-order quadrature error of a 500-point mesh
    let e = (-20.0f64).exp();
    assert!((rates[0] / (8.0 * (1.0 + e) / (10.0 * (1.0 + e) - (1.0 - e))) - 1.0).abs() < 1e-4);
}

#[test]
fn ldp_path_writes_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["ldp-path", "--mesh", "400", "--set", "h0=1.5", "--set", "sigma0=0.5"];
    args.extend(UNIT_LDP);
    let r = sysrisk(tmp.path(), &args);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let path = one(tmp.path(), "_path.csv");
    assert!(path.starts_with("t,x0,xbar"));
    assert_eq!(path.lines().count(), 401);
    let last: Vec<f64> = path.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(last[0], 10.0);
    assert!((last[1] - 1.0).abs() < 1e-12 && (last[2] - 1.0).abs() < 1e-12);
}

#[test]
fn non_convergence_exits_3_with_last_iterate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["ldp-path", "--set", "h0=30", "--mesh", "50", "--max-iterations", "1"];
    args.extend(UNIT_LDP);
    let r = sysrisk(tmp.path(), &args);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("continuation failed"));
    let last = one(tmp.path(), "_last_iterate.csv");
    assert_eq!(last.lines().count(), 51);
    assert!(one(tmp.path(), "_summary.csv").contains(",false,"));
    assert!(one(tmp.path(), "_manifest.txt").contains("status=nonconverged"));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = baseline_config(tmp.path());
    let cases: Vec<Vec<&str>> = vec![
        vec!["frobnicate"],
        vec!["fluctuations"],
        vec!["fluctuations", "--config", "/nonexistent/file.cfg"],
        vec!["fluctuations", "--config", &cfg, "--set", "theta=-1"],
        vec!["fluctuations", "--config", &cfg, "--set", "bogus=1"],
        vec!["fluctuations", "--config", &cfg, "--sweep", "h0:0:1"],
        vec!["riccati", "--config", &cfg],
        vec!["ldp-sweep", "--config", &cfg],
    ];
    for args in cases {
        let r = sysrisk(&tmp.path().join("out"), &args);
        assert_eq!(r.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(!r.stderr.is_empty());
    }
    let r = sysrisk(tmp.path(), &["frobnicate"]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("Usage"));
}

#[test]
fn riccati_and_control_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let base = [
        "--set", "h0=0.7", "--set", "sigma0=0.5", "--set", "sigma=5", "--set", "theta0=1", "--set", "theta=1",
        "--set", "N=100", "--set", "dt=0.01", "--set", "theta_c=5",
    ];
    let mut args = vec!["riccati", "--set", "T=100"];
    args.extend(base);
    let r = sysrisk(tmp.path(), &args);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = one(tmp.path(), "_summary.csv");
    let cells: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(cells[4], "true");
    let d: f64 = cells[7].parse().unwrap();
    let exact: f64 = cells[9].parse().unwrap();
    assert!((d - exact).abs() < 1e-12);
    assert!(one(tmp.path(), "_trajectory.csv").starts_with("t,a,b,d,e\n"));

    let out = tmp.path().join("control");
    let mut args = vec!["control-demo", "--set", "T=1000", "--sweep", "seed:1:4:4"];
    args.extend(base);
    let r = sysrisk(&out, &args);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = one(&out, "_summary.csv");
    assert!(summary.starts_with("seed,b_inf,"));
    for line in summary.lines().skip(1) {
        let c: Vec<&str> = line.split(',').collect();
        assert_eq!(c[6], "0", "{line}");
    }
}
