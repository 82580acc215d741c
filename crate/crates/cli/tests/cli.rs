use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chns_core::io::{encode_scalar, write_field};
use chns_core::{make_grid, Field};

fn chns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chns"))
        .args(args)
        .env_remove("CHNS_THREADS")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const CONSTANT: &str = r#"{
    "grid": {"nx": 12, "ny": 12, "lx": 1.0, "ly": 1.0},
    "time": {"t_final": 0.02, "dt": 0.001},
    "initial": {"phi": {"preset": "constant", "value": 0.3}}
}"#;

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn no_subcommand_prints_usage_and_exits_2() {
    let o = chns(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = chns(&["simulate", "--config", "/nonexistent/c.json", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn simulate_constant_state_keeps_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONSTANT);
    let out = dir.path().join("run");
    let o = chns(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with("step,t,mass,energy,max_div_u,min_phi,max_phi\n"));
    let m = column(&series, "mass");
    assert_eq!(m.len(), 21);
    assert!(m.iter().all(|v| (v - 0.3).abs() < 1e-14), "{m:?}");
    assert!(out.join("snapshots/phi_00020.chnsf").exists());
    assert!(out.join("resolved-config.json").exists());
}

#[test]
fn inverted_box_names_box() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONSTANT.replace(r#""initial""#, r#""box": {"lower": 1.0, "upper": -1.0}, "initial""#);
    let cfg = write(dir.path(), "c.json", &text);
    let o = chns(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`box`"), "{}", stderr(&o));
}

#[test]
fn unknown_key_suggests_the_right_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &CONSTANT.replace(r#""dt""#, r#""dtt""#));
    let o = chns(&["info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("`time.dtt`") && e.contains("did you mean `dt`?"), "{e}");
}

#[test]
fn syntax_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", "{\n  \"grid\": {\"nx\": 4,,\n}");
    let o = chns(&["info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn cfl_violation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONSTANT.replace(
        r#""constant", "value": 0.3}"#,
        r#""constant", "value": 0.3}, "u": {"preset": "swirl", "amplitude": 500.0}"#,
    );
    let cfg = write(dir.path(), "c.json", &text);
    let o = chns(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("CFL"), "{}", stderr(&o));
    let o = chns(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(
        v.lines().nth(1).unwrap().starts_with("run,") && v.contains(",false"),
        "{v}"
    );
}

#[test]
fn field_files_load_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let g = make_grid(12, 12, 1.0, 1.0).unwrap();
    let phi = Field::from_fn(&g, |x, y| 0.1 * (x - y));
    write_field(&dir.path().join("phi0.chnsf"), &phi).unwrap();
    let text = CONSTANT.replace(
        r#"{"preset": "constant", "value": 0.3}"#,
        r#"{"preset": "file", "path": "phi0.chnsf"}"#,
    );
    let cfg = write(dir.path(), "c.json", &text);
    let out = dir.path().join("run");
    let o = chns(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(out.join("snapshots/phi_00000.chnsf")).unwrap(),
        encode_scalar(&phi)
    );

    // wrong magic, truncation and a grid mismatch are config errors naming the field
    let mut bad = encode_scalar(&phi);
    bad[0] = b'X';
    std::fs::write(dir.path().join("phi0.chnsf"), &bad).unwrap();
    let o = chns(&["info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("initial.phi.path") && stderr(&o).contains("magic"),
        "{}",
        stderr(&o)
    );

    let good = encode_scalar(&phi);
    std::fs::write(dir.path().join("phi0.chnsf"), &good[..good.len() - 1]).unwrap();
    let o = chns(&["info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("offset"), "{}", stderr(&o));

    let other = make_grid(10, 12, 1.0, 1.0).unwrap();
    write_field(&dir.path().join("phi0.chnsf"), &Field::zeros(&other)).unwrap();
    let o = chns(&["info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_requires_a_box() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("tracking-small.json")).unwrap();
    let text = text.replace(r#""box": {"lower": -5.0, "upper": 5.0},"#, "");
    let cfg = write(dir.path(), "c.json", &text);
    let o = chns(&[
        "optimize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`box`"), "{}", stderr(&o));
}

#[test]
fn gradcheck_on_tracking_small_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("tracking-small.json");
    let o = chns(&[
        "gradcheck",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let d = std::fs::read_to_string(dir.path().join("duality.csv")).unwrap();
    assert!(d.starts_with("h_id,lhs,rhs,gap,rel_gap\n"));
    let gaps = column(&d, "rel_gap");
    assert_eq!(gaps.len(), 5);
    assert!(gaps.iter().all(|g| *g <= 1e-2), "{gaps:?}");
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("mass-balance.json");
    let mut outs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_chns"))
            .args([
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .env("CHNS_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outs.push(out);
    }
    for name in ["series.csv", "snapshots/phi_00100.chnsf", "snapshots/u_00100.chnsv"] {
        assert_eq!(
            std::fs::read(outs[0].join(name)).unwrap(),
            std::fs::read(outs[1].join(name)).unwrap(),
            "{name}"
        );
    }
    let o = Command::new(env!("CARGO_BIN_EXE_chns"))
        .args(["info", "--config", cfg.to_str().unwrap()])
        .env("CHNS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
