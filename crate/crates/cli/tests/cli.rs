use std::path::Path;
use std::process::{Command, Output};

fn weakkam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakkam"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

/// A 16-node sin2 config; `extra` lands inside the critical section and
/// `top` after the last top-level key.
fn write_config(dir: &Path, name: &str, extra: &str, top: &str) -> String {
    let text = format!(
        r#"{{
            "lagrangian": {{"kind": "mane", "potential": "sin2"}},
            "grid": {{"n": 16, "d": 2}},
            "controls": {{"n_u": 7}},
            "time": {{"dt": 0.02, "t_max": 8.0}},
            "critical": {{"k_modes": 2, "iters": 60, "restarts": 2{extra}}},
            "lp": {{"n_lp": 8, "k_modes": 2}},
            "output_dir": "out"{top}
        }}"#
    );
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn critical_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", "", "");
    let out = tmp.path().join("results");
    let out_s = out.to_str().unwrap();
    let o = weakkam(&["critical", "--config", &cfg, "--out", out_s, "--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("c_ergodic"));
    assert!(out.join("certificate.json").exists());

    let o = weakkam(&["report", "--out", out_s]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("certificate.json"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out_s = out.to_str().unwrap();

    assert_eq!(code(&weakkam(&["critical"])), 4, "missing --config");
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&weakkam(&["critical", "--config", bad.to_str().unwrap()])), 4);
    assert_eq!(code(&weakkam(&["report", "--out", out_s])), 4, "nothing to report");

    let stuck = write_config(tmp.path(), "stuck.json", r#", "max_iters": 3"#, "");
    assert_eq!(code(&weakkam(&["critical", "--config", &stuck, "--out", out_s])), 3);

    let cfg = write_config(tmp.path(), "shift.json", "", r#", "measures": {"inject_shift": [5, 0]}"#);
    assert_eq!(code(&weakkam(&["mather", "--config", &cfg, "--out", out_s])), 2);
}
