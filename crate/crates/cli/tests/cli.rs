use std::path::Path;
use std::process::{Command, Output};

fn gqk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gqk"))
        .args(args)
        .current_dir(dir)
        .env_remove("GQK_THREADS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let cfg = write(d, "empty.toml", "checks = []\n");
    let out = gqk(&["verify", "--config", &cfg, "--out", "r.json"], d);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(d, "r.json")["overall_pass"], true);

    let cfg = write(d, "strict.toml", "[[checks]]\nid = \"CANON\"\ntolerance = 1e-20\n");
    let out = gqk(&["verify", "--config", &cfg, "--out", "r.json"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL CANON"));
    assert_eq!(json(d, "r.json")["overall_pass"], false);

    let cfg = write(d, "bad.toml", "[grid]\nn = 6\nbox_length = 16.0\n");
    let out = gqk(&["verify", "--config", &cfg, "--out", "r.json"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.n"));

    let cfg = write(d, "unknown.toml", "[[checks]]\nid = \"NOPE\"\n");
    let out = gqk(&["verify", "--config", &cfg, "--out", "r.json"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_and_thread_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "s.toml", "seed = 1\n[[checks]]\nid = \"SIGMA-MULT\"\n[[checks]]\nid = \"CR9.ii\"\n");
    let one = Command::new(env!("CARGO_BIN_EXE_gqk"))
        .args(["verify", "--config", &cfg, "--out", "a.json", "--seed", "5"])
        .current_dir(d)
        .env("GQK_THREADS", "1")
        .status()
        .unwrap();
    assert!(one.success());
    let two = gqk(&["verify", "--config", &cfg, "--out", "b.json", "--seed", "5", "--threads", "2"], d);
    assert!(two.status.success());
    let (mut a, mut b) = (json(d, "a.json"), json(d, "b.json"));
    assert_eq!(a["seed"], 5);
    for v in [&mut a, &mut b] {
        v["wall_time_s"] = 0.into();
        for c in v["checks"].as_array_mut().unwrap() {
            c["wall_time_s"] = 0.into();
        }
    }
    assert_eq!(a, b);
}

#[test]
fn evolve_writes_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(
        d,
        "e.toml",
        "t_total = 1.0\nsteps = 10\nhamiltonian = { kind = \"free\" }\npacket = { p0 = [0.5, 0.0, 0.0], width = 1.0 }\n",
    );
    let out = gqk(
        &["evolve", "--config", &cfg, "--out-series", "s.csv", "--snapshot-every", "5", "--snapshot-dir", "snaps"],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,reQ1,reQ2,reQ3,reP1,reP2,reP3,norm,energy");
    assert_eq!(lines.len(), 12);
    let last: Vec<f64> = lines[11].split(',').map(|c| c.parse().unwrap()).collect();
    assert!((last[1] - 0.5).abs() < 1e-6);
    assert_eq!(std::fs::read_dir(d.join("snaps")).unwrap().count(), 3);

    let out = gqk(&["evolve", "--config", &cfg, "--out-series", "s.csv", "--snapshot-every", "5"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn multiplier_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "m.toml", "seed = 2\n[sample]\ntranslations = 3\nboost_translation = 4\n");
    let out = gqk(&["multiplier", "--config", &cfg, "--out", "m.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = json(d, "m.json");
    let rows = t["rows"].as_array().unwrap();
    assert!(rows.iter().filter(|r| r["kind"] == "boost_translation").count() == 4);
    for r in rows.iter().filter(|r| r["kind"] == "boost_translation") {
        assert!(r["phase_residual_minus"].as_f64().unwrap() < 1e-8);
    }
}
