use gqk_core::harness::{
    evolve_command, lookup, multiplier_command, run_config, EvolveConfig, MultiplierConfig,
    SuiteConfig, REGISTRY, SERIES_HEADER,
};
use gqk_core::snapshot::read_state;
use gqk_core::GqkError;

fn suite(text: &str) -> SuiteConfig {
    SuiteConfig::parse(text).unwrap()
}

#[test]
fn empty_check_list_is_a_passing_report() {
    let report = run_config(&suite("checks = []"), 1).unwrap();
    assert!(report.overall_pass);
    assert!(report.checks.is_empty());
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 0);
    assert_eq!(v["grid"]["n"], 32);
}

#[test]
fn bad_grid_is_rejected_at_parse_time() {
    let err = SuiteConfig::parse("[grid]\nn = 6\nbox_length = 16.0\n").unwrap_err();
    assert!(matches!(err, GqkError::Config(_)));
    assert!(err.to_string().contains("grid.n"), "{err}");
}

#[test]
fn unknown_ids_fail_loudly() {
    let cfg = suite("[[checks]]\nid = \"CANON\"\n[[checks]]\nid = \"NOPE\"\n");
    match run_config(&cfg, 1) {
        Err(GqkError::UnknownCheck(id)) => assert_eq!(id, "NOPE"),
        other => panic!("expected UnknownCheck, got {other:?}"),
    }
}

#[test]
fn registry_ids_are_unique_with_anchors() {
    let mut ids: Vec<&str> = REGISTRY.iter().map(|r| r.id).collect();
    assert!(ids.len() >= 18);
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), REGISTRY.len());
    assert!(REGISTRY.iter().all(|r| !r.anchor.is_empty()));
    assert_eq!(lookup("TRANS38/39").unwrap().id, "TRANS38");
}

#[test]
fn tolerance_overrides_are_echoed() {
    let cfg = suite("[[checks]]\nid = \"SPIN\"\ntolerance = 1e-3\n[[checks]]\nid = \"CANON\"\n");
    let report = run_config(&cfg, 1).unwrap();
    assert_eq!(report.checks[0].tolerance, 1e-3);
    assert!(report.checks[0].tolerance_overridden);
    assert_eq!(report.checks[1].tolerance, 1e-8);
    assert!(!report.checks[1].tolerance_overridden);
}

#[test]
fn an_impossible_tolerance_fails_the_report() {
    let cfg = suite("[[checks]]\nid = \"CANON\"\ntolerance = 1e-20\n");
    let report = run_config(&cfg, 1).unwrap();
    assert!(!report.overall_pass);
    assert_eq!(report.failed().count(), 1);
}

#[test]
fn per_check_errors_do_not_stop_the_suite() {
    // the dynamical law needs a P²/2μ kinetic term
    let cfg = suite(
        r#"
[[checks]]
id = "VEL33"
hamiltonian = { kind = "minimal_coupling", a = [[], [], []], phi = [] }
[[checks]]
id = "LAW27"
hamiltonian = { kind = "kinetic_function", f = { kind = "cosine_band", mu = 1.0 } }
[[checks]]
id = "SPIN"
"#,
    );
    let report = run_config(&cfg, 1).unwrap();
    assert_eq!(report.checks.len(), 3);
    assert!(report.checks[0].pass, "{:?}", report.checks[0].error);
    assert!(report.checks[1].error.is_some());
    assert!(!report.checks[1].pass);
    assert!(report.checks[2].pass);
}

#[test]
fn thread_count_does_not_change_results() {
    let text = "seed = 9\n[[checks]]\nid = \"CR9.ii\"\n[[checks]]\nid = \"SIGMA-MULT\"\n[[checks]]\nid = \"IMPR1\"\n[[checks]]\nid = \"GRADF41\"\n";
    let a = run_config(&suite(text), 1).unwrap().without_timing();
    let b = run_config(&suite(text), 3).unwrap().without_timing();
    assert_eq!(a.to_json(), b.to_json());
}

fn series(text: &str) -> Vec<Vec<f64>> {
    let cfg = EvolveConfig::parse(text).unwrap();
    let mut out = Vec::new();
    evolve_command(&cfg, &mut out, None).unwrap();
    let s = String::from_utf8(out).unwrap();
    let mut lines = s.lines();
    assert_eq!(lines.next().unwrap(), SERIES_HEADER);
    lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn free_packet_series_is_linear() {
    let rows = series(
        r#"
t_total = 4.0
steps = 100
grid = { n = 64, box_length = 40.0 }
hamiltonian = { kind = "free" }
packet = { x0 = [-1.0, 0.0, 0.0], p0 = [0.5, 0.0, 0.0], width = 2.0 }
propagator = { method = "split", dt = 0.04 }
"#,
    );
    assert_eq!(rows.len(), 101);
    for r in &rows {
        let (t, q1) = (r[0], r[1]);
        assert!((q1 - (-1.0 + 0.5 * t)).abs() < 1e-6, "t = {t}: {q1}");
        assert!((r[7] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn zero_duration_gives_a_single_row() {
    let rows = series(
        r#"
t_total = 0.0
hamiltonian = { kind = "free" }
packet = { width = 1.0 }
"#,
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 0.0);
}

#[test]
fn harmonic_packet_returns_after_one_period() {
    let rows = series(
        r#"
t_total = 6.283185307179586
steps = 20
hamiltonian = { kind = "scalar", phi = [
  { profile = "poly", powers = [2, 0, 0], coef = 0.5 },
  { profile = "poly", powers = [0, 2, 0], coef = 0.5 },
  { profile = "poly", powers = [0, 0, 2], coef = 0.5 },
] }
packet = { x0 = [1.0, 0.0, 0.0], width = 1.0 }
propagator = { method = "split", dt = 0.01 }
"#,
    );
    let (first, last) = (&rows[0], rows.last().unwrap());
    for a in 1..=3 {
        assert!((first[a] - last[a]).abs() < 1e-4, "axis {a}: {} vs {}", first[a], last[a]);
    }
    // half a period in, the packet is on the other side
    assert!((rows[10][1] + 1.0).abs() < 1e-3);
}

#[test]
fn snapshots_are_written_every_k_steps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EvolveConfig::parse(
        "t_total = 1.0\nsteps = 4\nhamiltonian = { kind = \"free\" }\npacket = { width = 1.0 }\n",
    )
    .unwrap();
    let mut out = Vec::new();
    let rows = evolve_command(&cfg, &mut out, Some((2, dir.path()))).unwrap();
    assert_eq!(rows, 5);
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["state_000000.gqk", "state_000002.gqk", "state_000004.gqk"]);
    let s = read_state(&dir.path().join("state_000004.gqk")).unwrap();
    assert!((s.norm() - 1.0).abs() < 1e-10);
}

#[test]
fn multiplier_table_examples() {
    let cfg = MultiplierConfig::parse(
        "seed = 4\n[sample]\ntranslations = 10\nboost_translation = 50\ngeneral = 5\nidentity = 2\n",
    )
    .unwrap();
    let table = multiplier_command(&cfg).unwrap();
    assert_eq!(table.rows.len(), 67);
    for row in &table.rows {
        let one = ((row.re - 1.0).powi(2) + row.im.powi(2)).sqrt();
        match row.kind.as_str() {
            "translations" => assert!(one < 1e-10),
            "identity" => assert!(one < 1e-12),
            "boost_translation" => {
                assert!(row.phase_residual_minus.unwrap() < 1e-8);
                // the other sign is visible whenever μ u·a is not a multiple of π
                let x = row.mu_u_a.unwrap();
                if (x / std::f64::consts::PI - (x / std::f64::consts::PI).round()).abs() > 1e-3 {
                    assert!(row.phase_residual_plus.unwrap() > 1e-3);
                }
            }
            _ => assert!(row.modulus_defect < 1e-10),
        }
    }
}
