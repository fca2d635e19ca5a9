//! End-to-end tests of the binary: pipelines, exit codes, and formats.

use std::io::Write;
use std::process::{Command, Output, Stdio};

fn netelast(args: &[&str], stdin: Option<&str>, envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netelast"));
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().expect("binary spawns");
    if let Some(text) = stdin {
        child
            .stdin
            .as_mut()
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
    }
    drop(child.stdin.take());
    child.wait_with_output().unwrap()
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn hexagonal_file() -> String {
    stdout_of(&netelast(
        &["lattice", "hexagonal", "--l", "1", "--w0", "1", "--w1", "1"],
        None,
        &[],
    ))
}

#[test]
fn lattice_pipes_into_deform_and_contracts_first() {
    let net = hexagonal_file();
    let out = netelast(
        &[
            "deform", "--mode", "slow", "--lambda", "1.6", "--theta", "0", "--delta", "0.8",
            "--K", "16",
        ],
        Some(&net),
        &[],
    );
    let trace: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let events = trace["trace"]["events"].as_array().unwrap();
    assert!(!events.is_empty());
    let first = &events[0];
    assert!(first["record"]["Contraction"].is_object(), "{first}");
    // The short edge reaches delta at lambda = l / delta = 1.25.
    let lambda = first["lambda"].as_f64().unwrap();
    assert!((lambda - 1.25).abs() <= 1e-8, "lambda = {lambda}");
}

#[test]
fn quiet_curve_matches_the_closed_form() {
    let net = hexagonal_file();
    // Thresholds far away: a single-segment elastic run.
    let trace = stdout_of(&netelast(
        &[
            "deform", "--mode", "slow", "--lambda", "1.5", "--delta", "0.1", "--K", "99",
        ],
        Some(&net),
        &[],
    ));
    let csv = stdout_of(&netelast(&["curve", "--samples", "40"], Some(&trace), &[]));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "strain,sigma_eng,sigma_true,energy");
    let coefficient = 2.0 * 3.0_f64.sqrt() / 3.0;
    let mut rows = 0;
    for line in lines {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        let (strain, sigma_eng, sigma_true, energy) =
            (fields[0], fields[1], fields[2], fields[3]);
        let lambda = 1.0 + strain;
        let expected = coefficient * (lambda - lambda.powi(-3));
        assert!(
            (sigma_eng - expected).abs() <= 1e-9,
            "sigma {sigma_eng} vs {expected}"
        );
        assert!((sigma_true - lambda * sigma_eng).abs() <= 1e-12);
        let expected_energy = 1.5 * (lambda * lambda + lambda.powi(-2));
        assert!((energy - expected_energy).abs() <= 1e-9);
        rows += 1;
    }
    assert!(rows >= 40);
}

#[test]
fn curve_bytes_do_not_depend_on_the_thread_count() {
    let net = hexagonal_file();
    let trace = stdout_of(&netelast(
        &[
            "deform", "--mode", "slow", "--lambda", "1.5", "--delta", "0.1", "--K", "99",
        ],
        Some(&net),
        &[],
    ));
    let single = stdout_of(&netelast(
        &["curve", "--samples", "100"],
        Some(&trace),
        &[("NETELAST_THREADS", "1")],
    ));
    let multi = stdout_of(&netelast(
        &["curve", "--samples", "100"],
        Some(&trace),
        &[("NETELAST_THREADS", "4")],
    ));
    assert_eq!(single, multi);
    let again = stdout_of(&netelast(
        &["curve", "--samples", "100"],
        Some(&trace),
        &[("NETELAST_THREADS", "4")],
    ));
    assert_eq!(multi, again);
}

#[test]
fn bad_thread_count_is_a_validation_error() {
    let net = hexagonal_file();
    let trace = stdout_of(&netelast(
        &[
            "deform", "--mode", "slow", "--lambda", "1.2", "--delta", "0.1", "--K", "99",
        ],
        Some(&net),
        &[],
    ));
    let out = netelast(
        &["curve"],
        Some(&trace),
        &[("NETELAST_THREADS", "0")],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn disconnected_file_exits_one_with_a_diagnostic() {
    let file = r#"{"dim":2,"vertices":["a","b"],"edges":[],"period":[1.0,0.0,0.0,1.0]}"#;
    let out = netelast(&["harmonic"], Some(file), &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("connected"), "stderr: {stderr}");
}

#[test]
fn unknown_preset_exits_one() {
    let out = netelast(&["lattice", "nonesuch"], None, &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exceeding_the_move_cap_exits_three() {
    // A soft threshold next to a wide contraction radius makes every
    // split land inside delta, so splittings and contractions alternate
    // forever and the cap reports the repetition.
    let net = hexagonal_file();
    let out = netelast(
        &[
            "deform", "--mode", "slow", "--lambda", "1.6", "--theta", "0", "--delta", "0.8",
            "--K", "4",
        ],
        Some(&net),
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn harmonic_reports_the_hexagonal_values() {
    let net = hexagonal_file();
    let out = stdout_of(&netelast(&["harmonic"], Some(&net), &[]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((report["energy"].as_f64().unwrap() - 3.0).abs() <= 1e-10);
    let young = report["youngs_modulus"].as_f64().unwrap();
    assert!((young - 8.0 * 3.0_f64.sqrt() / 3.0).abs() <= 1e-10);
    let positions = report["net"]["positions"].as_array().unwrap();
    assert_eq!(positions.len(), 2);
    let x1 = positions[1].as_array().unwrap();
    assert!((x1[0].as_f64().unwrap() - 3.0_f64.sqrt() / 2.0).abs() <= 1e-10);
    assert!((x1[1].as_f64().unwrap() - 0.5).abs() <= 1e-10);
}

#[test]
fn standardize_is_identity_on_the_hexagonal_net() {
    let net = hexagonal_file();
    let out = stdout_of(&netelast(&["standardize"], Some(&net), &[]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    let transform = report["transform"].as_array().unwrap();
    assert!((transform[0][0].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert!(transform[0][1].as_f64().unwrap().abs() <= 1e-9);
}

#[test]
fn tension_uses_positions_when_present() {
    let net = hexagonal_file();
    let out = stdout_of(&netelast(&["tension"], Some(&net), &[]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((report["global"][0][0].as_f64().unwrap() - 1.5).abs() <= 1e-10);
    assert!((report["per_weight"][0][0].as_f64().unwrap() - 0.3).abs() <= 1e-10);
}

#[test]
fn render_emits_well_formed_svg_with_a_circle() {
    let net = hexagonal_file();
    let out = stdout_of(&netelast(&["render"], Some(&net), &[]));
    let doc = roxmltree::Document::parse(&out).unwrap();
    let ellipse = doc
        .descendants()
        .find(|n| n.has_tag_name("ellipse"))
        .expect("ellipse present");
    let rx: f64 = ellipse.attribute("rx").unwrap().parse().unwrap();
    let ry: f64 = ellipse.attribute("ry").unwrap().parse().unwrap();
    assert!((rx - 0.3_f64.sqrt()).abs() <= 1e-9);
    assert!((ry - 0.3_f64.sqrt()).abs() <= 1e-9);
}

#[test]
fn render_three_dimensional_net_is_rejected() {
    let net = stdout_of(&netelast(
        &["lattice", "cubic", "--dim", "3", "--a", "1", "--m", "1"],
        None,
        &[],
    ));
    let out = netelast(&["render"], Some(&net), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_zw_fits_the_reciprocal_law() {
    let net = hexagonal_file();
    let out = stdout_of(&netelast(
        &["analyze", "zw", "--v0", "v0", "--v1", "v1"],
        Some(&net),
        &[],
    ));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(report["residual"].as_f64().unwrap() <= 1e-9);
    let shift = report["w_shift"].as_f64().unwrap();
    let bound = report["w_shift_bound"].as_f64().unwrap();
    assert!(shift > 0.0 && shift <= bound + 1e-9);
    assert!(report["verification"]["tensor_deviation"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn analyze_limit_ratio_small_case() {
    let out = stdout_of(&netelast(
        &[
            "analyze",
            "limit-ratio",
            "--sigma",
            "8",
            "--radius",
            "64",
            "--p",
            "0.5",
        ],
        None,
        &[],
    ));
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    let ratio = rows[0]["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0 / std::f64::consts::PI).abs() <= 2e-2, "ratio {ratio}");
}

#[test]
fn analyze_blend_reports_the_optimum() {
    let out = stdout_of(&netelast(
        &["analyze", "blend", "--m", "3", "--a", "1", "--p", "0.5"],
        None,
        &[],
    ));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    let s_hat = report["s_hat"].as_f64().unwrap();
    assert!((s_hat - 0.25).abs() <= 1e-9);
    let r0 = report["r0"].as_f64().unwrap();
    let r_hat = report["r_at_s_hat"].as_f64().unwrap();
    assert!((r_hat - 0.75 * r0).abs() <= 1e-9);
}

#[test]
fn lattice_output_is_deterministic() {
    assert_eq!(hexagonal_file(), hexagonal_file());
}
