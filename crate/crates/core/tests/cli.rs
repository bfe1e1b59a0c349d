use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpflow::io::SurfaceFile;
use cpflow::packing::{u_to_radius, Background, InversiveDistances, PackingMetric};
use cpflow::surfaces;
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    output: Output,
    manifest: Value,
}

impl Run {
    fn code(&self) -> Option<i32> {
        self.output.status.code()
    }

    fn stdout(&self) -> String {
        String::from_utf8_lossy(&self.output.stdout).into_owned()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }
}

fn cpflow(dir: &Path, args: &[&str]) -> Run {
    let manifest = dir.join("manifest.json");
    let _ = std::fs::remove_file(&manifest);
    let output = Command::new(env!("CARGO_BIN_EXE_cpflow"))
        .args(args)
        .arg("--manifest")
        .arg(&manifest)
        .output()
        .expect("binary runs");
    let text = std::fs::read_to_string(&manifest).expect("manifest written");
    Run {
        output,
        manifest: serde_json::from_str(&text).expect("manifest is json"),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn octahedron_file(dir: &Path) -> PathBuf {
    let c = surfaces::octahedron();
    let inv = InversiveDistances::uniform(&c, 0.5).unwrap();
    let m = PackingMetric::new(&c, Background::Hyperbolic, inv, vec![0.6, 1.1, 0.8, 1.4, 0.9, 1.2]).unwrap();
    write(dir, "oct.json", &SurfaceFile::from_metric(&c, &m).to_json())
}

/// Genus two, so the zero-curvature flow has a limit.
fn genus2_file(dir: &Path) -> PathBuf {
    let c = surfaces::double_torus();
    let inv = InversiveDistances::uniform(&c, 0.3).unwrap();
    let radii = (0..15).map(|v| 0.5 + 0.1 * v as f64).collect();
    let m = PackingMetric::new(&c, Background::Hyperbolic, inv, radii).unwrap();
    write(dir, "g2.json", &SurfaceFile::from_metric(&c, &m).to_json())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn curvature_reports_tetrahedron_values() {
    let dir = TempDir::new().unwrap();
    let surface = write(
        dir.path(),
        "tet.json",
        r#"{"format": 1, "background": "hyperbolic",
            "faces": [[0,1,2],[0,3,1],[0,2,3],[1,3,2]],
            "inversive": 0.0, "radii": [1.0, 1.0, 1.0, 1.0]}"#,
    );
    let run = cpflow(dir.path(), &["--json", "curvature", s(&surface)]);
    assert_eq!(run.code(), Some(0), "{}", run.stderr());
    let report: Value = serde_json::from_str(&run.stdout()).unwrap();
    let k = report["curvature"]["values"].as_array().unwrap();
    assert_eq!(k.len(), 4);
    let k0 = k[0].as_f64().unwrap();
    assert!(k.iter().all(|v| (v.as_f64().unwrap() - k0).abs() < 1e-12));
    assert!(report["gauss_bonnet_defect"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(run.manifest["status"], "ok");
    assert_eq!(run.manifest["exit_code"], 0);
    assert_eq!(run.manifest["input_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_radii_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let surface = write(
        dir.path(),
        "tet.json",
        r#"{"format": 1, "background": "hyperbolic",
            "faces": [[0,1,2],[0,3,1],[0,2,3],[1,3,2]], "inversive": 0.0}"#,
    );
    let run = cpflow(dir.path(), &["curvature", s(&surface)]);
    assert_eq!(run.code(), Some(2));
    assert!(run.stderr().contains("radii"), "{}", run.stderr());
    assert_eq!(run.manifest["exit_code"], 2);
}

#[test]
fn malformed_and_unknown_fields_are_rejected() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", "{ not json");
    assert_eq!(cpflow(dir.path(), &["gb", s(&bad)]).code(), Some(2));
    let extra = write(
        dir.path(),
        "extra.json",
        r#"{"format": 1, "background": "euclidean", "faces": [[0,1,2],[0,3,1],[0,2,3],[1,3,2]],
            "inversive": 0.0, "radii": [1,1,1,1], "colour": "red"}"#,
    );
    assert_eq!(cpflow(dir.path(), &["gb", s(&extra)]).code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(cpflow(dir.path(), &["gb", s(&missing)]).code(), Some(2));
}

#[test]
fn usage_errors_still_write_a_manifest() {
    let dir = TempDir::new().unwrap();
    let run = cpflow(dir.path(), &["flow", "--no-such-flag"]);
    assert_eq!(run.code(), Some(2));
    assert_eq!(run.manifest["exit_code"], 2);
}

#[test]
fn extended_curvature_flags_degenerate_faces() {
    let dir = TempDir::new().unwrap();
    // A large inversive distance on edge 12 with a tiny radius at 0 makes
    // the faces through that edge degenerate.
    let c = surfaces::tetrahedron();
    let mut inv = vec![0.0; 6];
    inv[c.edge_index(1, 2).unwrap()] = 3.0;
    let m = PackingMetric::new(
        &c,
        Background::Hyperbolic,
        InversiveDistances::new(inv).unwrap(),
        vec![1e-3, 1.0, 1.0, 1.0],
    )
    .unwrap();
    let surface = write(dir.path(), "degenerate.json", &SurfaceFile::from_metric(&c, &m).to_json());
    let run = cpflow(dir.path(), &["--json", "curvature", "--extended", s(&surface)]);
    assert_eq!(run.code(), Some(0), "{}", run.stderr());
    let report: Value = serde_json::from_str(&run.stdout()).unwrap();
    assert_eq!(report["in_omega"], false);
    assert!(!report["curvature"]["degenerate_faces"].as_array().unwrap().is_empty());
    assert!(!report["violating_faces"].as_array().unwrap().is_empty());

    // The classical curvature is undefined there.
    let run = cpflow(dir.path(), &["curvature", s(&surface)]);
    assert_ne!(run.code(), Some(0));
}

#[test]
fn flow_trace_has_one_column_per_field() {
    let dir = TempDir::new().unwrap();
    let surface = genus2_file(dir.path());
    let trace = dir.path().join("trace.csv");
    let trace_json = dir.path().join("trace.json");
    let run = cpflow(
        dir.path(),
        &["flow", s(&surface), "--trace", s(&trace), "--trace-json", s(&trace_json)],
    );
    assert_eq!(run.code(), Some(0), "{}", run.stderr());
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,u_0,"));
    assert!(header.ends_with(",M,m,potential"));
    let width = header.split(',').count();
    assert_eq!(width, 1 + 15 + 15 + 3);
    let mut rows = 0;
    for line in lines {
        assert_eq!(line.split(',').count(), width);
        rows += 1;
    }
    assert!(rows >= 2);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&trace_json).unwrap()).unwrap();
    assert!(json.is_array() || json.is_object());
    assert_eq!(run.manifest["status"], "converged");
    assert!(run.manifest["outputs"]["trace"].is_string());
}

#[test]
fn classical_flow_reports_leaving_omega() {
    let dir = TempDir::new().unwrap();
    let c = surfaces::tetrahedron();
    let mut inv = vec![0.5; 6];
    inv[c.edge_index(1, 2).unwrap()] = 3.0;
    let r = u_to_radius(Background::Hyperbolic, -0.5);
    let m = PackingMetric::new(&c, Background::Hyperbolic, InversiveDistances::new(inv).unwrap(), vec![r; 4]).unwrap();
    let surface = write(dir.path(), "tet.json", &SurfaceFile::from_metric(&c, &m).to_json());
    let target = write(dir.path(), "target.json", r#"{"format": 1, "target": [-6.0, 2.0, 2.0, 2.0]}"#);
    let run = cpflow(
        dir.path(),
        &["flow", s(&surface), "--variant", "classical", "--target-file", s(&target), "--max-time", "200"],
    );
    assert_eq!(run.code(), Some(5), "{}", run.stderr());
    assert_eq!(run.manifest["status"], "left_omega");
    assert!(run.manifest["omega_exit_time"].as_f64().unwrap() > 0.0);
}

#[test]
fn prescribed_flow_needs_a_target() {
    let dir = TempDir::new().unwrap();
    let surface = octahedron_file(dir.path());
    let run = cpflow(dir.path(), &["flow", s(&surface), "--variant", "prescribed"]);
    assert_eq!(run.code(), Some(2));
    assert_ne!(run.manifest["status"], "ok");
}

#[test]
fn max_time_exit_code() {
    let dir = TempDir::new().unwrap();
    let surface = octahedron_file(dir.path());
    let run = cpflow(dir.path(), &["flow", s(&surface), "--max-time", "0.1"]);
    assert_eq!(run.code(), Some(4), "{}", run.stderr());
    assert_eq!(run.manifest["status"], "max_time_reached");
}

#[test]
fn flow_output_round_trips_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let surface = genus2_file(dir.path());
    let out = dir.path().join("out.json");
    let report = dir.path().join("report.json");
    let run = cpflow(dir.path(), &["flow", s(&surface), "--out", s(&out), "--report", s(&report)]);
    assert_eq!(run.code(), Some(0), "{}", run.stderr());
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let reported: Vec<f64> = summary["final_radii"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let file = SurfaceFile::parse("out.json", &std::fs::read_to_string(&out).unwrap()).unwrap();
    let written = file.radii.unwrap();
    assert_eq!(
        written.iter().map(|r| r.to_bits()).collect::<Vec<_>>(),
        reported.iter().map(|r| r.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn solve_matches_a_prescribed_target() {
    let dir = TempDir::new().unwrap();
    let c = surfaces::octahedron();
    let inv = InversiveDistances::uniform(&c, 0.5).unwrap();
    let truth = vec![0.7, 1.3, 0.9, 1.1, 0.5, 1.6];
    let m = PackingMetric::new(&c, Background::Hyperbolic, inv.clone(), truth.clone()).unwrap();
    let k = cpflow::curvature::curvature(&c, &m).unwrap().values;
    let start = PackingMetric::new(&c, Background::Hyperbolic, inv, vec![1.0; 6]).unwrap();
    let surface = write(dir.path(), "oct.json", &SurfaceFile::from_metric(&c, &start).to_json());
    let target = write(
        dir.path(),
        "target.json",
        &serde_json::json!({"format": 1, "target": k}).to_string(),
    );
    let out = dir.path().join("solved.json");
    let run = cpflow(
        dir.path(),
        &["solve", s(&surface), "--target-file", s(&target), "--out", s(&out)],
    );
    assert_eq!(run.code(), Some(0), "{}", run.stderr());
    let solved = SurfaceFile::parse("solved.json", &std::fs::read_to_string(&out).unwrap())
        .unwrap()
        .radii
        .unwrap();
    for (a, b) in solved.iter().zip(&truth) {
        assert!((a - b).abs() < 1e-8, "{solved:?} vs {truth:?}");
    }

    let wrong = write(dir.path(), "short.json", r#"{"format": 1, "target": [0.0, 0.0]}"#);
    let run = cpflow(dir.path(), &["solve", s(&surface), "--target-file", s(&wrong)]);
    assert_eq!(run.code(), Some(2));
}

#[test]
fn check_reports_with_extra_subsets() {
    let dir = TempDir::new().unwrap();
    let c = surfaces::torus(5, 4);
    let m = PackingMetric::new(
        &c,
        Background::Hyperbolic,
        InversiveDistances::uniform(&c, 0.2).unwrap(),
        vec![1.0; 20],
    )
    .unwrap();
    let surface = write(dir.path(), "torus.json", &SurfaceFile::from_metric(&c, &m).to_json());
    let subsets = write(dir.path(), "subsets.json", r#"{"format": 1, "subsets": [[0, 1, 2, 3, 4, 5]]}"#);
    let report = dir.path().join("check.json");
    let run = cpflow(
        dir.path(),
        &["check", s(&surface), "--subset-cap", "2", "--subsets-file", s(&subsets), "--report", s(&report)],
    );
    assert_eq!(run.code(), Some(0), "{}", run.stderr());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let records = v["zero_curvature"]["records"].as_array().unwrap();
    assert_eq!(records.len(), 20 + 190 + 1);
    assert!(v["metric_bounds"].is_object());

    let bad = write(dir.path(), "bad_subsets.json", r#"{"format": 1, "subsets": [[0, 99]]}"#);
    assert_eq!(cpflow(dir.path(), &["check", s(&surface), "--subsets-file", s(&bad)]).code(), Some(2));
}
