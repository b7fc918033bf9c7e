use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tslyap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tslyap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let ok = tslyap(
        &["check", "--fixture", "example2", "--a", "-8", "--b", "100", "--condition", "vertex", "--b-bound", "0.2603"],
        out,
    );
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let cert = read_json(&out.join("certificate.json"));
    assert_eq!(cert["status"], "Feasible");
    assert!(cert["variables"]["P"].is_array());
    assert_eq!(cert["manifest"], "check.manifest.json");

    let cubic = tslyap(&["check", "--fixture", "cubic", "--condition", "mozelli", "--phi", "1"], out);
    assert!([1, 2].contains(&code(&cubic)));

    let vdp = tslyap(&["check", "--fixture", "vdp", "--mu", "-2", "--condition", "ball", "--eta", "1e-4"], out);
    assert_eq!(code(&vdp), 0);
}

#[test]
fn usage_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for args in [
        vec!["check", "--fixture", "nope", "--condition", "qlf"],
        vec!["check", "--fixture", "example2", "--condition", "qlf"],
        vec!["check", "--fixture", "cubic", "--condition", "mozelli"],
        vec!["check", "--fixture", "cubic", "--condition", "vertex", "--b-bound", "0.1,0.2,0.3"],
        vec!["check", "--fixture", "cubic", "--condition", "sideways"],
        vec!["check", "--bogus"],
        vec!["sweep", "--fixture", "vdp", "--mu", "-1", "--condition", "qlf"],
        vec!["reproduce", "--only", "9"],
    ] {
        let o = tslyap(&args, out);
        assert_eq!(code(&o), 3, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let help = Command::new(env!("CARGO_BIN_EXE_tslyap")).arg("--help").output().unwrap();
    assert_eq!(code(&help), 0);
}

#[test]
fn maximize_reports_phi_star() {
    let dir = tempfile::tempdir().unwrap();
    let o = tslyap(&["maximize", "--fixture", "example2", "--a", "-8", "--b", "100", "--condition", "mozelli"], dir.path());
    assert_eq!(code(&o), 0);
    let doc = read_json(&dir.path().join("maximize.json"));
    let best = doc["result"]["best"].as_f64().unwrap();
    assert!(((best - 4.0789) / 4.0789).abs() < 0.05, "{best}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("phi* = 4.07"));
}

#[test]
fn sweep_writes_table_figure_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = tslyap(
        &[
            "sweep", "--fixture", "example2", "--condition", "vertex", "--b-bound", "0.1", "--grid", "11x11", "--against",
            "mozelli", "--against-phi", "0.85",
        ],
        out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 122);
    assert!(fs::read_to_string(out.join("sweep.svg")).unwrap().contains("<svg"));
    let summary = read_json(&out.join("sweep.json"));
    assert_eq!(summary["against"]["comparison"]["relation"], "b_in_a");
    let manifest = read_json(&out.join("sweep.manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in ["sweep.csv", "against.csv", "sweep.svg", "sweep.json"] {
        assert!(outputs.contains(&f), "{f}");
    }
    assert_eq!(manifest["grid"], serde_json::json!([11, 11]));
}

#[test]
fn da_without_certificate_reports_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = tslyap(
        &["da", "--fixture", "example2", "--a", "-8", "--b", "100", "--condition", "ball", "--eta", "1.1645"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("da.svg").exists());
    assert!(dir.path().join("da.manifest.json").exists());
}

#[test]
fn da_and_validate_emit_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = tslyap(
        &[
            "validate", "--fixture", "example2", "--a", "-8", "--b", "100", "--condition", "ball", "--eta", "0.16",
            "--grid", "101x101", "--samples", "40", "--horizon", "20", "--trajectory", "0.1,0.1",
        ],
        out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let audit = read_json(&out.join("audit.json"));
    assert_eq!(audit["passed"], true);
    assert_eq!(audit["samples"], 40);
    let svg = fs::read_to_string(out.join("da.svg")).unwrap();
    assert!(svg.starts_with("<!-- manifest: validate.manifest.json -->"));
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,x1,x2,V\n"));
    assert_eq!(read_json(&out.join("da.json"))["grid"]["counts"], serde_json::json!([101, 101]));
}

#[test]
fn manifest_argv_reproduces_the_certificate() {
    let first = tempfile::tempdir().unwrap();
    let o = tslyap(
        &["check", "--fixture", "example2", "--a", "-5", "--b", "50", "--condition", "combined", "--phi", "0.85", "--b-bound", "0.2"],
        first.path(),
    );
    assert_eq!(code(&o), 0);
    let manifest = read_json(&first.path().join("check.manifest.json"));
    let argv: Vec<String> = manifest["argv"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let out_pos = argv.iter().position(|a| a == "--out").unwrap();
    let mut args: Vec<&str> = argv[1..out_pos].iter().map(String::as_str).collect();
    args.extend(argv[out_pos + 2..].iter().map(String::as_str));
    let second = tempfile::tempdir().unwrap();
    assert_eq!(code(&tslyap(&args, second.path())), 0);
    let a = read_json(&first.path().join("certificate.json"));
    let b = read_json(&second.path().join("certificate.json"));
    assert_eq!(a["variables"], b["variables"]);
}

#[test]
fn reproduce_lists_and_runs_single_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let list = tslyap(&["reproduce", "--list"], dir.path());
    assert_eq!(code(&list), 0);
    assert_eq!(String::from_utf8_lossy(&list.stdout).lines().count(), 7);
    let seven = tslyap(&["reproduce", "--only", "7"], dir.path());
    assert_eq!(code(&seven), 0);
    assert!(String::from_utf8_lossy(&seven.stdout).contains("criterion 7: PASS"));
    assert_eq!(read_json(&dir.path().join("reproduce.json"))["passed"], true);
}
