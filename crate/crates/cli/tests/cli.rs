use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn ssdss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssdss")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ssdss(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// `key=value` from a line of `key=value` pairs.
fn field(stdout: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    stdout
        .split_whitespace()
        .find_map(|t| t.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .parse()
        .unwrap()
}

fn exported() -> TempDir {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["bench", "export", "--out-dir", "fx"]);
    dir
}

#[test]
fn bench_export_writes_every_fixture() {
    let dir = exported();
    for name in [
        "alu-cross-a",
        "alu-cross-b",
        "steel-cross-a",
        "steel-cross-b",
        "mount",
        "assembly-a",
        "assembly-b",
        "assembly-a-perturbed",
        "decouple-map",
        "couple-map",
        "rcm-config",
        "six-dof-truncated",
        "assembly-b-reference",
        "assembly-b-receptance",
    ] {
        let text = std::fs::read_to_string(dir.path().join("fx").join(format!("{name}.json"))).unwrap();
        assert!(text.contains("\"schema\": \"ssdss-v1\""), "{name}");
    }
}

#[test]
fn build_uses_default_rcms_and_enforces_newton() {
    let dir = exported();
    let d = dir.path();
    let out = ok(d, &["build", "--modal", "fx/six-dof-truncated.json", "--out", "six.json"]);
    let newton_states = field(&out, "states");
    let header = out.lines().next().unwrap();
    assert!(header.contains("omega_lr_hz=0.1") && header.contains("omega_ur_hz=15000"), "{header}");
    assert!(header.contains("omega_cb_hz=15000") && header.contains("xi=0.1"), "{header}");
    assert!(field(&out, "max_cb") <= 1e-10, "{out}");

    let out = ok(d, &["build", "--modal", "fx/six-dof-truncated.json", "--no-newton", "--out", "raw.json"]);
    assert!(field(&out, "max_cb") > 1e-10, "{out}");
    assert!(newton_states > field(&out, "states"));

    let out = ok(d, &["build", "--modal", "fx/six-dof-truncated.json", "--real-form", "--out", "real.json"]);
    assert!(field(&out, "max_cb") <= 1e-10);
    assert!(std::fs::read_to_string(d.join("real.json")).unwrap().contains("\"real-valued\""));
}

#[test]
fn explicit_rcm_file_is_echoed() {
    let dir = exported();
    let out = ok(
        dir.path(),
        &["build", "--modal", "fx/steel-cross-a.json", "--rcm", "fx/rcm-config.json", "--out", "s.json"],
    );
    assert!(out.starts_with("rcm: omega_lr_hz=4 omega_ur_hz=5000 omega_cb_hz=5000 xi=0.1"), "{out}");
}

fn unstable_count(summary: &str) -> usize {
    let line = summary.lines().find(|l| l.ends_with("unstable")).unwrap_or_else(|| panic!("{summary}"));
    line.split_whitespace().rev().nth(1).unwrap().parse().unwrap()
}

#[test]
fn pipeline_through_the_cli() {
    let dir = exported();
    let d = dir.path();
    for s in ["alu-cross-a", "alu-cross-b", "steel-cross-a", "steel-cross-b"] {
        ok(
            d,
            &[
                "build",
                "--modal",
                &format!("fx/{s}.json"),
                "--rcm",
                "fx/rcm-config.json",
                "--out",
                &format!("{s}.json"),
            ],
        );
    }
    ok(d, &["build", "--modal", "fx/assembly-a-perturbed.json", "--rcm", "fx/rcm-config.json", "--out", "asm.json"]);
    ok(
        d,
        &[
            "decouple",
            "--assembly",
            "asm.json",
            "--subtract",
            "alu-cross-a.json",
            "--subtract",
            "alu-cross-b.json",
            "--map",
            "fx/decouple-map.json",
            "--keep",
            "0-11",
            "--out",
            "mount.json",
        ],
    );
    let out = ok(
        d,
        &[
            "couple",
            "--model",
            "steel-cross-a.json",
            "--model",
            "mount.json",
            "--model",
            "steel-cross-b.json",
            "--map",
            "fx/couple-map.json",
            "--keep",
            "6-17",
            "--out",
            "coupled.json",
        ],
    );
    assert!(unstable_count(&out) > 0, "{out}");
    let poles = std::fs::read_to_string(d.join("coupled.poles.csv")).unwrap();
    assert!(poles.starts_with("re,im,omega_n_rad_s,xi,class\n"));
    assert_eq!(poles.lines().filter(|l| l.contains("unstable")).count(), unstable_count(&out));

    let out = ok(d, &["stabilize", "--model", "coupled.json", "--out", "stable.json"]);
    let line = out.lines().find(|l| l.contains(" states (≤ 6·min(no, ni) = 72)")).unwrap_or_else(|| panic!("{out}"));
    let added: i64 = line.split_whitespace().next().unwrap().parse().unwrap();
    assert!((1..=72).contains(&added), "{line}");
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("stable.diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["no_op"], false);
    assert_eq!(unstable_count(&ok(d, &["poles", "--model", "stable.json", "--out", "p.csv"])), 0);

    let out = ok(
        d,
        &[
            "simulate",
            "--model",
            "stable.json",
            "--input",
            "2",
            "--reference",
            "fx/assembly-b-reference.json",
            "--out",
            "stable.csv",
        ],
    );
    let rms: f64 = out.lines().find_map(|l| l.strip_prefix("rms deviation from reference: ")).unwrap().parse().unwrap();
    assert!(rms <= 0.05, "{out}");
    let fs = field(&out, "fs_hz");
    let rows = std::fs::read_to_string(d.join("stable.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + fs.round() as usize);

    let failed = ssdss(d, &["simulate", "--model", "coupled.json", "--input", "2", "--out", "unstable.csv"]);
    assert_eq!(failed.status.code(), Some(4), "{}", String::from_utf8_lossy(&failed.stderr));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("diverged"));
    let partial = std::fs::read_to_string(d.join("unstable.csv")).unwrap();
    assert!(partial.starts_with("t,u_2,y_0,"));
    assert!(partial.lines().count() > 1 && partial.lines().count() < rows);
}

#[test]
fn outputs_are_deterministic() {
    let dir = exported();
    let d = dir.path();
    let again = TempDir::new().unwrap();
    ok(again.path(), &["bench", "export", "--out-dir", "fx"]);
    for name in ["assembly-a-perturbed.json", "assembly-b-receptance.json", "couple-map.json"] {
        assert_eq!(
            std::fs::read(d.join("fx").join(name)).unwrap(),
            std::fs::read(again.path().join("fx").join(name)).unwrap()
        );
    }
    let build = |out: &str| {
        ok(d, &["build", "--modal", "fx/steel-cross-a.json", "--rcm", "fx/rcm-config.json", "--out", out]);
        std::fs::read(d.join(out)).unwrap()
    };
    assert_eq!(build("a.json"), build("b.json"));
    std::fs::write(
        d.join("empty.json"),
        r#"{"schema": "ssdss-v1", "kind": "interface-map", "n_outputs": 12, "rows": []}"#,
    )
    .unwrap();
    let couple = |out: &str| {
        ok(d, &["couple", "--model", "a.json", "--model", "b.json", "--map", "empty.json", "--out", out]);
        (std::fs::read(d.join(out)).unwrap(), std::fs::read(d.join(out.replace(".json", ".poles.csv"))).unwrap())
    };
    assert_eq!(couple("c1.json"), couple("c2.json"));
}

#[test]
fn seeds_change_the_perturbation() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    ok(a.path(), &["bench", "export", "--out-dir", ".", "--seed", "1"]);
    ok(b.path(), &["bench", "export", "--out-dir", ".", "--seed", "2"]);
    let read = |d: &TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_ne!(read(&a, "assembly-a-perturbed.json"), read(&b, "assembly-a-perturbed.json"));
    assert_eq!(read(&a, "assembly-a.json"), read(&b, "assembly-a.json"));
}

#[test]
fn compare_reports_zero_for_identical_sources() {
    let dir = exported();
    let d = dir.path();
    ok(d, &["build", "--modal", "fx/assembly-b.json", "--out", "b.json"]);
    let out = ok(
        d,
        &[
            "compare",
            "--source",
            "fx/assembly-b.json",
            "--source",
            "fx/assembly-b.json",
            "--source",
            "b.json",
            "--source",
            "fx/assembly-b-receptance.json",
            "--entry",
            "2,3",
            "--out",
            "cmp.csv",
        ],
    );
    assert!(!out.contains("exceeds"), "{out}");
    let text = std::fs::read_to_string(d.join("cmp.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "f_hz,src0_mag,src0_phase_deg,src1_mag,src1_phase_deg,src2_mag,src2_phase_deg,src3_mag,src3_phase_deg,reldev1,reldev2,reldev3"
    );
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 400);
    assert!((rows[0][0] - 20.0).abs() < 1e-9 && (rows[399][0] - 500.0).abs() < 1e-9);
    for r in &rows {
        assert_eq!(r[9], 0.0);
        assert!(r[10] <= 1e-6 && r[11] <= 1e-6, "{r:?}");
    }
}

#[test]
fn compare_moves_sources_to_one_domain() {
    let dir = exported();
    let d = dir.path();
    let out = ok(
        d,
        &[
            "compare",
            "--source",
            "fx/assembly-b.json",
            "--source",
            "fx/assembly-b-reference.json",
            "--domain",
            "acceleration",
            "--out",
            "cmp.csv",
        ],
    );
    assert!(out.contains("within"), "{out}");
}

#[test]
fn schema_errors_name_the_line() {
    let dir = exported();
    let d = dir.path();
    ok(d, &["build", "--modal", "fx/six-dof-truncated.json", "--out", "six.json"]);
    std::fs::write(
        d.join("bad.json"),
        "{\n  \"schema\": \"ssdss-v1\",\n  \"kind\": \"interface-map\",\n  \"n_outputs\": \"twelve\",\n  \"rows\": []\n}\n",
    )
    .unwrap();
    let out = ssdss(d, &["couple", "--model", "six.json", "--map", "bad.json", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line 4"), "{err}");

    let out = ssdss(d, &["build", "--modal", "fx/couple-map.json", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected 'modal-model'"));

    let out = ssdss(d, &["stabilize", "--model", "six.json", "--weighting", "jerk", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ssdss(d, &["poles", "--model", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    // The couple map spans 24 outputs, a single model only 6.
    let out = ssdss(d, &["couple", "--model", "six.json", "--map", "fx/couple-map.json", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_map_concatenates() {
    let dir = exported();
    let d = dir.path();
    ok(d, &["build", "--modal", "fx/six-dof-truncated.json", "--out", "six.json"]);
    std::fs::write(
        d.join("empty.json"),
        r#"{"schema": "ssdss-v1", "kind": "interface-map", "n_outputs": 12, "rows": []}"#,
    )
    .unwrap();
    let out =
        ok(d, &["couple", "--model", "six.json", "--model", "six.json", "--map", "empty.json", "--out", "cat.json"]);
    assert!(out.starts_with("52 poles, 0 unstable"), "{out}");
    // Two copies of the same poles.
    let table = ok(d, &["poles", "--model", "cat.json"]);
    let single = ok(d, &["poles", "--model", "six.json"]);
    let mut doubled: Vec<&str> = single.lines().skip(1).chain(single.lines().skip(1)).collect();
    let mut got: Vec<&str> = table.lines().skip(1).collect();
    doubled.sort_unstable();
    got.sort_unstable();
    assert_eq!(got.len(), doubled.len());
    let shapes = ssdss(d, &["compare", "--source", "six.json", "--source", "cat.json", "--out", "c.csv"]);
    assert_eq!(shapes.status.code(), Some(2));
}

#[test]
fn stable_input_is_a_no_op() {
    let dir = exported();
    let d = dir.path();
    ok(d, &["build", "--modal", "fx/six-dof-truncated.json", "--out", "six.json"]);
    let out = ok(d, &["stabilize", "--model", "six.json", "--out", "s.json", "--diagnostics", "diag.json"]);
    assert!(out.contains("0 unstable") && out.contains("unchanged"), "{out}");
    let diag: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("diag.json")).unwrap()).unwrap();
    assert_eq!(diag["no_op"], true);
    assert_eq!(diag["n_states_in"], diag["n_states_out"]);
}

#[test]
fn poles_and_rcm_report_tables() {
    let dir = exported();
    let d = dir.path();
    ok(d, &["build", "--modal", "fx/six-dof-truncated.json", "--out", "six.json"]);
    let table = ok(d, &["poles", "--model", "six.json"]);
    assert!(table.starts_with("re,im,omega_n_rad_s,xi,class\n"));
    assert_eq!(table.lines().count(), 1 + 26);
    ok(d, &["rcm-report", "--modal", "fx/six-dof-truncated.json", "--points", "30", "--out", "r.csv"]);
    let text = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(text.starts_with("f_hz,max_rel_dev_UR,max_rel_dev_LR,max_rel_dev_CB\n"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn provenance_records_input_hashes() {
    let dir = exported();
    let d = dir.path();
    ok(d, &["build", "--modal", "fx/six-dof-truncated.json", "--out", "six.json"]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("six.json")).unwrap()).unwrap();
    let input = &doc["meta"]["inputs"][0];
    assert_eq!(input["path"], "fx/six-dof-truncated.json");
    assert_eq!(input["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(doc["meta"]["command"], "build");
}
