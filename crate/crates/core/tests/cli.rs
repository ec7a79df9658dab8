use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mtve");

fn mtve(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("MTVE_THREADS", t),
        None => cmd.env_remove("MTVE_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn d1(lambda: f64) -> String {
    format!(
        r#"
[model]
spacetime = "minkowski"
dim = 1
kernel = "natural-1d"
lambda = {lambda:?}
horizon = 1.0

[grid]
n_t = 5
window = 0.5

[free_field]
factory = "dalembert-gaussian"
width = 0.5

[outputs]
time_slices = [[0.0, 0.0]]
"#
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_coupling_run_stores_the_free_field() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", &d1(0.0));
    let out = dir.path().join("run");
    let o = mtve(&["run", s(&sc), "--out", s(&out)], None);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(text.contains("iterations = 1\n"), "{text}");
    assert_eq!(
        fs::read(out.join("chi.bin")).unwrap(),
        fs::read(out.join("chi_free.bin")).unwrap()
    );
    assert_eq!(mtve(&["verify", s(&out)], None).status.code(), Some(0));
}

#[test]
fn slices_snap_and_report_abs() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", &d1(2.0));
    let out = dir.path().join("run");
    assert_eq!(
        mtve(&["run", s(&sc), "--out", s(&out)], None).status.code(),
        Some(0)
    );

    // Empty cones at the corner: χ equals χ_free there.
    let corner = fs::read_to_string(out.join("slice_0.csv")).unwrap();
    let free_dir = dir.path().join("free");
    let sc0 = write(dir.path(), "s0.toml", &d1(0.0));
    assert_eq!(
        mtve(&["run", s(&sc0), "--out", s(&free_dir)], None)
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        corner,
        fs::read_to_string(free_dir.join("slice_0.csv")).unwrap()
    );

    let csv = dir.path().join("slice.csv");
    let o = mtve(
        &[
            "export-slice",
            s(&out),
            "--eta1",
            "0.49",
            "--eta2",
            "1.0",
            "--out",
            s(&csv),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert!(
        text.starts_with("# eta1 requested 0.49 snapped 0.5 distance 1.0"),
        "{text}"
    );
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert!(!rows.is_empty());
    for r in rows {
        let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        let (re, im, abs) = (v[2], v[3], v[4]);
        assert!((abs - (re * re + im * im).sqrt()).abs() <= 1e-15 * abs.max(1e-300));
    }

    let pts = dir.path().join("pts.csv");
    let o = mtve(
        &[
            "export-slice",
            s(&out),
            "--x1=-0.25",
            "--x2",
            "0.3",
            "--out",
            s(&pts),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        fs::read_to_string(&pts)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count(),
        1 + 25
    );

    let o = mtve(
        &[
            "export-slice",
            s(&out),
            "--eta1",
            "1.5",
            "--eta2",
            "0",
            "--out",
            s(&csv),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_scenario_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "bad.toml",
        &d1(1.0).replace("n_t = 5", "n_t = -5"),
    );
    let out = dir.path().join("run");
    let o = mtve(&["run", s(&sc), "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_t"));
    assert!(!out.exists());

    let rule = d1(1.0).replace("horizon = 1.0", "horizon = 1.0\ngreens = \"symmetric\"");
    let sc = write(dir.path(), "rule.toml", &rule);
    let o = mtve(&["run", s(&sc), "--out", s(&out)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetric"));
    assert!(!out.exists());

    let o = mtve(&["run", s(&sc), "--out", s(&out)], Some("zero"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn truncated_field_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", &d1(1.0));
    let out = dir.path().join("run");
    assert_eq!(
        mtve(&["run", s(&sc), "--out", s(&out)], None).status.code(),
        Some(0)
    );
    let bin = out.join("chi.bin");
    let data = fs::read(&bin).unwrap();
    fs::write(&bin, &data[..data.len() - 1]).unwrap();
    let o = mtve(&["verify", s(&out.join("manifest.toml"))], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chi.bin"));
}

#[test]
fn closed_run_above_bound_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[model]
spacetime = "closed"
scale = "dust"
kernel = "inverse-sine"
lambda_over_bound = 1.2

[grid]
n_t = 3
n_s3 = 12

[free_field]
factory = "esu-mode"
n = 1
"#;
    let sc = write(dir.path(), "c.toml", text);
    let out = dir.path().join("run");
    let o = mtve(&["run", s(&sc), "--out", s(&out)], None);
    assert!(matches!(o.status.code(), Some(0) | Some(2)));
    let m = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(m.contains("\"above-bound\""), "{m}");

    let o = mtve(&["bound", s(&sc)], None);
    assert_eq!(o.status.code(), Some(0));
    let b: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((b - 2f64.sqrt() / (36.0 * std::f64::consts::PI.powi(2))).abs() < 1e-15);
    let o = mtve(&["bound", s(&write(dir.path(), "d1.toml", &d1(1.0)))], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_convergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = d1(100.0).replace("[outputs]", "[solver]\nmax_iter = 2\n\n[outputs]");
    let sc = write(dir.path(), "s.toml", &text);
    let out = dir.path().join("run");
    assert_eq!(
        mtve(&["run", s(&sc), "--out", s(&out)], None).status.code(),
        Some(2)
    );
}

#[test]
fn thread_count_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", &d1(1.0));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        mtve(&["run", s(&sc), "--out", s(&a)], Some("1"))
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        mtve(&["run", s(&sc), "--out", s(&b)], Some("4"))
            .status
            .code(),
        Some(0)
    );
    for f in [
        "chi.bin",
        "chi.hdr",
        "chi_free.bin",
        "residuals.txt",
        "slice_0.csv",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn oracle_verb_passes() {
    let o = mtve(&["oracle"], None);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    assert_eq!(
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .filter(|l| l.starts_with("PASS"))
            .count(),
        3
    );
}
