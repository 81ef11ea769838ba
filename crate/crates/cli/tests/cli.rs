use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wshrink(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wshrink"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("spawn wshrink")
}

fn numbers(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().unwrap())
        .collect()
}

fn diag_csv(values: &[f64]) -> String {
    let n = values.len();
    let mut s = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| if i == j { values[i].to_string() } else { "0".into() }).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = wshrink(dir.path(), &["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS") && !stdout.contains("FAIL"));
}

#[test]
fn asymmetric_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "1,2\n3,1\n").unwrap();
    let a = dir.path().join("a.csv");
    let out = wshrink(dir.path(), &["denoise", "--in", a.to_str().unwrap(), "--sigma", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("symmetric"));
}

#[test]
fn unknown_figure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = wshrink(dir.path(), &["reproduce", "--figure", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_noise_deconvolution_returns_input() {
    let dir = tempfile::tempdir().unwrap();
    let lh = dir.path().join("lh.csv");
    fs::write(&lh, "3\n1\n2\n").unwrap();
    let out = wshrink(dir.path(), &["deconvolve", "--in", lh.to_str().unwrap(), "--sigma2", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(numbers(&dir.path().join("t_star.csv")), vec![3.0, 2.0, 1.0]);
}

#[test]
fn zero_noise_shrinkage_is_h_of_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    fs::write(&a, diag_csv(&[4.0, 1.0, 2.0])).unwrap();
    let out = wshrink(
        dir.path(),
        &["shrink", "--in", a.to_str().unwrap(), "--sigma", "0", "--h", "inv", "--K", "2"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(numbers(&dir.path().join("d.csv")), vec![0.25, 0.5, 1.0]);
}

#[test]
fn zero_noise_linear_system_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, diag_csv(&[2.0, 4.0])).unwrap();
    fs::write(&b, "1\n1\n").unwrap();
    let out = wshrink(
        dir.path(),
        &["solve-linsys", "--in", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--sigma", "0"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let x = numbers(&dir.path().join("x.csv"));
    assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.25).abs() < 1e-12, "{x:?}");
}

#[test]
fn denoise_with_known_spectrum_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let h = dir.path().join("h.csv");
    let vals: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { 4.0 } + 0.01 * i as f64).collect();
    fs::write(&a, diag_csv(&vals)).unwrap();
    fs::write(&h, "1\n4\n").unwrap();
    let out = wshrink(
        dir.path(),
        &["--format", "json", "denoise", "--in", a.to_str().unwrap(), "--sigma", "0.3", "--spectrum", h.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("denoised.json")).unwrap()).unwrap();
    let shrunk = v["shrunk"].as_array().unwrap();
    assert_eq!(shrunk.len(), 20);
    assert!(shrunk.iter().all(|x| x.as_f64().unwrap().is_finite()));
}

#[test]
fn atom_at_zero_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let h = dir.path().join("h.csv");
    fs::write(&a, diag_csv(&[0.1, 2.0])).unwrap();
    fs::write(&b, "1\n1\n").unwrap();
    fs::write(&h, "0\n2\n").unwrap();
    let out = wshrink(
        dir.path(),
        &[
            "solve-linsys",
            "--in",
            a.to_str().unwrap(),
            "--b",
            b.to_str().unwrap(),
            "--sigma",
            "0.5",
            "--spectrum",
            h.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
