use std::path::Path;

use assert_cmd::Command;
use tempfile::TempDir;

fn qdsim() -> Command {
    Command::cargo_bin("qdsim").unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = qdsim().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value_after(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no '{key}' in\n{text}"));
    line[key.len()..]
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// `(row, col) -> (re, im)` entries of a state file.
fn entries(file: &Path) -> Vec<(usize, usize, f64, f64)> {
    std::fs::read_to_string(file)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let t: Vec<&str> = l.split_whitespace().collect();
            (
                t[0].parse().unwrap(),
                t[1].parse().unwrap(),
                t[2].parse().unwrap(),
                t[3].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn prepare_uniform_is_maximally_entangled() {
    let out = run_ok(&["prepare", "--d", "4", "--uniform"]);
    assert_eq!(value_after(&out, "# concurrence"), 1.0);
    assert!(out.contains("state pure 4 4"));
}

#[test]
fn prepare_partial_state() {
    let dir = TempDir::new().unwrap();
    let file = path(&dir, "s.txt");
    let out = run_ok(&[
        "prepare",
        "--d",
        "3",
        "--amps",
        "0.2771,0.5420,0.7934",
        "--out",
        &file,
    ]);
    assert!((value_after(&out, "concurrence") - 0.876).abs() < 5e-4);
    assert!(std::fs::read_to_string(&file)
        .unwrap()
        .starts_with("state pure 3 3\n"));
}

#[test]
fn prepare_requires_a_source() {
    qdsim().args(["prepare", "--d", "3"]).assert().code(1);
    qdsim()
        .args(["prepare", "--d", "3", "--amps", "1,2"])
        .assert()
        .code(1);
}

#[test]
fn dephase_zero_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (pure, rho, same) = (path(&dir, "p.txt"), path(&dir, "r.txt"), path(&dir, "r0.txt"));
    run_ok(&["prepare", "--d", "4", "--uniform", "--out", &pure]);
    run_ok(&["dephase", "--input", &pure, "--p", "0.375", "--out", &rho]);
    run_ok(&["dephase", "--input", &rho, "--p", "0", "--out", &same]);
    assert_eq!(std::fs::read(&rho).unwrap(), std::fs::read(&same).unwrap());
}

#[test]
fn dephase_scales_off_diagonals() {
    let dir = TempDir::new().unwrap();
    let (pure, half, full) = (path(&dir, "p.txt"), path(&dir, "h.txt"), path(&dir, "f.txt"));
    run_ok(&["prepare", "--d", "4", "--uniform", "--out", &pure]);
    let out = run_ok(&["dephase", "--input", &pure, "--p", "0.5", "--out", &half]);
    assert_eq!(value_after(&out, "max off-diagonal deviation"), 0.0);
    for (r, c, re, im) in entries(Path::new(&half)) {
        assert_eq!((re, im), (if r == c { 0.25 } else { 0.125 }, 0.0));
    }
    run_ok(&["dephase", "--input", &pure, "--p", "1", "--out", &full]);
    for (r, c, re, _) in entries(Path::new(&full)) {
        assert_eq!(re, if r == c { 0.25 } else { 0.0 });
    }
}

#[test]
fn dephase_rejects_bad_p_without_writing() {
    let dir = TempDir::new().unwrap();
    let (pure, out) = (path(&dir, "p.txt"), path(&dir, "o.txt"));
    run_ok(&["prepare", "--d", "4", "--uniform", "--out", &pure]);
    qdsim()
        .args(["dephase", "--input", &pure, "--p", "1.5", "--out", &out])
        .assert()
        .code(1);
    qdsim()
        .args(["dephase", "--input", &pure, "--p", "-0.1", "--out", &out])
        .assert()
        .code(1);
    assert!(!Path::new(&out).exists());
}

#[test]
fn film_layouts() {
    let out = run_ok(&["film", "--d", "4", "--p", "0.125"]);
    assert!(out.contains("# frames identity 28, K0 1, K1 1, K2 1, K3 1"));
    let frames: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(frames.len(), 32);
    assert!(frames[..28].iter().all(|l| l.starts_with("4 ")));
    let full = run_ok(&["film", "--d", "4", "--p", "1.0"]);
    assert!(full.contains("# frames identity 0, K0 8, K1 8, K2 8, K3 8"));
}

#[test]
fn film_names_nearest_representable_values() {
    let out = qdsim()
        .args(["film", "--d", "4", "--p", "0.13"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("0.125") && err.contains("0.250"), "{err}");
}

#[test]
fn damp_at_zero_is_identity() {
    let dir = TempDir::new().unwrap();
    let (input, out) = (path(&dir, "s.txt"), path(&dir, "d.txt"));
    run_ok(&[
        "prepare",
        "--d",
        "3",
        "--amps",
        "0.2771,0.5420,0.7934",
        "--out",
        &input,
    ]);
    let text = run_ok(&["damp", "--input", &input, "--gamma-t", "0", "--out", &out]);
    assert_eq!(value_after(&text, "survival probability"), 1.0);
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&out).unwrap());
}

#[test]
fn damp_counts_derived_state_gains_entanglement() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "t2.txt");
    let prep = run_ok(&["prepare", "--table2", "--out", &input]);
    let c0 = value_after(&prep, "concurrence");
    let text = run_ok(&[
        "damp",
        "--input",
        &input,
        "--gamma-t",
        "1.0",
        "--convention",
        "table2",
    ]);
    assert!(text.contains("convention table2"));
    let c1 = value_after(&text, "# concurrence");
    assert!((c1 - 0.99).abs() < 0.01 && c1 > c0, "{c0} -> {c1}");
    let p = value_after(&text, "# survival probability");
    assert!(p > 0.0 && p < 1.0);
}

#[test]
fn damp_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let (qutrit, ququart) = (path(&dir, "s.txt"), path(&dir, "q.txt"));
    run_ok(&["prepare", "--d", "3", "--uniform", "--out", &qutrit]);
    run_ok(&["prepare", "--d", "4", "--uniform", "--out", &ququart]);
    qdsim()
        .args(["damp", "--input", &qutrit, "--gamma-t", "-1"])
        .assert()
        .code(1);
    qdsim()
        .args(["damp", "--input", &ququart, "--gamma-t", "1"])
        .assert()
        .code(1);
}

#[test]
fn trajectories_need_a_seed_and_are_reproducible() {
    qdsim().args(["trajectories", "--gamma-t", "1"]).assert().code(1);
    let args = [
        "trajectories",
        "--gamma-t",
        "1",
        "--n-trajectories",
        "2000",
        "--seed",
        "5",
    ];
    let a = run_ok(&args);
    assert_eq!(a, run_ok(&args));
    assert!(value_after(&a, "# trace distance to master") < 0.05);
}

#[test]
fn pattern_and_fit_round_trip() {
    let dir = TempDir::new().unwrap();
    let scan = path(&dir, "scan.txt");
    run_ok(&[
        "pattern",
        "--p",
        "0.375",
        "--noise",
        "noiseless",
        "--at-xpi",
        "--out",
        &scan,
    ]);
    let fit = run_ok(&["fit-p", "--scan", &scan]);
    assert!((value_after(&fit, "p ") - 0.375).abs() <= 1e-4);
    qdsim().args(["pattern", "--p", "0.375"]).assert().code(1);
    let tsv = run_ok(&["pattern", "--p", "0.5", "--seed", "3", "--format", "tabular"]);
    assert!(tsv.starts_with("position_mm\tcounts\n"));
    assert_eq!(tsv.lines().count(), 42);
}

fn table_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn table1_noiseless_recovers_every_film() {
    let text = run_ok(&["reproduce-table1", "--noiseless", "--format", "tabular"]);
    let rows = table_rows(&text);
    assert_eq!(rows.len(), 9);
    for row in rows {
        let predicted: f64 = row[4].parse().unwrap();
        assert!((row[0].parse::<f64>().unwrap() - predicted).abs() <= 1e-4);
        assert!((row[2].parse::<f64>().unwrap() - predicted).abs() <= 1e-4);
        assert_eq!(row[5], "PASS");
    }
}

#[test]
fn table1_with_noise_is_seeded() {
    let run = |seed: &str| {
        qdsim()
            .args(["reproduce-table1", "--seed", seed, "--format", "tabular"])
            .output()
            .unwrap()
    };
    let (a, b) = (run("11"), run("11"));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, run("12").stdout);
    // A row outside 3 sigma exits with 2 but still prints the full table.
    assert!(matches!(a.status.code(), Some(0) | Some(2)));
    let rows = table_rows(std::str::from_utf8(&a.stdout).unwrap());
    assert_eq!(rows.len(), 9);
    for row in rows {
        for col in [1, 3] {
            let sigma: f64 = row[col].parse().unwrap();
            assert!(sigma > 0.0 && sigma <= 0.11, "sigma {sigma}");
        }
    }
    qdsim().args(["reproduce-table1"]).assert().code(1);
}

#[test]
fn table2_matches_published_concurrences() {
    let text = run_ok(&["reproduce-table2", "--seed", "1", "--format", "tabular"]);
    let rows = table_rows(&text);
    assert_eq!(rows.len(), 9);
    let row = |gt: &str| rows.iter().find(|r| r[0] == gt).unwrap();
    assert!((row("0")[1].parse::<f64>().unwrap() - 0.862).abs() <= 0.005);
    assert!((row("0.7")[1].parse::<f64>().unwrap() - 0.962).abs() <= 0.005);
    let outlier = row("1.5");
    assert!((outlier[1].parse::<f64>().unwrap() - 0.945).abs() <= 5e-4);
    assert_eq!(outlier[6], "flagged");
    assert_eq!(rows.iter().filter(|r| r[6] == "ok").count(), 8);
}

#[test]
fn table2_rejects_malformed_counts() {
    let dir = TempDir::new().unwrap();
    let (bad, out) = (path(&dir, "bad.txt"), path(&dir, "report.txt"));
    std::fs::write(&bad, "gamma_t 0\n1 2 3\n4 5\n").unwrap();
    qdsim()
        .args(["reproduce-table2", "--seed", "1", "--counts", &bad, "--out", &out])
        .assert()
        .code(1);
    assert!(!Path::new(&out).exists());
}

#[test]
fn table2_report_file() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "report.txt");
    let stdout = run_ok(&[
        "reproduce-table2",
        "--seed",
        "2",
        "--resamples",
        "200",
        "--out",
        &out,
    ]);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# qdsim reproduce-table2\n"));
    assert!(text.contains("failed 0"));
}
