use std::path::Path;
use std::process::{Command, Output};

fn rasim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rasim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn run_writes_one_row_per_point_and_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("power.csv");
    let o = rasim(&[
        "run",
        "power_sweep",
        "--trials",
        "2",
        "--seed",
        "9",
        "--schemes",
        "fixed_orientation,isotropic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(rows.len(), 5 * 2);
    let ok = col(&header, "ok_trials");
    assert!(rows.iter().all(|r| r[ok] == "2"));
}

#[test]
fn run_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "schema_version = 1\n[experiment]\ngrid = [0.0, 0.5]\n[array_wise]\ngrid = 8\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = rasim(&[
            "run",
            "theta_max_sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--trials",
            "3",
            "--seed",
            "4",
            "--schemes",
            "array_wise,random_orientation",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn run_prints_to_stdout_without_out() {
    let o = rasim(&["run", "ula_sweep"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("experiment,n_x,series,"));
    assert!(text.contains("ra_closed_form"));
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 2\n").unwrap();
    let missing = dir.path().join("missing.toml");
    for args in [
        vec!["run", "no_such_experiment"],
        vec!["run", "power_sweep", "--config", bad.to_str().unwrap()],
        vec!["run", "power_sweep", "--config", missing.to_str().unwrap()],
        vec!["run", "power_sweep", "--schemes", "bogus"],
        vec!["run", "power_sweep", "--trials", "0"],
        vec!["single", "ula", "--nx", "5", "--theta-max", "120"],
        vec!["single", "ula", "--nx", "5", "--ny", "3"],
        vec!["single", "upa", "--nx", "0"],
        vec!["validate", "--criterion", "99"],
        vec!["frobnicate"],
    ] {
        let o = rasim(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn single_ula_columns_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ula.csv");
    let o = rasim(&[
        "single",
        "ula",
        "--nx",
        "201",
        "--phi",
        "-40",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(rows.len(), 2);
    let v = |r: &Vec<String>, c: &str| r[col(&header, c)].parse::<f64>().unwrap();
    for r in &rows {
        let exact = v(r, "exact_sum_snr");
        assert!((v(r, "closed_form_snr") / exact - 1.0).abs() < 0.02);
        assert!((v(r, "quadrature_snr") / exact - 1.0).abs() < 0.02);
        assert!(r[col(&header, "lower_bound_snr")].is_empty());
    }
    assert!(v(&rows[0], "exact_sum_snr") > v(&rows[1], "exact_sum_snr"));
}

#[test]
fn single_upa_bounds_bracket_the_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("upa.csv");
    let o = rasim(&[
        "single",
        "upa",
        "--nx",
        "16",
        "--p",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    let v = |r: &Vec<String>, c: &str| r[col(&header, c)].parse::<f64>().unwrap();
    for r in &rows {
        let q = v(r, "quadrature_snr");
        assert!(v(r, "lower_bound_snr") <= q && q <= v(r, "upper_bound_snr"));
        // Closed forms cover the cosine pattern only.
        assert!(r[col(&header, "closed_form_snr")].is_empty());
    }
}

#[test]
fn validate_reports_selected_criteria() {
    let o = rasim(&["validate", "--criterion", "4", "--criterion", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("[PASS]  4 power_conservation"));
    assert!(lines[1].starts_with("[PASS]  3 upa_bounds"));
    assert_eq!(lines[2], "2 passed, 0 failed");
}
