use std::path::PathBuf;
use std::process::{Command, Output};

fn spec(name: &str) -> String {
    format!("{}/specs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projmetric"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of `key` in a text-format report.
fn value<'a>(report: &'a str, key: &str) -> Option<&'a str> {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
}

fn number(report: &str, key: &str) -> f64 {
    value(report, key)
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn analyze_flat_metric() {
    let o = run(&["analyze", &spec("flat.spec")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout(&o);
    assert_eq!(value(&r, "flat"), Some("true"));
    for k in ["K0", "K1", "K2", "K3"] {
        assert_eq!(value(&r, k), Some("0"), "{k}");
    }
    assert_eq!(value(&r, "probe.0.K"), Some("[0, 0, 0, 0]"));
}

#[test]
fn analyze_normal_form_2a() {
    let o = run(&["analyze", &spec("form_2a.spec"), "--probe", "0.5,0.1", "--probe", "1.5,-0.7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout(&o);
    assert_eq!(value(&r, "flat"), Some("false"));
    assert_eq!(value(&r, "K1"), Some("0.5"));
    for n in 0..2 {
        let k = value(&r, &format!("probe.{n}.K")).unwrap();
        assert_eq!(k.split(", ").nth(1), Some("0.5"), "{k}");
    }
    let x: f64 = 0.5;
    assert!((number(&r, "probe.0.R") - (-3.0 * x).exp()).abs() < 1e-12);
}

#[test]
fn analyze_input_errors() {
    let o = run(&["analyze", &spec("degenerate.spec")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("degenerate metric"), "{}", stderr(&o));

    let bad = tmp("bad_syntax.spec");
    std::fs::write(&bad, "E = 1\nG = 1 + (x\n").unwrap();
    let o = run(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2, column"), "{}", stderr(&o));

    let o = run(&["analyze", &spec("form_2a.spec"), "--probe", "3,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("probe (3, 0) lies outside the domain"), "{}", stderr(&o));

    let o = run(&["analyze", "no/such/file.spec"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn symmetry_checks() {
    let o = run(&["symmetry", &spec("form_2a.spec")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(number(&stdout(&o), "residual.max_abs") <= 1e-8);

    let o = run(&["symmetry", &spec("half_connection.spec")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(number(&stdout(&o), "residual.max_abs") <= 1e-8);

    // the field may come from a separate file
    let o = run(&["symmetry", &spec("koenigs.spec"), "--field", &spec("koenigs_shear.spec")]);
    assert_eq!(o.status.code(), Some(1));
    let r = stdout(&o);
    assert!(number(&r, "residual.max_abs") > 0.1);
    assert_eq!(value(&r, "symmetry"), Some("false"));
    assert!(value(&r, "input.field.sha256").is_some());
}

#[test]
fn flatness_of_connections() {
    let o = run(&["flatness", "--abcd", "0", "2", "0", "-1.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&stdout(&o), "flat"), Some("true"));
    assert_eq!(value(&stdout(&o), "symmetry_dimension"), Some("=8"));

    let o = run(&["flatness", "--abcd", "0", "0.5", "0", "1"]);
    assert_eq!(value(&stdout(&o), "flat"), Some("false"));
    assert_eq!(value(&stdout(&o), "symmetry_dimension"), Some("<8"));

    let o = run(&["flatness", &spec("half_connection.spec")]);
    assert_eq!(value(&stdout(&o), "flat"), Some("true"));
}

#[test]
fn mobility_dimensions() {
    for (abcd, dim) in [
        (["0", "0", "1", "0"], "0"),
        (["1", "0", "0", "1"], "0"),
        (["0", "-1", "0", "1"], "2"),
    ] {
        let mut args = vec!["mobility", "--abcd"];
        args.extend(abcd);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let r = stdout(&o);
        assert_eq!(value(&r, "dimension"), Some(dim), "{abcd:?}");
        assert_eq!(r.lines().filter(|l| l.starts_with("basis.")).count(), dim.parse().unwrap());
    }
    let o = run(&["mobility", "--abcd", "0", "-1", "0", "1", "--case", "1", "--alpha", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("needs 3 --alpha values"));
}

#[test]
fn catalog_entries() {
    let o = run(&["catalog", "--list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&stdout(&o), "form.2c.parameters"), Some("a, c, eps1, eps2"));

    let o = run(&["catalog", "2c:a=1,c=1,eps1=1,eps2=1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = stdout(&o);
    assert!((number(&r, "origin.R") - 0.5).abs() < 1e-10);
    assert_eq!(value(&r, "killing_field"), Some("(0, 1)"));

    let o = run(&["catalog", "1a:b=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("b ∉ {-2, 0, 1} violated"), "{}", stderr(&o));

    let o = run(&["catalog", "3z"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn distinguish_forms() {
    let o = run(&["distinguish", "2a", "2b"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("distinct: I/(9R^3)"));

    let o = run(&["distinguish", "1b:a=2,b=-1", "1b:a=2,b=-1"]);
    assert_eq!(value(&stdout(&o), "verdict"), Some("identical"));

    let o = run(&["distinguish", "1a:b=3", "1a:b=-1", "--format", "keyvalue"]);
    assert!(stdout(&o).contains("kind = distinct"), "{}", stdout(&o));
}

#[test]
fn geodesic_integrals() {
    let o = run(&["geodesic", &spec("koenigs.spec")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = stdout(&o);
    for f in ["g", "F0", "F1", "F2"] {
        assert!(number(&r, &format!("drift.{f}")) <= 1e-6, "{f}");
    }
    assert_eq!(r.lines().filter(|l| l.starts_with("geodesic.")).count(), 10);

    let o = run(&["geodesic", &spec("superintegrable.spec"), "--trials", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(value(&stdout(&o), "conserved"), Some("true"));

    let broken = tmp("broken_integral.spec");
    let text = std::fs::read_to_string(spec("superintegrable.spec")).unwrap()
        + "integral W = y*exp(3*x)/2 ; exp(3*x)/2 ; -D*y*exp(x)\n";
    std::fs::write(&broken, text).unwrap();
    let o = run(&["geodesic", broken.to_str().unwrap(), "--trials", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(number(&stdout(&o), "drift.W") > 1e-3);
}

#[test]
fn geodesic_trajectory_table() {
    let path = tmp("trajectory.txt");
    let o = run(&[
        "geodesic",
        &spec("koenigs.spec"),
        "--state",
        "0.1",
        "-0.2",
        "0.3",
        "0.1",
        "--time",
        "1",
        "--every",
        "100",
        "--trajectory",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = std::fs::read_to_string(&path).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("# t x y vx vy g F0 F1 F2"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.len() == 9));
    assert_eq!(rows[0][..5], [0.0, 0.1, -0.2, 0.3, 0.1]);
    assert!((rows[10][0] - 1.0).abs() < 1e-12);
}

#[test]
fn reports_are_reproducible() {
    let a = tmp("report_a.txt");
    let b = tmp("report_b.txt");
    for out in [&a, &b] {
        let o = run(&[
            "geodesic",
            &spec("koenigs.spec"),
            "--trials",
            "3",
            "--seed",
            "11",
            "--format",
            "keyvalue",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
    }
    let a = std::fs::read_to_string(a).unwrap();
    let b = std::fs::read_to_string(b).unwrap();
    assert!(a.starts_with("# generated at unix time "));
    let body = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&a), body(&b));
    for key in ["tool = projmetric ", "seed = 11", "tol = ", "input.spec.sha256 = "] {
        assert!(a.contains(key), "{key}");
    }
}

#[test]
fn verify_reports_every_criterion() {
    let o = run(&["verify", "--format", "keyvalue"]);
    let r = stdout(&o);
    let statuses: Vec<&str> = (1..=9)
        .map(|n| {
            r.lines()
                .find_map(|l| l.strip_prefix(&format!("criterion.{n}.status = ")))
                .expect("status line")
        })
        .collect();
    let failed = statuses.iter().filter(|s| **s == "FAIL").count();
    // exit status follows the suite: nonzero on any failure
    assert_eq!(o.status.code(), Some(if failed == 0 { 0 } else { 1 }));
    assert!(r.contains(&format!("passed = {}/9", 9 - failed)));
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", &spec("flat.spec"), "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}
