use std::process::{Command, Output};

fn ifem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifem"))
        .args(args)
        .env_remove("IFEM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_reports_errors_and_statistics() {
    let o = ifem(&["solve", "--method", "hybrid", "--n", "20", "--alpha", "1", "--beta", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for key in ["e0h", "e0inf", "e1h", "multiplier", "constraint"] {
        assert!(out.contains(key), "{out}");
    }
}

#[test]
fn patch_test_flag_reproduces_linear_solution() {
    let o = ifem(&["solve", "--method", "standard", "--n", "10", "--alpha", "1", "--beta", "1", "--patch-test"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("max nodal error")).unwrap().to_string();
    let err: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(err <= 1e-9);
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let o = ifem(&["solve", "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n:"));

    let o = ifem(&["convergence", "--n-list", "10,30"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n-list"));

    let o = ifem(&["solve", "--beta", "-3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta"));

    let o = ifem(&["solve", "--method", "mixed"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("method"));

    let o = ifem(&["solve", "--norm-variant", "l2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_ifem"))
        .args(["mesh-info", "--n", "4"])
        .env("IFEM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("IFEM_THREADS"));
}

#[test]
fn geometry_failure_exits_with_three() {
    // circumcircle of one grid triangle: all three vertices lie on it
    let r = (0.125f64).sqrt().to_string();
    let o = ifem(&["mesh-info", "--n", "4", "--cx", "0.25", "--cy", "0.25", "--r1", &r]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn solver_failure_exits_with_four() {
    let o = ifem(&["solve", "--n", "10", "--outer-tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn verify_passes_on_the_default_suite() {
    let o = ifem(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}\n{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(!out.contains("FAIL"));
    let eq = out.lines().find(|l| l.contains("N=10 hybrid = fitted")).unwrap();
    assert!(eq.starts_with("PASS"));
}

#[test]
fn verify_skips_the_dense_oracle_on_fine_meshes() {
    let o = ifem(&["verify", "--n", "40"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("SKIP N=40 dense oracle"));
}

#[test]
fn mesh_info_reports_snapped_points() {
    let count = |args: &[&str]| -> usize {
        let o = ifem(args);
        assert_eq!(o.status.code(), Some(0));
        let out = stdout(&o);
        let line = out.lines().find(|l| l.starts_with("snapped vertices")).unwrap();
        line.split_whitespace().last().unwrap().parse().unwrap()
    };
    assert_eq!(count(&["mesh-info", "--n", "10"]), 0);
    assert_eq!(count(&["mesh-info", "--n", "20"]), 12);
    assert_eq!(count(&["mesh-info", "--n", "10", "--cx", "0.01"]), 0);
}

#[test]
fn single_refinement_has_empty_rates() {
    let o = ifem(&["convergence", "--n-list", "10", "--method", "fitted", "--beta", "10", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("method,p,N,e0h,rate0h,e0inf,rateinf,e1h,rate1h"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[4], "");
    assert_eq!(row[8], "");
}

#[test]
fn convergence_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = ifem(&["convergence", "--n-list", "10,20,40", "--out", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (std::fs::read(&path).unwrap(), std::fs::read(path.with_extension("md")).unwrap())
    };
    let (a, md) = run("a.csv");
    let (b, _) = run("b.csv");
    assert_eq!(a, b);
    // three methods, two coefficient ratios, three refinements
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 3 * 2 * 3);
    assert!(String::from_utf8(md).unwrap().contains("### hybrid method, p = 0.01"));
}

#[test]
fn dumped_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let cfg = cfg.to_str().unwrap();
    let args = ["--method", "fitted", "--n-list", "10,20", "--beta", "100", "--cx", "0.01", "--format", "csv"];
    let mut first = vec!["convergence"];
    first.extend(args);
    first.extend(["--dump-config", cfg]);
    let a = ifem(&first);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = ifem(&["convergence", "--config", cfg]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    assert_eq!(a.stdout, b.stdout);

    // flags take precedence over the file
    let c = ifem(&["convergence", "--config", cfg, "--beta", "10"]);
    assert!(stdout(&c).contains("fitted,0.1,10,"));
}

#[test]
fn solution_dump_lists_every_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.txt");
    let o = ifem(&["solve", "--n", "8", "--method", "fitted", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 81);
}
