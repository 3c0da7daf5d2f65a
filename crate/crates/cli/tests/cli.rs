use std::fs;
use std::process::{Command, Output};

fn ksk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksk"))
        .args(args)
        .env("KSK_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eval_prints_header_and_value() {
    let o = ksk(&["eval", "--d", "1", "--alpha", "1.5", "--t", "1", "--z", "2,3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.starts_with("# ksk "));
    assert!(s.contains("# eval.z=2,3\n"));
    let last = s.lines().last().unwrap();
    let p: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert!(p > 0.0 && p < 0.1);
}

#[test]
fn negative_coordinates_parse() {
    let o = ksk(&["eval", "--alpha", "1", "--z", "-1,-0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let o = ksk(&["eval", "--alpha", "2.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha must lie in (0,2)"));
    assert_eq!(ksk(&["eval", "--kappa0", "2", "--kappa1", "1"]).status.code(), Some(2));
    assert_eq!(ksk(&["eval", "--set", "kernel.colour=red"]).status.code(), Some(2));
    assert_eq!(ksk(&["launch"]).status.code(), Some(2));
    assert_eq!(ksk(&["eval", "--bogus", "1"]).status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "kernel.alpha=0.5\nrun.seed=9\nbounds.z=3,1\n").unwrap();
    let o = ksk(&["bounds", "--config", cfg.to_str().unwrap(), "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("# kernel.alpha=1\n"));
    assert!(s.contains("kernel.alpha:flag"));
    assert!(s.contains("run.seed:file"));
    // β = 2 at z = (3, 1): (1+√10)^{-3}/3
    let n: f64 = s
        .lines()
        .find(|l| l.starts_with("n_beta,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((n - 4.623e-3).abs() < 1e-6);
}

#[test]
fn simulate_one_path_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ksk(&["simulate", "--alpha", "1.5", "--paths", "1", "--seed", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("simulate_alpha1.5_seed1.csv")).unwrap();
    assert!(csv.starts_with("# ksk "));
    assert!(csv.contains("# run.seed=1\n"));
    let svg = fs::read_to_string(dir.path().join("simulate_alpha1.5_seed1.svg")).unwrap();
    assert!(svg.starts_with("<!--\nksk "));
    // same seed, same file
    let again = tempfile::tempdir().unwrap();
    ksk(&["simulate", "--alpha", "1.5", "--paths", "1", "--seed", "1", "--out", again.path().to_str().unwrap()]);
    let csv2 = fs::read_to_string(again.path().join("simulate_alpha1.5_seed1.csv")).unwrap();
    let body = |s: &str| s.lines().filter(|l| !l.starts_with("# run.out")).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&csv), body(&csv2));
}

#[test]
fn envelope_figure_writes_three_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let o = ksk(&[
        "figure", "--kind", "envelope", "--alpha", "1", "--d", "1", "--nodes", "1024,512", "--extent", "32,16",
        "--window", "10,5", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".svg")).count(), 3);
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv")).count(), 1);
}

#[test]
fn verify_quick_subset() {
    let dir = tempfile::tempdir().unwrap();
    let o = ksk(&[
        "verify", "--suite", "chord_lemma,grube_d1", "--quick", "true", "--seed", "7", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("chord_lemma_seed7.json").exists());
    assert!(dir.path().join("grube_d1_seed7.json").exists());
    assert_eq!(ksk(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn grid_writes_csv_and_binary() {
    let dir = tempfile::tempdir().unwrap();
    let o = ksk(&[
        "grid", "--alpha", "1", "--nodes", "256,128", "--extent", "8,4", "--tail-tol", "1e-4", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("grid_d1_alpha1_t1.bin").exists());
    let csv = fs::read_to_string(dir.path().join("grid_d1_alpha1_t1.csv")).unwrap();
    assert!(csv.contains("x1,v1,value"));
    // too coarse for the tail tolerance: a configuration error
    let o = ksk(&["grid", "--alpha", "1", "--nodes", "8,8", "--extent", "2,2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
