use std::path::Path;
use std::process::{Command, Output};

fn gml(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gml")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn emd_with_uniform_metric_and_plan() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "r.txt", "0.5,0.3,0.2\n");
    write(dir.path(), "c.txt", "0.2 0.3 0.5\n");
    let out = stdout(&gml(&["emd", "r.txt", "c.txt", "--plan"], dir.path()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[..2], ["emd", "0.3"]);
    assert_eq!(lines.len(), 2 + 1 + 3);
}

#[test]
fn emd_with_given_metric() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "r.txt", "1,0\n");
    write(dir.path(), "c.txt", "0,1\n");
    write(dir.path(), "m.csv", "0,0.25\n0.25,0\n");
    let out = stdout(&gml(&["emd", "r.txt", "c.txt", "--metric", "m.csv"], dir.path()));
    assert_eq!(out, "emd\n0.25\n");
}

#[test]
fn project_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "h.csv", "0,3,1\n3,0,1\n1,1,0\n");
    let out = stdout(&gml(&["project", "h.csv", "--tol", "1e-13"], dir.path()));
    assert_eq!(out.lines().next().unwrap(), "0,2.66666666667,1.33333333333");
    let unit = stdout(&gml(&["project", "h.csv", "--unit-ball"], dir.path()));
    let norm: f64 = unit
        .lines()
        .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    assert!((norm - 1.0).abs() < 1e-10);
}

#[test]
fn synth_init_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "cfg.toml", "[synth]\nd = 8\nn_blocks = 2\nn_per_class = 8\nn_test_per_class = 6\n\n[gml]\np_max = 2\nq_max = 15\nmin_inner_base = 5.0\n");
    stdout(&gml(&["synth", "--config", "cfg.toml", "--seed", "3", "-o", "data.json"], p));
    let init = stdout(&gml(&["init", "data.json", "--kind", "independence", "--k", "3", "--mix", "0.5"], p));
    assert_eq!(init.lines().count(), 8);
    stdout(&gml(
        &["train", "data.json", "--config", "cfg.toml", "--k", "2", "--init", "uniform", "--trace", "trace.csv", "-o", "m.csv"],
        p,
    ));
    let trace = std::fs::read_to_string(p.join("trace.csv")).unwrap();
    assert!(trace.starts_with('#'));
    assert_eq!(trace.lines().nth(1).unwrap(), "p,q,t,z_in,z_out,step_norm");
    // Training from a metric file works too.
    stdout(&gml(&["train", "data.json", "--config", "cfg.toml", "--init", "m.csv", "-o", "m2.csv"], p));
    let curves = stdout(&gml(&["eval", "data.json", "--metric", "m.csv", "--kappa-max", "5"], p));
    assert_eq!(curves.lines().count(), 6);
    assert_eq!(curves.lines().next().unwrap(), "kappa,recall,error");
    let l1 = stdout(&gml(&["eval", "data.json", "--distance", "l1", "--kappa-max", "3"], p));
    let emd = stdout(&gml(&["eval", "data.json", "--kappa-max", "3"], p));
    assert_eq!(l1, emd);
}

#[test]
fn run_writes_identical_reports_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(
        p,
        "cfg.toml",
        "seeds = [0, 1, 2]\nkappas = [1, 3]\n[synth]\nd = 6\nn_blocks = 2\nn_per_class = 6\nn_test_per_class = 4\n[gml]\np_max = 2\nq_max = 10\nmin_inner_base = 5.0\n",
    );
    stdout(&gml(&["run", "--config", "cfg.toml", "--out", "a", "--workers", "1"], p));
    stdout(&gml(&["run", "--config", "cfg.toml", "--out", "b", "--workers", "3"], p));
    for f in ["report.csv", "objectives.csv"] {
        let a = std::fs::read(p.join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(p.join("b").join(f)).unwrap(), "{f} differs");
    }
    assert!(p.join("a/manifest.json").exists());
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "bad.txt", "0.5,0.6\n");
    write(p, "ok.txt", "0.5,0.5\n");
    for args in [
        vec!["emd", "bad.txt", "ok.txt"],
        vec!["emd", "missing.txt", "ok.txt"],
        vec!["project", "ok.txt"],
        vec!["run", "--config", "missing.toml", "--out", "x"],
        vec!["init", "ok.txt", "--kind", "nonsense"],
    ] {
        let o = gml(&args, p);
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(!o.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
    write(p, "typo.toml", "[gml]\nphase_count = 3\n");
    let o = gml(&["run", "--config", "typo.toml", "--out", "x"], p);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("gml: error"));
}
