use std::fs;
use std::path::Path;
use std::process::Command;

use strarc_cli::certify::certify_trace;
use strarc_cli::plot::plot_rows;
use strarc_cli::{run_experiment, ExperimentConfig};

const SMALL: &str = r#"{
    "problems": [
        { "name": "quad", "seed": 3, "x0": 0.5,
          "generator": { "kind": "quadratic", "n": 60, "d": 4 } }
    ],
    "schemes": [
        { "method": "tr", "batching": "fixed", "batch_size": 20 },
        { "method": "arc", "batching": "fixed", "batch_size": 20 }
    ],
    "solver": { "tr": { "max_iters": 40 }, "arc": { "max_iters": 40 } },
    "seeds": [4]
}"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_json(SMALL).unwrap()
}

fn trace_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn one_problem_two_schemes_one_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(), dir.path(), Some(2)).unwrap();
    assert_eq!(out.summaries.len(), 2);
    let mut names: Vec<String> =
        fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(
        names,
        ["plotdata.csv", "quad__arc-fixed__s4.csv", "quad__tr-fixed__s4.csv", "summary.csv", "timings.csv"]
    );
}

#[test]
fn config_round_trips() {
    let cfg = small();
    assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    let default =
        ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")).unwrap();
    assert_eq!(ExperimentConfig::from_json(&default.to_json()).unwrap(), default);
}

#[test]
fn trace_rows_are_finite_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    run_experiment(&cfg, dir.path(), None).unwrap();
    for stem in ["quad__tr-fixed__s4", "quad__arc-fixed__s4"] {
        let path = dir.path().join(format!("{stem}.csv"));
        let header = csv::Reader::from_path(&path).unwrap().headers().unwrap().clone();
        assert_eq!(header.iter().collect::<Vec<_>>(), strarc_cli::run::TRACE_HEADER);
        let rows = trace_rows(&path);
        assert!(!rows.is_empty());
        for r in &rows {
            for i in (1..4).chain(8..14) {
                let v: f64 = r[i].parse().unwrap();
                assert!(v.is_finite(), "{stem}: column {} = {}", &header[i], &r[i]);
            }
            let rho: f64 = r[3].parse().unwrap();
            let success: bool = r[4].parse().unwrap();
            assert_eq!(success, rho >= 0.1 && &r[14] != "none");
        }
    }
}

#[test]
fn oracle_counts_equal_the_sum_of_sample_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(), dir.path(), None).unwrap();
    for s in &out.summaries {
        let rows = trace_rows(&dir.path().join(format!("{}__{}__s{}.csv", s.problem, s.scheme, s.seed)));
        let sum = |i: usize| rows.iter().map(|r| r[i].parse::<u64>().unwrap()).sum::<u64>();
        assert_eq!(s.f_calls, Some(2 * sum(7)));
        assert_eq!(s.grad_calls, Some(sum(5)));
        assert_eq!(s.hess_calls, Some(sum(6)));
        assert_eq!(s.iterations, Some(rows.len()));
    }
}

#[test]
fn plot_rows_cover_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small(), dir.path(), None).unwrap();
    let rows = plot_rows(dir.path()).unwrap();
    let total: usize = out.summaries.iter().map(|s| s.iterations.unwrap()).sum();
    assert_eq!(rows.len(), total);
    let mut keys: Vec<&str> = rows.iter().map(|r| r.scheme.as_str()).collect();
    keys.dedup();
    assert_eq!(keys, ["tr-fixed", "arc-fixed"]);
    assert!(rows.windows(2).all(|w| w[0].scheme != w[1].scheme || w[0].calls < w[1].calls));
}

#[test]
fn exact_full_batch_objective_is_monotone_on_success() {
    let text = r#"{
        "problems": [{ "name": "reg", "x0": 1.5, "generator": { "kind": "regression", "n": 300, "d": 5 } }],
        "schemes": [{ "method": "tr", "batching": "full", "batch_size": 300, "overrides": { "eps_h": 0.0 } }],
        "solver": { "tr": { "max_iters": 60, "eps_grad": 1e-5 } }
    }"#;
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&ExperimentConfig::from_json(text).unwrap(), dir.path(), None).unwrap();
    let rows = trace_rows(&dir.path().join("reg__tr-full__s0.csv"));
    for w in rows.windows(2) {
        let (f0, f1): (f64, f64) = (w[0][11].parse().unwrap(), w[1][11].parse().unwrap());
        if w[0][4] == *"true" {
            assert!(f1 <= f0);
        } else {
            assert_eq!(f1, f0);
        }
    }
}

#[test]
fn failed_cells_are_marked_and_others_still_run() {
    let text = r#"{
        "problems": [
            { "name": "bad", "x0": [1, 2], "generator": { "kind": "quadratic", "n": 30, "d": 3 } },
            { "name": "good", "generator": { "kind": "quadratic", "n": 30, "d": 3 } }
        ],
        "schemes": [{ "method": "arc", "batching": "full", "batch_size": 10 }],
        "solver": { "arc": { "max_iters": 20 } }
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&ExperimentConfig::from_json(text).unwrap(), dir.path(), None).unwrap();
    assert!(out.summaries[0].failed() && out.summaries[0].error.contains("x0"));
    assert!(!out.summaries[1].failed());
    assert!(!dir.path().join("bad__arc-full__s0.csv").exists());
    assert!(dir.path().join("good__arc-full__s0.csv").exists());
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn certify_reproduces_a_saved_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    run_experiment(&cfg, dir.path(), None).unwrap();
    let trace = dir.path().join("quad__arc-fixed__s4.csv");
    let res = certify_trace(&cfg, &trace, None).unwrap();
    assert!(res.trace_matches);
    assert!(res.tally["cubic_cauchy_decrease"].failed == 0);
    res.write_csv(dir.path()).unwrap();
    assert!(dir.path().join("quad__arc-fixed__s4.certify.csv").exists());
    // another seed regenerates a different trace
    assert!(!certify_trace(&cfg, &trace, Some(5)).unwrap().trace_matches);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_strarc"))
}

#[test]
fn binary_reports_malformed_configs_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"problems\": [\n    { \"name\": \"q\" }\n  ]\n}\n").unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("generator"), "{err}");
}

#[test]
fn binary_runs_certifies_and_rebuilds_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["run"]).arg(&cfg).arg("--out").arg(&out).args(["--jobs", "2", "--seed", "9"]).output();
    assert!(status.unwrap().status.success());
    assert!(out.join("quad__tr-fixed__s9.csv").exists());
    let plot = fs::read(out.join("plotdata.csv")).unwrap();
    fs::remove_file(out.join("plotdata.csv")).unwrap();
    assert!(bin().arg("plotdata").arg("--out").arg(&out).output().unwrap().status.success());
    assert_eq!(fs::read(out.join("plotdata.csv")).unwrap(), plot);
    let res = bin().arg("certify").arg(&cfg).arg(out.join("quad__tr-fixed__s9.csv")).output().unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("tr_cauchy_decrease"));
}
