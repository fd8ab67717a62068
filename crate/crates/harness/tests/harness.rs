use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use hcspinn::problems::{Provenance, ReferenceSolution};
use hcspinn_harness::artifacts::{emit_artifacts, ledger_line, LEDGER_HEADER};
use hcspinn_harness::config::{config_files, problem_name};
use hcspinn_harness::run::{align_reference, builtin_reference, comparison_table};
use hcspinn_harness::{compare_modes, execute, ingest_reference, relative_l2, run_benchmark, EvalGrid, RunConfig};

fn tiny(problem: &str, extra: &str, out: &Path) -> RunConfig {
    let text = format!(
        "problem = {problem}\n{extra}\nwidth = 8\ndepth = 2\nn_pde = 300\nbatch_size = 32\nn_interface = 8\n\
         adam_iters = 20\nlbfgs_iters = 5\noutput = {}\n",
        out.display()
    );
    RunConfig::from_text(&text).unwrap()
}

fn defaults_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("defaults")
}

#[test]
fn untrained_run_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny("advection", "nt = 4\nadam_iters = 0\nlbfgs_iters = 0", &dir.path().join("a"));
    let report = run_benchmark(&cfg).unwrap();
    assert!(report.failure.is_none());
    assert_eq!(report.prediction.len(), 256 * 201);
    assert!(report.relative_l2.unwrap() > 0.0);
    assert_eq!(report.interface_residuals.len(), 3);
    assert!(report.interface_residuals.iter().all(|r| *r < 1e-10));
    for f in ["config.txt", "solution.csv", "abs_error.csv", "loss_history.csv", "windows.csv", "interface.csv"] {
        assert!(cfg.output_dir.join(f).exists(), "{f}");
    }
    let ledger = std::fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    let mut lines = ledger.lines();
    assert_eq!(lines.next(), Some(LEDGER_HEADER));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields.len(), 6);
    assert_eq!(&fields[..3], ["advection_c30", "4", "hard"]);
    assert_eq!(fields[5], "1");
}

#[test]
fn perfect_prediction_has_zero_error_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny("wave", "c = 1\nnt = 2\nadam_iters = 0\nlbfgs_iters = 0", &dir.path().join("w"));
    let mut report = execute(&cfg, &mut |_| {}).unwrap();
    report.prediction = report.reference.as_ref().unwrap().values.clone();
    report.relative_l2 = Some(relative_l2(&report.prediction, report.reference.as_ref().unwrap()).unwrap());
    assert!(report.abs_error().unwrap().iter().all(|e| *e == 0.0));
    emit_artifacts(&report, &cfg.output_dir).unwrap();
    let text = std::fs::read_to_string(cfg.output_dir.join("abs_error.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("t,x,abs_error"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
    assert!(ledger_line(&report).starts_with("wave_c1,2,hard,0e0,"));
}

#[test]
fn identical_seeds_give_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let a = tiny("kdv", "nt = 2", &dir.path().join("a"));
    let b = tiny("kdv", "nt = 2", &dir.path().join("b"));
    run_benchmark(&a).unwrap();
    run_benchmark(&b).unwrap();
    for f in ["solution.csv", "abs_error.csv", "loss_history.csv", "windows.csv", "interface.csv"] {
        let x = std::fs::read(a.output_dir.join(f)).unwrap();
        let y = std::fs::read(b.output_dir.join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn jerk_runs_write_phase_space() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny("jerk", "nt = 2\nbatch_type = FB\nn_pde = 50", &dir.path().join("j"));
    let report = run_benchmark(&cfg).unwrap();
    assert_eq!(report.prediction.len(), 2001);
    let text = std::fs::read_to_string(cfg.output_dir.join("phase_space.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("t,x,x_t,x_tt"));
    assert_eq!(text.lines().count(), 2002);
    // initial state (0, 1, 1)
    assert_eq!(text.lines().nth(1), Some("0,0,1,1"));
}

#[test]
fn comparison_runs_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny("advection", "nt = 2", &dir.path().join("cmp"));
    let cmp = compare_modes(&cfg).unwrap();
    assert_eq!(cmp.hard.config.mode.as_str(), "hard");
    assert_eq!(cmp.soft.config.mode.as_str(), "soft");
    assert!(cmp.hard.interface_residuals[0] < 1e-10);
    assert!(cmp.soft.interface_residuals[0] > 0.0);
    let table = comparison_table(&[cmp.row()]);
    assert_eq!(table.lines().next(), Some("nt,hcs_error,hcs_time,scs_error,scs_time"));
    assert!(table.lines().nth(1).unwrap().starts_with("2,"));
    assert!(cfg.output_dir.join("hard/solution.csv").exists());
    assert!(cfg.output_dir.join("soft/solution.csv").exists());
}

#[test]
fn ingested_references_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny("allen_cahn", "", &dir.path().join("x"));
    let spec = cfg.problem_spec().unwrap();
    let grid = EvalGrid::for_problem(&spec);
    let oracle = builtin_reference(&spec, &grid).unwrap();
    assert_eq!(oracle.provenance, Provenance::Oracle);
    let path = dir.path().join("ac.txt");
    oracle.save(&path).unwrap();
    let back = ingest_reference(&path).unwrap();
    assert_eq!(back.provenance, Provenance::Ingested);
    assert_eq!(back.values, oracle.values);
    assert_eq!(back.grid_x, oracle.grid_x);
    assert_eq!(back.grid_t, oracle.grid_t);

    let pred: Vec<f64> = oracle.values.iter().map(|v| v * 1.01 + 1e-3).collect();
    let a = relative_l2(&pred, &oracle).unwrap();
    let b = relative_l2(&pred, &align_reference(back, &spec, &grid).unwrap()).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn malformed_grid_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let good = ReferenceSolution::new("kdv", vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 2.0, 3.0, 4.0], Provenance::Oracle)
        .unwrap()
        .to_text();
    let nan = good.replacen("3e0", "NaN", 1);
    let p = dir.path().join("nan.txt");
    std::fs::write(&p, &nan).unwrap();
    let err = ingest_reference(&p).unwrap_err().to_string();
    assert!(err.contains("line 5"), "{err}");

    let short = good.replacen("nt_grid=2", "nt_grid=3", 1);
    let p = dir.path().join("short.txt");
    std::fs::write(&p, &short).unwrap();
    assert!(ingest_reference(&p).is_err());

    let cfg = tiny("advection", "", &dir.path().join("r"));
    let spec = cfg.problem_spec().unwrap();
    let wrong = ReferenceSolution::from_text(&good).unwrap();
    assert!(align_reference(wrong, &spec, &EvalGrid::for_problem(&spec)).is_err());
}

#[test]
fn every_table_row_has_a_config() {
    let files = config_files(&defaults_dir()).unwrap();
    assert_eq!(files.len(), 44);
    let mut seen = HashSet::new();
    for f in &files {
        let cfg = RunConfig::load(f, &[]).unwrap();
        let key = (cfg.label(), problem_name(&cfg.problem));
        assert!(seen.insert(key), "{}", f.display());
        let s = &cfg.train.schedule;
        let row = (cfg.train.network.depth, cfg.train.network.width, cfg.train.sampling.batch_size, s.adam_step, s.adam_iters, s.lbfgs_max_iters, cfg.train.weights.lambda_i);
        let expected = match problem_name(&cfg.problem) {
            "advection" => (4, 32, 128, 5e-3, 10_000, 1000, 1.0),
            "wave" => (4, 32, 128, 5e-3, 20_000, 1000, 1.0),
            "allen_cahn" => (4, 32, 256, 5e-3, 20_000, 200, 100.0),
            "kdv" => (4, 32, 256, 2e-3, 20_000, 200, 100.0),
            _ => (3, 16, 2001, 2e-3, 10_000, 300, 10.0),
        };
        assert_eq!(row, expected, "{}", f.display());
    }
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hcspinn");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "problem = advection\nnt = zero\n").unwrap();
    let code = Command::new(bin).args(["run", "-q", "-c"]).arg(&bad).status().unwrap().code();
    assert_eq!(code, Some(2));

    let missing = Command::new(bin).args(["ingest"]).arg(dir.path().join("nope.txt")).status().unwrap().code();
    assert_eq!(missing, Some(3));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let code = Command::new(bin)
        .args(["run", "-q", "--problem", "advection", "--adam-iters", "0", "--lbfgs-iters", "0", "--set", "n_pde=200", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));

    let ok = Command::new(bin)
        .args(["run", "-q", "--problem", "wave", "--nt", "2", "--adam-iters", "0", "--lbfgs-iters", "0", "--set", "n_pde=200", "--out"])
        .arg(dir.path().join("ok"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("relative_l2"));
}
