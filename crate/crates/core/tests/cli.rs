use std::path::Path;
use std::process::{Command, Output};

use structured_mc::io::{ingest_matrix_csv, read_mask_csv, EmptyCellPolicy};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_structured-mc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_documents_every_subcommand() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["complete", "generate", "benchmark"] {
        assert!(text.contains(sub), "{text}");
        let sub_help = run(&[sub, "--help"]);
        assert_eq!(code(&sub_help), 0);
        let sub_text = String::from_utf8_lossy(&sub_help.stdout);
        // every flag line carries a description
        for line in sub_text.lines().filter(|l| l.trim_start().starts_with("--")) {
            let words = line.split_whitespace().count();
            assert!(words >= 3, "undocumented flag in `{sub}`: {line}");
        }
    }
}

#[test]
fn complete_fully_observed_returns_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    std::fs::write(&input, "1,2.5\n-3,4\n0.125,7\n").unwrap();
    let output = dir.path().join("out.csv");
    let out = run(&[
        "complete",
        "--input",
        p(&input),
        "--infer-mask",
        "--formulation",
        "nnm-exact",
        "--output",
        p(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "1,2.5\n-3,4\n0.125,7\n");

    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.csv.json")).unwrap()).unwrap();
    assert_eq!(diag["formulation"], "nnm-exact");
    assert_eq!(diag["observed"], 6);
    assert_eq!(diag["status"], "converged");
    for key in ["objective", "iterations", "primal_residual", "dual_residual", "rank_estimate", "solver"] {
        assert!(!diag[key].is_null(), "missing {key}");
    }
}

#[test]
fn complete_fills_missing_corner() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    std::fs::write(&input, "1,1\n1,\n").unwrap();
    let output = dir.path().join("out.csv");
    let out = run(&[
        "complete",
        "--input",
        p(&input),
        "--infer-mask",
        "--formulation",
        "nnm-exact",
        "--output",
        p(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (m, mask) = ingest_matrix_csv(&output, EmptyCellPolicy::Strict).unwrap();
    assert!(mask.is_full());
    assert!((m.get(1, 1) - 1.0).abs() < 1e-3);
}

#[test]
fn complete_with_mask_file_and_sparse_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    std::fs::write(&input, "1,2,3\n2,4,6\n3,6,9\n").unwrap();
    let mask = dir.path().join("mask.csv");
    std::fs::write(&mask, "row,col\n0,0\n0,1\n0,2\n1,0\n1,1\n2,0\n2,2\n").unwrap();
    let output = dir.path().join("low.csv");
    let sparse = dir.path().join("sparse.csv");
    let diag = dir.path().join("diag.json");
    let out = run(&[
        "complete",
        "--input",
        p(&input),
        "--mask",
        p(&mask),
        "--formulation",
        "rpca-restricted",
        "--alpha",
        "0.5",
        "--output",
        p(&output),
        "--sparse-output",
        p(&sparse),
        "--diagnostics",
        p(&diag),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(sparse.exists() && diag.exists());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&diag).unwrap()).unwrap();
    assert_eq!(v["alpha"], 0.5);
    assert_eq!(v["observed"], 7);
}

#[test]
fn complete_noisy_with_sigma_echoes_rho() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    std::fs::write(&input, "1,2,\n2,4,6\n,6,9\n").unwrap();
    let output = dir.path().join("out.csv");
    let out = run(&[
        "complete",
        "--input",
        p(&input),
        "--infer-mask",
        "--formulation",
        "nnm-noisy-reg",
        "--sigma",
        "0.1",
        "--alpha",
        "0.01",
        "--output",
        p(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.csv.json")).unwrap()).unwrap();
    let rho = v["rho"].as_f64().unwrap();
    let expected = 2.0 * 3f64.sqrt() * (7.0f64 / 9.0).sqrt() * 0.1;
    assert!((rho - expected).abs() < 1e-12);
}

#[test]
fn infeasible_flag_combinations_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    std::fs::write(&input, "1,2\n3,\n").unwrap();
    let output = dir.path().join("out.csv");
    let base = ["complete", "--input", p(&input), "--output", p(&output)];
    let cases: [&[&str]; 7] = [
        &["--infer-mask", "--formulation", "nnm-exact", "--alpha", "0.1"],
        &["--infer-mask", "--formulation", "nnm-reg"],
        &["--infer-mask", "--formulation", "nnm-noisy"],
        &["--infer-mask", "--formulation", "nnm-exact", "--rho", "0.1"],
        &["--infer-mask", "--formulation", "nnm-noisy", "--rho", "0.1", "--sigma", "0.1"],
        &["--formulation", "nnm-exact"],
        &["--infer-mask", "--formulation", "bogus"],
    ];
    for extra in cases {
        let args: Vec<&str> = base.iter().chain(extra.iter()).copied().collect();
        let out = run(&args);
        assert_eq!(code(&out), 2, "{extra:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!output.exists());
}

#[test]
fn bad_input_is_a_data_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    std::fs::write(&input, "1,2\n3,abc\n").unwrap();
    let out = run(&[
        "complete",
        "--input",
        p(&input),
        "--infer-mask",
        "--formulation",
        "nnm-exact",
        "--output",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 1, column 1"), "{err}");

    std::fs::write(&input, "1,2\n3\n").unwrap();
    let out = run(&[
        "complete",
        "--input",
        p(&input),
        "--infer-mask",
        "--formulation",
        "nnm-exact",
        "--output",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(code(&out), 3);

    let missing = run(&[
        "complete",
        "--input",
        p(&dir.path().join("nope.csv")),
        "--infer-mask",
        "--formulation",
        "nnm-exact",
        "--output",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(code(&missing), 3);
}

fn generate(dir: &Path, seed: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "generate",
        "--n1",
        "30",
        "--n2",
        "30",
        "--rank",
        "2",
        "--density-left",
        "0.3",
        "--density-right",
        "0.5",
        "--seed",
        seed,
        "--rate-zero",
        "0.2",
        "--rate-nonzero",
        "0.8",
        "--out-dir",
        p(dir),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn generate_is_deterministic_and_echoes_the_spec() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&generate(a.path(), "5", &[])), 0);
    assert_eq!(code(&generate(b.path(), "5", &[])), 0);
    for f in ["truth.csv", "mask.csv", "observed.csv", "manifest.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!((v["n1"].as_u64(), v["n2"].as_u64(), v["rank"].as_u64()), (Some(30), Some(30), Some(2)));
    assert_eq!((v["density_left"].as_f64(), v["density_right"].as_f64()), (Some(0.3), Some(0.5)));
    assert_eq!(v["seed"], 5);

    let (truth, _) = ingest_matrix_csv(&a.path().join("truth.csv"), EmptyCellPolicy::Strict).unwrap();
    let mask = read_mask_csv(&a.path().join("mask.csv"), 30, 30).unwrap();
    let (obs, obs_mask) = ingest_matrix_csv(&a.path().join("observed.csv"), EmptyCellPolicy::Mask).unwrap();
    assert_eq!(obs_mask, mask);
    for &(i, j) in mask.observed() {
        assert_eq!(obs.get(i, j), truth.get(i, j));
    }

    let c = tempfile::tempdir().unwrap();
    assert_eq!(code(&generate(c.path(), "6", &[])), 0);
    assert_ne!(
        std::fs::read(a.path().join("truth.csv")).unwrap(),
        std::fs::read(c.path().join("truth.csv")).unwrap()
    );
}

#[test]
fn generate_rejects_zero_density_and_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "generate",
        "--n1",
        "5",
        "--n2",
        "5",
        "--rank",
        "1",
        "--density-left",
        "0",
        "--density-right",
        "0.5",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
    assert!(!dir.path().join("truth.csv").exists());

    let out = generate(dir.path(), "1", &["--rate-zero", "1.5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn generated_noisy_data_round_trips_through_complete() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&generate(dir.path(), "9", &["--noise-sigma", "0.1"])), 0);
    let output = dir.path().join("completed.csv");
    let out = run(&[
        "complete",
        "--input",
        p(&dir.path().join("observed.csv")),
        "--mask",
        p(&dir.path().join("mask.csv")),
        "--formulation",
        "nnm-noisy",
        "--sigma",
        "0.1",
        "--output",
        p(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (m, _) = ingest_matrix_csv(&output, EmptyCellPolicy::Strict).unwrap();
    assert_eq!(m.shape(), (30, 30));
}

const BENCH: &str = "[generator]\nn1 = 10\nn2 = 10\nrank = 2\ndensity_left = 0.5\ndensity_right = 0.5\n\
[grid]\nzero_rates = [0.5]\nnonzero_rates = [0.5]\ntrials = 1\nseed = 4\n";

#[test]
fn benchmark_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, BENCH).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["benchmark", "--config", p(&cfg), "--out-dir", p(&out_dir), "--threads", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 2);
    for f in ["heatmap_ratio.csv", "heatmap_alpha.csv", "manifest.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn benchmark_schema_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, BENCH.replace("trials = 1", "trials = -1")).unwrap();
    let out = run(&["benchmark", "--config", p(&cfg), "--out-dir", p(dir.path())]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.trials"));
}

#[test]
fn benchmark_heatmap_corner_favours_regularization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig.toml");
    std::fs::write(
        &cfg,
        "[generator]\nn1 = 30\nn2 = 30\nrank = 2\ndensity_left = 0.3\ndensity_right = 0.5\n\
         [grid]\nzero_rates = [0.1, 0.9]\nnonzero_rates = [0.1, 0.9]\ntrials = 3\nseed = 2\n",
    )
    .unwrap();
    let out = run(&["benchmark", "--config", p(&cfg), "--out-dir", p(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let heat = std::fs::read_to_string(dir.path().join("heatmap_ratio.csv")).unwrap();
    let lines: Vec<&str> = heat.lines().collect();
    assert_eq!(lines[0], "rate_zero\\rate_nonzero,0.1,0.9");
    let low_zero: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(low_zero[0], "0.1");
    let corner: f64 = low_zero[2].parse().unwrap();
    assert!(corner < 1.0, "{heat}");
}
