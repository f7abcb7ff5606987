//! End-to-end tests driving the compiled binary: exit codes, report text,
//! output files, and byte-level reproducibility of seeded runs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ghom::estimate::{sample_gaussian, RngSeed};
use ghom::ggm::{model_from_precision, Partition};
use ghom::matrix::SymMatrix;

const GROUPED_OMEGA_CSV: &str = "1,0.5,0.5,0\n0.5,1,0.5,0.5\n0.5,0.5,1,0.5\n0,0.5,0.5,1\n";
const BRIDGE_OMEGA_CSV: &str = "1,0.5,0,0\n0.5,1,0.4,0.3\n0,0.4,1,0.5\n0,0.3,0.5,1\n";
const THREE_CLUSTERS_JSON: &str = "[[1],[2,3],[4]]";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

/// The four-variable grouped fixture sampled at the canonical data seed.
fn grouped_fixture_csv(n: usize, seed: u64) -> String {
    let omega = SymMatrix::new(&[
        vec![1.0, 0.5, 0.5, 0.0],
        vec![0.5, 1.0, 0.5, 0.5],
        vec![0.5, 0.5, 1.0, 0.5],
        vec![0.0, 0.5, 0.5, 1.0],
    ])
    .unwrap();
    let partition = Partition::from_one_based(4, vec![vec![1], vec![2, 3], vec![4]]).unwrap();
    let model = model_from_precision(omega, partition).unwrap();
    sample_gaussian(model.sigma(), n, RngSeed(seed)).unwrap().to_csv_string()
}

fn edges_from_graph_json(dir: &Path) -> (u64, Vec<(u64, u64)>, bool) {
    let text = fs::read_to_string(dir.join("graph.json")).expect("graph.json exists");
    let v: serde_json::Value = serde_json::from_str(&text).expect("graph.json parses");
    let vertices = v["vertices"].as_u64().unwrap();
    let edges = v["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e[0].as_u64().unwrap(), e[1].as_u64().unwrap()))
        .collect();
    (vertices, edges, v["exhausted"].as_bool().unwrap())
}

#[test]
fn demo_prints_both_matrix_versions_and_the_bridge_witness() {
    let out = run(&["demo"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    // Both reductions of the grouped fixture are homotopic and the
    // recomputed matrices are shown next to the originally reported ones.
    assert!(text.contains("reduced precision (recomputed)"));
    assert!(text.contains("reduced precision (as originally reported)"));
    assert!(text.contains("reduced graph: {(1,2), (2,3)}   verdict: homotopic"));
    assert!(text.contains("the recomputed reduced precisions differ"));
    // Bridge fixture: invented conditional edge with its exact value.
    assert!(text.contains("(reduced precision)[1,3] = 0.083333333 (exactly 1/12 in exact arithmetic)"));
    assert!(text.contains("verdict: not-homotopic   spurious edges: {(1,3)}"));
}

#[test]
fn analyze_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("omega.csv");
    let partition = dir.path().join("partition.json");
    fs::write(&matrix, GROUPED_OMEGA_CSV).unwrap();
    fs::write(&partition, THREE_CLUSTERS_JSON).unwrap();

    let ok = run(&[
        "analyze",
        "--matrix",
        matrix.to_str().unwrap(),
        "--partition",
        partition.to_str().unwrap(),
        "--method",
        "mean",
    ]);
    assert_eq!(code(&ok), 0, "stderr: {}", stderr(&ok));
    assert!(stdout(&ok).contains("homotopic"));

    let bridge = dir.path().join("bridge.csv");
    fs::write(&bridge, BRIDGE_OMEGA_CSV).unwrap();
    let spurious = run(&[
        "analyze",
        "--matrix",
        bridge.to_str().unwrap(),
        "--partition",
        partition.to_str().unwrap(),
        "--method",
        "mean",
    ]);
    assert_eq!(code(&spurious), 11, "stderr: {}", stderr(&spurious));
    assert!(stdout(&spurious).contains("not-homotopic"));
    assert!(stdout(&spurious).contains("(1,3)"));
}

#[test]
fn analyze_malformed_csv_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("omega.csv");
    let partition = dir.path().join("partition.json");
    fs::write(&matrix, "1,0\n0,oops\n").unwrap();
    fs::write(&partition, "[[1],[2]]").unwrap();

    let out = run(&[
        "analyze",
        "--matrix",
        matrix.to_str().unwrap(),
        "--partition",
        partition.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("line 2"), "diagnostic must name the line: {err}");
    assert!(err.contains("column 2"), "diagnostic must name the column: {err}");
}

#[test]
fn estimate_recovers_the_reduced_truth_on_fixture_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let partition = dir.path().join("partition.json");
    let out_dir = dir.path().join("out");
    fs::write(&data, grouped_fixture_csv(4000, 3)).unwrap();
    fs::write(&partition, THREE_CLUSTERS_JSON).unwrap();

    let out = run(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--partition",
        partition.to_str().unwrap(),
        "--method",
        "mean",
        "--graph",
        "conditional",
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let (vertices, edges, exhausted) = edges_from_graph_json(&out_dir);
    assert_eq!(vertices, 3);
    assert_eq!(edges, vec![(1, 2), (2, 3)], "reduced-truth edge list");
    assert!(!exhausted);
    // The instability curve is written with one row per grid point.
    let curve = fs::read_to_string(out_dir.join("instability.csv")).unwrap();
    assert!(curve.starts_with("param,instability,monotone\n"));
    assert!(curve.lines().count() >= 2);
    // The DOT payload parses as the declared graph shape.
    let dot = fs::read_to_string(out_dir.join("graph.dot")).unwrap();
    assert!(dot.starts_with("graph "));
    assert!(dot.contains("\"y1\" -- \"y2\""));
    assert!(dot.contains("\"y2\" -- \"y3\""));
}

#[test]
fn estimate_single_cluster_partition_gives_an_edgeless_graph() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let partition = dir.path().join("partition.json");
    let out_dir = dir.path().join("out");
    fs::write(&data, grouped_fixture_csv(500, 3)).unwrap();
    fs::write(&partition, "[[1,2,3,4]]").unwrap();

    let out = run(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--partition",
        partition.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let (vertices, edges, _) = edges_from_graph_json(&out_dir);
    assert_eq!(vertices, 1);
    assert!(edges.is_empty());
}

#[test]
fn estimate_constant_column_with_pca_is_a_degenerate_cluster_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let partition = dir.path().join("partition.json");
    // Fifty rows; the last coordinate never varies.
    let mut csv = String::new();
    for i in 0..50 {
        let x = (i as f64) * 0.1 - 2.5;
        csv.push_str(&format!("{},{},{},1.0\n", x, -x + 0.3, x * x * 0.05, ));
    }
    fs::write(&data, csv).unwrap();
    fs::write(&partition, THREE_CLUSTERS_JSON).unwrap();

    let out = run(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--partition",
        partition.to_str().unwrap(),
        "--method",
        "pca",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out).to_lowercase();
    assert!(err.contains("degenerate"), "diagnostic: {err}");
}

#[test]
fn simulate_spectral_chord_all_trials_stay_inside_the_cluster_graph() {
    let out = run(&["simulate", "spectral-chord", "--trials", "100", "--seed", "1"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("support condition held: 100/100"));
    assert!(text.contains("not-homotopic 0"));
}

#[test]
fn simulate_latent_rotation_random_rank_is_homotopic() {
    let out = run(&[
        "simulate",
        "latent-rotation",
        "--trials",
        "100",
        "--seed",
        "1",
        "--eigen-index",
        "random",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("homotopic 100, weakly-homotopic 0, not-homotopic 0"));
}

#[test]
fn simulate_table_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run_once = |out_dir: &Path| {
        run(&[
            "simulate",
            "table1-style",
            "--n",
            "2000",
            "--seed",
            "13",
            "--out",
            out_dir.to_str().unwrap(),
        ])
    };
    let first = run_once(&a);
    let second = run_once(&b);
    let (ca, cb) = (code(&first), code(&second));
    assert_eq!(ca, cb, "seeded runs must agree on the exit code");
    assert!(ca == 0 || ca == 12, "unexpected exit {ca}: {}", stderr(&first));

    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"conditional_table.csv".to_string()));
    assert!(names.contains(&"marginal_table.csv".to_string()));
    assert!(names.contains(&"manifest.json".to_string()));
    for name in &names {
        let bytes_a = fs::read(a.join(name)).unwrap();
        let bytes_b = fs::read(b.join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs between identical runs");
    }
    // Both tables carry one header plus one row per reduction method.
    let table = fs::read_to_string(a.join("conditional_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 5, "header + four methods");
}
