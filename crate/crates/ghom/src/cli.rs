//! Command-line front end.
//!
//! Subcommands: `demo` (built-in worked fixtures), `analyze` (verdict for a
//! user-supplied matrix and partition), `simulate` (seeded property runs
//! over random model families and a deterministic discrepancy-table
//! scenario), and `estimate` (reduce a dataset and estimate the
//! cluster-level graph with stability-tuned selection).
//!
//! Exit codes: 0 — success / verdict homotopic; 10 — weakly homotopic;
//! 11 — not homotopic (or a simulated guarantee failed); 12 — the tuning
//! grid was exhausted (sparsest graph still reported); 1 — input or
//! configuration error.
//!
//! Every randomized command requires an explicit `--seed`; reruns with the
//! same inputs and seed produce byte-identical file outputs (wall-clock
//! time is printed to stdout only, never written to files).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{GhomError, Result};
use crate::estimate::{
    default_lambda_grid, default_tau_grid, discrepancy_table, parse_csv_rows, sample_gaussian,
    stars_select, uniform_index, Dataset, DiscrepancyTable, EdgeRule, GraphEstimator, GraphKind,
    RngSeed, StarsConfig,
};
use crate::ggm::{
    cluster_graph, conditional_graph, marginal_graph, model_from_covariance,
    model_from_precision, EdgeSet, Partition,
};
use crate::homotopy::{
    asymmetric_bridge_fixture, build_latent_rotation, check_eigenvector_reduction,
    homotopy_verdict, random_latent_rotation, random_spectral_chord,
    spectral_chord_weak_homotopy, verify_spectral_chord, HomotopyStatus, HomotopyVerdict,
};
use crate::matrix::{zero_pattern, SymMatrix, DEFAULT_TOL};
use crate::reduce::{build_mean, build_pca, reduce_model, sample_reduce, ReduceMethod};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_WEAK: i32 = 10;
pub const EXIT_NOT: i32 = 11;
pub const EXIT_EXHAUSTED: i32 = 12;

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "ghom",
    version,
    about = "Decide whether linear dimension reduction preserves the independence graph of a Gaussian model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in worked fixtures and print a full report
    Demo(DemoArgs),
    /// Verdict for a covariance/precision matrix under a linear reduction
    Analyze(AnalyzeArgs),
    /// Seeded property runs over random model families
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Reduce a dataset and estimate the cluster-level graph
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct DemoArgs {
    /// Directory for the report and manifest files (optional)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MatrixKind {
    Sigma,
    Omega,
}

fn parse_matrix_kind(s: &str) -> std::result::Result<MatrixKind, String> {
    match s {
        "sigma" => Ok(MatrixKind::Sigma),
        "omega" => Ok(MatrixKind::Omega),
        other => Err(format!("unknown kind '{}' (expected sigma/omega)", other)),
    }
}

fn parse_method(s: &str) -> std::result::Result<ReduceMethod, String> {
    s.parse::<ReduceMethod>().map_err(|e| e.to_string())
}

fn parse_rule(s: &str) -> std::result::Result<EdgeRule, String> {
    s.parse::<EdgeRule>().map_err(|e| e.to_string())
}

fn parse_graph_kind(s: &str) -> std::result::Result<GraphKind, String> {
    s.parse::<GraphKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
struct GridArg(Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<GridArg, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        out.push(
            part.parse::<f64>()
                .map_err(|_| format!("invalid grid value '{}'", part))?,
        );
    }
    if out.is_empty() {
        return Err("empty grid".into());
    }
    Ok(GridArg(out))
}

#[derive(Debug, Clone, Copy)]
enum EigenIndexArg {
    Leading,
    Random,
    Fixed(usize),
}

fn parse_eigen_index(s: &str) -> std::result::Result<EigenIndexArg, String> {
    match s {
        "leading" => Ok(EigenIndexArg::Leading),
        "random" => Ok(EigenIndexArg::Random),
        other => {
            let n: usize = other
                .parse()
                .map_err(|_| format!("expected leading, random, or a 1-based index, got '{}'", other))?;
            if n == 0 {
                return Err("eigenvector index is 1-based".into());
            }
            Ok(EigenIndexArg::Fixed(n))
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Square matrix as headerless CSV
    #[arg(long)]
    matrix: PathBuf,
    /// Whether the matrix is a covariance (sigma) or a precision (omega)
    #[arg(long, default_value = "omega", value_parser = parse_matrix_kind)]
    kind: MatrixKind,
    /// Partition as JSON (1-based coordinate lists per cluster)
    #[arg(long)]
    partition: PathBuf,
    /// Reduction method; population analysis supports mean and pca
    #[arg(long, default_value = "mean", value_parser = parse_method)]
    method: ReduceMethod,
    /// 1-based eigenvector component used with --method pca
    #[arg(long, default_value_t = 1)]
    component: usize,
    /// Which independence graph to compare
    #[arg(long, default_value = "conditional", value_parser = parse_graph_kind)]
    graph: GraphKind,
    /// Zero-pattern tolerance
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Directory for report, graphs and manifest (optional)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write raw and reduced matrices as CSV (needs --out)
    #[arg(long)]
    emit_matrices: bool,
}

#[derive(Subcommand)]
enum SimulateCmd {
    /// Shared-loading factor models with an eigenvector support condition:
    /// every trial must satisfy the condition and be at least weakly
    /// homotopic
    SpectralChord(SpectralChordArgs),
    /// Diagonally coupled rotation models: every per-cluster eigenvector
    /// reduction must be homotopic
    LatentRotation(LatentRotationArgs),
    /// Deterministic discrepancy tables (conditional and marginal) from a
    /// synthetic dataset
    #[command(name = "table1-style")]
    Table1Style(TableArgs),
}

#[derive(Args)]
struct SpectralChordArgs {
    /// Number of seeded trials
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Number of clusters; omitted → cycles over 2..=5 per trial
    #[arg(long)]
    k: Option<usize>,
    /// Coordinates per cluster; omitted → cycles over 1..=3 per trial
    #[arg(long)]
    cluster_size: Option<usize>,
    /// Support-condition tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Master seed (required: all runs are reproducible)
    #[arg(long)]
    seed: u64,
    /// Directory for the per-trial CSV and manifest (optional)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LatentRotationArgs {
    /// Number of seeded trials
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Number of clusters; omitted → cycles over 2..=6 per trial
    #[arg(long)]
    k: Option<usize>,
    /// Latent dimension per cluster; omitted → cycles over 2..=5 per trial
    #[arg(long)]
    df: Option<usize>,
    /// Eigenvector index per cluster: leading, random, or a fixed 1-based
    /// index
    #[arg(long, default_value = "random", value_parser = parse_eigen_index)]
    eigen_index: EigenIndexArg,
    /// Master seed (required: all runs are reproducible)
    #[arg(long)]
    seed: u64,
    /// Directory for the per-trial CSV and manifest (optional)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    /// Number of sampled observations
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Number of clusters in the synthetic model
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Latent dimension (= cluster size) in the synthetic model
    #[arg(long, default_value_t = 4)]
    df: usize,
    /// Master seed (required: all runs are reproducible)
    #[arg(long)]
    seed: u64,
    /// Output directory for the two tables, graphs and manifest
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset as headerless CSV, rows = observations
    #[arg(long)]
    data: PathBuf,
    /// Partition as JSON (1-based coordinate lists per cluster)
    #[arg(long)]
    partition: PathBuf,
    /// Reduction method applied per cluster
    #[arg(long, default_value = "mean", value_parser = parse_method)]
    method: ReduceMethod,
    /// Which independence graph to estimate
    #[arg(long, default_value = "conditional", value_parser = parse_graph_kind)]
    graph: GraphKind,
    /// Edge combination rule for neighborhood selection
    #[arg(long, default_value = "or", value_parser = parse_rule)]
    rule: EdgeRule,
    /// Comma-separated decreasing parameter grid (default depends on --graph)
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridArg>,
    /// Number of stability subsamples
    #[arg(long, default_value_t = 20)]
    subsamples: usize,
    /// Subsample size; omitted → min(floor(10·√n), n − 1)
    #[arg(long)]
    subsample_size: Option<usize>,
    /// Instability budget
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    /// Master seed (required: all runs are reproducible)
    #[arg(long)]
    seed: u64,
    /// Directory for graph, instability curve and manifest (optional)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the reduced dataset as CSV (needs --out)
    #[arg(long)]
    emit_matrices: bool,
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parse arguments and run; returns the process exit code. Errors are
/// reported on stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err);
            EXIT_INPUT
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Demo(args) => run_demo(&args),
        Command::Analyze(args) => run_analyze(&args),
        Command::Simulate(SimulateCmd::SpectralChord(args)) => run_spectral_chord(&args),
        Command::Simulate(SimulateCmd::LatentRotation(args)) => run_latent_rotation(&args),
        Command::Simulate(SimulateCmd::Table1Style(args)) => run_table1_style(&args),
        Command::Estimate(args) => run_estimate(&args),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{:02x}", b))
        .collect()
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| GhomError::InvalidInput(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!("{}.tmp", file_name));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn verdict_exit(status: HomotopyStatus) -> i32 {
    match status {
        HomotopyStatus::Homotopic => EXIT_OK,
        HomotopyStatus::WeaklyHomotopic => EXIT_WEAK,
        HomotopyStatus::NotHomotopic => EXIT_NOT,
    }
}

fn fmt_pairs(pairs: &[(usize, usize)]) -> String {
    if pairs.is_empty() {
        return "{}".to_string();
    }
    let body: Vec<String> = pairs.iter().map(|(a, b)| format!("({},{})", a, b)).collect();
    format!("{{{}}}", body.join(", "))
}

fn fmt_edges(e: &EdgeSet) -> String {
    fmt_pairs(&e.to_one_based())
}

fn fmt_matrix_block(label: &str, rows: &[Vec<f64>]) -> String {
    let mut s = format!("{}:\n", label);
    for r in rows {
        s.push_str("   ");
        for v in r {
            let _ = write!(s, " {:>9.6}", v);
        }
        s.push('\n');
    }
    s
}

fn pairs_json(pairs: &[(usize, usize)]) -> serde_json::Value {
    json!(pairs.iter().map(|&(a, b)| vec![a, b]).collect::<Vec<_>>())
}

fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{}", v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Off-diagonal nonzero pattern of a symmetric matrix as an edge set.
fn pattern_edges_of(m: &SymMatrix, tol: f64) -> EdgeSet {
    let p = zero_pattern(m, tol);
    EdgeSet::from_pairs(p.dim(), &p.offdiag_nonzeros()).expect("pattern pairs are in range")
}

fn manifest_value(
    command: &str,
    seed: Option<u64>,
    inputs: &[(&str, String)],
    config: serde_json::Value,
) -> serde_json::Value {
    let mut input_map = serde_json::Map::new();
    for (name, digest) in inputs {
        input_map.insert((*name).to_string(), json!(format!("sha256:{}", digest)));
    }
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "inputs": input_map,
        "config": config,
    })
}

fn print_manifest_and_clock(manifest: &serde_json::Value, started: Instant) {
    println!(
        "run manifest: {}",
        serde_json::to_string(manifest).expect("manifest serializes")
    );
    // Stdout only: file outputs must be byte-identical across reruns.
    println!(
        "wall-clock: {:.1} ms (reported on stdout only)",
        started.elapsed().as_secs_f64() * 1e3
    );
}

fn read_input(path: &Path) -> Result<(String, String)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| GhomError::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: "file is not valid UTF-8".into(),
    })?;
    Ok((text, sha256_hex(&bytes)))
}

fn parse_square_matrix(text: &str, label: &str) -> Result<SymMatrix> {
    let rows = parse_csv_rows(text, label)?;
    if rows.is_empty() {
        return Err(GhomError::Parse {
            path: label.to_string(),
            line: 0,
            msg: "matrix file is empty".into(),
        });
    }
    if rows.len() != rows[0].len() {
        return Err(GhomError::DimensionMismatch(format!(
            "matrix must be square, got {} rows x {} columns",
            rows.len(),
            rows[0].len()
        )));
    }
    SymMatrix::new(&rows)
}

fn status_counts(statuses: &[HomotopyStatus]) -> (usize, usize, usize) {
    let mut h = 0;
    let mut w = 0;
    let mut n = 0;
    for s in statuses {
        match s {
            HomotopyStatus::Homotopic => h += 1,
            HomotopyStatus::WeaklyHomotopic => w += 1,
            HomotopyStatus::NotHomotopic => n += 1,
        }
    }
    (h, w, n)
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

/// Reduced precision for the grouped fixture as originally reported
/// (diverges from the recomputation, which is the asserted truth).
const REPORTED_MEAN: [[f64; 3]; 3] = [[1.0, 1.0, -1.0], [1.0, 3.0, -2.0], [-1.0, -2.0, 2.0]];
const REPORTED_PCA: [[f64; 3]; 3] = [
    [1.00, 0.71, -0.71],
    [0.71, 1.50, -0.79],
    [-0.71, -0.79, 1.08],
];

fn nested(rows: &[[f64; 3]; 3]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

fn run_demo(args: &DemoArgs) -> Result<i32> {
    let started = Instant::now();
    let mut report = String::new();

    // Grouped four-variable fixture: clusters {1}, {2,3}, {4}.
    let omega = SymMatrix::new(&[
        vec![1.0, 0.5, 0.5, 0.0],
        vec![0.5, 1.0, 0.5, 0.5],
        vec![0.5, 0.5, 1.0, 0.5],
        vec![0.0, 0.5, 0.5, 1.0],
    ])?;
    let partition = Partition::from_one_based(4, vec![vec![1], vec![2, 3], vec![4]])?;
    let model = model_from_precision(omega, partition)?;

    report.push_str("== grouped four-variable fixture ==\n");
    report.push_str("clusters: [[1], [2, 3], [4]]\n");
    report.push_str(&fmt_matrix_block(
        "raw precision (input)",
        &model.omega().to_nested(),
    ));
    report.push_str(&fmt_matrix_block(
        "raw covariance (recomputed)",
        &model.sigma().to_nested(),
    ));

    let raw = conditional_graph(&model, DEFAULT_TOL);
    let e_c = cluster_graph(&raw, model.partition())?;
    report.push_str(&format!(
        "raw conditional graph: {}   cluster graph: {}\n\n",
        fmt_edges(&raw),
        fmt_edges(&e_c)
    ));

    let reductions: Vec<(&str, crate::reduce::LinearReduction, Vec<Vec<f64>>)> = vec![
        (
            "within-cluster mean",
            build_mean(model.partition()),
            nested(&REPORTED_MEAN),
        ),
        (
            "leading principal component",
            build_pca(&model, &[1, 1, 1])?,
            nested(&REPORTED_PCA),
        ),
    ];

    let mut fixture_statuses = Vec::new();
    for (label, reduction, reported) in &reductions {
        let reduced = reduce_model(&model, reduction)?;
        let e_dr = reduced.reduced_graph(DEFAULT_TOL);
        let verdict = homotopy_verdict(&e_dr, &e_c)?;
        report.push_str(&format!("-- reduction: {} --\n", label));
        report.push_str(&fmt_matrix_block(
            "reduced covariance (recomputed)",
            &reduced.sigma_y().to_nested(),
        ));
        report.push_str(&fmt_matrix_block(
            "reduced precision (recomputed)",
            &reduced.omega_y().to_nested(),
        ));
        report.push_str(&fmt_matrix_block(
            "reduced precision (as originally reported)",
            reported,
        ));
        report.push_str(&format!(
            "reduced graph: {}   verdict: {}\n\n",
            fmt_edges(&e_dr),
            verdict.status()
        ));
        fixture_statuses.push(verdict.status());
    }
    report.push_str(
        "note: the recomputed reduced precisions differ from the originally\n\
         reported matrices. The recomputed values invert the reduced\n\
         covariance to machine precision and are the ones asserted by this\n\
         project's test suite; the originally reported matrices are shown\n\
         for comparison only.\n\n",
    );

    // Asymmetric bridge fixture: averaging manufactures a spurious edge.
    let (bridge, expected) = asymmetric_bridge_fixture();
    let reduction = build_mean(bridge.partition());
    let reduced = reduce_model(&bridge, &reduction)?;
    let raw_b = conditional_graph(&bridge, DEFAULT_TOL);
    let e_c_b = cluster_graph(&raw_b, bridge.partition())?;
    let e_dr_b = reduced.reduced_graph(DEFAULT_TOL);
    let verdict_b = homotopy_verdict(&e_dr_b, &e_c_b)?;
    if verdict_b != expected {
        return Err(GhomError::PropertyViolation(format!(
            "bridge fixture verdict changed: expected {}, got {}",
            expected.status(),
            verdict_b.status()
        )));
    }
    report.push_str("== asymmetric bridge fixture ==\n");
    report.push_str("clusters: [[1], [2, 3], [4]]\n");
    report.push_str(&fmt_matrix_block(
        "raw precision (input)",
        &bridge.omega().to_nested(),
    ));
    report.push_str(&fmt_matrix_block(
        "reduced precision under the within-cluster mean",
        &reduced.omega_y().to_nested(),
    ));
    report.push_str(&format!(
        "(reduced precision)[1,3] = {:.9} (exactly 1/12 in exact arithmetic)\n",
        reduced.omega_y().get(0, 2)
    ));
    report.push_str(&format!(
        "cluster graph: {}   reduced graph: {}\n",
        fmt_edges(&e_c_b),
        fmt_edges(&e_dr_b)
    ));
    report.push_str(&format!(
        "verdict: {}   spurious edges: {}\n",
        verdict_b.status(),
        fmt_pairs(&verdict_b.spurious_one_based())
    ));

    print!("{}", report);

    let manifest = manifest_value("demo", None, &[], json!({}));
    if let Some(dir) = &args.out {
        ensure_out_dir(dir)?;
        atomic_write(&dir.join("report.txt"), report.as_bytes())?;
        atomic_write(
            &dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)
                .expect("manifest serializes")
                .as_bytes(),
        )?;
        println!("wrote {}", dir.join("report.txt").display());
    }
    print_manifest_and_clock(&manifest, started);
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn run_analyze(args: &AnalyzeArgs) -> Result<i32> {
    let started = Instant::now();
    let (matrix_text, matrix_digest) = read_input(&args.matrix)?;
    let sym = parse_square_matrix(&matrix_text, &args.matrix.display().to_string())?;
    let (partition_text, partition_digest) = read_input(&args.partition)?;
    let partition = Partition::from_json_str(&partition_text)?;

    let model = match args.kind {
        MatrixKind::Omega => model_from_precision(sym, partition)?,
        MatrixKind::Sigma => model_from_covariance(sym, partition)?,
    };
    let k = model.partition().k();

    let reduction = match args.method {
        ReduceMethod::Mean => build_mean(model.partition()),
        ReduceMethod::Pca => {
            let comps = vec![args.component; k];
            build_pca(&model, &comps)?
        }
        other => {
            return Err(GhomError::InvalidInput(format!(
                "method '{}' is defined on sample data only; population analysis supports mean and pca",
                other
            )))
        }
    };
    let reduced = reduce_model(&model, &reduction)?;

    let raw = match args.graph {
        GraphKind::Conditional => conditional_graph(&model, args.tol),
        GraphKind::Marginal => marginal_graph(&model, args.tol),
    };
    let e_c = cluster_graph(&raw, model.partition())?;
    let e_dr = match args.graph {
        GraphKind::Conditional => reduced.reduced_graph(args.tol),
        GraphKind::Marginal => pattern_edges_of(reduced.sigma_y(), args.tol),
    };
    let verdict = homotopy_verdict(&e_dr, &e_c)?;

    println!("command: analyze");
    println!(
        "matrix: {} (kind {}, d = {})",
        args.matrix.display(),
        match args.kind {
            MatrixKind::Sigma => "sigma",
            MatrixKind::Omega => "omega",
        },
        model.d()
    );
    println!(
        "partition: {} clusters {}",
        k,
        model.partition().to_json_string()
    );
    println!(
        "method: {}; graph: {}; tol: {}",
        args.method, args.graph, args.tol
    );
    println!("raw graph E_R ({} edges): {}", raw.len(), fmt_edges(&raw));
    println!("cluster graph E_C: {}", fmt_edges(&e_c));
    println!("reduced graph E_DR: {}", fmt_edges(&e_dr));
    println!("verdict: {}", verdict.status());
    println!(
        "spurious edges: {}   missing edges: {}",
        fmt_pairs(&verdict.spurious_one_based()),
        fmt_pairs(&verdict.missing_one_based())
    );

    let config = json!({
        "kind": match args.kind { MatrixKind::Sigma => "sigma", MatrixKind::Omega => "omega" },
        "method": args.method.to_string(),
        "component": args.component,
        "graph": args.graph.to_string(),
        "tol": args.tol,
        "emit_matrices": args.emit_matrices,
    });
    let manifest = manifest_value(
        "analyze",
        None,
        &[
            ("matrix", matrix_digest),
            ("partition", partition_digest),
        ],
        config.clone(),
    );

    if let Some(dir) = &args.out {
        ensure_out_dir(dir)?;
        let report = json!({
            "manifest": manifest,
            "dimensions": {"d": model.d(), "clusters": k},
            "raw_edges": pairs_json(&raw.to_one_based()),
            "cluster_edges": pairs_json(&e_c.to_one_based()),
            "reduced_edges": pairs_json(&e_dr.to_one_based()),
            "verdict": verdict.status().to_string(),
            "spurious_edges": pairs_json(&verdict.spurious_one_based()),
            "missing_edges": pairs_json(&verdict.missing_one_based()),
        });
        atomic_write(
            &dir.join("report.json"),
            serde_json::to_string_pretty(&report)
                .expect("report serializes")
                .as_bytes(),
        )?;
        atomic_write(
            &dir.join("raw_graph.dot"),
            raw.to_dot("raw", "x").as_bytes(),
        )?;
        atomic_write(
            &dir.join("cluster_graph.dot"),
            e_c.to_dot("cluster", "y").as_bytes(),
        )?;
        atomic_write(
            &dir.join("reduced_graph.dot"),
            e_dr.to_dot("reduced", "y").as_bytes(),
        )?;
        if args.emit_matrices {
            atomic_write(
                &dir.join("sigma.csv"),
                matrix_csv(&model.sigma().to_nested()).as_bytes(),
            )?;
            atomic_write(
                &dir.join("omega.csv"),
                matrix_csv(&model.omega().to_nested()).as_bytes(),
            )?;
            atomic_write(
                &dir.join("sigma_y.csv"),
                matrix_csv(&reduced.sigma_y().to_nested()).as_bytes(),
            )?;
            atomic_write(
                &dir.join("omega_y.csv"),
                matrix_csv(&reduced.omega_y().to_nested()).as_bytes(),
            )?;
        }
        atomic_write(
            &dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)
                .expect("manifest serializes")
                .as_bytes(),
        )?;
        println!("wrote report to {}", dir.display());
    }

    print_manifest_and_clock(&manifest, started);
    Ok(verdict_exit(verdict.status()))
}

// ---------------------------------------------------------------------------
// simulate spectral-chord
// ---------------------------------------------------------------------------

fn run_spectral_chord(args: &SpectralChordArgs) -> Result<i32> {
    let started = Instant::now();
    if args.trials == 0 {
        return Err(GhomError::InvalidInput("need at least one trial".into()));
    }
    let base = RngSeed(args.seed);
    let mut rows = String::from("trial,k,cluster_size,condition_holds,verdict,violations\n");
    let mut held = 0usize;
    let mut statuses = Vec::with_capacity(args.trials);
    let mut spurious_failure: Option<String> = None;

    for t in 0..args.trials {
        let k = args.k.unwrap_or(2 + t % 4);
        let cs = args.cluster_size.unwrap_or(1 + t % 3);
        let spec = random_spectral_chord(k, cs, base.child(t as u64))?;
        let chord = verify_spectral_chord(&spec, args.tol);
        if chord.holds {
            held += 1;
        }
        let verdict: HomotopyVerdict = match spectral_chord_weak_homotopy(&spec, args.tol) {
            Ok(v) => v,
            Err(GhomError::PropertyViolation(msg)) => {
                spurious_failure = Some(format!("trial {}: {}", t, msg));
                break;
            }
            Err(other) => return Err(other),
        };
        statuses.push(verdict.status());
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{}",
            t,
            k,
            cs,
            chord.holds,
            verdict.status(),
            chord.violations.len()
        );
    }

    let (h, w, n) = status_counts(&statuses);
    println!("command: simulate spectral-chord");
    println!(
        "trials: {}; support condition held: {}/{}",
        args.trials, held, args.trials
    );
    println!(
        "verdicts: homotopic {}, weakly-homotopic {}, not-homotopic {}",
        h, w, n
    );
    if let Some(msg) = &spurious_failure {
        eprintln!("guarantee violated: {}", msg);
    }

    let config = json!({
        "trials": args.trials,
        "k": args.k,
        "cluster_size": args.cluster_size,
        "tol": args.tol,
    });
    let manifest = manifest_value("simulate spectral-chord", Some(args.seed), &[], config);
    if let Some(dir) = &args.out {
        ensure_out_dir(dir)?;
        atomic_write(&dir.join("trials.csv"), rows.as_bytes())?;
        atomic_write(
            &dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)
                .expect("manifest serializes")
                .as_bytes(),
        )?;
        println!("wrote per-trial results to {}", dir.display());
    }
    print_manifest_and_clock(&manifest, started);

    if spurious_failure.is_some() || held < args.trials {
        return Ok(EXIT_NOT);
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// simulate latent-rotation
// ---------------------------------------------------------------------------

fn run_latent_rotation(args: &LatentRotationArgs) -> Result<i32> {
    let started = Instant::now();
    if args.trials == 0 {
        return Err(GhomError::InvalidInput("need at least one trial".into()));
    }
    let base = RngSeed(args.seed);
    let mut rows = String::from("trial,k,df,eigen_index,verdict,degenerate_spectrum\n");
    let mut statuses = Vec::with_capacity(args.trials);

    for t in 0..args.trials {
        let k = args.k.unwrap_or(2 + t % 5);
        let d_f = args.df.unwrap_or(2 + t % 4);
        let trial_seed = base.child(t as u64);
        let planted: Vec<(usize, usize)> = if t % 2 == 0 { vec![(0, k - 1)] } else { vec![] };
        let spec = random_latent_rotation(k, d_f, &planted, trial_seed)?;
        let idx = match args.eigen_index {
            EigenIndexArg::Leading => 1,
            EigenIndexArg::Random => {
                let mut rng = trial_seed.stream(1);
                1 + uniform_index(&mut rng, d_f)
            }
            EigenIndexArg::Fixed(n) => {
                if n > d_f {
                    return Err(GhomError::IndexOutOfRange(format!(
                        "eigenvector index {} exceeds latent dimension {} (trial {})",
                        n, d_f, t
                    )));
                }
                n
            }
        };
        let indices = vec![idx; k];
        let check = check_eigenvector_reduction(&spec, &indices)?;
        statuses.push(check.verdict.status());
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{}",
            t,
            k,
            d_f,
            idx,
            check.verdict.status(),
            check.degenerate_spectrum
        );
    }

    let (h, w, n) = status_counts(&statuses);
    println!("command: simulate latent-rotation");
    println!("trials: {}", args.trials);
    println!(
        "verdicts: homotopic {}, weakly-homotopic {}, not-homotopic {}",
        h, w, n
    );

    let config = json!({
        "trials": args.trials,
        "k": args.k,
        "df": args.df,
        "eigen_index": match args.eigen_index {
            EigenIndexArg::Leading => "leading".to_string(),
            EigenIndexArg::Random => "random".to_string(),
            EigenIndexArg::Fixed(i) => i.to_string(),
        },
    });
    let manifest = manifest_value("simulate latent-rotation", Some(args.seed), &[], config);
    if let Some(dir) = &args.out {
        ensure_out_dir(dir)?;
        atomic_write(&dir.join("trials.csv"), rows.as_bytes())?;
        atomic_write(
            &dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)
                .expect("manifest serializes")
                .as_bytes(),
        )?;
        println!("wrote per-trial results to {}", dir.display());
    }
    print_manifest_and_clock(&manifest, started);

    if n > 0 {
        return Ok(EXIT_NOT);
    }
    if w > 0 {
        return Ok(EXIT_WEAK);
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// simulate table1-style
// ---------------------------------------------------------------------------

fn render_rate_table(t: &DiscrepancyTable) -> String {
    let mut s = String::from("method");
    for m in &t.methods {
        let _ = write!(s, ",{}", m);
    }
    s.push('\n');
    for (i, m) in t.methods.iter().enumerate() {
        let _ = write!(s, "{}", m);
        for j in 0..t.methods.len() {
            let _ = write!(s, ",{:.2}", t.rates[i][j]);
        }
        s.push('\n');
    }
    s
}

fn print_rate_table(title: &str, t: &DiscrepancyTable) {
    println!("{}:", title);
    print!("{}", render_rate_table(t));
    for (i, m) in t.methods.iter().enumerate() {
        println!(
            "  {}: selected parameter {}, graph {}{}",
            m,
            t.selected_params[i],
            fmt_edges(&t.graphs[i]),
            if t.exhausted[i] {
                " [grid exhausted]"
            } else {
                ""
            }
        );
    }
}

fn run_table1_style(args: &TableArgs) -> Result<i32> {
    let started = Instant::now();
    if args.k < 2 {
        return Err(GhomError::InvalidInput(
            "need at least 2 clusters for a discrepancy table".into(),
        ));
    }
    if args.df == 0 {
        return Err(GhomError::InvalidInput("latent dimension must be ≥ 1".into()));
    }
    if args.n <= args.df.max(2) {
        return Err(GhomError::InvalidInput(format!(
            "need more than max(df, 2) = {} observations, got {}",
            args.df.max(2),
            args.n
        )));
    }

    let base = RngSeed(args.seed);
    let planted = vec![(0usize, args.k - 1)];
    let spec = random_latent_rotation(args.k, args.df, &planted, base.child(0))?;
    let model = build_latent_rotation(&spec)?;
    let data = sample_gaussian(model.sigma(), args.n, base.child(1))?;

    let methods = [
        ReduceMethod::Mean,
        ReduceMethod::Median,
        ReduceMethod::Pca,
        ReduceMethod::Factor,
    ];
    let cond = discrepancy_table(
        &data,
        model.partition(),
        &methods,
        GraphKind::Conditional,
        &StarsConfig::with_grid(default_lambda_grid()),
        base.child(2),
    )?;
    let marg = discrepancy_table(
        &data,
        model.partition(),
        &methods,
        GraphKind::Marginal,
        &StarsConfig::with_grid(default_tau_grid()),
        base.child(3),
    )?;

    println!("command: simulate table1-style");
    println!(
        "synthetic model: {} clusters of size {}, one decoupled cluster pair (1,{}); n = {}",
        args.k, args.df, args.k, args.n
    );
    print_rate_table("conditional-graph discrepancy table", &cond);
    print_rate_table("marginal-graph discrepancy table", &marg);

    let config = json!({
        "n": args.n,
        "k": args.k,
        "df": args.df,
        "planted_zero": [1, args.k],
        "methods": methods.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "lambda_grid": default_lambda_grid(),
        "tau_grid": default_tau_grid(),
    });
    let manifest = manifest_value("simulate table1-style", Some(args.seed), &[], config);

    ensure_out_dir(&args.out)?;
    atomic_write(
        &args.out.join("conditional_table.csv"),
        render_rate_table(&cond).as_bytes(),
    )?;
    atomic_write(
        &args.out.join("marginal_table.csv"),
        render_rate_table(&marg).as_bytes(),
    )?;
    for (table, kind) in [(&cond, "conditional"), (&marg, "marginal")] {
        for (i, m) in table.methods.iter().enumerate() {
            atomic_write(
                &args.out.join(format!("graph_{}_{}.dot", kind, m)),
                table.graphs[i].to_dot(&format!("{}_{}", kind, m), "y").as_bytes(),
            )?;
        }
    }
    atomic_write(
        &args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;
    println!("wrote tables to {}", args.out.display());
    print_manifest_and_clock(&manifest, started);

    let any_exhausted =
        cond.exhausted.iter().any(|&e| e) || marg.exhausted.iter().any(|&e| e);
    Ok(if any_exhausted { EXIT_EXHAUSTED } else { EXIT_OK })
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

fn run_estimate(args: &EstimateArgs) -> Result<i32> {
    let started = Instant::now();
    let (data_text, data_digest) = read_input(&args.data)?;
    let data = Dataset::from_csv_str(&data_text, &args.data.display().to_string())?;
    let (partition_text, partition_digest) = read_input(&args.partition)?;
    let partition = Partition::from_json_str(&partition_text)?;
    if partition.d() != data.d() {
        return Err(GhomError::DimensionMismatch(format!(
            "partition covers {} coordinates but the dataset has {} columns",
            partition.d(),
            data.d()
        )));
    }

    let seed = RngSeed(args.seed);
    let reduced = sample_reduce(&data, &partition, args.method, seed.child(0))?;

    let estimator = match args.graph {
        GraphKind::Conditional => GraphEstimator::Neighborhood { rule: args.rule },
        GraphKind::Marginal => GraphEstimator::Threshold,
    };
    let grid = match &args.grid {
        Some(g) => g.0.clone(),
        None => match args.graph {
            GraphKind::Conditional => default_lambda_grid(),
            GraphKind::Marginal => default_tau_grid(),
        },
    };
    let config = StarsConfig {
        subsample_count: args.subsamples,
        subsample_size: args.subsample_size,
        beta: args.beta,
        grid: grid.clone(),
    };
    let sel = stars_select(&reduced, estimator, &config, seed.child(1))?;

    let k = partition.k();
    println!("command: estimate");
    println!(
        "data: {} (n = {}, d = {})",
        args.data.display(),
        data.n(),
        data.d()
    );
    println!("partition: {} clusters {}", k, partition.to_json_string());
    println!(
        "method: {}; graph: {}; rule: {}",
        args.method, args.graph, args.rule
    );
    println!(
        "stability selection: {} subsamples of size {}, budget {}",
        args.subsamples,
        config.resolved_subsample_size(reduced.n()),
        args.beta
    );
    let fmt_curve = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{:.4}", x))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!(
        "grid (sparsest first): {}",
        grid.iter()
            .map(|g| g.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!("instability:          {}", fmt_curve(&sel.instability));
    println!(
        "monotone instability: {}",
        fmt_curve(&sel.monotone_instability)
    );
    if sel.exhausted {
        println!(
            "grid exhausted: no parameter met the budget; reporting the sparsest graph"
        );
    }
    println!(
        "selected parameter: {} (index {} of {})",
        sel.selected_param,
        sel.selected_index + 1,
        grid.len()
    );
    println!(
        "selected graph ({} vertices): {}",
        k,
        fmt_edges(&sel.selected_graph)
    );

    let config_json = json!({
        "method": args.method.to_string(),
        "graph": args.graph.to_string(),
        "rule": args.rule.to_string(),
        "grid": grid,
        "subsamples": args.subsamples,
        "subsample_size": args.subsample_size,
        "beta": args.beta,
        "emit_matrices": args.emit_matrices,
    });
    let manifest = manifest_value(
        "estimate",
        Some(args.seed),
        &[("data", data_digest), ("partition", partition_digest)],
        config_json,
    );

    if let Some(dir) = &args.out {
        ensure_out_dir(dir)?;
        atomic_write(
            &dir.join("graph.dot"),
            sel.selected_graph.to_dot("estimated", "y").as_bytes(),
        )?;
        let graph_json = json!({
            "vertices": k,
            "edges": pairs_json(&sel.selected_graph.to_one_based()),
            "graph": args.graph.to_string(),
            "method": args.method.to_string(),
            "selected_param": sel.selected_param,
            "exhausted": sel.exhausted,
        });
        atomic_write(
            &dir.join("graph.json"),
            serde_json::to_string_pretty(&graph_json)
                .expect("graph serializes")
                .as_bytes(),
        )?;
        let mut curve = String::from("param,instability,monotone\n");
        for (i, g) in grid.iter().enumerate() {
            let _ = writeln!(
                curve,
                "{},{},{}",
                g, sel.instability[i], sel.monotone_instability[i]
            );
        }
        atomic_write(&dir.join("instability.csv"), curve.as_bytes())?;
        if args.emit_matrices {
            atomic_write(&dir.join("reduced.csv"), reduced.to_csv_string().as_bytes())?;
        }
        atomic_write(
            &dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)
                .expect("manifest serializes")
                .as_bytes(),
        )?;
        println!("wrote estimate outputs to {}", dir.display());
    }

    print_manifest_and_clock(&manifest, started);
    Ok(if sel.exhausted { EXIT_EXHAUSTED } else { EXIT_OK })
}

// ---------------------------------------------------------------------------
// Tests (pure helpers; end-to-end behavior is covered by integration tests)
// ---------------------------------------------------------------------------
