//! Python bindings for the graph-homotopy library.
//!
//! Everything crosses the boundary as plain Python objects: matrices and
//! datasets are lists of equal-length float lists, partitions are lists of
//! 1-based coordinate lists, edges are 1-based `(i, j)` tuples with
//! `i < j`, and analysis results are dicts. Errors raise `ValueError` with
//! the library's diagnostic message.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ghom::estimate::{
    covariance_threshold as rs_covariance_threshold, discrepancy_rate as rs_discrepancy_rate,
    neighborhood_selection as rs_neighborhood_selection, sample_gaussian as rs_sample_gaussian,
    Dataset, EdgeRule, RngSeed,
};
use ghom::ggm::{
    cluster_graph, conditional_graph, marginal_graph, model_from_covariance,
    model_from_precision, EdgeSet, Partition,
};
use ghom::homotopy::{asymmetric_bridge_fixture, homotopy_verdict};
use ghom::matrix::{invert_pd as rs_invert_pd, zero_pattern, SymMatrix};
use ghom::reduce::{build_mean, build_pca, reduce_model};
use ghom::GhomError;

fn to_py_err(e: GhomError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sym_from_rows(rows: &[Vec<f64>]) -> PyResult<SymMatrix> {
    SymMatrix::new(rows).map_err(to_py_err)
}

fn dataset_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Dataset> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have unequal lengths"));
    }
    Dataset::new(n, d, rows.into_iter().flatten().collect()).map_err(to_py_err)
}

fn edges_from_pairs(vertices: usize, pairs: Vec<(usize, usize)>) -> PyResult<EdgeSet> {
    let zero_based: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(a, b)| {
            if a == 0 || b == 0 {
                Err(PyValueError::new_err("edges are 1-based"))
            } else {
                Ok((a - 1, b - 1))
            }
        })
        .collect::<PyResult<_>>()?;
    EdgeSet::from_pairs(vertices, &zero_based).map_err(to_py_err)
}

/// Invert a symmetric positive definite matrix.
#[pyfunction]
fn invert_pd(matrix: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let sym = sym_from_rows(&matrix)?;
    Ok(rs_invert_pd(&sym).map_err(to_py_err)?.to_nested())
}

/// Population-level homotopy analysis of a linear reduction.
///
/// `matrix` is a covariance (`kind="sigma"`) or precision (`kind="omega"`)
/// matrix; `partition` lists 1-based coordinates per cluster; `method` is
/// `"mean"` or `"pca"` (with a 1-based `component`); `graph` selects the
/// conditional or marginal independence graph. Returns a dict with the
/// verdict, the three edge lists, and the reduced matrices.
#[pyfunction]
#[pyo3(signature = (matrix, partition, *, kind="omega", method="mean", component=1, graph="conditional", tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn analyze_reduction<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<f64>>,
    partition: Vec<Vec<usize>>,
    kind: &str,
    method: &str,
    component: usize,
    graph: &str,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sym = sym_from_rows(&matrix)?;
    let d = sym.dim();
    let part = Partition::from_one_based(d, partition).map_err(to_py_err)?;
    let model = match kind {
        "omega" => model_from_precision(sym, part),
        "sigma" => model_from_covariance(sym, part),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown kind '{}' (expected sigma/omega)",
                other
            )))
        }
    }
    .map_err(to_py_err)?;

    let k = model.partition().k();
    let reduction = match method {
        "mean" => build_mean(model.partition()),
        "pca" => build_pca(&model, &vec![component; k]).map_err(to_py_err)?,
        other => {
            return Err(PyValueError::new_err(format!(
                "method '{}' is defined on sample data only; analysis supports mean and pca",
                other
            )))
        }
    };
    let reduced = reduce_model(&model, &reduction).map_err(to_py_err)?;

    let raw = match graph {
        "conditional" => conditional_graph(&model, tol),
        "marginal" => marginal_graph(&model, tol),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown graph '{}' (expected conditional/marginal)",
                other
            )))
        }
    };
    let e_c = cluster_graph(&raw, model.partition()).map_err(to_py_err)?;
    let e_dr = match graph {
        "conditional" => reduced.reduced_graph(tol),
        _ => {
            let p = zero_pattern(reduced.sigma_y(), tol);
            EdgeSet::from_pairs(p.dim(), &p.offdiag_nonzeros()).map_err(to_py_err)?
        }
    };
    let verdict = homotopy_verdict(&e_dr, &e_c).map_err(to_py_err)?;

    let out = PyDict::new(py);
    out.set_item("verdict", verdict.status().to_string())?;
    out.set_item("raw_edges", raw.to_one_based())?;
    out.set_item("cluster_edges", e_c.to_one_based())?;
    out.set_item("reduced_edges", e_dr.to_one_based())?;
    out.set_item("spurious_edges", verdict.spurious_one_based())?;
    out.set_item("missing_edges", verdict.missing_one_based())?;
    out.set_item("sigma_y", reduced.sigma_y().to_nested())?;
    out.set_item("omega_y", reduced.omega_y().to_nested())?;
    Ok(out)
}

/// The built-in fixture whose within-cluster averaging manufactures a
/// spurious edge: returns its precision matrix, partition, and expected
/// verdict.
#[pyfunction]
fn bridge_fixture(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let (model, verdict) = asymmetric_bridge_fixture();
    let clusters: Vec<Vec<usize>> = (0..model.partition().k())
        .map(|j| {
            model
                .partition()
                .cluster(j)
                .iter()
                .map(|&c| c + 1)
                .collect()
        })
        .collect();
    let out = PyDict::new(py);
    out.set_item("omega", model.omega().to_nested())?;
    out.set_item("partition", clusters)?;
    out.set_item("expected_verdict", verdict.status().to_string())?;
    out.set_item("spurious_edges", verdict.spurious_one_based())?;
    Ok(out)
}

/// Draw `n` rows from a zero-mean Gaussian with the given covariance;
/// bit-reproducible for a fixed seed.
#[pyfunction]
fn sample_gaussian(sigma: Vec<Vec<f64>>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let sym = sym_from_rows(&sigma)?;
    let data = rs_sample_gaussian(&sym, n, RngSeed(seed)).map_err(to_py_err)?;
    Ok((0..data.n())
        .map(|i| (0..data.d()).map(|j| data.get(i, j)).collect())
        .collect())
}

/// Estimate the conditional independence graph of a dataset by per-node
/// lasso regressions; returns 1-based edges. `rule` is "and" or "or".
#[pyfunction]
#[pyo3(signature = (data, lam, rule="or"))]
fn neighborhood_selection(
    data: Vec<Vec<f64>>,
    lam: f64,
    rule: &str,
) -> PyResult<Vec<(usize, usize)>> {
    let ds = dataset_from_rows(data)?;
    let rule: EdgeRule = rule.parse().map_err(to_py_err)?;
    Ok(rs_neighborhood_selection(&ds, lam, rule)
        .map_err(to_py_err)?
        .to_one_based())
}

/// Estimate the marginal independence graph: 1-based edges where
/// |sample correlation| exceeds `tau`.
#[pyfunction]
fn covariance_threshold(data: Vec<Vec<f64>>, tau: f64) -> PyResult<Vec<(usize, usize)>> {
    let ds = dataset_from_rows(data)?;
    Ok(rs_covariance_threshold(&ds, tau)
        .map_err(to_py_err)?
        .to_one_based())
}

/// Fraction of the first graph's edges absent from the second (asymmetric;
/// 0 when the first is empty). Edges are 1-based pairs on `vertices`.
#[pyfunction]
fn discrepancy_rate(
    edges1: Vec<(usize, usize)>,
    edges2: Vec<(usize, usize)>,
    vertices: usize,
) -> PyResult<f64> {
    let e1 = edges_from_pairs(vertices, edges1)?;
    let e2 = edges_from_pairs(vertices, edges2)?;
    rs_discrepancy_rate(&e1, &e2).map_err(to_py_err)
}

#[pymodule]
fn ghom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(invert_pd, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_reduction, m)?)?;
    m.add_function(wrap_pyfunction!(bridge_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(neighborhood_selection, m)?)?;
    m.add_function(wrap_pyfunction!(covariance_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(discrepancy_rate, m)?)?;
    Ok(())
}
