//! Gaussian graphical model representation: variable partitions, model
//! construction from a covariance or concentration matrix, and extraction of
//! marginal, conditional, and cluster-level independence graphs.
//!
//! Vertices and variable indices are 0-based inside the library. The file
//! formats (partition JSON, edge lists in reports) use 1-based indices, and
//! the conversion happens only at the serialization boundary.

use std::collections::BTreeSet;

use crate::error::{GhomError, Result};
use crate::matrix::{invert_pd, zero_pattern, SymMatrix};

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

/// An ordered partition of the variable set `{0..d-1}` into K non-empty,
/// pairwise-disjoint clusters.
///
/// Clusters need not be contiguous index ranges: all operations address
/// cluster members through the stored index sets, so arbitrary orderings are
/// handled without physically permuting any matrix, and every output is
/// reported in the original indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    d: usize,
    clusters: Vec<Vec<usize>>,
}

impl Partition {
    /// Build from 0-based index sets. Each cluster is sorted; cluster order
    /// is preserved as given.
    pub fn new(d: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        if d == 0 {
            return Err(GhomError::InvalidPartition("d must be at least 1".into()));
        }
        if clusters.is_empty() {
            return Err(GhomError::InvalidPartition(
                "at least one cluster required".into(),
            ));
        }
        let mut seen = vec![false; d];
        let mut count = 0usize;
        let mut sorted = Vec::with_capacity(clusters.len());
        for (j, c) in clusters.into_iter().enumerate() {
            if c.is_empty() {
                return Err(GhomError::InvalidPartition(format!(
                    "cluster {} is empty",
                    j + 1
                )));
            }
            let mut c = c;
            c.sort_unstable();
            for &i in &c {
                if i >= d {
                    return Err(GhomError::InvalidPartition(format!(
                        "cluster {} contains index {} but d = {}",
                        j + 1,
                        i + 1,
                        d
                    )));
                }
                if seen[i] {
                    return Err(GhomError::InvalidPartition(format!(
                        "index {} appears in more than one cluster",
                        i + 1
                    )));
                }
                seen[i] = true;
                count += 1;
            }
            sorted.push(c);
        }
        if count != d {
            return Err(GhomError::InvalidPartition(format!(
                "clusters cover {} of {} indices",
                count, d
            )));
        }
        Ok(Partition { d, clusters: sorted })
    }

    /// Build from 1-based index sets (the file-format convention).
    pub fn from_one_based(d: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let mut shifted = Vec::with_capacity(clusters.len());
        for c in clusters {
            let mut z = Vec::with_capacity(c.len());
            for i in c {
                if i == 0 {
                    return Err(GhomError::InvalidPartition(
                        "partition files use 1-based indices; found 0".into(),
                    ));
                }
                z.push(i - 1);
            }
            shifted.push(z);
        }
        Partition::new(d, shifted)
    }

    /// Contiguous blocks of the given sizes, in order.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let d: usize = sizes.iter().sum();
        let mut clusters = Vec::with_capacity(sizes.len());
        let mut next = 0;
        for &s in sizes {
            clusters.push((next..next + s).collect());
            next += s;
        }
        Partition::new(d, clusters)
    }

    /// Parse the JSON partition format: an array of arrays of 1-based
    /// indices, e.g. `[[1],[2,3],[4]]`. The total dimension is the number of
    /// indices covered.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: Vec<Vec<usize>> = serde_json::from_str(s).map_err(|e| GhomError::Parse {
            path: "<partition>".into(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        let d: usize = raw.iter().map(|c| c.len()).sum();
        Partition::from_one_based(d.max(1), raw)
    }

    /// Serialize to the JSON partition format (1-based).
    pub fn to_json_string(&self) -> String {
        let one_based: Vec<Vec<usize>> = self
            .clusters
            .iter()
            .map(|c| c.iter().map(|&i| i + 1).collect())
            .collect();
        serde_json::to_string(&one_based).expect("partition serialization cannot fail")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of clusters K.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// 0-based member indices of cluster `j` (sorted ascending).
    pub fn cluster(&self, j: usize) -> &[usize] {
        &self.clusters[j]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.len()).collect()
    }

    /// Map each variable index to its cluster id.
    pub fn cluster_of(&self) -> Vec<usize> {
        let mut owner = vec![0usize; self.d];
        for (j, c) in self.clusters.iter().enumerate() {
            for &i in c {
                owner[i] = j;
            }
        }
        owner
    }

    /// Singleton partition (every variable its own cluster).
    pub fn singletons(d: usize) -> Result<Self> {
        Partition::new(d, (0..d).map(|i| vec![i]).collect())
    }
}

// ---------------------------------------------------------------------------
// EdgeSet
// ---------------------------------------------------------------------------

/// An undirected graph on `n` vertices, stored as canonical `(min, max)`
/// vertex pairs with no self-loops. Vertices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(n: usize) -> Self {
        EdgeSet {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut e = EdgeSet::new(n);
        for &(i, j) in pairs {
            e.insert(i, j)?;
        }
        Ok(e)
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(GhomError::InvalidInput(format!(
                "self-loop at vertex {}",
                i + 1
            )));
        }
        if i >= self.n || j >= self.n {
            return Err(GhomError::IndexOutOfRange(format!(
                "edge ({}, {}) on a graph with {} vertices",
                i + 1,
                j + 1,
                self.n
            )));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn is_subset_of(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    /// Edges present in `self` but not in `other`, in canonical order.
    pub fn difference(&self, other: &EdgeSet) -> Vec<(usize, usize)> {
        self.edges.difference(&other.edges).copied().collect()
    }

    /// 1-based edge list for reports and serialization.
    pub fn to_one_based(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    /// Render as a DOT graph with the given vertex label prefix (for example
    /// prefix `"C"` labels cluster vertices `C1..Cn`).
    pub fn to_dot(&self, graph_name: &str, label_prefix: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("graph {} {{\n", graph_name));
        for v in 0..self.n {
            out.push_str(&format!("  \"{}{}\";\n", label_prefix, v + 1));
        }
        for (i, j) in self.iter() {
            out.push_str(&format!(
                "  \"{}{}\" -- \"{}{}\";\n",
                label_prefix,
                i + 1,
                label_prefix,
                j + 1
            ));
        }
        out.push_str("}\n");
        out
    }
}

// ---------------------------------------------------------------------------
// GgmModel
// ---------------------------------------------------------------------------

/// A zero-mean Gaussian graphical model: covariance, concentration, and the
/// cluster partition. Both matrices are stored so that graph extraction never
/// re-inverts.
#[derive(Debug, Clone)]
pub struct GgmModel {
    sigma: SymMatrix,
    omega: SymMatrix,
    partition: Partition,
}

impl GgmModel {
    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn omega(&self) -> &SymMatrix {
        &self.omega
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn d(&self) -> usize {
        self.sigma.dim()
    }
}

fn check_dim(dim: usize, partition: &Partition) -> Result<()> {
    if dim != partition.d() {
        return Err(GhomError::DimensionMismatch(format!(
            "matrix is {}x{} but partition covers {} variables",
            dim,
            dim,
            partition.d()
        )));
    }
    Ok(())
}

/// Build a model from its concentration (precision) matrix; the covariance is
/// obtained by positive-definite inversion.
pub fn model_from_precision(omega: SymMatrix, partition: Partition) -> Result<GgmModel> {
    check_dim(omega.dim(), &partition)?;
    let sigma = invert_pd(&omega)?;
    Ok(GgmModel {
        sigma,
        omega,
        partition,
    })
}

/// Build a model from its covariance matrix; the concentration matrix is
/// obtained by positive-definite inversion.
pub fn model_from_covariance(sigma: SymMatrix, partition: Partition) -> Result<GgmModel> {
    check_dim(sigma.dim(), &partition)?;
    let omega = invert_pd(&sigma)?;
    Ok(GgmModel {
        sigma,
        omega,
        partition,
    })
}

/// Conditional independence graph: edge `(j, k)` iff the concentration entry
/// `omega[j][k]` is structurally nonzero at relative tolerance `tol`.
pub fn conditional_graph(model: &GgmModel, tol: f64) -> EdgeSet {
    let p = zero_pattern(model.omega(), tol);
    let mut e = EdgeSet::new(model.d());
    for (i, j) in p.offdiag_nonzeros() {
        e.insert(i, j).expect("pattern indices are in range");
    }
    e
}

/// Marginal independence graph: edge `(j, k)` iff the covariance entry
/// `sigma[j][k]` is structurally nonzero at relative tolerance `tol` (for
/// jointly Gaussian variables, zero covariance is independence).
pub fn marginal_graph(model: &GgmModel, tol: f64) -> EdgeSet {
    let p = zero_pattern(model.sigma(), tol);
    let mut e = EdgeSet::new(model.d());
    for (i, j) in p.offdiag_nonzeros() {
        e.insert(i, j).expect("pattern indices are in range");
    }
    e
}

/// Collapse a raw d-vertex graph to the K-vertex cluster graph: clusters
/// `(j, k)` are joined iff any raw edge crosses between them.
pub fn cluster_graph(raw: &EdgeSet, partition: &Partition) -> Result<EdgeSet> {
    if raw.n() != partition.d() {
        return Err(GhomError::DimensionMismatch(format!(
            "graph has {} vertices but partition covers {}",
            raw.n(),
            partition.d()
        )));
    }
    let owner = partition.cluster_of();
    let mut e = EdgeSet::new(partition.k());
    for (i, j) in raw.iter() {
        let (ci, cj) = (owner[i], owner[j]);
        if ci != cj {
            e.insert(ci, cj)?;
        }
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
