//! Graph-homotopy verdicts and the structured model families for which the
//! preservation of the independence graph can be decided exactly:
//!
//! * the generic verdict comparing a reduced-model graph against the cluster
//!   graph of the raw model;
//! * block-diagonal factor models, where the cluster graph can be read from
//!   the full concentration matrix or from a low-dimensional surrogate, and
//!   the two routes must agree;
//! * the spectral chord model (identical loadings, i.i.d. noise blocks, and
//!   an eigenvector-support condition), whose reductions never invent edges;
//! * the latent rotation model (per-cluster orthogonal rotations of
//!   diagonally coupled latents), where projection onto any shared
//!   per-cluster eigenvector index preserves the graph exactly;
//! * corner-structured concentration matrices, where reduction along the
//!   first columns of the per-cluster frames is always at least weakly
//!   graph-homotopic;
//! * marginal and full-rank linear transformations of the raw variables and
//!   their effect on both graphs.

use crate::error::{GhomError, Result};
use crate::estimate::RngSeed;
use crate::ggm::{cluster_graph, conditional_graph, marginal_graph, EdgeSet, GgmModel, Partition};
use crate::matrix::{
    cholesky, invert_pd, sym_eigen, woodbury_precision, zero_pattern, Mat, SymMatrix, DEFAULT_TOL,
};
use crate::reduce::{build_pca, reduce_model, LinearReduction, MethodTag};

// ---------------------------------------------------------------------------
// Verdict
// ---------------------------------------------------------------------------

/// Three-way classification of a dimension reduction's effect on the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomotopyStatus {
    /// Reduced graph equals the cluster graph.
    Homotopic,
    /// Reduced graph is a strict subset: edges lost, none invented.
    WeaklyHomotopic,
    /// At least one edge of the reduced graph is absent from the cluster
    /// graph (a spurious edge).
    NotHomotopic,
}

impl std::fmt::Display for HomotopyStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HomotopyStatus::Homotopic => write!(f, "homotopic"),
            HomotopyStatus::WeaklyHomotopic => write!(f, "weakly-homotopic"),
            HomotopyStatus::NotHomotopic => write!(f, "not-homotopic"),
        }
    }
}

/// Verdict plus the edge-level evidence: spurious edges live in the reduced
/// graph but not the cluster graph; missing edges the other way around.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyVerdict {
    status: HomotopyStatus,
    spurious_edges: Vec<(usize, usize)>,
    missing_edges: Vec<(usize, usize)>,
}

impl HomotopyVerdict {
    /// Build a verdict from the two difference lists; the status is fully
    /// determined by which lists are empty.
    pub fn from_parts(
        spurious_edges: Vec<(usize, usize)>,
        missing_edges: Vec<(usize, usize)>,
    ) -> Self {
        let status = if !spurious_edges.is_empty() {
            HomotopyStatus::NotHomotopic
        } else if !missing_edges.is_empty() {
            HomotopyStatus::WeaklyHomotopic
        } else {
            HomotopyStatus::Homotopic
        };
        HomotopyVerdict {
            status,
            spurious_edges,
            missing_edges,
        }
    }

    pub fn status(&self) -> HomotopyStatus {
        self.status
    }

    /// Edges in the reduced graph that the cluster graph lacks (0-based).
    pub fn spurious_edges(&self) -> &[(usize, usize)] {
        &self.spurious_edges
    }

    /// Edges in the cluster graph that the reduced graph lost (0-based).
    pub fn missing_edges(&self) -> &[(usize, usize)] {
        &self.missing_edges
    }

    pub fn spurious_one_based(&self) -> Vec<(usize, usize)> {
        self.spurious_edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    pub fn missing_one_based(&self) -> Vec<(usize, usize)> {
        self.missing_edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    pub fn is_homotopic(&self) -> bool {
        self.status == HomotopyStatus::Homotopic
    }

    /// Weakly homotopic or better (no spurious edges).
    pub fn is_at_least_weak(&self) -> bool {
        self.spurious_edges.is_empty()
    }
}

/// Compare the reduced-model graph against the cluster graph.
pub fn homotopy_verdict(e_dr: &EdgeSet, e_c: &EdgeSet) -> Result<HomotopyVerdict> {
    if e_dr.n() != e_c.n() {
        return Err(GhomError::DimensionMismatch(format!(
            "reduced graph has {} vertices but cluster graph has {}",
            e_dr.n(),
            e_c.n()
        )));
    }
    Ok(HomotopyVerdict::from_parts(
        e_dr.difference(e_c),
        e_c.difference(e_dr),
    ))
}

// ---------------------------------------------------------------------------
// Factor models
// ---------------------------------------------------------------------------

/// Factor model `X = A Y + e` with one scalar factor per cluster: the
/// loading matrix `A` is d x K with cluster-block support, `Y ~ N(0, Σ_Y)`,
/// and `e ~ N(0, Ψ)` independent of `Y`.
#[derive(Debug, Clone)]
pub struct FactorModel {
    partition: Partition,
    loadings: Vec<Vec<f64>>,
    sigma_y: SymMatrix,
    psi: SymMatrix,
    psi_block_diagonal: bool,
}

impl FactorModel {
    /// Validates: loading lengths match cluster sizes and are not
    /// near-zero; `Σ_Y` is K x K and positive definite; `Ψ` is d x d and
    /// positive definite (the assembled covariance is then automatically
    /// positive definite). Detects whether `Ψ` is block-diagonal with
    /// respect to the partition (all cross-cluster entries at most
    /// `1e-12 · max diag`).
    pub fn new(
        partition: Partition,
        loadings: Vec<Vec<f64>>,
        sigma_y: SymMatrix,
        psi: SymMatrix,
    ) -> Result<Self> {
        if loadings.len() != partition.k() {
            return Err(GhomError::DimensionMismatch(format!(
                "{} loading vectors for {} clusters",
                loadings.len(),
                partition.k()
            )));
        }
        for (j, w) in loadings.iter().enumerate() {
            if w.len() != partition.cluster(j).len() {
                return Err(GhomError::DimensionMismatch(format!(
                    "cluster {} has {} members but loading has {} entries",
                    j + 1,
                    partition.cluster(j).len(),
                    w.len()
                )));
            }
            if w.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-12 {
                return Err(GhomError::InvalidInput(format!(
                    "loading for cluster {} is numerically zero",
                    j + 1
                )));
            }
        }
        if sigma_y.dim() != partition.k() {
            return Err(GhomError::DimensionMismatch(format!(
                "factor covariance is {}x{} but there are {} clusters",
                sigma_y.dim(),
                sigma_y.dim(),
                partition.k()
            )));
        }
        if psi.dim() != partition.d() {
            return Err(GhomError::DimensionMismatch(format!(
                "noise covariance is {}x{} but there are {} variables",
                psi.dim(),
                psi.dim(),
                partition.d()
            )));
        }
        cholesky(&sigma_y).map_err(|_| {
            GhomError::NotPositiveDefinite("factor covariance is not positive definite".into())
        })?;
        cholesky(&psi).map_err(|_| {
            GhomError::NotPositiveDefinite("noise covariance is not positive definite".into())
        })?;

        let owner = partition.cluster_of();
        let mut max_diag = 0.0f64;
        for i in 0..psi.dim() {
            max_diag = max_diag.max(psi.get(i, i).abs());
        }
        let mut block_diagonal = true;
        'outer: for i in 0..psi.dim() {
            for j in 0..psi.dim() {
                if owner[i] != owner[j] && psi.get(i, j).abs() > 1e-12 * max_diag {
                    block_diagonal = false;
                    break 'outer;
                }
            }
        }
        Ok(FactorModel {
            partition,
            loadings,
            sigma_y,
            psi,
            psi_block_diagonal: block_diagonal,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn sigma_y(&self) -> &SymMatrix {
        &self.sigma_y
    }

    pub fn psi(&self) -> &SymMatrix {
        &self.psi
    }

    pub fn loadings(&self) -> &[Vec<f64>] {
        &self.loadings
    }

    pub fn psi_block_diagonal(&self) -> bool {
        self.psi_block_diagonal
    }

    pub fn d(&self) -> usize {
        self.partition.d()
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    /// The d x K loading matrix with cluster-block support.
    pub fn loading_matrix(&self) -> Mat {
        let mut a = Mat::zeros(self.d(), self.k());
        for j in 0..self.k() {
            for (pos, &row) in self.partition.cluster(j).iter().enumerate() {
                a.set(row, j, self.loadings[j][pos]);
            }
        }
        a
    }

    /// Covariance of the observed vector: `A Σ_Y A^T + Ψ`.
    pub fn assembled_sigma(&self) -> SymMatrix {
        let a = self.loading_matrix();
        let mut s = a.matmul(&self.sigma_y.to_mat()).matmul(&a.transpose());
        for i in 0..self.d() {
            for j in 0..self.d() {
                let v = s.get(i, j) + self.psi.get(i, j);
                s.set(i, j, v);
            }
        }
        SymMatrix::from_mat_unchecked(&s)
    }

    /// The K x K surrogate noise term `Φ = (A^T Ψ^{-1} A)^{-1}`. For
    /// block-diagonal `Ψ` this is diagonal with entries
    /// `1 / (A_j^T Ψ_j^{-1} A_j)`.
    pub fn phi(&self) -> Result<SymMatrix> {
        let psi_inv = invert_pd(&self.psi)?;
        let a = self.loading_matrix();
        let m = a.transpose().matmul(&psi_inv.to_mat()).matmul(&a);
        invert_pd(&SymMatrix::from_mat_unchecked(&m)).map_err(|_| {
            GhomError::NotPositiveDefinite(
                "A^T Ψ^{-1} A is singular: a loading lies in a null space".into(),
            )
        })
    }
}

/// Everything `check_factor_homotopy` derives: the verdict, both edge sets,
/// and (when `Ψ` is block-diagonal) the surrogate route and its agreement
/// with the full route.
#[derive(Debug, Clone)]
pub struct FactorHomotopyReport {
    pub verdict: HomotopyVerdict,
    /// Graph of the factor vector: zero pattern of `Σ_Y^{-1}`.
    pub reduced_edges: EdgeSet,
    /// Cluster graph of the assembled model: block pattern of
    /// `(A Σ_Y A^T + Ψ)^{-1}`.
    pub cluster_edges: EdgeSet,
    /// Zero pattern of `(Σ_Y + Φ)^{-1}`; present iff `Ψ` is block-diagonal.
    pub surrogate_edges: Option<EdgeSet>,
    /// Whether the surrogate pattern equals the full-route cluster pattern.
    pub routes_agree: Option<bool>,
}

fn pattern_edges(m: &SymMatrix, tol: f64) -> EdgeSet {
    let p = zero_pattern(m, tol);
    let mut e = EdgeSet::new(m.dim());
    for (i, j) in p.offdiag_nonzeros() {
        e.insert(i, j).expect("pattern indices in range");
    }
    e
}

/// Decide whether a factor model's reduction (keeping the factor vector `Y`)
/// preserves the cluster graph.
///
/// The cluster graph is computed from the full concentration matrix
/// `(A Σ_Y A^T + Ψ)^{-1}` (obtained via the low-rank update identity).
/// When `Ψ` is block-diagonal the K x K surrogate `(Σ_Y + Φ)^{-1}` with
/// `Φ = (A^T Ψ^{-1} A)^{-1}` must reproduce exactly the same pattern; the
/// report records whether the two routes agree.
pub fn check_factor_homotopy(fm: &FactorModel, tol: f64) -> Result<FactorHomotopyReport> {
    let omega_y = invert_pd(fm.sigma_y())?;
    let reduced_edges = pattern_edges(&omega_y, tol);

    let a = fm.loading_matrix();
    let omega_full = woodbury_precision(&a, fm.sigma_y(), fm.psi())?;
    let raw_pattern = pattern_edges(&omega_full, tol);
    let cluster_edges = cluster_graph(&raw_pattern, fm.partition())?;

    let (surrogate_edges, routes_agree) = if fm.psi_block_diagonal() {
        let phi = fm.phi()?;
        let mut shifted = fm.sigma_y().to_mat();
        for i in 0..fm.k() {
            for j in 0..fm.k() {
                let v = shifted.get(i, j) + phi.get(i, j);
                shifted.set(i, j, v);
            }
        }
        let surrogate_omega = invert_pd(&SymMatrix::from_mat_unchecked(&shifted))?;
        let surrogate = pattern_edges(&surrogate_omega, tol);
        let agree = surrogate == cluster_edges;
        (Some(surrogate), Some(agree))
    } else {
        (None, None)
    };

    let verdict = homotopy_verdict(&reduced_edges, &cluster_edges)?;
    Ok(FactorHomotopyReport {
        verdict,
        reduced_edges,
        cluster_edges,
        surrogate_edges,
        routes_agree,
    })
}

// ---------------------------------------------------------------------------
// Spectral chord model
// ---------------------------------------------------------------------------

/// Spectral chord model: a factor model in which every cluster has the same
/// size and the same loading vector, the noise blocks are i.i.d. copies of
/// one block, and the factor covariance satisfies an eigenvector-support
/// condition tied to the zero pattern of `(Σ_Y + σ²I)^{-1}`.
#[derive(Debug, Clone)]
pub struct SpectralChordSpec {
    loading: Vec<f64>,
    noise: SymMatrix,
    sigma_y: SymMatrix,
    eig: crate::matrix::EigenDecomp,
    sigma_sq: f64,
}

impl SpectralChordSpec {
    /// `loading` is the shared per-cluster loading, `noise` the shared
    /// per-cluster noise covariance (positive definite), `sigma_y` the
    /// K x K factor covariance. The effective scalar noise of the reduced
    /// surrogate is `σ² = 1 / (a^T Ψ₁^{-1} a)`.
    pub fn new(loading: Vec<f64>, noise: SymMatrix, sigma_y: SymMatrix) -> Result<Self> {
        if loading.len() != noise.dim() {
            return Err(GhomError::DimensionMismatch(format!(
                "loading has {} entries but noise block is {}x{}",
                loading.len(),
                noise.dim(),
                noise.dim()
            )));
        }
        if loading.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-12 {
            return Err(GhomError::InvalidInput(
                "shared loading is numerically zero".into(),
            ));
        }
        let noise_inv = invert_pd(&noise).map_err(|_| {
            GhomError::NotPositiveDefinite("noise block is not positive definite".into())
        })?;
        cholesky(&sigma_y).map_err(|_| {
            GhomError::NotPositiveDefinite("factor covariance is not positive definite".into())
        })?;
        let pinva = noise_inv.to_mat().matvec(&loading);
        let quad: f64 = loading.iter().zip(&pinva).map(|(a, b)| a * b).sum();
        if quad <= 0.0 {
            return Err(GhomError::NotPositiveDefinite(
                "loading quadratic form is not positive".into(),
            ));
        }
        let eig = sym_eigen(&sigma_y)?;
        Ok(SpectralChordSpec {
            loading,
            noise,
            sigma_y,
            eig,
            sigma_sq: 1.0 / quad,
        })
    }

    pub fn k(&self) -> usize {
        self.sigma_y.dim()
    }

    pub fn cluster_size(&self) -> usize {
        self.loading.len()
    }

    pub fn loading(&self) -> &[f64] {
        &self.loading
    }

    pub fn noise(&self) -> &SymMatrix {
        &self.noise
    }

    pub fn sigma_y(&self) -> &SymMatrix {
        &self.sigma_y
    }

    pub fn eigen(&self) -> &crate::matrix::EigenDecomp {
        &self.eig
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    /// The factor model with this spec's shared loading and i.i.d. noise
    /// blocks on K equal-size contiguous clusters.
    pub fn to_factor_model(&self) -> Result<FactorModel> {
        let k = self.k();
        let d1 = self.cluster_size();
        let partition = Partition::contiguous(&vec![d1; k])?;
        let loadings = vec![self.loading.clone(); k];
        let blocks: Vec<Mat> = (0..k).map(|_| self.noise.to_mat()).collect();
        let psi = SymMatrix::from_mat_unchecked(&Mat::block_diag(&blocks));
        FactorModel::new(partition, loadings, self.sigma_y.clone(), psi)
    }
}

/// One failure of the eigenvector-support condition: the spectral projector
/// of the eigenvalue group starting at (descending) position `group_start`
/// is nonzero on a pair `(j, k)` at which the shifted inverse
/// `(Σ_Y + σ²I)^{-1}` vanishes. Indices are 0-based. For a simple eigenvalue
/// the projector entry is exactly the eigenvector entry product
/// `u[j] · u[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChordViolation {
    pub group_start: usize,
    pub j: usize,
    pub k: usize,
    pub product: f64,
}

impl std::fmt::Display for ChordViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "eigenvalue group at {} has projector entry {:.3e} on pair ({}, {})",
            self.group_start + 1,
            self.product,
            self.j + 1,
            self.k + 1
        )
    }
}

/// Result of checking the eigenvector-support condition.
#[derive(Debug, Clone)]
pub struct ChordCheck {
    pub holds: bool,
    pub violations: Vec<ChordViolation>,
}

/// Check the spectral chord support condition: wherever
/// `(Σ_Y + σ²I)^{-1}` has a (structural) zero off-diagonal entry `(j,k)`,
/// the spectral projector of every eigenvalue group of `Σ_Y` must vanish
/// there. For simple eigenvalues this is the eigenvector product condition
/// `u_i[j] · u_i[k] = 0`; phrasing it through projectors keeps the check
/// well-defined when eigenvalues repeat, where individual eigenvectors are
/// an arbitrary basis choice but the group projector is not. Projector
/// zeros on a pattern are exactly what every spectral function
/// `f(Σ_Y) = Σ f(λ_g) P_g` inherits, which is the property the reduction
/// relies on.
///
/// The identical-loading and i.i.d.-noise conditions hold by construction
/// of [`SpectralChordSpec`], so only the support condition is examined.
/// Violations are reported, never raised as errors.
pub fn verify_spectral_chord(spec: &SpectralChordSpec, tol: f64) -> ChordCheck {
    let k = spec.k();
    let mut shifted = spec.sigma_y().to_mat();
    for i in 0..k {
        let v = shifted.get(i, i) + spec.sigma_sq();
        shifted.set(i, i, v);
    }
    let inv = invert_pd(&SymMatrix::from_mat_unchecked(&shifted))
        .expect("a positive diagonal shift of a validated covariance stays positive definite");
    let pattern = zero_pattern(&inv, tol);
    let eig = spec.eigen();
    let scale = eig.values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let gap_limit = 1e-10 * scale;
    let mut violations = Vec::new();
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && (eig.values[end - 1] - eig.values[end]).abs() <= gap_limit {
            end += 1;
        }
        for j in 0..k {
            for kk in (j + 1)..k {
                if pattern.is_nonzero(j, kk) {
                    continue;
                }
                let product: f64 = (start..end)
                    .map(|i| eig.vectors.get(j, i) * eig.vectors.get(kk, i))
                    .sum();
                if product.abs() > tol {
                    violations.push(ChordViolation {
                        group_start: start,
                        j,
                        k: kk,
                        product,
                    });
                }
            }
        }
        start = end;
    }
    ChordCheck {
        holds: violations.is_empty(),
        violations,
    }
}

/// Assemble the spectral chord model's full covariance, compare the factor
/// graph against the cluster graph, and certify that no spurious edge
/// appears. Returns the verdict (homotopic or weakly homotopic); a spurious
/// edge is a [`GhomError::PropertyViolation`], since the model family
/// guarantees weak homotopy.
pub fn spectral_chord_weak_homotopy(
    spec: &SpectralChordSpec,
    tol: f64,
) -> Result<HomotopyVerdict> {
    let fm = spec.to_factor_model()?;
    let report = check_factor_homotopy(&fm, tol)?;
    if !report.verdict.is_at_least_weak() {
        return Err(GhomError::PropertyViolation(format!(
            "spectral chord model produced spurious edges {:?}",
            report.verdict.spurious_one_based()
        )));
    }
    Ok(report.verdict)
}

// ---------------------------------------------------------------------------
// Latent rotation model
// ---------------------------------------------------------------------------

/// Latent rotation model: cluster `j` observes `U_j D_j Z_j` where the
/// latent blocks have `Cov(Z_j, Z_k) = a_jk · I`, so the full covariance is
/// `blockdiag(U_j D_j) · (A ⊗ I) · blockdiag(D_j U_j^T)` with every cluster
/// of equal size.
#[derive(Debug, Clone)]
pub struct LatentRotationSpec {
    a: SymMatrix,
    d_f: usize,
    d_diag: Vec<Vec<f64>>,
    u: Vec<Mat>,
}

impl LatentRotationSpec {
    /// `a` is the K x K latent coupling (entrywise nonnegative, positive
    /// definite), `d_diag[j]` the diagonal of `D_j` (nonzero entries), and
    /// `u[j]` the orthogonal frame of cluster `j`
    /// (`‖U_j^T U_j − I‖∞ ≤ 1e-10`).
    pub fn new(a: SymMatrix, d_diag: Vec<Vec<f64>>, u: Vec<Mat>) -> Result<Self> {
        let k = a.dim();
        if d_diag.len() != k || u.len() != k {
            return Err(GhomError::DimensionMismatch(format!(
                "coupling is {}x{} but got {} diagonal blocks and {} frames",
                k,
                k,
                d_diag.len(),
                u.len()
            )));
        }
        if k == 0 {
            return Err(GhomError::InvalidInput("empty latent coupling".into()));
        }
        let d_f = d_diag[0].len();
        if d_f == 0 {
            return Err(GhomError::InvalidInput("zero-size latent blocks".into()));
        }
        for i in 0..k {
            for j in 0..k {
                if a.get(i, j) < 0.0 {
                    return Err(GhomError::InvalidInput(format!(
                        "coupling entry ({}, {}) is negative",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        cholesky(&a).map_err(|_| {
            GhomError::NotPositiveDefinite("latent coupling is not positive definite".into())
        })?;
        for (j, dj) in d_diag.iter().enumerate() {
            if dj.len() != d_f {
                return Err(GhomError::DimensionMismatch(format!(
                    "diagonal block {} has {} entries, expected {}",
                    j + 1,
                    dj.len(),
                    d_f
                )));
            }
            if dj.iter().any(|&x| x == 0.0) {
                return Err(GhomError::InvalidInput(format!(
                    "diagonal block {} has a zero entry",
                    j + 1
                )));
            }
        }
        for (j, uj) in u.iter().enumerate() {
            if uj.rows() != d_f || uj.cols() != d_f {
                return Err(GhomError::DimensionMismatch(format!(
                    "frame {} is {}x{}, expected {}x{}",
                    j + 1,
                    uj.rows(),
                    uj.cols(),
                    d_f,
                    d_f
                )));
            }
            let gram = uj.transpose().matmul(uj);
            if gram.max_abs_diff(&Mat::identity(d_f)) > 1e-10 {
                return Err(GhomError::InvalidInput(format!(
                    "frame {} is not orthogonal within 1e-10",
                    j + 1
                )));
            }
        }
        Ok(LatentRotationSpec { a, d_f, d_diag, u })
    }

    pub fn k(&self) -> usize {
        self.a.dim()
    }

    pub fn d_f(&self) -> usize {
        self.d_f
    }

    pub fn coupling(&self) -> &SymMatrix {
        &self.a
    }

    pub fn d_diag(&self, j: usize) -> &[f64] {
        &self.d_diag[j]
    }

    pub fn frame(&self, j: usize) -> &Mat {
        &self.u[j]
    }

    /// Within-cluster covariance spectra are `a_jj · d_ji²`; true when any
    /// within-cluster gap falls below `1e-8`, which makes "the eigenvectors
    /// of the cluster covariance" ambiguous.
    pub fn degenerate_spectrum(&self) -> bool {
        for j in 0..self.k() {
            let ajj = self.a.get(j, j);
            let mut vals: Vec<f64> = self.d_diag[j].iter().map(|&x| ajj * x * x).collect();
            vals.sort_by(|x, y| y.partial_cmp(x).expect("finite spectra"));
            for w in vals.windows(2) {
                if (w[0] - w[1]).abs() < 1e-8 {
                    return true;
                }
            }
        }
        false
    }
}

/// Assemble the latent rotation covariance
/// `blockdiag(U_j) blockdiag(D_j) (A ⊗ I) blockdiag(D_j) blockdiag(U_j)^T`
/// on K contiguous clusters of size `d_f`.
pub fn build_latent_rotation(spec: &LatentRotationSpec) -> Result<GgmModel> {
    let k = spec.k();
    let d_f = spec.d_f();
    let frames: Vec<Mat> = (0..k).map(|j| spec.frame(j).clone()).collect();
    let diags: Vec<Mat> = (0..k)
        .map(|j| {
            let mut m = Mat::zeros(d_f, d_f);
            for (i, &v) in spec.d_diag(j).iter().enumerate() {
                m.set(i, i, v);
            }
            m
        })
        .collect();
    let big_u = Mat::block_diag(&frames);
    let big_d = Mat::block_diag(&diags);
    let kron = spec.coupling().to_mat().kron(&Mat::identity(d_f));
    let b = big_u.matmul(&big_d);
    let sigma = b.matmul(&kron).matmul(&b.transpose());
    let partition = Partition::contiguous(&vec![d_f; k])?;
    crate::ggm::model_from_covariance(SymMatrix::from_mat_unchecked(&sigma), partition)
}

/// Verdict of reducing a latent rotation model by per-cluster eigenvector
/// projections, plus a flag for ambiguous (near-degenerate) spectra.
#[derive(Debug, Clone)]
pub struct RotationCheck {
    pub verdict: HomotopyVerdict,
    pub degenerate_spectrum: bool,
}

/// Reduce a latent rotation model by projecting each cluster onto its
/// `component_index[j]`-th covariance eigenvector (1-based, descending
/// eigenvalue order) and compare the reduced graph with the cluster graph.
///
/// The cluster graph must equal the off-diagonal zero pattern of `A^{-1}`
/// (the concentration blocks are `(A^{-1})_{jk} U_j D_j^{-1} D_k^{-1} U_k^T`);
/// a mismatch is reported as a [`GhomError::PropertyViolation`]. When all
/// clusters select the same latent coordinate the verdict is homotopic:
/// the reduced covariance `diag(d_{j,i}) A diag(d_{k,i})` is a diagonal
/// congruence of `A`.
pub fn check_eigenvector_reduction(
    spec: &LatentRotationSpec,
    component_index: &[usize],
) -> Result<RotationCheck> {
    let model = build_latent_rotation(spec)?;
    let red = build_pca(&model, component_index)?;
    let reduced = reduce_model(&model, &red)?;
    let e_dr = reduced.reduced_graph(DEFAULT_TOL);
    let raw = conditional_graph(&model, DEFAULT_TOL);
    let e_c = cluster_graph(&raw, model.partition())?;

    let a_inv = spec.coupling().to_mat().inverse().map_err(|_| {
        GhomError::SingularTransform("latent coupling is numerically singular".into())
    })?;
    let a_inv_edges = pattern_edges(&SymMatrix::from_mat_unchecked(&a_inv), DEFAULT_TOL);
    if a_inv_edges != e_c {
        return Err(GhomError::PropertyViolation(format!(
            "cluster graph {:?} differs from the coupling-inverse pattern {:?}",
            e_c.to_one_based(),
            a_inv_edges.to_one_based()
        )));
    }

    Ok(RotationCheck {
        verdict: homotopy_verdict(&e_dr, &e_c)?,
        degenerate_spectrum: spec.degenerate_spectrum(),
    })
}

// ---------------------------------------------------------------------------
// Corner-structured concentration matrices
// ---------------------------------------------------------------------------

/// Concentration matrix of the form `blockdiag(U_j) Λ blockdiag(U_j)^T`
/// where every block `Λ_{jk}` has corner structure: its first row beyond
/// column 1 and first column beyond row 1 vanish. Reducing each cluster
/// along the first column of its frame `U_j` then has reduced concentration
/// exactly `[(Λ_{jk})_{11}]`.
#[derive(Debug, Clone)]
pub struct StructuredPrecision {
    partition: Partition,
    u: Vec<Mat>,
    /// Slot-indexed (clusters concatenated in partition order).
    lambda: Mat,
}

impl StructuredPrecision {
    /// `u[j]` is an invertible `d_j x d_j` frame; `lambda` is the full
    /// symmetric core, indexed by slots (cluster members concatenated in
    /// partition order), with the corner pattern holding on every block and
    /// the assembled concentration positive definite.
    pub fn new(partition: Partition, u: Vec<Mat>, lambda: Mat) -> Result<Self> {
        let d = partition.d();
        if u.len() != partition.k() {
            return Err(GhomError::DimensionMismatch(format!(
                "{} frames for {} clusters",
                u.len(),
                partition.k()
            )));
        }
        if lambda.rows() != d || lambda.cols() != d {
            return Err(GhomError::DimensionMismatch(format!(
                "core is {}x{}, expected {}x{}",
                lambda.rows(),
                lambda.cols(),
                d,
                d
            )));
        }
        for (j, uj) in u.iter().enumerate() {
            let dj = partition.cluster(j).len();
            if uj.rows() != dj || uj.cols() != dj {
                return Err(GhomError::DimensionMismatch(format!(
                    "frame {} is {}x{}, expected {}x{}",
                    j + 1,
                    uj.rows(),
                    uj.cols(),
                    dj,
                    dj
                )));
            }
            uj.inverse().map_err(|_| {
                GhomError::SingularTransform(format!("frame {} is singular", j + 1))
            })?;
        }
        let scale = lambda.max_abs().max(1.0);
        if lambda.max_abs_diff(&lambda.transpose()) > 1e-12 * scale {
            return Err(GhomError::AsymmetricInput {
                max_asym: lambda.max_abs_diff(&lambda.transpose()),
                limit: 1e-12 * scale,
            });
        }
        // Corner pattern on every block, diagonal blocks included.
        let offsets = slot_offsets(&partition);
        for j in 0..partition.k() {
            for k in 0..partition.k() {
                let (oj, dj) = (offsets[j], partition.cluster(j).len());
                let (ok, dk) = (offsets[k], partition.cluster(k).len());
                for c in 1..dk {
                    if lambda.get(oj, ok + c).abs() > 1e-12 * scale {
                        return Err(GhomError::PropertyViolation(format!(
                            "core block ({}, {}) has nonzero first-row entry at column {}",
                            j + 1,
                            k + 1,
                            c + 1
                        )));
                    }
                }
                for r in 1..dj {
                    if lambda.get(oj + r, ok).abs() > 1e-12 * scale {
                        return Err(GhomError::PropertyViolation(format!(
                            "core block ({}, {}) has nonzero first-column entry at row {}",
                            j + 1,
                            k + 1,
                            r + 1
                        )));
                    }
                }
            }
        }
        let sp = StructuredPrecision {
            partition,
            u,
            lambda,
        };
        cholesky(&SymMatrix::from_mat_unchecked(&sp.assemble_omega())).map_err(|_| {
            GhomError::NotPositiveDefinite(
                "assembled concentration matrix is not positive definite".into(),
            )
        })?;
        Ok(sp)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn frame(&self, j: usize) -> &Mat {
        &self.u[j]
    }

    pub fn core(&self) -> &Mat {
        &self.lambda
    }

    /// The corner entries `(Λ_{jk})_{11}` as a K x K matrix: exactly the
    /// reduced concentration under first-column reduction.
    pub fn corner_matrix(&self) -> Mat {
        let offsets = slot_offsets(&self.partition);
        let k = self.partition.k();
        let mut m = Mat::zeros(k, k);
        for j in 0..k {
            for l in 0..k {
                m.set(j, l, self.lambda.get(offsets[j], offsets[l]));
            }
        }
        m
    }

    /// Strictness: every off-diagonal block whose corner entry vanishes
    /// must vanish entirely.
    pub fn is_strict(&self) -> bool {
        let offsets = slot_offsets(&self.partition);
        let scale = self.lambda.max_abs().max(1.0);
        let k = self.partition.k();
        for j in 0..k {
            for l in 0..k {
                if j == l {
                    continue;
                }
                if self.lambda.get(offsets[j], offsets[l]).abs() > 1e-12 * scale {
                    continue;
                }
                let dj = self.partition.cluster(j).len();
                let dl = self.partition.cluster(l).len();
                for r in 0..dj {
                    for c in 0..dl {
                        if self.lambda.get(offsets[j] + r, offsets[l] + c).abs() > 1e-12 * scale
                        {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Assembled concentration matrix, raw-indexed:
    /// entry `(C_j[r], C_k[c]) = (U_j Λ_{jk} U_k^T)_{rc}`.
    pub fn assemble_omega(&self) -> Mat {
        let offsets = slot_offsets(&self.partition);
        let d = self.partition.d();
        let k = self.partition.k();
        let mut omega = Mat::zeros(d, d);
        for j in 0..k {
            let members_j = self.partition.cluster(j);
            let dj = members_j.len();
            for l in 0..k {
                let members_l = self.partition.cluster(l);
                let dl = members_l.len();
                // U_j Λ_{jl} U_l^T
                let mut block = Mat::zeros(dj, dl);
                for r in 0..dj {
                    for c in 0..dl {
                        block.set(r, c, self.lambda.get(offsets[j] + r, offsets[l] + c));
                    }
                }
                let block = self.u[j].matmul(&block).matmul(&self.u[l].transpose());
                for r in 0..dj {
                    for c in 0..dl {
                        omega.set(members_j[r], members_l[c], block.get(r, c));
                    }
                }
            }
        }
        omega
    }

    /// First column of every frame, as a reduction.
    pub fn first_column_reduction(&self) -> Result<LinearReduction> {
        let dirs: Vec<Vec<f64>> = self.u.iter().map(|uj| uj.column(0)).collect();
        LinearReduction::from_directions(dirs, MethodTag::Custom)
    }
}

fn slot_offsets(partition: &Partition) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(partition.k());
    let mut acc = 0;
    for j in 0..partition.k() {
        offsets.push(acc);
        acc += partition.cluster(j).len();
    }
    offsets
}

/// Reduce a corner-structured model along the first columns of its frames
/// and compare graphs. The corner structure guarantees no spurious edges
/// (the reduced concentration is exactly the corner matrix), so a spurious
/// finding is a [`GhomError::PropertyViolation`]. With `strict = true` the
/// caller asserts the strictness condition; it is re-verified and the
/// verdict must then be fully homotopic.
pub fn check_structured_precision(
    sp: &StructuredPrecision,
    strict: bool,
) -> Result<HomotopyVerdict> {
    if strict && !sp.is_strict() {
        return Err(GhomError::InvalidInput(
            "strictness asserted, but some block has a vanishing corner with nonzero remainder"
                .into(),
        ));
    }
    let omega = SymMatrix::from_mat_unchecked(&sp.assemble_omega());
    let model = crate::ggm::model_from_precision(omega, sp.partition().clone())?;
    let red = sp.first_column_reduction()?;
    let reduced = reduce_model(&model, &red)?;
    let e_dr = reduced.reduced_graph(DEFAULT_TOL);
    let raw = conditional_graph(&model, DEFAULT_TOL);
    let e_c = cluster_graph(&raw, model.partition())?;
    let verdict = homotopy_verdict(&e_dr, &e_c)?;
    if !verdict.is_at_least_weak() {
        return Err(GhomError::PropertyViolation(format!(
            "corner-structured model produced spurious edges {:?}",
            verdict.spurious_one_based()
        )));
    }
    if strict && !verdict.is_homotopic() {
        return Err(GhomError::PropertyViolation(format!(
            "strict corner structure must be homotopic, found missing edges {:?}",
            verdict.missing_one_based()
        )));
    }
    Ok(verdict)
}

// ---------------------------------------------------------------------------
// Raw-variable transformations
// ---------------------------------------------------------------------------

/// A transformation of the raw variables before any reduction.
#[derive(Debug, Clone)]
pub enum RawTransform {
    /// `x_i ↦ a_i + b_i x_i` per coordinate; requires every `b_i ≠ 0`.
    PerCoordinate { shifts: Vec<f64>, scales: Vec<f64> },
    /// `x ↦ shift + M x`; requires `M` invertible.
    FullLinear { shift: Vec<f64>, matrix: Mat },
}

/// Graphs of the raw model before and after a transformation, with
/// pattern-equality summaries.
#[derive(Debug, Clone)]
pub struct TransformReport {
    pub conditional_before: EdgeSet,
    pub conditional_after: EdgeSet,
    pub marginal_before: EdgeSet,
    pub marginal_after: EdgeSet,
    pub conditional_equal: bool,
    pub marginal_equal: bool,
}

/// Apply a raw-variable transformation and report both graphs before and
/// after. Per-coordinate scalings are diagonal congruences and never change
/// either pattern; a general invertible map usually changes the conditional
/// pattern.
pub fn analyze_transform(
    model: &GgmModel,
    transform: &RawTransform,
    tol: f64,
) -> Result<TransformReport> {
    let d = model.d();
    let sigma_after = match transform {
        RawTransform::PerCoordinate { shifts, scales } => {
            if shifts.len() != d || scales.len() != d {
                return Err(GhomError::DimensionMismatch(format!(
                    "transform is over {} coordinates but model has {}",
                    scales.len().max(shifts.len()),
                    d
                )));
            }
            if let Some(i) = scales.iter().position(|&b| b == 0.0) {
                return Err(GhomError::SingularTransform(format!(
                    "scale for coordinate {} is zero",
                    i + 1
                )));
            }
            let mut s = model.sigma().to_mat();
            for i in 0..d {
                for j in 0..d {
                    s.set(i, j, scales[i] * s.get(i, j) * scales[j]);
                }
            }
            SymMatrix::from_mat_unchecked(&s)
        }
        RawTransform::FullLinear { shift, matrix } => {
            if shift.len() != d || matrix.rows() != d || matrix.cols() != d {
                return Err(GhomError::DimensionMismatch(format!(
                    "transform matrix is {}x{} but model has {} variables",
                    matrix.rows(),
                    matrix.cols(),
                    d
                )));
            }
            matrix.inverse().map_err(|_| {
                GhomError::SingularTransform("transform matrix is singular".into())
            })?;
            let s = matrix.matmul(&model.sigma().to_mat()).matmul(&matrix.transpose());
            SymMatrix::from_mat_unchecked(&s)
        }
    };
    let model_after =
        crate::ggm::model_from_covariance(sigma_after, model.partition().clone())?;
    let conditional_before = conditional_graph(model, tol);
    let conditional_after = conditional_graph(&model_after, tol);
    let marginal_before = marginal_graph(model, tol);
    let marginal_after = marginal_graph(&model_after, tol);
    Ok(TransformReport {
        conditional_equal: conditional_before == conditional_after,
        marginal_equal: marginal_before == marginal_after,
        conditional_before,
        conditional_after,
        marginal_before,
        marginal_after,
    })
}

// ---------------------------------------------------------------------------
// Non-homotopy witness
// ---------------------------------------------------------------------------

/// A compact verified witness that within-cluster averaging can invent a
/// conditional edge: four variables with concentration matrix
///
/// ```text
/// [[1, 0.5, 0,   0  ],
///  [0.5, 1, 0.4, 0.3],
///  [0,  0.4, 1,  0.5],
///  [0,  0.3, 0.5, 1 ]]
/// ```
///
/// and clusters `{1}, {2,3}, {4}`. Vertices 1 and 4 are separated by the
/// middle cluster (`Ω₁₄ = 0`, so the cluster graph has no (1,3) edge), yet
/// averaging the middle cluster produces a reduced concentration with
/// `(Ω_Y)₁₃ = 1/12` — an asymmetric bridge: the two middle variables couple
/// to the endpoints with different weights, and their average cannot carry
/// the full separating information. Returns the model and the expected
/// verdict (not homotopic, spurious edge (1,3), no missing edges).
pub fn asymmetric_bridge_fixture() -> (GgmModel, HomotopyVerdict) {
    let omega = SymMatrix::new(&[
        vec![1.0, 0.5, 0.0, 0.0],
        vec![0.5, 1.0, 0.4, 0.3],
        vec![0.0, 0.4, 1.0, 0.5],
        vec![0.0, 0.3, 0.5, 1.0],
    ])
    .expect("fixture matrix is symmetric");
    let partition = Partition::from_one_based(4, vec![vec![1], vec![2, 3], vec![4]])
        .expect("fixture partition is valid");
    let model = crate::ggm::model_from_precision(omega, partition)
        .expect("fixture concentration is positive definite");
    let verdict = HomotopyVerdict::from_parts(vec![(0, 2)], Vec::new());
    (model, verdict)
}

// ---------------------------------------------------------------------------
// Seeded generators
// ---------------------------------------------------------------------------

use crate::estimate::{standard_normal, uniform_index, unit_uniform};
use rand_chacha::ChaCha8Rng;

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    loop {
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g.set(i, j, standard_normal(rng));
            }
        }
        if let Ok(q) = g.gram_schmidt() {
            return q;
        }
    }
}

/// Distinct values (pairwise gaps above `min_gap`) drawn by `draw`.
fn distinct_values(
    n: usize,
    min_gap: f64,
    rng: &mut ChaCha8Rng,
    draw: impl Fn(&mut ChaCha8Rng) -> f64,
) -> Vec<f64> {
    let mut vals: Vec<f64> = Vec::with_capacity(n);
    while vals.len() < n {
        let v = draw(rng);
        if vals.iter().all(|&w| (w - v).abs() > min_gap) {
            vals.push(v);
        }
    }
    vals
}

/// Random spectral chord spec with group-structured factor eigenvectors:
/// the K factor coordinates are split into contiguous groups of size ≤ 3,
/// the eigenvector frame is block-orthogonal over the groups (so products
/// across groups vanish exactly), and eigenvalues are log-uniform in
/// `[0.5, 5]` with pairwise gaps above `1e-3`.
pub fn random_spectral_chord(
    k: usize,
    cluster_size: usize,
    seed: RngSeed,
) -> Result<SpectralChordSpec> {
    if k == 0 || cluster_size == 0 {
        return Err(GhomError::InvalidInput(
            "need at least one cluster and one variable per cluster".into(),
        ));
    }
    let mut rng = seed.stream(0);
    // Contiguous groups of size 1..=3.
    let mut group_sizes = Vec::new();
    let mut rem = k;
    while rem > 0 {
        let g = 1 + uniform_index(&mut rng, rem.min(3));
        group_sizes.push(g);
        rem -= g;
    }
    let blocks: Vec<Mat> = group_sizes
        .iter()
        .map(|&g| random_orthogonal(g, &mut rng))
        .collect();
    let u = Mat::block_diag(&blocks);
    let (lo, hi) = (0.5f64.ln(), 5.0f64.ln());
    let values = distinct_values(k, 1e-3, &mut rng, |r| {
        (lo + unit_uniform(r) * (hi - lo)).exp()
    });
    let mut sigma_y = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for l in 0..k {
                s += u.get(i, l) * values[l] * u.get(j, l);
            }
            sigma_y.set(i, j, s);
        }
    }
    let mut loading = vec![0.0f64; cluster_size];
    for x in loading.iter_mut() {
        *x = standard_normal(&mut rng);
    }
    if loading.iter().map(|x| x * x).sum::<f64>().sqrt() < 0.5 {
        loading[0] += 1.0;
    }
    let mut g = Mat::zeros(cluster_size, cluster_size);
    for i in 0..cluster_size {
        for j in 0..cluster_size {
            g.set(i, j, standard_normal(&mut rng));
        }
    }
    let mut noise = g.transpose().matmul(&g);
    for i in 0..cluster_size {
        for j in 0..cluster_size {
            let v = noise.get(i, j) / cluster_size as f64 + if i == j { 0.5 } else { 0.0 };
            noise.set(i, j, v);
        }
    }
    SpectralChordSpec::new(
        loading,
        SymMatrix::from_mat_unchecked(&noise),
        SymMatrix::from_mat_unchecked(&sigma_y),
    )
}

/// Random latent rotation spec: nonnegative symmetric coupling made
/// positive definite by diagonal dominance, optional planted zero pairs
/// (0-based), per-cluster diagonals uniform in `[0.5, 2]` with pairwise
/// gaps above `1e-3` sorted descending (so eigenvalue rank equals latent
/// coordinate in every cluster), and orthogonalized Gaussian frames.
pub fn random_latent_rotation(
    k: usize,
    d_f: usize,
    planted_zeros: &[(usize, usize)],
    seed: RngSeed,
) -> Result<LatentRotationSpec> {
    if k == 0 || d_f == 0 {
        return Err(GhomError::InvalidInput(
            "need at least one cluster and one latent coordinate".into(),
        ));
    }
    for &(i, j) in planted_zeros {
        if i >= k || j >= k {
            return Err(GhomError::IndexOutOfRange(format!(
                "planted pair ({}, {}) exceeds {} clusters",
                i + 1,
                j + 1,
                k
            )));
        }
        if i == j {
            return Err(GhomError::InvalidInput(
                "cannot plant a zero on the coupling diagonal".into(),
            ));
        }
    }
    let mut rng = seed.stream(0);
    let mut a = Mat::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (unit_uniform(&mut rng) + unit_uniform(&mut rng)) * 0.5 + 0.25;
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    for &(i, j) in planted_zeros {
        a.set(i, j, 0.0);
        a.set(j, i, 0.0);
    }
    for i in 0..k {
        let row_sum: f64 = (0..k).filter(|&j| j != i).map(|j| a.get(i, j)).sum();
        a.set(i, i, row_sum + 0.5 + unit_uniform(&mut rng));
    }
    let d_diag: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let mut v = distinct_values(d_f, 1e-3, &mut rng, |r| 0.5 + 1.5 * unit_uniform(r));
            v.sort_by(|x, y| y.partial_cmp(x).expect("finite diagonals"));
            v
        })
        .collect();
    let u: Vec<Mat> = (0..k).map(|_| random_orthogonal(d_f, &mut rng)).collect();
    LatentRotationSpec::new(SymMatrix::from_mat_unchecked(&a), d_diag, u)
}

/// Random corner-structured concentration core and frames.
///
/// `planted` lists 0-based cluster pairs whose corner entry is forced to
/// zero; with `strict = true` the whole block is zeroed (the reduction is
/// then fully homotopic), with `strict = false` the block keeps a nonzero
/// remainder (the reduction then loses that edge). Frames are orthogonal
/// when `orthogonal` is set, otherwise generic invertible.
pub fn random_structured_precision(
    sizes: &[usize],
    planted: &[(usize, usize)],
    strict: bool,
    orthogonal: bool,
    seed: RngSeed,
) -> Result<StructuredPrecision> {
    let k = sizes.len();
    if k == 0 || sizes.iter().any(|&s| s == 0) {
        return Err(GhomError::InvalidInput(
            "cluster sizes must be positive".into(),
        ));
    }
    for &(i, j) in planted {
        if i >= k || j >= k {
            return Err(GhomError::IndexOutOfRange(format!(
                "planted pair ({}, {}) exceeds {} clusters",
                i + 1,
                j + 1,
                k
            )));
        }
        if i == j {
            return Err(GhomError::InvalidInput(
                "cannot plant a zero on a diagonal block".into(),
            ));
        }
    }
    let planted_set: std::collections::BTreeSet<(usize, usize)> = planted
        .iter()
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .collect();
    let mut rng = seed.stream(0);
    let partition = Partition::contiguous(sizes)?;
    let d = partition.d();
    let offsets = slot_offsets(&partition);
    let d_max = *sizes.iter().max().expect("nonempty sizes") as f64;
    // Keep off-diagonal blocks small enough for diagonal dominance.
    let delta = 1.0 / (2.0 * k as f64 * d_max);
    let mut lambda = Mat::zeros(d, d);
    for j in 0..k {
        let (oj, dj) = (offsets[j], sizes[j]);
        lambda.set(oj, oj, 1.0 + 0.5 * unit_uniform(&mut rng));
        for r in 1..dj {
            lambda.set(oj + r, oj + r, 1.0 + 0.5 * unit_uniform(&mut rng));
            for c in (r + 1)..dj {
                let v = 0.1 * (2.0 * unit_uniform(&mut rng) - 1.0);
                lambda.set(oj + r, oj + c, v);
                lambda.set(oj + c, oj + r, v);
            }
        }
    }
    for j in 0..k {
        for l in (j + 1)..k {
            let (oj, dj) = (offsets[j], sizes[j]);
            let (ol, dl) = (offsets[l], sizes[l]);
            let zero_corner = planted_set.contains(&(j, l));
            let corner = if zero_corner {
                0.0
            } else {
                let sign = if unit_uniform(&mut rng) < 0.5 { -1.0 } else { 1.0 };
                sign * delta * (0.5 + 0.5 * unit_uniform(&mut rng))
            };
            lambda.set(oj, ol, corner);
            lambda.set(ol, oj, corner);
            let zero_remainder = zero_corner && strict;
            for r in 1..dj {
                for c in 1..dl {
                    let v = if zero_remainder {
                        0.0
                    } else {
                        delta * (0.4 + 0.6 * unit_uniform(&mut rng))
                    };
                    lambda.set(oj + r, ol + c, v);
                    lambda.set(ol + c, oj + r, v);
                }
            }
        }
    }
    let u: Vec<Mat> = sizes
        .iter()
        .map(|&s| {
            if orthogonal {
                random_orthogonal(s, &mut rng)
            } else {
                loop {
                    let mut g = Mat::zeros(s, s);
                    for i in 0..s {
                        for j in 0..s {
                            g.set(i, j, standard_normal(&mut rng));
                        }
                    }
                    if g.inverse().is_ok() {
                        break g;
                    }
                }
            }
        })
        .collect();
    StructuredPrecision::new(partition, u, lambda)
}

/// Random factor model with the given cluster sizes: Gaussian loadings
/// (re-drawn when near zero), a dense positive definite factor covariance,
/// and either a block-diagonal or a dense-ridge noise covariance.
pub fn random_factor_model(
    sizes: &[usize],
    block_diagonal_noise: bool,
    seed: RngSeed,
) -> Result<FactorModel> {
    let k = sizes.len();
    if k == 0 || sizes.iter().any(|&s| s == 0) {
        return Err(GhomError::InvalidInput(
            "cluster sizes must be positive".into(),
        ));
    }
    let mut rng = seed.stream(0);
    let partition = Partition::contiguous(sizes)?;
    let d = partition.d();
    let loadings: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&s| {
            let mut w: Vec<f64> = (0..s).map(|_| standard_normal(&mut rng)).collect();
            if w.iter().map(|x| x * x).sum::<f64>().sqrt() < 0.5 {
                w[0] += 1.0;
            }
            w
        })
        .collect();
    let mut g = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            g.set(i, j, standard_normal(&mut rng));
        }
    }
    let mut sigma_y = g.transpose().matmul(&g);
    for i in 0..k {
        let v = sigma_y.get(i, i) + k as f64 * 0.2;
        sigma_y.set(i, i, v);
    }
    for i in 0..k {
        for j in 0..k {
            let v = sigma_y.get(i, j) / k as f64;
            sigma_y.set(i, j, v);
        }
    }
    let psi = if block_diagonal_noise {
        let blocks: Vec<Mat> = sizes
            .iter()
            .map(|&s| {
                let mut h = Mat::zeros(s, s);
                for i in 0..s {
                    for j in 0..s {
                        h.set(i, j, standard_normal(&mut rng));
                    }
                }
                let mut b = h.transpose().matmul(&h);
                for i in 0..s {
                    for j in 0..s {
                        let v = b.get(i, j) / s as f64 + if i == j { 0.3 } else { 0.0 };
                        b.set(i, j, v);
                    }
                }
                b
            })
            .collect();
        Mat::block_diag(&blocks)
    } else {
        let mut h = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                h.set(i, j, standard_normal(&mut rng));
            }
        }
        let mut b = h.transpose().matmul(&h);
        for i in 0..d {
            for j in 0..d {
                let v = b.get(i, j) / d as f64 + if i == j { 0.3 } else { 0.0 };
                b.set(i, j, v);
            }
        }
        b
    };
    FactorModel::new(
        partition,
        loadings,
        SymMatrix::from_mat_unchecked(&sigma_y),
        SymMatrix::from_mat_unchecked(&psi),
    )
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
