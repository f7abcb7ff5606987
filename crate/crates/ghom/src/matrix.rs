//! Dense symmetric linear algebra with deterministic, tolerance-controlled
//! primitives.
//!
//! Everything here is plain `Vec<f64>` dense storage. The matrices this tool
//! works with are small (covariance/concentration matrices of at most a few
//! hundred variables), so the priority is bit-for-bit determinism and
//! explicit tolerances rather than speed: the eigensolver is a cyclic Jacobi
//! iteration, positive definiteness is always decided by a Cholesky pivot
//! test, and zero/nonzero patterns are decided by a relative threshold.

use crate::error::{GhomError, Result};

/// Default relative tolerance for deciding that a matrix entry is zero.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Relative asymmetry limit accepted by [`SymMatrix::new`].
pub const ASYM_LIMIT: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Mat: general dense matrix
// ---------------------------------------------------------------------------

/// A general dense row-major matrix. Used for rectangular factors (loading
/// matrices, projection matrices, Cholesky factors) and as scratch space; the
/// symmetric carriers below wrap it with extra invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(GhomError::InvalidInput("matrix has no rows".into()));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(GhomError::InvalidInput("matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(GhomError::DimensionMismatch(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        for &x in &data {
            if !x.is_finite() {
                return Err(GhomError::InvalidInput("matrix entry is not finite".into()));
            }
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions differ");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * v` for a column vector.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Block-diagonal assembly of square or rectangular blocks.
    pub fn block_diag(blocks: &[Mat]) -> Mat {
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out.set(r0 + i, c0 + j, b.get(i, j));
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == 0.0 {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        out.set(i * other.rows + p, j * other.cols + q, a * other.get(p, q));
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    /// Max absolute entrywise difference against another matrix of equal shape.
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Orthonormalize the columns by modified Gram-Schmidt. Fails if the
    /// columns are numerically rank-deficient (a remainder norm falls below
    /// `1e-10` times the original column norm scale).
    pub fn gram_schmidt(&self) -> Result<Mat> {
        let mut q = self.clone();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for j in 0..self.cols {
            let mut v = q.column(j);
            for k in 0..j {
                let u = q.column(k);
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(&u) {
                    *vi -= dot * ui;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 1e-10 * scale {
                return Err(GhomError::SingularTransform(format!(
                    "column {} is in the span of the preceding columns",
                    j + 1
                )));
            }
            for (i, vi) in v.iter().enumerate() {
                q.set(i, j, vi / norm);
            }
        }
        Ok(q)
    }

    /// Solve `self * x = b` by partial-pivot LU elimination. Fails when a
    /// pivot falls below `1e-12` times the largest matrix entry. Used for
    /// general (not necessarily PD) square systems such as invertibility
    /// checks on transformation matrices.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(self.rows, self.cols, "solve requires a square matrix");
        assert_eq!(self.rows, b.len(), "solve rhs length mismatch");
        let n = self.rows;
        let mut a = self.clone();
        let mut x: Vec<f64> = b.to_vec();
        let floor = 1e-12 * self.max_abs();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a.get(r, col).abs() > a.get(piv, col).abs() {
                    piv = r;
                }
            }
            if a.get(piv, col).abs() <= floor {
                return Err(GhomError::SingularTransform(format!(
                    "pivot {:.3e} at column {} below limit",
                    a.get(piv, col),
                    col + 1
                )));
            }
            if piv != col {
                for j in 0..n {
                    let tmp = a.get(col, j);
                    a.set(col, j, a.get(piv, j));
                    a.set(piv, j, tmp);
                }
                x.swap(col, piv);
            }
            for r in col + 1..n {
                let f = a.get(r, col) / a.get(col, col);
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = a.get(r, j) - f * a.get(col, j);
                    a.set(r, j, v);
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut acc = x[col];
            for j in col + 1..n {
                acc -= a.get(col, j) * x[j];
            }
            x[col] = acc / a.get(col, col);
        }
        Ok(x)
    }

    /// Invert a general square matrix via [`Mat::solve`] on unit vectors.
    pub fn inverse(&self) -> Result<Mat> {
        assert_eq!(self.rows, self.cols, "inverse requires a square matrix");
        let n = self.rows;
        let mut out = Mat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                out.set(i, j, col[i]);
            }
        }
        Ok(out)
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

// ---------------------------------------------------------------------------
// SymMatrix
// ---------------------------------------------------------------------------

/// A dense symmetric matrix with validated symmetry.
///
/// The constructor symmetrizes by averaging `(a[i][j] + a[j][i]) / 2` and
/// records the worst asymmetry it repaired; inputs whose asymmetry exceeds
/// `1e-8` times the largest absolute entry are rejected outright. After
/// construction `get(i, j) == get(j, i)` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
    max_asym: f64,
}

impl SymMatrix {
    /// Build from nested rows, validating squareness and symmetry.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Mat::from_rows(rows)?;
        Self::from_mat(&m)
    }

    /// Build from a square [`Mat`], validating symmetry.
    pub fn from_mat(m: &Mat) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(GhomError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let dim = m.rows();
        let scale = m.max_abs();
        let mut max_asym = 0.0f64;
        for i in 0..dim {
            for j in i + 1..dim {
                max_asym = max_asym.max((m.get(i, j) - m.get(j, i)).abs());
            }
        }
        let limit = ASYM_LIMIT * scale;
        if max_asym > limit {
            return Err(GhomError::AsymmetricInput { max_asym, limit });
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = 0.5 * (m.get(i, j) + m.get(j, i));
            }
        }
        Ok(SymMatrix {
            dim,
            data,
            max_asym,
        })
    }

    /// Symmetrize a product that is symmetric in exact arithmetic but may
    /// carry tiny floating-point asymmetry (no validation threshold).
    pub(crate) fn from_mat_unchecked(m: &Mat) -> Self {
        debug_assert_eq!(m.rows(), m.cols());
        let dim = m.rows();
        let mut data = vec![0.0; dim * dim];
        let mut max_asym = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = 0.5 * (m.get(i, j) + m.get(j, i));
            }
        }
        for i in 0..dim {
            for j in i + 1..dim {
                max_asym = max_asym.max((m.get(i, j) - m.get(j, i)).abs());
            }
        }
        SymMatrix {
            dim,
            data,
            max_asym,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_mat_unchecked(&Mat::identity(n))
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        Self::from_mat_unchecked(&m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Worst asymmetry repaired at construction time.
    pub fn max_asym(&self) -> f64 {
        self.max_asym
    }

    pub fn to_mat(&self) -> Mat {
        Mat {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.to_mat().to_nested()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    /// Largest absolute off-diagonal entry.
    pub fn max_abs_offdiag(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    m = m.max(self.get(i, j).abs());
                }
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Extract the sub-matrix on the given (not necessarily contiguous)
    /// index set; the result is symmetric by construction.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        let mut m = Mat::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.set(a, b, self.get(i, j));
            }
        }
        SymMatrix::from_mat_unchecked(&m)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

// ---------------------------------------------------------------------------
// ZeroPattern
// ---------------------------------------------------------------------------

/// Structural zero/nonzero pattern of a symmetric matrix. `true` marks a
/// structurally nonzero entry; the diagonal is always `true`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroPattern {
    dim: usize,
    mask: Vec<bool>,
}

impl ZeroPattern {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn is_nonzero(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.dim + j]
    }

    /// Off-diagonal nonzero positions as 0-based `(i, j)` pairs with `i < j`.
    pub fn offdiag_nonzeros(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                if self.is_nonzero(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Classify each entry of `m` as structurally zero or nonzero.
///
/// An off-diagonal entry is nonzero when
/// `|m[i][j]| > tol * sqrt(|m[i][i]| * |m[j][j]|)`: the entry is judged on
/// the correlation scale of its own pair (the partial-correlation scale for
/// a concentration matrix). This makes the decision invariant under
/// rescaling of the whole matrix and, more importantly, under per-variable
/// rescaling — the diagonal congruences under which independence patterns
/// are genuinely preserved — and it never promotes an off-diagonal entry of
/// pure rounding noise to an edge just because every other off-diagonal
/// entry is equally tiny. If a pair's diagonal product vanishes, the
/// largest absolute entry of the matrix is used as the fallback scale. The
/// diagonal is always marked nonzero.
pub fn zero_pattern(m: &SymMatrix, tol: f64) -> ZeroPattern {
    let dim = m.dim();
    let global = m.max_abs();
    let mut mask = vec![false; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                mask[i * dim + j] = true;
            } else {
                let pair = (m.get(i, i).abs() * m.get(j, j).abs()).sqrt();
                let scale = if pair > 0.0 { pair } else { global };
                if scale > 0.0 {
                    mask[i * dim + j] = m.get(i, j).abs() > tol * scale;
                }
            }
        }
    }
    // Re-symmetrize defensively: `m` is exactly symmetric, so this is a no-op,
    // but it keeps the invariant obvious.
    for i in 0..dim {
        for j in i + 1..dim {
            let v = mask[i * dim + j] || mask[j * dim + i];
            mask[i * dim + j] = v;
            mask[j * dim + i] = v;
        }
    }
    ZeroPattern { dim, mask }
}

// ---------------------------------------------------------------------------
// Cholesky / inversion
// ---------------------------------------------------------------------------

/// Lower-triangular Cholesky factor `L` with `L * L^T = m`.
///
/// Positive definiteness is decided here for the whole crate: the
/// factorization fails if any pivot is `<= 1e-12 * max(diag(m))`.
pub fn cholesky(m: &SymMatrix) -> Result<Mat> {
    let n = m.dim();
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(m.get(i, i)));
    if max_diag <= 0.0 {
        return Err(GhomError::NotPositiveDefinite(
            "no positive diagonal entry".into(),
        ));
    }
    let floor = 1e-12 * max_diag;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut sum = m.get(j, j);
        for k in 0..j {
            sum -= l.get(j, k) * l.get(j, k);
        }
        if sum <= floor {
            return Err(GhomError::NotPositiveDefinite(format!(
                "pivot {:.3e} at index {} is below limit {:.3e}",
                sum,
                j + 1,
                floor
            )));
        }
        let ljj = sum.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Invert a positive definite matrix via its Cholesky factorization.
pub fn invert_pd(m: &SymMatrix) -> Result<SymMatrix> {
    let n = m.dim();
    let l = cholesky(m)?;
    let mut inv = Mat::zeros(n, n);
    // Solve L y = e_j (forward), then L^T x = y (backward), per column.
    for col in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                acc -= l.get(i, k) * y[k];
            }
            y[i] = acc / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= l.get(k, i) * y[k];
            }
            y[i] = acc / l.get(i, i);
        }
        for i in 0..n {
            inv.set(i, col, y[i]);
        }
    }
    Ok(SymMatrix::from_mat_unchecked(&inv))
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Eigendecomposition of a symmetric matrix.
///
/// Invariants established by [`sym_eigen`]:
/// * `values` sorted descending;
/// * `vectors` has orthonormal columns (`‖V^T V − I‖∞ ≤ 1e-10`);
/// * reconstruction `‖V Λ V^T − M‖∞ ≤ 1e-8 · max|M|`;
/// * each column's first component with magnitude above `1e-12` is positive;
/// * within a repeated eigenvalue (gap `< 1e-10 · max|λ|`) the eigenspace
///   basis is re-derived deterministically (see [`sym_eigen`]) and columns
///   are ordered by the index of their largest-magnitude component.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The `i`-th eigenvector (0-based, descending eigenvalue order).
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }
}

fn offdiag_frobenius(a: &Mat) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// Fix the sign of each column: first component with magnitude above 1e-12
/// must be positive.
fn sign_fix_columns(v: &mut Mat) {
    for j in 0..v.cols() {
        for i in 0..v.rows() {
            let x = v.get(i, j);
            if x.abs() > 1e-12 {
                if x < 0.0 {
                    for r in 0..v.rows() {
                        let neg = -v.get(r, j);
                        v.set(r, j, neg);
                    }
                }
                break;
            }
        }
    }
}

/// Index of the largest-magnitude component (ties broken by smallest index).
fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = v[0].abs();
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x.abs() > best_val {
            best = i;
            best_val = x.abs();
        }
    }
    best
}

/// Re-derive a deterministic orthonormal basis for the eigenspace spanned by
/// the given columns: project a fixed seed sequence (the all-ones vector,
/// then the standard basis vectors) onto the eigenspace and orthonormalize,
/// keeping projections with norm above 1e-8. Any rotation-dependent
/// arbitrariness of the Jacobi output inside a degenerate eigenvalue cluster
/// is removed this way, so equal inputs always yield equal eigenvectors.
fn canonical_eigenspace_basis(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = cols[0].len();
    let want = cols.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(want);
    let ones = vec![1.0; dim];
    let mut seeds: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    seeds.push(ones);
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        seeds.push(e);
    }
    for seed in seeds {
        if basis.len() == want {
            break;
        }
        // Project the seed onto span(cols).
        let mut w = vec![0.0; dim];
        for c in cols {
            let dot: f64 = c.iter().zip(&seed).map(|(a, b)| a * b).sum();
            for (wi, ci) in w.iter_mut().zip(c) {
                *wi += dot * ci;
            }
        }
        // Orthogonalize against the basis built so far.
        for b in &basis {
            let dot: f64 = b.iter().zip(&w).map(|(a, b)| a * b).sum();
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= dot * bi;
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for wi in w.iter_mut() {
                *wi /= norm;
            }
            basis.push(w);
        }
    }
    debug_assert_eq!(basis.len(), want, "eigenspace basis incomplete");
    basis
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Convergence requires the off-diagonal Frobenius norm to fall below
/// `1e-12 · ‖m‖F` within the sweep budget. Results are fully deterministic:
/// eigenvalues are sorted descending, eigenvector signs follow the
/// first-nonzero-positive convention, and repeated eigenvalues (gap below
/// `1e-10 · max|λ|`) get a canonical eigenspace basis seeded by the all-ones
/// vector, ordered by the index of the largest-magnitude component
/// (ascending, stable).
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenDecomp> {
    let n = m.dim();
    let norm = m.frobenius();
    let target = 1e-12 * norm;
    let mut a = m.to_mat();
    let mut v = Mat::identity(n);
    const MAX_SWEEPS: usize = 100;
    let mut converged = norm == 0.0 || n == 1;
    if !converged {
        for _ in 0..MAX_SWEEPS {
            if offdiag_frobenius(&a) <= target {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Update A = J^T A J on rows/columns p and q.
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    // Clamp the annihilated pair to exact zero.
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        if !converged && offdiag_frobenius(&a) <= target {
            converged = true;
        }
    }
    if !converged {
        return Err(GhomError::ConvergenceFailure(format!(
            "jacobi off-diagonal norm {:.3e} above target {:.3e} after {} sweeps",
            offdiag_frobenius(&a),
            target,
            MAX_SWEEPS
        )));
    }

    // Sort eigenpairs by descending eigenvalue (stable).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(j, j)
            .partial_cmp(&a.get(i, i))
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut columns: Vec<Vec<f64>> = order.iter().map(|&i| v.column(i)).collect();

    // Canonicalize degenerate runs.
    let scale = values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let gap_limit = 1e-10 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end - 1] - values[end]).abs() <= gap_limit {
            end += 1;
        }
        if end - start > 1 {
            let rebuilt = canonical_eigenspace_basis(&columns[start..end]);
            columns[start..end].clone_from_slice(&rebuilt);
        }
        start = end;
    }

    let mut vectors = Mat::zeros(n, n);
    for (j, col) in columns.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            vectors.set(i, j, x);
        }
    }
    sign_fix_columns(&mut vectors);

    // Within each degenerate run, order columns by the index of the
    // largest-magnitude component (ascending). The sort is stable, so ties in
    // that key preserve the canonical construction order (ones-seeded vector
    // first).
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end - 1] - values[end]).abs() <= gap_limit {
            end += 1;
        }
        if end - start > 1 {
            let mut run: Vec<Vec<f64>> = (start..end).map(|j| vectors.column(j)).collect();
            run.sort_by_key(|c| argmax_abs(c));
            for (off, col) in run.iter().enumerate() {
                for (i, &x) in col.iter().enumerate() {
                    vectors.set(i, start + off, x);
                }
            }
        }
        start = end;
    }

    Ok(EigenDecomp { values, vectors })
}

// ---------------------------------------------------------------------------
// Woodbury precision
// ---------------------------------------------------------------------------

/// Precision matrix `(A Σ_Y A^T + Ψ)^{-1}` computed by the Woodbury identity
///
/// ```text
/// Ψ^{-1} − Ψ^{-1} A (Σ_Y^{-1} + A^T Ψ^{-1} A)^{-1} A^T Ψ^{-1}
/// ```
///
/// which inverts only `K x K` and `d x d`-diagonal-free factors instead of
/// the assembled `d x d` covariance. `a` is the `d x K` loading matrix.
pub fn woodbury_precision(a: &Mat, sigma_y: &SymMatrix, psi: &SymMatrix) -> Result<SymMatrix> {
    if a.rows() != psi.dim() {
        return Err(GhomError::DimensionMismatch(format!(
            "loading matrix has {} rows but psi is {}x{}",
            a.rows(),
            psi.dim(),
            psi.dim()
        )));
    }
    if a.cols() != sigma_y.dim() {
        return Err(GhomError::DimensionMismatch(format!(
            "loading matrix has {} columns but sigma_y is {}x{}",
            a.cols(),
            sigma_y.dim(),
            sigma_y.dim()
        )));
    }
    let psi_inv = invert_pd(psi)?;
    let sy_inv = invert_pd(sigma_y)?;
    let psi_inv_m = psi_inv.to_mat();
    let at_psi_inv = a.transpose().matmul(&psi_inv_m);
    // M = Σ_Y^{-1} + A^T Ψ^{-1} A (K x K, symmetric, PD).
    let mut mid = at_psi_inv.matmul(a);
    for i in 0..mid.rows() {
        for j in 0..mid.cols() {
            let v = mid.get(i, j) + sy_inv.get(i, j);
            mid.set(i, j, v);
        }
    }
    let mid_inv = invert_pd(&SymMatrix::from_mat_unchecked(&mid))?;
    // Ψ^{-1} − (A^T Ψ^{-1})^T M^{-1} (A^T Ψ^{-1}).
    let correction = at_psi_inv
        .transpose()
        .matmul(&mid_inv.to_mat())
        .matmul(&at_psi_inv);
    let mut out = psi_inv_m;
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            let v = out.get(i, j) - correction.get(i, j);
            out.set(i, j, v);
        }
    }
    Ok(SymMatrix::from_mat_unchecked(&out))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
