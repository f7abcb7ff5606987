//! The empirical pipeline on synthetic data: bit-reproducible Gaussian
//! sampling, per-node lasso neighborhood selection, covariance
//! thresholding, stability-based tuning, and discrepancy-rate tables.
//!
//! All randomness flows through [`RngSeed`]: a 64-bit master seed expanded
//! into independent streams of a counter-based generator (ChaCha with 8
//! rounds), with normals obtained by applying a high-precision inverse
//! normal CDF to the uniform stream. Identical (inputs, seed) therefore
//! give bit-identical outputs on every platform.

use std::sync::OnceLock;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{GhomError, Result};
use crate::ggm::{EdgeSet, Partition};
use crate::matrix::{cholesky, SymMatrix};
use crate::reduce::{sample_reduce, ReduceMethod};

// ---------------------------------------------------------------------------
// Seeds and uniform streams
// ---------------------------------------------------------------------------

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed for any randomized operation. Independent substreams come
/// from [`RngSeed::stream`] (same seed, different counter stream) and
/// derived tasks get their own master seed via [`RngSeed::child`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Deterministic generator for substream `id`. Streams with different
    /// ids never overlap, so concurrent tasks can draw independently while
    /// keeping results schedule-independent.
    pub fn stream(self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(id);
        rng
    }

    /// A derived master seed for a subtask, mixed through SplitMix64 so
    /// that different salts give unrelated seeds.
    pub fn child(self, salt: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(salt)))
    }
}

/// Uniform draw in the open interval (0, 1): the top 53 bits of one 64-bit
/// word, offset by half a step so 0 and 1 are unreachable.
pub fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    let x = rng.next_u64();
    ((x >> 11) as f64) * (1.0 / 9_007_199_254_740_992.0) + 1.0 / 18_014_398_509_481_984.0
}

/// Uniform integer in `[0, n)` by rejection, avoiding modulo bias.
pub fn uniform_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    assert!(n > 0, "uniform_index over an empty range");
    let n64 = n as u64;
    let limit = u64::MAX - u64::MAX % n64;
    loop {
        let x = rng.next_u64();
        if x < limit {
            return (x % n64) as usize;
        }
    }
}

/// Standard normal draw via the inverse-CDF transform of [`unit_uniform`].
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    ppnd16(unit_uniform(rng))
}

// ---------------------------------------------------------------------------
// Inverse normal CDF
// ---------------------------------------------------------------------------

/// Inverse of the standard normal CDF, accurate to about 1e-16 relative
/// error (Wichura's rational approximations). Requires `0 < p < 1`.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GhomError::InvalidInput(format!(
            "inverse normal CDF needs p in (0, 1), got {}",
            p
        )));
    }
    Ok(ppnd16(p))
}

/// Rational-approximation core; assumes `0 < p < 1`.
fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 7] = [
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 7] = [
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 7] = [
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    fn horner(coeffs: &[f64], r: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        let num = horner(&A, r);
        let den = horner(&B, r) * r + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        horner(&C, r) / (horner(&D, r) * r + 1.0)
    } else {
        let r = r - 5.0;
        horner(&E, r) / (horner(&F, r) * r + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Parse headerless numeric CSV into equal-width rows; `label` names the
/// source in diagnostics, lines are 1-based. Blank lines are skipped.
pub fn parse_csv_rows(s: &str, label: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| GhomError::Parse {
                path: label.to_string(),
                line: lineno + 1,
                msg: format!("column {}: invalid number '{}'", col + 1, field),
            })?;
            if !v.is_finite() {
                return Err(GhomError::Parse {
                    path: label.to_string(),
                    line: lineno + 1,
                    msg: format!("column {}: non-finite value", col + 1),
                });
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(GhomError::Parse {
                    path: label.to_string(),
                    line: lineno + 1,
                    msg: format!("expected {} columns, found {}", w, row.len()),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

/// An n x d data matrix (rows are observations) with lazily cached column
/// means. Requires at least two rows and all entries finite.
#[derive(Debug)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
    means: OnceLock<Vec<f64>>,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Dataset {
            n: self.n,
            d: self.d,
            values: self.values.clone(),
            means: self.means.clone(),
        }
    }
}

impl Dataset {
    /// `values` is row-major with `n * d` finite entries.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(GhomError::InvalidInput(format!(
                "dataset needs at least 2 observations, got {}",
                n
            )));
        }
        if d == 0 {
            return Err(GhomError::InvalidInput("dataset has no variables".into()));
        }
        if values.len() != n * d {
            return Err(GhomError::DimensionMismatch(format!(
                "expected {} values for a {}x{} dataset, got {}",
                n * d,
                n,
                d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(GhomError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        Ok(Dataset {
            n,
            d,
            values,
            means: OnceLock::new(),
        })
    }

    /// Parse headerless CSV (rows = observations); `label` names the source
    /// in diagnostics.
    pub fn from_csv_str(s: &str, label: &str) -> Result<Self> {
        let rows = parse_csv_rows(s, label)?;
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() < 2 || d == 0 {
            return Err(GhomError::Parse {
                path: label.to_string(),
                line: rows.len(),
                msg: format!(
                    "need at least 2 rows and 1 column, found {} row(s)",
                    rows.len()
                ),
            });
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        Dataset::new(values.len() / d, d, values)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        Dataset::from_csv_str(&content, &path.display().to_string())
    }

    /// Headerless CSV rendering; floats use the shortest representation
    /// that round-trips, so write/read is lossless.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for j in 0..self.d {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.d);
        self.values[i * self.d + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn col_means(&self) -> &[f64] {
        self.means.get_or_init(|| {
            let mut m = vec![0.0f64; self.d];
            for i in 0..self.n {
                for j in 0..self.d {
                    m[j] += self.get(i, j);
                }
            }
            for v in m.iter_mut() {
                *v /= self.n as f64;
            }
            m
        })
    }

    /// Centered sample covariance with divisor n-1.
    pub fn sample_covariance(&self) -> SymMatrix {
        let means = self.col_means().to_vec();
        let mut cov = vec![vec![0.0f64; self.d]; self.d];
        for i in 0..self.n {
            for a in 0..self.d {
                let xa = self.get(i, a) - means[a];
                for b in a..self.d {
                    cov[a][b] += xa * (self.get(i, b) - means[b]);
                }
            }
        }
        let denom = (self.n - 1) as f64;
        for a in 0..self.d {
            for b in a..self.d {
                cov[a][b] /= denom;
                cov[b][a] = cov[a][b];
            }
        }
        SymMatrix::new(&cov).expect("covariance is symmetric by construction")
    }

    /// Sample correlation matrix; a column whose variance is negligible
    /// relative to the largest variance is reported as degenerate.
    pub fn correlations(&self) -> Result<SymMatrix> {
        let cov = self.sample_covariance();
        let max_var = (0..self.d).fold(0.0f64, |m, j| m.max(cov.get(j, j)));
        let floor = 1e-24 * max_var.max(f64::MIN_POSITIVE);
        let mut sd = vec![0.0f64; self.d];
        for j in 0..self.d {
            let v = cov.get(j, j);
            if v <= floor {
                return Err(GhomError::DegenerateColumn(format!(
                    "column {} has (near-)zero variance",
                    j + 1
                )));
            }
            sd[j] = v.sqrt();
        }
        let mut corr = vec![vec![0.0f64; self.d]; self.d];
        for a in 0..self.d {
            for b in 0..self.d {
                corr[a][b] = cov.get(a, b) / (sd[a] * sd[b]);
            }
        }
        SymMatrix::new(&corr)
    }
}

// ---------------------------------------------------------------------------
// Gaussian sampling
// ---------------------------------------------------------------------------

/// Draw `n` i.i.d. rows from `N(0, Σ)` as `x = L z` with `L` the Cholesky
/// factor and `z` standard normal from stream 0 of the seed.
/// Bit-reproducible given `(Σ, n, seed)`.
pub fn sample_gaussian(sigma: &SymMatrix, n: usize, seed: RngSeed) -> Result<Dataset> {
    let l = cholesky(sigma)?;
    let d = sigma.dim();
    let mut rng = seed.stream(0);
    let mut values = vec![0.0f64; n * d];
    let mut z = vec![0.0f64; d];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = standard_normal(&mut rng);
        }
        for r in 0..d {
            let mut acc = 0.0;
            for c in 0..=r {
                acc += l.get(r, c) * z[c];
            }
            values[i * d + r] = acc;
        }
    }
    Dataset::new(n, d, values)
}

// ---------------------------------------------------------------------------
// Neighborhood selection
// ---------------------------------------------------------------------------

/// How per-node regressions combine into edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRule {
    /// Edge iff both directions select each other.
    And,
    /// Edge iff either direction selects the other (default).
    Or,
}

impl std::fmt::Display for EdgeRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeRule::And => write!(f, "and"),
            EdgeRule::Or => write!(f, "or"),
        }
    }
}

impl std::str::FromStr for EdgeRule {
    type Err = GhomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "and" => Ok(EdgeRule::And),
            "or" => Ok(EdgeRule::Or),
            other => Err(GhomError::InvalidInput(format!(
                "unknown edge rule '{}' (expected and/or)",
                other
            ))),
        }
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

const LASSO_TOL: f64 = 1e-7;
const LASSO_MAX_SWEEPS: usize = 10_000;

/// Columns centered and scaled to unit divisor-n variance.
fn standardized_columns(data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let n = data.n();
    let d = data.d();
    let means = data.col_means().to_vec();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut vars = vec![0.0f64; d];
    for j in 0..d {
        let mut c = data.column(j);
        for x in c.iter_mut() {
            *x -= means[j];
        }
        vars[j] = c.iter().map(|x| x * x).sum::<f64>() / n as f64;
        cols.push(c);
    }
    let max_var = vars.iter().copied().fold(0.0f64, f64::max);
    let floor = 1e-24 * max_var.max(f64::MIN_POSITIVE);
    for j in 0..d {
        if vars[j] <= floor {
            return Err(GhomError::DegenerateColumn(format!(
                "column {} has (near-)zero variance",
                j + 1
            )));
        }
        let s = vars[j].sqrt();
        for x in cols[j].iter_mut() {
            *x /= s;
        }
    }
    Ok(cols)
}

/// Cyclic coordinate descent for the lasso regression of column `j` on all
/// other (standardized) columns: minimizes
/// `(1/2n)·‖x_j − Σ θ_k x_k‖² + λ·Σ|θ_k|`.
fn lasso_neighborhood(cols: &[Vec<f64>], j: usize, lambda: f64) -> Result<Vec<f64>> {
    let d = cols.len();
    let n = cols[0].len();
    let mut theta = vec![0.0f64; d];
    let mut residual = cols[j].clone();
    #[cfg(debug_assertions)]
    let mut prev_obj = f64::INFINITY;
    for _sweep in 0..LASSO_MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        for k in 0..d {
            if k == j {
                continue;
            }
            let xk = &cols[k];
            let dot: f64 = xk.iter().zip(residual.iter()).map(|(a, b)| a * b).sum();
            let rho = dot / n as f64 + theta[k];
            let new = soft_threshold(rho, lambda);
            let delta = new - theta[k];
            if delta != 0.0 {
                for (r, x) in residual.iter_mut().zip(xk.iter()) {
                    *r -= delta * x;
                }
                theta[k] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        #[cfg(debug_assertions)]
        {
            let obj = residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * n as f64)
                + lambda * theta.iter().map(|t| t.abs()).sum::<f64>();
            debug_assert!(
                obj <= prev_obj + 1e-10,
                "lasso objective increased: {} -> {}",
                prev_obj,
                obj
            );
            prev_obj = obj;
        }
        if max_delta < LASSO_TOL {
            return Ok(theta);
        }
    }
    Err(GhomError::ConvergenceFailure(format!(
        "lasso for node {} did not converge in {} sweeps",
        j + 1,
        LASSO_MAX_SWEEPS
    )))
}

/// Estimate the conditional independence graph by per-node lasso
/// regressions on internally standardized columns. Coefficients are exact
/// zeros or not (soft-thresholding), so edge membership needs no extra
/// tolerance.
pub fn neighborhood_selection(data: &Dataset, lambda: f64, rule: EdgeRule) -> Result<EdgeSet> {
    if !(lambda > 0.0) {
        return Err(GhomError::InvalidInput(format!(
            "penalty must be positive, got {}",
            lambda
        )));
    }
    let d = data.d();
    let mut edges = EdgeSet::new(d);
    if d < 2 {
        return Ok(edges);
    }
    let cols = standardized_columns(data)?;
    let mut coef: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        coef.push(lasso_neighborhood(&cols, j, lambda)?);
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let jk = coef[j][k] != 0.0;
            let kj = coef[k][j] != 0.0;
            let present = match rule {
                EdgeRule::And => jk && kj,
                EdgeRule::Or => jk || kj,
            };
            if present {
                edges.insert(j, k)?;
            }
        }
    }
    Ok(edges)
}

/// Estimate the marginal independence graph: edge iff the absolute sample
/// correlation exceeds `tau`.
pub fn covariance_threshold(data: &Dataset, tau: f64) -> Result<EdgeSet> {
    if !(tau >= 0.0) {
        return Err(GhomError::InvalidInput(format!(
            "threshold must be nonnegative, got {}",
            tau
        )));
    }
    let corr = data.correlations()?;
    let d = data.d();
    let mut edges = EdgeSet::new(d);
    for j in 0..d {
        for k in (j + 1)..d {
            if corr.get(j, k).abs() > tau {
                edges.insert(j, k)?;
            }
        }
    }
    Ok(edges)
}

// ---------------------------------------------------------------------------
// Stability-based tuning
// ---------------------------------------------------------------------------

/// Which graph estimator a stability selection run tunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphEstimator {
    Neighborhood { rule: EdgeRule },
    Threshold,
}

impl GraphEstimator {
    fn estimate(&self, data: &Dataset, param: f64) -> Result<EdgeSet> {
        match self {
            GraphEstimator::Neighborhood { rule } => neighborhood_selection(data, param, *rule),
            GraphEstimator::Threshold => covariance_threshold(data, param),
        }
    }
}

/// Configuration for stability selection. The grid runs from sparsest to
/// densest (strictly decreasing parameters: larger penalty or threshold
/// means sparser).
#[derive(Debug, Clone)]
pub struct StarsConfig {
    /// Number of subsamples (default 20).
    pub subsample_count: usize,
    /// Subsample size; `None` means `min(floor(10·√n), n − 1)`.
    pub subsample_size: Option<usize>,
    /// Instability budget in (0, 0.5) (default 0.05).
    pub beta: f64,
    /// Strictly decreasing parameter grid, sparsest first.
    pub grid: Vec<f64>,
}

impl StarsConfig {
    pub fn with_grid(grid: Vec<f64>) -> Self {
        StarsConfig {
            subsample_count: 20,
            subsample_size: None,
            beta: 0.05,
            grid,
        }
    }

    /// The subsample size actually used on an n-row dataset:
    /// the configured value, or `min(floor(10·√n), n − 1)`.
    pub fn resolved_subsample_size(&self, n: usize) -> usize {
        self.subsample_size
            .unwrap_or_else(|| ((10.0 * (n as f64).sqrt()).floor() as usize).min(n.saturating_sub(1)))
    }

    fn validate(&self, n: usize) -> Result<usize> {
        if self.subsample_count < 2 {
            return Err(GhomError::InvalidInput(format!(
                "need at least 2 subsamples, got {}",
                self.subsample_count
            )));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(GhomError::InvalidInput(format!(
                "instability budget must lie in (0, 0.5), got {}",
                self.beta
            )));
        }
        if self.grid.is_empty() {
            return Err(GhomError::InvalidInput("empty parameter grid".into()));
        }
        if !self.grid.iter().all(|v| v.is_finite()) {
            return Err(GhomError::InvalidInput("non-finite grid value".into()));
        }
        for w in self.grid.windows(2) {
            if w[1] >= w[0] {
                return Err(GhomError::InvalidInput(
                    "grid must be strictly decreasing (sparsest first)".into(),
                ));
            }
        }
        let b = self.resolved_subsample_size(n);
        if b < 2 || b >= n {
            return Err(GhomError::InvalidInput(format!(
                "subsample size {} must satisfy 2 ≤ b < n = {}",
                b, n
            )));
        }
        Ok(b)
    }
}

/// Default penalty grid for neighborhood selection.
pub fn default_lambda_grid() -> Vec<f64> {
    vec![0.5, 0.4, 0.3, 0.2, 0.1, 0.05]
}

/// Default correlation-threshold grid (0.90 down to 0.05 in steps of 0.05).
pub fn default_tau_grid() -> Vec<f64> {
    (0..18).map(|i| (90 - 5 * i) as f64 / 100.0).collect()
}

/// Outcome of stability selection.
#[derive(Debug, Clone)]
pub struct StarsSelection {
    /// Chosen grid parameter.
    pub selected_param: f64,
    /// Index of the chosen parameter in the grid.
    pub selected_index: usize,
    /// Raw total instability per grid point.
    pub instability: Vec<f64>,
    /// Monotonized instability (running maximum from the sparse end).
    pub monotone_instability: Vec<f64>,
    /// True when no grid point met the budget; the sparsest point is then
    /// selected and reported rather than raised as an error.
    pub exhausted: bool,
    /// The estimator's graph on the full dataset at the selected parameter.
    pub selected_graph: EdgeSet,
}

/// Indices of a size-`b` subsample without replacement (sorted), via a
/// partial Fisher–Yates shuffle.
fn subsample_indices(rng: &mut ChaCha8Rng, n: usize, b: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..b {
        let j = i + uniform_index(rng, n - i);
        idx.swap(i, j);
    }
    let mut out = idx[..b].to_vec();
    out.sort_unstable();
    out
}

fn take_rows(data: &Dataset, rows: &[usize]) -> Dataset {
    let d = data.d();
    let mut values = Vec::with_capacity(rows.len() * d);
    for &i in rows {
        for j in 0..d {
            values.push(data.get(i, j));
        }
    }
    Dataset::new(rows.len(), d, values).expect("subsample keeps validity")
}

/// Stability selection: draw `N` subsamples of size `b` (streams 1..=N of
/// the seed), estimate a graph at every grid point on each subsample, and
/// measure per-edge selection instability `2·θ̂(1−θ̂)` averaged over all
/// vertex pairs. The instability curve is monotonized by a running maximum
/// from the sparse end, and the densest parameter whose monotonized
/// instability stays within `beta` is selected. If none qualifies, the
/// sparsest parameter is selected with `exhausted = true`.
pub fn stars_select(
    data: &Dataset,
    estimator: GraphEstimator,
    config: &StarsConfig,
    seed: RngSeed,
) -> Result<StarsSelection> {
    let n = data.n();
    let b = config.validate(n)?;
    let d = data.d();
    let n_params = config.grid.len();
    let n_pairs = d * (d - 1) / 2;
    let mut counts = vec![vec![0u32; n_pairs.max(1)]; n_params];

    for s in 0..config.subsample_count {
        let mut rng = seed.stream(s as u64 + 1);
        let rows = subsample_indices(&mut rng, n, b);
        let sub = take_rows(data, &rows);
        for (pi, &param) in config.grid.iter().enumerate() {
            let edges = estimator.estimate(&sub, param)?;
            for (i, j) in edges.iter() {
                // Pair index in the upper triangle, row-major.
                let pair = i * d - i * (i + 1) / 2 + (j - i - 1);
                counts[pi][pair] += 1;
            }
        }
    }

    let n_sub = config.subsample_count as f64;
    let instability: Vec<f64> = counts
        .iter()
        .map(|row| {
            if n_pairs == 0 {
                return 0.0;
            }
            let total: f64 = row
                .iter()
                .take(n_pairs)
                .map(|&c| {
                    let theta = c as f64 / n_sub;
                    2.0 * theta * (1.0 - theta)
                })
                .sum();
            total / n_pairs as f64
        })
        .collect();

    let mut monotone = Vec::with_capacity(n_params);
    let mut running = 0.0f64;
    for &v in &instability {
        running = running.max(v);
        monotone.push(running);
    }

    let mut selected_index = None;
    for (i, &v) in monotone.iter().enumerate() {
        if v <= config.beta {
            selected_index = Some(i);
        }
    }
    let (selected_index, exhausted) = match selected_index {
        Some(i) => (i, false),
        None => (0, true),
    };
    let selected_param = config.grid[selected_index];
    let selected_graph = estimator.estimate(data, selected_param)?;
    Ok(StarsSelection {
        selected_param,
        selected_index,
        instability,
        monotone_instability: monotone,
        exhausted,
        selected_graph,
    })
}

// ---------------------------------------------------------------------------
// Discrepancy rates
// ---------------------------------------------------------------------------

/// Fraction of `e1`'s edges missing from `e2`; 0 when `e1` is empty (two
/// empty graphs agree). Not symmetric.
pub fn discrepancy_rate(e1: &EdgeSet, e2: &EdgeSet) -> Result<f64> {
    if e1.n() != e2.n() {
        return Err(GhomError::DimensionMismatch(format!(
            "graphs have {} and {} vertices",
            e1.n(),
            e2.n()
        )));
    }
    if e1.is_empty() {
        return Ok(0.0);
    }
    Ok(e1.difference(e2).len() as f64 / e1.len() as f64)
}

/// Which independence graph a pipeline estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Conditional,
    Marginal,
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphKind::Conditional => write!(f, "conditional"),
            GraphKind::Marginal => write!(f, "marginal"),
        }
    }
}

impl std::str::FromStr for GraphKind {
    type Err = GhomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(GraphKind::Conditional),
            "marginal" => Ok(GraphKind::Marginal),
            other => Err(GhomError::InvalidInput(format!(
                "unknown graph kind '{}' (expected conditional/marginal)",
                other
            ))),
        }
    }
}

/// Pairwise discrepancy rates between the graphs estimated after each
/// reduction method.
#[derive(Debug, Clone)]
pub struct DiscrepancyTable {
    pub methods: Vec<ReduceMethod>,
    pub graphs: Vec<EdgeSet>,
    pub selected_params: Vec<f64>,
    pub exhausted: Vec<bool>,
    /// `rates[i][j] = discrepancy_rate(graphs[i], graphs[j])`.
    pub rates: Vec<Vec<f64>>,
}

/// For each reduction method: reduce the data, tune the estimator for the
/// requested graph kind by stability selection, and cross-tabulate the
/// pairwise discrepancy rates of the estimated graphs. Deterministic given
/// the seed (method `i` uses the derived seed `child(i)`).
pub fn discrepancy_table(
    data: &Dataset,
    partition: &Partition,
    methods: &[ReduceMethod],
    kind: GraphKind,
    config: &StarsConfig,
    seed: RngSeed,
) -> Result<DiscrepancyTable> {
    if methods.is_empty() {
        return Err(GhomError::InvalidInput("no reduction methods given".into()));
    }
    let estimator = match kind {
        GraphKind::Conditional => GraphEstimator::Neighborhood { rule: EdgeRule::Or },
        GraphKind::Marginal => GraphEstimator::Threshold,
    };
    let mut graphs = Vec::with_capacity(methods.len());
    let mut selected_params = Vec::with_capacity(methods.len());
    let mut exhausted = Vec::with_capacity(methods.len());
    for (i, &method) in methods.iter().enumerate() {
        let child = seed.child(i as u64);
        let reduced = sample_reduce(data, partition, method, child)?;
        let sel = stars_select(&reduced, estimator, config, child)?;
        graphs.push(sel.selected_graph);
        selected_params.push(sel.selected_param);
        exhausted.push(sel.exhausted);
    }
    let m = methods.len();
    let mut rates = vec![vec![0.0f64; m]; m];
    for i in 0..m {
        for j in 0..m {
            rates[i][j] = discrepancy_rate(&graphs[i], &graphs[j])?;
        }
    }
    Ok(DiscrepancyTable {
        methods: methods.to_vec(),
        graphs,
        selected_params,
        exhausted,
        rates,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_sigma() -> SymMatrix {
        SymMatrix::new(&[
            vec![2.0, -1.0, -1.0, 1.0],
            vec![-1.0, 2.0, 0.0, -1.0],
            vec![-1.0, 0.0, 2.0, -1.0],
            vec![1.0, -1.0, -1.0, 2.0],
        ])
        .unwrap()
    }

    #[test]
    fn uniform_stream_is_deterministic_and_in_range() {
        let mut a = RngSeed(42).stream(0);
        let mut b = RngSeed(42).stream(0);
        let mut c = RngSeed(42).stream(1);
        let mut differs = false;
        for _ in 0..1000 {
            let ua = unit_uniform(&mut a);
            let ub = unit_uniform(&mut b);
            let uc = unit_uniform(&mut c);
            assert!(ua > 0.0 && ua < 1.0);
            assert_eq!(ua, ub, "same seed+stream must agree bitwise");
            if ua != uc {
                differs = true;
            }
        }
        assert!(differs, "distinct streams must differ");
    }

    #[test]
    fn child_seeds_differ() {
        let s = RngSeed(7);
        assert_ne!(s.child(0), s.child(1));
        assert_ne!(s.child(0).0, s.0);
        assert_eq!(s.child(3), s.child(3));
    }

    #[test]
    fn uniform_index_covers_range_without_bias_smoke() {
        let mut rng = RngSeed(1).stream(0);
        let mut counts = [0usize; 5];
        for _ in 0..5000 {
            counts[uniform_index(&mut rng, 5)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            assert!(c > 800 && c < 1200, "bucket {} count {}", i, c);
        }
    }

    #[test]
    fn inverse_normal_cdf_reference_values() {
        // Reference quantiles (independently computed, high precision).
        let cases = [
            (0.5, 0.0, 1e-15),
            (0.975, 1.959963984540054, 1e-12),
            (0.025, -1.959963984540054, 1e-12),
            (0.9, 1.2815515655446004, 1e-12),
            (0.75, 0.6744897501960817, 1e-13),
            (0.99, 2.3263478740408408, 1e-12),
            (1e-10, -6.361340902404056, 1e-11),
            (5.551115123125783e-17, -8.292361075813597, 1e-12),
            (5.421010862427522e-20, -9.080155124873613, 1e-12),
        ];
        for &(p, want, tol) in &cases {
            let got = inverse_normal_cdf(p).unwrap();
            assert!(
                (got - want).abs() <= tol,
                "p = {}: got {}, want {}",
                p,
                got,
                want
            );
        }
        // Symmetry in the central region.
        for &p in &[0.31, 0.4, 0.55, 0.68] {
            let a = inverse_normal_cdf(p).unwrap();
            let b = inverse_normal_cdf(1.0 - p).unwrap();
            assert!((a + b).abs() <= 1e-14);
        }
        assert!(inverse_normal_cdf(0.0).is_err());
        assert!(inverse_normal_cdf(1.0).is_err());
        assert!(inverse_normal_cdf(-0.5).is_err());
        assert!(inverse_normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn sample_gaussian_identity_covariance_recovery() {
        let data = sample_gaussian(&SymMatrix::identity(2), 100_000, RngSeed(7)).unwrap();
        let cov = data.sample_covariance();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov.get(i, j) - want).abs() <= 0.02,
                    "cov[{}][{}] = {}",
                    i,
                    j,
                    cov.get(i, j)
                );
            }
        }
    }

    #[test]
    fn sample_gaussian_fixture_zero_entry() {
        let data = sample_gaussian(&fixture_sigma(), 50_000, RngSeed(11)).unwrap();
        let cov = data.sample_covariance();
        assert!(
            cov.get(1, 2).abs() <= 0.02,
            "Σ̂₂₃ = {} should be near 0",
            cov.get(1, 2)
        );
    }

    #[test]
    fn sample_gaussian_minimal_and_deterministic() {
        let a = sample_gaussian(&fixture_sigma(), 2, RngSeed(3)).unwrap();
        let b = sample_gaussian(&fixture_sigma(), 2, RngSeed(3)).unwrap();
        assert_eq!(a.n(), 2);
        for i in 0..2 {
            for j in 0..4 {
                assert!(a.get(i, j).is_finite());
                assert_eq!(a.get(i, j), b.get(i, j), "bit-reproducibility");
            }
        }
        let c = sample_gaussian(&fixture_sigma(), 2, RngSeed(4)).unwrap();
        assert!((0..4).any(|j| a.get(0, j) != c.get(0, j)));
    }

    #[test]
    fn dataset_csv_roundtrip_and_errors() {
        let d = Dataset::new(2, 3, vec![1.0, -2.5, 3.0, 0.125, 1e-8, -7.0]).unwrap();
        let s = d.to_csv_string();
        let back = Dataset::from_csv_str(&s, "mem").unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(d.get(i, j), back.get(i, j));
            }
        }
        let err = Dataset::from_csv_str("1,2\n3,oops\n", "bad.csv").unwrap_err();
        match err {
            GhomError::Parse { path, line, msg } => {
                assert_eq!(path, "bad.csv");
                assert_eq!(line, 2);
                assert!(msg.contains("column 2"), "{}", msg);
            }
            other => panic!("unexpected error {:?}", other),
        }
        let err = Dataset::from_csv_str("1,2\n3\n", "ragged.csv").unwrap_err();
        assert!(matches!(err, GhomError::Parse { line: 2, .. }));
        assert!(Dataset::from_csv_str("1,2\n", "short.csv").is_err());
        assert!(Dataset::new(1, 2, vec![0.0, 1.0]).is_err());
        assert!(Dataset::new(2, 1, vec![0.0, f64::NAN]).is_err());
    }

    /// Two exactly-standardized columns with divisor-n correlation 0.8.
    fn correlated_pair() -> Dataset {
        let x = [1.0f64, 1.0, -1.0, -1.0];
        let z = [1.0f64, -1.0, 1.0, -1.0];
        let mut values = Vec::new();
        for i in 0..4 {
            values.push(x[i]);
            values.push(0.8 * x[i] + 0.6 * z[i]);
        }
        Dataset::new(4, 2, values).unwrap()
    }

    #[test]
    fn lasso_two_variables_closed_form() {
        // Single-predictor closed form: the coefficient is the soft-thresholded
        // correlation, so the edge appears exactly when lambda < |r|. The
        // r = 0.8 pair is built from non-dyadic floats, so probe the boundary
        // from either side rather than at the knife edge.
        let data = correlated_pair();
        let corr = data.correlations().unwrap();
        assert!((corr.get(0, 1) - 0.8).abs() <= 1e-12);
        for (lambda, expect_edge) in [(0.79, true), (0.8 + 1e-9, false), (0.81, false)] {
            let e = neighborhood_selection(&data, lambda, EdgeRule::Or).unwrap();
            assert_eq!(e.contains(0, 1), expect_edge, "lambda = {}", lambda);
            let e_and = neighborhood_selection(&data, lambda, EdgeRule::And).unwrap();
            assert_eq!(e_and.contains(0, 1), expect_edge, "and-rule symmetry");
        }
        // Identical columns have correlation exactly 1.0 in floating point,
        // so the knife edge itself is testable there: S(1, 1) = 0.
        let twin = Dataset::new(4, 2, vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]).unwrap();
        for (lambda, expect_edge) in [(1.0, false), (0.99, true)] {
            let e = neighborhood_selection(&twin, lambda, EdgeRule::And).unwrap();
            assert_eq!(e.contains(0, 1), expect_edge, "twin lambda = {}", lambda);
        }
    }

    #[test]
    fn lasso_monotone_in_penalty_two_variables() {
        let data = correlated_pair();
        let grid = [0.9, 0.7, 0.5, 0.3, 0.1];
        let mut prev: Option<EdgeSet> = None;
        for &l in &grid {
            let e = neighborhood_selection(&data, l, EdgeRule::Or).unwrap();
            if let Some(p) = prev {
                assert!(p.is_subset_of(&e), "sparser solution must be contained");
            }
            prev = Some(e);
        }
    }

    #[test]
    fn lasso_independent_columns_empty() {
        let x = [1.0f64, 1.0, -1.0, -1.0];
        let z = [1.0f64, -1.0, 1.0, -1.0];
        let mut values = Vec::new();
        for i in 0..4 {
            values.push(x[i]);
            values.push(z[i]);
        }
        let data = Dataset::new(4, 2, values).unwrap();
        let e = neighborhood_selection(&data, 0.01, EdgeRule::Or).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn lasso_and_subset_of_or() {
        let sigma = fixture_sigma();
        let data = sample_gaussian(&sigma, 500, RngSeed(21)).unwrap();
        for &l in &[0.3, 0.2, 0.1, 0.05] {
            let e_and = neighborhood_selection(&data, l, EdgeRule::And).unwrap();
            let e_or = neighborhood_selection(&data, l, EdgeRule::Or).unwrap();
            assert!(e_and.is_subset_of(&e_or));
        }
    }

    #[test]
    fn lasso_degenerate_column_rejected() {
        let data = Dataset::new(4, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0]).unwrap();
        assert!(matches!(
            neighborhood_selection(&data, 0.1, EdgeRule::Or),
            Err(GhomError::DegenerateColumn(_))
        ));
        assert!(matches!(
            covariance_threshold(&data, 0.1),
            Err(GhomError::DegenerateColumn(_))
        ));
    }

    #[test]
    fn lasso_objective_never_increases_ten_random_problems() {
        // The solver carries a debug assertion on the objective; driving it
        // on random problems exercises that check in debug builds.
        for seed in 0..10u64 {
            let d = 3 + (seed % 3) as usize;
            let mut g = crate::matrix::Mat::zeros(d, d);
            let mut rng = RngSeed(7000 + seed).stream(0);
            for i in 0..d {
                for j in 0..d {
                    g.set(i, j, standard_normal(&mut rng));
                }
            }
            let mut sigma = g.transpose().matmul(&g);
            for i in 0..d {
                let v = sigma.get(i, i) + 0.5 * d as f64;
                sigma.set(i, i, v);
            }
            let sigma = SymMatrix::from_mat_unchecked(&sigma);
            let data = sample_gaussian(&sigma, 200, RngSeed(7100 + seed)).unwrap();
            for &l in &[0.3, 0.1, 0.05] {
                neighborhood_selection(&data, l, EdgeRule::Or).unwrap();
            }
        }
    }

    #[test]
    fn recovery_neighborhood_bridge_data() {
        // The bridge model's precision matrix
        // [[1,.5,0,0],[.5,1,.4,.3],[0,.4,1,.5],[0,.3,.5,1]] has true
        // conditional graph {(1,2),(2,3),(2,4),(3,4)}, and its population
        // lasso excludes the absent pairs with strictly positive slack at
        // these penalties, so moderate samples recover the graph exactly.
        // (The 4-variable demo fixture is unusable here: its population
        // lasso keeps the spurious (1,4) coordinate active at small
        // penalties and sits exactly on the exclusion boundary at larger
        // ones, so no penalty recovers that graph even in the large-sample
        // limit.)
        let (bridge, _) = crate::homotopy::asymmetric_bridge_fixture();
        let data = sample_gaussian(bridge.sigma(), 4000, RngSeed(3)).unwrap();
        let truth = vec![(1, 2), (2, 3), (2, 4), (3, 4)];
        for lambda in [0.05, 0.1] {
            let e = neighborhood_selection(&data, lambda, EdgeRule::Or).unwrap();
            assert_eq!(
                e.to_one_based(),
                truth,
                "frozen recovery of the true conditional graph at lambda = {}",
                lambda
            );
        }
    }

    #[test]
    fn recovery_threshold_fixture_data() {
        let data = sample_gaussian(&fixture_sigma(), 4000, RngSeed(3)).unwrap();
        let e = covariance_threshold(&data, 0.15).unwrap();
        // Population correlations are ±0.5 everywhere except the (2,3)
        // pair, which is exactly 0.
        assert_eq!(
            e.to_one_based(),
            vec![(1, 2), (1, 3), (1, 4), (2, 4), (3, 4)],
            "frozen recovery of the true marginal graph"
        );
    }

    #[test]
    fn threshold_extremes() {
        let data = sample_gaussian(&fixture_sigma(), 200, RngSeed(9)).unwrap();
        assert!(covariance_threshold(&data, 1.0).unwrap().is_empty());
        let complete = covariance_threshold(&data, 0.0).unwrap();
        assert_eq!(complete.len(), 6, "generic data: all pairs correlate");
        assert!(covariance_threshold(&data, -0.1).is_err());
    }

    #[test]
    fn stars_zero_instability_selects_densest() {
        // 2 independent strong blocks: the estimator is stable across
        // subsamples at every grid value, so instability is identically 0
        // and the densest (last) grid point wins.
        let sigma = SymMatrix::new(&[vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
        let data = sample_gaussian(&sigma, 400, RngSeed(14)).unwrap();
        let config = StarsConfig::with_grid(vec![0.5, 0.3]);
        let sel = stars_select(
            &data,
            GraphEstimator::Neighborhood { rule: EdgeRule::Or },
            &config,
            RngSeed(15),
        )
        .unwrap();
        assert!(sel.instability.iter().all(|&v| v == 0.0));
        assert_eq!(sel.selected_index, 1);
        assert!(!sel.exhausted);
        assert!(sel.selected_graph.contains(0, 1));
    }

    #[test]
    fn stars_empty_graph_estimator_selects_densest_with_zero_curve() {
        // Thresholds above 1 can never select an edge: θ̂ ≡ 0 everywhere.
        let data = sample_gaussian(&SymMatrix::identity(3), 300, RngSeed(16)).unwrap();
        let config = StarsConfig::with_grid(vec![1.6, 1.4, 1.2]);
        let sel =
            stars_select(&data, GraphEstimator::Threshold, &config, RngSeed(17)).unwrap();
        assert!(sel.monotone_instability.iter().all(|&v| v == 0.0));
        assert_eq!(sel.selected_index, 2);
        assert!(sel.selected_graph.is_empty());
    }

    #[test]
    fn stars_exhausted_grid_returns_sparsest_flagged() {
        // A grid of tiny penalties on weakly coupled noisy data keeps the
        // selections unstable at every grid point.
        let sigma = SymMatrix::new(&[
            vec![1.0, 0.05, 0.0],
            vec![0.05, 1.0, 0.05],
            vec![0.0, 0.05, 1.0],
        ])
        .unwrap();
        let data = sample_gaussian(&sigma, 120, RngSeed(23)).unwrap();
        let config = StarsConfig {
            subsample_count: 20,
            subsample_size: Some(30),
            beta: 0.01,
            grid: vec![0.09, 0.07, 0.05, 0.03],
        };
        let sel = stars_select(
            &data,
            GraphEstimator::Neighborhood { rule: EdgeRule::Or },
            &config,
            RngSeed(24),
        )
        .unwrap();
        assert!(sel.exhausted, "curve: {:?}", sel.monotone_instability);
        assert_eq!(sel.selected_index, 0);
    }

    #[test]
    fn stars_recovers_bridge_conditional_graph() {
        // The bridge model's population edge-entry penalties are roughly
        // 0.55 for (1,2), 0.41 for (3,4), 0.36 for (2,3) and 0.22 for
        // (2,4); this grid keeps every point well away from those
        // thresholds, so subsampled graphs are stable wherever the
        // population graph is. The densest point (0.06) flickers on the
        // near-boundary spurious coordinates, so selection lands on the
        // interior point 0.12, whose full-data graph is exactly the truth.
        let (bridge, _) = crate::homotopy::asymmetric_bridge_fixture();
        let data = sample_gaussian(bridge.sigma(), 20000, RngSeed(3)).unwrap();
        let config = StarsConfig::with_grid(vec![0.45, 0.25, 0.12, 0.06]);
        let sel = stars_select(
            &data,
            GraphEstimator::Neighborhood { rule: EdgeRule::Or },
            &config,
            RngSeed(3),
        )
        .unwrap();
        assert!(!sel.exhausted);
        assert_eq!(sel.selected_index, 2, "frozen selection at the stated seed");
        assert_eq!(sel.selected_param, 0.12);
        assert_eq!(
            sel.selected_graph.to_one_based(),
            vec![(1, 2), (2, 3), (2, 4), (3, 4)],
            "frozen: stability-tuned recovery at the stated seed"
        );
    }

    #[test]
    fn stars_default_grid_is_conservative_near_entry_thresholds() {
        // With the default grid, the sparse-end point 0.4 sits within 0.01
        // of the bridge model's (3,4) entry threshold, so subsampled graphs
        // flicker there and the running-max monotonization propagates that
        // instability to every denser point. The algorithmically correct
        // outcome is the sparsest grid point and its single stable edge —
        // frozen here to document the conservative selection behavior.
        let (bridge, _) = crate::homotopy::asymmetric_bridge_fixture();
        let data = sample_gaussian(bridge.sigma(), 4000, RngSeed(3)).unwrap();
        let config = StarsConfig::with_grid(default_lambda_grid());
        let sel = stars_select(
            &data,
            GraphEstimator::Neighborhood { rule: EdgeRule::Or },
            &config,
            RngSeed(3),
        )
        .unwrap();
        assert!(!sel.exhausted);
        assert_eq!(sel.selected_index, 0);
        assert_eq!(sel.selected_param, 0.5);
        assert_eq!(sel.selected_graph.to_one_based(), vec![(1, 2)]);
        assert!(
            sel.monotone_instability[1] > config.beta,
            "the flickering sparse-end point must be what blocks denser selection"
        );
    }

    #[test]
    fn stars_config_validation() {
        let data = sample_gaussian(&SymMatrix::identity(2), 50, RngSeed(1)).unwrap();
        let bad_grid = StarsConfig::with_grid(vec![0.1, 0.2]);
        assert!(stars_select(
            &data,
            GraphEstimator::Threshold,
            &bad_grid,
            RngSeed(0)
        )
        .is_err());
        let empty = StarsConfig::with_grid(vec![]);
        assert!(stars_select(&data, GraphEstimator::Threshold, &empty, RngSeed(0)).is_err());
        let bad_b = StarsConfig {
            subsample_size: Some(50),
            ..StarsConfig::with_grid(vec![0.5, 0.1])
        };
        assert!(stars_select(&data, GraphEstimator::Threshold, &bad_b, RngSeed(0)).is_err());
        let bad_beta = StarsConfig {
            beta: 0.5,
            ..StarsConfig::with_grid(vec![0.5, 0.1])
        };
        assert!(stars_select(&data, GraphEstimator::Threshold, &bad_beta, RngSeed(0)).is_err());
    }

    #[test]
    fn stars_is_deterministic() {
        let data = sample_gaussian(&fixture_sigma(), 300, RngSeed(31)).unwrap();
        let config = StarsConfig::with_grid(default_tau_grid());
        let a = stars_select(&data, GraphEstimator::Threshold, &config, RngSeed(8)).unwrap();
        let b = stars_select(&data, GraphEstimator::Threshold, &config, RngSeed(8)).unwrap();
        assert_eq!(a.selected_param, b.selected_param);
        assert_eq!(a.instability, b.instability);
        assert_eq!(a.selected_graph, b.selected_graph);
    }

    #[test]
    fn subsample_indices_properties() {
        let mut rng = RngSeed(5).stream(1);
        for _ in 0..50 {
            let s = subsample_indices(&mut rng, 20, 7);
            assert_eq!(s.len(), 7);
            assert!(s.windows(2).all(|w| w[0] < w[1]), "sorted and distinct");
            assert!(s.iter().all(|&i| i < 20));
        }
    }

    #[test]
    fn discrepancy_rate_cases() {
        let e = EdgeSet::from_pairs(4, &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(discrepancy_rate(&e, &e).unwrap(), 0.0);
        let empty = EdgeSet::new(4);
        assert_eq!(discrepancy_rate(&e, &empty).unwrap(), 1.0);
        assert_eq!(discrepancy_rate(&empty, &e).unwrap(), 0.0);
        let e1 = EdgeSet::from_pairs(4, &[(0, 1), (0, 2), (1, 2), (0, 3)]).unwrap();
        let e2 = EdgeSet::from_pairs(4, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(discrepancy_rate(&e1, &e2).unwrap(), 0.5);
        let other = EdgeSet::new(5);
        assert!(discrepancy_rate(&e, &other).is_err());
    }

    #[test]
    fn discrepancy_table_single_method() {
        let data = sample_gaussian(&fixture_sigma(), 300, RngSeed(40)).unwrap();
        let p = Partition::from_one_based(4, vec![vec![1], vec![2, 3], vec![4]]).unwrap();
        let config = StarsConfig::with_grid(default_lambda_grid());
        let t = discrepancy_table(
            &data,
            &p,
            &[ReduceMethod::Mean],
            GraphKind::Conditional,
            &config,
            RngSeed(41),
        )
        .unwrap();
        assert_eq!(t.rates, vec![vec![0.0]]);
    }

    #[test]
    fn discrepancy_table_singleton_clusters_mean_equals_pca() {
        // On singleton clusters, mean and leading-component reductions give
        // the same graph (the estimators are shift/scale invariant).
        let data = sample_gaussian(&fixture_sigma(), 1000, RngSeed(42)).unwrap();
        let p = Partition::singletons(4).unwrap();
        let config = StarsConfig::with_grid(default_tau_grid());
        let t = discrepancy_table(
            &data,
            &p,
            &[ReduceMethod::Mean, ReduceMethod::Pca],
            GraphKind::Marginal,
            &config,
            RngSeed(43),
        )
        .unwrap();
        assert_eq!(t.rates[0][1], 0.0);
        assert_eq!(t.rates[1][0], 0.0);
        assert_eq!(t.graphs[0], t.graphs[1]);
    }

    #[test]
    fn discrepancy_table_rates_in_unit_interval_and_zero_diagonal() {
        let data = sample_gaussian(&fixture_sigma(), 400, RngSeed(44)).unwrap();
        let p = Partition::from_one_based(4, vec![vec![1, 2], vec![3, 4]]).unwrap();
        let config = StarsConfig::with_grid(default_lambda_grid());
        let t = discrepancy_table(
            &data,
            &p,
            &[ReduceMethod::Mean, ReduceMethod::Median, ReduceMethod::Pca],
            GraphKind::Conditional,
            &config,
            RngSeed(45),
        )
        .unwrap();
        for i in 0..3 {
            assert_eq!(t.rates[i][i], 0.0);
            for j in 0..3 {
                assert!((0.0..=1.0).contains(&t.rates[i][j]));
            }
        }
        // Determinism end to end.
        let t2 = discrepancy_table(
            &data,
            &p,
            &[ReduceMethod::Mean, ReduceMethod::Median, ReduceMethod::Pca],
            GraphKind::Conditional,
            &config,
            RngSeed(45),
        )
        .unwrap();
        assert_eq!(t.rates, t2.rates);
        assert_eq!(t.selected_params, t2.selected_params);
    }
}
