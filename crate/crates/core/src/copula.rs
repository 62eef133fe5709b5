//! Gaussian-copula covariance estimation and Gaussian differential entropy.
//!
//! Raw observations are mapped column by column through their ranks onto the
//! standard-normal quantile grid `Φ⁻¹(r / (T + 1))`. The covariance of the
//! transformed data then feeds the closed-form Gaussian entropy
//! `½ [n log(2πe) + log|Σ|]`, optionally corrected for the finite-sample bias
//! of `log|Σ̂|`. All entropies are in nats.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::digamma;

use crate::error::{HoiError, Result};
use crate::linalg;

/// Entropy of a unit-variance normal variable, `½ log(2πe)`.
pub const UNIT_NORMAL_ENTROPY: f64 = 1.418_938_533_204_672_7;

const SYMMETRY_TOL: f64 = 1e-12;

/// `T x N` matrix of continuous observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n_samples: usize,
    n_vars: usize,
    column_names: Option<Vec<String>>,
}

impl DataMatrix {
    /// Builds a matrix from row-major `values`.
    ///
    /// Rejects non-finite entries, `N = 0` and `T < 3`. Constant columns are
    /// allowed here and rejected by the rank transform.
    pub fn new(values: Vec<f64>, n_samples: usize, n_vars: usize) -> Result<Self> {
        if n_vars == 0 {
            return Err(HoiError::InvalidData("no variables".into()));
        }
        if values.len() != n_samples * n_vars {
            return Err(HoiError::InvalidData(format!(
                "expected {} values for {n_samples}x{n_vars}, got {}",
                n_samples * n_vars,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(HoiError::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / n_vars,
                pos % n_vars
            )));
        }
        if n_samples < 3 {
            return Err(HoiError::InsufficientSamples {
                needed: 2,
                got: n_samples,
            });
        }
        Ok(Self {
            values,
            n_samples,
            n_vars,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_vars = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_vars) {
            return Err(HoiError::InvalidData("ragged rows".into()));
        }
        Self::new(rows.concat(), rows.len(), n_vars)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_vars {
            return Err(HoiError::InvalidData(format!(
                "{} column names for {} variables",
                names.len(),
                self.n_vars
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_vars + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_samples).map(|r| self.get(r, col)).collect()
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Column names, falling back to `X0, X1, ...`.
    pub fn names_or_default(&self) -> Vec<String> {
        match &self.column_names {
            Some(n) => n.clone(),
            None => (0..self.n_vars).map(|i| format!("X{i}")).collect(),
        }
    }

    /// Applies `f` to every entry, keeping the shape and names.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        let mut out = Self::new(values, self.n_samples, self.n_vars)?;
        out.column_names = self.column_names.clone();
        Ok(out)
    }
}

/// Symmetric positive (semi-)definite `N x N` covariance.
///
/// `n_samples` is the sample count the estimate came from, or 0 for an
/// analytic (population) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    sigma: Vec<f64>,
    dim: usize,
    n_samples: usize,
}

impl CovarianceMatrix {
    /// Validates symmetry, a strictly positive diagonal and positive
    /// semi-definiteness (Cholesky after jitter).
    pub fn new(sigma: Vec<f64>, dim: usize, n_samples: usize) -> Result<Self> {
        if dim == 0 || sigma.len() != dim * dim {
            return Err(HoiError::InvalidData(format!(
                "covariance of dimension {dim} needs {} entries, got {}",
                dim * dim,
                sigma.len()
            )));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(HoiError::InvalidData("non-finite covariance entry".into()));
        }
        for i in 0..dim {
            if !(sigma[i * dim + i] > 0.0) {
                return Err(HoiError::InvalidData(format!(
                    "non-positive variance at {i}"
                )));
            }
            for j in (i + 1)..dim {
                let (a, b) = (sigma[i * dim + j], sigma[j * dim + i]);
                let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(HoiError::InvalidData(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if linalg::logdet(&sigma, dim, &mut Vec::new()).is_none() {
            return Err(HoiError::NotPositiveDefinite { row: 0, dataset: 0 });
        }
        Ok(Self {
            sigma,
            dim,
            n_samples,
        })
    }

    pub(crate) fn new_unchecked(sigma: Vec<f64>, dim: usize, n_samples: usize) -> Self {
        Self {
            sigma,
            dim,
            n_samples,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], n_samples: usize) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(HoiError::InvalidData("covariance rows must be square".into()));
        }
        Self::new(rows.concat(), dim, n_samples)
    }

    pub fn identity(dim: usize) -> Self {
        let mut sigma = vec![0.0; dim * dim];
        for i in 0..dim {
            sigma[i * dim + i] = 1.0;
        }
        Self {
            sigma,
            dim,
            n_samples: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sigma
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.dim + j]
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim) {
            return Err(HoiError::InvalidNplet(format!(
                "index {bad} out of range for {} variables",
                self.dim
            )));
        }
        let k = indices.len();
        let mut sigma = Vec::with_capacity(k * k);
        for &i in indices {
            for &j in indices {
                sigma.push(self.get(i, j));
            }
        }
        Ok(Self {
            sigma,
            dim: k,
            n_samples: self.n_samples,
        })
    }
}

/// `D` covariance matrices over the same `N` variables.
#[derive(Debug, Clone)]
pub struct CovSet {
    mats: Vec<CovarianceMatrix>,
    names: Vec<String>,
}

impl CovSet {
    pub fn new(mats: Vec<CovarianceMatrix>) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(HoiError::InvalidData("empty covariance set".into()));
        };
        let n = first.dim();
        if mats.iter().any(|m| m.dim() != n) {
            return Err(HoiError::InvalidData(
                "all covariances in a set must have the same dimension".into(),
            ));
        }
        let names = (0..n).map(|i| format!("X{i}")).collect();
        Ok(Self { mats, names })
    }

    pub fn single(cov: CovarianceMatrix) -> Self {
        let names = (0..cov.dim()).map(|i| format!("X{i}")).collect();
        Self {
            mats: vec![cov],
            names,
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_vars() {
            return Err(HoiError::InvalidData(format!(
                "{} names for {} variables",
                names.len(),
                self.n_vars()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n_vars(&self) -> usize {
        self.mats[0].dim()
    }

    pub fn n_datasets(&self) -> usize {
        self.mats.len()
    }

    pub fn matrices(&self) -> &[CovarianceMatrix] {
        &self.mats
    }

    pub fn get(&self, d: usize) -> &CovarianceMatrix {
        &self.mats[d]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub nats: f64,
    pub bias_corrected: bool,
}

/// Ordinal ranks (1-based) of each column. Ties are broken by row index, so
/// equal values get increasing ranks in the order they appear.
pub fn rank_columns(data: &DataMatrix) -> Result<Vec<Vec<usize>>> {
    let t = data.n_samples();
    (0..data.n_vars())
        .map(|c| {
            let col = data.column(c);
            if col.iter().any(|v| !v.is_finite()) {
                return Err(HoiError::InvalidData(format!("non-finite value in column {c}")));
            }
            if col.iter().all(|&v| v == col[0]) {
                return Err(HoiError::DegenerateColumn { column: c });
            }
            let mut order: Vec<usize> = (0..t).collect();
            // sort_by is stable, which gives the row-index tie rule
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut ranks = vec![0; t];
            for (r, &row) in order.iter().enumerate() {
                ranks[row] = r + 1;
            }
            Ok(ranks)
        })
        .collect()
}

/// Maps every column onto standard-normal quantiles of `rank / (T + 1)`.
pub fn copula_transform(data: &DataMatrix) -> Result<DataMatrix> {
    let ranks = rank_columns(data)?;
    let t = data.n_samples();
    let n = data.n_vars();
    let std_normal = Normal::standard();
    let grid: Vec<f64> = (1..=t)
        .map(|r| std_normal.inverse_cdf(r as f64 / (t + 1) as f64))
        .collect();
    let mut values = vec![0.0; t * n];
    for (c, col_ranks) in ranks.iter().enumerate() {
        for (row, &r) in col_ranks.iter().enumerate() {
            values[row * n + c] = grid[r - 1];
        }
    }
    let mut out = DataMatrix::new(values, t, n)?;
    out.column_names = data.column_names.clone();
    Ok(out)
}

/// Unbiased sample covariance (divisor `T - 1`).
pub fn estimate_covariance(data: &DataMatrix) -> Result<CovarianceMatrix> {
    let t = data.n_samples();
    let n = data.n_vars();
    if t < 3 {
        return Err(HoiError::InsufficientSamples { needed: 2, got: t });
    }
    let mut means = vec![0.0; n];
    for row in data.values().chunks(n) {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= t as f64);

    let mut sigma = vec![0.0; n * n];
    let mut centered = vec![0.0; n];
    for row in data.values().chunks(n) {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&means) {
            *c = v - m;
        }
        for i in 0..n {
            let ci = centered[i];
            for j in 0..=i {
                sigma[i * n + j] += ci * centered[j];
            }
        }
    }
    let denom = (t - 1) as f64;
    for i in 0..n {
        for j in 0..=i {
            let v = sigma[i * n + j] / denom;
            sigma[i * n + j] = v;
            sigma[j * n + i] = v;
        }
    }
    for i in 0..n {
        if !(sigma[i * n + i] > 0.0) {
            return Err(HoiError::DegenerateColumn { column: i });
        }
    }
    CovarianceMatrix::new(sigma, n, t)
}

/// Copula transform followed by covariance estimation.
pub fn copula_covariance(data: &DataMatrix) -> Result<CovarianceMatrix> {
    estimate_covariance(&copula_transform(data)?)
}

/// Entropy of `N(0, Σ)` from a log-determinant, in nats.
pub fn entropy_from_logdet(dim: usize, logdet: f64) -> f64 {
    dim as f64 * UNIT_NORMAL_ENTROPY + 0.5 * logdet
}

/// `½ [n log(2πe) + log|Σ|]` with the log-determinant taken from a Cholesky
/// factor.
pub fn gaussian_entropy_nats(cov: &CovarianceMatrix) -> Result<EntropyValue> {
    let ld = linalg::logdet(cov.as_slice(), cov.dim(), &mut Vec::new())
        .ok_or(HoiError::NotPositiveDefinite { row: 0, dataset: 0 })?;
    Ok(EntropyValue {
        nats: entropy_from_logdet(cov.dim(), ld),
        bias_corrected: false,
    })
}

/// Expected bias of the plug-in Gaussian entropy for `n` variables estimated
/// from `T` samples:
/// `η(n, T) = ½ [n log(2 / (T - 1)) + Σ_{j=1..n} ψ((T - j) / 2)]`.
///
/// Always negative for finite `T` and vanishing as `T → ∞`. The corrected
/// entropy is `raw - η`.
pub fn entropy_bias(n: usize, n_samples: usize) -> Result<f64> {
    if n_samples <= n || n == 0 {
        return Err(HoiError::InsufficientSamples {
            needed: n,
            got: n_samples,
        });
    }
    let t = n_samples as f64;
    let psi_sum: f64 = (1..=n).map(|j| digamma((t - j as f64) / 2.0)).sum();
    Ok(0.5 * (n as f64 * (2.0 / (t - 1.0)).ln() + psi_sum))
}

/// Bias-corrected entropy of an estimated covariance.
pub fn corrected_entropy_nats(cov: &CovarianceMatrix) -> Result<EntropyValue> {
    if cov.n_samples() == 0 {
        return Err(HoiError::InvalidConfig(
            "bias correction needs a sample-estimated covariance".into(),
        ));
    }
    let raw = gaussian_entropy_nats(cov)?;
    Ok(EntropyValue {
        nats: raw.nats - entropy_bias(cov.dim(), cov.n_samples())?,
        bias_corrected: true,
    })
}

/// Block-diagonal assembly of square covariances.
pub fn block_diag(blocks: &[&CovarianceMatrix]) -> CovarianceMatrix {
    let dim: usize = blocks.iter().map(|b| b.dim()).sum();
    let mut sigma = vec![0.0; dim * dim];
    let mut off = 0;
    for b in blocks {
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                sigma[(off + i) * dim + off + j] = b.get(i, j);
            }
        }
        off += b.dim();
    }
    CovarianceMatrix {
        sigma,
        dim,
        n_samples: blocks.first().map_or(0, |b| b.n_samples()),
    }
}
