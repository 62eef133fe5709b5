//! Ground-truth systems built from Gaussian graphical models.
//!
//! * R-system: a common cause `Y` drives every source, `X_i = c Y + ε_i`.
//!   Redundancy-dominated.
//! * S-system: independent sources jointly drive a collider,
//!   `Y = c Σ X_i + ε`. Synergy-dominated.
//! * Independent: identity covariance.
//!
//! `Y` is always the last variable of its block. Blocks are concatenated
//! block-diagonally, so measures over n-plets spanning several blocks are
//! sums of per-block values.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::copula::{block_diag, CovSet, CovarianceMatrix, DataMatrix};
use crate::error::{HoiError, Result};
use crate::linalg;
use crate::measures::compute_hoi_batch;
use crate::nplet::NpletBatch;

/// Covariance of an R-system with `n_sources` sources and coupling `c`.
pub fn r_system_cov(n_sources: usize, c: f64) -> CovarianceMatrix {
    let n = n_sources + 1;
    let mut sigma = vec![0.0; n * n];
    for i in 0..n_sources {
        for j in 0..n_sources {
            sigma[i * n + j] = if i == j { c * c + 1.0 } else { c * c };
        }
        sigma[i * n + n_sources] = c;
        sigma[n_sources * n + i] = c;
    }
    sigma[n * n - 1] = 1.0;
    CovarianceMatrix::new_unchecked(sigma, n, 0)
}

/// Covariance of an S-system with `n_sources` sources and coupling `c`.
pub fn s_system_cov(n_sources: usize, c: f64) -> CovarianceMatrix {
    let n = n_sources + 1;
    let mut sigma = vec![0.0; n * n];
    for i in 0..n_sources {
        sigma[i * n + i] = 1.0;
        sigma[i * n + n_sources] = c;
        sigma[n_sources * n + i] = c;
    }
    sigma[n * n - 1] = n_sources as f64 * c * c + 1.0;
    CovarianceMatrix::new_unchecked(sigma, n, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    #[serde(rename = "R", alias = "r", alias = "redundant")]
    Redundant,
    #[serde(rename = "S", alias = "s", alias = "synergistic")]
    Synergistic,
    #[serde(rename = "independent", alias = "I", alias = "i")]
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub n_sources: usize,
    #[serde(default)]
    pub c: f64,
}

impl BlockSpec {
    pub fn redundant(n_sources: usize, c: f64) -> Self {
        Self {
            kind: BlockKind::Redundant,
            n_sources,
            c,
        }
    }

    pub fn synergistic(n_sources: usize, c: f64) -> Self {
        Self {
            kind: BlockKind::Synergistic,
            n_sources,
            c,
        }
    }

    pub fn independent(n: usize) -> Self {
        Self {
            kind: BlockKind::Independent,
            n_sources: n,
            c: 0.0,
        }
    }

    pub fn size(&self) -> usize {
        match self.kind {
            BlockKind::Independent => self.n_sources,
            _ => self.n_sources + 1,
        }
    }

    pub fn covariance(&self) -> CovarianceMatrix {
        match self.kind {
            BlockKind::Redundant => r_system_cov(self.n_sources, self.c),
            BlockKind::Synergistic => s_system_cov(self.n_sources, self.c),
            BlockKind::Independent => CovarianceMatrix::identity(self.n_sources),
        }
    }
}

/// An ordered list of blocks; serialized as `{"blocks": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmSpec {
    pub blocks: Vec<BlockSpec>,
}

impl PgmSpec {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        Self { blocks }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(HoiError::InvalidConfig("PGM has no blocks".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.n_sources == 0 {
                return Err(HoiError::InvalidConfig(format!("block {i} has no sources")));
            }
            if !b.c.is_finite() {
                return Err(HoiError::InvalidConfig(format!("block {i} has non-finite c")));
            }
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.blocks.iter().map(BlockSpec::size).sum()
    }

    pub fn build(&self) -> Result<Concatenated> {
        self.validate()?;
        let covs: Vec<CovarianceMatrix> = self.blocks.iter().map(BlockSpec::covariance).collect();
        let mut system = block_concat(&covs)?;
        system.kinds = self.blocks.iter().map(|b| Some(b.kind)).collect();
        Ok(system)
    }

    /// Column names like `R0_X1`, `R0_Y`, `I2_X3`.
    pub fn variable_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_vars());
        for (i, b) in self.blocks.iter().enumerate() {
            let tag = match b.kind {
                BlockKind::Redundant => "R",
                BlockKind::Synergistic => "S",
                BlockKind::Independent => "I",
            };
            for s in 1..=b.n_sources {
                names.push(format!("{tag}{i}_X{s}"));
            }
            if b.kind != BlockKind::Independent {
                names.push(format!("{tag}{i}_Y"));
            }
        }
        names
    }
}

/// A block-diagonal covariance that remembers where each block sits.
#[derive(Debug, Clone)]
pub struct Concatenated {
    pub cov: CovarianceMatrix,
    pub blocks: Vec<Range<usize>>,
    pub kinds: Vec<Option<BlockKind>>,
}

impl Concatenated {
    pub fn block_indices(&self, i: usize) -> Vec<usize> {
        self.blocks[i].clone().collect()
    }
}

pub fn block_concat(blocks: &[CovarianceMatrix]) -> Result<Concatenated> {
    if blocks.is_empty() {
        return Err(HoiError::InvalidConfig("nothing to concatenate".into()));
    }
    let refs: Vec<&CovarianceMatrix> = blocks.iter().collect();
    let mut ranges = Vec::with_capacity(blocks.len());
    let mut at = 0;
    for b in blocks {
        ranges.push(at..at + b.dim());
        at += b.dim();
    }
    Ok(Concatenated {
        cov: block_diag(&refs),
        blocks: ranges,
        kinds: vec![None; blocks.len()],
    })
}

/// `T` draws from `N(0, Σ)`, reproducible for a given seed.
///
/// Rank-deficient covariances are sampled exactly along their range.
pub fn sample_gaussian(cov: &CovarianceMatrix, n_samples: usize, seed: u64) -> Result<DataMatrix> {
    let n = cov.dim();
    let l = linalg::psd_factor(cov.as_slice(), n)
        .ok_or(HoiError::NotPositiveDefinite { row: 0, dataset: 0 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n_samples * n];
    let mut z = vec![0.0; n];
    for row in values.chunks_mut(n) {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for i in 0..n {
            row[i] = (0..=i).map(|k| l[i * n + k] * z[k]).sum();
        }
    }
    DataMatrix::new(values, n_samples, n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoiValues {
    pub tc: f64,
    pub dtc: f64,
    pub o: f64,
    pub s: f64,
}

/// Exact measures of `nplet` from a population covariance.
pub fn ground_truth_hoi(cov: &CovarianceMatrix, nplet: &[usize]) -> Result<HoiValues> {
    let mut sorted = nplet.to_vec();
    sorted.sort_unstable();
    let batch = NpletBatch::fixed(cov.dim(), sorted.len(), sorted)?;
    let analytic = CovarianceMatrix::new_unchecked(cov.as_slice().to_vec(), cov.dim(), 0);
    let h = compute_hoi_batch(&CovSet::single(analytic), &batch, false)?;
    Ok(HoiValues {
        tc: h.tc[0],
        dtc: h.dtc[0],
        o: h.o[0],
        s: h.s[0],
    })
}
