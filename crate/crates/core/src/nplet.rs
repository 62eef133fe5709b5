//! N-plet enumeration and batched entropy terms.
//!
//! An n-plet is a strictly increasing list of variable indices. Batches come
//! in two layouts: fixed-order (`B x K` index matrix) and mixed-order
//! (`B x N` boolean masks). Mixed batches are evaluated on `N x N` matrices in
//! which absent variables are replaced by an independent unit-variance block;
//! the known entropy of that block is subtracted afterwards.

use std::collections::HashSet;

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::copula::{entropy_bias, entropy_from_logdet, CovSet, UNIT_NORMAL_ENTROPY};
use crate::error::{HoiError, Result};
use crate::linalg;

/// Number of n-plets of order `min_order..=max_order` over `n` variables.
pub fn count_nplets(n: usize, min_order: usize, max_order: usize) -> Result<BigUint> {
    check_order_range(n, min_order, max_order)?;
    let mut total = BigUint::from(0u32);
    let mut binom = BigUint::from(1u32); // C(n, 0)
    for k in 1..=max_order {
        binom = binom * BigUint::from(n - k + 1) / BigUint::from(k);
        if k >= min_order {
            total += &binom;
        }
    }
    Ok(total)
}

pub(crate) fn check_order_range(n: usize, min: usize, max: usize) -> Result<()> {
    if min == 0 || min > max || max > n {
        return Err(HoiError::InvalidOrderRange { n, min, max });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layout {
    Fixed { order: usize, indices: Vec<usize> },
    Mixed { masks: Vec<bool> },
}

/// A batch of n-plets over `n_vars` variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpletBatch {
    n_vars: usize,
    layout: Layout,
}

impl NpletBatch {
    /// Fixed-order batch from a flat `B x order` index matrix.
    pub fn fixed(n_vars: usize, order: usize, indices: Vec<usize>) -> Result<Self> {
        if order == 0 || order > n_vars {
            return Err(HoiError::InvalidOrderRange {
                n: n_vars,
                min: order,
                max: order,
            });
        }
        if !indices.len().is_multiple_of(order) {
            return Err(HoiError::InvalidNplet(format!(
                "{} indices do not split into rows of {order}",
                indices.len()
            )));
        }
        let mut seen = HashSet::new();
        for row in indices.chunks(order) {
            validate_row(row, n_vars)?;
            if !seen.insert(row) {
                return Err(HoiError::InvalidNplet(format!("duplicate n-plet {row:?}")));
            }
        }
        Ok(Self {
            n_vars,
            layout: Layout::Fixed { order, indices },
        })
    }

    /// Mixed-order batch from `B` masks of length `n_vars`.
    pub fn mixed(n_vars: usize, masks: &[Vec<bool>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(masks.len() * n_vars);
        let mut seen = HashSet::new();
        for m in masks {
            if m.len() != n_vars {
                return Err(HoiError::InvalidNplet(format!(
                    "mask of length {} for {n_vars} variables",
                    m.len()
                )));
            }
            if !m.iter().any(|&x| x) {
                return Err(HoiError::InvalidNplet("empty mask".into()));
            }
            if !seen.insert(m.as_slice()) {
                return Err(HoiError::InvalidNplet("duplicate mask".into()));
            }
            flat.extend_from_slice(m);
        }
        Ok(Self {
            n_vars,
            layout: Layout::Mixed { masks: flat },
        })
    }

    /// Builds the most compact batch for `nplets`: fixed-order when all rows
    /// share one order, mixed otherwise.
    pub fn from_nplets(n_vars: usize, nplets: &[Vec<usize>]) -> Result<Self> {
        let Some(first) = nplets.first() else {
            return Err(HoiError::InvalidNplet("empty batch".into()));
        };
        if nplets.iter().all(|p| p.len() == first.len()) {
            Self::fixed(n_vars, first.len(), nplets.concat())
        } else {
            for p in nplets {
                validate_row(p, n_vars)?;
            }
            let masks: Vec<Vec<bool>> = nplets.iter().map(|p| indices_to_mask(p, n_vars)).collect();
            Self::mixed(n_vars, &masks)
        }
    }

    /// Mixed-order view of the same n-plets.
    pub fn to_mixed(&self) -> Self {
        let masks: Vec<Vec<bool>> = (0..self.len()).map(|b| self.mask(b)).collect();
        Self {
            n_vars: self.n_vars,
            layout: Layout::Mixed {
                masks: masks.concat(),
            },
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        match &self.layout {
            Layout::Fixed { order, indices } => indices.len() / order,
            Layout::Mixed { masks } => masks.len() / self.n_vars,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_fixed_order(&self) -> bool {
        matches!(self.layout, Layout::Fixed { .. })
    }

    /// The common order of a fixed-order batch.
    pub fn fixed_order(&self) -> Option<usize> {
        match &self.layout {
            Layout::Fixed { order, .. } => Some(*order),
            Layout::Mixed { .. } => None,
        }
    }

    pub fn order(&self, b: usize) -> usize {
        match &self.layout {
            Layout::Fixed { order, .. } => *order,
            Layout::Mixed { masks } => masks[b * self.n_vars..(b + 1) * self.n_vars]
                .iter()
                .filter(|&&x| x)
                .count(),
        }
    }

    /// Sorted variable indices of row `b`.
    pub fn nplet(&self, b: usize) -> Vec<usize> {
        match &self.layout {
            Layout::Fixed { order, indices } => indices[b * order..(b + 1) * order].to_vec(),
            Layout::Mixed { masks } => mask_to_indices(&masks[b * self.n_vars..(b + 1) * self.n_vars]),
        }
    }

    pub fn mask(&self, b: usize) -> Vec<bool> {
        match &self.layout {
            Layout::Fixed { order, indices } => {
                indices_to_mask(&indices[b * order..(b + 1) * order], self.n_vars)
            }
            Layout::Mixed { masks } => masks[b * self.n_vars..(b + 1) * self.n_vars].to_vec(),
        }
    }

    pub fn nplets(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(|b| self.nplet(b))
    }
}

fn validate_row(row: &[usize], n_vars: usize) -> Result<()> {
    if row.is_empty() {
        return Err(HoiError::InvalidNplet("empty n-plet".into()));
    }
    if row.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HoiError::InvalidNplet(format!(
            "indices must be strictly increasing: {row:?}"
        )));
    }
    if let Some(&last) = row.last() {
        if last >= n_vars {
            return Err(HoiError::InvalidNplet(format!(
                "index {last} out of range for {n_vars} variables"
            )));
        }
    }
    Ok(())
}

pub fn indices_to_mask(indices: &[usize], n_vars: usize) -> Vec<bool> {
    let mut m = vec![false; n_vars];
    for &i in indices {
        m[i] = true;
    }
    m
}

pub fn mask_to_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &x)| x.then_some(i))
        .collect()
}

/// Streams all `C(n, k)` combinations in lexicographic order, `batch_size`
/// rows at a time. Only the current combination and one batch are held.
#[derive(Debug, Clone)]
pub struct CombinationBatches {
    n: usize,
    k: usize,
    batch_size: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for CombinationBatches {
    type Item = NpletBatch;

    fn next(&mut self) -> Option<NpletBatch> {
        let mut current = self.next.take()?;
        let mut indices = Vec::with_capacity(self.batch_size.min(1 << 16) * self.k);
        let mut rows = 0;
        loop {
            indices.extend_from_slice(&current);
            rows += 1;
            if !advance(&mut current, self.n) {
                break;
            }
            if rows == self.batch_size {
                self.next = Some(current);
                break;
            }
        }
        Some(NpletBatch {
            n_vars: self.n,
            layout: Layout::Fixed {
                order: self.k,
                indices,
            },
        })
    }
}

/// Moves `comb` to its lexicographic successor; `false` when exhausted.
fn advance(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in (i + 1)..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Batched stream of all n-plets of order `k`.
pub fn enumerate_order(n: usize, k: usize, batch_size: usize) -> Result<CombinationBatches> {
    check_order_range(n, k, k)?;
    if batch_size == 0 {
        return Err(HoiError::InvalidConfig("batch size must be at least 1".into()));
    }
    Ok(CombinationBatches {
        n,
        k,
        batch_size,
        next: Some((0..k).collect()),
    })
}

/// Orders `min_order..=max_order` one after the other; every batch is
/// fixed-order.
pub fn enumerate_orders(
    n: usize,
    min_order: usize,
    max_order: usize,
    batch_size: usize,
) -> Result<impl Iterator<Item = NpletBatch>> {
    check_order_range(n, min_order, max_order)?;
    let streams = (min_order..=max_order)
        .map(|k| enumerate_order(n, k, batch_size))
        .collect::<Result<Vec<_>>>()?;
    Ok(streams.into_iter().flatten())
}

/// Materialized sub-covariance matrices for a batch, laid out `B x D x m x m`
/// where `m` is the n-plet order (fixed) or `N` (padded).
#[derive(Debug, Clone, PartialEq)]
pub struct SubCovBatch {
    pub dim: usize,
    pub n_rows: usize,
    pub n_datasets: usize,
    pub matrices: Vec<f64>,
    pub pad_counts: Vec<usize>,
}

impl SubCovBatch {
    pub fn matrix(&self, b: usize, d: usize) -> &[f64] {
        let stride = self.dim * self.dim;
        let at = (b * self.n_datasets + d) * stride;
        &self.matrices[at..at + stride]
    }

    /// Log-determinant of every matrix, `B x D`.
    pub fn logdets(&self) -> Result<Vec<f64>> {
        linalg::batched_logdet(&self.matrices, self.dim, self.n_rows * self.n_datasets).map_err(
            |i| HoiError::NotPositiveDefinite {
                row: i / self.n_datasets,
                dataset: i % self.n_datasets,
            },
        )
    }

    /// Gaussian entropies with the padding contribution removed.
    pub fn entropies(&self) -> Result<Vec<f64>> {
        let lds = self.logdets()?;
        Ok(lds
            .iter()
            .enumerate()
            .map(|(i, &ld)| {
                let pads = self.pad_counts[i / self.n_datasets];
                entropy_from_logdet(self.dim, ld) - pads as f64 * UNIT_NORMAL_ENTROPY
            })
            .collect())
    }
}

fn check_batch_fits(covs: &CovSet, batch: &NpletBatch) -> Result<()> {
    if batch.n_vars() != covs.n_vars() {
        return Err(HoiError::InvalidNplet(format!(
            "batch over {} variables used with {}-variable covariances",
            batch.n_vars(),
            covs.n_vars()
        )));
    }
    Ok(())
}

/// Principal submatrices for every (n-plet, dataset) pair of a fixed-order
/// batch.
pub fn extract_subcov_batch(covs: &CovSet, batch: &NpletBatch) -> Result<SubCovBatch> {
    check_batch_fits(covs, batch)?;
    let Layout::Fixed { order, indices } = &batch.layout else {
        return Err(HoiError::InvalidNplet(
            "extract_subcov_batch needs a fixed-order batch".into(),
        ));
    };
    let k = *order;
    let n_d = covs.n_datasets();
    let b_len = batch.len();
    let mut matrices = vec![0.0; b_len * n_d * k * k];
    if k > 0 {
        matrices
            .par_chunks_mut(k * k)
            .enumerate()
            .for_each(|(i, out)| {
                let (b, d) = (i / n_d, i % n_d);
                gather(covs.get(d).as_slice(), covs.n_vars(), &indices[b * k..(b + 1) * k], out);
            });
    }
    Ok(SubCovBatch {
        dim: k,
        n_rows: b_len,
        n_datasets: n_d,
        matrices,
        pad_counts: vec![0; b_len],
    })
}

/// `N x N` matrices that keep the covariance at masked-in positions and an
/// identity block elsewhere, so every row of a mixed-order batch has the same
/// shape.
pub fn pad_subcov_batch(covs: &CovSet, batch: &NpletBatch) -> Result<SubCovBatch> {
    check_batch_fits(covs, batch)?;
    let n = covs.n_vars();
    let n_d = covs.n_datasets();
    let b_len = batch.len();
    let masks: Vec<Vec<bool>> = (0..b_len).map(|b| batch.mask(b)).collect();
    if masks.iter().any(|m| !m.iter().any(|&x| x)) {
        return Err(HoiError::InvalidNplet("empty mask".into()));
    }
    let mut matrices = vec![0.0; b_len * n_d * n * n];
    matrices
        .par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(i, out)| {
            let (b, d) = (i / n_d, i % n_d);
            gather_padded(covs.get(d).as_slice(), n, &masks[b], None, out);
        });
    let pad_counts = masks
        .iter()
        .map(|m| n - m.iter().filter(|&&x| x).count())
        .collect();
    Ok(SubCovBatch {
        dim: n,
        n_rows: b_len,
        n_datasets: n_d,
        matrices,
        pad_counts,
    })
}

fn gather(sigma: &[f64], n: usize, idx: &[usize], out: &mut [f64]) {
    let k = idx.len();
    for (r, &i) in idx.iter().enumerate() {
        let src = &sigma[i * n..(i + 1) * n];
        let dst = &mut out[r * k..(r + 1) * k];
        for (c, &j) in idx.iter().enumerate() {
            dst[c] = src[j];
        }
    }
}

/// Padded gather; `skip` additionally pads out one variable.
fn gather_padded(sigma: &[f64], n: usize, mask: &[bool], skip: Option<usize>, out: &mut [f64]) {
    let keep = |i: usize| mask[i] && Some(i) != skip;
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        if keep(i) {
            for j in 0..n {
                row[j] = if keep(j) { sigma[i * n + j] } else { 0.0 };
            }
        } else {
            row.fill(0.0);
            row[i] = 1.0;
        }
    }
}

/// Entropies needed by every measure, per (n-plet, dataset).
///
/// `h_joint` is `B x D`. The per-variable terms are ragged (row `b` has
/// `order(b)` of them per dataset) and are read through [`Self::singles`] and
/// [`Self::leave_one_out`].
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTerms {
    pub n_datasets: usize,
    pub orders: Vec<usize>,
    pub h_joint: Vec<f64>,
    h_singles: Vec<f64>,
    h_leave_one_out: Vec<f64>,
    offsets: Vec<usize>,
}

impl EntropyTerms {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn joint(&self, b: usize, d: usize) -> f64 {
        self.h_joint[b * self.n_datasets + d]
    }

    /// `H(X_j)` for each member `j` of row `b`.
    pub fn singles(&self, b: usize, d: usize) -> &[f64] {
        let k = self.orders[b];
        let at = self.offsets[b] * self.n_datasets + d * k;
        &self.h_singles[at..at + k]
    }

    /// `H(X without X_j)` for each member `j` of row `b`.
    pub fn leave_one_out(&self, b: usize, d: usize) -> &[f64] {
        let k = self.orders[b];
        let at = self.offsets[b] * self.n_datasets + d * k;
        &self.h_leave_one_out[at..at + k]
    }
}

/// Bias terms `η(k, T_d)` for `k = 0..=n`, one table per dataset.
struct BiasTable {
    etas: Vec<Vec<f64>>,
}

impl BiasTable {
    fn new(covs: &CovSet, enabled: bool) -> Result<Self> {
        let n = covs.n_vars();
        if !enabled {
            return Ok(Self {
                etas: vec![vec![0.0; n + 1]; covs.n_datasets()],
            });
        }
        let etas = covs
            .matrices()
            .iter()
            .map(|c| {
                if c.n_samples() == 0 {
                    return Err(HoiError::InvalidConfig(
                        "bias correction needs sample-estimated covariances".into(),
                    ));
                }
                let mut row = vec![0.0];
                for k in 1..=n {
                    row.push(entropy_bias(k, c.n_samples())?);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { etas })
    }

    fn eta(&self, d: usize, k: usize) -> f64 {
        self.etas[d][k]
    }
}

/// Joint, single-variable and leave-one-out entropies for every n-plet and
/// dataset of `batch`.
///
/// Fixed-order batches work on `K x K` principal submatrices; mixed-order
/// batches on padded `N x N` matrices. With `bias_correct`, each entropy is
/// corrected for its own effective dimension; padding is exact and gets no
/// correction.
pub fn entropy_terms(covs: &CovSet, batch: &NpletBatch, bias_correct: bool) -> Result<EntropyTerms> {
    check_batch_fits(covs, batch)?;
    let n = covs.n_vars();
    let n_d = covs.n_datasets();
    let b_len = batch.len();
    let bias = BiasTable::new(covs, bias_correct)?;

    // single-variable entropies are shared by all rows
    let singles_by_var: Vec<Vec<f64>> = covs
        .matrices()
        .iter()
        .enumerate()
        .map(|(d, c)| {
            (0..n)
                .map(|i| entropy_from_logdet(1, c.get(i, i).ln()) - bias.eta(d, 1))
                .collect()
        })
        .collect();

    let orders: Vec<usize> = (0..b_len).map(|b| batch.order(b)).collect();
    let mut offsets = Vec::with_capacity(b_len);
    let mut total = 0;
    for &k in &orders {
        offsets.push(total);
        total += k;
    }
    let nplets: Vec<Vec<usize>> = batch.nplets().collect();

    let mut h_singles = Vec::with_capacity(total * n_d);
    for (b, p) in nplets.iter().enumerate() {
        debug_assert_eq!(h_singles.len(), offsets[b] * n_d);
        for single in &singles_by_var {
            h_singles.extend(p.iter().map(|&i| single[i]));
        }
    }

    // one work item per (row, dataset, dropped member or none)
    let items: Vec<(usize, usize, Option<usize>)> = (0..b_len)
        .flat_map(|b| {
            let k = orders[b];
            (0..n_d).flat_map(move |d| {
                std::iter::once((b, d, None)).chain((0..k).map(move |j| (b, d, Some(j))))
            })
        })
        .collect();

    let fixed = batch.is_fixed_order();
    let masks: Vec<Vec<bool>> = if fixed {
        Vec::new()
    } else {
        (0..b_len).map(|b| batch.mask(b)).collect()
    };

    let values: Vec<std::result::Result<f64, (usize, usize)>> = items
        .par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), Vec::new()),
            |(buf, scratch, idx), &(b, d, drop)| {
                let sigma = covs.get(d).as_slice();
                let k = orders[b];
                let eff = k - usize::from(drop.is_some());
                let ld = if fixed {
                    idx.clear();
                    idx.extend(
                        nplets[b]
                            .iter()
                            .enumerate()
                            .filter(|&(pos, _)| Some(pos) != drop)
                            .map(|(_, &v)| v),
                    );
                    buf.resize(eff * eff, 0.0);
                    gather(sigma, n, idx, buf);
                    linalg::logdet(buf, eff, scratch).map(|ld| entropy_from_logdet(eff, ld))
                } else {
                    buf.resize(n * n, 0.0);
                    gather_padded(sigma, n, &masks[b], drop.map(|j| nplets[b][j]), buf);
                    let pads = n - eff;
                    linalg::logdet(buf, n, scratch).map(|ld| {
                        entropy_from_logdet(n, ld) - pads as f64 * UNIT_NORMAL_ENTROPY
                    })
                };
                ld.map(|h| h - bias.eta(d, eff)).ok_or((b, d))
            },
        )
        .collect();

    let mut h_joint = vec![0.0; b_len * n_d];
    let mut h_leave_one_out = vec![0.0; total * n_d];
    let mut it = values.into_iter();
    for b in 0..b_len {
        let k = orders[b];
        for d in 0..n_d {
            let mut next = || {
                it.next()
                    .expect("one value per work item")
                    .map_err(|(row, dataset)| HoiError::NotPositiveDefinite { row, dataset })
            };
            h_joint[b * n_d + d] = next()?;
            let at = offsets[b] * n_d + d * k;
            for j in 0..k {
                h_leave_one_out[at + j] = next()?;
            }
        }
    }

    Ok(EntropyTerms {
        n_datasets: n_d,
        orders,
        h_joint,
        h_singles,
        h_leave_one_out,
        offsets,
    })
}
