//! Mutual information and the four higher-order measures.
//!
//! With `H_j = H(X_j)`, `H = H(X^k)` and `H_{-j}` the entropy without `X_j`:
//!
//! * `TC  = Σ_j H_j - H`
//! * `DTC = (1 - k) H + Σ_j H_{-j}`
//! * `Ω   = (k - 2) H + Σ_j (H_j - H_{-j})`
//! * `S   = TC + DTC`
//!
//! `Ω > 0` means the n-plet is redundancy-dominated, `Ω < 0`
//! synergy-dominated. Values are in nats.

use serde::{Deserialize, Serialize};

use crate::copula::{CovSet, CovarianceMatrix};
use crate::error::{HoiError, Result};
use crate::nplet::{entropy_terms, EntropyTerms, NpletBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Tc,
    Dtc,
    O,
    S,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Tc, Measure::Dtc, Measure::O, Measure::S];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Tc => "tc",
            Measure::Dtc => "dtc",
            Measure::O => "o",
            Measure::S => "s",
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = HoiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tc" => Ok(Measure::Tc),
            "dtc" => Ok(Measure::Dtc),
            "o" | "oinfo" | "omega" => Ok(Measure::O),
            "s" | "sinfo" => Ok(Measure::S),
            other => Err(HoiError::InvalidConfig(format!("unknown measure `{other}`"))),
        }
    }
}

/// Whether larger or smaller values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    /// Maps a value onto a score where larger is always better.
    pub fn score(self, value: f64) -> f64 {
        match self {
            Direction::Max => value,
            Direction::Min => -value,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = HoiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Direction::Max),
            "min" => Ok(Direction::Min),
            other => Err(HoiError::InvalidConfig(format!("unknown direction `{other}`"))),
        }
    }
}

/// Values of the four measures for every (n-plet, dataset), each `B x D`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoiBatch {
    pub n_datasets: usize,
    pub orders: Vec<usize>,
    pub tc: Vec<f64>,
    pub dtc: Vec<f64>,
    pub o: Vec<f64>,
    pub s: Vec<f64>,
}

impl HoiBatch {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn values(&self, m: Measure) -> &[f64] {
        match m {
            Measure::Tc => &self.tc,
            Measure::Dtc => &self.dtc,
            Measure::O => &self.o,
            Measure::S => &self.s,
        }
    }

    pub fn get(&self, m: Measure, b: usize, d: usize) -> f64 {
        self.values(m)[b * self.n_datasets + d]
    }

    /// Per-dataset values of one row.
    pub fn row(&self, m: Measure, b: usize) -> &[f64] {
        let at = b * self.n_datasets;
        &self.values(m)[at..at + self.n_datasets]
    }
}

fn per_cell(terms: &EntropyTerms, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let n_d = terms.n_datasets;
    (0..terms.len() * n_d).map(|i| f(i / n_d, i % n_d)).collect()
}

pub fn tc_from_terms(terms: &EntropyTerms) -> Vec<f64> {
    per_cell(terms, |b, d| terms.singles(b, d).iter().sum::<f64>() - terms.joint(b, d))
}

pub fn dtc_from_terms(terms: &EntropyTerms) -> Vec<f64> {
    per_cell(terms, |b, d| {
        let k = terms.orders[b] as f64;
        (1.0 - k) * terms.joint(b, d) + terms.leave_one_out(b, d).iter().sum::<f64>()
    })
}

pub fn o_information(terms: &EntropyTerms) -> Vec<f64> {
    per_cell(terms, |b, d| {
        let k = terms.orders[b] as f64;
        let diff: f64 = terms
            .singles(b, d)
            .iter()
            .zip(terms.leave_one_out(b, d))
            .map(|(s, l)| s - l)
            .sum();
        (k - 2.0) * terms.joint(b, d) + diff
    })
}

pub fn s_information(terms: &EntropyTerms) -> Vec<f64> {
    tc_from_terms(terms)
        .into_iter()
        .zip(dtc_from_terms(terms))
        .map(|(t, d)| t + d)
        .collect()
}

/// All four measures from one set of entropy terms.
pub fn hoi_from_terms(terms: &EntropyTerms) -> HoiBatch {
    let tc = tc_from_terms(terms);
    let dtc = dtc_from_terms(terms);
    let o = o_information(terms);
    let s = tc.iter().zip(&dtc).map(|(a, b)| a + b).collect();
    HoiBatch {
        n_datasets: terms.n_datasets,
        orders: terms.orders.clone(),
        tc,
        dtc,
        o,
        s,
    }
}

/// Entropy terms are computed once and shared by TC, DTC, Ω and S.
pub fn compute_hoi_batch(covs: &CovSet, batch: &NpletBatch, bias_correct: bool) -> Result<HoiBatch> {
    Ok(hoi_from_terms(&entropy_terms(covs, batch, bias_correct)?))
}

/// `I(X_i; X_j) = H(X_i) + H(X_j) - H(X_i, X_j)`.
pub fn pairwise_mi(cov: &CovarianceMatrix, i: usize, j: usize, bias_correct: bool) -> Result<f64> {
    if i == j {
        return Err(HoiError::InvalidNplet(format!(
            "mutual information needs two distinct variables, got {i} twice"
        )));
    }
    let (a, b) = (i.min(j), i.max(j));
    let batch = NpletBatch::fixed(cov.dim(), 2, vec![a, b])?;
    let covs = CovSet::single(cov.clone());
    Ok(tc_from_terms(&entropy_terms(&covs, &batch, bias_correct)?)[0])
}
