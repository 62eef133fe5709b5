//! Exhaustive scans over order ranges.
//!
//! Batches are produced by the lexicographic enumerator, evaluated one at a
//! time (each batch is itself evaluated in parallel) and handed to a
//! [`Reducer`] in enumeration order. Results therefore do not depend on the
//! worker count, and reducers may be order-sensitive.

use std::time::{Duration, Instant};

use crate::copula::CovSet;
use crate::error::{HoiError, Result};
use crate::measures::{compute_hoi_batch, Direction, HoiBatch, Measure};
use crate::nplet::{check_order_range, enumerate_orders, NpletBatch};

/// Consumes evaluated batches and produces a summary.
pub trait Reducer {
    type Output;

    fn consume(&mut self, batch: &NpletBatch, hoi: &HoiBatch) -> Result<()>;

    fn finish(self) -> Result<Self::Output>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanConfig {
    pub min_order: usize,
    pub max_order: usize,
    pub batch_size: usize,
    pub bias_correct: bool,
}

impl ScanConfig {
    pub fn new(min_order: usize, max_order: usize) -> Self {
        Self {
            min_order,
            max_order,
            batch_size: 10_000,
            bias_correct: false,
        }
    }

    pub fn batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn bias_correct(mut self, on: bool) -> Self {
        self.bias_correct = on;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanProgress {
    pub batches: usize,
    pub visited: u64,
    pub elapsed: Duration,
}

pub fn scan<R: Reducer>(covs: &CovSet, config: &ScanConfig, reducer: R) -> Result<R::Output> {
    scan_with_progress(covs, config, reducer, &mut |_| {})
}

/// Like [`scan`], calling `progress` after every batch.
pub fn scan_with_progress<R: Reducer>(
    covs: &CovSet,
    config: &ScanConfig,
    mut reducer: R,
    progress: &mut dyn FnMut(&ScanProgress),
) -> Result<R::Output> {
    check_order_range(covs.n_vars(), config.min_order, config.max_order)?;
    let start = Instant::now();
    let mut state = ScanProgress {
        batches: 0,
        visited: 0,
        elapsed: Duration::ZERO,
    };
    let batches = enumerate_orders(
        covs.n_vars(),
        config.min_order,
        config.max_order,
        config.batch_size,
    )?;
    for batch in batches {
        let hoi = compute_hoi_batch(covs, &batch, config.bias_correct)?;
        reducer.consume(&batch, &hoi).map_err(|e| match e {
            HoiError::Reducer(msg) => {
                HoiError::Reducer(format!("batch {}: {msg}", state.batches))
            }
            other => HoiError::Reducer(format!("batch {}: {other}", state.batches)),
        })?;
        state.batches += 1;
        state.visited += batch.len() as u64;
        state.elapsed = start.elapsed();
        progress(&state);
    }
    reducer.finish()
}

/// One n-plet with its four measures for a single dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedNplet {
    pub nplet: Vec<usize>,
    pub tc: f64,
    pub dtc: f64,
    pub o: f64,
    pub s: f64,
}

impl RankedNplet {
    pub fn value(&self, m: Measure) -> f64 {
        match m {
            Measure::Tc => self.tc,
            Measure::Dtc => self.dtc,
            Measure::O => self.o,
            Measure::S => self.s,
        }
    }

    fn from_batch(batch: &NpletBatch, hoi: &HoiBatch, b: usize, d: usize) -> Self {
        Self {
            nplet: batch.nplet(b),
            tc: hoi.get(Measure::Tc, b, d),
            dtc: hoi.get(Measure::Dtc, b, d),
            o: hoi.get(Measure::O, b, d),
            s: hoi.get(Measure::S, b, d),
        }
    }
}

/// Keeps the `k` highest-scoring items. Equal scores go to the
/// lexicographically smaller n-plet.
#[derive(Debug, Clone)]
pub struct TopKSelector<T> {
    k: usize,
    items: Vec<(f64, Vec<usize>, T)>,
}

impl<T> TopKSelector<T> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn beats(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    /// Whether an item with this score and n-plet would be kept.
    pub fn admits(&self, score: f64, nplet: &[usize]) -> bool {
        if self.k == 0 {
            return false;
        }
        self.items.len() < self.k || {
            let (s, p, _) = self.items.last().expect("non-empty when full");
            Self::beats((score, nplet), (*s, p))
        }
    }

    /// Cheap pre-check on the score alone.
    pub fn might_admit(&self, score: f64) -> bool {
        self.k > 0 && (self.items.len() < self.k || score >= self.items[self.items.len() - 1].0)
    }

    pub fn offer(&mut self, score: f64, nplet: Vec<usize>, item: impl FnOnce() -> T) {
        if !self.admits(score, &nplet) {
            return;
        }
        let pos = self
            .items
            .partition_point(|(s, p, _)| Self::beats((*s, p), (score, &nplet)));
        self.items.insert(pos, (score, nplet, item()));
        self.items.truncate(self.k);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Best first.
    pub fn into_sorted(self) -> Vec<(f64, Vec<usize>, T)> {
        self.items
    }
}

/// Top-`k` n-plets per dataset by one measure.
#[derive(Debug, Clone)]
pub struct TopK {
    measure: Measure,
    direction: Direction,
    per_dataset: Vec<TopKSelector<RankedNplet>>,
}

impl TopK {
    pub fn new(measure: Measure, direction: Direction, k: usize, n_datasets: usize) -> Self {
        Self {
            measure,
            direction,
            per_dataset: (0..n_datasets).map(|_| TopKSelector::new(k)).collect(),
        }
    }
}

impl Reducer for TopK {
    /// Best-first lists, one per dataset.
    type Output = Vec<Vec<RankedNplet>>;

    fn consume(&mut self, batch: &NpletBatch, hoi: &HoiBatch) -> Result<()> {
        if hoi.n_datasets != self.per_dataset.len() {
            return Err(HoiError::Reducer(format!(
                "top-k set up for {} datasets, got {}",
                self.per_dataset.len(),
                hoi.n_datasets
            )));
        }
        let values = hoi.values(self.measure);
        for b in 0..batch.len() {
            for (d, sel) in self.per_dataset.iter_mut().enumerate() {
                let score = self.direction.score(values[b * hoi.n_datasets + d]);
                if sel.might_admit(score) {
                    sel.offer(score, batch.nplet(b), || {
                        RankedNplet::from_batch(batch, hoi, b, d)
                    });
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Self::Output> {
        Ok(self
            .per_dataset
            .into_iter()
            .map(|s| s.into_sorted().into_iter().map(|(_, _, r)| r).collect())
            .collect())
    }
}

/// Fixed-width histogram of one measure, per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub measure: Measure,
    pub lo: f64,
    pub hi: f64,
    /// `n_datasets x bins`.
    pub counts: Vec<Vec<u64>>,
    pub underflow: Vec<u64>,
    pub overflow: Vec<u64>,
}

impl Histogram {
    pub fn new(measure: Measure, bins: usize, lo: f64, hi: f64, n_datasets: usize) -> Result<Self> {
        if bins == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(HoiError::InvalidConfig(format!(
                "histogram needs bins >= 1 and lo < hi, got {bins} bins on [{lo}, {hi})"
            )));
        }
        Ok(Self {
            measure,
            lo,
            hi,
            counts: vec![vec![0; bins]; n_datasets],
            underflow: vec![0; n_datasets],
            overflow: vec![0; n_datasets],
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.bins() as f64;
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }
}

impl Reducer for Histogram {
    type Output = Histogram;

    fn consume(&mut self, _batch: &NpletBatch, hoi: &HoiBatch) -> Result<()> {
        let bins = self.bins();
        let width = (self.hi - self.lo) / bins as f64;
        for (i, &v) in hoi.values(self.measure).iter().enumerate() {
            let d = i % hoi.n_datasets;
            if v < self.lo {
                self.underflow[d] += 1;
            } else if v >= self.hi {
                self.overflow[d] += 1;
            } else {
                let bin = (((v - self.lo) / width) as usize).min(bins - 1);
                self.counts[d][bin] += 1;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Self::Output> {
        Ok(self)
    }
}

/// Forwards every batch to a closure.
pub struct Callback<F>(pub F);

impl<F> Reducer for Callback<F>
where
    F: FnMut(&NpletBatch, &HoiBatch) -> Result<()>,
{
    type Output = ();

    fn consume(&mut self, batch: &NpletBatch, hoi: &HoiBatch) -> Result<()> {
        (self.0)(batch, hoi)
    }

    fn finish(self) -> Result<()> {
        Ok(())
    }
}

/// Names of the 21 fingerprint features, in output order.
pub const FEATURE_NAMES: [&str; 21] = [
    "tc_max",
    "tc_min",
    "tc_mean",
    "tc_whole",
    "dtc_max",
    "dtc_min",
    "dtc_mean",
    "dtc_whole",
    "o_max",
    "o_min",
    "o_mean",
    "o_whole",
    "s_max",
    "s_min",
    "s_mean",
    "s_whole",
    "mi_mean",
    "mi_std",
    "o_max_order",
    "o_min_order",
    "prop_synergy",
];

/// Summary of a dataset's higher-order structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; 21],
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        FEATURE_NAMES.iter().copied().zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone)]
struct MeasureStats {
    max: f64,
    min: f64,
    sum: f64,
    whole: f64,
}

impl Default for MeasureStats {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
            sum: 0.0,
            whole: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct DatasetAccumulator {
    stats: [MeasureStats; 4],
    hoi_count: u64,
    synergistic: u64,
    mi_sum: f64,
    mi_sum_sq: f64,
    mi_count: u64,
    o_max: Option<(f64, Vec<usize>)>,
    o_min: Option<(f64, Vec<usize>)>,
}

/// Accumulates the fingerprint features over a scan of orders `2..=N`.
///
/// Order-2 rows feed the mutual-information features; orders 3 and up feed
/// everything else. Means weight every n-plet equally. Ω ties for the
/// arg-max/arg-min order go to the lexicographically smaller n-plet, and
/// `Ω` must fall below `-SYNERGY_TOL` to count as synergistic.
/// Absorbs round-off in Ω of conditionally independent n-plets.
pub const SYNERGY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FeatureAccumulator {
    n_vars: usize,
    per_dataset: Vec<DatasetAccumulator>,
}

impl FeatureAccumulator {
    pub fn new(n_vars: usize, n_datasets: usize) -> Self {
        Self {
            n_vars,
            per_dataset: vec![DatasetAccumulator::default(); n_datasets],
        }
    }
}

fn replaces(current: &Option<(f64, Vec<usize>)>, score: f64, nplet: &[usize]) -> bool {
    match current {
        None => true,
        Some((s, p)) => score > *s || (score == *s && nplet < p.as_slice()),
    }
}

impl Reducer for FeatureAccumulator {
    type Output = Vec<FeatureVector>;

    fn consume(&mut self, batch: &NpletBatch, hoi: &HoiBatch) -> Result<()> {
        for b in 0..batch.len() {
            let order = hoi.orders[b];
            for (d, acc) in self.per_dataset.iter_mut().enumerate() {
                if order == 2 {
                    let mi = hoi.get(Measure::Tc, b, d);
                    acc.mi_sum += mi;
                    acc.mi_sum_sq += mi * mi;
                    acc.mi_count += 1;
                    continue;
                }
                if order < 3 {
                    continue;
                }
                for (stats, m) in acc.stats.iter_mut().zip(Measure::ALL) {
                    let v = hoi.get(m, b, d);
                    stats.max = stats.max.max(v);
                    stats.min = stats.min.min(v);
                    stats.sum += v;
                    if order == self.n_vars {
                        stats.whole = v;
                    }
                }
                acc.hoi_count += 1;
                let o = hoi.get(Measure::O, b, d);
                if o < -SYNERGY_TOL {
                    acc.synergistic += 1;
                }
                let nplet = batch.nplet(b);
                if replaces(&acc.o_max, o, &nplet) {
                    acc.o_max = Some((o, nplet.clone()));
                }
                if replaces(&acc.o_min, -o, &nplet) {
                    acc.o_min = Some((-o, nplet));
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Self::Output> {
        let n = self.n_vars as f64;
        self.per_dataset
            .into_iter()
            .map(|acc| {
                if acc.hoi_count == 0 || acc.mi_count == 0 {
                    return Err(HoiError::Reducer(
                        "features need n-plets of order 2 and of order 3 or more".into(),
                    ));
                }
                let mut values = [0.0; 21];
                let count = acc.hoi_count as f64;
                for (i, s) in acc.stats.iter().enumerate() {
                    values[4 * i] = s.max;
                    values[4 * i + 1] = s.min;
                    values[4 * i + 2] = s.sum / count;
                    values[4 * i + 3] = s.whole;
                }
                let mi_n = acc.mi_count as f64;
                let mi_mean = acc.mi_sum / mi_n;
                values[16] = mi_mean;
                values[17] = (acc.mi_sum_sq / mi_n - mi_mean * mi_mean).max(0.0).sqrt();
                values[18] = acc.o_max.map_or(f64::NAN, |(_, p)| p.len() as f64 / n);
                values[19] = acc.o_min.map_or(f64::NAN, |(_, p)| p.len() as f64 / n);
                values[20] = acc.synergistic as f64 / count;
                Ok(FeatureVector { values })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    /// Largest system that is scanned exhaustively.
    pub max_vars: usize,
    pub batch_size: usize,
    pub bias_correct: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            max_vars: 20,
            batch_size: 10_000,
            bias_correct: false,
        }
    }
}

/// The 21 fingerprint features of each dataset in `covs`, from one
/// exhaustive scan of orders `2..=N`.
pub fn extract_features(covs: &CovSet, bias_correct: bool) -> Result<Vec<FeatureVector>> {
    extract_features_with(
        covs,
        &FeatureConfig {
            bias_correct,
            ..FeatureConfig::default()
        },
    )
}

pub fn extract_features_with(covs: &CovSet, config: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    extract_features_with_progress(covs, config, &mut |_| {})
}

pub fn extract_features_with_progress(
    covs: &CovSet,
    config: &FeatureConfig,
    progress: &mut dyn FnMut(&ScanProgress),
) -> Result<Vec<FeatureVector>> {
    let n = covs.n_vars();
    if n > config.max_vars {
        return Err(HoiError::ExhaustiveLimitExceeded {
            n,
            limit: config.max_vars,
        });
    }
    if n < 3 {
        return Err(HoiError::InvalidOrderRange { n, min: 3, max: n });
    }
    let scan_config = ScanConfig::new(2, n)
        .batch_size(config.batch_size)
        .bias_correct(config.bias_correct);
    scan_with_progress(
        covs,
        &scan_config,
        FeatureAccumulator::new(n, covs.n_datasets()),
        progress,
    )
}
