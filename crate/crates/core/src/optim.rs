//! Heuristic search over n-plets: greedy growth and simulated annealing.
//!
//! Both engines maximize an *energy*. An [`ObjectiveSpec`] turns the four
//! measures of a batch into one energy per n-plet: it picks a measure,
//! aggregates it over datasets and negates it for minimization.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::copula::CovSet;
use crate::error::{HoiError, Result};
use crate::measures::{compute_hoi_batch, Direction, HoiBatch, Measure};
use crate::nplet::{check_order_range, indices_to_mask, mask_to_indices, NpletBatch};
use crate::scanner::{scan_with_progress, Reducer, ScanConfig, ScanProgress, TopKSelector};

pub type CustomAggregate = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Scored n-plets, best first.
pub type Beam = Vec<(f64, Vec<usize>)>;

/// Combines the per-dataset values of one n-plet into a single number.
#[derive(Clone)]
pub enum Aggregator {
    Mean,
    /// Paired Cohen's d of condition A against condition B; entry `i` of each
    /// list is a dataset index and the two lists are paired position-wise.
    PairedEffectSize { a: Vec<usize>, b: Vec<usize> },
    Custom(CustomAggregate),
}

impl fmt::Debug for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregator::Mean => f.write_str("Mean"),
            Aggregator::PairedEffectSize { a, b } => f
                .debug_struct("PairedEffectSize")
                .field("a", a)
                .field("b", b)
                .finish(),
            Aggregator::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub measure: Measure,
    pub direction: Direction,
    pub aggregator: Aggregator,
    pub bias_correct: bool,
}

impl ObjectiveSpec {
    pub fn new(measure: Measure, direction: Direction) -> Self {
        Self {
            measure,
            direction,
            aggregator: Aggregator::Mean,
            bias_correct: false,
        }
    }

    pub fn aggregator(mut self, aggregator: Aggregator) -> Self {
        self.aggregator = aggregator;
        self
    }

    pub fn bias_correct(mut self, on: bool) -> Self {
        self.bias_correct = on;
        self
    }

    pub fn validate(&self, n_datasets: usize) -> Result<()> {
        if let Aggregator::PairedEffectSize { a, b } = &self.aggregator {
            if a.len() != b.len() || a.is_empty() {
                return Err(HoiError::InvalidConfig(
                    "paired effect size needs two non-empty lists of equal length".into(),
                ));
            }
            if a.len() < 2 {
                return Err(HoiError::InvalidConfig(
                    "paired effect size needs at least two pairs".into(),
                ));
            }
            let sa: HashSet<_> = a.iter().collect();
            let sb: HashSet<_> = b.iter().collect();
            if sa.len() != a.len() || sb.len() != b.len() || !sa.is_disjoint(&sb) {
                return Err(HoiError::InvalidConfig(
                    "condition lists must be disjoint and free of repeats".into(),
                ));
            }
            if let Some(&bad) = a.iter().chain(b).find(|&&d| d >= n_datasets) {
                return Err(HoiError::InvalidConfig(format!(
                    "dataset {bad} out of range for {n_datasets} datasets"
                )));
            }
        }
        Ok(())
    }

    /// Objective value (before the direction is applied) from an energy.
    pub fn objective_from_energy(&self, energy: f64) -> f64 {
        self.direction.score(energy)
    }
}

/// Paired Cohen's d: mean of the differences over their standard deviation
/// (divisor `n - 1`).
pub fn paired_cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len();
    if n != b.len() || n < 2 {
        return Err(HoiError::InvalidConfig(
            "paired effect size needs two equal-length samples of at least 2".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(HoiError::DegenerateEffectSize);
    }
    Ok(mean / sd)
}

/// One energy per row of `hoi`, larger is better.
pub fn evaluate_objective(hoi: &HoiBatch, spec: &ObjectiveSpec) -> Result<Vec<f64>> {
    spec.validate(hoi.n_datasets)?;
    (0..hoi.len())
        .map(|b| {
            let row = hoi.row(spec.measure, b);
            let value = match &spec.aggregator {
                Aggregator::Mean => row.iter().sum::<f64>() / row.len() as f64,
                Aggregator::PairedEffectSize { a, b } => {
                    let va: Vec<f64> = a.iter().map(|&d| row[d]).collect();
                    let vb: Vec<f64> = b.iter().map(|&d| row[d]).collect();
                    paired_cohens_d(&va, &vb)?
                }
                Aggregator::Custom(f) => f(row),
            };
            Ok(spec.direction.score(value))
        })
        .collect()
}

fn energies_of(covs: &CovSet, spec: &ObjectiveSpec, batch: &NpletBatch) -> Result<Vec<f64>> {
    let hoi = compute_hoi_batch(covs, batch, spec.bias_correct)?;
    evaluate_objective(&hoi, spec)
}

/// Energies for a list of n-plets, which may repeat and mix orders.
fn energies_for(covs: &CovSet, spec: &ObjectiveSpec, nplets: &[Vec<usize>]) -> Result<Vec<f64>> {
    let mut unique: Vec<Vec<usize>> = Vec::new();
    let mut slot = std::collections::HashMap::new();
    let positions: Vec<usize> = nplets
        .iter()
        .map(|p| {
            *slot.entry(p.clone()).or_insert_with(|| {
                unique.push(p.clone());
                unique.len() - 1
            })
        })
        .collect();
    // mixed orders go through the padded path
    let batch = NpletBatch::from_nplets(covs.n_vars(), &unique)?;
    let energies = energies_of(covs, spec, &batch)?;
    Ok(positions.into_iter().map(|i| energies[i]).collect())
}

/// Best-κ n-plets of one order by energy, for greedy initialization.
struct TopEnergy<'a> {
    spec: &'a ObjectiveSpec,
    selector: TopKSelector<()>,
}

impl Reducer for TopEnergy<'_> {
    type Output = Beam;

    fn consume(&mut self, batch: &NpletBatch, hoi: &HoiBatch) -> Result<()> {
        let energies = evaluate_objective(hoi, self.spec)?;
        for (b, &e) in energies.iter().enumerate() {
            if self.selector.might_admit(e) {
                self.selector.offer(e, batch.nplet(b), || ());
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Self::Output> {
        Ok(self
            .selector
            .into_sorted()
            .into_iter()
            .map(|(e, p, _)| (e, p))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyConfig {
    pub start_order: usize,
    pub target_order: usize,
    /// Beam width.
    pub kappa: usize,
    /// Independent restarts. The first starts from the exhaustive best-κ at
    /// `start_order`; the others from κ random n-plets of that order.
    pub repeats: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl GreedyConfig {
    pub fn new(start_order: usize, target_order: usize) -> Self {
        Self {
            start_order,
            target_order,
            kappa: 10,
            repeats: 1,
            seed: 0,
            batch_size: 10_000,
        }
    }

    pub fn kappa(mut self, kappa: usize) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderBest {
    pub order: usize,
    pub nplet: Vec<usize>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    /// Best n-plet found at each order from start to target.
    pub per_order: Vec<OrderBest>,
    /// Final beam at the target order, best first.
    pub final_beam: Beam,
}

fn kappa_clipped(kappa: usize, pool: u128) -> usize {
    if (kappa as u128) > pool {
        log::warn!("kappa {kappa} exceeds the {pool} available candidates; clipping");
        pool as usize
    } else {
        kappa
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Greedy growth from `start_order` to `target_order`, keeping the κ best
/// distinct n-plets at each step. All `κ (N - t)` one-variable extensions of
/// the beam are evaluated as one batch.
pub fn greedy(covs: &CovSet, spec: &ObjectiveSpec, config: &GreedyConfig) -> Result<GreedyResult> {
    greedy_with_progress(covs, spec, config, &mut |_| {})
}

/// Like [`greedy`], reporting after the initial scan batches and after every
/// extension step.
pub fn greedy_with_progress(
    covs: &CovSet,
    spec: &ObjectiveSpec,
    config: &GreedyConfig,
    progress: &mut dyn FnMut(&ScanProgress),
) -> Result<GreedyResult> {
    let n = covs.n_vars();
    check_order_range(n, config.start_order, config.target_order)?;
    spec.validate(covs.n_datasets())?;
    if config.kappa == 0 || config.repeats == 0 {
        return Err(HoiError::InvalidConfig("kappa and repeats must be at least 1".into()));
    }
    let kappa = kappa_clipped(config.kappa, binomial(n, config.start_order));

    let mut best: Vec<Option<OrderBest>> = vec![None; config.target_order - config.start_order + 1];
    let mut final_beam = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = Instant::now();
    let mut tally = ScanProgress {
        batches: 0,
        visited: 0,
        elapsed: Duration::ZERO,
    };

    for repeat in 0..config.repeats {
        let mut beam = if repeat == 0 {
            let scan_config = ScanConfig::new(config.start_order, config.start_order)
                .batch_size(config.batch_size)
                .bias_correct(spec.bias_correct);
            let base = tally;
            scan_with_progress(
                covs,
                &scan_config,
                TopEnergy {
                    spec,
                    selector: TopKSelector::new(kappa),
                },
                &mut |p| {
                    tally.batches = base.batches + p.batches;
                    tally.visited = base.visited + p.visited;
                    tally.elapsed = start.elapsed();
                    progress(&tally);
                },
            )?
        } else {
            let beam = random_start(covs, spec, config.start_order, kappa, &mut rng)?;
            tally.batches += 1;
            tally.visited += kappa as u64;
            tally.elapsed = start.elapsed();
            progress(&tally);
            beam
        };

        for t in config.start_order..=config.target_order {
            if t > config.start_order {
                let (next, evaluated) = extend_beam(covs, spec, &beam, kappa)?;
                beam = next;
                tally.batches += 1;
                tally.visited += evaluated as u64;
                tally.elapsed = start.elapsed();
                progress(&tally);
            }
            let slot = &mut best[t - config.start_order];
            let (e, p) = &beam[0];
            let better = match slot {
                None => true,
                Some(b) => *e > b.energy || (*e == b.energy && *p < b.nplet),
            };
            if better {
                *slot = Some(OrderBest {
                    order: t,
                    nplet: p.clone(),
                    energy: *e,
                });
            }
        }
        if final_beam.is_empty() || beam[0].0 > final_beam.first().map_or(f64::NEG_INFINITY, |b: &(f64, Vec<usize>)| b.0) {
            final_beam = beam;
        }
    }

    Ok(GreedyResult {
        per_order: best.into_iter().map(|b| b.expect("every order visited")).collect(),
        final_beam,
    })
}

fn random_start(
    covs: &CovSet,
    spec: &ObjectiveSpec,
    order: usize,
    kappa: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Beam> {
    let n = covs.n_vars();
    let mut seen = HashSet::new();
    let mut nplets = Vec::with_capacity(kappa);
    while nplets.len() < kappa {
        let mut p = sample(rng, n, order).into_vec();
        p.sort_unstable();
        if seen.insert(p.clone()) {
            nplets.push(p);
        }
    }
    let energies = energies_for(covs, spec, &nplets)?;
    let mut sel = TopKSelector::new(kappa);
    for (e, p) in energies.into_iter().zip(nplets) {
        sel.offer(e, p, || ());
    }
    Ok(sel.into_sorted().into_iter().map(|(e, p, _)| (e, p)).collect())
}

fn extend_beam(
    covs: &CovSet,
    spec: &ObjectiveSpec,
    beam: &[(f64, Vec<usize>)],
    kappa: usize,
) -> Result<(Beam, usize)> {
    let n = covs.n_vars();
    let order = beam[0].1.len() + 1;
    let mut seen = HashSet::new();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for (_, p) in beam {
        let mask = indices_to_mask(p, n);
        for v in (0..n).filter(|&v| !mask[v]) {
            let mut ext = p.clone();
            let pos = ext.partition_point(|&x| x < v);
            ext.insert(pos, v);
            if seen.insert(ext.clone()) {
                candidates.push(ext);
            }
        }
    }
    let batch = NpletBatch::fixed(n, order, candidates.concat())?;
    let energies = energies_of(covs, spec, &batch)?;
    let evaluated = candidates.len();
    let mut sel = TopKSelector::new(kappa);
    for (e, p) in energies.into_iter().zip(candidates) {
        if sel.might_admit(e) {
            sel.offer(e, p, || ());
        }
    }
    Ok((sel.into_sorted().into_iter().map(|(e, p, _)| (e, p)).collect(), evaluated))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialTemperature {
    /// Standard deviation of the initial energies, floored at `1e-6`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveMode {
    /// Swap one member for one non-member.
    WithinOrder,
    /// Add or remove one variable with equal probability.
    AcrossOrders,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    pub temp0: InitialTemperature,
    /// Geometric cooling factor in `(0, 1)`.
    pub alpha: f64,
    pub max_iters: usize,
    /// Stop after this many iterations without a new best; `None` disables.
    pub patience: Option<usize>,
    pub mode: MoveMode,
    pub min_order: usize,
    pub max_order: usize,
}

impl AnnealSchedule {
    pub fn new(min_order: usize, max_order: usize, mode: MoveMode) -> Self {
        Self {
            temp0: InitialTemperature::Auto,
            alpha: 0.99,
            max_iters: 1000,
            patience: None,
            mode,
            min_order,
            max_order,
        }
    }

    pub fn max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn temp0(mut self, t: InitialTemperature) -> Self {
        self.temp0 = t;
        self
    }

    pub fn patience(mut self, p: Option<usize>) -> Self {
        self.patience = p;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        check_order_range(n, self.min_order, self.max_order)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(HoiError::InvalidConfig(format!(
                "cooling rate must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let InitialTemperature::Fixed(t) = self.temp0 {
            if !(t > 0.0) || !t.is_finite() {
                return Err(HoiError::InvalidConfig(format!(
                    "initial temperature must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Chains and bookkeeping of an annealing run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    /// One mask of length `N` per chain.
    pub solutions: Vec<Vec<bool>>,
    pub energies: Vec<f64>,
    /// Best n-plet seen by any chain at any iteration.
    pub best_ever: (Vec<usize>, f64),
    /// Best n-plet seen by each chain.
    pub chain_best: Vec<(Vec<usize>, f64)>,
    pub rng_seed: u64,
    pub temperature: f64,
    pub iterations: usize,
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 + 1);
    rng
}

/// Simulated annealing with κ chains evaluated together each iteration.
///
/// Improving moves are always accepted; a worsening move by `|ΔE|` is
/// accepted with probability `exp(-|ΔE| / T)`.
pub fn anneal(
    covs: &CovSet,
    spec: &ObjectiveSpec,
    schedule: &AnnealSchedule,
    kappa: usize,
    seed: u64,
) -> Result<OptimState> {
    anneal_with_progress(covs, spec, schedule, kappa, seed, &mut |_| {})
}

/// Like [`anneal`], reporting after every iteration.
pub fn anneal_with_progress(
    covs: &CovSet,
    spec: &ObjectiveSpec,
    schedule: &AnnealSchedule,
    kappa: usize,
    seed: u64,
    progress: &mut dyn FnMut(&ScanProgress),
) -> Result<OptimState> {
    let n = covs.n_vars();
    schedule.validate(n)?;
    if kappa == 0 {
        return Err(HoiError::InvalidConfig("kappa must be at least 1".into()));
    }
    let mut rngs: Vec<ChaCha8Rng> = (0..kappa).map(|c| chain_rng(seed, c)).collect();
    let initial: Vec<Vec<usize>> = rngs
        .iter_mut()
        .map(|rng| {
            let k = rng.random_range(schedule.min_order..=schedule.max_order);
            let mut p = sample(rng, n, k).into_vec();
            p.sort_unstable();
            p
        })
        .collect();
    anneal_inner(covs, spec, schedule, initial, rngs, seed, progress)
}

/// Like [`anneal`] but starting from the given n-plets, one chain each.
pub fn anneal_from(
    covs: &CovSet,
    spec: &ObjectiveSpec,
    schedule: &AnnealSchedule,
    initial: Vec<Vec<usize>>,
    seed: u64,
) -> Result<OptimState> {
    let n = covs.n_vars();
    schedule.validate(n)?;
    if initial.is_empty() {
        return Err(HoiError::InvalidConfig("no initial solutions".into()));
    }
    let mut sorted = Vec::with_capacity(initial.len());
    for mut p in initial {
        p.sort_unstable();
        p.dedup();
        if p.len() < schedule.min_order || p.len() > schedule.max_order {
            return Err(HoiError::InvalidNplet(format!(
                "initial solution {p:?} outside orders {}..={}",
                schedule.min_order, schedule.max_order
            )));
        }
        NpletBatch::fixed(n, p.len(), p.clone())?;
        sorted.push(p);
    }
    let rngs = (0..sorted.len()).map(|c| chain_rng(seed, c)).collect();
    anneal_inner(covs, spec, schedule, sorted, rngs, seed, &mut |_| {})
}

fn propose(mask: &[bool], schedule: &AnnealSchedule, rng: &mut ChaCha8Rng) -> Option<Vec<bool>> {
    let inside: Vec<usize> = mask_to_indices(mask);
    let outside: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
    let mut next = mask.to_vec();
    match schedule.mode {
        MoveMode::WithinOrder => {
            if outside.is_empty() {
                return None;
            }
            let i = inside[rng.random_range(0..inside.len())];
            let o = outside[rng.random_range(0..outside.len())];
            next[i] = false;
            next[o] = true;
        }
        MoveMode::AcrossOrders => {
            if rng.random_bool(0.5) {
                if inside.len() + 1 > schedule.max_order || outside.is_empty() {
                    return None;
                }
                next[outside[rng.random_range(0..outside.len())]] = true;
            } else {
                if inside.len() <= schedule.min_order.max(1) {
                    return None;
                }
                next[inside[rng.random_range(0..inside.len())]] = false;
            }
        }
    }
    Some(next)
}

fn anneal_inner(
    covs: &CovSet,
    spec: &ObjectiveSpec,
    schedule: &AnnealSchedule,
    initial: Vec<Vec<usize>>,
    mut rngs: Vec<ChaCha8Rng>,
    seed: u64,
    progress: &mut dyn FnMut(&ScanProgress),
) -> Result<OptimState> {
    spec.validate(covs.n_datasets())?;
    let n = covs.n_vars();
    let start = Instant::now();
    let energies = energies_for(covs, spec, &initial)?;
    let mut tally = ScanProgress {
        batches: 1,
        visited: initial.len() as u64,
        elapsed: start.elapsed(),
    };
    progress(&tally);

    let temperature = match schedule.temp0 {
        InitialTemperature::Fixed(t) => t,
        InitialTemperature::Auto => {
            let k = energies.len() as f64;
            let mean = energies.iter().sum::<f64>() / k;
            let var = if energies.len() > 1 {
                energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            var.sqrt().max(1e-6)
        }
    };

    let chain_best: Vec<(Vec<usize>, f64)> =
        initial.iter().cloned().zip(energies.iter().copied()).collect();
    let best_ever = pick_best(&chain_best).clone();
    let mut state = OptimState {
        solutions: initial.iter().map(|p| indices_to_mask(p, n)).collect(),
        energies,
        best_ever,
        chain_best,
        rng_seed: seed,
        temperature,
        iterations: 0,
    };

    let mut stale = 0;
    for _ in 0..schedule.max_iters {
        if schedule.patience.is_some_and(|p| stale >= p) {
            break;
        }
        let proposals: Vec<Option<Vec<bool>>> = state
            .solutions
            .iter()
            .zip(rngs.iter_mut())
            .map(|(m, rng)| propose(m, schedule, rng))
            .collect();
        let moved: Vec<usize> = (0..proposals.len()).filter(|&c| proposals[c].is_some()).collect();
        let new_energies = if moved.is_empty() {
            Vec::new()
        } else {
            let nplets: Vec<Vec<usize>> = moved
                .iter()
                .map(|&c| mask_to_indices(proposals[c].as_ref().expect("moved chain")))
                .collect();
            energies_for(covs, spec, &nplets)?
        };

        let mut improved = false;
        for (&c, &e_new) in moved.iter().zip(&new_energies) {
            let delta = e_new - state.energies[c];
            let u: f64 = rngs[c].random();
            let accept = delta > 0.0 || u < (-delta.abs() / state.temperature).exp();
            if !accept {
                continue;
            }
            state.solutions[c] = proposals[c].clone().expect("moved chain");
            state.energies[c] = e_new;
            let nplet = mask_to_indices(&state.solutions[c]);
            if e_new > state.chain_best[c].1 {
                state.chain_best[c] = (nplet.clone(), e_new);
            }
            if e_new > state.best_ever.1 {
                state.best_ever = (nplet, e_new);
                improved = true;
            }
        }
        stale = if improved { 0 } else { stale + 1 };
        state.temperature *= schedule.alpha;
        state.iterations += 1;
        tally.batches += 1;
        tally.visited += moved.len() as u64;
        tally.elapsed = start.elapsed();
        progress(&tally);
    }
    Ok(state)
}

fn pick_best(items: &[(Vec<usize>, f64)]) -> &(Vec<usize>, f64) {
    items
        .iter()
        .reduce(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
        .expect("at least one chain")
}
