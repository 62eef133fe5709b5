//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use hoi::copula::{copula_covariance, corrected_entropy_nats};
use hoi::measures::{compute_hoi_batch, Direction, HoiBatch, Measure};
use hoi::nplet::{count_nplets, NpletBatch};
use hoi::optim::{anneal, greedy, AnnealSchedule, GreedyConfig, MoveMode, ObjectiveSpec};
use hoi::scanner::{extract_features, scan, Reducer, ScanConfig, TopK, FEATURE_NAMES};
use hoi::synthetic::{
    block_concat, ground_truth_hoi, r_system_cov, s_system_cov, sample_gaussian, BlockSpec, PgmSpec,
};
use hoi::{CovSet, CovarianceMatrix, Result as HoiResult};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct PeakAlloc;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for PeakAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            if new_size > layout.size() {
                let now = CURRENT.fetch_add(new_size - layout.size(), Ordering::Relaxed) + new_size
                    - layout.size();
                PEAK.fetch_max(now, Ordering::Relaxed);
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static GLOBAL: PeakAlloc = PeakAlloc;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn hoi_row(h: &HoiBatch, b: usize) -> [f64; 4] {
    [h.tc[b], h.dtc[b], h.o[b], h.s[b]]
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let pgm = PgmSpec::new(vec![
        BlockSpec::redundant(3, 1.0),
        BlockSpec::synergistic(2, 0.8),
        BlockSpec::independent(1),
    ]);
    let data = sample_gaussian(&pgm.build().unwrap().cov, 500, 1).unwrap();
    let cov = copula_covariance(&data).unwrap();
    let covs = CovSet::single(cov.clone());
    let nplets = common::all_nplets(8, 3, 8);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for bias in [false, true] {
        let t = bias.then_some(500);
        for k in 3..=8 {
            let of_order: Vec<&Vec<usize>> = nplets.iter().filter(|p| p.len() == k).collect();
            let flat: Vec<usize> = of_order.iter().flat_map(|p| p.iter().copied()).collect();
            let batch = NpletBatch::fixed(8, k, flat).unwrap();
            let h = compute_hoi_batch(&covs, &batch, bias).unwrap();
            for (b, p) in of_order.iter().enumerate() {
                let want = common::hoi(&cov, p, t);
                for (got, want) in hoi_row(&h, b).into_iter().zip(want) {
                    let err = (got - want).abs() / want.abs().max(1.0);
                    worst = worst.max(err);
                    checked += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-9, format!("worst relative error {worst:e}"))?;
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("{checked} values, worst relative error {worst:.1e}, {elapsed:.2?}"))
}

fn padding_neutrality() -> Outcome {
    let covs = CovSet::single(common::random_spd(15, 7));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let nplets: Vec<Vec<usize>> = (0..1000)
        .map(|_| {
            let k = rng.random_range(1..=15);
            let mut p = sample(&mut rng, 15, k).into_vec();
            p.sort_unstable();
            p
        })
        .collect();
    let masks: Vec<Vec<bool>> = nplets.iter().map(|p| hoi::nplet::indices_to_mask(p, 15)).collect();
    let mut unique = masks.clone();
    unique.sort();
    unique.dedup();
    let mut worst: f64 = 0.0;
    for bias in [false, true] {
        let covs = if bias {
            let c = covs.get(0);
            CovSet::single(CovarianceMatrix::new(c.as_slice().to_vec(), 15, 400).unwrap())
        } else {
            covs.clone()
        };
        let padded = compute_hoi_batch(&covs, &NpletBatch::mixed(15, &unique).unwrap(), bias).unwrap();
        for (b, mask) in unique.iter().enumerate() {
            let p = hoi::nplet::mask_to_indices(mask);
            let fixed = compute_hoi_batch(&covs, &NpletBatch::fixed(15, p.len(), p).unwrap(), bias).unwrap();
            for (a, f) in hoi_row(&padded, b).into_iter().zip(hoi_row(&fixed, 0)) {
                worst = worst.max((a - f).abs());
            }
        }
    }
    check(worst <= 1e-10, format!("max |padded - fixed| = {worst:e}"))?;
    Ok(format!("{} distinct n-plets, max deviation {worst:.1e}", unique.len()))
}

fn entropy_convergence() -> Outcome {
    let target = 5.0 * 1.41894;
    let identity = CovarianceMatrix::identity(5);
    let mut values: Vec<f64> = (0..100)
        .map(|seed| {
            let data = sample_gaussian(&identity, 10_000, seed).unwrap();
            corrected_entropy_nats(&copula_covariance(&data).unwrap()).unwrap().nats
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let median = 0.5 * (values[49] + values[50]);
    check((median - target).abs() <= 0.02, format!("median {median:.5} vs {target:.5}"))?;
    Ok(format!("median {median:.5} nats, target {target:.5}"))
}

fn whole_omega(cov: &CovarianceMatrix, bias: bool) -> f64 {
    let n = cov.dim();
    let batch = NpletBatch::fixed(n, n, (0..n).collect()).unwrap();
    compute_hoi_batch(&CovSet::single(cov.clone()), &batch, bias).unwrap().o[0]
}

fn ground_truth_signs() -> Outcome {
    let r = r_system_cov(4, 1.0);
    let s = s_system_cov(4, 1.0);
    let mut r_ok = 0;
    let mut s_ok = 0;
    for seed in 0..100 {
        let dr = sample_gaussian(&r, 5000, seed).unwrap();
        let ds = sample_gaussian(&s, 5000, 1000 + seed).unwrap();
        r_ok += (whole_omega(&copula_covariance(&dr).unwrap(), true) > 0.0) as usize;
        s_ok += (whole_omega(&copula_covariance(&ds).unwrap(), true) < 0.0) as usize;
    }
    check(r_ok >= 95 && s_ok >= 95, format!("R positive {r_ok}/100, S negative {s_ok}/100"))?;
    Ok(format!("R: Ω > 0 in {r_ok}/100, S: Ω < 0 in {s_ok}/100"))
}

fn additivity() -> Outcome {
    let mut blocks = Vec::new();
    for c in [0.5, 1.0, 2.0] {
        for n in [2, 3, 4] {
            blocks.push(r_system_cov(n, c));
            blocks.push(s_system_cov(n, c));
        }
    }
    blocks.push(CovarianceMatrix::identity(3));
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for a in &blocks {
        for b in &blocks {
            let joined = block_concat(&[a.clone(), b.clone()]).unwrap().cov;
            let oa = whole_omega(a, false);
            let ob = whole_omega(b, false);
            worst = worst.max((whole_omega(&joined, false) - (oa + ob)).abs());
            pairs += 1;
        }
    }
    check(worst <= 1e-10, format!("max additivity error {worst:e}"))?;
    let balanced = block_concat(&[r_system_cov(2, 1.0), s_system_cov(2, 1.0)]).unwrap();
    let all: Vec<usize> = (0..6).collect();
    let o = ground_truth_hoi(&balanced.cov, &all).unwrap().o;
    check(o.abs() <= 1e-10, format!("balanced whole-system Ω = {o:e}"))?;
    Ok(format!("{pairs} block pairs, max error {worst:.1e}; balanced Ω = {o:.1e}"))
}

fn exhaustive_best(covs: &CovSet, direction: Direction, min: usize, max: usize) -> (Vec<usize>, f64) {
    let top = scan(covs, &ScanConfig::new(min, max), TopK::new(Measure::O, direction, 1, 1)).unwrap();
    let best = &top[0][0];
    (best.nplet.clone(), best.o)
}

fn heuristic_recovery() -> Outcome {
    let pgm = PgmSpec::new(vec![
        BlockSpec::redundant(3, 1.0),
        BlockSpec::synergistic(3, 1.0),
        BlockSpec::independent(4),
    ]);
    let system = pgm.build().unwrap();
    let covs = CovSet::single(system.cov.clone());
    let r_block = system.block_indices(0);
    let s_block = system.block_indices(1);

    let (ex_max, _) = exhaustive_best(&covs, Direction::Max, 4, 4);
    let (ex_min, _) = exhaustive_best(&covs, Direction::Min, 4, 4);
    check(ex_max == r_block && ex_min == s_block, "exhaustive oracle disagrees with the block layout")?;
    let config = GreedyConfig::new(3, 4);
    let g_max = greedy(&covs, &ObjectiveSpec::new(Measure::O, Direction::Max), &config).unwrap();
    let g_min = greedy(&covs, &ObjectiveSpec::new(Measure::O, Direction::Min), &config).unwrap();
    check(g_max.per_order[1].nplet == ex_max, format!("greedy max-Ω gave {:?}", g_max.per_order[1].nplet))?;
    check(g_min.per_order[1].nplet == ex_min, format!("greedy min-Ω gave {:?}", g_min.per_order[1].nplet))?;

    let (_, global_min) = exhaustive_best(&covs, Direction::Min, 3, 12);
    let spec = ObjectiveSpec::new(Measure::O, Direction::Min);
    let schedule = AnnealSchedule::new(3, 12, MoveMode::AcrossOrders).max_iters(500);
    let mut hits = 0;
    for seed in 0..100 {
        let state = anneal(&covs, &spec, &schedule, 20, seed).unwrap();
        let found = -state.best_ever.1;
        hits += ((found - global_min).abs() <= 1e-9) as usize;
    }
    check(hits >= 95, format!("annealing matched the global minimum in {hits}/100 seeds"))?;
    Ok(format!(
        "greedy recovers R {ex_max:?} and S {ex_min:?}; annealing hits global min Ω = {global_min:.6} in {hits}/100"
    ))
}

fn combinatorial_count() -> Outcome {
    let got = count_nplets(30, 3, 30).unwrap();
    let oracle = (3..=30).map(|k| common::binomial(30, k)).fold(num_bigint::BigUint::default(), |a, b| a + b);
    check(got == oracle, format!("{got} vs oracle {oracle}"))?;
    check(got == num_bigint::BigUint::from(1_073_741_358u64), format!("got {got}"))?;
    Ok(format!("count_nplets(30, 3, 30) = {got}"))
}

struct Sink {
    visited: u64,
    best: f64,
}

impl Reducer for Sink {
    type Output = (u64, f64);

    fn consume(&mut self, batch: &NpletBatch, hoi: &HoiBatch) -> HoiResult<()> {
        self.visited += batch.len() as u64;
        for m in Measure::ALL {
            for &v in hoi.values(m) {
                self.best = self.best.max(v);
            }
        }
        Ok(())
    }

    fn finish(self) -> HoiResult<(u64, f64)> {
        Ok((self.visited, self.best))
    }
}

fn throughput() -> Outcome {
    let pgm = PgmSpec::new(vec![
        BlockSpec::redundant(4, 1.0),
        BlockSpec::synergistic(4, 1.0),
        BlockSpec::independent(10),
    ]);
    let data = sample_gaussian(&pgm.build().unwrap().cov, 1000, 5).unwrap();
    let covs = CovSet::single(copula_covariance(&data).unwrap());
    let baseline = CURRENT.load(Ordering::Relaxed);
    PEAK.store(baseline, Ordering::Relaxed);
    let start = Instant::now();
    let config = ScanConfig::new(3, 20).batch_size(10_000).bias_correct(true);
    let (visited, _) = scan(&covs, &config, Sink { visited: 0, best: f64::MIN }).unwrap();
    let elapsed = start.elapsed();
    let peak = PEAK.load(Ordering::Relaxed).saturating_sub(baseline);
    let peak_mb = peak as f64 / (1 << 20) as f64;
    check(visited == 1_048_365, format!("visited {visited}"))?;
    check(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    check(peak < 3 << 30, format!("peak heap {peak_mb:.0} MiB"))?;
    Ok(format!(
        "{visited} n-plets in {elapsed:.2?} on {} threads, peak heap {peak_mb:.1} MiB",
        rayon::current_num_threads()
    ))
}

fn run_cli(args: &[&str], workers: usize) -> std::result::Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_hoi"))
        .args(args)
        .arg("--workers")
        .arg(workers.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr).trim()))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let p = |name: &str| d.join(name).to_string_lossy().into_owned();
    std::fs::write(
        d.join("pgm.json"),
        r#"{"blocks":[{"kind":"R","n_sources":3,"c":1.0},{"kind":"S","n_sources":3,"c":1.0},{"kind":"independent","n_sources":2}]}"#,
    )
    .map_err(|e| e.to_string())?;
    std::fs::create_dir(d.join("multi")).map_err(|e| e.to_string())?;

    let pgm = p("pgm.json");
    let data = p("multi/a.csv");
    let multi = p("multi");
    let mut commands: Vec<(&str, Vec<String>)> = vec![
        ("synth", vec!["synth".into(), "--spec".into(), pgm.clone(), "--samples".into(), "800".into(), "--seed".into(), "42".into(), "--truth".into()]),
        ("count", vec!["count".into(), "--n".into(), "30".into()]),
    ];
    // inputs for the remaining subcommands
    run_cli(&["synth", "--spec", &pgm, "--samples", "800", "--seed", "1", "--out", &data], 1)?;
    for (seed, name) in ["b", "c", "d"].iter().enumerate() {
        let path = p(&format!("multi/{name}.csv"));
        run_cli(&["synth", "--spec", &pgm, "--samples", "800", "--seed", &(seed + 2).to_string(), "--out", &path], 1)?;
    }
    let base = |sub: &str| vec![sub.to_string(), "--input".into(), data.clone()];
    commands.push(("scan-top", [base("scan"), vec!["--reduce".into(), "top:20:min:o".into(), "--bias-correct".into(), "--batch-size".into(), "37".into()]].concat()));
    commands.push(("scan-hist", [base("scan"), vec!["--reduce".into(), "hist:16:-1:1:s".into()]].concat()));
    commands.push(("greedy", [base("greedy"), vec!["--direction".into(), "min".into(), "--kappa".into(), "4".into(), "--repeats".into(), "3".into(), "--seed".into(), "9".into()]].concat()));
    commands.push(("anneal", [base("anneal"), vec!["--kappa".into(), "8".into(), "--max-iters".into(), "100".into(), "--seed".into(), "9".into()]].concat()));
    commands.push(("features", vec!["features".into(), "--input".into(), multi.clone()]));
    commands.push(("greedy-effect", vec!["greedy".into(), "--input".into(), multi.clone(), "--condition-a".into(), "a,b".into(), "--condition-b".into(), "c,d".into(), "--target-order".into(), "5".into()]));

    let mut compared = 0;
    for (name, args) in &commands {
        let mut reference: Option<Vec<u8>> = None;
        for (run, workers) in [1usize, 4, 2, 4].into_iter().enumerate() {
            let out = p(&format!("{name}-{run}.out"));
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            let truth = p(&format!("{name}-{run}.json"));
            if *name == "synth" {
                full.push(&truth);
            }
            full.extend(["--out", &out]);
            run_cli(&full, workers)?;
            let mut bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
            if *name == "synth" {
                bytes.extend(std::fs::read(&truth).map_err(|e| e.to_string())?);
            }
            match &reference {
                None => reference = Some(bytes),
                Some(r) => check(*r == bytes, format!("{name}: run {run} ({workers} workers) differs"))?,
            }
            compared += 1;
        }
    }
    check(Path::new(&data).exists(), "synthetic input missing")?;
    Ok(format!("{} subcommand variants x 4 runs ({compared} outputs) byte-identical across 1/2/4 workers", commands.len()))
}

fn feature_suite() -> Outcome {
    let specs = [
        vec![BlockSpec::redundant(3, 1.0), BlockSpec::independent(2)],
        vec![BlockSpec::synergistic(3, 1.0), BlockSpec::independent(3)],
        vec![BlockSpec::redundant(2, 0.5), BlockSpec::synergistic(2, 0.5)],
        vec![BlockSpec::redundant(4, 2.0), BlockSpec::synergistic(4, 2.0)],
        vec![BlockSpec::synergistic(5, 1.0), BlockSpec::independent(4)],
        vec![BlockSpec::redundant(9, 1.0)],
        vec![BlockSpec::synergistic(9, 0.7)],
        vec![BlockSpec::redundant(2, 1.0), BlockSpec::redundant(2, 1.0), BlockSpec::synergistic(2, 1.0)],
        vec![BlockSpec::independent(10)],
        vec![BlockSpec::redundant(3, 0.3), BlockSpec::synergistic(3, 3.0), BlockSpec::independent(2)],
    ];
    let start = Instant::now();
    for (i, blocks) in specs.iter().enumerate() {
        let pgm = PgmSpec::new(blocks.clone());
        check(pgm.n_vars() <= 10, format!("system {i} has {} variables", pgm.n_vars()))?;
        let data = sample_gaussian(&pgm.build().unwrap().cov, 2000, i as u64).unwrap();
        let f = extract_features(&CovSet::single(copula_covariance(&data).unwrap()), true).unwrap();
        check(f.len() == 1 && f[0].values.iter().all(|v| v.is_finite()), format!("system {i}: non-finite features"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;

    let identity = extract_features(&CovSet::single(CovarianceMatrix::identity(8)), false).unwrap();
    let worst = identity[0].values[..18].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    check(worst <= 1e-10, format!("identity features up to {worst:e}"))?;

    let expected = [
        "tc_max", "tc_min", "tc_mean", "tc_whole", "dtc_max", "dtc_min", "dtc_mean", "dtc_whole", "o_max",
        "o_min", "o_mean", "o_whole", "s_max", "s_min", "s_mean", "s_whole", "mi_mean", "mi_std",
        "o_max_order", "o_min_order", "prop_synergy",
    ];
    check(FEATURE_NAMES == expected, "feature names differ from the documented schema")?;
    Ok(format!("10 datasets in {elapsed:.2?}; identity features max |x| = {worst:.1e}; 21-column schema ok"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("padding neutrality", padding_neutrality),
        ("entropy convergence", entropy_convergence),
        ("ground-truth signs", ground_truth_signs),
        ("additivity", additivity),
        ("heuristic recovery", heuristic_recovery),
        ("combinatorial count", combinatorial_count),
        ("throughput", throughput),
        ("determinism", determinism),
        ("feature suite", feature_suite),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS {:>2} {name}: {detail} [{:.2?}]", i + 1, start.elapsed()),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{:.2?}]", i + 1, start.elapsed());
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {:>2} {name}: panicked", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
