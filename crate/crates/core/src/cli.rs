//! The `hoi` command line.
//!
//! Exit codes: 0 on success, 1 for invalid arguments, configuration or
//! input, 2 when a computation fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{HoiError, Result};
use crate::io::{load_input, mask_hex, nplet_names, write_data_csv, Input};
use crate::measures::{Direction, Measure};
use crate::nplet::count_nplets;
use crate::optim::{
    anneal_with_progress, greedy_with_progress, Aggregator, AnnealSchedule, GreedyConfig,
    InitialTemperature, MoveMode, ObjectiveSpec,
};
use crate::scanner::{
    extract_features_with_progress, scan_with_progress, FeatureConfig, Histogram, ScanConfig,
    ScanProgress, TopK, FEATURE_NAMES,
};
use crate::synthetic::{ground_truth_hoi, sample_gaussian, HoiValues, PgmSpec};

#[derive(Debug, Parser)]
#[command(name = "hoi", version, about = "Higher-order interactions in multivariate data")]
pub struct Cli {
    /// Worker threads for batch evaluation [default: all cores]
    #[arg(long, global = true, env = "HOI_WORKERS")]
    pub workers: Option<usize>,

    /// Print JSON progress lines to stderr
    #[arg(long, global = true)]
    pub progress: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file, or directory of CSV files with identical headers
    #[arg(long)]
    pub input: PathBuf,

    /// Estimate covariances from the raw values instead of the copula
    #[arg(long)]
    pub no_copula: bool,

    #[arg(long)]
    pub bias_correct: bool,

    #[arg(long, default_value_t = 10_000)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct ObjectiveArgs {
    #[arg(long, default_value = "o")]
    pub measure: String,

    #[arg(long, default_value = "max")]
    pub direction: String,

    /// Datasets of condition A (indices or file stems, comma separated);
    /// with --condition-b, optimizes the paired effect size A vs B
    #[arg(long, requires = "condition_b")]
    pub condition_a: Option<String>,

    #[arg(long, requires = "condition_a")]
    pub condition_b: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Within,
    Across,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exhaustive scan of every n-plet in an order range
    Scan {
        #[command(flatten)]
        data: DataArgs,

        /// `K`, `A:B` or `A:all`
        #[arg(long, default_value = "3:all")]
        orders: String,

        /// `top:K:max|min:MEASURE` or `hist:BINS:LO:HI:MEASURE`
        #[arg(long, default_value = "top:10:max:o")]
        reduce: String,

        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy beam growth from an exhaustively searched start order
    Greedy {
        #[command(flatten)]
        data: DataArgs,

        #[command(flatten)]
        objective: ObjectiveArgs,

        #[arg(long, default_value_t = 3)]
        start_order: usize,

        /// [default: number of variables]
        #[arg(long)]
        target_order: Option<usize>,

        #[arg(long, default_value_t = 10)]
        kappa: usize,

        #[arg(long, default_value_t = 1)]
        repeats: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulated annealing over n-plets
    Anneal {
        #[command(flatten)]
        data: DataArgs,

        #[command(flatten)]
        objective: ObjectiveArgs,

        #[arg(long, default_value = "3:all")]
        orders: String,

        #[arg(long, value_enum, default_value = "across")]
        mode: ModeArg,

        #[arg(long, default_value_t = 20)]
        kappa: usize,

        #[arg(long, default_value_t = 500)]
        max_iters: usize,

        #[arg(long, default_value_t = 0.99)]
        alpha: f64,

        /// `auto` or a positive number
        #[arg(long, default_value = "auto")]
        temp0: String,

        #[arg(long)]
        patience: Option<usize>,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The 21 summary features of every dataset
    Features {
        #[command(flatten)]
        data: DataArgs,

        /// Largest number of variables scanned exhaustively
        #[arg(long, default_value_t = 20)]
        max_vars: usize,

        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a dataset from a block-structured Gaussian model
    Synth {
        /// JSON model description
        #[arg(long)]
        spec: PathBuf,

        #[arg(long, default_value_t = 1000)]
        samples: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        #[arg(long)]
        out: Option<PathBuf>,

        /// Also write the exact measures of the model as JSON
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Number of n-plets in an order range
    Count {
        #[arg(long)]
        n: usize,

        #[arg(long, default_value = "3:all")]
        orders: String,

        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses and runs a command line, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .parse_env("HOI_LOG")
        .format(|buf, record| writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args()))
        .try_init();

    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(HoiError::InvalidConfig("--workers must be at least 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| HoiError::InvalidConfig(format!("thread pool: {e}")))?;
    let progress = cli.progress;
    pool.install(|| dispatch(cli.command, progress))
}

fn progress_printer(enabled: bool, command: &'static str) -> impl FnMut(&ScanProgress) {
    move |p: &ScanProgress| {
        if enabled {
            eprintln!(
                "{}",
                json!({
                    "command": command,
                    "batches": p.batches,
                    "visited": p.visited,
                    "elapsed_s": p.elapsed.as_secs_f64(),
                })
            );
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn dispatch(command: Command, progress: bool) -> Result<()> {
    match command {
        Command::Scan {
            data,
            orders,
            reduce,
            out,
        } => cmd_scan(&data, &orders, &reduce, out.as_deref(), progress),
        Command::Greedy {
            data,
            objective,
            start_order,
            target_order,
            kappa,
            repeats,
            seed,
            out,
        } => {
            let input = load(&data)?;
            let spec = objective_spec(&objective, &input, data.bias_correct)?;
            let mut config = GreedyConfig::new(start_order, target_order.unwrap_or(input.covs.n_vars()))
                .kappa(kappa)
                .repeats(repeats)
                .seed(seed);
            config.batch_size = data.batch_size;
            let result = greedy_with_progress(&input.covs, &spec, &config, &mut progress_printer(progress, "greedy"))?;
            let names = input.covs.names();
            let mut w = csv::Writer::from_writer(open_out(out.as_deref())?);
            w.write_record(["order", "nplet", "mask", "objective"])?;
            for best in &result.per_order {
                w.write_record([
                    best.order.to_string(),
                    nplet_names(&best.nplet, names),
                    mask_hex(&best.nplet),
                    spec.objective_from_energy(best.energy).to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Anneal {
            data,
            objective,
            orders,
            mode,
            kappa,
            max_iters,
            alpha,
            temp0,
            patience,
            seed,
            out,
        } => {
            let input = load(&data)?;
            let spec = objective_spec(&objective, &input, data.bias_correct)?;
            let (min_order, max_order) = parse_orders(&orders, input.covs.n_vars())?;
            let mode = match mode {
                ModeArg::Within => MoveMode::WithinOrder,
                ModeArg::Across => MoveMode::AcrossOrders,
            };
            let temp0 = if temp0.eq_ignore_ascii_case("auto") {
                InitialTemperature::Auto
            } else {
                InitialTemperature::Fixed(parse_num(&temp0, "--temp0")?)
            };
            let schedule = AnnealSchedule::new(min_order, max_order, mode)
                .max_iters(max_iters)
                .alpha(alpha)
                .temp0(temp0)
                .patience(patience);
            let state = anneal_with_progress(
                &input.covs,
                &spec,
                &schedule,
                kappa,
                seed,
                &mut progress_printer(progress, "anneal"),
            )?;
            let names = input.covs.names();
            let mut w = csv::Writer::from_writer(open_out(out.as_deref())?);
            w.write_record(["solution", "order", "nplet", "mask", "objective"])?;
            let rows = std::iter::once(("best".to_string(), &state.best_ever)).chain(
                state
                    .chain_best
                    .iter()
                    .enumerate()
                    .map(|(c, b)| (format!("chain{c}"), b)),
            );
            for (label, (nplet, energy)) in rows {
                w.write_record([
                    label,
                    nplet.len().to_string(),
                    nplet_names(nplet, names),
                    mask_hex(nplet),
                    spec.objective_from_energy(*energy).to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Features { data, max_vars, out } => {
            let input = load(&data)?;
            let config = FeatureConfig {
                max_vars,
                batch_size: data.batch_size,
                bias_correct: data.bias_correct,
            };
            let features = extract_features_with_progress(
                &input.covs,
                &config,
                &mut progress_printer(progress, "features"),
            )?;
            let mut w = csv::Writer::from_writer(open_out(out.as_deref())?);
            w.write_record(std::iter::once("dataset").chain(FEATURE_NAMES))?;
            for (id, f) in input.dataset_ids.iter().zip(&features) {
                w.write_record(
                    std::iter::once(id.clone()).chain(f.values.iter().map(|v| v.to_string())),
                )?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Synth {
            spec,
            samples,
            seed,
            out,
            truth,
        } => {
            let start = std::time::Instant::now();
            let pgm = PgmSpec::from_json(&std::fs::read_to_string(&spec)?)?;
            let system = pgm.build()?;
            let names = pgm.variable_names();
            let data = sample_gaussian(&system.cov, samples, seed)?.with_column_names(names.clone())?;
            let mut sink = open_out(out.as_deref())?;
            write_data_csv(&data, &mut sink)?;
            sink.flush()?;
            if let Some(path) = truth {
                let all: Vec<usize> = (0..pgm.n_vars()).collect();
                let mut blocks = Vec::new();
                for (i, b) in pgm.blocks.iter().enumerate() {
                    let idx = system.block_indices(i);
                    let values = if idx.len() >= 2 {
                        Some(hoi_json(ground_truth_hoi(&system.cov, &idx)?))
                    } else {
                        None
                    };
                    blocks.push(json!({
                        "kind": b.kind,
                        "variables": idx.iter().map(|&j| &names[j]).collect::<Vec<_>>(),
                        "measures": values,
                    }));
                }
                let whole = if all.len() >= 2 {
                    Some(hoi_json(ground_truth_hoi(&system.cov, &all)?))
                } else {
                    None
                };
                let doc = json!({ "variables": names, "whole": whole, "blocks": blocks });
                let mut f = BufWriter::new(File::create(path)?);
                serde_json::to_writer_pretty(&mut f, &doc)?;
                writeln!(f)?;
                f.flush()?;
            }
            progress_printer(progress, "synth")(&ScanProgress {
                batches: 1,
                visited: samples as u64,
                elapsed: start.elapsed(),
            });
            Ok(())
        }
        Command::Count { n, orders, out } => {
            let (min, max) = parse_orders(&orders, n)?;
            let count = count_nplets(n, min, max)?;
            let mut sink = open_out(out.as_deref())?;
            writeln!(sink, "{count}")?;
            sink.flush()?;
            Ok(())
        }
    }
}

fn hoi_json(h: HoiValues) -> serde_json::Value {
    json!({ "tc": h.tc, "dtc": h.dtc, "o": h.o, "s": h.s })
}

fn load(data: &DataArgs) -> Result<Input> {
    if data.batch_size == 0 {
        return Err(HoiError::InvalidConfig("--batch-size must be at least 1".into()));
    }
    load_input(&data.input, !data.no_copula)
}

fn cmd_scan(data: &DataArgs, orders: &str, reduce: &str, out: Option<&Path>, progress: bool) -> Result<()> {
    let reducer = ReduceSpec::from_str(reduce)?;
    let input = load(data)?;
    let (min, max) = parse_orders(orders, input.covs.n_vars())?;
    let config = ScanConfig::new(min, max)
        .batch_size(data.batch_size)
        .bias_correct(data.bias_correct);
    let n_d = input.covs.n_datasets();
    let names = input.covs.names();
    let mut printer = progress_printer(progress, "scan");
    let mut w = csv::Writer::from_writer(open_out(out)?);
    match reducer {
        ReduceSpec::Top { k, direction, measure } => {
            let top = scan_with_progress(&input.covs, &config, TopK::new(measure, direction, k, n_d), &mut printer)?;
            w.write_record(["dataset", "rank", "order", "nplet", "mask", "tc", "dtc", "o", "s"])?;
            for (id, ranked) in input.dataset_ids.iter().zip(&top) {
                for (rank, r) in ranked.iter().enumerate() {
                    w.write_record([
                        id.clone(),
                        (rank + 1).to_string(),
                        r.nplet.len().to_string(),
                        nplet_names(&r.nplet, names),
                        mask_hex(&r.nplet),
                        r.tc.to_string(),
                        r.dtc.to_string(),
                        r.o.to_string(),
                        r.s.to_string(),
                    ])?;
                }
            }
        }
        ReduceSpec::Hist { bins, lo, hi, measure } => {
            let hist = Histogram::new(measure, bins, lo, hi, n_d)?;
            let hist = scan_with_progress(&input.covs, &config, hist, &mut printer)?;
            w.write_record(["dataset", "bin", "lo", "hi", "count"])?;
            for (d, id) in input.dataset_ids.iter().enumerate() {
                w.write_record([id, "underflow", "-inf", &lo.to_string(), &hist.underflow[d].to_string()])?;
                for (i, c) in hist.counts[d].iter().enumerate() {
                    let (a, b) = hist.bin_edges(i);
                    w.write_record([id.clone(), i.to_string(), a.to_string(), b.to_string(), c.to_string()])?;
                }
                w.write_record([id, "overflow", &hi.to_string(), "inf", &hist.overflow[d].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn objective_spec(args: &ObjectiveArgs, input: &Input, bias_correct: bool) -> Result<ObjectiveSpec> {
    let measure = Measure::from_str(&args.measure)?;
    let direction = Direction::from_str(&args.direction)?;
    let mut spec = ObjectiveSpec::new(measure, direction).bias_correct(bias_correct);
    if let (Some(a), Some(b)) = (&args.condition_a, &args.condition_b) {
        spec = spec.aggregator(Aggregator::PairedEffectSize {
            a: parse_datasets(a, &input.dataset_ids)?,
            b: parse_datasets(b, &input.dataset_ids)?,
        });
    }
    spec.validate(input.covs.n_datasets())?;
    Ok(spec)
}

fn parse_datasets(list: &str, ids: &[String]) -> Result<Vec<usize>> {
    list.split(',')
        .map(str::trim)
        .map(|tok| {
            ids.iter()
                .position(|id| id == tok)
                .or_else(|| tok.parse().ok().filter(|&i: &usize| i < ids.len()))
                .ok_or_else(|| HoiError::InvalidConfig(format!("unknown dataset `{tok}`")))
        })
        .collect()
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| HoiError::InvalidConfig(format!("{what}: `{s}` is not a valid number")))
}

/// Parses `K`, `A:B`, `A:all` or `all` into an inclusive order range.
pub fn parse_orders(s: &str, n: usize) -> Result<(usize, usize)> {
    let bound = |t: &str, default: usize| -> Result<usize> {
        match t.trim() {
            "all" | "" => Ok(default),
            t => parse_num(t, "--orders"),
        }
    };
    let (min, max) = match s.split_once(':') {
        Some((a, b)) => (bound(a, 3)?, bound(b, n)?),
        None if s.trim() == "all" => (3, n),
        None => {
            let k = bound(s, n)?;
            (k, k)
        }
    };
    if min < 1 || min > max || max > n {
        return Err(HoiError::InvalidOrderRange { n, min, max });
    }
    Ok((min, max))
}

/// A `--reduce` argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReduceSpec {
    Top {
        k: usize,
        direction: Direction,
        measure: Measure,
    },
    Hist {
        bins: usize,
        lo: f64,
        hi: f64,
        measure: Measure,
    },
}

impl FromStr for ReduceSpec {
    type Err = HoiError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || HoiError::InvalidConfig(format!("--reduce: cannot parse `{s}`"));
        match parts.as_slice() {
            ["top", k, dir, m] => {
                let k: usize = parse_num(k, "--reduce")?;
                if k == 0 {
                    return Err(bad());
                }
                Ok(ReduceSpec::Top {
                    k,
                    direction: dir.parse()?,
                    measure: m.parse()?,
                })
            }
            ["hist", bins, lo, hi, m] => Ok(ReduceSpec::Hist {
                bins: parse_num(bins, "--reduce")?,
                lo: parse_num(lo, "--reduce")?,
                hi: parse_num(hi, "--reduce")?,
                measure: m.parse()?,
            }),
            _ => Err(bad()),
        }
    }
}
