//! Exhaustive scan of every n-plet with a top-k list and a histogram.

use hoi::copula::copula_covariance;
use hoi::measures::{Direction, Measure};
use hoi::scanner::{scan, Histogram, ScanConfig, TopK};
use hoi::synthetic::{sample_gaussian, BlockSpec, PgmSpec};
use hoi::{count_nplets, CovSet};

fn main() -> hoi::Result<()> {
    let pgm = PgmSpec::new(vec![
        BlockSpec::redundant(3, 1.0),
        BlockSpec::synergistic(3, 1.0),
        BlockSpec::independent(4),
    ]);
    let names = pgm.variable_names();
    let data = sample_gaussian(&pgm.build()?.cov, 1000, 1)?;
    let covs = CovSet::single(copula_covariance(&data)?);

    let config = ScanConfig::new(3, pgm.n_vars()).batch_size(256).bias_correct(true);
    println!("{} n-plets to visit", count_nplets(pgm.n_vars(), 3, pgm.n_vars())?);

    for (direction, label) in [(Direction::Max, "redundant"), (Direction::Min, "synergistic")] {
        let top = scan(&covs, &config, TopK::new(Measure::O, direction, 5, 1))?;
        println!("\nmost {label}:");
        for r in &top[0] {
            let vars: Vec<&str> = r.nplet.iter().map(|&i| names[i].as_str()).collect();
            println!("  O = {:+.4}  {}", r.o, vars.join(","));
        }
    }

    let hist = scan(&covs, &config, Histogram::new(Measure::O, 10, -1.0, 1.0, 1)?)?;
    println!("\nO histogram:");
    for (i, c) in hist.counts[0].iter().enumerate() {
        let (lo, hi) = hist.bin_edges(i);
        println!("  [{lo:+.1}, {hi:+.1})  {c}");
    }
    println!("  below {}  above {}", hist.underflow[0], hist.overflow[0]);
    Ok(())
}
