//! Search for the n-plet that best separates two groups of datasets.
//!
//! Group A carries a redundant block on variables 0..4, group B is noise.
//! The objective is the paired Cohen's d of O between the groups.

use hoi::copula::copula_covariance;
use hoi::measures::{Direction, Measure};
use hoi::optim::{greedy, Aggregator, GreedyConfig, ObjectiveSpec};
use hoi::synthetic::{sample_gaussian, BlockSpec, PgmSpec};
use hoi::CovSet;

fn main() -> hoi::Result<()> {
    let a = PgmSpec::new(vec![BlockSpec::redundant(3, 1.0), BlockSpec::independent(4)]);
    let b = PgmSpec::new(vec![BlockSpec::independent(8)]);

    let mut mats = Vec::new();
    for (seed, pgm) in [&a, &a, &a, &a, &b, &b, &b, &b].into_iter().enumerate() {
        let data = sample_gaussian(&pgm.build()?.cov, 500, seed as u64)?;
        mats.push(copula_covariance(&data)?);
    }
    let covs = CovSet::new(mats)?;

    let spec = ObjectiveSpec::new(Measure::O, Direction::Max).aggregator(Aggregator::PairedEffectSize {
        a: vec![0, 1, 2, 3],
        b: vec![4, 5, 6, 7],
    });
    let result = greedy(&covs, &spec, &GreedyConfig::new(3, 6).kappa(5))?;
    for best in &result.per_order {
        println!("order {}  d = {:+.3}  {:?}", best.order, best.energy, best.nplet);
    }
    Ok(())
}
