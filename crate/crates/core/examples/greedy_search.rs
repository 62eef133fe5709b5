//! Greedy beam search for the most redundant and most synergistic n-plets.

use hoi::measures::{Direction, Measure};
use hoi::optim::{greedy, GreedyConfig, ObjectiveSpec};
use hoi::synthetic::{block_concat, r_system_cov, s_system_cov};
use hoi::{CovSet, CovarianceMatrix};

fn main() -> hoi::Result<()> {
    // variables 0..4 redundant, 4..8 synergistic, 8..12 noise
    let system = block_concat(&[r_system_cov(3, 1.0), s_system_cov(3, 1.0), CovarianceMatrix::identity(4)])?;
    let covs = CovSet::single(system.cov);

    for direction in [Direction::Max, Direction::Min] {
        let spec = ObjectiveSpec::new(Measure::O, direction);
        let config = GreedyConfig::new(3, 8).kappa(10).repeats(3).seed(11);
        let result = greedy(&covs, &spec, &config)?;
        println!("{direction:?} O:");
        for best in &result.per_order {
            println!(
                "  order {}  O = {:+.4}  {:?}",
                best.order,
                spec.objective_from_energy(best.energy),
                best.nplet
            );
        }
    }
    Ok(())
}
