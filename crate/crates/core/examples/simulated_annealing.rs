//! Simulated annealing across orders, compared with the exhaustive optimum.

use hoi::measures::{Direction, Measure};
use hoi::optim::{anneal, AnnealSchedule, MoveMode, ObjectiveSpec};
use hoi::scanner::{scan, ScanConfig, TopK};
use hoi::synthetic::{block_concat, r_system_cov, s_system_cov};
use hoi::{CovSet, CovarianceMatrix};

fn main() -> hoi::Result<()> {
    let system = block_concat(&[r_system_cov(2, 1.0), s_system_cov(3, 1.0), CovarianceMatrix::identity(3)])?;
    let n = system.cov.dim();
    let covs = CovSet::single(system.cov);

    let spec = ObjectiveSpec::new(Measure::O, Direction::Min);
    let schedule = AnnealSchedule::new(3, n, MoveMode::AcrossOrders)
        .max_iters(400)
        .alpha(0.98)
        .patience(Some(150));
    let state = anneal(&covs, &spec, &schedule, 16, 2024)?;

    let (best, energy) = &state.best_ever;
    println!("annealed: O = {:+.6}  {best:?}", spec.objective_from_energy(*energy));
    println!("  {} iterations, final temperature {:.2e}", state.iterations, state.temperature);

    let exact = scan(&covs, &ScanConfig::new(3, n), TopK::new(Measure::O, Direction::Min, 1, 1))?;
    println!("exhaustive: O = {:+.6}  {:?}", exact[0][0].o, exact[0][0].nplet);
    Ok(())
}
