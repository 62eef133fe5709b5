//! Fingerprint features for a handful of datasets.

use hoi::copula::copula_covariance;
use hoi::scanner::{extract_features, FEATURE_NAMES};
use hoi::synthetic::{sample_gaussian, BlockSpec, PgmSpec};
use hoi::CovSet;

fn main() -> hoi::Result<()> {
    let systems = [
        ("redundant", PgmSpec::new(vec![BlockSpec::redundant(4, 1.0), BlockSpec::independent(2)])),
        ("synergistic", PgmSpec::new(vec![BlockSpec::synergistic(4, 1.0), BlockSpec::independent(2)])),
        ("noise", PgmSpec::new(vec![BlockSpec::independent(7)])),
    ];
    let mut mats = Vec::new();
    for (i, (_, pgm)) in systems.iter().enumerate() {
        let data = sample_gaussian(&pgm.build()?.cov, 800, i as u64)?;
        mats.push(copula_covariance(&data)?);
    }
    let features = extract_features(&CovSet::new(mats)?, true)?;

    print!("{:<14}", "feature");
    for (label, _) in &systems {
        print!("{label:>13}");
    }
    println!();
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        print!("{name:<14}");
        for f in &features {
            print!("{:>13.4}", f.values[j]);
        }
        println!();
    }
    Ok(())
}
