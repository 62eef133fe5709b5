//! Build a block system from JSON, sample it, and compare with ground truth.

use hoi::copula::copula_covariance;
use hoi::synthetic::{ground_truth_hoi, sample_gaussian, PgmSpec};
use hoi::CovSet;
use hoi::measures::compute_hoi_batch;
use hoi::nplet::NpletBatch;

const SPEC: &str = r#"{
  "blocks": [
    {"kind": "R", "n_sources": 3, "c": 1.0},
    {"kind": "S", "n_sources": 2, "c": 0.8},
    {"kind": "independent", "n_sources": 2}
  ]
}"#;

fn main() -> hoi::Result<()> {
    let pgm = PgmSpec::from_json(SPEC)?;
    let system = pgm.build()?;
    println!("variables: {}", pgm.variable_names().join(", "));

    let data = sample_gaussian(&system.cov, 20_000, 3)?;
    let covs = CovSet::single(copula_covariance(&data)?);

    println!("{:<12} {:>10} {:>10}", "block", "true O", "sampled O");
    for i in 0..system.blocks.len() {
        let idx = system.block_indices(i);
        if idx.len() < 2 {
            continue;
        }
        let truth = ground_truth_hoi(&system.cov, &idx)?;
        let batch = NpletBatch::fixed(pgm.n_vars(), idx.len(), idx)?;
        let est = compute_hoi_batch(&covs, &batch, true)?;
        let kind = system.kinds[i].map_or("-".to_string(), |k| format!("{k:?}"));
        println!("{kind:<12} {:>10.4} {:>10.4}", truth.o, est.o[0]);
    }
    Ok(())
}
