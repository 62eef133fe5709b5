//! Mixed-order batches give the same measures as one batch per order.

use hoi::measures::compute_hoi_batch;
use hoi::nplet::{indices_to_mask, NpletBatch};
use hoi::synthetic::{r_system_cov, s_system_cov, block_concat};
use hoi::CovSet;

fn main() -> hoi::Result<()> {
    let joined = block_concat(&[r_system_cov(2, 1.0), s_system_cov(2, 0.5)])?;
    let n = joined.cov.dim();
    let covs = CovSet::single(joined.cov);

    let nplets = [vec![0, 1, 2], vec![3, 4, 5], vec![0, 1, 2, 3, 4, 5], vec![1, 2, 4, 5]];
    let masks: Vec<Vec<bool>> = nplets.iter().map(|p| indices_to_mask(p, n)).collect();
    let mixed = compute_hoi_batch(&covs, &NpletBatch::mixed(n, &masks)?, false)?;

    println!("{:<20} {:>10} {:>10} {:>10}", "nplet", "O mixed", "O fixed", "diff");
    for (b, p) in nplets.iter().enumerate() {
        let fixed = compute_hoi_batch(&covs, &NpletBatch::fixed(n, p.len(), p.clone())?, false)?;
        println!(
            "{:<20} {:>10.6} {:>10.6} {:>10.1e}",
            format!("{p:?}"),
            mixed.o[b],
            fixed.o[0],
            (mixed.o[b] - fixed.o[0]).abs()
        );
    }
    Ok(())
}
