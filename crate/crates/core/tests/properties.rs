mod common;

use hoi::copula::{copula_covariance, copula_transform, estimate_covariance, DataMatrix};
use hoi::linalg::batched_logdet;
use hoi::measures::{compute_hoi_batch, Direction, HoiBatch, Measure};
use hoi::nplet::{count_nplets, enumerate_orders, NpletBatch};
use hoi::optim::{evaluate_objective, Aggregator, ObjectiveSpec};
use hoi::synthetic::{block_concat, ground_truth_hoi, r_system_cov, s_system_cov};
use hoi::{CovSet, CovarianceMatrix};
use num_bigint::BigUint;
use proptest::prelude::*;
use proptest::sample::subsequence;
use std::sync::Arc;

fn measures(cov: &CovarianceMatrix, nplet: &[usize]) -> [f64; 4] {
    let batch = NpletBatch::fixed(cov.dim(), nplet.len(), nplet.to_vec()).unwrap();
    let h = compute_hoi_batch(&CovSet::single(cov.clone()), &batch, false).unwrap();
    [h.tc[0], h.dtc[0], h.o[0], h.s[0]]
}

fn spd_and_nplet() -> impl Strategy<Value = (CovarianceMatrix, Vec<usize>)> {
    (3usize..10, any::<u64>()).prop_flat_map(|(n, seed)| {
        let cov = common::random_spd(n, seed);
        subsequence((0..n).collect::<Vec<_>>(), 2..=n).prop_map(move |p| (cov.clone(), p))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measures_are_algebraically_closed((cov, p) in spd_and_nplet()) {
        let [tc, dtc, o, s] = measures(&cov, &p);
        prop_assert!((o - (tc - dtc)).abs() < 1e-10);
        prop_assert!((s - (tc + dtc)).abs() < 1e-10);
        prop_assert!((s - (2.0 * tc - o)).abs() < 1e-10);
        prop_assert!(tc > -1e-12 && dtc > -1e-12);
    }

    #[test]
    fn measures_match_definitions((cov, p) in spd_and_nplet()) {
        let got = measures(&cov, &p);
        let want = common::hoi(&cov, &p, None);
        for (g, w) in got.iter().zip(want) {
            prop_assert!(common::close(*g, w, 1e-9), "{g} vs {w}");
        }
    }

    #[test]
    fn permuting_variables_permutes_results(
        (cov, p) in spd_and_nplet(),
        shuffle_seed in any::<u64>(),
    ) {
        let n = cov.dim();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = shuffle_seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        // variable i of the original sits at position perm[i]
        let mut sigma = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                sigma[perm[i] * n + perm[j]] = cov.get(i, j);
            }
        }
        let permuted = CovarianceMatrix::new(sigma, n, 0).unwrap();
        let mut q: Vec<usize> = p.iter().map(|&i| perm[i]).collect();
        q.sort_unstable();
        let a = measures(&cov, &p);
        let b = measures(&permuted, &q);
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn independent_blocks_add(
        ra in 1usize..5, sa in 1usize..5, ca in 0.1f64..3.0, cb in 0.1f64..3.0, identity in 0usize..3,
    ) {
        let a = r_system_cov(ra, ca);
        let b = s_system_cov(sa, cb);
        let mut parts = vec![a.clone(), b.clone()];
        if identity > 0 {
            parts.push(CovarianceMatrix::identity(identity));
        }
        let joined = block_concat(&parts).unwrap().cov;
        let all = |n: usize| (0..n).collect::<Vec<_>>();
        let ga = ground_truth_hoi(&a, &all(a.dim())).unwrap();
        let gb = ground_truth_hoi(&b, &all(b.dim())).unwrap();
        let gj = ground_truth_hoi(&joined, &all(joined.dim())).unwrap();
        prop_assert!((gj.o - (ga.o + gb.o)).abs() < 1e-10);
        prop_assert!((gj.tc - (ga.tc + gb.tc)).abs() < 1e-10);
        prop_assert!((gj.dtc - (ga.dtc + gb.dtc)).abs() < 1e-10);
    }

    #[test]
    fn batched_logdet_matches_nalgebra(k in 1usize..=20, count in 1usize..6, seed in any::<u64>()) {
        let mut mats = Vec::with_capacity(count * k * k);
        let mut want = Vec::new();
        for c in 0..count {
            let m = common::random_spd(k, seed.wrapping_add(c as u64));
            mats.extend_from_slice(m.as_slice());
            want.push(common::logdet(common::sub(&m, &(0..k).collect::<Vec<_>>())));
        }
        let got = batched_logdet(&mats, k, count).unwrap();
        for (g, w) in got.iter().zip(want) {
            prop_assert!((g - w).abs() <= 1e-10 * w.abs().max(1.0));
        }
    }

    #[test]
    fn copula_ignores_monotone_transforms(seed in any::<u64>(), t in 5usize..60) {
        let cov = common::random_spd(3, seed);
        let data = hoi::synthetic::sample_gaussian(&cov, t, seed).unwrap();
        let warped = data.map(|x| x.exp() + 3.0 * x).unwrap();
        let plain = copula_covariance(&data).unwrap();
        let bent = copula_covariance(&warped).unwrap();
        prop_assert_eq!(plain.as_slice(), bent.as_slice());
        let z = copula_transform(&data).unwrap();
        for j in 0..3 {
            let col = z.column(j);
            prop_assert!(col.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn enumeration_covers_count(n in 3usize..12, lo in 1usize..4, span in 0usize..6, bs in 1usize..50) {
        let max = (lo + span).min(n);
        let total: usize = enumerate_orders(n, lo, max, bs).unwrap().map(|b| b.len()).sum();
        prop_assert_eq!(BigUint::from(total), count_nplets(n, lo, max).unwrap());
        let oracle = (lo..=max).map(|k| common::binomial(n, k)).fold(BigUint::default(), |a, b| a + b);
        prop_assert_eq!(BigUint::from(total), oracle);
    }

    #[test]
    fn min_direction_is_max_of_negation(values in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let hoi = HoiBatch {
            n_datasets: 1,
            orders: vec![3; values.len()],
            tc: values.clone(),
            dtc: values.clone(),
            o: values.clone(),
            s: values.clone(),
        };
        let min = evaluate_objective(&hoi, &ObjectiveSpec::new(Measure::O, Direction::Min)).unwrap();
        let negated = ObjectiveSpec::new(Measure::O, Direction::Max)
            .aggregator(Aggregator::Custom(Arc::new(|v: &[f64]| -v[0])));
        prop_assert_eq!(min, evaluate_objective(&hoi, &negated).unwrap());
    }
}

#[test]
fn raw_covariance_of_copula_data_is_the_copula_covariance() {
    let data = DataMatrix::from_rows(&[
        vec![1.0, 10.0],
        vec![2.0, 30.0],
        vec![3.0, 20.0],
        vec![4.0, 50.0],
        vec![5.0, 40.0],
    ])
    .unwrap();
    let direct = copula_covariance(&data).unwrap();
    let staged = estimate_covariance(&copula_transform(&data).unwrap()).unwrap();
    assert_eq!(direct.as_slice(), staged.as_slice());
}
