//! Reference implementations shared by the integration tests. Everything here
//! is computed one n-plet at a time with nalgebra, independently of the
//! batched engine.

#![allow(dead_code)]

use hoi::{CovSet, CovarianceMatrix};
use nalgebra::DMatrix;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::digamma;

pub fn sub(cov: &CovarianceMatrix, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| cov.get(idx[i], idx[j]))
}

pub fn logdet(m: DMatrix<f64>) -> f64 {
    let chol = m.cholesky().expect("positive definite");
    2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Differential entropy of the Gaussian marginal over `idx`, optionally
/// minus the finite-sample bias for `t` samples.
pub fn entropy(cov: &CovarianceMatrix, idx: &[usize], t: Option<usize>) -> f64 {
    let k = idx.len() as f64;
    let h = 0.5 * k * (1.0 + (2.0 * std::f64::consts::PI).ln()) + 0.5 * logdet(sub(cov, idx));
    match t {
        None => h,
        Some(t) => {
            let psi: f64 = (1..=idx.len()).map(|j| digamma((t - j) as f64 / 2.0)).sum();
            h - 0.5 * (k * (2.0 / (t as f64 - 1.0)).ln() + psi)
        }
    }
}

/// (TC, DTC, Ω, S) from the textbook definitions: DTC through conditional
/// entropies, Ω as TC minus DTC.
pub fn hoi(cov: &CovarianceMatrix, nplet: &[usize], t: Option<usize>) -> [f64; 4] {
    let joint = entropy(cov, nplet, t);
    let singles: f64 = nplet.iter().map(|&i| entropy(cov, &[i], t)).sum();
    let tc = singles - joint;
    let conditional: f64 = (0..nplet.len())
        .map(|j| {
            let rest: Vec<usize> = nplet.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &v)| v).collect();
            joint - entropy(cov, &rest, t)
        })
        .sum();
    let dtc = joint - conditional;
    [tc, dtc, tc - dtc, tc + dtc]
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// All n-plets of orders `min..=max` in lexicographic order within each order.
pub fn all_nplets(n: usize, min: usize, max: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in min..=max {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// A dense random correlation-like matrix, well conditioned.
pub fn random_spd(n: usize, seed: u64) -> CovarianceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    CovarianceMatrix::from_rows(&rows, 0).unwrap()
}

pub fn single(cov: CovarianceMatrix) -> CovSet {
    CovSet::single(cov)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}
