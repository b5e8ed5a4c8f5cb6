#![allow(dead_code)]

use freelens::rng::derive_seed;
use freelens::CoefficientModel;

pub const CORPUS_SEED: u64 = 0x0c0f_fee5;

/// 50 centered self-adjoint models with `n <= 3`, `d <= 6`.
pub fn small_corpus() -> Vec<CoefficientModel> {
    (0..50u64)
        .map(|k| {
            let d = 1 + (k % 6) as usize;
            let n = 1 + ((k / 6) % 3) as usize;
            CoefficientModel::random_gaussian(d, d, n, true, false, derive_seed(CORPUS_SEED, k)).unwrap()
        })
        .collect()
}

/// 20 centered self-adjoint models with `n <= 3`, `d <= 8`, each paired
/// with a moment order `p <= 3`.
pub fn moment_corpus() -> Vec<(CoefficientModel, usize)> {
    (0..20u64)
        .map(|k| {
            let d = 1 + (k % 8) as usize;
            let n = 1 + (k % 3) as usize;
            let p = 1 + ((k / 3) % 3) as usize;
            let m = CoefficientModel::random_gaussian(d, d, n, true, false, derive_seed(CORPUS_SEED ^ 0x33, k)).unwrap();
            (m, p)
        })
        .collect()
}

/// 100 centered self-adjoint models with `d <= 10`, `n <= 6`.
pub fn lehner_corpus() -> Vec<CoefficientModel> {
    (0..100u64)
        .map(|k| {
            let d = 1 + (k % 10) as usize;
            let n = 1 + ((k / 10) % 6) as usize;
            CoefficientModel::random_gaussian(d, d, n, true, false, derive_seed(CORPUS_SEED ^ 0x77, k)).unwrap()
        })
        .collect()
}

/// 20 rectangular models, some with a mean.
pub fn rectangular_corpus() -> Vec<CoefficientModel> {
    (0..20u64)
        .map(|k| {
            let d1 = 1 + (k % 5) as usize;
            let d2 = 1 + ((k * 3 + 1) % 7) as usize;
            let n = 1 + (k % 4) as usize;
            CoefficientModel::random_gaussian(d1, d2, n, false, k % 2 == 0, derive_seed(CORPUS_SEED ^ 0x99, k)).unwrap()
        })
        .collect()
}
