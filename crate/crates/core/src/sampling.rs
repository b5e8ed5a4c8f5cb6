//! Monte Carlo estimates of spectral statistics.
//!
//! Trial `t` of a run with master seed `s` draws its Gaussians from
//! `rng::derive_seed(s, t)`, so estimates do not depend on scheduling.

use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::combinatorics::IndexWord;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{sample_wigner, CoefficientModel};
use crate::model_io::model_to_json;
use crate::par;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<f64>,
    pub seed: u64,
    pub model_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl Estimate {
    /// Sample mean and `sd / sqrt(trials)` with the unbiased sample deviation.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = par::pairwise_sum(values) / n as f64;
        let stderr = if n < 2 {
            f64::INFINITY
        } else {
            let dev: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
            (par::pairwise_sum(&dev) / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        };
        Estimate { mean, stderr, trials: n }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// SHA-256 of the sparse JSON form of the model.
pub fn model_digest(model: &CoefficientModel) -> String {
    let digest = Sha256::digest(model_to_json(model, true).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sorted eigenvalues of one draw (of the dilation, for rectangular models).
pub fn empirical_spectrum(model: &CoefficientModel, seed: u64) -> SpectrumSample {
    SpectrumSample {
        eigenvalues: linalg::sym_eigenvalues(&model.sample_symmetric(seed)),
        seed,
        model_digest: model_digest(model),
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 2 {
        return Err(Error::invalid(format!("trials must be >= 2, got {trials}")));
    }
    Ok(())
}

/// Estimate of `E f(X)` over `trials` independent draws.
pub fn estimate_statistic<F>(model: &CoefficientModel, trials: usize, seed: u64, f: F) -> Result<Estimate>
where
    F: Fn(&DMatrix<f64>) -> f64 + Sync + Send,
{
    check_trials(trials)?;
    let values = par::map_range(trials, |t| f(&model.sample(derive_seed(seed, t as u64))));
    Ok(Estimate::from_samples(&values))
}

/// Estimate of `E ||X||`.
pub fn empirical_norm(model: &CoefficientModel, trials: usize, seed: u64) -> Result<Estimate> {
    estimate_statistic(model, trials, seed, linalg::spectral_norm)
}

/// Estimate of `E lambda_max(X)` for self-adjoint models.
pub fn empirical_lambda_max(model: &CoefficientModel, trials: usize, seed: u64) -> Result<Estimate> {
    if !model.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    estimate_statistic(model, trials, seed, linalg::lambda_max)
}

/// `tr X^{2p} = ||X^p||_F^2 / d` for symmetric `X`.
pub fn normalized_trace_power(x: &DMatrix<f64>, p: usize) -> f64 {
    let d = x.nrows() as f64;
    if p == 0 {
        return 1.0;
    }
    let mut result: Option<DMatrix<f64>> = None;
    let mut base = x.clone();
    let mut e = p;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r * &base,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = &base * &base;
    }
    result.map_or(1.0, |r| r.norm_squared() / d)
}

/// Estimate of `E tr X^{2p}` (on the dilation for rectangular models).
pub fn empirical_trace_moment(model: &CoefficientModel, p: usize, trials: usize, seed: u64) -> Result<Estimate> {
    check_trials(trials)?;
    if p == 0 {
        return Ok(Estimate { mean: 1.0, stderr: 0.0, trials });
    }
    let values = par::map_range(trials, |t| normalized_trace_power(&model.sample_symmetric(derive_seed(seed, t as u64)), p));
    Ok(Estimate::from_samples(&values))
}

/// Estimate of `E tr W_u(1) ... W_u(2p)` for independent standard Wigner
/// matrices, one per letter. Every letter must occur exactly twice.
pub fn wigner_word_moment(d: usize, u: &IndexWord, trials: usize, seed: u64) -> Result<Estimate> {
    if d < 2 {
        return Err(Error::invalid("d must be >= 2"));
    }
    check_trials(trials)?;
    let mut counts = std::collections::BTreeMap::new();
    for &l in u.letters() {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    if let Some((l, c)) = counts.iter().find(|(_, &c)| c != 2) {
        return Err(Error::InvalidWord(format!("letter {l} occurs {c} times, expected 2")));
    }
    let letters = u.letters().to_vec();
    let values = par::map_range(trials, |t| {
        let trial_seed = derive_seed(seed, t as u64);
        let mats: std::collections::BTreeMap<usize, DMatrix<f64>> =
            counts.keys().map(|&l| (l, sample_wigner(d, derive_seed(trial_seed, l as u64)))).collect();
        let mut prod = DMatrix::<f64>::identity(d, d);
        for l in &letters {
            prod *= &mats[l];
        }
        linalg::normalized_trace(&prod)
    });
    Ok(Estimate::from_samples(&values))
}

/// Largest distance from a point of `from` (sorted) to the set `to` (sorted).
fn directed(from: &[f64], to: &[f64]) -> f64 {
    let mut j = 0;
    let mut worst: f64 = 0.0;
    for &a in from {
        while j + 1 < to.len() && to[j + 1] <= a {
            j += 1;
        }
        let mut best = (a - to[j]).abs();
        if j + 1 < to.len() {
            best = best.min((to[j + 1] - a).abs());
        }
        worst = worst.max(best);
    }
    worst
}

/// Hausdorff distance between two finite subsets of the real line.
pub fn hausdorff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN in point set"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(directed(&a, &b).max(directed(&b, &a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Builtin;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    #[test]
    fn deterministic_spectrum() {
        let m = CoefficientModel::deterministic(DMatrix::from_diagonal(&dvector![2.0, 1.0]), true).unwrap();
        assert_eq!(empirical_spectrum(&m, 3).eigenvalues, vec![1.0, 2.0]);
        let e = empirical_norm(&m, 5, 0).unwrap();
        assert_eq!((e.mean, e.stderr), (2.0, 0.0));
    }

    #[test]
    fn scalar_spectrum_is_the_draw() {
        let m = CoefficientModel::new(1, 1, true, dmatrix![0.0], vec![dmatrix![1.0]]).unwrap();
        for seed in 0..5 {
            assert_eq!(empirical_spectrum(&m, seed).eigenvalues, vec![crate::rng::normal(seed, 0)]);
        }
    }

    #[test]
    fn wigner_edge() {
        let w = CoefficientModel::builtin(&Builtin::Wigner { d: 300 }).unwrap();
        let top = *empirical_spectrum(&w, 9).eigenvalues.last().unwrap();
        assert!((1.7..=2.3).contains(&top), "{top}");
        let e = empirical_norm(&CoefficientModel::builtin(&Builtin::Wigner { d: 200 }).unwrap(), 50, 1).unwrap();
        assert!((e.mean - 2.0).abs() < 0.1, "{e:?}");
    }

    #[test]
    fn digest_tracks_content() {
        let a = CoefficientModel::builtin(&Builtin::Wigner { d: 3 }).unwrap();
        let b = a.scaled(2.0);
        assert_eq!(model_digest(&a), model_digest(&a.clone()));
        assert_ne!(model_digest(&a), model_digest(&b));
        assert_eq!(model_digest(&a).len(), 64);
    }

    #[test]
    fn trace_power_matches_eigenvalues() {
        let x = CoefficientModel::random_gaussian(5, 5, 3, true, true, 2).unwrap().sample(4);
        let eig = linalg::sym_eigenvalues(&x);
        for p in 0..6 {
            let direct = eig.iter().map(|l| l.powi(2 * p as i32)).sum::<f64>() / 5.0;
            assert!((normalized_trace_power(&x, p) - direct).abs() <= 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn scalar_second_moment() {
        let m = CoefficientModel::new(1, 1, true, dmatrix![0.0], vec![dmatrix![1.0]]).unwrap();
        let e = empirical_trace_moment(&m, 1, 100_000, 7).unwrap();
        assert!(e.covers(1.0, 3.0), "{e:?}");
        let zero = empirical_trace_moment(&m, 0, 10, 7).unwrap();
        assert_eq!((zero.mean, zero.stderr), (1.0, 0.0));
        assert!(empirical_norm(&m, 1, 0).is_err());
    }

    #[test]
    fn single_letter_word() {
        let u = IndexWord::from_letters(vec![1, 1]).unwrap();
        let e = wigner_word_moment(50, &u, 40, 3).unwrap();
        assert!(e.covers(1.0, 4.0), "{e:?}");
        let bad = IndexWord::from_letters(vec![1, 1, 1, 2]).unwrap();
        assert!(matches!(wigner_word_moment(10, &bad, 4, 0), Err(Error::InvalidWord(_))));
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(hausdorff(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(hausdorff(&[0.0, 2.0], &[1.0]).unwrap(), 1.0);
        assert!(matches!(hausdorff(&[], &[1.0]), Err(Error::EmptySet)));
    }

    fn brute_hausdorff(a: &[f64], b: &[f64]) -> f64 {
        let dir = |x: &[f64], y: &[f64]| {
            x.iter().map(|p| y.iter().map(|q| (p - q).abs()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
        };
        dir(a, b).max(dir(b, a))
    }

    proptest! {
        #[test]
        fn hausdorff_is_a_metric(
            a in prop::collection::vec(-10.0..10.0f64, 1..12),
            b in prop::collection::vec(-10.0..10.0f64, 1..12),
            c in prop::collection::vec(-10.0..10.0f64, 1..12),
        ) {
            let ab = hausdorff(&a, &b).unwrap();
            prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
            prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
            prop_assert!(ab <= hausdorff(&a, &c).unwrap() + hausdorff(&c, &b).unwrap() + 1e-12);
            prop_assert!((ab - brute_hausdorff(&a, &b)).abs() < 1e-12);
        }
    }
}
