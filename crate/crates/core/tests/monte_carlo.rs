use freelens::chaos;
use freelens::combinatorics::gaussian_trace_moment;
use freelens::kikuchi::{self, colex_unrank, binomial};
use freelens::model::Builtin;
use freelens::rng::derive_seed;
use freelens::sampling;
use freelens::CoefficientModel;
use nalgebra::DMatrix;

#[test]
fn wigner_fourth_moment_matches_exact() {
    let w = CoefficientModel::builtin(&Builtin::Wigner { d: 8 }).unwrap();
    let exact = gaussian_trace_moment(&w, 2).unwrap();
    let mc = sampling::empirical_trace_moment(&w, 2, 200_000, 8).unwrap();
    assert!(mc.covers(exact, 3.0), "{exact} vs {mc:?}");
}

#[test]
fn stderr_shrinks_with_trials() {
    let m = CoefficientModel::random_gaussian(4, 4, 2, true, true, 1).unwrap();
    let a = sampling::empirical_norm(&m, 4000, 2).unwrap();
    let b = sampling::empirical_norm(&m, 8000, 2).unwrap();
    let ratio = a.stderr / b.stderr;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn diagonal_norm_grows_like_max_of_gaussians() {
    let small = sampling::empirical_norm(&CoefficientModel::builtin(&Builtin::Diagonal { d: 50 }).unwrap(), 200, 5).unwrap();
    let large = sampling::empirical_norm(&CoefficientModel::builtin(&Builtin::Diagonal { d: 500 }).unwrap(), 200, 6).unwrap();
    let predicted = (2.0 * 500f64.ln()).sqrt() / (2.0 * 50f64.ln()).sqrt();
    let ratio = large.mean / small.mean;
    assert!((ratio / predicted - 1.0).abs() < 0.15, "{ratio} vs {predicted}");
}

#[test]
fn kikuchi_mean_is_signal_adjacency() {
    // x = all ones: E M = lambda * (0/1 adjacency)
    let (n, r, l, lambda) = (6, 2, 1, 0.7);
    let trials = 10_000;
    let dim = binomial(n, l) as usize;
    let mut sum = DMatrix::<f64>::zeros(dim, dim);
    let mut sq = DMatrix::<f64>::zeros(dim, dim);
    for t in 0..trials {
        let inst = kikuchi::generate_instance(n, r, lambda, derive_seed(99, t), Some(vec![1; n])).unwrap();
        let m = kikuchi::build_kikuchi(&inst, l).unwrap().to_dense();
        sq += m.component_mul(&m);
        sum += m;
    }
    let tf = trials as f64;
    for i in 0..dim {
        for j in 0..dim {
            let (a, b) = (colex_unrank(i as u64, l), colex_unrank(j as u64, l));
            let expected = if (a ^ b).count_ones() as usize == r { lambda } else { 0.0 };
            let mean = sum[(i, j)] / tf;
            let var = (sq[(i, j)] / tf - mean * mean).max(0.0);
            let se = (var / tf).sqrt();
            assert!((mean - expected).abs() <= 3.0 * se + 1e-12, "({i},{j}): {mean} vs {expected}");
        }
    }
}

#[test]
fn null_kikuchi_statistic_near_two() {
    let rows = kikuchi::detection_trials(30, 4, 2, 0.0, 20, 77, kikuchi::DEFAULT_THRESHOLD).unwrap();
    for r in &rows {
        assert!((r.statistic - 2.0).abs() <= 0.2, "{r:?}");
    }
}

#[test]
fn decoupled_sos_chaos_below_iterated_bound() {
    let t = chaos::sos_chaos_tensor(3, 3).unwrap();
    let bound = chaos::iterated_bound(&t, 3.0).unwrap().upper.unwrap();
    let trials = 10_000;
    let mean = (0..trials)
        .map(|k| freelens::linalg::spectral_norm(&chaos::sample_chaos(&t, derive_seed(5, k), true).unwrap()))
        .sum::<f64>()
        / trials as f64;
    assert!(mean <= bound, "{mean} > {bound}");
}

#[test]
fn sos_sigma_growth() {
    let a = chaos::sigma_chaos(&chaos::sos_chaos_tensor(4, 3).unwrap());
    let b = chaos::sigma_chaos(&chaos::sos_chaos_tensor(16, 3).unwrap());
    assert!((b / a - 2.0).abs() < 0.2, "{}", b / a);
}
