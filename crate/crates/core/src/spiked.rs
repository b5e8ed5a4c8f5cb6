//! The BBP function and edge predictions for spiked isotropic models.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{sample_wigner, CoefficientModel};
use crate::par;
use crate::params;
use crate::rng::derive_seed;
use crate::sampling::Estimate;

/// Relative eigenvalue threshold for the numerical rank of `A0`.
pub const RANK_THRESHOLD: f64 = 1e-9;
pub const DEFAULT_ISOTROPY_TOL: f64 = 1e-9;

/// `B(lambda) = 2` for `lambda <= 1` and `lambda + 1/lambda` above.
pub fn bbp_value(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(if lambda <= 1.0 { 2.0 } else { lambda + 1.0 / lambda })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsotropyReport {
    pub isotropic: bool,
    pub sigma: f64,
    pub rank: usize,
    /// `||sum_k A_k^2 - sigma^2 I||`.
    pub deviation: f64,
}

/// Numerical rank of a symmetric matrix.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let eig = linalg::sym_eigenvalues(m);
    let top = eig.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if top == 0.0 {
        return 0;
    }
    eig.iter().filter(|x| x.abs() > RANK_THRESHOLD * top).count()
}

/// Checks `sum_k A_k^2 = sigma^2 I` up to `tol * sigma^2`.
pub fn isotropic_check(model: &CoefficientModel, tol: f64) -> Result<IsotropyReport> {
    if !model.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    let gram = model.row_gram();
    let sigma_sq = linalg::sym_spectral_norm(&gram);
    let d = model.d1();
    let deviation = linalg::sym_spectral_norm(&(gram - DMatrix::identity(d, d) * sigma_sq));
    Ok(IsotropyReport {
        isotropic: deviation <= tol * sigma_sq,
        sigma: sigma_sq.sqrt(),
        rank: numerical_rank(model.a0()),
        deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionPrediction {
    pub sigma: f64,
    /// `lambda_max(A0) / sigma`.
    pub spike: f64,
    pub predicted_edge: f64,
    /// `2 sigma_*^upper sqrt(r)`, in the units of the model.
    pub error_radius: f64,
    pub rank_r: usize,
    pub isotropic_ok: bool,
    /// `sigma_* sqrt(r) <= sigma`.
    pub precondition_ok: bool,
}

/// Prediction of `lambda_max(X_free)` as `sigma B(lambda_max(A0) / sigma)`.
pub fn bbp_prediction(model: &CoefficientModel) -> Result<TransitionPrediction> {
    let iso = isotropic_check(model, DEFAULT_ISOTROPY_TOL)?;
    if !iso.isotropic {
        return Err(Error::NotIsotropic { deviation: iso.deviation });
    }
    if iso.sigma == 0.0 {
        return Err(Error::invalid("sigma is zero"));
    }
    let spike = linalg::lambda_max(model.a0()) / iso.sigma;
    let predicted_edge = iso.sigma * bbp_value(spike)?;
    let sigma_star_upper = iso.sigma.min(params::v_param(model));
    let root_r = (iso.rank as f64).sqrt();
    Ok(TransitionPrediction {
        sigma: iso.sigma,
        spike,
        predicted_edge,
        error_radius: 2.0 * sigma_star_upper * root_r,
        rank_r: iso.rank,
        isotropic_ok: true,
        precondition_ok: sigma_star_upper * root_r <= iso.sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mean_lmax: f64,
    pub stderr: f64,
    pub bbp: f64,
}

/// Mean `lambda_max(W + lambda e1 e1^T)` over `trials` standard Wigner draws
/// of size `d`. Draws are shared across the grid, so every row sees the same
/// noise.
pub fn spiked_sweep(d: usize, lambdas: &[f64], trials: usize, seed: u64) -> Result<Vec<SweepRow>> {
    if d < 50 {
        return Err(Error::invalid(format!("d must be >= 50, got {d}")));
    }
    if lambdas.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    if trials < 2 {
        return Err(Error::invalid(format!("trials must be >= 2, got {trials}")));
    }
    let bbp: Vec<f64> = lambdas.iter().map(|&l| bbp_value(l)).collect::<Result<_>>()?;
    let cells = par::map_range(trials, |t| {
        let w = sample_wigner(d, derive_seed(seed, t as u64));
        par::map_slice(lambdas, |&l| {
            let mut x = w.clone();
            x[(0, 0)] += l;
            linalg::lambda_max(&x)
        })
    });
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let column: Vec<f64> = cells.iter().map(|row| row[k]).collect();
            let e = Estimate::from_samples(&column);
            SweepRow { lambda, mean_lmax: e.mean, stderr: e.stderr, bbp: bbp[k] }
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("lambda,mean_lmax,stderr,bbp\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.lambda, r.mean_lmax, r.stderr, r.bbp));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lehner;
    use crate::model::Builtin;

    fn e1(d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        v
    }

    #[test]
    fn bbp_values() {
        assert_eq!(bbp_value(0.5).unwrap(), 2.0);
        assert_eq!(bbp_value(1.0).unwrap(), 2.0);
        assert_eq!(bbp_value(2.0).unwrap(), 2.5);
        assert!(bbp_value(-0.1).is_err());
        assert!((bbp_value(100.0).unwrap() / 100.0 - 1.0).abs() < 0.01);
        let grid: Vec<f64> = (0..400).map(|k| k as f64 * 0.01).collect();
        for w in grid.windows(2) {
            let (a, b) = (bbp_value(w[0]).unwrap(), bbp_value(w[1]).unwrap());
            assert!(a <= b && a >= 2.0 && (b - a) <= 0.011);
        }
    }

    #[test]
    fn isotropy() {
        let w = CoefficientModel::builtin(&Builtin::Wigner { d: 10 }).unwrap();
        let r = isotropic_check(&w, 1e-9).unwrap();
        assert!(r.isotropic && (r.sigma - 1.0).abs() < 1e-14 && r.rank == 0);
        let band = CoefficientModel::builtin(&Builtin::Band { d: 10, bandwidth: 2 }).unwrap();
        assert!(!isotropic_check(&band, 1e-9).unwrap().isotropic);
        let sp = CoefficientModel::builtin(&Builtin::SpikedWigner { d: 10, lambda: 2.0, v: e1(10) }).unwrap();
        let r = isotropic_check(&sp, 1e-9).unwrap();
        assert!(r.isotropic && r.rank == 1);
        assert!(matches!(bbp_prediction(&band), Err(Error::NotIsotropic { .. })));
    }

    #[test]
    fn predictions() {
        let sp = CoefficientModel::builtin(&Builtin::SpikedWigner { d: 400, lambda: 2.0, v: e1(400) }).unwrap();
        let p = bbp_prediction(&sp).unwrap();
        assert!((p.predicted_edge - 2.5).abs() < 1e-12);
        assert!(p.error_radius <= 2.0 * (2.0f64 / 400.0).sqrt() + 1e-12);
        assert!(p.precondition_ok);
        let zero = CoefficientModel::builtin(&Builtin::Wigner { d: 20 }).unwrap();
        assert_eq!(bbp_prediction(&zero).unwrap().predicted_edge, 2.0 * isotropic_check(&zero, 1e-9).unwrap().sigma);
    }

    #[test]
    fn lehner_agrees_with_prediction() {
        let sp = CoefficientModel::builtin(&Builtin::SpikedWigner { d: 50, lambda: 2.0, v: e1(50) }).unwrap();
        let p = bbp_prediction(&sp).unwrap();
        let top = lehner::free_lambda_max(&sp, 1e-6, lehner::DEFAULT_MAX_OUTER).unwrap();
        assert!((top - p.predicted_edge).abs() <= p.error_radius, "{top} vs {p:?}");
    }

    #[test]
    fn sweep_shape() {
        let rows = spiked_sweep(60, &[0.0, 0.5, 2.5], 6, 1).unwrap();
        assert!(rows[2].mean_lmax > rows[1].mean_lmax);
        let plain = crate::sampling::empirical_lambda_max(&CoefficientModel::builtin(&Builtin::Wigner { d: 60 }).unwrap(), 6, 1).unwrap();
        assert_eq!(rows[0].mean_lmax, plain.mean);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("lambda,mean_lmax,stderr,bbp\n0,"));
        assert_eq!(csv.lines().count(), 4);
        assert!(spiked_sweep(10, &[1.0], 4, 0).is_err());
    }
}
