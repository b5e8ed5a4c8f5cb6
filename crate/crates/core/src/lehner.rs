//! Norm of the free model through Lehner's variational formula
//!
//! `||X_free|| = max_{eps = +-1} inf_{Z > 0} lambda_max(Z^-1 + eps A0 + sum_k A_k Z A_k)`.
//!
//! Each branch minimizes a log-sum-exp smoothing of `lambda_max` with BFGS
//! over the Cholesky factor of `Z`, shrinking the smoothing parameter as the
//! iterates settle. The best exact `lambda_max`
//! seen is returned, so every reported value is attained by an explicit
//! positive-definite `Z` and is an upper bound on the branch value.
//!
//! Lower bounds come from the dual problem: for every density matrix `rho`,
//! `eps tr(rho A0) + 2 ||rho^(1/2) S(rho)^(1/2)||_1` with
//! `S(rho) = sum_k A_k rho A_k` is at most the branch value. The smoothed
//! objective's gradient with respect to `F` is such a density, and a branch
//! stops once the two bounds are within the tolerance.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::bounds::pisier_interval;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CoefMatrix, CoefficientModel};
use crate::par;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_OUTER: usize = 20_000;
/// Floor on `sigma` when scaling the starting point, and the scale of `Z`
/// reported for models without coefficients.
pub const Z_FLOOR: f64 = 1e-8;
const WINDOW: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct BranchSolution {
    pub eps: f64,
    pub value: f64,
    /// Certified lower bound on the branch value.
    pub lower: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub z: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LehnerSolution {
    pub norm: f64,
    pub plus: BranchSolution,
    /// Absent when `A0 = 0`, where both branches coincide.
    pub minus: Option<BranchSolution>,
    pub pisier: (f64, f64),
}

enum Op {
    Sparse(Vec<(usize, usize, f64)>),
    Dense(DMatrix<f64>),
}

/// The map `Z -> sum_k A_k Z A_k` for symmetric coefficients; it is its own
/// adjoint with respect to the trace pairing.
struct Congruence {
    d: usize,
    ops: Vec<Op>,
}

impl Congruence {
    fn new(coefs: &[CoefMatrix], d: usize) -> Self {
        let ops = coefs
            .iter()
            .filter(|c| c.nnz() > 0)
            .map(|c| {
                if c.nnz() * c.nnz() <= 2 * d * d * d {
                    Op::Sparse(c.entries().to_vec())
                } else {
                    Op::Dense(c.to_dense())
                }
            })
            .collect();
        Congruence { d, ops }
    }

    fn apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.d, self.d);
        for op in &self.ops {
            match op {
                Op::Sparse(e) => {
                    for &(i, a, v) in e {
                        for &(b, j, w) in e {
                            out[(i, j)] += v * z[(a, b)] * w;
                        }
                    }
                }
                Op::Dense(a) => out += a * z * a,
            }
        }
        symmetrize(&mut out);
        out
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

struct Eval {
    smooth: f64,
    lmax: f64,
    /// Gradient of the smoothed objective with respect to `F`.
    weight: DMatrix<f64>,
}

fn evaluate(s: &Congruence, shift: &DMatrix<f64>, z: &DMatrix<f64>, zi: &DMatrix<f64>, mu: f64) -> Eval {
    let mut f = zi + shift + s.apply(z);
    symmetrize(&mut f);
    let eig = SymmetricEigen::new(f);
    let lmax = eig.eigenvalues.max();
    let w: Vec<f64> = eig.eigenvalues.iter().map(|&l| ((l - lmax) / mu).exp()).collect();
    let total: f64 = w.iter().sum();
    let q = &eig.eigenvectors;
    let wd = nalgebra::DVector::from_iterator(w.len(), w.iter().map(|x| x / total));
    let weight = q * DMatrix::from_diagonal(&wd) * q.transpose();
    Eval { smooth: lmax + mu * total.ln(), lmax, weight }
}

fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let q = &eig.eigenvectors;
    let mut r = q * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt())) * q.transpose();
    symmetrize(&mut r);
    r
}

/// Dual value at a density matrix `rho`.
fn dual_value(s: &Congruence, shift: &DMatrix<f64>, rho: &DMatrix<f64>) -> f64 {
    let root = sqrt_psd(rho);
    let mut inner = &root * s.apply(rho) * &root;
    symmetrize(&mut inner);
    let nuclear: f64 = linalg::sym_eigenvalues(&inner).iter().map(|x| x.max(0.0).sqrt()).sum();
    shift.dot(rho) + 2.0 * nuclear
}

/// Lower bound `eps tr(rho A0) + 2 ||rho^(1/2) S(rho)^(1/2)||_1` on the `eps`
/// branch, for a positive semidefinite `rho` of unit trace.
pub fn lehner_dual(model: &CoefficientModel, eps: f64, rho: &DMatrix<f64>) -> Result<f64> {
    if !model.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    let d = model.d1();
    if rho.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!("rho is {:?}, expected {d}x{d}", rho.shape())));
    }
    if (rho.trace() - 1.0).abs() > 1e-9 || linalg::sym_eigenvalues(rho)[0] < -1e-12 {
        return Err(Error::invalid("rho must be a density matrix"));
    }
    let s = Congruence::new(model.coefficients(), d);
    Ok(dual_value(&s, &(model.a0() * eps), rho))
}

/// Exact objective `lambda_max(Z^-1 + eps A0 + sum_k A_k Z A_k)` at a given
/// positive-definite `Z`; an upper bound on the `eps` branch value.
pub fn lehner_objective(model: &CoefficientModel, eps: f64, z: &DMatrix<f64>) -> Result<f64> {
    if !model.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    let d = model.d1();
    if z.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!("Z is {:?}, expected {d}x{d}", z.shape())));
    }
    let zi = z
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("Z is not positive definite"))?
        .inverse();
    let s = Congruence::new(model.coefficients(), d);
    let mut f = zi + model.a0() * eps + s.apply(z);
    symmetrize(&mut f);
    Ok(linalg::lambda_max(&f))
}

/// Solves the `eps` branch `inf_Z lambda_max(Z^-1 + eps A0 + sum A Z A)`.
pub fn lehner_branch(model: &CoefficientModel, eps: f64, tol: f64, max_outer: usize) -> Result<BranchSolution> {
    if !model.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be > 0"));
    }
    let d = model.d1();
    let shift = model.a0() * eps;
    let sigma = linalg::sym_spectral_norm(&model.row_gram()).sqrt();
    if model.coefficients().iter().all(|c| c.nnz() == 0) {
        // Z -> infinity removes the inverse term.
        return Ok(BranchSolution {
            eps,
            value: linalg::lambda_max(&shift),
            lower: linalg::lambda_max(&shift),
            iterations: 0,
            z: DMatrix::identity(d, d) / Z_FLOOR,
        });
    }
    let s = Congruence::new(model.coefficients(), d);
    let scale = sigma + linalg::sym_spectral_norm(&shift);
    let ln_d = (d as f64).ln();
    let mu_final = if d == 1 { scale } else { 0.25 * tol / ln_d };
    let mut mu = if d == 1 { scale } else { (0.05 * scale).max(mu_final) };

    let nvar = d * (d + 1) / 2;
    let x0 = pack_lower(&(DMatrix::identity(d, d) / sigma.max(Z_FLOOR).sqrt()));
    let mut cur = Point::new(&s, &shift, x0, d, mu).ok_or_else(|| Error::invalid("singular starting point"))?;
    let mut lower = dual_value(&s, &shift, &cur.eval.weight);
    let mut best = cur.eval.lmax;
    let mut best_z = cur.z.clone();
    let mut history: Vec<f64> = vec![best];
    let mut level_history: Vec<f64> = vec![cur.eval.smooth];
    let mut hess = DMatrix::<f64>::identity(nvar, nvar);
    let mut fresh = true;
    let window_gain = |h: &[f64]| if h.len() > WINDOW { h[h.len() - 1 - WINDOW] - h[h.len() - 1] } else { f64::INFINITY };

    for it in 1..=max_outer {
        if best - lower <= tol {
            return Ok(BranchSolution { eps, value: best, lower, iterations: it - 1, z: best_z });
        }
        let g = nalgebra::DVector::from_column_slice(&cur.grad);
        let mut dir = -(&hess * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            hess = DMatrix::identity(nvar, nvar);
            fresh = true;
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut accepted = None;
        if slope < 0.0 {
            let mut step = 1.0;
            for _ in 0..60 {
                let x: Vec<f64> = cur.x.iter().zip(dir.iter()).map(|(a, b)| a + step * b).collect();
                if let Some(trial) = Point::new(&s, &shift, x, d, mu) {
                    if trial.eval.smooth <= cur.eval.smooth + 1e-4 * step * slope {
                        accepted = Some((step, trial));
                        break;
                    }
                }
                step *= 0.5;
            }
        }
        let stalled = match accepted {
            Some((step, trial)) => {
                let sv = &dir * step;
                let yv = nalgebra::DVector::from_column_slice(&trial.grad) - &g;
                let sy = sv.dot(&yv);
                if sy > 1e-12 * sv.norm() * yv.norm() {
                    if fresh {
                        hess *= sy / yv.norm_squared();
                        fresh = false;
                    }
                    let rho = 1.0 / sy;
                    let hy = &hess * &yv;
                    let yhy = yv.dot(&hy);
                    hess += (&sv * sv.transpose()) * (rho * (1.0 + rho * yhy)) - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
                }
                cur = trial;
                false
            }
            None if !fresh => {
                hess = DMatrix::identity(nvar, nvar);
                fresh = true;
                continue;
            }
            None => true,
        };
        let dual = dual_value(&s, &shift, &cur.eval.weight);
        lower = lower.max(dual);
        if cur.eval.lmax < best {
            best = cur.eval.lmax;
            best_z = cur.z.clone();
        }
        history.push(best);
        level_history.push(cur.eval.smooth);

        if mu > mu_final {
            // near-stationary points of the smoothed problem have gap at most mu ln d
            let settled = cur.eval.smooth - dual <= 2.0 * mu * ln_d.max(1.0) || window_gain(&level_history) < 1e-3 * mu;
            if stalled || settled {
                let next = (mu * 0.1).max(mu_final);
                hess *= next / mu;
                mu = next;
                cur = Point::new(&s, &shift, cur.x.clone(), d, mu).expect("point was valid");
                level_history.clear();
                level_history.push(cur.eval.smooth);
            }
        } else if stalled || (window_gain(&history) < 0.1 * tol && window_gain(&level_history) < 0.1 * tol) {
            return Ok(BranchSolution { eps, value: best, lower, iterations: it, z: best_z });
        }
    }
    if best - lower <= tol {
        return Ok(BranchSolution { eps, value: best, lower, iterations: max_outer, z: best_z });
    }
    let improvement = if history.len() > WINDOW { history[history.len() - 1 - WINDOW] - best } else { f64::INFINITY };
    if mu <= mu_final && improvement < tol {
        return Ok(BranchSolution { eps, value: best, lower, iterations: max_outer, z: best_z });
    }
    Err(Error::NoConvergence { iterations: max_outer, improvement })
}

fn pack_lower(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    (0..d).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

fn unpack_lower(x: &[f64], d: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = x[k];
            k += 1;
        }
    }
    l
}

/// Iterate `Z = L L^T` with `L` packed in `x`.
struct Point {
    x: Vec<f64>,
    z: DMatrix<f64>,
    eval: Eval,
    /// Gradient with respect to the packed factor.
    grad: Vec<f64>,
}

impl Point {
    fn new(s: &Congruence, shift: &DMatrix<f64>, x: Vec<f64>, d: usize, mu: f64) -> Option<Self> {
        let l = unpack_lower(&x, d);
        let linv = l.solve_lower_triangular(&DMatrix::identity(d, d))?;
        let mut zi = linv.transpose() * &linv;
        let mut z = &l * l.transpose();
        symmetrize(&mut zi);
        symmetrize(&mut z);
        if zi.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let eval = evaluate(s, shift, &z, &zi, mu);
        if !eval.smooth.is_finite() {
            return None;
        }
        let mut gz = s.apply(&eval.weight) - &zi * &eval.weight * &zi;
        symmetrize(&mut gz);
        let grad = pack_lower(&(gz * &l * 2.0));
        Some(Point { x, z, eval, grad })
    }
}

/// Full solution of the formula, including both branches and the bracket used
/// for the post-check.
pub fn lehner_solve(model: &CoefficientModel, tol: f64, max_outer: usize) -> Result<LehnerSolution> {
    if !model.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    let (plus, minus) = if model.is_centered() {
        (lehner_branch(model, 1.0, tol, max_outer)?, None)
    } else {
        let (p, m) = par::join(
            || lehner_branch(model, 1.0, tol, max_outer),
            || lehner_branch(model, -1.0, tol, max_outer),
        );
        (p?, Some(m?))
    };
    let norm = minus.as_ref().map_or(plus.value, |m| m.value.max(plus.value));
    let pisier = pisier_interval(model);
    let slack = 1e-9 * (1.0 + pisier.1);
    if norm < pisier.0 - slack || norm > pisier.1 + tol + slack {
        return Err(Error::PostCondition(format!(
            "free norm {norm} outside [{}, {}]",
            pisier.0, pisier.1
        )));
    }
    Ok(LehnerSolution { norm, plus, minus, pisier })
}

/// `||X_free||` to within `tol`.
pub fn lehner_norm(model: &CoefficientModel, tol: f64, max_outer: usize) -> Result<f64> {
    lehner_solve(model, tol, max_outer).map(|s| s.norm)
}

/// `lambda_max(X_free)`, the `eps = +1` branch alone.
pub fn free_lambda_max(model: &CoefficientModel, tol: f64, max_outer: usize) -> Result<f64> {
    lehner_branch(model, 1.0, tol, max_outer).map(|b| b.value)
}
