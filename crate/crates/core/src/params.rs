//! Matrix concentration parameters of a Gaussian model.
//!
//! All parameters describe the centered part `X - EX`; the mean `A0` is
//! ignored throughout.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::linalg;
use crate::model::CoefficientModel;
use crate::par;
use crate::rng;

pub const DEFAULT_RESTARTS: usize = 16;
pub const DEFAULT_ITERS: usize = 200;
const SIGMA_STAR_SEED: u64 = 0x51_67_4A_57_A2;
const OBJECTIVE_TOL: f64 = 1e-12;

/// `sigma`, `v`, a bracket for `sigma_*`, and `v_tilde = sqrt(sigma v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParameters {
    pub sigma: f64,
    pub v: f64,
    pub sigma_star_lower: f64,
    pub sigma_star_upper: f64,
    pub v_tilde: f64,
}

/// `max(||sum A_k A_k^T||, ||sum A_k^T A_k||)^(1/2)`.
pub fn sigma(model: &CoefficientModel) -> f64 {
    if model.n() == 0 {
        return 0.0;
    }
    let rows = linalg::sym_spectral_norm(&model.row_gram());
    let cols = if model.is_self_adjoint() {
        rows
    } else {
        linalg::sym_spectral_norm(&model.col_gram())
    };
    rows.max(cols).sqrt()
}

/// `||cov(X)||^(1/2)`: the top singular value of the matrix whose rows are
/// `vec(A_k)`.
///
/// Coefficients whose supports never overlap contribute orthogonal rows, so
/// the Gram matrix splits into blocks along connected components of the
/// "shares a nonzero position" relation; each block is solved on whichever
/// side (coefficients or positions) is smaller.
pub fn v_param(model: &CoefficientModel) -> f64 {
    let coefs = model.coefficients();
    if coefs.is_empty() {
        return 0.0;
    }
    let d2 = model.d2();
    let mut parent: Vec<usize> = (0..coefs.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (k, c) in coefs.iter().enumerate() {
        for &(i, j, _) in c.entries() {
            let pos = i * d2 + j;
            match owner.get(&pos) {
                Some(&other) => {
                    let (a, b) = (find(&mut parent, k), find(&mut parent, other));
                    if a != b {
                        parent[a] = b;
                    }
                }
                None => {
                    owner.insert(pos, k);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for k in 0..coefs.len() {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(k);
    }
    let mut best: f64 = 0.0;
    for members in groups.values() {
        let mut positions: HashMap<usize, usize> = HashMap::new();
        for &k in members {
            for &(i, j, _) in coefs[k].entries() {
                let next = positions.len();
                positions.entry(i * d2 + j).or_insert(next);
            }
        }
        let top = if members.len() == 1 {
            coefs[members[0]].frobenius_sq()
        } else if members.len() <= positions.len() {
            let m = members.len();
            let mut gram = DMatrix::zeros(m, m);
            for a in 0..m {
                for b in a..m {
                    let g = coefs[members[a]].frobenius_dot(&coefs[members[b]]);
                    gram[(a, b)] = g;
                    gram[(b, a)] = g;
                }
            }
            linalg::lambda_max(&gram)
        } else {
            let p = positions.len();
            let mut cov = DMatrix::zeros(p, p);
            for &k in members {
                let ents = coefs[k].entries();
                for &(i, j, v) in ents {
                    let a = positions[&(i * d2 + j)];
                    for &(r, s, w) in ents {
                        cov[(a, positions[&(r * d2 + s)])] += v * w;
                    }
                }
            }
            linalg::lambda_max(&cov)
        };
        best = best.max(top);
    }
    best.max(0.0).sqrt()
}

/// `sum_k (A_k^T u)(A_k^T u)^T`, or the row-side analogue when `transpose`.
fn bilinear_gram(model: &CoefficientModel, u: &[f64], transpose: bool) -> DMatrix<f64> {
    let dim = if transpose { model.d1() } else { model.d2() };
    let mut m = DMatrix::zeros(dim, dim);
    let mut scratch = vec![0.0; dim];
    let mut touched: Vec<usize> = Vec::new();
    for c in model.coefficients() {
        for &(i, j, v) in c.entries() {
            let (src, dst) = if transpose { (j, i) } else { (i, j) };
            if u[src] != 0.0 {
                if scratch[dst] == 0.0 && !touched.contains(&dst) {
                    touched.push(dst);
                }
                scratch[dst] += v * u[src];
            }
        }
        for &a in &touched {
            for &b in &touched {
                m[(a, b)] += scratch[a] * scratch[b];
            }
        }
        for &a in &touched {
            scratch[a] = 0.0;
        }
        touched.clear();
    }
    m
}

fn unit_start(seed: u64, dim: usize) -> Vec<f64> {
    let mut u = rng::normals(seed, dim);
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= norm);
    u
}

/// One alternating-maximization run; returns the best `sum_k (u^T A_k v)^2`.
fn alternate(model: &CoefficientModel, seed: u64, iters: usize) -> f64 {
    let mut u = unit_start(seed, model.d1());
    let mut prev = f64::NEG_INFINITY;
    let mut best: f64 = 0.0;
    for _ in 0..iters.max(1) {
        let (_, v) = linalg::top_eigenpair(&bilinear_gram(model, &u, false));
        let (obj, u_next) = linalg::top_eigenpair(&bilinear_gram(model, v.as_slice(), true));
        u = u_next.as_slice().to_vec();
        best = best.max(obj);
        if (obj - prev).abs() <= OBJECTIVE_TOL * obj.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        prev = obj;
    }
    best
}

/// Bracket `(lower, upper)` for `sigma_*(X)`: the lower end is the best value
/// found by alternating top-eigenvector maximization over `restarts` random
/// starts, the upper end is `min(sigma, v)`.
pub fn sigma_star(model: &CoefficientModel, restarts: usize, iters: usize) -> (f64, f64) {
    sigma_star_seeded(model, restarts, iters, SIGMA_STAR_SEED)
}

pub fn sigma_star_seeded(model: &CoefficientModel, restarts: usize, iters: usize, seed: u64) -> (f64, f64) {
    let upper = sigma(model).min(v_param(model));
    if model.n() == 0 {
        return (0.0, 0.0);
    }
    let runs = par::map_range(restarts.max(1), |r| alternate(model, rng::derive_seed(seed, r as u64), iters));
    let lower = runs.into_iter().fold(0.0, f64::max).max(0.0).sqrt();
    (lower.min(upper), upper)
}

/// All parameters at once.
pub fn params_report(model: &CoefficientModel, restarts: usize, iters: usize) -> ModelParameters {
    let s = sigma(model);
    let v = v_param(model);
    let (lo, hi) = sigma_star(model, restarts, iters);
    ModelParameters { sigma: s, v, sigma_star_lower: lo, sigma_star_upper: hi, v_tilde: (s * v).sqrt() }
}
