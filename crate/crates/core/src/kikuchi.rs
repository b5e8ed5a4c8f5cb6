//! Tensor PCA instances and Kikuchi matrices.
//!
//! Subsets of `{0..n}` are `u64` bitmasks (so `n <= 64`) and are ranked in
//! colexicographic order: the rank of `{c_1 < ... < c_k}` is
//! `sum_j binom(c_j, j)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::par;
use crate::rng::{self, derive_seed};

pub const MAX_KIKUCHI_DIM: u128 = 20_000;
/// Bound on the number of tensor entries of an instance.
pub const MAX_INSTANCE_ENTRIES: u128 = 50_000_000;
pub const DEFAULT_THRESHOLD: f64 = 2.1;
const DENSE_EIG_LIMIT: usize = 3000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
    }
    acc
}

pub fn colex_rank(mask: u64) -> u64 {
    let mut rank = 0u64;
    let mut m = mask;
    let mut j = 1;
    while m != 0 {
        let c = m.trailing_zeros() as usize;
        rank += binomial(c, j) as u64;
        m &= m - 1;
        j += 1;
    }
    rank
}

/// Inverse of [`colex_rank`] for `k`-subsets.
pub fn colex_unrank(mut rank: u64, k: usize) -> u64 {
    let mut mask = 0u64;
    for j in (1..=k).rev() {
        let mut c = j - 1;
        while binomial(c + 1, j) as u64 <= rank {
            c += 1;
        }
        rank -= binomial(c, j) as u64;
        mask |= 1 << c;
    }
    mask
}

/// All `k`-subsets of the set bits of `pool`, in colex order.
fn subsets_of(pool: u64, k: usize) -> Vec<u64> {
    let elems: Vec<u32> = (0..64).filter(|b| pool >> b & 1 == 1).collect();
    let count = binomial(elems.len(), k) as u64;
    (0..count)
        .map(|r| {
            let local = colex_unrank(r, k);
            let mut m = 0u64;
            let mut l = local;
            while l != 0 {
                m |= 1 << elems[l.trailing_zeros() as usize];
                l &= l - 1;
            }
            m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KikuchiInstance {
    pub n: usize,
    pub r: usize,
    pub lambda: f64,
    pub x: Vec<i8>,
    /// Noise on the `r`-subset of colex rank `k`.
    pub noise: Vec<f64>,
}

impl KikuchiInstance {
    /// `Y_S = lambda prod_{i in S} x_i + Z_S`.
    pub fn entry(&self, subset: u64) -> f64 {
        let mut sign = 1.0;
        let mut m = subset;
        while m != 0 {
            sign *= self.x[m.trailing_zeros() as usize] as f64;
            m &= m - 1;
        }
        self.lambda * sign + self.noise[colex_rank(subset) as usize]
    }

    pub fn without_noise(&self) -> Self {
        KikuchiInstance { noise: vec![0.0; self.noise.len()], ..self.clone() }
    }

    pub fn with_signal(&self, x: Vec<i8>) -> Result<Self> {
        check_signal(&x, self.n)?;
        Ok(KikuchiInstance { x, ..self.clone() })
    }
}

fn check_signal(x: &[i8], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: x.len() });
    }
    if x.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::invalid("signal entries must be +1 or -1"));
    }
    Ok(())
}

/// Spiked tensor `Y = lambda x^{(r)} + Z` with iid standard Gaussian noise
/// on the `r`-subsets. The signal is uniform on the hypercube unless given.
pub fn generate_instance(n: usize, r: usize, lambda: f64, seed: u64, x: Option<Vec<i8>>) -> Result<KikuchiInstance> {
    if r < 2 || r % 2 == 1 || r > n {
        return Err(Error::invalid(format!("need even r with 2 <= r <= n, got r={r}, n={n}")));
    }
    if n > 64 {
        return Err(Error::invalid(format!("n must be <= 64, got {n}")));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let entries = binomial(n, r);
    if entries > MAX_INSTANCE_ENTRIES {
        return Err(Error::SizeLimit { what: "binom(n, r)", value: entries, limit: MAX_INSTANCE_ENTRIES });
    }
    let x = match x {
        Some(x) => {
            check_signal(&x, n)?;
            x
        }
        None => (0..n as u64).map(|i| rng::sign(derive_seed(seed, 1), i) as i8).collect(),
    };
    let noise = rng::normals(derive_seed(seed, 0), entries as usize);
    Ok(KikuchiInstance { n, r, lambda, x, noise })
}

fn check_level(n: usize, r: usize, l: usize) -> Result<()> {
    if r % 2 == 1 || r / 2 > l || l + r / 2 > n || n > 64 {
        return Err(Error::invalid(format!("need r/2 <= l <= n - r/2 and n <= 64, got n={n}, r={r}, l={l}")));
    }
    Ok(())
}

/// `d_l = binom(l, r/2) binom(n - l, r/2)`, the degree of the Kikuchi graph.
pub fn kikuchi_degree(n: usize, r: usize, l: usize) -> Result<u128> {
    check_level(n, r, l)?;
    Ok(binomial(l, r / 2) * binomial(n - l, r / 2))
}

fn check_dim(n: usize, l: usize) -> Result<usize> {
    let dim = binomial(n, l);
    if dim > MAX_KIKUCHI_DIM {
        return Err(Error::SizeLimit { what: "binom(n, l)", value: dim, limit: MAX_KIKUCHI_DIM });
    }
    Ok(dim as usize)
}

/// Neighbours `J` of `I` with `|I xor J| = r`, as `(J, I xor J)`.
fn neighbours(i: u64, n: usize, r: usize) -> Vec<(u64, u64)> {
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let drop = subsets_of(i, r / 2);
    let add = subsets_of(full & !i, r / 2);
    let mut out = Vec::with_capacity(drop.len() * add.len());
    for &s in &drop {
        for &t in &add {
            out.push((i ^ s ^ t, s | t));
        }
    }
    out
}

/// Symmetric Kikuchi matrix in CSR form, rows and columns indexed by the
/// colex rank of `l`-subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct KikuchiMatrix {
    pub dim: usize,
    pub degree: u128,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl KikuchiMatrix {
    pub fn row_nnz(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let range = self.row_ptr[row]..self.row_ptr[row + 1];
            *out = self.col_idx[range.clone()].iter().zip(&self.values[range]).map(|(&c, v)| v * x[c]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for row in 0..self.dim {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                m[(row, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    pub fn lambda_max(&self) -> f64 {
        if self.dim <= DENSE_EIG_LIMIT {
            return linalg::lambda_max(&self.to_dense());
        }
        let start: Vec<f64> = (0..self.dim as u64).map(|k| rng::normal(0x6b31, k)).collect();
        linalg::lanczos_top(self.dim, &start, 400, |x, y| self.mul_vec(x, y))
    }
}

/// `M_{I,J} = Y_{I xor J}` when `|I xor J| = r`, zero otherwise.
pub fn build_kikuchi(instance: &KikuchiInstance, l: usize) -> Result<KikuchiMatrix> {
    let (n, r) = (instance.n, instance.r);
    let degree = kikuchi_degree(n, r, l)?;
    let dim = check_dim(n, l)?;
    let rows = par::map_range(dim, |row| {
        let i = colex_unrank(row as u64, l);
        let mut entries: Vec<(usize, f64)> = neighbours(i, n, r)
            .into_iter()
            .map(|(j, diff)| (colex_rank(j) as usize, instance.entry(diff)))
            .collect();
        entries.sort_by_key(|e| e.0);
        entries
    });
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for row in rows {
        for (c, v) in row {
            col_idx.push(c);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(KikuchiMatrix { dim, degree, row_ptr, col_idx, values })
}

/// Verifies `sum_K 1{|I xor K| = r} 1{I xor K = K xor J} = d_l 1{I = J}`
/// for all pairs of `l`-subsets.
pub fn isotropy_certificate(n: usize, r: usize, l: usize) -> Result<bool> {
    let degree = kikuchi_degree(n, r, l)?;
    let dim = check_dim(n, l)?;
    let ok = par::map_range(dim, |row| {
        let i = colex_unrank(row as u64, l);
        let mut counts: std::collections::BTreeMap<u64, u128> = std::collections::BTreeMap::new();
        for (k, ik) in neighbours(i, n, r) {
            for (j, kj) in neighbours(k, n, r) {
                if ik == kj {
                    *counts.entry(j).or_insert(0) += 1;
                }
            }
        }
        counts.len() == 1 && counts.get(&i) == Some(&degree)
    });
    Ok(ok.into_iter().all(|b| b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub lambda_max: f64,
    /// `lambda_max / sqrt(d_l)`.
    pub statistic: f64,
    pub detected: bool,
}

pub fn kikuchi_detect(instance: &KikuchiInstance, l: usize, threshold: f64) -> Result<Detection> {
    let m = build_kikuchi(instance, l)?;
    let lambda_max = m.lambda_max();
    let statistic = lambda_max / (m.degree as f64).sqrt();
    Ok(Detection { lambda_max, statistic, detected: statistic > threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionRow {
    pub trial: usize,
    pub lambda: f64,
    pub statistic: f64,
    pub detected: bool,
}

/// Independent detection runs with per-trial seeds `derive_seed(seed, trial)`.
pub fn detection_trials(
    n: usize,
    r: usize,
    l: usize,
    lambda: f64,
    trials: usize,
    seed: u64,
    threshold: f64,
) -> Result<Vec<DetectionRow>> {
    check_level(n, r, l)?;
    check_dim(n, l)?;
    par::map_range(trials, |t| {
        let inst = generate_instance(n, r, lambda, derive_seed(seed, t as u64), None)?;
        let det = kikuchi_detect(&inst, l, threshold)?;
        Ok(DetectionRow { trial: t, lambda, statistic: det.statistic, detected: det.detected })
    })
    .into_iter()
    .collect()
}

pub fn detection_csv(rows: &[DetectionRow]) -> String {
    let mut out = String::from("trial,lambda,statistic,detected\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.trial, r.lambda, r.statistic, r.detected));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colex_roundtrip() {
        for k in 0..5 {
            for rank in 0..binomial(9, k) as u64 {
                let m = colex_unrank(rank, k);
                assert_eq!(m.count_ones() as usize, k);
                assert!(m < 1 << 9);
                assert_eq!(colex_rank(m), rank);
            }
        }
        assert_eq!(colex_unrank(0, 2), 0b11);
        assert_eq!(colex_unrank(1, 2), 0b101);
        assert_eq!(colex_unrank(2, 2), 0b110);
    }

    #[test]
    fn degrees() {
        assert_eq!(kikuchi_degree(10, 4, 2).unwrap(), 28);
        assert_eq!(kikuchi_degree(8, 2, 1).unwrap(), 7);
        assert_eq!(kikuchi_degree(4, 4, 2).unwrap(), 1);
        assert!(kikuchi_degree(4, 4, 1).is_err());
        assert!(kikuchi_degree(4, 3, 2).is_err());
    }

    #[test]
    fn support_is_regular() {
        let inst = generate_instance(10, 4, 0.0, 1, None).unwrap();
        let m = build_kikuchi(&inst, 2).unwrap();
        assert_eq!(m.dim, 45);
        assert!((0..m.dim).all(|row| m.row_nnz(row) == 28));
        let dense = m.to_dense();
        assert_eq!(dense, dense.transpose());
        assert!((0..m.dim).all(|i| dense[(i, i)] == 0.0));
    }

    #[test]
    fn pure_signal_top_eigenvalue() {
        let inst = generate_instance(8, 2, 1.0, 3, Some(vec![1; 8])).unwrap().without_noise();
        let m = build_kikuchi(&inst, 2).unwrap();
        assert!((m.lambda_max() - m.degree as f64).abs() < 1e-9);
        let det = kikuchi_detect(&inst, 2, DEFAULT_THRESHOLD).unwrap();
        assert!((det.statistic - (m.degree as f64).sqrt()).abs() < 1e-9 && det.detected);
    }

    #[test]
    fn signal_gauge_and_sign_symmetry() {
        let inst = generate_instance(9, 4, 0.7, 5, None).unwrap();
        let flipped: Vec<i8> = inst.x.iter().map(|s| -s).collect();
        let other = inst.with_signal(flipped).unwrap();
        for rank in 0..binomial(9, 4) as u64 {
            let s = colex_unrank(rank, 4);
            assert_eq!(inst.entry(s), other.entry(s));
        }
    }

    #[test]
    fn instance_statistics() {
        let inst = generate_instance(12, 4, 0.0, 11, None).unwrap();
        let n = inst.noise.len() as f64;
        let mean = inst.noise.iter().sum::<f64>() / n;
        let var = inst.noise.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.1, "{var}");
        assert_eq!(inst, generate_instance(12, 4, 0.0, 11, None).unwrap());
        let big = generate_instance(6, 2, 100.0, 2, Some(vec![1; 6])).unwrap();
        assert!(big.noise.iter().zip(0..).all(|(_, k)| (big.entry(colex_unrank(k, 2)) - 100.0).abs() < 7.0));
        assert!(generate_instance(5, 3, 1.0, 0, None).is_err());
    }

    #[test]
    fn isotropy_small() {
        for (n, r, l) in [(8, 4, 2), (8, 2, 1), (4, 4, 2), (10, 4, 2), (7, 2, 3)] {
            assert!(isotropy_certificate(n, r, l).unwrap(), "{n} {r} {l}");
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let inst = generate_instance(12, 2, 0.5, 4, None).unwrap();
        let m = build_kikuchi(&inst, 3).unwrap();
        let start: Vec<f64> = (0..m.dim as u64).map(|k| rng::normal(1, k)).collect();
        let lz = linalg::lanczos_top(m.dim, &start, 400, |x, y| m.mul_vec(x, y));
        assert!((lz - m.lambda_max()).abs() < 1e-8);
    }

    #[test]
    fn size_guard() {
        let inst = generate_instance(40, 2, 0.0, 0, None).unwrap();
        assert!(matches!(build_kikuchi(&inst, 5), Err(Error::SizeLimit { .. })));
    }
}
