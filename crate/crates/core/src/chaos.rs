//! Matrix chaos tensors and their flattenings.
//!
//! A tensor of order `q` has `q + 2` coordinates: `1..=q` are chaos
//! coordinates with range `m`, coordinate `q + 1` is the row index (range
//! `d1`) and `q + 2` the column index (range `d2`). Indices are 0-based in
//! storage and in tensor files; coordinate labels are 1-based.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundInputs, BoundReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CoefMatrix, CoefficientModel};
use crate::par;
use crate::rng::{self, derive_seed};

pub const MAX_ENTRIES: u128 = 20_000_000;
pub const MAX_DENSE_FLATTENING: u128 = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosTensor {
    q: usize,
    m: usize,
    d1: usize,
    d2: usize,
    entries: BTreeMap<Vec<usize>, f64>,
}

impl ChaosTensor {
    pub fn new(q: usize, m: usize, d1: usize, d2: usize) -> Result<Self> {
        if q == 0 || m == 0 || d1 == 0 || d2 == 0 {
            return Err(Error::invalid(format!("need q, m, d1, d2 >= 1, got {q}, {m}, {d1}, {d2}")));
        }
        Ok(ChaosTensor { q, m, d1, d2, entries: BTreeMap::new() })
    }

    pub fn from_entries(q: usize, m: usize, d1: usize, d2: usize, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let mut t = Self::new(q, m, d1, d2)?;
        for (idx, v) in entries {
            t.insert(idx, v)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, index: Vec<usize>, value: f64) -> Result<()> {
        if index.len() != self.q + 2 {
            return Err(Error::LengthMismatch { expected: self.q + 2, got: index.len() });
        }
        let ranges = self.ranges();
        if let Some(k) = (0..index.len()).find(|&k| index[k] >= ranges[k]) {
            return Err(Error::invalid(format!("coordinate {} index {} out of range {}", k + 1, index[k], ranges[k])));
        }
        if self.entries.contains_key(&index) {
            return Err(Error::invalid(format!("duplicate entry {index:?}")));
        }
        if value != 0.0 {
            self.entries.insert(index, value);
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn entries(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Ranges of coordinates `1..=q+2`.
    pub fn ranges(&self) -> Vec<usize> {
        let mut r = vec![self.m; self.q];
        r.push(self.d1);
        r.push(self.d2);
        r
    }

    /// Order-1 tensor of the coefficients `A_1..A_n` (the mean is dropped).
    pub fn from_model(model: &CoefficientModel) -> Self {
        let mut entries = BTreeMap::new();
        for (k, c) in model.coefficients().iter().enumerate() {
            for &(i, j, v) in c.entries() {
                entries.insert(vec![k, i, j], v);
            }
        }
        ChaosTensor { q: 1, m: model.n().max(1), d1: model.d1(), d2: model.d2(), entries }
    }

    /// Coefficient model of an order-1 tensor.
    pub fn to_model(&self, self_adjoint: bool) -> Result<CoefficientModel> {
        if self.q != 1 {
            return Err(Error::invalid("only order-1 tensors are Gaussian models"));
        }
        let mut per: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); self.m];
        for (idx, &v) in &self.entries {
            per[idx[0]].push((idx[1], idx[2], v));
        }
        let coefs = per
            .into_iter()
            .map(|e| CoefMatrix::from_triplets(self.d1, self.d2, e))
            .collect::<Result<Vec<_>>>()?;
        CoefficientModel::from_parts(self.d1, self.d2, self_adjoint, DMatrix::zeros(self.d1, self.d2), coefs)
    }
}

/// A partition flattening: `rows ∪ cols = {1..q+2}`, disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlatteningSpec {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl FlatteningSpec {
    pub fn new(mut rows: Vec<usize>, mut cols: Vec<usize>, q: usize) -> Result<Self> {
        rows.sort_unstable();
        cols.sort_unstable();
        let mut all: Vec<usize> = rows.iter().chain(&cols).copied().collect();
        all.sort_unstable();
        if all != (1..=q + 2).collect::<Vec<_>>() {
            return Err(Error::InvalidSpec(format!("{rows:?} | {cols:?} is not a partition of 1..={}", q + 2)));
        }
        Ok(FlatteningSpec { rows, cols })
    }

    pub fn transposed(&self) -> Self {
        FlatteningSpec { rows: self.cols.clone(), cols: self.rows.clone() }
    }
}

/// Mixed-radix code of the selected coordinates, first coordinate most
/// significant.
fn encode(index: &[usize], coords: &[usize], ranges: &[usize]) -> u64 {
    coords.iter().fold(0u64, |acc, &c| acc * ranges[c - 1] as u64 + index[c - 1] as u64)
}

fn extent(coords: &[usize], ranges: &[usize]) -> u128 {
    coords.iter().map(|&c| ranges[c - 1] as u128).product()
}

fn check_spec(t: &ChaosTensor, spec: &FlatteningSpec) -> Result<()> {
    FlatteningSpec::new(spec.rows.clone(), spec.cols.clone(), t.q).map(|_| ())
}

/// Nonzero entries of the flattening as `(row, col, value)`.
pub fn flatten_triplets(t: &ChaosTensor, spec: &FlatteningSpec) -> Result<Vec<(u64, u64, f64)>> {
    check_spec(t, spec)?;
    let ranges = t.ranges();
    if extent(&spec.rows, &ranges) > u64::MAX as u128 || extent(&spec.cols, &ranges) > u64::MAX as u128 {
        return Err(Error::SizeLimit { what: "flattening side", value: u128::MAX, limit: u64::MAX as u128 });
    }
    Ok(t.entries
        .iter()
        .map(|(idx, &v)| (encode(idx, &spec.rows, &ranges), encode(idx, &spec.cols, &ranges), v))
        .collect())
}

/// Dense flattening of shape `prod_{rows} range x prod_{cols} range`.
pub fn flatten(t: &ChaosTensor, spec: &FlatteningSpec) -> Result<DMatrix<f64>> {
    check_spec(t, spec)?;
    let ranges = t.ranges();
    let (nr, nc) = (extent(&spec.rows, &ranges), extent(&spec.cols, &ranges));
    if nr * nc > MAX_DENSE_FLATTENING {
        return Err(Error::SizeLimit { what: "dense flattening size", value: nr * nc, limit: MAX_DENSE_FLATTENING });
    }
    let mut out = DMatrix::zeros(nr as usize, nc as usize);
    for (r, c, v) in flatten_triplets(t, spec)? {
        out[(r as usize, c as usize)] = v;
    }
    Ok(out)
}

pub fn flattening_norm(t: &ChaosTensor, spec: &FlatteningSpec) -> Result<f64> {
    Ok(linalg::sparse_spectral_norm(&flatten_triplets(t, spec)?))
}

/// Splits with `q + 1` in the rows and `q + 2` in the columns.
pub fn sigma_specs(q: usize) -> Vec<FlatteningSpec> {
    (0u64..1 << q)
        .map(|mask| {
            let mut rows: Vec<usize> = (1..=q).filter(|c| mask >> (c - 1) & 1 == 1).collect();
            let mut cols: Vec<usize> = (1..=q).filter(|c| mask >> (c - 1) & 1 == 0).collect();
            rows.push(q + 1);
            cols.push(q + 2);
            FlatteningSpec::new(rows, cols, q).expect("valid split")
        })
        .collect()
}

/// Splits with both matrix coordinates in the columns and nonempty rows.
pub fn v_specs(q: usize) -> Vec<FlatteningSpec> {
    (1u64..1 << q)
        .map(|mask| {
            let rows: Vec<usize> = (1..=q).filter(|c| mask >> (c - 1) & 1 == 1).collect();
            let mut cols: Vec<usize> = (1..=q).filter(|c| mask >> (c - 1) & 1 == 0).collect();
            cols.extend([q + 1, q + 2]);
            FlatteningSpec::new(rows, cols, q).expect("valid split")
        })
        .collect()
}

fn max_norm(t: &ChaosTensor, specs: &[FlatteningSpec]) -> f64 {
    par::map_slice(specs, |s| flattening_norm(t, s).expect("valid split"))
        .into_iter()
        .fold(0.0, f64::max)
}

pub fn sigma_chaos(t: &ChaosTensor) -> f64 {
    max_norm(t, &sigma_specs(t.q))
}

pub fn v_chaos(t: &ChaosTensor) -> f64 {
    max_norm(t, &v_specs(t.q))
}

/// `C_q (sigma + ln(d1 + d2 + m)^{(q+2)/2} v)`.
pub fn iterated_bound(t: &ChaosTensor, c_q: f64) -> Result<BoundReport> {
    if !(c_q > 0.0) || !c_q.is_finite() {
        return Err(Error::invalid(format!("C_q must be finite and > 0, got {c_q}")));
    }
    let sigma = sigma_chaos(t);
    let v = v_chaos(t);
    let d = (t.d1 + t.d2 + t.m) as f64;
    let upper = c_q * (sigma + d.ln().powf((t.q + 2) as f64 / 2.0) * v);
    Ok(BoundReport {
        name: "matrix_chaos_iterated".into(),
        lower: None,
        upper: Some(upper),
        failure_probability: None,
        constant_assumed: c_q,
        log_base: "e",
        inputs: BoundInputs { sigma: Some(sigma), v: Some(v), d: Some(d), ..Default::default() },
    })
}

/// Seed of the Gaussian family feeding chaos coordinate `j` (0-based).
pub fn family_seed(seed: u64, j: usize) -> u64 {
    if j == 0 {
        seed
    } else {
        derive_seed(seed, j as u64)
    }
}

/// One draw of the chaos. Decoupled: independent families per coordinate,
/// all index tuples. Coupled: one family, tuples with distinct indices only
/// (`q <= 3`).
pub fn sample_chaos(t: &ChaosTensor, seed: u64, decoupled: bool) -> Result<DMatrix<f64>> {
    if !decoupled && t.q > 3 {
        return Err(Error::SizeLimit { what: "coupled chaos order", value: t.q as u128, limit: 3 });
    }
    let families = if decoupled { t.q } else { 1 };
    let g: Vec<Vec<f64>> = (0..families).map(|j| rng::normals(family_seed(seed, j), t.m)).collect();
    let mut out = DMatrix::zeros(t.d1, t.d2);
    for (idx, &v) in &t.entries {
        let chaos = &idx[..t.q];
        let weight = if decoupled {
            chaos.iter().enumerate().map(|(j, &i)| g[j][i]).product::<f64>()
        } else {
            let distinct = (0..t.q).all(|a| (a + 1..t.q).all(|b| chaos[a] != chaos[b]));
            if !distinct {
                continue;
            }
            chaos.iter().map(|&i| g[0][i]).product::<f64>()
        };
        out[(idx[t.q], idx[t.q + 1])] += weight * v;
    }
    Ok(out)
}

/// Order-2 tensor of `sum_i sum 1{(j1,k1) != (j2,k2)} g_{i j1 k1} g'_{i j2 k2}
/// e_{j1} (x) e_{j2} (x) e_{k1}^T (x) e_{k2}^T`, with chaos index
/// `(i, j, k) -> i d^2 + j d + k`, row `j1 d + j2` and column `k1 d + k2`.
pub fn sos_chaos_tensor(n: usize, d: usize) -> Result<ChaosTensor> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("need n, d >= 1"));
    }
    let count = n as u128 * (d * d) as u128 * ((d * d) as u128 - 1);
    if count > MAX_ENTRIES {
        return Err(Error::SizeLimit { what: "tensor entries", value: count, limit: MAX_ENTRIES });
    }
    let d2 = d * d;
    let mut entries = BTreeMap::new();
    for i in 0..n {
        for j1 in 0..d {
            for k1 in 0..d {
                for j2 in 0..d {
                    for k2 in 0..d {
                        if (j1, k1) != (j2, k2) {
                            let key = vec![i * d2 + j1 * d + k1, i * d2 + j2 * d + k2, j1 * d + j2, k1 * d + k2];
                            entries.insert(key, 1.0);
                        }
                    }
                }
            }
        }
    }
    Ok(ChaosTensor { q: 2, m: n * d2, d1: d2, d2, entries })
}

#[derive(Serialize, Deserialize)]
struct TensorFile {
    q: usize,
    m: usize,
    d1: usize,
    d2: usize,
    entries: Vec<Vec<f64>>,
}

pub fn tensor_to_json(t: &ChaosTensor) -> String {
    let file = TensorFile {
        q: t.q,
        m: t.m,
        d1: t.d1,
        d2: t.d2,
        entries: t
            .entries
            .iter()
            .map(|(idx, &v)| idx.iter().map(|&i| i as f64).chain(std::iter::once(v)).collect())
            .collect(),
    };
    serde_json::to_string(&file).expect("serializable")
}

pub fn tensor_from_json(text: &str) -> Result<ChaosTensor> {
    let file: TensorFile = serde_json::from_str(text)?;
    let mut t = ChaosTensor::new(file.q, file.m, file.d1, file.d2)?;
    for row in file.entries {
        if row.len() != file.q + 3 {
            return Err(Error::LengthMismatch { expected: file.q + 3, got: row.len() });
        }
        let (idx, v) = row.split_at(file.q + 2);
        let idx = idx
            .iter()
            .map(|&x| {
                if x >= 0.0 && x.fract() == 0.0 && x < usize::MAX as f64 {
                    Ok(x as usize)
                } else {
                    Err(Error::invalid(format!("index {x} is not a nonnegative integer")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        t.insert(idx, v[0])?;
    }
    Ok(t)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<ChaosTensor> {
    tensor_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_tensor(t: &ChaosTensor, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, tensor_to_json(t))?;
    Ok(())
}
