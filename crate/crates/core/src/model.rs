//! Explicit Gaussian matrix models `X = A0 + sum_k g_k A_k`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// A coefficient matrix stored as sorted `(row, col, value)` triplets.
///
/// Builtin models such as `wigner(d)` have `O(d^2)` coefficients with at most
/// two nonzeros each, so dense storage would be quadratic in memory per
/// coefficient. Dense inputs convert losslessly (zeros are dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CoefMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CoefMatrix { rows, cols, entries: Vec::new() }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        CoefMatrix { rows: m.nrows(), cols: m.ncols(), entries }
    }

    /// Builds from triplets; positions must be in range and unique.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= rows || j >= cols) {
            return Err(Error::DimensionMismatch(format!(
                "triplet ({i}, {j}) outside {rows}x{cols}"
            )));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::invalid(format!("duplicate triplet at ({}, {})", w[0].0, w[0].1)));
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(CoefMatrix { rows, cols, entries })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        CoefMatrix { rows: self.cols, cols: self.rows, entries }
    }

    /// Exact entrywise symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.entries.iter().all(|&(i, j, v)| self.get(j, i) == v)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(i, j, v)| (i, j, c * v))
            .filter(|e| e.2 != 0.0)
            .collect();
        CoefMatrix { rows: self.rows, cols: self.cols, entries }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.2 * e.2).sum()
    }

    /// Frobenius inner product `Tr(self^T other)`.
    pub fn frobenius_dot(&self, other: &CoefMatrix) -> f64 {
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        let (x, y) = (&self.entries, &other.entries);
        while a < x.len() && b < y.len() {
            match (x[a].0, x[a].1).cmp(&(y[b].0, y[b].1)) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += x[a].2 * y[b].2;
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// `out += c * self`.
    pub fn add_scaled_to(&self, out: &mut DMatrix<f64>, c: f64) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += c * v;
        }
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// `self^T * x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        for &(i, j, v) in &self.entries {
            y[j] += v * x[i];
        }
        y
    }

    /// `out = p * self` for a dense `p` with `self.rows` columns.
    pub fn right_mul_into(&self, p: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for &(a, b, v) in &self.entries {
            let src = p.column(a);
            let mut dst = out.column_mut(b);
            dst.axpy(v, &src, 1.0);
        }
    }

    /// `self * self^T`, accumulated into `out`.
    pub fn add_gram_rows_to(&self, out: &mut DMatrix<f64>) {
        // group by column: (A A^T)_{ij} = sum_c A_ic A_jc
        let t = self.transpose();
        add_grouped_outer(&t.entries, out);
    }

    /// `self^T * self`, accumulated into `out`.
    pub fn add_gram_cols_to(&self, out: &mut DMatrix<f64>) {
        add_grouped_outer(&self.entries, out);
    }
}

/// For entries sorted by their first index, adds `sum_g v_g v_g^T` where
/// `v_g` collects `(second index, value)` of each group.
fn add_grouped_outer(entries: &[(usize, usize, f64)], out: &mut DMatrix<f64>) {
    let mut start = 0;
    while start < entries.len() {
        let key = entries[start].0;
        let mut end = start;
        while end < entries.len() && entries[end].0 == key {
            end += 1;
        }
        let group = &entries[start..end];
        for &(_, a, va) in group {
            for &(_, b, vb) in group {
                out[(a, b)] += va * vb;
            }
        }
        start = end;
    }
}

/// A validated Gaussian matrix model.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientModel {
    d1: usize,
    d2: usize,
    self_adjoint: bool,
    a0: DMatrix<f64>,
    coefficients: Vec<CoefMatrix>,
}

/// Named model families.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// Standard Wigner matrix: iid `N(0, 1/d)` entries on and above the diagonal.
    Wigner { d: usize },
    /// Diagonal matrix with iid standard Gaussian diagonal.
    Diagonal { d: usize },
    /// Unit-variance entries on the band `|i - j| <= bandwidth`.
    Band { d: usize, bandwidth: i64 },
    /// `lambda v v^T + W` with `W` standard Wigner and `|v| = 1`.
    SpikedWigner { d: usize, lambda: f64, v: Vec<f64> },
}

impl CoefficientModel {
    /// Validates dimensions (and exact symmetry when `self_adjoint`).
    pub fn new(
        d1: usize,
        d2: usize,
        self_adjoint: bool,
        a0: DMatrix<f64>,
        coefficients: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        for (k, c) in coefficients.iter().enumerate() {
            if c.shape() != (d1, d2) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {} is {}x{}, expected {d1}x{d2}",
                    k + 1,
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        let coefs = coefficients.iter().map(CoefMatrix::from_dense).collect();
        Self::from_parts(d1, d2, self_adjoint, a0, coefs)
    }

    pub fn from_parts(
        d1: usize,
        d2: usize,
        self_adjoint: bool,
        a0: DMatrix<f64>,
        coefficients: Vec<CoefMatrix>,
    ) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::DimensionMismatch("dimensions must be positive".into()));
        }
        if self_adjoint && d1 != d2 {
            return Err(Error::DimensionMismatch(format!(
                "self-adjoint model must be square, got {d1}x{d2}"
            )));
        }
        if a0.shape() != (d1, d2) {
            return Err(Error::DimensionMismatch(format!(
                "A0 is {}x{}, expected {d1}x{d2}",
                a0.nrows(),
                a0.ncols()
            )));
        }
        for (k, c) in coefficients.iter().enumerate() {
            if c.shape() != (d1, d2) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {} is {}x{}, expected {d1}x{d2}",
                    k + 1,
                    c.rows,
                    c.cols
                )));
            }
        }
        if self_adjoint {
            if a0 != a0.transpose() {
                return Err(Error::AsymmetricCoefficient { index: 0 });
            }
            if let Some(k) = coefficients.iter().position(|c| !c.is_symmetric()) {
                return Err(Error::AsymmetricCoefficient { index: k + 1 });
            }
        }
        Ok(CoefficientModel { d1, d2, self_adjoint, a0, coefficients })
    }

    /// The deterministic model `X = a0`.
    pub fn deterministic(a0: DMatrix<f64>, self_adjoint: bool) -> Result<Self> {
        let (d1, d2) = a0.shape();
        Self::from_parts(d1, d2, self_adjoint, a0, Vec::new())
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn coefficients(&self) -> &[CoefMatrix] {
        &self.coefficients
    }

    /// Number of Gaussian coefficients `n`.
    pub fn n(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_centered(&self) -> bool {
        self.a0.iter().all(|&x| x == 0.0)
    }

    /// Same coefficients with `A0 = 0`.
    pub fn centered(&self) -> Self {
        CoefficientModel { a0: DMatrix::zeros(self.d1, self.d2), ..self.clone() }
    }

    /// Same model with the mean replaced.
    pub fn with_a0(&self, a0: DMatrix<f64>) -> Result<Self> {
        Self::from_parts(self.d1, self.d2, self.self_adjoint, a0, self.coefficients.clone())
    }

    /// All matrices (mean and coefficients) multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        CoefficientModel {
            a0: &self.a0 * c,
            coefficients: self.coefficients.iter().map(|m| m.scaled(c)).collect(),
            ..self.clone()
        }
    }

    /// Coefficient list replaced (same mean and shape).
    pub fn with_coefficients(&self, coefficients: Vec<CoefMatrix>) -> Result<Self> {
        Self::from_parts(self.d1, self.d2, self.self_adjoint, self.a0.clone(), coefficients)
    }

    /// One draw of `A0 + sum_k g_k A_k` with `g_k = rng::normal(seed, k)`.
    pub fn sample(&self, seed: u64) -> DMatrix<f64> {
        let mut x = self.a0.clone();
        for (k, c) in self.coefficients.iter().enumerate() {
            c.add_scaled_to(&mut x, rng::normal(seed, k as u64));
        }
        x
    }

    /// Sample of the model, dilated first when it is not self-adjoint.
    pub fn sample_symmetric(&self, seed: u64) -> DMatrix<f64> {
        let x = self.sample(seed);
        if self.self_adjoint {
            x
        } else {
            linalg::dilate(&x)
        }
    }

    /// The self-adjoint `(d1 + d2)`-dimensional model with every matrix `M`
    /// replaced by `[[0, M], [M^T, 0]]`.
    pub fn hermitian_dilation(&self) -> Self {
        let d1 = self.d1;
        let dilate_coef = |c: &CoefMatrix| {
            let mut entries = Vec::with_capacity(2 * c.nnz());
            for &(i, j, v) in &c.entries {
                entries.push((i, d1 + j, v));
                entries.push((d1 + j, i, v));
            }
            entries.sort_by_key(|e| (e.0, e.1));
            CoefMatrix { rows: self.d1 + self.d2, cols: self.d1 + self.d2, entries }
        };
        CoefficientModel {
            d1: self.d1 + self.d2,
            d2: self.d1 + self.d2,
            self_adjoint: true,
            a0: linalg::dilate(&self.a0),
            coefficients: self.coefficients.iter().map(dilate_coef).collect(),
        }
    }

    /// The model itself if self-adjoint, its dilation otherwise.
    pub fn symmetrized(&self) -> std::borrow::Cow<'_, Self> {
        if self.self_adjoint {
            std::borrow::Cow::Borrowed(self)
        } else {
            std::borrow::Cow::Owned(self.hermitian_dilation())
        }
    }

    /// `sum_k A_k A_k^T` (d1 x d1).
    pub fn row_gram(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.d1, self.d1);
        for c in &self.coefficients {
            c.add_gram_rows_to(&mut s);
        }
        s
    }

    /// `sum_k A_k^T A_k` (d2 x d2).
    pub fn col_gram(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.d2, self.d2);
        for c in &self.coefficients {
            c.add_gram_cols_to(&mut s);
        }
        s
    }

    /// Dense copies of all coefficients.
    pub fn dense_coefficients(&self) -> Vec<DMatrix<f64>> {
        self.coefficients.iter().map(CoefMatrix::to_dense).collect()
    }

    pub fn builtin(spec: &Builtin) -> Result<Self> {
        match *spec {
            Builtin::Wigner { d } => {
                check_dim(d)?;
                Ok(wigner_with_mean(d, DMatrix::zeros(d, d)))
            }
            Builtin::Diagonal { d } => {
                check_dim(d)?;
                let coefs = (0..d)
                    .map(|i| CoefMatrix { rows: d, cols: d, entries: vec![(i, i, 1.0)] })
                    .collect();
                Ok(CoefficientModel { d1: d, d2: d, self_adjoint: true, a0: DMatrix::zeros(d, d), coefficients: coefs })
            }
            Builtin::Band { d, bandwidth } => {
                check_dim(d)?;
                if bandwidth < 0 {
                    return Err(Error::invalid(format!("bandwidth must be >= 0, got {bandwidth}")));
                }
                let b = bandwidth as usize;
                let mut coefs = Vec::new();
                for i in 0..d {
                    for j in i..d.min(i + b + 1) {
                        let entries = if i == j { vec![(i, i, 1.0)] } else { vec![(i, j, 1.0), (j, i, 1.0)] };
                        coefs.push(CoefMatrix { rows: d, cols: d, entries });
                    }
                }
                Ok(CoefficientModel { d1: d, d2: d, self_adjoint: true, a0: DMatrix::zeros(d, d), coefficients: coefs })
            }
            Builtin::SpikedWigner { d, lambda, ref v } => {
                check_dim(d)?;
                if v.len() != d {
                    return Err(Error::invalid(format!("spike vector has length {}, expected {d}", v.len())));
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(Error::invalid(format!("spike vector must be unit norm, got {norm}")));
                }
                if !lambda.is_finite() {
                    return Err(Error::invalid("spike strength must be finite"));
                }
                let vv = DVector::from_column_slice(v);
                let a0 = (&vv * vv.transpose()) * lambda;
                // exact symmetry of the stored mean
                let a0 = DMatrix::from_fn(d, d, |i, j| if i <= j { a0[(i, j)] } else { a0[(j, i)] });
                Ok(wigner_with_mean(d, a0))
            }
        }
    }

    /// Gaussian model with the mean `y0` and the total covariance of the
    /// independent centered summands.
    pub fn gaussian_surrogate(y0: &DMatrix<f64>, summands: &[DiscreteMatrixSummand]) -> Result<Self> {
        let d = y0.nrows();
        if !y0.is_square() {
            return Err(Error::DimensionMismatch("Y0 must be square".into()));
        }
        if y0 != &y0.transpose() {
            return Err(Error::AsymmetricCoefficient { index: 0 });
        }
        for (i, s) in summands.iter().enumerate() {
            if s.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "summand {} has dimension {}, expected {d}",
                    i + 1,
                    s.dim()
                )));
            }
            let mean_norm = s.mean().abs().max();
            if mean_norm > 1e-12 {
                return Err(Error::NonCenteredSummand { index: i + 1, mean_norm });
            }
        }
        let cov = summands_covariance(d, summands);
        let mut coefs = Vec::new();
        if !summands.is_empty() && d > 0 {
            let eig = SymmetricEigen::new(cov);
            let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            for idx in order {
                let lam = eig.eigenvalues[idx];
                if top <= 0.0 || lam <= 1e-12 * top {
                    continue;
                }
                let u = eig.eigenvectors.column(idx);
                let m = DMatrix::from_column_slice(d, d, u.as_slice()) * lam.sqrt();
                let sym = DMatrix::from_fn(d, d, |i, j| {
                    let (a, b) = (i.min(j), i.max(j));
                    0.5 * (m[(a, b)] + m[(b, a)])
                });
                coefs.push(CoefMatrix::from_dense(&sym));
            }
        }
        Self::from_parts(d, d, true, y0.clone(), coefs)
    }

    /// `sum_k vec(A_k) vec(A_k)^T` in column-major `vec` order.
    pub fn entry_covariance(&self) -> DMatrix<f64> {
        let dd = self.d1 * self.d2;
        let mut cov = DMatrix::zeros(dd, dd);
        for c in &self.coefficients {
            for &(i, j, v) in &c.entries {
                for &(k, l, w) in &c.entries {
                    cov[(i + j * self.d1, k + l * self.d1)] += v * w;
                }
            }
        }
        cov
    }

    /// Random model with iid `N(0, 1/max(d1,d2))` entries in every
    /// coefficient (symmetrized when `self_adjoint`) and, if `with_mean`, a
    /// random mean of the same law. Used to build seeded test corpora.
    pub fn random_gaussian(d1: usize, d2: usize, n: usize, self_adjoint: bool, with_mean: bool, seed: u64) -> Result<Self> {
        if self_adjoint && d1 != d2 {
            return Err(Error::DimensionMismatch("self-adjoint model must be square".into()));
        }
        let scale = 1.0 / (d1.max(d2) as f64).sqrt();
        let draw = |stream: u64| {
            let s = rng::derive_seed(seed, stream);
            DMatrix::from_fn(d1, d2, |i, j| {
                let (a, b) = if self_adjoint { (i.min(j), i.max(j)) } else { (i, j) };
                scale * rng::normal(s, (a * d2 + b) as u64)
            })
        };
        let a0 = if with_mean { draw(0) } else { DMatrix::zeros(d1, d2) };
        let coefs = (1..=n as u64).map(draw).collect();
        Self::new(d1, d2, self_adjoint, a0, coefs)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 1 {
        Err(Error::invalid("dimension must be >= 1"))
    } else {
        Ok(())
    }
}

fn wigner_with_mean(d: usize, a0: DMatrix<f64>) -> CoefficientModel {
    let s = 1.0 / (d as f64).sqrt();
    let mut coefs = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let entries = if i == j { vec![(i, i, s)] } else { vec![(i, j, s), (j, i, s)] };
            coefs.push(CoefMatrix { rows: d, cols: d, entries });
        }
    }
    CoefficientModel { d1: d, d2: d, self_adjoint: true, a0, coefficients: coefs }
}

/// Draw of a standard Wigner matrix, bit-identical to
/// `CoefficientModel::builtin(&Builtin::Wigner { d }).sample(seed)` but
/// without materializing the coefficient list.
pub fn sample_wigner(d: usize, seed: u64) -> DMatrix<f64> {
    let s = 1.0 / (d as f64).sqrt();
    let mut x = DMatrix::zeros(d, d);
    let mut k = 0u64;
    for i in 0..d {
        for j in i..d {
            let g = rng::normal(seed, k);
            x[(i, j)] += g * s;
            if i != j {
                x[(j, i)] += g * s;
            }
            k += 1;
        }
    }
    x
}

/// A centered random symmetric matrix with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMatrixSummand {
    atoms: Vec<(f64, DMatrix<f64>)>,
}

impl DiscreteMatrixSummand {
    pub fn new(atoms: Vec<(f64, DMatrix<f64>)>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::invalid("summand needs at least one atom"));
        };
        let d = first.1.nrows();
        let mut total = 0.0;
        for (idx, (p, m)) in atoms.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::invalid(format!("atom probability {p} outside [0, 1]")));
            }
            if m.shape() != (d, d) {
                return Err(Error::DimensionMismatch(format!("atom {} is not {d}x{d}", idx + 1)));
            }
            if m != &m.transpose() {
                return Err(Error::AsymmetricCoefficient { index: idx + 1 });
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("atom probabilities sum to {total}")));
        }
        let s = DiscreteMatrixSummand { atoms };
        let mean_norm = s.mean().abs().max();
        if mean_norm > 1e-12 {
            return Err(Error::NonCenteredSummand { index: 0, mean_norm });
        }
        Ok(s)
    }

    /// Uniform on `{a, -a}`.
    pub fn rademacher(a: DMatrix<f64>) -> Result<Self> {
        let neg = -a.clone();
        Self::new(vec![(0.5, a), (0.5, neg)])
    }

    pub fn atoms(&self) -> &[(f64, DMatrix<f64>)] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].1.nrows()
    }

    pub fn mean(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.atoms.iter().fold(DMatrix::zeros(d, d), |acc, (p, m)| acc + m * *p)
    }

    /// Largest atom norm (the almost-sure bound `R` of the summand).
    pub fn norm_bound(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| linalg::sym_spectral_norm(m)).fold(0.0, f64::max)
    }
}

/// `sum_i Cov(vec Y_i)` for centered summands, column-major `vec`.
pub fn summands_covariance(d: usize, summands: &[DiscreteMatrixSummand]) -> DMatrix<f64> {
    let mut cov = DMatrix::zeros(d * d, d * d);
    for s in summands {
        for (p, m) in &s.atoms {
            let v = DVector::from_column_slice(m.as_slice());
            cov.ger(*p, &v, &v, 1.0);
        }
    }
    cov
}
