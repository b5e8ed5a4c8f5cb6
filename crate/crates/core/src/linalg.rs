//! Dense and sparse spectral helpers on top of nalgebra.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest dimension for which a dense Gram matrix is formed in
/// [`sparse_spectral_norm`]; above it the Lanczos path is used.
pub const DENSE_GRAM_LIMIT: usize = 1500;

fn offdiag_is_zero(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == 0.0))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    debug_assert!(m.is_square());
    let mut vals: Vec<f64> = if offdiag_is_zero(m) {
        m.diagonal().iter().copied().collect()
    } else {
        m.clone().symmetric_eigenvalues().iter().copied().collect()
    };
    vals.sort_by(f64::total_cmp);
    vals
}

/// Spectral norm of a symmetric matrix, `max |lambda_i|`.
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let vals = sym_eigenvalues(m);
    vals[0].abs().max(vals[vals.len() - 1].abs())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    *sym_eigenvalues(m).last().unwrap_or(&0.0)
}

/// Top eigenpair of a symmetric matrix (unit eigenvector).
pub fn top_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (eig.eigenvalues[idx], eig.eigenvectors.column(idx).into_owned())
}

/// Spectral norm (largest singular value) of an arbitrary dense matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.is_square() && m == &m.transpose() {
        return sym_spectral_norm(m);
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `[[0, m], [m^T, 0]]`.
pub fn dilate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(r + c, r + c);
    out.view_mut((0, r), (r, c)).copy_from(m);
    out.view_mut((r, 0), (c, r)).copy_from(&m.transpose());
    out
}

/// Normalized trace `Tr(m) / dim`.
pub fn normalized_trace(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.trace() / m.nrows() as f64
}

/// Top eigenvalue of a symmetric operator given by its action, via Lanczos
/// with full reorthogonalization. `start` seeds the Krylov space.
pub fn lanczos_top<F>(dim: usize, start: &[f64], max_steps: usize, apply: F) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    assert_eq!(start.len(), dim);
    if dim == 0 {
        return 0.0;
    }
    let norm = start.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / norm).collect()];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut prev_top = f64::NEG_INFINITY;
    let steps = max_steps.min(dim).max(1);
    for j in 0..steps {
        apply(&basis[j], &mut w);
        let alpha: f64 = w.iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
        alphas.push(alpha);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let k = alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let top = lambda_max(&t);
        let converged = (top - prev_top).abs() <= 1e-14 * top.abs().max(1e-300) && j > 4;
        prev_top = top;
        if converged || beta <= 1e-14 * top.abs().max(1e-300) || j + 1 == steps {
            return top;
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    prev_top
}

/// Spectral norm of a sparse matrix given as `(row, col, value)` triplets
/// over arbitrary (possibly huge) index spaces. Duplicate positions are summed.
pub fn sparse_spectral_norm(entries: &[(u64, u64, f64)]) -> f64 {
    let mut row_ids: HashMap<u64, usize> = HashMap::new();
    let mut col_ids: HashMap<u64, usize> = HashMap::new();
    let mut compact: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    for &(r, c, v) in entries {
        if v == 0.0 {
            continue;
        }
        let nr = row_ids.len();
        let ri = *row_ids.entry(r).or_insert(nr);
        let nc = col_ids.len();
        let ci = *col_ids.entry(c).or_insert(nc);
        compact.push((ri, ci, v));
    }
    let (nr, nc) = (row_ids.len(), col_ids.len());
    if nr == 0 || nc == 0 {
        return 0.0;
    }
    // Orient so that the Gram matrix lives on the smaller side.
    let (small, large, oriented): (usize, usize, Vec<(usize, usize, f64)>) = if nc <= nr {
        (nc, nr, compact)
    } else {
        (nr, nc, compact.into_iter().map(|(r, c, v)| (c, r, v)).collect())
    };
    // rows of `oriented` index the large side
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); large];
    for (r, c, v) in oriented {
        by_row[r].push((c, v));
    }
    if small <= DENSE_GRAM_LIMIT {
        let mut gram = DMatrix::<f64>::zeros(small, small);
        for row in &by_row {
            for &(a, va) in row {
                for &(b, vb) in row {
                    gram[(a, b)] += va * vb;
                }
            }
        }
        return lambda_max(&gram).max(0.0).sqrt();
    }
    let start: Vec<f64> = (0..small as u64)
        .map(|k| 1.0 + 0.5 * crate::rng::uniform(0x5eed, k))
        .collect();
    let top = lanczos_top(small, &start, 300, |x, y| {
        y.iter_mut().for_each(|v| *v = 0.0);
        for row in &by_row {
            let dot: f64 = row.iter().map(|&(c, v)| v * x[c]).sum();
            if dot != 0.0 {
                for &(c, v) in row {
                    y[c] += v * dot;
                }
            }
        }
    });
    top.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_fast_path_is_exact() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0, 2.0]));
        assert_eq!(sym_eigenvalues(&m), vec![-3.0, 1.0, 2.0]);
        assert_eq!(sym_spectral_norm(&m), 3.0);
    }

    #[test]
    fn dilation_preserves_norm() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0]);
        assert_relative_eq!(
            sym_spectral_norm(&dilate(&m)),
            spectral_norm(&m),
            epsilon = 1e-12
        );
    }

    #[test]
    fn sparse_norm_matches_dense() {
        let m = DMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let trip: Vec<(u64, u64, f64)> = (0..7)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| (i as u64 * 1000, j as u64 * 77, m[(i, j)]))
            .collect();
        assert_relative_eq!(sparse_spectral_norm(&trip), spectral_norm(&m), epsilon = 1e-10);
    }

    #[test]
    fn lanczos_matches_dense_eigensolver() {
        let n = 60;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            crate::rng::normal(9, (a * n + b) as u64)
        });
        let exact = lambda_max(&m);
        let start: Vec<f64> = (0..n).map(|k| 1.0 + k as f64 * 0.01).collect();
        let got = lanczos_top(n, &start, 200, |x, y| {
            let v = &m * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        });
        assert_relative_eq!(got, exact, epsilon = 1e-9);
    }
}
