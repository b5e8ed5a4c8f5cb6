//! JSON model files.
//!
//! ```json
//! {"d1": 2, "d2": 2, "self_adjoint": true,
//!  "A0": [0, 0, 0, 0],
//!  "coefficients": [[0, 1, 1, 0], {"triplets": [[0, 0, 1.0]]}]}
//! ```
//!
//! `A0` and dense coefficients are row-major arrays of `d1 * d2` numbers;
//! sparse coefficients list 0-indexed `[i, j, value]` triplets. Writers emit
//! dense coefficients unless asked for triplets.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoefMatrix, CoefficientModel};

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    d1: usize,
    d2: usize,
    self_adjoint: bool,
    #[serde(rename = "A0")]
    a0: Vec<f64>,
    coefficients: Vec<CoefEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CoefEntry {
    Dense(Vec<f64>),
    Sparse { triplets: Vec<(usize, usize, f64)> },
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_row_major(d1: usize, d2: usize, data: &[f64], what: &str) -> Result<DMatrix<f64>> {
    if data.len() != d1 * d2 {
        return Err(Error::DimensionMismatch(format!(
            "{what} has {} numbers, expected {}",
            data.len(),
            d1 * d2
        )));
    }
    Ok(DMatrix::from_row_slice(d1, d2, data))
}

/// Serializes a model; `sparse` selects triplet coefficients.
pub fn model_to_json(model: &CoefficientModel, sparse: bool) -> String {
    let coefficients = model
        .coefficients()
        .iter()
        .map(|c| {
            if sparse {
                CoefEntry::Sparse { triplets: c.entries().to_vec() }
            } else {
                CoefEntry::Dense(row_major(&c.to_dense()))
            }
        })
        .collect();
    let file = ModelFile {
        d1: model.d1(),
        d2: model.d2(),
        self_adjoint: model.is_self_adjoint(),
        a0: row_major(model.a0()),
        coefficients,
    };
    serde_json::to_string(&file).expect("model serialization cannot fail")
}

pub fn model_from_json(text: &str) -> Result<CoefficientModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    let (d1, d2) = (file.d1, file.d2);
    let a0 = from_row_major(d1, d2, &file.a0, "A0")?;
    let coefficients = file
        .coefficients
        .into_iter()
        .enumerate()
        .map(|(k, c)| match c {
            CoefEntry::Dense(data) => {
                from_row_major(d1, d2, &data, &format!("coefficient {}", k + 1)).map(|m| CoefMatrix::from_dense(&m))
            }
            CoefEntry::Sparse { triplets } => CoefMatrix::from_triplets(d1, d2, triplets),
        })
        .collect::<Result<Vec<_>>>()?;
    CoefficientModel::from_parts(d1, d2, file.self_adjoint, a0, coefficients)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<CoefficientModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_model(model: &CoefficientModel, path: impl AsRef<Path>, sparse: bool) -> Result<()> {
    std::fs::write(path, model_to_json(model, sparse))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Builtin;

    #[test]
    fn dense_and_sparse_forms_agree() {
        let m = CoefficientModel::random_gaussian(3, 2, 3, false, true, 4).unwrap();
        assert_eq!(model_from_json(&model_to_json(&m, false)).unwrap(), m);
        assert_eq!(model_from_json(&model_to_json(&m, true)).unwrap(), m);
    }

    #[test]
    fn reads_mixed_coefficient_forms() {
        let text = r#"{"d1":2,"d2":2,"self_adjoint":true,"A0":[0,0,0,0],
            "coefficients":[[0,1,1,0],{"triplets":[[1,1,2.5]]}]}"#;
        let m = model_from_json(text).unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.coefficients()[0].get(0, 1), 1.0);
        assert_eq!(m.coefficients()[1].get(1, 1), 2.5);
    }

    #[test]
    fn rejects_bad_shapes() {
        let text = r#"{"d1":2,"d2":2,"self_adjoint":false,"A0":[0,0,0],"coefficients":[]}"#;
        assert!(matches!(model_from_json(text), Err(Error::DimensionMismatch(_))));
        let text = r#"{"d1":2,"d2":2,"self_adjoint":false,"A0":[0,0,0,0],"coefficients":[{"triplets":[[2,0,1]]}]}"#;
        assert!(matches!(model_from_json(text), Err(Error::DimensionMismatch(_))));
        let text = r#"{"d1":2,"d2":2,"self_adjoint":true,"A0":[0,0,0,0],"coefficients":[{"triplets":[[1,0,1]]}]}"#;
        assert!(matches!(model_from_json(text), Err(Error::AsymmetricCoefficient { index: 1 })));
    }

    #[test]
    fn wigner_file_roundtrip() {
        let m = CoefficientModel::builtin(&Builtin::Wigner { d: 4 }).unwrap();
        let back = model_from_json(&model_to_json(&m, false)).unwrap();
        assert_eq!(back, m);
    }
}
