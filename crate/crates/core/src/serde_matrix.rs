// SPDX-License-Identifier: MIT OR Apache-2.0

//! Serde adapters that write matrices as nested row arrays.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err("matrix must be non-empty".into());
    }
    if rows.iter().any(|r| r.len() != m) {
        return Err("matrix rows have unequal lengths".into());
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub mod rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

pub mod list {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let raw = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        raw.iter()
            .enumerate()
            .map(|(i, r)| from_rows(r).map_err(|e| D::Error::custom(format!("matrix {i}: {e}"))))
            .collect()
    }
}

pub mod opt_list {
    use super::*;

    pub fn serialize<S: Serializer>(
        ms: &Option<Vec<DMatrix<f64>>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        ms.as_ref()
            .map(|v| v.iter().map(to_rows).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<Vec<DMatrix<f64>>>, D::Error> {
        let raw = Option::<Vec<Vec<Vec<f64>>>>::deserialize(d)?;
        raw.map(|v| {
            v.iter()
                .enumerate()
                .map(|(i, r)| {
                    from_rows(r).map_err(|e| D::Error::custom(format!("matrix {i}: {e}")))
                })
                .collect()
        })
        .transpose()
    }
}
