//! JSON import/export of constant Jacobian sets.
//!
//! File schema: an object with `nu`, `mu`, and row-major nested arrays `f_x`,
//! `f_y`, `g_x`, `g_y`. The three algebraic blocks are omitted when `mu = 0`.
//! `name`, `x0`, `y0` are optional; missing evaluation points default to the
//! origin.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dae::JacobianSet;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct LinearModelFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    nu: usize,
    mu: usize,
    f_x: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_y: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_x: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_y: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y0: Option<Vec<f64>>,
}

/// A loaded linear model: constant Jacobians plus an optional display name.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub name: Option<String>,
    pub jacobians: JacobianSet,
}

fn matrix_from_rows(
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
    what: &str,
) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::Parse(format!(
            "{what}: expected {nrows} rows, got {}",
            rows.len()
        )));
    }
    let mut m = DMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Parse(format!(
                "{what}: row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Parse(format!("{what}: non-finite entry at ({i},{j})")));
            }
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Parse a linear model from a JSON string.
pub fn from_json_str(text: &str) -> Result<LinearModel> {
    let file: LinearModelFile = serde_json::from_str(text)?;
    let (nu, mu) = (file.nu, file.mu);
    if nu == 0 {
        return Err(Error::Parse("nu must be at least 1".into()));
    }

    let f_x = matrix_from_rows(&file.f_x, nu, nu, "f_x")?;
    let (f_y, g_x, g_y) = if mu > 0 {
        let need = |opt: &Option<Vec<Vec<f64>>>, what: &str| -> Result<Vec<Vec<f64>>> {
            opt.clone()
                .ok_or_else(|| Error::Parse(format!("{what} is required when mu > 0")))
        };
        (
            matrix_from_rows(&need(&file.f_y, "f_y")?, nu, mu, "f_y")?,
            matrix_from_rows(&need(&file.g_x, "g_x")?, mu, nu, "g_x")?,
            matrix_from_rows(&need(&file.g_y, "g_y")?, mu, mu, "g_y")?,
        )
    } else {
        for (opt, what) in [(&file.f_y, "f_y"), (&file.g_x, "g_x"), (&file.g_y, "g_y")] {
            if opt.as_ref().is_some_and(|m| !m.is_empty()) {
                return Err(Error::Parse(format!("{what} present but mu = 0")));
            }
        }
        (
            DMatrix::zeros(nu, 0),
            DMatrix::zeros(0, nu),
            DMatrix::zeros(0, 0),
        )
    };

    let vector_from = |opt: &Option<Vec<f64>>, len: usize, what: &str| -> Result<DVector<f64>> {
        match opt {
            None => Ok(DVector::zeros(len)),
            Some(v) => {
                if v.len() != len {
                    return Err(Error::Parse(format!(
                        "{what}: expected length {len}, got {}",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Parse(format!("{what}: non-finite entry")));
                }
                Ok(DVector::from_vec(v.clone()))
            }
        }
    };
    let x_o = vector_from(&file.x0, nu, "x0")?;
    let y_o = vector_from(&file.y0, mu, "y0")?;

    let j = JacobianSet {
        f_x,
        f_y,
        g_x,
        g_y,
        x_o,
        y_o,
    };
    j.validate()?;
    Ok(LinearModel {
        name: file.name,
        jacobians: j,
    })
}

/// Serialize a Jacobian set to the JSON schema (pretty-printed, trailing
/// newline). The output is deterministic and round-trips bit-identically.
pub fn to_json_string(j: &JacobianSet, name: Option<&str>) -> Result<String> {
    j.validate()?;
    let mu = j.mu();
    let file = LinearModelFile {
        name: name.map(|s| s.to_string()),
        nu: j.nu(),
        mu,
        f_x: matrix_to_rows(&j.f_x),
        f_y: (mu > 0).then(|| matrix_to_rows(&j.f_y)),
        g_x: (mu > 0).then(|| matrix_to_rows(&j.g_x)),
        g_y: (mu > 0).then(|| matrix_to_rows(&j.g_y)),
        x0: Some(j.x_o.iter().copied().collect()),
        y0: Some(j.y_o.iter().copied().collect()),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

/// Load a linear model file from disk.
pub fn load_linear_model(path: &Path) -> Result<LinearModel> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

/// Write a Jacobian set to disk under the JSON schema.
pub fn save_linear_model(path: &Path, j: &JacobianSet, name: Option<&str>) -> Result<()> {
    let text = to_json_string(j, name)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scalar_ode_file() {
        let m = from_json_str(r#"{"nu": 1, "mu": 0, "f_x": [[-1.0]]}"#).unwrap();
        assert_eq!(m.jacobians.nu(), 1);
        assert_eq!(m.jacobians.mu(), 0);
        assert_eq!(m.jacobians.f_x[(0, 0)], -1.0);
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let j = JacobianSet {
            f_x: DMatrix::from_row_slice(2, 2, &[0.0, 376.99111843077515, -0.26186146828319083, -1.0 / 7.0]),
            f_y: DMatrix::from_row_slice(2, 1, &[0.0, -1.0 / 7.0]),
            g_x: DMatrix::from_row_slice(1, 2, &[-1.8330302779823362, 0.0]),
            g_y: DMatrix::from_row_slice(1, 1, &[1.0]),
            x_o: DVector::from_vec(vec![0.41151684606748806, 1.0]),
            y_o: DVector::from_vec(vec![0.8]),
        };
        let text = to_json_string(&j, Some("smib")).unwrap();
        let back = from_json_str(&text).unwrap();
        assert_eq!(back.jacobians, j);
        assert_eq!(back.name.as_deref(), Some("smib"));
        // Serializing again reproduces the exact same bytes.
        let text2 = to_json_string(&back.jacobians, back.name.as_deref()).unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let res = from_json_str(
            r#"{"nu": 2, "mu": 1,
                "f_x": [[0.0, 1.0], [-1.0, 0.0]],
                "f_y": [[0.0], [1.0]],
                "g_x": [[1.0, 0.0]],
                "g_y": [[1.0, 0.0]]}"#,
        );
        assert!(matches!(res, Err(Error::Parse(_))), "{res:?}");
    }

    #[test]
    fn algebraic_blocks_required_when_mu_positive() {
        let res = from_json_str(r#"{"nu": 1, "mu": 1, "f_x": [[-1.0]]}"#);
        assert!(matches!(res, Err(Error::Parse(_))));
    }

    #[test]
    fn non_finite_entries_are_rejected_by_serde() {
        // JSON has no literal for infinity; serde_json already fails to parse.
        let res = from_json_str(r#"{"nu": 1, "mu": 0, "f_x": [[1e999]]}"#);
        assert!(res.is_err());
    }
}
