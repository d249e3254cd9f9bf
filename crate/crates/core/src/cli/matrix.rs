//! Matrix literals accepted in configs.
//!
//! A matrix is either a row-major nested array or an object with exactly one
//! constructor key (`zeros`, `ones`, `identity`, `diag`, `data`, `kron`,
//! `block_diag`, `blocks`) and an optional `scale`.

use serde_json::{Map, Value};

use crate::matrix_analysis::{block_diag, kron, Mat};

use super::error::ConfigError;

fn dims(v: &Value, path: &str) -> Result<(usize, usize), ConfigError> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| ConfigError::schema(path, "expected [rows, cols]"))?;
    Ok((count(&pair[0], path)?, count(&pair[1], path)?))
}

fn count(v: &Value, path: &str) -> Result<usize, ConfigError> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| ConfigError::schema(path, format!("expected a nonnegative integer, found {v}")))
}

fn number(v: &Value, path: &str) -> Result<f64, ConfigError> {
    let x = v
        .as_f64()
        .ok_or_else(|| ConfigError::schema(path, format!("expected a number, found {v}")))?;
    if !x.is_finite() {
        return Err(ConfigError::schema(path, "entries must be finite"));
    }
    Ok(x)
}

pub fn parse_vector(v: &Value, path: &str) -> Result<Vec<f64>, ConfigError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ConfigError::schema(path, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}/{i}")))
        .collect()
}

fn nested_rows(rows: &[Value], path: &str) -> Result<Mat, ConfigError> {
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| parse_vector(r, &format!("{path}/{i}")))
        .collect::<Result<_, _>>()?;
    let cols = parsed.first().map_or(0, Vec::len);
    if let Some(i) = parsed.iter().position(|r| r.len() != cols) {
        return Err(ConfigError::schema(
            format!("{path}/{i}"),
            format!("ragged rows: expected {cols} entries, found {}", parsed[i].len()),
        ));
    }
    Ok(Mat::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}

fn matrix_list(v: &Value, path: &str) -> Result<Vec<Mat>, ConfigError> {
    v.as_array()
        .ok_or_else(|| ConfigError::schema(path, "expected an array of matrices"))?
        .iter()
        .enumerate()
        .map(|(i, m)| parse_matrix(m, &format!("{path}/{i}")))
        .collect()
}

fn block_grid(v: &Value, path: &str) -> Result<Mat, ConfigError> {
    let rows = v
        .as_array()
        .ok_or_else(|| ConfigError::schema(path, "expected an array of block rows"))?;
    let grid: Vec<Vec<Mat>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| matrix_list(r, &format!("{path}/{i}")))
        .collect::<Result<_, _>>()?;
    let width = grid.first().map_or(0, Vec::len);
    let heights: Vec<usize> = grid.iter().map(|r| r.first().map_or(0, Mat::nrows)).collect();
    let widths: Vec<usize> = (0..width).map(|j| grid[0][j].ncols()).collect();
    for (i, row) in grid.iter().enumerate() {
        if row.len() != width {
            return Err(ConfigError::schema(
                format!("{path}/{i}"),
                format!("expected {width} blocks, found {}", row.len()),
            ));
        }
        for (j, blk) in row.iter().enumerate() {
            if blk.shape() != (heights[i], widths[j]) {
                return Err(ConfigError::schema(
                    format!("{path}/{i}/{j}"),
                    format!(
                        "block is {}x{}, expected {}x{}",
                        blk.nrows(),
                        blk.ncols(),
                        heights[i],
                        widths[j]
                    ),
                ));
            }
        }
    }
    let mut out = Mat::zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (i, row) in grid.iter().enumerate() {
        let mut c0 = 0;
        for (j, blk) in row.iter().enumerate() {
            out.view_mut((r0, c0), blk.shape()).copy_from(blk);
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    Ok(out)
}

fn from_object(obj: &Map<String, Value>, path: &str) -> Result<Mat, ConfigError> {
    const KEYS: [&str; 8] = ["zeros", "ones", "identity", "diag", "data", "kron", "block_diag", "blocks"];
    let present: Vec<&str> = KEYS.iter().copied().filter(|k| obj.contains_key(*k)).collect();
    if present.len() != 1 {
        return Err(ConfigError::schema(
            path,
            format!("matrix object needs exactly one of {KEYS:?}, found {present:?}"),
        ));
    }
    let key = present[0];
    let allowed: &[&str] = if key == "data" { &["data", "rows", "cols", "scale"] } else { &[key, "scale"] };
    if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ConfigError::schema(format!("{path}/{extra}"), "unknown matrix field"));
    }
    let sub = format!("{path}/{key}");
    let v = &obj[key];
    let base = match key {
        "zeros" => {
            let (r, c) = dims(v, &sub)?;
            Mat::zeros(r, c)
        }
        "ones" => {
            let (r, c) = dims(v, &sub)?;
            Mat::from_element(r, c, 1.0)
        }
        "identity" => {
            let n = count(v, &sub)?;
            Mat::identity(n, n)
        }
        "diag" => {
            let d = parse_vector(v, &sub)?;
            Mat::from_diagonal(&nalgebra::DVector::from_vec(d))
        }
        "data" => {
            let rows = count(
                obj.get("rows").ok_or_else(|| ConfigError::schema(path, "missing rows"))?,
                &format!("{path}/rows"),
            )?;
            let cols = count(
                obj.get("cols").ok_or_else(|| ConfigError::schema(path, "missing cols"))?,
                &format!("{path}/cols"),
            )?;
            let data = parse_vector(v, &sub)?;
            if data.len() != rows * cols {
                return Err(ConfigError::schema(
                    sub,
                    format!("expected {} entries for {rows}x{cols}, found {}", rows * cols, data.len()),
                ));
            }
            Mat::from_row_slice(rows, cols, &data)
        }
        "kron" => {
            let parts = matrix_list(v, &sub)?;
            if parts.is_empty() {
                return Err(ConfigError::schema(sub, "kron needs at least one factor"));
            }
            parts[1..].iter().fold(parts[0].clone(), |acc, m| kron(&acc, m))
        }
        "block_diag" => block_diag(&matrix_list(v, &sub)?),
        "blocks" => block_grid(v, &sub)?,
        _ => unreachable!("key list is exhaustive"),
    };
    match obj.get("scale") {
        Some(s) => Ok(base * number(s, &format!("{path}/scale"))?),
        None => Ok(base),
    }
}

pub fn parse_matrix(v: &Value, path: &str) -> Result<Mat, ConfigError> {
    match v {
        Value::Array(rows) => nested_rows(rows, path),
        Value::Object(obj) => from_object(obj, path),
        other => Err(ConfigError::schema(
            path,
            format!("expected a nested array or matrix object, found {other}"),
        )),
    }
}

/// Row-major nested arrays, the canonical form written by the tools.
pub fn matrix_to_json(m: &Mat) -> Value {
    if m.nrows() == 0 || m.ncols() == 0 {
        return serde_json::json!({ "zeros": [m.nrows(), m.ncols()] });
    }
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&x| Value::from(x)).collect()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_and_object_forms_agree() {
        let a = parse_matrix(&json!([[1.0, 2.0], [3.0, 4.0]]), "/m").unwrap();
        let b = parse_matrix(&json!({"rows": 2, "cols": 2, "data": [1, 2, 3, 4]}), "/m").unwrap();
        assert_eq!(a, b);
        let c = parse_matrix(
            &json!({"blocks": [[[[1.0]], [[2.0]]], [[[3.0]], [[4.0]]]]}),
            "/m",
        )
        .unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn kron_scale_and_empty_shapes() {
        let m = parse_matrix(&json!({"kron": [{"identity": 2}, {"ones": [3, 1]}], "scale": 2.0}), "/m").unwrap();
        assert_eq!(m.shape(), (6, 2));
        assert_eq!(m[(4, 1)], 2.0);
        assert_eq!(parse_matrix(&json!({"zeros": [0, 4]}), "/m").unwrap().shape(), (0, 4));
        let round = parse_matrix(&matrix_to_json(&Mat::zeros(3, 0)), "/m").unwrap();
        assert_eq!(round.shape(), (3, 0));
    }

    #[test]
    fn errors_carry_pointer() {
        let err = parse_matrix(&json!([[1.0, 2.0], [3.0]]), "/systems/s/A").unwrap_err();
        assert!(err.to_string().contains("/systems/s/A/1"), "{err}");
        let err = parse_matrix(&json!({"identity": 2, "ones": [1, 1]}), "/x").unwrap_err();
        assert!(err.to_string().contains("exactly one"), "{err}");
        let err = parse_matrix(&json!({"identity": 2, "scal": 1}), "/x").unwrap_err();
        assert!(err.to_string().contains("/x/scal"), "{err}");
    }
}
