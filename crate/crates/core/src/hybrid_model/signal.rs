use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_analysis::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSignal {
    Zero,
    Constant { value: f64 },
    /// `sin t`.
    Sin,
    /// `scale · e^{−t}`.
    ExpDecay { scale: f64 },
    /// `−t`.
    NegTime,
}

impl ScalarSignal {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ScalarSignal::Zero => 0.0,
            ScalarSignal::Constant { value } => value,
            ScalarSignal::Sin => t.sin(),
            ScalarSignal::ExpDecay { scale } => scale * (-t).exp(),
            ScalarSignal::NegTime => -t,
        }
    }
}

/// Deterministic input signal `t ↦ R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSignal {
    Constant {
        value: Vec<f64>,
    },
    /// `values[i]` holds on `[breakpoints[i], breakpoints[i+1])`; the first
    /// value also covers times before the first breakpoint.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    Components {
        components: Vec<ScalarSignal>,
    },
}

impl InputSignal {
    pub fn zero(dim: usize) -> Self {
        InputSignal::Constant { value: vec![0.0; dim] }
    }

    pub fn constant(value: &Vector) -> Self {
        InputSignal::Constant {
            value: value.as_slice().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InputSignal::Constant { value } => value.len(),
            InputSignal::PiecewiseConstant { values, .. } => values.first().map_or(0, Vec::len),
            InputSignal::Components { components } => components.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputSignal::Constant { value } => finite(value, "constant signal"),
            InputSignal::PiecewiseConstant { breakpoints, values } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(Error::Domain(
                        "piecewise signal needs one value per breakpoint (at least one)".into(),
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Domain("breakpoints must be strictly increasing".into()));
                }
                finite(breakpoints, "breakpoints")?;
                let dim = values[0].len();
                for (i, v) in values.iter().enumerate() {
                    if v.len() != dim {
                        return Err(Error::len(format!("signal value {i}"), dim, v.len()));
                    }
                    finite(v, "piecewise signal")?;
                }
                Ok(())
            }
            InputSignal::Components { components } => {
                for c in components {
                    let bad = match c {
                        ScalarSignal::Constant { value } => !value.is_finite(),
                        ScalarSignal::ExpDecay { scale } => !scale.is_finite(),
                        _ => false,
                    };
                    if bad {
                        return Err(Error::NonFinite("signal component".into()));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vector {
        match self {
            InputSignal::Constant { value } => Vector::from_column_slice(value),
            InputSignal::PiecewiseConstant { breakpoints, values } => {
                let j = breakpoints.partition_point(|&b| b <= t).saturating_sub(1);
                Vector::from_column_slice(&values[j])
            }
            InputSignal::Components { components } => {
                Vector::from_iterator(components.len(), components.iter().map(|c| c.eval(t)))
            }
        }
    }
}

fn finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
