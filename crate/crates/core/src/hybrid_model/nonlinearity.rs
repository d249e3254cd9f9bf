use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix_analysis::{block_diag, Mat, Vector};

pub type CustomMap = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;

#[derive(Clone)]
pub enum NonlinearityKind {
    Zero,
    /// Componentwise sine.
    SineSum,
    /// Componentwise piecewise-linear interpolation, flat outside the knots.
    Table { knots: Vec<f64>, values: Vec<f64> },
    /// Independent blocks evaluated on consecutive slices of the argument.
    Stacked(Vec<Nonlinearity>),
    Custom(CustomMap),
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearityKind::Zero => write!(f, "Zero"),
            NonlinearityKind::SineSum => write!(f, "SineSum"),
            NonlinearityKind::Table { knots, values } => f
                .debug_struct("Table")
                .field("knots", knots)
                .field("values", values)
                .finish(),
            NonlinearityKind::Stacked(parts) => f.debug_tuple("Stacked").field(parts).finish(),
            NonlinearityKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A time-varying map on `R^l` together with its incremental quadratic
/// multiplier `[[M11, M12], [M12ᵀ, M22]]`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    dim: usize,
    multiplier: Mat,
}

impl Nonlinearity {
    pub fn new(kind: NonlinearityKind, dim: usize, multiplier: Mat) -> Result<Self> {
        if multiplier.shape() != (2 * dim, 2 * dim) {
            return Err(Error::shape("multiplier", (2 * dim, 2 * dim), multiplier.shape()));
        }
        if !multiplier.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("multiplier".into()));
        }
        if (&multiplier - multiplier.transpose()).amax() > 1e-12 * multiplier.amax().max(1.0) {
            return Err(Error::Domain("multiplier must be symmetric".into()));
        }
        match &kind {
            NonlinearityKind::Table { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::Domain(
                        "table needs equally many knots and values (at least one)".into(),
                    ));
                }
                if knots.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Domain("table knots must be strictly increasing".into()));
                }
            }
            NonlinearityKind::Stacked(parts) => {
                let total: usize = parts.iter().map(|p| p.dim).sum();
                if total != dim {
                    return Err(Error::len("stacked nonlinearity", dim, total));
                }
            }
            _ => {}
        }
        Ok(Self { kind, dim, multiplier })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            kind: NonlinearityKind::Zero,
            dim,
            multiplier: Mat::zeros(2 * dim, 2 * dim),
        }
    }

    /// Componentwise sine with the Lipschitz multiplier `scale · diag(I, −I)`.
    pub fn sine(dim: usize, scale: f64) -> Self {
        let mut multiplier = Mat::zeros(2 * dim, 2 * dim);
        for i in 0..dim {
            multiplier[(i, i)] = scale;
            multiplier[(dim + i, dim + i)] = -scale;
        }
        Self {
            kind: NonlinearityKind::SineSum,
            dim,
            multiplier,
        }
    }

    /// Concatenates nonlinearities; the multiplier is assembled blockwise.
    pub fn stacked(parts: Vec<Nonlinearity>) -> Self {
        let dim = parts.iter().map(|p| p.dim).sum();
        let m11 = block_diag(&parts.iter().map(|p| p.m11()).collect::<Vec<_>>());
        let m12 = block_diag(&parts.iter().map(|p| p.m12()).collect::<Vec<_>>());
        let m22 = block_diag(&parts.iter().map(|p| p.m22()).collect::<Vec<_>>());
        let mut multiplier = Mat::zeros(2 * dim, 2 * dim);
        multiplier.view_mut((0, 0), (dim, dim)).copy_from(&m11);
        multiplier.view_mut((0, dim), (dim, dim)).copy_from(&m12);
        multiplier.view_mut((dim, 0), (dim, dim)).copy_from(&m12.transpose());
        multiplier.view_mut((dim, dim), (dim, dim)).copy_from(&m22);
        Self {
            kind: NonlinearityKind::Stacked(parts),
            dim,
            multiplier,
        }
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            NonlinearityKind::Zero => "zero",
            NonlinearityKind::SineSum => "sine_sum",
            NonlinearityKind::Table { .. } => "table",
            NonlinearityKind::Stacked(_) => "stacked",
            NonlinearityKind::Custom(_) => "custom",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn multiplier(&self) -> &Mat {
        &self.multiplier
    }

    pub fn m11(&self) -> Mat {
        self.multiplier.view((0, 0), (self.dim, self.dim)).into_owned()
    }

    pub fn m12(&self) -> Mat {
        self.multiplier.view((0, self.dim), (self.dim, self.dim)).into_owned()
    }

    pub fn m22(&self) -> Mat {
        self.multiplier
            .view((self.dim, self.dim), (self.dim, self.dim))
            .into_owned()
    }

    pub fn eval(&self, t: f64, k: &Vector) -> Vector {
        debug_assert_eq!(k.len(), self.dim);
        match &self.kind {
            NonlinearityKind::Zero => Vector::zeros(self.dim),
            NonlinearityKind::SineSum => k.map(f64::sin),
            NonlinearityKind::Table { knots, values } => k.map(|v| interpolate(knots, values, v)),
            NonlinearityKind::Stacked(parts) => {
                let mut out = Vector::zeros(self.dim);
                let mut offset = 0;
                for p in parts {
                    let slice = k.rows(offset, p.dim).into_owned();
                    out.rows_mut(offset, p.dim).copy_from(&p.eval(t, &slice));
                    offset += p.dim;
                }
                out
            }
            NonlinearityKind::Custom(f) => f(t, k),
        }
    }

    /// `[k2 − k1; φ(t,k2) − φ(t,k1)]ᵀ M̃ [·]`.
    pub fn increment_form(&self, t: f64, k1: &Vector, k2: &Vector) -> f64 {
        let mut v = Vector::zeros(2 * self.dim);
        v.rows_mut(0, self.dim).copy_from(&(k2 - k1));
        v.rows_mut(self.dim, self.dim)
            .copy_from(&(self.eval(t, k2) - self.eval(t, k1)));
        v.dot(&(&self.multiplier * &v))
    }
}

fn interpolate(knots: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= knots[0] {
        return values[0];
    }
    let last = knots.len() - 1;
    if x >= knots[last] {
        return values[last];
    }
    let j = knots.partition_point(|&k| k <= x);
    let (x0, x1) = (knots[j - 1], knots[j]);
    let s = (x - x0) / (x1 - x0);
    values[j - 1] + s * (values[j] - values[j - 1])
}

#[derive(Debug, Clone, Serialize)]
pub struct IqcReport {
    pub samples: usize,
    pub min_value: f64,
    pub passed: bool,
    /// Pair attaining the minimum.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// Sampled falsification test of the incremental quadratic constraint.
pub fn iqc_check(phi: &Nonlinearity, samples: usize, range: f64, seed: u64) -> Result<IqcReport> {
    if samples == 0 {
        return Err(Error::Domain("iqc_check needs at least one sample".into()));
    }
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::Domain(format!("sample range must be positive, got {range}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = phi.dim();
    let mut min_value = f64::INFINITY;
    let mut witness = None;
    for _ in 0..samples {
        let t = rng.gen_range(0.0..=range);
        let k1 = Vector::from_fn(l, |_, _| rng.gen_range(-range..=range));
        let k2 = Vector::from_fn(l, |_, _| rng.gen_range(-range..=range));
        let value = phi.increment_form(t, &k1, &k2);
        if !value.is_finite() {
            return Err(Error::NonFinite("nonlinearity evaluation".into()));
        }
        if value < min_value {
            min_value = value;
            witness = Some((k1.as_slice().to_vec(), k2.as_slice().to_vec()));
        }
    }
    if l == 0 {
        min_value = 0.0;
        witness = None;
    }
    Ok(IqcReport {
        samples,
        min_value,
        passed: min_value >= -1e-9,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn diag2(a: f64, b: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
    }

    #[test]
    fn zero_kind_evaluates_to_zero() {
        let phi = Nonlinearity::zero(3);
        let k = Vector::from_vec(vec![1.0, -2.0, 7.5]);
        assert_eq!(phi.eval(4.0, &k), Vector::zeros(3));
    }

    #[test]
    fn zero_kind_passes_lipschitz_multiplier() {
        let phi = Nonlinearity::new(NonlinearityKind::Zero, 1, diag2(1.0, -1.0)).unwrap();
        let r = iqc_check(&phi, 1000, 10.0, 1).unwrap();
        assert!(r.passed);
        assert!(r.min_value >= 0.0);
    }

    #[test]
    fn sine_passes_lipschitz_multiplier() {
        let phi = Nonlinearity::sine(1, 1.0);
        let r = iqc_check(&phi, 10_000, 10.0, 7).unwrap();
        assert!(r.passed, "min {}", r.min_value);
    }

    #[test]
    fn sine_fails_reversed_multiplier() {
        let phi = Nonlinearity::new(NonlinearityKind::SineSum, 1, diag2(-1.0, 1.0)).unwrap();
        let k1 = Vector::from_vec(vec![0.0]);
        let k2 = Vector::from_vec(vec![FRAC_PI_2]);
        let form = phi.increment_form(0.0, &k1, &k2);
        assert!((form - (1.0 - FRAC_PI_2 * FRAC_PI_2)).abs() < 1e-12);
        let r = iqc_check(&phi, 1000, 10.0, 3).unwrap();
        assert!(!r.passed);
        assert!(r.min_value < 0.0);
        assert!(r.witness.is_some());
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let phi = Nonlinearity::new(
            NonlinearityKind::Table {
                knots: vec![-1.0, 0.0, 2.0],
                values: vec![-1.0, 0.0, 1.0],
            },
            2,
            Mat::zeros(4, 4),
        )
        .unwrap();
        let out = phi.eval(0.0, &Vector::from_vec(vec![1.0, -5.0]));
        assert_eq!(out, Vector::from_vec(vec![0.5, -1.0]));
    }

    #[test]
    fn stacked_multiplier_is_blockwise() {
        let phi = Nonlinearity::stacked(vec![Nonlinearity::sine(1, 2.0), Nonlinearity::zero(1)]);
        assert_eq!(phi.dim(), 2);
        assert_eq!(phi.m11(), Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert_eq!(phi.m22(), Mat::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 0.0]));
        let v = phi.eval(0.0, &Vector::from_vec(vec![FRAC_PI_2, 3.0]));
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn rejects_bad_multiplier() {
        assert!(Nonlinearity::new(NonlinearityKind::Zero, 1, Mat::zeros(3, 3)).is_err());
        let asym = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(Nonlinearity::new(NonlinearityKind::Zero, 1, asym).is_err());
    }
}
