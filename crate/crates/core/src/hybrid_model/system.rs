use crate::error::{Error, Result};
use crate::matrix_analysis::{Mat, Vector};

use super::nonlinearity::Nonlinearity;

/// `dx = (Ax + Bu + Eφ(t,Fx) + Dw) dt + G dW + Σ R_i dP_i`,
/// with external output `C1 x` and internal output `C2 x`.
#[derive(Debug, Clone)]
pub struct JumpDiffusionSystem {
    pub a: Mat,
    pub b: Mat,
    pub c1: Mat,
    pub c2: Mat,
    pub d: Mat,
    pub e: Mat,
    pub f: Mat,
    pub g: Vector,
    pub jumps: Vec<Vector>,
    pub rates: Vec<f64>,
    pub phi: Nonlinearity,
}

fn expect_shape(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::shape(name, (rows, cols), m.shape()));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(name.to_string()));
    }
    Ok(())
}

impl JumpDiffusionSystem {
    /// System without nonlinearity, diffusion or jumps.
    pub fn linear(a: Mat, b: Mat, c1: Mat, c2: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        let sys = Self {
            a,
            b,
            c1,
            c2,
            d,
            e: Mat::zeros(n, 0),
            f: Mat::zeros(0, n),
            g: Vector::zeros(n),
            jumps: Vec::new(),
            rates: Vec::new(),
            phi: Nonlinearity::zero(0),
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_nonlinearity(mut self, e: Mat, f: Mat, phi: Nonlinearity) -> Result<Self> {
        self.e = e;
        self.f = f;
        self.phi = phi;
        self.validate()?;
        Ok(self)
    }

    pub fn with_diffusion(mut self, g: Vector) -> Result<Self> {
        self.g = g;
        self.validate()?;
        Ok(self)
    }

    pub fn with_jumps(mut self, jumps: Vec<Vector>, rates: Vec<f64>) -> Result<Self> {
        self.jumps = jumps;
        self.rates = rates;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        expect_shape("A", &self.a, n, n)?;
        expect_shape("B", &self.b, n, self.b.ncols())?;
        expect_shape("C1", &self.c1, self.c1.nrows(), n)?;
        expect_shape("C2", &self.c2, self.c2.nrows(), n)?;
        expect_shape("D", &self.d, n, self.d.ncols())?;
        let l = self.phi.dim();
        expect_shape("E", &self.e, n, l)?;
        expect_shape("F", &self.f, l, n)?;
        if self.g.len() != n {
            return Err(Error::len("G", n, self.g.len()));
        }
        if !self.g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("G".into()));
        }
        if self.jumps.len() != self.rates.len() {
            return Err(Error::len("jump rates", self.jumps.len(), self.rates.len()));
        }
        for (i, r) in self.jumps.iter().enumerate() {
            if r.len() != n {
                return Err(Error::len(format!("R[{i}]"), n, r.len()));
            }
            if !r.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("R[{i}]")));
            }
        }
        if let Some((i, rate)) = self
            .rates
            .iter()
            .enumerate()
            .find(|(_, r)| !(**r > 0.0 && r.is_finite()))
        {
            return Err(Error::Domain(format!("rate[{i}] must be positive, got {rate}")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.d.ncols()
    }
    pub fn q1(&self) -> usize {
        self.c1.nrows()
    }
    pub fn q2(&self) -> usize {
        self.c2.nrows()
    }
    pub fn l_k(&self) -> usize {
        self.phi.dim()
    }
    pub fn r(&self) -> usize {
        self.jumps.len()
    }

    /// `Σ λ_i R_i`.
    pub fn mean_jump(&self) -> Vector {
        self.jumps
            .iter()
            .zip(&self.rates)
            .fold(Vector::zeros(self.n()), |acc, (r, l)| acc + r * *l)
    }

    /// `E φ(t, F x)`.
    pub fn nonlinear_term(&self, t: f64, x: &Vector) -> Vector {
        if self.l_k() == 0 {
            return Vector::zeros(self.n());
        }
        &self.e * self.phi.eval(t, &(&self.f * x))
    }
}

/// `A x + B u + E φ(t, F x) + D w`.
pub fn drift(sys: &JumpDiffusionSystem, t: f64, x: &Vector, u: &Vector, w: &Vector) -> Result<Vector> {
    if x.len() != sys.n() {
        return Err(Error::len("state", sys.n(), x.len()));
    }
    if u.len() != sys.m() {
        return Err(Error::len("input", sys.m(), u.len()));
    }
    if w.len() != sys.p() {
        return Err(Error::len("internal input", sys.p(), w.len()));
    }
    Ok(drift_unchecked(sys, t, x, u, w))
}

pub(crate) fn drift_unchecked(
    sys: &JumpDiffusionSystem,
    t: f64,
    x: &Vector,
    u: &Vector,
    w: &Vector,
) -> Vector {
    let mut out = &sys.a * x + sys.nonlinear_term(t, x);
    if sys.m() > 0 {
        out += &sys.b * u;
    }
    if sys.p() > 0 {
        out += &sys.d * w;
    }
    out
}

/// Deterministic linear system `θ' = Aθ θ + [B1 B2] u`, `z = Cθ θ + [D1 D2] u`.
#[derive(Debug, Clone)]
pub struct AuxiliarySystem {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    /// Number of columns in the first (internal-input) partition.
    pub split: usize,
}

impl AuxiliarySystem {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat, split: usize) -> Result<Self> {
        let aux = Self { a, b, c, d, split };
        aux.validate()?;
        Ok(aux)
    }

    /// Memoryless supply: `z = D u` with no auxiliary state.
    pub fn static_map(d: Mat, split: usize) -> Result<Self> {
        let (q, m) = d.shape();
        Self::new(Mat::zeros(0, 0), Mat::zeros(0, m), Mat::zeros(q, 0), d, split)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.a.nrows();
        let m = self.b.ncols();
        let q = self.c.nrows();
        expect_shape("Atheta", &self.a, l, l)?;
        expect_shape("Btheta", &self.b, l, m)?;
        expect_shape("Ctheta", &self.c, q, l)?;
        expect_shape("Dtheta", &self.d, q, m)?;
        if self.split > m {
            return Err(Error::Domain(format!(
                "auxiliary split {} exceeds input width {m}",
                self.split
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    pub fn b1(&self) -> Mat {
        self.b.columns(0, self.split).into_owned()
    }
    pub fn b2(&self) -> Mat {
        self.b.columns(self.split, self.input_dim() - self.split).into_owned()
    }
    pub fn d1(&self) -> Mat {
        self.d.columns(0, self.split).into_owned()
    }
    pub fn d2(&self) -> Mat {
        self.d.columns(self.split, self.input_dim() - self.split).into_owned()
    }
}
