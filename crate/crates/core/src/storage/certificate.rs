use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid_model::{AuxiliarySystem, JumpDiffusionSystem};
use crate::matrix_analysis::{
    check_nsd, image_factor, min_eigenvalue, scaled_tolerance, BlockMatrix, Mat, SymVerdict,
};

/// Data a user supplies before an abstraction exists: the quadratic metric,
/// feedback and multiplier gains, and the dynamic supply rate.
#[derive(Debug, Clone)]
pub struct SeedCertificate {
    /// Metric `M̂ ≻ 0` of the error quadratic form, `n × n`.
    pub metric: Mat,
    /// State feedback on the error, `m × n`.
    pub feedback: Mat,
    /// Supply-rate weight on the auxiliary output, `qθ × qθ`.
    pub supply: Mat,
    /// Concrete-side nonlinearity cancellation gain, `m × l`.
    pub phi_gain: Mat,
    /// `Z` with `D = Z W`, `n × p_z`.
    pub disturbance_basis: Mat,
    pub aux: AuxiliarySystem,
    /// Weight `Λ ≻ 0` on the auxiliary state.
    pub aux_weight: Mat,
    pub decay_rate: f64,
    pub aux_decay_rate: f64,
}

/// A completed certificate linking a concrete system to one abstraction.
#[derive(Debug, Clone)]
pub struct StorageCertificate {
    pub seed: SeedCertificate,
    /// `W` with `D = Z W`.
    pub disturbance_factor: Mat,
    /// `Ŵ` with `P D̂ = Z Ŵ`.
    pub abstract_disturbance_factor: Mat,
    /// Abstract-side nonlinearity gain.
    pub phi_gain_abstract: Mat,
    /// Injective `P` embedding abstract states, `n × n̂`.
    pub embedding: Mat,
    /// Feedforward of the abstract state in the interface, `m × n̂`.
    pub state_feedforward: Mat,
    /// `H` with `C2 P = H Ĉ2`.
    pub output_map: Mat,
    /// Gain from abstract to concrete input, `m × m̂`.
    pub input_map: Mat,
}

fn require_shape(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::shape(name, (rows, cols), m.shape()));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(name.to_string()));
    }
    Ok(())
}

fn require_symmetric(name: &str, m: &Mat) -> Result<()> {
    if (m - m.transpose()).amax() > 1e-10 * m.amax().max(1.0) {
        return Err(Error::Domain(format!("{name} must be symmetric")));
    }
    Ok(())
}

impl SeedCertificate {
    /// Checks every block against the concrete system's dimensions.
    pub fn validate_for(&self, sys: &JumpDiffusionSystem) -> Result<()> {
        let (n, m, l, q2) = (sys.n(), sys.m(), sys.l_k(), sys.q2());
        self.aux.validate()?;
        require_shape("metric", &self.metric, n, n)?;
        require_symmetric("metric", &self.metric)?;
        require_shape("feedback", &self.feedback, m, n)?;
        require_shape("phi_gain", &self.phi_gain, m, l)?;
        let pz = self.disturbance_basis.ncols();
        require_shape("disturbance_basis", &self.disturbance_basis, n, pz)?;
        if self.aux.split != pz {
            return Err(Error::Dimension {
                context: "aux split".into(),
                expected: format!("{pz} (columns of disturbance_basis)"),
                found: self.aux.split.to_string(),
            });
        }
        if self.aux.input_dim() != pz + q2 {
            return Err(Error::Dimension {
                context: "aux input width".into(),
                expected: format!("{} (disturbance columns + internal outputs)", pz + q2),
                found: self.aux.input_dim().to_string(),
            });
        }
        let qt = self.aux.output_dim();
        require_shape("supply", &self.supply, qt, qt)?;
        require_symmetric("supply", &self.supply)?;
        let lt = self.aux.state_dim();
        require_shape("aux_weight", &self.aux_weight, lt, lt)?;
        require_symmetric("aux_weight", &self.aux_weight)?;
        if !(self.decay_rate > 0.0) || !self.decay_rate.is_finite() {
            return Err(Error::Domain(format!(
                "decay_rate must be positive, got {}",
                self.decay_rate
            )));
        }
        if !(self.aux_decay_rate > 0.0) || !self.aux_decay_rate.is_finite() {
            return Err(Error::Domain(format!(
                "aux_decay_rate must be positive, got {}",
                self.aux_decay_rate
            )));
        }
        Ok(())
    }
}

impl StorageCertificate {
    pub fn validate_for(&self, sys: &JumpDiffusionSystem, abs: &JumpDiffusionSystem) -> Result<()> {
        self.seed.validate_for(sys)?;
        let (n, m, p, q2) = (sys.n(), sys.m(), sys.p(), sys.q2());
        let nh = abs.n();
        let pz = self.seed.disturbance_basis.ncols();
        require_shape("embedding", &self.embedding, n, nh)?;
        require_shape("state_feedforward", &self.state_feedforward, m, nh)?;
        require_shape("output_map", &self.output_map, q2, abs.q2())?;
        require_shape("input_map", &self.input_map, m, abs.m())?;
        require_shape("phi_gain_abstract", &self.phi_gain_abstract, m, abs.l_k())?;
        require_shape("disturbance_factor", &self.disturbance_factor, pz, p)?;
        require_shape(
            "abstract_disturbance_factor",
            &self.abstract_disturbance_factor,
            pz,
            abs.p(),
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorCheck {
    pub residual: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Verdict on the block inequality `LHS − RHS ⪯ 0`.
    pub lmi: SymVerdict,
    /// Least-squares residual of `D = Z W`.
    pub disturbance_factor: FactorCheck,
    /// Verdict on `D2ᵀ X D2 ⪯ 0`.
    pub supply_sign: SymVerdict,
    pub metric_min_eigenvalue: f64,
    /// Absent when there is no auxiliary state.
    pub aux_weight_min_eigenvalue: Option<f64>,
    pub passed: bool,
}

/// Both sides of the block inequality, ordered as
/// `[error state, disturbance, nonlinearity increment, auxiliary state]`.
pub fn assumption_blocks(sys: &JumpDiffusionSystem, seed: &SeedCertificate) -> Result<(Mat, Mat)> {
    seed.validate_for(sys)?;
    let n = sys.n();
    let pz = seed.disturbance_basis.ncols();
    let l = sys.l_k();
    let lt = seed.aux.state_dim();
    let sizes = [n, pz, l, lt];

    let metric = &seed.metric;
    let x = &seed.supply;
    let lambda = &seed.aux_weight;
    let (b1, b2, d1, d2) = (seed.aux.b1(), seed.aux.b2(), seed.aux.d1(), seed.aux.d2());
    let c_aux = &seed.aux.c;
    let c2 = &sys.c2;
    let phi = &sys.phi;
    let (m11, m12, m22) = (phi.m11(), phi.m12(), phi.m22());

    let closed = &sys.a + &sys.b * &seed.feedback;
    let delta = closed.transpose() * metric + metric * &closed;
    let out_supply = d2.clone() * c2; // D2 C2

    let mut lhs = BlockMatrix::new(&sizes, &sizes);
    let set_sym = |bm: &mut BlockMatrix, i: usize, j: usize, name: &str, blk: Mat| -> Result<()> {
        if i != j {
            bm.set(j, i, name, &blk.transpose())?;
        }
        bm.set(i, j, name, &blk)
    };
    set_sym(&mut lhs, 0, 0, "closed-loop metric", delta)?;
    set_sym(&mut lhs, 0, 1, "metric*disturbance_basis", metric * &seed.disturbance_basis)?;
    set_sym(
        &mut lhs,
        0,
        2,
        "metric*(B*phi_gain + E)",
        metric * (&sys.b * &seed.phi_gain + &sys.e),
    )?;
    set_sym(&mut lhs, 0, 3, "output coupling", c2.transpose() * b2.transpose() * lambda)?;
    set_sym(&mut lhs, 1, 3, "disturbance coupling", b1.transpose() * lambda)?;
    set_sym(
        &mut lhs,
        3,
        3,
        "aux dynamics",
        seed.aux.a.transpose() * lambda + lambda * &seed.aux.a,
    )?;

    let mut rhs = BlockMatrix::new(&sizes, &sizes);
    set_sym(
        &mut rhs,
        0,
        0,
        "decay and supply",
        metric * (-seed.decay_rate) + out_supply.transpose() * x * &out_supply
            - sys.f.transpose() * &m11 * &sys.f,
    )?;
    set_sym(&mut rhs, 0, 1, "supply cross", out_supply.transpose() * x * &d1)?;
    set_sym(&mut rhs, 0, 2, "multiplier cross", -(sys.f.transpose() * &m12))?;
    set_sym(&mut rhs, 0, 3, "supply aux cross", out_supply.transpose() * x * c_aux)?;
    set_sym(&mut rhs, 1, 1, "disturbance supply", d1.transpose() * x * &d1)?;
    set_sym(&mut rhs, 1, 3, "disturbance aux supply", d1.transpose() * x * c_aux)?;
    set_sym(&mut rhs, 2, 2, "multiplier increment", -m22)?;
    set_sym(
        &mut rhs,
        3,
        3,
        "aux decay and supply",
        c_aux.transpose() * x * c_aux - lambda * seed.aux_decay_rate,
    )?;
    Ok((lhs.into_inner(), rhs.into_inner()))
}

/// Checks the seed data against the concrete system. `tol` is relative: each
/// semidefinite test uses `tol · max(1, ‖S‖₂)`.
pub fn check_assumption(
    sys: &JumpDiffusionSystem,
    seed: &SeedCertificate,
    tol: f64,
) -> Result<AssumptionReport> {
    let (lhs, rhs) = assumption_blocks(sys, seed)?;
    let gap = lhs - rhs;
    let lmi = check_nsd(&gap, scaled_tolerance(&gap, tol))?;

    let factor = image_factor(&sys.d, &seed.disturbance_basis, tol)?;
    let disturbance_factor = FactorCheck {
        residual: factor.residual,
        feasible: factor.feasible,
    };

    let d2 = seed.aux.d2();
    let supply_form = d2.transpose() * &seed.supply * &d2;
    let supply_sign = check_nsd(&supply_form, scaled_tolerance(&supply_form, tol))?;

    let metric_min_eigenvalue = min_eigenvalue(&seed.metric);
    let aux_weight_min_eigenvalue =
        (seed.aux_weight.nrows() > 0).then(|| min_eigenvalue(&seed.aux_weight));
    let passed = lmi.is_satisfied
        && disturbance_factor.feasible
        && supply_sign.is_satisfied
        && metric_min_eigenvalue > 0.0
        && aux_weight_min_eigenvalue.map_or(true, |v| v > 0.0);
    Ok(AssumptionReport {
        lmi,
        disturbance_factor,
        supply_sign,
        metric_min_eigenvalue,
        aux_weight_min_eigenvalue,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquationResidual {
    pub equation: &'static str,
    pub residual: f64,
    /// Frobenius norm of the larger side, used to scale the tolerance.
    pub scale: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    pub equations: Vec<EquationResidual>,
    pub passed: bool,
}

impl StructuralReport {
    pub fn get(&self, equation: &str) -> Option<&EquationResidual> {
        self.equations.iter().find(|e| e.equation == equation)
    }

    pub fn max_residual(&self) -> f64 {
        self.equations.iter().map(|e| e.residual).fold(0.0, f64::max)
    }
}

fn residual_entry(equation: &'static str, left: Mat, right: Mat, tol: f64) -> Result<EquationResidual> {
    if left.shape() != right.shape() {
        return Err(Error::shape(equation, left.shape(), right.shape()));
    }
    let residual = (&left - &right).norm();
    let scale = left.norm().max(right.norm());
    Ok(EquationResidual {
        equation,
        residual,
        scale,
        passed: residual <= tol * (1.0 + scale),
    })
}

/// Evaluates the six matching equations between a concrete system, an
/// abstraction and a completed certificate.
pub fn check_structural_equations(
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    cert: &StorageCertificate,
    tol: f64,
) -> Result<StructuralReport> {
    cert.validate_for(sys, abs)?;
    let p = &cert.embedding;
    let equations = vec![
        residual_entry(
            "AP = PAhat - BQ",
            &sys.a * p,
            p * &abs.a - &sys.b * &cert.state_feedforward,
            tol,
        )?,
        residual_entry("C1P = C1hat", &sys.c1 * p, abs.c1.clone(), tol)?,
        residual_entry("C2P = H C2hat", &sys.c2 * p, &cert.output_map * &abs.c2, tol)?,
        residual_entry("FP = Fhat", &sys.f * p, abs.f.clone(), tol)?,
        residual_entry(
            "E = P Ehat + B(L2 - L1)",
            sys.e.clone(),
            p * &abs.e + &sys.b * (&cert.phi_gain_abstract - &cert.seed.phi_gain),
            tol,
        )?,
        residual_entry(
            "P Dhat = Z What",
            p * &abs.d,
            &cert.seed.disturbance_basis * &cert.abstract_disturbance_factor,
            tol,
        )?,
    ];
    let passed = equations.iter().all(|e| e.passed);
    Ok(StructuralReport { equations, passed })
}
