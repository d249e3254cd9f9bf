use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid_model::JumpDiffusionSystem;
use crate::matrix_analysis::{
    block_diag, check_nsd, image_factor, min_eigenvalue, rank, scaled_tolerance, Mat, SymVerdict,
};
use crate::storage::StorageCertificate;

/// Subsystems, their abstractions and certificates, and the coupling data.
#[derive(Debug, Clone)]
pub struct Interconnection {
    pub subsystems: Vec<JumpDiffusionSystem>,
    pub abstractions: Vec<JumpDiffusionSystem>,
    pub certs: Vec<StorageCertificate>,
    /// Concrete coupling `w = M · (stacked C2 x)`.
    pub coupling: Mat,
    /// Abstract coupling `ŵ = M̂ · (stacked Ĉ2 x̂)`.
    pub abstract_coupling: Mat,
    pub weights: Vec<f64>,
    /// Weight `Q̃ ⪰ 0` on the stacked auxiliary state.
    pub aux_coupling_weight: Mat,
}

impl Interconnection {
    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn aux_state_dim(&self) -> usize {
        self.certs.iter().map(|c| c.seed.aux.state_dim()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.subsystems.len();
        if n == 0 {
            return Err(Error::Domain("an interconnection needs at least one subsystem".into()));
        }
        if self.abstractions.len() != n {
            return Err(Error::len("abstractions", n, self.abstractions.len()));
        }
        if self.certs.len() != n {
            return Err(Error::len("certificates", n, self.certs.len()));
        }
        if self.weights.len() != n {
            return Err(Error::len("weights", n, self.weights.len()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!("weights must be positive, got {w}")));
        }
        for ((s, a), c) in self.subsystems.iter().zip(&self.abstractions).zip(&self.certs) {
            c.validate_for(s, a)?;
        }
        let p: usize = self.subsystems.iter().map(|s| s.p()).sum();
        let q: usize = self.subsystems.iter().map(|s| s.q2()).sum();
        if self.coupling.shape() != (p, q) {
            return Err(Error::shape("coupling", (p, q), self.coupling.shape()));
        }
        let ph: usize = self.abstractions.iter().map(|s| s.p()).sum();
        let qh: usize = self.abstractions.iter().map(|s| s.q2()).sum();
        if self.abstract_coupling.shape() != (ph, qh) {
            return Err(Error::shape("abstract_coupling", (ph, qh), self.abstract_coupling.shape()));
        }
        let lt = self.aux_state_dim();
        let qw = &self.aux_coupling_weight;
        if qw.shape() != (lt, lt) {
            return Err(Error::shape("aux_coupling_weight", (lt, lt), qw.shape()));
        }
        if (qw - qw.transpose()).amax() > 1e-10 * qw.amax().max(1.0) {
            return Err(Error::Domain("aux_coupling_weight must be symmetric".into()));
        }
        if lt > 0 && min_eigenvalue(qw) < -1e-10 * qw.amax().max(1.0) {
            return Err(Error::Domain("aux_coupling_weight must be positive semidefinite".into()));
        }
        Ok(())
    }

    fn stacked<F: Fn(&StorageCertificate) -> Mat>(&self, f: F) -> Mat {
        block_diag(&self.certs.iter().map(f).collect::<Vec<_>>())
    }

    /// Block diagonal of the concrete disturbance factors `W_i`.
    pub fn disturbance_factor(&self) -> Mat {
        self.stacked(|c| c.disturbance_factor.clone())
    }

    pub fn abstract_disturbance_factor(&self) -> Mat {
        self.stacked(|c| c.abstract_disturbance_factor.clone())
    }

    pub fn output_map(&self) -> Mat {
        self.stacked(|c| c.output_map.clone())
    }
}

/// Permutation taking `[a_1; …; a_N; b_1; …; b_N]` to
/// `[a_1; b_1; …; a_N; b_N]` for block sizes `first[i]`, `second[i]`.
pub fn permutation_matrix(first: &[usize], second: &[usize]) -> Result<Mat> {
    if first.len() != second.len() {
        return Err(Error::len("block size lists", first.len(), second.len()));
    }
    let total_first: usize = first.iter().sum();
    let total: usize = total_first + second.iter().sum::<usize>();
    let mut s = Mat::zeros(total, total);
    let (mut row, mut src_a, mut src_b) = (0, 0, total_first);
    for (&ra, &rb) in first.iter().zip(second) {
        for k in 0..ra {
            s[(row + k, src_a + k)] = 1.0;
        }
        row += ra;
        src_a += ra;
        for k in 0..rb {
            s[(row + k, src_b + k)] = 1.0;
        }
        row += rb;
        src_b += rb;
    }
    Ok(s)
}

/// The symmetric matrix whose negative semidefiniteness certifies that the
/// weighted sum of subsystem certificates dissipates under the coupling.
pub fn interconnection_matrix(net: &Interconnection) -> Result<Mat> {
    net.validate()?;
    let aux: Vec<_> = net.certs.iter().map(|c| &c.seed.aux).collect();
    let a_d = block_diag(&aux.iter().map(|a| a.a.clone()).collect::<Vec<_>>());
    let b_d = block_diag(&aux.iter().map(|a| a.b.clone()).collect::<Vec<_>>());
    let c_d = block_diag(&aux.iter().map(|a| a.c.clone()).collect::<Vec<_>>());
    let d_d = block_diag(&aux.iter().map(|a| a.d.clone()).collect::<Vec<_>>());
    let supply = block_diag(
        &net.certs
            .iter()
            .zip(&net.weights)
            .map(|(c, &mu)| &c.seed.supply * mu)
            .collect::<Vec<_>>(),
    );

    let pz: Vec<usize> = net.certs.iter().map(|c| c.seed.disturbance_basis.ncols()).collect();
    let q2: Vec<usize> = net.subsystems.iter().map(|s| s.q2()).collect();
    let perm = permutation_matrix(&pz, &q2)?;
    let q_total: usize = q2.iter().sum();
    let pz_total: usize = pz.iter().sum();

    let wm = net.disturbance_factor() * &net.coupling;
    let mut routing = Mat::zeros(pz_total + q_total, q_total);
    routing.rows_mut(0, pz_total).copy_from(&wm);
    routing
        .view_mut((pz_total, 0), (q_total, q_total))
        .copy_from(&Mat::identity(q_total, q_total));
    let routed = perm * routing;
    if b_d.ncols() != routed.nrows() {
        return Err(Error::shape("stacked aux input", (b_d.ncols(), q_total), routed.shape()));
    }

    let lt = a_d.nrows();
    let qw = &net.aux_coupling_weight;
    let mut first = Mat::zeros(lt + q_total, lt + q_total);
    first
        .view_mut((0, 0), (lt, lt))
        .copy_from(&(a_d.transpose() * qw + qw * &a_d));
    let cross = qw * &b_d * &routed;
    first.view_mut((0, lt), (lt, q_total)).copy_from(&cross);
    first.view_mut((lt, 0), (q_total, lt)).copy_from(&cross.transpose());

    let mut out_map = Mat::zeros(c_d.nrows(), lt + q_total);
    out_map.view_mut((0, 0), c_d.shape()).copy_from(&c_d);
    out_map
        .view_mut((0, lt), (c_d.nrows(), q_total))
        .copy_from(&(d_d * &routed));
    Ok(first + out_map.transpose() * supply * out_map)
}

/// Relative tolerance `tol` is scaled by the matrix norm.
pub fn check_interconnection_lmi(net: &Interconnection, tol: f64) -> Result<SymVerdict> {
    let m = interconnection_matrix(net)?;
    check_nsd(&m, scaled_tolerance(&m, tol))
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchingReport {
    /// `‖W M H − Ŵ M̂‖_F`.
    pub residual: f64,
    pub scale: f64,
    pub passed: bool,
}

/// Checks `W M H = Ŵ M̂` for the stacked factors.
pub fn check_matching_condition(net: &Interconnection, tol: f64) -> Result<MatchingReport> {
    net.validate()?;
    let left = net.disturbance_factor() * &net.coupling * net.output_map();
    let right = net.abstract_disturbance_factor() * &net.abstract_coupling;
    if left.shape() != right.shape() {
        return Err(Error::shape("W M H vs What Mhat", left.shape(), right.shape()));
    }
    let residual = (&left - &right).norm();
    let scale = left.norm().max(right.norm());
    Ok(MatchingReport {
        residual,
        scale,
        passed: residual <= tol * (1.0 + scale),
    })
}

#[derive(Debug, Clone)]
pub struct CouplingSolution {
    /// Least-squares minimizer (minimum norm when not unique).
    pub abstract_coupling: Mat,
    pub residual: f64,
    pub feasible: bool,
    /// Whether `Ŵ` has full column rank, making the solution unique.
    pub unique: bool,
}

/// Least-squares `M̂` in `Ŵ M̂ = W M H`.
pub fn solve_abstract_coupling(
    disturbance_factor: &Mat,
    coupling: &Mat,
    output_map: &Mat,
    abstract_disturbance_factor: &Mat,
    tol: f64,
) -> Result<CouplingSolution> {
    if disturbance_factor.ncols() != coupling.nrows() || coupling.ncols() != output_map.nrows() {
        return Err(Error::Dimension {
            context: "W M H".into(),
            expected: format!(
                "W cols = M rows ({}) and M cols = H rows ({})",
                coupling.nrows(),
                output_map.nrows()
            ),
            found: format!(
                "W {:?}, M {:?}, H {:?}",
                disturbance_factor.shape(),
                coupling.shape(),
                output_map.shape()
            ),
        });
    }
    let target = disturbance_factor * coupling * output_map;
    let fit = image_factor(&target, abstract_disturbance_factor, tol)?;
    let solution = crate::matrix_analysis::pseudo_inverse(abstract_disturbance_factor) * &target;
    let unique = rank(abstract_disturbance_factor) == abstract_disturbance_factor.ncols();
    if !unique {
        log::warn!("abstract disturbance factor is rank deficient; returning the minimum-norm coupling");
    }
    Ok(CouplingSolution {
        abstract_coupling: solution,
        residual: fit.residual,
        feasible: fit.feasible,
        unique,
    })
}
