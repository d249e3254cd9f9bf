use crate::error::{Error, Result};
use crate::hybrid_model::{drift_unchecked, JumpDiffusionSystem};
use crate::matrix_analysis::{Mat, Vector};

use super::certificate::StorageCertificate;

fn check_len(name: &str, v: &Vector, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::len(name, expected, v.len()));
    }
    Ok(())
}

/// `(x − P x̂)ᵀ M̂ (x − P x̂) + θᵀ Λ θ`.
pub fn storage_value(x: &Vector, xhat: &Vector, theta: &Vector, cert: &StorageCertificate) -> Result<f64> {
    let p = &cert.embedding;
    check_len("state", x, p.nrows())?;
    check_len("abstract state", xhat, p.ncols())?;
    check_len("aux state", theta, cert.seed.aux_weight.nrows())?;
    let e = x - p * xhat;
    let ve = e.dot(&(&cert.seed.metric * &e));
    let vt = if theta.is_empty() {
        0.0
    } else {
        theta.dot(&(&cert.seed.aux_weight * theta))
    };
    Ok(ve + vt)
}

/// Refines an abstract input into the concrete one:
/// `K(x − Px̂) + Qx̂ + R̃û + L1 φ(t, Fx) − L2 φ̂(t, F̂x̂)`.
pub fn interface_input(
    t: f64,
    x: &Vector,
    xhat: &Vector,
    uhat: &Vector,
    cert: &StorageCertificate,
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
) -> Result<Vector> {
    check_len("state", x, sys.n())?;
    check_len("abstract state", xhat, abs.n())?;
    check_len("abstract input", uhat, abs.m())?;
    if cert.embedding.shape() != (sys.n(), abs.n()) {
        return Err(Error::shape("embedding", (sys.n(), abs.n()), cert.embedding.shape()));
    }
    Ok(interface_unchecked(t, x, xhat, uhat, cert, sys, abs))
}

pub(crate) fn interface_unchecked(
    t: f64,
    x: &Vector,
    xhat: &Vector,
    uhat: &Vector,
    cert: &StorageCertificate,
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
) -> Vector {
    let e = x - &cert.embedding * xhat;
    let mut u = &cert.seed.feedback * e + &cert.state_feedforward * xhat;
    if abs.m() > 0 {
        u += &cert.input_map * uhat;
    }
    if sys.l_k() > 0 {
        u += &cert.seed.phi_gain * sys.phi.eval(t, &(&sys.f * x));
    }
    if abs.l_k() > 0 {
        u -= &cert.phi_gain_abstract * abs.phi.eval(t, &(&abs.f * xhat));
    }
    u
}

/// `(Bᵀ M̂ B)⁻¹ Bᵀ M̂ P B̂`.
pub fn compute_rtilde(
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    metric: &Mat,
    embedding: &Mat,
) -> Result<Mat> {
    let (n, m) = (sys.n(), sys.m());
    if metric.shape() != (n, n) {
        return Err(Error::shape("metric", (n, n), metric.shape()));
    }
    if embedding.shape() != (n, abs.n()) {
        return Err(Error::shape("embedding", (n, abs.n()), embedding.shape()));
    }
    if m == 0 {
        return Ok(Mat::zeros(0, abs.m()));
    }
    let bt_m = sys.b.transpose() * metric;
    let gram = &bt_m * &sys.b;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Rank("B^T metric B is singular; B must have full column rank".into()))?;
    let rhs = bt_m * embedding * &abs.b;
    Ok(chol.solve(&rhs))
}

/// A point of the joint state/input space at which the generator is
/// evaluated.
#[derive(Debug, Clone)]
pub struct JointPoint {
    pub t: f64,
    pub x: Vector,
    pub xhat: Vector,
    pub theta: Vector,
    pub u: Vector,
    pub uhat: Vector,
    pub w: Vector,
    pub what: Vector,
}

/// Input of the auxiliary system: `[W w − Ŵ ŵ; C2 x − H Ĉ2 x̂]`.
pub fn aux_input(
    cert: &StorageCertificate,
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    x: &Vector,
    xhat: &Vector,
    w: &Vector,
    what: &Vector,
) -> Vector {
    let pz = cert.seed.disturbance_basis.ncols();
    let q2 = sys.q2();
    let mut out = Vector::zeros(pz + q2);
    let mut dist = Vector::zeros(pz);
    if sys.p() > 0 {
        dist += &cert.disturbance_factor * w;
    }
    if abs.p() > 0 {
        dist -= &cert.abstract_disturbance_factor * what;
    }
    out.rows_mut(0, pz).copy_from(&dist);
    let mut outputs = &sys.c2 * x;
    if abs.q2() > 0 {
        outputs -= &cert.output_map * (&abs.c2 * xhat);
    }
    out.rows_mut(pz, q2).copy_from(&outputs);
    out
}

fn check_point(
    pt: &JointPoint,
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    cert: &StorageCertificate,
) -> Result<()> {
    check_len("state", &pt.x, sys.n())?;
    check_len("abstract state", &pt.xhat, abs.n())?;
    check_len("aux state", &pt.theta, cert.seed.aux.state_dim())?;
    check_len("input", &pt.u, sys.m())?;
    check_len("abstract input", &pt.uhat, abs.m())?;
    check_len("internal input", &pt.w, sys.p())?;
    check_len("abstract internal input", &pt.what, abs.p())?;
    cert.validate_for(sys, abs)
}

/// Generator of the quadratic storage function along the joint process with
/// independent concrete and abstract noise.
pub fn generator_value(
    pt: &JointPoint,
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    cert: &StorageCertificate,
) -> Result<f64> {
    check_point(pt, sys, abs, cert)?;
    Ok(generator_unchecked(pt, sys, abs, cert))
}

pub(crate) fn generator_unchecked(
    pt: &JointPoint,
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    cert: &StorageCertificate,
) -> f64 {
    let metric = &cert.seed.metric;
    let p = &cert.embedding;
    let e = &pt.x - p * &pt.xhat;
    let me = metric * &e;

    let f = drift_unchecked(sys, pt.t, &pt.x, &pt.u, &pt.w);
    let fhat = drift_unchecked(abs, pt.t, &pt.xhat, &pt.uhat, &pt.what);
    let mut lv = 2.0 * me.dot(&(f - p * fhat));

    lv += sys.g.dot(&(metric * &sys.g));
    let pg = p * &abs.g;
    lv += pg.dot(&(metric * &pg));

    for (r, &rate) in sys.jumps.iter().zip(&sys.rates) {
        lv += rate * (2.0 * me.dot(r) + r.dot(&(metric * r)));
    }
    for (r, &rate) in abs.jumps.iter().zip(&abs.rates) {
        let pr = p * r;
        lv += rate * (-2.0 * me.dot(&pr) + pr.dot(&(metric * &pr)));
    }

    if cert.seed.aux.state_dim() > 0 {
        let u_aux = aux_input(cert, sys, abs, &pt.x, &pt.xhat, &pt.w, &pt.what);
        let aux = &cert.seed.aux;
        let theta_dot = &aux.a * &pt.theta + &aux.b * u_aux;
        lv += 2.0 * pt.theta.dot(&(&cert.seed.aux_weight * theta_dot));
    }
    lv
}
