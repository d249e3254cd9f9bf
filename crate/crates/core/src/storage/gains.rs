use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid_model::JumpDiffusionSystem;
use crate::matrix_analysis::{max_eigenvalue, min_eigenvalue, Mat, Vector};

use super::certificate::StorageCertificate;

/// Linear gains of the dissipation inequality for one certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainSummary {
    /// `λ_min(M̂)/λ_max(C1ᵀC1)`: lower bound of `V` against the squared output error.
    pub alpha_slope: f64,
    pub kappa_tilde: f64,
    /// Coefficient of `‖û‖²`.
    pub psi_slope: f64,
    /// Diffusion and jump-variance constant.
    pub c_tilde: f64,
    /// Jump-mismatch constant.
    pub c_prime: f64,
    pub pi: f64,
    pub pi_prime: f64,
}

impl GainSummary {
    pub fn constant(&self) -> f64 {
        self.c_tilde + self.c_prime
    }

    /// Limit of the output-moment bound as `t → ∞`.
    pub fn asymptotic_bound(&self, uhat_sup_sq: f64) -> f64 {
        (self.psi_slope * uhat_sup_sq + self.constant()) / (self.kappa_tilde * self.alpha_slope)
    }
}

/// Default split of the decay rate: `π = π′ = κ̂/4`.
pub fn default_splits(cert: &StorageCertificate) -> (f64, f64) {
    let q = cert.seed.decay_rate / 4.0;
    (q, q)
}

pub fn gain_summary(
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    cert: &StorageCertificate,
    pi: f64,
    pi_prime: f64,
) -> Result<GainSummary> {
    cert.validate_for(sys, abs)?;
    let decay = cert.seed.decay_rate;
    if !(pi > 0.0 && pi_prime > 0.0) {
        return Err(Error::Domain(format!(
            "splits must be positive, got pi = {pi}, pi_prime = {pi_prime}"
        )));
    }
    if pi + pi_prime >= decay {
        return Err(Error::Domain(format!(
            "pi + pi_prime = {} must stay below the decay rate {decay}",
            pi + pi_prime
        )));
    }
    let metric = &cert.seed.metric;
    let p = &cert.embedding;

    let out_gram = sys.c1.transpose() * &sys.c1;
    let out_max = max_eigenvalue(&out_gram);
    if !(out_max > 0.0) {
        return Err(Error::Domain("C1 is zero; the output error is not observable".into()));
    }
    let alpha_slope = min_eigenvalue(metric) / out_max;

    let mismatch = &sys.b * &cert.input_map - p * &abs.b;
    let psi_slope = if mismatch.ncols() == 0 {
        0.0
    } else {
        max_eigenvalue(&(mismatch.transpose() * metric * &mismatch)).max(0.0) / pi
    };

    let quad = |v: &Vector| v.dot(&(metric * v));
    let mut c_tilde = quad(&sys.g) + quad(&(p * &abs.g));
    for (r, &rate) in sys.jumps.iter().zip(&sys.rates) {
        c_tilde += rate * quad(r);
    }
    for (r, &rate) in abs.jumps.iter().zip(&abs.rates) {
        c_tilde += rate * quad(&(p * r));
    }
    let jump_gap = sys.mean_jump() - p * abs.mean_jump();
    let c_prime = quad(&jump_gap) / pi_prime;

    Ok(GainSummary {
        alpha_slope,
        kappa_tilde: (decay - pi - pi_prime).min(cert.seed.aux_decay_rate),
        psi_slope,
        c_tilde,
        c_prime,
        pi,
        pi_prime,
    })
}

/// Searches `(π, π′)` over a 20-point logarithmic grid of fractions of the
/// decay rate and keeps the pair with the smallest asymptotic bound.
pub fn gain_summary_search(
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    cert: &StorageCertificate,
    uhat_sup_sq: f64,
) -> Result<GainSummary> {
    let decay = cert.seed.decay_rate;
    let fractions: Vec<f64> = (0..20)
        .map(|j| 10f64.powf(-3.0 + 3.0 * j as f64 / 19.0) * 0.98)
        .collect();
    let mut best: Option<(f64, GainSummary)> = None;
    for &a in &fractions {
        for &b in &fractions {
            if a + b >= 1.0 {
                continue;
            }
            let g = gain_summary(sys, abs, cert, a * decay, b * decay)?;
            let score = g.asymptotic_bound(uhat_sup_sq);
            if best.as_ref().map_or(true, |(s, _)| score < *s) {
                best = Some((score, g));
            }
        }
    }
    best.map(|(_, g)| g)
        .ok_or_else(|| Error::Domain("empty split grid".into()))
}

/// Best single abstract jump channel found by the grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMatch {
    pub jump: Vector,
    pub rate: f64,
    pub objective: f64,
}

/// Minimizes the rate-dependent part of `c̃ + c′` over one abstract jump
/// channel. For fixed rate `λ̂` the objective is quadratic in `s = λ̂ R̂`:
/// `sᵀGs/λ̂ + sᵀGs/π′ − 2 bᵀM̂P s/π′` with `G = PᵀM̂P`, `b = Σ λ_i R_i`.
pub fn jump_matching(
    sys: &JumpDiffusionSystem,
    metric: &Mat,
    embedding: &Mat,
    pi_prime: f64,
    rate_grid: &[f64],
) -> Result<JumpMatch> {
    if rate_grid.is_empty() {
        return Err(Error::Domain("jump rate grid is empty".into()));
    }
    if let Some(bad) = rate_grid.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!("jump rates must be positive, got {bad}")));
    }
    if !(pi_prime > 0.0) {
        return Err(Error::Domain(format!("pi_prime must be positive, got {pi_prime}")));
    }
    let n = sys.n();
    if metric.shape() != (n, n) {
        return Err(Error::shape("metric", (n, n), metric.shape()));
    }
    if embedding.nrows() != n {
        return Err(Error::shape("embedding", (n, embedding.ncols()), embedding.shape()));
    }
    let gram = embedding.transpose() * metric * embedding;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Rank("embedding must be injective".into()))?;
    let pull = embedding.transpose() * metric * sys.mean_jump();
    let direction = chol.solve(&pull);

    let mut best: Option<JumpMatch> = None;
    for &rate in rate_grid {
        let s = &direction * (rate / (pi_prime + rate));
        let sgs = s.dot(&(&gram * &s));
        let objective = sgs / rate + sgs / pi_prime - 2.0 * pull.dot(&s) / pi_prime;
        let better = match &best {
            None => true,
            Some(b) => {
                objective < b.objective - 1e-12 * b.objective.abs().max(1.0)
                    || (objective <= b.objective + 1e-12 * b.objective.abs().max(1.0) && rate < b.rate)
            }
        };
        if better {
            best = Some(JumpMatch {
                jump: s / rate,
                rate,
                objective,
            });
        }
    }
    Ok(best.expect("nonempty grid"))
}

/// Default abstract jump-rate grid: 20 points, logarithmic on `[0.1, 10]`.
pub fn default_rate_grid() -> Vec<f64> {
    (0..20).map(|j| 10f64.powf(-1.0 + 2.0 * j as f64 / 19.0)).collect()
}
