use serde::Serialize;

use crate::error::{Error, Result};
use crate::storage::GainSummary;

/// Linear gains of the weighted-sum certificate of an interconnection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkGains {
    pub kappa_tilde: f64,
    pub psi_slope: f64,
    pub alpha_slope: f64,
    pub constant: f64,
}

/// Moment order of the quadratic certificates.
const MOMENT_ORDER: f64 = 2.0;

/// Closed forms for linear per-subsystem gains:
/// decay `min κ̃_i`, input slope `‖(μ_i ψ_i)‖₂`,
/// output slope `min(μ_i α_i) / N^{max(k/2,1)−1}`, constant `Σ μ_i c_i`.
pub fn composite_gains(gains: &[GainSummary], weights: &[f64]) -> Result<NetworkGains> {
    if gains.is_empty() {
        return Err(Error::Domain("no subsystem gains supplied".into()));
    }
    if gains.len() != weights.len() {
        return Err(Error::len("weights", gains.len(), weights.len()));
    }
    for (i, (g, &mu)) in gains.iter().zip(weights).enumerate() {
        if !(mu > 0.0) {
            return Err(Error::Domain(format!("weight {i} must be positive, got {mu}")));
        }
        if !(g.kappa_tilde > 0.0) || !(g.alpha_slope > 0.0) {
            return Err(Error::Domain(format!(
                "subsystem {i} needs positive decay and output slopes (got {} and {})",
                g.kappa_tilde, g.alpha_slope
            )));
        }
        if g.psi_slope < 0.0 || g.constant() < 0.0 {
            return Err(Error::Domain(format!("subsystem {i} has a negative gain")));
        }
    }
    let n = gains.len() as f64;
    let spread = n.powf((MOMENT_ORDER / 2.0).max(1.0) - 1.0);
    Ok(NetworkGains {
        kappa_tilde: gains.iter().map(|g| g.kappa_tilde).fold(f64::INFINITY, f64::min),
        psi_slope: gains
            .iter()
            .zip(weights)
            .map(|(g, mu)| (mu * g.psi_slope).powi(2))
            .sum::<f64>()
            .sqrt(),
        alpha_slope: gains
            .iter()
            .zip(weights)
            .map(|(g, mu)| mu * g.alpha_slope)
            .fold(f64::INFINITY, f64::min)
            / spread,
        constant: gains.iter().zip(weights).map(|(g, mu)| mu * g.constant()).sum(),
    })
}

/// Data of the time-explicit bound on the second moment of the output error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBound {
    pub kappa_tilde_net: f64,
    pub alpha_slope_net: f64,
    pub psi_slope_net: f64,
    pub c_net: f64,
    /// Expected initial value of the composite certificate.
    pub v0_mean: f64,
    /// `sup_t ‖û(t)‖²`.
    pub uhat_sup_sq: f64,
}

impl ErrorBound {
    pub fn new(gains: &NetworkGains, v0_mean: f64, uhat_sup_sq: f64) -> Self {
        Self {
            kappa_tilde_net: gains.kappa_tilde,
            alpha_slope_net: gains.alpha_slope,
            psi_slope_net: gains.psi_slope,
            c_net: gains.constant,
            v0_mean,
            uhat_sup_sq,
        }
    }
}

/// Comparison-ODE bound
/// `[e^{−κt} V0 + (1 − e^{−κt})(ψ u² + c)/κ] / α`.
pub fn error_bound(eb: &ErrorBound, t: f64) -> Result<f64> {
    if !(eb.kappa_tilde_net > 0.0) {
        return Err(Error::Domain(format!(
            "decay rate must be positive, got {}",
            eb.kappa_tilde_net
        )));
    }
    if !(eb.alpha_slope_net > 0.0) {
        return Err(Error::Domain(format!(
            "output slope must be positive, got {}",
            eb.alpha_slope_net
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let decay = (-eb.kappa_tilde_net * t).exp();
    let forcing = eb.psi_slope_net * eb.uhat_sup_sq + eb.c_net;
    let value = decay * eb.v0_mean + (1.0 - decay) * forcing / eb.kappa_tilde_net;
    Ok(value / eb.alpha_slope_net)
}
