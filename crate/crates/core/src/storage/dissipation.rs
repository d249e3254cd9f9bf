use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid_model::JumpDiffusionSystem;
use crate::matrix_analysis::Vector;

use super::certificate::StorageCertificate;
use super::gains::GainSummary;
use super::generator::{aux_input, generator_unchecked, interface_unchecked, JointPoint};

/// Slack allowed on every sampled inequality.
pub const DISSIPATION_SLACK: f64 = 1e-6;

/// Half-widths of the sampling boxes, one per argument group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleBoxes {
    pub state: f64,
    pub abstract_state: f64,
    pub aux_state: f64,
    pub abstract_input: f64,
    pub internal_input: f64,
    pub time: f64,
}

impl Default for SampleBoxes {
    fn default() -> Self {
        Self {
            state: 5.0,
            abstract_state: 5.0,
            aux_state: 5.0,
            abstract_input: 5.0,
            internal_input: 5.0,
            time: 10.0,
        }
    }
}

impl SampleBoxes {
    pub fn uniform(half_width: f64) -> Self {
        Self {
            state: half_width,
            abstract_state: half_width,
            aux_state: half_width,
            abstract_input: half_width,
            internal_input: half_width,
            time: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationWitness {
    pub t: f64,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub theta: Vec<f64>,
    pub uhat: Vec<f64>,
    pub w: Vec<f64>,
    pub what: Vec<f64>,
    pub generator: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationReport {
    pub samples: usize,
    /// Smallest `bound − LV` against `−κ̃V + ψ‖û‖² + zᵀXz + c̃ + c′`.
    pub worst_slack: f64,
    /// Smallest slack against the sharper intermediate bound that keeps the
    /// error and auxiliary decay rates separate.
    pub worst_intermediate_slack: f64,
    pub violations: usize,
    pub passed: bool,
    pub witness: Option<DissipationWitness>,
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, half: f64) -> Vector {
    if half == 0.0 {
        return Vector::zeros(len);
    }
    Vector::from_fn(len, |_, _| rng.gen_range(-half..=half))
}

struct SampleOutcome {
    slack: f64,
    intermediate_slack: f64,
    witness: DissipationWitness,
}

/// Sampled falsification test of the dissipation inequality with the
/// interface input plugged in.
#[allow(clippy::too_many_arguments)]
pub fn dissipation_check(
    sys: &JumpDiffusionSystem,
    abs: &JumpDiffusionSystem,
    cert: &StorageCertificate,
    gains: &GainSummary,
    samples: usize,
    boxes: &SampleBoxes,
    seed: u64,
) -> Result<DissipationReport> {
    cert.validate_for(sys, abs)?;
    if samples == 0 {
        return Err(Error::Domain("dissipation_check needs at least one sample".into()));
    }
    let widths = [
        boxes.state,
        boxes.abstract_state,
        boxes.aux_state,
        boxes.abstract_input,
        boxes.internal_input,
        boxes.time,
    ];
    if widths.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Domain("sample box half-widths must be finite and nonnegative".into()));
    }
    let seed_cert = &cert.seed;
    let constant = gains.constant();
    let error_decay = seed_cert.decay_rate - gains.pi - gains.pi_prime;

    let outcomes: Vec<SampleOutcome> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let t = if boxes.time > 0.0 {
                rng.gen_range(0.0..=boxes.time)
            } else {
                0.0
            };
            let x = uniform_vector(&mut rng, sys.n(), boxes.state);
            let xhat = uniform_vector(&mut rng, abs.n(), boxes.abstract_state);
            let theta = uniform_vector(&mut rng, seed_cert.aux.state_dim(), boxes.aux_state);
            let uhat = uniform_vector(&mut rng, abs.m(), boxes.abstract_input);
            let w = uniform_vector(&mut rng, sys.p(), boxes.internal_input);
            let what = uniform_vector(&mut rng, abs.p(), boxes.internal_input);
            let u = interface_unchecked(t, &x, &xhat, &uhat, cert, sys, abs);
            let pt = JointPoint {
                t,
                x,
                xhat,
                theta,
                u,
                uhat,
                w,
                what,
            };
            let lv = generator_unchecked(&pt, sys, abs, cert);

            let e = &pt.x - &cert.embedding * &pt.xhat;
            let v_err = e.dot(&(&seed_cert.metric * &e));
            let v_aux = if pt.theta.is_empty() {
                0.0
            } else {
                pt.theta.dot(&(&seed_cert.aux_weight * &pt.theta))
            };
            let u_aux = aux_input(cert, sys, abs, &pt.x, &pt.xhat, &pt.w, &pt.what);
            let z = &seed_cert.aux.c * &pt.theta + &seed_cert.aux.d * u_aux;
            let supply = z.dot(&(&seed_cert.supply * &z));
            let common = gains.psi_slope * pt.uhat.norm_squared() + supply + constant;

            let bound = -gains.kappa_tilde * (v_err + v_aux) + common;
            let intermediate = -error_decay * v_err - seed_cert.aux_decay_rate * v_aux + common;
            SampleOutcome {
                slack: bound - lv,
                intermediate_slack: intermediate - lv,
                witness: DissipationWitness {
                    t,
                    x: pt.x.as_slice().to_vec(),
                    xhat: pt.xhat.as_slice().to_vec(),
                    theta: pt.theta.as_slice().to_vec(),
                    uhat: pt.uhat.as_slice().to_vec(),
                    w: pt.w.as_slice().to_vec(),
                    what: pt.what.as_slice().to_vec(),
                    generator: lv,
                    bound,
                },
            }
        })
        .collect();

    if outcomes.iter().any(|o| !o.slack.is_finite()) {
        return Err(Error::NonFinite("generator evaluation".into()));
    }
    let violations = outcomes
        .iter()
        .filter(|o| o.slack < -DISSIPATION_SLACK)
        .count();
    let worst_intermediate_slack = outcomes
        .iter()
        .map(|o| o.intermediate_slack)
        .fold(f64::INFINITY, f64::min);
    let worst = outcomes
        .into_iter()
        .reduce(|a, b| if b.slack < a.slack { b } else { a })
        .expect("at least one sample");
    Ok(DissipationReport {
        samples,
        worst_slack: worst.slack,
        worst_intermediate_slack,
        violations,
        passed: violations == 0,
        witness: Some(worst.witness),
    })
}
