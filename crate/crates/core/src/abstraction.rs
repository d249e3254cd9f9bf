//! Construction of a reduced abstraction and the matching certificate from a
//! concrete system, seed certificate data and an embedding `P`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid_model::JumpDiffusionSystem;
use crate::matrix_analysis::{
    block_diag, canonical_basis, column_space, image_factor, null_space_with_cutoff,
    pseudo_inverse, rank, solve_pair_embedding, split_solve, Mat, PairEmbedding, Vector,
};
use crate::storage::{
    check_assumption, check_structural_equations, compute_rtilde, default_rate_grid,
    jump_matching, SeedCertificate, StorageCertificate,
};

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Relative tolerance for inclusions and residual checks.
    pub tol: f64,
    /// Abstract input matrix; identity of size `n̂` when absent.
    pub input_matrix: Option<Mat>,
    /// Fit one abstract jump channel when the concrete system jumps.
    pub match_jumps: bool,
    pub rate_grid: Vec<f64>,
    /// `π′` used by jump matching; a quarter of the decay rate when absent.
    pub jump_split: Option<f64>,
    /// Abort when the seed data fails the block inequality.
    pub require_assumption: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            input_matrix: None,
            match_jumps: true,
            rate_grid: default_rate_grid(),
            jump_split: None,
            require_assumption: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostic {
    pub step: &'static str,
    pub residual: f64,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AbstractionResult {
    pub abs_sys: JumpDiffusionSystem,
    pub cert: StorageCertificate,
    pub diagnostics: Vec<StepDiagnostic>,
}

impl AbstractionResult {
    pub fn diagnostic(&self, step: &str) -> Option<&StepDiagnostic> {
        self.diagnostics.iter().find(|d| d.step == step)
    }
}

fn infeasible(condition: &str, residual: f64) -> Error {
    Error::Infeasible {
        condition: condition.to_string(),
        residual,
    }
}

/// Block-diagonal stack of all-ones columns, one per group size.
pub fn indicator_embedding(groups: &[usize]) -> Mat {
    let blocks: Vec<Mat> = groups.iter().map(|&g| Mat::from_element(g, 1, 1.0)).collect();
    block_diag(&blocks)
}

/// Builds the abstraction for the first candidate with the fewest columns
/// that succeeds. Returns its index among `candidates`.
pub fn select_embedding(
    sys: &JumpDiffusionSystem,
    seed: &SeedCertificate,
    candidates: &[Mat],
    options: &BuildOptions,
) -> Result<(usize, AbstractionResult)> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&i| candidates[i].ncols());
    let mut last_err = Error::Domain("no candidate embeddings supplied".into());
    for i in order {
        match build_abstraction(sys, seed, &candidates[i], options) {
            Ok(res) => return Ok((i, res)),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

pub fn build_abstraction(
    sys: &JumpDiffusionSystem,
    seed: &SeedCertificate,
    embedding: &Mat,
    options: &BuildOptions,
) -> Result<AbstractionResult> {
    sys.validate()?;
    seed.validate_for(sys)?;
    let tol = options.tol;
    let n = sys.n();
    let p = embedding;
    if p.nrows() != n {
        return Err(Error::shape("embedding", (n, p.ncols()), p.shape()));
    }
    let nh = p.ncols();
    if nh == 0 || rank(p) < nh {
        return Err(Error::Rank(format!(
            "embedding must be injective (rank {} of {nh} columns)",
            rank(p)
        )));
    }
    let mut diagnostics = Vec::new();

    let assumption = check_assumption(sys, seed, 1e-8)?;
    diagnostics.push(StepDiagnostic {
        step: "block inequality",
        residual: assumption.lmi.margin,
        feasible: assumption.passed,
        note: (!assumption.passed).then(|| {
            format!(
                "seed data fails the block inequality (margin {:.3e}); construction continues",
                assumption.lmi.margin
            )
        }),
    });
    if options.require_assumption && !assumption.passed {
        return Err(infeasible("block inequality", assumption.lmi.margin));
    }

    let z = &seed.disturbance_basis;
    let w_fit = image_factor(&sys.d, z, tol)?;
    diagnostics.push(StepDiagnostic {
        step: "disturbance factor (im D in im Z)",
        residual: w_fit.residual,
        feasible: w_fit.feasible,
        note: None,
    });
    let disturbance_factor = w_fit
        .factor
        .ok_or_else(|| infeasible("im D in im Z", w_fit.residual))?;

    let (a_hat, state_feedforward, residual) = match solve_pair_embedding(&sys.a, &sys.b, p, tol)? {
        PairEmbedding::Feasible { a_hat, q, residual } => (a_hat, q, residual),
        PairEmbedding::Infeasible { residual } => {
            return Err(infeasible("im AP in im P + im B", residual));
        }
    };
    diagnostics.push(StepDiagnostic {
        step: "state embedding (im AP in im P + im B)",
        residual,
        feasible: true,
        note: None,
    });

    let (e_hat, gain_gap, residual) = split_solve(&sys.e, p, &sys.b);
    let feasible = residual <= tol * sys.e.norm();
    diagnostics.push(StepDiagnostic {
        step: "nonlinearity split (im E in im P + im B)",
        residual,
        feasible,
        note: None,
    });
    if !feasible {
        return Err(infeasible("im E in im P + im B", residual));
    }
    let phi_gain_abstract = &seed.phi_gain + gain_gap;

    let f_hat = &sys.f * p;
    let c1_hat = &sys.c1 * p;

    let (jumps, rates) = if options.match_jumps && sys.r() > 0 {
        let pi_prime = options.jump_split.unwrap_or(seed.decay_rate / 4.0);
        let fit = jump_matching(sys, &seed.metric, p, pi_prime, &options.rate_grid)?;
        diagnostics.push(StepDiagnostic {
            step: "jump matching",
            residual: fit.objective,
            feasible: true,
            note: Some(format!("rate {}", fit.rate)),
        });
        if fit.jump.amax() > 0.0 {
            (vec![fit.jump], vec![fit.rate])
        } else {
            (Vec::new(), Vec::new())
        }
    } else {
        (Vec::new(), Vec::new())
    };

    let c2p = &sys.c2 * p;
    let output_map = canonical_basis(&column_space(&c2p));
    let c2_fit = image_factor(&c2p, &output_map, tol)?;
    diagnostics.push(StepDiagnostic {
        step: "output factor (im C2P in im H)",
        residual: c2_fit.residual,
        feasible: c2_fit.feasible,
        note: None,
    });
    let c2_hat = c2_fit
        .factor
        .ok_or_else(|| infeasible("im C2P in im H", c2_fit.residual))?;

    let projector = Mat::identity(n, n) - p * pseudo_inverse(p);
    let reach = &projector * z;
    let kernel = null_space_with_cutoff(&reach, tol * z.norm().max(1.0));
    let keeps_factor = (&reach * &disturbance_factor).norm() <= tol * (1.0 + z.norm())
        && rank(&disturbance_factor) == kernel.ncols();
    let abstract_disturbance_factor = if keeps_factor {
        disturbance_factor.clone()
    } else {
        canonical_basis(&kernel)
    };
    let target = z * &abstract_disturbance_factor;
    let d_fit = image_factor(&target, p, tol)?;
    diagnostics.push(StepDiagnostic {
        step: "abstract disturbance (im Z What in im P)",
        residual: d_fit.residual,
        feasible: d_fit.feasible,
        note: Some(format!("rank {}", abstract_disturbance_factor.ncols())),
    });
    let d_hat = d_fit
        .factor
        .ok_or_else(|| infeasible("im Z What in im P", d_fit.residual))?;

    let b_hat = match &options.input_matrix {
        Some(b) => {
            if b.nrows() != nh {
                return Err(Error::shape("input_matrix", (nh, b.ncols()), b.shape()));
            }
            b.clone()
        }
        None => Mat::identity(nh, nh),
    };

    let abs_sys = JumpDiffusionSystem {
        a: a_hat,
        b: b_hat,
        c1: c1_hat,
        c2: c2_hat,
        d: d_hat,
        e: e_hat,
        f: f_hat,
        g: Vector::zeros(nh),
        jumps,
        rates,
        phi: sys.phi.clone(),
    };
    abs_sys.validate()?;
    let input_map = compute_rtilde(sys, &abs_sys, &seed.metric, p)?;

    let cert = StorageCertificate {
        seed: seed.clone(),
        disturbance_factor,
        abstract_disturbance_factor,
        phi_gain_abstract,
        embedding: p.clone(),
        state_feedforward,
        output_map,
        input_map,
    };
    let structural = check_structural_equations(sys, &abs_sys, &cert, 10.0 * tol)?;
    diagnostics.push(StepDiagnostic {
        step: "matching equations",
        residual: structural.max_residual(),
        feasible: structural.passed,
        note: None,
    });
    Ok(AbstractionResult {
        abs_sys,
        cert,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid_model::{AuxiliarySystem, Nonlinearity};
    use approx::assert_relative_eq;

    fn static_seed(sys: &JumpDiffusionSystem) -> SeedCertificate {
        let (n, m, p, q2) = (sys.n(), sys.m(), sys.p(), sys.q2());
        let k = p + q2;
        SeedCertificate {
            metric: Mat::identity(n, n),
            feedback: -Mat::identity(m, n),
            supply: Mat::zeros(k, k),
            phi_gain: Mat::zeros(m, sys.l_k()),
            disturbance_basis: sys.d.clone(),
            aux: AuxiliarySystem::static_map(Mat::identity(k, k), p).unwrap(),
            aux_weight: Mat::zeros(0, 0),
            decay_rate: 1.0,
            aux_decay_rate: 1.0,
        }
    }

    fn sample_system() -> JumpDiffusionSystem {
        let ones = Mat::from_element(3, 1, 1.0);
        JumpDiffusionSystem::linear(
            Mat::from_row_slice(3, 3, &[-1.0, 0.5, 0.0, 0.2, -2.0, 1.0, 0.0, 0.3, -0.7]),
            Mat::identity(3, 3),
            Mat::from_row_slice(1, 3, &[1.0, 0.0, 2.0]),
            Mat::identity(3, 3),
            Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
        )
        .unwrap()
        .with_nonlinearity(ones.clone(), ones.transpose(), Nonlinearity::sine(1, 1.0))
        .unwrap()
        .with_diffusion(Vector::from_element(3, 0.1))
        .unwrap()
    }

    #[test]
    fn identity_embedding_reproduces_system() {
        let sys = sample_system();
        let seed = static_seed(&sys);
        let res = build_abstraction(&sys, &seed, &Mat::identity(3, 3), &BuildOptions::default()).unwrap();
        let abs = &res.abs_sys;
        assert_relative_eq!(abs.a, sys.a, epsilon = 1e-12);
        assert_relative_eq!(abs.c1, sys.c1, epsilon = 1e-12);
        assert_relative_eq!(abs.e, sys.e, epsilon = 1e-12);
        assert_relative_eq!(abs.d, sys.d, epsilon = 1e-12);
        assert!(res.cert.state_feedforward.norm() < 1e-12);
        assert_relative_eq!(res.cert.output_map, Mat::identity(3, 3), epsilon = 1e-12);
        assert_relative_eq!(res.cert.phi_gain_abstract, seed.phi_gain, epsilon = 1e-12);
        assert_eq!(res.cert.abstract_disturbance_factor, res.cert.disturbance_factor);
        // the seed here is arbitrary, so only the construction steps must hold
        assert!(
            res.diagnostics.iter().filter(|d| d.step != "block inequality").all(|d| d.feasible),
            "{:?}",
            res.diagnostics
        );
    }

    #[test]
    fn indicator_blocks() {
        let p = indicator_embedding(&[2, 1]);
        assert_eq!(p, Mat::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn non_injective_embedding_rejected() {
        let sys = sample_system();
        let p = Mat::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            build_abstraction(&sys, &static_seed(&sys), &p, &BuildOptions::default()),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn uncontrollable_direction_is_infeasible() {
        // B = 0 and P does not span an invariant subspace of A
        let sys = JumpDiffusionSystem::linear(
            Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            Mat::zeros(2, 1),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            Mat::zeros(0, 2),
            Mat::zeros(2, 0),
        )
        .unwrap();
        let mut seed = static_seed(&sys);
        seed.feedback = Mat::zeros(1, 2);
        let p = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let err = build_abstraction(&sys, &seed, &p, &BuildOptions::default()).unwrap_err();
        assert!(err.to_string().contains("im AP"), "{err}");
    }

    #[test]
    fn selection_prefers_fewest_columns() {
        let sys = sample_system();
        let seed = static_seed(&sys);
        let candidates = vec![Mat::identity(3, 3), indicator_embedding(&[3])];
        let (idx, res) = select_embedding(&sys, &seed, &candidates, &BuildOptions::default()).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(res.abs_sys.n(), 1);
    }
}
