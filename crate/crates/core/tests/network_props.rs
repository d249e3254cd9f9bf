mod common;

use dissim::abstraction::{build_abstraction, BuildOptions};
use dissim::hybrid_model::{simulate, AuxiliarySystem, InputSignal};
use dissim::matrix_analysis::{Mat, Vector};
use dissim::network::{
    check_matching_condition, composite_gains, compose, error_bound, monte_carlo_error, simulate_explicit,
    solve_abstract_coupling, ErrorBound, Interconnection, MonteCarloSetup, NetworkGains,
};
use dissim::storage::{GainSummary, SeedCertificate};
use proptest::prelude::*;

fn linear_gain(kappa: f64, psi: f64, alpha: f64, c: f64) -> GainSummary {
    GainSummary {
        alpha_slope: alpha,
        kappa_tilde: kappa,
        psi_slope: psi,
        c_tilde: c,
        c_prime: 0.0,
        pi: 0.1,
        pi_prime: 0.1,
    }
}

#[test]
fn composite_gains_spec_cases() {
    let g = composite_gains(&[linear_gain(1.0, 3.0, 1.0, 0.0), linear_gain(2.0, 4.0, 1.0, 0.0)], &[1.0, 1.0]).unwrap();
    assert_eq!(g.kappa_tilde, 1.0);
    assert!((g.psi_slope - 5.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composite_gains_match_numeric_optimizers(
        parts in prop::collection::vec((0.1f64..5.0, 0.0f64..5.0, 0.1f64..5.0, 0.0f64..5.0, 0.2f64..3.0), 1..4),
        seed in any::<u64>(),
    ) {
        let gains: Vec<GainSummary> = parts.iter().map(|&(k, p, a, c, _)| linear_gain(k, p, a, c)).collect();
        let mu: Vec<f64> = parts.iter().map(|p| p.4).collect();
        let net: NetworkGains = composite_gains(&gains, &mu).unwrap();
        let steps = 60;

        // decay: largest κ with Σ μ_i κ_i v_i ≥ κ Σ μ_i v_i, i.e. min over s = μ∘v normalized
        let kappa: Vec<f64> = gains.iter().map(|g| g.kappa_tilde).collect();
        prop_assert!((net.kappa_tilde - common::simplex_min(&kappa, steps)).abs() <= 1e-12);

        // output slope: largest α with Σ μ_i α_i e_i ≥ α Σ e_i for e ≥ 0 (N^0 = 1 at k = 2)
        let weighted: Vec<f64> = gains.iter().zip(&mu).map(|(g, m)| g.alpha_slope * m).collect();
        prop_assert!((net.alpha_slope - common::simplex_min(&weighted, steps)).abs() <= 1e-12);

        // input slope: sup of Σ μ_i ψ_i s_i over ‖s‖ ≤ 1
        let slopes: Vec<f64> = gains.iter().zip(&mu).map(|(g, m)| g.psi_slope * m).collect();
        let mut rng = common::rng(seed);
        let numeric = common::ball_max(&slopes, &mut rng);
        prop_assert!((net.psi_slope - numeric).abs() <= 1e-9 * (1.0 + numeric));

        let direct: f64 = gains.iter().zip(&mu).map(|(g, m)| m * g.constant()).sum();
        prop_assert!((net.constant - direct).abs() <= 1e-12 * (1.0 + direct));
    }

    #[test]
    fn error_bound_is_monotone(
        kappa in 0.01f64..10.0, alpha in 0.01f64..10.0, psi in 0.0f64..5.0, c in 0.0f64..5.0,
        v0 in 0.0f64..10.0, dv in 0.0f64..10.0, u in 0.0f64..10.0, du in 0.0f64..10.0, t in 0.0f64..20.0,
    ) {
        let gains = NetworkGains { kappa_tilde: kappa, psi_slope: psi, alpha_slope: alpha, constant: c };
        let base = error_bound(&ErrorBound::new(&gains, v0, u), t).unwrap();
        prop_assert!(error_bound(&ErrorBound::new(&gains, v0 + dv, u), t).unwrap() >= base);
        prop_assert!(error_bound(&ErrorBound::new(&gains, v0, u + du), t).unwrap() >= base);
    }

    #[test]
    fn matching_coupling_is_recovered(
        w_hat in prop::collection::vec(-2.0f64..2.0, 8),
        m_hat in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let w_hat = Mat::from_row_slice(4, 2, &w_hat);
        prop_assume!(dissim::matrix_analysis::rank(&w_hat) == 2);
        let m_hat = Mat::from_row_slice(2, 3, &m_hat);
        let coupling = &w_hat * &m_hat;
        let sol = solve_abstract_coupling(&Mat::identity(4, 4), &coupling, &Mat::identity(3, 3), &w_hat, 1e-9).unwrap();
        prop_assert!(sol.feasible && sol.unique);
        prop_assert!((&sol.abstract_coupling - &m_hat).norm() <= 1e-9 * (1.0 + m_hat.norm()));
    }
}

#[test]
fn example_couplings_are_recovered_from_the_matching_condition() {
    for (cfg, name) in [("example1", "complete_graph"), ("example2", "ring")] {
        let resolved = common::example(cfg).resolve_network(name, 1e-8).unwrap();
        let net = &resolved.net;
        assert!(check_matching_condition(net, 1e-8).unwrap().passed);
        let sol = solve_abstract_coupling(
            &net.disturbance_factor(),
            &net.coupling,
            &net.output_map(),
            &net.abstract_disturbance_factor(),
            1e-8,
        )
        .unwrap();
        assert!(sol.feasible && sol.unique, "{cfg}");
        assert!((&sol.abstract_coupling - &net.abstract_coupling).norm() <= 1e-10, "{cfg}");
    }
}

/// Folding the coupling into one system and exchanging the internal signals
/// step by step are the same computation.
#[test]
fn composed_and_explicit_simulations_agree() {
    for cfg in ["example1", "example2"] {
        let project = common::example(cfg);
        let resolved = project.resolve_network(project.networks.keys().next().unwrap(), 1e-8).unwrap();
        let subs = &resolved.net.subsystems;
        let coupling = &resolved.net.coupling;
        let closed = compose(subs, coupling).unwrap();
        let mut rng = common::rng(41);
        let x0 = common::uniform_vec(&mut rng, closed.n(), 1.0);
        let u = InputSignal::constant(&common::uniform_vec(&mut rng, closed.m(), 1.0));
        let folded = simulate(&closed, &x0, &u, &InputSignal::zero(0), 1.0, 1e-3, 8).unwrap();
        let explicit = simulate_explicit(subs, coupling, &x0, &u, 1.0, 1e-3, 8).unwrap();
        assert_eq!(folded.states.len(), explicit.len());
        for (k, (a, b)) in folded.states.iter().zip(&explicit).enumerate() {
            assert!((a - b).amax() <= 1e-12 * (1.0 + a.amax()), "{cfg} step {k}: {:e}", (a - b).amax());
        }
    }
}

/// An abstraction built with `P = I` and started on the concrete state never
/// separates from it when there is no noise.
#[test]
fn identity_abstraction_tracks_exactly() {
    let mut rng = common::rng(42);
    for _ in 0..3 {
        let sys = common::random_system(&mut rng);
        let sys = dissim::hybrid_model::JumpDiffusionSystem { a: &sys.a - Mat::identity(3, 3) * 2.0, ..sys };
        let k = sys.p() + sys.q2();
        let seed = SeedCertificate {
            metric: Mat::identity(3, 3),
            feedback: -Mat::identity(3, 3),
            supply: Mat::zeros(k, k),
            phi_gain: Mat::zeros(3, 1),
            disturbance_basis: sys.d.clone(),
            aux: AuxiliarySystem::static_map(Mat::identity(k, k), sys.p()).unwrap(),
            aux_weight: Mat::zeros(0, 0),
            decay_rate: 1.0,
            aux_decay_rate: 1.0,
        };
        let built = build_abstraction(&sys, &seed, &Mat::identity(3, 3), &BuildOptions::default()).unwrap();
        let net = Interconnection {
            subsystems: vec![sys.clone()],
            abstractions: vec![built.abs_sys.clone()],
            certs: vec![built.cert.clone()],
            coupling: Mat::zeros(sys.p(), sys.q2()),
            abstract_coupling: Mat::zeros(built.abs_sys.p(), built.abs_sys.q2()),
            weights: vec![1.0],
            aux_coupling_weight: Mat::zeros(0, 0),
        };
        let x0 = common::uniform_vec(&mut rng, 3, 1.0);
        let setup = MonteCarloSetup {
            uhat: vec![InputSignal::constant(&common::uniform_vec(&mut rng, built.abs_sys.m(), 1.0))],
            x0: x0.clone(),
            xhat0: x0,
            theta0: Vector::zeros(0),
            horizon: 2.0,
            dt: 1e-3,
            trials: 4,
            seed: 1,
            shared_noise: false,
        };
        let gains = [linear_gain(0.5, 0.0, 1.0, 0.0)];
        let res = monte_carlo_error(&net, &gains, &setup).unwrap();
        let worst = res.mean_sq_error.iter().cloned().fold(0.0, f64::max);
        assert!(worst <= 1e-24, "worst squared error {worst:e}");
        assert!(res.passed());
    }
}
