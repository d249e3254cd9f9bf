mod common;

use dissim::hybrid_model::{simulate, simulate_stream, InputSignal, JumpDiffusionSystem};
use dissim::matrix_analysis::{Mat, Vector};

fn scalar(a: f64) -> Mat {
    Mat::from_element(1, 1, a)
}

fn two_channel_jumps() -> JumpDiffusionSystem {
    JumpDiffusionSystem::linear(-Mat::identity(2, 2), Mat::zeros(2, 0), Mat::identity(2, 2), Mat::identity(2, 2), Mat::zeros(2, 0))
        .unwrap()
        .with_diffusion(Vector::from_vec(vec![0.3, 0.0]))
        .unwrap()
        .with_jumps(
            vec![Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![0.0, -0.5])],
            vec![0.5, 2.0],
        )
        .unwrap()
}

#[test]
fn identical_arguments_give_bit_identical_paths() {
    let sys = two_channel_jumps();
    let x0 = Vector::from_vec(vec![1.0, -1.0]);
    let run = || simulate(&sys, &x0, &InputSignal::zero(0), &InputSignal::zero(0), 3.0, 1e-3, 99).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.times, b.times);
    assert_eq!(a.jump_counts, b.jump_counts);
    for (sa, sb) in a.states.iter().zip(&b.states) {
        assert!(sa.iter().zip(sb.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn jump_counts_grow_at_the_declared_rates() {
    let sys = two_channel_jumps();
    let x0 = Vector::zeros(2);
    let horizon = 2.0;
    let paths = 1000;
    let mut totals = vec![Vec::with_capacity(paths); 2];
    for stream in 0..paths as u64 {
        let tr = simulate_stream(&sys, &x0, &InputSignal::zero(0), &InputSignal::zero(0), horizon, 1e-2, 5, stream).unwrap();
        let last = tr.jump_counts.last().unwrap();
        for ch in 0..2 {
            totals[ch].push(last[ch] as f64 / horizon);
        }
    }
    for (ch, rate) in [0.5, 2.0].into_iter().enumerate() {
        let v = &totals[ch];
        let mean = v.iter().sum::<f64>() / paths as f64;
        let var = v.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
        let se = (var / paths as f64).sqrt();
        assert!((mean - rate).abs() <= 3.0 * se, "channel {ch}: {mean} vs {rate} (se {se})");
    }
}

#[test]
fn outputs_are_recomputable_from_states() {
    let mut rng = common::rng(3);
    let sys = common::random_system(&mut rng).with_diffusion(Vector::from_element(3, 0.2)).unwrap();
    let u = InputSignal::constant(&Vector::from_vec(vec![0.1, 0.0, -0.1]));
    let w = InputSignal::constant(&Vector::from_vec(vec![0.5, -0.5]));
    let tr = simulate(&sys, &Vector::from_element(3, 0.3), &u, &w, 1.0, 1e-2, 4).unwrap();
    for (k, x) in tr.states.iter().enumerate() {
        assert_eq!(tr.outputs1[k], &sys.c1 * x);
        assert_eq!(tr.outputs2[k], &sys.c2 * x);
    }
}

#[test]
fn scalar_linear_endpoint_converges_first_order() {
    let sys = JumpDiffusionSystem::linear(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(1.0), Mat::zeros(1, 0)).unwrap();
    let u = InputSignal::constant(&Vector::from_element(1, 0.5));
    let x0 = Vector::from_element(1, 2.0);
    // x(t) = 0.5 + 1.5 e^{-t}
    let exact = 0.5 + 1.5 * (-1.0f64).exp();
    let err = |dt: f64| {
        let tr = simulate(&sys, &x0, &u, &InputSignal::zero(0), 1.0, dt, 0).unwrap();
        (tr.states.last().unwrap()[0] - exact).abs()
    };
    let ratio = err(1e-2) / err(1e-3);
    assert!((8.0..12.0).contains(&ratio), "ratio {ratio}");
}
