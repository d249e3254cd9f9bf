//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use dissim::cli::{bundled_config, load_config_str, ProjectConfig};
use dissim::hybrid_model::{AuxiliarySystem, JumpDiffusionSystem, Nonlinearity};
use dissim::matrix_analysis::{Mat, Vector};
use dissim::storage::{JointPoint, SeedCertificate, StorageCertificate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_mat(rng: &mut impl Rng, rows: usize, cols: usize, half: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-half..half))
}

pub fn uniform_vec(rng: &mut impl Rng, len: usize, half: f64) -> Vector {
    Vector::from_fn(len, |_, _| rng.gen_range(-half..half))
}

pub fn example(name: &str) -> ProjectConfig {
    load_config_str(bundled_config(name).expect("bundled config")).expect("bundled config loads")
}

/// Three states, full-rank input, two disturbance channels and a scalar sine
/// nonlinearity; all entries drawn at random.
pub fn random_system(rng: &mut impl Rng) -> JumpDiffusionSystem {
    let n = 3;
    let ones = Mat::from_element(n, 1, 1.0);
    JumpDiffusionSystem::linear(
        uniform_mat(rng, n, n, 1.0),
        Mat::identity(n, n) + uniform_mat(rng, n, n, 0.2),
        uniform_mat(rng, 1, n, 1.0),
        Mat::identity(n, n),
        uniform_mat(rng, n, 2, 1.0),
    )
    .unwrap()
    .with_nonlinearity(ones.clone(), ones.transpose(), Nonlinearity::sine(1, 1.0))
    .unwrap()
}

/// Dynamic auxiliary system of the right input width for `sys`.
pub fn random_aux(rng: &mut impl Rng, sys: &JumpDiffusionSystem, states: usize) -> AuxiliarySystem {
    let width = sys.p() + sys.q2();
    AuxiliarySystem::new(
        -Mat::identity(states, states) * 2.0 + uniform_mat(rng, states, states, 0.3),
        uniform_mat(rng, states, width, 1.0),
        uniform_mat(rng, 2, states, 1.0),
        uniform_mat(rng, 2, width, 1.0),
        sys.p(),
    )
    .unwrap()
}

/// Certificate relating `sys` to itself with `P = I`, `Z = D`, `W = Ŵ = I`.
pub fn self_certificate(sys: &JumpDiffusionSystem, metric: Mat, aux: AuxiliarySystem, aux_weight: Mat) -> StorageCertificate {
    let (n, m, p, l) = (sys.n(), sys.m(), sys.p(), sys.l_k());
    let qt = aux.output_dim();
    StorageCertificate {
        seed: SeedCertificate {
            metric,
            feedback: -Mat::identity(m, n),
            supply: Mat::zeros(qt, qt),
            phi_gain: Mat::zeros(m, l),
            disturbance_basis: sys.d.clone(),
            aux,
            aux_weight,
            decay_rate: 1.0,
            aux_decay_rate: 1.0,
        },
        disturbance_factor: Mat::identity(p, p),
        abstract_disturbance_factor: Mat::identity(p, p),
        phi_gain_abstract: Mat::zeros(m, l),
        embedding: Mat::identity(n, n),
        state_feedforward: Mat::zeros(m, n),
        output_map: Mat::identity(sys.q2(), sys.q2()),
        input_map: Mat::identity(m, m),
    }
}

pub fn random_spd(rng: &mut impl Rng, n: usize) -> Mat {
    let x = uniform_mat(rng, n, n, 1.0);
    &x * x.transpose() + Mat::identity(n, n) * 0.5
}

/// Exact rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn bareiss_rank(rows: usize, cols: usize, entries: &[i64]) -> usize {
    let mut a: Vec<Vec<i128>> = (0..rows)
        .map(|i| entries[i * cols..(i + 1) * cols].iter().map(|&v| v as i128).collect())
        .collect();
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| a[r][col] != 0) else { continue };
        a.swap(rank, pivot);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) / prev;
            }
            a[r][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Minimum of `Σ coeff_i s_i` over the simplex `Σ s_i = 1, s ≥ 0`, found by
/// exhaustive search on a grid that contains every vertex.
pub fn simplex_min(coeff: &[f64], steps: usize) -> f64 {
    fn walk(coeff: &[f64], left: usize, steps: usize, acc: f64) -> f64 {
        if coeff.len() == 1 {
            return acc + coeff[0] * left as f64 / steps as f64;
        }
        (0..=left)
            .map(|k| walk(&coeff[1..], left - k, steps, acc + coeff[0] * k as f64 / steps as f64))
            .fold(f64::INFINITY, f64::min)
    }
    walk(coeff, steps, steps, 0.0)
}

/// Maximum of `Σ a_i s_i` over the unit ball, by projected gradient ascent
/// from several random starts.
pub fn ball_max(a: &[f64], rng: &mut impl Rng) -> f64 {
    let n = a.len();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..8 {
        let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2000 {
            for i in 0..n {
                s[i] += 0.05 * a[i];
            }
            let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 {
                s.iter_mut().for_each(|v| *v /= norm);
            }
        }
        best = best.max(s.iter().zip(a).map(|(x, y)| x * y).sum());
    }
    best
}


pub fn random_point(rng: &mut impl Rng, sys: &JumpDiffusionSystem, abs: &JumpDiffusionSystem, cert: &StorageCertificate) -> JointPoint {
    JointPoint {
        t: rng.gen_range(0.0..5.0),
        x: uniform_vec(rng, sys.n(), 3.0),
        xhat: uniform_vec(rng, abs.n(), 3.0),
        theta: uniform_vec(rng, cert.seed.aux.state_dim(), 3.0),
        u: uniform_vec(rng, sys.m(), 3.0),
        uhat: uniform_vec(rng, abs.m(), 3.0),
        w: uniform_vec(rng, sys.p(), 3.0),
        what: uniform_vec(rng, abs.p(), 3.0),
    }
}

/// Pair of unrelated random systems with a random certificate between them.
pub fn random_pair(rng: &mut impl Rng) -> (JumpDiffusionSystem, JumpDiffusionSystem, StorageCertificate) {
    let sys = random_system(rng);
    let abs = random_system(rng);
    let aux = random_aux(rng, &sys, 2);
    let metric = random_spd(rng, 3);
    let weight = random_spd(rng, 2);
    let mut cert = self_certificate(&sys, metric, aux, weight);
    cert.embedding = Mat::identity(3, 3) + uniform_mat(rng, 3, 3, 0.3);
    cert.seed.feedback = uniform_mat(rng, 3, 3, 1.0);
    cert.state_feedforward = uniform_mat(rng, 3, 3, 1.0);
    cert.abstract_disturbance_factor = uniform_mat(rng, 2, 2, 1.0);
    cert.output_map = uniform_mat(rng, 3, 3, 1.0);
    (sys, abs, cert)
}


/// Random integer `(target, basis)` pair for `image_factor`, with the exact
/// answer `rank [basis target] == rank basis`. Even cases are built to lie in
/// the image; every seventh basis repeats a column.
pub fn integer_image_case(rng: &mut impl Rng, case: usize) -> (Mat, Mat, bool) {
    let rows = rng.gen_range(2..=5);
    let bcols = rng.gen_range(1..=4);
    let tcols = rng.gen_range(1..=2);
    let mut basis: Vec<i64> = (0..rows * bcols).map(|_| rng.gen_range(-3..=3)).collect();
    if case % 7 == 0 {
        for r in 0..rows {
            basis[r * bcols + bcols - 1] = basis[r * bcols];
        }
    }
    let target: Vec<i64> = if case % 2 == 0 {
        let coeff: Vec<i64> = (0..bcols * tcols).map(|_| rng.gen_range(-2..=2)).collect();
        (0..rows * tcols)
            .map(|k| {
                let (r, c) = (k / tcols, k % tcols);
                (0..bcols).map(|j| basis[r * bcols + j] * coeff[j * tcols + c]).sum()
            })
            .collect()
    } else {
        (0..rows * tcols).map(|_| rng.gen_range(-3..=3)).collect()
    };
    let mut joined = Vec::with_capacity(rows * (bcols + tcols));
    for r in 0..rows {
        joined.extend_from_slice(&basis[r * bcols..(r + 1) * bcols]);
        joined.extend_from_slice(&target[r * tcols..(r + 1) * tcols]);
    }
    let expected = bareiss_rank(rows, bcols + tcols, &joined) == bareiss_rank(rows, bcols, &basis);
    let as_mat = |cols: usize, v: &[i64]| Mat::from_fn(rows, cols, |i, j| v[i * cols + j] as f64);
    (as_mat(tcols, &target), as_mat(bcols, &basis), expected)
}
