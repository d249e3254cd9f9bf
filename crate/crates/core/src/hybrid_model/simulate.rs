use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix_analysis::Vector;

use super::signal::InputSignal;
use super::system::{drift_unchecked, JumpDiffusionSystem};

/// Per-trajectory random source. Each step draws one standard normal followed
/// by one Poisson count per jump channel, in channel order.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub normal: f64,
    pub counts: Vec<u64>,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn counts(&mut self, rates: &[f64], h: f64) -> Vec<u64> {
        rates
            .iter()
            .map(|&rate| {
                let mean = rate * h;
                if mean > 0.0 {
                    let dist = Poisson::new(mean).expect("positive Poisson mean");
                    dist.sample(&mut self.rng) as u64
                } else {
                    0
                }
            })
            .collect()
    }

    pub fn draw(&mut self, rates: &[f64], h: f64) -> NoiseDraw {
        let normal = self.normal();
        let counts = self.counts(rates, h);
        NoiseDraw { normal, counts }
    }
}

/// One Euler–Maruyama step with exact Poisson increments.
pub fn euler_step(
    sys: &JumpDiffusionSystem,
    t: f64,
    x: &Vector,
    u: &Vector,
    w: &Vector,
    h: f64,
    noise: &NoiseDraw,
) -> Vector {
    let mut next = x + drift_unchecked(sys, t, x, u, w) * h;
    if noise.normal != 0.0 {
        next += &sys.g * (h.sqrt() * noise.normal);
    }
    for (r, &count) in sys.jumps.iter().zip(&noise.counts) {
        if count > 0 {
            next += r * count as f64;
        }
    }
    next
}

/// Step endpoints `0 = t_0 < … < t_K = horizon` with `K = ⌈horizon/dt⌉`;
/// all steps have length `dt` except possibly the last.
pub fn time_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(Error::Domain(format!(
            "horizon {horizon} must be finite and at least one step ({dt})"
        )));
    }
    let steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
    grid.push(horizon);
    Ok(grid)
}

pub(crate) fn warn_coarse_rates(rates: &[f64], dt: f64, context: &str) {
    if let Some(rate) = rates.iter().copied().find(|r| r * dt >= 0.1) {
        log::warn!("{context}: rate {rate} with dt {dt} gives rate*dt >= 0.1; refine the step");
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub outputs1: Vec<Vector>,
    pub outputs2: Vec<Vector>,
    /// Cumulative Poisson counts per sample and channel.
    pub jump_counts: Vec<Vec<u64>>,
    pub seed: u64,
    pub stream: u64,
}

pub fn simulate(
    sys: &JumpDiffusionSystem,
    x0: &Vector,
    u: &InputSignal,
    w: &InputSignal,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_stream(sys, x0, u, w, horizon, dt, seed, 0)
}

/// Same as [`simulate`] on an explicit RNG substream.
#[allow(clippy::too_many_arguments)]
pub fn simulate_stream(
    sys: &JumpDiffusionSystem,
    x0: &Vector,
    u: &InputSignal,
    w: &InputSignal,
    horizon: f64,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    sys.validate()?;
    if x0.len() != sys.n() {
        return Err(Error::len("initial state", sys.n(), x0.len()));
    }
    if u.dim() != sys.m() {
        return Err(Error::len("input signal", sys.m(), u.dim()));
    }
    if w.dim() != sys.p() {
        return Err(Error::len("internal input signal", sys.p(), w.dim()));
    }
    u.validate()?;
    w.validate()?;
    let grid = time_grid(horizon, dt)?;
    warn_coarse_rates(&sys.rates, dt, "simulate");

    let mut noise = NoiseStream::new(seed, stream);
    let mut states = Vec::with_capacity(grid.len());
    let mut counts = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    let mut total = vec![0u64; sys.r()];
    states.push(x.clone());
    counts.push(total.clone());
    for (k, pair) in grid.windows(2).enumerate() {
        let (t, h) = (pair[0], pair[1] - pair[0]);
        let draw = noise.draw(&sys.rates, h);
        x = euler_step(sys, t, &x, &u.eval(t), &w.eval(t), h, &draw);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                step: k + 1,
                time: pair[1],
            });
        }
        for (acc, c) in total.iter_mut().zip(&draw.counts) {
            *acc += c;
        }
        states.push(x.clone());
        counts.push(total.clone());
    }
    let outputs1 = states.iter().map(|s| &sys.c1 * s).collect();
    let outputs2 = states.iter().map(|s| &sys.c2 * s).collect();
    Ok(Trajectory {
        times: grid,
        states,
        outputs1,
        outputs2,
        jump_counts: counts,
        seed,
        stream,
    })
}
