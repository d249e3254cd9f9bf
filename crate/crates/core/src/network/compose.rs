use crate::error::{Error, Result};
use crate::hybrid_model::{
    drift_unchecked, time_grid, warn_coarse_rates, InputSignal, JumpDiffusionSystem, NoiseDraw,
    NoiseStream, Nonlinearity,
};
use crate::matrix_analysis::{block_diag, Mat, Vector};

/// Jump rates of the shared Poisson channels. Every subsystem that jumps must
/// use the same rate list; jump-free subsystems do not see the channels.
pub fn shared_rates(subsystems: &[JumpDiffusionSystem]) -> Result<Vec<f64>> {
    let mut rates: Option<&Vec<f64>> = None;
    for (i, s) in subsystems.iter().enumerate() {
        if s.r() == 0 {
            continue;
        }
        match rates {
            None => rates = Some(&s.rates),
            Some(r) if r == &s.rates => {}
            Some(r) => {
                return Err(Error::Domain(format!(
                    "subsystem {i} jump rates {:?} differ from the shared channel rates {r:?}",
                    s.rates
                )))
            }
        }
    }
    Ok(rates.cloned().unwrap_or_default())
}

fn stack_blocks<F: Fn(&JumpDiffusionSystem) -> Mat>(subsystems: &[JumpDiffusionSystem], f: F) -> Mat {
    block_diag(&subsystems.iter().map(f).collect::<Vec<_>>())
}

/// Closes the internal channels `w = M · [C2_1 x_1; …; C2_N x_N]`.
///
/// Subsystems share one Brownian motion (diffusion columns are stacked) and
/// the Poisson channels returned by [`shared_rates`].
pub fn compose(subsystems: &[JumpDiffusionSystem], coupling: &Mat) -> Result<JumpDiffusionSystem> {
    if subsystems.is_empty() {
        return Err(Error::Domain("an interconnection needs at least one subsystem".into()));
    }
    for s in subsystems {
        s.validate()?;
    }
    let p_total: usize = subsystems.iter().map(|s| s.p()).sum();
    let q_total: usize = subsystems.iter().map(|s| s.q2()).sum();
    if coupling.shape() != (p_total, q_total) {
        return Err(Error::shape("coupling", (p_total, q_total), coupling.shape()));
    }
    let rates = shared_rates(subsystems)?;

    let d = stack_blocks(subsystems, |s| s.d.clone());
    let c2 = stack_blocks(subsystems, |s| s.c2.clone());
    let a = stack_blocks(subsystems, |s| s.a.clone()) + &d * coupling * &c2;
    let n = a.nrows();

    let g = Vector::from_iterator(n, subsystems.iter().flat_map(|s| s.g.iter().copied()));
    let jumps = (0..rates.len())
        .map(|ch| {
            Vector::from_iterator(
                n,
                subsystems.iter().flat_map(|s| {
                    if s.r() == 0 {
                        Vector::zeros(s.n()).iter().copied().collect::<Vec<_>>()
                    } else {
                        s.jumps[ch].iter().copied().collect()
                    }
                }),
            )
        })
        .collect();
    let phi = if subsystems.len() == 1 {
        subsystems[0].phi.clone()
    } else {
        Nonlinearity::stacked(subsystems.iter().map(|s| s.phi.clone()).collect())
    };
    let closed = JumpDiffusionSystem {
        a,
        b: stack_blocks(subsystems, |s| s.b.clone()),
        c1: stack_blocks(subsystems, |s| s.c1.clone()),
        c2,
        d: Mat::zeros(n, 0),
        e: stack_blocks(subsystems, |s| s.e.clone()),
        f: stack_blocks(subsystems, |s| s.f.clone()),
        g,
        jumps,
        rates,
        phi,
    };
    closed.validate()?;
    Ok(closed)
}

/// Simulates the subsystems side by side, exchanging internal signals
/// explicitly at every step. The noise sequence is the one used by
/// simulating [`compose`]'s output with the same seed.
pub fn simulate_explicit(
    subsystems: &[JumpDiffusionSystem],
    coupling: &Mat,
    x0: &Vector,
    u: &InputSignal,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<Vector>> {
    let closed = compose(subsystems, coupling)?;
    if x0.len() != closed.n() {
        return Err(Error::len("initial state", closed.n(), x0.len()));
    }
    if u.dim() != closed.m() {
        return Err(Error::len("input signal", closed.m(), u.dim()));
    }
    let grid = time_grid(horizon, dt)?;
    warn_coarse_rates(&closed.rates, dt, "simulate_explicit");
    let mut noise = NoiseStream::new(seed, 0);
    let mut parts: Vec<Vector> = Vec::with_capacity(subsystems.len());
    let mut offset = 0;
    for s in subsystems {
        parts.push(x0.rows(offset, s.n()).into_owned());
        offset += s.n();
    }
    let stack = |parts: &[Vector]| {
        Vector::from_iterator(closed.n(), parts.iter().flat_map(|p| p.iter().copied()))
    };
    let mut states = vec![stack(&parts)];
    for (k, pair) in grid.windows(2).enumerate() {
        let (t, h) = (pair[0], pair[1] - pair[0]);
        let draw = noise.draw(&closed.rates, h);
        let outputs = Vector::from_iterator(
            closed.c2.nrows(),
            subsystems
                .iter()
                .zip(&parts)
                .flat_map(|(s, x)| (&s.c2 * x).iter().copied().collect::<Vec<_>>()),
        );
        let internal = coupling * outputs;
        let inputs = u.eval(t);
        let (mut w_off, mut u_off) = (0, 0);
        for (s, x) in subsystems.iter().zip(parts.iter_mut()) {
            let w = internal.rows(w_off, s.p()).into_owned();
            let ui = inputs.rows(u_off, s.m()).into_owned();
            w_off += s.p();
            u_off += s.m();
            let local = NoiseDraw {
                normal: draw.normal,
                counts: if s.r() == 0 { Vec::new() } else { draw.counts.clone() },
            };
            let mut next = x.clone() + drift_unchecked(s, t, x, &ui, &w) * h;
            next += &s.g * (h.sqrt() * local.normal);
            for (r, &c) in s.jumps.iter().zip(&local.counts) {
                next += r * c as f64;
            }
            *x = next;
        }
        let stacked = stack(&parts);
        if !stacked.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                step: k + 1,
                time: pair[1],
            });
        }
        states.push(stacked);
    }
    Ok(states)
}
