use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid_model::{euler_step, time_grid, warn_coarse_rates, InputSignal, NoiseDraw, NoiseStream};
use crate::matrix_analysis::{block_diag, Vector};
use crate::storage::{aux_input, interface_unchecked, GainSummary};

use super::bound::{composite_gains, error_bound, ErrorBound};
use super::compose::compose;
use super::conditions::Interconnection;

/// Initial data, abstract inputs and sampling parameters of a paired run.
#[derive(Debug, Clone)]
pub struct MonteCarloSetup {
    /// One abstract input signal per abstraction.
    pub uhat: Vec<InputSignal>,
    pub x0: Vector,
    pub xhat0: Vector,
    pub theta0: Vector,
    pub horizon: f64,
    pub dt: f64,
    pub trials: usize,
    pub seed: u64,
    /// Drive both networks with the same Brownian increments (diagnostic only).
    pub shared_noise: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloResult {
    pub times: Vec<f64>,
    /// Empirical `E‖C1 x − Ĉ1 x̂‖²` at each grid time.
    pub mean_sq_error: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bound: Vec<f64>,
    /// Empirical mean of the composite certificate along the paths.
    pub mean_storage: Vec<f64>,
    /// Grid indices where `mean − 3·stderr` exceeds the bound.
    pub violations: Vec<usize>,
    pub trials: usize,
    pub discarded: usize,
    pub error_bound: ErrorBound,
    pub shared_noise: bool,
}

impl MonteCarloResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest `mean − 3·stderr − bound` over the grid.
    pub fn worst_excess(&self) -> f64 {
        (0..self.times.len())
            .map(|k| self.mean_sq_error[k] - 3.0 * self.stderr[k] - self.bound[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `t,mean_sq_error,stderr,bound` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean_sq_error,stderr,bound\n");
        for k in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k], self.mean_sq_error[k], self.stderr[k], self.bound[k]
            );
        }
        out
    }
}

/// Composite certificate value `Σ μ_i V_i + θᵀ Q̃ θ`.
pub fn network_storage(net: &Interconnection, x: &Vector, xhat: &Vector, theta: &Vector) -> Result<f64> {
    let (mut xo, mut ho, mut to) = (0, 0, 0);
    let mut total = 0.0;
    for ((s, a), (c, mu)) in net
        .subsystems
        .iter()
        .zip(&net.abstractions)
        .zip(net.certs.iter().zip(&net.weights))
    {
        let lt = c.seed.aux.state_dim();
        let xi = x.rows(xo, s.n()).into_owned();
        let hi = xhat.rows(ho, a.n()).into_owned();
        let ti = theta.rows(to, lt).into_owned();
        total += mu * crate::storage::storage_value(&xi, &hi, &ti, c)?;
        xo += s.n();
        ho += a.n();
        to += lt;
    }
    if theta.len() > 0 {
        total += theta.dot(&(&net.aux_coupling_weight * theta));
    }
    Ok(total)
}

struct Layout {
    n: Vec<usize>,
    nh: Vec<usize>,
    mh: Vec<usize>,
    lt: Vec<usize>,
    p: Vec<usize>,
    ph: Vec<usize>,
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    sizes
        .iter()
        .map(|s| {
            let o = acc;
            acc += s;
            o
        })
        .collect()
}

/// Co-simulates the concrete network driven through the interface maps and
/// the abstract network driven by `û`, and compares the empirical output
/// error moment with the certified bound.
pub fn monte_carlo_error(
    net: &Interconnection,
    gains: &[GainSummary],
    setup: &MonteCarloSetup,
) -> Result<MonteCarloResult> {
    net.validate()?;
    let k = net.len();
    if gains.len() != k {
        return Err(Error::len("subsystem gains", k, gains.len()));
    }
    if setup.uhat.len() != k {
        return Err(Error::len("abstract input signals", k, setup.uhat.len()));
    }
    for (i, (u, a)) in setup.uhat.iter().zip(&net.abstractions).enumerate() {
        u.validate()?;
        if u.dim() != a.m() {
            return Err(Error::len(format!("abstract input signal {i}"), a.m(), u.dim()));
        }
    }
    if setup.trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    let conc = compose(&net.subsystems, &net.coupling)?;
    let abst = compose(&net.abstractions, &net.abstract_coupling)?;
    if setup.x0.len() != conc.n() {
        return Err(Error::len("x0", conc.n(), setup.x0.len()));
    }
    if setup.xhat0.len() != abst.n() {
        return Err(Error::len("xhat0", abst.n(), setup.xhat0.len()));
    }
    let lt_total = net.aux_state_dim();
    if setup.theta0.len() != lt_total {
        return Err(Error::len("theta0", lt_total, setup.theta0.len()));
    }
    let grid = time_grid(setup.horizon, setup.dt)?;
    warn_coarse_rates(&conc.rates, setup.dt, "concrete network");
    warn_coarse_rates(&abst.rates, setup.dt, "abstract network");

    let layout = Layout {
        n: net.subsystems.iter().map(|s| s.n()).collect(),
        nh: net.abstractions.iter().map(|s| s.n()).collect(),
        mh: net.abstractions.iter().map(|s| s.m()).collect(),
        lt: net.certs.iter().map(|c| c.seed.aux.state_dim()).collect(),
        p: net.subsystems.iter().map(|s| s.p()).collect(),
        ph: net.abstractions.iter().map(|s| s.p()).collect(),
    };
    let (xo, ho, uo, to, po, pho) = (
        offsets(&layout.n),
        offsets(&layout.nh),
        offsets(&layout.mh),
        offsets(&layout.lt),
        offsets(&layout.p),
        offsets(&layout.ph),
    );
    let c2_blk = block_diag(&net.subsystems.iter().map(|s| s.c2.clone()).collect::<Vec<_>>());
    let c2h_blk = block_diag(&net.abstractions.iter().map(|s| s.c2.clone()).collect::<Vec<_>>());
    let stacked_uhat = |t: f64| {
        Vector::from_iterator(
            abst.m(),
            setup.uhat.iter().flat_map(|u| u.eval(t).iter().copied().collect::<Vec<_>>()),
        )
    };
    let uhat_sup_sq = grid
        .iter()
        .map(|&t| stacked_uhat(t).norm_squared())
        .fold(0.0, f64::max);
    let v0 = network_storage(net, &setup.x0, &setup.xhat0, &setup.theta0)?;
    let network_gains = composite_gains(gains, &net.weights)?;
    let eb = ErrorBound::new(&network_gains, v0, uhat_sup_sq);
    let bound: Vec<f64> = grid
        .iter()
        .map(|&t| error_bound(&eb, t))
        .collect::<Result<_>>()?;

    let out_err = |x: &Vector, xh: &Vector| (&conc.c1 * x - &abst.c1 * xh).norm_squared();
    let has_aux = lt_total > 0;

    let run_trial = |trial: usize| -> Option<(Vec<f64>, Vec<f64>)> {
        let base = 2 * trial as u64;
        let mut conc_noise = NoiseStream::new(setup.seed, base);
        let mut abst_noise = NoiseStream::new(setup.seed, base + 1);
        let mut x = setup.x0.clone();
        let mut xh = setup.xhat0.clone();
        let mut theta = setup.theta0.clone();
        let mut errs = Vec::with_capacity(grid.len());
        let mut stor = Vec::with_capacity(grid.len());
        errs.push(out_err(&x, &xh));
        stor.push(v0);
        for pair in grid.windows(2) {
            let (t, h) = (pair[0], pair[1] - pair[0]);
            let uh = stacked_uhat(t);
            let mut u = Vector::zeros(conc.m());
            let mut uoff = 0;
            let mut theta_next = theta.clone();
            let (w, wh) = if has_aux {
                (&net.coupling * (&c2_blk * &x), &net.abstract_coupling * (&c2h_blk * &xh))
            } else {
                (Vector::zeros(0), Vector::zeros(0))
            };
            for i in 0..k {
                let (s, a, c) = (&net.subsystems[i], &net.abstractions[i], &net.certs[i]);
                let xi = x.rows(xo[i], layout.n[i]).into_owned();
                let hi = xh.rows(ho[i], layout.nh[i]).into_owned();
                let ui = uh.rows(uo[i], layout.mh[i]).into_owned();
                let local = interface_unchecked(t, &xi, &hi, &ui, c, s, a);
                u.rows_mut(uoff, s.m()).copy_from(&local);
                uoff += s.m();
                if layout.lt[i] > 0 {
                    let wi = w.rows(po[i], layout.p[i]).into_owned();
                    let whi = wh.rows(pho[i], layout.ph[i]).into_owned();
                    let ua = aux_input(c, s, a, &xi, &hi, &wi, &whi);
                    let ti = theta.rows(to[i], layout.lt[i]).into_owned();
                    let rate = &c.seed.aux.a * &ti + &c.seed.aux.b * ua;
                    theta_next
                        .rows_mut(to[i], layout.lt[i])
                        .copy_from(&(ti + rate * h));
                }
            }
            let (cd, ad) = if setup.shared_noise {
                let normal = conc_noise.normal();
                let cc = conc_noise.counts(&conc.rates, h);
                let ac = conc_noise.counts(&abst.rates, h);
                (NoiseDraw { normal, counts: cc }, NoiseDraw { normal, counts: ac })
            } else {
                (conc_noise.draw(&conc.rates, h), abst_noise.draw(&abst.rates, h))
            };
            let empty = Vector::zeros(0);
            x = euler_step(&conc, t, &x, &u, &empty, h, &cd);
            xh = euler_step(&abst, t, &xh, &uh, &empty, h, &ad);
            theta = theta_next;
            if !(x.iter().all(|v| v.is_finite())
                && xh.iter().all(|v| v.is_finite())
                && theta.iter().all(|v| v.is_finite()))
            {
                return None;
            }
            errs.push(out_err(&x, &xh));
            stor.push(network_storage(net, &x, &xh, &theta).unwrap_or(f64::NAN));
        }
        Some((errs, stor))
    };

    let runs: Vec<Option<(Vec<f64>, Vec<f64>)>> =
        (0..setup.trials).into_par_iter().map(run_trial).collect();
    let kept: Vec<&(Vec<f64>, Vec<f64>)> = runs.iter().flatten().collect();
    let discarded = setup.trials - kept.len();
    if discarded * 100 > setup.trials || kept.is_empty() {
        return Err(Error::DivergedTrials {
            discarded,
            trials: setup.trials,
        });
    }
    if discarded > 0 {
        log::warn!("{discarded} of {} trials diverged and were discarded", setup.trials);
    }
    let count = kept.len() as f64;
    let len = grid.len();
    let mut mean = vec![0.0; len];
    let mut mean_storage = vec![0.0; len];
    for (errs, stor) in &kept {
        for j in 0..len {
            mean[j] += errs[j];
            mean_storage[j] += stor[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    mean_storage.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; len];
    for (errs, _) in &kept {
        for j in 0..len {
            var[j] += (errs[j] - mean[j]).powi(2);
        }
    }
    let stderr: Vec<f64> = if kept.len() > 1 {
        var.iter().map(|v| (v / (count - 1.0) / count).sqrt()).collect()
    } else {
        vec![0.0; len]
    };
    let violations = (0..len)
        .filter(|&j| mean[j] - 3.0 * stderr[j] > bound[j] * (1.0 + 1e-9) + 1e-12)
        .collect();
    Ok(MonteCarloResult {
        times: grid,
        mean_sq_error: mean,
        stderr,
        bound,
        mean_storage,
        violations,
        trials: setup.trials,
        discarded,
        error_bound: eb,
        shared_noise: setup.shared_noise,
    })
}
