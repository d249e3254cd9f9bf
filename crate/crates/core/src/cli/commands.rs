//! Subcommand orchestration: each command runs one or more stages, collects
//! human-readable lines, writes artifacts and a machine-readable report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::abstraction::build_abstraction;
use crate::hybrid_model::{simulate, time_grid, InputSignal, JumpDiffusionSystem};
use crate::matrix_analysis::{spectral_abscissa, Mat, Vector};
use crate::network::{
    check_interconnection_lmi, check_matching_condition, compose, composite_gains, error_bound,
    monte_carlo_error, network_storage, ErrorBound, MonteCarloSetup,
};
use crate::storage::{
    check_assumption, check_structural_equations, default_splits, dissipation_check, gain_summary,
    gain_summary_search, GainSummary,
};

use super::config::{
    bundled_config, load_config, load_config_str, ProjectConfig, ResolvedNetwork, RunSettings,
    SCHEMA_VERSION,
};
use super::emit::{certificate_to_json, system_to_json};
use super::matrix::matrix_to_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    VerifyCert,
    VerifyNet,
    Abstract,
    Compose,
    Bound,
    McValidate,
    Example1,
    Example2,
}

impl Subcommand {
    pub const ALL: [Subcommand; 9] = [
        Subcommand::Simulate,
        Subcommand::VerifyCert,
        Subcommand::VerifyNet,
        Subcommand::Abstract,
        Subcommand::Compose,
        Subcommand::Bound,
        Subcommand::McValidate,
        Subcommand::Example1,
        Subcommand::Example2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::VerifyCert => "verify-cert",
            Subcommand::VerifyNet => "verify-net",
            Subcommand::Abstract => "abstract",
            Subcommand::Compose => "compose",
            Subcommand::Bound => "bound",
            Subcommand::McValidate => "mc-validate",
            Subcommand::Example1 => "example1",
            Subcommand::Example2 => "example2",
        }
    }

    fn bundled(self) -> Option<&'static str> {
        match self {
            Subcommand::Example1 => Some("example1"),
            Subcommand::Example2 => Some("example2"),
            _ => None,
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand {s:?}"))
    }
}

/// Outcome classes, ordered by precedence when stages are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    ConfigError,
    Diverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::ConfigError => 2,
            Status::Diverged => 3,
        }
    }

    fn label(passed: bool) -> &'static str {
        if passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Command-line overrides of the run settings.
#[derive(Debug, Clone)]
pub struct RunFlags {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub tol: Option<f64>,
    pub shared_noise: bool,
    pub out: PathBuf,
}

impl Default for RunFlags {
    fn default() -> Self {
        Self {
            seed: None,
            trials: None,
            dt: None,
            horizon: None,
            tol: None,
            shared_noise: false,
            out: PathBuf::from("dissim-out"),
        }
    }
}

impl RunFlags {
    fn apply(&self, base: &RunSettings) -> RunSettings {
        RunSettings {
            dt: self.dt.unwrap_or(base.dt),
            horizon: self.horizon.unwrap_or(base.horizon),
            trials: self.trials.unwrap_or(base.trials),
            seed: self.seed.unwrap_or(base.seed),
            tolerance: self.tol.unwrap_or(base.tolerance),
            samples: base.samples,
            boxes: base.boxes,
            shared_noise: self.shared_noise || base.shared_noise,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub lines: Vec<String>,
    pub report: Value,
    /// Where `report.json` went; `None` if it could not be written.
    pub report_path: Option<PathBuf>,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

#[derive(Debug)]
enum StageError {
    Lib(crate::Error),
    Io(std::io::Error),
}

impl From<crate::Error> for StageError {
    fn from(e: crate::Error) -> Self {
        StageError::Lib(e)
    }
}

impl From<std::io::Error> for StageError {
    fn from(e: std::io::Error) -> Self {
        StageError::Io(e)
    }
}

impl StageError {
    fn status(&self) -> Status {
        match self {
            StageError::Lib(crate::Error::Divergence { .. } | crate::Error::DivergedTrials { .. }) => {
                Status::Diverged
            }
            StageError::Lib(crate::Error::Infeasible { .. } | crate::Error::Rank(_)) => Status::Fail,
            _ => Status::ConfigError,
        }
    }

    fn message(&self) -> String {
        match self {
            StageError::Lib(e) => e.to_string(),
            StageError::Io(e) => format!("i/o error: {e}"),
        }
    }
}

type Stage = Result<(Value, bool), StageError>;

struct Session<'a> {
    cfg: &'a ProjectConfig,
    run: RunSettings,
    out: PathBuf,
    lines: Vec<String>,
    artifacts: Vec<PathBuf>,
}

impl Session<'_> {
    fn say(&mut self, line: String) {
        log::info!("{line}");
        self.lines.push(line);
    }

    fn write(&mut self, file: &str, contents: &str) -> Result<(), StageError> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(file);
        std::fs::write(&path, contents)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn write_json(&mut self, file: &str, value: &Value) -> Result<(), StageError> {
        let text = serde_json::to_string_pretty(value).expect("values serialize");
        self.write(file, &(text + "\n"))
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn link_gains(cfg: &ProjectConfig, name: &str, link: &super::config::ResolvedLink, uhat_sup_sq: Option<f64>) -> crate::Result<GainSummary> {
    let (sys, abs, cert) = (&link.system, &link.abstraction, &link.cert);
    match (cfg.certificates[name].splits, uhat_sup_sq) {
        (Some((pi, pi_prime)), _) => gain_summary(sys, abs, cert, pi, pi_prime),
        (None, Some(u)) => gain_summary_search(sys, abs, cert, u),
        (None, None) => {
            let (pi, pi_prime) = default_splits(cert);
            gain_summary(sys, abs, cert, pi, pi_prime)
        }
    }
}

fn stage_verify_cert(s: &mut Session) -> Stage {
    let mut results = Map::new();
    let mut all = true;
    let tol = s.run.tolerance;
    for name in s.cfg.certificates.keys() {
        let link = s.cfg.resolve_certificate(name)?;
        let assumption = check_assumption(&link.system, &link.cert.seed, tol)?;
        let structural = check_structural_equations(&link.system, &link.abstraction, &link.cert, tol)?;
        let gains = link_gains(s.cfg, name, &link, None)?;
        let dissipation = dissipation_check(
            &link.system,
            &link.abstraction,
            &link.cert,
            &gains,
            s.run.samples,
            &s.run.boxes,
            s.run.seed,
        )?;
        let passed = assumption.passed && structural.passed && dissipation.passed;
        all &= passed;
        s.say(format!(
            "{name}: block inequality max eigenvalue {:+.6e} (tol {:.1e}) {}",
            assumption.lmi.margin,
            assumption.lmi.tolerance,
            Status::label(assumption.lmi.is_satisfied)
        ));
        s.say(format!(
            "{name}: disturbance factor residual {:.3e} {}",
            assumption.disturbance_factor.residual,
            Status::label(assumption.disturbance_factor.feasible)
        ));
        s.say(format!(
            "{name}: supply sign D2'XD2 max eigenvalue {:+.6e} {}",
            assumption.supply_sign.margin,
            Status::label(assumption.supply_sign.is_satisfied)
        ));
        s.say(format!(
            "{name}: metric min eigenvalue {:.6e}, aux weight min eigenvalue {}",
            assumption.metric_min_eigenvalue,
            assumption
                .aux_weight_min_eigenvalue
                .map_or("n/a".to_string(), |v| format!("{v:.6e}"))
        ));
        s.say(format!(
            "{name}: matching equations max residual {:.3e} {}",
            structural.max_residual(),
            Status::label(structural.passed)
        ));
        s.say(format!(
            "{name}: dissipation worst slack {:+.6e} over {} samples ({} violations) {}",
            dissipation.worst_slack,
            dissipation.samples,
            dissipation.violations,
            Status::label(dissipation.passed)
        ));
        results.insert(
            name.clone(),
            json!({
                "assumption": to_value(&assumption),
                "structural": to_value(&structural),
                "gains": to_value(&gains),
                "dissipation": to_value(&dissipation),
                "diagnostics": to_value(&link.diagnostics),
                "passed": passed,
            }),
        );
    }
    Ok((json!({ "certificates": results }), all))
}

fn stage_verify_net(s: &mut Session) -> Stage {
    let mut results = Map::new();
    let mut all = true;
    let tol = s.run.tolerance;
    for name in s.cfg.networks.keys() {
        let ResolvedNetwork {
            net,
            coupling_solution,
            ..
        } = s.cfg.resolve_network(name, tol)?;
        let lmi = check_interconnection_lmi(&net, tol)?;
        let matching = check_matching_condition(&net, tol)?;
        let passed = lmi.is_satisfied && matching.passed;
        all &= passed;
        s.say(format!(
            "{name}: interconnection matrix max eigenvalue {:+.6e} (tol {:.1e}) {}",
            lmi.margin,
            lmi.tolerance,
            Status::label(lmi.is_satisfied)
        ));
        s.say(format!(
            "{name}: coupling match residual {:.3e} {}",
            matching.residual,
            Status::label(matching.passed)
        ));
        let solved = coupling_solution.map(|c| {
            json!({ "residual": c.residual, "feasible": c.feasible, "unique": c.unique })
        });
        results.insert(
            name.clone(),
            json!({
                "lmi": to_value(&lmi),
                "matching": to_value(&matching),
                "abstract_coupling": matrix_to_json(&net.abstract_coupling),
                "abstract_coupling_solve": solved,
                "passed": passed,
            }),
        );
    }
    Ok((json!({ "networks": results }), all))
}

fn residual_pair(left: &Mat, right: &Mat, tol: f64) -> (f64, bool) {
    if left.shape() != right.shape() {
        return (f64::INFINITY, false);
    }
    let r = (left - right).norm();
    (r, r <= tol * (1.0 + left.norm().max(right.norm())))
}

fn stage_abstract(s: &mut Session) -> Stage {
    let mut results = Map::new();
    let mut all = true;
    let tol = s.run.tolerance;
    for (name, entry) in &s.cfg.certificates {
        let sys = &s.cfg.systems[&entry.system];
        let res = build_abstraction(sys, &entry.seed, &entry.embedding, &entry.build)?;
        let construction_ok = res
            .diagnostics
            .iter()
            .filter(|d| d.step != "block inequality")
            .all(|d| d.feasible);
        for d in &res.diagnostics {
            s.say(format!(
                "{name}: {} residual {:.3e} {}{}",
                d.step,
                d.residual,
                Status::label(d.feasible),
                d.note.as_ref().map_or(String::new(), |n| format!(" ({n})"))
            ));
        }
        let mut comparison = Map::new();
        let mut reproduces = true;
        if let Some(done) = &entry.completed {
            let given = &s.cfg.systems[&done.abstraction];
            let built = &res.abs_sys;
            let pairs: [(&str, &Mat, &Mat); 12] = [
                ("A", &built.a, &given.a),
                ("B", &built.b, &given.b),
                ("C1", &built.c1, &given.c1),
                ("C2", &built.c2, &given.c2),
                ("D", &built.d, &given.d),
                ("E", &built.e, &given.e),
                ("F", &built.f, &given.f),
                ("state_feedforward", &res.cert.state_feedforward, &done.cert.state_feedforward),
                ("output_map", &res.cert.output_map, &done.cert.output_map),
                (
                    "abstract_disturbance_factor",
                    &res.cert.abstract_disturbance_factor,
                    &done.cert.abstract_disturbance_factor,
                ),
                ("phi_gain_abstract", &res.cert.phi_gain_abstract, &done.cert.phi_gain_abstract),
                ("input_map", &res.cert.input_map, &done.cert.input_map),
            ];
            for (field, b, g) in pairs {
                let (r, ok) = residual_pair(b, g, tol);
                reproduces &= ok;
                comparison.insert(field.into(), json!({ "residual": r, "passed": ok }));
            }
            let jumps_ok = built.rates == given.rates
                && built.jumps.iter().zip(&given.jumps).all(|(a, b)| (a - b).norm() <= tol * (1.0 + b.norm()));
            reproduces &= jumps_ok;
            comparison.insert("jumps".into(), json!({ "passed": jumps_ok }));
            s.say(format!(
                "{name}: rebuilt abstraction matches the supplied one {}",
                Status::label(reproduces)
            ));
        }
        let abs_name = format!("{name}_abstraction");
        let artifact = json!({
            "schema_version": SCHEMA_VERSION,
            "systems": {
                entry.system.clone(): system_to_json(sys)?,
                abs_name.clone(): system_to_json(&res.abs_sys)?,
            },
            "certificates": {
                name.clone(): certificate_to_json(&res.cert, &entry.system, &abs_name, &res.abs_sys.b),
            },
        });
        s.write_json(&format!("abstract_{name}.json"), &artifact)?;
        let passed = construction_ok && reproduces;
        all &= passed;
        results.insert(
            name.clone(),
            json!({
                "diagnostics": to_value(&res.diagnostics),
                "abstract_state_dim": res.abs_sys.n(),
                "comparison": comparison,
                "passed": passed,
            }),
        );
    }
    Ok((json!({ "certificates": results }), all))
}

fn stage_compose(s: &mut Session) -> Stage {
    let mut results = Map::new();
    for name in s.cfg.networks.keys() {
        let resolved = s.cfg.resolve_network(name, s.run.tolerance)?;
        let net = &resolved.net;
        let closed = compose(&net.subsystems, &net.coupling)?;
        let closed_abs = compose(&net.abstractions, &net.abstract_coupling)?;
        let artifact = json!({
            "schema_version": SCHEMA_VERSION,
            "systems": {
                format!("{name}_closed"): system_to_json(&closed)?,
                format!("{name}_abstract_closed"): system_to_json(&closed_abs)?,
            },
        });
        s.write_json(&format!("compose_{name}.json"), &artifact)?;
        let (ac, aa) = (spectral_abscissa(&closed.a), spectral_abscissa(&closed_abs.a));
        s.say(format!(
            "{name}: closed network {} states (spectral abscissa {ac:+.4e}), abstraction {} states ({aa:+.4e})",
            closed.n(),
            closed_abs.n()
        ));
        results.insert(
            name.clone(),
            json!({
                "states": closed.n(),
                "abstract_states": closed_abs.n(),
                "spectral_abscissa": ac,
                "abstract_spectral_abscissa": aa,
            }),
        );
    }
    Ok((json!({ "networks": results }), true))
}

struct NetworkRun {
    resolved: ResolvedNetwork,
    uhat: Vec<InputSignal>,
    x0: Vector,
    xhat0: Vector,
    theta0: Vector,
    gains: Vec<GainSummary>,
    grid: Vec<f64>,
}

fn prepare_network(s: &Session, name: &str) -> crate::Result<NetworkRun> {
    let entry = &s.cfg.networks[name];
    let resolved = s.cfg.resolve_network(name, s.run.tolerance)?;
    let net = &resolved.net;
    let uhat = entry
        .uhat
        .clone()
        .unwrap_or_else(|| net.abstractions.iter().map(|a| InputSignal::zero(a.m())).collect());
    let n: usize = net.subsystems.iter().map(|x| x.n()).sum();
    let nh: usize = net.abstractions.iter().map(|x| x.n()).sum();
    let x0 = entry.x0.clone().unwrap_or_else(|| Vector::zeros(n));
    let xhat0 = entry.xhat0.clone().unwrap_or_else(|| Vector::zeros(nh));
    let theta0 = entry.theta0.clone().unwrap_or_else(|| Vector::zeros(net.aux_state_dim()));
    let grid = time_grid(s.run.horizon, s.run.dt)?;
    let gains = resolved
        .links
        .iter()
        .zip(&uhat)
        .map(|(link, u)| {
            let sup = grid.iter().map(|&t| u.eval(t).norm_squared()).fold(0.0, f64::max);
            link_gains(s.cfg, &link.name, link, Some(sup))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(NetworkRun {
        resolved,
        uhat,
        x0,
        xhat0,
        theta0,
        gains,
        grid,
    })
}

fn stage_bound(s: &mut Session) -> Stage {
    let mut results = Map::new();
    let names: Vec<String> = s.cfg.networks.keys().cloned().collect();
    for name in names {
        let run = prepare_network(s, &name)?;
        let net = &run.resolved.net;
        let network_gains = composite_gains(&run.gains, &net.weights)?;
        let v0 = network_storage(net, &run.x0, &run.xhat0, &run.theta0)?;
        let uhat_sup_sq = run
            .grid
            .iter()
            .map(|&t| run.uhat.iter().map(|u| u.eval(t).norm_squared()).sum::<f64>())
            .fold(0.0, f64::max);
        let eb = ErrorBound::new(&network_gains, v0, uhat_sup_sq);
        let mut csv = String::from("t,bound\n");
        for &t in &run.grid {
            let _ = writeln!(csv, "{t:.16e},{:.16e}", error_bound(&eb, t)?);
        }
        s.write(&format!("bound_{name}.csv"), &csv)?;
        let limit = (eb.psi_slope_net * uhat_sup_sq + eb.c_net) / (eb.kappa_tilde_net * eb.alpha_slope_net);
        s.say(format!(
            "{name}: decay {:.4e}, output slope {:.4e}, input slope {:.4e}, constant {:.4e}; V0 {:.4e}; bound {:.4e} -> {:.4e}",
            eb.kappa_tilde_net,
            eb.alpha_slope_net,
            eb.psi_slope_net,
            eb.c_net,
            v0,
            error_bound(&eb, 0.0)?,
            limit
        ));
        results.insert(
            name.clone(),
            json!({
                "subsystem_gains": to_value(&run.gains),
                "network_gains": to_value(&network_gains),
                "error_bound": to_value(&eb),
                "asymptotic_bound": limit,
            }),
        );
    }
    Ok((json!({ "networks": results }), true))
}

fn stage_mc(s: &mut Session) -> Stage {
    let mut results = Map::new();
    let mut all = true;
    let names: Vec<String> = s.cfg.networks.keys().cloned().collect();
    for name in names {
        let run = prepare_network(s, &name)?;
        let setup = MonteCarloSetup {
            uhat: run.uhat.clone(),
            x0: run.x0.clone(),
            xhat0: run.xhat0.clone(),
            theta0: run.theta0.clone(),
            horizon: s.run.horizon,
            dt: s.run.dt,
            trials: s.run.trials,
            seed: s.run.seed,
            shared_noise: s.run.shared_noise,
        };
        let result = monte_carlo_error(&run.resolved.net, &run.gains, &setup)?;
        s.write(&format!("mc_{name}.csv"), &result.to_csv())?;
        let passed = result.passed();
        all &= passed;
        let last = result.times.len() - 1;
        s.say(format!(
            "{name}: {} trials ({} discarded), worst mean-3se-bound {:+.4e}, {} violating grid points {}",
            result.trials,
            result.discarded,
            result.worst_excess(),
            result.violations.len(),
            Status::label(passed)
        ));
        results.insert(
            name.clone(),
            json!({
                "trials": result.trials,
                "discarded": result.discarded,
                "grid_points": result.times.len(),
                "violations": result.violations.len(),
                "first_violation_time": result.violations.first().map(|&k| result.times[k]),
                "worst_excess": result.worst_excess(),
                "final_mean_sq_error": result.mean_sq_error[last],
                "final_bound": result.bound[last],
                "error_bound": to_value(&result.error_bound),
                "shared_noise": result.shared_noise,
                "passed": passed,
            }),
        );
    }
    Ok((json!({ "networks": results }), all))
}

fn trajectory_csv(sys: &JumpDiffusionSystem, times: &[f64], states: &[Vector], outputs: &[Vector]) -> String {
    let mut csv = String::from("t");
    for i in 0..sys.n() {
        let _ = write!(csv, ",x{i}");
    }
    for i in 0..sys.q1() {
        let _ = write!(csv, ",y{i}");
    }
    csv.push('\n');
    for ((t, x), y) in times.iter().zip(states).zip(outputs) {
        let _ = write!(csv, "{t:.16e}");
        for v in x.iter().chain(y.iter()) {
            let _ = write!(csv, ",{v:.16e}");
        }
        csv.push('\n');
    }
    csv
}

fn stage_simulate(s: &mut Session) -> Stage {
    let mut results = Map::new();
    for (name, sim) in &s.cfg.simulations {
        let sys = &s.cfg.systems[&sim.system];
        let traj = simulate(sys, &sim.x0, &sim.u, &sim.w, s.run.horizon, s.run.dt, s.run.seed)?;
        let csv = trajectory_csv(sys, &traj.times, &traj.states, &traj.outputs1);
        s.write(&format!("simulate_{name}.csv"), &csv)?;
        let end = traj.states.last().expect("grid is nonempty");
        s.say(format!(
            "{name}: {} steps, final state norm {:.6e}",
            traj.times.len() - 1,
            end.norm()
        ));
        results.insert(
            name.clone(),
            json!({ "steps": traj.times.len() - 1, "final_state": end.as_slice() }),
        );
    }
    if results.is_empty() {
        s.say("no simulations declared".into());
    }
    Ok((json!({ "simulations": results }), true))
}

/// Scaling notes for the scalar abstraction of the all-to-all network: the
/// nonlinearity argument gain `F̂ = FP` and the noise constant per state.
fn stage_scaling_notes(s: &mut Session) -> Stage {
    let mut results = Map::new();
    for name in s.cfg.certificates.keys() {
        let link = s.cfg.resolve_certificate(name)?;
        let gains = link_gains(s.cfg, name, &link, None)?;
        let fhat = link.abstraction.f.clone();
        let n = link.system.n() as f64;
        s.say(format!(
            "{name}: nonlinearity argument gain F P = {:?} (a unit gain would give sin of the abstract state); noise constant {:.4} = {:.4} per state",
            fhat.as_slice(),
            gains.c_tilde,
            gains.c_tilde / n
        ));
        results.insert(
            name.clone(),
            json!({
                "fhat": matrix_to_json(&fhat),
                "fhat_unit_gap": (fhat.add_scalar(-1.0)).amax(),
                "c_tilde": gains.c_tilde,
                "c_tilde_per_state": gains.c_tilde / n,
                "c_prime": gains.c_prime,
            }),
        );
    }
    Ok((json!({ "certificates": results }), true))
}

fn run_stage(s: &mut Session, label: &str, f: fn(&mut Session) -> Stage) -> (Status, Value) {
    match f(s) {
        Ok((value, passed)) => (if passed { Status::Pass } else { Status::Fail }, value),
        Err(e) => {
            let status = e.status();
            s.say(format!("{label}: error: {}", e.message()));
            (status, json!({ "error": e.message() }))
        }
    }
}

fn stages(cmd: Subcommand) -> Vec<(&'static str, fn(&mut Session) -> Stage)> {
    match cmd {
        Subcommand::Simulate => vec![("simulate", stage_simulate)],
        Subcommand::VerifyCert => vec![("verify-cert", stage_verify_cert)],
        Subcommand::VerifyNet => vec![("verify-net", stage_verify_net)],
        Subcommand::Abstract => vec![("abstract", stage_abstract)],
        Subcommand::Compose => vec![("compose", stage_compose)],
        Subcommand::Bound => vec![("bound", stage_bound)],
        Subcommand::McValidate => vec![("mc-validate", stage_mc)],
        Subcommand::Example1 => vec![
            ("verify-cert", stage_verify_cert),
            ("abstract", stage_abstract),
            ("scaling-notes", stage_scaling_notes),
            ("verify-net", stage_verify_net),
            ("compose", stage_compose),
            ("bound", stage_bound),
            ("mc-validate", stage_mc),
        ],
        Subcommand::Example2 => vec![
            ("verify-cert", stage_verify_cert),
            ("abstract", stage_abstract),
            ("verify-net", stage_verify_net),
            ("compose", stage_compose),
            ("bound", stage_bound),
            ("mc-validate", stage_mc),
        ],
    }
}

/// Runs a subcommand on a loaded project. Artifacts go to `flags.out`;
/// the report is returned but not written.
pub fn run_subcommand(cmd: Subcommand, cfg: &ProjectConfig, flags: &RunFlags) -> Outcome {
    let mut session = Session {
        cfg,
        run: flags.apply(&cfg.run),
        out: flags.out.clone(),
        lines: Vec::new(),
        artifacts: Vec::new(),
    };
    let mut status = Status::Pass;
    let mut results = Map::new();
    let list = stages(cmd);
    let single = list.len() == 1;
    for (label, f) in list {
        let (st, value) = run_stage(&mut session, label, f);
        status = status.max(st);
        if single {
            results = match value {
                Value::Object(m) => m,
                other => Map::from_iter([("value".to_string(), other)]),
            };
        } else {
            results.insert(label.into(), json!({ "status": st, "results": value }));
        }
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cmd.name(),
        "status": status,
        "exit_code": status.exit_code(),
        "settings": to_value(&session.run),
        "results": results,
        "artifacts": session.artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    Outcome {
        status,
        lines: session.lines,
        report,
        report_path: None,
        artifacts: session.artifacts,
    }
}

fn write_report(out: &Path, report: &Value) -> Option<PathBuf> {
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(report).ok()? + "\n";
    std::fs::create_dir_all(out).ok()?;
    std::fs::write(&path, text).ok()?;
    Some(path)
}

/// Loads the project (the bundled one for the example commands when no path
/// is given), runs the command and always writes `report.json`.
pub fn run_cli(cmd: Subcommand, config: Option<&Path>, flags: &RunFlags) -> Outcome {
    let loaded = match (config, cmd.bundled()) {
        (Some(path), _) => load_config(path),
        (None, Some(name)) => load_config_str(bundled_config(name).expect("bundled configs exist")),
        (None, None) => {
            let msg = format!("{} needs --config PATH", cmd.name());
            return failed_load(cmd, flags, msg, None);
        }
    };
    let mut outcome = match loaded {
        Ok(cfg) => run_subcommand(cmd, &cfg, flags),
        Err(e) => {
            let pointer = e.pointer().map(str::to_string);
            return failed_load(cmd, flags, e.to_string(), pointer);
        }
    };
    outcome.report_path = write_report(&flags.out, &outcome.report);
    outcome
}

fn failed_load(cmd: Subcommand, flags: &RunFlags, msg: String, pointer: Option<String>) -> Outcome {
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cmd.name(),
        "status": Status::ConfigError,
        "exit_code": Status::ConfigError.exit_code(),
        "error": msg,
        "pointer": pointer,
    });
    Outcome {
        status: Status::ConfigError,
        lines: vec![format!("config error: {msg}")],
        report_path: write_report(&flags.out, &report),
        report,
        artifacts: Vec::new(),
    }
}
