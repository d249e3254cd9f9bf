//! Project files: named systems, certificates, networks and simulations plus
//! run settings. Everything is dimension-checked while loading.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::abstraction::{build_abstraction, BuildOptions, StepDiagnostic};
use crate::hybrid_model::{AuxiliarySystem, InputSignal, JumpDiffusionSystem, Nonlinearity, NonlinearityKind};
use crate::matrix_analysis::{image_factor, Mat, Vector};
use crate::network::{solve_abstract_coupling, CouplingSolution, Interconnection};
use crate::storage::{compute_rtilde, SampleBoxes, SeedCertificate, StorageCertificate};

use super::error::ConfigError;
use super::matrix::{parse_matrix, parse_vector};

pub const SCHEMA_VERSION: u32 = 1;

const EXAMPLE1: &str = include_str!("../../configs/example1.json");
const EXAMPLE2: &str = include_str!("../../configs/example2.json");

/// Text of a project file shipped with the library.
pub fn bundled_config(name: &str) -> Option<&'static str> {
    match name {
        "example1" => Some(EXAMPLE1),
        "example2" => Some(EXAMPLE2),
        _ => None,
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    #[serde(default)]
    systems: BTreeMap<String, RawSystem>,
    #[serde(default)]
    certificates: BTreeMap<String, RawCertificate>,
    #[serde(default)]
    networks: BTreeMap<String, RawNetwork>,
    #[serde(default)]
    simulations: BTreeMap<String, RawSimulation>,
    #[serde(default)]
    run: RunSettingsRaw,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawSystem {
    A: Value,
    B: Value,
    C1: Option<Value>,
    C2: Option<Value>,
    D: Option<Value>,
    E: Option<Value>,
    F: Option<Value>,
    G: Option<Value>,
    #[serde(default)]
    jumps: Vec<RawJump>,
    nonlinearity: Option<RawNonlinearity>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawJump {
    R: Value,
    rate: f64,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawNonlinearity {
    Zero {
        dim: usize,
    },
    SineSum {
        dim: usize,
        multiplier: Option<Value>,
        /// Shortcut for the multiplier `scale · diag(I, −I)`.
        scale: Option<f64>,
    },
    Table {
        dim: usize,
        multiplier: Value,
        knots: Vec<f64>,
        values: Vec<f64>,
    },
    /// Blocks on consecutive argument slices; the multiplier is assembled.
    Stacked {
        parts: Vec<RawNonlinearity>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawAux {
    A: Option<Value>,
    B: Option<Value>,
    C: Option<Value>,
    D: Value,
    split: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    system: String,
    abstraction: Option<String>,
    metric: Value,
    feedback: Value,
    supply: Value,
    phi_gain: Option<Value>,
    disturbance_basis: Option<Value>,
    aux: RawAux,
    aux_weight: Option<Value>,
    decay_rate: f64,
    aux_decay_rate: Option<f64>,
    embedding: Value,
    disturbance_factor: Option<Value>,
    abstract_disturbance_factor: Option<Value>,
    phi_gain_abstract: Option<Value>,
    state_feedforward: Option<Value>,
    output_map: Option<Value>,
    input_map: Option<Value>,
    abstract_input_matrix: Option<Value>,
    #[serde(default = "yes")]
    match_jumps: bool,
    splits: Option<[f64; 2]>,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    certificates: Vec<String>,
    coupling: Value,
    abstract_coupling: Option<Value>,
    weights: Option<Vec<f64>>,
    aux_coupling_weight: Option<Value>,
    x0: Option<Value>,
    xhat0: Option<Value>,
    theta0: Option<Value>,
    uhat: Option<Vec<InputSignal>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    system: String,
    x0: Value,
    u: Option<InputSignal>,
    w: Option<InputSignal>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSettingsRaw {
    dt: f64,
    horizon: f64,
    trials: usize,
    seed: u64,
    tolerance: f64,
    samples: usize,
    sample_box: f64,
    shared_noise: bool,
}

impl Default for RunSettingsRaw {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 5.0,
            trials: 500,
            seed: 0,
            tolerance: 1e-8,
            samples: 10_000,
            sample_box: 5.0,
            shared_noise: false,
        }
    }
}

/// Numerical settings shared by every subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct RunSettings {
    pub dt: f64,
    pub horizon: f64,
    pub trials: usize,
    pub seed: u64,
    /// Relative tolerance for semidefinite and residual tests.
    pub tolerance: f64,
    /// Number of sampled points in dissipation checks.
    pub samples: usize,
    pub boxes: SampleBoxes,
    pub shared_noise: bool,
}

#[derive(Debug, Clone)]
pub struct CompletedCertificate {
    /// Name of the abstraction in the systems map.
    pub abstraction: String,
    pub cert: StorageCertificate,
}

#[derive(Debug, Clone)]
pub struct CertificateEntry {
    pub system: String,
    pub seed: SeedCertificate,
    pub embedding: Mat,
    /// Present when the file supplies the abstraction and the matching data.
    pub completed: Option<CompletedCertificate>,
    pub build: BuildOptions,
    /// `(π, π′)`; searched when absent.
    pub splits: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct NetworkEntry {
    pub certificates: Vec<String>,
    pub coupling: Mat,
    pub abstract_coupling: Option<Mat>,
    pub weights: Vec<f64>,
    pub aux_coupling_weight: Mat,
    pub x0: Option<Vector>,
    pub xhat0: Option<Vector>,
    pub theta0: Option<Vector>,
    pub uhat: Option<Vec<InputSignal>>,
}

#[derive(Debug, Clone)]
pub struct SimulationEntry {
    pub system: String,
    pub x0: Vector,
    pub u: InputSignal,
    pub w: InputSignal,
}

#[derive(Debug, Clone)]
pub struct ProjectConfig {
    pub systems: BTreeMap<String, JumpDiffusionSystem>,
    pub certificates: BTreeMap<String, CertificateEntry>,
    pub networks: BTreeMap<String, NetworkEntry>,
    pub simulations: BTreeMap<String, SimulationEntry>,
    pub run: RunSettings,
}

/// A certificate together with its concrete system and abstraction.
#[derive(Debug, Clone)]
pub struct ResolvedLink {
    pub name: String,
    pub system: JumpDiffusionSystem,
    pub abstraction: JumpDiffusionSystem,
    pub cert: StorageCertificate,
    /// Construction log; empty when the file supplied the abstraction.
    pub diagnostics: Vec<StepDiagnostic>,
}

#[derive(Debug, Clone)]
pub struct ResolvedNetwork {
    pub net: Interconnection,
    pub links: Vec<ResolvedLink>,
    /// Set when the abstract coupling had to be solved for.
    pub coupling_solution: Option<CouplingSolution>,
}

pub fn load_config(path: &Path) -> Result<ProjectConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config_str(&text)
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

pub fn load_config_str(text: &str) -> Result<ProjectConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => ConfigError::Schema {
                pointer,
                message: format!("{inner}"),
            },
            _ => ConfigError::Parse {
                line: inner.line(),
                column: inner.column(),
                message: format!("{inner}"),
            },
        }
    })?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(ConfigError::schema(
            "/schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        ));
    }
    resolve(raw)
}

/// Points a library error at the offending field when its context names one.
fn located(base: &str, err: crate::Error, fields: &[(&str, &str)]) -> ConfigError {
    let context = match &err {
        crate::Error::Dimension { context, .. } | crate::Error::NonFinite(context) => Some(context.clone()),
        _ => None,
    };
    let suffix = context.and_then(|c| fields.iter().find(|(name, _)| *name == c).map(|(_, key)| *key));
    match suffix {
        Some(key) => ConfigError::invalid(format!("{base}/{key}"), err),
        None => ConfigError::invalid(base, err),
    }
}

const SYSTEM_FIELDS: [(&str, &str); 8] = [
    ("A", "A"),
    ("B", "B"),
    ("C1", "C1"),
    ("C2", "C2"),
    ("D", "D"),
    ("E", "E"),
    ("F", "F"),
    ("G", "G"),
];

const CERT_FIELDS: [(&str, &str); 16] = [
    ("metric", "metric"),
    ("feedback", "feedback"),
    ("phi_gain", "phi_gain"),
    ("disturbance_basis", "disturbance_basis"),
    ("supply", "supply"),
    ("aux_weight", "aux_weight"),
    ("Atheta", "aux/A"),
    ("Btheta", "aux/B"),
    ("Ctheta", "aux/C"),
    ("Dtheta", "aux/D"),
    ("embedding", "embedding"),
    ("state_feedforward", "state_feedforward"),
    ("output_map", "output_map"),
    ("input_map", "input_map"),
    ("disturbance_factor", "disturbance_factor"),
    ("abstract_disturbance_factor", "abstract_disturbance_factor"),
];

fn opt_matrix(v: &Option<Value>, path: &str, default: impl FnOnce() -> Mat) -> Result<Mat, ConfigError> {
    match v {
        Some(v) => parse_matrix(v, path),
        None => Ok(default()),
    }
}

fn nonlinearity(raw: &RawNonlinearity, path: &str) -> Result<Nonlinearity, ConfigError> {
    let invalid = |e| ConfigError::invalid(path, e);
    match raw {
        RawNonlinearity::Zero { dim } => Ok(Nonlinearity::zero(*dim)),
        RawNonlinearity::SineSum { dim, multiplier, scale } => match (multiplier, scale) {
            (Some(_), Some(_)) => Err(ConfigError::schema(path, "give either multiplier or scale, not both")),
            (Some(m), None) => {
                let m = parse_matrix(m, &format!("{path}/multiplier"))?;
                Nonlinearity::new(NonlinearityKind::SineSum, *dim, m).map_err(invalid)
            }
            (None, s) => Ok(Nonlinearity::sine(*dim, s.unwrap_or(1.0))),
        },
        RawNonlinearity::Table {
            dim,
            multiplier,
            knots,
            values,
        } => {
            let m = parse_matrix(multiplier, &format!("{path}/multiplier"))?;
            Nonlinearity::new(
                NonlinearityKind::Table {
                    knots: knots.clone(),
                    values: values.clone(),
                },
                *dim,
                m,
            )
            .map_err(invalid)
        }
        RawNonlinearity::Stacked { parts } => Ok(Nonlinearity::stacked(
            parts
                .iter()
                .enumerate()
                .map(|(i, p)| nonlinearity(p, &format!("{path}/parts/{i}")))
                .collect::<Result<_, _>>()?,
        )),
    }
}

fn system(raw: &RawSystem, base: &str) -> Result<JumpDiffusionSystem, ConfigError> {
    let a = parse_matrix(&raw.A, &format!("{base}/A"))?;
    let n = a.nrows();
    let b = parse_matrix(&raw.B, &format!("{base}/B"))?;
    let c1 = opt_matrix(&raw.C1, &format!("{base}/C1"), || Mat::zeros(0, n))?;
    let c2 = opt_matrix(&raw.C2, &format!("{base}/C2"), || Mat::zeros(0, n))?;
    let d = opt_matrix(&raw.D, &format!("{base}/D"), || Mat::zeros(n, 0))?;
    let phi = match &raw.nonlinearity {
        Some(nl) => nonlinearity(nl, &format!("{base}/nonlinearity"))?,
        None => Nonlinearity::zero(0),
    };
    let l = phi.dim();
    if l > 0 && (raw.E.is_none() || raw.F.is_none()) {
        return Err(ConfigError::schema(base, "a nonlinearity needs both E and F"));
    }
    let e = opt_matrix(&raw.E, &format!("{base}/E"), || Mat::zeros(n, l))?;
    let f = opt_matrix(&raw.F, &format!("{base}/F"), || Mat::zeros(l, n))?;
    let g = match &raw.G {
        Some(v) => Vector::from_vec(parse_vector(v, &format!("{base}/G"))?),
        None => Vector::zeros(n),
    };
    let mut jumps = Vec::new();
    let mut rates = Vec::new();
    for (i, j) in raw.jumps.iter().enumerate() {
        jumps.push(Vector::from_vec(parse_vector(&j.R, &format!("{base}/jumps/{i}/R"))?));
        rates.push(j.rate);
    }
    let sys = JumpDiffusionSystem {
        a,
        b,
        c1,
        c2,
        d,
        e,
        f,
        g,
        jumps,
        rates,
        phi,
    };
    sys.validate().map_err(|e| located(base, e, &SYSTEM_FIELDS))?;
    Ok(sys)
}

fn lookup<'a, T>(
    map: &'a BTreeMap<String, T>,
    name: &str,
    pointer: String,
    kind: &'static str,
) -> Result<&'a T, ConfigError> {
    map.get(name).ok_or_else(|| ConfigError::Dangling {
        pointer,
        kind,
        name: name.to_string(),
    })
}

fn aux_system(raw: &RawAux, base: &str) -> Result<AuxiliarySystem, ConfigError> {
    let d = parse_matrix(&raw.D, &format!("{base}/D"))?;
    let aux = match (&raw.A, &raw.B, &raw.C) {
        (None, None, None) => AuxiliarySystem::static_map(d, raw.split),
        (Some(a), Some(b), Some(c)) => AuxiliarySystem::new(
            parse_matrix(a, &format!("{base}/A"))?,
            parse_matrix(b, &format!("{base}/B"))?,
            parse_matrix(c, &format!("{base}/C"))?,
            d,
            raw.split,
        ),
        _ => return Err(ConfigError::schema(base, "give all of A, B, C or none of them")),
    };
    aux.map_err(|e| located(&base[..base.len() - "/aux".len()], e, &CERT_FIELDS))
}

fn certificate(
    raw: &RawCertificate,
    base: &str,
    systems: &BTreeMap<String, JumpDiffusionSystem>,
) -> Result<CertificateEntry, ConfigError> {
    let sys = lookup(systems, &raw.system, format!("{base}/system"), "system")?;
    let (n, m, l) = (sys.n(), sys.m(), sys.l_k());
    let at = |key: &str| format!("{base}/{key}");
    let aux = aux_system(&raw.aux, &at("aux"))?;
    let lt = aux.state_dim();
    let seed = SeedCertificate {
        metric: parse_matrix(&raw.metric, &at("metric"))?,
        feedback: parse_matrix(&raw.feedback, &at("feedback"))?,
        supply: parse_matrix(&raw.supply, &at("supply"))?,
        phi_gain: opt_matrix(&raw.phi_gain, &at("phi_gain"), || Mat::zeros(m, l))?,
        disturbance_basis: opt_matrix(&raw.disturbance_basis, &at("disturbance_basis"), || sys.d.clone())?,
        aux,
        aux_weight: opt_matrix(&raw.aux_weight, &at("aux_weight"), || Mat::identity(lt, lt))?,
        decay_rate: raw.decay_rate,
        aux_decay_rate: raw.aux_decay_rate.unwrap_or(raw.decay_rate),
    };
    seed.validate_for(sys).map_err(|e| located(base, e, &CERT_FIELDS))?;
    let embedding = parse_matrix(&raw.embedding, &at("embedding"))?;
    if embedding.nrows() != n {
        return Err(located(
            base,
            crate::Error::Dimension {
                context: "embedding".into(),
                expected: format!("{n} rows"),
                found: format!("{}x{}", embedding.nrows(), embedding.ncols()),
            },
            &CERT_FIELDS,
        ));
    }
    let input_matrix = raw
        .abstract_input_matrix
        .as_ref()
        .map(|v| parse_matrix(v, &at("abstract_input_matrix")))
        .transpose()?;
    let build = BuildOptions {
        tol: 1e-10,
        input_matrix,
        match_jumps: raw.match_jumps,
        ..BuildOptions::default()
    };
    let splits = raw.splits.map(|[a, b]| (a, b));
    if let Some((a, b)) = splits {
        if !(a > 0.0 && b > 0.0 && a + b < seed.decay_rate) {
            return Err(ConfigError::schema(
                at("splits"),
                format!("need positive splits summing below decay_rate {}", seed.decay_rate),
            ));
        }
    }

    let completion_fields = [
        ("disturbance_factor", &raw.disturbance_factor),
        ("abstract_disturbance_factor", &raw.abstract_disturbance_factor),
        ("phi_gain_abstract", &raw.phi_gain_abstract),
        ("state_feedforward", &raw.state_feedforward),
        ("output_map", &raw.output_map),
        ("input_map", &raw.input_map),
    ];
    let completed = match &raw.abstraction {
        None => {
            if let Some((key, _)) = completion_fields.iter().find(|(_, v)| v.is_some()) {
                return Err(ConfigError::schema(at(key), "matching data requires an abstraction"));
            }
            None
        }
        Some(abs_name) => {
            let abs = lookup(systems, abs_name, at("abstraction"), "system")?;
            for key in ["abstract_disturbance_factor", "state_feedforward", "output_map"] {
                if completion_fields.iter().any(|(k, v)| *k == key && v.is_none()) {
                    return Err(ConfigError::schema(base, format!("missing field `{key}` for a supplied abstraction")));
                }
            }
            let disturbance_factor = match &raw.disturbance_factor {
                Some(v) => parse_matrix(v, &at("disturbance_factor"))?,
                None => {
                    let fit = image_factor(&sys.d, &seed.disturbance_basis, 1e-10)
                        .map_err(|e| ConfigError::invalid(at("disturbance_basis"), e))?;
                    fit.factor.ok_or_else(|| {
                        ConfigError::schema(at("disturbance_basis"), "D is not in the span of disturbance_basis")
                    })?
                }
            };
            let mut cert = StorageCertificate {
                seed: seed.clone(),
                disturbance_factor,
                abstract_disturbance_factor: parse_matrix(
                    raw.abstract_disturbance_factor.as_ref().expect("checked above"),
                    &at("abstract_disturbance_factor"),
                )?,
                phi_gain_abstract: opt_matrix(&raw.phi_gain_abstract, &at("phi_gain_abstract"), || {
                    Mat::zeros(m, abs.l_k())
                })?,
                embedding: embedding.clone(),
                state_feedforward: parse_matrix(
                    raw.state_feedforward.as_ref().expect("checked above"),
                    &at("state_feedforward"),
                )?,
                output_map: parse_matrix(raw.output_map.as_ref().expect("checked above"), &at("output_map"))?,
                input_map: Mat::zeros(m, abs.m()),
            };
            cert.input_map = match &raw.input_map {
                Some(v) => parse_matrix(v, &at("input_map"))?,
                None => compute_rtilde(sys, abs, &seed.metric, &embedding)
                    .map_err(|e| ConfigError::invalid(at("embedding"), e))?,
            };
            cert.validate_for(sys, abs).map_err(|e| located(base, e, &CERT_FIELDS))?;
            Some(CompletedCertificate {
                abstraction: abs_name.clone(),
                cert,
            })
        }
    };
    Ok(CertificateEntry {
        system: raw.system.clone(),
        seed,
        embedding,
        completed,
        build,
        splits,
    })
}

/// Abstract input width implied by a certificate entry.
fn abstract_input_dim(entry: &CertificateEntry, systems: &BTreeMap<String, JumpDiffusionSystem>) -> usize {
    match (&entry.completed, &entry.build.input_matrix) {
        (Some(c), _) => systems[&c.abstraction].m(),
        (None, Some(b)) => b.ncols(),
        (None, None) => entry.embedding.ncols(),
    }
}

fn optional_vector(v: &Option<Value>, path: &str, len: usize) -> Result<Option<Vector>, ConfigError> {
    let Some(v) = v else { return Ok(None) };
    let x = parse_vector(v, path)?;
    if x.len() != len {
        return Err(ConfigError::invalid(path, crate::Error::len(path, len, x.len())));
    }
    Ok(Some(Vector::from_vec(x)))
}

fn network(
    raw: &RawNetwork,
    base: &str,
    systems: &BTreeMap<String, JumpDiffusionSystem>,
    certs: &BTreeMap<String, CertificateEntry>,
) -> Result<NetworkEntry, ConfigError> {
    let at = |key: &str| format!("{base}/{key}");
    if raw.certificates.is_empty() {
        return Err(ConfigError::schema(at("certificates"), "a network needs at least one certificate"));
    }
    let entries: Vec<&CertificateEntry> = raw
        .certificates
        .iter()
        .enumerate()
        .map(|(i, c)| lookup(certs, c, format!("{base}/certificates/{i}"), "certificate"))
        .collect::<Result<_, _>>()?;
    let k = entries.len();
    let subs: Vec<&JumpDiffusionSystem> = entries.iter().map(|e| &systems[&e.system]).collect();
    let (p, q): (usize, usize) = (subs.iter().map(|s| s.p()).sum(), subs.iter().map(|s| s.q2()).sum());
    let coupling = parse_matrix(&raw.coupling, &at("coupling"))?;
    if coupling.shape() != (p, q) {
        return Err(ConfigError::invalid(
            at("coupling"),
            crate::Error::shape("coupling", (p, q), coupling.shape()),
        ));
    }
    let abstract_coupling = raw
        .abstract_coupling
        .as_ref()
        .map(|v| parse_matrix(v, &at("abstract_coupling")))
        .transpose()?;
    if let Some(mh) = &abstract_coupling {
        if entries.iter().all(|e| e.completed.is_some()) {
            let abs: Vec<&JumpDiffusionSystem> = entries
                .iter()
                .map(|e| &systems[&e.completed.as_ref().expect("checked").abstraction])
                .collect();
            let (ph, qh) = (abs.iter().map(|s| s.p()).sum(), abs.iter().map(|s| s.q2()).sum());
            if mh.shape() != (ph, qh) {
                return Err(ConfigError::invalid(
                    at("abstract_coupling"),
                    crate::Error::shape("abstract_coupling", (ph, qh), mh.shape()),
                ));
            }
        }
    }
    let weights = raw.weights.clone().unwrap_or_else(|| vec![1.0; k]);
    if weights.len() != k {
        return Err(ConfigError::invalid(at("weights"), crate::Error::len("weights", k, weights.len())));
    }
    if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(ConfigError::schema(format!("{base}/weights/{i}"), "weights must be positive"));
    }
    let lt: usize = entries.iter().map(|e| e.seed.aux.state_dim()).sum();
    let aux_coupling_weight = opt_matrix(&raw.aux_coupling_weight, &at("aux_coupling_weight"), || {
        Mat::zeros(lt, lt)
    })?;
    if aux_coupling_weight.shape() != (lt, lt) {
        return Err(ConfigError::invalid(
            at("aux_coupling_weight"),
            crate::Error::shape("aux_coupling_weight", (lt, lt), aux_coupling_weight.shape()),
        ));
    }
    let n: usize = subs.iter().map(|s| s.n()).sum();
    let nh: usize = entries.iter().map(|e| e.embedding.ncols()).sum();
    let x0 = optional_vector(&raw.x0, &at("x0"), n)?;
    let xhat0 = optional_vector(&raw.xhat0, &at("xhat0"), nh)?;
    let theta0 = optional_vector(&raw.theta0, &at("theta0"), lt)?;
    if let Some(signals) = &raw.uhat {
        if signals.len() != k {
            return Err(ConfigError::invalid(at("uhat"), crate::Error::len("uhat", k, signals.len())));
        }
        for (i, (s, e)) in signals.iter().zip(&entries).enumerate() {
            let path = format!("{base}/uhat/{i}");
            s.validate().map_err(|err| ConfigError::invalid(&path, err))?;
            let want = abstract_input_dim(e, systems);
            if s.dim() != want {
                return Err(ConfigError::invalid(&path, crate::Error::len("abstract input", want, s.dim())));
            }
        }
    }
    Ok(NetworkEntry {
        certificates: raw.certificates.clone(),
        coupling,
        abstract_coupling,
        weights,
        aux_coupling_weight,
        x0,
        xhat0,
        theta0,
        uhat: raw.uhat.clone(),
    })
}

fn simulation(
    raw: &RawSimulation,
    base: &str,
    systems: &BTreeMap<String, JumpDiffusionSystem>,
) -> Result<SimulationEntry, ConfigError> {
    let sys = lookup(systems, &raw.system, format!("{base}/system"), "system")?;
    let x0 = optional_vector(&Some(raw.x0.clone()), &format!("{base}/x0"), sys.n())?.expect("present");
    let u = raw.u.clone().unwrap_or_else(|| InputSignal::zero(sys.m()));
    let w = raw.w.clone().unwrap_or_else(|| InputSignal::zero(sys.p()));
    for (key, s, want) in [("u", &u, sys.m()), ("w", &w, sys.p())] {
        let path = format!("{base}/{key}");
        s.validate().map_err(|e| ConfigError::invalid(&path, e))?;
        if s.dim() != want {
            return Err(ConfigError::invalid(&path, crate::Error::len(key, want, s.dim())));
        }
    }
    Ok(SimulationEntry {
        system: raw.system.clone(),
        x0,
        u,
        w,
    })
}

fn run_settings(raw: &RunSettingsRaw) -> Result<RunSettings, ConfigError> {
    let positive = [
        ("dt", raw.dt),
        ("horizon", raw.horizon),
        ("tolerance", raw.tolerance),
        ("sample_box", raw.sample_box),
    ];
    if let Some((key, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(ConfigError::schema(format!("/run/{key}"), format!("must be positive, got {v}")));
    }
    Ok(RunSettings {
        dt: raw.dt,
        horizon: raw.horizon,
        trials: raw.trials,
        seed: raw.seed,
        tolerance: raw.tolerance,
        samples: raw.samples,
        boxes: SampleBoxes::uniform(raw.sample_box),
        shared_noise: raw.shared_noise,
    })
}

fn key_pointer(section: &str, name: &str) -> String {
    format!("/{section}/{}", name.replace('~', "~0").replace('/', "~1"))
}

fn resolve(raw: RawConfig) -> Result<ProjectConfig, ConfigError> {
    let mut systems = BTreeMap::new();
    for (name, s) in &raw.systems {
        systems.insert(name.clone(), system(s, &key_pointer("systems", name))?);
    }
    let mut certificates = BTreeMap::new();
    for (name, c) in &raw.certificates {
        certificates.insert(name.clone(), certificate(c, &key_pointer("certificates", name), &systems)?);
    }
    let mut networks = BTreeMap::new();
    for (name, n) in &raw.networks {
        networks.insert(
            name.clone(),
            network(n, &key_pointer("networks", name), &systems, &certificates)?,
        );
    }
    let mut simulations = BTreeMap::new();
    for (name, s) in &raw.simulations {
        simulations.insert(name.clone(), simulation(s, &key_pointer("simulations", name), &systems)?);
    }
    Ok(ProjectConfig {
        systems,
        certificates,
        networks,
        simulations,
        run: run_settings(&raw.run)?,
    })
}

impl ProjectConfig {
    /// Uses the supplied abstraction when present, otherwise builds one.
    pub fn resolve_certificate(&self, name: &str) -> crate::Result<ResolvedLink> {
        let entry = self
            .certificates
            .get(name)
            .ok_or_else(|| crate::Error::Domain(format!("no certificate named {name:?}")))?;
        let system = self.systems[&entry.system].clone();
        match &entry.completed {
            Some(c) => Ok(ResolvedLink {
                name: name.to_string(),
                system,
                abstraction: self.systems[&c.abstraction].clone(),
                cert: c.cert.clone(),
                diagnostics: Vec::new(),
            }),
            None => {
                let res = build_abstraction(&system, &entry.seed, &entry.embedding, &entry.build)?;
                Ok(ResolvedLink {
                    name: name.to_string(),
                    system,
                    abstraction: res.abs_sys,
                    cert: res.cert,
                    diagnostics: res.diagnostics,
                })
            }
        }
    }

    /// Assembles the interconnection, solving for the abstract coupling by
    /// least squares when the file leaves it out.
    pub fn resolve_network(&self, name: &str, tol: f64) -> crate::Result<ResolvedNetwork> {
        let entry = self
            .networks
            .get(name)
            .ok_or_else(|| crate::Error::Domain(format!("no network named {name:?}")))?;
        let links: Vec<ResolvedLink> = entry
            .certificates
            .iter()
            .map(|c| self.resolve_certificate(c))
            .collect::<crate::Result<_>>()?;
        let mut net = Interconnection {
            subsystems: links.iter().map(|l| l.system.clone()).collect(),
            abstractions: links.iter().map(|l| l.abstraction.clone()).collect(),
            certs: links.iter().map(|l| l.cert.clone()).collect(),
            coupling: entry.coupling.clone(),
            abstract_coupling: Mat::zeros(0, 0),
            weights: entry.weights.clone(),
            aux_coupling_weight: entry.aux_coupling_weight.clone(),
        };
        let coupling_solution = match &entry.abstract_coupling {
            Some(m) => {
                net.abstract_coupling = m.clone();
                None
            }
            None => {
                let sol = solve_abstract_coupling(
                    &net.disturbance_factor(),
                    &net.coupling,
                    &net.output_map(),
                    &net.abstract_disturbance_factor(),
                    tol,
                )?;
                net.abstract_coupling = sol.abstract_coupling.clone();
                Some(sol)
            }
        };
        net.validate()?;
        Ok(ResolvedNetwork {
            net,
            links,
            coupling_solution,
        })
    }
}
