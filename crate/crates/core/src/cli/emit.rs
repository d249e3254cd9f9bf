//! Writes systems and certificates back in the project-file schema.

use serde_json::{json, Map, Value};

use crate::hybrid_model::{JumpDiffusionSystem, Nonlinearity, NonlinearityKind};
use crate::storage::StorageCertificate;

use super::matrix::matrix_to_json;

fn nonlinearity_to_json(phi: &Nonlinearity) -> crate::Result<Value> {
    let multiplier = matrix_to_json(phi.multiplier());
    match phi.kind() {
        NonlinearityKind::Zero => Ok(json!({ "kind": "zero", "dim": phi.dim() })),
        NonlinearityKind::SineSum => Ok(json!({
            "kind": "sine_sum",
            "dim": phi.dim(),
            "multiplier": multiplier,
        })),
        NonlinearityKind::Table { knots, values } => Ok(json!({
            "kind": "table",
            "dim": phi.dim(),
            "multiplier": multiplier,
            "knots": knots,
            "values": values,
        })),
        NonlinearityKind::Stacked(parts) => Ok(json!({
            "kind": "stacked",
            "parts": parts.iter().map(nonlinearity_to_json).collect::<crate::Result<Vec<_>>>()?,
        })),
        other => Err(crate::Error::Domain(format!(
            "nonlinearity {other:?} has no file representation"
        ))),
    }
}

pub fn system_to_json(sys: &JumpDiffusionSystem) -> crate::Result<Value> {
    let mut obj = Map::new();
    obj.insert("A".into(), matrix_to_json(&sys.a));
    obj.insert("B".into(), matrix_to_json(&sys.b));
    obj.insert("C1".into(), matrix_to_json(&sys.c1));
    obj.insert("C2".into(), matrix_to_json(&sys.c2));
    obj.insert("D".into(), matrix_to_json(&sys.d));
    if sys.l_k() > 0 {
        obj.insert("E".into(), matrix_to_json(&sys.e));
        obj.insert("F".into(), matrix_to_json(&sys.f));
        obj.insert("nonlinearity".into(), nonlinearity_to_json(&sys.phi)?);
    }
    obj.insert("G".into(), json!(sys.g.as_slice()));
    let jumps: Vec<Value> = sys
        .jumps
        .iter()
        .zip(&sys.rates)
        .map(|(r, rate)| json!({ "R": r.as_slice(), "rate": rate }))
        .collect();
    obj.insert("jumps".into(), Value::Array(jumps));
    Ok(Value::Object(obj))
}

pub fn certificate_to_json(cert: &StorageCertificate, system: &str, abstraction: &str, abstract_input: &crate::matrix_analysis::Mat) -> Value {
    let s = &cert.seed;
    json!({
        "system": system,
        "abstraction": abstraction,
        "metric": matrix_to_json(&s.metric),
        "feedback": matrix_to_json(&s.feedback),
        "supply": matrix_to_json(&s.supply),
        "phi_gain": matrix_to_json(&s.phi_gain),
        "disturbance_basis": matrix_to_json(&s.disturbance_basis),
        "aux": {
            "A": matrix_to_json(&s.aux.a),
            "B": matrix_to_json(&s.aux.b),
            "C": matrix_to_json(&s.aux.c),
            "D": matrix_to_json(&s.aux.d),
            "split": s.aux.split,
        },
        "aux_weight": matrix_to_json(&s.aux_weight),
        "decay_rate": s.decay_rate,
        "aux_decay_rate": s.aux_decay_rate,
        "embedding": matrix_to_json(&cert.embedding),
        "disturbance_factor": matrix_to_json(&cert.disturbance_factor),
        "abstract_disturbance_factor": matrix_to_json(&cert.abstract_disturbance_factor),
        "phi_gain_abstract": matrix_to_json(&cert.phi_gain_abstract),
        "state_feedforward": matrix_to_json(&cert.state_feedforward),
        "output_map": matrix_to_json(&cert.output_map),
        "input_map": matrix_to_json(&cert.input_map),
        "abstract_input_matrix": matrix_to_json(abstract_input),
    })
}
