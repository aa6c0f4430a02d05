use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{Compliance, EncryptionConstraint, Intent, IntentAction, IntentState, StateChange};
use crate::topology::{LayerId, MultiLayerTopology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    pub errors: Vec<FieldError>,
}

impl ValidationError {
    pub fn single(field: &str, reason: impl Into<String>) -> Self {
        Self {
            errors: vec![FieldError {
                field: field.into(),
                reason: reason.into(),
            }],
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("validation failed: ")?;
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            if e.field.is_empty() {
                write!(f, "{}", e.reason)?;
            } else {
                write!(f, "{}: {}", e.field, e.reason)?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

/// Allocates intent ids. Zero-padded so lexicographic order is submission order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntentIds {
    issued: u64,
}

impl IntentIds {
    pub fn starting_after(issued: u64) -> Self {
        Self { issued }
    }

    pub fn issued(&self) -> u64 {
        self.issued
    }

    pub fn next_id(&mut self) -> String {
        self.issued += 1;
        format!("intent-{:06}", self.issued)
    }

    /// Numeric part of an id produced by [`IntentIds::next_id`].
    pub fn parse(id: &str) -> Option<u64> {
        id.strip_prefix("intent-")?.parse().ok()
    }
}

#[derive(Default)]
struct Errors(Vec<FieldError>);

impl Errors {
    fn push(&mut self, field: &str, reason: impl Into<String>) {
        self.0.push(FieldError {
            field: field.to_string(),
            reason: reason.into(),
        });
    }
}

/// Validates an intent-request document against the topology. Never panics:
/// any malformed input yields a [`ValidationError`] listing every problem found.
/// An id is only consumed on success.
pub fn validate_intent(
    request: &Value,
    topology: &MultiLayerTopology,
    ids: &mut IntentIds,
) -> Result<Intent, ValidationError> {
    let Some(obj) = request.as_object() else {
        return Err(ValidationError::single("", "request must be an object"));
    };
    let mut errs = Errors::default();

    if let Some(action) = obj.get("action") {
        if action.as_str() != Some("CONNECT") {
            errs.push("action", "only CONNECT is supported");
        }
    }

    let src = site_field(obj, "src", topology, &mut errs);
    let dst = site_field(obj, "dst", topology, &mut errs);
    if let (Some(s), Some(d)) = (&src, &dst) {
        if s == d {
            errs.push("dst", "src equals dst");
        }
    }

    let bandwidth = match obj.get("bandwidthMbps") {
        None => {
            errs.push("bandwidthMbps", "missing");
            None
        }
        Some(v) => match v.as_u64() {
            Some(b) if b > 0 => Some(b),
            _ => {
                errs.push("bandwidthMbps", "must be a positive integer");
                None
            }
        },
    };

    let max_latency = match obj.get("maxLatencyMs") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(l) if l.is_finite() && l > 0.0 => Some(l),
            _ => {
                errs.push("maxLatencyMs", "must be a positive number");
                None
            }
        },
    };

    let encryption = match obj.get("encryption") {
        None | Some(Value::Null) => Some(EncryptionConstraint::none()),
        Some(Value::Object(enc)) => encryption_field(enc, &mut errs),
        Some(_) => {
            errs.push("encryption", "must be an object");
            None
        }
    };

    if !errs.0.is_empty() {
        return Err(ValidationError { errors: errs.0 });
    }
    let (Some(src), Some(dst), Some(bandwidth_mbps), Some(encryption)) =
        (src, dst, bandwidth, encryption)
    else {
        return Err(ValidationError::single("", "incomplete request"));
    };
    Ok(Intent {
        id: ids.next_id(),
        action: IntentAction::Connect,
        src,
        dst,
        bandwidth_mbps,
        max_latency_ms: max_latency,
        encryption,
        state: IntentState::Submitted,
        state_history: vec![StateChange {
            state: IntentState::Submitted,
            sequence: 0,
            reason: "submitted".into(),
        }],
    })
}

fn site_field(
    obj: &Map<String, Value>,
    field: &str,
    topology: &MultiLayerTopology,
    errs: &mut Errors,
) -> Option<String> {
    match obj.get(field) {
        None => {
            errs.push(field, "missing");
            None
        }
        Some(Value::String(s)) if topology.site(s).is_some() => Some(s.clone()),
        Some(Value::String(s)) => {
            errs.push(field, format!("unknown site {s}"));
            None
        }
        Some(_) => {
            errs.push(field, "must be a site id string");
            None
        }
    }
}

fn encryption_field(enc: &Map<String, Value>, errs: &mut Errors) -> Option<EncryptionConstraint> {
    let start = errs.0.len();
    let required = match enc.get("required") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            errs.push("encryption.required", "must be a boolean");
            false
        }
    };

    let compliance = match enc.get("compliance") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => match Compliance::parse(s) {
            Some(c) => Some(c),
            None => {
                errs.push("encryption.compliance", format!("unknown profile {s}"));
                None
            }
        },
        Some(_) => {
            errs.push("encryption.compliance", "must be a string");
            None
        }
    };

    let preference = match enc.get("layerPreference") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let mut layers = Vec::new();
            let mut seen = BTreeSet::new();
            for item in items {
                match item.as_str().and_then(LayerId::parse) {
                    Some(l) if seen.insert(l) => layers.push(l),
                    Some(l) => errs.push("encryption.layerPreference", format!("duplicate layer {l}")),
                    None => errs.push("encryption.layerPreference", format!("unknown layer {item}")),
                }
            }
            if items.is_empty() {
                errs.push("encryption.layerPreference", "must not be empty");
            }
            Some(layers)
        }
        Some(_) => {
            errs.push("encryption.layerPreference", "must be a list of layers");
            None
        }
    };

    if !required {
        if compliance.is_some_and(|c| c != Compliance::None) {
            errs.push("encryption.compliance", "compliance without required");
        }
        if preference.is_some() {
            errs.push("encryption.layerPreference", "layerPreference without required");
        }
    }
    if errs.0.len() > start {
        return None;
    }
    Some(EncryptionConstraint {
        required,
        compliance: compliance.unwrap_or(if required {
            Compliance::Generic
        } else {
            Compliance::None
        }),
        layer_preference: preference,
    })
}
