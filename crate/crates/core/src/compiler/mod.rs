//! Compiles network-aware intents into multi-layer services.
//!
//! The search is exhaustive and deterministic. Candidate encryption layers
//! come from the compliance filter in preference order (or a single
//! unencrypted optical candidate). Within a layer, routes (access leg pairs
//! plus a simple fiber path between their ROADMs) are ordered by total
//! latency, then fiber link ids, then the full traversed link-id list.
//! Wavelengths are tried first-fit from index 0. Exhaustive simple-path
//! enumeration is fine for ring-sized networks; meshes of any size need a
//! k-shortest-path bound (see [`MAX_PATHS_DEFAULT`]).

mod emit;
mod ledger;
mod search;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::{allowed_encryption_layers, to_aci, AciError, ComplianceProfileTable, EncryptionConstraint, Intent};
use crate::southbound::messages::{OperationKind, Payload};
use crate::topology::{AccessLeg, AttachmentMap, LayerId, Mechanism, MultiLayerTopology};

pub use ledger::{LedgerEntry, Lightpath, LightpathKey, ResourceLedger};
pub use search::{simple_fiber_paths, FiberPath};

/// Path enumeration cap per ROADM pair for large meshes. The reference ring
/// only ever has two candidates per pair.
pub const MAX_PATHS_DEFAULT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteAttachments {
    pub src: AttachmentMap,
    pub dst: AttachmentMap,
}

/// Network-aware form of an intent: resolved attachment points plus the
/// unchanged constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppCentricIntent {
    pub intent_id: String,
    pub src_site: String,
    pub dst_site: String,
    pub attachments: SiteAttachments,
    pub bandwidth_mbps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    pub encryption: EncryptionConstraint,
}

/// An installable device operation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkOperation {
    pub device_id: String,
    pub kind: OperationKind,
    pub params: Payload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rollback_of: Option<String>,
}

impl NetworkOperation {
    pub fn new(device_id: impl Into<String>, params: Payload) -> Self {
        Self {
            device_id: device_id.into(),
            kind: params.kind(),
            params,
            rollback_of: None,
        }
    }

    /// The undo of an installed operation with message id `message_id`.
    pub fn rollback(&self, message_id: &str) -> Self {
        Self {
            rollback_of: Some(message_id.to_string()),
            ..self.clone()
        }
    }

    pub fn encrypts(&self) -> bool {
        match &self.params {
            Payload::OpticalConnectionRequest(p) => p.encryption_flag,
            Payload::MacsecChannelConfig(_) | Payload::GreIpsecTunnelConfig(_) => true,
            Payload::FlowRule(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateSolution {
    pub layer: LayerId,
    pub mechanism: Option<Mechanism>,
    pub src_site: String,
    pub dst_site: String,
    pub src_leg: AccessLeg,
    pub dst_leg: AccessLeg,
    /// ROADMs from the source side ROADM to the destination side ROADM.
    pub roadm_path: Vec<String>,
    /// Fiber link ids in the same direction.
    pub optical_path: Vec<String>,
    pub wavelength_index: u32,
    /// Links above the optical layer (TRANSITIONAL), source side first.
    pub overlay_path: Vec<String>,
    pub total_latency_ms: f64,
    pub bandwidth_mbps: u64,
    pub key_length_bits: Option<u32>,
    /// True when the service rides an existing lightpath instead of a new one.
    pub groomed: bool,
    pub operations: Vec<NetworkOperation>,
}

impl CandidateSolution {
    pub fn src_transponder(&self) -> &str {
        self.src_leg.transponder()
    }

    pub fn dst_transponder(&self) -> &str {
        self.dst_leg.transponder()
    }

    /// Whether the lightpath itself is encrypted.
    pub fn optical_encryption(&self) -> bool {
        self.layer == LayerId::L0Optical && self.mechanism.is_some()
    }

    /// Every link the service traverses, source site to destination site.
    pub fn traversed_links(&self) -> Vec<String> {
        let mut out: Vec<String> = self.src_leg.links.clone();
        out.push(self.src_leg.client_attach.clone());
        out.extend(self.optical_path.iter().cloned());
        out.push(self.dst_leg.client_attach.clone());
        out.extend(self.dst_leg.links.iter().rev().cloned());
        out
    }

    pub fn lightpath_key(&self) -> LightpathKey {
        LightpathKey::new(
            self.src_transponder(),
            self.dst_transponder(),
            &self.optical_path,
            self.wavelength_index,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceRecord {
    pub intent_id: String,
    pub solution: CandidateSolution,
    pub reserved_resources: Vec<LedgerEntry>,
    pub installed_at_revision: u64,
    /// Number of earlier reservations made for the same intent.
    pub generation: u32,
}

impl ServiceRecord {
    /// Southbound message ids for this record's operations, in order.
    pub fn message_ids(&self) -> Vec<String> {
        (0..self.solution.operations.len())
            .map(|i| format!("{}/g{}/{}", self.intent_id, self.generation, i))
            .collect()
    }
}

/// Why a (layer, path, wavelength) candidate was not taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    #[serde(rename_all = "camelCase")]
    LatencyExceeded { latency_us: u64, max_us: u64 },
    #[serde(rename_all = "camelCase")]
    InsufficientCapacity { link: String, residual_mbps: u64 },
    #[serde(rename_all = "camelCase")]
    UnprotectedAccess { link: String },
    #[serde(rename_all = "camelCase")]
    NoFreeWavelength { wavelength: u32, link: String, holder: String },
    #[serde(rename_all = "camelCase")]
    PortClash { transponder: String, wavelength: u32 },
    #[serde(rename_all = "camelCase")]
    ExceedsLineRate { line_rate_mbps: u64 },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::LatencyExceeded { latency_us, max_us } => write!(
                f,
                "latency {:.3} ms exceeds limit {:.3} ms",
                *latency_us as f64 / 1000.0,
                *max_us as f64 / 1000.0
            ),
            RejectReason::InsufficientCapacity { link, residual_mbps } => {
                write!(f, "insufficient capacity on {link} ({residual_mbps} Mbps left)")
            }
            RejectReason::UnprotectedAccess { link } => {
                write!(f, "access link {link} lies outside the site before the encryption point")
            }
            RejectReason::NoFreeWavelength { wavelength, link, holder } => {
                write!(f, "no free wavelength: λ{wavelength} on {link} held by {holder}")
            }
            RejectReason::PortClash { transponder, wavelength } => {
                write!(f, "λ{wavelength} already in use on the line port of {transponder}")
            }
            RejectReason::ExceedsLineRate { line_rate_mbps } => {
                write!(f, "bandwidth exceeds lightpath line rate {line_rate_mbps} Mbps")
            }
        }
    }
}

/// One row of the candidate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateReport {
    pub layer: LayerId,
    pub mechanism: Option<Mechanism>,
    pub src_transponder: String,
    pub dst_transponder: String,
    pub path: Vec<String>,
    pub lambda: u32,
    pub total_latency_ms: f64,
    pub feasible: bool,
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject: Option<RejectReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub candidates: Vec<CandidateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("no encryption layer satisfies the constraint at both endpoints")]
    NoFeasibleEncryptionLayer,
    #[error("no feasible path ({} candidates rejected)", rejections.len())]
    NoFeasiblePath { rejections: Vec<CandidateReport> },
    #[error("reservation conflict: {0}")]
    Conflict(String),
    #[error(transparent)]
    Unresolvable(#[from] AciError),
}

impl CompileError {
    /// Stable machine-readable name of the failure.
    pub fn code(&self) -> &'static str {
        match self {
            CompileError::NoFeasibleEncryptionLayer => "NoFeasibleEncryptionLayer",
            CompileError::NoFeasiblePath { .. } => "NoFeasiblePath",
            CompileError::Conflict(_) => "ReservationConflict",
            CompileError::Unresolvable(AciError::UnresolvableSite(_)) => "UnresolvableSite",
            CompileError::Unresolvable(AciError::NotCompilable(_)) => "NotCompilable",
        }
    }
}

/// Layers (and mechanisms) the search will try, in order.
fn layer_candidates(
    aci: &AppCentricIntent,
    profiles: &ComplianceProfileTable,
) -> Result<Vec<(LayerId, Option<Mechanism>)>, CompileError> {
    if !aci.encryption.required {
        return Ok(vec![(LayerId::L0Optical, None)]);
    }
    let layers =
        allowed_encryption_layers(&aci.encryption, profiles, &aci.attachments.src, &aci.attachments.dst);
    if layers.is_empty() {
        return Err(CompileError::NoFeasibleEncryptionLayer);
    }
    Ok(layers.into_iter().map(|(l, m)| (l, Some(m))).collect())
}

/// Returns the first feasible solution in search order.
pub fn compile(
    aci: &AppCentricIntent,
    topology: &MultiLayerTopology,
    profiles: &ComplianceProfileTable,
    ledger: &ResourceLedger,
) -> Result<CandidateSolution, CompileError> {
    let layers = layer_candidates(aci, profiles)?;
    let mut rejections = Vec::new();
    let found = search::evaluate(aci, topology, profiles, ledger, &layers, |row| {
        rejections.push(row.clone());
    });
    match found {
        Some(hit) => Ok(emit::build_solution(aci, ledger, hit)),
        None => Err(CompileError::NoFeasiblePath { rejections }),
    }
}

/// Lists every candidate in search order with its verdict. Performs no reservation.
pub fn explain(
    aci: &AppCentricIntent,
    topology: &MultiLayerTopology,
    profiles: &ComplianceProfileTable,
    ledger: &ResourceLedger,
) -> ExplainReport {
    let layers = match layer_candidates(aci, profiles) {
        Ok(l) => l,
        Err(e) => {
            return ExplainReport {
                candidates: Vec::new(),
                notice: Some(format!("NoFeasibleEncryptionLayer: {e}")),
            }
        }
    };
    let mut candidates = Vec::new();
    search::evaluate_all(aci, topology, profiles, ledger, &layers, |row| {
        candidates.push(row.clone());
    });
    ExplainReport {
        candidates,
        notice: None,
    }
}

/// Releases the intent's current resources and compiles it again against
/// the current topology. The caller owns the lifecycle transitions.
pub fn recompile(
    intent: &Intent,
    topology: &mut MultiLayerTopology,
    ledger: &mut ResourceLedger,
    profiles: &ComplianceProfileTable,
) -> Result<CandidateSolution, CompileError> {
    ledger.release(topology, &intent.id);
    let aci = to_aci(intent, topology)?.remove(0);
    compile(&aci, topology, profiles, ledger)
}
