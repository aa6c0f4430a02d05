//! Technology-agnostic connectivity intents: request validation, the
//! lifecycle state machine, compliance profiles and translation into
//! network-aware intents.

mod aci;
mod compliance;
mod lifecycle;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::topology::LayerId;

pub use aci::{to_aci, AciError};
pub use compliance::{
    allowed_encryption_layers, ComplianceError, ComplianceProfile, ComplianceProfileTable,
};
pub use lifecycle::IllegalTransition;
pub use validate::{validate_intent, FieldError, IntentIds, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Compliance {
    None,
    Generic,
    Bsi,
    Hipaa,
}

impl Compliance {
    pub const ALL: [Compliance; 4] = [
        Compliance::None,
        Compliance::Generic,
        Compliance::Bsi,
        Compliance::Hipaa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Compliance::None => "NONE",
            Compliance::Generic => "GENERIC",
            Compliance::Bsi => "BSI",
            Compliance::Hipaa => "HIPAA",
        }
    }

    pub fn parse(s: &str) -> Option<Compliance> {
        Compliance::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Compliance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EncryptionConstraint {
    pub required: bool,
    pub compliance: Compliance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_preference: Option<Vec<LayerId>>,
}

impl EncryptionConstraint {
    pub fn none() -> Self {
        Self {
            required: false,
            compliance: Compliance::None,
            layer_preference: None,
        }
    }

    pub fn required(compliance: Compliance) -> Self {
        Self {
            required: true,
            compliance,
            layer_preference: None,
        }
    }

    pub fn with_preference(mut self, layers: Vec<LayerId>) -> Self {
        self.layer_preference = Some(layers);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntentAction {
    Connect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntentState {
    Submitted,
    Compiling,
    Installing,
    Installed,
    Recompiling,
    Failed,
    Withdrawing,
    Withdrawn,
}

impl IntentState {
    pub const ALL: [IntentState; 8] = [
        IntentState::Submitted,
        IntentState::Compiling,
        IntentState::Installing,
        IntentState::Installed,
        IntentState::Recompiling,
        IntentState::Failed,
        IntentState::Withdrawing,
        IntentState::Withdrawn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntentState::Submitted => "SUBMITTED",
            IntentState::Compiling => "COMPILING",
            IntentState::Installing => "INSTALLING",
            IntentState::Installed => "INSTALLED",
            IntentState::Recompiling => "RECOMPILING",
            IntentState::Failed => "FAILED",
            IntentState::Withdrawing => "WITHDRAWING",
            IntentState::Withdrawn => "WITHDRAWN",
        }
    }
}

impl fmt::Display for IntentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateChange {
    pub state: IntentState,
    pub sequence: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Intent {
    pub id: String,
    pub action: IntentAction,
    pub src: String,
    pub dst: String,
    pub bandwidth_mbps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    pub encryption: EncryptionConstraint,
    pub state: IntentState,
    pub state_history: Vec<StateChange>,
}

impl Intent {
    /// Reason attached to the most recent transition into FAILED, if the
    /// intent is currently failed.
    pub fn failure_reason(&self) -> Option<&str> {
        if self.state != IntentState::Failed {
            return None;
        }
        self.state_history.last().map(|c| c.reason.as_str())
    }
}
