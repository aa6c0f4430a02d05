use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Compliance, EncryptionConstraint};
use crate::topology::{AttachmentMap, LayerId, Mechanism};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ComplianceProfile {
    pub allowed_mechanisms: BTreeSet<Mechanism>,
    pub min_key_length_bits: u32,
}

#[derive(Debug, Error)]
pub enum ComplianceError {
    #[error("compliance file: {0}")]
    Schema(String),
    #[error("compliance profile {profile}: {reason}")]
    Invalid { profile: String, reason: String },
}

/// Regulatory profile name -> allowed mechanisms and minimum key length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ComplianceProfileTable {
    profiles: BTreeMap<Compliance, ComplianceProfile>,
}

impl Default for ComplianceProfileTable {
    fn default() -> Self {
        let all: BTreeSet<Mechanism> = Mechanism::ALL.into_iter().collect();
        let profile = |min| ComplianceProfile {
            allowed_mechanisms: all.clone(),
            min_key_length_bits: min,
        };
        Self {
            profiles: BTreeMap::from([
                (Compliance::None, profile(128)),
                (Compliance::Generic, profile(128)),
                (Compliance::Bsi, profile(256)),
                (Compliance::Hipaa, profile(128)),
            ]),
        }
    }
}

impl ComplianceProfileTable {
    pub fn from_json(text: &str) -> Result<Self, ComplianceError> {
        let profiles: BTreeMap<Compliance, ComplianceProfile> =
            serde_json::from_str(text).map_err(|e| ComplianceError::Schema(e.to_string()))?;
        Self::new(profiles)
    }

    pub fn new(profiles: BTreeMap<Compliance, ComplianceProfile>) -> Result<Self, ComplianceError> {
        for c in Compliance::ALL {
            let p = profiles.get(&c).ok_or_else(|| ComplianceError::Invalid {
                profile: c.to_string(),
                reason: "missing".into(),
            })?;
            if p.allowed_mechanisms.is_empty() {
                return Err(ComplianceError::Invalid {
                    profile: c.to_string(),
                    reason: "allows no mechanism".into(),
                });
            }
            if matches!(c, Compliance::None | Compliance::Generic)
                && (p.allowed_mechanisms.len() != Mechanism::ALL.len()
                    || p.min_key_length_bits != 128)
            {
                return Err(ComplianceError::Invalid {
                    profile: c.to_string(),
                    reason: "must allow every mechanism at 128 bits".into(),
                });
            }
        }
        Ok(Self { profiles })
    }

    pub fn profile(&self, compliance: Compliance) -> &ComplianceProfile {
        // every variant is present by construction
        &self.profiles[&compliance]
    }

    /// Whether a capability with this mechanism and key length satisfies the profile.
    pub fn permits(&self, compliance: Compliance, mechanism: Mechanism, key_length_bits: u32) -> bool {
        let p = self.profile(compliance);
        p.allowed_mechanisms.contains(&mechanism) && key_length_bits >= p.min_key_length_bits
    }
}

/// Layer order to try for a constraint: preferred layers first, in the
/// caller's order, then the rest bottom-up.
pub(crate) fn layer_order(constraint: &EncryptionConstraint) -> Vec<LayerId> {
    let mut order: Vec<LayerId> = Vec::with_capacity(3);
    if let Some(pref) = &constraint.layer_preference {
        for l in pref {
            if !order.contains(l) {
                order.push(*l);
            }
        }
    }
    for l in LayerId::ALL {
        if !order.contains(&l) {
            order.push(l);
        }
    }
    order
}

/// Encryption layers both endpoints can terminate under the constraint's
/// compliance profile, in preference order. An empty result means the
/// request is infeasible.
pub fn allowed_encryption_layers(
    constraint: &EncryptionConstraint,
    profiles: &ComplianceProfileTable,
    src: &AttachmentMap,
    dst: &AttachmentMap,
) -> Vec<(LayerId, Mechanism)> {
    let qualifies = |caps: &AttachmentMap, layer: LayerId, mechanism: Mechanism| {
        caps.get(&layer).is_some_and(|atts| {
            atts.iter().any(|a| {
                a.capability.is_some_and(|c| {
                    c.mechanism == mechanism
                        && profiles.permits(constraint.compliance, mechanism, c.key_length_bits)
                })
            })
        })
    };
    layer_order(constraint)
        .into_iter()
        .map(|layer| (layer, Mechanism::for_layer(layer)))
        .filter(|(layer, mech)| qualifies(src, *layer, *mech) && qualifies(dst, *layer, *mech))
        .collect()
}
