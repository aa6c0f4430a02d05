use thiserror::Error;

use super::{Intent, IntentState};
use crate::compiler::{AppCentricIntent, SiteAttachments};
use crate::topology::{reachable_attachments, LayerId, LinkKind, MultiLayerTopology, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AciError {
    #[error("site {0} has no usable attachment to the optical layer")]
    UnresolvableSite(String),
    #[error("intent in state {0} cannot be translated")]
    NotCompilable(IntentState),
}

/// Resolves an intent's sites into concrete per-layer attachment points.
///
/// A CONNECT intent always yields exactly one network-aware intent; the list
/// return type leaves room for actions that split into several.
pub fn to_aci(intent: &Intent, topology: &MultiLayerTopology) -> Result<Vec<AppCentricIntent>, AciError> {
    if !matches!(
        intent.state,
        IntentState::Submitted | IntentState::Compiling | IntentState::Recompiling
    ) {
        return Err(AciError::NotCompilable(intent.state));
    }
    let resolve = |site: &str| {
        let map = reachable_attachments(topology, site)
            .map_err(|_| AciError::UnresolvableSite(site.to_string()))?;
        let reaches_optical = map[&LayerId::L0Optical].iter().any(|a| {
            topology
                .node(&a.node_id)
                .is_some_and(|n| n.kind == NodeKind::Transponder)
                && topology
                    .links_of(&a.node_id)
                    .any(|l| l.kind == LinkKind::ClientAttach && l.is_up())
        });
        if reaches_optical {
            Ok(map)
        } else {
            Err(AciError::UnresolvableSite(site.to_string()))
        }
    };
    let src = resolve(&intent.src)?;
    let dst = resolve(&intent.dst)?;
    Ok(vec![AppCentricIntent {
        intent_id: intent.id.clone(),
        src_site: intent.src.clone(),
        dst_site: intent.dst.clone(),
        attachments: SiteAttachments { src, dst },
        bandwidth_mbps: intent.bandwidth_mbps,
        max_latency_ms: intent.max_latency_ms,
        encryption: intent.encryption.clone(),
    }])
}
