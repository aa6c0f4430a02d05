//! Reference data shipped with the crate: the three-ROADM ring with two
//! encrypting transponders, two MACsec switches and two IPsec hosts, and the
//! default compliance table.

use crate::intent::ComplianceProfileTable;
use crate::topology::{load_topology, MultiLayerTopology};

pub const REFERENCE_TOPOLOGY: &str = include_str!("../../../topologies/acino-ring.json");
pub const DEFAULT_COMPLIANCE: &str = include_str!("../../../config/compliance.json");

pub fn reference_topology() -> MultiLayerTopology {
    load_topology(REFERENCE_TOPOLOGY).expect("shipped topology is valid")
}

pub fn default_profiles() -> ComplianceProfileTable {
    ComplianceProfileTable::from_json(DEFAULT_COMPLIANCE).expect("shipped compliance table is valid")
}
