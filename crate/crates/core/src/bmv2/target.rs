//! Metadata blocks and enums the architecture provides to every program.
//!
//! Programs may reference these without declaring them. A program that does
//! declare one must use exactly the architecture's layout.

use super::ir::{EnumDef, Target};

pub const STANDARD_METADATA: &str = "standard_metadata";
pub const XCONNECT_METADATA: &str = "xconnect_metadata";
pub const QCONTROL_METADATA: &str = "qcontrol_metadata";

#[derive(Debug, Clone, Copy)]
pub struct IntrinsicHeader {
    pub name: &'static str,
    pub type_name: &'static str,
    pub fields: &'static [(&'static str, u32)],
}

const STANDARD: IntrinsicHeader = IntrinsicHeader {
    name: STANDARD_METADATA,
    type_name: "standard_metadata_t",
    fields: &[("ingress_port", 9), ("egress_spec", 9), ("egress_port", 9)],
};

// Enum-typed fields are carried as bit<8>.
const XCONNECT: IntrinsicHeader = IntrinsicHeader {
    name: XCONNECT_METADATA,
    type_name: "xconnect_metadata_t",
    fields: &[
        ("pathway", 8),
        ("ingress_port", 9),
        ("egress_spec", 9),
        ("bsm_grp", 16),
        ("bsm_info", 16),
    ],
};

const QCONTROL: IntrinsicHeader = IntrinsicHeader {
    name: QCONTROL_METADATA,
    type_name: "qcontrol_metadata_t",
    fields: &[
        ("event_type", 8),
        ("event_timestamp", 64),
        ("operation", 8),
        ("release_qubit", 9),
        ("swap_bsm_id", 16),
        ("swap_qubit_0", 9),
        ("swap_qubit_1", 9),
        ("bsm_id", 16),
        ("bsm_success", 1),
        ("bsm_bell_index", 2),
    ],
};

pub fn intrinsic_headers(target: Target) -> &'static [IntrinsicHeader] {
    match target {
        Target::V1Quantum => &[STANDARD, XCONNECT, QCONTROL],
        Target::Classical => &[STANDARD],
    }
}

pub fn intrinsic_header(target: Target, name: &str) -> Option<&'static IntrinsicHeader> {
    intrinsic_headers(target).iter().find(|h| h.name == name)
}

pub fn intrinsic_enums(target: Target) -> Vec<EnumDef> {
    let mk = |name: &str, members: &[&str]| EnumDef {
        name: name.to_string(),
        members: members
            .iter()
            .enumerate()
            .map(|(i, m)| (m.to_string(), i as u64))
            .collect(),
    };
    match target {
        Target::V1Quantum => vec![
            mk("PathWay", &["cnetwork", "qcontrol"]),
            mk(
                "QControlEventType",
                &["heralding_bsm_outcome", "swap_bsm_outcome", "cnetwork"],
            ),
            mk("QControlOperation", &["none", "swap", "release"]),
        ],
        Target::Classical => Vec::new(),
    }
}
