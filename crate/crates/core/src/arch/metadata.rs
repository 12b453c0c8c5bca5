//! Typed views of the architecture metadata blocks.

use crate::bmv2::target::{QCONTROL_METADATA, STANDARD_METADATA, XCONNECT_METADATA};
use crate::runtime::{Layout, PacketInstance, RuntimeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventType {
    HeraldingBsmOutcome = 0,
    SwapBsmOutcome = 1,
    Cnetwork = 2,
}

impl EventType {
    pub fn from_u64(v: u64) -> Option<Self> {
        match v {
            0 => Some(EventType::HeraldingBsmOutcome),
            1 => Some(EventType::SwapBsmOutcome),
            2 => Some(EventType::Cnetwork),
            _ => None,
        }
    }
}

pub const PATHWAY_CNETWORK: u64 = 0;
pub const PATHWAY_QCONTROL: u64 = 1;

pub const OP_NONE: u64 = 0;
pub const OP_SWAP: u64 = 1;
pub const OP_RELEASE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StandardMetadata {
    pub ingress_port: u16,
    pub egress_spec: u16,
    pub egress_port: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct XConnectMetadata {
    pub pathway: u8,
    pub ingress_port: u16,
    pub egress_spec: u16,
    pub bsm_grp: u16,
    pub bsm_info: u16,
}

/// `qcontrol_metadata_t`. Operation fields are only meaningful for the
/// selected `operation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QControlMetadata {
    pub event_type: EventType,
    pub event_timestamp: u64,
    pub operation: u8,
    pub release_qubit: u16,
    pub swap_bsm_id: u16,
    pub swap_qubit_0: u16,
    pub swap_qubit_1: u16,
    pub bsm_id: u16,
    pub bsm_success: bool,
    pub bsm_bell_index: u8,
}

impl QControlMetadata {
    pub fn event(event_type: EventType, timestamp: u64) -> Self {
        QControlMetadata {
            event_type,
            event_timestamp: timestamp,
            operation: OP_NONE as u8,
            release_qubit: 0,
            swap_bsm_id: 0,
            swap_qubit_0: 0,
            swap_qubit_1: 0,
            bsm_id: 0,
            bsm_success: false,
            bsm_bell_index: 0,
        }
    }

    pub fn herald(timestamp: u64, bsm_id: u16, success: bool, bell: u8) -> Self {
        QControlMetadata {
            bsm_id,
            bsm_success: success,
            bsm_bell_index: bell & 3,
            ..Self::event(EventType::HeraldingBsmOutcome, timestamp)
        }
    }

    pub fn swap_outcome(timestamp: u64, bsm_id: u16, success: bool, m: u8) -> Self {
        QControlMetadata {
            bsm_id,
            bsm_success: success,
            bsm_bell_index: m & 3,
            ..Self::event(EventType::SwapBsmOutcome, timestamp)
        }
    }

    pub fn store(&self, slots: &MetaSlots, pkt: &mut PacketInstance) {
        let v = [
            self.event_type as u64,
            self.event_timestamp,
            self.operation as u64,
            self.release_qubit as u64,
            self.swap_bsm_id as u64,
            self.swap_qubit_0 as u64,
            self.swap_qubit_1 as u64,
            self.bsm_id as u64,
            self.bsm_success as u64,
            self.bsm_bell_index as u64,
        ];
        put(pkt, &slots.qcontrol, &v);
    }

    pub fn load(slots: &MetaSlots, pkt: &PacketInstance) -> Result<Self, RuntimeError> {
        let g = |i: usize| get(pkt, slots.qcontrol[i]);
        let et = g(0);
        Ok(QControlMetadata {
            event_type: EventType::from_u64(et)
                .ok_or_else(|| RuntimeError::Evaluation(format!("bad event_type {et}")))?,
            event_timestamp: g(1),
            operation: g(2) as u8,
            release_qubit: g(3) as u16,
            swap_bsm_id: g(4) as u16,
            swap_qubit_0: g(5) as u16,
            swap_qubit_1: g(6) as u16,
            bsm_id: g(7) as u16,
            bsm_success: g(8) != 0,
            bsm_bell_index: g(9) as u8,
        })
    }
}

impl StandardMetadata {
    pub fn store(&self, slots: &MetaSlots, pkt: &mut PacketInstance) {
        let v = [
            self.ingress_port as u64,
            self.egress_spec as u64,
            self.egress_port as u64,
        ];
        put(pkt, &slots.standard, &v);
    }

    pub fn load(slots: &MetaSlots, pkt: &PacketInstance) -> Self {
        let g = |i: usize| get(pkt, slots.standard[i]) as u16;
        StandardMetadata {
            ingress_port: g(0),
            egress_spec: g(1),
            egress_port: g(2),
        }
    }
}

impl XConnectMetadata {
    pub fn store(&self, slots: &MetaSlots, pkt: &mut PacketInstance) {
        let v = [
            self.pathway as u64,
            self.ingress_port as u64,
            self.egress_spec as u64,
            self.bsm_grp as u64,
            self.bsm_info as u64,
        ];
        put(pkt, &slots.xconnect, &v);
    }

    pub fn load(slots: &MetaSlots, pkt: &PacketInstance) -> Self {
        let g = |i: usize| get(pkt, slots.xconnect[i]);
        XConnectMetadata {
            pathway: g(0) as u8,
            ingress_port: g(1) as u16,
            egress_spec: g(2) as u16,
            bsm_grp: g(3) as u16,
            bsm_info: g(4) as u16,
        }
    }
}

type Slot = (usize, usize, u32);

/// Positions of the metadata fields in a program layout, resolved once so
/// that per-packet access is by index.
#[derive(Debug, Clone)]
pub struct MetaSlots {
    standard: [Slot; 3],
    xconnect: [Slot; 5],
    qcontrol: [Slot; 10],
}

const STANDARD_FIELDS: [&str; 3] = ["ingress_port", "egress_spec", "egress_port"];
const XCONNECT_FIELDS: [&str; 5] = [
    "pathway",
    "ingress_port",
    "egress_spec",
    "bsm_grp",
    "bsm_info",
];
const QCONTROL_FIELDS: [&str; 10] = [
    "event_type",
    "event_timestamp",
    "operation",
    "release_qubit",
    "swap_bsm_id",
    "swap_qubit_0",
    "swap_qubit_1",
    "bsm_id",
    "bsm_success",
    "bsm_bell_index",
];

impl MetaSlots {
    pub fn new(layout: &Layout) -> Result<Self, RuntimeError> {
        fn resolve<const N: usize>(
            layout: &Layout,
            h: &str,
            names: [&str; N],
        ) -> Result<[Slot; N], RuntimeError> {
            let mut out = [(0, 0, 0); N];
            for (o, f) in out.iter_mut().zip(names) {
                *o = layout
                    .resolve(h, f)
                    .ok_or_else(|| RuntimeError::Evaluation(format!("layout lacks {h}.{f}")))?;
            }
            Ok(out)
        }
        Ok(MetaSlots {
            standard: resolve(layout, STANDARD_METADATA, STANDARD_FIELDS)?,
            xconnect: resolve(layout, XCONNECT_METADATA, XCONNECT_FIELDS)?,
            qcontrol: resolve(layout, QCONTROL_METADATA, QCONTROL_FIELDS)?,
        })
    }
}

// Metadata blocks are always valid, so reads cannot fail.
fn get(pkt: &PacketInstance, (h, f, _): Slot) -> u64 {
    pkt.headers[h].fields[f]
}

fn put(pkt: &mut PacketInstance, slots: &[Slot], values: &[u64]) {
    for (&(h, f, w), &v) in slots.iter().zip(values) {
        pkt.write(h, f, w, v);
    }
}
