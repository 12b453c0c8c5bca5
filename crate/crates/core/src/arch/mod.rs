//! The V1Quantum device shell: fixed-function wiring around the programmable
//! blocks, QControl event injection, BSM groups and multicast replication.

mod metadata;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bmv2::{PipelineProgram, Target};
use crate::runtime::{PacketInstance, ProcessorState, RuntimeError, TableEntry, DROP_PORT};

pub use metadata::*;

/// Port over which a node's local application exchanges packets with its
/// data plane.
pub const CPU_PORT: u16 = 510;

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    EndNode,
    Router,
    HeraldingHub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BsmGroup {
    pub bsm_id: u16,
    pub entry0: u16,
    pub entry1: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchError {
    #[error("port {0} already belongs to a BSM group")]
    PortBusy(u16),
    #[error("no free BSM unit")]
    NoFreeBsmUnit,
    #[error("unknown BSM group {0}")]
    UnknownGroup(u16),
    #[error("BSM group {0} already installed")]
    DuplicateGroup(u16),
    #[error("BSM group entries must be two distinct ports")]
    BadGroup,
    #[error("{role:?} devices cannot {what}")]
    RoleViolation { role: Role, what: &'static str },
    #[error("program target must be v1quantum")]
    WrongTarget,
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// What QControl asks the physical layer to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Directive {
    None,
    Swap {
        bsm_id: u16,
        qubit_0: u16,
        qubit_1: u16,
    },
    Release {
        qubit: u16,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub port: u16,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceOutput {
    pub directive: Directive,
    pub emissions: Vec<Emission>,
}

impl DeviceOutput {
    fn nothing() -> Self {
        DeviceOutput {
            directive: Directive::None,
            emissions: Vec::new(),
        }
    }
}

/// Per-device counters. Faults are counted here rather than propagated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DeviceStats {
    pub packets_in: u64,
    pub packets_out: u64,
    pub qcontrol_events: u64,
    pub drops: u64,
    pub parse_errors: u64,
    pub runtime_errors: u64,
    pub emission_conflicts: u64,
    pub unknown_group: u64,
    pub illegal_operations: u64,
    pub bad_port: u64,
}

#[derive(Debug, Clone)]
pub struct DeviceShell {
    pub node: NodeId,
    pub role: Role,
    processor: ProcessorState,
    ports: BTreeSet<u16>,
    groups: BTreeMap<u16, BsmGroup>,
    /// Hub only: unit index per installed group, and the unit count.
    units: BTreeMap<u16, usize>,
    unit_count: usize,
    slots: MetaSlots,
    pub stats: DeviceStats,
}

impl DeviceShell {
    pub fn new(
        node: NodeId,
        role: Role,
        program: Arc<PipelineProgram>,
        ports: impl IntoIterator<Item = u16>,
        bsm_units: usize,
    ) -> Result<Self, ArchError> {
        if program.target != Target::V1Quantum {
            return Err(ArchError::WrongTarget);
        }
        let processor = ProcessorState::new(program)?;
        let slots = MetaSlots::new(processor.layout())?;
        Ok(DeviceShell {
            node,
            role,
            processor,
            ports: ports.into_iter().collect(),
            groups: BTreeMap::new(),
            units: BTreeMap::new(),
            unit_count: if role == Role::HeraldingHub {
                bsm_units
            } else {
                0
            },
            slots,
            stats: DeviceStats::default(),
        })
    }

    pub fn processor(&self) -> &ProcessorState {
        &self.processor
    }

    pub fn processor_mut(&mut self) -> &mut ProcessorState {
        &mut self.processor
    }

    pub fn ports(&self) -> impl Iterator<Item = u16> + '_ {
        self.ports.iter().copied()
    }

    pub fn table_insert(&mut self, e: &TableEntry) -> Result<(), ArchError> {
        Ok(self.processor.table_insert(e)?)
    }

    pub fn table_delete(&mut self, table: &str, key: &[u64]) -> Result<bool, ArchError> {
        Ok(self.processor.table_delete(table, key)?)
    }

    // ----- BSM groups -----

    pub fn groups(&self) -> impl Iterator<Item = &BsmGroup> {
        self.groups.values()
    }

    pub fn group(&self, bsm_id: u16) -> Option<&BsmGroup> {
        self.groups.get(&bsm_id)
    }

    pub fn bsm_units(&self) -> usize {
        self.unit_count
    }

    pub fn free_units(&self) -> usize {
        self.unit_count - self.units.len()
    }

    /// Physical unit bound to a hub group.
    pub fn unit_of(&self, bsm_id: u16) -> Option<usize> {
        self.units.get(&bsm_id).copied()
    }

    /// Installs a group and its same-ID multicast group. On a hub this also
    /// binds a physical BSM unit, whose index is returned.
    pub fn install_bsm_group(&mut self, g: BsmGroup) -> Result<Option<usize>, ArchError> {
        if self.role == Role::EndNode {
            return Err(ArchError::RoleViolation {
                role: self.role,
                what: "hold BSM groups",
            });
        }
        if g.entry0 == g.entry1 || g.bsm_id == 0 {
            return Err(ArchError::BadGroup);
        }
        if self.groups.contains_key(&g.bsm_id) {
            return Err(ArchError::DuplicateGroup(g.bsm_id));
        }
        for p in [g.entry0, g.entry1] {
            if self.groups.values().any(|x| x.entry0 == p || x.entry1 == p) {
                return Err(ArchError::PortBusy(p));
            }
        }
        let unit = if self.role == Role::HeraldingHub {
            let used: BTreeSet<usize> = self.units.values().copied().collect();
            let u = (0..self.unit_count)
                .find(|u| !used.contains(u))
                .ok_or(ArchError::NoFreeBsmUnit)?;
            self.units.insert(g.bsm_id, u);
            Some(u)
        } else {
            None
        };
        self.groups.insert(g.bsm_id, g);
        Ok(unit)
    }

    pub fn remove_bsm_group(&mut self, bsm_id: u16) -> Result<BsmGroup, ArchError> {
        let g = self
            .groups
            .remove(&bsm_id)
            .ok_or(ArchError::UnknownGroup(bsm_id))?;
        self.units.remove(&bsm_id);
        Ok(g)
    }

    /// Two copies of `pkt`, one per group entry, with `egress_port` and
    /// `bsm_info` set.
    pub fn multicast_replicate(
        &self,
        pkt: &PacketInstance,
        bsm_grp: u16,
    ) -> Result<[PacketInstance; 2], ArchError> {
        let g = self
            .groups
            .get(&bsm_grp)
            .ok_or(ArchError::UnknownGroup(bsm_grp))?;
        let copy = |port: u16| -> Result<PacketInstance, ArchError> {
            let mut c = pkt.clone();
            let mut sm = StandardMetadata::load(&self.slots, &c);
            sm.egress_port = port;
            sm.store(&self.slots, &mut c);
            let mut xm = XConnectMetadata::load(&self.slots, &c);
            xm.bsm_info = bsm_grp;
            xm.store(&self.slots, &mut c);
            Ok(c)
        };
        Ok([copy(g.entry0)?, copy(g.entry1)?])
    }

    // ----- packet paths -----

    fn fresh_metadata(slots: &MetaSlots, pkt: &mut PacketInstance, port: u16) {
        pkt.reset_metadata();
        StandardMetadata {
            ingress_port: port,
            egress_spec: DROP_PORT as u16,
            egress_port: 0,
        }
        .store(slots, pkt);
        XConnectMetadata {
            pathway: PATHWAY_CNETWORK as u8,
            ingress_port: port,
            egress_spec: DROP_PORT as u16,
            bsm_grp: 0,
            bsm_info: 0,
        }
        .store(slots, pkt);
    }

    /// A packet arriving on a classical port (or from the local application
    /// on [`CPU_PORT`]).
    pub fn on_classical_packet(&mut self, port: u16, raw: &[u8], now: u64) -> DeviceOutput {
        self.stats.packets_in += 1;
        if port != CPU_PORT && !self.ports.contains(&port) {
            self.stats.bad_port += 1;
            self.stats.drops += 1;
            return DeviceOutput::nothing();
        }
        let mut pkt = match self.processor.parse(raw) {
            Ok(p) => p,
            Err(_) => {
                self.stats.parse_errors += 1;
                self.stats.drops += 1;
                return DeviceOutput::nothing();
            }
        };
        match self.classical(port, &mut pkt, now) {
            Ok(out) => out,
            Err(_) => {
                self.stats.runtime_errors += 1;
                self.stats.drops += 1;
                DeviceOutput::nothing()
            }
        }
    }

    fn classical(
        &mut self,
        port: u16,
        pkt: &mut PacketInstance,
        now: u64,
    ) -> Result<DeviceOutput, ArchError> {
        Self::fresh_metadata(&self.slots, pkt, port);
        self.processor.execute_pipeline("ingress", pkt)?;
        let xm = XConnectMetadata::load(&self.slots, pkt);
        if xm.pathway as u64 == PATHWAY_QCONTROL {
            let ev = QControlMetadata::event(EventType::Cnetwork, now);
            ev.store(&self.slots, pkt);
            return self.qcontrol(pkt);
        }
        let mut sm = StandardMetadata::load(&self.slots, pkt);
        if sm.egress_spec as u64 == DROP_PORT {
            self.stats.drops += 1;
            return Ok(DeviceOutput::nothing());
        }
        sm.egress_port = sm.egress_spec;
        sm.store(&self.slots, pkt);
        let mut out = DeviceOutput::nothing();
        self.egress_and_emit(pkt, &mut out)?;
        Ok(out)
    }

    /// A physical-layer event (herald or swap outcome). QControl starts with
    /// no packet headers valid.
    pub fn on_qcontrol_event(&mut self, ev: &QControlMetadata) -> DeviceOutput {
        let mut pkt = self.processor.new_packet();
        Self::fresh_metadata(&self.slots, &mut pkt, 0);
        ev.store(&self.slots, &mut pkt);
        let r = self.qcontrol(&mut pkt);
        match r {
            Ok(out) => out,
            Err(_) => {
                self.stats.runtime_errors += 1;
                DeviceOutput::nothing()
            }
        }
    }

    fn qcontrol(&mut self, pkt: &mut PacketInstance) -> Result<DeviceOutput, ArchError> {
        self.stats.qcontrol_events += 1;
        self.processor.execute_pipeline("qcontrol", pkt)?;
        let qm = QControlMetadata::load(&self.slots, pkt)?;
        let directive = match qm.operation as u64 {
            OP_NONE => Directive::None,
            OP_SWAP if self.role == Role::Router => Directive::Swap {
                bsm_id: qm.swap_bsm_id,
                qubit_0: qm.swap_qubit_0,
                qubit_1: qm.swap_qubit_1,
            },
            OP_RELEASE if self.role != Role::HeraldingHub => Directive::Release {
                qubit: qm.release_qubit,
            },
            _ => {
                self.stats.illegal_operations += 1;
                Directive::None
            }
        };
        let mut out = DeviceOutput {
            directive,
            emissions: Vec::new(),
        };
        let xm = XConnectMetadata::load(&self.slots, pkt);
        let unicast = xm.egress_spec as u64 != DROP_PORT;
        match (unicast, xm.bsm_grp != 0) {
            (true, true) => {
                self.stats.emission_conflicts += 1;
                self.stats.drops += 1;
            }
            (false, false) => {}
            (true, false) => {
                let mut sm = StandardMetadata::load(&self.slots, pkt);
                sm.egress_port = xm.egress_spec;
                sm.store(&self.slots, pkt);
                self.egress_and_emit(pkt, &mut out)?;
            }
            (false, true) => match self.multicast_replicate(pkt, xm.bsm_grp) {
                Ok(copies) => {
                    for mut c in copies {
                        self.egress_and_emit(&mut c, &mut out)?;
                    }
                }
                Err(_) => {
                    self.stats.unknown_group += 1;
                    self.stats.drops += 1;
                }
            },
        }
        Ok(out)
    }

    fn egress_and_emit(
        &mut self,
        pkt: &mut PacketInstance,
        out: &mut DeviceOutput,
    ) -> Result<(), ArchError> {
        // egress_spec mirrors the chosen port so that mark_to_drop in Egress
        // is observable.
        let mut sm = StandardMetadata::load(&self.slots, pkt);
        sm.egress_spec = sm.egress_port;
        sm.store(&self.slots, pkt);
        self.processor.execute_pipeline("egress", pkt)?;
        let sm = StandardMetadata::load(&self.slots, pkt);
        if sm.egress_spec as u64 == DROP_PORT {
            self.stats.drops += 1;
            return Ok(());
        }
        self.stats.packets_out += 1;
        out.emissions.push(Emission {
            port: sm.egress_port,
            bytes: self.processor.deparse(pkt),
        });
        Ok(())
    }
}
