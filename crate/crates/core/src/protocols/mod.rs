//! Link- and network-layer protocols as V1Quantum programs.
//!
//! The hub labels heralded pairs and multicasts HERALD to both ends. The
//! head end node turns each HERALD into a TRACK carrying the running Pauli
//! accumulator; routers swap and fold `m ^ bell_down` into it; the tail
//! delivers, and its TRACK_ACK lets the head deliver the same object.

mod programs;
pub mod wire;

pub use programs::*;
pub use wire::{LinkHeader, Message, NetHeader, ReqHeader, WireError};

use crate::arch::Role;
use crate::bmv2::PipelineProgram;

/// The shipped program for a device role.
pub fn program_for(role: Role) -> PipelineProgram {
    match role {
        Role::EndNode => endnode_program(),
        Role::Router => router_program(),
        Role::HeraldingHub => hub_program(),
    }
}

/// Asset file stem for a role under `programs/`.
pub fn asset_name(role: Role) -> &'static str {
    match role {
        Role::EndNode => "endnode",
        Role::Router => "router",
        Role::HeraldingHub => "hub",
    }
}
