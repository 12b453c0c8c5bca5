//! Hub-resident controller: pairs REQUEST submissions from both ends,
//! schedules them first-come-first-served with skipping over fibre and BSM
//! unit resources, and emits the device configuration for each start and
//! teardown.

mod ledger;
#[cfg(test)]
mod tests;

pub use ledger::{Active, LedgerViolation, ResourceLedger};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{BsmGroup, NodeId};
use crate::protocols::{ROLE_HEAD, ROLE_TAIL, T_CONN, T_HERALD_LABEL, T_PEER_FWD, T_RCONN};
use crate::runtime::TableEntry;

pub type FibreId = usize;

/// Pairs requested when a request does not say otherwise.
pub const DEFAULT_NUM_PAIRS: u16 = 50;

/// Uplink port of an end node, which is also its memory qubit.
pub const ENDNODE_PORT: u16 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub num_pairs: u16,
    pub submit_time: u64,
}

/// One end node's REQUEST as seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Submission {
    pub from: NodeId,
    pub requester: NodeId,
    pub responder: NodeId,
    pub req_id: u32,
    pub num_pairs: u16,
    pub arrival: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    /// Only one end has asked so far.
    Pending,
    /// Both ends asked; the request is queued.
    Queued(u32),
    /// Already seen from this end; ignored.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("request {0}: source equals destination")]
    SelfRequest(u32),
    #[error("request {0}: zero pairs requested")]
    ZeroPairs(u32),
    #[error("request {id}: node {node} is neither requester nor responder")]
    Stranger { id: u32, node: NodeId },
    #[error("request {id}: no path from {src} to {dst}")]
    NoPath { id: u32, src: NodeId, dst: NodeId },
    #[error("all connection ids in use")]
    CidsExhausted,
}

/// An intermediate device on a request path. `up` faces the requester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hop {
    Hub { node: NodeId, up: u16, down: u16 },
    Router { node: NodeId, up: u16, down: u16 },
}

impl Hop {
    pub fn node(&self) -> NodeId {
        match *self {
            Hop::Hub { node, .. } | Hop::Router { node, .. } => node,
        }
    }
}

/// Static route between two end nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub src: NodeId,
    pub dst: NodeId,
    pub hops: Vec<Hop>,
    pub fibres: Vec<FibreId>,
}

impl Path {
    pub fn hubs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.hops.iter().filter_map(|h| match *h {
            Hop::Hub { node, .. } => Some(node),
            Hop::Router { .. } => None,
        })
    }

    /// The same route walked from `dst` to `src`.
    pub fn reversed(&self) -> Path {
        let hops = self
            .hops
            .iter()
            .rev()
            .map(|h| match *h {
                Hop::Hub { node, up, down } => Hop::Hub {
                    node,
                    up: down,
                    down: up,
                },
                Hop::Router { node, up, down } => Hop::Router {
                    node,
                    up: down,
                    down: up,
                },
            })
            .collect();
        Path {
            src: self.dst,
            dst: self.src,
            hops,
            fibres: self.fibres.iter().rev().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndRole {
    Head,
    Tail,
}

impl EndRole {
    pub fn code(self) -> u64 {
        match self {
            EndRole::Head => ROLE_HEAD,
            EndRole::Tail => ROLE_TAIL,
        }
    }
}

/// What the application on an end node needs to know about its connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub cid: u16,
    pub req_id: u32,
    pub peer: NodeId,
    pub role: EndRole,
    pub num_pairs: u16,
}

/// A single configuration action on one device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeviceOp {
    InstallGroup(BsmGroup),
    RemoveGroup(u16),
    TableInsert(TableEntry),
    TableDelete {
        table: String,
        key: Vec<u64>,
    },
    RegisterWrite {
        array: String,
        index: u32,
        value: u64,
    },
    ReleaseQubit(u16),
    AgentConfigure(AgentConfig),
    AgentTeardown {
        cid: u16,
    },
}

/// Device operations in issue order. Operations for one device keep their
/// relative order when delivered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigPlan {
    pub ops: Vec<(NodeId, DeviceOp)>,
}

/// Counts of what a plan installs, by device kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanSummary {
    pub hub_groups: usize,
    pub router_groups: usize,
    pub endnode_entries: usize,
    pub router_entries: usize,
}

impl ConfigPlan {
    fn push(&mut self, node: NodeId, op: DeviceOp) {
        self.ops.push((node, op));
    }

    pub fn summary(&self, path: &Path) -> PlanSummary {
        let routers: BTreeSet<NodeId> = path
            .hops
            .iter()
            .filter(|h| matches!(h, Hop::Router { .. }))
            .map(Hop::node)
            .collect();
        let mut s = PlanSummary::default();
        for (node, op) in &self.ops {
            match op {
                DeviceOp::InstallGroup(_) if routers.contains(node) => s.router_groups += 1,
                DeviceOp::InstallGroup(_) => s.hub_groups += 1,
                DeviceOp::TableInsert(e) if e.table == T_CONN => s.endnode_entries += 1,
                DeviceOp::TableInsert(e) if e.table == T_RCONN => s.router_entries += 1,
                _ => {}
            }
        }
        s
    }
}

/// A request that has just been started.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Started {
    pub request: Request,
    pub cid: u16,
    pub plan: ConfigPlan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompleteOutcome {
    /// Only one end has reported.
    Waiting,
    /// Both ends reported; the plan tears the connection down.
    TornDown { request: Request, plan: ConfigPlan },
    /// No such connection, or this end already reported.
    Ignored,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControllerStats {
    pub submissions: u64,
    pub duplicates: u64,
    pub queued: u64,
    pub started: u64,
    pub completed: u64,
    pub ignored_completes: u64,
    pub skips: u64,
}

type PairKey = (NodeId, NodeId, u32);

#[derive(Debug, Clone)]
pub struct Controller {
    pub node: NodeId,
    paths: BTreeMap<(NodeId, NodeId), Path>,
    ledger: ResourceLedger,
    queue: VecDeque<Request>,
    halves: BTreeMap<PairKey, Submission>,
    paired: BTreeSet<PairKey>,
    completes: BTreeMap<u16, BTreeSet<NodeId>>,
    next_cid: u16,
    pub stats: ControllerStats,
}

impl Controller {
    /// `paths` must hold a route for every ordered end-node pair that may
    /// be requested; `units` gives the BSM unit count per hub.
    pub fn new(
        node: NodeId,
        fibres: usize,
        units: &BTreeMap<NodeId, usize>,
        paths: impl IntoIterator<Item = Path>,
    ) -> Self {
        Controller {
            node,
            paths: paths.into_iter().map(|p| ((p.src, p.dst), p)).collect(),
            ledger: ResourceLedger::new(fibres, units),
            queue: VecDeque::new(),
            halves: BTreeMap::new(),
            paired: BTreeSet::new(),
            completes: BTreeMap::new(),
            next_cid: 1,
            stats: ControllerStats::default(),
        }
    }

    pub fn ledger(&self) -> &ResourceLedger {
        &self.ledger
    }

    pub fn queue(&self) -> impl Iterator<Item = &Request> {
        self.queue.iter()
    }

    pub fn path(&self, src: NodeId, dst: NodeId) -> Option<&Path> {
        self.paths.get(&(src, dst))
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.ledger.active().next().is_none()
    }

    /// Records one end's REQUEST. The request is queued once both ends
    /// have asked, stamped with the later arrival.
    pub fn submit(&mut self, s: Submission) -> Result<SubmitOutcome, ControlError> {
        self.stats.submissions += 1;
        let id = s.req_id;
        if s.requester == s.responder {
            return Err(ControlError::SelfRequest(id));
        }
        if s.num_pairs == 0 {
            return Err(ControlError::ZeroPairs(id));
        }
        if s.from != s.requester && s.from != s.responder {
            return Err(ControlError::Stranger { id, node: s.from });
        }
        if !self.paths.contains_key(&(s.requester, s.responder)) {
            return Err(ControlError::NoPath {
                id,
                src: s.requester,
                dst: s.responder,
            });
        }
        let key = (s.requester, s.responder, s.req_id);
        if self.paired.contains(&key) {
            self.stats.duplicates += 1;
            return Ok(SubmitOutcome::Duplicate);
        }
        match self.halves.get(&key) {
            Some(first) if first.from == s.from => {
                self.stats.duplicates += 1;
                Ok(SubmitOutcome::Duplicate)
            }
            Some(first) => {
                let first = *first;
                self.halves.remove(&key);
                self.paired.insert(key);
                self.queue.push_back(Request {
                    id,
                    src: s.requester,
                    dst: s.responder,
                    num_pairs: first.num_pairs,
                    submit_time: first.arrival.max(s.arrival),
                });
                self.stats.queued += 1;
                Ok(SubmitOutcome::Queued(id))
            }
            None => {
                self.halves.insert(key, s);
                Ok(SubmitOutcome::Pending)
            }
        }
    }

    /// One scheduling pass: scans the queue front to back and starts every
    /// request whose fibres and hub units are all free.
    pub fn schedule(&mut self, now: u64) -> Result<Vec<Started>, ControlError> {
        let mut started = Vec::new();
        let mut kept = VecDeque::with_capacity(self.queue.len());
        while let Some(req) = self.queue.pop_front() {
            if !self.ledger.can_take(&self.paths[&(req.src, req.dst)]) {
                self.stats.skips += 1;
                kept.push_back(req);
                continue;
            }
            let cid = match self.fresh_cid() {
                Ok(c) => c,
                Err(e) => {
                    kept.push_back(req);
                    kept.extend(self.queue.drain(..));
                    self.queue = kept;
                    return Err(e);
                }
            };
            let path = &self.paths[&(req.src, req.dst)];
            let units = self.ledger.take(req, cid, path, now);
            let plan = configure_plan(&req, cid, path, &units);
            self.stats.started += 1;
            started.push(Started {
                request: req,
                cid,
                plan,
            });
        }
        self.queue = kept;
        Ok(started)
    }

    fn fresh_cid(&mut self) -> Result<u16, ControlError> {
        for _ in 0..=u16::MAX as u32 {
            let c = self.next_cid;
            self.next_cid = self.next_cid.wrapping_add(1);
            if c != 0 && !self.ledger.has_cid(c) {
                return Ok(c);
            }
        }
        Err(ControlError::CidsExhausted)
    }

    /// Records a COMPLETE for `cid` from `from`; tears down after both ends.
    pub fn on_complete(&mut self, cid: u16, from: NodeId) -> CompleteOutcome {
        let Some(active) = self.ledger.get(cid) else {
            self.stats.ignored_completes += 1;
            return CompleteOutcome::Ignored;
        };
        let req = active.request;
        if from != req.src && from != req.dst {
            self.stats.ignored_completes += 1;
            return CompleteOutcome::Ignored;
        }
        let seen = self.completes.entry(cid).or_default();
        if !seen.insert(from) {
            self.stats.ignored_completes += 1;
            return CompleteOutcome::Ignored;
        }
        if seen.len() < 2 {
            return CompleteOutcome::Waiting;
        }
        self.completes.remove(&cid);
        self.ledger.free(cid).expect("checked above");
        let path = &self.paths[&(req.src, req.dst)];
        self.stats.completed += 1;
        CompleteOutcome::TornDown {
            request: req,
            plan: teardown_plan(&req, cid, path),
        }
    }
}

/// Device operations that start `req` on `path` under `cid`. `units` gives
/// the BSM unit taken at each hub.
pub fn configure_plan(
    req: &Request,
    cid: u16,
    path: &Path,
    units: &[(NodeId, usize)],
) -> ConfigPlan {
    let mut plan = ConfigPlan::default();
    let c = cid as u64;
    for (node, role) in [(req.src, EndRole::Head), (req.dst, EndRole::Tail)] {
        for array in ["delivered", "link_valid", "trk_valid", "e2e_seq"] {
            plan.push(
                node,
                DeviceOp::RegisterWrite {
                    array: array.into(),
                    index: 0,
                    value: 0,
                },
            );
        }
        plan.push(
            node,
            DeviceOp::TableInsert(TableEntry::new(
                T_CONN,
                &[ENDNODE_PORT as u64],
                "set_conn",
                &[c, role.code(), req.num_pairs as u64],
            )),
        );
        let peer = if role == EndRole::Head {
            req.dst
        } else {
            req.src
        };
        plan.push(
            node,
            DeviceOp::AgentConfigure(AgentConfig {
                cid,
                req_id: req.id,
                peer,
                role,
                num_pairs: req.num_pairs,
            }),
        );
    }
    for hop in &path.hops {
        match *hop {
            Hop::Router { node, up, down } => {
                for port in [up, down] {
                    for array in ["link_valid", "swap_pending", "sw_done", "trk_valid"] {
                        plan.push(
                            node,
                            DeviceOp::RegisterWrite {
                                array: array.into(),
                                index: port as u32,
                                value: 0,
                            },
                        );
                    }
                }
                plan.push(
                    node,
                    DeviceOp::TableInsert(TableEntry::new(
                        T_RCONN,
                        &[c],
                        "set_path",
                        &[up as u64, down as u64],
                    )),
                );
                plan.push(
                    node,
                    DeviceOp::InstallGroup(BsmGroup {
                        bsm_id: cid,
                        entry0: up,
                        entry1: down,
                    }),
                );
            }
            Hop::Hub { node, up, down } => {
                let slot = units
                    .iter()
                    .find(|(n, _)| *n == node)
                    .map(|&(_, u)| u)
                    .expect("unit taken for every hub on the path");
                plan.push(
                    node,
                    DeviceOp::RegisterWrite {
                        array: "labels".into(),
                        index: slot as u32,
                        value: 0,
                    },
                );
                plan.push(
                    node,
                    DeviceOp::TableInsert(TableEntry::new(
                        T_HERALD_LABEL,
                        &[c],
                        "emit_herald",
                        &[slot as u64],
                    )),
                );
                plan.push(
                    node,
                    DeviceOp::TableInsert(TableEntry::new(
                        T_PEER_FWD,
                        &[c],
                        "to_peer",
                        &[up as u64, down as u64],
                    )),
                );
                // Last, since installing the group starts generation.
                plan.push(
                    node,
                    DeviceOp::InstallGroup(BsmGroup {
                        bsm_id: cid,
                        entry0: up,
                        entry1: down,
                    }),
                );
            }
        }
    }
    plan
}

/// Inverse of [`configure_plan`], plus releasing any qubits left entangled.
pub fn teardown_plan(req: &Request, cid: u16, path: &Path) -> ConfigPlan {
    let mut plan = ConfigPlan::default();
    let c = cid as u64;
    let del = |table: &str| DeviceOp::TableDelete {
        table: table.into(),
        key: vec![c],
    };
    for hop in &path.hops {
        match *hop {
            Hop::Hub { node, .. } => {
                plan.push(node, DeviceOp::RemoveGroup(cid));
                plan.push(node, del(T_HERALD_LABEL));
                plan.push(node, del(T_PEER_FWD));
            }
            Hop::Router { node, up, down } => {
                plan.push(node, DeviceOp::RemoveGroup(cid));
                plan.push(node, del(T_RCONN));
                plan.push(node, DeviceOp::ReleaseQubit(up));
                plan.push(node, DeviceOp::ReleaseQubit(down));
            }
        }
    }
    for node in [req.src, req.dst] {
        plan.push(
            node,
            DeviceOp::TableDelete {
                table: T_CONN.into(),
                key: vec![ENDNODE_PORT as u64],
            },
        );
        plan.push(node, DeviceOp::ReleaseQubit(ENDNODE_PORT));
        plan.push(node, DeviceOp::AgentTeardown { cid });
    }
    plan
}
