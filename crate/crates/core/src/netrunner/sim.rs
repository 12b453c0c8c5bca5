use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::demand::Injection;
use super::topology::Network;
use super::NetError;
use crate::arch::{DeviceOutput, DeviceShell, Directive, NodeId, QControlMetadata, Role, CPU_PORT};
use crate::bmv2::PipelineProgram;
use crate::control::{
    AgentConfig, CompleteOutcome, ConfigPlan, Controller, DeviceOp, EndRole, Submission,
    SubmitOutcome, ENDNODE_PORT,
};
use crate::fabric::{BellIndex, EventQueue, Fabric, FabricEvent, LinkEnd, QubitRef, Signal};
use crate::protocols::program_for;
use crate::protocols::wire::{
    LinkHeader, Message, NetHeader, ReqHeader, COMPLETE, CONTROLLER_ADDR, DIR_CONSUME, DIR_DELIVER,
    REQUEST, TRACK,
};

/// Programs loaded onto each device role.
#[derive(Debug, Clone)]
pub struct Programs {
    pub endnode: Arc<PipelineProgram>,
    pub router: Arc<PipelineProgram>,
    pub hub: Arc<PipelineProgram>,
}

impl Programs {
    pub fn builtin() -> Self {
        Programs {
            endnode: Arc::new(program_for(Role::EndNode)),
            router: Arc::new(program_for(Role::Router)),
            hub: Arc::new(program_for(Role::HeraldingHub)),
        }
    }

    fn for_role(&self, r: Role) -> Arc<PipelineProgram> {
        match r {
            Role::EndNode => self.endnode.clone(),
            Role::Router => self.router.clone(),
            Role::HeraldingHub => self.hub.clone(),
        }
    }
}

#[derive(Debug, Clone)]
enum SimEvent {
    Fabric(FabricEvent),
    Inject(usize),
    Packet {
        node: NodeId,
        port: u16,
        bytes: Vec<u8>,
    },
    /// A CPU-port emission, handed to the node's application or controller.
    Host {
        node: NodeId,
        bytes: Vec<u8>,
    },
    Config {
        node: NodeId,
        op: DeviceOp,
    },
}

/// Lifecycle timestamps of one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub request_id: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub submit_ns: u64,
    pub start_ns: Option<u64>,
    pub complete_ns: Option<u64>,
}

/// Delivery checks against fabric ground truth.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub deliveries: u64,
    pub partner_mismatch: u64,
    pub bell_mismatch: u64,
    /// Head and tail delivered different objects under one (conn_id, e2e_seq).
    pub pair_mismatch: u64,
    /// Objects delivered at one end only when the run stopped.
    pub one_sided: u64,
    pub stray: u64,
    /// Deliveries per end-to-end Bell index.
    pub bell_seen: [u64; 4],
}

impl Audit {
    pub fn clean(&self) -> bool {
        self.partner_mismatch == 0
            && self.bell_mismatch == 0
            && self.pair_mismatch == 0
            && self.stray == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub events: u64,
    pub packets: u64,
    pub ledger_violations: u64,
    pub ledger_checks: u64,
    pub swap_rejects: u64,
    pub ignored_heralds: u64,
    pub dropped_host: u64,
    pub device_drops: u64,
    pub device_errors: u64,
    pub illegal_operations: u64,
    pub attempts: u64,
    pub pairs_created: u64,
    pub swaps_ok: u64,
    pub swaps_failed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub records: Vec<RequestRecord>,
    pub trace_hash: String,
    pub audit: Audit,
    pub stats: SimStats,
    pub end_ns: u64,
    /// Set when the run stopped on an error; results up to that point are kept.
    pub aborted: Option<String>,
    #[serde(skip)]
    pub trace: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Stop at `stop_ns`, or keep going until every injected request
    /// completes (bounded by `drain_limit_ns`).
    pub drain: bool,
    pub stop_ns: u64,
    pub drain_limit_ns: u64,
    pub keep_trace: bool,
}

#[derive(Debug, Default)]
struct App {
    conn: Option<AgentConfig>,
    delivered: u16,
}

#[derive(Debug, Default, Clone, Copy)]
struct Sides {
    head: Option<BellIndex>,
    tail: Option<BellIndex>,
}

pub struct Simulation {
    net: Network,
    devices: BTreeMap<NodeId, DeviceShell>,
    apps: BTreeMap<NodeId, App>,
    fabric: Fabric,
    controller: Controller,
    queue: EventQueue<SimEvent>,
    demand: Vec<Injection>,
    records: Vec<RequestRecord>,
    by_id: BTreeMap<u32, usize>,
    generations: BTreeMap<(NodeId, u16), u64>,
    sides: BTreeMap<(u16, u32), Sides>,
    audit: Audit,
    stats: SimStats,
    completed: usize,
    hasher: Sha256,
    trace: Option<Vec<String>>,
    seed: u64,
}

fn qubit(node: NodeId, port: u16) -> QubitRef {
    QubitRef::new(node, port)
}

impl Simulation {
    pub fn new(
        net: Network,
        programs: &Programs,
        demand: Vec<Injection>,
        seed: u64,
    ) -> Result<Self, NetError> {
        let mut devices = BTreeMap::new();
        let mut fabric = Fabric::new(net.spec.physics.clone(), seed);
        for (&id, &role) in &net.roles {
            let ports = 0..net.ports[&id].len() as u16;
            let units = net.units.get(&id).copied().unwrap_or(0);
            let mut d = DeviceShell::new(id, role, programs.for_role(role), ports.clone(), units)
                .map_err(|e| NetError::Runtime(format!("device {id}: {e}")))?;
            if role != Role::EndNode {
                for &dst in &net.end_nodes {
                    let port = net.next_hop[&(id, dst)];
                    d.table_insert(&crate::runtime::TableEntry::new(
                        crate::protocols::T_CTRL_ROUTE,
                        &[dst as u64],
                        "forward",
                        &[port as u64],
                    ))
                    .map_err(|e| NetError::Runtime(format!("device {id}: {e}")))?;
                }
                let ctrl_port = if id == net.controller {
                    CPU_PORT
                } else {
                    net.next_hop[&(id, net.controller)]
                };
                d.table_insert(&crate::runtime::TableEntry::new(
                    crate::protocols::T_CTRL_ROUTE,
                    &[CONTROLLER_ADDR as u64],
                    "forward",
                    &[ctrl_port as u64],
                ))
                .map_err(|e| NetError::Runtime(format!("device {id}: {e}")))?;
            }
            if role != Role::HeraldingHub {
                for p in ports {
                    fabric.add_qubit(qubit(id, p));
                }
            }
            devices.insert(id, d);
        }
        let apps = net.end_nodes.iter().map(|&n| (n, App::default())).collect();
        let controller = Controller::new(
            net.controller,
            net.fibre_count(),
            &net.units,
            net.paths.clone(),
        );
        let mut queue = EventQueue::new();
        let mut records = Vec::with_capacity(demand.len());
        let mut by_id = BTreeMap::new();
        for (i, inj) in demand.iter().enumerate() {
            queue.push(inj.time_ns, SimEvent::Inject(i));
            by_id.insert(inj.id, i);
            records.push(RequestRecord {
                request_id: inj.id,
                src: inj.src,
                dst: inj.dst,
                submit_ns: inj.time_ns,
                start_ns: None,
                complete_ns: None,
            });
        }
        let mut hasher = Sha256::new();
        hasher.update(format!(
            "seed {seed} devices {} requests {}\n",
            net.device_count(),
            demand.len()
        ));
        Ok(Simulation {
            net,
            devices,
            apps,
            fabric,
            controller,
            queue,
            demand,
            records,
            by_id,
            generations: BTreeMap::new(),
            sides: BTreeMap::new(),
            audit: Audit::default(),
            stats: SimStats::default(),
            completed: 0,
            hasher,
            trace: None,
            seed,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn device(&self, id: NodeId) -> Option<&DeviceShell> {
        self.devices.get(&id)
    }

    pub fn device_mut(&mut self, id: NodeId) -> Option<&mut DeviceShell> {
        self.devices.get_mut(&id)
    }

    pub fn run(mut self, opts: RunOptions) -> RunResult {
        if opts.keep_trace {
            self.trace = Some(Vec::new());
        }
        let mut aborted = None;
        let limit = if opts.drain {
            opts.drain_limit_ns.max(opts.stop_ns)
        } else {
            opts.stop_ns
        };
        while let Some(ev) = self.queue.pop_until(limit) {
            self.stats.events += 1;
            self.log(ev.time, &ev.event);
            if let Err(e) = self.step(ev.time, ev.event) {
                aborted = Some(e);
                break;
            }
            for (t, fe) in self.fabric.take_scheduled() {
                self.queue.push(t, SimEvent::Fabric(fe));
            }
            if opts.drain && ev.time >= opts.stop_ns && self.completed == self.records.len() {
                break;
            }
        }
        if aborted.is_none() && opts.drain && self.completed < self.records.len() {
            aborted = Some(format!(
                "{} of {} requests incomplete at drain limit",
                self.records.len() - self.completed,
                self.records.len()
            ));
        }
        self.finish(aborted)
    }

    fn finish(mut self, aborted: Option<String>) -> RunResult {
        for s in self.sides.values() {
            match (s.head, s.tail) {
                (Some(h), Some(t)) if h != t => self.audit.pair_mismatch += 1,
                (Some(_), Some(_)) => {}
                _ => self.audit.one_sided += 1,
            }
        }
        for d in self.devices.values() {
            let s = &d.stats;
            self.stats.device_drops += s.drops;
            self.stats.device_errors +=
                s.parse_errors + s.runtime_errors + s.emission_conflicts + s.bad_port;
            self.stats.illegal_operations += s.illegal_operations;
        }
        let fs = &self.fabric.stats;
        self.stats.attempts = fs.attempts;
        self.stats.pairs_created = fs.pairs_created;
        self.stats.swaps_ok = fs.swaps_ok;
        self.stats.swaps_failed = fs.swaps_failed;
        RunResult {
            seed: self.seed,
            records: self.records,
            trace_hash: hex::encode(self.hasher.finalize()),
            audit: self.audit,
            stats: self.stats,
            end_ns: self.queue.now(),
            aborted,
            trace: self.trace,
        }
    }

    fn log(&mut self, t: u64, ev: &SimEvent) {
        let mut line = String::with_capacity(64);
        let _ = write!(line, "{t} ");
        let _ = match ev {
            SimEvent::Fabric(FabricEvent::Cycle { gen }) => write!(line, "cycle g{gen}"),
            SimEvent::Fabric(FabricEvent::Bsm { gen, token }) => {
                write!(line, "bsm g{gen} t{token}")
            }
            SimEvent::Fabric(FabricEvent::SwapDone { swap }) => write!(line, "swap-done s{swap}"),
            SimEvent::Fabric(FabricEvent::Deliver(s)) => write!(line, "signal {s:?}"),
            SimEvent::Inject(i) => write!(line, "inject {:?}", self.demand[*i]),
            SimEvent::Packet { node, port, bytes } => {
                write!(line, "pkt {node}.{port} {}", hex::encode(bytes))
            }
            SimEvent::Host { node, bytes } => write!(line, "host {node} {}", hex::encode(bytes)),
            SimEvent::Config { node, op } => write!(line, "cfg {node} {op:?}"),
        };
        line.push('\n');
        self.hasher.update(line.as_bytes());
        if let Some(tr) = &mut self.trace {
            line.pop();
            tr.push(line);
        }
    }

    fn step(&mut self, now: u64, ev: SimEvent) -> Result<(), String> {
        match ev {
            SimEvent::Fabric(fe) => {
                for sig in self.fabric.handle(fe, now) {
                    self.on_signal(sig, now);
                }
            }
            SimEvent::Inject(i) => {
                let inj = self.demand[i];
                let r = ReqHeader {
                    dst_node: inj.dst as u16,
                    requester: inj.src as u16,
                    responder: inj.dst as u16,
                    req_id: inj.id,
                    num_pairs: inj.num_pairs,
                    conn_id: 0,
                };
                self.app_send(inj.src, request_from(inj.src, r), now);
                self.app_send(
                    inj.src,
                    request_from(
                        inj.src,
                        ReqHeader {
                            dst_node: CONTROLLER_ADDR,
                            ..r
                        },
                    ),
                    now,
                );
            }
            SimEvent::Packet { node, port, bytes } => {
                self.stats.packets += 1;
                let out = self
                    .devices
                    .get_mut(&node)
                    .expect("known node")
                    .on_classical_packet(port, &bytes, now);
                self.on_output(node, out, now);
            }
            SimEvent::Host { node, bytes } => {
                if node == self.controller.node {
                    if let Ok(m) = Message::parse(&bytes) {
                        if matches!(m, Message::Request(..) | Message::Complete(..)) {
                            return self.on_controller_rx(m, now);
                        }
                    }
                }
                if self.apps.contains_key(&node) {
                    self.on_app_rx(node, &bytes, now);
                } else {
                    self.stats.dropped_host += 1;
                }
            }
            SimEvent::Config { node, op } => self.apply(node, op, now)?,
        }
        Ok(())
    }

    fn on_signal(&mut self, sig: Signal, now: u64) {
        let node = sig.node();
        let role = self.net.roles[&node];
        let ev = match sig {
            Signal::Herald {
                bsm_id,
                success,
                bell,
                ..
            } if role == Role::HeraldingHub => QControlMetadata::herald(now, bsm_id, success, bell),
            Signal::Herald { .. } => {
                // End nodes and routers learn of pairs from HERALD packets.
                self.stats.ignored_heralds += 1;
                return;
            }
            Signal::SwapOutcome {
                bsm_id, success, m, ..
            } => QControlMetadata::swap_outcome(now, bsm_id, success, m),
        };
        let out = self
            .devices
            .get_mut(&node)
            .expect("known node")
            .on_qcontrol_event(&ev);
        self.on_output(node, out, now);
    }

    fn on_output(&mut self, node: NodeId, out: DeviceOutput, now: u64) {
        match out.directive {
            Directive::None => {}
            Directive::Swap {
                bsm_id,
                qubit_0,
                qubit_1,
            } => {
                if self
                    .fabric
                    .swap_bsm(node, qubit_0, qubit_1, bsm_id, now)
                    .is_err()
                {
                    // Report a failed swap so the router does not wait forever.
                    self.stats.swap_rejects += 1;
                    let sig = Signal::SwapOutcome {
                        node,
                        bsm_id,
                        success: false,
                        m: 0,
                    };
                    let t = now + self.fabric.physics().swap_duration_ns;
                    self.queue
                        .push(t, SimEvent::Fabric(FabricEvent::Deliver(sig)));
                }
            }
            Directive::Release { qubit: q } => {
                self.fabric.release_qubit(qubit(node, q));
            }
        }
        for e in out.emissions {
            if e.port == CPU_PORT {
                self.queue.push(
                    now,
                    SimEvent::Host {
                        node,
                        bytes: e.bytes,
                    },
                );
            } else if let Some(l) = self.net.link(node, e.port) {
                let (peer, port, t) = (l.peer, l.peer_port, now + l.delay_ns);
                self.queue.push(
                    t,
                    SimEvent::Packet {
                        node: peer,
                        port,
                        bytes: e.bytes,
                    },
                );
            }
        }
    }

    /// Application to data plane, with no processing delay.
    fn app_send(&mut self, node: NodeId, m: Message, now: u64) {
        let out = self
            .devices
            .get_mut(&node)
            .expect("known node")
            .on_classical_packet(CPU_PORT, &m.to_bytes(), now);
        self.on_output(node, out, now);
    }

    fn on_app_rx(&mut self, node: NodeId, bytes: &[u8], now: u64) {
        let Ok(m) = Message::parse(bytes) else {
            self.stats.dropped_host += 1;
            return;
        };
        match m {
            Message::Request(_, r) if r.dst_node as NodeId == node => {
                let fwd = ReqHeader {
                    dst_node: CONTROLLER_ADDR,
                    ..r
                };
                self.app_send(node, request_from(node, fwd), now);
            }
            Message::Track(l, n) | Message::TrackAck(l, n) if n.direction == DIR_DELIVER => {
                self.on_delivery(node, l, n, now);
            }
            _ => self.stats.dropped_host += 1,
        }
    }

    fn on_delivery(&mut self, node: NodeId, l: LinkHeader, n: NetHeader, now: u64) {
        self.audit.deliveries += 1;
        let app = self.apps.get_mut(&node).expect("end node");
        let conn = match app.conn {
            Some(c) if c.cid == n.conn_id => c,
            _ => {
                self.audit.stray += 1;
                let consume = Message::Track(
                    LinkHeader {
                        msg_type: TRACK,
                        ..l
                    },
                    NetHeader {
                        direction: DIR_CONSUME,
                        ..n
                    },
                );
                self.app_send(node, consume, now);
                return;
            }
        };
        match self.fabric.ground_truth(qubit(node, ENDNODE_PORT)) {
            Some((partner, bell)) => {
                if partner != qubit(conn.peer, ENDNODE_PORT) {
                    self.audit.partner_mismatch += 1;
                }
                if bell != n.pauli_acc {
                    self.audit.bell_mismatch += 1;
                }
            }
            None => self.audit.partner_mismatch += 1,
        }
        self.audit.bell_seen[(n.pauli_acc & 3) as usize] += 1;
        let side = self.sides.entry((n.conn_id, n.e2e_seq)).or_default();
        let slot = if conn.role == EndRole::Head {
            &mut side.head
        } else {
            &mut side.tail
        };
        if slot.replace(n.pauli_acc).is_some() {
            self.audit.pair_mismatch += 1;
        }
        app.delivered += 1;
        let done = app.delivered == conn.num_pairs;
        let consume = Message::Track(
            LinkHeader {
                msg_type: TRACK,
                ..l
            },
            NetHeader {
                direction: DIR_CONSUME,
                ..n
            },
        );
        self.app_send(node, consume, now);
        if done {
            let (requester, responder) = match conn.role {
                EndRole::Head => (node, conn.peer),
                EndRole::Tail => (conn.peer, node),
            };
            let r = ReqHeader {
                dst_node: CONTROLLER_ADDR,
                requester: requester as u16,
                responder: responder as u16,
                req_id: conn.req_id,
                num_pairs: conn.num_pairs,
                conn_id: conn.cid,
            };
            let msg = Message::Complete(
                LinkHeader {
                    msg_type: COMPLETE,
                    label: node,
                    ..Default::default()
                },
                r,
            );
            self.app_send(node, msg, now);
        }
    }

    fn on_controller_rx(&mut self, m: Message, now: u64) -> Result<(), String> {
        match m {
            Message::Request(l, r) => {
                let s = Submission {
                    from: l.label,
                    requester: r.requester as NodeId,
                    responder: r.responder as NodeId,
                    req_id: r.req_id,
                    num_pairs: r.num_pairs,
                    arrival: now,
                };
                match self.controller.submit(s) {
                    Ok(SubmitOutcome::Queued(_)) => self.schedule(now)?,
                    Ok(_) => {}
                    Err(e) => return Err(format!("controller: {e}")),
                }
            }
            Message::Complete(l, r) => {
                if let CompleteOutcome::TornDown { request, plan } =
                    self.controller.on_complete(r.conn_id, l.label)
                {
                    if let Some(&i) = self.by_id.get(&request.id) {
                        self.records[i].complete_ns = Some(now);
                        self.completed += 1;
                    }
                    self.issue(plan, now);
                    self.schedule(now)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn schedule(&mut self, now: u64) -> Result<(), String> {
        let started = self
            .controller
            .schedule(now)
            .map_err(|e| format!("controller: {e}"))?;
        self.stats.ledger_checks += 1;
        if self.controller.ledger().check().is_err() {
            self.stats.ledger_violations += 1;
        }
        for s in started {
            if let Some(&i) = self.by_id.get(&s.request.id) {
                self.records[i].start_ns = Some(now);
            }
            self.issue(s.plan, now);
        }
        Ok(())
    }

    fn issue(&mut self, plan: ConfigPlan, now: u64) {
        for (node, op) in plan.ops {
            let t = now + self.net.ctrl_delay[&node];
            self.queue.push(t, SimEvent::Config { node, op });
        }
    }

    fn apply(&mut self, node: NodeId, op: DeviceOp, now: u64) -> Result<(), String> {
        let err = |e: &dyn std::fmt::Display| format!("configuring node {node}: {e}");
        match op {
            DeviceOp::AgentConfigure(c) => {
                let app = self
                    .apps
                    .get_mut(&node)
                    .ok_or_else(|| err(&"not an end node"))?;
                *app = App {
                    conn: Some(c),
                    delivered: 0,
                };
                return Ok(());
            }
            DeviceOp::AgentTeardown { cid } => {
                let app = self
                    .apps
                    .get_mut(&node)
                    .ok_or_else(|| err(&"not an end node"))?;
                if app.conn.is_some_and(|c| c.cid == cid) {
                    *app = App::default();
                }
                return Ok(());
            }
            DeviceOp::ReleaseQubit(q) => {
                self.fabric.release_qubit(qubit(node, q));
                return Ok(());
            }
            _ => {}
        }
        let d = self.devices.get_mut(&node).expect("known node");
        match op {
            DeviceOp::InstallGroup(g) => {
                d.install_bsm_group(g).map_err(|e| err(&e))?;
                if d.role == Role::HeraldingHub {
                    let end = |port: u16| {
                        let l = self.net.link(node, port).expect("group port exists");
                        LinkEnd {
                            qubit: qubit(l.peer, l.peer_port),
                            km: l.km,
                        }
                    };
                    let gen = self.fabric.start_generation(
                        node,
                        g.bsm_id,
                        end(g.entry0),
                        end(g.entry1),
                        now,
                    );
                    self.generations.insert((node, g.bsm_id), gen);
                }
            }
            DeviceOp::RemoveGroup(id) => {
                d.remove_bsm_group(id).map_err(|e| err(&e))?;
                if let Some(gen) = self.generations.remove(&(node, id)) {
                    self.fabric.stop_generation(gen).map_err(|e| err(&e))?;
                }
            }
            DeviceOp::TableInsert(e) => d.table_insert(&e).map_err(|e| err(&e))?,
            DeviceOp::TableDelete { table, key } => {
                d.table_delete(&table, &key).map_err(|e| err(&e))?;
            }
            DeviceOp::RegisterWrite {
                array,
                index,
                value,
            } => {
                d.processor_mut()
                    .register_write(&array, index as u64, value)
                    .map_err(|e| err(&e))?;
            }
            DeviceOp::AgentConfigure(_)
            | DeviceOp::AgentTeardown { .. }
            | DeviceOp::ReleaseQubit(_) => unreachable!(),
        }
        Ok(())
    }
}

/// REQUEST and COMPLETE carry their sender in the link label.
fn request_from(node: NodeId, r: ReqHeader) -> Message {
    Message::Request(
        LinkHeader {
            msg_type: REQUEST,
            label: node,
            ..Default::default()
        },
        r,
    )
}
