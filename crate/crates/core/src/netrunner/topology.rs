use std::collections::BTreeMap;

use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use super::NetError;
use crate::arch::{NodeId, Role};
use crate::control::{FibreId, Hop, Path};
use crate::fabric::PhysicsConfig;
use crate::protocols::{wire::CONTROLLER_ADDR, ROUTER_PORTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub role: Role,
    /// BSM units; hubs only.
    #[serde(default)]
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub km: f64,
}

/// Devices, fibres and physics. Ports are numbered per node in link order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub physics: PhysicsConfig,
}

impl TopologySpec {
    /// Hub 0 with end nodes `1..=n`, end node `i` on hub port `i - 1`.
    pub fn hub_and_spoke(n: u32, km: f64, units: usize) -> Self {
        let mut nodes = vec![NodeSpec {
            id: 0,
            role: Role::HeraldingHub,
            units,
        }];
        let mut links = Vec::new();
        for i in 1..=n {
            nodes.push(NodeSpec {
                id: i,
                role: Role::EndNode,
                units: 0,
            });
            links.push(LinkSpec { a: i, b: 0, km });
        }
        TopologySpec {
            nodes,
            links,
            physics: PhysicsConfig::default(),
        }
    }

    /// A(1) - hub(10) - router(20) - hub(11) - B(2), every fibre `km` long.
    pub fn chain(km: f64, units: usize) -> Self {
        let n = |id, role, units| NodeSpec { id, role, units };
        let l = |a, b| LinkSpec { a, b, km };
        TopologySpec {
            nodes: vec![
                n(10, Role::HeraldingHub, units),
                n(11, Role::HeraldingHub, units),
                n(20, Role::Router, 0),
                n(1, Role::EndNode, 0),
                n(2, Role::EndNode, 0),
            ],
            links: vec![l(1, 10), l(10, 20), l(20, 11), l(11, 2)],
            physics: PhysicsConfig::default(),
        }
    }

    pub fn with_units(mut self, units: usize) -> Self {
        for n in &mut self.nodes {
            if n.role == Role::HeraldingHub {
                n.units = units;
            }
        }
        self
    }
}

/// One end of a fibre as seen from a device port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortLink {
    pub fibre: FibreId,
    pub peer: NodeId,
    pub peer_port: u16,
    pub km: f64,
    pub delay_ns: u64,
}

/// A validated topology with ports, routes and delays resolved.
#[derive(Debug, Clone)]
pub struct Network {
    pub spec: TopologySpec,
    pub roles: BTreeMap<NodeId, Role>,
    pub units: BTreeMap<NodeId, usize>,
    pub ports: BTreeMap<NodeId, Vec<PortLink>>,
    pub end_nodes: Vec<NodeId>,
    /// The controller sits on the first hub listed.
    pub controller: NodeId,
    pub paths: Vec<Path>,
    /// Classical forwarding: egress port at `from` towards `to`.
    pub next_hop: BTreeMap<(NodeId, NodeId), u16>,
    /// Classical delay from the controller's hub to each node.
    pub ctrl_delay: BTreeMap<NodeId, u64>,
}

fn invalid(msg: impl Into<String>) -> NetError {
    NetError::InvalidTopology(msg.into())
}

impl Network {
    pub fn build(spec: &TopologySpec) -> Result<Self, NetError> {
        spec.physics
            .validate()
            .map_err(|e| invalid(format!("physics: {e}")))?;
        let mut roles = BTreeMap::new();
        let mut units = BTreeMap::new();
        for n in &spec.nodes {
            if n.id >= CONTROLLER_ADDR as NodeId {
                return Err(invalid(format!("node id {} exceeds 16 bits", n.id)));
            }
            if roles.insert(n.id, n.role).is_some() {
                return Err(invalid(format!("duplicate node id {}", n.id)));
            }
            match n.role {
                Role::HeraldingHub if n.units == 0 => {
                    return Err(invalid(format!("hub {} has no BSM units", n.id)))
                }
                Role::HeraldingHub => {
                    units.insert(n.id, n.units);
                }
                _ if n.units != 0 => {
                    return Err(invalid(format!("node {} is not a hub but has units", n.id)))
                }
                _ => {}
            }
        }
        let controller = spec
            .nodes
            .iter()
            .find(|n| n.role == Role::HeraldingHub)
            .ok_or_else(|| invalid("no hub"))?
            .id;

        let mut ports: BTreeMap<NodeId, Vec<PortLink>> =
            roles.keys().map(|&id| (id, Vec::new())).collect();
        let mut g: UnGraph<NodeId, FibreId> = UnGraph::new_undirected();
        let idx: BTreeMap<NodeId, NodeIndex> =
            roles.keys().map(|&id| (id, g.add_node(id))).collect();
        for (fibre, l) in spec.links.iter().enumerate() {
            if !(l.km.is_finite() && l.km >= 0.0) {
                return Err(invalid(format!("link {fibre}: bad length {}", l.km)));
            }
            if l.a == l.b {
                return Err(invalid(format!("link {fibre}: loops on node {}", l.a)));
            }
            for n in [l.a, l.b] {
                if !roles.contains_key(&n) {
                    return Err(invalid(format!("link {fibre}: unknown node {n}")));
                }
            }
            let delay_ns = spec.physics.delay_ns(l.km);
            let pa = ports[&l.a].len() as u16;
            let pb = ports[&l.b].len() as u16;
            ports.get_mut(&l.a).unwrap().push(PortLink {
                fibre,
                peer: l.b,
                peer_port: pb,
                km: l.km,
                delay_ns,
            });
            ports.get_mut(&l.b).unwrap().push(PortLink {
                fibre,
                peer: l.a,
                peer_port: pa,
                km: l.km,
                delay_ns,
            });
            g.add_edge(idx[&l.a], idx[&l.b], fibre);
        }
        for (&id, p) in &ports {
            match roles[&id] {
                Role::EndNode if p.len() != 1 => {
                    return Err(invalid(format!(
                        "end node {id} needs exactly one link, has {}",
                        p.len()
                    )))
                }
                Role::Router if p.len() > ROUTER_PORTS as usize => {
                    return Err(invalid(format!(
                        "router {id} has more than {ROUTER_PORTS} ports"
                    )))
                }
                _ => {}
            }
        }
        if petgraph::algo::connected_components(&g) != 1 {
            return Err(invalid("graph is not connected"));
        }

        let delay = |f: FibreId| spec.physics.delay_ns(spec.links[f].km);
        let route = |a: NodeId, b: NodeId| -> (u64, Vec<NodeId>) {
            let (cost, nodes) = astar(&g, idx[&a], |n| n == idx[&b], |e| delay(*e.weight()), |_| 0)
                .expect("graph is connected");
            (cost, nodes.into_iter().map(|n| g[n]).collect())
        };
        let port_to = |from: NodeId, to: NodeId| -> u16 {
            ports[&from]
                .iter()
                .position(|p| p.peer == to)
                .expect("adjacent") as u16
        };

        let mut next_hop = BTreeMap::new();
        for &a in roles.keys() {
            for &b in roles.keys() {
                if a != b {
                    let (_, nodes) = route(a, b);
                    next_hop.insert((a, b), port_to(a, nodes[1]));
                }
            }
        }
        let ctrl_delay = roles
            .keys()
            .map(|&n| {
                (
                    n,
                    if n == controller {
                        0
                    } else {
                        route(controller, n).0
                    },
                )
            })
            .collect();

        let end_nodes: Vec<NodeId> = roles
            .iter()
            .filter(|(_, r)| **r == Role::EndNode)
            .map(|(&n, _)| n)
            .collect();
        let mut paths = Vec::new();
        for &a in &end_nodes {
            for &b in &end_nodes {
                if a == b {
                    continue;
                }
                let (_, nodes) = route(a, b);
                let mut hops = Vec::new();
                let mut fibres = Vec::new();
                for w in nodes.windows(2) {
                    fibres.push(ports[&w[0]][port_to(w[0], w[1]) as usize].fibre);
                }
                for (i, w) in nodes.windows(3).enumerate() {
                    let (node, up, down) = (w[1], port_to(w[1], w[0]), port_to(w[1], w[2]));
                    let want_hub = i % 2 == 0;
                    hops.push(match roles[&node] {
                        Role::HeraldingHub if want_hub => Hop::Hub { node, up, down },
                        Role::Router if !want_hub => Hop::Router { node, up, down },
                        r => {
                            return Err(invalid(format!(
                                "route {a} -> {b}: {r:?} {node} where a {} is needed",
                                if want_hub { "hub" } else { "router" }
                            )))
                        }
                    });
                }
                if !matches!(hops.last(), Some(Hop::Hub { .. })) {
                    return Err(invalid(format!("route {a} -> {b} must end at a hub")));
                }
                paths.push(Path {
                    src: a,
                    dst: b,
                    hops,
                    fibres,
                });
            }
        }

        Ok(Network {
            spec: spec.clone(),
            roles,
            units,
            ports,
            end_nodes,
            controller,
            paths,
            next_hop,
            ctrl_delay,
        })
    }

    pub fn device_count(&self) -> usize {
        self.roles.len()
    }

    pub fn fibre_count(&self) -> usize {
        self.spec.links.len()
    }

    pub fn link(&self, node: NodeId, port: u16) -> Option<&PortLink> {
        self.ports.get(&node)?.get(port as usize)
    }
}
