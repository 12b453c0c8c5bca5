//! Builder recipes for the hub, end-node and router programs.

use crate::arch::CPU_PORT;
use crate::bmv2::ir::Expr;
use crate::bmv2::{
    ActionBuilder, PipelineProgram, ProgramBuilder, StateBuilder, TableBuilder, Target,
};

use super::wire::*;

// Table names the control plane writes to.
pub const T_CTRL_ROUTE: &str = "ctrl_route";
pub const T_PEER_FWD: &str = "peer_fwd";
pub const T_HERALD_LABEL: &str = "herald_label";
pub const T_CONN: &str = "conn";
pub const T_RCONN: &str = "rconn";

pub const ROLE_HEAD: u64 = 1;
pub const ROLE_TAIL: u64 = 2;

/// Size of the hub label register (one cell per BSM unit).
pub const HUB_LABEL_SLOTS: u32 = 256;
/// Router per-port register size.
pub const ROUTER_PORTS: u32 = 16;

fn f(path: &str) -> Expr {
    Expr::field(path)
}

fn k(v: u64) -> Expr {
    Expr::konst(v)
}

fn p(i: usize) -> Expr {
    Expr::param(i)
}

fn common(b: &mut ProgramBuilder) {
    b.header_type(
        "link_h_t",
        &[("msg_type", 8), ("bsm_id", 16), ("label", 32), ("bell", 8)],
    );
    b.header_type(
        "net_h_t",
        &[
            ("conn_id", 16),
            ("e2e_seq", 32),
            ("pauli_acc", 8),
            ("direction", 8),
        ],
    );
    b.header_type(
        "req_h_t",
        &[
            ("dst_node", 16),
            ("requester", 16),
            ("responder", 16),
            ("req_id", 32),
            ("num_pairs", 16),
            ("conn_id", 16),
        ],
    );
    b.header("link_h", "link_h_t");
    b.header("net_h", "net_h_t");
    b.header("req_h", "req_h_t");
    b.parse_state(
        "parser",
        StateBuilder::new("start")
            .extract("link_h")
            .key("link_h.msg_type")
            .on_accept(HERALD as u64)
            .on(TRACK as u64, "parse_net")
            .on(TRACK_ACK as u64, "parse_net")
            .on(REQUEST as u64, "parse_req")
            .on(COMPLETE as u64, "parse_req"),
    );
    b.parse_state(
        "parser",
        StateBuilder::new("parse_net").extract("net_h").accept(),
    );
    b.parse_state(
        "parser",
        StateBuilder::new("parse_req").extract("req_h").accept(),
    );
    b.deparser("deparser", &["link_h", "net_h", "req_h"]);

    b.action(ActionBuilder::new("nop"));
    b.action(
        ActionBuilder::new("forward")
            .param("port", 9)
            .assign("standard_metadata.egress_spec", p(0)),
    );
    b.action(ActionBuilder::new("divert").assign("xconnect_metadata.pathway", k(1)));
    b.action(ActionBuilder::new("drop").drop());
}

fn keyless(name: &str, action: &str) -> TableBuilder {
    TableBuilder::new(name).default_action(action, &[])
}

fn ctrl_route() -> TableBuilder {
    TableBuilder::new(T_CTRL_ROUTE)
        .key("req_h.dst_node")
        .action("forward")
        .default_action("drop", &[])
}

/// Heralding hub: forwards requests towards the controller, relays
/// TRACK/TRACK_ACK between the two ends of a BSM group and turns successful
/// heralds into labelled HERALD multicasts.
pub fn hub_program() -> PipelineProgram {
    let mut b = ProgramBuilder::new(Target::V1Quantum);
    common(&mut b);
    b.header_type("hub_meta_t", &[("label", 32), ("tmp", 32)]);
    b.metadata("meta", "hub_meta_t");
    b.register_array("labels", 32, HUB_LABEL_SLOTS);
    b.register_array("unknown_heralds", 32, 1);

    b.action(
        ActionBuilder::new("to_peer")
            .param("a", 9)
            .param("b", 9)
            .assign(
                "standard_metadata.egress_spec",
                Expr::ternary(f("standard_metadata.ingress_port").eq_to(p(0)), p(1), p(0)),
            ),
    );
    b.table("ingress", ctrl_route());
    b.table(
        "ingress",
        TableBuilder::new(T_PEER_FWD)
            .key("link_h.bsm_id")
            .action("to_peer")
            .default_action("drop", &[]),
    );
    b.conditional(
        "ingress",
        "has_req",
        Expr::valid("req_h"),
        Some(T_CTRL_ROUTE),
        Some("has_net"),
    );
    b.conditional(
        "ingress",
        "has_net",
        Expr::valid("net_h"),
        Some(T_PEER_FWD),
        None,
    );
    b.init("ingress", "has_req");

    b.action(
        ActionBuilder::new("emit_herald")
            .param("slot", 8)
            .register_read("meta.label", "labels", p(0))
            .assign("meta.label", f("meta.label").add(k(1)))
            .register_write("labels", p(0), f("meta.label"))
            .add_header("link_h")
            .assign("link_h.msg_type", k(HERALD as u64))
            .assign("link_h.bsm_id", f("qcontrol_metadata.bsm_id"))
            .assign("link_h.label", f("meta.label"))
            .assign("link_h.bell", f("qcontrol_metadata.bsm_bell_index"))
            .assign("xconnect_metadata.bsm_grp", f("qcontrol_metadata.bsm_id")),
    );
    b.action(
        ActionBuilder::new("count_unknown")
            .register_read("meta.tmp", "unknown_heralds", k(0))
            .register_write("unknown_heralds", k(0), f("meta.tmp").add(k(1))),
    );
    b.table(
        "qcontrol",
        TableBuilder::new(T_HERALD_LABEL)
            .key("qcontrol_metadata.bsm_id")
            .action("emit_herald")
            .default_action("count_unknown", &[]),
    );
    b.conditional(
        "qcontrol",
        "herald_ok",
        f("qcontrol_metadata.event_type")
            .eq_to(k(0))
            .and(f("qcontrol_metadata.bsm_success").eq_to(k(1))),
        Some(T_HERALD_LABEL),
        None,
    );
    b.init("qcontrol", "herald_ok");
    b.finish().expect("hub program is valid")
}

/// End node with one uplink (port 0, qubit 0). The local application sits
/// behind the CPU port.
pub fn endnode_program() -> PipelineProgram {
    let mut b = ProgramBuilder::new(Target::V1Quantum);
    common(&mut b);
    b.header_type(
        "node_meta_t",
        &[
            ("qubit", 9),
            ("active", 1),
            ("cid", 16),
            ("role", 8),
            ("num_pairs", 16),
            ("delivered", 16),
            ("seq", 32),
            ("lvalid", 1),
            ("llabel", 32),
            ("bvalid", 1),
            ("blabel", 32),
            ("bseq", 32),
            ("bacc", 8),
        ],
    );
    b.metadata("meta", "node_meta_t");
    for (name, w) in [
        ("link_label", 32),
        ("link_bell", 8),
        ("link_valid", 1),
        ("e2e_seq", 32),
        ("delivered", 16),
        ("trk_valid", 1),
        ("trk_label", 32),
        ("trk_seq", 32),
        ("trk_acc", 8),
    ] {
        b.register_array(name, w, 1);
    }

    // ----- ingress -----
    b.action(ActionBuilder::new("to_uplink").assign("standard_metadata.egress_spec", k(0)));
    b.action(
        ActionBuilder::new("to_cpu").assign("standard_metadata.egress_spec", k(CPU_PORT as u64)),
    );
    b.table("ingress", keyless("t_divert", "divert"));
    b.table("ingress", keyless("t_uplink", "to_uplink"));
    b.table("ingress", keyless("t_to_cpu", "to_cpu"));
    b.conditional(
        "ingress",
        "from_cpu",
        f("standard_metadata.ingress_port").eq_to(k(CPU_PORT as u64)),
        Some("cpu_kind"),
        Some("net_kind"),
    );
    b.conditional(
        "ingress",
        "cpu_kind",
        Expr::valid("net_h"),
        Some("t_divert"),
        Some("t_uplink"),
    );
    b.conditional(
        "ingress",
        "net_kind",
        Expr::valid("req_h"),
        Some("t_to_cpu"),
        Some("t_divert"),
    );
    b.init("ingress", "from_cpu");

    // ----- qcontrol -----
    let zero = || k(0);
    b.action(
        ActionBuilder::new("set_conn")
            .param("cid", 16)
            .param("role", 8)
            .param("num_pairs", 16)
            .assign("meta.active", k(1))
            .assign("meta.cid", p(0))
            .assign("meta.role", p(1))
            .assign("meta.num_pairs", p(2)),
    );
    b.action(
        ActionBuilder::new("release")
            .assign("qcontrol_metadata.operation", k(2))
            .assign("qcontrol_metadata.release_qubit", f("meta.qubit")),
    );
    b.action(
        ActionBuilder::new("load_state")
            .register_read("meta.delivered", "delivered", zero())
            .register_read("meta.lvalid", "link_valid", zero())
            .register_read("meta.llabel", "link_label", zero())
            .register_read("meta.bvalid", "trk_valid", zero())
            .register_read("meta.blabel", "trk_label", zero())
            .register_read("meta.bseq", "trk_seq", zero())
            .register_read("meta.bacc", "trk_acc", zero()),
    );
    b.action(
        ActionBuilder::new("head_herald")
            .register_write("link_label", zero(), f("link_h.label"))
            .register_write("link_bell", zero(), f("link_h.bell"))
            .register_write("link_valid", zero(), k(1))
            .register_read("meta.seq", "e2e_seq", zero())
            .assign("meta.seq", f("meta.seq").add(k(1)))
            .register_write("e2e_seq", zero(), f("meta.seq"))
            .assign("link_h.msg_type", k(TRACK as u64))
            .add_header("net_h")
            .assign("net_h.conn_id", f("meta.cid"))
            .assign("net_h.e2e_seq", f("meta.seq"))
            .assign("net_h.pauli_acc", f("link_h.bell"))
            .assign("net_h.direction", k(DIR_FORWARD as u64))
            .assign("xconnect_metadata.egress_spec", k(0)),
    );
    b.action(
        ActionBuilder::new("tail_herald")
            .register_write("link_label", zero(), f("link_h.label"))
            .register_write("link_bell", zero(), f("link_h.bell"))
            .register_write("link_valid", zero(), k(1)),
    );
    b.action(
        ActionBuilder::new("deliver_buffered")
            .register_write("trk_valid", zero(), k(0))
            .assign("link_h.msg_type", k(TRACK as u64))
            .add_header("net_h")
            .assign("net_h.conn_id", f("meta.cid"))
            .assign("net_h.e2e_seq", f("meta.bseq"))
            .assign("net_h.pauli_acc", f("meta.bacc"))
            .assign("net_h.direction", k(DIR_DELIVER as u64))
            .assign("xconnect_metadata.egress_spec", k(CPU_PORT as u64)),
    );
    b.action(
        ActionBuilder::new("deliver")
            .assign("net_h.direction", k(DIR_DELIVER as u64))
            .assign("xconnect_metadata.egress_spec", k(CPU_PORT as u64)),
    );
    b.action(
        ActionBuilder::new("buffer_track")
            .register_write("trk_valid", zero(), k(1))
            .register_write("trk_label", zero(), f("link_h.label"))
            .register_write("trk_seq", zero(), f("net_h.e2e_seq"))
            .register_write("trk_acc", zero(), f("net_h.pauli_acc")),
    );
    b.action(
        ActionBuilder::new("head_consume")
            .register_write("link_valid", zero(), k(0))
            .register_write("delivered", zero(), f("meta.delivered").add(k(1)))
            .assign("qcontrol_metadata.operation", k(2))
            .assign("qcontrol_metadata.release_qubit", f("meta.qubit")),
    );
    b.action(
        ActionBuilder::new("tail_consume")
            .register_write("link_valid", zero(), k(0))
            .register_write("delivered", zero(), f("meta.delivered").add(k(1)))
            .assign("link_h.msg_type", k(TRACK_ACK as u64))
            .assign("link_h.bsm_id", f("meta.cid"))
            .assign("link_h.label", f("meta.llabel"))
            .assign("net_h.direction", k(DIR_ACK as u64))
            .assign("xconnect_metadata.egress_spec", k(0)),
    );

    let q = "qcontrol";
    b.table(
        q,
        TableBuilder::new(T_CONN)
            .key("meta.qubit")
            .action("set_conn")
            .default_action("nop", &[])
            .next(Some("active")),
    );
    b.table(q, keyless("t_release", "release"));
    b.table(q, keyless("t_load", "load_state").next(Some("from_app")));
    b.table(q, keyless("t_head_herald", "head_herald"));
    b.table(
        q,
        keyless("t_tail_herald", "tail_herald").next(Some("buffered_match")),
    );
    b.table(q, keyless("t_deliver_buffered", "deliver_buffered"));
    b.table(q, keyless("t_deliver", "deliver"));
    b.table(q, keyless("t_buffer_track", "buffer_track"));
    b.table(q, keyless("t_head_consume", "head_consume"));
    b.table(q, keyless("t_tail_consume", "tail_consume"));

    let msg = |t: u8| f("link_h.msg_type").eq_to(k(t as u64));
    let role = |r: u64| f("meta.role").eq_to(k(r));
    let slot_match = f("meta.lvalid")
        .eq_to(k(1))
        .and(f("meta.llabel").eq_to(f("link_h.label")));
    b.conditional(
        q,
        "is_cnetwork",
        f("qcontrol_metadata.event_type").eq_to(k(2)),
        Some(T_CONN),
        None,
    );
    b.conditional(
        q,
        "active",
        f("meta.active").eq_to(k(1)),
        Some("t_load"),
        Some("stray"),
    );
    b.conditional(q, "stray", msg(HERALD), Some("t_release"), None);
    b.conditional(
        q,
        "from_app",
        f("xconnect_metadata.ingress_port").eq_to(k(CPU_PORT as u64)),
        Some("consume_role"),
        Some("is_herald"),
    );
    b.conditional(
        q,
        "consume_role",
        role(ROLE_HEAD),
        Some("t_head_consume"),
        Some("t_tail_consume"),
    );
    b.conditional(
        q,
        "is_herald",
        msg(HERALD),
        Some("herald_role"),
        Some("is_track"),
    );
    b.conditional(
        q,
        "herald_role",
        role(ROLE_HEAD),
        Some("head_done"),
        Some("t_tail_herald"),
    );
    b.conditional(
        q,
        "head_done",
        f("meta.delivered").ge(f("meta.num_pairs")),
        Some("t_release"),
        Some("t_head_herald"),
    );
    b.conditional(
        q,
        "buffered_match",
        f("meta.bvalid")
            .eq_to(k(1))
            .and(f("meta.blabel").eq_to(f("link_h.label"))),
        Some("t_deliver_buffered"),
        None,
    );
    b.conditional(
        q,
        "is_track",
        msg(TRACK)
            .and(role(ROLE_TAIL))
            .and(f("net_h.direction").eq_to(k(DIR_FORWARD as u64))),
        Some("track_match"),
        Some("is_ack"),
    );
    b.conditional(
        q,
        "track_match",
        slot_match.clone(),
        Some("t_deliver"),
        Some("t_buffer_track"),
    );
    b.conditional(
        q,
        "is_ack",
        msg(TRACK_ACK).and(role(ROLE_HEAD)),
        Some("ack_match"),
        None,
    );
    b.conditional(q, "ack_match", slot_match, Some("t_deliver"), None);
    b.init(q, "is_cnetwork");
    b.finish().expect("end-node program is valid")
}

/// Router: swaps its upstream and downstream link pairs per connection and
/// rewrites TRACK / TRACK_ACK on their way through.
pub fn router_program() -> PipelineProgram {
    let mut b = ProgramBuilder::new(Target::V1Quantum);
    common(&mut b);
    b.header_type(
        "router_meta_t",
        &[
            ("cid", 16),
            ("up", 9),
            ("down", 9),
            ("active", 1),
            ("v_up", 1),
            ("v_down", 1),
            ("pending", 1),
            ("l_up", 32),
            ("l_down", 32),
            ("b_down", 8),
            ("sw_done", 1),
            ("sw_lup", 32),
            ("sw_ldown", 32),
            ("sw_bdown", 8),
            ("sw_m", 8),
            ("t_valid", 1),
            ("t_label", 32),
            ("t_seq", 32),
            ("t_acc", 8),
        ],
    );
    b.metadata("meta", "router_meta_t");
    for (name, w) in [
        ("link_label", 32),
        ("link_bell", 8),
        ("link_valid", 1),
        ("swap_pending", 1),
        ("sw_done", 1),
        ("sw_label_up", 32),
        ("sw_label_down", 32),
        ("sw_bell_down", 8),
        ("sw_m", 8),
        ("trk_valid", 1),
        ("trk_label", 32),
        ("trk_seq", 32),
        ("trk_acc", 8),
    ] {
        b.register_array(name, w, ROUTER_PORTS);
    }

    // ----- ingress -----
    b.table("ingress", ctrl_route());
    b.table("ingress", keyless("t_divert", "divert"));
    b.conditional(
        "ingress",
        "has_req",
        Expr::valid("req_h"),
        Some(T_CTRL_ROUTE),
        Some("t_divert"),
    );
    b.init("ingress", "has_req");

    // ----- qcontrol -----
    let up = || f("meta.up");
    let down = || f("meta.down");
    let inport = || f("xconnect_metadata.ingress_port");
    b.action(ActionBuilder::new("cid_from_packet").assign("meta.cid", f("link_h.bsm_id")));
    b.action(
        ActionBuilder::new("cid_from_event").assign("meta.cid", f("qcontrol_metadata.bsm_id")),
    );
    b.action(
        ActionBuilder::new("set_path")
            .param("up", 9)
            .param("down", 9)
            .assign("meta.active", k(1))
            .assign("meta.up", p(0))
            .assign("meta.down", p(1)),
    );
    b.action(
        ActionBuilder::new("release_in")
            .assign("qcontrol_metadata.operation", k(2))
            .assign("qcontrol_metadata.release_qubit", inport()),
    );
    b.action(
        ActionBuilder::new("load_state")
            .register_read("meta.v_up", "link_valid", up())
            .register_read("meta.v_down", "link_valid", down())
            .register_read("meta.l_up", "link_label", up())
            .register_read("meta.l_down", "link_label", down())
            .register_read("meta.b_down", "link_bell", down())
            .register_read("meta.pending", "swap_pending", up())
            .register_read("meta.sw_done", "sw_done", up())
            .register_read("meta.sw_lup", "sw_label_up", up())
            .register_read("meta.sw_ldown", "sw_label_down", up())
            .register_read("meta.sw_bdown", "sw_bell_down", up())
            .register_read("meta.sw_m", "sw_m", up())
            .register_read("meta.t_valid", "trk_valid", up())
            .register_read("meta.t_label", "trk_label", up())
            .register_read("meta.t_seq", "trk_seq", up())
            .register_read("meta.t_acc", "trk_acc", up()),
    );
    let is_up = || inport().eq_to(up());
    let is_down = || inport().eq_to(down());
    b.action(
        ActionBuilder::new("store_link")
            .register_write("link_label", inport(), f("link_h.label"))
            .register_write("link_bell", inport(), f("link_h.bell"))
            .register_write("link_valid", inport(), k(1))
            .assign("meta.v_up", Expr::ternary(is_up(), k(1), f("meta.v_up")))
            .assign(
                "meta.v_down",
                Expr::ternary(is_down(), k(1), f("meta.v_down")),
            )
            .assign(
                "meta.l_up",
                Expr::ternary(is_up(), f("link_h.label"), f("meta.l_up")),
            )
            .assign(
                "meta.l_down",
                Expr::ternary(is_down(), f("link_h.label"), f("meta.l_down")),
            )
            .assign(
                "meta.b_down",
                Expr::ternary(is_down(), f("link_h.bell"), f("meta.b_down")),
            ),
    );
    b.action(
        ActionBuilder::new("swap")
            .assign("qcontrol_metadata.operation", k(1))
            .assign("qcontrol_metadata.swap_bsm_id", f("meta.cid"))
            .assign("qcontrol_metadata.swap_qubit_0", up())
            .assign("qcontrol_metadata.swap_qubit_1", down())
            .register_write("swap_pending", up(), k(1))
            .register_write("sw_done", up(), k(0))
            .register_write("sw_label_up", up(), f("meta.l_up"))
            .register_write("sw_label_down", up(), f("meta.l_down"))
            .register_write("sw_bell_down", up(), f("meta.b_down"))
            .register_write("link_valid", up(), k(0))
            .register_write("link_valid", down(), k(0)),
    );
    b.action(
        ActionBuilder::new("swap_ok")
            .register_write("swap_pending", up(), k(0))
            .register_write("sw_done", up(), k(1))
            .register_write("sw_m", up(), f("qcontrol_metadata.bsm_bell_index"))
            .assign("meta.sw_m", f("qcontrol_metadata.bsm_bell_index")),
    );
    b.action(
        ActionBuilder::new("swap_failed")
            .register_write("swap_pending", up(), k(0))
            .register_write("sw_done", up(), k(0)),
    );
    let acc = |base: Expr| base.xor(f("meta.sw_m")).xor(f("meta.sw_bdown"));
    b.action(
        ActionBuilder::new("forward_buffered")
            .register_write("trk_valid", up(), k(0))
            .add_header("link_h")
            .assign("link_h.msg_type", k(TRACK as u64))
            .assign("link_h.bsm_id", f("meta.cid"))
            .assign("link_h.label", f("meta.sw_ldown"))
            .assign("link_h.bell", f("meta.sw_bdown"))
            .add_header("net_h")
            .assign("net_h.conn_id", f("meta.cid"))
            .assign("net_h.e2e_seq", f("meta.t_seq"))
            .assign("net_h.pauli_acc", acc(f("meta.t_acc")))
            .assign("net_h.direction", k(DIR_FORWARD as u64))
            .assign("xconnect_metadata.egress_spec", down()),
    );
    b.action(
        ActionBuilder::new("forward_track")
            .assign("link_h.label", f("meta.sw_ldown"))
            .assign("link_h.bell", f("meta.sw_bdown"))
            .assign("net_h.pauli_acc", acc(f("net_h.pauli_acc")))
            .assign("xconnect_metadata.egress_spec", down()),
    );
    b.action(
        ActionBuilder::new("buffer_track")
            .register_write("trk_valid", up(), k(1))
            .register_write("trk_label", up(), f("link_h.label"))
            .register_write("trk_seq", up(), f("net_h.e2e_seq"))
            .register_write("trk_acc", up(), f("net_h.pauli_acc")),
    );
    b.action(
        ActionBuilder::new("forward_ack")
            .assign("link_h.label", f("meta.sw_lup"))
            .assign("xconnect_metadata.egress_spec", up()),
    );

    let q = "qcontrol";
    b.table(
        q,
        keyless("t_cid_packet", "cid_from_packet").next(Some(T_RCONN)),
    );
    b.table(
        q,
        keyless("t_cid_event", "cid_from_event").next(Some(T_RCONN)),
    );
    b.table(
        q,
        TableBuilder::new(T_RCONN)
            .key("meta.cid")
            .action("set_path")
            .default_action("nop", &[])
            .next(Some("active")),
    );
    b.table(q, keyless("t_release", "release_in"));
    b.table(
        q,
        keyless("t_load", "load_state").next(Some("is_swap_outcome")),
    );
    b.table(
        q,
        keyless("t_swap_ok", "swap_ok").next(Some("buffered_match")),
    );
    b.table(q, keyless("t_swap_failed", "swap_failed"));
    b.table(q, keyless("t_forward_buffered", "forward_buffered"));
    b.table(
        q,
        keyless("t_store_link", "store_link").next(Some("can_swap")),
    );
    b.table(q, keyless("t_swap", "swap"));
    b.table(q, keyless("t_forward_track", "forward_track"));
    b.table(q, keyless("t_buffer_track", "buffer_track"));
    b.table(q, keyless("t_forward_ack", "forward_ack"));

    let ev = |t: u64| f("qcontrol_metadata.event_type").eq_to(k(t));
    let msg = |t: u8| f("link_h.msg_type").eq_to(k(t as u64));
    b.conditional(
        q,
        "is_cnetwork",
        ev(2),
        Some("t_cid_packet"),
        Some("is_swap_event"),
    );
    b.conditional(q, "is_swap_event", ev(1), Some("t_cid_event"), None);
    b.conditional(
        q,
        "active",
        f("meta.active").eq_to(k(1)),
        Some("t_load"),
        Some("stray"),
    );
    b.conditional(q, "stray", ev(2).and(msg(HERALD)), Some("t_release"), None);
    b.conditional(
        q,
        "is_swap_outcome",
        ev(1),
        Some("swap_success"),
        Some("is_herald"),
    );
    b.conditional(
        q,
        "swap_success",
        f("qcontrol_metadata.bsm_success").eq_to(k(1)),
        Some("t_swap_ok"),
        Some("t_swap_failed"),
    );
    b.conditional(
        q,
        "buffered_match",
        f("meta.t_valid")
            .eq_to(k(1))
            .and(f("meta.t_label").eq_to(f("meta.sw_lup"))),
        Some("t_forward_buffered"),
        None,
    );
    b.conditional(
        q,
        "is_herald",
        msg(HERALD),
        Some("t_store_link"),
        Some("is_track"),
    );
    b.conditional(
        q,
        "can_swap",
        f("meta.v_up")
            .eq_to(k(1))
            .and(f("meta.v_down").eq_to(k(1)))
            .and(f("meta.pending").eq_to(k(0))),
        Some("t_swap"),
        None,
    );
    b.conditional(
        q,
        "is_track",
        msg(TRACK).and(is_up()),
        Some("track_ready"),
        Some("is_ack"),
    );
    b.conditional(
        q,
        "track_ready",
        f("meta.sw_done")
            .eq_to(k(1))
            .and(f("meta.sw_lup").eq_to(f("link_h.label"))),
        Some("t_forward_track"),
        Some("t_buffer_track"),
    );
    b.conditional(
        q,
        "is_ack",
        msg(TRACK_ACK)
            .and(is_down())
            .and(f("link_h.label").eq_to(f("meta.sw_ldown"))),
        Some("t_forward_ack"),
        None,
    );
    b.init(q, "is_cnetwork");
    b.finish().expect("router program is valid")
}
