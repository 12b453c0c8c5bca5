//! Golden interpreter corpus: small hand-built programs with bit-exact
//! expected outputs. Every case also runs on the program reloaded from its
//! serialized document. Cases panic on mismatch.

use std::sync::Arc;

use v1q_core::bmv2::ir::{BinOp, Expr, UnOp};
use v1q_core::bmv2::{
    load_program, serialize_program, ActionBuilder, PipelineProgram, ProgramBuilder, StateBuilder,
    TableBuilder, Target,
};
use v1q_core::runtime::{ProcessorState, RuntimeError, TableEntry, DROP_PORT};

/// `h` is 4 bytes: ty(8) a(16) b(8). `g` is one byte.
fn base() -> ProgramBuilder {
    let mut b = ProgramBuilder::new(Target::Classical);
    b.header_type("h_t", &[("ty", 8), ("a", 16), ("b", 8)]);
    b.header_type("g_t", &[("x", 8)]);
    b.header("h", "h_t");
    b.header("g", "g_t");
    b.parse_state("parser", StateBuilder::new("start").extract("h").accept());
    b.deparser("deparser", &["h", "g"]);
    b.action(ActionBuilder::new("noop"));
    b
}

/// `base` plus a keyless ingress table running `name`.
fn with_action(name: &str, a: impl FnOnce(ActionBuilder) -> ActionBuilder) -> ProgramBuilder {
    let mut b = base();
    b.action(a(ActionBuilder::new(name)));
    b.table("ingress", TableBuilder::new("t").default_action(name, &[]));
    b.init("ingress", "t");
    b
}

fn variants(b: &ProgramBuilder) -> [PipelineProgram; 2] {
    let built = b.finish().unwrap();
    let loaded = load_program(&serialize_program(&built)).unwrap();
    [built, loaded]
}

/// Parses `input`, runs ingress and deparses, on both program variants.
fn run_all(
    b: &ProgramBuilder,
    entries: &[TableEntry],
    input: &[u8],
) -> Result<Vec<u8>, RuntimeError> {
    let mut outs = Vec::new();
    for p in variants(b) {
        outs.push(run(Arc::new(p), entries, input).map(|(bytes, _)| bytes));
    }
    assert_eq!(outs[0], outs[1], "built and reloaded programs disagree");
    outs.pop().unwrap()
}

fn run(
    p: Arc<PipelineProgram>,
    entries: &[TableEntry],
    input: &[u8],
) -> Result<(Vec<u8>, ProcessorState), RuntimeError> {
    let mut st = ProcessorState::new(p)?;
    for e in entries {
        st.table_insert(e)?;
    }
    let mut pkt = st.parse(input)?;
    st.execute_pipeline("ingress", &mut pkt)?;
    Ok((st.deparse(&pkt), st))
}

fn is_parse_err(r: Result<Vec<u8>, RuntimeError>) -> bool {
    matches!(r, Err(RuntimeError::Parse { .. }))
}

fn set_a() -> ActionBuilder {
    ActionBuilder::new("set_a")
        .param("v", 16)
        .assign("h.a", Expr::param(0))
}

fn set_b(v: u64) -> ActionBuilder {
    ActionBuilder::new(&format!("b{v}")).assign("h.b", Expr::konst(v))
}

pub fn passthrough_without_parser() {
    let mut b = ProgramBuilder::new(Target::Classical);
    b.deparser("deparser", &[]);
    assert_eq!(run_all(&b, &[], &[1, 2, 3]).unwrap(), [1, 2, 3]);
}

pub fn extract_keeps_payload() {
    assert_eq!(
        run_all(&base(), &[], &[7, 0, 1, 2, 9, 9]).unwrap(),
        [7, 0, 1, 2, 9, 9]
    );
}

pub fn select_transition_branches() {
    let mut b = ProgramBuilder::new(Target::Classical);
    b.header_type("h_t", &[("ty", 8), ("a", 16), ("b", 8)]);
    b.header_type("g_t", &[("x", 8)]);
    b.header("h", "h_t");
    b.header("g", "g_t");
    b.parse_state(
        "parser",
        StateBuilder::new("start")
            .extract("h")
            .key("h.ty")
            .on(1, "more")
            .accept(),
    );
    b.parse_state("parser", StateBuilder::new("more").extract("g").accept());
    b.deparser("deparser", &["h", "g"]);
    b.action(ActionBuilder::new("flag").assign("h.b", Expr::valid("g")));
    b.table(
        "ingress",
        TableBuilder::new("t").default_action("flag", &[]),
    );
    b.init("ingress", "t");
    assert_eq!(
        run_all(&b, &[], &[1, 0, 0, 0, 0xAA, 0xBB]).unwrap(),
        [1, 0, 0, 1, 0xAA, 0xBB]
    );
    assert_eq!(
        run_all(&b, &[], &[2, 0, 0, 0, 0xAA]).unwrap(),
        [2, 0, 0, 0, 0xAA]
    );
}

pub fn missing_transition_is_a_parse_error() {
    let mut b = ProgramBuilder::new(Target::Classical);
    b.header_type("h_t", &[("ty", 8)]);
    b.header("h", "h_t");
    b.parse_state(
        "parser",
        StateBuilder::new("start")
            .extract("h")
            .key("h.ty")
            .on_accept(1),
    );
    b.deparser("deparser", &["h"]);
    assert_eq!(run_all(&b, &[], &[1]).unwrap(), [1]);
    assert!(is_parse_err(run_all(&b, &[], &[3])));
}

pub fn short_input_is_a_parse_error() {
    assert!(is_parse_err(run_all(&base(), &[], &[1, 2, 3])));
    assert!(is_parse_err(run_all(&base(), &[], &[])));
}

pub fn table_hit() {
    let mut b = base();
    b.action(set_a());
    b.table(
        "ingress",
        TableBuilder::new("t")
            .key("h.ty")
            .action("set_a")
            .default_action("noop", &[]),
    );
    b.init("ingress", "t");
    let e = [TableEntry::new("t", &[1], "set_a", &[0xBEEF])];
    assert_eq!(run_all(&b, &e, &[1, 0, 0, 5]).unwrap(), [1, 0xBE, 0xEF, 5]);
    assert_eq!(run_all(&b, &e, &[2, 0, 0, 5]).unwrap(), [2, 0, 0, 5]);
}

pub fn default_action_with_parameters() {
    let mut b = base();
    b.action(set_a());
    b.table(
        "ingress",
        TableBuilder::new("t")
            .key("h.ty")
            .default_action("set_a", &[0x0102]),
    );
    b.init("ingress", "t");
    assert_eq!(run_all(&b, &[], &[9, 0, 0, 3]).unwrap(), [9, 1, 2, 3]);
}

pub fn deleted_entry_falls_to_default() {
    let mut b = base();
    b.action(set_a());
    b.table(
        "ingress",
        TableBuilder::new("t")
            .key("h.ty")
            .action("set_a")
            .default_action("noop", &[]),
    );
    b.init("ingress", "t");
    let p = Arc::new(b.finish().unwrap());
    let mut st = ProcessorState::new(p).unwrap();
    st.table_insert(&TableEntry::new("t", &[1], "set_a", &[7]))
        .unwrap();
    assert!(st.table_delete("t", &[1]).unwrap());
    let mut pkt = st.parse(&[1, 0, 0, 0]).unwrap();
    st.execute_pipeline("ingress", &mut pkt).unwrap();
    assert_eq!(st.deparse(&pkt), [1, 0, 0, 0]);
}

pub fn two_field_key() {
    let mut b = base();
    b.action(set_a());
    b.table(
        "ingress",
        TableBuilder::new("t")
            .key("h.ty")
            .key("h.b")
            .action("set_a")
            .default_action("noop", &[]),
    );
    b.init("ingress", "t");
    let e = [TableEntry::new("t", &[1, 2], "set_a", &[0xFFFF])];
    assert_eq!(run_all(&b, &e, &[1, 0, 0, 2]).unwrap(), [1, 0xFF, 0xFF, 2]);
    assert_eq!(run_all(&b, &e, &[1, 0, 0, 3]).unwrap(), [1, 0, 0, 3]);
    assert_eq!(run_all(&b, &e, &[2, 0, 0, 2]).unwrap(), [2, 0, 0, 2]);
}

pub fn next_table_depends_on_action() {
    let mut b = base();
    b.action(set_a());
    b.action(set_b(0x77));
    b.table(
        "ingress",
        TableBuilder::new("first")
            .key("h.ty")
            .action("set_a")
            .default_action("noop", &[])
            .on_action("set_a", Some("second")),
    );
    b.table(
        "ingress",
        TableBuilder::new("second").default_action("b119", &[]),
    );
    b.init("ingress", "first");
    let e = [TableEntry::new("first", &[1], "set_a", &[0x0A0B])];
    assert_eq!(
        run_all(&b, &e, &[1, 0, 0, 0]).unwrap(),
        [1, 0x0A, 0x0B, 0x77]
    );
    assert_eq!(run_all(&b, &e, &[2, 0, 0, 0]).unwrap(), [2, 0, 0, 0]);
}

pub fn conditional_branches() {
    let mut b = base();
    b.action(set_b(10));
    b.action(set_b(20));
    b.table(
        "ingress",
        TableBuilder::new("one").default_action("b10", &[]),
    );
    b.table(
        "ingress",
        TableBuilder::new("other").default_action("b20", &[]),
    );
    b.conditional(
        "ingress",
        "is_one",
        Expr::field("h.ty").eq_to(Expr::konst(1)),
        Some("one"),
        Some("other"),
    );
    b.init("ingress", "is_one");
    assert_eq!(run_all(&b, &[], &[1, 0, 0, 0]).unwrap(), [1, 0, 0, 10]);
    assert_eq!(run_all(&b, &[], &[5, 0, 0, 0]).unwrap(), [5, 0, 0, 20]);
}

pub fn register_write_truncates_and_reads_back() {
    let mut b = with_action("rw", |a| {
        a.register_write("r", Expr::field("h.ty"), Expr::field("h.a"))
            .register_read("h.b", "r", Expr::field("h.ty"))
    });
    b.register_array("r", 8, 4);
    // a = 300 = 0x012C; the 8-bit cell keeps 44.
    let [p, _] = variants(&b);
    let (out, st) = run(Arc::new(p), &[], &[1, 0x01, 0x2C, 0]).unwrap();
    assert_eq!(out, [1, 0x01, 0x2C, 44]);
    assert_eq!(st.register_read("r", 1).unwrap(), 44);
    assert_eq!(st.register_read("r", 0).unwrap(), 0);
}

pub fn fresh_register_reads_zero() {
    let mut b = with_action("rd", |a| a.register_read("h.a", "r", Expr::konst(3)));
    b.register_array("r", 16, 4);
    assert_eq!(run_all(&b, &[], &[0, 0xFF, 0xFF, 0]).unwrap(), [0, 0, 0, 0]);
}

pub fn register_index_out_of_range() {
    let mut b = with_action("rd", |a| a.register_read("h.b", "r", Expr::field("h.ty")));
    b.register_array("r", 8, 4);
    assert_eq!(run_all(&b, &[], &[3, 0, 0, 1]).unwrap(), [3, 0, 0, 0]);
    assert!(matches!(
        run_all(&b, &[], &[4, 0, 0, 1]),
        Err(RuntimeError::IndexOutOfRange { .. })
    ));
}

pub fn addition_wraps_at_field_width() {
    let b = with_action("inc", |a| {
        a.assign("h.b", Expr::field("h.b").add(Expr::konst(1)))
    });
    assert_eq!(run_all(&b, &[], &[0, 0, 0, 0xFF]).unwrap(), [0, 0, 0, 0]);
    assert_eq!(run_all(&b, &[], &[0, 0, 0, 0x7F]).unwrap(), [0, 0, 0, 0x80]);
}

pub fn subtraction_underflows_to_all_ones() {
    let b = with_action("dec", |a| {
        a.assign(
            "h.a",
            Expr::bin(BinOp::Sub, Expr::field("h.a"), Expr::konst(1)),
        )
    });
    assert_eq!(run_all(&b, &[], &[0, 0, 0, 0]).unwrap(), [0, 0xFF, 0xFF, 0]);
}

pub fn shifts_and_multiply() {
    let b = with_action("sh", |a| {
        a.assign(
            "h.b",
            Expr::bin(BinOp::Shr, Expr::field("h.a"), Expr::konst(8)),
        )
        .assign(
            "h.a",
            Expr::bin(BinOp::Shl, Expr::field("h.a"), Expr::konst(4)),
        )
        .assign(
            "h.ty",
            Expr::bin(BinOp::Mul, Expr::field("h.ty"), Expr::konst(3)),
        )
    });
    // ty 0x60 * 3 = 0x120 -> 0x20; a 0x1234 << 4 = 0x12340 -> 0x2340.
    assert_eq!(
        run_all(&b, &[], &[0x60, 0x12, 0x34, 0]).unwrap(),
        [0x20, 0x23, 0x40, 0x12]
    );
}

pub fn bitwise_operators() {
    let b = with_action("bits", |a| {
        a.assign(
            "h.ty",
            Expr::Unary(UnOp::BitNot, Box::new(Expr::field("h.ty"))),
        )
        .assign(
            "h.b",
            Expr::bin(BinOp::BitAnd, Expr::field("h.b"), Expr::konst(0x0F)),
        )
        .assign(
            "h.a",
            Expr::bin(BinOp::BitOr, Expr::field("h.a"), Expr::konst(0x8001)),
        )
    });
    assert_eq!(
        run_all(&b, &[], &[0x0F, 0x10, 0x00, 0xAB]).unwrap(),
        [0xF0, 0x90, 0x01, 0x0B]
    );
}

pub fn pauli_accumulator_xor() {
    let mut b = base();
    b.action(
        ActionBuilder::new("acc")
            .param("m", 8)
            .assign("h.b", Expr::field("h.b").xor(Expr::param(0))),
    );
    b.table(
        "ingress",
        TableBuilder::new("t").default_action("acc", &[0b11]),
    );
    b.init("ingress", "t");
    assert_eq!(run_all(&b, &[], &[0, 0, 0, 0b10]).unwrap(), [0, 0, 0, 0b01]);
}

pub fn added_header_is_emitted_in_order() {
    let b = with_action("push", |a| {
        a.add_header("g").assign("g.x", Expr::konst(0x42))
    });
    assert_eq!(
        run_all(&b, &[], &[1, 2, 3, 4, 0xEE]).unwrap(),
        [1, 2, 3, 4, 0x42, 0xEE]
    );
}

pub fn removed_header_is_not_emitted() {
    let b = with_action("pop", |a| a.remove_header("h"));
    assert_eq!(run_all(&b, &[], &[1, 2, 3, 4, 0xEE]).unwrap(), [0xEE]);
}

pub fn deparse_order_differs_from_parse_order() {
    let mut b = ProgramBuilder::new(Target::Classical);
    b.header_type("h_t", &[("v", 16)]);
    b.header_type("g_t", &[("x", 8)]);
    b.header("h", "h_t");
    b.header("g", "g_t");
    b.parse_state(
        "parser",
        StateBuilder::new("start").extract("h").default("second"),
    );
    b.parse_state("parser", StateBuilder::new("second").extract("g").accept());
    b.deparser("deparser", &["g", "h"]);
    assert_eq!(run_all(&b, &[], &[1, 2, 3, 4]).unwrap(), [3, 1, 2, 4]);
}

pub fn reading_an_invalid_header_fails() {
    let b = with_action("peek", |a| a.assign("h.b", Expr::field("g.x")));
    assert!(matches!(
        run_all(&b, &[], &[1, 2, 3, 4]),
        Err(RuntimeError::Evaluation(_))
    ));
}

pub fn sub_byte_fields_pack_msb_first() {
    let mut b = ProgramBuilder::new(Target::Classical);
    b.header_type("p_t", &[("v", 4), ("w", 12)]);
    b.header("p", "p_t");
    b.parse_state("parser", StateBuilder::new("start").extract("p").accept());
    b.deparser("deparser", &["p"]);
    b.action(
        ActionBuilder::new("bump")
            .assign("p.v", Expr::field("p.v").add(Expr::konst(7)))
            .assign("p.w", Expr::field("p.w").add(Expr::konst(1))),
    );
    b.table(
        "ingress",
        TableBuilder::new("t").default_action("bump", &[]),
    );
    b.init("ingress", "t");
    // v = 0xA + 7 = 0x11 -> 0x1; w = 0xBCD + 1.
    assert_eq!(run_all(&b, &[], &[0xAB, 0xCD]).unwrap(), [0x1B, 0xCE]);
}

pub fn sixty_four_bit_field_wraps() {
    let mut b = ProgramBuilder::new(Target::Classical);
    b.header_type("w_t", &[("t", 64)]);
    b.header("w", "w_t");
    b.parse_state("parser", StateBuilder::new("start").extract("w").accept());
    b.deparser("deparser", &["w"]);
    b.action(ActionBuilder::new("inc").assign("w.t", Expr::field("w.t").add(Expr::konst(1))));
    b.table("ingress", TableBuilder::new("t").default_action("inc", &[]));
    b.init("ingress", "t");
    assert_eq!(run_all(&b, &[], &[0xFF; 8]).unwrap(), [0; 8]);
    assert_eq!(
        run_all(&b, &[], &[0, 0, 0, 0, 0, 0, 0, 0xFF]).unwrap(),
        [0, 0, 0, 0, 0, 0, 1, 0]
    );
}

pub fn ternary_and_logic() {
    let b = with_action("pick", |a| {
        a.assign(
            "h.b",
            Expr::ternary(
                Expr::field("h.ty").eq_to(Expr::konst(1)),
                Expr::konst(10),
                Expr::konst(20),
            ),
        )
        .assign(
            "h.a",
            Expr::field("h.a")
                .ge(Expr::konst(5))
                .and(Expr::field("h.ty").eq_to(Expr::konst(2)).not()),
        )
    });
    assert_eq!(run_all(&b, &[], &[1, 0, 5, 0]).unwrap(), [1, 0, 1, 10]);
    assert_eq!(run_all(&b, &[], &[2, 0, 9, 0]).unwrap(), [2, 0, 0, 20]);
    assert_eq!(run_all(&b, &[], &[3, 0, 4, 0]).unwrap(), [3, 0, 0, 20]);
}

pub fn mark_to_drop_and_metadata_are_not_emitted() {
    let b = with_action("d", |a| a.drop());
    let [p, _] = variants(&b);
    let st = ProcessorState::new(Arc::new(p)).unwrap();
    let mut pkt = st.parse(&[1, 2, 3, 4]).unwrap();
    let mut st = st;
    st.execute_pipeline("ingress", &mut pkt).unwrap();
    assert_eq!(pkt.get("standard_metadata.egress_spec").unwrap(), DROP_PORT);
    assert_eq!(st.deparse(&pkt), [1, 2, 3, 4]);
}

pub fn parser_set_writes_metadata() {
    let mut b = ProgramBuilder::new(Target::Classical);
    b.header_type("h_t", &[("ty", 8)]);
    b.header_type("m_t", &[("seen", 8)]);
    b.header("h", "h_t");
    b.metadata("m", "m_t");
    b.parse_state(
        "parser",
        StateBuilder::new("start")
            .extract("h")
            .set("m.seen", Expr::field("h.ty").add(Expr::konst(1)))
            .accept(),
    );
    b.deparser("deparser", &["h"]);
    b.action(ActionBuilder::new("copy").assign("h.ty", Expr::field("m.seen")));
    b.table(
        "ingress",
        TableBuilder::new("t").default_action("copy", &[]),
    );
    b.init("ingress", "t");
    assert_eq!(run_all(&b, &[], &[0x41, 9]).unwrap(), [0x42, 9]);
}

pub fn table_insert_replaces_existing_key() {
    let mut b = base();
    b.action(set_a());
    b.table(
        "ingress",
        TableBuilder::new("t")
            .key("h.ty")
            .action("set_a")
            .default_action("noop", &[]),
    );
    b.init("ingress", "t");
    let e = [
        TableEntry::new("t", &[1], "set_a", &[1]),
        TableEntry::new("t", &[1], "set_a", &[2]),
    ];
    assert_eq!(run_all(&b, &e, &[1, 0, 0, 0]).unwrap(), [1, 0, 2, 0]);
}

/// Every case, by name.
pub const CASES: &[(&str, fn())] = &[
    ("passthrough_without_parser", passthrough_without_parser),
    ("extract_keeps_payload", extract_keeps_payload),
    ("select_transition_branches", select_transition_branches),
    (
        "missing_transition_is_a_parse_error",
        missing_transition_is_a_parse_error,
    ),
    ("short_input_is_a_parse_error", short_input_is_a_parse_error),
    ("table_hit", table_hit),
    (
        "default_action_with_parameters",
        default_action_with_parameters,
    ),
    (
        "deleted_entry_falls_to_default",
        deleted_entry_falls_to_default,
    ),
    ("two_field_key", two_field_key),
    ("next_table_depends_on_action", next_table_depends_on_action),
    ("conditional_branches", conditional_branches),
    (
        "register_write_truncates_and_reads_back",
        register_write_truncates_and_reads_back,
    ),
    ("fresh_register_reads_zero", fresh_register_reads_zero),
    ("register_index_out_of_range", register_index_out_of_range),
    (
        "addition_wraps_at_field_width",
        addition_wraps_at_field_width,
    ),
    (
        "subtraction_underflows_to_all_ones",
        subtraction_underflows_to_all_ones,
    ),
    ("shifts_and_multiply", shifts_and_multiply),
    ("bitwise_operators", bitwise_operators),
    ("pauli_accumulator_xor", pauli_accumulator_xor),
    (
        "added_header_is_emitted_in_order",
        added_header_is_emitted_in_order,
    ),
    (
        "removed_header_is_not_emitted",
        removed_header_is_not_emitted,
    ),
    (
        "deparse_order_differs_from_parse_order",
        deparse_order_differs_from_parse_order,
    ),
    (
        "reading_an_invalid_header_fails",
        reading_an_invalid_header_fails,
    ),
    (
        "sub_byte_fields_pack_msb_first",
        sub_byte_fields_pack_msb_first,
    ),
    ("sixty_four_bit_field_wraps", sixty_four_bit_field_wraps),
    ("ternary_and_logic", ternary_and_logic),
    (
        "mark_to_drop_and_metadata_are_not_emitted",
        mark_to_drop_and_metadata_are_not_emitted,
    ),
    ("parser_set_writes_metadata", parser_set_writes_metadata),
    (
        "table_insert_replaces_existing_key",
        table_insert_replaces_existing_key,
    ),
];
