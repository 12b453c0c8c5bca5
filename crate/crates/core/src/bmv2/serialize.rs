//! [`PipelineProgram`] -> BMv2 JSON document.

use std::collections::HashMap;

use serde_json::{json, Map, Value};

use super::ir::*;
use super::target::STANDARD_METADATA;

fn hex(v: u64) -> Value {
    Value::String(format!("0x{v:x}"))
}

fn field(r: &FieldRef) -> Value {
    json!({"type": "field", "value": [r.header, r.field]})
}

fn operand(e: &Expr) -> Value {
    match e {
        Expr::Const(v) => json!({"type": "hexstr", "value": hex(*v)}),
        Expr::Bool(b) => json!({"type": "bool", "value": b}),
        Expr::Field(r) => field(r),
        Expr::Param(i) => json!({"type": "runtime_data", "value": i}),
        _ => json!({"type": "expression", "value": expression(e)}),
    }
}

fn expression(e: &Expr) -> Value {
    match e {
        Expr::Valid(h) => json!({
            "op": "valid",
            "left": null,
            "right": {"type": "header", "value": h},
        }),
        Expr::Unary(op, a) => json!({"op": op.symbol(), "left": null, "right": operand(a)}),
        Expr::Binary(op, l, r) => {
            json!({"op": op.symbol(), "left": operand(l), "right": operand(r)})
        }
        Expr::Ternary(c, t, f) => json!({
            "op": "?",
            "left": operand(t),
            "right": operand(f),
            "cond": operand(c),
        }),
        leaf => operand(leaf),
    }
}

fn primitive(p: &Primitive) -> Value {
    let (op, params) = match p {
        Primitive::Assign { dest, value } => ("assign", vec![field(dest), operand(value)]),
        Primitive::RegisterRead {
            dest,
            register,
            index,
        } => (
            "register_read",
            vec![
                field(dest),
                json!({"type": "register_array", "value": register}),
                operand(index),
            ],
        ),
        Primitive::RegisterWrite {
            register,
            index,
            value,
        } => (
            "register_write",
            vec![
                json!({"type": "register_array", "value": register}),
                operand(index),
                operand(value),
            ],
        ),
        Primitive::AddHeader(h) => ("add_header", vec![json!({"type": "header", "value": h})]),
        Primitive::RemoveHeader(h) => {
            ("remove_header", vec![json!({"type": "header", "value": h})])
        }
        Primitive::MarkToDrop => (
            "mark_to_drop",
            vec![json!({"type": "header", "value": STANDARD_METADATA})],
        ),
    };
    json!({"op": op, "parameters": params})
}

pub fn to_value(p: &PipelineProgram) -> Value {
    let action_ids: HashMap<&str, usize> = p
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.as_str(), i))
        .collect();

    let header_types: Vec<Value> = p
        .header_types
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let fields: Vec<Value> = t.fields.iter().map(|(n, w)| json!([n, w, false])).collect();
            json!({"name": t.name, "id": i, "fields": fields})
        })
        .collect();

    let headers: Vec<Value> = p
        .headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            json!({
                "name": h.name,
                "id": i,
                "header_type": h.header_type,
                "metadata": h.metadata,
                "pi_omit": true,
            })
        })
        .collect();

    let parsers: Vec<Value> = p
        .parsers
        .iter()
        .enumerate()
        .map(|(i, parser)| {
            let states: Vec<Value> = parser
                .states
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    let ops: Vec<Value> = s
                        .ops
                        .iter()
                        .map(|op| match op {
                            ParserOp::Extract(h) => json!({
                                "op": "extract",
                                "parameters": [{"type": "regular", "value": h}],
                            }),
                            ParserOp::Set { dest, value } => json!({
                                "op": "set",
                                "parameters": [field(dest), operand(value)],
                            }),
                        })
                        .collect();
                    let transitions: Vec<Value> = s
                        .transitions
                        .iter()
                        .map(|t| match t.value {
                            Some(v) => json!({
                                "type": "hexstr",
                                "value": hex(v),
                                "mask": null,
                                "next_state": t.next_state,
                            }),
                            None => json!({
                                "type": "default",
                                "value": null,
                                "mask": null,
                                "next_state": t.next_state,
                            }),
                        })
                        .collect();
                    let key: Vec<Value> = s.transition_key.iter().map(field).collect();
                    json!({
                        "name": s.name,
                        "id": j,
                        "parser_ops": ops,
                        "transitions": transitions,
                        "transition_key": key,
                    })
                })
                .collect();
            json!({
                "name": parser.name,
                "id": i,
                "init_state": parser.init_state,
                "parse_states": states,
            })
        })
        .collect();

    let deparsers: Vec<Value> = p
        .deparsers
        .iter()
        .enumerate()
        .map(|(i, d)| json!({"name": d.name, "id": i, "order": d.order, "primitives": []}))
        .collect();

    let actions: Vec<Value> = p
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let rd: Vec<Value> = a
                .params
                .iter()
                .map(|(n, w)| json!({"name": n, "bitwidth": w}))
                .collect();
            let prims: Vec<Value> = a.primitives.iter().map(primitive).collect();
            json!({"name": a.name, "id": i, "runtime_data": rd, "primitives": prims})
        })
        .collect();

    let mut table_id = 0usize;
    let mut cond_id = 0usize;
    let pipelines: Vec<Value> = p
        .pipelines
        .iter()
        .enumerate()
        .map(|(i, pl)| {
            let tables: Vec<Value> = pl
                .tables
                .iter()
                .map(|t| {
                    let id = table_id;
                    table_id += 1;
                    let key: Vec<Value> = t
                        .keys
                        .iter()
                        .map(|k| {
                            json!({
                                "match_type": "exact",
                                "name": k.to_string(),
                                "target": [k.header, k.field],
                                "mask": null,
                            })
                        })
                        .collect();
                    let ids: Vec<usize> =
                        t.actions.iter().map(|a| action_ids[a.as_str()]).collect();
                    let next: Map<String, Value> = t
                        .next_tables
                        .iter()
                        .map(|(a, n)| {
                            (
                                a.clone(),
                                n.clone().map(Value::String).unwrap_or(Value::Null),
                            )
                        })
                        .collect();
                    let data: Vec<Value> = t.default_params.iter().map(|v| hex(*v)).collect();
                    json!({
                        "name": t.name,
                        "id": id,
                        "key": key,
                        "match_type": "exact",
                        "type": "simple",
                        "max_size": t.max_size,
                        "with_counters": false,
                        "support_timeout": false,
                        "direct_meters": null,
                        "action_ids": ids,
                        "actions": t.actions,
                        "base_default_next": t.base_default_next,
                        "next_tables": next,
                        "default_entry": {
                            "action_id": action_ids[t.default_action.as_str()],
                            "action_const": false,
                            "action_data": data,
                            "action_entry_const": false,
                        },
                    })
                })
                .collect();
            let conditionals: Vec<Value> = pl
                .conditionals
                .iter()
                .map(|c| {
                    let id = cond_id;
                    cond_id += 1;
                    json!({
                        "name": c.name,
                        "id": id,
                        "expression": {"type": "expression", "value": expression(&c.expr)},
                        "true_next": c.true_next,
                        "false_next": c.false_next,
                    })
                })
                .collect();
            json!({
                "name": pl.name,
                "id": i,
                "init_table": pl.init,
                "tables": tables,
                "action_profiles": [],
                "conditionals": conditionals,
            })
        })
        .collect();

    let registers: Vec<Value> = p
        .register_arrays
        .iter()
        .enumerate()
        .map(|(i, r)| json!({"name": r.name, "id": i, "size": r.size, "bitwidth": r.bitwidth}))
        .collect();

    let enums: Vec<Value> = p
        .enums
        .iter()
        .map(|e| {
            let entries: Vec<Value> = e.members.iter().map(|(n, v)| json!([n, v])).collect();
            json!({"name": e.name, "entries": entries})
        })
        .collect();

    json!({
        "__meta__": {"version": [2, 23], "compiler": "v1q-core"},
        "target": p.target.name(),
        "header_types": header_types,
        "headers": headers,
        "header_stacks": [],
        "parsers": parsers,
        "deparsers": deparsers,
        "enums": enums,
        "register_arrays": registers,
        "actions": actions,
        "pipelines": pipelines,
    })
}

/// Pretty-printed document with a trailing newline.
pub fn serialize_program(p: &PipelineProgram) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(p)).expect("program values serialize");
    s.push('\n');
    s
}
