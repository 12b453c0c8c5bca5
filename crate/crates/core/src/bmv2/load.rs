//! BMv2 JSON document -> [`PipelineProgram`].

use std::collections::{BTreeMap, HashMap};

use serde_json::{Map, Value};

use super::error::LoadError;
use super::ir::*;
use super::target::intrinsic_enums;
use super::validate::validate;

const KNOWN_KEYS: &[&str] = &[
    "__meta__",
    "program",
    "target",
    "errors",
    "header_types",
    "headers",
    "parsers",
    "deparsers",
    "actions",
    "pipelines",
    "register_arrays",
    "enums",
];

/// Keys that belong to the format but not to the supported subset. An empty
/// array is tolerated since compilers emit them unconditionally.
const EXCLUDED_KEYS: &[&str] = &[
    "header_stacks",
    "header_union_types",
    "header_unions",
    "header_union_stacks",
    "field_lists",
    "learn_lists",
    "calculations",
    "checksums",
    "meter_arrays",
    "counter_arrays",
    "parse_vsets",
    "extern_instances",
    "field_aliases",
];

pub fn load_program(text: &str) -> Result<PipelineProgram, LoadError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| LoadError::malformed("", format!("invalid JSON: {e}")))?;
    load_value(&doc)
}

pub fn load_value(doc: &Value) -> Result<PipelineProgram, LoadError> {
    let root = doc
        .as_object()
        .ok_or_else(|| LoadError::malformed("", "document root must be an object"))?;
    for (k, v) in root {
        if KNOWN_KEYS.contains(&k.as_str()) {
            continue;
        }
        if EXCLUDED_KEYS.contains(&k.as_str()) {
            if v.as_array().is_some_and(|a| a.is_empty()) {
                continue;
            }
            return Err(LoadError::unsupported(k.as_str(), format!("/{k}")));
        }
        return Err(LoadError::unsupported(k.as_str(), format!("/{k}")));
    }

    let target = match root.get("target") {
        None => Target::V1Quantum,
        Some(v) => {
            let s = v
                .as_str()
                .ok_or_else(|| LoadError::malformed("/target", "expected a string"))?;
            Target::from_name(s)
                .ok_or_else(|| LoadError::unsupported(format!("target {s}"), "/target"))?
        }
    };

    let mut cx = Loader {
        enums: HashMap::new(),
    };
    let enums = cx.enums(root)?;
    let header_types = array(root, "header_types")?
        .iter()
        .enumerate()
        .map(|(i, v)| header_type(v, &format!("/header_types/{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let headers = array(root, "headers")?
        .iter()
        .enumerate()
        .map(|(i, v)| header_instance(v, &format!("/headers/{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let parsers = array(root, "parsers")?
        .iter()
        .enumerate()
        .map(|(i, v)| cx.parser(v, &format!("/parsers/{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let deparsers = array(root, "deparsers")?
        .iter()
        .enumerate()
        .map(|(i, v)| deparser(v, &format!("/deparsers/{i}")))
        .collect::<Result<Vec<_>, _>>()?;

    let action_values = array(root, "actions")?;
    let mut actions = Vec::with_capacity(action_values.len());
    let mut action_ids = HashMap::new();
    for (i, v) in action_values.iter().enumerate() {
        let path = format!("/actions/{i}");
        let a = cx.action(v, &path)?;
        if let Some(id) = obj(v, &path)?.get("id") {
            let id = id
                .as_u64()
                .ok_or_else(|| LoadError::malformed(format!("{path}/id"), "expected an integer"))?;
            if action_ids.insert(id, a.name.clone()).is_some() {
                return Err(LoadError::invalid(
                    format!("{path}/id"),
                    "duplicate action id",
                ));
            }
        }
        actions.push(a);
    }

    let pipelines = array(root, "pipelines")?
        .iter()
        .enumerate()
        .map(|(i, v)| cx.pipeline(v, &format!("/pipelines/{i}"), &action_ids))
        .collect::<Result<Vec<_>, _>>()?;
    let register_arrays = array(root, "register_arrays")?
        .iter()
        .enumerate()
        .map(|(i, v)| register_array(v, &format!("/register_arrays/{i}")))
        .collect::<Result<Vec<_>, _>>()?;

    let mut program = PipelineProgram {
        target,
        header_types,
        headers,
        parsers,
        deparsers,
        actions,
        pipelines,
        register_arrays,
        enums,
    };
    program.normalize();
    validate(&program)?;
    Ok(program)
}

fn obj<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, LoadError> {
    v.as_object()
        .ok_or_else(|| LoadError::malformed(path, "expected an object"))
}

fn array<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a [Value], LoadError> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(LoadError::malformed(format!("/{key}"), "expected an array")),
    }
}

fn member<'a>(m: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, LoadError> {
    m.get(key)
        .ok_or_else(|| LoadError::malformed(format!("{path}/{key}"), "missing member"))
}

fn string(m: &Map<String, Value>, key: &str, path: &str) -> Result<String, LoadError> {
    member(m, key, path)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| LoadError::malformed(format!("{path}/{key}"), "expected a string"))
}

fn opt_string(m: &Map<String, Value>, key: &str, path: &str) -> Result<Option<String>, LoadError> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(LoadError::malformed(
            format!("{path}/{key}"),
            "expected a string or null",
        )),
    }
}

fn uint(m: &Map<String, Value>, key: &str, path: &str) -> Result<u64, LoadError> {
    member(m, key, path)?.as_u64().ok_or_else(|| {
        LoadError::malformed(format!("{path}/{key}"), "expected an unsigned integer")
    })
}

fn width(v: &Value, path: &str) -> Result<u32, LoadError> {
    match v {
        Value::Number(n) => {
            let w = n
                .as_u64()
                .ok_or_else(|| LoadError::malformed(path, "expected an unsigned width"))?;
            if w == 0 || w > 64 {
                return Err(LoadError::WidthOutOfRange {
                    path: path.to_string(),
                    width: w,
                });
            }
            Ok(w as u32)
        }
        Value::String(s) if s == "*" => Err(LoadError::unsupported("varbit field", path)),
        _ => Err(LoadError::malformed(path, "expected a bit width")),
    }
}

pub(crate) fn parse_hex(s: &str, path: &str) -> Result<u64, LoadError> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    if neg {
        return Err(LoadError::unsupported("negative constant", path));
    }
    let parsed = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16),
        None => body.parse::<u64>(),
    };
    parsed.map_err(|_| LoadError::malformed(path, format!("bad integer constant {s:?}")))
}

fn field_ref(v: &Value, path: &str) -> Result<FieldRef, LoadError> {
    let a = v
        .as_array()
        .ok_or_else(|| LoadError::malformed(path, "field reference must be [header, field]"))?;
    match a.as_slice() {
        [Value::String(h), Value::String(f)] => Ok(FieldRef::new(h.clone(), f.clone())),
        _ => Err(LoadError::malformed(
            path,
            "field reference must be [header, field]",
        )),
    }
}

fn header_type(v: &Value, path: &str) -> Result<HeaderTypeDef, LoadError> {
    let m = obj(v, path)?;
    let name = string(m, "name", path)?;
    let fpath = format!("{path}/fields");
    let fields = member(m, "fields", path)?
        .as_array()
        .ok_or_else(|| LoadError::malformed(&fpath, "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let p = format!("{fpath}/{i}");
            let a = f
                .as_array()
                .ok_or_else(|| LoadError::malformed(&p, "field must be [name, width, signed]"))?;
            let fname = a
                .first()
                .and_then(Value::as_str)
                .ok_or_else(|| LoadError::malformed(format!("{p}/0"), "expected a field name"))?;
            let w = width(
                a.get(1)
                    .ok_or_else(|| LoadError::malformed(format!("{p}/1"), "missing width"))?,
                &format!("{p}/1"),
            )?;
            if a.get(2).and_then(Value::as_bool).unwrap_or(false) {
                return Err(LoadError::unsupported("signed field", format!("{p}/2")));
            }
            if a.get(3).and_then(Value::as_bool).unwrap_or(false) {
                return Err(LoadError::unsupported("saturating field", format!("{p}/3")));
            }
            Ok((fname.to_string(), w))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HeaderTypeDef { name, fields })
}

fn header_instance(v: &Value, path: &str) -> Result<HeaderInstance, LoadError> {
    let m = obj(v, path)?;
    let metadata = match m.get("metadata") {
        None => false,
        Some(b) => b.as_bool().ok_or_else(|| {
            LoadError::malformed(format!("{path}/metadata"), "expected a boolean")
        })?,
    };
    Ok(HeaderInstance {
        name: string(m, "name", path)?,
        header_type: string(m, "header_type", path)?,
        metadata,
    })
}

fn deparser(v: &Value, path: &str) -> Result<DeparserDef, LoadError> {
    let m = obj(v, path)?;
    let opath = format!("{path}/order");
    let order = member(m, "order", path)?
        .as_array()
        .ok_or_else(|| LoadError::malformed(&opath, "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, h)| {
            h.as_str().map(str::to_string).ok_or_else(|| {
                LoadError::malformed(format!("{opath}/{i}"), "expected a header name")
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if m.get("primitives")
        .and_then(Value::as_array)
        .is_some_and(|a| !a.is_empty())
    {
        return Err(LoadError::unsupported(
            "deparser primitives",
            format!("{path}/primitives"),
        ));
    }
    Ok(DeparserDef {
        name: string(m, "name", path)?,
        order,
    })
}

fn register_array(v: &Value, path: &str) -> Result<RegisterArrayDef, LoadError> {
    let m = obj(v, path)?;
    let bitwidth = uint(m, "bitwidth", path)?;
    if bitwidth == 0 || bitwidth > 64 {
        return Err(LoadError::WidthOutOfRange {
            path: format!("{path}/bitwidth"),
            width: bitwidth,
        });
    }
    let size = uint(m, "size", path)?;
    let size = u32::try_from(size)
        .map_err(|_| LoadError::invalid(format!("{path}/size"), "register array too large"))?;
    Ok(RegisterArrayDef {
        name: string(m, "name", path)?,
        bitwidth: bitwidth as u32,
        size,
    })
}

struct Loader {
    /// enum name -> member -> value
    enums: HashMap<String, HashMap<String, u64>>,
}

impl Loader {
    fn enums(&mut self, root: &Map<String, Value>) -> Result<Vec<EnumDef>, LoadError> {
        let target = root
            .get("target")
            .and_then(Value::as_str)
            .and_then(Target::from_name)
            .unwrap_or(Target::V1Quantum);
        for e in intrinsic_enums(target) {
            self.enums
                .insert(e.name.clone(), e.members.iter().cloned().collect());
        }
        let mut out = Vec::new();
        for (i, v) in array(root, "enums")?.iter().enumerate() {
            let path = format!("/enums/{i}");
            let m = obj(v, &path)?;
            let name = string(m, "name", &path)?;
            let epath = format!("{path}/entries");
            let members = member(m, "entries", &path)?
                .as_array()
                .ok_or_else(|| LoadError::malformed(&epath, "expected an array"))?
                .iter()
                .enumerate()
                .map(|(j, e)| match e.as_array().map(Vec::as_slice) {
                    Some([Value::String(n), Value::Number(x)]) if x.is_u64() => {
                        Ok((n.clone(), x.as_u64().unwrap_or_default()))
                    }
                    _ => Err(LoadError::malformed(
                        format!("{epath}/{j}"),
                        "enum entry must be [name, value]",
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?;
            self.enums
                .insert(name.clone(), members.iter().cloned().collect());
            out.push(EnumDef { name, members });
        }
        Ok(out)
    }

    fn operand(&self, v: &Value, path: &str) -> Result<Expr, LoadError> {
        let m = obj(v, path)?;
        let ty = string(m, "type", path)?;
        let value = member(m, "value", path)?;
        let vpath = format!("{path}/value");
        match ty.as_str() {
            "field" => Ok(Expr::Field(field_ref(value, &vpath)?)),
            "hexstr" => {
                let s = value
                    .as_str()
                    .ok_or_else(|| LoadError::malformed(&vpath, "expected a hex string"))?;
                Ok(Expr::Const(parse_hex(s, &vpath)?))
            }
            "bool" => value
                .as_bool()
                .map(Expr::Bool)
                .ok_or_else(|| LoadError::malformed(&vpath, "expected a boolean")),
            "runtime_data" => value
                .as_u64()
                .map(|i| Expr::Param(i as usize))
                .ok_or_else(|| LoadError::malformed(&vpath, "expected a parameter index")),
            "enum_member" => {
                let a = value.as_array().map(Vec::as_slice);
                let (e, mem) = match a {
                    Some([Value::String(e), Value::String(mem)]) => (e, mem),
                    _ => {
                        return Err(LoadError::malformed(
                            &vpath,
                            "enum_member must be [enum, member]",
                        ))
                    }
                };
                self.enums
                    .get(e)
                    .and_then(|members| members.get(mem))
                    .map(|x| Expr::Const(*x))
                    .ok_or_else(|| LoadError::dangling(&vpath, format!("{e}.{mem}")))
            }
            "expression" => self.expression(value, &vpath),
            other => Err(LoadError::unsupported(
                format!("operand type {other}"),
                format!("{path}/type"),
            )),
        }
    }

    fn expression(&self, v: &Value, path: &str) -> Result<Expr, LoadError> {
        let m = obj(v, path)?;
        // A bare operand may stand in for an expression node.
        if m.contains_key("type") {
            return self.operand(v, path);
        }
        let op = string(m, "op", path)?;
        let left = m.get("left").filter(|x| !x.is_null());
        let right = m.get("right").filter(|x| !x.is_null());
        let side = |x: Option<&Value>, which: &str| -> Result<Expr, LoadError> {
            let p = format!("{path}/{which}");
            let x = x.ok_or_else(|| LoadError::malformed(&p, "missing operand"))?;
            self.operand(x, &p)
        };
        if op == "valid" {
            let r = right
                .ok_or_else(|| LoadError::malformed(format!("{path}/right"), "missing operand"))?;
            let rm = obj(r, &format!("{path}/right"))?;
            if string(rm, "type", path)? != "header" {
                return Err(LoadError::malformed(
                    format!("{path}/right/type"),
                    "valid() takes a header",
                ));
            }
            return Ok(Expr::Valid(string(rm, "value", &format!("{path}/right"))?));
        }
        if op == "?" {
            let c = m
                .get("cond")
                .ok_or_else(|| LoadError::malformed(format!("{path}/cond"), "missing condition"))?;
            return Ok(Expr::ternary(
                self.operand(c, &format!("{path}/cond"))?,
                side(left, "left")?,
                side(right, "right")?,
            ));
        }
        if let Some(u) = UnOp::from_symbol(&op) {
            return Ok(Expr::Unary(u, Box::new(side(right, "right")?)));
        }
        if let Some(b) = BinOp::from_symbol(&op) {
            return Ok(Expr::bin(b, side(left, "left")?, side(right, "right")?));
        }
        Err(LoadError::unsupported(
            format!("operator {op}"),
            format!("{path}/op"),
        ))
    }

    fn parser(&self, v: &Value, path: &str) -> Result<ParserDef, LoadError> {
        let m = obj(v, path)?;
        let spath = format!("{path}/parse_states");
        let states = member(m, "parse_states", path)?
            .as_array()
            .ok_or_else(|| LoadError::malformed(&spath, "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, s)| self.parse_state(s, &format!("{spath}/{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ParserDef {
            name: string(m, "name", path)?,
            init_state: string(m, "init_state", path)?,
            states,
        })
    }

    fn parse_state(&self, v: &Value, path: &str) -> Result<ParseState, LoadError> {
        let m = obj(v, path)?;
        let mut ops = Vec::new();
        for (i, op) in array_at(m, "parser_ops", path)?.iter().enumerate() {
            let p = format!("{path}/parser_ops/{i}");
            let om = obj(op, &p)?;
            let name = string(om, "op", &p)?;
            let params = array_at(om, "parameters", &p)?;
            match name.as_str() {
                "extract" => {
                    let pm = match params {
                        [one] => obj(one, &format!("{p}/parameters/0"))?,
                        _ => {
                            return Err(LoadError::malformed(
                                format!("{p}/parameters"),
                                "extract takes one header",
                            ))
                        }
                    };
                    let ty = string(pm, "type", &format!("{p}/parameters/0"))?;
                    if ty != "regular" {
                        return Err(LoadError::unsupported(
                            format!("extract of {ty} header"),
                            format!("{p}/parameters/0/type"),
                        ));
                    }
                    ops.push(ParserOp::Extract(string(
                        pm,
                        "value",
                        &format!("{p}/parameters/0"),
                    )?));
                }
                "set" => {
                    let (d, s) = match params {
                        [d, s] => (d, s),
                        _ => {
                            return Err(LoadError::malformed(
                                format!("{p}/parameters"),
                                "set takes two operands",
                            ))
                        }
                    };
                    let dest = match self.operand(d, &format!("{p}/parameters/0"))? {
                        Expr::Field(f) => f,
                        _ => {
                            return Err(LoadError::malformed(
                                format!("{p}/parameters/0"),
                                "set destination must be a field",
                            ))
                        }
                    };
                    let value = self.operand(s, &format!("{p}/parameters/1"))?;
                    ops.push(ParserOp::Set { dest, value });
                }
                other => {
                    return Err(LoadError::unsupported(
                        format!("parser op {other}"),
                        format!("{p}/op"),
                    ))
                }
            }
        }
        let mut transition_key = Vec::new();
        for (i, k) in array_at(m, "transition_key", path)?.iter().enumerate() {
            let p = format!("{path}/transition_key/{i}");
            match self.operand(k, &p)? {
                Expr::Field(f) => transition_key.push(f),
                _ => return Err(LoadError::unsupported("non-field transition key", p)),
            }
        }
        let mut transitions = Vec::new();
        for (i, t) in array_at(m, "transitions", path)?.iter().enumerate() {
            let p = format!("{path}/transitions/{i}");
            let tm = obj(t, &p)?;
            if tm.get("mask").is_some_and(|x| !x.is_null()) {
                return Err(LoadError::unsupported(
                    "masked transition",
                    format!("{p}/mask"),
                ));
            }
            let ty = match tm.get("type") {
                Some(Value::String(s)) => s.as_str(),
                None => "hexstr",
                Some(_) => {
                    return Err(LoadError::malformed(
                        format!("{p}/type"),
                        "expected a string",
                    ))
                }
            };
            let value = match ty {
                "default" => None,
                "hexstr" => match tm.get("value") {
                    Some(Value::String(s)) if s == "default" => None,
                    Some(Value::String(s)) => Some(parse_hex(s, &format!("{p}/value"))?),
                    _ => {
                        return Err(LoadError::malformed(
                            format!("{p}/value"),
                            "expected a hex string",
                        ))
                    }
                },
                other => {
                    return Err(LoadError::unsupported(
                        format!("transition type {other}"),
                        format!("{p}/type"),
                    ))
                }
            };
            transitions.push(Transition {
                value,
                next_state: opt_string(tm, "next_state", &p)?,
            });
        }
        Ok(ParseState {
            name: string(m, "name", path)?,
            ops,
            transition_key,
            transitions,
        })
    }

    fn action(&self, v: &Value, path: &str) -> Result<ActionDef, LoadError> {
        let m = obj(v, path)?;
        let mut params = Vec::new();
        for (i, rd) in array_at(m, "runtime_data", path)?.iter().enumerate() {
            let p = format!("{path}/runtime_data/{i}");
            let rm = obj(rd, &p)?;
            let w = width(member(rm, "bitwidth", &p)?, &format!("{p}/bitwidth"))?;
            params.push((string(rm, "name", &p)?, w));
        }
        let mut primitives = Vec::new();
        for (i, pv) in array_at(m, "primitives", path)?.iter().enumerate() {
            let p = format!("{path}/primitives/{i}");
            primitives.push(self.primitive(pv, &p)?);
        }
        Ok(ActionDef {
            name: string(m, "name", path)?,
            params,
            primitives,
        })
    }

    fn primitive(&self, v: &Value, path: &str) -> Result<Primitive, LoadError> {
        let m = obj(v, path)?;
        let op = string(m, "op", path)?;
        let params = array_at(m, "parameters", path)?;
        let arg = |i: usize| -> Result<&Value, LoadError> {
            params.get(i).ok_or_else(|| {
                LoadError::malformed(
                    format!("{path}/parameters/{i}"),
                    format!("`{op}` is missing an operand"),
                )
            })
        };
        let arity = |n: usize| -> Result<(), LoadError> {
            if params.len() != n {
                return Err(LoadError::malformed(
                    format!("{path}/parameters"),
                    format!("`{op}` takes {n} operands, {} given", params.len()),
                ));
            }
            Ok(())
        };
        let field_at = |i: usize| -> Result<FieldRef, LoadError> {
            let p = format!("{path}/parameters/{i}");
            match self.operand(arg(i)?, &p)? {
                Expr::Field(f) => Ok(f),
                _ => Err(LoadError::malformed(p, "expected a field")),
            }
        };
        let named = |i: usize, ty: &str| -> Result<String, LoadError> {
            let p = format!("{path}/parameters/{i}");
            let am = obj(arg(i)?, &p)?;
            let got = string(am, "type", &p)?;
            if got != ty {
                return Err(LoadError::malformed(
                    format!("{p}/type"),
                    format!("expected {ty}, found {got}"),
                ));
            }
            string(am, "value", &p)
        };
        let expr_at = |i: usize| self.operand(arg(i)?, &format!("{path}/parameters/{i}"));
        Ok(match op.as_str() {
            "assign" | "modify_field" => {
                arity(2)?;
                Primitive::Assign {
                    dest: field_at(0)?,
                    value: expr_at(1)?,
                }
            }
            "register_read" => {
                arity(3)?;
                Primitive::RegisterRead {
                    dest: field_at(0)?,
                    register: named(1, "register_array")?,
                    index: expr_at(2)?,
                }
            }
            "register_write" => {
                arity(3)?;
                Primitive::RegisterWrite {
                    register: named(0, "register_array")?,
                    index: expr_at(1)?,
                    value: expr_at(2)?,
                }
            }
            "add_header" => {
                arity(1)?;
                Primitive::AddHeader(named(0, "header")?)
            }
            "remove_header" => {
                arity(1)?;
                Primitive::RemoveHeader(named(0, "header")?)
            }
            "mark_to_drop" => {
                arity(1)?;
                let h = named(0, "header")?;
                if h != super::target::STANDARD_METADATA {
                    return Err(LoadError::malformed(
                        format!("{path}/parameters/0"),
                        "mark_to_drop takes standard_metadata",
                    ));
                }
                Primitive::MarkToDrop
            }
            other => {
                return Err(LoadError::unsupported(
                    format!("primitive {other}"),
                    format!("{path}/op"),
                ))
            }
        })
    }

    fn pipeline(
        &self,
        v: &Value,
        path: &str,
        action_ids: &HashMap<u64, String>,
    ) -> Result<PipelineDef, LoadError> {
        let m = obj(v, path)?;
        if array_at(m, "action_profiles", path)?
            .iter()
            .next()
            .is_some()
        {
            return Err(LoadError::unsupported(
                "action profile",
                format!("{path}/action_profiles"),
            ));
        }
        let mut tables = Vec::new();
        for (i, t) in array_at(m, "tables", path)?.iter().enumerate() {
            tables.push(self.table(t, &format!("{path}/tables/{i}"), action_ids)?);
        }
        let mut conditionals = Vec::new();
        for (i, c) in array_at(m, "conditionals", path)?.iter().enumerate() {
            let p = format!("{path}/conditionals/{i}");
            let cm = obj(c, &p)?;
            conditionals.push(ConditionalDef {
                name: string(cm, "name", &p)?,
                expr: self.operand(member(cm, "expression", &p)?, &format!("{p}/expression"))?,
                true_next: opt_string(cm, "true_next", &p)?,
                false_next: opt_string(cm, "false_next", &p)?,
            });
        }
        Ok(PipelineDef {
            name: string(m, "name", path)?,
            init: opt_string(m, "init_table", path)?,
            tables,
            conditionals,
        })
    }

    fn table(
        &self,
        v: &Value,
        path: &str,
        action_ids: &HashMap<u64, String>,
    ) -> Result<TableDef, LoadError> {
        let m = obj(v, path)?;
        match m.get("type").and_then(Value::as_str) {
            None | Some("simple") => {}
            Some(other) => {
                return Err(LoadError::unsupported(
                    format!("table type {other}"),
                    format!("{path}/type"),
                ))
            }
        }
        if let Some(mt) = m.get("match_type").and_then(Value::as_str) {
            if mt != "exact" {
                return Err(LoadError::unsupported(
                    format!("match kind {mt}"),
                    format!("{path}/match_type"),
                ));
            }
        }
        if m.get("with_counters")
            .and_then(Value::as_bool)
            .unwrap_or(false)
        {
            return Err(LoadError::unsupported(
                "direct counters",
                format!("{path}/with_counters"),
            ));
        }
        if m.get("direct_meters").is_some_and(|x| !x.is_null()) {
            return Err(LoadError::unsupported(
                "direct meters",
                format!("{path}/direct_meters"),
            ));
        }
        if m.get("support_timeout")
            .and_then(Value::as_bool)
            .unwrap_or(false)
        {
            return Err(LoadError::unsupported(
                "entry timeout",
                format!("{path}/support_timeout"),
            ));
        }
        if m.get("entries")
            .and_then(Value::as_array)
            .is_some_and(|a| !a.is_empty())
        {
            return Err(LoadError::unsupported(
                "const entries",
                format!("{path}/entries"),
            ));
        }
        let mut keys = Vec::new();
        for (i, k) in array_at(m, "key", path)?.iter().enumerate() {
            let p = format!("{path}/key/{i}");
            let km = obj(k, &p)?;
            let mt = string(km, "match_type", &p)?;
            if mt != "exact" {
                return Err(LoadError::unsupported(
                    format!("match kind {mt}"),
                    format!("{p}/match_type"),
                ));
            }
            if km.get("mask").is_some_and(|x| !x.is_null()) {
                return Err(LoadError::unsupported("masked key", format!("{p}/mask")));
            }
            keys.push(field_ref(
                member(km, "target", &p)?,
                &format!("{p}/target"),
            )?);
        }
        let name_list = array_at(m, "actions", path)?;
        let id_list = array_at(m, "action_ids", path)?;
        let mut actions = Vec::new();
        for (i, a) in name_list.iter().enumerate() {
            let p = format!("{path}/actions/{i}");
            let name = a
                .as_str()
                .ok_or_else(|| LoadError::malformed(&p, "expected an action name"))?;
            actions.push(name.to_string());
        }
        for (i, id) in id_list.iter().enumerate() {
            let p = format!("{path}/action_ids/{i}");
            let id = id
                .as_u64()
                .ok_or_else(|| LoadError::malformed(&p, "expected an action id"))?;
            let name = action_ids
                .get(&id)
                .ok_or_else(|| LoadError::dangling(&p, format!("action id {id}")))?;
            if !actions.contains(name) {
                if name_list.is_empty() {
                    actions.push(name.clone());
                } else {
                    return Err(LoadError::invalid(&p, "action_ids disagree with actions"));
                }
            }
        }

        let dpath = format!("{path}/default_entry");
        let (default_action, default_params) = match m.get("default_entry") {
            None | Some(Value::Null) => {
                return Err(LoadError::malformed(&dpath, "missing default entry"));
            }
            Some(d) => {
                let dm = obj(d, &dpath)?;
                let name = match (dm.get("action_id"), dm.get("action_name")) {
                    (Some(id), _) => {
                        let id = id.as_u64().ok_or_else(|| {
                            LoadError::malformed(
                                format!("{dpath}/action_id"),
                                "expected an action id",
                            )
                        })?;
                        action_ids.get(&id).cloned().ok_or_else(|| {
                            LoadError::dangling(
                                format!("{dpath}/action_id"),
                                format!("action id {id}"),
                            )
                        })?
                    }
                    (None, Some(Value::String(n))) => n.clone(),
                    _ => {
                        return Err(LoadError::malformed(
                            &dpath,
                            "default entry names no action",
                        ))
                    }
                };
                let mut data = Vec::new();
                for (i, x) in array_at(dm, "action_data", &dpath)?.iter().enumerate() {
                    let p = format!("{dpath}/action_data/{i}");
                    let s = x
                        .as_str()
                        .ok_or_else(|| LoadError::malformed(&p, "expected a hex string"))?;
                    data.push(parse_hex(s, &p)?);
                }
                (name, data)
            }
        };

        let mut next_tables = BTreeMap::new();
        if let Some(nt) = m.get("next_tables") {
            let p = format!("{path}/next_tables");
            for (k, n) in obj(nt, &p)? {
                if k.starts_with("__") {
                    return Err(LoadError::unsupported(
                        format!("next_tables key {k}"),
                        format!("{p}/{k}"),
                    ));
                }
                let next = match n {
                    Value::Null => None,
                    Value::String(s) => Some(s.clone()),
                    _ => {
                        return Err(LoadError::malformed(
                            format!("{p}/{k}"),
                            "expected a node name or null",
                        ))
                    }
                };
                next_tables.insert(k.clone(), next);
            }
        }
        let max_size = match m.get("max_size") {
            None => 1024,
            Some(x) => x
                .as_u64()
                .and_then(|x| u32::try_from(x).ok())
                .ok_or_else(|| {
                    LoadError::malformed(format!("{path}/max_size"), "expected a size")
                })?,
        };
        Ok(TableDef {
            name: string(m, "name", path)?,
            keys,
            actions,
            default_action,
            default_params,
            next_tables,
            base_default_next: opt_string(m, "base_default_next", path)?,
            max_size,
        })
    }
}

fn array_at<'a>(
    m: &'a Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<&'a [Value], LoadError> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(LoadError::malformed(
            format!("{path}/{key}"),
            "expected an array",
        )),
    }
}
