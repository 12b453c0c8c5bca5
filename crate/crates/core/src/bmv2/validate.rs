use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::error::LoadError;
use super::ir::*;
use super::target::{intrinsic_header, intrinsic_headers, XCONNECT_METADATA};

pub const MAX_WIDTH: u32 = 64;

fn check_width(path: &str, width: u64) -> Result<(), LoadError> {
    if width == 0 || width > MAX_WIDTH as u64 {
        return Err(LoadError::WidthOutOfRange {
            path: path.to_string(),
            width,
        });
    }
    Ok(())
}

/// Resolved view of the header namespace: declared instances plus the
/// architecture's intrinsic metadata.
struct Namespace<'a> {
    /// header name -> (field -> width, is_metadata)
    headers: HashMap<&'a str, (HashMap<&'a str, u32>, bool)>,
}

impl<'a> Namespace<'a> {
    fn field_width(&self, r: &FieldRef) -> Option<u32> {
        self.headers
            .get(r.header.as_str())
            .and_then(|(fields, _)| fields.get(r.field.as_str()).copied())
    }

    fn check_field(&self, path: &str, r: &FieldRef) -> Result<u32, LoadError> {
        self.field_width(r)
            .ok_or_else(|| LoadError::dangling(path, r.to_string()))
    }

    fn check_packet_header(&self, path: &str, name: &str) -> Result<(), LoadError> {
        match self.headers.get(name) {
            None => Err(LoadError::dangling(path, name)),
            Some((_, true)) => Err(LoadError::invalid(
                path,
                format!("`{name}` is a metadata instance, not a packet header"),
            )),
            Some((_, false)) => Ok(()),
        }
    }
}

pub fn validate(p: &PipelineProgram) -> Result<(), LoadError> {
    let types = validate_header_types(p)?;
    let ns = build_namespace(p, &types)?;
    validate_enums(p)?;
    validate_registers(p)?;
    validate_parsers(p, &ns)?;
    validate_deparsers(p, &ns)?;
    validate_actions(p, &ns)?;
    validate_pipelines(p, &ns)?;
    Ok(())
}

fn unique<'a, I: IntoIterator<Item = &'a str>>(path: &str, names: I) -> Result<(), LoadError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(LoadError::invalid(path, format!("duplicate name `{n}`")));
        }
    }
    Ok(())
}

fn validate_header_types(p: &PipelineProgram) -> Result<HashMap<&str, &HeaderTypeDef>, LoadError> {
    unique(
        "/header_types",
        p.header_types.iter().map(|t| t.name.as_str()),
    )?;
    let mut out = HashMap::new();
    for t in &p.header_types {
        let base = format!("/header_types/{}", t.name);
        if t.fields.is_empty() {
            return Err(LoadError::invalid(&base, "header type has no fields"));
        }
        unique(
            &format!("{base}/fields"),
            t.fields.iter().map(|(n, _)| n.as_str()),
        )?;
        for (name, w) in &t.fields {
            check_width(&format!("{base}/fields/{name}"), *w as u64)?;
        }
        out.insert(t.name.as_str(), t);
    }
    Ok(out)
}

fn build_namespace<'a>(
    p: &'a PipelineProgram,
    types: &HashMap<&'a str, &'a HeaderTypeDef>,
) -> Result<Namespace<'a>, LoadError> {
    unique("/headers", p.headers.iter().map(|h| h.name.as_str()))?;
    let mut headers = HashMap::new();
    for h in &p.headers {
        let path = format!("/headers/{}", h.name);
        let ty = types
            .get(h.header_type.as_str())
            .ok_or_else(|| LoadError::dangling(format!("{path}/header_type"), &h.header_type))?;
        if let Some(intr) = intrinsic_header(p.target, &h.name) {
            let same = h.metadata
                && ty.fields.len() == intr.fields.len()
                && ty
                    .fields
                    .iter()
                    .zip(intr.fields)
                    .all(|((n, w), (in_, iw))| n == in_ && w == iw);
            if !same {
                return Err(LoadError::invalid(
                    path,
                    format!("`{}` must match the architecture's layout", h.name),
                ));
            }
        }
        if !h.metadata && ty.bit_width() % 8 != 0 {
            return Err(LoadError::invalid(
                path,
                format!(
                    "packet header width {} is not a whole number of bytes",
                    ty.bit_width()
                ),
            ));
        }
        let fields = ty.fields.iter().map(|(n, w)| (n.as_str(), *w)).collect();
        headers.insert(h.name.as_str(), (fields, h.metadata));
    }
    for intr in intrinsic_headers(p.target) {
        headers
            .entry(intr.name)
            .or_insert_with(|| (intr.fields.iter().map(|(n, w)| (*n, *w)).collect(), true));
    }
    Ok(Namespace { headers })
}

fn validate_enums(p: &PipelineProgram) -> Result<(), LoadError> {
    unique("/enums", p.enums.iter().map(|e| e.name.as_str()))?;
    for e in &p.enums {
        unique(
            &format!("/enums/{}", e.name),
            e.members.iter().map(|(m, _)| m.as_str()),
        )?;
    }
    Ok(())
}

fn validate_registers(p: &PipelineProgram) -> Result<(), LoadError> {
    unique(
        "/register_arrays",
        p.register_arrays.iter().map(|r| r.name.as_str()),
    )?;
    for r in &p.register_arrays {
        let path = format!("/register_arrays/{}", r.name);
        check_width(&format!("{path}/bitwidth"), r.bitwidth as u64)?;
        if r.size == 0 {
            return Err(LoadError::invalid(
                format!("{path}/size"),
                "register array is empty",
            ));
        }
    }
    Ok(())
}

/// Checks an expression. `params` is the arity of the enclosing action, or
/// `None` outside actions.
fn validate_expr(
    ns: &Namespace,
    path: &str,
    e: &Expr,
    params: Option<&[(String, u32)]>,
) -> Result<(), LoadError> {
    match e {
        Expr::Const(_) | Expr::Bool(_) => Ok(()),
        Expr::Field(r) => ns.check_field(path, r).map(|_| ()),
        Expr::Param(i) => match params {
            Some(ps) if *i < ps.len() => Ok(()),
            Some(_) => Err(LoadError::dangling(path, format!("runtime_data {i}"))),
            None => Err(LoadError::invalid(path, "runtime_data outside an action")),
        },
        Expr::Valid(h) => ns.check_packet_header(path, h),
        Expr::Unary(_, a) => validate_expr(ns, path, a, params),
        Expr::Binary(_, l, r) => {
            validate_expr(ns, path, l, params)?;
            validate_expr(ns, path, r, params)
        }
        Expr::Ternary(c, t, f) => {
            validate_expr(ns, path, c, params)?;
            validate_expr(ns, path, t, params)?;
            validate_expr(ns, path, f, params)
        }
    }
}

fn validate_parsers(p: &PipelineProgram, ns: &Namespace) -> Result<(), LoadError> {
    unique("/parsers", p.parsers.iter().map(|x| x.name.as_str()))?;
    if p.parsers.len() > 1 {
        return Err(LoadError::unsupported("multiple parsers", "/parsers"));
    }
    for parser in &p.parsers {
        let base = format!("/parsers/{}", parser.name);
        unique(
            &format!("{base}/parse_states"),
            parser.states.iter().map(|s| s.name.as_str()),
        )?;
        let names: HashSet<&str> = parser.states.iter().map(|s| s.name.as_str()).collect();
        if !names.contains(parser.init_state.as_str()) {
            return Err(LoadError::dangling(
                format!("{base}/init_state"),
                &parser.init_state,
            ));
        }
        for s in &parser.states {
            let sp = format!("{base}/parse_states/{}", s.name);
            for (i, op) in s.ops.iter().enumerate() {
                let op_path = format!("{sp}/parser_ops/{i}");
                match op {
                    ParserOp::Extract(h) => ns.check_packet_header(&op_path, h)?,
                    ParserOp::Set { dest, value } => {
                        ns.check_field(&op_path, dest)?;
                        validate_expr(ns, &op_path, value, None)?;
                    }
                }
            }
            let mut key_width = 0u64;
            for (i, k) in s.transition_key.iter().enumerate() {
                key_width += ns.check_field(&format!("{sp}/transition_key/{i}"), k)? as u64;
            }
            if key_width > MAX_WIDTH as u64 {
                return Err(LoadError::WidthOutOfRange {
                    path: format!("{sp}/transition_key"),
                    width: key_width,
                });
            }
            let mut defaults = 0;
            let mut values = HashSet::new();
            for (i, t) in s.transitions.iter().enumerate() {
                let tp = format!("{sp}/transitions/{i}");
                match t.value {
                    None => defaults += 1,
                    Some(v) => {
                        if s.transition_key.is_empty() {
                            return Err(LoadError::invalid(&tp, "value transition without a key"));
                        }
                        if key_width < 64 && v >> key_width != 0 {
                            return Err(LoadError::invalid(&tp, "transition value wider than key"));
                        }
                        if !values.insert(v) {
                            return Err(LoadError::invalid(&tp, "duplicate transition value"));
                        }
                    }
                }
                if let Some(next) = &t.next_state {
                    if !names.contains(next.as_str()) {
                        return Err(LoadError::dangling(format!("{tp}/next_state"), next));
                    }
                }
            }
            if defaults > 1 {
                return Err(LoadError::invalid(&sp, "more than one default transition"));
            }
        }
        // reachability
        let by_name: HashMap<&str, &ParseState> =
            parser.states.iter().map(|s| (s.name.as_str(), s)).collect();
        let mut seen = BTreeSet::new();
        let mut stack = vec![parser.init_state.as_str()];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            for t in &by_name[n].transitions {
                if let Some(next) = &t.next_state {
                    stack.push(next.as_str());
                }
            }
        }
        if let Some(s) = parser
            .states
            .iter()
            .find(|s| !seen.contains(s.name.as_str()))
        {
            return Err(LoadError::invalid(
                format!("{base}/parse_states/{}", s.name),
                "state unreachable from the start state",
            ));
        }
    }
    Ok(())
}

fn validate_deparsers(p: &PipelineProgram, ns: &Namespace) -> Result<(), LoadError> {
    unique("/deparsers", p.deparsers.iter().map(|x| x.name.as_str()))?;
    if p.deparsers.len() > 1 {
        return Err(LoadError::unsupported("multiple deparsers", "/deparsers"));
    }
    for d in &p.deparsers {
        let base = format!("/deparsers/{}/order", d.name);
        unique(&base, d.order.iter().map(|s| s.as_str()))?;
        for (i, h) in d.order.iter().enumerate() {
            ns.check_packet_header(&format!("{base}/{i}"), h)?;
        }
    }
    Ok(())
}

fn validate_actions(p: &PipelineProgram, ns: &Namespace) -> Result<(), LoadError> {
    unique("/actions", p.actions.iter().map(|a| a.name.as_str()))?;
    for a in &p.actions {
        let base = format!("/actions/{}", a.name);
        unique(
            &format!("{base}/runtime_data"),
            a.params.iter().map(|(n, _)| n.as_str()),
        )?;
        for (n, w) in &a.params {
            check_width(&format!("{base}/runtime_data/{n}"), *w as u64)?;
        }
        for (i, prim) in a.primitives.iter().enumerate() {
            let pp = format!("{base}/primitives/{i}");
            let params = Some(a.params.as_slice());
            match prim {
                Primitive::Assign { dest, value } => {
                    ns.check_field(&pp, dest)?;
                    validate_expr(ns, &pp, value, params)?;
                }
                Primitive::RegisterRead {
                    dest,
                    register,
                    index,
                } => {
                    ns.check_field(&pp, dest)?;
                    if p.register_array(register).is_none() {
                        return Err(LoadError::dangling(&pp, register));
                    }
                    validate_expr(ns, &pp, index, params)?;
                }
                Primitive::RegisterWrite {
                    register,
                    index,
                    value,
                } => {
                    if p.register_array(register).is_none() {
                        return Err(LoadError::dangling(&pp, register));
                    }
                    validate_expr(ns, &pp, index, params)?;
                    validate_expr(ns, &pp, value, params)?;
                }
                Primitive::AddHeader(h) | Primitive::RemoveHeader(h) => {
                    ns.check_packet_header(&pp, h)?
                }
                Primitive::MarkToDrop => {}
            }
        }
        check_static_emission_conflict(p, a, &base)?;
    }
    Ok(())
}

/// An action that selects both a unicast port and a BSM group for emission
/// can never be executed meaningfully.
fn check_static_emission_conflict(
    p: &PipelineProgram,
    a: &ActionDef,
    base: &str,
) -> Result<(), LoadError> {
    if p.target != Target::V1Quantum {
        return Ok(());
    }
    let mut unicast = false;
    let mut multicast = false;
    for prim in &a.primitives {
        if let Primitive::Assign { dest, value } = prim {
            if dest.header != XCONNECT_METADATA {
                continue;
            }
            match (dest.field.as_str(), value) {
                ("egress_spec", Expr::Const(511)) => unicast = false,
                ("egress_spec", _) => unicast = true,
                ("bsm_grp", Expr::Const(0)) => multicast = false,
                ("bsm_grp", _) => multicast = true,
                _ => {}
            }
        }
    }
    if unicast && multicast {
        return Err(LoadError::invalid(
            base,
            "action sets both xconnect egress_spec and bsm_grp",
        ));
    }
    Ok(())
}

fn validate_pipelines(p: &PipelineProgram, ns: &Namespace) -> Result<(), LoadError> {
    unique("/pipelines", p.pipelines.iter().map(|x| x.name.as_str()))?;
    let names: BTreeSet<&str> = p.pipelines.iter().map(|x| x.name.as_str()).collect();
    let required: BTreeSet<&str> = p.target.required_pipelines().iter().copied().collect();
    if names != required {
        return Err(LoadError::invalid(
            "/pipelines",
            format!(
                "target {} requires exactly the pipelines {:?}, found {:?}",
                p.target.name(),
                required,
                names
            ),
        ));
    }
    for pl in &p.pipelines {
        let base = format!("/pipelines/{}", pl.name);
        unique(
            &base,
            pl.tables
                .iter()
                .map(|t| t.name.as_str())
                .chain(pl.conditionals.iter().map(|c| c.name.as_str())),
        )?;
        let nodes: HashSet<&str> = pl
            .tables
            .iter()
            .map(|t| t.name.as_str())
            .chain(pl.conditionals.iter().map(|c| c.name.as_str()))
            .collect();
        let check_next = |path: String, n: &Option<String>| -> Result<(), LoadError> {
            match n {
                Some(n) if !nodes.contains(n.as_str()) => Err(LoadError::dangling(path, n)),
                _ => Ok(()),
            }
        };
        check_next(format!("{base}/init_table"), &pl.init)?;
        let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for t in &pl.tables {
            let tp = format!("{base}/tables/{}", t.name);
            for (i, k) in t.keys.iter().enumerate() {
                ns.check_field(&format!("{tp}/key/{i}"), k)?;
            }
            if t.actions.is_empty() {
                return Err(LoadError::invalid(&tp, "table has no actions"));
            }
            for a in &t.actions {
                if p.action(a).is_none() {
                    return Err(LoadError::dangling(format!("{tp}/actions"), a));
                }
            }
            if !t.actions.contains(&t.default_action) {
                let path = format!("{tp}/default_entry");
                return Err(if p.action(&t.default_action).is_none() {
                    LoadError::dangling(path, &t.default_action)
                } else {
                    LoadError::invalid(path, "default action is not in the table's action list")
                });
            }
            let def = p.action(&t.default_action).expect("checked above");
            if def.params.len() != t.default_params.len() {
                return Err(LoadError::invalid(
                    format!("{tp}/default_entry/action_data"),
                    format!(
                        "default action `{}` takes {} parameters, {} given",
                        def.name,
                        def.params.len(),
                        t.default_params.len()
                    ),
                ));
            }
            for (v, (n, w)) in t.default_params.iter().zip(&def.params) {
                if *w < 64 && v >> w != 0 {
                    return Err(LoadError::invalid(
                        format!("{tp}/default_entry/action_data"),
                        format!("value {v} does not fit parameter `{n}` (bit<{w}>)"),
                    ));
                }
            }
            for (a, n) in &t.next_tables {
                if !t.actions.contains(a) {
                    return Err(LoadError::dangling(format!("{tp}/next_tables"), a));
                }
                check_next(format!("{tp}/next_tables/{a}"), n)?;
            }
            check_next(format!("{tp}/base_default_next"), &t.base_default_next)?;
            let succ = edges.entry(t.name.as_str()).or_default();
            succ.extend(t.next_tables.values().flatten().map(|s| s.as_str()));
            succ.extend(t.base_default_next.iter().map(|s| s.as_str()));
        }
        for c in &pl.conditionals {
            let cp = format!("{base}/conditionals/{}", c.name);
            validate_expr(ns, &format!("{cp}/expression"), &c.expr, None)?;
            check_next(format!("{cp}/true_next"), &c.true_next)?;
            check_next(format!("{cp}/false_next"), &c.false_next)?;
            let succ = edges.entry(c.name.as_str()).or_default();
            succ.extend(c.true_next.iter().map(|s| s.as_str()));
            succ.extend(c.false_next.iter().map(|s| s.as_str()));
        }
        if let Some(n) = find_cycle(&edges) {
            return Err(LoadError::invalid(
                format!("{base}/{n}"),
                "control flow contains a cycle",
            ));
        }
    }
    Ok(())
}

fn find_cycle<'a>(edges: &BTreeMap<&'a str, Vec<&'a str>>) -> Option<&'a str> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        n: &'a str,
        edges: &BTreeMap<&'a str, Vec<&'a str>>,
        marks: &mut HashMap<&'a str, Mark>,
    ) -> Option<&'a str> {
        match marks.get(n) {
            Some(Mark::Done) => return None,
            Some(Mark::Active) => return Some(n),
            None => {}
        }
        marks.insert(n, Mark::Active);
        for &s in edges.get(n).map(|v| v.as_slice()).unwrap_or(&[]) {
            if let Some(c) = visit(s, edges, marks) {
                return Some(c);
            }
        }
        marks.insert(n, Mark::Done);
        None
    }
    let mut marks = HashMap::new();
    for &n in edges.keys() {
        if let Some(c) = visit(n, edges, &mut marks) {
            return Some(c);
        }
    }
    None
}
