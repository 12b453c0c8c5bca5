//! Resolves names in a [`PipelineProgram`] to dense indices for execution.

use std::collections::HashMap;
use std::sync::Arc;

use crate::bmv2::ir::*;
use crate::bmv2::target::intrinsic_headers;

use super::packet::{HeaderLayout, Layout};
use super::RuntimeError;

#[derive(Debug, Clone)]
pub(crate) enum CExpr {
    Const(u64),
    Bool(bool),
    Field(usize, usize),
    Param(usize),
    Valid(usize),
    Unary(UnOp, Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    Ternary(Box<CExpr>, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Slot {
    pub h: usize,
    pub f: usize,
    pub width: u32,
}

#[derive(Debug, Clone)]
pub(crate) enum CPrim {
    Assign(Slot, CExpr),
    RegisterRead(Slot, usize, CExpr),
    RegisterWrite(usize, CExpr, CExpr),
    AddHeader(usize),
    RemoveHeader(usize),
    MarkToDrop,
}

#[derive(Debug, Clone)]
pub(crate) struct CAction {
    pub name: String,
    pub param_widths: Vec<u32>,
    pub prims: Vec<CPrim>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Node {
    Table(usize),
    Cond(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct CTable {
    pub keys: Vec<Slot>,
    /// Allowed action indices.
    pub actions: Vec<usize>,
    pub default_action: usize,
    pub default_params: Vec<u64>,
    pub next: HashMap<usize, Option<Node>>,
    pub max_size: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct CCond {
    pub expr: CExpr,
    pub true_next: Option<Node>,
    pub false_next: Option<Node>,
}

#[derive(Debug, Clone)]
pub(crate) enum COp {
    Extract(usize),
    Set(Slot, CExpr),
}

#[derive(Debug, Clone)]
pub(crate) struct CState {
    pub name: String,
    pub ops: Vec<COp>,
    pub key: Vec<Slot>,
    pub transitions: Vec<(Option<u64>, Option<usize>)>,
}

#[derive(Debug, Clone)]
pub(crate) struct CParser {
    pub init: usize,
    pub states: Vec<CState>,
}

#[derive(Debug, Clone)]
pub(crate) struct CRegister {
    pub name: String,
    pub width: u32,
    pub size: usize,
}

#[derive(Debug)]
pub(crate) struct Compiled {
    pub layout: Arc<Layout>,
    pub parser: Option<CParser>,
    pub deparse_order: Vec<usize>,
    pub actions: Vec<CAction>,
    pub action_index: HashMap<String, usize>,
    pub tables: Vec<CTable>,
    pub table_index: HashMap<String, usize>,
    pub conds: Vec<CCond>,
    pub pipelines: HashMap<String, Option<Node>>,
    pub registers: Vec<CRegister>,
    pub register_index: HashMap<String, usize>,
}

struct Cx<'a> {
    layout: &'a Layout,
    registers: &'a HashMap<String, usize>,
}

impl Cx<'_> {
    fn slot(&self, r: &FieldRef) -> Result<Slot, RuntimeError> {
        self.layout
            .resolve(&r.header, &r.field)
            .map(|(h, f, width)| Slot { h, f, width })
            .ok_or_else(|| RuntimeError::Evaluation(format!("unknown field {r}")))
    }

    fn header(&self, name: &str) -> Result<usize, RuntimeError> {
        self.layout
            .header_index(name)
            .ok_or_else(|| RuntimeError::Evaluation(format!("unknown header {name}")))
    }

    fn register(&self, name: &str) -> Result<usize, RuntimeError> {
        self.registers
            .get(name)
            .copied()
            .ok_or_else(|| RuntimeError::UnknownRegister(name.to_string()))
    }

    fn expr(&self, e: &Expr) -> Result<CExpr, RuntimeError> {
        Ok(match e {
            Expr::Const(v) => CExpr::Const(*v),
            Expr::Bool(b) => CExpr::Bool(*b),
            Expr::Field(r) => {
                let s = self.slot(r)?;
                CExpr::Field(s.h, s.f)
            }
            Expr::Param(i) => CExpr::Param(*i),
            Expr::Valid(h) => CExpr::Valid(self.header(h)?),
            Expr::Unary(op, a) => CExpr::Unary(*op, Box::new(self.expr(a)?)),
            Expr::Binary(op, l, r) => {
                CExpr::Binary(*op, Box::new(self.expr(l)?), Box::new(self.expr(r)?))
            }
            Expr::Ternary(c, t, f) => CExpr::Ternary(
                Box::new(self.expr(c)?),
                Box::new(self.expr(t)?),
                Box::new(self.expr(f)?),
            ),
        })
    }
}

pub(crate) fn compile_expr(c: &Compiled, e: &Expr) -> Result<CExpr, RuntimeError> {
    Cx {
        layout: &c.layout,
        registers: &c.register_index,
    }
    .expr(e)
}

pub(crate) fn build_layout(p: &PipelineProgram) -> Layout {
    let mut headers = Vec::new();
    for h in &p.headers {
        let ty = p
            .header_type(&h.header_type)
            .expect("validated program has every header type");
        headers.push(HeaderLayout::new(&h.name, ty.fields.clone(), h.metadata));
    }
    for intr in intrinsic_headers(p.target) {
        if p.header(intr.name).is_none() {
            let fields = intr
                .fields
                .iter()
                .map(|(n, w)| (n.to_string(), *w))
                .collect();
            headers.push(HeaderLayout::new(intr.name, fields, true));
        }
    }
    Layout::new(headers)
}

pub(crate) fn compile(p: &PipelineProgram) -> Result<Compiled, RuntimeError> {
    let layout = Arc::new(build_layout(p));
    let registers: Vec<CRegister> = p
        .register_arrays
        .iter()
        .map(|r| CRegister {
            name: r.name.clone(),
            width: r.bitwidth,
            size: r.size as usize,
        })
        .collect();
    let register_index: HashMap<String, usize> = registers
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.clone(), i))
        .collect();
    let cx = Cx {
        layout: &layout,
        registers: &register_index,
    };

    let parser = match p.parsers.first() {
        None => None,
        Some(parser) => {
            let idx: HashMap<&str, usize> = parser
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| (s.name.as_str(), i))
                .collect();
            let mut states = Vec::new();
            for s in &parser.states {
                let mut ops = Vec::new();
                for op in &s.ops {
                    ops.push(match op {
                        ParserOp::Extract(h) => COp::Extract(cx.header(h)?),
                        ParserOp::Set { dest, value } => COp::Set(cx.slot(dest)?, cx.expr(value)?),
                    });
                }
                let key = s
                    .transition_key
                    .iter()
                    .map(|k| cx.slot(k))
                    .collect::<Result<_, _>>()?;
                let transitions = s
                    .transitions
                    .iter()
                    .map(|t| (t.value, t.next_state.as_ref().map(|n| idx[n.as_str()])))
                    .collect();
                states.push(CState {
                    name: s.name.clone(),
                    ops,
                    key,
                    transitions,
                });
            }
            Some(CParser {
                init: idx[parser.init_state.as_str()],
                states,
            })
        }
    };

    let deparse_order = match p.deparsers.first() {
        None => Vec::new(),
        Some(d) => d
            .order
            .iter()
            .map(|h| cx.header(h))
            .collect::<Result<_, _>>()?,
    };

    let mut actions = Vec::new();
    for a in &p.actions {
        let mut prims = Vec::new();
        for prim in &a.primitives {
            prims.push(match prim {
                Primitive::Assign { dest, value } => CPrim::Assign(cx.slot(dest)?, cx.expr(value)?),
                Primitive::RegisterRead {
                    dest,
                    register,
                    index,
                } => CPrim::RegisterRead(cx.slot(dest)?, cx.register(register)?, cx.expr(index)?),
                Primitive::RegisterWrite {
                    register,
                    index,
                    value,
                } => CPrim::RegisterWrite(cx.register(register)?, cx.expr(index)?, cx.expr(value)?),
                Primitive::AddHeader(h) => CPrim::AddHeader(cx.header(h)?),
                Primitive::RemoveHeader(h) => CPrim::RemoveHeader(cx.header(h)?),
                Primitive::MarkToDrop => CPrim::MarkToDrop,
            });
        }
        actions.push(CAction {
            name: a.name.clone(),
            param_widths: a.params.iter().map(|(_, w)| *w).collect(),
            prims,
        });
    }
    let action_index: HashMap<String, usize> = actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.clone(), i))
        .collect();

    let mut tables = Vec::new();
    let mut table_index = HashMap::new();
    let mut conds = Vec::new();
    let mut pipelines = HashMap::new();
    for pl in &p.pipelines {
        // Assign global indices first so forward references resolve.
        let mut nodes: HashMap<&str, Node> = HashMap::new();
        for (i, t) in pl.tables.iter().enumerate() {
            nodes.insert(t.name.as_str(), Node::Table(tables.len() + i));
        }
        for (i, c) in pl.conditionals.iter().enumerate() {
            nodes.insert(c.name.as_str(), Node::Cond(conds.len() + i));
        }
        let node = |n: &Option<String>| n.as_ref().map(|n| nodes[n.as_str()]);
        for t in &pl.tables {
            let acts: Vec<usize> = t.actions.iter().map(|a| action_index[a.as_str()]).collect();
            let next = t
                .actions
                .iter()
                .map(|a| {
                    let n = t
                        .next_tables
                        .get(a)
                        .cloned()
                        .unwrap_or(t.base_default_next.clone());
                    (action_index[a.as_str()], node(&n))
                })
                .collect();
            table_index.insert(t.name.clone(), tables.len());
            tables.push(CTable {
                keys: t
                    .keys
                    .iter()
                    .map(|k| cx.slot(k))
                    .collect::<Result<_, _>>()?,
                actions: acts,
                default_action: action_index[t.default_action.as_str()],
                default_params: t.default_params.clone(),
                next,
                max_size: t.max_size,
            });
        }
        for c in &pl.conditionals {
            conds.push(CCond {
                expr: cx.expr(&c.expr)?,
                true_next: node(&c.true_next),
                false_next: node(&c.false_next),
            });
        }
        pipelines.insert(pl.name.clone(), node(&pl.init));
    }

    Ok(Compiled {
        layout,
        parser,
        deparse_order,
        actions,
        action_index,
        tables,
        table_index,
        conds,
        pipelines,
        registers,
        register_index,
    })
}
