//! Pipeline interpreter: parser, match+action pipelines, deparser, registers
//! and the table-management API.

mod compile;
mod packet;

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::bmv2::ir::{BinOp, Expr, UnOp};
use crate::bmv2::target::STANDARD_METADATA;
use crate::bmv2::PipelineProgram;

use compile::{CAction, CExpr, CPrim, Compiled, Node};
pub use packet::{mask, truncate, HeaderLayout, HeaderValue, Layout, PacketInstance};

/// `egress_spec` value that drops the packet.
pub const DROP_PORT: u64 = 511;

const MAX_PARSE_STEPS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("parse error in state `{state}`: {reason}")]
    Parse { state: String, reason: String },
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{table}` has no action `{action}`")]
    UnknownAction { table: String, action: String },
    #[error("table `{table}` takes {expected} key fields, {got} given")]
    KeyArityMismatch {
        table: String,
        expected: usize,
        got: usize,
    },
    #[error("action `{action}` takes {expected} parameters, {got} given")]
    ParamArityMismatch {
        action: String,
        expected: usize,
        got: usize,
    },
    #[error("{what}: value {value} does not fit in {width} bits")]
    ValueTooWide {
        what: String,
        value: u64,
        width: u32,
    },
    #[error("table `{0}` is full")]
    TableFull(String),
    #[error("unknown register array `{0}`")]
    UnknownRegister(String),
    #[error("index {index} out of range for register array `{array}` of size {size}")]
    IndexOutOfRange {
        array: String,
        index: u64,
        size: usize,
    },
    #[error("unknown pipeline `{0}`")]
    UnknownPipeline(String),
}

/// Result of evaluating an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Int(u64),
    Bool(bool),
}

impl Value {
    pub fn as_u64(self) -> u64 {
        match self {
            Value::Int(v) => v,
            Value::Bool(b) => b as u64,
        }
    }

    pub fn as_bool(self) -> bool {
        match self {
            Value::Int(v) => v != 0,
            Value::Bool(b) => b,
        }
    }
}

/// A control-plane table entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableEntry {
    pub table: String,
    pub key: Vec<u64>,
    pub action: String,
    pub params: Vec<u64>,
}

impl TableEntry {
    pub fn new(table: &str, key: &[u64], action: &str, params: &[u64]) -> Self {
        TableEntry {
            table: table.to_string(),
            key: key.to_vec(),
            action: action.to_string(),
            params: params.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Installed {
    action: usize,
    params: Vec<u64>,
}

/// Per-device execution state: the program plus its mutable tables and
/// register arrays.
#[derive(Clone)]
pub struct ProcessorState {
    program: Arc<PipelineProgram>,
    compiled: Arc<Compiled>,
    tables: Vec<HashMap<Vec<u64>, Installed>>,
    registers: Vec<Vec<u64>>,
}

impl std::fmt::Debug for ProcessorState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessorState")
            .field(
                "tables",
                &self.tables.iter().map(HashMap::len).collect::<Vec<_>>(),
            )
            .finish_non_exhaustive()
    }
}

/// Snapshot of everything a pipeline may mutate outside the packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSnapshot {
    pub registers: Vec<Vec<u64>>,
    pub table_sizes: Vec<usize>,
}

struct ExecCx<'a> {
    params: &'a [u64],
}

impl ProcessorState {
    pub fn new(program: Arc<PipelineProgram>) -> Result<Self, RuntimeError> {
        let compiled = Arc::new(compile::compile(&program)?);
        let tables = vec![HashMap::new(); compiled.tables.len()];
        let registers = compiled.registers.iter().map(|r| vec![0; r.size]).collect();
        Ok(ProcessorState {
            program,
            compiled,
            tables,
            registers,
        })
    }

    pub fn program(&self) -> &Arc<PipelineProgram> {
        &self.program
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.compiled.layout
    }

    pub fn new_packet(&self) -> PacketInstance {
        PacketInstance::empty(self.compiled.layout.clone())
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            registers: self.registers.clone(),
            table_sizes: self.tables.iter().map(HashMap::len).collect(),
        }
    }

    // ----- parser / deparser -----

    pub fn parse(&self, raw: &[u8]) -> Result<PacketInstance, RuntimeError> {
        let mut pkt = self.new_packet();
        let Some(parser) = &self.compiled.parser else {
            pkt.payload = raw.to_vec();
            return Ok(pkt);
        };
        let mut reader = packet::BitReader::new(raw);
        let mut state = Some(parser.init);
        let mut steps = 0;
        let cx = ExecCx { params: &[] };
        while let Some(si) = state {
            steps += 1;
            let s = &parser.states[si];
            if steps > MAX_PARSE_STEPS {
                return Err(RuntimeError::Parse {
                    state: s.name.clone(),
                    reason: "parser did not terminate".into(),
                });
            }
            for op in &s.ops {
                match op {
                    compile::COp::Extract(h) => {
                        let hl = &self.compiled.layout.headers[*h];
                        if pkt.headers[*h].valid {
                            return Err(RuntimeError::Parse {
                                state: s.name.clone(),
                                reason: format!("header `{}` extracted twice", hl.name),
                            });
                        }
                        let need = hl.bit_width() as usize;
                        if reader.remaining() < need {
                            return Err(RuntimeError::Parse {
                                state: s.name.clone(),
                                reason: format!(
                                    "packet too short to extract `{}`: need {} bits, {} left",
                                    hl.name,
                                    need,
                                    reader.remaining()
                                ),
                            });
                        }
                        let values: Vec<u64> =
                            hl.fields.iter().map(|(_, w)| reader.read(*w)).collect();
                        let hv = &mut pkt.headers[*h];
                        hv.fields = values;
                        hv.valid = true;
                    }
                    compile::COp::Set(slot, e) => {
                        let v = self.eval(e, &pkt, &cx).map_err(|e| RuntimeError::Parse {
                            state: s.name.clone(),
                            reason: e.to_string(),
                        })?;
                        pkt.write(slot.h, slot.f, slot.width, v.as_u64());
                    }
                }
            }
            let mut key = 0u64;
            for slot in &s.key {
                let v = pkt.read(slot.h, slot.f).map_err(|e| RuntimeError::Parse {
                    state: s.name.clone(),
                    reason: e.to_string(),
                })?;
                key = if slot.width >= 64 {
                    v
                } else {
                    (key << slot.width) | v
                };
            }
            let hit = s
                .transitions
                .iter()
                .find(|(v, _)| *v == Some(key))
                .or_else(|| s.transitions.iter().find(|(v, _)| v.is_none()));
            match hit {
                Some((_, next)) => state = *next,
                None => {
                    return Err(RuntimeError::Parse {
                        state: s.name.clone(),
                        reason: format!("no transition for key {key:#x}"),
                    })
                }
            }
        }
        pkt.payload = raw[reader.byte_pos()..].to_vec();
        Ok(pkt)
    }

    /// Valid headers in deparser order, then the payload. Big-endian,
    /// MSB-first, no padding.
    pub fn deparse(&self, pkt: &PacketInstance) -> Vec<u8> {
        let mut w = packet::BitWriter::default();
        for &h in &self.compiled.deparse_order {
            let hv = &pkt.headers[h];
            if !hv.valid {
                continue;
            }
            for ((_, width), v) in self.compiled.layout.headers[h]
                .fields
                .iter()
                .zip(&hv.fields)
            {
                w.write(*v, *width);
            }
        }
        let mut out = w.finish();
        out.extend_from_slice(&pkt.payload);
        out
    }

    // ----- pipelines -----

    pub fn execute_pipeline(
        &mut self,
        name: &str,
        pkt: &mut PacketInstance,
    ) -> Result<(), RuntimeError> {
        let compiled = self.compiled.clone();
        let mut node = *compiled
            .pipelines
            .get(name)
            .ok_or_else(|| RuntimeError::UnknownPipeline(name.to_string()))?;
        while let Some(n) = node {
            node = match n {
                Node::Cond(i) => {
                    let c = &compiled.conds[i];
                    if self.eval(&c.expr, pkt, &ExecCx { params: &[] })?.as_bool() {
                        c.true_next
                    } else {
                        c.false_next
                    }
                }
                Node::Table(i) => {
                    let t = &compiled.tables[i];
                    let mut key = Vec::with_capacity(t.keys.len());
                    for s in &t.keys {
                        key.push(pkt.read(s.h, s.f)?);
                    }
                    let (action, params) = match self.tables[i].get(&key) {
                        Some(e) => (e.action, e.params.clone()),
                        None => (t.default_action, t.default_params.clone()),
                    };
                    self.run_action(&compiled.actions[action], &params, pkt)?;
                    t.next.get(&action).copied().flatten()
                }
            };
        }
        Ok(())
    }

    fn run_action(
        &mut self,
        a: &CAction,
        params: &[u64],
        pkt: &mut PacketInstance,
    ) -> Result<(), RuntimeError> {
        let cx = ExecCx { params };
        for p in &a.prims {
            match p {
                CPrim::Assign(slot, e) => {
                    let v = self.eval(e, pkt, &cx)?;
                    pkt.write(slot.h, slot.f, slot.width, v.as_u64());
                }
                CPrim::RegisterRead(slot, r, idx) => {
                    let i = self.eval(idx, pkt, &cx)?.as_u64();
                    let v = self.register_read_at(*r, i)?;
                    pkt.write(slot.h, slot.f, slot.width, v);
                }
                CPrim::RegisterWrite(r, idx, val) => {
                    let i = self.eval(idx, pkt, &cx)?.as_u64();
                    let v = self.eval(val, pkt, &cx)?.as_u64();
                    self.register_write_at(*r, i, v)?;
                }
                CPrim::AddHeader(h) => pkt.set_valid_at(*h, true),
                CPrim::RemoveHeader(h) => pkt.set_valid_at(*h, false),
                CPrim::MarkToDrop => {
                    let (h, f, w) = self
                        .compiled
                        .layout
                        .resolve(STANDARD_METADATA, "egress_spec")
                        .expect("standard metadata is intrinsic");
                    pkt.write(h, f, w, DROP_PORT);
                }
            }
        }
        Ok(())
    }

    fn eval(&self, e: &CExpr, pkt: &PacketInstance, cx: &ExecCx) -> Result<Value, RuntimeError> {
        Ok(match e {
            CExpr::Const(v) => Value::Int(*v),
            CExpr::Bool(b) => Value::Bool(*b),
            CExpr::Field(h, f) => Value::Int(pkt.read(*h, *f)?),
            CExpr::Param(i) => Value::Int(*cx.params.get(*i).ok_or_else(|| {
                RuntimeError::Evaluation(format!("runtime parameter {i} not supplied"))
            })?),
            CExpr::Valid(h) => Value::Bool(pkt.headers[*h].valid),
            CExpr::Unary(op, a) => {
                let v = self.eval(a, pkt, cx)?;
                match op {
                    UnOp::BitNot => Value::Int(!v.as_u64()),
                    UnOp::LogicalNot => Value::Bool(!v.as_bool()),
                    UnOp::D2b => Value::Bool(v.as_bool()),
                    UnOp::B2d => Value::Int(v.as_u64()),
                }
            }
            CExpr::Binary(op, l, r) => {
                let a = self.eval(l, pkt, cx)?;
                // short-circuit
                match op {
                    BinOp::And if !a.as_bool() => return Ok(Value::Bool(false)),
                    BinOp::Or if a.as_bool() => return Ok(Value::Bool(true)),
                    _ => {}
                }
                let b = self.eval(r, pkt, cx)?;
                binary(*op, a, b)
            }
            CExpr::Ternary(c, t, f) => {
                if self.eval(c, pkt, cx)?.as_bool() {
                    self.eval(t, pkt, cx)?
                } else {
                    self.eval(f, pkt, cx)?
                }
            }
        })
    }

    /// Evaluates an expression against a packet. `params` are the runtime
    /// parameters visible to `Expr::Param`.
    pub fn eval_expression(
        &self,
        e: &Expr,
        pkt: &PacketInstance,
        params: &[u64],
    ) -> Result<Value, RuntimeError> {
        let ce = compile::compile_expr(&self.compiled, e)?;
        self.eval(&ce, pkt, &ExecCx { params })
    }

    // ----- tables -----

    fn table_idx(&self, table: &str) -> Result<usize, RuntimeError> {
        self.compiled
            .table_index
            .get(table)
            .copied()
            .ok_or_else(|| RuntimeError::UnknownTable(table.to_string()))
    }

    fn check_entry(&self, entry: &TableEntry) -> Result<(usize, usize), RuntimeError> {
        let ti = self.table_idx(&entry.table)?;
        let t = &self.compiled.tables[ti];
        if entry.key.len() != t.keys.len() {
            return Err(RuntimeError::KeyArityMismatch {
                table: entry.table.clone(),
                expected: t.keys.len(),
                got: entry.key.len(),
            });
        }
        for (v, s) in entry.key.iter().zip(&t.keys) {
            if *v > mask(s.width) {
                return Err(RuntimeError::ValueTooWide {
                    what: format!("key of `{}`", entry.table),
                    value: *v,
                    width: s.width,
                });
            }
        }
        let ai = self
            .compiled
            .action_index
            .get(&entry.action)
            .copied()
            .filter(|a| t.actions.contains(a))
            .ok_or_else(|| RuntimeError::UnknownAction {
                table: entry.table.clone(),
                action: entry.action.clone(),
            })?;
        let a = &self.compiled.actions[ai];
        if a.param_widths.len() != entry.params.len() {
            return Err(RuntimeError::ParamArityMismatch {
                action: a.name.clone(),
                expected: a.param_widths.len(),
                got: entry.params.len(),
            });
        }
        for (v, w) in entry.params.iter().zip(&a.param_widths) {
            if *v > mask(*w) {
                return Err(RuntimeError::ValueTooWide {
                    what: format!("parameter of `{}`", a.name),
                    value: *v,
                    width: *w,
                });
            }
        }
        Ok((ti, ai))
    }

    /// Inserts an entry, replacing any entry with the same key.
    pub fn table_insert(&mut self, entry: &TableEntry) -> Result<(), RuntimeError> {
        let (ti, ai) = self.check_entry(entry)?;
        let max = self.compiled.tables[ti].max_size as usize;
        let table = &mut self.tables[ti];
        if !table.contains_key(&entry.key) && table.len() >= max {
            return Err(RuntimeError::TableFull(entry.table.clone()));
        }
        table.insert(
            entry.key.clone(),
            Installed {
                action: ai,
                params: entry.params.clone(),
            },
        );
        Ok(())
    }

    /// Removes the entry for `key`. Returns whether one was present.
    pub fn table_delete(&mut self, table: &str, key: &[u64]) -> Result<bool, RuntimeError> {
        let ti = self.table_idx(table)?;
        let expected = self.compiled.tables[ti].keys.len();
        if key.len() != expected {
            return Err(RuntimeError::KeyArityMismatch {
                table: table.to_string(),
                expected,
                got: key.len(),
            });
        }
        Ok(self.tables[ti].remove(key).is_some())
    }

    /// Action and parameters a lookup of `key` would select.
    pub fn table_lookup(
        &self,
        table: &str,
        key: &[u64],
    ) -> Result<(String, Vec<u64>), RuntimeError> {
        let ti = self.table_idx(table)?;
        let t = &self.compiled.tables[ti];
        Ok(match self.tables[ti].get(key) {
            Some(e) => (
                self.compiled.actions[e.action].name.clone(),
                e.params.clone(),
            ),
            None => (
                self.compiled.actions[t.default_action].name.clone(),
                t.default_params.clone(),
            ),
        })
    }

    /// Installed entries of a table, sorted by key.
    pub fn table_entries(&self, table: &str) -> Result<Vec<TableEntry>, RuntimeError> {
        let ti = self.table_idx(table)?;
        let mut out: Vec<TableEntry> = self.tables[ti]
            .iter()
            .map(|(k, e)| TableEntry {
                table: table.to_string(),
                key: k.clone(),
                action: self.compiled.actions[e.action].name.clone(),
                params: e.params.clone(),
            })
            .collect();
        out.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(out)
    }

    pub fn table_len(&self, table: &str) -> Result<usize, RuntimeError> {
        Ok(self.tables[self.table_idx(table)?].len())
    }

    // ----- registers -----

    fn register_idx(&self, array: &str) -> Result<usize, RuntimeError> {
        self.compiled
            .register_index
            .get(array)
            .copied()
            .ok_or_else(|| RuntimeError::UnknownRegister(array.to_string()))
    }

    fn register_read_at(&self, r: usize, index: u64) -> Result<u64, RuntimeError> {
        let cells = &self.registers[r];
        cells
            .get(index as usize)
            .copied()
            .ok_or_else(|| RuntimeError::IndexOutOfRange {
                array: self.compiled.registers[r].name.clone(),
                index,
                size: cells.len(),
            })
    }

    fn register_write_at(&mut self, r: usize, index: u64, value: u64) -> Result<(), RuntimeError> {
        let width = self.compiled.registers[r].width;
        let size = self.registers[r].len();
        match self.registers[r].get_mut(index as usize) {
            Some(cell) => {
                *cell = truncate(value, width);
                Ok(())
            }
            None => Err(RuntimeError::IndexOutOfRange {
                array: self.compiled.registers[r].name.clone(),
                index,
                size,
            }),
        }
    }

    pub fn register_read(&self, array: &str, index: u64) -> Result<u64, RuntimeError> {
        self.register_read_at(self.register_idx(array)?, index)
    }

    /// Writes a cell, truncating to the array's width.
    pub fn register_write(
        &mut self,
        array: &str,
        index: u64,
        value: u64,
    ) -> Result<(), RuntimeError> {
        let r = self.register_idx(array)?;
        self.register_write_at(r, index, value)
    }
}

/// Binary operators over unsigned 64-bit values. Arithmetic wraps modulo
/// 2^64; assignment then truncates to the destination width.
pub fn binary(op: BinOp, a: Value, b: Value) -> Value {
    let (x, y) = (a.as_u64(), b.as_u64());
    match op {
        BinOp::Add => Value::Int(x.wrapping_add(y)),
        BinOp::Sub => Value::Int(x.wrapping_sub(y)),
        BinOp::Mul => Value::Int(x.wrapping_mul(y)),
        BinOp::Shl => Value::Int(if y >= 64 { 0 } else { x << y }),
        BinOp::Shr => Value::Int(if y >= 64 { 0 } else { x >> y }),
        BinOp::BitAnd => Value::Int(x & y),
        BinOp::BitOr => Value::Int(x | y),
        BinOp::BitXor => Value::Int(x ^ y),
        BinOp::Eq => Value::Bool(x == y),
        BinOp::Ne => Value::Bool(x != y),
        BinOp::Lt => Value::Bool(x < y),
        BinOp::Le => Value::Bool(x <= y),
        BinOp::Gt => Value::Bool(x > y),
        BinOp::Ge => Value::Bool(x >= y),
        BinOp::And => Value::Bool(a.as_bool() && b.as_bool()),
        BinOp::Or => Value::Bool(a.as_bool() || b.as_bool()),
    }
}
