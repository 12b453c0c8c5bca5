//! In-memory form of a compiled pipeline program.
//!
//! Everything here is normalized: arrays the file format treats as unordered
//! are kept sorted by name, so two programs that differ only in declaration
//! order compare equal.

use std::collections::BTreeMap;
use std::fmt;

/// Architecture a program is compiled against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    V1Quantum,
    /// Ingress/egress only; used for exercising the interpreter without the
    /// quantum blocks.
    Classical,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::V1Quantum => "v1quantum",
            Target::Classical => "classical",
        }
    }

    pub fn from_name(s: &str) -> Option<Target> {
        match s {
            "v1quantum" => Some(Target::V1Quantum),
            "classical" => Some(Target::Classical),
            _ => None,
        }
    }

    pub fn required_pipelines(self) -> &'static [&'static str] {
        match self {
            Target::V1Quantum => &["egress", "ingress", "qcontrol"],
            Target::Classical => &["egress", "ingress"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldRef {
    pub header: String,
    pub field: String,
}

impl FieldRef {
    pub fn new(header: impl Into<String>, field: impl Into<String>) -> Self {
        FieldRef {
            header: header.into(),
            field: field.into(),
        }
    }

    /// Parses `"header.field"`.
    pub fn parse(path: &str) -> Option<Self> {
        let (h, f) = path.split_once('.')?;
        if h.is_empty() || f.is_empty() || f.contains('.') {
            return None;
        }
        Some(FieldRef::new(h, f))
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.header, self.field)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderTypeDef {
    pub name: String,
    pub fields: Vec<(String, u32)>,
}

impl HeaderTypeDef {
    pub fn bit_width(&self) -> u32 {
        self.fields.iter().map(|(_, w)| *w).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderInstance {
    pub name: String,
    pub header_type: String,
    pub metadata: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParserOp {
    Extract(String),
    Set { dest: FieldRef, value: Expr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    /// `None` is the default transition.
    pub value: Option<u64>,
    /// `None` is the accept terminal.
    pub next_state: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseState {
    pub name: String,
    pub ops: Vec<ParserOp>,
    pub transition_key: Vec<FieldRef>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParserDef {
    pub name: String,
    pub init_state: String,
    pub states: Vec<ParseState>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeparserDef {
    pub name: String,
    pub order: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    BitNot,
    LogicalNot,
    /// Integer to boolean.
    D2b,
    /// Boolean to integer.
    B2d,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::BitNot => "~",
            UnOp::LogicalNot => "not",
            UnOp::D2b => "d2b",
            UnOp::B2d => "b2d",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "~" => UnOp::BitNot,
            "not" => UnOp::LogicalNot,
            "d2b" => UnOp::D2b,
            "b2d" => UnOp::B2d,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Shl,
    Shr,
    BitAnd,
    BitOr,
    BitXor,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 16] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Shl,
        BinOp::Shr,
        BinOp::BitAnd,
        BinOp::BitOr,
        BinOp::BitXor,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        BinOp::ALL.iter().copied().find(|op| op.symbol() == s)
    }
}

/// Action, conditional and parser expression tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(u64),
    Bool(bool),
    Field(FieldRef),
    /// Index into the enclosing action's runtime parameters.
    Param(usize),
    Valid(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn field(path: &str) -> Expr {
        Expr::Field(FieldRef::parse(path).unwrap_or_else(|| panic!("bad field path {path:?}")))
    }

    pub fn konst(v: u64) -> Expr {
        Expr::Const(v)
    }

    pub fn param(i: usize) -> Expr {
        Expr::Param(i)
    }

    pub fn valid(header: &str) -> Expr {
        Expr::Valid(header.to_string())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, r: Expr) -> Expr {
        Expr::bin(BinOp::Add, self, r)
    }

    pub fn xor(self, r: Expr) -> Expr {
        Expr::bin(BinOp::BitXor, self, r)
    }

    pub fn eq_to(self, r: Expr) -> Expr {
        Expr::bin(BinOp::Eq, self, r)
    }

    pub fn ne_to(self, r: Expr) -> Expr {
        Expr::bin(BinOp::Ne, self, r)
    }

    pub fn ge(self, r: Expr) -> Expr {
        Expr::bin(BinOp::Ge, self, r)
    }

    pub fn and(self, r: Expr) -> Expr {
        Expr::bin(BinOp::And, self, r)
    }

    pub fn or(self, r: Expr) -> Expr {
        Expr::bin(BinOp::Or, self, r)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Expr {
        Expr::Unary(UnOp::LogicalNot, Box::new(self))
    }

    pub fn ternary(cond: Expr, t: Expr, f: Expr) -> Expr {
        Expr::Ternary(Box::new(cond), Box::new(t), Box::new(f))
    }

    /// Visits every field reference in the tree.
    pub fn for_each_field(&self, f: &mut dyn FnMut(&FieldRef)) {
        match self {
            Expr::Field(r) => f(r),
            Expr::Unary(_, e) => e.for_each_field(f),
            Expr::Binary(_, l, r) => {
                l.for_each_field(f);
                r.for_each_field(f);
            }
            Expr::Ternary(c, t, e) => {
                c.for_each_field(f);
                t.for_each_field(f);
                e.for_each_field(f);
            }
            Expr::Const(_) | Expr::Bool(_) | Expr::Param(_) | Expr::Valid(_) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Primitive {
    Assign {
        dest: FieldRef,
        value: Expr,
    },
    RegisterRead {
        dest: FieldRef,
        register: String,
        index: Expr,
    },
    RegisterWrite {
        register: String,
        index: Expr,
        value: Expr,
    },
    AddHeader(String),
    RemoveHeader(String),
    MarkToDrop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionDef {
    pub name: String,
    pub params: Vec<(String, u32)>,
    pub primitives: Vec<Primitive>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub name: String,
    /// Exact-match key fields, in lookup order.
    pub keys: Vec<FieldRef>,
    /// Sorted by name.
    pub actions: Vec<String>,
    pub default_action: String,
    pub default_params: Vec<u64>,
    /// Successor node per action; every action in `actions` has an entry.
    pub next_tables: BTreeMap<String, Option<String>>,
    pub base_default_next: Option<String>,
    pub max_size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalDef {
    pub name: String,
    pub expr: Expr,
    pub true_next: Option<String>,
    pub false_next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineDef {
    pub name: String,
    pub init: Option<String>,
    pub tables: Vec<TableDef>,
    pub conditionals: Vec<ConditionalDef>,
}

impl PipelineDef {
    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterArrayDef {
    pub name: String,
    pub bitwidth: u32,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDef {
    pub name: String,
    /// Sorted by value.
    pub members: Vec<(String, u64)>,
}

/// A validated program. Construct through [`super::load_program`] or
/// [`super::ProgramBuilder`]; both normalize and validate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineProgram {
    pub target: Target,
    pub header_types: Vec<HeaderTypeDef>,
    pub headers: Vec<HeaderInstance>,
    pub parsers: Vec<ParserDef>,
    pub deparsers: Vec<DeparserDef>,
    pub actions: Vec<ActionDef>,
    pub pipelines: Vec<PipelineDef>,
    pub register_arrays: Vec<RegisterArrayDef>,
    pub enums: Vec<EnumDef>,
}

impl PipelineProgram {
    pub fn pipeline(&self, name: &str) -> Option<&PipelineDef> {
        self.pipelines.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionDef> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn header_type(&self, name: &str) -> Option<&HeaderTypeDef> {
        self.header_types.iter().find(|t| t.name == name)
    }

    pub fn header(&self, name: &str) -> Option<&HeaderInstance> {
        self.headers.iter().find(|h| h.name == name)
    }

    pub fn register_array(&self, name: &str) -> Option<&RegisterArrayDef> {
        self.register_arrays.iter().find(|r| r.name == name)
    }

    pub fn table_count(&self) -> usize {
        self.pipelines.iter().map(|p| p.tables.len()).sum()
    }

    /// Finds a table by name across all pipelines.
    pub fn find_table(&self, name: &str) -> Option<(&PipelineDef, &TableDef)> {
        self.pipelines
            .iter()
            .find_map(|p| p.table(name).map(|t| (p, t)))
    }

    /// Sorts every order-insensitive collection. Idempotent.
    pub fn normalize(&mut self) {
        self.header_types.sort_by(|a, b| a.name.cmp(&b.name));
        self.headers.sort_by(|a, b| a.name.cmp(&b.name));
        self.parsers.sort_by(|a, b| a.name.cmp(&b.name));
        for p in &mut self.parsers {
            p.states.sort_by(|a, b| a.name.cmp(&b.name));
        }
        self.deparsers.sort_by(|a, b| a.name.cmp(&b.name));
        self.actions.sort_by(|a, b| a.name.cmp(&b.name));
        self.pipelines.sort_by(|a, b| a.name.cmp(&b.name));
        for p in &mut self.pipelines {
            p.tables.sort_by(|a, b| a.name.cmp(&b.name));
            p.conditionals.sort_by(|a, b| a.name.cmp(&b.name));
            for t in &mut p.tables {
                t.actions.sort();
                t.actions.dedup();
                for a in &t.actions {
                    t.next_tables
                        .entry(a.clone())
                        .or_insert_with(|| t.base_default_next.clone());
                }
            }
        }
        self.register_arrays.sort_by(|a, b| a.name.cmp(&b.name));
        self.enums.sort_by(|a, b| a.name.cmp(&b.name));
        for e in &mut self.enums {
            e.members
                .sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        }
    }
}
