//! Imperative construction of [`PipelineProgram`]s without a compiler.
//!
//! ```
//! use v1q_core::bmv2::{ProgramBuilder, ActionBuilder, TableBuilder, Target};
//! use v1q_core::bmv2::ir::Expr;
//!
//! let mut b = ProgramBuilder::new(Target::V1Quantum);
//! b.header_type("h_t", &[("x", 16)]);
//! b.header("h", "h_t");
//! b.action(ActionBuilder::new("set_x").param("v", 16).assign("h.x", Expr::param(0)));
//! b.action(ActionBuilder::new("noop"));
//! b.table("ingress", TableBuilder::new("t").key("h.x").action("set_x").action("noop").default_action("noop", &[]));
//! b.init("ingress", "t");
//! let program = b.finish().unwrap();
//! assert_eq!(program.table_count(), 1);
//! ```

use std::collections::BTreeMap;

use super::error::LoadError;
use super::ir::*;
use super::validate::validate;

fn field(path: &str) -> FieldRef {
    FieldRef::parse(path).unwrap_or_else(|| panic!("bad field path {path:?}"))
}

#[derive(Debug, Clone)]
pub struct StateBuilder(ParseState);

impl StateBuilder {
    pub fn new(name: &str) -> Self {
        StateBuilder(ParseState {
            name: name.to_string(),
            ops: Vec::new(),
            transition_key: Vec::new(),
            transitions: Vec::new(),
        })
    }

    pub fn extract(mut self, header: &str) -> Self {
        self.0.ops.push(ParserOp::Extract(header.to_string()));
        self
    }

    pub fn set(mut self, dest: &str, value: Expr) -> Self {
        self.0.ops.push(ParserOp::Set {
            dest: field(dest),
            value,
        });
        self
    }

    pub fn key(mut self, path: &str) -> Self {
        self.0.transition_key.push(field(path));
        self
    }

    pub fn on(mut self, value: u64, next: &str) -> Self {
        self.0.transitions.push(Transition {
            value: Some(value),
            next_state: Some(next.to_string()),
        });
        self
    }

    pub fn on_accept(mut self, value: u64) -> Self {
        self.0.transitions.push(Transition {
            value: Some(value),
            next_state: None,
        });
        self
    }

    pub fn default(mut self, next: &str) -> Self {
        self.0.transitions.push(Transition {
            value: None,
            next_state: Some(next.to_string()),
        });
        self
    }

    pub fn accept(mut self) -> Self {
        self.0.transitions.push(Transition {
            value: None,
            next_state: None,
        });
        self
    }
}

#[derive(Debug, Clone)]
pub struct ActionBuilder(ActionDef);

impl ActionBuilder {
    pub fn new(name: &str) -> Self {
        ActionBuilder(ActionDef {
            name: name.to_string(),
            params: Vec::new(),
            primitives: Vec::new(),
        })
    }

    pub fn param(mut self, name: &str, width: u32) -> Self {
        self.0.params.push((name.to_string(), width));
        self
    }

    pub fn assign(mut self, dest: &str, value: Expr) -> Self {
        self.0.primitives.push(Primitive::Assign {
            dest: field(dest),
            value,
        });
        self
    }

    pub fn register_read(mut self, dest: &str, register: &str, index: Expr) -> Self {
        self.0.primitives.push(Primitive::RegisterRead {
            dest: field(dest),
            register: register.to_string(),
            index,
        });
        self
    }

    pub fn register_write(mut self, register: &str, index: Expr, value: Expr) -> Self {
        self.0.primitives.push(Primitive::RegisterWrite {
            register: register.to_string(),
            index,
            value,
        });
        self
    }

    pub fn add_header(mut self, header: &str) -> Self {
        self.0
            .primitives
            .push(Primitive::AddHeader(header.to_string()));
        self
    }

    pub fn remove_header(mut self, header: &str) -> Self {
        self.0
            .primitives
            .push(Primitive::RemoveHeader(header.to_string()));
        self
    }

    pub fn drop(mut self) -> Self {
        self.0.primitives.push(Primitive::MarkToDrop);
        self
    }
}

#[derive(Debug, Clone)]
pub struct TableBuilder(TableDef);

impl TableBuilder {
    pub fn new(name: &str) -> Self {
        TableBuilder(TableDef {
            name: name.to_string(),
            keys: Vec::new(),
            actions: Vec::new(),
            default_action: String::new(),
            default_params: Vec::new(),
            next_tables: BTreeMap::new(),
            base_default_next: None,
            max_size: 1024,
        })
    }

    pub fn key(mut self, path: &str) -> Self {
        self.0.keys.push(field(path));
        self
    }

    pub fn action(mut self, name: &str) -> Self {
        self.0.actions.push(name.to_string());
        self
    }

    /// Sets the default action, adding it to the action list if needed.
    pub fn default_action(mut self, name: &str, params: &[u64]) -> Self {
        if !self.0.actions.iter().any(|a| a == name) {
            self.0.actions.push(name.to_string());
        }
        self.0.default_action = name.to_string();
        self.0.default_params = params.to_vec();
        self
    }

    /// Successor after `action` runs. Overrides [`Self::next`] for that action.
    pub fn on_action(mut self, action: &str, next: Option<&str>) -> Self {
        self.0
            .next_tables
            .insert(action.to_string(), next.map(str::to_string));
        self
    }

    /// Successor for every action without an explicit `on_action`.
    pub fn next(mut self, next: Option<&str>) -> Self {
        self.0.base_default_next = next.map(str::to_string);
        self
    }

    pub fn max_size(mut self, n: u32) -> Self {
        self.0.max_size = n;
        self
    }
}

pub struct ProgramBuilder {
    program: PipelineProgram,
}

impl ProgramBuilder {
    /// Starts a program with the target's required pipelines, all empty.
    pub fn new(target: Target) -> Self {
        let pipelines = target
            .required_pipelines()
            .iter()
            .map(|n| PipelineDef {
                name: n.to_string(),
                init: None,
                tables: Vec::new(),
                conditionals: Vec::new(),
            })
            .collect();
        ProgramBuilder {
            program: PipelineProgram {
                target,
                header_types: Vec::new(),
                headers: Vec::new(),
                parsers: Vec::new(),
                deparsers: Vec::new(),
                actions: Vec::new(),
                pipelines,
                register_arrays: Vec::new(),
                enums: Vec::new(),
            },
        }
    }

    pub fn header_type(&mut self, name: &str, fields: &[(&str, u32)]) -> &mut Self {
        self.program.header_types.push(HeaderTypeDef {
            name: name.to_string(),
            fields: fields.iter().map(|(n, w)| (n.to_string(), *w)).collect(),
        });
        self
    }

    pub fn header(&mut self, name: &str, header_type: &str) -> &mut Self {
        self.program.headers.push(HeaderInstance {
            name: name.to_string(),
            header_type: header_type.to_string(),
            metadata: false,
        });
        self
    }

    pub fn metadata(&mut self, name: &str, header_type: &str) -> &mut Self {
        self.program.headers.push(HeaderInstance {
            name: name.to_string(),
            header_type: header_type.to_string(),
            metadata: true,
        });
        self
    }

    pub fn register_array(&mut self, name: &str, bitwidth: u32, size: u32) -> &mut Self {
        self.program.register_arrays.push(RegisterArrayDef {
            name: name.to_string(),
            bitwidth,
            size,
        });
        self
    }

    pub fn enum_def(&mut self, name: &str, members: &[(&str, u64)]) -> &mut Self {
        self.program.enums.push(EnumDef {
            name: name.to_string(),
            members: members.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        });
        self
    }

    /// Adds a parse state to the parser named `parser`, creating the parser
    /// (with `state` as its start) on first use.
    pub fn parse_state(&mut self, parser: &str, state: StateBuilder) -> &mut Self {
        match self.program.parsers.iter_mut().find(|p| p.name == parser) {
            Some(p) => p.states.push(state.0),
            None => self.program.parsers.push(ParserDef {
                name: parser.to_string(),
                init_state: state.0.name.clone(),
                states: vec![state.0],
            }),
        }
        self
    }

    pub fn deparser(&mut self, name: &str, order: &[&str]) -> &mut Self {
        self.program.deparsers.push(DeparserDef {
            name: name.to_string(),
            order: order.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn action(&mut self, a: ActionBuilder) -> &mut Self {
        self.program.actions.push(a.0);
        self
    }

    fn pipeline_mut(&mut self, pipeline: &str) -> &mut PipelineDef {
        if let Some(i) = self
            .program
            .pipelines
            .iter()
            .position(|p| p.name == pipeline)
        {
            return &mut self.program.pipelines[i];
        }
        self.program.pipelines.push(PipelineDef {
            name: pipeline.to_string(),
            init: None,
            tables: Vec::new(),
            conditionals: Vec::new(),
        });
        self.program.pipelines.last_mut().expect("just pushed")
    }

    pub fn table(&mut self, pipeline: &str, t: TableBuilder) -> &mut Self {
        self.pipeline_mut(pipeline).tables.push(t.0);
        self
    }

    pub fn conditional(
        &mut self,
        pipeline: &str,
        name: &str,
        expr: Expr,
        true_next: Option<&str>,
        false_next: Option<&str>,
    ) -> &mut Self {
        self.pipeline_mut(pipeline)
            .conditionals
            .push(ConditionalDef {
                name: name.to_string(),
                expr,
                true_next: true_next.map(str::to_string),
                false_next: false_next.map(str::to_string),
            });
        self
    }

    pub fn init(&mut self, pipeline: &str, node: &str) -> &mut Self {
        self.pipeline_mut(pipeline).init = Some(node.to_string());
        self
    }

    /// Normalizes and validates. Errors are the same as the loader's.
    pub fn finish(&self) -> Result<PipelineProgram, LoadError> {
        let mut p = self.program.clone();
        p.normalize();
        validate(&p)?;
        Ok(p)
    }
}
