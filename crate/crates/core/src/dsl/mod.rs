//! Expression language for candidate state-representation and intrinsic-reward
//! programs.
//!
//! A program is a list of `out: <expr>` lines. Representation programs map the
//! source observation `s` to extra dimensions; reward programs map the
//! augmented state (source followed by extra dimensions) to one scalar.
//!
//! ```text
//! # distance from agent to target
//! out: sqrt((s[0] - s[2])^2 + (s[1] - s[3])^2)
//! ```
//!
//! Evaluation never fails on domain errors: `sqrt` and `log` clamp their
//! argument, division clamps the denominator away from zero, and outputs are
//! clamped to `[-1e6, 1e6]`. Only a NaN that survives those guards is
//! reported, and callers treat it as a disqualified candidate.

mod eval;
mod format;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use eval::{DENOMINATOR_FLOOR, LOG_FLOOR, OUTPUT_CLAMP};
pub use format::format_expr;

/// Default cap on the number of dimensions a representation program may add.
pub const MAX_REPR_OUTPUTS: usize = 16;

/// Grammar reference embedded in prompts sent to the generator.
pub const GRAMMAR: &str = "\
A program is one or more lines of the form `out: <expr>`; each line defines one output value.
<expr> is infix arithmetic over real numbers:
  - state references `s[i]` with a non-negative integer index i
  - decimal literals such as 2, 0.5 or 1e-3
  - binary operators + - * / and ^ (real power), parentheses, unary minus
  - precedence from tightest to loosest: ^ (right-associative), unary -, * /, + -
  - functions: sin(a), cos(a), tan(a), tanh(a), abs(a), sqrt(a), exp(a), log(a), min(a, b), max(a, b)
Lines starting with # are comments. There are no variables, loops or conditionals.
sqrt and log clamp their argument into the valid domain, division clamps the denominator away from zero,
and every output is clamped to [-1000000, 1000000].";

/// Byte range plus line/column of a node in its source line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Abs,
    Sqrt,
    Exp,
    Log,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Tanh,
        Func::Abs,
        Func::Sqrt,
        Func::Exp,
        Func::Log,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Const(f64),
    State(usize),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Expression node. Equality is structural and ignores spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr {
            kind,
            span: Span::default(),
        }
    }

    pub fn constant(v: f64) -> Self {
        Expr::new(ExprKind::Const(v))
    }

    pub fn state(i: usize) -> Self {
        Expr::new(ExprKind::State(i))
    }

    pub fn neg(e: Expr) -> Self {
        Expr::new(ExprKind::Neg(Box::new(e)))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    pub fn call(func: Func, args: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Call(func, args))
    }

    /// Calls `f` on every state reference in the tree, with its span.
    pub fn visit_state_refs(&self, f: &mut impl FnMut(usize, Span)) {
        match &self.kind {
            ExprKind::Const(_) => {}
            ExprKind::State(i) => f(*i, self.span),
            ExprKind::Neg(e) => e.visit_state_refs(f),
            ExprKind::Binary(_, l, r) => {
                l.visit_state_refs(f);
                r.visit_state_refs(f);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.visit_state_refs(f)),
        }
    }

    pub fn depth(&self) -> usize {
        match &self.kind {
            ExprKind::Const(_) | ExprKind::State(_) => 1,
            ExprKind::Neg(e) => 1 + e.depth(),
            ExprKind::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
            ExprKind::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("state index s[{index}] out of range for input dimension {input_dim} (line {line}, column {col})")]
    IndexOutOfRange {
        index: usize,
        input_dim: usize,
        line: usize,
        col: usize,
    },
    #[error("program has no `out:` lines")]
    EmptyProgram,
    #[error("program has {count} outputs, more than the limit of {limit}")]
    TooManyOutputs { count: usize, limit: usize },
    #[error("reward program must have exactly one `out:` line, found {0}")]
    RewardOutputCount(usize),
    #[error("reward program must reference at least one added dimension s[{source_dim}]..s[{}]", .input_dim - 1)]
    RewardIgnoresAddedDims { source_dim: usize, input_dim: usize },
    #[error("input has {actual} values, program expects {expected}")]
    InputLength { expected: usize, actual: usize },
    #[error("output {output} evaluated to NaN")]
    NonFinite { output: usize },
}

/// Compiled state-representation program `F: S -> S^r`.
#[derive(Debug, Clone)]
pub struct ReprProgram {
    input_dim: usize,
    outputs: Vec<Expr>,
    source_text: String,
    compiled: eval::Compiled,
}

impl PartialEq for ReprProgram {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim && self.outputs == other.outputs
    }
}

/// Compiled intrinsic-reward program `G: S^c -> R`.
#[derive(Debug, Clone)]
pub struct RewardProgram {
    input_dim: usize,
    source_dim: usize,
    output: Expr,
    source_text: String,
    compiled: eval::Compiled,
}

impl PartialEq for RewardProgram {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim
            && self.source_dim == other.source_dim
            && self.output == other.output
    }
}

fn check_indices(outputs: &[Expr], input_dim: usize) -> Result<(), DslError> {
    let mut err = None;
    for e in outputs {
        e.visit_state_refs(&mut |i, span| {
            if i >= input_dim && err.is_none() {
                err = Some(DslError::IndexOutOfRange {
                    index: i,
                    input_dim,
                    line: span.line,
                    col: span.col,
                });
            }
        });
    }
    err.map_or(Ok(()), Err)
}

/// Parses and validates a representation program over `input_dim` source dimensions.
pub fn parse_repr_program(text: &str, input_dim: usize) -> Result<ReprProgram, DslError> {
    parse_repr_program_with_limit(text, input_dim, MAX_REPR_OUTPUTS)
}

pub fn parse_repr_program_with_limit(
    text: &str,
    input_dim: usize,
    max_outputs: usize,
) -> Result<ReprProgram, DslError> {
    let outputs = parser::parse_program(text)?;
    ReprProgram::from_exprs(outputs, input_dim, max_outputs, text.to_string())
}

/// Parses and validates a reward program over the augmented state.
///
/// `source_dim` is `|S|`; `input_dim` is `|S| + |S^r|`. The program must read
/// at least one index in `source_dim..input_dim`.
pub fn parse_reward_program(
    text: &str,
    source_dim: usize,
    input_dim: usize,
) -> Result<RewardProgram, DslError> {
    let outputs = parser::parse_program(text)?;
    RewardProgram::from_exprs(outputs, source_dim, input_dim, text.to_string())
}

/// Parses a reward program without requiring it to read an added dimension.
///
/// Meant for hand-written baselines such as the constant program `out: 0`;
/// generated candidates always go through [`parse_reward_program`].
pub fn parse_reward_program_relaxed(
    text: &str,
    input_dim: usize,
) -> Result<RewardProgram, DslError> {
    let outputs = parser::parse_program(text)?;
    RewardProgram::build(outputs, input_dim, input_dim, text.to_string(), false)
}

impl ReprProgram {
    pub fn from_exprs(
        outputs: Vec<Expr>,
        input_dim: usize,
        max_outputs: usize,
        source_text: String,
    ) -> Result<Self, DslError> {
        if outputs.is_empty() {
            return Err(DslError::EmptyProgram);
        }
        if outputs.len() > max_outputs {
            return Err(DslError::TooManyOutputs {
                count: outputs.len(),
                limit: max_outputs,
            });
        }
        check_indices(&outputs, input_dim)?;
        let compiled = eval::Compiled::new(&outputs);
        Ok(ReprProgram {
            input_dim,
            outputs,
            source_text,
            compiled,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn outputs(&self) -> &[Expr] {
        &self.outputs
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// Evaluates `F(s)`.
    pub fn eval(&self, s: &[f64]) -> Result<Vec<f64>, DslError> {
        let mut out = Vec::with_capacity(self.outputs.len());
        self.eval_into(s, &mut out)?;
        Ok(out)
    }

    /// Appends `F(s)` to `out`. Used to build `s^c = (s, F(s))` without an extra allocation.
    pub fn eval_into(&self, s: &[f64], out: &mut Vec<f64>) -> Result<(), DslError> {
        if s.len() != self.input_dim {
            return Err(DslError::InputLength {
                expected: self.input_dim,
                actual: s.len(),
            });
        }
        self.compiled.eval_into(s, out)
    }

    /// Returns the concatenation `(s, F(s))`.
    pub fn augment(&self, s: &[f64]) -> Result<Vec<f64>, DslError> {
        let mut out = Vec::with_capacity(s.len() + self.outputs.len());
        out.extend_from_slice(s);
        self.eval_into(s, &mut out)?;
        Ok(out)
    }

    /// Canonical text form; parsing it yields a structurally identical program.
    pub fn format(&self) -> String {
        format::format_program(&self.outputs)
    }
}

impl RewardProgram {
    pub fn from_exprs(
        outputs: Vec<Expr>,
        source_dim: usize,
        input_dim: usize,
        source_text: String,
    ) -> Result<Self, DslError> {
        Self::build(outputs, source_dim, input_dim, source_text, true)
    }

    fn build(
        outputs: Vec<Expr>,
        source_dim: usize,
        input_dim: usize,
        source_text: String,
        require_added: bool,
    ) -> Result<Self, DslError> {
        if outputs.is_empty() {
            return Err(DslError::EmptyProgram);
        }
        if outputs.len() != 1 {
            return Err(DslError::RewardOutputCount(outputs.len()));
        }
        check_indices(&outputs, input_dim)?;
        let mut uses_added = false;
        outputs[0].visit_state_refs(&mut |i, _| uses_added |= i >= source_dim);
        if require_added && !uses_added {
            return Err(DslError::RewardIgnoresAddedDims {
                source_dim,
                input_dim,
            });
        }
        let compiled = eval::Compiled::new(&outputs);
        let output = outputs.into_iter().next().expect("one output");
        Ok(RewardProgram {
            input_dim,
            source_dim,
            output,
            source_text,
            compiled,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn output(&self) -> &Expr {
        &self.output
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// Evaluates `G(s^c)`.
    pub fn eval(&self, s_c: &[f64]) -> Result<f64, DslError> {
        if s_c.len() != self.input_dim {
            return Err(DslError::InputLength {
                expected: self.input_dim,
                actual: s_c.len(),
            });
        }
        let mut out = Vec::with_capacity(1);
        self.compiled.eval_into(s_c, &mut out)?;
        Ok(out[0])
    }

    pub fn format(&self) -> String {
        format::format_program(std::slice::from_ref(&self.output))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_expr(self))
    }
}

/// Parses program text into its output expressions without dimension checks.
pub fn parse_outputs(text: &str) -> Result<Vec<Expr>, DslError> {
    parser::parse_program(text)
}

/// Formats a list of output expressions in canonical form.
pub fn format_outputs(outputs: &[Expr]) -> String {
    format::format_program(outputs)
}
