//! The rule language: terms, rules, programs, the parser and validation.
//!
//! Grammar (EBNF):
//!
//! ```text
//! program    = { clause } ;
//! clause     = decl | rule ;
//! decl       = ":-" "chr_constraint" spec { "," spec } "." ;
//! spec       = ( ident | "(" op ")" | op ) "/" int ;
//! rule       = [ ident "@" ] heads [ "\" heads ] ( "<=>" | "==>" ) [ goals "|" ] goals "." ;
//! heads      = head { "," head } ;
//! head       = ident [ "(" term { "," term } ")" ] | term op term ;
//! goals      = goal { "," goal } ;
//! goal       = "true" | "fail" | ident [ "(" expr { "," expr } ")" ] | expr cmp expr ;
//! expr       = mul { ( "+" | "-" ) mul } ;
//! mul        = unary { ( "*" | "//" | "mod" ) unary } ;
//! unary      = [ "-" ] primary ;
//! primary    = int | var | ident [ "(" expr { "," expr } ")" ] | "(" expr ")" ;
//! ```
//!
//! `min(A,B)` and `max(A,B)` inside expressions are arithmetic. Comments run
//! from `%` to the end of the line.

mod builtins;
mod parse;
mod print;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

pub use builtins::{BuiltinId, BuiltinKind, BuiltinRegistry, BuiltinSig, CmpOp, CustomTest};
pub use parse::{parse_goal, parse_program, parse_program_with, GoalCall, ParseError};
pub use validate::{validate_program, ValidationError};

use crate::value::Value;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct SymbolId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintDecl {
    pub name: String,
    pub arity: usize,
}

impl fmt::Display for ConstraintDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// Head argument.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Int(i64),
    Atom(String),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) | Term::Atom(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Converts a ground term to a value.
    pub fn to_value(&self) -> Option<Value> {
        Some(match self {
            Term::Var(_) => return None,
            Term::Int(i) => Value::Int(*i),
            Term::Atom(a) => Value::atom(a),
            Term::Compound(name, args) => Value::compound(
                name,
                args.iter().map(Term::to_value).collect::<Option<Vec<_>>>()?,
            ),
        })
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            Term::Var(v) => Expr::Var(v.clone()),
            Term::Int(i) => Expr::Int(*i),
            Term::Atom(a) => Expr::Atom(a.clone()),
            Term::Compound(n, args) => Expr::Compound(n.clone(), args.iter().map(Term::to_expr).collect()),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    IntDiv,
    Mod,
    Min,
    Max,
}

/// Guard and body argument: a term or an integer expression evaluated at run time.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(String),
    Int(i64),
    Atom(String),
    Compound(String, Vec<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Int(_) | Expr::Atom(_) => {}
            Expr::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Expr::Arith(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) => a.collect_vars(out),
        }
    }

    /// Evaluates the expression, resolving variables through `lookup`.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
        Ok(match self {
            Expr::Var(v) => lookup(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Expr::Int(i) => Value::Int(*i),
            Expr::Atom(a) => Value::atom(a),
            Expr::Compound(n, args) => {
                Value::compound(n, args.iter().map(|a| a.eval(lookup)).collect::<Result<_, _>>()?)
            }
            Expr::Arith(op, a, b) => {
                let x = int_of(a.eval(lookup)?)?;
                let y = int_of(b.eval(lookup)?)?;
                Value::Int(arith(*op, x, y)?)
            }
            Expr::Neg(a) => Value::Int(int_of(a.eval(lookup)?)?.checked_neg().ok_or(EvalError::Overflow)?),
        })
    }

    /// Renames variables through `f`.
    pub fn map_vars(&self, f: &impl Fn(&str) -> Expr) -> Expr {
        match self {
            Expr::Var(v) => f(v),
            Expr::Int(_) | Expr::Atom(_) => self.clone(),
            Expr::Compound(n, args) => Expr::Compound(n.clone(), args.iter().map(|a| a.map_vars(f)).collect()),
            Expr::Arith(op, a, b) => Expr::Arith(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_vars(f))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic on non-integer {0}")]
    NotInteger(Value),
    #[error("integer overflow")]
    Overflow,
}

fn int_of(v: Value) -> Result<i64, EvalError> {
    v.as_int().ok_or(EvalError::NotInteger(v))
}

/// Integer arithmetic: `//` truncates toward zero, `mod` takes the sign of the divisor.
pub fn arith(op: ArithOp, x: i64, y: i64) -> Result<i64, EvalError> {
    match op {
        ArithOp::Add => x.checked_add(y).ok_or(EvalError::Overflow),
        ArithOp::Sub => x.checked_sub(y).ok_or(EvalError::Overflow),
        ArithOp::Mul => x.checked_mul(y).ok_or(EvalError::Overflow),
        ArithOp::IntDiv if y == 0 => Err(EvalError::DivisionByZero),
        ArithOp::IntDiv => x.checked_div(y).ok_or(EvalError::Overflow),
        ArithOp::Mod if y == 0 => Err(EvalError::DivisionByZero),
        ArithOp::Mod => {
            let r = x.checked_rem(y).unwrap_or(0);
            Ok(if r != 0 && ((r < 0) != (y < 0)) { r + y } else { r })
        }
        ArithOp::Min => Ok(x.min(y)),
        ArithOp::Max => Ok(x.max(y)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadAtom {
    pub symbol: SymbolId,
    pub args: Vec<Term>,
    /// Per-symbol textual occurrence number, starting at 1.
    pub occurrence: u32,
}

impl HeadAtom {
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in &self.args {
            a.to_expr().collect_vars(&mut out);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardCall {
    pub builtin: BuiltinId,
    pub args: Vec<Expr>,
    pub invars: BTreeSet<String>,
    pub outvars: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BodyItem {
    Constraint { symbol: SymbolId, args: Vec<Expr> },
    Builtin(GuardCall),
    True,
    Fail,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum RuleKind {
    Simplification,
    Propagation,
    Simpagation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: Option<String>,
    pub kind: RuleKind,
    pub kept: Vec<HeadAtom>,
    pub removed: Vec<HeadAtom>,
    pub guard: Vec<GuardCall>,
    pub body: Vec<BodyItem>,
    pub source_index: usize,
}

/// Which side of a rule a head sits on.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum HeadRole {
    Kept,
    Removed,
}

impl Rule {
    /// Heads in textual order: kept heads then removed heads.
    pub fn heads(&self) -> impl Iterator<Item = (HeadRole, &HeadAtom)> {
        self.kept
            .iter()
            .map(|h| (HeadRole::Kept, h))
            .chain(self.removed.iter().map(|h| (HeadRole::Removed, h)))
    }

    pub fn head_count(&self) -> usize {
        self.kept.len() + self.removed.len()
    }

    pub fn head(&self, index: usize) -> (HeadRole, &HeadAtom) {
        if index < self.kept.len() {
            (HeadRole::Kept, &self.kept[index])
        } else {
            (HeadRole::Removed, &self.removed[index - self.kept.len()])
        }
    }

    pub fn head_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (_, h) in self.heads() {
            out.extend(h.vars());
        }
        out
    }

    pub fn body_calls(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.body.iter().filter_map(|b| match b {
            BodyItem::Constraint { symbol, .. } => Some(*symbol),
            _ => None,
        })
    }

    pub fn body_always_fails(&self) -> bool {
        self.body.iter().any(|b| matches!(b, BodyItem::Fail))
    }

    pub fn display_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("rule{}", self.source_index + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub decls: Vec<ConstraintDecl>,
    pub rules: Vec<Rule>,
    pub builtins: BuiltinRegistry,
    pub warnings: Vec<String>,
}

impl Program {
    pub fn symbol(&self, name: &str, arity: usize) -> Option<SymbolId> {
        self.decls
            .iter()
            .position(|d| d.name == name && d.arity == arity)
            .map(SymbolId)
    }

    pub fn decl(&self, s: SymbolId) -> &ConstraintDecl {
        &self.decls[s.0]
    }

    pub fn symbols(&self) -> impl Iterator<Item = SymbolId> {
        (0..self.decls.len()).map(SymbolId)
    }

    pub fn arity(&self, s: SymbolId) -> usize {
        self.decls[s.0].arity
    }

    /// All occurrences of `sym` as `(rule index, head index)` in textual order.
    pub fn occurrences_of(&self, sym: SymbolId) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (ri, rule) in self.rules.iter().enumerate() {
            for (hi, (_, h)) in rule.heads().enumerate() {
                if h.symbol == sym {
                    out.push((ri, hi));
                }
            }
        }
        out.sort_by_key(|&(ri, hi)| (self.rules[ri].head(hi).1.occurrence, ri, hi));
        out
    }

    /// Locates an occurrence by its per-symbol number.
    pub fn find_occurrence(&self, sym: SymbolId, occurrence: u32) -> Option<(usize, usize)> {
        self.occurrences_of(sym)
            .into_iter()
            .find(|&(ri, hi)| self.rules[ri].head(hi).1.occurrence == occurrence)
    }
}
