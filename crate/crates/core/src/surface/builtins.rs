//! Guard builtins available to rules.

use std::fmt;
use std::sync::Arc;

use crate::value::Value;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BuiltinId(pub usize);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, a: &Value, b: &Value) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

pub type CustomTest = Arc<dyn Fn(&[Value]) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum BuiltinKind {
    True,
    Fail,
    Compare(CmpOp),
    /// `=`: binds an unbound left-hand variable, otherwise an equality test.
    Unify,
    PointOnCircle,
    Midpoint,
    Near,
    Custom(CustomTest),
}

impl fmt::Debug for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinKind::True => f.write_str("True"),
            BuiltinKind::Fail => f.write_str("Fail"),
            BuiltinKind::Compare(op) => write!(f, "Compare({op:?})"),
            BuiltinKind::Unify => f.write_str("Unify"),
            BuiltinKind::PointOnCircle => f.write_str("PointOnCircle"),
            BuiltinKind::Midpoint => f.write_str("Midpoint"),
            BuiltinKind::Near => f.write_str("Near"),
            BuiltinKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BuiltinSig {
    pub name: String,
    pub arity: usize,
    pub kind: BuiltinKind,
    /// Argument position that becomes an output when it holds a fresh variable.
    pub output: Option<usize>,
    pub infix: bool,
}

impl BuiltinSig {
    pub fn is_equational(&self) -> bool {
        matches!(self.kind, BuiltinKind::Unify | BuiltinKind::Compare(CmpOp::Eq))
    }
}

/// The set of builtins a program may call from guards and bodies.
#[derive(Clone, Debug)]
pub struct BuiltinRegistry {
    sigs: Vec<BuiltinSig>,
}

impl PartialEq for BuiltinRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.sigs.len() == other.sigs.len()
            && self
                .sigs
                .iter()
                .zip(&other.sigs)
                .all(|(a, b)| a.name == b.name && a.arity == b.arity)
    }
}

impl Default for BuiltinRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl BuiltinRegistry {
    pub fn standard() -> Self {
        let mut reg = BuiltinRegistry { sigs: Vec::new() };
        reg.push("true", 0, BuiltinKind::True, None, false);
        reg.push("fail", 0, BuiltinKind::Fail, None, false);
        reg.push("=", 2, BuiltinKind::Unify, Some(0), true);
        for (name, op) in [
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            ("\\=", CmpOp::Ne),
            ("=\\=", CmpOp::Ne),
            ("<", CmpOp::Lt),
            ("=<", CmpOp::Le),
            ("<=", CmpOp::Le),
            (">", CmpOp::Gt),
            (">=", CmpOp::Ge),
        ] {
            reg.push(name, 2, BuiltinKind::Compare(op), None, true);
        }
        reg.push("point_on_circle", 3, BuiltinKind::PointOnCircle, None, false);
        reg.push("midpoint", 3, BuiltinKind::Midpoint, Some(2), false);
        reg.push("near", 2, BuiltinKind::Near, None, false);
        reg
    }

    fn push(&mut self, name: &str, arity: usize, kind: BuiltinKind, output: Option<usize>, infix: bool) {
        self.sigs.push(BuiltinSig {
            name: name.to_string(),
            arity,
            kind,
            output,
            infix,
        });
    }

    /// Registers a side-effect free test builtin (all arguments are inputs).
    pub fn register_test(&mut self, name: &str, arity: usize, test: CustomTest) -> BuiltinId {
        self.push(name, arity, BuiltinKind::Custom(test), None, false);
        BuiltinId(self.sigs.len() - 1)
    }

    pub fn lookup(&self, name: &str, arity: usize) -> Option<BuiltinId> {
        self.sigs
            .iter()
            .position(|s| s.name == name && s.arity == arity)
            .map(BuiltinId)
    }

    pub fn sig(&self, id: BuiltinId) -> &BuiltinSig {
        &self.sigs[id.0]
    }

    pub fn is_infix_operator(name: &str) -> bool {
        !name.is_empty() && !name.chars().next().unwrap().is_alphanumeric() && name != "_"
    }
}
