//! Ground values stored in constraints and the total order used by tree indexes.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

/// A ground term.
///
/// The derived ordering is the ground term order: integers before atoms
/// before compounds; integers by value, atoms lexicographically, compounds
/// by name, then arity, then arguments left to right.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Atom(Arc<str>),
    Compound(Arc<Compound>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Compound {
    pub name: Arc<str>,
    pub args: Vec<Value>,
}

thread_local! {
    static NAMES: RefCell<HashSet<Arc<str>>> = RefCell::new(HashSet::new());
}

/// A shared copy of `name`, so equal names usually compare by pointer.
pub fn intern(name: &str) -> Arc<str> {
    NAMES.with(|names| {
        let mut names = names.borrow_mut();
        if let Some(n) = names.get(name) {
            return n.clone();
        }
        let n: Arc<str> = Arc::from(name);
        names.insert(n.clone());
        n
    })
}

impl Value {
    pub fn atom(name: &str) -> Self {
        Value::Atom(intern(name))
    }

    pub fn compound(name: &str, args: Vec<Value>) -> Self {
        Value::Compound(Arc::new(Compound {
            name: intern(name),
            args,
        }))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Atom(_) => 1,
            Value::Compound(_) => 2,
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Atom(a), Value::Atom(b)) => {
                if Arc::ptr_eq(a, b) {
                    Ordering::Equal
                } else {
                    a.cmp(b)
                }
            }
            (Value::Compound(a), Value::Compound(b)) => {
                if Arc::ptr_eq(a, b) {
                    return Ordering::Equal;
                }
                let name = if Arc::ptr_eq(&a.name, &b.name) { Ordering::Equal } else { a.name.cmp(&b.name) };
                name.then_with(|| a.args.len().cmp(&b.args.len())).then_with(|| a.args.cmp(&b.args))
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Atom(a) => write!(f, "{a}"),
            Value::Compound(c) => {
                write!(f, "{}(", c.name)?;
                for (i, a) in c.args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_order_ranks_kinds() {
        let mut vs = [
            Value::compound("pt", vec![Value::Int(0), Value::Int(0)]),
            Value::atom("b"),
            Value::Int(7),
            Value::atom("a"),
            Value::Int(-3),
        ];
        vs.sort();
        let shown: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
        assert_eq!(shown, ["-3", "7", "a", "b", "pt(0,0)"]);
    }

    #[test]
    fn compounds_order_by_name_then_arity_then_args() {
        let a = Value::compound("f", vec![Value::Int(9)]);
        let b = Value::compound("f", vec![Value::Int(1), Value::Int(1)]);
        let c = Value::compound("g", vec![]);
        let d = Value::compound("f", vec![Value::Int(1), Value::Int(2)]);
        assert!(a < b);
        assert!(b < d);
        assert!(d < c);
    }
}
