//! Printing programs back to source form. Printing then re-parsing a program
//! yields a structurally identical program.

use std::fmt::{self, Display, Formatter, Write};

use super::{ArithOp, BodyItem, BuiltinRegistry, Expr, GuardCall, HeadAtom, Program, Rule, RuleKind, Term};

pub(crate) fn plain_name(name: &str) -> bool {
    let mut cs = name.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase())
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && name != "mod"
}

pub(crate) fn write_name(f: &mut impl Write, name: &str) -> fmt::Result {
    if plain_name(name) {
        f.write_str(name)
    } else {
        write!(f, "'{}'", name.replace('\'', "''"))
    }
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Int(i) => write!(f, "{i}"),
            Term::Atom(a) => write_name(f, a),
            Term::Compound(n, args) => {
                write_name(f, n)?;
                write_args(f, args)
            }
        }
    }
}

fn write_args<T: Display>(f: &mut Formatter<'_>, args: &[T]) -> fmt::Result {
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => 1,
        Expr::Arith(ArithOp::Mul | ArithOp::IntDiv | ArithOp::Mod, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Int(i) if *i < 0 => 3,
        _ => 4,
    }
}

fn write_operand(f: &mut Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(v) => f.write_str(v),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Atom(a) => write_name(f, a),
            Expr::Compound(n, args) => {
                write_name(f, n)?;
                write_args(f, args)
            }
            Expr::Arith(op @ (ArithOp::Min | ArithOp::Max), a, b) => {
                let name = if *op == ArithOp::Min { "min" } else { "max" };
                write!(f, "{name}({a}, {b})")
            }
            Expr::Arith(op, a, b) => {
                let p = prec(self);
                let sym = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::IntDiv => "//",
                    _ => "mod",
                };
                write_operand(f, a, p)?;
                write!(f, " {sym} ")?;
                write_operand(f, b, p + 1)
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                // A bare integer after `-` would lex as a negative literal.
                if matches!(**a, Expr::Int(_)) {
                    write!(f, "({a})")
                } else {
                    write_operand(f, a, 3)
                }
            }
        }
    }
}

/// Displays program fragments that need declaration and builtin names.
pub struct Shown<'a, T: ?Sized> {
    program: &'a Program,
    item: &'a T,
}

impl Program {
    pub fn show<'a, T: ?Sized>(&'a self, item: &'a T) -> Shown<'a, T> {
        Shown { program: self, item }
    }
}

fn write_call<T: Display>(f: &mut Formatter<'_>, name: &str, args: &[T]) -> fmt::Result {
    if args.len() == 2 && BuiltinRegistry::is_infix_operator(name) {
        write!(f, "{} {name} {}", args[0], args[1])
    } else if args.is_empty() {
        write_name(f, name)
    } else {
        write_name(f, name)?;
        write_args(f, args)
    }
}

impl Display for Shown<'_, HeadAtom> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_call(f, &self.program.decl(self.item.symbol).name, &self.item.args)
    }
}

impl Display for Shown<'_, GuardCall> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_call(f, &self.program.builtins.sig(self.item.builtin).name, &self.item.args)
    }
}

impl Display for Shown<'_, BodyItem> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self.item {
            BodyItem::Constraint { symbol, args } => write_call(f, &self.program.decl(*symbol).name, args),
            BodyItem::Builtin(g) => write!(f, "{}", self.program.show(g)),
            BodyItem::True => f.write_str("true"),
            BodyItem::Fail => f.write_str("fail"),
        }
    }
}

fn join<'a, T: 'a>(
    f: &mut Formatter<'_>,
    program: &'a Program,
    items: impl IntoIterator<Item = &'a T>,
) -> fmt::Result
where
    for<'b> Shown<'b, T>: Display,
{
    for (i, item) in items.into_iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}", program.show(item))?;
    }
    Ok(())
}

impl Display for Shown<'_, Rule> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let (p, r) = (self.program, self.item);
        if let Some(n) = &r.name {
            write_name(f, n)?;
            f.write_str(" @ ")?;
        }
        match r.kind {
            RuleKind::Simplification => {
                join(f, p, &r.removed)?;
                f.write_str(" <=> ")?;
            }
            RuleKind::Propagation => {
                join(f, p, &r.kept)?;
                f.write_str(" ==> ")?;
            }
            RuleKind::Simpagation => {
                join(f, p, &r.kept)?;
                f.write_str(" \\ ")?;
                join(f, p, &r.removed)?;
                f.write_str(" <=> ")?;
            }
        }
        if !r.guard.is_empty() {
            join(f, p, &r.guard)?;
            f.write_str(" | ")?;
        }
        join(f, p, &r.body)?;
        f.write_str(".")
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if !self.decls.is_empty() {
            f.write_str(":- chr_constraint ")?;
            for (i, d) in self.decls.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                if plain_name(&d.name) {
                    write!(f, "{}/{}", d.name, d.arity)?;
                } else {
                    write!(f, "({})/{}", d.name, d.arity)?;
                }
            }
            f.write_str(".\n")?;
        }
        for r in &self.rules {
            writeln!(f, "{}", self.show(r))?;
        }
        Ok(())
    }
}
