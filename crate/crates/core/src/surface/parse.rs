//! Lexer and recursive-descent parser for the rule language.

use std::collections::{BTreeSet, HashSet};

use super::{
    ArithOp, BodyItem, BuiltinId, BuiltinRegistry, ConstraintDecl, Expr, GuardCall, HeadAtom, Program, Rule,
    RuleKind, SymbolId, Term,
};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    /// Lower-case or quoted name; the flag records quoting.
    Ident(String, bool),
    Var(String),
    Int(i64),
    Op(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const OPS: &[&str] = &[
    "<=>", "==>", "=\\=", ":-", "==", "=<", "<=", ">=", "!=", "\\=", "//", "=", "<", ">", "+", "-", "*", "/",
    "\\", "|", "@", ",", ".", "(", ")",
];

/// Operators that may appear between two goal operands.
const RELATION_OPS: &[&str] = &["=", "==", "!=", "\\=", "=\\=", "<", ">", "=<", "<=", ">="];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out: Vec<Token> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: String| ParseError { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tline, tcol) = (line, col);
        let start = i;
        let prev_is_operand = matches!(
            out.last().map(|t| &t.tok),
            Some(Tok::Ident(..)) | Some(Tok::Var(_)) | Some(Tok::Int(_)) | Some(Tok::Op(")"))
        );
        let negative_literal =
            c == '-' && !prev_is_operand && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        let tok = if c.is_ascii_digit() || negative_literal {
            if negative_literal {
                i += 1;
            }
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let n: i64 = text
                .parse()
                .map_err(|_| err(tline, tcol, format!("integer literal `{text}` out of range")))?;
            Tok::Int(n)
        } else if c.is_ascii_lowercase() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect(), false)
        } else if c.is_ascii_uppercase() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Var(chars[start..i].iter().collect())
        } else if c == '\'' {
            i += 1;
            let mut name = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tline, tcol, "unterminated quoted atom".into())),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        name.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        name.push(ch);
                        i += 1;
                    }
                }
            }
            Tok::Ident(name, true)
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            match OPS.iter().find(|op| rest.starts_with(**op)) {
                Some(op) => {
                    i += op.chars().count();
                    Tok::Op(op)
                }
                None => return Err(err(tline, tcol, format!("unexpected character `{c}`"))),
            }
        };
        col += i - start;
        out.push(Token {
            tok,
            line: tline,
            col: tcol,
        });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Untyped goal tree produced before names are resolved.
#[derive(Debug, Clone)]
enum Raw {
    Var(String),
    Int(i64),
    Atom(String),
    Compound(String, Vec<Raw>),
    Bin(&'static str, Box<Raw>, Box<Raw>),
    Neg(Box<Raw>),
}

#[derive(Debug, Clone)]
struct RawGoal {
    raw: Raw,
    line: usize,
    col: usize,
}

enum Clause {
    Decl(Vec<ConstraintDecl>),
    Rule {
        name: Option<String>,
        first: Vec<RawGoal>,
        second: Option<Vec<RawGoal>>,
        arrow: &'static str,
        guard: Vec<RawGoal>,
        body: Vec<RawGoal>,
        line: usize,
        col: usize,
    },
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    infix: HashSet<&'static str>,
    anon: usize,
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser {
            toks,
            pos: 0,
            infix: RELATION_OPS.iter().copied().collect(),
            anon: 0,
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn expect_op(&mut self, op: &str) -> Result<(), ParseError> {
        if self.is_op(op) {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected `{op}`, found {}", describe(self.peek()))))
        }
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
        if self.is_op(":-") {
            self.next();
            match self.next() {
                Tok::Ident(k, false) if k == "chr_constraint" => {}
                other => return Err(self.error(format!("unknown directive {}", describe(&other)))),
            }
            let mut decls = Vec::new();
            loop {
                decls.push(self.spec()?);
                if self.is_op(",") {
                    self.next();
                } else {
                    break;
                }
            }
            self.expect_op(".")?;
            return Ok(Clause::Decl(decls));
        }
        let mut name = None;
        if let (Tok::Ident(n, _), Tok::Op("@")) = (self.peek().clone(), self.peek_at(1).clone()) {
            name = Some(n);
            self.next();
            self.next();
        }
        let first = self.goals()?;
        let second = if self.is_op("\\") {
            self.next();
            Some(self.goals()?)
        } else {
            None
        };
        let arrow = match self.next() {
            Tok::Op(op @ ("<=>" | "==>")) => op,
            other => {
                self.pos -= 1;
                return Err(self.error(format!("expected `<=>` or `==>`, found {}", describe(&other))));
            }
        };
        let mut guard = Vec::new();
        let mut body = self.goals()?;
        if self.is_op("|") {
            self.next();
            guard = body;
            body = self.goals()?;
        }
        self.expect_op(".")?;
        Ok(Clause::Rule {
            name,
            first,
            second,
            arrow,
            guard,
            body,
            line,
            col,
        })
    }

    fn spec(&mut self) -> Result<ConstraintDecl, ParseError> {
        let name = match self.next() {
            Tok::Ident(n, _) => n,
            Tok::Op("(") => {
                let n = match self.next() {
                    Tok::Op(o) => o,
                    other => return Err(self.error(format!("expected operator, found {}", describe(&other)))),
                };
                self.expect_op(")")?;
                self.infix.insert(n);
                n.to_string()
            }
            Tok::Op(o) if !matches!(o, "," | "." | "(" | ")" | "/") => {
                self.infix.insert(o);
                o.to_string()
            }
            other => return Err(self.error(format!("expected constraint name, found {}", describe(&other)))),
        };
        self.expect_op("/")?;
        match self.next() {
            Tok::Int(n) if n >= 0 => Ok(ConstraintDecl {
                name,
                arity: n as usize,
            }),
            other => Err(self.error(format!("expected arity, found {}", describe(&other)))),
        }
    }

    fn goals(&mut self) -> Result<Vec<RawGoal>, ParseError> {
        let mut out = vec![self.goal()?];
        while self.is_op(",") {
            self.next();
            out.push(self.goal()?);
        }
        Ok(out)
    }

    fn goal(&mut self) -> Result<RawGoal, ParseError> {
        let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
        let lhs = self.expr()?;
        let raw = match self.peek().clone() {
            Tok::Op(op) if self.infix.contains(op) => {
                self.next();
                let rhs = self.expr()?;
                Raw::Bin(op, Box::new(lhs), Box::new(rhs))
            }
            _ => lhs,
        };
        Ok(RawGoal { raw, line, col })
    }

    fn expr(&mut self) -> Result<Raw, ParseError> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.peek() {
                Tok::Op(o @ ("+" | "-")) => *o,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.mul()?;
            lhs = Raw::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul(&mut self) -> Result<Raw, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op(o @ ("*" | "//")) => *o,
                Tok::Ident(m, false) if m == "mod" => "mod",
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Raw::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Raw, ParseError> {
        if self.is_op("-") {
            self.next();
            return Ok(Raw::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Raw, ParseError> {
        match self.next() {
            Tok::Int(n) => Ok(Raw::Int(n)),
            Tok::Var(v) if v == "_" => {
                self.anon += 1;
                Ok(Raw::Var(format!("_G{}", self.anon)))
            }
            Tok::Var(v) => Ok(Raw::Var(v)),
            Tok::Ident(name, _) => {
                if self.is_op("(") {
                    self.next();
                    let mut args = vec![self.expr()?];
                    while self.is_op(",") {
                        self.next();
                        args.push(self.expr()?);
                    }
                    self.expect_op(")")?;
                    Ok(Raw::Compound(name, args))
                } else {
                    Ok(Raw::Atom(name))
                }
            }
            Tok::Op("(") => {
                let inner = self.expr()?;
                self.expect_op(")")?;
                Ok(inner)
            }
            other => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error(format!("expected a term, found {}", describe(&other))))
            }
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(n, _) => format!("`{n}`"),
        Tok::Var(v) => format!("variable `{v}`"),
        Tok::Int(i) => format!("`{i}`"),
        Tok::Op(o) => format!("`{o}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

/// Name resolution and conversion from raw goals to typed rule parts.
struct Resolver<'a> {
    decls: &'a [ConstraintDecl],
    builtins: &'a BuiltinRegistry,
    occurrences: Vec<u32>,
}

fn at(g: &RawGoal, message: impl Into<String>) -> ParseError {
    ParseError {
        line: g.line,
        col: g.col,
        message: message.into(),
    }
}

impl Resolver<'_> {
    fn symbol(&self, name: &str, arity: usize) -> Option<SymbolId> {
        self.decls
            .iter()
            .position(|d| d.name == name && d.arity == arity)
            .map(SymbolId)
    }

    fn call_shape(raw: &Raw) -> Option<(&str, Vec<&Raw>)> {
        match raw {
            Raw::Atom(n) => Some((n, vec![])),
            Raw::Compound(n, args) => Some((n, args.iter().collect())),
            Raw::Bin(op, l, r) if !is_arith(op) => Some((op, vec![&**l, &**r])),
            _ => None,
        }
    }

    fn head(&mut self, g: &RawGoal) -> Result<HeadAtom, ParseError> {
        let (name, args) = Self::call_shape(&g.raw).ok_or_else(|| at(g, "expected a constraint in rule head"))?;
        let symbol = self
            .symbol(name, args.len())
            .ok_or_else(|| at(g, format!("undeclared constraint {name}/{}", args.len())))?;
        let args = args.into_iter().map(|a| to_term(a, g)).collect::<Result<Vec<_>, _>>()?;
        self.occurrences[symbol.0] += 1;
        Ok(HeadAtom {
            symbol,
            args,
            occurrence: self.occurrences[symbol.0],
        })
    }

    fn builtin_call(
        &self,
        g: &RawGoal,
        known: &mut BTreeSet<String>,
        in_guard: bool,
    ) -> Result<GuardCall, ParseError> {
        let (name, args) = Self::call_shape(&g.raw).ok_or_else(|| at(g, "expected a goal"))?;
        let id = match self.builtins.lookup(name, args.len()) {
            Some(id) => id,
            None if in_guard && self.symbol(name, args.len()).is_some() => {
                return Err(at(g, format!("constraint {name}/{} cannot be called in a guard", args.len())))
            }
            None => return Err(at(g, format!("unknown goal {name}/{}", args.len()))),
        };
        let args = args.into_iter().map(|a| to_expr(a, g)).collect::<Result<Vec<_>, _>>()?;
        Ok(make_call(self.builtins, id, args, known))
    }
}

/// Builds a builtin call. A fresh-variable-capable output argument (the left
/// side of `=`, the third argument of `midpoint`) is recorded in `outvars`
/// unless it also occurs among the inputs; `known` is extended with it.
pub(crate) fn make_call(
    builtins: &BuiltinRegistry,
    id: BuiltinId,
    args: Vec<Expr>,
    known: &mut BTreeSet<String>,
) -> GuardCall {
    let sig = builtins.sig(id);
    let mut invars = BTreeSet::new();
    let mut outvars = BTreeSet::new();
    // The output position binds its variable when that variable is still
    // unbound at run time; if it is already bound the call acts as a test.
    let out_var = sig.output.and_then(|k| match &args[k] {
        Expr::Var(v) => {
            let used_elsewhere = args
                .iter()
                .enumerate()
                .any(|(i, a)| i != k && a.vars().contains(v));
            (!used_elsewhere).then(|| (k, v.clone()))
        }
        _ => None,
    });
    for (i, a) in args.iter().enumerate() {
        if out_var.as_ref().is_some_and(|(k, _)| *k == i) {
            continue;
        }
        a.collect_vars(&mut invars);
    }
    if let Some((_, v)) = out_var {
        outvars.insert(v);
    }
    known.extend(outvars.iter().cloned());
    GuardCall {
        builtin: id,
        args,
        invars,
        outvars,
    }
}

fn is_arith(op: &str) -> bool {
    matches!(op, "+" | "-" | "*" | "//" | "mod")
}

fn to_term(raw: &Raw, g: &RawGoal) -> Result<Term, ParseError> {
    Ok(match raw {
        Raw::Var(v) => Term::Var(v.clone()),
        Raw::Int(i) => Term::Int(*i),
        Raw::Atom(a) => Term::Atom(a.clone()),
        Raw::Compound(n, args) => {
            let t = Term::Compound(n.clone(), args.iter().map(|a| to_term(a, g)).collect::<Result<_, _>>()?);
            if !t.is_ground() {
                return Err(at(g, format!("compound head argument `{n}(..)` must be ground")));
            }
            t
        }
        Raw::Bin(..) | Raw::Neg(_) => return Err(at(g, "arithmetic is not allowed in rule heads")),
    })
}

fn to_expr(raw: &Raw, g: &RawGoal) -> Result<Expr, ParseError> {
    Ok(match raw {
        Raw::Var(v) => Expr::Var(v.clone()),
        Raw::Int(i) => Expr::Int(*i),
        Raw::Atom(a) => Expr::Atom(a.clone()),
        Raw::Compound(n, args) if (n == "min" || n == "max") && args.len() == 2 => {
            let op = if n == "min" { ArithOp::Min } else { ArithOp::Max };
            Expr::Arith(op, Box::new(to_expr(&args[0], g)?), Box::new(to_expr(&args[1], g)?))
        }
        Raw::Compound(n, args) => Expr::Compound(n.clone(), args.iter().map(|a| to_expr(a, g)).collect::<Result<_, _>>()?),
        Raw::Bin(op, l, r) => {
            let op = match *op {
                "+" => ArithOp::Add,
                "-" => ArithOp::Sub,
                "*" => ArithOp::Mul,
                "//" => ArithOp::IntDiv,
                "mod" => ArithOp::Mod,
                other => return Err(at(g, format!("operator `{other}` cannot appear inside an argument"))),
            };
            Expr::Arith(op, Box::new(to_expr(l, g)?), Box::new(to_expr(r, g)?))
        }
        Raw::Neg(inner) => Expr::Neg(Box::new(to_expr(inner, g)?)),
    })
}

/// Parses a program using the standard builtins.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    parse_program_with(src, BuiltinRegistry::standard())
}

/// Parses a program resolving guard calls against `builtins`.
pub fn parse_program_with(src: &str, builtins: BuiltinRegistry) -> Result<Program, ParseError> {
    let mut parser = Parser::new(lex(src)?);
    let mut clauses = Vec::new();
    while *parser.peek() != Tok::Eof {
        clauses.push(parser.clause()?);
    }
    let mut decls: Vec<ConstraintDecl> = Vec::new();
    for c in &clauses {
        if let Clause::Decl(ds) = c {
            for d in ds {
                if !decls.contains(d) {
                    decls.push(d.clone());
                }
            }
        }
    }
    let mut resolver = Resolver {
        decls: &decls,
        builtins: &builtins,
        occurrences: vec![0; decls.len()],
    };
    let mut rules = Vec::new();
    let mut warnings = Vec::new();
    let mut names = HashSet::new();
    for c in clauses {
        let Clause::Rule {
            name,
            first,
            second,
            arrow,
            guard,
            body,
            line,
            col,
        } = c
        else {
            continue;
        };
        let rule_err = |message: &str| ParseError {
            line,
            col,
            message: message.to_string(),
        };
        let (kind, kept_raw, removed_raw) = match (second, arrow) {
            (Some(removed), "<=>") => (RuleKind::Simpagation, first, removed),
            (Some(_), _) => return Err(rule_err("simpagation rules must use `<=>`")),
            (None, "<=>") => (RuleKind::Simplification, vec![], first),
            (None, _) => (RuleKind::Propagation, first, vec![]),
        };
        let kept = kept_raw.iter().map(|g| resolver.head(g)).collect::<Result<Vec<_>, _>>()?;
        let removed = removed_raw.iter().map(|g| resolver.head(g)).collect::<Result<Vec<_>, _>>()?;
        let mut known = BTreeSet::new();
        for h in kept.iter().chain(&removed) {
            known.extend(h.vars());
        }
        let mut guard_calls = Vec::new();
        for g in &guard {
            guard_calls.push(resolver.builtin_call(g, &mut known, true)?);
        }
        let mut body_items = Vec::new();
        for g in &body {
            let item = match &g.raw {
                Raw::Atom(a) if a == "true" => BodyItem::True,
                Raw::Atom(a) if a == "fail" => BodyItem::Fail,
                raw => match Resolver::call_shape(raw).and_then(|(n, args)| resolver.symbol(n, args.len()).map(|s| (s, args))) {
                    Some((symbol, args)) => BodyItem::Constraint {
                        symbol,
                        args: args.into_iter().map(|a| to_expr(a, g)).collect::<Result<_, _>>()?,
                    },
                    None => BodyItem::Builtin(resolver.builtin_call(g, &mut known, false)?),
                },
            };
            body_items.push(item);
        }
        if let Some(n) = &name {
            if !names.insert(n.clone()) {
                warnings.push(format!("duplicate rule name `{n}`"));
            }
        }
        let source_index = rules.len();
        rules.push(Rule {
            name,
            kind,
            kept,
            removed,
            guard: guard_calls,
            body: body_items,
            source_index,
        });
    }
    Ok(Program {
        decls,
        rules,
        builtins,
        warnings,
    })
}

/// A ground constraint call from a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalCall {
    pub symbol: SymbolId,
    pub args: Vec<Value>,
}

/// Parses a query such as `gcd(9), gcd(6)` against the program's declarations.
/// Arguments must be ground; arithmetic in them is evaluated.
pub fn parse_goal(program: &Program, src: &str) -> Result<Vec<GoalCall>, ParseError> {
    let mut parser = Parser::new(lex(src)?);
    for d in &program.decls {
        if BuiltinRegistry::is_infix_operator(&d.name) && d.arity == 2 {
            if let Some(op) = OPS.iter().find(|o| **o == d.name) {
                parser.infix.insert(op);
            }
        }
    }
    let mut out = Vec::new();
    if *parser.peek() == Tok::Eof {
        return Ok(out);
    }
    let goals = parser.goals()?;
    if parser.is_op(".") {
        parser.next();
    }
    if *parser.peek() != Tok::Eof {
        return Err(parser.error(format!("unexpected {} after goal", describe(parser.peek()))));
    }
    for g in &goals {
        if matches!(&g.raw, Raw::Atom(a) if a == "true") {
            continue;
        }
        let (name, args) = Resolver::call_shape(&g.raw).ok_or_else(|| at(g, "expected a constraint"))?;
        let symbol = program
            .symbol(name, args.len())
            .ok_or_else(|| at(g, format!("undeclared constraint {name}/{}", args.len())))?;
        let mut values = Vec::new();
        for a in args {
            let e = to_expr(a, g)?;
            let v = e
                .eval(&|_| None)
                .map_err(|err| at(g, format!("goal argument: {err}")))?;
            values.push(v);
        }
        out.push(GoalCall { symbol, args: values });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::HeadRole;

    #[test]
    fn parses_gcd() {
        let p = parse_program(
            ":- chr_constraint gcd/1.\n\
             gcd(0) <=> true.\n\
             gcd(N) \\ gcd(M) <=> N =< M | gcd(M - N).\n",
        )
        .unwrap();
        assert_eq!(p.decls.len(), 1);
        assert_eq!(p.rules.len(), 2);
        let r = &p.rules[1];
        assert_eq!(r.kind, RuleKind::Simpagation);
        assert_eq!(r.kept[0].occurrence, 2);
        assert_eq!(r.removed[0].occurrence, 3);
        assert_eq!(r.head(1).0, HeadRole::Removed);
        assert_eq!(r.guard[0].invars.len(), 2);
        assert!(matches!(&r.body[0], BodyItem::Constraint { args, .. } if matches!(args[0], Expr::Arith(ArithOp::Sub, ..))));
    }

    #[test]
    fn infix_constraint_and_named_rule() {
        let p = parse_program(
            ":- chr_constraint (!=)/2, bounds/3.\n\
             neqset @ X != Y \\ X != Y <=> true.\n\
             bounds(X, L, U), X != Y ==> Y != X.\n",
        )
        .unwrap();
        assert_eq!(p.rules[0].name.as_deref(), Some("neqset"));
        assert_eq!(p.rules[0].kept[0].symbol, SymbolId(0));
        assert!(matches!(p.rules[1].body[0], BodyItem::Constraint { symbol: SymbolId(0), .. }));
    }

    #[test]
    fn assignment_binds_fresh_variable() {
        let p = parse_program(":- chr_constraint s/1, r/1.\nr(U) ==> W = U + 1 | s(W).\n").unwrap();
        let g = &p.rules[0].guard[0];
        assert_eq!(g.outvars.iter().collect::<Vec<_>>(), ["W"]);
        assert_eq!(g.invars.iter().collect::<Vec<_>>(), ["U"]);
    }

    #[test]
    fn undeclared_constraint_is_an_error() {
        let e = parse_program(":- chr_constraint a/1.\na(X) <=> b(X).\n").unwrap_err();
        assert!(e.message.contains("b/1"), "{e}");
        let e = parse_program("a(X) <=> true.\n").unwrap_err();
        assert!(e.message.contains("undeclared"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_program(":- chr_constraint a/1.\n\na(X) <=> true\n").unwrap_err();
        assert!(e.message.contains("end of input"), "{e}");
        let e = parse_program(":- chr_constraint a/1.\na(X) ? true.\n").unwrap_err();
        assert_eq!((e.line, e.col), (2, 6));
    }

    #[test]
    fn negative_literals_and_subtraction() {
        let p = parse_program(":- chr_constraint a/1.\na(-3) <=> a(2-1), a(-1), a(2 - -1).\n").unwrap();
        assert_eq!(p.rules[0].removed[0].args[0], Term::Int(-3));
        let BodyItem::Constraint { args, .. } = &p.rules[0].body[1] else { panic!() };
        assert_eq!(args[0], Expr::Int(-1));
    }

    #[test]
    fn non_ground_compound_head_rejected() {
        let e = parse_program(":- chr_constraint a/1.\na(f(X)) <=> true.\n").unwrap_err();
        assert!(e.message.contains("ground"), "{e}");
        assert!(parse_program(":- chr_constraint a/1.\na(f(1, b)) <=> true.\n").is_ok());
    }

    #[test]
    fn duplicate_rule_names_warn() {
        let p = parse_program(":- chr_constraint a/1.\nr @ a(0) <=> true.\nr @ a(1) <=> true.\n").unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let p = parse_program(":- chr_constraint a/2.\na(_, _) <=> true.\n").unwrap();
        let h = &p.rules[0].removed[0];
        assert_ne!(h.args[0], h.args[1]);
    }

    #[test]
    fn goal_parsing() {
        let p = parse_program(":- chr_constraint gcd/1, (!=)/2.\n").unwrap();
        let g = parse_goal(&p, "gcd(9), gcd(3*2), a != b.").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[1].args, vec![Value::Int(6)]);
        assert!(parse_goal(&p, "gcd(X)").is_err());
        assert!(parse_goal(&p, "foo(1)").is_err());
    }
}
