//! Random terminating CHR programs over small integer domains, with an
//! independent matcher used to check quiescence of final stores.
//!
//! Termination is by construction: a rule body only posts constraints
//! whose symbol number is larger than every head symbol of that rule, so
//! each symbol can only be produced finitely often.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::rngs::StdRng;
use rand::Rng;

pub const NAMES: [&str; 5] = ["p", "q", "r", "s", "t"];
const VARS: [&str; 4] = ["X", "Y", "Z", "W"];
/// Arguments range over `0..DOMAIN`.
pub const DOMAIN: i64 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arg {
    Var(usize),
    Int(i64),
}

#[derive(Clone, Debug)]
pub struct Atom {
    pub symbol: usize,
    pub args: Vec<Arg>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Kind {
    Simplification,
    Propagation,
    Simpagation,
}

#[derive(Copy, Clone, Debug)]
pub enum Cmp {
    Lt,
    Le,
    Ne,
    Eq,
}

impl Cmp {
    fn text(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "=<",
            Cmp::Ne => "!=",
            Cmp::Eq => "==",
        }
    }

    fn holds(self, a: i64, b: i64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Ne => a != b,
            Cmp::Eq => a == b,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandRule {
    pub kind: Kind,
    /// Kept heads first, then removed heads; this is also head order.
    pub kept: Vec<Atom>,
    pub removed: Vec<Atom>,
    pub guard: Vec<(Cmp, Arg, Arg)>,
    /// `None` is `fail`; an empty body is `true`.
    pub body: Option<Vec<Atom>>,
}

impl RandRule {
    pub fn heads(&self) -> impl Iterator<Item = &Atom> {
        self.kept.iter().chain(&self.removed)
    }
}

#[derive(Clone, Debug)]
pub struct RandProgram {
    pub arities: Vec<usize>,
    pub rules: Vec<RandRule>,
}

/// A ground constraint: symbol number and integer arguments.
pub type Ground = (usize, Vec<i64>);

fn arg_text(a: &Arg) -> String {
    match a {
        Arg::Var(v) => VARS[*v].to_string(),
        Arg::Int(i) => i.to_string(),
    }
}

fn atom_text(a: &Atom) -> String {
    let args: Vec<String> = a.args.iter().map(arg_text).collect();
    format!("{}({})", NAMES[a.symbol], args.join(", "))
}

fn atoms_text(atoms: &[Atom]) -> String {
    atoms.iter().map(atom_text).collect::<Vec<_>>().join(", ")
}

impl RandProgram {
    pub fn source(&self) -> String {
        let mut src = String::from(":- chr_constraint ");
        let decls: Vec<String> = self.arities.iter().enumerate().map(|(i, a)| format!("{}/{a}", NAMES[i])).collect();
        src.push_str(&decls.join(", "));
        src.push_str(".\n");
        for (i, r) in self.rules.iter().enumerate() {
            let heads = match r.kind {
                Kind::Simplification => format!("{} <=>", atoms_text(&r.removed)),
                Kind::Propagation => format!("{} ==>", atoms_text(&r.kept)),
                Kind::Simpagation => format!("{} \\ {} <=>", atoms_text(&r.kept), atoms_text(&r.removed)),
            };
            let guard: Vec<String> =
                r.guard.iter().map(|(c, a, b)| format!("{} {} {}", arg_text(a), c.text(), arg_text(b))).collect();
            let guard = if guard.is_empty() { String::new() } else { format!(" {} |", guard.join(", ")) };
            let body = match &r.body {
                None => "fail".to_string(),
                Some(b) if b.is_empty() => "true".to_string(),
                Some(b) => atoms_text(b),
            };
            let _ = writeln!(src, "r{i} @ {heads}{guard} {body}.");
        }
        src
    }

    /// Every way the final store enables a rule: rule index and the
    /// constraint numbers matched, in head order.
    pub fn matches(&self, store: &[(u64, Ground)]) -> Vec<(usize, Vec<u64>)> {
        let mut out = Vec::new();
        for (ri, r) in self.rules.iter().enumerate() {
            let heads: Vec<&Atom> = r.heads().collect();
            let mut chosen = Vec::new();
            let mut env = BTreeMap::new();
            match_heads(r, &heads, store, &mut chosen, &mut env, &mut |cids| out.push((ri, cids.to_vec())));
        }
        out
    }
}

fn match_heads(
    r: &RandRule,
    heads: &[&Atom],
    store: &[(u64, Ground)],
    chosen: &mut Vec<u64>,
    env: &mut BTreeMap<usize, i64>,
    emit: &mut dyn FnMut(&[u64]),
) {
    let Some(head) = heads.get(chosen.len()) else {
        let val = |a: &Arg| match a {
            Arg::Var(v) => env[v],
            Arg::Int(i) => *i,
        };
        if r.guard.iter().all(|(c, a, b)| c.holds(val(a), val(b))) {
            emit(chosen);
        }
        return;
    };
    for (cid, (sym, args)) in store {
        if *sym != head.symbol || chosen.contains(cid) {
            continue;
        }
        let saved = env.clone();
        let ok = head.args.iter().zip(args).all(|(a, &v)| match a {
            Arg::Int(i) => *i == v,
            Arg::Var(x) => *env.entry(*x).or_insert(v) == v,
        });
        if ok {
            chosen.push(*cid);
            match_heads(r, heads, store, chosen, env, emit);
            chosen.pop();
        }
        *env = saved;
    }
}

fn rand_atom(rng: &mut StdRng, symbol: usize, arity: usize, vars: usize) -> Atom {
    let args = (0..arity)
        .map(|_| if rng.gen_bool(0.8) { Arg::Var(rng.gen_range(0..vars)) } else { Arg::Int(rng.gen_range(0..DOMAIN)) })
        .collect();
    Atom { symbol, args }
}

fn head_vars(atoms: &[Atom]) -> Vec<usize> {
    let mut vs: Vec<usize> = atoms
        .iter()
        .flat_map(|a| &a.args)
        .filter_map(|a| match a {
            Arg::Var(v) => Some(*v),
            Arg::Int(_) => None,
        })
        .collect();
    vs.sort_unstable();
    vs.dedup();
    vs
}

fn rand_term(rng: &mut StdRng, vars: &[usize]) -> Arg {
    if !vars.is_empty() && rng.gen_bool(0.75) {
        Arg::Var(vars[rng.gen_range(0..vars.len())])
    } else {
        Arg::Int(rng.gen_range(0..DOMAIN))
    }
}

/// A rule shaped to produce a functional dependency or set semantics:
/// `c(X, Y) \ c(X, Z) <=> true` or `c(X, Y) \ c(X, Y) <=> true`.
fn dependency_rule(rng: &mut StdRng, symbol: usize, arity: usize) -> RandRule {
    let kept = Atom { symbol, args: (0..arity).map(Arg::Var).collect() };
    let removed = if rng.gen_bool(0.5) && arity >= 2 {
        let mut args: Vec<Arg> = (0..arity).map(Arg::Var).collect();
        args[arity - 1] = Arg::Var(arity);
        Atom { symbol, args }
    } else {
        kept.clone()
    };
    RandRule { kind: Kind::Simpagation, kept: vec![kept], removed: vec![removed], guard: Vec::new(), body: Some(Vec::new()) }
}

pub fn random_program(rng: &mut StdRng) -> RandProgram {
    let arities: Vec<usize> = (0..NAMES.len()).map(|_| rng.gen_range(1..=2)).collect();
    let n_rules = rng.gen_range(1..=6);
    let mut rules = Vec::new();
    while rules.len() < n_rules {
        let sym = rng.gen_range(0..NAMES.len());
        if rng.gen_bool(0.2) {
            rules.push(dependency_rule(rng, sym, arities[sym]));
            continue;
        }
        let kind = match rng.gen_range(0..3) {
            0 => Kind::Simplification,
            1 => Kind::Propagation,
            _ => Kind::Simpagation,
        };
        let n_heads = if kind == Kind::Simpagation { 2 } else { rng.gen_range(1..=2) };
        let vars = rng.gen_range(1..=VARS.len());
        let heads: Vec<Atom> = (0..n_heads)
            .map(|_| {
                let s = rng.gen_range(0..NAMES.len());
                rand_atom(rng, s, arities[s], vars)
            })
            .collect();
        let (kept, removed) = match kind {
            Kind::Simplification => (Vec::new(), heads),
            Kind::Propagation => (heads, Vec::new()),
            Kind::Simpagation => (heads[..1].to_vec(), heads[1..].to_vec()),
        };
        let all: Vec<Atom> = kept.iter().chain(&removed).cloned().collect();
        let bound = head_vars(&all);
        let guard = (0..rng.gen_range(0..=1))
            .map(|_| {
                let c = [Cmp::Lt, Cmp::Le, Cmp::Ne, Cmp::Eq][rng.gen_range(0..4)];
                (c, rand_term(rng, &bound), rand_term(rng, &bound))
            })
            .collect();
        let top = all.iter().map(|a| a.symbol).max().unwrap_or(0);
        let body = if rng.gen_bool(0.05) {
            None
        } else if top + 1 >= NAMES.len() || rng.gen_bool(0.25) {
            Some(Vec::new())
        } else {
            let n = rng.gen_range(1..=2);
            Some(
                (0..n)
                    .map(|_| {
                        let s = rng.gen_range(top + 1..NAMES.len());
                        let args = (0..arities[s]).map(|_| rand_term(rng, &bound)).collect();
                        Atom { symbol: s, args }
                    })
                    .collect(),
            )
        };
        rules.push(RandRule { kind, kept, removed, guard, body });
    }
    RandProgram { arities, rules }
}

/// Between 1 and 8 ground constraints.
pub fn random_goal(rng: &mut StdRng, prog: &RandProgram) -> Vec<Ground> {
    (0..rng.gen_range(1..=8))
        .map(|_| {
            let s = rng.gen_range(0..NAMES.len());
            (s, (0..prog.arities[s]).map(|_| rng.gen_range(0..DOMAIN)).collect())
        })
        .collect()
}

pub fn goal_text(goal: &[Ground]) -> String {
    goal.iter()
        .map(|(s, args)| {
            let a: Vec<String> = args.iter().map(i64::to_string).collect();
            format!("{}({})", NAMES[*s], a.join(", "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Checks a quiescent store: no removal rule is enabled, and every enabled
/// propagation instance is one that fired.
pub fn check_quiescent(prog: &RandProgram, store: &[(u64, Ground)], fired: &HashSet<(usize, Vec<u64>)>) -> Result<(), String> {
    for (rule, cids) in prog.matches(store) {
        if prog.rules[rule].kind != Kind::Propagation {
            return Err(format!("rule r{rule} still enabled on {cids:?}"));
        }
        if !fired.contains(&(rule, cids.clone())) {
            return Err(format!("propagation r{rule} never fired on {cids:?}"));
        }
    }
    Ok(())
}

/// How a checked run ended.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Ending {
    Quiescent,
    Failed,
}

/// Runs `goal` under `flags`, checking store/index coherence after every
/// transition, that no propagation instance fires twice, and at quiescence
/// that the store is a fixpoint of the rules and satisfies every inferred
/// functional dependency.
pub fn run_checked(prog: &RandProgram, goal: &[Ground], flags: chrforge::plancompile::OptFlags) -> Result<Ending, String> {
    use chrforge::plancompile::compile;
    use chrforge::runtime::{Engine, RunConfig, RunError, Transition};
    use chrforge::surface::{parse_goal, parse_program, validate_program};
    use std::cell::RefCell;

    let src = prog.source();
    let program = parse_program(&src).map_err(|e| format!("{e}\n{src}"))?;
    validate_program(&program).map_err(|e| format!("{e:?}\n{src}"))?;
    let fired: RefCell<HashSet<(usize, Vec<u64>)>> = RefCell::new(HashSet::new());
    let compiled = compile(&program, flags);
    let goal_atoms = parse_goal(&program, &goal_text(goal)).map_err(|e| e.to_string())?;
    let goal_atoms: Vec<_> = goal_atoms.into_iter().map(|g| (g.symbol, g.args)).collect();
    let mut engine = Engine::new(&compiled, RunConfig { depth_limit: 10_000, ..RunConfig::default() });
    engine.set_monitor(Box::new(|store, t| {
        store.check_coherence()?;
        if let Transition::Fire { rule: Some(rule), history: Some(cids), .. } = t {
            if !fired.borrow_mut().insert((*rule, cids.clone())) {
                return Err(format!("r{rule} fired twice on {cids:?}"));
            }
        }
        Ok(())
    }));
    match engine.solve(&goal_atoms) {
        Ok(()) => {}
        Err(RunError::Failed(_)) => return Ok(Ending::Failed),
        Err(e) => return Err(format!("{e}\n{src}goal: {}", goal_text(goal))),
    }
    let context = || format!("\n{src}goal: {}\nflags: {flags:?}", goal_text(goal));
    let store = &engine.store;
    let mut ground: Vec<(u64, Ground)> = Vec::new();
    for c in 0..store.created() as u64 {
        let slot = store.get(c);
        if !slot.alive {
            continue;
        }
        if !slot.stored {
            return Err(format!("live constraint #{c} missing from the store{}", context()));
        }
        let name = &program.decl(slot.symbol).name;
        let sym = NAMES.iter().position(|n| n == name).expect("generated symbol");
        let args = slot.args.iter().map(|v| v.as_int().expect("integer argument")).collect();
        ground.push((c, (sym, args)));
    }
    check_quiescent(prog, &ground, &fired.borrow()).map_err(|e| e + &context())?;
    for s in program.symbols() {
        let sym = NAMES.iter().position(|n| *n == program.decl(s).name).expect("generated symbol");
        let info = compiled.analysis.info(s);
        if info.never_stored && ground.iter().any(|(_, (g, _))| *g == sym) {
            return Err(format!("never-stored {} is in the final store{}", NAMES[sym], context()));
        }
        for fd in &info.fds {
            let mut seen: BTreeMap<Vec<i64>, i64> = BTreeMap::new();
            for (_, (g, args)) in &ground {
                if *g != sym {
                    continue;
                }
                let key: Vec<i64> = fd.sources.iter().map(|&i| args[i]).collect();
                if let Some(prev) = seen.insert(key, args[fd.target]) {
                    if prev != args[fd.target] {
                        return Err(format!("{}: dependency {fd} violated{}", NAMES[sym], context()));
                    }
                }
            }
        }
    }
    Ok(Ending::Quiescent)
}
