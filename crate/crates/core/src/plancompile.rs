//! Compiles every constraint's occurrences into executable plans: search
//! kind, matching steps over slots, continuation wiring, storage and
//! deletion placement, and duplicate-removal injection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use crate::analysis::{analyze_with, AnalysisOptions, AnalysisReport, SetForm, StoragePoint};
use crate::indexsel::{is_singleton_lookup, select_index, set_valid, IndexKind, IndexOptions, IndexSpec, ReducedLookup};
use crate::joinorder::{GoalItem, JoinPlan, JoinProblem, Lookup, LookupArg};
use crate::surface::{
    ArithOp, BodyItem, BuiltinId, BuiltinKind, Expr, GuardCall, HeadAtom, HeadRole, Program, Rule, RuleKind,
    SymbolId, Term,
};
use crate::value::Value;

/// Independent optimization switches; all on by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub struct OptFlags {
    pub join_order: bool,
    pub index_auto: bool,
    pub late_storage: bool,
    pub continuation: bool,
    pub set_dedup: bool,
    pub symmetry: bool,
}

impl Default for OptFlags {
    fn default() -> Self {
        OptFlags::all()
    }
}

impl OptFlags {
    pub fn all() -> Self {
        OptFlags {
            join_order: true,
            index_auto: true,
            late_storage: true,
            continuation: true,
            set_dedup: true,
            symmetry: true,
        }
    }

    pub fn none() -> Self {
        OptFlags {
            join_order: false,
            index_auto: false,
            late_storage: false,
            continuation: false,
            set_dedup: false,
            symmetry: false,
        }
    }

    /// All 64 combinations.
    pub fn combinations() -> impl Iterator<Item = OptFlags> {
        (0u8..64).map(|m| OptFlags {
            join_order: m & 1 != 0,
            index_auto: m & 2 != 0,
            late_storage: m & 4 != 0,
            continuation: m & 8 != 0,
            set_dedup: m & 16 != 0,
            symmetry: m & 32 != 0,
        })
    }

    fn index_options(&self) -> IndexOptions {
        IndexOptions {
            index_auto: self.index_auto,
            symmetry: self.symmetry,
            set_dedup: self.set_dedup,
        }
    }
}

/// An expression over frame slots.
#[derive(Clone, Debug, PartialEq)]
pub enum CExpr {
    Slot(usize),
    Const(Value),
    Compound(String, Vec<CExpr>),
    Arith(ArithOp, Box<CExpr>, Box<CExpr>),
    Neg(Box<CExpr>),
}

/// How one argument of a matched constraint is checked.
#[derive(Clone, Debug, PartialEq)]
pub enum ArgMatch {
    Const(Value),
    /// Must equal the value already in the slot.
    Bound(usize),
    /// Binds the slot.
    Bind(usize),
}

/// A builtin call with its mode fixed: `out` names the argument that binds a
/// slot; without it the call is a test.
#[derive(Clone, Debug)]
pub struct CGuard {
    pub builtin: BuiltinId,
    pub kind: BuiltinKind,
    pub args: Vec<CExpr>,
    pub out: Option<(usize, usize)>,
}

/// Value source for one position of an index query.
#[derive(Clone, Debug, PartialEq)]
pub enum QueryVal {
    Const(Value),
    Slot(usize),
}

#[derive(Clone, Debug)]
pub struct PartnerStep {
    /// Head index in the rule (kept heads first).
    pub head: usize,
    pub symbol: SymbolId,
    pub removed: bool,
    pub args: Vec<ArgMatch>,
    /// Values for the leading index key positions (trees only).
    pub key_prefix: Vec<QueryVal>,
    /// Candidates are mirror images under this swap.
    pub mirror: Option<(usize, usize)>,
    /// The matched constraint must differ from the active constraint.
    pub distinct_from_active: bool,
    /// The matched constraint must differ from these earlier steps' matches.
    pub distinct_from_steps: Vec<usize>,
    pub singleton: bool,
}

#[derive(Clone, Debug)]
pub enum Step {
    Partner(PartnerStep),
    Guard(CGuard),
}

#[derive(Clone, Debug)]
pub enum BodyOp {
    Call { symbol: SymbolId, args: Vec<CExpr> },
    Builtin(CGuard),
    Fail,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Search {
    Existential,
    Universal,
}

/// Where control goes next: an index into the constraint's plan list.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Next {
    Plan(usize),
    Halt,
}

/// Whose constraint number fills a history tuple position.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum HistorySource {
    Active,
    Step(usize),
}

#[derive(Clone, Debug)]
pub struct OccurrencePlan {
    /// Occurrence number; 0 for the injected duplicate-removal occurrence.
    pub occurrence: u32,
    /// Source rule index, `None` for the injected occurrence.
    pub rule: Option<usize>,
    pub rule_name: String,
    pub active_removed: bool,
    pub search: Search,
    pub active_args: Vec<ArgMatch>,
    pub steps: Vec<Step>,
    pub body: Vec<BodyOp>,
    pub slots: usize,
    /// Present for propagation rules: constraint numbers in head order.
    pub history: Option<Vec<HistorySource>>,
    pub fail_next: Next,
    pub succ_next: Next,
    /// The active is stored (if not yet) before the body runs.
    pub insert_before_body: bool,
    /// The active is stored (if not yet) when control leaves this occurrence.
    pub insert_on_exit: bool,
    /// The active may already be stored when this occurrence removes it.
    pub delete_active: bool,
    pub join: Option<JoinPlan>,
    /// Source text of the search goal.
    pub goal_text: String,
}

#[derive(Clone, Debug)]
pub struct ConstraintProgram {
    pub symbol: SymbolId,
    /// Reachable plans in execution order; `plans[0]` runs first.
    pub plans: Vec<OccurrencePlan>,
    pub storage: StoragePoint,
    pub dedup_injected: bool,
    /// Occurrences compiled away by continuation analysis.
    pub omitted: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct CompiledProgram {
    pub program: Program,
    pub flags: OptFlags,
    pub analysis: AnalysisReport,
    pub indexes: Vec<IndexSpec>,
    pub constraints: Vec<ConstraintProgram>,
}

/// Compiles `program` under `flags`.
pub fn compile(program: &Program, flags: OptFlags) -> CompiledProgram {
    let analysis = analyze_with(
        program,
        AnalysisOptions {
            late_storage: flags.late_storage,
        },
    );
    let fds: Vec<_> = analysis.constraints.iter().map(|c| c.fds.clone()).collect();
    let mut drafts: Vec<Vec<Draft>> = Vec::new();
    for sym in program.symbols() {
        let info = analysis.info(sym);
        let mut list = Vec::new();
        if info.set == SetForm::Behavioral && flags.set_dedup {
            list.push(dedup_draft(program, sym));
        }
        for &occ in &info.exec_order {
            if info.dropped.contains(&occ) {
                continue;
            }
            let (ri, hi) = program.find_occurrence(sym, occ).expect("occurrence exists");
            let join = JoinProblem::new(program, &program.rules[ri], hi, &fds).best(flags.join_order);
            list.push(occurrence_draft(program, ri, hi, join));
        }
        drafts.push(list);
    }

    // Index selection over every partner lookup of each symbol.
    let mut lookups: Vec<Vec<Lookup>> = vec![Vec::new(); program.decls.len()];
    for d in drafts.iter().flatten() {
        for s in &d.partners {
            lookups[s.lookup.symbol.0].push(s.lookup.clone());
        }
    }
    let mut indexes = Vec::new();
    let mut reduced: Vec<BTreeMap<Lookup, ReducedLookup>> = Vec::new();
    for sym in program.symbols() {
        let (spec, red) = select_index(program, analysis.info(sym), &lookups[sym.0], flags.index_options());
        indexes.push(spec);
        reduced.push(lookups[sym.0].iter().cloned().zip(red).collect());
    }

    let constraints = program
        .symbols()
        .zip(drafts)
        .map(|(sym, list)| finish_constraint(program, &analysis, &indexes, &reduced, flags, sym, list))
        .collect();
    CompiledProgram {
        program: program.clone(),
        flags,
        analysis,
        indexes,
        constraints,
    }
}

/// A partner step before its index query is known.
struct DraftPartner {
    step_index: usize,
    lookup: Lookup,
    /// Values for each argument position when it is fixed.
    fixed_vals: Vec<Option<QueryVal>>,
}

/// An occurrence compiled up to index-dependent details.
struct Draft {
    occurrence: u32,
    rule: Option<usize>,
    rule_name: String,
    kind: RuleKind,
    active_removed: bool,
    active_args: Vec<ArgMatch>,
    steps: Vec<Step>,
    partners: Vec<DraftPartner>,
    body: Vec<BodyOp>,
    slots: usize,
    history: Option<Vec<HistorySource>>,
    join: Option<JoinPlan>,
    goal_text: String,
    /// Canonical shape for continuation subsumption.
    shape: Shape,
}

/// Slot allocation while walking a goal left to right.
#[derive(Default)]
struct Slots {
    map: HashMap<String, usize>,
}

impl Slots {
    fn get(&self, v: &str) -> Option<usize> {
        self.map.get(v).copied()
    }

    fn bind(&mut self, v: &str) -> usize {
        let n = self.map.len();
        *self.map.entry(v.to_string()).or_insert(n)
    }

    fn count(&self) -> usize {
        self.map.len()
    }
}

fn match_args(args: &[Term], slots: &mut Slots) -> Vec<ArgMatch> {
    args.iter()
        .map(|t| match t {
            Term::Var(v) => match slots.get(v) {
                Some(s) => ArgMatch::Bound(s),
                None => ArgMatch::Bind(slots.bind(v)),
            },
            _ => ArgMatch::Const(t.to_value().expect("ground head argument")),
        })
        .collect()
}

fn compile_expr(e: &Expr, slots: &Slots) -> CExpr {
    let all_const = |args: &[CExpr]| args.iter().all(|a| matches!(a, CExpr::Const(_)));
    match e {
        Expr::Var(v) => CExpr::Slot(slots.get(v).expect("bound variable")),
        Expr::Int(i) => CExpr::Const(Value::Int(*i)),
        Expr::Atom(a) => CExpr::Const(Value::atom(a)),
        Expr::Compound(n, args) => {
            let cargs: Vec<CExpr> = args.iter().map(|a| compile_expr(a, slots)).collect();
            if all_const(&cargs) {
                let vals = cargs
                    .into_iter()
                    .map(|a| match a {
                        CExpr::Const(v) => v,
                        _ => unreachable!(),
                    })
                    .collect();
                CExpr::Const(Value::compound(n, vals))
            } else {
                CExpr::Compound(n.clone(), cargs)
            }
        }
        Expr::Arith(op, a, b) => CExpr::Arith(*op, Box::new(compile_expr(a, slots)), Box::new(compile_expr(b, slots))),
        Expr::Neg(a) => CExpr::Neg(Box::new(compile_expr(a, slots))),
    }
}

/// Fixes the mode of a call given the variables bound so far.
fn compile_call(program: &Program, g: &GuardCall, slots: &mut Slots) -> CGuard {
    let sig = program.builtins.sig(g.builtin);
    let out_pos = sig.output.and_then(|k| match &g.args[k] {
        Expr::Var(v) if g.outvars.contains(v) && slots.get(v).is_none() => Some(k),
        _ => None,
    });
    let args = g
        .args
        .iter()
        .enumerate()
        .map(|(k, a)| {
            if Some(k) == out_pos {
                CExpr::Const(Value::Int(0))
            } else {
                compile_expr(a, slots)
            }
        })
        .collect();
    let out = out_pos.map(|k| {
        let Expr::Var(v) = &g.args[k] else { unreachable!() };
        (k, slots.bind(v))
    });
    CGuard {
        builtin: g.builtin,
        kind: sig.kind.clone(),
        args,
        out,
    }
}

fn occurrence_draft(program: &Program, ri: usize, hi: usize, join: JoinPlan) -> Draft {
    let rule = &program.rules[ri];
    let (role, active) = rule.head(hi);
    let mut slots = Slots::default();
    let active_args = match_args(&active.args, &mut slots);
    let mut steps = Vec::new();
    let mut partners = Vec::new();
    let mut step_of_head: HashMap<usize, usize> = HashMap::new();
    for item in &join.goal {
        match *item {
            GoalItem::Partner(h) => {
                let (prole, atom) = rule.head(h);
                let fixed_vals: Vec<Option<QueryVal>> = atom
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => slots.get(v).map(QueryVal::Slot),
                        _ => Some(QueryVal::Const(t.to_value().expect("ground"))),
                    })
                    .collect();
                let lookup = Lookup {
                    symbol: atom.symbol,
                    pattern: atom
                        .args
                        .iter()
                        .zip(&fixed_vals)
                        .map(|(t, f)| match f {
                            Some(_) => LookupArg::Fixed(t.clone()),
                            None => LookupArg::Free,
                        })
                        .collect(),
                };
                let args = match_args(&atom.args, &mut slots);
                let step_index = steps.len();
                let distinct_from_steps = step_of_head
                    .iter()
                    .filter(|(&oh, _)| rule.head(oh).1.symbol == atom.symbol)
                    .map(|(_, &s)| s)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                step_of_head.insert(h, step_index);
                steps.push(Step::Partner(PartnerStep {
                    head: h,
                    symbol: atom.symbol,
                    removed: prole == HeadRole::Removed,
                    args,
                    key_prefix: Vec::new(),
                    mirror: None,
                    distinct_from_active: atom.symbol == active.symbol,
                    distinct_from_steps,
                    singleton: false,
                }));
                partners.push(DraftPartner {
                    step_index,
                    lookup,
                    fixed_vals,
                });
            }
            GoalItem::Guard(i) => steps.push(Step::Guard(compile_call(program, &rule.guard[i], &mut slots))),
        }
    }
    let body = compile_body(program, &rule.body, &mut slots);
    let history = (rule.kind == RuleKind::Propagation).then(|| {
        (0..rule.head_count())
            .map(|h| if h == hi { HistorySource::Active } else { HistorySource::Step(step_of_head[&h]) })
            .collect()
    });
    Draft {
        occurrence: active.occurrence,
        rule: Some(ri),
        rule_name: rule.display_name(),
        kind: rule.kind,
        active_removed: role == HeadRole::Removed,
        active_args,
        steps,
        partners,
        body,
        slots: slots.count(),
        history,
        goal_text: join.render_goal(program, rule),
        join: Some(join),
        shape: Shape::of(rule, hi),
    }
}

fn compile_body(program: &Program, body: &[BodyItem], slots: &mut Slots) -> Vec<BodyOp> {
    body.iter()
        .filter_map(|item| match item {
            BodyItem::True => None,
            BodyItem::Fail => Some(BodyOp::Fail),
            BodyItem::Builtin(g) => Some(BodyOp::Builtin(compile_call(program, g, slots))),
            BodyItem::Constraint { symbol, args } => Some(BodyOp::Call {
                symbol: *symbol,
                args: args.iter().map(|a| compile_expr(a, slots)).collect(),
            }),
        })
        .collect()
}

/// `p(x̄) \ p(x̄) <=> true` with the active on the removed side.
fn dedup_draft(program: &Program, sym: SymbolId) -> Draft {
    let arity = program.arity(sym);
    let active_args: Vec<ArgMatch> = (0..arity).map(ArgMatch::Bind).collect();
    let lookup = Lookup {
        symbol: sym,
        pattern: (0..arity).map(|i| LookupArg::Fixed(Term::Var(format!("X{i}")))).collect(),
    };
    let step = PartnerStep {
        head: 0,
        symbol: sym,
        removed: false,
        args: (0..arity).map(ArgMatch::Bound).collect(),
        key_prefix: Vec::new(),
        mirror: None,
        distinct_from_active: true,
        distinct_from_steps: Vec::new(),
        singleton: false,
    };
    let decl = program.decl(sym);
    let head_text = if arity == 0 {
        decl.name.clone()
    } else {
        let vs: Vec<String> = (0..arity).map(|i| format!("X{i}")).collect();
        format!("{}({})", decl.name, vs.join(", "))
    };
    Draft {
        occurrence: 0,
        rule: None,
        rule_name: "dedup".to_string(),
        kind: RuleKind::Simpagation,
        active_removed: true,
        active_args,
        steps: vec![Step::Partner(step)],
        partners: vec![DraftPartner {
            step_index: 0,
            lookup,
            fixed_vals: (0..arity).map(|i| Some(QueryVal::Slot(i))).collect(),
        }],
        body: Vec::new(),
        slots: arity,
        history: None,
        join: None,
        goal_text: head_text,
        shape: Shape::dedup(arity, sym),
    }
}

/// An occurrence reduced to what continuation subsumption compares.
#[derive(Clone, Debug)]
struct Shape {
    active: (SymbolId, Vec<Term>),
    partners: Vec<(SymbolId, Vec<Term>)>,
    guards: Vec<(BuiltinId, Vec<Expr>)>,
}

impl Shape {
    fn of(rule: &Rule, hi: usize) -> Shape {
        let atom = |h: &HeadAtom| (h.symbol, h.args.clone());
        Shape {
            active: atom(rule.head(hi).1),
            partners: rule.heads().enumerate().filter(|&(h, _)| h != hi).map(|(_, (_, a))| atom(a)).collect(),
            guards: rule.guard.iter().map(|g| (g.builtin, g.args.clone())).collect(),
        }
    }

    fn dedup(arity: usize, sym: SymbolId) -> Shape {
        let args: Vec<Term> = (0..arity).map(|i| Term::Var(format!("X{i}"))).collect();
        Shape {
            active: (sym, args.clone()),
            partners: vec![(sym, args)],
            guards: Vec::new(),
        }
    }
}

type Renaming = HashMap<String, String>;

fn unify_term(a: &Term, b: &Term, s: &mut Renaming) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => match s.get(x) {
            Some(z) => z == y,
            None => {
                s.insert(x.clone(), y.clone());
                true
            }
        },
        (Term::Var(_), _) => false,
        _ => a == b,
    }
}

fn unify_expr(a: &Expr, b: &Expr, s: &mut Renaming) -> bool {
    match (a, b) {
        (Expr::Var(x), Expr::Var(y)) => match s.get(x) {
            Some(z) => z == y,
            None => {
                s.insert(x.clone(), y.clone());
                true
            }
        },
        (Expr::Compound(n, xs), Expr::Compound(m, ys)) => {
            n == m && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_expr(x, y, s))
        }
        (Expr::Arith(o, a1, a2), Expr::Arith(p, b1, b2)) => o == p && unify_expr(a1, b1, s) && unify_expr(a2, b2, s),
        (Expr::Neg(x), Expr::Neg(y)) => unify_expr(x, y, s),
        (Expr::Var(_), _) => false,
        _ => a == b,
    }
}

fn unify_atoms(a: &(SymbolId, Vec<Term>), b: &(SymbolId, Vec<Term>), s: &mut Renaming) -> bool {
    a.0 == b.0 && a.1.len() == b.1.len() && a.1.iter().zip(&b.1).all(|(x, y)| unify_term(x, y, s))
}

/// Whether a renaming maps `from` into `to`: active onto active, partners
/// injectively onto partners and every guard onto some guard. Then any
/// match of `to` induces a match of `from`.
fn subsumes(program: &Program, from: &Shape, to: &Shape) -> bool {
    let mut s = Renaming::new();
    if !unify_atoms(&from.active, &to.active, &mut s) {
        return false;
    }
    let guards: Vec<&(BuiltinId, Vec<Expr>)> = from
        .guards
        .iter()
        .filter(|g| !matches!(program.builtins.sig(g.0).kind, BuiltinKind::True))
        .collect();
    let mut used = vec![false; to.partners.len()];
    map_partners(from, to, &guards, 0, &mut used, &s)
}

fn map_partners(
    from: &Shape,
    to: &Shape,
    guards: &[&(BuiltinId, Vec<Expr>)],
    k: usize,
    used: &mut [bool],
    s: &Renaming,
) -> bool {
    if k == from.partners.len() {
        return map_guards(to, guards, s);
    }
    for j in 0..to.partners.len() {
        if used[j] {
            continue;
        }
        let mut s2 = s.clone();
        if unify_atoms(&from.partners[k], &to.partners[j], &mut s2) {
            used[j] = true;
            let ok = map_partners(from, to, guards, k + 1, used, &s2);
            used[j] = false;
            if ok {
                return true;
            }
        }
    }
    false
}

fn map_guards(to: &Shape, guards: &[&(BuiltinId, Vec<Expr>)], s: &Renaming) -> bool {
    let Some((g, rest)) = guards.split_first() else { return true };
    to.guards.iter().any(|t| {
        let mut s2 = s.clone();
        t.0 == g.0
            && t.1.len() == g.1.len()
            && g.1.iter().zip(&t.1).all(|(a, b)| unify_expr(a, b, &mut s2))
            && map_guards(to, rest, &s2)
    })
}

fn finish_constraint(
    program: &Program,
    analysis: &AnalysisReport,
    indexes: &[IndexSpec],
    reduced: &[BTreeMap<Lookup, ReducedLookup>],
    flags: OptFlags,
    sym: SymbolId,
    mut drafts: Vec<Draft>,
) -> ConstraintProgram {
    let info = analysis.info(sym);
    let dedup_injected = drafts.first().is_some_and(|d| d.occurrence == 0);

    // Search kinds and index queries.
    let mut searches = Vec::new();
    for d in &mut drafts {
        let mut all_singleton = true;
        for p in &d.partners {
            let pinfo = analysis.info(p.lookup.symbol);
            let fixed = p.lookup.fixed_positions();
            let singleton = is_singleton_lookup(
                &fixed,
                program.arity(p.lookup.symbol),
                &pinfo.fds,
                set_valid(pinfo, flags.set_dedup),
            );
            all_singleton &= singleton && p.lookup.symbol != sym;
            let red = &reduced[p.lookup.symbol.0][&p.lookup];
            let Step::Partner(step) = &mut d.steps[p.step_index] else { unreachable!() };
            step.singleton = singleton;
            step.mirror = red.mirror;
            if let IndexKind::Tree { key } = &indexes[p.lookup.symbol.0].kind {
                step.key_prefix = key[..red.query.len()]
                    .iter()
                    .map(|&pos| {
                        let src = match red.mirror {
                            Some((i, j)) if pos == i => j,
                            Some((i, j)) if pos == j => i,
                            _ => pos,
                        };
                        p.fixed_vals[src].clone().expect("queried position is fixed")
                    })
                    .collect();
            }
        }
        searches.push(if d.active_removed || all_singleton {
            Search::Existential
        } else {
            Search::Universal
        });
    }

    // Continuations over the execution order.
    let n = drafts.len();
    let next_of = |i: usize| if i + 1 < n { Next::Plan(i + 1) } else { Next::Halt };
    let mut fail_next: Vec<Next> = (0..n).map(next_of).collect();
    let succ_next: Vec<Next> = (0..n)
        .map(|i| {
            if searches[i] == Search::Existential && drafts[i].active_removed {
                Next::Halt
            } else {
                next_of(i)
            }
        })
        .collect();
    if flags.continuation {
        for i in 0..n {
            if searches[i] != Search::Existential || drafts[i].kind == RuleKind::Propagation {
                continue;
            }
            let mut j = i + 1;
            while j < n
                && searches[j] == Search::Existential
                && subsumes(program, &drafts[i].shape, &drafts[j].shape)
            {
                j += 1;
            }
            fail_next[i] = if j < n { Next::Plan(j) } else { Next::Halt };
        }
    }
    let mut reachable = vec![false; n];
    let mut todo = if n > 0 { vec![0] } else { vec![] };
    while let Some(i) = todo.pop() {
        if std::mem::replace(&mut reachable[i], true) {
            continue;
        }
        for nx in [fail_next[i], succ_next[i]] {
            if let Next::Plan(k) = nx {
                todo.push(k);
            }
        }
    }
    let mut new_index = vec![usize::MAX; n];
    let mut k = 0;
    for i in 0..n {
        if reachable[i] {
            new_index[i] = k;
            k += 1;
        }
    }
    let remap = |nx: Next| match nx {
        Next::Plan(i) => Next::Plan(new_index[i]),
        Next::Halt => Next::Halt,
    };

    // Storage placement on the execution-order axis.
    let storage_pos = |occ: u32| info.exec_order.iter().position(|&o| o == occ);
    let rank = match info.storage {
        StoragePoint::Entry => -1,
        StoragePoint::Occurrence(o) => storage_pos(o).map_or(i64::MAX, |p| p as i64),
        StoragePoint::End | StoragePoint::Never => i64::MAX,
    };
    let pos_of = |d: &Draft| {
        if d.occurrence == 0 {
            -1
        } else {
            storage_pos(d.occurrence).map_or(i64::MAX, |p| p as i64)
        }
    };

    let mut plans = Vec::new();
    let mut omitted = Vec::new();
    for (i, d) in drafts.into_iter().enumerate() {
        if !reachable[i] {
            omitted.push(d.occurrence);
            continue;
        }
        let pos = pos_of(&d);
        let is_storage_occ = info.storage == StoragePoint::Occurrence(d.occurrence) && d.occurrence != 0;
        plans.push(OccurrencePlan {
            occurrence: d.occurrence,
            rule: d.rule,
            rule_name: d.rule_name,
            active_removed: d.active_removed,
            search: searches[i],
            active_args: d.active_args,
            steps: d.steps,
            body: d.body,
            slots: d.slots,
            history: d.history,
            fail_next: remap(fail_next[i]),
            succ_next: remap(succ_next[i]),
            insert_before_body: !d.active_removed && rank >= 0 && pos >= rank,
            insert_on_exit: is_storage_occ,
            delete_active: d.active_removed && (rank < 0 || pos > rank),
            join: d.join,
            goal_text: d.goal_text,
        });
    }
    ConstraintProgram {
        symbol: sym,
        plans,
        storage: info.storage,
        dedup_injected,
        omitted,
    }
}

fn next_text(program: &ConstraintProgram, nx: Next) -> String {
    match nx {
        Next::Plan(i) => format!("occ {}", program.plans[i].occurrence),
        Next::Halt => "halt".to_string(),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

impl CompiledProgram {
    pub fn constraint(&self, sym: SymbolId) -> &ConstraintProgram {
        &self.constraints[sym.0]
    }

    /// Symbols sorted by name then arity.
    pub fn sorted_symbols(&self) -> Vec<SymbolId> {
        let mut syms: Vec<SymbolId> = self.program.symbols().collect();
        syms.sort_by(|a, b| {
            let (x, y) = (self.program.decl(*a), self.program.decl(*b));
            (&x.name, x.arity).cmp(&(&y.name, y.arity))
        });
        syms
    }

    /// Join plans: one line per occurrence.
    pub fn render_joins(&self) -> String {
        let mut out = String::new();
        for sym in self.sorted_symbols() {
            let decl = self.program.decl(sym);
            for p in &self.constraints[sym.0].plans {
                if let Some(j) = &p.join {
                    let _ = writeln!(
                        out,
                        "join {decl} occ {} [{}] score {} goal: {}",
                        p.occurrence,
                        p.rule_name,
                        j.score,
                        if p.goal_text.is_empty() { "true" } else { &p.goal_text }
                    );
                }
            }
        }
        out
    }

    pub fn render_indexes(&self) -> String {
        let mut out = String::new();
        for sym in self.sorted_symbols() {
            let _ = writeln!(out, "index {} = {}", self.program.decl(sym), self.indexes[sym.0].kind);
        }
        out
    }

    pub fn render_plans(&self) -> String {
        let mut out = String::new();
        for sym in self.sorted_symbols() {
            let c = &self.constraints[sym.0];
            let order: Vec<String> = c.plans.iter().map(|p| p.occurrence.to_string()).collect();
            let _ = writeln!(
                out,
                "constraint {}: order {} | {}{}",
                self.program.decl(sym),
                if order.is_empty() { "-".to_string() } else { order.join(",") },
                c.storage,
                if c.dedup_injected { " | dedup injected" } else { "" }
            );
            for p in &c.plans {
                let _ = writeln!(
                    out,
                    "  occ {} [{}] {} active={} goal: {} fail->{} succ->{} insert {} delete-active {}{}",
                    p.occurrence,
                    p.rule_name,
                    match p.search {
                        Search::Existential => "existential",
                        Search::Universal => "universal",
                    },
                    if p.active_removed { "removed" } else { "kept" },
                    if p.goal_text.is_empty() { "true" } else { &p.goal_text },
                    next_text(c, p.fail_next),
                    next_text(c, p.succ_next),
                    yes_no(p.insert_before_body || p.insert_on_exit),
                    yes_no(p.delete_active),
                    if p.history.is_some() { " history" } else { "" }
                );
            }
            if !c.omitted.is_empty() {
                let o: Vec<String> = c.omitted.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(out, "  omitted occ {}", o.join(","));
            }
        }
        out
    }
}

impl fmt::Display for CompiledProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.render_indexes(), self.render_joins(), self.render_plans())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse_program;

    const GCD: &str = ":- chr_constraint gcd/1.\n\
        base @ gcd(0) <=> true.\n\
        pair @ gcd(N) \\ gcd(M) <=> M >= N | gcd(M - N).\n";

    #[test]
    fn gcd_plan_shape() {
        let c = compile(&parse_program(GCD).unwrap(), OptFlags::all());
        let g = c.constraint(SymbolId(0));
        let occs: Vec<u32> = g.plans.iter().map(|p| p.occurrence).collect();
        assert_eq!(occs, vec![1, 3, 2]);
        assert_eq!(c.indexes[0].kind, IndexKind::YesNo);
        assert_eq!(g.plans[0].search, Search::Existential);
        assert_eq!(g.plans[1].search, Search::Existential);
        assert_eq!(g.plans[2].search, Search::Universal);
        let inserts: Vec<u32> = g
            .plans
            .iter()
            .filter(|p| p.insert_before_body || p.insert_on_exit)
            .map(|p| p.occurrence)
            .collect();
        assert_eq!(inserts, vec![2]);
        assert!(g.plans.iter().all(|p| !p.delete_active));
        assert_eq!(g.plans[0].fail_next, Next::Plan(1));
        assert_eq!(g.plans[0].succ_next, Next::Halt);
    }

    #[test]
    fn eager_storage_deletes_active() {
        let flags = OptFlags {
            late_storage: false,
            ..OptFlags::all()
        };
        let c = compile(&parse_program(GCD).unwrap(), flags);
        let g = c.constraint(SymbolId(0));
        assert!(g.plans[0].delete_active && g.plans[1].delete_active);
        assert_eq!(c.indexes[0].kind, IndexKind::List);
    }

    #[test]
    fn symmetric_simplification_second_occurrence_omitted() {
        let p = parse_program(
            ":- chr_constraint b/3.\n\
             i @ b(X, L1, U1), b(X, L2, U2) <=> b(X, max(L1, L2), min(U1, U2)).\n",
        )
        .unwrap();
        let c = compile(&p, OptFlags::all());
        let b = c.constraint(SymbolId(0));
        assert_eq!(b.omitted, vec![2]);
        let off = compile(&p, OptFlags { continuation: false, ..OptFlags::all() });
        assert!(off.constraint(SymbolId(0)).omitted.is_empty());
    }

    #[test]
    fn dedup_injected_for_behavioral_set() {
        let p = parse_program(
            ":- chr_constraint e/2, b/2.\n\
             bs @ b(X, L) \\ b(X, L) <=> true.\n\
             eq @ e(X, Y), b(X, L) ==> b(Y, L).\n",
        )
        .unwrap();
        let c = compile(&p, OptFlags::all());
        let e = c.constraint(SymbolId(0));
        assert!(e.dedup_injected);
        assert_eq!(e.plans[0].occurrence, 0);
        assert_eq!(e.plans[1].occurrence, 1);
        let off = compile(&p, OptFlags { set_dedup: false, ..OptFlags::all() });
        assert!(!off.constraint(SymbolId(0)).dedup_injected);
    }

    #[test]
    fn guard_mode_follows_binding() {
        let p = parse_program(":- chr_constraint s/1, r/1.\nr(U), s(W) ==> W = U + 1 | true.\n").unwrap();
        let c = compile(&p, OptFlags::all());
        // Active s(W): W is bound, so the assignment is a test.
        let s = c.constraint(SymbolId(0)).plans.iter().find(|p| p.occurrence == 1).unwrap();
        let guards: Vec<&CGuard> = s
            .steps
            .iter()
            .filter_map(|st| match st {
                Step::Guard(g) => Some(g),
                _ => None,
            })
            .collect();
        assert_eq!(guards.len(), 1);
        assert!(guards[0].out.is_none());
    }
}
