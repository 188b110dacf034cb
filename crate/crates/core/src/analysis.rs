//! Static analysis of a program: storage points, functional dependencies,
//! set semantics and argument symmetries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::surface::{
    BodyItem, BuiltinKind, CmpOp, Expr, GuardCall, HeadAtom, HeadRole, Program, Rule, RuleKind, SymbolId, Term,
};

/// `S ↝ target` over 0-based argument positions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Fd {
    pub sources: BTreeSet<usize>,
    pub target: usize,
}

impl Fd {
    pub fn new(sources: impl IntoIterator<Item = usize>, target: usize) -> Self {
        Fd {
            sources: sources.into_iter().collect(),
            target,
        }
    }
}

impl fmt::Display for Fd {
    /// Positions are shown 1-based: `{1}->2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src: Vec<String> = self.sources.iter().map(|s| (s + 1).to_string()).collect();
        write!(f, "{{{}}}->{}", src.join(","), self.target + 1)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SetForm {
    None,
    Behavioral,
    Explicit,
}

impl fmt::Display for SetForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetForm::None => "none",
            SetForm::Behavioral => "behavioral",
            SetForm::Explicit => "explicit",
        })
    }
}

/// Where the active constraint is inserted into the store.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StoragePoint {
    /// Inserted as soon as it becomes active.
    Entry,
    /// Inserted just before this occurrence's body (or when leaving it).
    Occurrence(u32),
    /// Inserted after all occurrences have been tried.
    End,
    /// Always removed before it could be stored.
    Never,
}

impl fmt::Display for StoragePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoragePoint::Entry => f.write_str("storage-occ entry"),
            StoragePoint::Occurrence(o) => write!(f, "storage-occ {o}"),
            StoragePoint::End => f.write_str("storage-occ end"),
            StoragePoint::Never => f.write_str("never-stored"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnalysisOptions {
    /// Delay insertion of the active constraint (off: insert on activation).
    pub late_storage: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { late_storage: true }
    }
}

/// Storage facts for one constraint symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolStorage {
    /// Occurrence ids in execution order.
    pub exec_order: Vec<u32>,
    pub storage: StoragePoint,
    pub never_stored: bool,
    /// Occurrences that can never fire because a partner is never stored.
    pub dropped: BTreeSet<u32>,
}

impl SymbolStorage {
    pub fn position(&self, occurrence: u32) -> Option<usize> {
        self.exec_order.iter().position(|&o| o == occurrence)
    }

    /// Rank of the storage point on the execution-order axis: occurrences at
    /// positions below the rank run before the active is stored.
    pub fn storage_rank(&self) -> i64 {
        match self.storage {
            StoragePoint::Entry => -1,
            StoragePoint::Occurrence(o) => self.position(o).map_or(i64::MAX, |p| p as i64),
            StoragePoint::End | StoragePoint::Never => i64::MAX,
        }
    }

    fn strictly_before(&self, occurrence: u32) -> bool {
        self.position(occurrence).is_some_and(|p| (p as i64) < self.storage_rank())
    }

    fn at_or_before(&self, occurrence: u32) -> bool {
        self.position(occurrence).is_some_and(|p| (p as i64) <= self.storage_rank())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StorageInfo {
    pub rhs_affects_store: Vec<bool>,
    pub symbols: Vec<SymbolStorage>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintInfo {
    pub symbol: SymbolId,
    pub fds: Vec<Fd>,
    pub set: SetForm,
    /// Symmetric position pairs `(i, j)` with `i < j`, 0-based.
    pub symmetries: Vec<(usize, usize)>,
    pub never_stored: bool,
    pub storage: StoragePoint,
    pub exec_order: Vec<u32>,
    pub dropped: BTreeSet<u32>,
}

impl ConstraintInfo {
    pub fn has_set_semantics(&self) -> bool {
        self.set != SetForm::None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisReport {
    pub constraints: Vec<ConstraintInfo>,
    pub rhs_affects_store: Vec<bool>,
}

impl AnalysisReport {
    pub fn info(&self, s: SymbolId) -> &ConstraintInfo {
        &self.constraints[s.0]
    }

    pub fn fds(&self, s: SymbolId) -> &[Fd] {
        &self.constraints[s.0].fds
    }

    /// The deterministic line-oriented report, sorted by name then arity.
    pub fn render(&self, program: &Program) -> String {
        let mut rows: Vec<&ConstraintInfo> = self.constraints.iter().collect();
        rows.sort_by(|a, b| {
            let (da, db) = (program.decl(a.symbol), program.decl(b.symbol));
            (&da.name, da.arity).cmp(&(&db.name, db.arity))
        });
        let mut out = String::new();
        for c in rows {
            let mut parts = Vec::new();
            if !c.fds.is_empty() {
                parts.push(format!(
                    "fd {}",
                    c.fds.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(", ")
                ));
            }
            if c.set != SetForm::None {
                parts.push(format!("set {}", c.set));
            }
            for (i, j) in &c.symmetries {
                parts.push(format!("sym {{{},{}}}", i + 1, j + 1));
            }
            parts.push(c.storage.to_string());
            out.push_str(&format!("constraint {}: {}\n", program.decl(c.symbol), parts.join(" | ")));
        }
        out
    }
}

/// Closes a set of fixed variables under the dependencies of one partner
/// atom. Constant arguments count as fixed.
pub fn fdclose(fixed: &BTreeSet<String>, args: &[Term], fds: &[Fd]) -> BTreeSet<String> {
    let mut out = fixed.clone();
    let is_fixed = |t: &Term, out: &BTreeSet<String>| match t {
        Term::Var(v) => out.contains(v),
        _ => true,
    };
    loop {
        let mut grew = false;
        for fd in fds {
            if fd.sources.iter().all(|&s| is_fixed(&args[s], &out)) {
                if let Term::Var(v) = &args[fd.target] {
                    grew |= out.insert(v.clone());
                }
            }
        }
        if !grew {
            return out;
        }
    }
}

/// Closes a set of argument positions under functional dependencies.
pub fn fdclose_positions(fixed: &BTreeSet<usize>, fds: &[Fd]) -> BTreeSet<usize> {
    let mut out = fixed.clone();
    loop {
        let mut grew = false;
        for fd in fds {
            if fd.sources.is_subset(&out) {
                grew |= out.insert(fd.target);
            }
        }
        if !grew {
            return out;
        }
    }
}

/// Occurrence ids of `sym` in execution order: textual, except that within a
/// simpagation rule the removed-side occurrences come before the kept ones.
pub fn order_occurrences(program: &Program, sym: SymbolId) -> Vec<u32> {
    let mut out = Vec::new();
    for rule in &program.rules {
        let (first, second): (&[HeadAtom], &[HeadAtom]) = match rule.kind {
            RuleKind::Simpagation => (&rule.removed, &rule.kept),
            _ => (&rule.kept, &rule.removed),
        };
        out.extend(first.iter().chain(second).filter(|h| h.symbol == sym).map(|h| h.occurrence));
    }
    out
}

fn distinct_vars(args: &[Term]) -> bool {
    let mut seen = BTreeSet::new();
    args.iter().all(|a| matches!(a, Term::Var(v) if seen.insert(v.clone())))
}

/// A single-head simplification with distinct variable arguments and no guard
/// removes every constraint that reaches it.
fn always_removes(rule: &Rule) -> bool {
    rule.kind == RuleKind::Simplification
        && rule.removed.len() == 1
        && rule.guard.is_empty()
        && distinct_vars(&rule.removed[0].args)
}

/// Computes rhs-affects-store per rule and the storage point of every symbol.
pub fn infer_storage(program: &Program, opts: AnalysisOptions) -> StorageInfo {
    let rhs_affects_store: Vec<bool> = program.rules.iter().map(|r| r.body_calls().next().is_some()).collect();
    let n = program.decls.len();
    let mut never = vec![false; n];
    loop {
        let symbols: Vec<SymbolStorage> = program
            .symbols()
            .map(|sym| storage_for(program, sym, &rhs_affects_store, &never, opts))
            .collect();
        let now: Vec<bool> = symbols.iter().map(|s| s.never_stored).collect();
        if now == never {
            return StorageInfo {
                rhs_affects_store,
                symbols,
            };
        }
        never = now;
    }
}

fn storage_for(
    program: &Program,
    sym: SymbolId,
    rhs: &[bool],
    never: &[bool],
    opts: AnalysisOptions,
) -> SymbolStorage {
    let exec_order = order_occurrences(program, sym);
    let mut dropped = BTreeSet::new();
    for &occ in &exec_order {
        let (ri, hi) = program.find_occurrence(sym, occ).expect("occurrence exists");
        let rule = &program.rules[ri];
        let partner_never = rule
            .heads()
            .enumerate()
            .any(|(k, (_, h))| k != hi && never[h.symbol.0]);
        if partner_never {
            dropped.insert(occ);
        }
    }
    if !opts.late_storage {
        return SymbolStorage {
            exec_order,
            storage: StoragePoint::Entry,
            never_stored: false,
            dropped,
        };
    }
    let mut storage = StoragePoint::End;
    let mut never_stored = false;
    for &occ in &exec_order {
        if dropped.contains(&occ) {
            continue;
        }
        let (ri, hi) = program.find_occurrence(sym, occ).expect("occurrence exists");
        let rule = &program.rules[ri];
        if always_removes(rule) {
            never_stored = true;
            storage = StoragePoint::Never;
            break;
        }
        if rule.head(hi).0 == HeadRole::Kept && rhs[ri] {
            storage = StoragePoint::Occurrence(occ);
            break;
        }
    }
    SymbolStorage {
        exec_order,
        storage,
        never_stored,
        dropped,
    }
}

/// Occurrences of `sym` in `rule` as `(occurrence id, role)`.
fn occurrences_in(rule: &Rule, sym: SymbolId) -> Vec<(u32, HeadRole)> {
    rule.heads()
        .filter(|(_, h)| h.symbol == sym)
        .map(|(role, h)| (h.occurrence, role))
        .collect()
}

/// Shape shared by the dependency-inducing rule forms: two heads of one
/// symbol whose arguments are variables, equal on the positions `shared` and
/// pairwise distinct (and unique) everywhere else.
struct PairShape {
    shared: BTreeSet<usize>,
    /// Canonical name of every head variable: `s<pos>` for shared ones,
    /// `h<head>_<pos>` for the others.
    canon: HashMap<String, String>,
}

fn pair_shape(rule: &Rule, sym: SymbolId) -> Option<PairShape> {
    if rule.head_count() != 2 {
        return None;
    }
    let (_, a) = rule.head(0);
    let (_, b) = rule.head(1);
    if a.symbol != sym || b.symbol != sym {
        return None;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in a.args.iter().chain(&b.args) {
        *counts.entry(t.as_var()?).or_default() += 1;
    }
    let mut shared = BTreeSet::new();
    let mut canon = HashMap::new();
    for (i, (x, y)) in a.args.iter().zip(&b.args).enumerate() {
        let (x, y) = (x.as_var()?, y.as_var()?);
        if x == y {
            if counts[x] != 2 {
                return None;
            }
            shared.insert(i);
            canon.insert(x.to_string(), format!("s{i}"));
        } else {
            if counts[x] != 1 || counts[y] != 1 {
                return None;
            }
            canon.insert(x.to_string(), format!("h0_{i}"));
            canon.insert(y.to_string(), format!("h1_{i}"));
        }
    }
    Some(PairShape { shared, canon })
}

/// A guard that is a single ordering comparison, normalized to `>=`/`>`
/// over canonical variable names.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Comparison {
    strict: bool,
    lhs: Expr,
    rhs: Expr,
}

fn single_comparison(program: &Program, rule: &Rule, shape: &PairShape) -> Option<Comparison> {
    let [g] = rule.guard.as_slice() else { return None };
    let BuiltinKind::Compare(op) = program.builtins.sig(g.builtin).kind else { return None };
    let rename = |e: &Expr| -> Option<Expr> {
        let vars = e.vars();
        if !vars.iter().all(|v| shape.canon.contains_key(v)) {
            return None;
        }
        Some(e.map_vars(&|v| Expr::Var(shape.canon[v].clone())))
    };
    let (a, b) = (rename(&g.args[0])?, rename(&g.args[1])?);
    Some(match op {
        CmpOp::Ge => Comparison { strict: false, lhs: a, rhs: b },
        CmpOp::Gt => Comparison { strict: true, lhs: a, rhs: b },
        CmpOp::Le => Comparison { strict: false, lhs: b, rhs: a },
        CmpOp::Lt => Comparison { strict: true, lhs: b, rhs: a },
        CmpOp::Eq | CmpOp::Ne => return None,
    })
}

fn swap_heads(e: &Expr) -> Expr {
    e.map_vars(&|v| {
        Expr::Var(if let Some(rest) = v.strip_prefix("h0_") {
            format!("h1_{rest}")
        } else if let Some(rest) = v.strip_prefix("h1_") {
            format!("h0_{rest}")
        } else {
            v.to_string()
        })
    })
}

impl Comparison {
    fn swapped(&self) -> Comparison {
        Comparison {
            strict: self.strict,
            lhs: swap_heads(&self.lhs),
            rhs: swap_heads(&self.rhs),
        }
    }

    /// `self ∨ other` holds in every total order.
    fn covers_with(&self, other: &Comparison) -> bool {
        self.lhs == other.rhs && self.rhs == other.lhs && !(self.strict && other.strict)
    }
}

/// Infers functional dependencies per symbol (0-based positions).
pub fn infer_fds(program: &Program, storage: &StorageInfo) -> Vec<Vec<Fd>> {
    let mut out: Vec<BTreeSet<Fd>> = vec![BTreeSet::new(); program.decls.len()];
    for sym in program.symbols() {
        let st = &storage.symbols[sym.0];
        let arity = program.arity(sym);
        let emit = |out: &mut Vec<BTreeSet<Fd>>, shared: &BTreeSet<usize>, targets: &mut dyn Iterator<Item = usize>| {
            for j in targets {
                out[sym.0].insert(Fd {
                    sources: shared.clone(),
                    target: j,
                });
            }
        };
        // Guarded pair rules grouped by their shared positions.
        let mut guarded: BTreeMap<BTreeSet<usize>, Vec<Comparison>> = BTreeMap::new();
        for rule in &program.rules {
            let Some(shape) = pair_shape(rule, sym) else { continue };
            let occs = occurrences_in(rule, sym);
            let removes = !rule.removed.is_empty();
            if removes && rule.guard.is_empty() {
                // Form 1: the pair is always collapsed before p is stored.
                if occs.iter().any(|&(o, role)| role == HeadRole::Removed && st.strictly_before(o)) {
                    emit(&mut out, &shape.shared, &mut (0..arity).filter(|j| !shape.shared.contains(j)));
                }
            } else if removes {
                // Form 3 candidate: every occurrence runs before storage.
                if occs.iter().all(|&(o, _)| st.at_or_before(o)) {
                    if let Some(c) = single_comparison(program, rule, &shape) {
                        guarded.entry(shape.shared.clone()).or_default().push(c);
                    }
                }
            } else if rule.kind == RuleKind::Propagation && rule.guard.is_empty() {
                // Form 2: `p(x̄,ȳ), p(x̄,z̄) ==> ȳ = z̄`.
                if !occs.iter().all(|&(o, _)| st.at_or_before(o)) {
                    continue;
                }
                let (_, a) = rule.head(0);
                let (_, b) = rule.head(1);
                let mut equated = BTreeSet::new();
                let mut only_equalities = true;
                for item in &rule.body {
                    match item {
                        BodyItem::True => {}
                        BodyItem::Builtin(g) if program.builtins.sig(g.builtin).is_equational() => {
                            let pos = (0..arity).find(|&j| {
                                let (x, y) = (a.args[j].to_expr(), b.args[j].to_expr());
                                (g.args[0] == x && g.args[1] == y) || (g.args[0] == y && g.args[1] == x)
                            });
                            match pos {
                                Some(j) if !shape.shared.contains(&j) => {
                                    equated.insert(j);
                                }
                                _ => only_equalities = false,
                            }
                        }
                        _ => only_equalities = false,
                    }
                }
                if only_equalities {
                    emit(&mut out, &shape.shared, &mut equated.into_iter());
                }
            }
        }
        for (shared, comparisons) in guarded {
            let oriented: Vec<Comparison> = comparisons.iter().flat_map(|c| [c.clone(), c.swapped()]).collect();
            let tautology = oriented
                .iter()
                .enumerate()
                .any(|(i, a)| oriented.iter().skip(i + 1).any(|b| a.covers_with(b)));
            if tautology {
                emit(&mut out, &shared, &mut (0..arity).filter(|j| !shared.contains(j)));
            }
        }
    }
    out.into_iter().map(|s| s.into_iter().collect()).collect()
}

type Subst = HashMap<String, Term>;

fn resolve(t: &Term, s: &Subst) -> Term {
    let mut cur = t.clone();
    while let Term::Var(v) = &cur {
        match s.get(v) {
            Some(next) => cur = next.clone(),
            None => break,
        }
    }
    cur
}

/// Most general unifier of two head argument lists.
fn unify_args(a: &[Term], b: &[Term]) -> Option<Subst> {
    let mut s = Subst::new();
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (resolve(x, &s), resolve(y, &s));
        match (&x, &y) {
            _ if x == y => {}
            (Term::Var(v), _) => {
                s.insert(v.clone(), y.clone());
            }
            (_, Term::Var(v)) => {
                s.insert(v.clone(), x.clone());
            }
            _ => return None,
        }
    }
    Some(s)
}

/// Whether the guard holds whenever its heads are unified by `s`. The check
/// is syntactic: reflexive comparisons, `true`, and assignments to fresh
/// variables are entailed.
fn guard_entailed(program: &Program, rule: &Rule, s: &Subst) -> bool {
    let head_vars = rule.head_vars();
    let apply = |e: &Expr| e.map_vars(&|v| resolve(&Term::Var(v.to_string()), s).to_expr());
    rule.guard.iter().all(|g: &GuardCall| match program.builtins.sig(g.builtin).kind {
        BuiltinKind::True => true,
        BuiltinKind::Unify if g.outvars.iter().any(|v| !head_vars.contains(v)) => true,
        BuiltinKind::Unify | BuiltinKind::Compare(CmpOp::Eq | CmpOp::Ge | CmpOp::Le) => {
            apply(&g.args[0]) == apply(&g.args[1])
        }
        _ => false,
    })
}

/// Symbols with a rule that explicitly deletes duplicates before they are stored.
fn explicit_set(program: &Program, storage: &StorageInfo) -> Vec<bool> {
    program
        .symbols()
        .map(|sym| {
            let st = &storage.symbols[sym.0];
            program.rules.iter().any(|rule| {
                if rule.removed.is_empty() || rule.head_count() != 2 {
                    return false;
                }
                let (_, a) = rule.head(0);
                let (_, b) = rule.head(1);
                if a.symbol != sym || b.symbol != sym {
                    return false;
                }
                let before = occurrences_in(rule, sym)
                    .iter()
                    .any(|&(o, role)| role == HeadRole::Removed && st.strictly_before(o));
                before && unify_args(&a.args, &b.args).is_some_and(|s| guard_entailed(program, rule, &s))
            })
        })
        .collect()
}

/// Whether `sym` violates one of the behavioral set-semantics conditions
/// given the current candidate set.
fn violates_set_conditions(program: &Program, sym: SymbolId, candidate: &[bool]) -> bool {
    for rule in &program.rules {
        let heads: Vec<&HeadAtom> = rule.heads().map(|(_, h)| h).filter(|h| h.symbol == sym).collect();
        if heads.is_empty() {
            continue;
        }
        // 1. Two heads that could match identical copies.
        for (i, a) in heads.iter().enumerate() {
            if heads[i + 1..].iter().any(|b| unify_args(&a.args, &b.args).is_some()) {
                return true;
            }
        }
        // 2. Deleting one copy, unless the rule always fails.
        if rule.removed.iter().any(|h| h.symbol == sym) && !rule.body_always_fails() {
            return true;
        }
        // 3. Generating constraints without set semantics.
        if rule.body_calls().any(|q| !candidate[q.0]) {
            return true;
        }
    }
    false
}

/// Greatest fixpoint of the behavioral set-semantics conditions. Symbols in
/// `fixed_in` stay in the set; symbols without any head occurrence are
/// excluded from the start. Violators are deleted one at a time, scanning
/// symbols in `scan_order`.
pub fn behavioral_fixpoint(program: &Program, fixed_in: &[bool], scan_order: &[SymbolId]) -> Vec<bool> {
    let mut candidate: Vec<bool> = program
        .symbols()
        .map(|s| fixed_in[s.0] || !program.occurrences_of(s).is_empty())
        .collect();
    loop {
        let violator = scan_order
            .iter()
            .copied()
            .find(|&s| candidate[s.0] && !fixed_in[s.0] && violates_set_conditions(program, s, &candidate));
        match violator {
            Some(s) => candidate[s.0] = false,
            None => return candidate,
        }
    }
}

pub fn infer_set_semantics(program: &Program, storage: &StorageInfo) -> Vec<SetForm> {
    let explicit = explicit_set(program, storage);
    let order: Vec<SymbolId> = program.symbols().collect();
    let behavioral = behavioral_fixpoint(program, &explicit, &order);
    program
        .symbols()
        .map(|s| {
            if explicit[s.0] {
                SetForm::Explicit
            } else if behavioral[s.0] {
                SetForm::Behavioral
            } else {
                SetForm::None
            }
        })
        .collect()
}

/// The transposition `(i, j)` established by `p(x̄) ==> p(x̄ with i,j swapped)`.
fn symmetry_rule(rule: &Rule) -> Option<(SymbolId, usize, usize)> {
    if rule.kind != RuleKind::Propagation || rule.kept.len() != 1 || !rule.guard.is_empty() {
        return None;
    }
    let head = &rule.kept[0];
    if !distinct_vars(&head.args) {
        return None;
    }
    let [BodyItem::Constraint { symbol, args }] = rule.body.as_slice() else { return None };
    if *symbol != head.symbol {
        return None;
    }
    let moved: Vec<usize> = (0..args.len()).filter(|&k| args[k] != head.args[k].to_expr()).collect();
    let [i, j] = moved.as_slice() else { return None };
    (args[*i] == head.args[*j].to_expr() && args[*j] == head.args[*i].to_expr()).then_some((head.symbol, *i, *j))
}

fn swapped_args(args: &[Term], i: usize, j: usize) -> Vec<Term> {
    let mut out = args.to_vec();
    out.swap(i, j);
    out
}

/// Every rule deleting a `sym` head either deletes a duplicate of another
/// head or deletes the swapped copy too.
fn deletions_respect_swap(program: &Program, sym: SymbolId, i: usize, j: usize) -> bool {
    program.rules.iter().all(|rule| {
        rule.removed.iter().enumerate().all(|(k, h)| {
            if h.symbol != sym {
                return true;
            }
            let duplicate = rule
                .heads()
                .enumerate()
                .any(|(m, (_, o))| m != rule.kept.len() + k && o.symbol == sym && o.args == h.args);
            let swapped = swapped_args(&h.args, i, j);
            let mirror = rule.removed.iter().any(|o| o.symbol == sym && o.args == swapped);
            duplicate || mirror
        })
    })
}

pub fn infer_symmetries(program: &Program, storage: &StorageInfo) -> Vec<Vec<(usize, usize)>> {
    let mut out: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); program.decls.len()];
    for rule in &program.rules {
        let Some((sym, i, j)) = symmetry_rule(rule) else { continue };
        let st = &storage.symbols[sym.0];
        if st.at_or_before(rule.kept[0].occurrence) && deletions_respect_swap(program, sym, i, j) {
            out[sym.0].insert((i.min(j), i.max(j)));
        }
    }
    out.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Runs all inferences with default options.
pub fn analyze(program: &Program) -> AnalysisReport {
    analyze_with(program, AnalysisOptions::default())
}

/// Runs all inferences. Storage is computed first because every other
/// inference asks whether a rule runs before the active constraint is
/// stored; storage itself only depends on the never-stored fixpoint.
pub fn analyze_with(program: &Program, opts: AnalysisOptions) -> AnalysisReport {
    let storage = infer_storage(program, opts);
    let fds = infer_fds(program, &storage);
    let sets = infer_set_semantics(program, &storage);
    let syms = infer_symmetries(program, &storage);
    let constraints = program
        .symbols()
        .map(|s| {
            let st = &storage.symbols[s.0];
            ConstraintInfo {
                symbol: s,
                fds: fds[s.0].clone(),
                set: sets[s.0],
                symmetries: syms[s.0].clone(),
                never_stored: st.never_stored,
                storage: st.storage,
                exec_order: st.exec_order.clone(),
                dropped: st.dropped.clone(),
            }
        })
        .collect();
    AnalysisReport {
        constraints,
        rhs_affects_store: storage.rhs_affects_store,
    }
}
