//! Executes compiled programs: activation of constraints, partner search,
//! rule firing with propagation history, and builtin evaluation.
//!
//! Control uses an explicit stack of activation and body frames, so deep
//! derivations do not consume native stack. A body whose last goal is a
//! constraint call, issued when the calling activation is already over
//! (its active constraint was removed), replaces that activation instead
//! of nesting inside it.

mod store;
mod tree;

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use crate::analysis::analyze;
use crate::plancompile::{
    ArgMatch, BodyOp, CExpr, CGuard, CompiledProgram, HistorySource, Next, OccurrencePlan, PartnerStep, QueryVal,
    Search, Step,
};
use crate::surface::{arith, BuiltinKind, EvalError, Program, SymbolId};
use crate::value::{Compound, Value};

pub use store::{ConstraintSlot, Index, Probes, Store};
pub use tree::AvlTree;

/// Constraint number.
pub type Cid = u64;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    /// The derivation failed: a guard-free `fail`, a failing builtin in a
    /// body, or an arithmetic error.
    #[error("constraint failure: {0}")]
    Failed(String),
    #[error("activation depth limit {0} exceeded (non-terminating derivation?)")]
    DepthLimit(usize),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<EvalError> for RunError {
    fn from(e: EvalError) -> Self {
        RunError::Failed(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunConfig {
    /// Maximum number of nested activations.
    pub depth_limit: usize,
    /// Squared distance up to which `near/2` holds.
    pub near_tolerance: i64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            depth_limit: 1_000_000,
            near_tolerance: 25,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Stats {
    pub activations: u64,
    pub firings: u64,
    pub max_depth: usize,
}

/// A state change reported to a monitor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transition {
    Insert(Cid),
    Remove(Cid),
    Fire {
        rule: Option<usize>,
        symbol: SymbolId,
        occurrence: u32,
        /// Constraint numbers in head order, for propagation rules.
        history: Option<Vec<Cid>>,
    },
}

/// Observes every transition; an error aborts the run.
pub type Monitor<'m> = Box<dyn FnMut(&Store, &Transition) -> Result<(), String> + 'm>;

/// Partner search state of one occurrence.
struct SearchState {
    slots: Vec<Value>,
    /// Per step: candidates, next candidate, chosen constraint.
    levels: Vec<Level>,
    pos: usize,
    /// A match was just fired; continue after it.
    resume: bool,
}

#[derive(Default, Clone)]
struct Level {
    cands: Vec<Cid>,
    next: usize,
    chosen: Cid,
}

struct Activation {
    cid: Cid,
    symbol: SymbolId,
    plan: Next,
    search: Option<SearchState>,
}

struct BodyFrame {
    symbol: SymbolId,
    plan: usize,
    slots: Vec<Value>,
    pc: usize,
}

enum Frame {
    Act(Activation),
    Body(BodyFrame),
}

enum ActOutcome {
    Done,
    Body(BodyFrame),
}

type HistoryKey = (usize, Box<[Cid]>);

pub struct Engine<'p> {
    prog: &'p CompiledProgram,
    pub store: Store,
    history: HashSet<HistoryKey>,
    purge_at: usize,
    config: RunConfig,
    pub stats: Stats,
    stack: Vec<Frame>,
    depth: usize,
    monitor: Option<Monitor<'p>>,
    spare: Vec<SearchState>,
    prefix: Vec<Value>,
}

impl<'p> Engine<'p> {
    pub fn new(prog: &'p CompiledProgram, config: RunConfig) -> Self {
        let kinds: Vec<_> = prog.indexes.iter().map(|i| i.kind.clone()).collect();
        Engine {
            prog,
            store: Store::new(&kinds),
            history: HashSet::new(),
            purge_at: 1024,
            config,
            stats: Stats::default(),
            stack: Vec::new(),
            depth: 0,
            monitor: None,
            spare: Vec::new(),
            prefix: Vec::new(),
        }
    }

    pub fn set_monitor(&mut self, m: Monitor<'p>) {
        self.monitor = Some(m);
    }

    pub fn program(&self) -> &'p CompiledProgram {
        self.prog
    }

    fn notify(&mut self, t: Transition) -> Result<(), RunError> {
        if let Some(m) = &mut self.monitor {
            m(&self.store, &t).map_err(RunError::Internal)?;
        }
        Ok(())
    }

    fn insert(&mut self, c: Cid) -> Result<(), RunError> {
        self.store.insert(c)?;
        self.notify(Transition::Insert(c))
    }

    fn kill(&mut self, c: Cid) -> Result<(), RunError> {
        let was_stored = self.store.is_stored(c);
        self.store.kill(c);
        if was_stored {
            self.notify(Transition::Remove(c))?;
        }
        Ok(())
    }

    /// Adds a constraint and runs until quiescence.
    pub fn call(&mut self, symbol: SymbolId, args: Vec<Value>) -> Result<(), RunError> {
        self.push_activation(symbol, args.into())?;
        self.run()
    }

    /// Adds each goal constraint in turn.
    pub fn solve(&mut self, goal: &[(SymbolId, Vec<Value>)]) -> Result<(), RunError> {
        for (s, args) in goal {
            self.call(*s, args.clone())?;
        }
        Ok(())
    }

    fn push_activation(&mut self, symbol: SymbolId, args: Arc<[Value]>) -> Result<(), RunError> {
        if self.depth >= self.config.depth_limit {
            return Err(RunError::DepthLimit(self.config.depth_limit));
        }
        let cid = self.store.create(symbol, args);
        self.stats.activations += 1;
        let cp = self.prog.constraint(symbol);
        if cp.storage == crate::analysis::StoragePoint::Entry {
            self.insert(cid)?;
        }
        self.depth += 1;
        self.stats.max_depth = self.stats.max_depth.max(self.depth);
        self.stack.push(Frame::Act(Activation {
            cid,
            symbol,
            plan: if cp.plans.is_empty() { Next::Halt } else { Next::Plan(0) },
            search: None,
        }));
        Ok(())
    }

    fn run(&mut self) -> Result<(), RunError> {
        let prog = self.prog;
        while let Some(frame) = self.stack.pop() {
            match frame {
                Frame::Act(mut act) => match self.step_activation(&mut act)? {
                    ActOutcome::Done => self.depth -= 1,
                    ActOutcome::Body(body) => {
                        self.stack.push(Frame::Act(act));
                        self.stack.push(Frame::Body(body));
                    }
                },
                Frame::Body(mut bf) => {
                    let ops = &prog.constraint(bf.symbol).plans[bf.plan].body;
                    let Some(op) = ops.get(bf.pc) else { continue };
                    bf.pc += 1;
                    let last = bf.pc == ops.len();
                    match op {
                        BodyOp::Call { symbol, args } => {
                            let vals: Arc<[Value]> =
                                args.iter().map(|a| eval(a, &bf.slots)).collect::<Result<Vec<_>, _>>()?.into();
                            if last {
                                // The body is finished; the caller may be too.
                                if let Some(Frame::Act(caller)) = self.stack.last() {
                                    if !self.store.alive(caller.cid) {
                                        self.stack.pop();
                                        self.depth -= 1;
                                    }
                                }
                            } else {
                                self.stack.push(Frame::Body(bf));
                            }
                            self.push_activation(*symbol, vals)?;
                        }
                        BodyOp::Builtin(g) => {
                            if !call_builtin(g, &mut bf.slots, self.config.near_tolerance)? {
                                return Err(RunError::Failed(format!(
                                    "builtin `{}` failed in a rule body",
                                    prog.program.builtins.sig(g.builtin).name
                                )));
                            }
                            self.stack.push(Frame::Body(bf));
                        }
                        BodyOp::Fail => return Err(RunError::Failed("`fail` in a rule body".to_string())),
                    }
                }
            }
        }
        Ok(())
    }

    fn step_activation(&mut self, act: &mut Activation) -> Result<ActOutcome, RunError> {
        let prog = self.prog;
        let cp = prog.constraint(act.symbol);
        loop {
            let Next::Plan(pi) = act.plan else {
                if self.store.alive(act.cid) && !self.store.is_stored(act.cid) {
                    self.insert(act.cid)?;
                }
                return Ok(ActOutcome::Done);
            };
            if !self.store.alive(act.cid) {
                if let Some(st) = act.search.take() {
                    self.spare.push(st);
                }
                return Ok(ActOutcome::Done);
            }
            let plan = &cp.plans[pi];
            if act.search.is_none() {
                let mut st = self.fresh_search(plan);
                let matched = match_args(&plan.active_args, self.store.args(act.cid), &mut st.slots);
                act.search = Some(st);
                if !matched {
                    self.leave(act, plan)?;
                    continue;
                }
            }
            let mut st = act.search.take().expect("search state");
            let found = loop {
                if !self.search(plan, &mut st, act.cid)? {
                    break None;
                }
                let tuple = plan.history.as_ref().map(|h| {
                    h.iter()
                        .map(|s| match s {
                            HistorySource::Active => act.cid,
                            HistorySource::Step(k) => st.levels[*k].chosen,
                        })
                        .collect::<Box<[Cid]>>()
                });
                if let Some(t) = &tuple {
                    let key = (plan.rule.expect("source rule"), t.clone());
                    if !self.history.insert(key) {
                        st.resume = true;
                        continue;
                    }
                }
                break Some(tuple);
            };
            let Some(tuple) = found else {
                self.leave(act, plan)?;
                continue;
            };
            self.fire(act, plan, &st, tuple)?;
            let body = (!plan.body.is_empty()).then(|| BodyFrame {
                symbol: act.symbol,
                plan: pi,
                slots: st.slots.clone(),
                pc: 0,
            });
            if plan.search == Search::Existential {
                act.plan = plan.succ_next;
                self.spare.push(st);
            } else {
                st.resume = true;
                act.search = Some(st);
            }
            if let Some(b) = body {
                return Ok(ActOutcome::Body(b));
            }
        }
    }

    fn leave(&mut self, act: &mut Activation, plan: &OccurrencePlan) -> Result<(), RunError> {
        if plan.insert_on_exit && self.store.alive(act.cid) && !self.store.is_stored(act.cid) {
            self.insert(act.cid)?;
        }
        if let Some(st) = act.search.take() {
            self.spare.push(st);
        }
        act.plan = plan.fail_next;
        Ok(())
    }

    fn fire(
        &mut self,
        act: &Activation,
        plan: &OccurrencePlan,
        st: &SearchState,
        history: Option<Box<[Cid]>>,
    ) -> Result<(), RunError> {
        self.stats.firings += 1;
        for (k, step) in plan.steps.iter().enumerate() {
            if let Step::Partner(p) = step {
                if p.removed {
                    self.kill(st.levels[k].chosen)?;
                }
            }
        }
        if plan.active_removed {
            self.kill(act.cid)?;
        } else if plan.insert_before_body && !self.store.is_stored(act.cid) {
            self.insert(act.cid)?;
        }
        self.notify(Transition::Fire {
            rule: plan.rule,
            symbol: act.symbol,
            occurrence: plan.occurrence,
            history: history.map(|h| h.to_vec()),
        })?;
        if self.history.len() > self.purge_at {
            let store = &self.store;
            self.history.retain(|(_, cids)| cids.iter().all(|&c| store.alive(c)));
            self.purge_at = (2 * self.history.len()).max(1024);
        }
        Ok(())
    }

    /// A search state for `plan`, reusing the buffers of a finished one.
    fn fresh_search(&mut self, plan: &OccurrencePlan) -> SearchState {
        let mut st = self.spare.pop().unwrap_or_else(|| SearchState {
            slots: Vec::new(),
            levels: Vec::new(),
            pos: 0,
            resume: false,
        });
        st.slots.clear();
        st.slots.resize(plan.slots, Value::Int(0));
        st.levels.resize_with(plan.steps.len(), Level::default);
        st.pos = 0;
        st.resume = false;
        st
    }

    /// Finds the next full match of the plan's steps. Levels already chosen
    /// are kept when resuming, from the first one whose constraint has died.
    fn search(&mut self, plan: &OccurrencePlan, st: &mut SearchState, active: Cid) -> Result<bool, RunError> {
        let steps = &plan.steps;
        let mut forward = true;
        if std::mem::take(&mut st.resume) {
            let is_partner = |k: &usize| matches!(steps[*k], Step::Partner(_));
            let first_dead = (0..steps.len()).filter(is_partner).find(|&k| !self.store.alive(st.levels[k].chosen));
            match first_dead.or_else(|| (0..steps.len()).rev().find(is_partner)) {
                Some(k) => {
                    st.pos = k;
                    forward = false;
                }
                None => return Ok(false),
            }
        }
        loop {
            if forward {
                if st.pos == steps.len() {
                    return Ok(true);
                }
                match &steps[st.pos] {
                    Step::Guard(g) => {
                        if call_builtin(g, &mut st.slots, self.config.near_tolerance)? {
                            st.pos += 1;
                            continue;
                        }
                    }
                    Step::Partner(p) => {
                        let mut prefix = std::mem::take(&mut self.prefix);
                        prefix.clear();
                        prefix.extend(p.key_prefix.iter().map(|q| match q {
                            QueryVal::Const(v) => v.clone(),
                            QueryVal::Slot(s) => st.slots[*s].clone(),
                        }));
                        let level = &mut st.levels[st.pos];
                        self.store.candidates(p.symbol, &prefix, &mut level.cands);
                        self.prefix = prefix;
                        level.next = 0;
                        if self.try_candidates(p, st, active) {
                            st.pos += 1;
                            continue;
                        }
                    }
                }
            } else if let Step::Partner(p) = &steps[st.pos] {
                if self.try_candidates(p, st, active) {
                    st.pos += 1;
                    forward = true;
                    continue;
                }
            }
            // Backtrack to the previous partner.
            match (0..st.pos).rev().find(|&k| matches!(steps[k], Step::Partner(_))) {
                Some(k) => {
                    st.pos = k;
                    forward = false;
                }
                None => return Ok(false),
            }
        }
    }

    /// Advances the level at `st.pos` to its next matching candidate.
    fn try_candidates(&mut self, p: &PartnerStep, st: &mut SearchState, active: Cid) -> bool {
        let k = st.pos;
        while st.levels[k].next < st.levels[k].cands.len() {
            let level = &mut st.levels[k];
            let mut c = level.cands[level.next];
            level.next += 1;
            if !self.store.alive(c) {
                continue;
            }
            if let Some((i, j)) = p.mirror {
                match self.store.find_mirror(c, (i, j)) {
                    Some(m) if self.store.alive(m) => c = m,
                    _ => continue,
                }
            }
            if (p.distinct_from_active && c == active) || p.distinct_from_steps.iter().any(|&s| st.levels[s].chosen == c)
            {
                continue;
            }
            if match_args(&p.args, self.store.args(c), &mut st.slots) {
                st.levels[k].chosen = c;
                return true;
            }
        }
        false
    }

    /// The live stored constraints, in canonical order.
    pub fn canonical_store(&self) -> Vec<String> {
        canonical_store(&self.prog.program, &self.store)
    }

    /// Checks internal consistency of the store and its indexes.
    pub fn check_coherence(&self) -> Result<(), String> {
        self.store.check_coherence()
    }
}

fn match_args(pattern: &[ArgMatch], args: &[Value], slots: &mut [Value]) -> bool {
    for (m, v) in pattern.iter().zip(args) {
        match m {
            ArgMatch::Const(c) => {
                if c != v {
                    return false;
                }
            }
            ArgMatch::Bound(s) => {
                if &slots[*s] != v {
                    return false;
                }
            }
            ArgMatch::Bind(s) => slots[*s] = v.clone(),
        }
    }
    true
}

pub fn eval(e: &CExpr, slots: &[Value]) -> Result<Value, EvalError> {
    eval_ref(e, slots).map(Cow::into_owned)
}

/// Evaluates without copying when the expression is a slot or a constant.
fn eval_ref<'a>(e: &'a CExpr, slots: &'a [Value]) -> Result<Cow<'a, Value>, EvalError> {
    Ok(match e {
        CExpr::Slot(s) => Cow::Borrowed(&slots[*s]),
        CExpr::Const(v) => Cow::Borrowed(v),
        CExpr::Compound(n, args) => Cow::Owned(Value::compound(
            n,
            args.iter().map(|a| eval(a, slots)).collect::<Result<_, _>>()?,
        )),
        CExpr::Arith(op, a, b) => Cow::Owned(Value::Int(arith(
            *op,
            int(&*eval_ref(a, slots)?)?,
            int(&*eval_ref(b, slots)?)?,
        )?)),
        CExpr::Neg(a) => Cow::Owned(Value::Int(
            int(&*eval_ref(a, slots)?)?.checked_neg().ok_or(EvalError::Overflow)?,
        )),
    })
}

fn int(v: &Value) -> Result<i64, EvalError> {
    v.as_int().ok_or_else(|| EvalError::NotInteger(v.clone()))
}

/// Coordinates of a point `name(X, Y)`.
fn point(v: &Value) -> Option<(i64, i64)> {
    match v {
        Value::Compound(c) if c.args.len() == 2 => Some((c.args[0].as_int()?, c.args[1].as_int()?)),
        _ => None,
    }
}

fn dist2(a: (i64, i64), b: (i64, i64)) -> Option<i64> {
    let dx = a.0.checked_sub(b.0)?;
    let dy = a.1.checked_sub(b.1)?;
    dx.checked_mul(dx)?.checked_add(dy.checked_mul(dy)?)
}

/// Runs a builtin; an output argument is written to its slot.
pub fn call_builtin(g: &CGuard, slots: &mut [Value], near_tolerance: i64) -> Result<bool, RunError> {
    let arg = |k: usize, slots: &[Value]| -> Result<Value, EvalError> { eval(&g.args[k], slots) };
    Ok(match &g.kind {
        BuiltinKind::True => true,
        BuiltinKind::Fail => false,
        BuiltinKind::Compare(op) => op.holds(&*eval_ref(&g.args[0], slots)?, &*eval_ref(&g.args[1], slots)?),
        BuiltinKind::Unify => match g.out {
            Some((_, s)) => {
                slots[s] = arg(1, slots)?;
                true
            }
            None => eval_ref(&g.args[0], slots)? == eval_ref(&g.args[1], slots)?,
        },
        BuiltinKind::PointOnCircle => {
            let (p, c, r) = (
                eval_ref(&g.args[0], slots)?,
                eval_ref(&g.args[1], slots)?,
                eval_ref(&g.args[2], slots)?,
            );
            match (point(&p), point(&c), r.as_int()) {
                (Some(p), Some(c), Some(r)) => dist2(p, c).is_some_and(|d| Some(d) == r.checked_mul(r)),
                _ => false,
            }
        }
        BuiltinKind::Midpoint => {
            let (name, a, b) = {
                let (p, q) = (eval_ref(&g.args[0], slots)?, eval_ref(&g.args[1], slots)?);
                let (Some(a), Some(b)) = (point(&p), point(&q)) else { return Ok(false) };
                let Value::Compound(c) = p.as_ref() else { unreachable!("points are compounds") };
                (c.name.clone(), a, b)
            };
            let mid = |x: i64, y: i64| ((x as i128 + y as i128).div_euclid(2)) as i64;
            let (mx, my) = (mid(a.0, b.0), mid(a.1, b.1));
            match g.out {
                Some((_, s)) => {
                    // Overwrite the previous midpoint in place when nothing else holds it.
                    if let Value::Compound(old) = &mut slots[s] {
                        if let Some(o) = Arc::get_mut(old).filter(|o| o.args.len() == 2) {
                            o.name = name;
                            o.args[0] = Value::Int(mx);
                            o.args[1] = Value::Int(my);
                            return Ok(true);
                        }
                    }
                    slots[s] = Value::Compound(Arc::new(Compound {
                        name,
                        args: vec![Value::Int(mx), Value::Int(my)],
                    }));
                    true
                }
                None => match eval_ref(&g.args[2], slots)?.as_ref() {
                    m @ Value::Compound(c) => c.name == name && point(m) == Some((mx, my)),
                    _ => false,
                },
            }
        }
        BuiltinKind::Near => match (point(&*eval_ref(&g.args[0], slots)?), point(&*eval_ref(&g.args[1], slots)?)) {
            (Some(a), Some(b)) => dist2(a, b).is_some_and(|d| d <= near_tolerance),
            _ => false,
        },
        BuiltinKind::Custom(f) => {
            let vals: Vec<Value> = (0..g.args.len()).map(|k| arg(k, slots)).collect::<Result<_, _>>()?;
            f(&vals)
        }
    })
}

/// Renders one constraint: `name(a,b)`, or `a op b` for operator names.
pub fn render_constraint(name: &str, args: &[Value]) -> String {
    if args.len() == 2 && crate::surface::BuiltinRegistry::is_infix_operator(name) {
        return format!("{} {name} {}", args[0], args[1]);
    }
    if args.is_empty() {
        return name.to_string();
    }
    let a: Vec<String> = args.iter().map(|v| v.to_string()).collect();
    format!("{name}({})", a.join(","))
}

/// The live stored constraints sorted by symbol (name, arity) and then by
/// arguments in ground order, without constraint numbers. Duplicates of
/// symbols with set semantics are shown once.
pub fn canonical_store(program: &Program, store: &Store) -> Vec<String> {
    let report = analyze(program);
    let mut by_symbol: BTreeMap<(String, usize), Vec<Arc<[Value]>>> = BTreeMap::new();
    for (_, slot) in store.stored() {
        let d = program.decl(slot.symbol);
        by_symbol.entry((d.name.clone(), d.arity)).or_default().push(slot.args.clone());
    }
    let mut out = Vec::new();
    for ((name, arity), mut rows) in by_symbol {
        rows.sort();
        let sym = program.symbol(&name, arity).expect("declared");
        if report.info(sym).has_set_semantics() {
            rows.dedup();
        }
        out.extend(rows.iter().map(|r| render_constraint(&name, r)));
    }
    out
}

/// Compiles nothing; runs `goal` on an already compiled program.
pub fn solve_goal(
    prog: &CompiledProgram,
    goal: &[(SymbolId, Vec<Value>)],
    config: RunConfig,
) -> Result<Vec<String>, RunError> {
    let mut e = Engine::new(prog, config);
    e.solve(goal)?;
    Ok(e.canonical_store())
}
