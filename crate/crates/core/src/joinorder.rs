//! Join ordering: picks the order in which the partners of an occurrence are
//! looked up and where each guard is tested, minimizing a join-cost score.
//!
//! For one partner `p(x̄)` joined with fixed variables `F`, let
//! `f̄ = x̄ ∩ fdclose(F)` and `s` the selectivity of the guards that become
//! schedulable right after it. The join costs
//! `(max(|x̄ ∖ f̄| − s, 0), −|f̄| − s)`; a goal's score sums the running
//! totals, so early joins weigh more. Scores compare lexicographically.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::Add;

use crate::analysis::{fdclose, Fd};
use crate::surface::{BuiltinKind, GuardCall, HeadAtom, Program, Rule, SymbolId, Term};

/// Partner count up to which all permutations are tried.
pub const EXHAUSTIVE_LIMIT: usize = 6;

/// `(u, f)`: estimated unfixed degree and negated fixed count.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct CostPair {
    pub u: f64,
    pub f: f64,
}

impl CostPair {
    pub fn new(u: f64, f: f64) -> Self {
        // Adding 0.0 turns -0.0 into 0.0.
        CostPair { u: u + 0.0, f: f + 0.0 }
    }

    /// Lexicographic order on `(u, f)`.
    pub fn lex_cmp(&self, other: &CostPair) -> Ordering {
        self.u
            .partial_cmp(&other.u)
            .unwrap_or(Ordering::Equal)
            .then(self.f.partial_cmp(&other.f).unwrap_or(Ordering::Equal))
    }
}

impl Add for CostPair {
    type Output = CostPair;
    fn add(self, o: CostPair) -> CostPair {
        CostPair::new(self.u + o.u, self.f + o.f)
    }
}

impl fmt::Display for CostPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.u + 0.0, self.f + 0.0)
    }
}

/// One argument of a lookup: a value known before the lookup or a wildcard.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LookupArg {
    /// A variable or constant whose value is known.
    Fixed(Term),
    Free,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lookup {
    pub symbol: SymbolId,
    pub pattern: Vec<LookupArg>,
}

impl Lookup {
    pub fn fixed_positions(&self) -> BTreeSet<usize> {
        (0..self.pattern.len())
            .filter(|&i| matches!(self.pattern[i], LookupArg::Fixed(_)))
            .collect()
    }

    /// Renders as `r(X,X,_)` or `flag`.
    pub fn render(&self, program: &Program) -> String {
        let name = &program.decl(self.symbol).name;
        if self.pattern.is_empty() {
            return name.clone();
        }
        let args: Vec<String> = self
            .pattern
            .iter()
            .map(|a| match a {
                LookupArg::Fixed(t) => t.to_string(),
                LookupArg::Free => "_".to_string(),
            })
            .collect();
        format!("{name}({})", args.join(","))
    }
}

/// An element of an occurrence's search goal.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum GoalItem {
    /// A partner, by head index in the rule (kept heads first).
    Partner(usize),
    /// A guard, by index in the rule's guard list.
    Guard(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct JoinPlan {
    pub score: CostPair,
    /// Per-join costs in goal order.
    pub costs: Vec<CostPair>,
    pub goal: Vec<GoalItem>,
    /// One lookup per partner, in goal order.
    pub lookups: Vec<Lookup>,
}

impl JoinPlan {
    pub fn partner_order(&self) -> Vec<usize> {
        self.goal
            .iter()
            .filter_map(|g| match g {
                GoalItem::Partner(h) => Some(*h),
                GoalItem::Guard(_) => None,
            })
            .collect()
    }

    /// Renders the goal as comma-separated source text.
    pub fn render_goal(&self, program: &Program, rule: &Rule) -> String {
        self.goal
            .iter()
            .map(|g| match g {
                GoalItem::Partner(h) => program.show(rule.head(*h).1).to_string(),
                GoalItem::Guard(i) => program.show(&rule.guard[*i]).to_string(),
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn render_lookups(&self, program: &Program) -> BTreeSet<String> {
        self.lookups.iter().map(|l| l.render(program)).collect()
    }
}

fn term_vars(args: &[Term]) -> BTreeSet<String> {
    args.iter().filter_map(|t| t.as_var().map(str::to_string)).collect()
}

/// Repeatedly takes, in source order, every guard whose inputs are fixed,
/// adding its outputs to `fixed`. Returns the positions taken from `guards`
/// and removes them.
pub fn schedule_guards(fixed: &mut BTreeSet<String>, guards: &mut Vec<(usize, &GuardCall)>) -> Vec<usize> {
    let mut out = Vec::new();
    loop {
        let before = guards.len();
        let mut k = 0;
        while k < guards.len() {
            let g = guards[k].1;
            if g.invars.is_subset(fixed) {
                fixed.extend(g.outvars.iter().cloned());
                out.push(guards.remove(k).0);
            } else {
                k += 1;
            }
        }
        if guards.len() == before {
            return out;
        }
    }
}

/// Expected filtering of guards scheduled in sequence starting from `fixed`:
/// a guard that binds a yet-unfixed output filters nothing, an equality test
/// counts 1 and any other test 0.5.
pub fn selectivity(program: &Program, guards: &[&GuardCall], fixed: &BTreeSet<String>) -> f64 {
    let mut fixed = fixed.clone();
    let mut total = 0.0;
    for g in guards {
        let binds = g.outvars.iter().any(|v| !fixed.contains(v));
        let sig = program.builtins.sig(g.builtin);
        total += if binds {
            0.0
        } else if sig.is_equational() {
            1.0
        } else if matches!(sig.kind, BuiltinKind::True) {
            0.0
        } else {
            0.5
        };
        fixed.extend(g.outvars.iter().cloned());
    }
    total
}

/// Inputs shared by all orderings of one occurrence.
pub struct JoinProblem<'a> {
    pub program: &'a Program,
    pub rule: &'a Rule,
    /// Head index of the active constraint.
    pub active: usize,
    pub fds: &'a [Vec<Fd>],
}

impl<'a> JoinProblem<'a> {
    pub fn new(program: &'a Program, rule: &'a Rule, active: usize, fds: &'a [Vec<Fd>]) -> Self {
        JoinProblem {
            program,
            rule,
            active,
            fds,
        }
    }

    /// Partner head indices in textual order.
    pub fn partners(&self) -> Vec<usize> {
        (0..self.rule.head_count()).filter(|&h| h != self.active).collect()
    }

    fn initial_fixed(&self) -> BTreeSet<String> {
        term_vars(&self.rule.head(self.active).1.args)
    }

    fn guards(&self) -> Vec<(usize, &'a GuardCall)> {
        self.rule.guard.iter().enumerate().collect()
    }

    fn atom(&self, h: usize) -> &'a HeadAtom {
        self.rule.head(h).1
    }

    /// Cost of joining `h` given `fixed`, plus the guards that follow it and
    /// the lookup it needs. Updates `fixed` and `guards`.
    fn join(
        &self,
        h: usize,
        fixed: &mut BTreeSet<String>,
        guards: &mut Vec<(usize, &GuardCall)>,
        early_guards: bool,
    ) -> (CostPair, Vec<usize>, Lookup) {
        let atom = self.atom(h);
        let xs = term_vars(&atom.args);
        let closed = fdclose(fixed, &atom.args, &self.fds[atom.symbol.0]);
        let f: BTreeSet<String> = xs.intersection(&closed).cloned().collect();
        let lookup = Lookup {
            symbol: atom.symbol,
            pattern: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) if !f.contains(v) => LookupArg::Free,
                    _ => LookupArg::Fixed(t.clone()),
                })
                .collect(),
        };
        fixed.extend(xs.iter().cloned());
        let before = fixed.clone();
        let early = if early_guards {
            schedule_guards(fixed, guards)
        } else {
            Vec::new()
        };
        let calls: Vec<&GuardCall> = early.iter().map(|&i| &self.rule.guard[i]).collect();
        let sel = selectivity(self.program, &calls, &before);
        let unfixed = xs.len() - f.len();
        let cost = CostPair::new((unfixed as f64 - sel).max(0.0), -(f.len() as f64) - sel);
        (cost, early, lookup)
    }

    /// Evaluates one partner order.
    pub fn measure(&self, order: &[usize]) -> JoinPlan {
        self.measure_with(order, true)
    }

    fn measure_with(&self, order: &[usize], early_guards: bool) -> JoinPlan {
        let mut fixed = self.initial_fixed();
        let mut guards = self.guards();
        let mut goal = Vec::new();
        if early_guards {
            goal.extend(schedule_guards(&mut fixed, &mut guards).into_iter().map(GoalItem::Guard));
        }
        let (mut score, mut sum) = (CostPair::default(), CostPair::default());
        let mut costs = Vec::new();
        let mut lookups = Vec::new();
        for &h in order {
            let (cost, early, lookup) = self.join(h, &mut fixed, &mut guards, early_guards);
            score = score + sum + cost;
            sum = sum + cost;
            costs.push(cost);
            lookups.push(lookup);
            goal.push(GoalItem::Partner(h));
            goal.extend(early.into_iter().map(GoalItem::Guard));
        }
        if !early_guards {
            goal.extend(schedule_guards(&mut fixed, &mut guards).into_iter().map(GoalItem::Guard));
        }
        JoinPlan {
            score,
            costs,
            goal,
            lookups,
        }
    }

    /// Textual partner order with every guard after the last partner.
    pub fn textual_plan(&self) -> JoinPlan {
        self.measure_with(&self.partners(), false)
    }

    /// Least-score order over all permutations; ties keep the
    /// lexicographically first permutation.
    pub fn exhaustive(&self) -> JoinPlan {
        let partners = self.partners();
        let mut best: Option<JoinPlan> = None;
        let mut perm = Vec::with_capacity(partners.len());
        let mut used = vec![false; partners.len()];
        self.permute(&partners, &mut perm, &mut used, &mut best);
        best.expect("at least one permutation")
    }

    fn permute(&self, partners: &[usize], perm: &mut Vec<usize>, used: &mut [bool], best: &mut Option<JoinPlan>) {
        if perm.len() == partners.len() {
            let plan = self.measure(perm);
            if best.as_ref().is_none_or(|b| plan.score.lex_cmp(&b.score) == Ordering::Less) {
                *best = Some(plan);
            }
            return;
        }
        for k in 0..partners.len() {
            if !used[k] {
                used[k] = true;
                perm.push(partners[k]);
                self.permute(partners, perm, used, best);
                perm.pop();
                used[k] = false;
            }
        }
    }

    /// Repeatedly appends the partner with the least incremental cost.
    pub fn greedy(&self) -> JoinPlan {
        let mut remaining = self.partners();
        let mut fixed = self.initial_fixed();
        let mut guards = self.guards();
        schedule_guards(&mut fixed, &mut guards);
        let mut order = Vec::new();
        while !remaining.is_empty() {
            let mut best: Option<(CostPair, usize)> = None;
            for (k, &h) in remaining.iter().enumerate() {
                let (mut f, mut g) = (fixed.clone(), guards.clone());
                let (cost, ..) = self.join(h, &mut f, &mut g, true);
                if best.is_none_or(|(c, _)| cost.lex_cmp(&c) == Ordering::Less) {
                    best = Some((cost, k));
                }
            }
            let (_, k) = best.expect("non-empty");
            let h = remaining.remove(k);
            self.join(h, &mut fixed, &mut guards, true);
            order.push(h);
        }
        self.measure(&order)
    }

    /// The plan used by the compiler.
    pub fn best(&self, join_order: bool) -> JoinPlan {
        if !join_order {
            self.textual_plan()
        } else if self.partners().len() <= EXHAUSTIVE_LIMIT {
            self.exhaustive()
        } else {
            self.greedy()
        }
    }
}

/// Plans the occurrence at head `active` of rule `rule`.
pub fn best_join_order(program: &Program, rule: usize, active: usize, fds: &[Vec<Fd>], join_order: bool) -> JoinPlan {
    JoinProblem::new(program, &program.rules[rule], active, fds).best(join_order)
}
