//! Lookup reduction and index selection: one index structure per symbol.

use std::collections::BTreeSet;
use std::fmt;

use crate::analysis::{fdclose_positions, ConstraintInfo, Fd, SetForm};
use crate::joinorder::{Lookup, LookupArg};
use crate::surface::{Program, SymbolId, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IndexKind {
    /// At most one live constraint.
    YesNo,
    /// Balanced tree ordered by the argument positions in `key`.
    Tree { key: Vec<usize> },
    /// Unordered sequence scanned on every lookup.
    List,
}

impl fmt::Display for IndexKind {
    /// Key positions are shown 1-based: `tree key=(1,2)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexKind::YesNo => f.write_str("yesno"),
            IndexKind::List => f.write_str("list"),
            IndexKind::Tree { key } => {
                let k: Vec<String> = key.iter().map(|p| (p + 1).to_string()).collect();
                write!(f, "tree key=({})", k.join(","))
            }
        }
    }
}

/// How one partner lookup queries its index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReducedLookup {
    /// Positions whose values are passed to the index. Every other position
    /// is checked (or bound) when a candidate is matched.
    pub query: BTreeSet<usize>,
    /// Swap applied to the pattern before querying: candidates are the
    /// mirror images of the constraints the pattern asks for.
    pub mirror: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSpec {
    pub symbol: SymbolId,
    pub kind: IndexKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexOptions {
    /// Choose structures automatically (off: every index is a list).
    pub index_auto: bool,
    /// Rewrite lookups through argument symmetries.
    pub symmetry: bool,
    /// Behavioral set semantics may be relied on (duplicates are removed on
    /// insertion).
    pub set_dedup: bool,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            index_auto: true,
            symmetry: true,
            set_dedup: true,
        }
    }
}

/// Whether duplicates of the symbol can never coexist in the store.
pub fn set_valid(info: &ConstraintInfo, set_dedup: bool) -> bool {
    match info.set {
        SetForm::Explicit => true,
        SetForm::Behavioral => set_dedup,
        SetForm::None => false,
    }
}

/// A lookup returns at most one constraint.
pub fn is_singleton_lookup(fixed: &BTreeSet<usize>, arity: usize, fds: &[Fd], set: bool) -> bool {
    set && fdclose_positions(fixed, fds).len() == arity
}

fn positions_key(ps: &BTreeSet<usize>) -> Vec<usize> {
    ps.iter().copied().collect()
}

/// Reduces a lookup to the positions actually queried: a repeated variable
/// is queried once, positions determined by dependencies on other queried
/// positions are dropped, and a symmetric mirror is preferred when it
/// queries lower positions.
pub fn reduce_lookup(lookup: &Lookup, fds: &[Fd], symmetries: &[(usize, usize)]) -> ReducedLookup {
    let mut query = BTreeSet::new();
    let mut seen: BTreeSet<&Term> = BTreeSet::new();
    for (i, a) in lookup.pattern.iter().enumerate() {
        if let LookupArg::Fixed(t) = a {
            let repeated = matches!(t, Term::Var(_)) && !seen.insert(t);
            if !repeated {
                query.insert(i);
            }
        }
    }
    for fd in fds {
        if query.contains(&fd.target) && !fd.sources.contains(&fd.target) && fd.sources.is_subset(&query) {
            query.remove(&fd.target);
        }
    }
    let mut best = ReducedLookup { query, mirror: None };
    for &(i, j) in symmetries {
        let mirrored: BTreeSet<usize> = best
            .query
            .iter()
            .map(|&p| if p == i { j } else if p == j { i } else { p })
            .collect();
        if positions_key(&mirrored) < positions_key(&best.query) {
            best = ReducedLookup {
                query: mirrored,
                mirror: Some((i, j)),
            };
        }
    }
    best
}

/// Picks the index structure able to answer every reduced lookup.
pub fn choose_index(
    info: &ConstraintInfo,
    arity: usize,
    lookups: &[ReducedLookup],
    opts: IndexOptions,
) -> IndexKind {
    if !opts.index_auto || !set_valid(info, opts.set_dedup) {
        return IndexKind::List;
    }
    let all: BTreeSet<usize> = (0..arity).collect();
    if fdclose_positions(&BTreeSet::new(), &info.fds) == all {
        return IndexKind::YesNo;
    }
    let key: Vec<usize> = if info.fds.is_empty() {
        (0..arity).collect()
    } else {
        let sources: BTreeSet<usize> = info.fds.iter().flat_map(|fd| fd.sources.iter().copied()).collect();
        if fdclose_positions(&sources, &info.fds) == all {
            positions_key(&sources)
        } else {
            sources.iter().copied().chain((0..arity).filter(|p| !sources.contains(p))).collect()
        }
    };
    let prefix_ok = lookups.iter().all(|l| {
        let k = l.query.len();
        k <= key.len() && key[..k].iter().copied().collect::<BTreeSet<_>>() == l.query
    });
    if prefix_ok {
        IndexKind::Tree { key }
    } else {
        IndexKind::List
    }
}

/// Reduces the lookups of one symbol and chooses its index. Mirrored
/// lookups are undone when the index is a list, where they gain nothing.
pub fn select_index(
    program: &Program,
    info: &ConstraintInfo,
    lookups: &[Lookup],
    opts: IndexOptions,
) -> (IndexSpec, Vec<ReducedLookup>) {
    let syms: &[(usize, usize)] = if opts.symmetry { &info.symmetries } else { &[] };
    let arity = program.arity(info.symbol);
    let mut reduced: Vec<ReducedLookup> = lookups.iter().map(|l| reduce_lookup(l, &info.fds, syms)).collect();
    let kind = choose_index(info, arity, &reduced, opts);
    if kind == IndexKind::List {
        reduced = lookups.iter().map(|l| reduce_lookup(l, &info.fds, &[])).collect();
    }
    (
        IndexSpec {
            symbol: info.symbol,
            kind,
        },
        reduced,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::StoragePoint;

    fn lookup(pattern: &[&str]) -> Lookup {
        Lookup {
            symbol: SymbolId(0),
            pattern: pattern
                .iter()
                .map(|s| match *s {
                    "_" => LookupArg::Free,
                    v => LookupArg::Fixed(Term::Var(v.to_string())),
                })
                .collect(),
        }
    }

    fn info(set: SetForm, fds: Vec<Fd>, symmetries: Vec<(usize, usize)>) -> ConstraintInfo {
        ConstraintInfo {
            symbol: SymbolId(0),
            fds,
            set,
            symmetries,
            never_stored: false,
            storage: StoragePoint::End,
            exec_order: vec![],
            dropped: BTreeSet::new(),
        }
    }

    fn q(ps: &[usize]) -> BTreeSet<usize> {
        ps.iter().copied().collect()
    }

    #[test]
    fn generalization_queries_repeated_variable_once() {
        let r = reduce_lookup(&lookup(&["X", "X", "U"]), &[], &[]);
        assert_eq!(r.query, q(&[0, 2]));
    }

    #[test]
    fn fd_reduction() {
        let fds = [Fd::new([0], 1), Fd::new([0], 2)];
        assert_eq!(reduce_lookup(&lookup(&["X", "L", "_"]), &fds, &[]).query, q(&[0]));
    }

    #[test]
    fn symmetry_mirrors_to_lower_positions() {
        let r = reduce_lookup(&lookup(&["_", "Y"]), &[], &[(0, 1)]);
        assert_eq!(r, ReducedLookup { query: q(&[0]), mirror: Some((0, 1)) });
        let r = reduce_lookup(&lookup(&["X", "_"]), &[], &[(0, 1)]);
        assert_eq!(r.mirror, None);
    }

    #[test]
    fn singleton_lookups() {
        let fds = [Fd::new([0], 1), Fd::new([0], 2)];
        assert!(is_singleton_lookup(&q(&[0]), 3, &fds, true));
        assert!(!is_singleton_lookup(&q(&[0]), 3, &fds, false));
        assert!(is_singleton_lookup(&q(&[]), 1, &[Fd::new([], 0)], true));
        assert!(!is_singleton_lookup(&q(&[0]), 2, &[], true));
    }

    #[test]
    fn index_choices() {
        let opts = IndexOptions::default();
        let gcd = info(SetForm::Explicit, vec![Fd::new([], 0)], vec![]);
        assert_eq!(choose_index(&gcd, 1, &[], opts), IndexKind::YesNo);
        let bounds = info(SetForm::Explicit, vec![Fd::new([0], 1), Fd::new([0], 2)], vec![]);
        let lk = [ReducedLookup { query: q(&[0]), mirror: None }];
        assert_eq!(choose_index(&bounds, 3, &lk, opts), IndexKind::Tree { key: vec![0] });
        let neq = info(SetForm::Explicit, vec![], vec![(0, 1)]);
        let lk = [
            ReducedLookup { query: q(&[0]), mirror: None },
            ReducedLookup { query: q(&[0, 1]), mirror: None },
        ];
        assert_eq!(choose_index(&neq, 2, &lk, opts), IndexKind::Tree { key: vec![0, 1] });
        let lk = [ReducedLookup { query: q(&[1]), mirror: None }];
        assert_eq!(choose_index(&neq, 2, &lk, opts), IndexKind::List);
        let none = info(SetForm::None, vec![], vec![]);
        assert_eq!(choose_index(&none, 2, &[], opts), IndexKind::List);
        let off = IndexOptions { index_auto: false, ..opts };
        assert_eq!(choose_index(&gcd, 1, &[], off), IndexKind::List);
    }

    #[test]
    fn behavioral_set_needs_dedup() {
        let b = info(SetForm::Behavioral, vec![], vec![]);
        let opts = IndexOptions::default();
        assert_eq!(choose_index(&b, 1, &[], opts), IndexKind::Tree { key: vec![0] });
        let off = IndexOptions { set_dedup: false, ..opts };
        assert_eq!(choose_index(&b, 1, &[], off), IndexKind::List);
    }

    #[test]
    fn partial_fd_key_extends_with_remaining_positions() {
        let c = info(SetForm::Explicit, vec![Fd::new([1], 2)], vec![]);
        let lk = [ReducedLookup { query: q(&[1]), mirror: None }];
        assert_eq!(choose_index(&c, 3, &lk, IndexOptions::default()), IndexKind::Tree { key: vec![1, 0, 2] });
    }
}
