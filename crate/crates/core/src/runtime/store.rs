//! The constraint store: every constraint ever created, with liveness, and
//! one index per symbol over the stored ones.

use std::sync::Arc;

use crate::indexsel::IndexKind;
use crate::surface::SymbolId;
use crate::value::Value;

use super::tree::AvlTree;
use super::{Cid, RunError};

#[derive(Clone, Debug)]
pub struct ConstraintSlot {
    pub symbol: SymbolId,
    pub args: Arc<[Value]>,
    pub alive: bool,
    pub stored: bool,
    /// The last mirror image found for this constraint, and the swap used.
    mirror: Option<((usize, usize), Cid)>,
}

#[derive(Clone, Debug)]
pub enum Index {
    YesNo(Option<Cid>),
    Tree { key: Vec<usize>, tree: AvlTree },
    List(Vec<Cid>),
}

impl Index {
    pub fn new(kind: &IndexKind) -> Self {
        match kind {
            IndexKind::YesNo => Index::YesNo(None),
            IndexKind::Tree { key } => Index::Tree {
                key: key.clone(),
                tree: AvlTree::new(),
            },
            IndexKind::List => Index::List(Vec::new()),
        }
    }
}

/// Work counters: key comparisons in trees and elements visited in lists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Probes {
    pub comparisons: u64,
    pub iterations: u64,
}

impl Probes {
    pub fn total(&self) -> u64 {
        self.comparisons + self.iterations
    }
}

#[derive(Clone, Debug)]
pub struct Store {
    constraints: Vec<ConstraintSlot>,
    indexes: Vec<Index>,
    pub probes: Probes,
    key_buf: Vec<Value>,
}

fn key_of(key: &[usize], args: &[Value]) -> Box<[Value]> {
    key.iter().map(|&p| args[p].clone()).collect()
}

impl Store {
    pub fn new(kinds: &[IndexKind]) -> Self {
        Store {
            constraints: Vec::new(),
            indexes: kinds.iter().map(Index::new).collect(),
            probes: Probes::default(),
            key_buf: Vec::new(),
        }
    }

    /// Allocates a live, not yet stored constraint.
    pub fn create(&mut self, symbol: SymbolId, args: Arc<[Value]>) -> Cid {
        self.constraints.push(ConstraintSlot {
            symbol,
            args,
            alive: true,
            stored: false,
            mirror: None,
        });
        (self.constraints.len() - 1) as Cid
    }

    pub fn get(&self, c: Cid) -> &ConstraintSlot {
        &self.constraints[c as usize]
    }

    pub fn args(&self, c: Cid) -> &Arc<[Value]> {
        &self.constraints[c as usize].args
    }

    pub fn alive(&self, c: Cid) -> bool {
        self.constraints[c as usize].alive
    }

    pub fn is_stored(&self, c: Cid) -> bool {
        self.constraints[c as usize].stored
    }

    pub fn index_of(&self, s: SymbolId) -> &Index {
        &self.indexes[s.0]
    }

    /// Adds a live constraint to its symbol's index.
    pub fn insert(&mut self, c: Cid) -> Result<(), RunError> {
        let slot = &mut self.constraints[c as usize];
        debug_assert!(slot.alive && !slot.stored);
        slot.stored = true;
        let args = slot.args.clone();
        match &mut self.indexes[slot.symbol.0] {
            Index::YesNo(cell) => {
                if let Some(other) = cell {
                    return Err(RunError::Internal(format!(
                        "single-slot index already holds constraint #{other} when storing #{c}"
                    )));
                }
                *cell = Some(c);
            }
            Index::Tree { key, tree } => tree.insert(key_of(key, &args), c, &mut self.probes.comparisons),
            Index::List(v) => v.push(c),
        }
        Ok(())
    }

    /// Marks the constraint dead and drops it from its index.
    pub fn kill(&mut self, c: Cid) {
        let slot = &mut self.constraints[c as usize];
        debug_assert!(slot.alive, "constraint #{c} killed twice");
        slot.alive = false;
        if !std::mem::replace(&mut slot.stored, false) {
            return;
        }
        let args = slot.args.clone();
        match &mut self.indexes[slot.symbol.0] {
            Index::YesNo(cell) => {
                debug_assert_eq!(*cell, Some(c));
                *cell = None;
            }
            Index::Tree { key, tree } => {
                let mut ignored = 0;
                let removed = tree.remove(&key_of(key, &args), c, &mut ignored);
                debug_assert!(removed);
            }
            Index::List(v) => {
                let pos = v.iter().position(|&x| x == c).expect("listed");
                v.swap_remove(pos);
            }
        }
    }

    /// Stored constraints of `s` whose key starts with `prefix` (trees), or
    /// every stored constraint of `s` (other indexes).
    pub fn candidates(&mut self, s: SymbolId, prefix: &[Value], out: &mut Vec<Cid>) {
        out.clear();
        match &self.indexes[s.0] {
            Index::YesNo(cell) => {
                self.probes.iterations += 1;
                out.extend(cell.iter().copied());
            }
            Index::Tree { tree, .. } => tree.scan_prefix(prefix, &mut self.probes.comparisons, out),
            Index::List(v) => {
                self.probes.iterations += v.len() as u64;
                out.extend_from_slice(v);
            }
        }
    }

    /// A stored constraint of `s` with exactly these arguments.
    pub fn find_exact(&mut self, s: SymbolId, args: &[Value]) -> Option<Cid> {
        self.find_permuted(s, args, |p| p)
    }

    /// A stored constraint equal to `c` with positions `i` and `j` exchanged.
    /// The answer is remembered on `c` and reused while it stays stored.
    pub fn find_mirror(&mut self, c: Cid, (i, j): (usize, usize)) -> Option<Cid> {
        if let Some((swap, m)) = self.constraints[c as usize].mirror {
            let ms = &self.constraints[m as usize];
            if swap == (i, j) && ms.alive && ms.stored {
                self.probes.iterations += 1;
                return Some(m);
            }
        }
        let (s, args) = (self.constraints[c as usize].symbol, self.constraints[c as usize].args.clone());
        let found = self.find_permuted(s, &args, |p| if p == i { j } else if p == j { i } else { p });
        if let Some(m) = found {
            self.constraints[c as usize].mirror = Some(((i, j), m));
            self.constraints[m as usize].mirror = Some(((i, j), c));
        }
        found
    }

    /// A stored constraint whose argument `p` is `args[perm(p)]` for every `p`.
    fn find_permuted(&mut self, s: SymbolId, args: &[Value], perm: impl Fn(usize) -> usize) -> Option<Cid> {
        let mut key_buf = std::mem::take(&mut self.key_buf);
        key_buf.clear();
        if let Index::Tree { key, .. } = &self.indexes[s.0] {
            key_buf.extend(key.iter().map(|&p| args[perm(p)].clone()));
        }
        let found = self.find_where(s, &key_buf, |a| (0..a.len()).all(|p| a[p] == args[perm(p)]));
        self.key_buf = key_buf;
        found
    }

    /// The first stored constraint of `s` under the tree prefix `prefix`
    /// whose arguments satisfy `accept`.
    fn find_where(&mut self, s: SymbolId, prefix: &[Value], accept: impl Fn(&[Value]) -> bool) -> Option<Cid> {
        let constraints = &self.constraints;
        let accept = |c: Cid| accept(&constraints[c as usize].args);
        match &self.indexes[s.0] {
            Index::YesNo(cell) => {
                self.probes.iterations += 1;
                cell.filter(|&c| accept(c))
            }
            Index::Tree { tree, .. } => tree.find_prefix(prefix, &mut self.probes.comparisons, accept),
            Index::List(v) => {
                for &c in v {
                    self.probes.iterations += 1;
                    if accept(c) {
                        return Some(c);
                    }
                }
                None
            }
        }
    }

    /// Live stored constraints.
    pub fn stored(&self) -> impl Iterator<Item = (Cid, &ConstraintSlot)> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, s)| s.alive && s.stored)
            .map(|(i, s)| (i as Cid, s))
    }

    pub fn created(&self) -> usize {
        self.constraints.len()
    }

    /// Checks that the indexes hold exactly the live stored constraints.
    pub fn check_coherence(&self) -> Result<(), String> {
        let mut indexed: Vec<Cid> = Vec::new();
        for (si, idx) in self.indexes.iter().enumerate() {
            let members: Vec<Cid> = match idx {
                Index::YesNo(cell) => cell.iter().copied().collect(),
                Index::Tree { key, tree } => {
                    tree.check()?;
                    for (k, c) in tree.entries() {
                        if k != &key_of(key, &self.constraints[c as usize].args)[..] {
                            return Err(format!("constraint #{c} filed under a stale key"));
                        }
                    }
                    tree.entries().into_iter().map(|(_, c)| c).collect()
                }
                Index::List(v) => v.clone(),
            };
            for &c in &members {
                let slot = &self.constraints[c as usize];
                if !slot.alive || !slot.stored || slot.symbol.0 != si {
                    return Err(format!("index {si} holds constraint #{c} that is dead or foreign"));
                }
            }
            indexed.extend(members);
        }
        indexed.sort_unstable();
        let before = indexed.len();
        indexed.dedup();
        if before != indexed.len() {
            return Err("a constraint is indexed twice".to_string());
        }
        let live: Vec<Cid> = self.stored().map(|(c, _)| c).collect();
        if live != indexed {
            return Err(format!("{} live stored constraints but {} indexed", live.len(), indexed.len()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[i64]) -> Arc<[Value]> {
        v.iter().map(|&i| Value::Int(i)).collect()
    }

    #[test]
    fn yesno_overflow_is_internal_error() {
        let mut s = Store::new(&[IndexKind::YesNo]);
        let a = s.create(SymbolId(0), args(&[12]));
        s.insert(a).unwrap();
        let b = s.create(SymbolId(0), args(&[13]));
        assert!(matches!(s.insert(b), Err(RunError::Internal(_))));
    }

    #[test]
    fn delete_empties_yesno() {
        let mut s = Store::new(&[IndexKind::YesNo]);
        let a = s.create(SymbolId(0), args(&[12]));
        s.insert(a).unwrap();
        s.kill(a);
        assert!(!s.alive(a));
        let mut out = Vec::new();
        s.candidates(SymbolId(0), &[], &mut out);
        assert!(out.is_empty());
        s.check_coherence().unwrap();
    }

    #[test]
    fn tree_prefix_lookup_and_numbers() {
        let mut s = Store::new(&[IndexKind::Tree { key: vec![0] }]);
        let v1 = s.create(SymbolId(0), vec![Value::atom("v1"), Value::Int(3), Value::Int(10)].into());
        let v2 = s.create(SymbolId(0), vec![Value::atom("v2"), Value::Int(0), Value::Int(5)].into());
        s.insert(v2).unwrap();
        s.insert(v1).unwrap();
        let mut out = Vec::new();
        s.candidates(SymbolId(0), &[Value::atom("v1")], &mut out);
        assert_eq!(out, vec![v1]);
        s.candidates(SymbolId(0), &[], &mut out);
        assert_eq!(out, vec![v1, v2]);
        assert_eq!(s.find_exact(SymbolId(0), &s.args(v2).clone()), Some(v2));
        s.check_coherence().unwrap();
    }

    #[test]
    fn list_numbers_are_sequential() {
        let mut s = Store::new(&[IndexKind::List]);
        for i in 0..1000 {
            let c = s.create(SymbolId(0), args(&[i]));
            assert_eq!(c, i as Cid);
            s.insert(c).unwrap();
        }
        assert_eq!(s.stored().count(), 1000);
    }
}
