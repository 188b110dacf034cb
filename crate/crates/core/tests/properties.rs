mod common;

use std::collections::BTreeSet;

use chrforge::analysis::{behavioral_fixpoint, fdclose_positions, Fd};
use chrforge::indexsel::IndexKind;
use chrforge::runtime::{Cid, Store};
use chrforge::surface::{parse_program, SymbolId};
use chrforge::Value;
use common::random_program::random_program;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

const SHIPPED: [&str; 5] = [
    include_str!("../../../programs/gcd.chr"),
    include_str!("../../../programs/interval.chr"),
    include_str!("../../../programs/dfa.chr"),
    include_str!("../../../programs/neq.chr"),
    include_str!("../../../programs/fixed.chr"),
];

#[test]
fn shipped_programs_print_and_reparse() {
    for src in SHIPPED {
        let p = parse_program(src).unwrap();
        let printed = p.to_string();
        let q = parse_program(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(p.rules, q.rules, "{printed}");
        assert_eq!(q.to_string(), printed);
    }
}

fn fd_strategy(arity: usize) -> impl Strategy<Value = Vec<Fd>> {
    prop::collection::vec(
        (prop::collection::btree_set(0..arity, 0..arity), 0..arity).prop_map(|(s, t)| Fd::new(s, t)),
        0..6,
    )
}

fn positions(arity: usize) -> impl Strategy<Value = BTreeSet<usize>> {
    prop::collection::btree_set(0..arity, 0..=arity)
}

proptest! {
    #[test]
    fn random_programs_print_and_reparse(seed in any::<u64>()) {
        let src = random_program(&mut StdRng::seed_from_u64(seed)).source();
        let p = parse_program(&src).unwrap();
        let printed = p.to_string();
        let q = parse_program(&printed).unwrap();
        prop_assert_eq!(&p.rules, &q.rules);
        prop_assert_eq!(q.to_string(), printed);
    }

    #[test]
    fn fdclose_is_a_closure_operator(
        (fds, a, b) in (1usize..=5).prop_flat_map(|n| (fd_strategy(n), positions(n), positions(n)))
    ) {
        let ca = fdclose_positions(&a, &fds);
        prop_assert!(ca.is_superset(&a), "extensive");
        prop_assert_eq!(&fdclose_positions(&ca, &fds), &ca, "idempotent");
        let union: BTreeSet<usize> = a.union(&b).copied().collect();
        prop_assert!(fdclose_positions(&union, &fds).is_superset(&ca), "monotone");
    }

    #[test]
    fn behavioral_fixpoint_ignores_scan_order(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let p = parse_program(&random_program(&mut rng).source()).unwrap();
        let fixed = vec![false; p.decls.len()];
        let mut order: Vec<SymbolId> = p.symbols().collect();
        let reference = behavioral_fixpoint(&p, &fixed, &order);
        for _ in 0..4 {
            order.shuffle(&mut rng);
            prop_assert_eq!(&behavioral_fixpoint(&p, &fixed, &order), &reference);
        }
    }

    /// Trees and lists answer every lookup with the same constraints, after
    /// inserts and deletions in any order.
    #[test]
    fn indexes_agree(
        ops in prop::collection::vec((0i64..4, 0i64..4, any::<bool>()), 1..60),
        probe in (0i64..4, 0i64..4),
    ) {
        let kinds = [IndexKind::List, IndexKind::Tree { key: vec![0, 1] }, IndexKind::Tree { key: vec![1, 0] }];
        let mut stores: Vec<Store> = kinds.iter().map(|k| Store::new(std::slice::from_ref(k))).collect();
        let s = SymbolId(0);
        let mut live: Vec<Cid> = Vec::new();
        for (x, y, delete) in ops {
            if delete && !live.is_empty() {
                let c = live.remove((x * 4 + y) as usize % live.len());
                for st in &mut stores {
                    st.kill(c);
                }
            } else {
                for st in &mut stores {
                    let c = st.create(s, vec![Value::Int(x), Value::Int(y)].into());
                    st.insert(c).unwrap();
                    live.push(c);
                }
                live.dedup();
            }
            for st in &stores {
                st.check_coherence().map_err(TestCaseError::fail)?;
            }
        }
        let (px, py) = (Value::Int(probe.0), Value::Int(probe.1));
        let answer = |st: &mut Store, want: &dyn Fn(&[Value]) -> bool, prefix: &[Value]| {
            let mut out = Vec::new();
            st.candidates(s, prefix, &mut out);
            out.retain(|&c| want(st.args(c)));
            out.sort_unstable();
            out
        };
        let first = |a: &[Value]| a[0] == px;
        let second = |a: &[Value]| a[1] == py;
        let both = |a: &[Value]| a[0] == px && a[1] == py;
        let expect_first = answer(&mut stores[0], &first, &[]);
        let expect_second = answer(&mut stores[0], &second, &[]);
        let expect_both = answer(&mut stores[0], &both, &[]);
        prop_assert_eq!(&answer(&mut stores[1], &first, std::slice::from_ref(&px)), &expect_first);
        prop_assert_eq!(&answer(&mut stores[2], &second, std::slice::from_ref(&py)), &expect_second);
        prop_assert_eq!(&answer(&mut stores[1], &both, &[px.clone(), py.clone()]), &expect_both);
        let exact = [px.clone(), py.clone()];
        for st in &mut stores {
            let found = st.find_exact(s, &exact);
            prop_assert_eq!(found.is_some(), !expect_both.is_empty());
            if let Some(c) = found {
                prop_assert!(expect_both.contains(&c));
            }
        }
    }
}
