use std::sync::Arc;

use chrforge::joinorder::{best_join_order, JoinProblem};
use chrforge::surface::{parse_program_with, BuiltinRegistry, Program};

fn example() -> Program {
    let mut reg = BuiltinRegistry::standard();
    reg.register_test("linear", 1, Arc::new(|_| true));
    parse_program_with(
        ":- chr_constraint p/2, q/4, flag/0, r/3, s/1.\n\
         p(X,Y), q(Y,Z,T,U), flag, r(X,X,U) \\ s(W) <=> W = U + 1, linear(Z) | p(Z,W).\n",
        reg,
    )
    .unwrap()
}

fn set(v: &[&str]) -> std::collections::BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn best_order_for_active_p() {
    let p = example();
    let fds = vec![vec![]; 5];
    let plan = best_join_order(&p, 0, 0, &fds, true);
    assert_eq!(plan.score.to_string(), "(4.5,-7.5)");
    assert_eq!(
        plan.render_goal(&p, &p.rules[0]),
        "flag, r(X, X, U), W = U + 1, s(W), q(Y, Z, T, U), linear(Z)"
    );
    assert_eq!(plan.render_lookups(&p), set(&["flag", "r(X,X,_)", "s(W)", "q(Y,_,_,U)"]));
}

#[test]
fn best_order_for_active_q() {
    let p = example();
    let fds = vec![vec![]; 5];
    let plan = best_join_order(&p, 0, 1, &fds, true);
    assert_eq!(plan.score.to_string(), "(2,-8)");
    assert_eq!(
        plan.render_goal(&p, &p.rules[0]),
        "W = U + 1, linear(Z), s(W), flag, p(X, Y), r(X, X, U)"
    );
    assert_eq!(plan.render_lookups(&p), set(&["s(W)", "flag", "p(_,Y)", "r(X,X,U)"]));
}

#[test]
fn greedy_never_beats_exhaustive() {
    let p = example();
    let fds = vec![vec![]; 5];
    for active in 0..5 {
        let prob = JoinProblem::new(&p, &p.rules[0], active, &fds);
        let (e, g) = (prob.exhaustive(), prob.greedy());
        assert_ne!(g.score.lex_cmp(&e.score), std::cmp::Ordering::Less, "active {active}");
    }
}
