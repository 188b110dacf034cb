use chrforge::plancompile::{compile, OptFlags};
use chrforge::runtime::{solve_goal, Engine, RunConfig, RunError, Transition};
use chrforge::surface::{parse_goal, parse_program};

const INTERVAL: &str = include_str!("../../../programs/interval.chr");
const NEQ: &str = include_str!("../../../programs/neq.chr");
const FIXED: &str = include_str!("../../../programs/fixed.chr");
const DFA: &str = include_str!("../../../programs/dfa.chr");

fn run(src: &str, goal: &str, flags: OptFlags, config: RunConfig) -> Result<Vec<String>, RunError> {
    let p = parse_program(src).unwrap();
    let c = compile(&p, flags);
    let g: Vec<_> = parse_goal(&p, goal).unwrap().into_iter().map(|g| (g.symbol, g.args)).collect();
    solve_goal(&c, &g, config)
}

fn every_combination(src: &str, goal: &str) -> Result<Vec<String>, RunError> {
    let reference = run(src, goal, OptFlags::all(), RunConfig::default());
    for flags in OptFlags::combinations() {
        let got = run(src, goal, flags, RunConfig::default());
        assert_eq!(got, reference, "flags {flags:?} on `{goal}`");
    }
    reference
}

#[test]
fn interval_propagates_bounds() {
    let store = every_combination(INTERVAL, "bounds(1, 0, 10), bounds(2, 3, 5), eq(1, 2)").unwrap();
    assert_eq!(store, ["bounds(1,3,5)", "bounds(2,3,5)", "eq(1,2)"]);
    let store = every_combination(INTERVAL, "bounds(1, 0, 10), bounds(2, 4, 4), plus(1, 2, 3), bounds(3, 0, 6)").unwrap();
    assert_eq!(store, ["bounds(1,0,2)", "bounds(2,4,4)", "bounds(3,4,6)", "plus(1,2,3)"]);
}

#[test]
fn interval_disequality_narrows_and_fails() {
    let store = every_combination(INTERVAL, "bounds(1, 2, 2), bounds(2, 2, 5), 1 != 2").unwrap();
    assert_eq!(store, ["1 != 2", "2 != 1", "bounds(1,2,2)", "bounds(2,3,5)"]);
    let err = every_combination(INTERVAL, "bounds(1, 2, 2), bounds(2, 2, 2), 1 != 2").unwrap_err();
    assert!(matches!(err, RunError::Failed(_)));
}

#[test]
fn fixed_is_a_query() {
    assert_eq!(every_combination(FIXED, "bounds(1, 0, 3), bounds(1, 3, 9), fixed(1)").unwrap(), ["bounds(1,3,3)"]);
    assert!(matches!(every_combination(FIXED, "bounds(1, 0, 3), fixed(1)"), Err(RunError::Failed(_))));
}

#[test]
fn neq_needs_deduplication_to_terminate() {
    let store = run(NEQ, "a != b", OptFlags::all(), RunConfig::default()).unwrap();
    assert_eq!(store, ["a != b", "b != a"]);
    let config = RunConfig { depth_limit: 10_000, ..RunConfig::default() };
    let off = OptFlags { set_dedup: false, ..OptFlags::all() };
    assert_eq!(run(NEQ, "a != b", off, config), Err(RunError::DepthLimit(10_000)));
}

#[test]
fn dfa_recognizes_an_arrow() {
    let goal = "circle(pt(0, 0), 10), circle(pt(40, 0), 10), \
        line(pt(10, 0), pt(30, 0)), line(pt(30, 0), pt(25, 3)), line(pt(30, 0), pt(25, -3)), \
        text(pt(20, 2), a), line(pt(100, 100), pt(120, 130))";
    let store = every_combination(DFA, goal).unwrap();
    assert_eq!(
        store,
        [
            "arrow(pt(10,0),pt(30,0),a)",
            "circle(pt(0,0),10)",
            "circle(pt(40,0),10)",
            "line(pt(100,100),pt(120,130))",
            "line(pt(120,130),pt(100,100))",
        ]
    );
}

#[test]
fn every_transition_keeps_indexes_coherent() {
    let p = parse_program(INTERVAL).unwrap();
    for flags in [OptFlags::all(), OptFlags::none()] {
        let c = compile(&p, flags);
        let mut e = Engine::new(&c, RunConfig::default());
        let mut fired = 0usize;
        e.set_monitor(Box::new(|store, t| {
            if matches!(t, Transition::Fire { .. }) {
                fired += 1;
            }
            store.check_coherence()
        }));
        let goal = parse_goal(&p, "bounds(1, 0, 9), bounds(2, 0, 9), bounds(3, 0, 9), plus(1, 2, 3), 1 != 2, bounds(1, 4, 4), geq(3, 2)").unwrap();
        let g: Vec<_> = goal.into_iter().map(|g| (g.symbol, g.args)).collect();
        e.solve(&g).unwrap();
        drop(e);
        assert!(fired > 0);
    }
}
