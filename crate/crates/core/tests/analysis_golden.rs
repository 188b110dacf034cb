use chrforge::analysis::analyze;
use chrforge::surface::{parse_program, validate_program};

fn report(src: &str) -> String {
    let p = parse_program(src).unwrap();
    validate_program(&p).unwrap();
    analyze(&p).render(&p)
}

#[test]
fn gcd_report() {
    assert_eq!(
        report(include_str!("../../../programs/gcd.chr")),
        "constraint gcd/1: fd {}->1 | set explicit | storage-occ 2\n"
    );
}

#[test]
fn interval_report() {
    let r = report(include_str!("../../../programs/interval.chr"));
    println!("{r}");
    let expected = "\
constraint !=/2: set explicit | sym {1,2} | storage-occ 3
constraint bounds/3: fd {1}->2, {1}->3 | set explicit | storage-occ 6
";
    for line in expected.lines() {
        assert!(r.lines().any(|l| l == line), "missing `{line}` in\n{r}");
    }
    for name in ["eq/2", "geq/2", "plus/3"] {
        let l = r.lines().find(|l| l.starts_with(&format!("constraint {name}:"))).unwrap();
        assert!(l.contains("set behavioral") && !l.contains("fd ") && !l.contains("sym "), "{l}");
    }
}

#[test]
fn dfa_report() {
    let r = report(include_str!("../../../programs/dfa.chr"));
    println!("{r}");
    assert!(r.lines().any(|l| l == "constraint line/2: set explicit | sym {1,2} | storage-occ 3"), "{r}");
    for name in ["arrow/3", "circle/2", "text/2"] {
        let l = r.lines().find(|l| l.starts_with(&format!("constraint {name}:"))).unwrap();
        assert!(!l.contains("set ") && !l.contains("fd ") && !l.contains("sym "), "{l}");
    }
}

#[test]
fn fixed_is_never_stored() {
    let r = report(include_str!("../../../programs/fixed.chr"));
    assert!(r.contains("constraint fixed/1: never-stored"), "{r}");
}
