//! Static well-formedness checks beyond syntax.

use std::collections::BTreeSet;

use super::{BodyItem, Program, RuleKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule `{rule}`: {message}")]
pub struct ValidationError {
    pub rule: String,
    pub message: String,
}

/// Checks every rule: heads have ground compounds only, every guard can be
/// scheduled once all head variables are bound, and body variables are bound
/// by the heads, the guard or an earlier body assignment.
pub fn validate_program(program: &Program) -> Result<(), Vec<ValidationError>> {
    let mut errors = Vec::new();
    for rule in &program.rules {
        let mut err = |message: String| {
            errors.push(ValidationError {
                rule: rule.display_name(),
                message,
            })
        };
        let shape_ok = match rule.kind {
            RuleKind::Simplification => rule.kept.is_empty() && !rule.removed.is_empty(),
            RuleKind::Propagation => !rule.kept.is_empty() && rule.removed.is_empty(),
            RuleKind::Simpagation => !rule.kept.is_empty() && !rule.removed.is_empty(),
        };
        if !shape_ok {
            err(format!("{:?} rule has the wrong head sides", rule.kind));
        }
        for (_, h) in rule.heads() {
            if h.args.len() != program.arity(h.symbol) {
                err(format!("head `{}` has the wrong arity", program.show(h)));
            }
            if h.args.iter().any(|a| matches!(a, super::Term::Compound(..)) && !a.is_ground()) {
                err(format!("head `{}` contains a non-ground compound", program.show(h)));
            }
        }

        let mut known = rule.head_vars();
        let mut pending: Vec<usize> = (0..rule.guard.len()).collect();
        loop {
            let before = pending.len();
            pending.retain(|&i| {
                let g = &rule.guard[i];
                if g.invars.is_subset(&known) {
                    known.extend(g.outvars.iter().cloned());
                    false
                } else {
                    true
                }
            });
            if pending.is_empty() || pending.len() == before {
                break;
            }
        }
        for &i in &pending {
            let g = &rule.guard[i];
            let missing: Vec<&String> = g.invars.difference(&known).collect();
            err(format!(
                "unschedulable guard `{}`: {} never bound",
                program.show(g),
                missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            ));
        }

        for item in &rule.body {
            let (needed, binds): (BTreeSet<String>, BTreeSet<String>) = match item {
                BodyItem::Constraint { args, .. } => {
                    let mut vs = BTreeSet::new();
                    args.iter().for_each(|a| a.collect_vars(&mut vs));
                    (vs, BTreeSet::new())
                }
                BodyItem::Builtin(g) => (g.invars.clone(), g.outvars.clone()),
                BodyItem::True | BodyItem::Fail => Default::default(),
            };
            for v in needed.difference(&known) {
                err(format!("variable {v} is unbound in body goal `{}`", program.show(item)));
            }
            known.extend(binds);
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse_program;

    #[test]
    fn unschedulable_guard_reported() {
        let p = parse_program(":- chr_constraint p/1.\np(X) <=> Y > 0 | true.\n").unwrap();
        let errs = validate_program(&p).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("unschedulable guard"), "{}", errs[0]);
    }

    #[test]
    fn guard_order_does_not_matter() {
        let p = parse_program(":- chr_constraint p/1.\np(X) <=> Y > 0, Y = X + 1 | true.\n").unwrap();
        assert!(validate_program(&p).is_ok());
        let p = parse_program(":- chr_constraint p/1.\np(X) <=> Y = X + 1, Y > 0 | true.\n").unwrap();
        assert!(validate_program(&p).is_ok());
    }

    #[test]
    fn unbound_body_variable_reported() {
        let p = parse_program(":- chr_constraint p/1.\np(X) <=> p(Z).\n").unwrap();
        let errs = validate_program(&p).unwrap_err();
        assert!(errs[0].message.contains("Z"));
        let p = parse_program(":- chr_constraint p/1.\np(X) <=> Z = X * 2, p(Z).\n").unwrap();
        assert!(validate_program(&p).is_ok());
    }
}
