//! Benchmark query generators. Each produces goal text for one of the
//! shipped programs, so a generated query can also be replayed with
//! `chrforge run --goal`.

use std::fmt::Write as _;

use rand::Rng;

/// A generator name and its size parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    /// `gcd(a), gcd(b)`.
    Gcd { a: i64, b: i64 },
    /// `n`-queens constraints posted on the interval solver, every
    /// constraint added `dup` times, followed by placing queen 1 in column 1.
    Queens { n: i64, dup: usize },
    /// The fixed 10-element DFA scene hidden among `clutter` arrows that are
    /// attached to no state.
    Dfa { clutter: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("unknown generator `{0}` (expected gcd, interval or dfa)")]
    UnknownGenerator(String),
    #[error("bad size `{size}` for generator {generator}: {reason}")]
    BadSize {
        generator: &'static str,
        size: String,
        reason: &'static str,
    },
}

impl Query {
    /// Parses a size such as `12,2` (interval), `10000,3` (gcd) or `50` (dfa).
    pub fn parse(generator: &str, size: &str) -> Result<Query, QueryError> {
        let nums: Result<Vec<i64>, _> = size.split(',').map(|s| s.trim().parse::<i64>()).collect();
        let bad = |generator, reason| QueryError::BadSize {
            generator,
            size: size.to_string(),
            reason,
        };
        match generator {
            "gcd" => match nums.as_deref() {
                Ok([a, b]) if *a >= 0 && *b >= 0 => Ok(Query::Gcd { a: *a, b: *b }),
                _ => Err(bad("gcd", "expected two non-negative integers a,b")),
            },
            "interval" => match nums.as_deref() {
                Ok([n]) if *n >= 1 => Ok(Query::Queens { n: *n, dup: 1 }),
                Ok([n, b]) if *n >= 1 && *b >= 1 => Ok(Query::Queens { n: *n, dup: *b as usize }),
                _ => Err(bad("interval", "expected n or n,b with n, b >= 1")),
            },
            "dfa" => match nums.as_deref() {
                Ok([a]) if *a >= 0 => Ok(Query::Dfa { clutter: *a as usize }),
                _ => Err(bad("dfa", "expected the number of clutter arrows")),
            },
            other => Err(QueryError::UnknownGenerator(other.to_string())),
        }
    }

    pub fn generator(&self) -> &'static str {
        match self {
            Query::Gcd { .. } => "gcd",
            Query::Queens { .. } => "interval",
            Query::Dfa { .. } => "dfa",
        }
    }

    pub fn size_label(&self) -> String {
        match self {
            Query::Gcd { a, b } => format!("{a},{b}"),
            Query::Queens { n, dup } => format!("{n},{dup}"),
            Query::Dfa { clutter } => clutter.to_string(),
        }
    }

    pub fn goal(&self) -> String {
        match *self {
            Query::Gcd { a, b } => format!("gcd({a}), gcd({b})"),
            Query::Queens { n, dup } => queens_goal(n, dup),
            Query::Dfa { clutter } => dfa_goal(clutter),
        }
    }
}

/// Variable numbering for the queens poster: queen `i` is variable `i`,
/// the constant `k` is `offset_var(k)` and `q_i + k` is `shifted_var(i, k)`.
pub fn offset_var(n: i64, k: i64) -> i64 {
    n + k
}

pub fn shifted_var(n: i64, i: i64, k: i64) -> i64 {
    2 * n + (i - 1) * n + k
}

fn queens_goal(n: i64, dup: usize) -> String {
    let mut atoms: Vec<String> = Vec::new();
    for i in 1..=n {
        atoms.push(format!("bounds({i}, 1, {n})"));
    }
    for k in 1..n {
        atoms.push(format!("bounds({}, {k}, {k})", offset_var(n, k)));
        for i in 1..=n {
            let s = shifted_var(n, i, k);
            atoms.push(format!("bounds({s}, {}, {})", 1 + k, n + k));
            atoms.push(format!("plus({i}, {}, {s})", offset_var(n, k)));
        }
    }
    for i in 1..=n {
        for j in i + 1..=n {
            let k = j - i;
            atoms.push(format!("{i} != {j}"));
            atoms.push(format!("{i} != {}", shifted_var(n, j, k)));
            atoms.push(format!("{j} != {}", shifted_var(n, i, k)));
        }
    }
    let mut goal = String::new();
    for a in &atoms {
        for _ in 0..dup {
            if !goal.is_empty() {
                goal.push_str(", ");
            }
            goal.push_str(a);
        }
    }
    goal.push_str(", bounds(1, 1, 1)");
    goal
}

/// The states of the 10-element scene: two circles of radius 10.
pub const DFA_STATES: &str = "circle(pt(0, 0), 10), circle(pt(60, 0), 10)";

/// The labels of the scene's two transitions.
pub const DFA_LABELS: &str = "text(pt(30, 2), a), text(pt(30, 12), b)";

/// The strokes of the scene's two transitions: a shaft and two head strokes each.
pub const DFA_STROKES: &str = "line(pt(10, 0), pt(50, 0)), line(pt(45, 3), pt(50, 0)), line(pt(45, -3), pt(50, 0)), \
    line(pt(60, 10), pt(0, 10)), line(pt(5, 13), pt(0, 10)), line(pt(5, 7), pt(0, 10))";

/// The arrows the scene contains, in canonical order.
pub const DFA_SCENE_ARROWS: [&str; 2] = ["arrow(pt(10,0),pt(50,0),a)", "arrow(pt(60,10),pt(0,10),b)"];

/// Elements are posted as the scene is drawn: the states first, then
/// every clutter arrow (shaft, head strokes, label), then the scene's own
/// transitions.
fn dfa_goal(clutter: usize) -> String {
    let mut goal = DFA_STATES.to_string();
    for k in 0..clutter {
        let (x, y) = (1000 + 100 * k as i64, 1000i64);
        let head = format!("pt({}, {y})", x + 40);
        let _ = write!(
            goal,
            ", line(pt({x}, {y}), {head}), line(pt({}, {}), {head}), line(pt({}, {}), {head}), text(pt({}, {}), t{k})",
            x + 35,
            y + 3,
            x + 35,
            y - 3,
            x + 20,
            y + 2
        );
    }
    let _ = write!(goal, ", {DFA_STROKES}, {DFA_LABELS}");
    goal
}

/// Random `gcd` query pairs with both numbers in `1..=max`.
pub fn random_gcd_pairs(rng: &mut impl Rng, count: usize, max: i64) -> Vec<(i64, i64)> {
    (0..count).map(|_| (rng.gen_range(1..=max), rng.gen_range(1..=max))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sizes() {
        assert_eq!(Query::parse("gcd", "10000,3").unwrap(), Query::Gcd { a: 10000, b: 3 });
        assert_eq!(Query::parse("interval", "12,2").unwrap(), Query::Queens { n: 12, dup: 2 });
        assert_eq!(Query::parse("dfa", "50").unwrap(), Query::Dfa { clutter: 50 });
        assert!(Query::parse("dfa", "x").is_err());
        assert!(Query::parse("nope", "1").is_err());
    }

    #[test]
    fn queens_poster_counts() {
        let n = 4;
        let goal = queens_goal(n, 2);
        let count = |needle: &str| goal.matches(needle).count() as i64;
        assert_eq!(count("plus("), 2 * n * (n - 1));
        assert_eq!(count("!="), 2 * 3 * n * (n - 1) / 2);
        assert!(goal.ends_with("bounds(1, 1, 1)"));
    }

    #[test]
    fn shifted_variables_do_not_collide() {
        let n = 7;
        let mut seen = std::collections::BTreeSet::new();
        for i in 1..=n {
            assert!(seen.insert(i));
        }
        for k in 1..n {
            assert!(seen.insert(offset_var(n, k)));
            for i in 1..=n {
                assert!(seen.insert(shifted_var(n, i, k)));
            }
        }
    }

    #[test]
    fn dfa_clutter_has_four_elements_per_arrow() {
        let goal = dfa_goal(3);
        assert_eq!(goal.matches("line(").count(), 3 * 3 + 6);
        assert_eq!(goal.matches("text(").count(), 3 + 2);
        assert_eq!(goal.matches("circle(").count(), 2);
    }

    proptest::proptest! {
        #[test]
        fn size_labels_parse_back(a in 0i64..1_000_000, b in 0i64..1_000_000, n in 1i64..40, dup in 1usize..4, clutter in 0usize..500) {
            for q in [Query::Gcd { a, b }, Query::Queens { n, dup }, Query::Dfa { clutter }] {
                proptest::prop_assert_eq!(Query::parse(q.generator(), &q.size_label()).unwrap(), q);
            }
        }
    }
}
