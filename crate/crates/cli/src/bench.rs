//! Timing harness: median wall time over repetitions plus the
//! machine-independent probe counters of one run.

use std::fmt;
use std::time::{Duration, Instant};

use chrforge::plancompile::CompiledProgram;
use chrforge::runtime::{Engine, Probes, RunConfig, RunError, Stats};
use serde_json::{json, Value as Json};

use crate::Goal;

#[derive(Clone, Debug)]
pub struct Sample {
    pub elapsed: Duration,
    pub probes: Probes,
    pub stats: Stats,
    pub outcome: Result<Vec<String>, RunError>,
}

/// Solves `goal` once on a fresh store.
pub fn run_once(prog: &CompiledProgram, goal: &Goal, config: RunConfig) -> Sample {
    let start = Instant::now();
    let mut engine = Engine::new(prog, config);
    let result = engine.solve(goal);
    let elapsed = start.elapsed();
    Sample {
        elapsed,
        probes: engine.store.probes,
        stats: engine.stats,
        outcome: result.map(|()| engine.canonical_store()),
    }
}

pub fn median(mut xs: Vec<Duration>) -> Duration {
    assert!(!xs.is_empty(), "median of no samples");
    xs.sort_unstable();
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub flags: String,
    pub size: String,
    pub median: Duration,
    pub probes: Probes,
    pub stats: Stats,
    /// Final store size, or the error that stopped the run.
    pub outcome: Result<usize, RunError>,
}

pub fn bench_query(prog: &CompiledProgram, goal: &Goal, flags: &str, size: &str, reps: u32, config: RunConfig) -> BenchRow {
    let samples: Vec<Sample> = (0..reps.max(1)).map(|_| run_once(prog, goal, config)).collect();
    let last = samples.last().expect("at least one repetition").clone();
    BenchRow {
        flags: flags.to_string(),
        size: size.to_string(),
        median: median(samples.iter().map(|s| s.elapsed).collect()),
        probes: last.probes,
        stats: last.stats,
        outcome: last.outcome.map(|s| s.len()),
    }
}

impl BenchRow {
    pub fn header() -> String {
        format!(
            "{:<10} {:<24} {:>12} {:>14} {:>14} {:>10} {:>8}",
            "size", "flags", "median_ms", "comparisons", "iterations", "firings", "store"
        )
    }

    pub fn to_json(&self) -> Json {
        json!({
            "size": self.size,
            "flags": self.flags,
            "median_ms": self.median.as_secs_f64() * 1e3,
            "probes": self.probes,
            "stats": self.stats,
            "store": match &self.outcome {
                Ok(n) => json!(n),
                Err(e) => json!(e.to_string()),
            },
        })
    }
}

impl fmt::Display for BenchRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let store = match &self.outcome {
            Ok(n) => n.to_string(),
            Err(RunError::Failed(_)) => "fail".to_string(),
            Err(_) => "error".to_string(),
        };
        write!(
            f,
            "{:<10} {:<24} {:>12.3} {:>14} {:>14} {:>10} {:>8}",
            self.size,
            self.flags,
            self.median.as_secs_f64() * 1e3,
            self.probes.comparisons,
            self.probes.iterations,
            self.stats.firings,
            store
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even_counts() {
        let ms = |v: &[u64]| v.iter().map(|&x| Duration::from_millis(x)).collect::<Vec<_>>();
        assert_eq!(median(ms(&[5, 1, 3])), Duration::from_millis(3));
        assert_eq!(median(ms(&[4, 1, 3, 2])), Duration::from_micros(2500));
    }
}
