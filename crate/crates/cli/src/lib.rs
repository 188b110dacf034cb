//! The `chrforge` command line: analyze, compile, run and benchmark CHR
//! programs with each optimization switchable on its own.

pub mod bench;
pub mod generators;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use chrforge::analysis::{analyze_with, AnalysisOptions, AnalysisReport, StoragePoint};
use chrforge::plancompile::{compile, CompiledProgram, OptFlags};
use chrforge::runtime::{Engine, RunConfig, RunError};
use chrforge::surface::{parse_goal, parse_program, validate_program, Program, SymbolId};
use chrforge::Value;
use clap::{Parser, ValueEnum};
use serde_json::{json, Value as Json};

use crate::bench::{bench_query, BenchRow};
use crate::generators::Query;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// A run stopped by the depth limit or an engine error.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Print the inferred functional dependencies, set semantics,
    /// symmetries and storage points.
    Analyze,
    /// Print the chosen indexes, join orders and occurrence plans.
    Compile,
    /// Solve `--goal` and print the final store, or `fail`.
    Run,
    /// Time a generated query under all optimizations and under the given flags.
    Bench,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum IndexMode {
    List,
    Auto,
}

#[derive(Debug, Parser)]
#[command(name = "chrforge", version, about = "Optimizing compiler and runtime for Constraint Handling Rules")]
pub struct Args {
    pub command: Command,
    pub file: PathBuf,
    /// Ground goal conjunction, e.g. "gcd(9), gcd(6)".
    #[arg(long)]
    pub goal: Option<String>,
    /// Keep partners in textual order with all guards last.
    #[arg(long)]
    pub no_join_order: bool,
    /// Index structure selection; `list` forces unsorted lists.
    #[arg(long, value_enum, default_value = "auto")]
    pub index: IndexMode,
    /// Store every constraint as soon as it becomes active.
    #[arg(long)]
    pub no_late_storage: bool,
    /// Do not skip occurrences that cannot fire after a failed one.
    #[arg(long)]
    pub no_continuation: bool,
    /// Keep duplicates of constraints with behavioral set semantics.
    #[arg(long)]
    pub no_set_dedup: bool,
    /// Do not rewrite lookups through argument symmetries.
    #[arg(long)]
    pub no_symmetry: bool,
    /// Maximum number of nested activations.
    #[arg(long, default_value_t = RunConfig::default().depth_limit)]
    pub depth_limit: usize,
    /// Squared distance up to which `near/2` holds.
    #[arg(long, default_value_t = RunConfig::default().near_tolerance)]
    pub near_tolerance: i64,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Query generator for `bench` (defaults to the file's stem).
    #[arg(long)]
    pub generator: Option<String>,
    /// Generator size, e.g. `12,2` for interval or `50` for dfa; repeatable.
    #[arg(long = "size")]
    pub sizes: Vec<String>,
    /// Timed repetitions per row; the median is reported.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub reps: u32,
}

impl Args {
    pub fn flags(&self) -> OptFlags {
        OptFlags {
            join_order: !self.no_join_order,
            index_auto: self.index == IndexMode::Auto,
            late_storage: !self.no_late_storage,
            continuation: !self.no_continuation,
            set_dedup: !self.no_set_dedup,
            symmetry: !self.no_symmetry,
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            depth_limit: self.depth_limit,
            near_tolerance: self.near_tolerance,
        }
    }
}

/// Reads, parses and validates a program file, with errors rendered for the user.
pub fn load_program(path: &std::path::Path) -> Result<Program, String> {
    let src = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let program = parse_program(&src).map_err(|e| format!("{}: {e}", path.display()))?;
    validate_program(&program).map_err(|errs| {
        errs.iter().map(|e| format!("{}: {e}", path.display())).collect::<Vec<_>>().join("\n")
    })?;
    Ok(program)
}

pub type Goal = Vec<(SymbolId, Vec<Value>)>;

pub fn load_goal(program: &Program, text: &str) -> Result<Goal, String> {
    parse_goal(program, text)
        .map(|g| g.into_iter().map(|c| (c.symbol, c.args)).collect())
        .map_err(|e| format!("goal: {e}"))
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&args, out) {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            let _ = writeln!(err, "chrforge: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: String) -> Failure {
    Failure { code: EXIT_USAGE, message }
}

fn io(e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    }
}

fn execute(args: &Args, out: &mut dyn Write) -> Result<i32, Failure> {
    let program = load_program(&args.file).map_err(usage)?;
    match args.command {
        Command::Analyze => {
            let report = analyze_with(
                &program,
                AnalysisOptions {
                    late_storage: !args.no_late_storage,
                },
            );
            if args.json {
                writeln!(out, "{}", pretty(&analysis_json(&program, &report))).map_err(io)?;
            } else {
                write!(out, "{}", report.render(&program)).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Command::Compile => {
            let compiled = compile(&program, args.flags());
            if args.json {
                writeln!(out, "{}", pretty(&compile_json(&compiled))).map_err(io)?;
            } else {
                write!(out, "{compiled}").map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Command::Run => {
            let goal_text = args.goal.as_deref().ok_or_else(|| usage("run needs --goal".to_string()))?;
            let goal = load_goal(&program, goal_text).map_err(usage)?;
            let compiled = compile(&program, args.flags());
            let mut engine = Engine::new(&compiled, args.run_config());
            let result = engine.solve(&goal);
            let store = engine.canonical_store();
            report_run(args, out, result, &store, engine.stats)
        }
        Command::Bench => {
            let generator = match &args.generator {
                Some(g) => g.clone(),
                None => args.file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            };
            if args.sizes.is_empty() {
                return Err(usage("bench needs at least one --size".to_string()));
            }
            let mut flag_sets = vec![("all".to_string(), OptFlags::all())];
            if args.flags() != OptFlags::all() {
                flag_sets.push((flags_label(args.flags()), args.flags()));
            }
            let mut rows: Vec<BenchRow> = Vec::new();
            for size in &args.sizes {
                let query = Query::parse(&generator, size).map_err(|e| usage(e.to_string()))?;
                let goal = load_goal(&program, &query.goal()).map_err(usage)?;
                for (label, flags) in &flag_sets {
                    let compiled = compile(&program, *flags);
                    rows.push(bench_query(&compiled, &goal, label, &query.size_label(), args.reps, args.run_config()));
                }
            }
            if args.json {
                let rows: Vec<Json> = rows.iter().map(BenchRow::to_json).collect();
                writeln!(out, "{}", pretty(&Json::Array(rows))).map_err(io)?;
            } else {
                writeln!(out, "{}", BenchRow::header()).map_err(io)?;
                for r in &rows {
                    writeln!(out, "{r}").map_err(io)?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn report_run(
    args: &Args,
    out: &mut dyn Write,
    result: Result<(), RunError>,
    store: &[String],
    stats: chrforge::runtime::Stats,
) -> Result<i32, Failure> {
    match result {
        Ok(()) => {
            if args.json {
                let j = json!({"status": "ok", "store": store, "stats": stats});
                writeln!(out, "{}", pretty(&j)).map_err(io)?;
            } else {
                for c in store {
                    writeln!(out, "{c}").map_err(io)?;
                }
            }
            Ok(EXIT_OK)
        }
        Err(RunError::Failed(reason)) => {
            if args.json {
                writeln!(out, "{}", pretty(&json!({"status": "fail", "reason": reason}))).map_err(io)?;
            } else {
                writeln!(out, "fail").map_err(io)?;
            }
            Ok(EXIT_FAIL)
        }
        Err(e) => Err(Failure {
            code: EXIT_RUNTIME,
            message: e.to_string(),
        }),
    }
}

/// `all`, or the list of disabled optimizations such as `no-join-order`.
pub fn flags_label(f: OptFlags) -> String {
    let off: Vec<&str> = [
        (f.join_order, "no-join-order"),
        (f.index_auto, "index-list"),
        (f.late_storage, "no-late-storage"),
        (f.continuation, "no-continuation"),
        (f.set_dedup, "no-set-dedup"),
        (f.symmetry, "no-symmetry"),
    ]
    .iter()
    .filter(|(on, _)| !on)
    .map(|(_, name)| *name)
    .collect();
    if off.is_empty() {
        "all".to_string()
    } else {
        off.join("+")
    }
}

fn pretty(j: &Json) -> String {
    serde_json::to_string_pretty(j).expect("JSON values serialize")
}

pub fn analysis_json(program: &Program, report: &AnalysisReport) -> Json {
    let mut rows: Vec<_> = report.constraints.iter().collect();
    rows.sort_by_key(|c| {
        let d = program.decl(c.symbol);
        (d.name.clone(), d.arity)
    });
    Json::Array(
        rows.iter()
            .map(|c| {
                let d = program.decl(c.symbol);
                let storage = match c.storage {
                    StoragePoint::Entry => json!("entry"),
                    StoragePoint::Occurrence(o) => json!(o),
                    StoragePoint::End => json!("end"),
                    StoragePoint::Never => json!("never"),
                };
                json!({
                    "name": d.name,
                    "arity": d.arity,
                    "fds": c.fds.iter().map(|f| json!({
                        "sources": f.sources.iter().map(|s| s + 1).collect::<Vec<_>>(),
                        "target": f.target + 1,
                    })).collect::<Vec<_>>(),
                    "set": c.set,
                    "symmetries": c.symmetries.iter().map(|(i, j)| [i + 1, j + 1]).collect::<Vec<_>>(),
                    "storage": storage,
                    "never_stored": c.never_stored,
                })
            })
            .collect(),
    )
}

pub fn compile_json(c: &CompiledProgram) -> Json {
    let lines = |s: String| s.lines().map(str::to_string).collect::<Vec<_>>();
    json!({
        "flags": c.flags,
        "indexes": lines(c.render_indexes()),
        "joins": lines(c.render_joins()),
        "plans": lines(c.render_plans()),
    })
}
