//! The `manna` command: parse a problem document, run a solver or audit, and
//! print a text or JSON report.
//!
//! Exit codes: 0 on success, 1 on bad input or a failed computation, 2 when a
//! demo's golden values do not match.

use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use manna_core::report::{
    audit_report, classify_report, components_report, enumerate_report, solve_report, AuditReport, ClassifyReport,
    ComponentsReport, Settings, SolveReport,
};
use manna_core::{
    demo_names, parse_document, run_demo, DemoReport, Error, Mode, ProblemDocument, Rule, WeakCore, DEMOS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "manna", version, about = "Competitive division of goods, bads and neutral items")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Exact rational arithmetic (competitive rule on negative problems, demos).
    #[arg(long, global = true)]
    exact: bool,
    /// Tolerance for KKT certificates.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
    /// Cap on support nodes in the general enumeration.
    #[arg(long = "limit-supports", global = true, value_name = "N")]
    limit_supports: Option<u64>,
    /// Seed for randomized axiom checks.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Positive, negative or null, with the classification margin.
    Classify { file: PathBuf },
    /// Selected division of a rule, with prices and certificate residuals.
    Solve {
        file: PathBuf,
        #[arg(long)]
        rule: Option<Rule>,
    },
    /// Every competitive profile of a negative problem.
    Enumerate { file: PathBuf },
    /// Fairness audit of the rule's selection (or of a supplied allocation) and axiom checks.
    Audit {
        file: PathBuf,
        #[arg(long)]
        rule: Option<Rule>,
        /// Random perturbations per axiom.
        #[arg(long, value_name = "N")]
        trials: Option<usize>,
    },
    /// Connected components of the envy-free efficient set of a two-bad problem.
    Components {
        file: PathBuf,
        /// Also count with the grid oracle at this resolution.
        #[arg(long, value_name = "G")]
        oracle: Option<usize>,
    },
    /// Replay a named reference instance and check its golden values.
    Demo {
        /// Demo name; omit to list them.
        name: Option<String>,
    },
}

/// Runs the command line and returns the exit code. `args` includes the program name.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => f.write_str(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn load(path: &PathBuf) -> Result<ProblemDocument, Failure> {
    let bytes = if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf)?;
        buf
    } else {
        std::fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
    };
    Ok(parse_document(&bytes)?)
}

fn settings(doc: &ProblemDocument, global: &Global, rule: Option<Rule>) -> Settings {
    let mut s = Settings::for_document(doc);
    if global.exact {
        s.mode = Mode::Exact;
    }
    if let Some(t) = global.tol {
        s.tol = t;
    }
    if let Some(n) = global.limit_supports {
        s.limits.max_supports = n;
    }
    if let Some(seed) = global.seed {
        s.seed = seed;
    }
    if let Some(r) = rule {
        s.rule = r;
    }
    s
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Classify { file } => {
            let doc = load(file)?;
            let report = classify_report(&doc)?;
            if g.json {
                emit_json(out, &report)?;
            } else {
                print_classify(out, &doc, &report)?;
            }
        }
        Command::Solve { file, rule } => {
            let doc = load(file)?;
            let report = solve_report(&doc, &settings(&doc, g, *rule))?;
            if g.json {
                emit_json(out, &report)?;
            } else {
                print_solve(out, &doc, &report)?;
            }
        }
        Command::Enumerate { file } => {
            let doc = load(file)?;
            let report = enumerate_report(&doc, &settings(&doc, g, None))?;
            if g.json {
                emit_json(out, &report)?;
            } else {
                print_enumerate(out, &report)?;
            }
        }
        Command::Audit { file, rule, trials } => {
            let doc = load(file)?;
            let mut s = settings(&doc, g, *rule);
            if let Some(t) = trials {
                s.axiom_trials = *t;
            }
            let report = audit_report(&doc, &s)?;
            if g.json {
                emit_json(out, &report)?;
            } else {
                print_audit(out, &doc, &report)?;
            }
        }
        Command::Components { file, oracle } => {
            let doc = load(file)?;
            let mut s = settings(&doc, g, None);
            s.oracle_grid = oracle.or(s.oracle_grid);
            let report = components_report(&doc, &s)?;
            if g.json {
                emit_json(out, &report)?;
            } else {
                print_components(out, &report)?;
            }
        }
        Command::Demo { name: None } => {
            if g.json {
                let list: Vec<Value> = DEMOS.iter().map(|(n, t)| serde_json::json!({"name": n, "title": t})).collect();
                emit_json(out, &list)?;
            } else {
                for (n, t) in DEMOS {
                    writeln!(out, "{n:<18} {t}")?;
                }
            }
        }
        Command::Demo { name: Some(name) } => {
            if !demo_names().any(|n| n == name) {
                return Err(Error::Unsupported(format!(
                    "unknown demo {name:?}; known: {}",
                    demo_names().collect::<Vec<_>>().join(", ")
                ))
                .into());
            }
            let report = run_demo(name, if g.exact { Mode::Exact } else { Mode::Float })?;
            if g.json {
                emit_json(out, &report)?;
            } else {
                print_demo(out, &report)?;
            }
            return Ok(if report.passed { EXIT_OK } else { EXIT_ASSERTION });
        }
    }
    Ok(EXIT_OK)
}

/// Numbers rounded to nine decimals; exact strings unchanged.
fn number(v: &Value) -> String {
    match v {
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let r = (x * 1e9).round() / 1e9;
            if r == 0.0 {
                "0".into()
            } else {
                format!("{r}")
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn tuple(v: &Value) -> String {
    match v {
        Value::Array(xs) => format!("({})", xs.iter().map(number).collect::<Vec<_>>().join(", ")),
        other => number(other),
    }
}

fn floats(xs: &[f64]) -> String {
    tuple(&serde_json::json!(xs))
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn print_classify(out: &mut dyn Write, doc: &ProblemDocument, r: &ClassifyReport) -> std::io::Result<()> {
    let names = |all: &[String], idx: &[usize]| {
        if idx.is_empty() {
            "none".to_string()
        } else {
            idx.iter().map(|&k| all[k].as_str()).collect::<Vec<_>>().join(", ")
        }
    };
    let (agents, items) = (doc.problem.agents(), doc.problem.items());
    writeln!(out, "{} (t*={:.6})", r.kind, r.margin)?;
    writeln!(out, "attracted agents: {}", names(agents, &r.attracted))?;
    writeln!(out, "repulsed agents: {}", names(agents, &r.repulsed))?;
    writeln!(out, "goods: {}", names(items, &r.goods))?;
    writeln!(out, "bads: {}", names(items, &r.bads))?;
    writeln!(out, "neutral: {}", names(items, &r.neutral))
}

fn print_allocation(out: &mut dyn Write, doc: &ProblemDocument, allocation: &Value) -> std::io::Result<()> {
    let items = doc.problem.items();
    if let Value::Array(rows) = allocation {
        for (agent, row) in doc.problem.agents().iter().zip(rows) {
            let cells: Vec<String> = match row {
                Value::Array(xs) => items.iter().zip(xs).map(|(a, x)| format!("{a}={}", number(x))).collect(),
                _ => vec![],
            };
            writeln!(out, "  {agent}: {}", cells.join(" "))?;
        }
    }
    Ok(())
}

fn print_fairness(out: &mut dyn Write, f: &manna_core::FairnessReport) -> std::io::Result<()> {
    let core = match &f.weak_core {
        WeakCore::Holds => "holds".to_string(),
        WeakCore::Blocked { coalition } => format!("blocked by {coalition:?}"),
        WeakCore::Skipped { reason } => format!("skipped ({reason})"),
    };
    writeln!(
        out,
        "fairness: efficient {}, envy-free {}, fair share {}, weak core {core}",
        yes(f.efficient),
        yes(f.envy_free),
        yes(f.fair_share)
    )
}

fn print_solve(out: &mut dyn Write, doc: &ProblemDocument, r: &SolveReport) -> std::io::Result<()> {
    let scope = if r.exhaustive { "exhaustive" } else { "search stopped at a limit" };
    writeln!(
        out,
        "{} problem, {} rule: {} profile(s) ({scope}), selected #{}",
        r.kind,
        r.rule,
        r.profiles.len(),
        r.selected + 1
    )?;
    let d = r.selected_division();
    writeln!(out, "profile: {}", tuple(&d.profile))?;
    writeln!(out, "allocation:")?;
    print_allocation(out, doc, &d.allocation)?;
    if let Some(p) = &d.price {
        writeln!(out, "price: {}", tuple(p))?;
    }
    if let Some(b) = d.budget {
        writeln!(out, "budget: {b}")?;
    }
    if let Some(l) = &d.lambda {
        writeln!(out, "lambda: {}", floats(l))?;
    }
    if let Some(k) = &d.kkt {
        writeln!(
            out,
            "KKT: {} (max residual {:.3e}; budget residuals {})",
            if k.passed { "passed" } else { "FAILED" },
            k.max_residual,
            floats(&k.budget_residuals)
        )?;
    }
    print_fairness(out, &r.fairness)?;
    for n in &r.notes {
        writeln!(out, "note: {n}")?;
    }
    Ok(())
}

fn print_enumerate(out: &mut dyn Write, r: &SolveReport) -> std::io::Result<()> {
    let scope = if r.exhaustive { "exhaustive" } else { "search stopped at a limit" };
    writeln!(out, "{} competitive profile(s) ({scope})", r.profiles.len())?;
    for (k, (p, d)) in r.profiles.iter().zip(&r.divisions).enumerate() {
        let mark = if k == r.selected { '*' } else { ' ' };
        let price = d.price.as_ref().map(tuple).unwrap_or_default();
        writeln!(out, "{mark} {:>3}  {}  price {price}", k + 1, tuple(p))?;
    }
    writeln!(out, "selected (largest product of disutilities): {}", tuple(&r.profiles[r.selected]))?;
    for n in &r.notes {
        writeln!(out, "note: {n}")?;
    }
    Ok(())
}

fn print_audit(out: &mut dyn Write, doc: &ProblemDocument, r: &AuditReport) -> std::io::Result<()> {
    writeln!(out, "{} problem, {} rule, {} allocation", r.kind, r.rule, r.source)?;
    writeln!(out, "profile: {}", floats(&r.profile))?;
    print_fairness(out, &r.fairness)?;
    if let Some(w) = &r.fairness.worst_envy {
        let names = doc.problem.agents();
        writeln!(out, "tightest envy pair: {} toward {}, margin {:.6}", names[w.envier], names[w.envied], w.margin)?;
    }
    writeln!(out, "axioms ({} rule):", r.axioms.rule)?;
    for (name, o) in r.axioms.outcomes() {
        let status = if o.passed { "pass" } else { "FAIL" };
        write!(out, "  {name:<20} {status} ({} checks)", o.checks)?;
        if let Some(c) = &o.counterexample {
            write!(out, ": {}", c.detail)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn print_components(out: &mut dyn Write, r: &ComponentsReport) -> std::io::Result<()> {
    writeln!(out, "{} component(s)", r.report.count)?;
    writeln!(out, "envy-free cuts after agents: {:?}", r.report.ef_cuts)?;
    writeln!(out, "interior splits at agents: {:?}", r.report.interior_splits)?;
    writeln!(out, "sorted ratios: {}", floats(&r.report.ratio_order))?;
    if let (Some(c), Some(g)) = (r.oracle, r.oracle_grid) {
        writeln!(out, "grid oracle ({g} cells per side): {c}")?;
    }
    Ok(())
}

fn print_demo(out: &mut dyn Write, r: &DemoReport) -> std::io::Result<()> {
    writeln!(out, "{}: {}", r.name, r.title)?;
    for c in &r.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "  {status} {}: expected {}, got {}", c.name, c.expected, c.actual)?;
    }
    for n in &r.notes {
        writeln!(out, "  note: {n}")?;
    }
    let failed = r.checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        writeln!(out, "all {} checks passed", r.checks.len())
    } else {
        writeln!(out, "{failed} of {} checks failed", r.checks.len())
    }
}
