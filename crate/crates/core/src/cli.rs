//! Command-line front end.
//!
//! Exit codes: 0 the property holds or an optimum was found, 1 it fails,
//! 2 usage or input error, 3 a budget was exceeded.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use crate::balanced::cbalanced;
use crate::corpus;
use crate::formula::Formula;
use crate::graph::{Graph, GraphError, PartitionMode};
use crate::ilp::DEFAULT_NODE_BUDGET;
use crate::mso_eval::DEFAULT_EVAL_BUDGET;
use crate::oracle::{self, OracleError, DEFAULT_CAP};
use crate::partitioning::mso_partition;
use crate::solver::{check, SolverError, SolverOptions};

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cardmso", version, about = "cardMSO model checking and partitioning on graphs of bounded vertex cover")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether the graph models a cardMSO sentence.
    Check(FormulaArgs),
    /// Split the vertices into `r` parts that each induce a model of an MSO sentence.
    Partition(PartitionArgs),
    /// Minimum-cut partition into `c` parts whose sizes differ by at most one.
    Cbalance(BalanceArgs),
    /// `check` by exhaustive search (small graphs only).
    OracleCheck(FormulaArgs),
    /// `partition` by exhaustive search (small graphs only).
    OraclePartition(PartitionArgs),
    /// `cbalance` by exhaustive search (small graphs only).
    OracleCbalance(BalanceArgs),
    /// List the shipped formulas or print one.
    Corpus(CorpusArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Vc,
    Nd,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, value_enum, default_value = "vc")]
    pub mode: Mode,
    #[arg(long = "k-max", default_value_t = 20)]
    pub k_max: usize,
    /// Structured output.
    #[arg(long)]
    pub json: bool,
    /// Write every integer program that is solved to this file.
    #[arg(long = "dump-ilp")]
    pub dump_ilp: Option<PathBuf>,
    #[arg(long = "no-empty-parts")]
    pub no_empty_parts: bool,
    #[arg(long = "no-dedup")]
    pub no_dedup: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[arg(long = "node-budget", default_value_t = DEFAULT_NODE_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
    pub node_budget: u64,
    #[arg(long = "eval-budget", default_value_t = DEFAULT_EVAL_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
    pub eval_budget: u64,
    /// Largest graph the oracle commands accept.
    #[arg(long = "oracle-cap", default_value_t = DEFAULT_CAP)]
    pub oracle_cap: usize,
}

#[derive(Debug, Args)]
pub struct FormulaArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub formula: PathBuf,
    /// Value for a `$NAME` parameter.
    #[arg(long = "param", value_name = "NAME=INT", value_parser = parse_param)]
    pub params: Vec<(String, i64)>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub input: FormulaArgs,
    #[arg(short = 'r', value_parser = clap::value_parser!(u64).range(1..))]
    pub r: u64,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(short = 'c', value_parser = clap::value_parser!(u64).range(1..))]
    pub c: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// A shipped name, or `equitable_partition`, `equitable_coloring`,
    /// `equitable_connected` together with `-c`.
    pub name: Option<String>,
    #[arg(short = 'c')]
    pub c: Option<usize>,
}

fn parse_param(s: &str) -> Result<(String, i64), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=INT")?;
    let name = name.trim().trim_start_matches('$');
    if name.is_empty() {
        return Err("empty parameter name".into());
    }
    let value = value.trim().parse().map_err(|_| format!("`{value}` is not an integer"))?;
    Ok((name.to_string(), value))
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn error(code: i32, message: impl std::fmt::Display) -> Outcome {
        Outcome {
            code,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

struct Failure(i32, String);

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let code = match &e {
            _ if e.is_budget() => EXIT_BUDGET,
            SolverError::Graph(GraphError::CoverExceedsBudget { .. }) => EXIT_BUDGET,
            _ => EXIT_INPUT,
        };
        Failure(code, e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure(EXIT_INPUT, e.to_string())
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code: EXIT_HOLDS,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let threads = match &cli.command {
        Command::Check(a) | Command::OracleCheck(a) => a.common.threads,
        Command::Partition(a) | Command::OraclePartition(a) => a.input.common.threads,
        Command::Cbalance(a) | Command::OracleCbalance(a) => a.common.threads,
        Command::Corpus(_) => None,
    };
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => return Outcome::error(EXIT_INPUT, e),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(outcome) => outcome,
        Err(Failure(code, message)) => Outcome::error(code, message),
    }
}

fn dispatch(command: &Command) -> Result<Outcome, Failure> {
    match command {
        Command::Check(a) => run_check(a),
        Command::Partition(a) => run_partition(a),
        Command::Cbalance(a) => run_cbalance(a),
        Command::OracleCheck(a) => run_oracle_check(a),
        Command::OraclePartition(a) => run_oracle_partition(a),
        Command::OracleCbalance(a) => run_oracle_cbalance(a),
        Command::Corpus(a) => run_corpus(a),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Graph, Failure> {
    Graph::parse(&read(path)?).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

/// Parsed formula with parameters substituted, plus warnings.
fn load_formula(a: &FormulaArgs) -> Result<(Formula, String), Failure> {
    let text = read(&a.formula)?;
    let f = Formula::parse(&text).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", a.formula.display())))?;
    let bindings: BTreeMap<String, i64> = a.params.iter().cloned().collect();
    let (f, unused) = f
        .substitute_params(&bindings)
        .map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
    let warnings = unused
        .iter()
        .map(|p| format!("warning: parameter `{p}` does not occur in the formula\n"))
        .collect();
    Ok((f, warnings))
}

fn solver_options(c: &Common) -> SolverOptions {
    SolverOptions {
        mode: match c.mode {
            Mode::Vc => PartitionMode::VertexCover,
            Mode::Nd => PartitionMode::NeighborhoodDiversity,
        },
        k_max: c.k_max,
        dedup: !c.no_dedup,
        node_budget: c.node_budget,
        eval_budget: c.eval_budget,
        symmetry: false,
        record_ilps: c.dump_ilp.is_some(),
    }
}

fn write_ilps(c: &Common, ilps: &[String]) -> Result<(), Failure> {
    let Some(path) = &c.dump_ilp else {
        return Ok(());
    };
    let mut out = String::new();
    for (i, ilp) in ilps.iter().enumerate() {
        let _ = writeln!(out, "# program {}\n{ilp}", i + 1);
    }
    std::fs::write(path, out).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

/// Object whose keys keep insertion order.
struct Ordered<V>(Vec<(String, V)>);

impl<V: Serialize> Serialize for Ordered<V> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(self.0.iter().map(|(k, v)| (k, v)))
    }
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Option<Ordered<Vec<String>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<Option<Vec<bool>>>,
    stats: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cut_value: Option<Option<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parts: Option<Option<Vec<Vec<String>>>>,
}

impl<T: Serialize> Report<T> {
    fn new(status: &'static str, stats: Option<T>) -> Self {
        Report {
            status,
            witness: None,
            alpha: None,
            stats,
            cut_value: None,
            parts: None,
        }
    }

    fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn names(g: &Graph, set: &[usize]) -> Vec<String> {
    set.iter().map(|&v| g.name(v).to_string()).collect()
}

fn stats_line<T: Serialize>(stats: &T) -> String {
    let value = serde_json::to_value(stats).expect("stats serialize");
    let fields: Vec<String> = value
        .as_object()
        .map(|o| o.iter().map(|(k, v)| format!("{k}={v}")).collect())
        .unwrap_or_default();
    format!("stats: {}\n", fields.join(" "))
}

fn check_report<T: Serialize>(
    g: &Graph,
    f: &Formula,
    holds: bool,
    witness: Option<(&[Vec<usize>], &[bool])>,
    stats: Option<T>,
    json: bool,
) -> String {
    if json {
        let mut r = Report::new(if holds { "holds" } else { "fails" }, stats);
        r.witness = Some(witness.map(|(sets, _)| {
            Ordered(f.prefix.iter().cloned().zip(sets.iter().map(|s| names(g, s))).collect())
        }));
        r.alpha = Some(witness.map(|(_, alpha)| alpha.to_vec()));
        return r.render();
    }
    let mut out = format!("{}\n", if holds { "holds" } else { "fails" });
    if let Some((sets, alpha)) = witness {
        for (z, set) in f.prefix.iter().zip(sets) {
            let _ = writeln!(out, "{z} = {{{}}}", names(g, set).join(", "));
        }
        if !alpha.is_empty() {
            let _ = writeln!(out, "alpha = {alpha:?}");
        }
    }
    if let Some(stats) = stats {
        out.push_str(&stats_line(&stats));
    }
    out
}

fn parts_report<T: Serialize>(
    g: &Graph,
    status: &'static str,
    cut_value: Option<Option<usize>>,
    parts: Option<&[Vec<usize>]>,
    stats: Option<T>,
    json: bool,
) -> String {
    if json {
        let mut r = Report::new(status, stats);
        r.cut_value = cut_value;
        r.parts = Some(parts.map(|ps| ps.iter().map(|p| names(g, p)).collect()));
        return r.render();
    }
    let mut out = format!("{status}\n");
    if let Some(Some(cut)) = cut_value {
        let _ = writeln!(out, "cut {cut}");
    }
    for p in parts.unwrap_or_default() {
        let _ = writeln!(out, "{}", names(g, p).join(" "));
    }
    if let Some(stats) = stats {
        out.push_str(&stats_line(&stats));
    }
    out
}

fn finish(code: i32, stdout: String, stderr: String) -> Result<Outcome, Failure> {
    Ok(Outcome { code, stdout, stderr })
}

fn exit_for(holds: bool) -> i32 {
    if holds {
        EXIT_HOLDS
    } else {
        EXIT_FAILS
    }
}

fn run_check(a: &FormulaArgs) -> Result<Outcome, Failure> {
    let g = load_graph(&a.graph)?;
    let (f, warnings) = load_formula(a)?;
    let v = check(&g, &f, &solver_options(&a.common))?;
    write_ilps(&a.common, &v.ilps)?;
    let witness = v.witness.as_ref().map(|w| (w.sets.as_slice(), w.alpha.as_slice()));
    let out = check_report(&g, &f, v.holds, witness, Some(&v.stats), a.common.json);
    finish(exit_for(v.holds), out, warnings)
}

fn run_oracle_check(a: &FormulaArgs) -> Result<Outcome, Failure> {
    let g = load_graph(&a.graph)?;
    let (f, warnings) = load_formula(a)?;
    let holds = oracle::brute_check(&g, &f, a.common.oracle_cap)?;
    let out = check_report::<()>(&g, &f, holds, None, None, a.common.json);
    finish(exit_for(holds), out, warnings)
}

fn partition_formula(a: &PartitionArgs) -> Result<(Graph, Formula, String), Failure> {
    let g = load_graph(&a.input.graph)?;
    let (f, warnings) = load_formula(&a.input)?;
    if !f.constraints.is_empty() {
        return Err(Failure(
            EXIT_INPUT,
            "partitioning needs an MSO sentence without linear constraints".into(),
        ));
    }
    Ok((g, f, warnings))
}

fn run_partition(a: &PartitionArgs) -> Result<Outcome, Failure> {
    let (g, f, warnings) = partition_formula(a)?;
    let c = &a.input.common;
    let res = mso_partition(&g, &f, a.r as usize, !c.no_empty_parts, &solver_options(c))?;
    write_ilps(c, res.ilp.as_slice())?;
    let status = if res.holds { "holds" } else { "fails" };
    let out = parts_report(&g, status, None, res.parts.as_deref(), Some(&res.stats), c.json);
    finish(exit_for(res.holds), out, warnings)
}

fn run_oracle_partition(a: &PartitionArgs) -> Result<Outcome, Failure> {
    let (g, f, warnings) = partition_formula(a)?;
    let c = &a.input.common;
    let parts = oracle::brute_partition_witness(&g, &f, a.r as usize, !c.no_empty_parts, c.oracle_cap)?;
    let status = if parts.is_some() { "holds" } else { "fails" };
    let out = parts_report::<()>(&g, status, None, parts.as_deref(), None, c.json);
    finish(exit_for(parts.is_some()), out, warnings)
}

fn run_cbalance(a: &BalanceArgs) -> Result<Outcome, Failure> {
    let g = load_graph(&a.graph)?;
    let opts = solver_options(&a.common);
    if opts.mode != PartitionMode::VertexCover {
        return Err(Failure(EXIT_INPUT, "cbalance supports only --mode vc".into()));
    }
    let res = cbalanced(&g, a.c as usize, !a.common.no_empty_parts, &opts)?;
    let out = match &res {
        Some(r) => {
            write_ilps(&a.common, &r.ilps)?;
            parts_report(&g, "optimal", Some(Some(r.cut_value)), Some(&r.parts), Some(&r.stats), a.common.json)
        }
        None => parts_report::<()>(&g, "infeasible", Some(None), None, None, a.common.json),
    };
    finish(exit_for(res.is_some()), out, String::new())
}

fn run_oracle_cbalance(a: &BalanceArgs) -> Result<Outcome, Failure> {
    let g = load_graph(&a.graph)?;
    let c = a.c as usize;
    let res = oracle::brute_cbalanced_witness(&g, c, !a.common.no_empty_parts, a.common.oracle_cap)?;
    let out = match &res {
        Some((cut, label)) => {
            let mut parts = vec![Vec::new(); c];
            for (v, &p) in label.iter().enumerate() {
                parts[p].push(v);
            }
            parts_report::<()>(&g, "optimal", Some(Some(*cut)), Some(&parts), None, a.common.json)
        }
        None => parts_report::<()>(&g, "infeasible", Some(None), None, None, a.common.json),
    };
    finish(exit_for(res.is_some()), out, String::new())
}

fn run_corpus(a: &CorpusArgs) -> Result<Outcome, Failure> {
    let Some(name) = &a.name else {
        let mut out = String::new();
        for (name, text) in corpus::SHIPPED {
            let summary = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
            let _ = writeln!(out, "{name:<24}{summary}");
        }
        for family in ["equitable_partition", "equitable_coloring", "equitable_connected"] {
            let _ = writeln!(out, "{family:<24}generated, needs -c");
        }
        return finish(EXIT_HOLDS, out, String::new());
    };
    let generated = |c: Option<usize>, make: fn(usize) -> String| match c {
        Some(c) if c >= 1 => Ok(make(c)),
        _ => Err(Failure(EXIT_INPUT, format!("`{name}` needs -c N with N >= 1"))),
    };
    let text = match name.as_str() {
        "equitable_partition" => generated(a.c, |c| corpus::equitable_partition(c, false))?,
        "equitable_coloring" => generated(a.c, corpus::equitable_coloring)?,
        "equitable_connected" => generated(a.c, corpus::equitable_connected)?,
        other => corpus::shipped(other)
            .ok_or_else(|| Failure(EXIT_INPUT, format!("unknown corpus entry `{other}`")))?
            .to_string(),
    };
    finish(EXIT_HOLDS, text, String::new())
}
