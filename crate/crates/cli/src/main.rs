use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hmldist::bench::{self, BenchConfig};
use hmldist::cleaveland::{cleaveland_formula, cleaveland_refine, SplitterStrategy};
use hmldist::distinguish::{distinguish_in, Mode, Report, Selection, Verdict, WitnessRequest};
use hmldist::equivalences::refine_sequence;
use hmldist::hml::{parse_formula, render, FormulaStore, RenderStyle};
use hmldist::lts::{gen_chain_a, gen_figure_m, gen_ladder_b, gen_random, parse_aut, write_aut, Lts, StateId};
use hmldist::oracle::{enumerate_min_formula, MIN_FORMULA_MAX_STATES};
use hmldist::reduction::{build_lts, parse_dimacs, sat_via_traces, CnfInstance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Witness search recurses once per observation level.
const STACK_BYTES: usize = 256 << 20;
/// Largest formula size the `--oracle` search tries.
const ORACLE_MAX_SIZE: usize = 8;

#[derive(Parser)]
#[command(
    name = "hmldist",
    version,
    about = "Minimal distinguishing formulas for labelled transition systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide bisimilarity of two states and print a distinguishing formula.
    Distinguish(DistinguishArgs),
    /// Print the k-bisimilarity partitions of an LTS.
    Refine {
        file: PathBuf,
        /// Print the blocks of every level, not only their number.
        #[arg(long)]
        dump_levels: bool,
    },
    /// Write an example LTS in .aut format to stdout.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
    /// Work with the SAT reduction of a DIMACS CNF file.
    Reduce(ReduceArgs),
    /// Print the metrics of a formula file.
    Metrics {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare against the baseline on seeded random LTSs; prints CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DistinguishArgs {
    file: PathBuf,
    s: usize,
    t: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Lexicographic)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = Method::Ours)]
    method: Method,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Pick splitting pairs at random from this seed instead of deterministically.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Strategy::Latest)]
    strategy: Strategy,
    /// Also search for a formula of least size (small LTSs only).
    #[arg(long)]
    oracle: bool,
}

#[derive(Subcommand)]
enum Family {
    /// The chain x_n -a-> ... -a-> x_0.
    A { n: usize },
    /// The ladder with x_n and y_n.
    B { n: usize },
    /// The three-state system with s_0 and s_1.
    M,
    /// The reduction LTS of a DIMACS CNF file.
    Reduction {
        file: PathBuf,
        /// Write the state role map as JSON to this path.
        #[arg(long)]
        roles: Option<PathBuf>,
    },
    /// Uniformly random transitions.
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        actions: usize,
        #[arg(long, default_value_t = 2.0)]
        density: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("action").required(true).args(["emit_aut", "decide"]))]
struct ReduceArgs {
    file: PathBuf,
    /// Print the reduction LTS in .aut format.
    #[arg(long)]
    emit_aut: bool,
    /// Decide satisfiability through a distinguishing trace; exit 0 if satisfiable, 1 if not.
    #[arg(long)]
    decide: bool,
    /// With --emit-aut, write the state role map as JSON to this path.
    #[arg(long, requires = "emit_aut")]
    roles: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Number of random LTSs.
    #[arg(long, default_value_t = 200)]
    random: usize,
    /// Number of states, or the lower end of the range with --max-states.
    #[arg(long, default_value_t = 50)]
    states: usize,
    #[arg(long)]
    max_states: Option<usize>,
    #[arg(long, default_value_t = 2)]
    actions: usize,
    #[arg(long, default_value_t = 2.0)]
    density: f64,
    /// Inequivalent pairs sampled per LTS.
    #[arg(long, default_value_t = 5)]
    pairs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Strategy::Latest)]
    strategy: Strategy,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Depth,
    Lexicographic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ours,
    Cleaveland,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Latest,
    Oldest,
}

impl From<Strategy> for SplitterStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Latest => SplitterStrategy::Latest,
            Strategy::Oldest => SplitterStrategy::Oldest,
        }
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        return Ok(text);
    }
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_lts(path: &Path) -> Result<Lts> {
    parse_aut(&read_input(path)?).with_context(|| format!("invalid .aut file {}", path.display()))
}

fn load_cnf(path: &Path) -> Result<CnfInstance> {
    parse_dimacs(&read_input(path)?).with_context(|| format!("invalid DIMACS file {}", path.display()))
}

fn state(lts: &Lts, index: usize) -> Result<StateId> {
    if index >= lts.num_states() {
        bail!("state {index} out of range for {} states", lts.num_states());
    }
    Ok(StateId::from(index))
}

/// `a < b` for decimal strings without leading zeros.
fn decimal_less(a: &str, b: &str) -> bool {
    (a.len(), a) < (b.len(), b)
}

fn text_report(out: &mut String, r: &Report) {
    let mut line = |key: &str, value: String| out.push_str(&format!("{key}: {value}\n"));
    line("verdict", r.verdict.clone());
    line("method", r.method.clone());
    if r.verdict == "bisimilar" {
        return;
    }
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    line("holds in", opt(r.holds_in.map(|v| v.to_string())));
    line("dist", opt(r.dist.map(|v| v.to_string())));
    if let Some(d) = r.dirdist {
        line("dirdist", d.to_string());
    }
    line("depth", opt(r.depth.map(|v| v.to_string())));
    line("size", opt(r.size.clone()));
    line("dag size", opt(r.dag_size.map(|v| v.to_string())));
    line("negdepth", opt(r.negdepth.map(|v| v.to_string())));
    line("calls", opt(r.calls.map(|v| v.to_string())));
    let shared = match (&r.size, r.dag_size) {
        (Some(size), Some(dag)) => decimal_less(&dag.to_string(), size),
        _ => false,
    };
    match (&r.formula_inline, &r.formula_equations) {
        (Some(inline), _) if !shared => out.push_str(&format!("formula: {inline}\n")),
        (_, Some(eqs)) => out.push_str(&format!("formula:\n{eqs}")),
        (Some(inline), None) => out.push_str(&format!("formula: {inline}\n")),
        (None, None) => {}
    }
}

fn comparison_table(reports: &[Report]) -> String {
    let mut out = format!(
        "{:<12}{:>8}{:>12}{:>10}{:>10}\n",
        "method", "depth", "size", "negdepth", "dag size"
    );
    for r in reports {
        let num = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        out.push_str(&format!(
            "{:<12}{:>8}{:>12}{:>10}{:>10}\n",
            r.method,
            num(r.depth),
            r.size.clone().unwrap_or_else(|| "-".into()),
            num(r.negdepth),
            num(r.dag_size)
        ));
    }
    out
}

fn cmd_distinguish(args: &DistinguishArgs, out: &mut String) -> Result<u8> {
    let lts = load_lts(&args.file)?;
    let (s, t) = (state(&lts, args.s)?, state(&lts, args.t)?);
    let seq = refine_sequence(&lts);
    let mode = match args.mode {
        ModeArg::Depth => Mode::DepthOnly,
        ModeArg::Lexicographic => Mode::DepthAndNegation,
    };
    let selection = args.seed.map_or(Selection::Deterministic, Selection::Seeded);

    let mut reports = Vec::new();
    if args.method != Method::Cleaveland {
        reports.push(
            match distinguish_in(&lts, &seq, WitnessRequest { s, t, mode }, selection) {
                Verdict::Equivalent => Report::bisimilar("ours"),
                Verdict::Distinguished(w) => Report::from_witness("ours", &w),
            },
        );
    }
    if args.method != Method::Ours {
        let log = cleaveland_refine(&lts, args.strategy.into());
        reports.push(match seq.dist(s, t).finite() {
            None => Report::bisimilar("cleaveland"),
            Some(dist) => {
                let (store, f, calls) = cleaveland_formula(&lts, &log, s, t)?;
                let mut r = Report::distinguished("cleaveland", &store, f, s, dist, 0, calls);
                r.dirdist = None;
                r
            }
        });
    }
    let apart = !seq.dist(s, t).is_infinite();

    let oracle = if args.oracle && apart {
        if lts.num_states() > MIN_FORMULA_MAX_STATES {
            bail!(
                "--oracle supports at most {MIN_FORMULA_MAX_STATES} states, got {}",
                lts.num_states()
            );
        }
        let mut store = FormulaStore::with_actions_of(&lts);
        let found = enumerate_min_formula(&mut store, &lts, s, t, ORACLE_MAX_SIZE)?;
        Some(match found {
            Some(f) => json!({
                "min_size": store.metrics(f).size.to_string(),
                "formula": render(&store, f, RenderStyle::Inline)?,
            }),
            None => json!({ "min_size": format!("> {ORACLE_MAX_SIZE}"), "formula": null }),
        })
    } else {
        None
    };

    match args.format {
        Format::Json => {
            let mut value = if reports.len() == 1 {
                serde_json::to_value(&reports[0])?
            } else {
                json!({ "schema_version": hmldist::distinguish::REPORT_SCHEMA_VERSION, "reports": reports })
            };
            if let Some(o) = oracle {
                value["oracle"] = o;
            }
            out.push_str(&serde_json::to_string_pretty(&value)?);
            out.push('\n');
        }
        Format::Text => {
            for (k, r) in reports.iter().enumerate() {
                if k > 0 {
                    out.push('\n');
                }
                text_report(out, r);
            }
            if reports.len() > 1 && apart {
                out.push('\n');
                out.push_str(&comparison_table(&reports));
            }
            if let Some(o) = oracle {
                out.push_str(&format!("oracle min size: {}\n", o["min_size"].as_str().unwrap_or("-")));
                if let Some(f) = o["formula"].as_str() {
                    out.push_str(&format!("oracle formula: {f}\n"));
                }
            }
        }
    }
    Ok(if apart { 0 } else { 1 })
}

fn cmd_refine(file: &Path, dump_levels: bool, out: &mut String) -> Result<u8> {
    let lts = load_lts(file)?;
    let seq = refine_sequence(&lts);
    out.push_str(&format!(
        "states: {}\nstable level: {}\n",
        lts.num_states(),
        seq.stable_level()
    ));
    for i in 0..=seq.stable_level() {
        out.push_str(&format!("level {i}: {} blocks", seq.num_blocks(i)));
        if dump_levels {
            for block in seq.blocks(i) {
                let members: Vec<String> = block.iter().map(u32::to_string).collect();
                out.push_str(&format!(" {{{}}}", members.join(" ")));
            }
        }
        out.push('\n');
    }
    Ok(0)
}

fn emit_reduction(file: &Path, roles: Option<&Path>, out: &mut String) -> Result<u8> {
    let red = build_lts(&load_cnf(file)?);
    if let Some(path) = roles {
        let text = serde_json::to_string_pretty(&red.roles_json())?;
        fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    out.push_str(&write_aut(&red.lts));
    Ok(0)
}

fn cmd_gen(family: &Family, out: &mut String) -> Result<u8> {
    let lts = match family {
        Family::A { n } => gen_chain_a(*n),
        Family::B { n } => gen_ladder_b(*n),
        Family::M => gen_figure_m(),
        Family::Reduction { file, roles } => return emit_reduction(file, roles.as_deref(), out),
        Family::Random {
            states,
            actions,
            density,
            seed,
        } => {
            if *states == 0 || *actions == 0 {
                bail!("--states and --actions must be positive");
            }
            gen_random(&mut ChaCha8Rng::seed_from_u64(*seed), *states, *actions, *density)
        }
    };
    out.push_str(&write_aut(&lts));
    Ok(0)
}

fn cmd_reduce(args: &ReduceArgs, out: &mut String) -> Result<u8> {
    if args.emit_aut {
        return emit_reduction(&args.file, args.roles.as_deref(), out);
    }
    let cnf = load_cnf(&args.file)?;
    match sat_via_traces(&cnf)? {
        Some(rho) => {
            let lits: Vec<String> = rho
                .iter()
                .enumerate()
                .map(|(i, &v)| if v { format!("{}", i + 1) } else { format!("-{}", i + 1) })
                .collect();
            out.push_str(&format!("s SATISFIABLE\nv {} 0\n", lits.join(" ")));
            Ok(0)
        }
        None => {
            out.push_str("s UNSATISFIABLE\n");
            Ok(1)
        }
    }
}

fn cmd_metrics(file: &Path, format: Format, out: &mut String) -> Result<u8> {
    let mut store = FormulaStore::new();
    let f = parse_formula(&mut store, &read_input(file)?)
        .with_context(|| format!("invalid formula in {}", file.display()))?;
    let m = store.metrics(f);
    match format {
        Format::Json => {
            out.push_str(&serde_json::to_string_pretty(&m)?);
            out.push('\n');
        }
        Format::Text => out.push_str(&format!(
            "size: {}\ndag size: {}\ndepth: {}\nnegdepth: {}\n",
            m.size, m.dag_size, m.depth, m.negdepth
        )),
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs, out: &mut String) -> Result<u8> {
    let max_states = args.max_states.unwrap_or(args.states);
    if args.states == 0 || max_states < args.states || args.actions == 0 {
        bail!("need 0 < --states <= --max-states and --actions > 0");
    }
    let config = BenchConfig {
        instances: args.random,
        min_states: args.states,
        max_states,
        actions: args.actions,
        density: args.density,
        pairs: args.pairs,
        seed: args.seed,
        strategy: args.strategy.into(),
    };
    out.push_str(&bench::to_csv(&bench::run(&config))?);
    Ok(0)
}

fn run(cli: Cli) -> Result<(u8, String)> {
    let mut out = String::new();
    let code = match &cli.command {
        Command::Distinguish(args) => cmd_distinguish(args, &mut out)?,
        Command::Refine { file, dump_levels } => cmd_refine(file, *dump_levels, &mut out)?,
        Command::Gen { family } => cmd_gen(family, &mut out)?,
        Command::Reduce(args) => cmd_reduce(args, &mut out)?,
        Command::Metrics { file, format } => cmd_metrics(file, *format, &mut out)?,
        Command::Bench(args) => cmd_bench(args, &mut out)?,
    };
    Ok((code, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = std::thread::Builder::new()
        .stack_size(STACK_BYTES)
        .spawn(move || run(cli))
        .expect("spawn worker thread")
        .join()
        .unwrap_or_else(|_| Err(anyhow::anyhow!("internal error")));
    match result {
        Ok((code, out)) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
