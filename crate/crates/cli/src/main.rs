//! `pegproof`: check grammars, parse with trace output, compare the two
//! parsers, and run the arithmetic demo.
//!
//! Exit codes: 0 on success (well-formed grammar, successful parse, equal
//! trees), 1 on a negative answer (ill-formed grammar, failed parse), 2 on
//! unusable input (I/O or syntax errors, ill-formed grammar for parsing),
//! 3 when the two parsers disagree.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pegproof::arith::{self, ArithValue, RationalArith};
use pegproof::tree::tree_to_json;
use pegproof::{
    first_divergence, grammar_wellformed, instrument, outcome, packrat_parse, parse, parse_grammar_text,
    semantic_parse, Grammar, InputText, Node, Outcome, ParseContext, TraceTree,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "pegproof", version, about = "Well-formedness analysis and certified parsing for PEGs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute grammar properties and check well-formedness
    Check {
        #[arg(long)]
        grammar: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Parse an input and print the outcome and trace tree
    Parse {
        #[arg(long)]
        grammar: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = Engine::Reference)]
        engine: Engine,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run both parsers with instrumentation and compare their trees
    Compare {
        #[arg(long)]
        grammar: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate an arithmetic expression with exact rationals
    DemoArith {
        #[arg(long)]
        text: String,
        /// Use this grammar instead of the built-in one
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Read the input bytes from a file
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    input: Option<PathBuf>,
    /// Use this text as input
    #[arg(long)]
    text: Option<String>,
    /// Parse only the first N bytes
    #[arg(long)]
    bound: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Summary)]
    format: Format,
    /// Write to a file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Reference,
    Packrat,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Summary,
}

struct Report {
    text: String,
    code: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // trees are processed recursively; deep inputs need room
    let worker = std::thread::Builder::new().stack_size(1 << 30).spawn(move || run(cli));
    match worker.expect("spawn worker").join() {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> Result<u8> {
    let (report, output) = match &cli.command {
        Command::Check { grammar, output } => (check(&load_grammar(grammar)?, output.format), output),
        Command::Parse { grammar, input, engine, output } => {
            let g = load_grammar(grammar)?;
            (parse_cmd(&g, read_input(input)?, *engine, output.format)?, output)
        }
        Command::Compare { grammar, input, output } => {
            let g = load_grammar(grammar)?;
            (compare(&g, read_input(input)?, output.format)?, output)
        }
        Command::DemoArith { text, grammar, output } => {
            let g = match grammar {
                Some(path) => load_grammar(path)?,
                None => parse_grammar_text(arith::CALC_GRAMMAR)?,
            };
            (demo(&g, text, output.format)?, output)
        }
    };
    match &output.out {
        Some(path) => std::fs::write(path, &report.text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", report.text),
    }
    Ok(report.code)
}

fn load_grammar(path: &Path) -> Result<Grammar> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_grammar_text(&text).with_context(|| format!("in {}", path.display()))
}

fn read_input(args: &InputArgs) -> Result<InputText> {
    let bytes = match (&args.input, &args.text) {
        (Some(path), _) => std::fs::read(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(text)) => text.as_bytes().to_vec(),
        (None, None) => bail!("one of --input or --text is required"),
    };
    Ok(match args.bound {
        Some(b) => InputText::with_bound(bytes, b)?,
        None => InputText::new(bytes),
    })
}

fn context<'g>(g: &'g Grammar, input: InputText) -> Result<ParseContext<'g>> {
    ParseContext::new(g, input).map_err(|err| anyhow::anyhow!("{err}; run `pegproof check` for details"))
}

fn render(format: Format, value: Value, summary: String) -> String {
    match format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&value).expect("json")),
        Format::Summary => summary,
    }
}

fn yes_no(flag: bool) -> &'static str {
    if flag {
        "yes"
    } else {
        "no"
    }
}

fn check(g: &Grammar, format: Format) -> Report {
    let report = grammar_wellformed(g);
    let width = g.names().map(str::len).max().unwrap_or(0).max(4);
    let mut s = format!("{:width$}  fail  empty  consume\n", "rule");
    for id in 0..g.len() {
        let p = report.properties.get(id);
        let _ = writeln!(
            s,
            "{:width$}  {:4}  {:5}  {}",
            g.name(id),
            yes_no(p.can_fail),
            yes_no(p.can_empty),
            yes_no(p.can_consume)
        );
    }
    for v in &report.violations {
        let path: Vec<String> =
            v.path.iter().map(|step| serde_json::to_value(step).unwrap().as_str().unwrap().to_owned()).collect();
        let reason = serde_json::to_value(v.reason).unwrap();
        let _ = writeln!(s, "violation: {} at /{}: {}", g.name(v.rule), path.join("/"), reason.as_str().unwrap());
    }
    let _ = writeln!(s, "verdict: {}", if report.verdict { "well-formed" } else { "ill-formed" });
    Report { text: render(format, report.to_json(g), s), code: if report.verdict { 0 } else { 1 } }
}

fn divergence_path(a: &TraceTree, b: &TraceTree) -> Option<String> {
    first_divergence(a, b).map(|path| format!("/{}", path.join("/")))
}

fn parse_cmd(g: &Grammar, input: InputText, engine: Engine, format: Format) -> Result<Report> {
    let ctx = context(g, input)?;
    let tree = match engine {
        Engine::Reference => parse(&ctx),
        Engine::Packrat => (*packrat_parse(&ctx).0).clone(),
        Engine::Both => {
            let reference = parse(&ctx);
            let (packrat, _) = packrat_parse(&ctx);
            if let Some(path) = divergence_path(&reference, &packrat) {
                return Ok(Report { text: format!("engines diverge at {path}\n"), code: 3 });
            }
            reference
        }
    };
    let out = outcome(&tree);
    let engine_name = match engine {
        Engine::Reference => "reference",
        Engine::Packrat => "packrat",
        Engine::Both => "both",
    };
    let value = json!({
        "engine": engine_name,
        "outcome": out.as_str(),
        "consumed": [0, tree.end],
        "bound": ctx.bound(),
        "tree": tree_to_json(&tree, g),
    });
    let summary = format!("engine: {engine_name}\noutcome: {}\nconsumed: [0, {})\n", out.as_str(), tree.end);
    let code = if out == Outcome::Success { 0 } else { 1 };
    Ok(Report { text: render(format, value, summary), code })
}

fn compare(g: &Grammar, input: InputText, format: Format) -> Result<Report> {
    let ctx = context(g, input)?;
    let (reference, calls) = instrument(&ctx);
    let (packrat, stats) = packrat_parse(&ctx);
    let divergence = divergence_path(&reference, &packrat);

    let width = g.names().map(str::len).max().unwrap_or(0).max(4);
    let mut s = format!("{:width$}  reference  peak  at  packrat\n", "rule");
    let mut rules = Vec::new();
    for id in 0..g.len() {
        let peak = calls.rule_max(id);
        let at = (0..=ctx.bound()).find(|&p| peak > 0 && calls.get(id, p) == peak);
        let _ = writeln!(
            s,
            "{:width$}  {:9}  {:4}  {:>2}  {:7}",
            g.name(id),
            calls.rule_total(id),
            peak,
            at.map_or("-".to_owned(), |p| p.to_string()),
            stats.computed.rule_total(id)
        );
        rules.push(json!({
            "rule": g.name(id),
            "reference_calls": calls.rule_total(id),
            "reference_peak": peak,
            "peak_position": at,
            "packrat_computed": stats.computed.rule_total(id),
        }));
    }
    let _ = writeln!(
        s,
        "reference calls: {}; packrat misses: {}, hits: {}; bound (n+1)(b+1) = {}",
        calls.total(),
        stats.misses,
        stats.hits,
        g.len() * (ctx.bound() + 1)
    );
    let _ = writeln!(s, "outcome: {}; consumed: [0, {})", outcome(&reference).as_str(), reference.end);
    match &divergence {
        None => s.push_str("trees: equal\n"),
        Some(path) => {
            let _ = writeln!(s, "trees: diverge at {path}");
        }
    }
    let value = json!({
        "equal": divergence.is_none(),
        "divergence": divergence,
        "outcome": outcome(&reference).as_str(),
        "consumed": [0, reference.end],
        "rules": rules,
        "reference": calls.to_json(g),
        "packrat": stats.to_json(g),
    });
    let code = if divergence.is_none() { 0 } else { 3 };
    Ok(Report { text: render(format, value, s), code })
}

fn demo(g: &Grammar, text: &str, format: Format) -> Result<Report> {
    let ctx = context(g, InputText::new(text.as_bytes().to_vec()))?;
    let t = semantic_parse(&ctx, &RationalArith::new());
    let (summary, value, code) = match &t.node {
        Node::Semantic { value: ArithValue(Some(v)), .. } if t.end == text.len() => {
            (format!("value: {v}\nconsumed: [0, {})\n", t.end), Some(v.to_string()), 0)
        }
        Node::Semantic { value: ArithValue(None), .. } if t.end == text.len() => {
            ("failure: division by zero\n".to_owned(), None, 1)
        }
        Node::Semantic { .. } => (format!("failure: parse stopped at position {} of {}\n", t.end, text.len()), None, 1),
        _ => (format!("failure: fail node [{}, {})\n", t.start, t.end), None, 1),
    };
    let json = json!({
        "text": text,
        "tokens": text.as_bytes(),
        "value": value,
        "consumed": [0, t.end],
        "tree": tree_to_json(&t, g),
    });
    Ok(Report { text: render(format, json, summary), code })
}
