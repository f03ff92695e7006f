use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use heardof_core::{
    canonical_execution, check_family_domination, check_global_domination_evidence,
    conservative_valid_for, enumerate_ho_bounded, f_loss, generate_ho_oblivious, minimal_conservative,
    minimal_oblivious, oblivious_valid_for, run_theorem_suite, shifted_canonical_execution,
    standard_execution, suite_exit_code, Collection, DeliveredPredicate, DominationConfig, EventOrder,
    Family, HeardOfPredicate, PredicateBuilder, Preset, Strategy, SuiteConfig, TheoremReport, Verdict,
    DEFAULT_BUDGET, DEFAULT_CAP,
};
use serde_json::json;

/// Delivered predicates, round-changing strategies and the heard-of
/// predicates they generate, at a bounded horizon.
#[derive(Parser)]
#[command(name = "heardof", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Number of processes.
    #[arg(long, global = true, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=8))]
    n: u64,
    /// Number of rounds kept.
    #[arg(long, global = true, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    /// Output format; JSON everywhere except `trace`, which defaults to text.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Cap on enumerated collections.
    #[arg(long, global = true, env = "HEARDOF_CAP", default_value_t = DEFAULT_CAP)]
    cap: u64,
    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Which predicate to work on: an expression or a named preset.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct PredicateArg {
    /// Predicate expression, e.g. "crash(1) ~> total".
    #[arg(long)]
    expr: Option<String>,
    /// Named predicate, e.g. "recover1" or "crashF:2".
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Obliv,
    Cons,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Obliv => Family::Oblivious,
            FamilyArg::Cons => Family::Conservative,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    /// Minimal oblivious strategy of the predicate.
    Obliv,
    /// Minimal conservative strategy of the predicate.
    Cons,
    /// Waits for all messages but one, looking one round ahead.
    FLoss,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderArg {
    Canonical,
    Reversed,
}

impl From<OrderArg> for EventOrder {
    fn from(o: OrderArg) -> EventOrder {
        match o {
            OrderArg::Canonical => EventOrder::Canonical,
            OrderArg::Reversed => EventOrder::Reversed,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceKind {
    Standard,
    Canonical,
    Shifted,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Property {
    RoundSym,
    PrefixSym,
    CommonRound,
    CommonPrefix,
    Validity,
    Domination,
}

/// Strategy selection shared by `ho`, `trace` and `check`.
#[derive(Args)]
struct StrategySel {
    #[arg(long, value_enum, default_value_t = StrategyArg::Obliv, conflicts_with = "strategy_file")]
    strategy: StrategyArg,
    /// Strategy JSON, as printed by `minimal`.
    #[arg(long)]
    strategy_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the delivered predicate.
    Build {
        #[command(flatten)]
        pred: PredicateArg,
    },
    /// Print the minimal strategy of a family.
    Minimal {
        #[command(flatten)]
        pred: PredicateArg,
        #[arg(long, value_enum)]
        family: FamilyArg,
    },
    /// Print the heard-of predicate a strategy generates.
    Ho {
        #[command(flatten)]
        pred: PredicateArg,
        #[command(flatten)]
        strategy: StrategySel,
        /// Allow the bounded scheduler search.
        #[arg(long, requires = "budget")]
        enumerate: bool,
        /// Abstract states explored per collection.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Print a trace in the event text format.
    Trace {
        #[arg(long, value_enum)]
        kind: TraceKind,
        /// Predicate to take the collection from.
        #[arg(long, conflicts_with = "collection")]
        expr: Option<String>,
        /// Index of the collection within the predicate, in canonical order.
        #[arg(long, default_value_t = 0)]
        member: usize,
        /// Collection JSON, inline or as @path.
        #[arg(long)]
        collection: Option<String>,
        #[command(flatten)]
        strategy: StrategySel,
        #[arg(long, value_enum, default_value_t = OrderArg::Canonical)]
        order: OrderArg,
    },
    /// Check a property and print a report.
    Check {
        #[command(flatten)]
        pred: PredicateArg,
        #[arg(long, value_enum)]
        property: Property,
        /// Restricts `domination` to one family.
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[command(flatten)]
        strategy: StrategySel,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Strategies sampled when a family is too large to enumerate.
        #[arg(long, default_value_t = 12)]
        samples: usize,
    },
    /// Run the theorem-check suite.
    Suite {
        #[arg(long, value_enum, default_value_t = OrderArg::Canonical)]
        order: OrderArg,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Random pairs for the standard-execution check.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Record wall-clock time per check (reports then differ between runs).
        #[arg(long)]
        timing: bool,
        /// Drop this member of the two-crash predicate to exercise a failing check.
        #[arg(long)]
        corrupt: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("heardof: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let c = &cli.common;
    let (n, horizon) = (c.n as usize, c.horizon as usize);
    let builder = || -> Result<PredicateBuilder> { Ok(PredicateBuilder::new(n, horizon)?.with_cap(c.cap)) };
    let (output, code) = match &cli.command {
        Command::Build { pred } => {
            let p = predicate(&builder()?, pred)?;
            (render(c.format, &p, || p.to_string())?, 0)
        }
        Command::Minimal { pred, family } => {
            let p = predicate(&builder()?, pred)?;
            let f: Strategy = match family {
                FamilyArg::Obliv => minimal_oblivious(&p).into(),
                FamilyArg::Cons => minimal_conservative(&p)?.into(),
            };
            (render(c.format, &f, || f.to_string())?, 0)
        }
        Command::Ho {
            pred,
            strategy,
            enumerate,
            budget,
        } => {
            let p = predicate(&builder()?, pred)?;
            let f = select_strategy(strategy, &p)?;
            let ho = heard_of(&f, &p, *enumerate, *budget)?;
            (render(c.format, &ho, || ho.to_string())?, 0)
        }
        Command::Trace {
            kind,
            expr,
            member,
            collection,
            strategy,
            order,
        } => {
            let col = match (collection, expr) {
                (Some(text), _) => read_collection(text)?,
                (None, Some(e)) => {
                    let p = builder()?.parse_and_eval(e)?;
                    let found = p.iter().nth(*member).cloned();
                    found.ok_or_else(|| anyhow!("the predicate has {} members, no index {member}", p.len()))?
                }
                (None, None) => bail!("trace needs --expr or --collection"),
            };
            let order = EventOrder::from(*order);
            let trace = match kind {
                TraceKind::Standard => {
                    let p = DeliveredPredicate::literal("collection", col.n(), col.horizon(), [col.clone()])?;
                    standard_execution(&select_strategy(strategy, &p)?, &col, order)
                }
                TraceKind::Canonical => canonical_execution(&col, order),
                TraceKind::Shifted => shifted_canonical_execution(&col, order)?,
            };
            let text = trace.to_text();
            (render(c.format.or(Some(Format::Text)), &trace, || text.clone())?, 0)
        }
        Command::Check {
            pred,
            property,
            family,
            strategy,
            budget,
            samples,
        } => {
            let p = predicate(&builder()?, pred)?;
            let report = check(&p, *property, *family, strategy, *budget, *samples, c.seed)?;
            let code = u8::from(report.verdict == Verdict::Fails);
            (render(c.format, &report, || report.to_text())?, code)
        }
        Command::Suite {
            order,
            budget,
            samples,
            timing,
            corrupt,
        } => {
            let cfg = SuiteConfig {
                n,
                horizon,
                order: (*order).into(),
                cap: c.cap,
                budget: *budget,
                seed: c.seed,
                samples: *samples,
                timing: *timing,
                corrupt: *corrupt,
                ..SuiteConfig::default()
            };
            let reports = run_theorem_suite(&cfg);
            let code = suite_exit_code(&reports) as u8;
            let text = || reports.iter().map(TheoremReport::to_text).collect::<Vec<_>>().join("\n");
            (render(c.format, &reports, text)?, code)
        }
    };
    match &c.out {
        Some(path) => fs::write(path, &output).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(output.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other.context("writing to stdout")?,
            }
        }
    }
    Ok(code)
}

fn render<T: serde::Serialize>(format: Option<Format>, value: &T, text: impl FnOnce() -> String) -> Result<String> {
    let mut s = match format.unwrap_or(Format::Json) {
        Format::Json => serde_json::to_string(value)?,
        Format::Text => text(),
    };
    if !s.ends_with('\n') {
        s.push('\n');
    }
    Ok(s)
}

fn predicate(b: &PredicateBuilder, arg: &PredicateArg) -> Result<DeliveredPredicate> {
    Ok(match (&arg.expr, &arg.preset) {
        (Some(e), _) => b.parse_and_eval(e)?,
        (None, Some(name)) => {
            let preset: Preset = name.parse()?;
            b.eval(&preset.expr(b.horizon())?)?
        }
        (None, None) => bail!("--expr or --preset is required"),
    })
}

fn read_collection(text: &str) -> Result<Collection> {
    let json = match text.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => text.to_string(),
    };
    serde_json::from_str(&json).context("parsing the collection")
}

fn select_strategy(sel: &StrategySel, p: &DeliveredPredicate) -> Result<Strategy> {
    if let Some(path) = &sel.strategy_file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let f: Strategy = serde_json::from_str(&text).context("parsing the strategy")?;
        if f.n() != p.n() {
            bail!("strategy over {} processes, predicate over {}", f.n(), p.n());
        }
        return Ok(f);
    }
    Ok(match sel.strategy {
        StrategyArg::Obliv => minimal_oblivious(p).into(),
        StrategyArg::Cons => minimal_conservative(p)?.into(),
        StrategyArg::FLoss => f_loss(p.n())?,
    })
}

/// The product when the strategy is oblivious and valid on a predicate with
/// the total collection; otherwise the bounded search, only when asked for.
fn heard_of(f: &Strategy, p: &DeliveredPredicate, enumerate: bool, budget: Option<u64>) -> Result<HeardOfPredicate> {
    if let Some(o) = f.as_oblivious() {
        if p.contains_total() && oblivious_valid_for(o, p) {
            return Ok(generate_ho_oblivious(o, p)?);
        }
    }
    let Some(budget) = budget.filter(|_| enumerate) else {
        bail!(
            "no closed form for this {} strategy on this predicate; pass --enumerate --budget N to search executions",
            f.kind()
        );
    };
    let e = enumerate_ho_bounded(f, p, budget)?;
    if let Some(d) = e.deadlocks.first() {
        bail!(
            "the strategy is not valid: processes {:?} are stuck on {}\n{}",
            d.stuck,
            d.collection,
            d.trace.to_text()
        );
    }
    if !e.complete {
        eprintln!("heardof: budget exhausted, the heard-of predicate may be incomplete");
    }
    Ok(HeardOfPredicate::from_exploration(&e))
}

fn property_report(name: &str, p: &DeliveredPredicate, counterexample: Option<serde_json::Value>) -> TheoremReport {
    let params = json!({"n": p.n(), "horizon": p.horizon(), "expr": p.expr().to_string(), "property": name});
    let r = TheoremReport::new(name, params, "exact");
    match counterexample {
        Some(c) => r.fail(c),
        None => r,
    }
}

fn check(
    p: &DeliveredPredicate,
    property: Property,
    family: Option<FamilyArg>,
    sel: &StrategySel,
    budget: u64,
    samples: usize,
    seed: u64,
) -> Result<TheoremReport> {
    let sets = |q: &[heardof_core::ProcessSet]| q.iter().map(|s| s.to_indices()).collect::<Vec<_>>();
    Ok(match property {
        Property::RoundSym => property_report(
            "round-symmetry",
            p,
            p.round_symmetry_counterexample()
                .map(|(r, k, s)| json!({"round": r, "process": k, "missing_set": s.to_indices()})),
        ),
        Property::PrefixSym => property_report(
            "prefix-symmetry",
            p,
            p.prefix_symmetry_counterexample()
                .map(|(k, q)| json!({"process": k, "missing_prefix": sets(&q)})),
        ),
        Property::CommonRound => property_report(
            "common-round",
            p,
            p.common_round_counterexample()
                .map(|(r, s)| json!({"round": r, "set": s.to_indices()})),
        ),
        Property::CommonPrefix => property_report(
            "common-prefix",
            p,
            p.common_prefix_counterexample().map(|q| json!({"prefix": sets(&q)})),
        ),
        Property::Validity => validity(p, &select_strategy(sel, p)?, budget)?,
        Property::Domination => match family {
            Some(fam) => {
                let cfg = DominationConfig {
                    samples,
                    seed,
                    budget,
                    ..DominationConfig::default()
                };
                check_family_domination(p, fam.into(), &cfg)?
            }
            None => check_global_domination_evidence(p, budget)?,
        },
    })
}

/// The exact criterion for the closed families, corroborated by the bounded
/// search; the search alone for anything else.
fn validity(p: &DeliveredPredicate, f: &Strategy, budget: u64) -> Result<TheoremReport> {
    let params = json!({"n": p.n(), "horizon": p.horizon(), "expr": p.expr().to_string(), "strategy": f});
    let criterion = match f {
        Strategy::Oblivious(o) => Some(oblivious_valid_for(o, p)),
        Strategy::Conservative(c) => Some(conservative_valid_for(c, p)),
        _ => None,
    };
    let tier = if criterion.is_some() { "criterion+enumerated" } else { "enumerated" };
    let report = TheoremReport::new("validity", params, tier);
    let e = enumerate_ho_bounded(f, p, budget)?;
    if let Some(d) = e.deadlocks.first() {
        return Ok(report.fail(json!({
            "collection": d.collection,
            "stuck": d.stuck,
            "trace": d.trace.to_text(),
        })));
    }
    if criterion == Some(false) {
        // The criterion quantifies over all rounds; name the slot it trips on.
        let slot = p.iter().find_map(|c| {
            (1..=p.horizon()).find_map(|r| {
                (0..p.n())
                    .find(|&k| !f.accepts(r, &c.prefix_of(k, r)))
                    .map(|k| json!({"collection": c, "round": r, "process": k}))
            })
        });
        return Ok(report.fail(slot.unwrap_or_else(|| json!({"reason": "criterion rejects the strategy"}))));
    }
    let mut report = report.with_witness(json!({"collections": p.len(), "states": e.states}));
    if !e.complete {
        report.verdict = Verdict::Partial;
    }
    Ok(report)
}
