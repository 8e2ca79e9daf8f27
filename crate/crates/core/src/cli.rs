//! The `lanecheck` command line.
//!
//! Exit codes: 0 when the property holds (or the formula is true), 1 when it
//! fails (or the formula is false), 2 when the state budget ran out, 3 for
//! usage and input errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::acta::Variant;
use crate::checker::{self, CheckOptions, GuardMode, Network, Outcome, Query, Verdict};
use crate::mlsl::{self, Sort, Valuation};
use crate::scenario::Scenario;
use crate::traffic::LaneId;

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lanecheck", version, about = "Model checking of lane-change controllers on multi-lane highways")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Guards {
    Auto,
    Fast,
    Semantic,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a query on a scenario.
    Check {
        scenario: PathBuf,
        /// no-deadlock, safety, liveness-any or liveness-car=<name>
        #[arg(long)]
        query: String,
        /// original, original-plus-tw, live-no-qwait, live or live-no-tw
        #[arg(long)]
        variant: Option<String>,
        /// Override a constant, e.g. `--const t_w=2`.
        #[arg(long = "const", value_name = "NAME=VALUE")]
        constants: Vec<String>,
        #[arg(long)]
        horizon: Option<i64>,
        /// Write the counterexample to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print a JSON document instead of text.
        #[arg(long)]
        json: bool,
        /// State budget; defaults to $LANECHECK_MAX_STATES or 10^7.
        #[arg(long)]
        max_states: Option<usize>,
        #[arg(long, value_enum, default_value = "auto")]
        guards: Guards,
    },
    /// Evaluate a formula in a car's standard view.
    Eval {
        scenario: PathBuf,
        #[arg(long)]
        car: String,
        #[arg(long)]
        formula: String,
        /// Bind a variable, e.g. `--bind a=A` or `--bind n=2`.
        #[arg(long, value_name = "VAR=VALUE")]
        bind: Vec<String>,
        #[arg(long)]
        horizon: Option<i64>,
        #[arg(long)]
        json: bool,
    },
    /// Print the parsed scenario and its controllers.
    Info {
        scenario: PathBuf,
        #[arg(long)]
        variant: Option<String>,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_HOLDS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Check { scenario, query, variant, constants, horizon, trace, json, max_states, guards } => {
            let mut sc = load(&scenario, variant.as_deref(), horizon);
            if let Ok(sc) = &mut sc {
                for kv in &constants {
                    if let Err(e) = set_constant(sc, kv) {
                        let _ = writeln!(err, "error: {e}");
                        return EXIT_USAGE;
                    }
                }
            }
            sc.and_then(|sc| run_check(&sc, &query, trace, json, max_states, guards, out))
        }
        Command::Eval { scenario, car, formula, bind, horizon, json } => {
            load(&scenario, None, horizon).and_then(|sc| run_eval(&sc, &car, &formula, &bind, json, out))
        }
        Command::Info { scenario, variant } => {
            load(&scenario, variant.as_deref(), None).and_then(|sc| run_info(&sc, out))
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn load(path: &PathBuf, variant: Option<&str>, horizon: Option<i64>) -> Result<Scenario, Failure> {
    let mut sc = Scenario::load(path)?;
    if let Some(v) = variant {
        sc.variant = v.parse::<Variant>()?;
    }
    if horizon.is_some() {
        sc.horizon = horizon;
    }
    sc.validate()?;
    Ok(sc)
}

fn set_constant(sc: &mut Scenario, kv: &str) -> Result<(), String> {
    let (name, value) = kv.split_once('=').ok_or_else(|| format!("`--const {kv}` is not NAME=VALUE"))?;
    let value: u32 = value.parse().map_err(|_| format!("constant {name} needs a non-negative integer"))?;
    if !sc.constants.set(name, value) {
        return Err(format!("unknown constant `{name}`"));
    }
    sc.constants.validate()
}

/// Parses the `--query` argument against the scenario's cars.
pub fn parse_query(sc: &Scenario, text: &str) -> Result<Query, String> {
    match text {
        "no-deadlock" => Ok(Query::NoDeadlock),
        "safety" => Ok(Query::SafetyNoCollision),
        "liveness-any" => Ok(Query::LivenessAny(sc.snapshot().car_ids().collect())),
        _ => match text.strip_prefix("liveness-car=") {
            Some(name) => sc.car_id(name).map(Query::LivenessCar).ok_or_else(|| format!("no car named `{name}`")),
            None => Err(format!(
                "unknown query `{text}` (expected no-deadlock, safety, liveness-any or liveness-car=<name>)"
            )),
        },
    }
}

/// The exit code for a verdict.
pub fn exit_code(v: &Verdict) -> i32 {
    match v.outcome {
        Outcome::Holds => EXIT_HOLDS,
        Outcome::Fails => EXIT_FAILS,
        Outcome::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn outcome_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Holds => "holds",
        Outcome::Fails => "fails",
        Outcome::Inconclusive => "inconclusive",
    }
}

fn constants_text(sc: &Scenario) -> String {
    crate::acta::LcpConstants::NAMES
        .iter()
        .map(|n| format!("{n}={}", sc.constants.get(n).expect("known constant")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_check(
    sc: &Scenario,
    query: &str,
    trace_path: Option<PathBuf>,
    json: bool,
    max_states: Option<usize>,
    guards: Guards,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let q = parse_query(sc, query).map_err(Failure)?;
    let mut opts = CheckOptions::from_env().map_err(Failure)?;
    if let Some(m) = max_states {
        opts.max_states = m;
    }
    let mut cfg = sc.model_config();
    cfg.guard_mode = match guards {
        Guards::Auto => GuardMode::Auto,
        Guards::Fast => GuardMode::Fast,
        Guards::Semantic => GuardMode::Semantic,
    };
    let names = sc.names();
    let (net, verdict) = checker::check(&sc.snapshot(), &names, &cfg, &q, &opts)?;
    if json {
        let doc = verdict_json(sc, &net, &q, &verdict);
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    } else {
        write!(out, "{}", verdict_text(sc, &net, &q, &verdict))?;
    }
    if let (Some(path), Some(w)) = (trace_path, &verdict.witness) {
        let body = if json { serde_json::to_string_pretty(&w.to_json(&net))? + "\n" } else { w.to_text(&net, true) };
        std::fs::write(&path, body).map_err(|e| Failure(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(exit_code(&verdict))
}

/// Plain-text report of a verdict, including the witness when there is one.
pub fn verdict_text(sc: &Scenario, net: &Network, q: &Query, v: &Verdict) -> String {
    let mut s = String::new();
    s.push_str(&format!("query: {} ({})\n", q.label(net.car_names()), q.formula(net.car_names())));
    s.push_str(&format!("variant: {} ({})\n", sc.variant, constants_text(sc)));
    s.push_str(&format!("result: {}\n", outcome_word(v.outcome)));
    if let Some(r) = &v.reason {
        s.push_str(&format!("reason: {r}\n"));
    }
    s.push_str(&format!("states: {}, transitions: {}\n", v.stats.states, v.stats.transitions));
    if let Some(w) = &v.witness {
        s.push_str(&w.to_text(net, false));
    }
    s
}

pub fn verdict_json(sc: &Scenario, net: &Network, q: &Query, v: &Verdict) -> serde_json::Value {
    let constants: serde_json::Map<String, serde_json::Value> = crate::acta::LcpConstants::NAMES
        .iter()
        .map(|n| (n.to_string(), sc.constants.get(n).expect("known constant").into()))
        .collect();
    serde_json::json!({
        "query": q.label(net.car_names()),
        "formula": q.formula(net.car_names()),
        "variant": sc.variant.name(),
        "constants": constants,
        "horizon": net.horizon(),
        "outcome": v.outcome,
        "holds": v.holds(),
        "reason": v.reason,
        "stats": v.stats,
        "witness": v.witness.as_ref().map(|w| w.to_json(net)),
    })
}

fn run_eval(
    sc: &Scenario,
    car: &str,
    formula: &str,
    binds: &[String],
    json: bool,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let ego = sc.car_id(car).ok_or_else(|| Failure(format!("no car named `{car}`")))?;
    let phi = mlsl::parse(formula)?;
    let mut nu = Valuation::ego(ego);
    for b in binds {
        let (var, value) = b.split_once('=').ok_or_else(|| Failure(format!("`--bind {b}` is not VAR=VALUE")))?;
        nu = match Sort::of(var) {
            Sort::Car => nu.with_car(var, sc.car_id(value).ok_or_else(|| Failure(format!("no car named `{value}`")))?),
            Sort::Lane => {
                let lane: u32 =
                    value.parse().map_err(|_| Failure(format!("lane variable {var} needs a lane number")))?;
                nu.with_lane(var, LaneId(lane))
            }
        };
    }
    let ts = sc.snapshot();
    let view = ts.standard_view(ego, sc.horizon())?;
    let value = mlsl::eval(&ts, &view, &nu, &phi)?;
    if json {
        let doc = serde_json::json!({
            "formula": phi.to_string(),
            "car": car,
            "view": { "lanes": [view.lanes.lo, view.lanes.hi], "extent": [view.extent.lo, view.extent.hi] },
            "value": value,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    } else {
        writeln!(out, "{value}")?;
    }
    Ok(if value { EXIT_HOLDS } else { EXIT_FAILS })
}

fn run_info(sc: &Scenario, out: &mut dyn Write) -> Result<i32, Failure> {
    write!(out, "{}", sc.to_text())?;
    writeln!(out, "# horizon in use: {}", sc.horizon())?;
    for c in sc.snapshot().car_ids() {
        let a = crate::acta::build_lcp(c, sc.variant.shape(), sc.constants);
        writeln!(out, "\nLCP({})", sc.cars[c.index()].name)?;
        for l in &a.locations {
            let mark = if a.location(&l.name) == Some(a.initial) { " (initial)" } else { "" };
            writeln!(out, "  location {}{mark}: {}", l.name, l.invariant)?;
        }
        for e in &a.edges {
            let mut line = format!(
                "  edge {}: {} -> {} [{}] {}",
                e.name, a.locations[e.source].name, a.locations[e.target].name, e.guard, e.action
            );
            for (v, x) in &e.assign {
                line.push_str(&format!("; {v} := {x}"));
            }
            if e.reset_clock {
                line.push_str("; x := 0");
            }
            if let Some(crate::acta::Sync::Emit(ch)) = e.sync {
                line.push_str(&format!("; {ch}!"));
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(EXIT_HOLDS)
}
