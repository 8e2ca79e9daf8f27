use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::network::{Network, Step, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum TraceKind {
    /// A finite path ending in the reported state.
    Path,
    /// A finite path ending in a state without successors.
    DeadEnd,
    /// `steps[cycle_start..]` lead from state `cycle_start` back to itself.
    Lasso { cycle_start: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: Step,
    pub state: SystemState,
}

/// A counterexample: steps from the initial state, each with the state it
/// leads to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub kind: TraceKind,
    pub initial: SystemState,
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("the trace does not start in the initial state")]
    WrongStart,
    #[error("step {0} is not enabled")]
    Disabled(usize),
    #[error("step {0} leads to a different state than recorded")]
    Mismatch(usize),
    #[error("the cycle does not close")]
    OpenCycle,
    #[error("the final state has successors")]
    NotDeadEnd,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

impl Trace {
    /// State `i`: the initial state for 0, otherwise the state after step `i`.
    pub fn state(&self, i: usize) -> &SystemState {
        if i == 0 {
            &self.initial
        } else {
            &self.steps[i - 1].state
        }
    }

    pub fn last_state(&self) -> &SystemState {
        self.state(self.steps.len())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The steps of the cycle of a lasso.
    pub fn cycle(&self) -> &[TraceStep] {
        match self.kind {
            TraceKind::Lasso { cycle_start } => &self.steps[cycle_start..],
            _ => &[],
        }
    }

    /// Executes `steps` from the initial state of `net`.
    pub fn from_steps(net: &Network, steps: &[Step], kind: TraceKind) -> Result<Trace, ReplayError> {
        let mut cur = net.initial().clone();
        let mut out = Vec::with_capacity(steps.len());
        for (i, &step) in steps.iter().enumerate() {
            cur = net.apply(&cur, step).ok_or(ReplayError::Disabled(i))?;
            out.push(TraceStep { step, state: cur.clone() });
        }
        let trace = Trace { kind, initial: net.initial().clone(), steps: out };
        trace.replay(net)?;
        Ok(trace)
    }

    /// Checks every step against the network's transition relation.
    pub fn replay(&self, net: &Network) -> Result<(), ReplayError> {
        if &self.initial != net.initial() {
            return Err(ReplayError::WrongStart);
        }
        let mut cur = &self.initial;
        for (i, ts) in self.steps.iter().enumerate() {
            let next = net.apply(cur, ts.step).ok_or(ReplayError::Disabled(i))?;
            if next != ts.state {
                return Err(ReplayError::Mismatch(i));
            }
            cur = &ts.state;
        }
        match self.kind {
            TraceKind::Path => Ok(()),
            TraceKind::DeadEnd if net.successors(cur).is_empty() => Ok(()),
            TraceKind::DeadEnd => Err(ReplayError::NotDeadEnd),
            TraceKind::Lasso { cycle_start } => {
                if cycle_start < self.steps.len() && self.state(cycle_start) == cur {
                    Ok(())
                } else {
                    Err(ReplayError::OpenCycle)
                }
            }
        }
    }

    /// One line per step; `cycle` marks where a lasso's loop begins. With
    /// `states`, each step is followed by a comment showing the state.
    pub fn to_text(&self, net: &Network, states: bool) -> String {
        let mut out = String::new();
        let kind = match self.kind {
            TraceKind::Path => "path",
            TraceKind::DeadEnd => "dead-end",
            TraceKind::Lasso { .. } => "lasso",
        };
        let _ = writeln!(out, "# trace: {kind}, {} steps", self.steps.len());
        if states {
            let _ = writeln!(out, "# {}", self.initial);
        }
        for (i, ts) in self.steps.iter().enumerate() {
            if self.kind == (TraceKind::Lasso { cycle_start: i }) {
                out.push_str("cycle\n");
            }
            let _ = writeln!(out, "{}", net.describe(self.state(i), ts.step));
            if states {
                let _ = writeln!(out, "# {}", ts.state);
            }
        }
        out
    }

    /// Reads the output of [`Trace::to_text`] back and replays it.
    pub fn from_text(net: &Network, text: &str) -> Result<Trace, ReplayError> {
        let mut steps = Vec::new();
        let mut cycle_start = None;
        let mut dead_end = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let syntax = |message: String| ReplayError::Syntax { line: ln + 1, message };
            if line.starts_with("# trace: dead-end") {
                dead_end = true;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["cycle"] => cycle_start = Some(steps.len()),
                ["delay", "1"] => steps.push(Step::Delay),
                ["fire", actor, edge, rest @ ..] => {
                    let find = |actor: &str, edge: &str| {
                        let a = net.actor_index(actor).ok_or_else(|| syntax(format!("unknown automaton `{actor}`")))?;
                        let e = net.automata()[a]
                            .edge(edge)
                            .ok_or_else(|| syntax(format!("{actor} has no edge `{edge}`")))?;
                        Ok::<_, ReplayError>((a, e))
                    };
                    let (automaton, edge) = find(actor, edge)?;
                    let partner = match rest.iter().position(|w| *w == "with") {
                        Some(p) if rest.len() >= p + 3 => Some(find(rest[p + 1], rest[p + 2])?),
                        Some(_) => return Err(syntax("`with` needs an automaton and an edge".into())),
                        None => None,
                    };
                    steps.push(Step::Fire { automaton, edge, partner });
                }
                _ => return Err(syntax(format!("cannot read `{line}`"))),
            }
        }
        let kind = match (cycle_start, dead_end) {
            (Some(c), _) => TraceKind::Lasso { cycle_start: c },
            (None, true) => TraceKind::DeadEnd,
            (None, false) => TraceKind::Path,
        };
        Trace::from_steps(net, &steps, kind)
    }

    pub fn to_json(&self, net: &Network) -> serde_json::Value {
        let steps: Vec<_> = self
            .steps
            .iter()
            .enumerate()
            .map(|(i, ts)| {
                serde_json::json!({
                    "step": net.describe(self.state(i), ts.step),
                    "state": state_json(net, &ts.state),
                })
            })
            .collect();
        serde_json::json!({
            "kind": self.kind,
            "initial": state_json(net, &self.initial),
            "steps": steps,
        })
    }
}

pub fn state_json(net: &Network, s: &SystemState) -> serde_json::Value {
    let automata: Vec<_> = net
        .automata()
        .iter()
        .enumerate()
        .map(|(a, aut)| {
            let mut v = serde_json::json!({
                "name": aut.name,
                "location": aut.locations[s.locs[a]].name,
            });
            if aut.clocked {
                v["x"] = s.clocks[a].into();
            }
            if aut.has_data {
                v["n"] = s.data[a].n.into();
                v["l"] = s.data[a].l.into();
            }
            v
        })
        .collect();
    let cars: Vec<_> = s
        .snapshot
        .cars
        .iter()
        .zip(net.car_names())
        .map(|(c, name)| {
            serde_json::json!({
                "name": name,
                "res": c.res.iter().map(|l| l.0).collect::<Vec<_>>(),
                "clm": c.clm.iter().map(|l| l.0).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::json!({ "automata": automata, "cars": cars })
}
