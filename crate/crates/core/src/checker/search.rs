use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use super::network::{Network, Step, SystemState};
use super::store::StateStore;
use super::trace::{Trace, TraceKind, TraceStep};

pub const DEFAULT_MAX_STATES: usize = 10_000_000;
pub const MAX_STATES_ENV: &str = "LANECHECK_MAX_STATES";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Largest number of stored states before giving up.
    pub max_states: usize,
    /// Look for cycles without delays before any other cycle.
    pub zeno_first: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { max_states: DEFAULT_MAX_STATES, zeno_first: true }
    }
}

impl CheckOptions {
    /// Defaults, with the state budget taken from `LANECHECK_MAX_STATES` when set.
    pub fn from_env() -> Result<Self, String> {
        let mut o = CheckOptions::default();
        if let Ok(v) = std::env::var(MAX_STATES_ENV) {
            o.max_states =
                v.trim().parse().map_err(|_| format!("{MAX_STATES_ENV} must be a positive integer, got `{v}`"))?;
            if o.max_states == 0 {
                return Err(format!("{MAX_STATES_ENV} must be positive"));
            }
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub states: usize,
    pub transitions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Present exactly when the property fails.
    pub witness: Option<Trace>,
    pub stats: Stats,
    pub reason: Option<String>,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }

    pub fn fails(&self) -> bool {
        self.outcome == Outcome::Fails
    }

    fn holding(stats: Stats) -> Self {
        Verdict { outcome: Outcome::Holds, witness: None, stats, reason: None }
    }

    fn failing(trace: Trace, stats: Stats) -> Self {
        Verdict { outcome: Outcome::Fails, witness: Some(trace), stats, reason: None }
    }

    fn budget(stats: Stats, max: usize) -> Self {
        Verdict {
            outcome: Outcome::Inconclusive,
            witness: None,
            stats,
            reason: Some(format!("inconclusive: budget of {max} states exceeded")),
        }
    }
}

/// Breadth-first exploration recording each state's parent.
struct Explored {
    store: StateStore,
    parent: Vec<u32>,
    buf: Vec<u8>,
}

impl Explored {
    fn new(net: &Network) -> Self {
        Explored { store: StateStore::new(net.stride()), parent: Vec::new(), buf: Vec::with_capacity(net.stride()) }
    }

    fn insert(&mut self, net: &Network, s: &SystemState, parent: u32) -> (u32, bool) {
        self.buf.clear();
        net.pack(s, &mut self.buf);
        let (i, new) = self.store.insert(&self.buf);
        if new {
            self.parent.push(parent);
        }
        (i, new)
    }

    fn find(&mut self, net: &Network, s: &SystemState) -> Option<u32> {
        self.buf.clear();
        net.pack(s, &mut self.buf);
        self.store.find(&self.buf)
    }

    fn state(&self, net: &Network, i: u32) -> SystemState {
        net.unpack(self.store.get(i))
    }

    /// Steps of the breadth-first path from the initial state to `i`. Only
    /// parents are stored, so each step is found again among the parent's
    /// successors.
    fn path_to(&self, net: &Network, i: u32) -> Vec<Step> {
        let mut chain = vec![i];
        while let Some(&c) = chain.last() {
            if c == 0 {
                break;
            }
            chain.push(self.parent[c as usize]);
        }
        chain.reverse();
        let mut buf = Vec::with_capacity(net.stride());
        chain
            .windows(2)
            .map(|w| {
                let target = self.store.get(w[1]);
                net.successors(&self.state(net, w[0]))
                    .into_iter()
                    .find(|(_, t)| {
                        buf.clear();
                        net.pack(t, &mut buf);
                        buf == target
                    })
                    .map(|(step, _)| step)
                    .expect("a stored parent reaches its child")
            })
            .collect()
    }
}

fn build_trace(net: &Network, steps: &[Step], kind: TraceKind) -> Trace {
    let mut cur = net.initial().clone();
    let mut out = Vec::with_capacity(steps.len());
    for &step in steps {
        cur = net.apply(&cur, step).expect("recorded steps are enabled");
        out.push(TraceStep { step, state: cur.clone() });
    }
    Trace { kind, initial: net.initial().clone(), steps: out }
}

/// `A[] !bad`: explores every reachable state breadth-first. A failing
/// verdict carries a shortest path to a bad state.
pub fn check_ag(net: &Network, bad: impl Fn(&SystemState) -> bool, opts: &CheckOptions) -> Verdict {
    let mut ex = Explored::new(net);
    let mut stats = Stats::default();
    let init = net.initial().clone();
    ex.insert(net, &init, u32::MAX);
    stats.states = 1;
    if bad(&init) {
        return Verdict::failing(build_trace(net, &[], TraceKind::Path), stats);
    }
    let mut head = 0u32;
    while (head as usize) < ex.store.len() {
        let s = ex.state(net, head);
        for (_, t) in net.successors(&s) {
            stats.transitions += 1;
            let (i, new) = ex.insert(net, &t, head);
            if !new {
                continue;
            }
            stats.states = ex.store.len();
            if bad(&t) {
                return Verdict::failing(build_trace(net, &ex.path_to(net, i), TraceKind::Path), stats);
            }
            if stats.states > opts.max_states {
                return Verdict::budget(stats, opts.max_states);
            }
        }
        head += 1;
    }
    Verdict::holding(stats)
}

/// `A<> good`: every maximal path reaches a good state. Explores the states
/// reachable without passing through a good one and reports a state without
/// successors or a cycle among them. Cycles made only of discrete steps are
/// preferred when `zeno_first` is set.
pub fn check_af(net: &Network, good: impl Fn(&SystemState) -> bool, opts: &CheckOptions) -> Verdict {
    let mut ex = Explored::new(net);
    let mut stats = Stats::default();
    let init = net.initial().clone();
    if good(&init) {
        stats.states = 1;
        return Verdict::holding(stats);
    }
    ex.insert(net, &init, u32::MAX);
    let mut head = 0u32;
    while (head as usize) < ex.store.len() {
        let s = ex.state(net, head);
        let succ = net.successors(&s);
        if succ.is_empty() {
            stats.states = ex.store.len();
            return Verdict::failing(build_trace(net, &ex.path_to(net, head), TraceKind::DeadEnd), stats);
        }
        for (_, t) in succ {
            stats.transitions += 1;
            if good(&t) {
                continue;
            }
            ex.insert(net, &t, head);
            if ex.store.len() > opts.max_states {
                stats.states = ex.store.len();
                return Verdict::budget(stats, opts.max_states);
            }
        }
        head += 1;
    }
    stats.states = ex.store.len();

    let passes: &[bool] = if opts.zeno_first { &[true, false] } else { &[false] };
    for &discrete_only in passes {
        if let Some((entry, cycle)) = find_cycle(net, &mut ex, &good, discrete_only) {
            let mut steps = ex.path_to(net, entry);
            let cycle_start = steps.len();
            steps.extend(cycle);
            let trace = build_trace(net, &steps, TraceKind::Lasso { cycle_start });
            return Verdict::failing(trace, stats);
        }
    }
    Verdict::holding(stats)
}

/// Successors of stored state `i` inside the explored sub-graph.
fn inner_successors(
    net: &Network,
    ex: &mut Explored,
    good: &impl Fn(&SystemState) -> bool,
    discrete_only: bool,
    i: u32,
) -> Vec<(Step, u32)> {
    let s = ex.state(net, i);
    let mut out = Vec::new();
    for (step, t) in net.successors(&s) {
        if (discrete_only && step.is_delay()) || good(&t) {
            continue;
        }
        let j = ex.find(net, &t).expect("explored sub-graph is closed");
        out.push((step, j));
    }
    out
}

/// Finds the non-trivial strongly connected component holding the earliest
/// explored state, and a cycle through that state.
fn find_cycle(
    net: &Network,
    ex: &mut Explored,
    good: &impl Fn(&SystemState) -> bool,
    discrete_only: bool,
) -> Option<(u32, Vec<Step>)> {
    const UNSEEN: u32 = u32::MAX;
    let n = ex.store.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0u32;
    let mut best: Option<(u32, Vec<u32>)> = None;

    struct Frame {
        node: u32,
        succ: Vec<u32>,
        pos: usize,
        self_loop: bool,
    }

    for root in 0..n as u32 {
        if index[root as usize] != UNSEEN {
            continue;
        }
        let mut calls: Vec<Frame> = Vec::new();
        let open = |v: u32, ex: &mut Explored, index: &mut Vec<u32>, low: &mut Vec<u32>, next: &mut u32| {
            index[v as usize] = *next;
            low[v as usize] = *next;
            *next += 1;
            let succ: Vec<u32> =
                inner_successors(net, ex, good, discrete_only, v).into_iter().map(|(_, j)| j).collect();
            let self_loop = succ.contains(&v);
            Frame { node: v, succ, pos: 0, self_loop }
        };
        calls.push(open(root, ex, &mut index, &mut low, &mut next_index));
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(top) = calls.last_mut() {
            let v = top.node;
            if top.pos < top.succ.len() {
                let w = top.succ[top.pos];
                top.pos += 1;
                if index[w as usize] == UNSEEN {
                    let f = open(w, ex, &mut index, &mut low, &mut next_index);
                    calls.push(f);
                    stack.push(w);
                    on_stack[w as usize] = true;
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
                continue;
            }
            let self_loop = top.self_loop;
            calls.pop();
            if let Some(parent) = calls.last() {
                let p = parent.node as usize;
                low[p] = low[p].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w as usize] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                if comp.len() > 1 || self_loop {
                    let min = *comp.iter().min().expect("nonempty");
                    if best.as_ref().is_none_or(|(m, _)| min < *m) {
                        best = Some((min, comp));
                    }
                }
            }
        }
    }

    let (entry, comp) = best?;
    let members: FxHashSet<u32> = comp.into_iter().collect();
    Some((entry, covering_cycle(net, ex, good, discrete_only, entry, &members)))
}

/// Which participant takes a step: `None` for time, otherwise the emitting
/// automaton.
fn mover(step: Step) -> Option<usize> {
    match step {
        Step::Delay => None,
        Step::Fire { automaton, .. } => Some(automaton),
    }
}

/// A closed walk from `entry` through the component in which every
/// participant that can move inside the component moves at least once.
fn covering_cycle(
    net: &Network,
    ex: &mut Explored,
    good: &impl Fn(&SystemState) -> bool,
    discrete_only: bool,
    entry: u32,
    members: &FxHashSet<u32>,
) -> Vec<Step> {
    let inside = |v: u32, ex: &mut Explored| -> Vec<(Step, u32)> {
        inner_successors(net, ex, good, discrete_only, v).into_iter().filter(|(_, w)| members.contains(w)).collect()
    };
    let mut movers: Vec<Option<usize>> = Vec::new();
    for &v in members {
        for (step, _) in inside(v, ex) {
            if !movers.contains(&mover(step)) {
                movers.push(mover(step));
            }
        }
    }
    movers.sort();

    // Breadth-first search from `from` for the first step satisfying `hit`;
    // returns the path including that step and the state it reaches.
    let reach = |from: u32, hit: &dyn Fn(Step, u32) -> bool, ex: &mut Explored| -> (Vec<Step>, u32) {
        let mut prev: FxHashMap<u32, (u32, Step)> = FxHashMap::default();
        let mut seen: FxHashSet<u32> = FxHashSet::from_iter([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for (step, w) in inside(v, ex) {
                if hit(step, w) {
                    let mut steps = vec![step];
                    let mut cur = v;
                    while cur != from {
                        let (p, s) = prev[&cur];
                        steps.push(s);
                        cur = p;
                    }
                    steps.reverse();
                    return (steps, w);
                }
                if seen.insert(w) {
                    prev.insert(w, (v, step));
                    queue.push_back(w);
                }
            }
        }
        unreachable!("the component is strongly connected")
    };

    let mut walk = Vec::new();
    let mut at = entry;
    for m in movers {
        if walk.iter().any(|&s| mover(s) == m) {
            continue;
        }
        let (steps, to) = reach(at, &|step, _| mover(step) == m, ex);
        walk.extend(steps);
        at = to;
    }
    if at != entry || walk.is_empty() {
        let (steps, _) = reach(at, &|_, w| w == entry, ex);
        walk.extend(steps);
    }
    walk
}

/// Every reachable state, stored in breadth-first order.
#[derive(Debug)]
pub struct Exploration {
    pub store: StateStore,
    pub stats: Stats,
    /// False when the budget stopped the search early.
    pub complete: bool,
}

impl Exploration {
    pub fn states<'a>(&'a self, net: &'a Network) -> impl Iterator<Item = SystemState> + 'a {
        (0..self.store.len() as u32).map(move |i| net.unpack(self.store.get(i)))
    }
}

pub fn explore(net: &Network, opts: &CheckOptions) -> Exploration {
    let mut ex = Explored::new(net);
    let mut stats = Stats::default();
    ex.insert(net, net.initial(), u32::MAX);
    let mut head = 0u32;
    while (head as usize) < ex.store.len() {
        let s = ex.state(net, head);
        for (_, t) in net.successors(&s) {
            stats.transitions += 1;
            ex.insert(net, &t, head);
        }
        if ex.store.len() > opts.max_states {
            stats.states = ex.store.len();
            return Exploration { store: ex.store, stats, complete: false };
        }
        head += 1;
    }
    stats.states = ex.store.len();
    Exploration { store: ex.store, stats, complete: true }
}
