//! Prioritized rule execution on a shared agenda, plus the exact solvers:
//! acyclic dynamic programming, Knuth's lightest derivation (KLD), and A*
//! lightest derivation (A*LD).
//!
//! The agenda keeps weight assignments `(B = w)` in a binary min-heap keyed
//! by priority with deterministic tie-breaking: goal assignments first, then
//! FIFO by insertion sequence (heuristic runs prefer lighter assignments
//! before falling back to FIFO). Stale entries are discarded lazily when
//! popped; an assignment whose statement already has a weight changes
//! nothing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problem::{Kind, Problem, Query, SecondaryIndex};
use crate::rule::Rule;
use crate::solution::{SolutionSet, Weights};
use crate::statement::{Registry, Statement};

/// Pop priorities may dip below the running maximum by at most this much
/// before the monotonicity assertion trips; covers float noise in additive
/// chains.
pub const PRIORITY_EPS: f64 = 1e-9;

pub type HeuristicFn = Arc<dyn Fn(&Registry, Statement) -> f64 + Send + Sync>;

/// Heuristic value per statement. Finite values steer A*LD; `+inf` marks a
/// statement as prunable and keeps it off the agenda entirely. Values may be
/// negative (signed problems have negative context weights).
#[derive(Clone)]
pub struct Heuristic {
    f: HeuristicFn,
}

impl Heuristic {
    pub fn from_fn(f: impl Fn(&Registry, Statement) -> f64 + Send + Sync + 'static) -> Self {
        Heuristic { f: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Heuristic::from_fn(|_, _| 0.0)
    }

    pub fn eval(&self, reg: &Registry, s: Statement) -> f64 {
        (self.f)(reg, s)
    }
}

/// Priority assignment for [`run_prioritized`].
#[derive(Clone)]
pub enum Prioritizer<'a> {
    /// Priority = conclusion weight (KLD).
    ConclusionWeight,
    /// Priority = conclusion weight + h(conclusion) (A*LD).
    WithHeuristic(&'a Heuristic),
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum StopCondition {
    /// Stop as soon as the goal statement is expanded.
    OnGoalExpansion,
    /// Run the agenda to exhaustion (full closure).
    QueueEmpty,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub stop: StopCondition,
    /// Error out if a pop's priority drops below the previous pop's. On by
    /// default; benchmarks may disable it.
    pub assert_monotone: bool,
    /// Abort with a budget error after this many expansions.
    pub statement_budget: Option<usize>,
    /// Record one trace entry per expansion.
    pub record_trace: bool,
    /// Record one trace entry per push.
    pub record_pushes: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            stop: StopCondition::OnGoalExpansion,
            assert_monotone: true,
            statement_budget: None,
            record_trace: false,
            record_pushes: false,
        }
    }
}

impl RunOptions {
    pub fn closure() -> Self {
        RunOptions {
            stop: StopCondition::QueueEmpty,
            ..Default::default()
        }
    }

    pub fn with_stop(mut self, stop: StopCondition) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_assertion(mut self, on: bool) -> Self {
        self.assert_monotone = on;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.statement_budget = Some(budget);
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn with_push_trace(mut self) -> Self {
        self.record_pushes = true;
        self
    }
}

/// One agenda event. `seq` numbers expansions (or pushes, in the push trace)
/// from zero; `order` is a global ordinal across both event kinds so traces
/// can be interleaved faithfully.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub seq: usize,
    pub order: usize,
    pub statement: Statement,
    pub weight: f64,
    pub priority: f64,
}

/// Instrumentation counters for one run.
#[derive(Default, Debug)]
pub struct RunStats {
    /// Pops that entered the solution set.
    pub expansions: usize,
    /// Pops whose statement already had a weight.
    pub discarded_pops: usize,
    /// Heap inserts. Conclusions already in the solution set are filtered
    /// before insertion and counted under `suppressed_pushes`.
    pub pushes: usize,
    /// Pushes skipped because the conclusion was already expanded.
    pub suppressed_pushes: usize,
    /// Pushes skipped because the priority was not finite (heuristic pruning).
    pub pruned_pushes: usize,
    pub peak_agenda: usize,
    pub trace: Vec<TraceRecord>,
    pub push_trace: Vec<TraceRecord>,
}

/// Serializes expansion trace records as JSON lines.
pub fn trace_to_jsonl(reg: &Registry, records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let line = serde_json::json!({
            "seq": r.seq,
            "statement": reg.display(r.statement),
            "weight": r.weight,
            "priority": r.priority,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Secondary ordering among entries with equal priority. The goal statement
/// always pops first (safe: the optimality arguments only need strict
/// priority inequalities, and it stops early runs as early as possible).
/// After that, plain runs are FIFO; heuristic runs prefer lighter
/// assignments, whose priority is mostly heuristic estimate, so dead-end
/// statements that tie with the goal's figure of merit at zero heuristic
/// pop behind the statements still on a lightest path.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub(crate) enum TieBreak {
    Fifo,
    LighterFirst,
}

struct Entry {
    priority: f64,
    /// 0 for assignments of the goal statement, 1 otherwise.
    goal_rank: u8,
    /// The entry weight under `TieBreak::LighterFirst`, 0 under FIFO.
    weight_rank: f64,
    seq: u64,
    statement: Statement,
    weight: f64,
    rule: Rule,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority && self.seq == other.seq
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want the lowest
        // (priority, goal_rank, weight_rank, seq)
        other
            .priority
            .partial_cmp(&self.priority)
            .expect("agenda priorities are never NaN")
            .then_with(|| other.goal_rank.cmp(&self.goal_rank))
            .then_with(|| {
                other
                    .weight_rank
                    .partial_cmp(&self.weight_rank)
                    .expect("agenda weights are never NaN")
            })
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// A rule instance scheduled by a source: conclusion weight and priority are
/// already evaluated.
pub(crate) struct Queued {
    pub rule: Rule,
    pub weight: f64,
    pub priority: f64,
}

/// Mutable run state owned by the agenda loop and shared with sources.
pub(crate) struct RunCore {
    pub reg: Registry,
    pub weights: Weights,
    pub index: SecondaryIndex,
    pub backpointers: Vec<Option<Rule>>,
    pub order: Vec<Statement>,
}

/// Rule supplier driving one run: seeds the agenda and reacts to expansions.
pub(crate) trait Source {
    fn initial_registry(&self) -> Registry;
    fn goal(&self) -> Statement;
    fn seed(&mut self, core: &mut RunCore, out: &mut Vec<Queued>) -> Result<()>;
    fn expand(
        &mut self,
        s: Statement,
        w: f64,
        core: &mut RunCore,
        out: &mut Vec<Queued>,
    ) -> Result<()>;
    fn index_specs(&self) -> Vec<crate::problem::IndexSpec> {
        Vec::new()
    }
    fn tie_break(&self) -> TieBreak {
        TieBreak::Fifo
    }
}

pub(crate) fn drive<S: Source>(src: &mut S, opts: &RunOptions) -> Result<(SolutionSet, RunStats)> {
    let reg = src.initial_registry();
    let n = reg.len();
    let mut core = RunCore {
        reg,
        weights: Weights::with_capacity(n),
        index: SecondaryIndex::new(&src.index_specs()),
        backpointers: Vec::new(),
        order: Vec::new(),
    };
    let goal = src.goal();
    let tie = src.tie_break();
    let mut stats = RunStats::default();
    let mut heap: BinaryHeap<Entry> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut order = 0usize;
    let mut out: Vec<Queued> = Vec::new();

    let mut last_priority = f64::NEG_INFINITY;
    src.seed(&mut core, &mut out)?;
    push_all(
        &mut heap, &mut out, &core, goal, tie, &mut stats, &mut seq, &mut order, opts,
        last_priority,
    )?;

    while let Some(entry) = heap.pop() {
        if opts.assert_monotone && entry.priority < last_priority - PRIORITY_EPS {
            return Err(Error::PriorityRegression {
                statement: core.reg.display(entry.statement),
                priority: entry.priority,
                previous: last_priority,
            });
        }
        if entry.priority > last_priority {
            last_priority = entry.priority;
        }
        if core.weights.contains(entry.statement) {
            stats.discarded_pops += 1;
            continue;
        }

        core.weights.set(entry.statement, entry.weight);
        if core.backpointers.len() <= entry.statement.id() {
            core.backpointers.resize(entry.statement.id() + 1, None);
        }
        core.backpointers[entry.statement.id()] = Some(entry.rule);
        core.order.push(entry.statement);
        core.index.add(&core.reg, entry.statement);
        stats.expansions += 1;
        if opts.record_trace {
            stats.trace.push(TraceRecord {
                seq: stats.expansions - 1,
                order,
                statement: entry.statement,
                weight: entry.weight,
                priority: entry.priority,
            });
        }
        order += 1;
        if let Some(budget) = opts.statement_budget {
            if stats.expansions > budget {
                return Err(Error::BudgetExceeded {
                    statements: stats.expansions,
                    frontier: heap.len(),
                });
            }
        }
        if opts.stop == StopCondition::OnGoalExpansion && entry.statement == goal {
            break;
        }

        out.clear();
        src.expand(entry.statement, entry.weight, &mut core, &mut out)?;
        push_all(
            &mut heap, &mut out, &core, goal, tie, &mut stats, &mut seq, &mut order, opts,
            last_priority,
        )?;
    }

    let RunCore {
        reg,
        weights,
        backpointers,
        order,
        ..
    } = core;
    Ok((
        SolutionSet::new(reg, weights, backpointers, order, goal),
        stats,
    ))
}

#[allow(clippy::too_many_arguments)]
fn push_all(
    heap: &mut BinaryHeap<Entry>,
    out: &mut Vec<Queued>,
    core: &RunCore,
    goal: Statement,
    tie: TieBreak,
    stats: &mut RunStats,
    seq: &mut u64,
    order: &mut usize,
    opts: &RunOptions,
    last_priority: f64,
) -> Result<()> {
    for q in out.drain(..) {
        if !q.priority.is_finite() || !q.weight.is_finite() {
            // +inf heuristic or saturated weight: ignore the conclusion
            stats.pruned_pushes += 1;
            continue;
        }
        // under a monotone heuristic every consequence is queued at or above
        // the priority of the pop that produced it, so a lower push is the
        // same contract violation a later pop would reveal
        if opts.assert_monotone && q.priority < last_priority - PRIORITY_EPS {
            return Err(Error::PriorityRegression {
                statement: core.reg.display(q.rule.conclusion),
                priority: q.priority,
                previous: last_priority,
            });
        }
        let statement = q.rule.conclusion;
        if core.weights.contains(statement) {
            stats.suppressed_pushes += 1;
            continue;
        }
        if opts.record_pushes {
            stats.push_trace.push(TraceRecord {
                seq: stats.pushes,
                order: *order,
                statement,
                weight: q.weight,
                priority: q.priority,
            });
        }
        *order += 1;
        heap.push(Entry {
            priority: q.priority,
            goal_rank: (statement != goal) as u8,
            weight_rank: match tie {
                TieBreak::Fifo => 0.0,
                TieBreak::LighterFirst => q.weight,
            },
            seq: *seq,
            statement,
            weight: q.weight,
            rule: q.rule,
        });
        *seq += 1;
        stats.pushes += 1;
        stats.peak_agenda = stats.peak_agenda.max(heap.len());
    }
    Ok(())
}

enum Prio<'a> {
    Weight,
    Heuristic(&'a Heuristic),
}

/// Source backed by an ordinary [`Problem`], grounded or implicit.
struct PlainSource<'p> {
    problem: &'p Problem,
    prio: Prio<'p>,
    h_cache: Vec<f64>,
    collect: Option<Vec<Rule>>,
    scratch: Vec<Rule>,
}

impl<'p> PlainSource<'p> {
    fn new(problem: &'p Problem, prio: Prio<'p>) -> Self {
        PlainSource {
            problem,
            prio,
            h_cache: Vec::new(),
            collect: None,
            scratch: Vec::new(),
        }
    }

    fn priority(&mut self, reg: &Registry, conclusion: Statement, w: f64) -> f64 {
        match self.prio {
            Prio::Weight => w,
            Prio::Heuristic(h) => {
                let id = conclusion.id();
                if self.h_cache.len() <= id {
                    self.h_cache.resize(id + 1, f64::NAN);
                }
                if self.h_cache[id].is_nan() {
                    self.h_cache[id] = h.eval(reg, conclusion);
                }
                w + self.h_cache[id]
            }
        }
    }

    fn schedule(&mut self, core: &RunCore, rule: Rule, out: &mut Vec<Queued>) {
        let mut ws = Vec::with_capacity(rule.arity());
        for a in &rule.antecedents {
            match core.weights.get(*a) {
                Some(w) => ws.push(w),
                // generator emitted an incomplete instance; contract
                // violation, drop it
                None => {
                    debug_assert!(false, "expander emitted an instance with unweighted antecedent");
                    return;
                }
            }
        }
        let w = rule.weight.eval(&ws);
        let priority = self.priority(&core.reg, rule.conclusion, w);
        if let Some(c) = &mut self.collect {
            c.push(rule.clone());
        }
        out.push(Queued {
            rule,
            weight: w,
            priority,
        });
    }
}

impl Source for PlainSource<'_> {
    fn initial_registry(&self) -> Registry {
        self.problem.registry().clone()
    }

    fn goal(&self) -> Statement {
        self.problem.goal()
    }

    fn index_specs(&self) -> Vec<crate::problem::IndexSpec> {
        self.problem.index_specs().to_vec()
    }

    fn tie_break(&self) -> TieBreak {
        match self.prio {
            Prio::Weight => TieBreak::Fifo,
            Prio::Heuristic(_) => TieBreak::LighterFirst,
        }
    }

    fn seed(&mut self, core: &mut RunCore, out: &mut Vec<Queued>) -> Result<()> {
        for axiom in self.problem.axioms() {
            self.schedule(core, axiom, out);
        }
        Ok(())
    }

    fn expand(
        &mut self,
        s: Statement,
        _w: f64,
        core: &mut RunCore,
        out: &mut Vec<Queued>,
    ) -> Result<()> {
        match &self.problem.kind {
            Kind::Grounded(g) => {
                for &ri in &g.by_antecedent[s.id()] {
                    let rule = &g.rules[ri as usize];
                    if rule
                        .antecedents
                        .iter()
                        .all(|a| *a == s || core.weights.contains(*a))
                    {
                        // `s` itself was weighted just before expand()
                        self.schedule(core, rule.clone(), out);
                    }
                }
            }
            Kind::Implicit(imp) => {
                let mut raw = std::mem::take(&mut self.scratch);
                raw.clear();
                {
                    let RunCore {
                        reg,
                        weights,
                        index,
                        ..
                    } = core;
                    let mut q = Query {
                        reg,
                        weights,
                        index: Some(index),
                    };
                    imp.expander.consequences(s, &mut q, &mut |r| raw.push(r));
                }
                for rule in raw.drain(..) {
                    self.schedule(core, rule, out);
                }
                self.scratch = raw;
            }
        }
        Ok(())
    }
}

/// Executes a problem's rules at priorities chosen by `pr`, exactly as the
/// agenda scheme requires: seed from axioms, repeatedly pop the lowest
/// priority assignment, ignore it if the statement is already weighted,
/// otherwise record it and queue every one-step consequence.
pub fn run_prioritized(
    p: &Problem,
    pr: Prioritizer<'_>,
    opts: &RunOptions,
) -> Result<(SolutionSet, RunStats)> {
    let prio = match pr {
        Prioritizer::ConclusionWeight => Prio::Weight,
        Prioritizer::WithHeuristic(h) => Prio::Heuristic(h),
    };
    let mut src = PlainSource::new(p, prio);
    drive(&mut src, opts)
}

/// Knuth's lightest derivation: priority = conclusion weight, stop at goal
/// expansion. Requires non-negative superior rules; the runtime priority
/// check catches violations.
pub fn kld(p: &Problem) -> Result<(SolutionSet, RunStats)> {
    kld_with(p, &RunOptions::default())
}

pub fn kld_with(p: &Problem, opts: &RunOptions) -> Result<(SolutionSet, RunStats)> {
    run_prioritized(p, Prioritizer::ConclusionWeight, opts)
}

/// A* lightest derivation: priority = conclusion weight + h(conclusion),
/// stop at goal expansion. Requires a monotone heuristic with finite h(goal);
/// statements with `h = +inf` are never pushed.
pub fn astar_ld(p: &Problem, h: &Heuristic) -> Result<(SolutionSet, RunStats)> {
    astar_ld_with(p, h, &RunOptions::default())
}

pub fn astar_ld_with(
    p: &Problem,
    h: &Heuristic,
    opts: &RunOptions,
) -> Result<(SolutionSet, RunStats)> {
    run_prioritized(p, Prioritizer::WithHeuristic(h), opts)
}

/// Forward closure of an implicit problem, collecting every fired rule
/// instance. Used by `Problem::ground`.
pub(crate) fn closure_rules(p: &Problem, budget: usize) -> Result<(Registry, Vec<Rule>)> {
    let mut src = PlainSource::new(p, Prio::Weight);
    src.collect = Some(Vec::new());
    let opts = RunOptions {
        stop: StopCondition::QueueEmpty,
        assert_monotone: false,
        statement_budget: Some(budget),
        record_trace: false,
        record_pushes: false,
    };
    let (sol, _) = drive(&mut src, &opts)?;
    let rules = src.collect.take().unwrap_or_default();
    Ok((sol.into_registry(), rules))
}

/// Exact solver for grounded acyclic problems: compute a topological order
/// of the statement dependency graph and evaluate each statement once. This
/// is the oracle the agenda solvers are checked against.
pub fn dp_acyclic(p: &Problem) -> Result<SolutionSet> {
    let g = match &p.kind {
        Kind::Grounded(g) => g,
        Kind::Implicit(_) => {
            return Err(Error::InvalidProblem(
                "dp_acyclic requires a grounded problem".into(),
            ))
        }
    };
    let reg = p.registry().clone();
    let n = reg.len();

    let mut indegree = vec![0usize; n];
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for rule in &g.rules {
        let mut seen: Vec<Statement> = Vec::new();
        for &a in &rule.antecedents {
            if !seen.contains(&a) {
                seen.push(a);
                adj[a.id()].push(rule.conclusion.id() as u32);
                indegree[rule.conclusion.id()] += 1;
            }
        }
    }

    let mut queue: std::collections::VecDeque<usize> =
        (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        topo.push(i);
        for &j in &adj[i] {
            indegree[j as usize] -= 1;
            if indegree[j as usize] == 0 {
                queue.push_back(j as usize);
            }
        }
    }
    if topo.len() < n {
        return Err(Error::CyclicProblem {
            cycle: find_cycle(&reg, g, &indegree),
        });
    }

    let mut weights = Weights::with_capacity(n);
    let mut backpointers: Vec<Option<Rule>> = vec![None; n];
    let mut order = Vec::new();
    for &i in &topo {
        let s = Statement::from_id(i);
        let mut best: Option<(f64, &Rule)> = None;
        'rules: for &ri in &g.by_conclusion[i] {
            let rule = &g.rules[ri as usize];
            let mut ws = Vec::with_capacity(rule.arity());
            for a in &rule.antecedents {
                match weights.get(*a) {
                    Some(w) => ws.push(w),
                    None => continue 'rules,
                }
            }
            let w = rule.weight.eval(&ws);
            if !w.is_finite() {
                continue;
            }
            if best.is_none_or(|(bw, _)| w < bw) {
                best = Some((w, rule));
            }
        }
        if let Some((w, rule)) = best {
            weights.set(s, w);
            backpointers[i] = Some(rule.clone());
            order.push(s);
        }
    }

    Ok(SolutionSet::new(reg, weights, backpointers, order, p.goal()))
}

fn find_cycle(reg: &Registry, g: &Grounded, indegree: &[usize]) -> Vec<String> {
    // every remaining node (indegree > 0) lies on or downstream of a cycle;
    // walk predecessors among remaining nodes until one repeats
    let remaining: std::collections::HashSet<usize> = (0..indegree.len())
        .filter(|&i| indegree[i] > 0)
        .collect();
    let mut preds: std::collections::HashMap<usize, usize> = Default::default();
    for rule in &g.rules {
        let c = rule.conclusion.id();
        if !remaining.contains(&c) {
            continue;
        }
        for a in &rule.antecedents {
            if remaining.contains(&a.id()) {
                preds.entry(c).or_insert(a.id());
            }
        }
    }
    let start = match remaining.iter().min() {
        Some(&s) => s,
        None => return Vec::new(),
    };
    let mut path = vec![start];
    let mut seen = std::collections::HashMap::new();
    seen.insert(start, 0usize);
    let mut cur = start;
    while let Some(&prev) = preds.get(&cur) {
        if let Some(&at) = seen.get(&prev) {
            let mut cycle: Vec<String> = path[at..]
                .iter()
                .rev()
                .map(|&i| reg.display(Statement::from_id(i)))
                .collect();
            cycle.push(reg.display(Statement::from_id(prev)));
            return cycle;
        }
        seen.insert(prev, path.len());
        path.push(prev);
        cur = prev;
    }
    path.iter()
        .map(|&i| reg.display(Statement::from_id(i)))
        .collect()
}

use crate::problem::Grounded;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::graph::{demo_graph, graph_problem};
    use crate::problems::Graph;
    use crate::rule::WeightFn;

    fn g1() -> Problem {
        graph_problem(&demo_graph()).unwrap()
    }

    fn g1_with_cycle() -> Problem {
        // demo graph plus a back edge a -> s
        let g = Graph::new(
            3,
            vec![(0, 1, 1.0), (0, 2, 5.0), (1, 2, 2.0), (1, 0, 1.0)],
            0,
            2,
        )
        .unwrap();
        graph_problem(&g).unwrap()
    }

    fn weight(sol: &SolutionSet, label: &str, arg: i32) -> Option<f64> {
        let s = sol.registry().lookup(label, &[arg])?;
        sol.weight_of(s)
    }

    #[test]
    fn kld_solves_the_demo_graph() {
        let p = g1();
        let (sol, stats) = kld_with(&p, &RunOptions::closure()).unwrap();
        assert_eq!(weight(&sol, "path", 0), Some(0.0));
        assert_eq!(weight(&sol, "path", 1), Some(1.0));
        assert_eq!(weight(&sol, "path", 2), Some(3.0));
        assert_eq!(stats.expansions, 3);
        // expansion order follows lightest weights: s, a, b
        let order: Vec<String> = sol
            .expansion_order()
            .iter()
            .map(|&s| sol.registry().display(s))
            .collect();
        assert_eq!(order, vec!["path(0)", "path(1)", "path(2)"]);
    }

    #[test]
    fn cycles_terminate_with_identical_weights() {
        let (sol, _) = kld_with(&g1_with_cycle(), &RunOptions::closure()).unwrap();
        assert_eq!(weight(&sol, "path", 0), Some(0.0));
        assert_eq!(weight(&sol, "path", 1), Some(1.0));
        assert_eq!(weight(&sol, "path", 2), Some(3.0));
        assert_eq!(sol.expansion_order().len(), 3);
    }

    #[test]
    fn unreachable_goal_flags_no_derivation() {
        let g = Graph::new(3, vec![(0, 1, 1.0)], 0, 2).unwrap();
        let (sol, _) = kld(&graph_problem(&g).unwrap()).unwrap();
        assert_eq!(sol.goal_weight(), None);
        // only derivable statements have entries
        assert_eq!(sol.expansion_order().len(), 2);
    }

    #[test]
    fn early_stop_skips_expensive_detours() {
        // axioms X = 1, Y = 1; X,Y ->1 goal; X,Y ->5 Z; Z ->1 goal
        let mut reg = Registry::new();
        let x = reg.intern("X", &[]);
        let y = reg.intern("Y", &[]);
        let z = reg.intern("Z", &[]);
        let goal = reg.intern("goal", &[]);
        let rules = vec![
            Rule::axiom(x, 1.0),
            Rule::axiom(y, 1.0),
            Rule::additive(vec![x, y], goal, 1.0),
            Rule::additive(vec![x, y], z, 5.0),
            Rule::additive(vec![z], goal, 1.0),
        ];
        let p = Problem::grounded(reg, rules, goal).unwrap();
        let (sol, _) = kld(&p).unwrap();
        assert_eq!(sol.goal_weight(), Some(3.0));
        assert!(sol.weight_of(z).is_none(), "Z must not be expanded");
    }

    #[test]
    fn exact_heuristic_pops_at_constant_priority() {
        let p = g1();
        // exact distances to the goal: h(s) = 3, h(a) = 2, h(b) = 0
        let h = Heuristic::from_fn(|reg, s| match reg.args(s)[0] {
            0 => 3.0,
            1 => 2.0,
            _ => 0.0,
        });
        let opts = RunOptions::default().with_trace();
        let (sol, stats) = astar_ld_with(&p, &h, &opts).unwrap();
        assert_eq!(sol.goal_weight(), Some(3.0));
        assert_eq!(stats.expansions, 3);
        assert!(stats.trace.iter().all(|r| r.priority == 3.0));
    }

    #[test]
    fn zero_heuristic_matches_kld() {
        let p = g1();
        let h = Heuristic::zero();
        let (a, _) = astar_ld_with(&p, &h, &RunOptions::closure()).unwrap();
        let (k, _) = kld_with(&p, &RunOptions::closure()).unwrap();
        for (s, w) in k.entries() {
            assert_eq!(a.weight_of(s), Some(w));
        }
    }

    #[test]
    fn non_monotone_heuristic_trips_the_priority_assertion() {
        let p = g1();
        // h(a) = 10 violates monotonicity on the edge a -> b
        let h = Heuristic::from_fn(|reg, s| if reg.args(s)[0] == 1 { 10.0 } else { 0.0 });
        let err = astar_ld_with(&p, &h, &RunOptions::closure()).unwrap_err();
        assert!(matches!(err, Error::PriorityRegression { .. }), "{err}");
    }

    #[test]
    fn infinite_heuristic_prunes_statements() {
        let p = g1();
        // pruning `a` leaves only the direct 5-weight edge
        let h = Heuristic::from_fn(|reg, s| if reg.args(s)[0] == 1 { f64::INFINITY } else { 0.0 });
        let (sol, stats) = astar_ld(&p, &h).unwrap();
        assert_eq!(sol.goal_weight(), Some(5.0));
        assert!(stats.pruned_pushes > 0);
        assert!(weight(&sol, "path", 1).is_none());
    }

    #[test]
    fn dp_matches_kld_on_acyclic_input() {
        let p = g1();
        let sol = dp_acyclic(&p).unwrap();
        assert_eq!(sol.goal_weight(), Some(3.0));
        assert_eq!(weight(&sol, "path", 1), Some(1.0));
    }

    #[test]
    fn dp_reports_a_cycle() {
        let err = dp_acyclic(&g1_with_cycle()).unwrap_err();
        match err {
            Error::CyclicProblem { cycle } => assert!(cycle.len() >= 2, "{cycle:?}"),
            other => panic!("expected cycle error, got {other}"),
        }
    }

    #[test]
    fn derivations_rebuild_and_reevaluate_exactly() {
        let p = g1();
        let (sol, _) = kld(&p).unwrap();
        let goal = sol.goal();
        let d = sol.derivation(goal).unwrap();
        assert_eq!(d.size(), 3);
        assert_eq!(d.weight, 3.0);
        assert_eq!(d.evaluate().unwrap(), 3.0);
        // axiom derivation is a single node
        let s = sol.registry().lookup("path", &[0]).unwrap();
        let d = sol.derivation(s).unwrap();
        assert_eq!(d.size(), 1);
    }

    #[test]
    fn missing_entries_are_not_derived_errors() {
        let g = Graph::new(3, vec![(0, 1, 1.0)], 0, 2).unwrap();
        let p = graph_problem(&g).unwrap();
        let (sol, _) = kld(&p).unwrap();
        assert!(matches!(
            sol.derivation(p.goal()),
            Err(Error::NotDerived(_))
        ));
    }

    #[test]
    fn budget_aborts_with_frontier_size() {
        let p = g1();
        let opts = RunOptions::closure().with_budget(2);
        let err = kld_with(&p, &opts).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { statements: 3, .. }), "{err}");
    }

    #[test]
    fn kld_trace_is_sorted_by_weight() {
        let opts = RunOptions::closure().with_trace();
        let (_, stats) = kld_with(&g1_with_cycle(), &opts).unwrap();
        let ws: Vec<f64> = stats.trace.iter().map(|r| r.weight).collect();
        assert!(ws.windows(2).all(|w| w[0] <= w[1]));
        assert!(stats.trace.iter().all(|r| r.priority == r.weight));
    }

    #[test]
    fn general_weight_functions_run_through_the_engine() {
        // max-composition instead of addition
        let mut reg = Registry::new();
        let a = reg.intern("a", &[]);
        let b = reg.intern("b", &[]);
        let c = reg.intern("c", &[]);
        let rules = vec![
            Rule::axiom(a, 2.0),
            Rule::axiom(b, 7.0),
            Rule::new(
                vec![a, b],
                c,
                WeightFn::General(std::sync::Arc::new(|ws: &[f64]| ws[0].max(ws[1]))),
            ),
        ];
        let p = Problem::grounded(reg, rules, c).unwrap();
        let (sol, _) = kld(&p).unwrap();
        assert_eq!(sol.goal_weight(), Some(7.0));
    }

    #[test]
    fn push_trace_records_queued_assignments() {
        let p = g1();
        let opts = RunOptions::default().with_push_trace();
        let (_, stats) = kld_with(&p, &opts).unwrap();
        assert_eq!(stats.pushes, stats.push_trace.len());
        assert!(stats.push_trace.iter().any(|r| r.weight == 5.0));
    }

    #[test]
    fn concurrent_runs_share_a_problem() {
        let p = std::sync::Arc::new(g1());
        let mut handles = Vec::new();
        for _ in 0..4 {
            let p = p.clone();
            handles.push(std::thread::spawn(move || {
                kld(&p).unwrap().0.goal_weight()
            }));
        }
        for h in handles {
            assert_eq!(h.join().unwrap(), Some(3.0));
        }
    }
}
