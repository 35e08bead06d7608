//! Heuristics derived from abstractions: context problems, rule projection,
//! and pattern databases of lightest abstract context weights.
//!
//! A context for a statement `B` is a derivation of the goal with a hole
//! that a derivation of `B` fills. For additive rules the lightest context
//! weight is the exact cost-to-go, and lightest context weights of any
//! abstraction of the problem form an admissible, monotone heuristic.

use std::collections::HashMap;
use std::sync::Arc;

use crate::engine::{self, Heuristic, RunOptions};
use crate::error::{Error, Result};
use crate::problem::{format_statement, parse_statement, Problem, Query};
use crate::rule::Rule;
use crate::solution::SolutionSet;
use crate::statement::{Registry, Statement};

/// Statement-level coarsening map, expressed on `(label, args)` keys so it
/// applies to statements interned after the map was built.
pub type KeyMapFn = Arc<dyn Fn(&str, &[i32]) -> (String, Vec<i32>) + Send + Sync>;

#[derive(Clone)]
pub struct AbstractionMap {
    f: KeyMapFn,
}

impl AbstractionMap {
    pub fn from_fn(
        f: impl Fn(&str, &[i32]) -> (String, Vec<i32>) + Send + Sync + 'static,
    ) -> Self {
        AbstractionMap { f: Arc::new(f) }
    }

    pub fn identity() -> Self {
        AbstractionMap::from_fn(|label, args| (label.to_string(), args.to_vec()))
    }

    /// Table-backed map on rendered statement keys; statements missing from
    /// the table map to themselves.
    pub fn from_table(table: HashMap<(String, Vec<i32>), (String, Vec<i32>)>) -> Self {
        AbstractionMap::from_fn(move |label, args| {
            match table.get(&(label.to_string(), args.to_vec())) {
                Some((l, a)) => (l.clone(), a.clone()),
                None => (label.to_string(), args.to_vec()),
            }
        })
    }

    pub fn apply(&self, label: &str, args: &[i32]) -> (String, Vec<i32>) {
        (self.f)(label, args)
    }

    /// `other` after `self` (apply `self` first).
    pub fn then(&self, other: &AbstractionMap) -> AbstractionMap {
        let first = self.f.clone();
        let second = other.f.clone();
        AbstractionMap::from_fn(move |label, args| {
            let (l, a) = first(label, args);
            second(&l, &a)
        })
    }

    /// Image of `s` (from `from`) in `to`, without interning.
    pub fn map_statement(&self, from: &Registry, s: Statement, to: &Registry) -> Option<Statement> {
        let (l, a) = self.apply(from.label(s), from.args(s));
        to.lookup(&l, &a)
    }

    /// Image of `s`, interning into `to` as needed.
    pub fn intern_image(&self, from: &Registry, s: Statement, to: &mut Registry) -> Statement {
        let (l, a) = self.apply(from.label(s), from.args(s));
        to.intern(&l, &a)
    }
}

/// Wraps a base statement id as its context statement, interning on demand.
pub fn context_of(reg: &mut Registry, base: Statement) -> Statement {
    reg.intern("context", &[base.id() as i32])
}

/// Looks up the context statement for `base` without interning.
pub fn lookup_context(reg: &Registry, base: Statement) -> Option<Statement> {
    reg.lookup("context", &[base.id() as i32])
}

/// Builds the context problem of a grounded additive problem: all original
/// rules, a zero-weight axiom for `context(goal)`, and for each rule
/// `A_1..A_n -> C` and position `i` the rule
/// `context(C), A_1..A_{i-1}, A_{i+1}..A_n -> context(A_i)` at the same
/// weight. Solving it to closure yields the lightest context weight of every
/// statement.
pub fn context_problem(p: &Problem) -> Result<Problem> {
    let rules = p
        .rules()
        .ok_or_else(|| Error::InvalidProblem("context_problem requires a grounded problem".into()))?;
    let mut reg = p.registry().clone();
    let mut out = rules.to_vec();
    for rule in rules {
        if !rule.weight.is_additive() {
            return Err(Error::UnsupportedWeightFn(format!(
                "contexts are defined for additive rules only: {}",
                rule.display(p.registry())
            )));
        }
    }
    let goal_ctx = context_of(&mut reg, p.goal());
    out.push(Rule::axiom(goal_ctx, 0.0));
    for rule in rules {
        let v = rule.weight.additive_value().expect("checked additive");
        let ctx_c = context_of(&mut reg, rule.conclusion);
        for i in 0..rule.antecedents.len() {
            let mut ants = Vec::with_capacity(rule.arity());
            ants.push(ctx_c);
            for (j, &a) in rule.antecedents.iter().enumerate() {
                if j != i {
                    ants.push(a);
                }
            }
            let ctx_a = context_of(&mut reg, rule.antecedents[i]);
            let mut r = Rule::additive(ants, ctx_a, v);
            if rule.signed {
                r = r.signed();
            }
            if let Some(tag) = &rule.tag {
                r.tag = Some(tag.clone());
            }
            out.push(r);
        }
    }
    Problem::grounded(reg, out, p.goal())
}

/// Projects a grounded additive problem through an abstraction map: rules are
/// mapped statement-wise and deduplicated by (antecedents, conclusion),
/// keeping the minimum weight. The abstract goal is the image of the goal.
pub fn project(p: &Problem, m: &AbstractionMap) -> Result<Problem> {
    let rules = p
        .rules()
        .ok_or_else(|| Error::InvalidProblem("project requires a grounded problem".into()))?;
    let mut abs_reg = Registry::new();
    // register the image of every statement so lookups cover the full space
    for s in p.registry().statements() {
        m.intern_image(p.registry(), s, &mut abs_reg);
    }
    let mut dedup: indexmap::IndexMap<(Statement, Vec<Statement>), (f64, bool)> =
        indexmap::IndexMap::new();
    for rule in rules {
        let v = rule.weight.additive_value().ok_or_else(|| {
            Error::UnsupportedWeightFn(format!(
                "projection is defined for additive rules only: {}",
                rule.display(p.registry())
            ))
        })?;
        let concl = m.intern_image(p.registry(), rule.conclusion, &mut abs_reg);
        let ants: Vec<Statement> = rule
            .antecedents
            .iter()
            .map(|&a| m.intern_image(p.registry(), a, &mut abs_reg))
            .collect();
        let entry = dedup.entry((concl, ants)).or_insert((v, rule.signed));
        if v < entry.0 {
            entry.0 = v;
        }
        entry.1 |= rule.signed;
    }
    let abs_goal = m.intern_image(p.registry(), p.goal(), &mut abs_reg);
    let mut abs_rules = Vec::with_capacity(dedup.len());
    for ((concl, ants), (v, signed)) in dedup {
        let mut r = Rule::additive(ants, concl, v);
        if signed {
            r = r.signed();
        }
        abs_rules.push(r);
    }
    Problem::grounded(abs_reg, abs_rules, abs_goal)
}

/// Lightest abstract context weight per abstract statement; absent entries
/// mean `+inf` (the statement has no context, so concrete statements mapping
/// to it are prunable).
pub struct PatternDatabase {
    registry: Registry,
    goal: Statement,
    weights: Vec<f64>,
}

impl PatternDatabase {
    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn goal(&self) -> Statement {
        self.goal
    }

    /// Context weight of an abstract statement already interned in the
    /// database registry.
    pub fn weight(&self, s: Statement) -> f64 {
        self.weights.get(s.id()).copied().unwrap_or(f64::INFINITY)
    }

    pub fn lookup(&self, label: &str, args: &[i32]) -> f64 {
        match self.registry.lookup(label, args) {
            Some(s) => self.weight(s),
            None => f64::INFINITY,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (Statement, f64)> + '_ {
        self.registry
            .statements()
            .map(|s| (s, self.weight(s)))
            .filter(|(_, w)| w.is_finite())
    }

    /// Heuristic `h(C) = db[m(C)]`, `+inf` when absent.
    pub fn heuristic(self: &Arc<Self>, m: &AbstractionMap) -> Heuristic {
        self.heuristic_inner(m, false)
    }

    /// Like [`Self::heuristic`] but absent entries fall back to 0 instead of
    /// pruning; for deliberately partial maps.
    pub fn heuristic_zero_fallback(self: &Arc<Self>, m: &AbstractionMap) -> Heuristic {
        self.heuristic_inner(m, true)
    }

    fn heuristic_inner(self: &Arc<Self>, m: &AbstractionMap, zero_fallback: bool) -> Heuristic {
        let db = Arc::clone(self);
        let m = m.clone();
        Heuristic::from_fn(move |reg, s| {
            let (l, a) = m.apply(reg.label(s), reg.args(s));
            let w = db.lookup(&l, &a);
            if zero_fallback && w.is_infinite() {
                0.0
            } else {
                w
            }
        })
    }

    /// `pdb <abstract-statement> <weight>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, w) in self.entries() {
            out.push_str(&format!(
                "pdb {} {:?}\n",
                format_statement(&self.registry, s),
                w
            ));
        }
        out.push_str(&format!("pdb-goal {}\n", format_statement(&self.registry, self.goal)));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut registry = Registry::new();
        let mut entries = Vec::new();
        let mut goal = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Input(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix("pdb-goal ") {
                goal = Some(parse_statement(&mut registry, rest).map_err(|m| err(&m))?);
            } else if let Some(rest) = line.strip_prefix("pdb ") {
                let (stmt, w) = rest
                    .rsplit_once(' ')
                    .ok_or_else(|| err("expected `pdb <statement> <weight>`"))?;
                let s = parse_statement(&mut registry, stmt.trim()).map_err(|m| err(&m))?;
                let w: f64 = w.trim().parse().map_err(|_| err("bad weight"))?;
                entries.push((s, w));
            } else {
                return Err(err("unrecognized line"));
            }
        }
        let goal = goal.ok_or_else(|| Error::Input("missing pdb-goal line".into()))?;
        let mut weights = vec![f64::INFINITY; registry.len()];
        for (s, w) in entries {
            weights[s.id()] = w;
        }
        Ok(PatternDatabase {
            registry,
            goal,
            weights,
        })
    }
}

/// Computes the pattern database of a grounded additive problem: solves its
/// context problem to closure and extracts every lightest context weight.
///
/// Problems whose rules are all non-negative run KLD to closure, which also
/// handles cyclic rule sets. Problems containing signed rules are solved with
/// acyclic dynamic programming instead, since lazy-discard agenda execution
/// does not return lightest weights once superiority is lost.
pub fn build_pdb(p_abs: &Problem) -> Result<Arc<PatternDatabase>> {
    let ctx = context_problem(p_abs)?;
    let signed = p_abs
        .rules()
        .map(|rs| rs.iter().any(|r| r.signed))
        .unwrap_or(false);
    let sol = if signed {
        engine::dp_acyclic(&ctx)?
    } else {
        engine::kld_with(&ctx, &RunOptions::closure())?.0
    };
    let reg = p_abs.registry().clone();
    let mut weights = vec![f64::INFINITY; reg.len()];
    for s in reg.statements() {
        if let Some(ctx_s) = lookup_context(sol.registry(), s) {
            if let Some(w) = sol.weight_of(ctx_s) {
                weights[s.id()] = w;
            }
        }
    }
    debug_assert!(
        weights
            .get(p_abs.goal().id())
            .is_some_and(|w| *w == 0.0),
        "goal context weight must be zero"
    );
    Ok(Arc::new(PatternDatabase {
        registry: reg,
        goal: p_abs.goal(),
        weights,
    }))
}

/// One violation of the monotonicity condition
/// `w_i + h(A_i) <= g(w_1..w_n) + h(C)` at a derivable assignment.
#[derive(Debug, Clone)]
pub struct MonotoneViolation {
    pub rule: String,
    pub antecedent: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Report from [`check_monotone`].
#[derive(Debug, Default)]
pub struct MonotoneReport {
    pub violations: Vec<MonotoneViolation>,
    pub checked: usize,
}

impl MonotoneReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the monotonicity condition for `h` over derivable assignments of
/// `p`, obtained from a full closure run. `sample_budget` caps the number of
/// rule instances inspected; `None` checks every instance found.
pub fn check_monotone(
    p: &Problem,
    h: &Heuristic,
    sample_budget: Option<usize>,
) -> Result<MonotoneReport> {
    let opts = RunOptions {
        stop: crate::engine::StopCondition::QueueEmpty,
        assert_monotone: false,
        ..Default::default()
    };
    let (sol, _) = engine::kld_with(p, &opts)?;
    let mut report = MonotoneReport::default();
    let budget = sample_budget.unwrap_or(usize::MAX);

    let check = |rule: &Rule, reg: &Registry, sol: &SolutionSet, report: &mut MonotoneReport| {
        if rule.is_axiom() {
            return;
        }
        let mut ws = Vec::with_capacity(rule.arity());
        for a in &rule.antecedents {
            match sol.weight_of(*a) {
                Some(w) => ws.push(w),
                None => return,
            }
        }
        let w_c = rule.weight.eval(&ws);
        let h_c = h.eval(reg, rule.conclusion);
        report.checked += 1;
        for (i, &a) in rule.antecedents.iter().enumerate() {
            let lhs = ws[i] + h.eval(reg, a);
            let rhs = w_c + h_c;
            if lhs > rhs + 1e-9 {
                report.violations.push(MonotoneViolation {
                    rule: rule.display(reg),
                    antecedent: i,
                    lhs,
                    rhs,
                });
            }
        }
    };

    if let Some(rules) = p.rules() {
        for rule in rules {
            if report.checked >= budget {
                break;
            }
            check(rule, sol.registry(), &sol, &mut report);
        }
    } else {
        // regenerate instances against the final solution set; an instance
        // reappears once per expanded antecedent, so dedupe by signature
        let expander = p.expander().expect("implicit problem").clone();
        let mut sol = sol;
        let mut seen: std::collections::HashSet<(Statement, Vec<Statement>, u64)> =
            Default::default();
        let expanded: Vec<Statement> = sol.expansion_order().to_vec();
        let mut index = crate::problem::SecondaryIndex::new(p.index_specs());
        for &s in &expanded {
            index.add(sol.registry(), s);
        }
        let mut instances = Vec::new();
        for &s in &expanded {
            let mut raw = Vec::new();
            {
                let (reg, weights) = sol.registry_and_weights_mut();
                let mut q = Query {
                    reg,
                    weights,
                    index: Some(&index),
                };
                expander.consequences(s, &mut q, &mut |r| raw.push(r));
            }
            for rule in raw {
                let key = (
                    rule.conclusion,
                    rule.antecedents.clone(),
                    rule.weight.additive_value().map(f64::to_bits).unwrap_or(0),
                );
                if seen.insert(key) {
                    instances.push(rule);
                }
            }
        }
        for rule in &instances {
            if report.checked >= budget {
                break;
            }
            check(rule, sol.registry(), &sol, &mut report);
        }
    }
    Ok(report)
}
