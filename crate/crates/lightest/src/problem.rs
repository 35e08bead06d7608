//! Lightest derivation problems: grounded rule lists and implicit
//! generator-backed rule sets behind one interface.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rule::{Rule, WeightFn};
use crate::solution::Weights;
use crate::statement::{Registry, Statement};

/// Generator callback interface for implicit problems.
///
/// `consequences` must emit every rule instance that has `just_expanded`
/// among its antecedents and all antecedents already weighted (the statement
/// being expanded counts as weighted). Under that contract each instance is
/// emitted exactly once per run, when its last antecedent is expanded.
///
/// `producers` is the reverse direction: every instance concluding a given
/// statement whose antecedents are all weighted. Only hierarchical search
/// needs it, so it is optional.
pub trait Expander: Send + Sync {
    fn consequences(&self, just_expanded: Statement, q: &mut Query<'_>, emit: &mut dyn FnMut(Rule));

    fn producers(&self, _conclusion: Statement, _q: &mut Query<'_>, _emit: &mut dyn FnMut(Rule)) {}

    fn supports_producers(&self) -> bool {
        false
    }
}

/// Secondary-index declaration for an implicit problem: maps a statement to
/// the integer keys it should be filed under. The engine feeds every expanded
/// statement through each spec; expanders query the buckets via
/// [`Query::indexed`].
pub type IndexKeysFn = Arc<dyn Fn(&Registry, Statement) -> Vec<i64> + Send + Sync>;

#[derive(Clone)]
pub struct IndexSpec {
    pub name: &'static str,
    keys: IndexKeysFn,
}

impl IndexSpec {
    pub fn new(
        name: &'static str,
        keys: impl Fn(&Registry, Statement) -> Vec<i64> + Send + Sync + 'static,
    ) -> Self {
        IndexSpec {
            name,
            keys: Arc::new(keys),
        }
    }
}

#[derive(Default)]
pub(crate) struct SecondaryIndex {
    specs: Vec<IndexSpec>,
    buckets: Vec<std::collections::HashMap<i64, Vec<Statement>>>,
}

impl SecondaryIndex {
    pub fn new(specs: &[IndexSpec]) -> Self {
        SecondaryIndex {
            specs: specs.to_vec(),
            buckets: vec![Default::default(); specs.len()],
        }
    }

    pub fn add(&mut self, reg: &Registry, s: Statement) {
        for (spec, bucket) in self.specs.iter().zip(self.buckets.iter_mut()) {
            for key in (spec.keys)(reg, s) {
                bucket.entry(key).or_default().push(s);
            }
        }
    }

    pub fn scan(&self, name: &str, key: i64) -> &[Statement] {
        for (spec, bucket) in self.specs.iter().zip(self.buckets.iter()) {
            if spec.name == name {
                return bucket.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            }
        }
        &[]
    }
}

/// Read view handed to expanders: weights of already-expanded statements,
/// interning for new conclusions, and the declared secondary indexes.
pub struct Query<'a> {
    pub(crate) reg: &'a mut Registry,
    pub(crate) weights: &'a Weights,
    pub(crate) index: Option<&'a SecondaryIndex>,
}

impl Query<'_> {
    pub fn intern(&mut self, label: &str, args: &[i32]) -> Statement {
        self.reg.intern(label, args)
    }

    pub fn lookup(&self, label: &str, args: &[i32]) -> Option<Statement> {
        self.reg.lookup(label, args)
    }

    pub fn weight_of(&self, s: Statement) -> Option<f64> {
        self.weights.get(s)
    }

    pub fn label(&self, s: Statement) -> &str {
        self.reg.label(s)
    }

    pub fn args(&self, s: Statement) -> &[i32] {
        self.reg.args(s)
    }

    /// Expanded statements filed under `key` in the named index.
    pub fn indexed(&self, name: &str, key: i64) -> &[Statement] {
        self.index.map(|i| i.scan(name, key)).unwrap_or(&[])
    }
}

pub(crate) struct Grounded {
    pub rules: Vec<Rule>,
    pub axioms: Vec<u32>,
    pub by_antecedent: Vec<Vec<u32>>,
    pub by_conclusion: Vec<Vec<u32>>,
}

pub(crate) struct Implicit {
    pub axioms: Vec<Rule>,
    pub expander: Arc<dyn Expander>,
    pub indexes: Vec<IndexSpec>,
}

pub(crate) enum Kind {
    Grounded(Grounded),
    Implicit(Implicit),
}

/// A lightest derivation problem: a statement registry, a goal, and a rule
/// source that is either a finite rule list or an implicit generator.
pub struct Problem {
    registry: Registry,
    goal: Statement,
    pub(crate) kind: Kind,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("statements", &self.registry.len())
            .field("goal", &self.registry.display(self.goal))
            .field("grounded", &self.is_grounded())
            .finish()
    }
}

impl Problem {
    pub fn grounded(registry: Registry, rules: Vec<Rule>, goal: Statement) -> Result<Self> {
        if !registry.contains(goal) {
            return Err(Error::InvalidProblem("goal is not registered".into()));
        }
        let n = registry.len();
        let mut axioms = Vec::new();
        let mut by_antecedent = vec![Vec::new(); n];
        let mut by_conclusion = vec![Vec::new(); n];
        for (i, rule) in rules.iter().enumerate() {
            if !registry.contains(rule.conclusion)
                || rule.antecedents.iter().any(|a| !registry.contains(*a))
            {
                return Err(Error::InvalidProblem(format!(
                    "rule {i} references an unregistered statement"
                )));
            }
            by_conclusion[rule.conclusion.id()].push(i as u32);
            if rule.is_axiom() {
                axioms.push(i as u32);
            } else {
                // one entry per distinct antecedent, so repeated antecedents
                // trigger a single emission
                let mut seen: Vec<Statement> = Vec::new();
                for &a in &rule.antecedents {
                    if !seen.contains(&a) {
                        by_antecedent[a.id()].push(i as u32);
                        seen.push(a);
                    }
                }
            }
        }
        Ok(Problem {
            registry,
            goal,
            kind: Kind::Grounded(Grounded {
                rules,
                axioms,
                by_antecedent,
                by_conclusion,
            }),
        })
    }

    pub fn implicit(
        registry: Registry,
        axioms: Vec<Rule>,
        goal: Statement,
        expander: Arc<dyn Expander>,
    ) -> Result<Self> {
        Self::implicit_indexed(registry, axioms, goal, expander, Vec::new())
    }

    pub fn implicit_indexed(
        registry: Registry,
        axioms: Vec<Rule>,
        goal: Statement,
        expander: Arc<dyn Expander>,
        indexes: Vec<IndexSpec>,
    ) -> Result<Self> {
        if !registry.contains(goal) {
            return Err(Error::InvalidProblem("goal is not registered".into()));
        }
        if let Some(r) = axioms.iter().find(|r| !r.is_axiom()) {
            return Err(Error::InvalidProblem(format!(
                "axiom list contains a rule with antecedents: {}",
                r.display(&registry)
            )));
        }
        Ok(Problem {
            registry,
            goal,
            kind: Kind::Implicit(Implicit {
                axioms,
                expander,
                indexes,
            }),
        })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn goal(&self) -> Statement {
        self.goal
    }

    pub fn is_grounded(&self) -> bool {
        matches!(self.kind, Kind::Grounded(_))
    }

    /// Rule list of a grounded problem.
    pub fn rules(&self) -> Option<&[Rule]> {
        match &self.kind {
            Kind::Grounded(g) => Some(&g.rules),
            Kind::Implicit(_) => None,
        }
    }

    /// Axiom rules (no antecedents), for either kind.
    pub fn axioms(&self) -> Vec<Rule> {
        match &self.kind {
            Kind::Grounded(g) => g.axioms.iter().map(|&i| g.rules[i as usize].clone()).collect(),
            Kind::Implicit(i) => i.axioms.clone(),
        }
    }

    pub(crate) fn index_specs(&self) -> &[IndexSpec] {
        match &self.kind {
            Kind::Grounded(_) => &[],
            Kind::Implicit(i) => &i.indexes,
        }
    }

    pub(crate) fn expander(&self) -> Option<&Arc<dyn Expander>> {
        match &self.kind {
            Kind::Grounded(_) => None,
            Kind::Implicit(i) => Some(&i.expander),
        }
    }

    pub fn supports_producers(&self) -> bool {
        match &self.kind {
            Kind::Grounded(_) => true,
            Kind::Implicit(i) => i.expander.supports_producers(),
        }
    }

    /// Whether any rule visible without a run carries a signed flag. For
    /// implicit problems this inspects the axioms only; constructors of
    /// signed implicit problems should mark their axioms or be handled by
    /// the caller.
    pub fn has_signed_axioms(&self) -> bool {
        match &self.kind {
            Kind::Grounded(g) => g.rules.iter().any(|r| r.signed),
            Kind::Implicit(i) => i.axioms.iter().any(|r| r.signed),
        }
    }

    /// Report-only sanity checks: sampled monotonicity of general weight
    /// functions and negative additive weights on unflagged rules.
    ///
    /// Grounded problems are checked rule by rule. Implicit problems are
    /// checked over their axioms plus the instances discovered by a closure
    /// bounded to `samples` statements.
    pub fn validate(&self, samples: usize) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut check_rule = |rule: &Rule, reg: &Registry, rng: &mut u64| match &rule.weight {
            WeightFn::Additive(v) => {
                if *v < 0.0 && !rule.signed {
                    report.issues.push(format!(
                        "negative additive weight on unflagged rule: {}",
                        rule.display(reg)
                    ));
                }
            }
            WeightFn::General(g) => {
                let n = rule.arity();
                if n == 0 {
                    return;
                }
                for _ in 0..samples.clamp(1, 64) {
                    let mut ws: Vec<f64> = (0..n).map(|_| next_uniform(rng) * 10.0).collect();
                    let base = g(&ws);
                    for i in 0..n {
                        let saved = ws[i];
                        ws[i] = saved + 1.0 + next_uniform(rng) * 4.0;
                        let raised = g(&ws);
                        ws[i] = saved;
                        if raised < base - 1e-9 {
                            report.issues.push(format!(
                                "general weight function decreases in argument {i}: {}",
                                rule.display(reg)
                            ));
                            return;
                        }
                    }
                }
            }
        };
        let mut rng = 0x9e3779b97f4a7c15u64;
        match &self.kind {
            Kind::Grounded(g) => {
                for rule in &g.rules {
                    check_rule(rule, &self.registry, &mut rng);
                }
            }
            Kind::Implicit(i) => {
                for rule in &i.axioms {
                    check_rule(rule, &self.registry, &mut rng);
                }
                if let Ok(grounded) = self.ground(samples.max(16)) {
                    let reg = grounded.registry();
                    for rule in grounded.rules().unwrap_or(&[]) {
                        if !rule.is_axiom() {
                            check_rule(rule, reg, &mut rng);
                        }
                    }
                }
            }
        }
        report
    }

    /// Materializes an implicit problem by forward closure from its axioms,
    /// collecting every reachable rule instance. Fails with a budget error if
    /// the closure reaches more than `statement_budget` statements.
    pub fn ground(&self, statement_budget: usize) -> Result<Problem> {
        if self.is_grounded() {
            return Err(Error::InvalidProblem(
                "ground() expects an implicit problem".into(),
            ));
        }
        let (registry, rules) = crate::engine::closure_rules(self, statement_budget)?;
        Problem::grounded(registry, rules, self.goal)
    }

    /// Line-oriented text form of a grounded problem:
    /// `goal <stmt>` then one `rule <w> <concl> <- <ants...>` per rule.
    /// Negative weights round-trip as signed rules. General weight functions
    /// are not serializable.
    pub fn to_text(&self) -> Result<String> {
        let rules = self
            .rules()
            .ok_or_else(|| Error::InvalidProblem("only grounded problems serialize".into()))?;
        let mut out = String::new();
        out.push_str(&format!("goal {}\n", format_statement(&self.registry, self.goal)));
        for rule in rules {
            let v = rule.weight.additive_value().ok_or_else(|| {
                Error::UnsupportedWeightFn("general weight functions are not serializable".into())
            })?;
            out.push_str(&format!("rule {} {} <-", v, format_statement(&self.registry, rule.conclusion)));
            for a in &rule.antecedents {
                out.push(' ');
                out.push_str(&format_statement(&self.registry, *a));
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Problem> {
        let mut registry = Registry::new();
        let mut goal = None;
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Input(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix("goal ") {
                goal = Some(parse_statement(&mut registry, rest.trim()).map_err(|m| err(&m))?);
            } else if let Some(rest) = line.strip_prefix("rule ") {
                let (w_str, rest) = rest
                    .trim()
                    .split_once(' ')
                    .ok_or_else(|| err("expected `rule <w> <concl> <- ...`"))?;
                let w: f64 = w_str.parse().map_err(|_| err("bad weight"))?;
                let (concl_str, ants_str) = rest
                    .split_once("<-")
                    .ok_or_else(|| err("missing `<-`"))?;
                let conclusion =
                    parse_statement(&mut registry, concl_str.trim()).map_err(|m| err(&m))?;
                let mut antecedents = Vec::new();
                for tok in ants_str.split_whitespace() {
                    antecedents.push(parse_statement(&mut registry, tok).map_err(|m| err(&m))?);
                }
                let mut rule = Rule::try_new(antecedents, conclusion, WeightFn::Additive(w))?;
                if w < 0.0 {
                    rule = rule.signed();
                }
                rules.push(rule);
            } else {
                return Err(err("unrecognized line"));
            }
        }
        let goal = goal.ok_or_else(|| Error::Input("missing goal line".into()))?;
        Problem::grounded(registry, rules, goal)
    }
}

pub(crate) fn format_statement(reg: &Registry, s: Statement) -> String {
    let label = reg.label(s);
    let args = reg.args(s);
    if args.is_empty() {
        label.to_string()
    } else {
        let parts: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        format!("{}({})", label, parts.join(","))
    }
}

pub(crate) fn parse_statement(
    reg: &mut Registry,
    tok: &str,
) -> std::result::Result<Statement, String> {
    let tok = tok.trim();
    if tok.is_empty() {
        return Err("empty statement".into());
    }
    match tok.split_once('(') {
        None => Ok(reg.intern(tok, &[])),
        Some((label, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("unbalanced parens in `{tok}`"))?;
            let mut args = Vec::new();
            if !inner.trim().is_empty() {
                for part in inner.split(',') {
                    args.push(
                        part.trim()
                            .parse::<i32>()
                            .map_err(|_| format!("bad argument `{part}` in `{tok}`"))?,
                    );
                }
            }
            if label.is_empty() {
                return Err(format!("empty label in `{tok}`"));
            }
            Ok(reg.intern(label, &args))
        }
    }
}

fn next_uniform(state: &mut u64) -> f64 {
    // splitmix64 step
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Report from [`Problem::validate`].
#[derive(Default, Debug)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_problem() -> Problem {
        // s --1--> a --2--> b plus a direct s --5--> b edge
        let mut reg = Registry::new();
        let s = reg.intern("path", &[0]);
        let a = reg.intern("path", &[1]);
        let b = reg.intern("path", &[2]);
        let rules = vec![
            Rule::axiom(s, 0.0),
            Rule::additive(vec![s], a, 1.0),
            Rule::additive(vec![s], b, 5.0),
            Rule::additive(vec![a], b, 2.0),
        ];
        Problem::grounded(reg, rules, b).unwrap()
    }

    #[test]
    fn grounded_problem_indexes_rules() {
        let p = chain_problem();
        assert!(p.is_grounded());
        assert_eq!(p.axioms().len(), 1);
        assert_eq!(p.rules().unwrap().len(), 4);
    }

    #[test]
    fn unregistered_goal_is_rejected() {
        let mut reg = Registry::new();
        let s = reg.intern("s", &[]);
        let mut other = Registry::new();
        other.intern("s", &[]);
        let foreign = other.intern("t", &[]);
        assert!(Problem::grounded(reg.clone(), vec![Rule::axiom(s, 0.0)], foreign).is_err());
    }

    #[test]
    fn validate_flags_negative_unflagged_weights() {
        let mut reg = Registry::new();
        let s = reg.intern("s", &[]);
        let p = Problem::grounded(reg, vec![Rule::axiom(s, -1.0)], s).unwrap();
        assert!(!p.validate(8).is_clean());
    }

    #[test]
    fn validate_accepts_signed_negative_weights() {
        // a saliency-style goal rule with a negative constant, flagged signed
        let mut reg = Registry::new();
        let c = reg.intern("curve", &[0]);
        let goal = reg.intern("goal", &[]);
        let rules = vec![
            Rule::axiom(c, 3.0),
            Rule::additive(vec![c], goal, -2.0).signed(),
        ];
        let p = Problem::grounded(reg, rules, goal).unwrap();
        assert!(p.validate(8).is_clean());
    }

    #[test]
    fn validate_flags_decreasing_general_functions() {
        let mut reg = Registry::new();
        let a = reg.intern("a", &[]);
        let c = reg.intern("c", &[]);
        let rules = vec![
            Rule::axiom(a, 1.0),
            Rule::new(
                vec![a],
                c,
                WeightFn::General(std::sync::Arc::new(|ws: &[f64]| -ws[0])),
            ),
        ];
        let p = Problem::grounded(reg, rules, c).unwrap();
        let report = p.validate(16);
        assert_eq!(report.issues.len(), 1);
    }

    #[test]
    fn validate_passes_clean_additive_problem() {
        assert!(chain_problem().validate(8).is_clean());
    }

    #[test]
    fn text_round_trip_preserves_rules() {
        let p = chain_problem();
        let text = p.to_text().unwrap();
        let q = Problem::from_text(&text).unwrap();
        assert_eq!(q.rules().unwrap().len(), 4);
        assert_eq!(q.to_text().unwrap(), text);
        assert_eq!(
            q.registry().display(q.goal()),
            p.registry().display(p.goal())
        );
    }

    #[test]
    fn text_round_trip_keeps_signed_flags() {
        let mut reg = Registry::new();
        let c = reg.intern("c", &[]);
        let goal = reg.intern("goal", &[]);
        let rules = vec![
            Rule::axiom(c, 1.0),
            Rule::additive(vec![c], goal, -4.0).signed(),
        ];
        let p = Problem::grounded(reg, rules, goal).unwrap();
        let q = Problem::from_text(&p.to_text().unwrap()).unwrap();
        assert!(q.rules().unwrap()[1].signed);
    }

    #[test]
    fn malformed_text_is_reported_with_line() {
        let err = Problem::from_text("goal g\nrule x g <-").unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }
}
