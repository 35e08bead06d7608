//! Hierarchical A* lightest derivation (HA*LD): derivations and contexts of
//! every level of an abstraction hierarchy computed on one shared agenda.
//!
//! The hierarchy is a sequence of additive problems linked by onto
//! abstraction maps and topped by a single bottom statement. Derivations of a
//! statement are queued at a priority that includes the lightest context of
//! its abstraction, so they stall until that abstract context exists; context
//! computation at a level starts once the level's goal is derived. Rules:
//!
//! - START: seed the bottom derivation and context at priority 0.
//! - UP: `context(abs(C)), A_1..A_n -> C` at weight `v + sum(w)` and priority
//!   `weight + w_ctx`.
//! - BASE: once `goal_k = w` is expanded, queue `context(goal_k) = 0` at
//!   priority `w`.
//! - DOWN: `context(C), A_1..A_n -> context(A_i)` at weight
//!   `v + w_ctx + sum(w) - w_i` and priority `weight + w_i`.

use std::collections::HashMap;

use crate::abstraction::{context_problem, lookup_context, AbstractionMap};
use crate::derivation::Derivation;
use crate::engine::{self, drive, Queued, RunCore, RunOptions, RunStats, Source};
use crate::error::{Error, Result};
use crate::problem::{Kind, Problem, Query, SecondaryIndex};
use crate::rule::{Rule, WeightFn};
use crate::solution::{SolutionSet, Weights};
use crate::statement::{Registry, Statement};

const DERIV_LABEL: &str = "d";
const CTX_LABEL: &str = "c";

/// An abstraction hierarchy: `m` additive problems (level 0 is the concrete
/// one) and `m - 1` maps linking consecutive levels. The topmost map, from
/// level `m - 1` to the single bottom statement, is implicit.
pub struct Hierarchy {
    levels: Vec<Problem>,
    maps: Vec<AbstractionMap>,
}

impl std::fmt::Debug for Hierarchy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hierarchy")
            .field("levels", &self.levels.len())
            .finish()
    }
}

impl Hierarchy {
    pub fn new(levels: Vec<Problem>, maps: Vec<AbstractionMap>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidHierarchy("no levels".into()));
        }
        if maps.len() + 1 != levels.len() {
            return Err(Error::InvalidHierarchy(format!(
                "{} levels need {} maps, got {}",
                levels.len(),
                levels.len() - 1,
                maps.len()
            )));
        }
        for k in 0..maps.len() {
            let img = maps[k].map_statement(
                levels[k].registry(),
                levels[k].goal(),
                levels[k + 1].registry(),
            );
            if img != Some(levels[k + 1].goal()) {
                return Err(Error::InvalidHierarchy(format!(
                    "goal of level {} is not the image of level {}'s goal",
                    k + 1,
                    k
                )));
            }
        }
        Ok(Hierarchy { levels, maps })
    }

    /// Number of problem levels (the bottom statement is level `len()`).
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Problem] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Problem {
        &self.levels[k]
    }

    pub fn maps(&self) -> &[AbstractionMap] {
        &self.maps
    }

    /// Map composed from level 0 up to level `k`.
    pub fn map_to_level(&self, k: usize) -> AbstractionMap {
        let mut m = AbstractionMap::identity();
        for step in &self.maps[..k] {
            m = m.then(step);
        }
        m
    }

    /// Report-only validation: every rule of level `k` must have a
    /// counterpart at level `k+1` of no greater weight, maps must be onto,
    /// and all rules must be additive. Implicit levels are grounded with
    /// `ground_budget` first; levels that exceed it are noted and skipped.
    pub fn validate(&self, ground_budget: usize) -> HierarchyReport {
        let mut report = HierarchyReport::default();
        let m = self.levels.len();
        let mut grounded: Vec<Option<Problem>> = Vec::new();
        for (k, level) in self.levels.iter().enumerate() {
            if level.is_grounded() {
                grounded.push(None);
            } else {
                match level.ground(ground_budget) {
                    Ok(g) => grounded.push(Some(g)),
                    Err(_) => {
                        report
                            .issues
                            .push(format!("level {k}: not validated (grounding budget exceeded)"));
                        grounded.push(None);
                    }
                }
            }
        }
        let resolve = |k: usize| -> Option<&Problem> {
            if self.levels[k].is_grounded() {
                Some(&self.levels[k])
            } else {
                grounded[k].as_ref()
            }
        };
        for k in 0..m {
            let Some(cur) = resolve(k) else { continue };
            for rule in cur.rules().unwrap_or(&[]) {
                if !rule.weight.is_additive() {
                    report.issues.push(format!(
                        "level {k}: non-additive rule {}",
                        rule.display(cur.registry())
                    ));
                }
            }
            if k + 1 >= m {
                continue; // the bottom level has no rules to match
            }
            let Some(abs) = resolve(k + 1) else { continue };
            // index abstract rules by signature, keeping the minimum weight
            let mut table: HashMap<(Statement, Vec<Statement>), f64> = HashMap::new();
            for rule in abs.rules().unwrap_or(&[]) {
                if let Some(v) = rule.weight.additive_value() {
                    let key = (rule.conclusion, rule.antecedents.clone());
                    let e = table.entry(key).or_insert(f64::INFINITY);
                    *e = e.min(v);
                }
            }
            for rule in cur.rules().unwrap_or(&[]) {
                let Some(v) = rule.weight.additive_value() else { continue };
                let concl = self.maps[k].map_statement(cur.registry(), rule.conclusion, abs.registry());
                let ants: Option<Vec<Statement>> = rule
                    .antecedents
                    .iter()
                    .map(|&a| self.maps[k].map_statement(cur.registry(), a, abs.registry()))
                    .collect();
                let found = match (concl, ants) {
                    (Some(c), Some(a)) => table.get(&(c, a)).copied(),
                    _ => None,
                };
                match found {
                    None => report.issues.push(format!(
                        "level {k}: rule {} has no abstract counterpart",
                        rule.display(cur.registry())
                    )),
                    Some(v_abs) if v_abs > v + 1e-9 => report.issues.push(format!(
                        "level {k}: rule {} has counterpart weight {v_abs} > {v}",
                        rule.display(cur.registry())
                    )),
                    Some(_) => {}
                }
            }
            // onto check only when both statement spaces were given explicitly
            if self.levels[k].is_grounded() && self.levels[k + 1].is_grounded() {
                let mut covered = vec![false; abs.registry().len()];
                for s in cur.registry().statements() {
                    if let Some(img) =
                        self.maps[k].map_statement(cur.registry(), s, abs.registry())
                    {
                        covered[img.id()] = true;
                    }
                }
                for s in abs.registry().statements() {
                    if !covered[s.id()] {
                        report.issues.push(format!(
                            "level {k}: map is not onto, {} has no preimage",
                            abs.registry().display(s)
                        ));
                    }
                }
            }
        }
        report
    }
}

#[derive(Default, Debug)]
pub struct HierarchyReport {
    pub issues: Vec<String>,
}

impl HierarchyReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Decoded generalized statement: a derivation or context statement of one
/// level, or the bottom statement at level `m`.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct GenStatement {
    pub level: usize,
    pub is_context: bool,
    /// Base statement in the level's registry; `None` at the bottom level.
    pub base: Option<Statement>,
}

struct Pending {
    rule: Rule,
    weight: f64,
}

struct LevelRun {
    reg: Registry,
    weights: Weights,
    ctx_weights: Weights,
    index: SecondaryIndex,
    /// UP instances (and axioms) waiting for the context of their
    /// conclusion's abstraction, keyed by abstract statement id at the level
    /// above (0 for the bottom).
    stalled: HashMap<u32, Vec<Pending>>,
    goal: Statement,
}

struct HaldSource<'h> {
    hier: &'h Hierarchy,
    levels: Vec<LevelRun>,
    base_reg: Registry,
    g_goal: Statement,
    bottom_ctx: Option<f64>,
    m: usize,
}

fn g_key(kind: &str, level: usize, id: usize) -> (String, [i32; 2]) {
    (kind.to_string(), [level as i32, id as i32])
}

fn g_intern(reg: &mut Registry, kind: &str, level: usize, id: usize) -> Statement {
    let (label, args) = g_key(kind, level, id);
    reg.intern(&label, &args)
}

fn g_decode(reg: &Registry, s: Statement) -> GenStatement {
    let label = reg.label(s);
    let args = reg.args(s);
    GenStatement {
        level: args[0] as usize,
        is_context: label == CTX_LABEL,
        base: Some(Statement::from_id(args[1] as usize)),
    }
}

impl<'h> HaldSource<'h> {
    fn new(hier: &'h Hierarchy) -> Result<Self> {
        let m = hier.len();
        let mut levels: Vec<LevelRun> = hier
            .levels()
            .iter()
            .map(|p| LevelRun {
                reg: p.registry().clone(),
                weights: Weights::with_capacity(p.registry().len()),
                ctx_weights: Weights::with_capacity(p.registry().len()),
                index: SecondaryIndex::new(p.index_specs()),
                stalled: HashMap::new(),
                goal: p.goal(),
            })
            .collect();
        // stall every axiom on the context of its conclusion's abstraction
        for k in 0..m {
            for axiom in hier.level(k).axioms() {
                let w = axiom.weight.eval(&[]);
                let key = if k + 1 < m {
                    let (left, right) = levels.split_at_mut(k + 1);
                    hier.maps()[k]
                        .intern_image(&left[k].reg, axiom.conclusion, &mut right[0].reg)
                        .id() as u32
                } else {
                    0
                };
                levels[k]
                    .stalled
                    .entry(key)
                    .or_default()
                    .push(Pending { rule: axiom, weight: w });
            }
        }
        let mut base_reg = Registry::new();
        let goal0 = hier.level(0).goal();
        let g_goal = g_intern(&mut base_reg, DERIV_LABEL, 0, goal0.id());
        g_intern(&mut base_reg, DERIV_LABEL, m, 0);
        g_intern(&mut base_reg, CTX_LABEL, m, 0);
        Ok(HaldSource {
            hier,
            levels,
            base_reg,
            g_goal,
            bottom_ctx: None,
            m,
        })
    }

    /// Abstract statement id of `concl` one level up; 0 at the bottom.
    fn abs_id(&mut self, k: usize, concl: Statement) -> u32 {
        if k + 1 >= self.m {
            return 0;
        }
        let (left, right) = self.levels.split_at_mut(k + 1);
        self.hier.maps()[k]
            .intern_image(&left[k].reg, concl, &mut right[0].reg)
            .id() as u32
    }

    fn ctx_weight_above(&mut self, k: usize, abs_id: u32) -> Option<f64> {
        if k + 1 >= self.m {
            self.bottom_ctx
        } else {
            self.levels[k + 1]
                .ctx_weights
                .get(Statement::from_id(abs_id as usize))
        }
    }

    fn up_queued(
        &mut self,
        k: usize,
        inst: Rule,
        w_inst: f64,
        abs_id: u32,
        wc: f64,
        core: &mut RunCore,
    ) -> Queued {
        let mut ants = Vec::with_capacity(inst.arity() + 1);
        ants.push(g_intern(&mut core.reg, CTX_LABEL, k + 1, abs_id as usize));
        for &a in &inst.antecedents {
            ants.push(g_intern(&mut core.reg, DERIV_LABEL, k, a.id()));
        }
        let conclusion = g_intern(&mut core.reg, DERIV_LABEL, k, inst.conclusion.id());
        // built literally: generalized UP rules carry one antecedent more
        // than the base rule arity bound
        let rule = Rule {
            antecedents: ants,
            conclusion,
            weight: inst.weight,
            signed: inst.signed,
            tag: inst.tag,
        };
        Queued {
            rule,
            weight: w_inst,
            priority: w_inst + wc,
        }
    }

    fn schedule_up(
        &mut self,
        k: usize,
        inst: Rule,
        w_inst: f64,
        core: &mut RunCore,
        out: &mut Vec<Queued>,
    ) {
        let abs_id = self.abs_id(k, inst.conclusion);
        match self.ctx_weight_above(k, abs_id) {
            Some(wc) => {
                let q = self.up_queued(k, inst, w_inst, abs_id, wc, core);
                out.push(q);
            }
            None => {
                self.levels[k]
                    .stalled
                    .entry(abs_id)
                    .or_default()
                    .push(Pending { rule: inst, weight: w_inst });
            }
        }
    }

    fn release(&mut self, k: usize, abs_id: u32, wc: f64, core: &mut RunCore, out: &mut Vec<Queued>) {
        if let Some(pending) = self.levels[k].stalled.remove(&abs_id) {
            for p in pending {
                let q = self.up_queued(k, p.rule, p.weight, abs_id, wc, core);
                out.push(q);
            }
        }
    }

    fn schedule_down(
        &mut self,
        k: usize,
        inst: &Rule,
        ws: &[f64],
        wc: f64,
        core: &mut RunCore,
        out: &mut Vec<Queued>,
    ) -> Result<()> {
        let v = inst.weight.additive_value().ok_or_else(|| {
            Error::InvalidHierarchy("hierarchies require additive rules".into())
        })?;
        let ctx_c = g_intern(&mut core.reg, CTX_LABEL, k, inst.conclusion.id());
        for i in 0..inst.arity() {
            // fold order matches the context problem's rules:
            // v, then context(C), then the remaining antecedents in order
            let mut w_down = v + wc;
            for (j, wj) in ws.iter().enumerate() {
                if j != i {
                    w_down += wj;
                }
            }
            let mut ants = Vec::with_capacity(inst.arity());
            ants.push(ctx_c);
            for (j, &a) in inst.antecedents.iter().enumerate() {
                if j != i {
                    ants.push(g_intern(&mut core.reg, DERIV_LABEL, k, a.id()));
                }
            }
            let conclusion =
                g_intern(&mut core.reg, CTX_LABEL, k, inst.antecedents[i].id());
            let rule = Rule {
                antecedents: ants,
                conclusion,
                weight: WeightFn::Additive(v),
                signed: inst.signed,
                tag: inst.tag.clone(),
            };
            out.push(Queued {
                rule,
                weight: w_down,
                priority: w_down + ws[i],
            });
        }
        Ok(())
    }

    /// Rule instances of level `k` with `s` among the antecedents and every
    /// antecedent weighted.
    fn instances_using(&mut self, k: usize, s: Statement) -> Vec<Rule> {
        let mut insts = Vec::new();
        match &self.hier.level(k).kind {
            Kind::Grounded(g) => {
                let lw = &self.levels[k].weights;
                if s.id() < g.by_antecedent.len() {
                    for &ri in &g.by_antecedent[s.id()] {
                        let rule = &g.rules[ri as usize];
                        if rule.antecedents.iter().all(|a| lw.contains(*a)) {
                            insts.push(rule.clone());
                        }
                    }
                }
            }
            Kind::Implicit(imp) => {
                let level = &mut self.levels[k];
                let mut q = Query {
                    reg: &mut level.reg,
                    weights: &level.weights,
                    index: Some(&level.index),
                };
                imp.expander.consequences(s, &mut q, &mut |r| insts.push(r));
            }
        }
        insts
    }

    /// Rule instances of level `k` concluding `s` with every antecedent
    /// weighted.
    fn instances_concluding(&mut self, k: usize, s: Statement) -> Vec<Rule> {
        let mut insts = Vec::new();
        match &self.hier.level(k).kind {
            Kind::Grounded(g) => {
                let lw = &self.levels[k].weights;
                if s.id() < g.by_conclusion.len() {
                    for &ri in &g.by_conclusion[s.id()] {
                        let rule = &g.rules[ri as usize];
                        if rule.antecedents.iter().all(|a| lw.contains(*a)) {
                            insts.push(rule.clone());
                        }
                    }
                }
            }
            Kind::Implicit(imp) => {
                let level = &mut self.levels[k];
                let mut q = Query {
                    reg: &mut level.reg,
                    weights: &level.weights,
                    index: Some(&level.index),
                };
                imp.expander.producers(s, &mut q, &mut |r| insts.push(r));
            }
        }
        insts
    }

    fn antecedent_weights(&self, k: usize, inst: &Rule) -> Option<Vec<f64>> {
        let lw = &self.levels[k].weights;
        inst.antecedents.iter().map(|a| lw.get(*a)).collect()
    }
}

impl Source for HaldSource<'_> {
    fn initial_registry(&self) -> Registry {
        self.base_reg.clone()
    }

    fn goal(&self) -> Statement {
        self.g_goal
    }

    fn seed(&mut self, core: &mut RunCore, out: &mut Vec<Queued>) -> Result<()> {
        let bot_d = g_intern(&mut core.reg, DERIV_LABEL, self.m, 0);
        let bot_c = g_intern(&mut core.reg, CTX_LABEL, self.m, 0);
        out.push(Queued {
            rule: Rule::axiom(bot_d, 0.0).with_tag("start"),
            weight: 0.0,
            priority: 0.0,
        });
        out.push(Queued {
            rule: Rule::axiom(bot_c, 0.0).with_tag("start"),
            weight: 0.0,
            priority: 0.0,
        });
        Ok(())
    }

    fn expand(
        &mut self,
        s: Statement,
        w: f64,
        core: &mut RunCore,
        out: &mut Vec<Queued>,
    ) -> Result<()> {
        let gen = g_decode(&core.reg, s);
        let k = gen.level;
        if !gen.is_context {
            if k == self.m {
                return Ok(()); // bottom derivation carries no rules
            }
            let base = gen.base.expect("derivation statement");
            self.levels[k].weights.set(base, w);
            {
                let level = &mut self.levels[k];
                level.index.add(&level.reg, base);
            }
            if base == self.levels[k].goal {
                let ctx_goal = g_intern(&mut core.reg, CTX_LABEL, k, base.id());
                out.push(Queued {
                    rule: Rule {
                        antecedents: vec![s],
                        conclusion: ctx_goal,
                        weight: WeightFn::Additive(0.0),
                        signed: false,
                        tag: Some("base".into()),
                    },
                    weight: 0.0,
                    priority: w,
                });
            }
            for inst in self.instances_using(k, base) {
                let ws = match self.antecedent_weights(k, &inst) {
                    Some(ws) => ws,
                    None => {
                        debug_assert!(false, "generator emitted incomplete instance");
                        continue;
                    }
                };
                let w_inst = inst.weight.eval(&ws);
                if let Some(wc) = self.levels[k].ctx_weights.get(inst.conclusion) {
                    self.schedule_down(k, &inst, &ws, wc, core, out)?;
                }
                self.schedule_up(k, inst, w_inst, core, out);
            }
        } else {
            if k == self.m {
                self.bottom_ctx = Some(w);
                self.release(self.m - 1, 0, w, core, out);
                return Ok(());
            }
            let base = gen.base.expect("context statement");
            self.levels[k].ctx_weights.set(base, w);
            if k >= 1 {
                self.release(k - 1, base.id() as u32, w, core, out);
            }
            for inst in self.instances_concluding(k, base) {
                let ws = match self.antecedent_weights(k, &inst) {
                    Some(ws) => ws,
                    None => continue,
                };
                self.schedule_down(k, &inst, &ws, w, core, out)?;
            }
        }
        Ok(())
    }
}

/// Result of a hierarchical run: the generalized solution set plus per-level
/// registries for decoding.
pub struct HaldResult {
    solution: SolutionSet,
    pub stats: RunStats,
    level_registries: Vec<Registry>,
    m: usize,
}

impl HaldResult {
    pub fn levels(&self) -> usize {
        self.m
    }

    /// The generalized solution set; statements decode via [`Self::decode`].
    pub fn solution(&self) -> &SolutionSet {
        &self.solution
    }

    pub fn decode(&self, s: Statement) -> GenStatement {
        let mut gen = g_decode(self.solution.registry(), s);
        if gen.level == self.m {
            gen.base = None;
        }
        gen
    }

    pub fn level_registry(&self, k: usize) -> &Registry {
        &self.level_registries[k]
    }

    pub fn goal_weight(&self) -> Option<f64> {
        self.solution.goal_weight()
    }

    pub fn expansions(&self) -> usize {
        self.stats.expansions
    }

    fn lookup(&self, kind: &str, level: usize, base: Statement) -> Option<f64> {
        let (label, args) = g_key(kind, level, base.id());
        let g = self.solution.registry().lookup(&label, &args)?;
        self.solution.weight_of(g)
    }

    /// Weight of a level statement's lightest derivation, if expanded.
    pub fn derivation_weight(&self, level: usize, base: Statement) -> Option<f64> {
        self.lookup(DERIV_LABEL, level, base)
    }

    /// Weight of a level statement's lightest context, if expanded.
    pub fn context_weight(&self, level: usize, base: Statement) -> Option<f64> {
        self.lookup(CTX_LABEL, level, base)
    }

    /// Expansion counts per level as `(derivations, contexts)`; index `m` is
    /// the bottom.
    pub fn expansion_counts(&self) -> Vec<(usize, usize)> {
        let mut counts = vec![(0, 0); self.m + 1];
        for &s in self.solution.expansion_order() {
            let gen = self.decode(s);
            if gen.is_context {
                counts[gen.level].1 += 1;
            } else {
                counts[gen.level].0 += 1;
            }
        }
        counts
    }

    /// Rebuilds the level-0 derivation tree of the goal from the generalized
    /// backpointers, dropping the context antecedents of UP rules.
    pub fn goal_derivation(&self) -> Result<Derivation> {
        let goal0 = {
            let reg = &self.level_registries[0];
            let _ = reg;
            self.solution.goal()
        };
        self.extract(goal0)
    }

    fn extract(&self, g: Statement) -> Result<Derivation> {
        let reg = self.solution.registry();
        let rule = self
            .solution
            .backpointer(g)
            .ok_or_else(|| Error::NotDerived(reg.display(g)))?;
        let gen = g_decode(reg, g);
        let base_ants: &[Statement] = match rule.antecedents.first() {
            Some(&first) if g_decode(reg, first).is_context => &rule.antecedents[1..],
            _ => &rule.antecedents,
        };
        let mut children = Vec::with_capacity(base_ants.len());
        for &a in base_ants {
            children.push(self.extract(a)?);
        }
        let base_rule = Rule {
            antecedents: base_ants
                .iter()
                .map(|&a| g_decode(reg, a).base.expect("level statement"))
                .collect(),
            conclusion: gen.base.expect("level statement"),
            weight: rule.weight.clone(),
            signed: rule.signed,
            tag: rule.tag.clone(),
        };
        Derivation::new(base_rule, children)
    }

    /// JSON-lines trace. Expansion records carry `event: "expand"`; if push
    /// records were collected they are interleaved by global order with
    /// `event: "push"`.
    pub fn write_trace(&self, out: &mut dyn std::io::Write) -> std::io::Result<()> {
        let mut events: Vec<(&engine::TraceRecord, &str)> = Vec::new();
        for r in &self.stats.trace {
            events.push((r, "expand"));
        }
        for r in &self.stats.push_trace {
            events.push((r, "push"));
        }
        events.sort_by_key(|(r, _)| r.order);
        for (r, event) in events {
            let gen = self.decode(r.statement);
            let statement = match gen.base {
                Some(base) => self.level_registries[gen.level].display(base),
                None => "bot".to_string(),
            };
            let line = serde_json::json!({
                "seq": r.seq,
                "event": event,
                "statement": statement,
                "weight": r.weight,
                "priority": r.priority,
                "level": gen.level,
                "kind": if gen.is_context { "context" } else { "derivation" },
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Runs HA*LD to the first expansion of the level-0 goal.
pub fn run_hald(h: &Hierarchy) -> Result<HaldResult> {
    run_hald_with(h, &RunOptions::default())
}

pub fn run_hald_with(h: &Hierarchy, opts: &RunOptions) -> Result<HaldResult> {
    for (k, level) in h.levels().iter().enumerate() {
        if !level.supports_producers() {
            return Err(Error::InvalidHierarchy(format!(
                "level {k} expander does not support context search"
            )));
        }
    }
    let mut src = HaldSource::new(h)?;
    let (solution, stats) = drive(&mut src, opts)?;
    let level_registries = src.levels.into_iter().map(|l| l.reg).collect();
    Ok(HaldResult {
        solution,
        stats,
        level_registries,
        m: h.len(),
    })
}

/// Closure-based oracle for the hierarchical expansion bound: counts the
/// statements (bottom included) whose intrinsic priority
/// `l(C) + l(context(abs(C)))` is within the level-0 goal weight. A
/// hierarchical run expands at most twice this many generalized statements.
pub struct PromisingCount {
    pub count: usize,
    pub goal_weight: f64,
}

pub fn promising_count(hier: &Hierarchy, ground_budget: usize) -> Result<PromisingCount> {
    let m = hier.len();
    let mut owned: Vec<Option<Problem>> = Vec::new();
    for level in hier.levels() {
        if level.is_grounded() {
            owned.push(None);
        } else {
            owned.push(Some(level.ground(ground_budget)?));
        }
    }
    let level_ref = |k: usize| -> &Problem { owned[k].as_ref().unwrap_or_else(|| hier.level(k)) };

    let closure = RunOptions {
        stop: engine::StopCondition::QueueEmpty,
        assert_monotone: false,
        ..Default::default()
    };
    let mut deriv_sols = Vec::with_capacity(m);
    let mut ctx_sols = Vec::with_capacity(m);
    for k in 0..m {
        let p = level_ref(k);
        deriv_sols.push(engine::kld_with(p, &closure)?.0);
        ctx_sols.push(engine::kld_with(&context_problem(p)?, &closure)?.0);
    }
    let goal_weight = deriv_sols[0]
        .weight_of(level_ref(0).goal())
        .ok_or_else(|| Error::InvalidProblem("goal is not derivable".into()))?;

    let mut count = 1; // the bottom statement, intrinsic priority 0
    for k in 0..m {
        let p = level_ref(k);
        for s in p.registry().statements() {
            let Some(l) = deriv_sols[k].weight_of(s) else { continue };
            let h = if k + 1 < m {
                let abs = match hier.maps()[k].map_statement(
                    p.registry(),
                    s,
                    level_ref(k + 1).registry(),
                ) {
                    Some(a) => a,
                    None => continue,
                };
                match lookup_context(ctx_sols[k + 1].registry(), abs)
                    .and_then(|c| ctx_sols[k + 1].weight_of(c))
                {
                    Some(h) => h,
                    None => continue,
                }
            } else {
                0.0
            };
            if l + h <= goal_weight + 1e-9 {
                count += 1;
            }
        }
    }
    Ok(PromisingCount { count, goal_weight })
}

/// Two-level worked example: level 0 has statements `X(i), Y(i), Z(i)` for
/// `i in 1..=n` with goal rules `X(i), Y(j) ->_{i*j} goal` and a detour
/// through `Z(i)`; level 1 collapses the indices.
pub fn demo_hierarchy(n: usize) -> Hierarchy {
    let mut reg0 = Registry::new();
    let goal0 = reg0.intern("goal", &[]);
    let xs: Vec<Statement> = (1..=n as i32).map(|i| reg0.intern("X", &[i])).collect();
    let ys: Vec<Statement> = (1..=n as i32).map(|i| reg0.intern("Y", &[i])).collect();
    let zs: Vec<Statement> = (1..=n as i32).map(|i| reg0.intern("Z", &[i])).collect();
    let mut rules0 = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        rules0.push(Rule::axiom(x, (i + 1) as f64));
    }
    for (i, &y) in ys.iter().enumerate() {
        rules0.push(Rule::axiom(y, (i + 1) as f64));
    }
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            rules0.push(Rule::additive(vec![x, y], goal0, ((i + 1) * (j + 1)) as f64));
        }
    }
    for i in 0..n {
        rules0.push(Rule::additive(vec![xs[i], ys[i]], zs[i], 5.0));
        rules0.push(Rule::additive(vec![zs[i]], goal0, (i + 1) as f64));
    }
    let level0 = Problem::grounded(reg0, rules0, goal0).unwrap();

    let mut reg1 = Registry::new();
    let goal1 = reg1.intern("goal", &[]);
    let x1 = reg1.intern("X", &[]);
    let y1 = reg1.intern("Y", &[]);
    let z1 = reg1.intern("Z", &[]);
    let rules1 = vec![
        Rule::axiom(x1, 1.0),
        Rule::axiom(y1, 1.0),
        Rule::additive(vec![x1, y1], goal1, 1.0),
        Rule::additive(vec![x1, y1], z1, 5.0),
        Rule::additive(vec![z1], goal1, 1.0),
    ];
    let level1 = Problem::grounded(reg1, rules1, goal1).unwrap();

    let map = AbstractionMap::from_fn(|label, _args| (label.to_string(), Vec::new()));
    Hierarchy::new(vec![level0, level1], vec![map]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::kld_with;
    use crate::problems::graph::{demo_graph, graph_problem};

    fn two_level() -> Hierarchy {
        demo_hierarchy(2)
    }

    fn single_level_over_demo_graph() -> Hierarchy {
        let p = graph_problem(&demo_graph()).unwrap();
        Hierarchy::new(vec![p], vec![]).unwrap()
    }

    #[test]
    fn hierarchy_validation_accepts_the_demo() {
        let report = two_level().validate(10_000);
        assert!(report.is_clean(), "{:?}", report.issues);
    }

    #[test]
    fn hierarchy_validation_accepts_a_single_level() {
        let report = single_level_over_demo_graph().validate(10_000);
        assert!(report.is_clean(), "{:?}", report.issues);
    }

    #[test]
    fn overweight_abstract_rules_are_reported() {
        // reweight the abstract goal rule X,Y -> goal from 1 to 5; every
        // concrete goal rule cheaper than 5 loses its counterpart bound
        let base = demo_hierarchy(2);
        let level1 = {
            let mut reg = Registry::new();
            let goal = reg.intern("goal", &[]);
            let x = reg.intern("X", &[]);
            let y = reg.intern("Y", &[]);
            let z = reg.intern("Z", &[]);
            let rules = vec![
                Rule::axiom(x, 1.0),
                Rule::axiom(y, 1.0),
                Rule::additive(vec![x, y], goal, 5.0),
                Rule::additive(vec![x, y], z, 5.0),
                Rule::additive(vec![z], goal, 1.0),
            ];
            Problem::grounded(reg, rules, goal).unwrap()
        };
        let levels: Vec<Problem> = {
            let mut it = base.levels.into_iter();
            let l0 = it.next().unwrap();
            vec![l0, level1]
        };
        let hier = Hierarchy::new(levels, base.maps).unwrap();
        let report = hier.validate(10_000);
        // X(i), Y(j) -> goal at weights 1, 2, 2, 4 all undercut the abstract 5
        assert_eq!(report.issues.len(), 4, "{:?}", report.issues);
    }

    #[test]
    fn goal_mismatch_is_rejected_at_construction() {
        let base = demo_hierarchy(2);
        let bad_map = AbstractionMap::from_fn(|label, _| {
            if label == "goal" {
                ("X".to_string(), vec![])
            } else {
                (label.to_string(), vec![])
            }
        });
        let err = Hierarchy::new(base.levels, vec![bad_map]).unwrap_err();
        assert!(matches!(err, Error::InvalidHierarchy(_)));
    }

    #[test]
    fn golden_trace_of_the_two_level_demo() {
        let opts = RunOptions::default().with_trace().with_push_trace();
        let res = run_hald_with(&two_level(), &opts).unwrap();
        assert_eq!(res.goal_weight(), Some(3.0));

        let rendered: Vec<(String, usize, &str, f64, f64)> = res
            .stats
            .trace
            .iter()
            .map(|r| {
                let gen = res.decode(r.statement);
                let name = match gen.base {
                    Some(b) => res.level_registry(gen.level).display(b),
                    None => "bot".to_string(),
                };
                (
                    name,
                    gen.level,
                    if gen.is_context { "ctx" } else { "drv" },
                    r.weight,
                    r.priority,
                )
            })
            .collect();
        let expect: Vec<(String, usize, &str, f64, f64)> = vec![
            ("bot".into(), 2, "drv", 0.0, 0.0),
            ("bot".into(), 2, "ctx", 0.0, 0.0),
            ("X".into(), 1, "drv", 1.0, 1.0),
            ("Y".into(), 1, "drv", 1.0, 1.0),
            ("goal".into(), 1, "drv", 3.0, 3.0),
            ("goal".into(), 1, "ctx", 0.0, 3.0),
            ("X".into(), 1, "ctx", 2.0, 3.0),
            ("Y".into(), 1, "ctx", 2.0, 3.0),
            ("X(1)".into(), 0, "drv", 1.0, 3.0),
            ("Y(1)".into(), 0, "drv", 1.0, 3.0),
            ("goal".into(), 0, "drv", 3.0, 3.0),
        ];
        assert_eq!(rendered, expect);
    }

    #[test]
    fn detours_stay_queued_and_their_contexts_never_appear() {
        let opts = RunOptions::default().with_trace().with_push_trace();
        let res = run_hald_with(&two_level(), &opts).unwrap();
        let reg1 = res.level_registry(1);
        let z = reg1.lookup("Z", &[]).unwrap();
        // (Z = 7) was pushed at priority 7 but never expanded
        let pushed_z: Vec<_> = res
            .stats
            .push_trace
            .iter()
            .filter(|r| {
                let gen = res.decode(r.statement);
                gen.level == 1 && !gen.is_context && gen.base == Some(z)
            })
            .collect();
        assert_eq!(pushed_z.len(), 1);
        assert_eq!(pushed_z[0].weight, 7.0);
        assert_eq!(pushed_z[0].priority, 7.0);
        assert_eq!(res.derivation_weight(1, z), None);
        // context(Z) was never even queued
        assert!(!res.stats.push_trace.iter().any(|r| {
            let gen = res.decode(r.statement);
            gen.level == 1 && gen.is_context && gen.base == Some(z)
        }));
        // contexts of X and Y were both expanded with weight 2
        let x = reg1.lookup("X", &[]).unwrap();
        let y = reg1.lookup("Y", &[]).unwrap();
        assert_eq!(res.context_weight(1, x), Some(2.0));
        assert_eq!(res.context_weight(1, y), Some(2.0));
    }

    #[test]
    fn goal_derivation_extracts_the_base_tree() {
        let res = run_hald(&two_level()).unwrap();
        let d = res.goal_derivation().unwrap();
        assert_eq!(d.weight, 3.0);
        assert_eq!(d.evaluate().unwrap(), 3.0);
        let reg0 = res.level_registry(0);
        let leaves: Vec<String> = d.leaves().iter().map(|&s| reg0.display(s)).collect();
        assert_eq!(leaves, vec!["X(1)", "Y(1)"]);
    }

    #[test]
    fn single_level_degenerates_to_kld() {
        let hier = single_level_over_demo_graph();
        let opts = RunOptions::default().with_trace();
        let res = run_hald_with(&hier, &opts).unwrap();
        assert_eq!(res.goal_weight(), Some(3.0));

        let p = graph_problem(&demo_graph()).unwrap();
        let (sol, kstats) = kld_with(&p, &RunOptions::default().with_trace()).unwrap();
        assert_eq!(sol.goal_weight(), Some(3.0));
        // the hald trace is the kld trace prefixed by the two bottom seeds
        assert_eq!(res.stats.trace.len(), kstats.trace.len() + 2);
        for (h, k) in res.stats.trace[2..].iter().zip(kstats.trace.iter()) {
            let gen = res.decode(h.statement);
            assert_eq!(gen.level, 0);
            assert!(!gen.is_context);
            let name = res.level_registry(0).display(gen.base.unwrap());
            assert_eq!(name, sol.registry().display(k.statement));
            assert_eq!(h.weight, k.weight);
            assert_eq!(h.priority, k.priority);
        }
    }

    #[test]
    fn expansions_respect_the_promising_count_bound() {
        let hier = two_level();
        let res = run_hald(&hier).unwrap();
        let pc = promising_count(&hier, 10_000).unwrap();
        assert_eq!(pc.goal_weight, 3.0);
        assert_eq!(pc.count, 7); // bot, X, Y, goal1, X(1), Y(1), goal0
        assert!(res.expansions() <= 2 * pc.count);
    }

    #[test]
    fn single_level_promising_count_is_the_weight_bound() {
        // with one level the heuristic is zero everywhere, so the count is
        // the statements within the goal weight, plus the bottom
        let hier = single_level_over_demo_graph();
        let pc = promising_count(&hier, 10_000).unwrap();
        assert_eq!(pc.goal_weight, 3.0);
        assert_eq!(pc.count, 4); // bot, path(0)=0, path(1)=1, path(2)=3
    }

    #[test]
    fn zero_cost_hierarchies_count_every_derivable_statement() {
        // same shape as the demo but all weights zero
        let n = 2;
        let mut reg0 = Registry::new();
        let goal0 = reg0.intern("goal", &[]);
        let xs: Vec<Statement> = (1..=n).map(|i| reg0.intern("X", &[i])).collect();
        let ys: Vec<Statement> = (1..=n).map(|i| reg0.intern("Y", &[i])).collect();
        let zs: Vec<Statement> = (1..=n).map(|i| reg0.intern("Z", &[i])).collect();
        let mut rules0 = Vec::new();
        for &x in &xs {
            rules0.push(Rule::axiom(x, 0.0));
        }
        for &y in &ys {
            rules0.push(Rule::axiom(y, 0.0));
        }
        for &x in &xs {
            for &y in &ys {
                rules0.push(Rule::additive(vec![x, y], goal0, 0.0));
            }
        }
        for i in 0..n as usize {
            rules0.push(Rule::additive(vec![xs[i], ys[i]], zs[i], 0.0));
            rules0.push(Rule::additive(vec![zs[i]], goal0, 0.0));
        }
        let level0 = Problem::grounded(reg0, rules0, goal0).unwrap();
        let mut reg1 = Registry::new();
        let goal1 = reg1.intern("goal", &[]);
        let x1 = reg1.intern("X", &[]);
        let y1 = reg1.intern("Y", &[]);
        let z1 = reg1.intern("Z", &[]);
        let rules1 = vec![
            Rule::axiom(x1, 0.0),
            Rule::axiom(y1, 0.0),
            Rule::additive(vec![x1, y1], goal1, 0.0),
            Rule::additive(vec![x1, y1], z1, 0.0),
            Rule::additive(vec![z1], goal1, 0.0),
        ];
        let level1 = Problem::grounded(reg1, rules1, goal1).unwrap();
        let map = AbstractionMap::from_fn(|label, _| (label.to_string(), Vec::new()));
        let hier = Hierarchy::new(vec![level0, level1], vec![map]).unwrap();
        let pc = promising_count(&hier, 10_000).unwrap();
        // every statement of both levels plus the bottom
        assert_eq!(pc.count, (3 * n as usize + 1) + 4 + 1);
        assert_eq!(pc.goal_weight, 0.0);
    }

    #[test]
    fn trace_jsonl_includes_push_and_expand_events() {
        let opts = RunOptions::default().with_trace().with_push_trace();
        let res = run_hald_with(&two_level(), &opts).unwrap();
        let mut buf = Vec::new();
        res.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().count() > 11);
        assert!(text.contains("\"event\":\"push\""));
        assert!(text.contains("\"event\":\"expand\""));
        assert!(text.contains("\"kind\":\"context\""));
    }
}
