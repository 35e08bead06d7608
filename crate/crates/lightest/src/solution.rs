//! Solution sets: lightest weights with backpointers, produced by every solver.

use crate::derivation::Derivation;
use crate::error::{Error, Result};
use crate::rule::Rule;
use crate::statement::{Registry, Statement};

/// Dense statement-id -> weight map. NaN marks "no assignment".
#[derive(Clone, Default, Debug)]
pub(crate) struct Weights(Vec<f64>);

impl Weights {
    pub fn with_capacity(n: usize) -> Self {
        Weights(vec![f64::NAN; n])
    }

    pub fn get(&self, s: Statement) -> Option<f64> {
        match self.0.get(s.id()) {
            Some(w) if !w.is_nan() => Some(*w),
            _ => None,
        }
    }

    pub fn set(&mut self, s: Statement, w: f64) {
        if self.0.len() <= s.id() {
            self.0.resize(s.id() + 1, f64::NAN);
        }
        self.0[s.id()] = w;
    }

    pub fn contains(&self, s: Statement) -> bool {
        self.get(s).is_some()
    }
}

/// Weight assignments and backpointers accumulated by a solver run.
///
/// Each entry records the lightest known weight of a statement together with
/// the rule instance that produced it; following backpointers from any entry
/// reconstructs a full derivation tree.
pub struct SolutionSet {
    registry: Registry,
    weights: Weights,
    backpointers: Vec<Option<Rule>>,
    expansion_order: Vec<Statement>,
    goal: Statement,
}

impl SolutionSet {
    pub(crate) fn new(
        registry: Registry,
        weights: Weights,
        backpointers: Vec<Option<Rule>>,
        expansion_order: Vec<Statement>,
        goal: Statement,
    ) -> Self {
        SolutionSet {
            registry,
            weights,
            backpointers,
            expansion_order,
            goal,
        }
    }

    /// Registry of the run. For implicit problems this extends the problem's
    /// registry with statements interned while solving; pre-existing ids are
    /// unchanged.
    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn weight_of(&self, s: Statement) -> Option<f64> {
        self.weights.get(s)
    }

    pub fn goal(&self) -> Statement {
        self.goal
    }

    /// `None` means the goal was not derived (no-derivation outcome).
    pub fn goal_weight(&self) -> Option<f64> {
        self.weights.get(self.goal)
    }

    pub fn backpointer(&self, s: Statement) -> Option<&Rule> {
        self.backpointers.get(s.id()).and_then(|r| r.as_ref())
    }

    /// Statements in the order they were expanded.
    pub fn expansion_order(&self) -> &[Statement] {
        &self.expansion_order
    }

    /// Position of `s` in the expansion order.
    pub fn expansion_index(&self, s: Statement) -> Option<usize> {
        self.expansion_order.iter().position(|&x| x == s)
    }

    pub fn len(&self) -> usize {
        self.expansion_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expansion_order.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Statement, f64)> + '_ {
        self.expansion_order
            .iter()
            .map(move |&s| (s, self.weights.get(s).expect("expanded statements have weights")))
    }

    /// Rebuilds the derivation tree for `b` by following backpointers.
    pub fn derivation(&self, b: Statement) -> Result<Derivation> {
        if !self.weights.contains(b) {
            return Err(Error::NotDerived(self.registry.display(b)));
        }
        let rule = self
            .backpointer(b)
            .ok_or_else(|| Error::NotDerived(self.registry.display(b)))?
            .clone();
        let mut children = Vec::with_capacity(rule.antecedents.len());
        for &a in &rule.antecedents {
            children.push(self.derivation(a)?);
        }
        Derivation::new(rule, children)
    }

    pub(crate) fn registry_and_weights_mut(&mut self) -> (&mut Registry, &Weights) {
        (&mut self.registry, &self.weights)
    }

    pub(crate) fn into_registry(self) -> Registry {
        self.registry
    }
}

impl std::fmt::Debug for SolutionSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolutionSet")
            .field("entries", &self.expansion_order.len())
            .field("goal_weight", &self.goal_weight())
            .finish()
    }
}
