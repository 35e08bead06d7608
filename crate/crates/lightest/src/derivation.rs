//! Derivation trees and their evaluation.

use crate::error::{Error, Result};
use crate::rule::Rule;

/// A finite tree of rules: child `i` derives antecedent `i` of the root rule.
/// Leaves are axioms. `weight` is the recursive evaluation of the weight
/// functions along the tree.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub rule: Rule,
    pub children: Vec<Derivation>,
    pub weight: f64,
}

impl Derivation {
    /// Builds a derivation node, checking that each child derives the
    /// matching antecedent, and evaluates its weight bottom-up.
    pub fn new(rule: Rule, children: Vec<Derivation>) -> Result<Self> {
        let weight = eval_node(&rule, &children)?;
        Ok(Derivation {
            rule,
            children,
            weight,
        })
    }

    /// Re-evaluates the tree bottom-up, revalidating its structure.
    pub fn evaluate(&self) -> Result<f64> {
        for child in &self.children {
            child.evaluate()?;
        }
        eval_node(&self.rule, &self.children)
    }

    /// Number of rules in the tree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Derivation::size).sum::<usize>()
    }

    /// Length of the longest root-to-leaf path, with a single axiom at 0.
    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    /// Statements concluded at the leaves (axiom conclusions), left to right.
    pub fn leaves(&self) -> Vec<crate::statement::Statement> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<crate::statement::Statement>) {
        if self.children.is_empty() {
            out.push(self.rule.conclusion);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }
}

fn eval_node(rule: &Rule, children: &[Derivation]) -> Result<f64> {
    if children.len() != rule.antecedents.len() {
        return Err(Error::MalformedDerivation(format!(
            "rule has {} antecedents but {} children",
            rule.antecedents.len(),
            children.len()
        )));
    }
    let mut ws = Vec::with_capacity(children.len());
    for (i, child) in children.iter().enumerate() {
        if child.rule.conclusion != rule.antecedents[i] {
            return Err(Error::MalformedDerivation(format!(
                "child {i} concludes a different statement than antecedent {i}"
            )));
        }
        ws.push(child.weight);
    }
    Ok(rule.weight.eval(&ws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::WeightFn;
    use crate::statement::Registry;
    use proptest::prelude::*;

    /// Random all-additive derivation: leaf weights and rule weights drawn
    /// from the seeds, shape driven by the arity list.
    fn build_tree(
        reg: &mut Registry,
        next_id: &mut i32,
        arities: &mut Vec<usize>,
        weights: &mut Vec<u8>,
        depth: usize,
    ) -> (Derivation, f64) {
        let concl = reg.intern("t", &[*next_id]);
        *next_id += 1;
        let v = weights.pop().unwrap_or(3) as f64;
        let arity = if depth == 0 { 0 } else { arities.pop().unwrap_or(0) };
        let mut children = Vec::new();
        let mut total = v;
        for _ in 0..arity {
            let (child, sum) = build_tree(reg, next_id, arities, weights, depth - 1);
            total += sum;
            children.push(child);
        }
        let ants = children.iter().map(|c| c.rule.conclusion).collect();
        let d = Derivation::new(Rule::additive(ants, concl, v), children).unwrap();
        (d, total)
    }

    proptest! {
        #[test]
        fn additive_trees_evaluate_to_the_sum_of_rule_weights(
            mut arities in proptest::collection::vec(0usize..3, 0..20),
            mut weights in proptest::collection::vec(0u8..10, 1..40),
        ) {
            let mut reg = Registry::new();
            let mut next_id = 0;
            let (d, expect) = build_tree(&mut reg, &mut next_id, &mut arities, &mut weights, 3);
            prop_assert_eq!(d.weight, expect);
            prop_assert_eq!(d.evaluate().unwrap(), expect);
        }
    }

    #[test]
    fn single_axiom_evaluates_to_its_constant() {
        let mut reg = Registry::new();
        let s = reg.intern("path", &[0]);
        let d = Derivation::new(Rule::axiom(s, 0.0), vec![]).unwrap();
        assert_eq!(d.evaluate().unwrap(), 0.0);
        assert_eq!(d.weight, 0.0);
    }

    #[test]
    fn additive_chain_sums_rule_weights() {
        // s --1--> a --2--> b, axiom weight 0: total 3.
        let mut reg = Registry::new();
        let s = reg.intern("path", &[0]);
        let a = reg.intern("path", &[1]);
        let b = reg.intern("path", &[2]);
        let d_s = Derivation::new(Rule::axiom(s, 0.0), vec![]).unwrap();
        let d_a = Derivation::new(Rule::additive(vec![s], a, 1.0), vec![d_s]).unwrap();
        let d_b = Derivation::new(Rule::additive(vec![a], b, 2.0), vec![d_a]).unwrap();
        assert_eq!(d_b.weight, 3.0);
        assert_eq!(d_b.evaluate().unwrap(), 3.0);
        assert_eq!(d_b.size(), 3);
        assert_eq!(d_b.depth(), 2);
    }

    #[test]
    fn two_antecedent_tree_with_unit_weights() {
        // goal from x, y: 1 + 1 + 1 = 3.
        let mut reg = Registry::new();
        let x = reg.intern("x", &[1]);
        let y = reg.intern("y", &[1]);
        let goal = reg.intern("goal", &[]);
        let dx = Derivation::new(Rule::axiom(x, 1.0), vec![]).unwrap();
        let dy = Derivation::new(Rule::axiom(y, 1.0), vec![]).unwrap();
        let d = Derivation::new(Rule::additive(vec![x, y], goal, 1.0), vec![dx, dy]).unwrap();
        assert_eq!(d.weight, 3.0);
    }

    #[test]
    fn structural_mismatch_is_rejected() {
        let mut reg = Registry::new();
        let a = reg.intern("a", &[]);
        let b = reg.intern("b", &[]);
        let c = reg.intern("c", &[]);
        let d_b = Derivation::new(Rule::axiom(b, 1.0), vec![]).unwrap();
        // rule expects `a` as antecedent, child derives `b`
        let err = Derivation::new(Rule::additive(vec![a], c, 1.0), vec![d_b]);
        assert!(matches!(err, Err(Error::MalformedDerivation(_))));
        let err = Derivation::new(Rule::additive(vec![a], c, 1.0), vec![]);
        assert!(matches!(err, Err(Error::MalformedDerivation(_))));
    }

    #[test]
    fn general_weight_functions_evaluate_recursively() {
        let mut reg = Registry::new();
        let a = reg.intern("a", &[]);
        let c = reg.intern("c", &[]);
        let da = Derivation::new(Rule::axiom(a, 4.0), vec![]).unwrap();
        let rule = Rule::new(
            vec![a],
            c,
            WeightFn::General(std::sync::Arc::new(|ws: &[f64]| ws[0].max(7.0))),
        );
        let d = Derivation::new(rule, vec![da]).unwrap();
        assert_eq!(d.weight, 7.0);
    }
}
