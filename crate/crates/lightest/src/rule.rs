//! Weighted inference rules.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::statement::{Registry, Statement};

/// Maximum number of antecedents a rule may carry.
pub const MAX_ARITY: usize = 4;

pub type GeneralWeightFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Weight function of a rule: either an additive constant added to the sum of
/// the antecedent weights, or an arbitrary callback over them. Callbacks are
/// expected to be non-decreasing in each argument; `Problem::validate` samples
/// for violations instead of assuming it.
#[derive(Clone)]
pub enum WeightFn {
    Additive(f64),
    General(GeneralWeightFn),
}

impl WeightFn {
    /// Evaluates the rule weight on antecedent weights, in antecedent order.
    ///
    /// The additive case folds left starting from the rule constant, so every
    /// caller that recomputes a weight gets the bit-identical f64.
    pub fn eval(&self, antecedent_weights: &[f64]) -> f64 {
        match self {
            WeightFn::Additive(v) => antecedent_weights.iter().fold(*v, |acc, w| acc + w),
            WeightFn::General(f) => f(antecedent_weights),
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, WeightFn::Additive(_))
    }

    pub fn additive_value(&self) -> Option<f64> {
        match self {
            WeightFn::Additive(v) => Some(*v),
            WeightFn::General(_) => None,
        }
    }
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFn::Additive(v) => write!(f, "Additive({v})"),
            WeightFn::General(_) => write!(f, "General(..)"),
        }
    }
}

/// An inference rule `A_1, ..., A_n -> C` with a weight function. A rule with
/// no antecedents is an axiom whose weight is a constant.
#[derive(Clone, Debug)]
pub struct Rule {
    pub antecedents: Vec<Statement>,
    pub conclusion: Statement,
    pub weight: WeightFn,
    /// Negative additive weights are only legal on rules flagged `signed`;
    /// solvers then rely on runtime priority checks instead of superiority.
    pub signed: bool,
    /// Optional provenance tag for tracing and reports.
    pub tag: Option<Arc<str>>,
}

impl Rule {
    pub fn new(antecedents: Vec<Statement>, conclusion: Statement, weight: WeightFn) -> Self {
        assert!(
            antecedents.len() <= MAX_ARITY,
            "rule arity {} exceeds maximum {}",
            antecedents.len(),
            MAX_ARITY
        );
        Rule {
            antecedents,
            conclusion,
            weight,
            signed: false,
            tag: None,
        }
    }

    pub fn try_new(
        antecedents: Vec<Statement>,
        conclusion: Statement,
        weight: WeightFn,
    ) -> Result<Self> {
        if antecedents.len() > MAX_ARITY {
            return Err(Error::ArityExceeded {
                arity: antecedents.len(),
                max: MAX_ARITY,
            });
        }
        Ok(Rule::new(antecedents, conclusion, weight))
    }

    pub fn additive(antecedents: Vec<Statement>, conclusion: Statement, v: f64) -> Self {
        Rule::new(antecedents, conclusion, WeightFn::Additive(v))
    }

    pub fn axiom(conclusion: Statement, v: f64) -> Self {
        Rule::additive(Vec::new(), conclusion, v)
    }

    /// Marks the rule as deliberately carrying a negative additive weight.
    pub fn signed(mut self) -> Self {
        self.signed = true;
        self
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tag = Some(Arc::from(tag));
        self
    }

    pub fn is_axiom(&self) -> bool {
        self.antecedents.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.antecedents.len()
    }

    /// `w <concl> <- <ants...>` rendered against a registry.
    pub fn display(&self, reg: &Registry) -> String {
        let w = match &self.weight {
            WeightFn::Additive(v) => format!("{v}"),
            WeightFn::General(_) => "g(..)".to_string(),
        };
        let ants: Vec<String> = self.antecedents.iter().map(|a| reg.display(*a)).collect();
        format!("{} {} <- {}", w, reg.display(self.conclusion), ants.join(" "))
    }
}
