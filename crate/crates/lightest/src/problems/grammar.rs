//! Weighted CFG parsing in Chomsky normal form as an implicit lightest
//! derivation problem over `phrase(X, i, j)` statements.
//!
//! The expander joins phrases at shared boundaries through two secondary
//! indexes (phrases by start position and by end position), the agenda-time
//! analogue of a chart parser's midpoint tables.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problem::{Expander, IndexSpec, Problem, Query};
use crate::rule::Rule;
use crate::statement::{Registry, Statement};

#[derive(Clone, Debug)]
pub struct Grammar {
    pub nonterminals: Vec<String>,
    pub terminals: Vec<String>,
    /// `(X, Y, Z, w)` for productions `X -> Y Z`.
    pub binary: Vec<(u32, u32, u32, f64)>,
    /// `(X, t, w)` for productions `X -> 't'`.
    pub lexical: Vec<(u32, u32, f64)>,
    pub start: u32,
}

impl Grammar {
    /// Parses `X -> Y Z : w` and `X -> 'tok' : w` lines. The first
    /// production's left-hand side is the start symbol.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut b = GrammarBuilder::new();
        let mut start = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Input(format!("line {}: {msg}", lineno + 1));
            let (lhs, rest) = line.split_once("->").ok_or_else(|| err("missing `->`"))?;
            let (rhs, w) = rest.rsplit_once(':').ok_or_else(|| err("missing `: w`"))?;
            let w: f64 = w.trim().parse().map_err(|_| err("bad weight"))?;
            if w < 0.0 {
                return Err(err("production weights must be non-negative"));
            }
            let lhs = lhs.trim();
            if start.is_none() {
                start = Some(lhs.to_string());
            }
            let rhs_parts: Vec<&str> = rhs.split_whitespace().collect();
            match rhs_parts.as_slice() {
                [tok] if tok.starts_with('\'') && tok.ends_with('\'') && tok.len() >= 2 => {
                    b.lexical(lhs, &tok[1..tok.len() - 1], w);
                }
                [y, z] => {
                    b.binary(lhs, y, z, w);
                }
                _ => return Err(err("expected `X -> Y Z : w` or `X -> 'tok' : w`")),
            }
        }
        let start = start.ok_or_else(|| Error::Input("empty grammar".into()))?;
        Ok(b.build(&start))
    }

    pub fn nonterminal_id(&self, name: &str) -> Option<u32> {
        self.nonterminals.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn terminal_id(&self, name: &str) -> Option<u32> {
        self.terminals.iter().position(|n| n == name).map(|i| i as u32)
    }
}

pub struct GrammarBuilder {
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    binary: Vec<(u32, u32, u32, f64)>,
    lexical: Vec<(u32, u32, f64)>,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        GrammarBuilder {
            nonterminals: Vec::new(),
            terminals: Vec::new(),
            binary: Vec::new(),
            lexical: Vec::new(),
        }
    }

    fn nt(&mut self, name: &str) -> u32 {
        match self.nonterminals.iter().position(|n| n == name) {
            Some(i) => i as u32,
            None => {
                self.nonterminals.push(name.to_string());
                (self.nonterminals.len() - 1) as u32
            }
        }
    }

    fn term(&mut self, name: &str) -> u32 {
        match self.terminals.iter().position(|n| n == name) {
            Some(i) => i as u32,
            None => {
                self.terminals.push(name.to_string());
                (self.terminals.len() - 1) as u32
            }
        }
    }

    pub fn binary(&mut self, x: &str, y: &str, z: &str, w: f64) -> &mut Self {
        let (x, y, z) = (self.nt(x), self.nt(y), self.nt(z));
        self.binary.push((x, y, z, w));
        self
    }

    pub fn lexical(&mut self, x: &str, tok: &str, w: f64) -> &mut Self {
        let (x, t) = (self.nt(x), self.term(tok));
        self.lexical.push((x, t, w));
        self
    }

    pub fn build(self, start: &str) -> Grammar {
        let start = self
            .nonterminals
            .iter()
            .position(|n| n == start)
            .expect("start symbol is a nonterminal") as u32;
        Grammar {
            nonterminals: self.nonterminals,
            terminals: self.terminals,
            binary: self.binary,
            lexical: self.lexical,
            start,
        }
    }
}

impl Default for GrammarBuilder {
    fn default() -> Self {
        Self::new()
    }
}

struct ParseExpander {
    /// productions `X -> Y Z` grouped by (Y, Z)
    by_children: HashMap<(u32, u32), Vec<(u32, f64)>>,
}

fn phrase(q: &mut Query<'_>, x: u32, i: i32, j: i32) -> Statement {
    q.intern("phrase", &[x as i32, i, j])
}

impl Expander for ParseExpander {
    fn consequences(&self, just: Statement, q: &mut Query<'_>, emit: &mut dyn FnMut(Rule)) {
        let args = q.args(just);
        let (x, i, j) = (args[0] as u32, args[1], args[2]);
        // as the left child: partners start where this phrase ends
        let right: Vec<Statement> = q.indexed("starts", j as i64).to_vec();
        for partner in right {
            let p_args = q.args(partner);
            let (y, k) = (p_args[0] as u32, p_args[2]);
            if let Some(prods) = self.by_children.get(&(x, y)) {
                for &(parent, w) in prods {
                    let concl = phrase(q, parent, i, k);
                    emit(Rule::additive(vec![just, partner], concl, w));
                }
            }
        }
        // as the right child: partners end where this phrase starts
        let left: Vec<Statement> = q.indexed("ends", i as i64).to_vec();
        for partner in left {
            let p_args = q.args(partner);
            let (y, h) = (p_args[0] as u32, p_args[1]);
            if let Some(prods) = self.by_children.get(&(y, x)) {
                for &(parent, w) in prods {
                    let concl = phrase(q, parent, h, j);
                    emit(Rule::additive(vec![partner, just], concl, w));
                }
            }
        }
    }

    fn producers(&self, of: Statement, q: &mut Query<'_>, emit: &mut dyn FnMut(Rule)) {
        let args = q.args(of);
        let (x, i, k) = (args[0] as u32, args[1], args[2]);
        for j in (i + 1)..k {
            let left: Vec<Statement> = q.indexed("ends", j as i64).to_vec();
            for l in left {
                let l_args = q.args(l);
                if l_args[1] != i {
                    continue;
                }
                let y = l_args[0] as u32;
                let right: Vec<Statement> = q.indexed("starts", j as i64).to_vec();
                for r in right {
                    let r_args = q.args(r);
                    if r_args[2] != k {
                        continue;
                    }
                    let z = r_args[0] as u32;
                    if let Some(prods) = self.by_children.get(&(y, z)) {
                        for &(parent, w) in prods {
                            if parent == x {
                                emit(Rule::additive(vec![l, r], of, w));
                            }
                        }
                    }
                }
            }
        }
    }

    fn supports_producers(&self) -> bool {
        true
    }
}

/// Implicit parsing problem over `tokens`, goal `phrase(S, 1, n+1)`.
pub fn parse_problem(g: &Grammar, tokens: &[&str]) -> Result<Problem> {
    let mut token_ids = Vec::with_capacity(tokens.len());
    for t in tokens {
        token_ids.push(
            g.terminal_id(t)
                .ok_or_else(|| Error::Input(format!("unknown terminal `{t}`")))?,
        );
    }
    let mut reg = Registry::new();
    let n = tokens.len() as i32;
    let goal = reg.intern("phrase", &[g.start as i32, 1, n + 1]);
    let mut axioms = Vec::new();
    for (pos, &tid) in token_ids.iter().enumerate() {
        let i = pos as i32 + 1;
        for &(x, t, w) in &g.lexical {
            if t == tid {
                let s = reg.intern("phrase", &[x as i32, i, i + 1]);
                axioms.push(Rule::axiom(s, w));
            }
        }
    }
    let mut by_children: HashMap<(u32, u32), Vec<(u32, f64)>> = HashMap::new();
    for &(x, y, z, w) in &g.binary {
        by_children.entry((y, z)).or_default().push((x, w));
    }
    let expander = Arc::new(ParseExpander { by_children });
    let indexes = vec![
        IndexSpec::new("starts", |reg, s| {
            if reg.label(s) == "phrase" {
                vec![reg.args(s)[1] as i64]
            } else {
                vec![]
            }
        }),
        IndexSpec::new("ends", |reg, s| {
            if reg.label(s) == "phrase" {
                vec![reg.args(s)[2] as i64]
            } else {
                vec![]
            }
        }),
    ];
    Problem::implicit_indexed(reg, axioms, goal, expander, indexes)
}

/// Tiny grammar used across the test suite: `S -> A B : 0.5`,
/// `A -> 'a' : 0.1`, `B -> 'b' : 0.2`; parsing "a b" weighs 0.8.
pub fn demo_grammar() -> Grammar {
    let mut b = GrammarBuilder::new();
    b.binary("S", "A", "B", 0.5);
    b.lexical("A", "a", 0.1);
    b.lexical("B", "b", 0.2);
    b.build("S")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine;

    #[test]
    fn demo_grammar_parses_ab() {
        let p = parse_problem(&demo_grammar(), &["a", "b"]).unwrap();
        let (sol, _) = engine::kld(&p).unwrap();
        let w = sol.goal_weight().unwrap();
        assert!((w - 0.8).abs() < 1e-9);
    }

    #[test]
    fn unknown_terminal_is_an_input_error() {
        assert!(parse_problem(&demo_grammar(), &["a", "q"]).is_err());
    }

    #[test]
    fn ungenerable_input_yields_no_derivation() {
        // "b a" has lexical cover but no S parse
        let p = parse_problem(&demo_grammar(), &["b", "a"]).unwrap();
        let (sol, _) = engine::kld(&p).unwrap();
        assert_eq!(sol.goal_weight(), None);
    }

    #[test]
    fn grammar_text_parsing() {
        let g = Grammar::from_text("S -> A B : 0.5\nA -> 'a' : 0.1\nB -> 'b' : 0.2\n").unwrap();
        assert_eq!(g.nonterminals.len(), 3);
        assert_eq!(g.start, 0);
        let p = parse_problem(&g, &["a", "b"]).unwrap();
        let (sol, _) = engine::kld(&p).unwrap();
        assert!((sol.goal_weight().unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn grounding_matches_implicit_solving() {
        let p = parse_problem(&demo_grammar(), &["a", "b"]).unwrap();
        let grounded = p.ground(100).unwrap();
        let dp = engine::dp_acyclic(&grounded).unwrap();
        let (sol, _) = engine::kld(&p).unwrap();
        assert_eq!(dp.goal_weight(), sol.goal_weight());
    }
}
