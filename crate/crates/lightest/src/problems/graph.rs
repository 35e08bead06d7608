//! Single-source shortest paths as a lightest derivation problem: one axiom
//! `path(s) = 0` and one rule `path(x) -> path(y)` per edge.

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::rule::Rule;
use crate::statement::Registry;

#[derive(Clone, Debug)]
pub struct Graph {
    pub nodes: usize,
    pub edges: Vec<(u32, u32, f64)>,
    pub source: u32,
    pub target: u32,
}

impl Graph {
    pub fn new(nodes: usize, edges: Vec<(u32, u32, f64)>, source: u32, target: u32) -> Result<Self> {
        let check = |n: u32| (n as usize) < nodes;
        if !check(source) || !check(target) {
            return Err(Error::Input("source/target out of range".into()));
        }
        for &(x, y, w) in &edges {
            if !check(x) || !check(y) {
                return Err(Error::Input(format!("edge ({x},{y}) out of range")));
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::Input(format!("edge ({x},{y}) has weight {w}")));
            }
        }
        Ok(Graph {
            nodes,
            edges,
            source,
            target,
        })
    }

    /// Edge-list text: `nodes <n>`, `source <s>`, `target <t>`, then one
    /// `edge <x> <y> <w>` per line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut nodes = None;
        let mut source = None;
        let mut target = None;
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Input(format!("line {}: {msg}", lineno + 1));
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("nodes") => {
                    nodes = Some(
                        parts
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| err("bad node count"))?,
                    )
                }
                Some("source") => {
                    source = Some(
                        parts
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| err("bad source"))?,
                    )
                }
                Some("target") => {
                    target = Some(
                        parts
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| err("bad target"))?,
                    )
                }
                Some("edge") => {
                    let x = parts.next().and_then(|t| t.parse().ok());
                    let y = parts.next().and_then(|t| t.parse().ok());
                    let w = parts.next().and_then(|t| t.parse().ok());
                    match (x, y, w) {
                        (Some(x), Some(y), Some(w)) => edges.push((x, y, w)),
                        _ => return Err(err("bad edge line")),
                    }
                }
                _ => return Err(err("unrecognized line")),
            }
        }
        Graph::new(
            nodes.ok_or_else(|| Error::Input("missing nodes line".into()))?,
            edges,
            source.ok_or_else(|| Error::Input("missing source line".into()))?,
            target.ok_or_else(|| Error::Input("missing target line".into()))?,
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "nodes {}\nsource {}\ntarget {}\n",
            self.nodes, self.source, self.target
        );
        for &(x, y, w) in &self.edges {
            out.push_str(&format!("edge {x} {y} {w}\n"));
        }
        out
    }
}

/// Grounded shortest-path problem with goal `path(target)`.
pub fn graph_problem(g: &Graph) -> Result<Problem> {
    let mut reg = Registry::new();
    let mut rules = Vec::with_capacity(g.edges.len() + 1);
    let stmt = |reg: &mut Registry, n: u32| reg.intern("path", &[n as i32]);
    let s = stmt(&mut reg, g.source);
    rules.push(Rule::axiom(s, 0.0));
    for &(x, y, w) in &g.edges {
        let from = stmt(&mut reg, x);
        let to = stmt(&mut reg, y);
        rules.push(Rule::additive(vec![from], to, w));
    }
    let goal = stmt(&mut reg, g.target);
    Problem::grounded(reg, rules, goal)
}

/// Three-node example used across the test suite: edges s->a (1), s->b (5),
/// a->b (2), goal `path(b)` with lightest weight 3.
pub fn demo_graph() -> Graph {
    Graph::new(3, vec![(0, 1, 1.0), (0, 2, 5.0), (1, 2, 2.0)], 0, 2).unwrap()
}
