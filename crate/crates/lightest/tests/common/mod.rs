//! Shared oracles and random-instance generators for the integration and
//! acceptance suites. Everything here is independent of the solver paths it
//! checks: shortest paths run textbook Dijkstra, parsing runs an exhaustive
//! CKY table, and random problems are built acyclic by construction.

#![allow(dead_code)]

use lightest::abstraction::AbstractionMap;
use lightest::hald::Hierarchy;
use lightest::problems::{Grammar, GrammarBuilder, Graph, SplitMix64};
use lightest::{Problem, Registry, Rule, Statement};

/// Textbook Dijkstra over an adjacency list; the oracle for graph problems.
pub fn dijkstra(g: &Graph) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.nodes];
    let mut done = vec![false; g.nodes];
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.nodes];
    for &(x, y, w) in &g.edges {
        adj[x as usize].push((y as usize, w));
    }
    dist[g.source as usize] = 0.0;
    loop {
        let mut best: Option<usize> = None;
        for v in 0..g.nodes {
            if !done[v]
                && dist[v].is_finite()
                && best.map_or(true, |b| dist[v] < dist[b])
            {
                best = Some(v);
            }
        }
        let Some(u) = best else { break };
        done[u] = true;
        for &(v, w) in &adj[u] {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
            }
        }
    }
    dist
}

/// Exhaustive CKY chart: `chart[i][k][x]` is the lightest phrase of category
/// `x` over tokens `i..k` (0-based, exclusive), or `+inf`. Weights fold as
/// `(w_prod + left) + right`, the same association the engine uses, so
/// comparisons are exact.
pub fn cky_chart(g: &Grammar, tokens: &[&str]) -> Vec<Vec<Vec<f64>>> {
    let n = tokens.len();
    let nt = g.nonterminals.len();
    let inf = f64::INFINITY;
    let mut best = vec![vec![vec![inf; nt]; n + 1]; n + 1];
    for (i, tok) in tokens.iter().enumerate() {
        let Some(tid) = g.terminal_id(tok) else { continue };
        for &(x, t, w) in &g.lexical {
            if t == tid && w < best[i][i + 1][x as usize] {
                best[i][i + 1][x as usize] = w;
            }
        }
    }
    for span in 2..=n {
        for i in 0..=(n - span) {
            let k = i + span;
            for j in (i + 1)..k {
                for &(x, y, z, w) in &g.binary {
                    let left = best[i][j][y as usize];
                    let right = best[j][k][z as usize];
                    if left.is_finite() && right.is_finite() {
                        let total = (w + left) + right;
                        if total < best[i][k][x as usize] {
                            best[i][k][x as usize] = total;
                        }
                    }
                }
            }
        }
    }
    best
}

/// Lightest full parse per [`cky_chart`].
pub fn cky(g: &Grammar, tokens: &[&str]) -> Option<f64> {
    for t in tokens {
        g.terminal_id(t)?;
    }
    let chart = cky_chart(g, tokens);
    let w = chart[0][tokens.len()][g.start as usize];
    w.is_finite().then_some(w)
}

/// Enumerates all simple paths from source to target; the oracle for small
/// graphs, independent of any priority-queue machinery.
pub fn enumerate_simple_paths(g: &Graph) -> Option<f64> {
    fn walk(
        adj: &[Vec<(usize, f64)>],
        node: usize,
        target: usize,
        seen: &mut Vec<bool>,
        acc: f64,
        best: &mut Option<f64>,
    ) {
        if node == target && best.map_or(true, |b| acc < b) {
            *best = Some(acc);
        }
        for &(next, w) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                walk(adj, next, target, seen, acc + w, best);
                seen[next] = false;
            }
        }
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.nodes];
    for &(x, y, w) in &g.edges {
        adj[x as usize].push((y as usize, w));
    }
    let mut seen = vec![false; g.nodes];
    seen[g.source as usize] = true;
    let mut best = None;
    walk(&adj, g.source as usize, g.target as usize, &mut seen, 0.0, &mut best);
    best
}

/// A random acyclic grounded problem: statements `s(0..n)`, every statement
/// derivable (each has at least one rule from strictly earlier statements),
/// integer additive weights in 0..=10, plus optional extra rules and one
/// underivable orphan statement.
pub struct RandomProblem {
    pub problem: Problem,
    pub statements: Vec<Statement>,
}

pub fn random_acyclic_problem(seed: u64) -> RandomProblem {
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x9e37).wrapping_add(17));
    let n = 3 + rng.below(10) as usize; // 3..=12 statements
    let mut reg = Registry::new();
    let statements: Vec<Statement> = (0..n).map(|i| reg.intern("s", &[i as i32])).collect();
    let mut rules = Vec::new();
    for (i, &s) in statements.iter().enumerate() {
        let w = rng.below(11) as f64;
        if i == 0 {
            rules.push(Rule::axiom(s, w));
            continue;
        }
        // guarantee derivability with one rule from earlier statements
        let arity = 1 + rng.below(2.min(i as u64)) as usize;
        let mut ants = Vec::new();
        for _ in 0..arity {
            ants.push(statements[rng.below(i as u64) as usize]);
        }
        rules.push(Rule::additive(ants, s, w));
    }
    let extra = rng.below(19) as usize; // up to 30 rules total
    for _ in 0..extra {
        if rules.len() >= 30 {
            break;
        }
        let concl_idx = 1 + rng.below((n - 1) as u64) as usize;
        let arity = 1 + rng.below(2.min(concl_idx as u64)) as usize;
        let mut ants = Vec::new();
        for _ in 0..arity {
            ants.push(statements[rng.below(concl_idx as u64) as usize]);
        }
        rules.push(Rule::additive(ants, statements[concl_idx], rng.below(11) as f64));
    }
    // an orphan statement with no deriving rule
    let orphan = reg.intern("orphan", &[]);
    let _ = orphan;
    let goal = statements[n - 1];
    RandomProblem {
        problem: Problem::grounded(reg, rules, goal).unwrap(),
        statements,
    }
}

/// A random coarsening map for `random_acyclic_problem` statements: argument
/// `i` maps to `i % buckets`.
pub fn random_coarsening(seed: u64) -> AbstractionMap {
    let mut rng = SplitMix64::new(seed ^ 0xabcd);
    let buckets = 1 + rng.below(5) as i32;
    AbstractionMap::from_fn(move |label, args| {
        if label == "s" {
            ("s".to_string(), vec![args[0] % buckets])
        } else {
            (label.to_string(), args.to_vec())
        }
    })
}

/// A random 3-level hierarchy built by projecting a random problem through
/// two random coarsenings; valid by construction.
pub fn random_hierarchy(seed: u64) -> Hierarchy {
    let base = random_acyclic_problem(seed).problem;
    let m1 = random_coarsening(seed);
    let level1 = lightest::abstraction::project(&base, &m1).unwrap();
    let m2 = AbstractionMap::from_fn(move |label, args| {
        if label == "s" {
            ("s".to_string(), vec![args[0] % 2])
        } else {
            (label.to_string(), args.to_vec())
        }
    });
    let level2 = lightest::abstraction::project(&level1, &m2).unwrap();
    Hierarchy::new(vec![base, level1, level2], vec![m1, m2]).unwrap()
}

/// A random CNF grammar over a handful of symbols plus an input it can cover
/// lexically.
pub fn random_grammar(seed: u64) -> (Grammar, Vec<String>) {
    let mut rng = SplitMix64::new(seed ^ 0x6aa3);
    let nts = ["S", "A", "B", "C"];
    let toks = ["a", "b", "c"];
    let mut b = GrammarBuilder::new();
    for &x in &nts {
        for &t in &toks {
            if rng.next_f64() < 0.6 {
                b.lexical(x, t, (rng.below(9) + 1) as f64 / 4.0);
            }
        }
    }
    for &x in &nts {
        for &y in &nts {
            for &z in &nts {
                if rng.next_f64() < 0.3 {
                    b.binary(x, y, z, (rng.below(9) + 1) as f64 / 4.0);
                }
            }
        }
    }
    // make sure every terminal is lexically coverable
    b.lexical("A", "a", 1.0);
    b.lexical("B", "b", 1.0);
    b.lexical("C", "c", 1.0);
    b.binary("S", "A", "B", 0.5);
    let g = b.build("S");
    let len = 2 + rng.below(5) as usize; // 2..=6 tokens
    let tokens: Vec<String> = (0..len)
        .map(|_| toks[rng.below(3) as usize].to_string())
        .collect();
    (g, tokens)
}
