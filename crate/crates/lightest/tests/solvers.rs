//! Cross-checks of the agenda solvers against independent oracles.

mod common;

use common::{cky, dijkstra, enumerate_simple_paths, random_acyclic_problem, random_grammar};
use lightest::problems::{demo_grammar, demo_graph, graph_problem, parse_problem, Graph, SplitMix64};
use lightest::{dp_acyclic, kld, kld_with, run_prioritized, Prioritizer, RunOptions};

#[test]
fn demo_graph_weight_matches_path_enumeration() {
    let g = demo_graph();
    let oracle = enumerate_simple_paths(&g).unwrap();
    let (sol, _) = kld(&graph_problem(&g).unwrap()).unwrap();
    assert_eq!(sol.goal_weight(), Some(oracle));
    assert_eq!(oracle, 3.0);
}

#[test]
fn random_graphs_match_dijkstra() {
    let mut rng = SplitMix64::new(2024);
    for _ in 0..40 {
        let nodes = 2 + rng.below(49) as usize;
        let mut edges = Vec::new();
        let edge_count = nodes + rng.below(3 * nodes as u64) as usize;
        for _ in 0..edge_count {
            let x = rng.below(nodes as u64) as u32;
            let y = rng.below(nodes as u64) as u32;
            edges.push((x, y, rng.below(10) as f64));
        }
        let g = Graph::new(nodes, edges, 0, (nodes - 1) as u32).unwrap();
        let dist = dijkstra(&g);
        let p = graph_problem(&g).unwrap();
        let (sol, _) = kld_with(&p, &RunOptions::closure().with_assertion(true)).unwrap();
        for v in 0..nodes {
            let s = p.registry().lookup("path", &[v as i32]);
            let engine = s.and_then(|s| sol.weight_of(s));
            let oracle = dist[v].is_finite().then_some(dist[v]);
            assert_eq!(engine, oracle, "node {v} of {nodes}");
        }
    }
}

#[test]
fn demo_grammar_matches_cky() {
    let g = demo_grammar();
    let p = parse_problem(&g, &["a", "b"]).unwrap();
    let (sol, _) = kld(&p).unwrap();
    assert_eq!(sol.goal_weight(), cky(&g, &["a", "b"]));
    // dp over the grounded problem agrees too
    let dp = dp_acyclic(&p.ground(1000).unwrap()).unwrap();
    assert_eq!(dp.goal_weight(), sol.goal_weight());
}

#[test]
fn random_grammars_match_cky() {
    for seed in 0..60u64 {
        let (g, tokens) = random_grammar(seed);
        let toks: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let oracle = cky(&g, &toks);
        let p = parse_problem(&g, &toks).unwrap();
        let (sol, _) = kld(&p).unwrap();
        assert_eq!(sol.goal_weight(), oracle, "seed {seed}, input {tokens:?}");

        // closure agrees with the full chart, phrase by phrase
        let (full, _) = kld_with(&p, &RunOptions::closure()).unwrap();
        let chart = common::cky_chart(&g, &toks);
        for x in 0..g.nonterminals.len() {
            for i in 0..toks.len() {
                for k in (i + 1)..=toks.len() {
                    let oracle = chart[i][k][x];
                    let engine = full
                        .registry()
                        .lookup("phrase", &[x as i32, i as i32 + 1, k as i32 + 1])
                        .and_then(|s| full.weight_of(s));
                    let oracle = oracle.is_finite().then_some(oracle);
                    assert_eq!(engine, oracle, "seed {seed} phrase({x},{i},{k})");
                }
            }
        }
    }
}

#[test]
fn grounding_reproduces_explicit_construction() {
    // the implicit form of the demo graph grounds to the same rule set
    let g = demo_graph();
    let grounded_direct = graph_problem(&g).unwrap();

    // implicit variant: same axiom, expander follows edges
    use lightest::{Expander, Query, Registry, Rule, Statement};
    use std::sync::Arc;
    struct EdgeExpander {
        edges: Vec<(u32, u32, f64)>,
    }
    impl Expander for EdgeExpander {
        fn consequences(&self, just: Statement, q: &mut Query<'_>, emit: &mut dyn FnMut(Rule)) {
            let node = q.args(just)[0] as u32;
            for &(x, y, w) in &self.edges {
                if x == node {
                    let to = q.intern("path", &[y as i32]);
                    emit(Rule::additive(vec![just], to, w));
                }
            }
        }
    }
    let mut reg = Registry::new();
    let s = reg.intern("path", &[0]);
    let goal = reg.intern("path", &[2]);
    let implicit = lightest::Problem::implicit(
        reg,
        vec![Rule::axiom(s, 0.0)],
        goal,
        Arc::new(EdgeExpander { edges: g.edges.clone() }),
    )
    .unwrap();

    let grounded = implicit.ground(100).unwrap();
    assert_eq!(grounded.registry().len(), 3);
    assert_eq!(grounded.rules().unwrap().len(), 4);
    let mut a: Vec<String> = grounded
        .rules()
        .unwrap()
        .iter()
        .map(|r| r.display(grounded.registry()))
        .collect();
    let mut b: Vec<String> = grounded_direct
        .rules()
        .unwrap()
        .iter()
        .map(|r| r.display(grounded_direct.registry()))
        .collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);

    // a tight budget aborts with a budget error
    assert!(matches!(
        implicit.ground(2),
        Err(lightest::Error::BudgetExceeded { .. })
    ));
}

#[test]
fn oracle_equivalence_on_random_acyclic_problems() {
    let closure = RunOptions::closure();
    for seed in 0..60u64 {
        let rp = random_acyclic_problem(seed);
        let dp = dp_acyclic(&rp.problem).unwrap();
        let (k, _) = kld_with(&rp.problem, &closure).unwrap();
        let h = lightest::Heuristic::zero();
        let (a, _) = lightest::astar_ld_with(&rp.problem, &h, &closure).unwrap();
        for &s in &rp.statements {
            assert_eq!(dp.weight_of(s), k.weight_of(s), "seed {seed}");
            assert_eq!(dp.weight_of(s), a.weight_of(s), "seed {seed}");
        }
    }
}

#[test]
fn expansion_orders_are_sorted_by_their_figures_of_merit() {
    let opts = RunOptions::closure().with_trace();
    for seed in 0..25u64 {
        let rp = random_acyclic_problem(seed);
        let (_, stats) = kld_with(&rp.problem, &opts).unwrap();
        let ws: Vec<f64> = stats.trace.iter().map(|r| r.weight).collect();
        assert!(ws.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {ws:?}");
    }
}

#[test]
fn fig5_fidelity_each_statement_enters_once() {
    for seed in 0..25u64 {
        let rp = random_acyclic_problem(seed);
        let (sol, stats) = kld_with(&rp.problem, &RunOptions::closure()).unwrap();
        let mut seen = std::collections::HashSet::new();
        for &s in sol.expansion_order() {
            assert!(seen.insert(s), "statement expanded twice");
        }
        assert_eq!(stats.expansions, sol.expansion_order().len());
        assert!(stats.expansions <= stats.pushes);
    }
}

#[test]
fn run_prioritized_with_explicit_prioritizer_matches_kld() {
    let p = graph_problem(&demo_graph()).unwrap();
    let (a, _) = run_prioritized(&p, Prioritizer::ConclusionWeight, &RunOptions::default()).unwrap();
    let (b, _) = kld(&p).unwrap();
    assert_eq!(a.goal_weight(), b.goal_weight());
}
