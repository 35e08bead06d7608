//! Generic engine for lightest derivation problems.
//!
//! A lightest derivation problem asks for a minimum-weight derivation tree of
//! a goal statement under a set of weighted inference rules. This crate
//! provides the problem model (interned statements, rules, grounded and
//! implicit problems), an agenda-driven prioritized-rule executor with three
//! exact solvers (acyclic dynamic programming, Knuth's lightest derivation,
//! and A* lightest derivation), heuristics derived from abstractions via
//! context problems and pattern databases, and a hierarchical solver that
//! runs an entire abstraction hierarchy on a single agenda.
//!
//! Built-in problem families live under [`problems`]: single-source shortest
//! paths, weighted CFG parsing, convex object detection in grayscale images,
//! and salient curve extraction.

pub mod abstraction;
pub mod derivation;
pub mod engine;
pub mod error;
pub mod hald;
pub mod problem;
pub mod problems;
pub mod rule;
pub mod solution;
pub mod statement;

pub use abstraction::{
    build_pdb, check_monotone, context_of, context_problem, project, AbstractionMap,
    MonotoneReport, PatternDatabase,
};
pub use derivation::Derivation;
pub use engine::{
    astar_ld, astar_ld_with, dp_acyclic, kld, kld_with, run_prioritized, trace_to_jsonl,
    Heuristic, Prioritizer, RunOptions, RunStats, StopCondition, TraceRecord,
};
pub use error::{Error, Result};
pub use hald::{promising_count, run_hald, run_hald_with, HaldResult, Hierarchy};
pub use problem::{Expander, IndexSpec, Problem, Query, ValidationReport};
pub use rule::{Rule, WeightFn, MAX_ARITY};
pub use solution::SolutionSet;
pub use statement::{Registry, Statement};
