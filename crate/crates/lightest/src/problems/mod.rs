//! Built-in problem families: shortest paths, CFG parsing, convex object
//! detection, salient curves, plus image io and synthetic inputs.

pub mod convex;
pub mod curve;
pub mod grammar;
pub mod graph;
pub mod image;
pub mod synth;

pub use convex::{
    convex_bruteforce, convex_data_cost, convex_dp, convex_hierarchy, convex_pdb, convex_problem,
    locally_convex, range_locally_convex, ConvexSpec, DataCost,
};
pub use curve::{curve_problem, curve_pyramid, seg_cost, shape_cost, CurveSpec};
pub use grammar::{demo_grammar, parse_problem, Grammar, GrammarBuilder};
pub use graph::{demo_graph, graph_problem, Graph};
pub use image::{raster_segment, Image};
pub use synth::{CircleSpec, SplitMix64};
