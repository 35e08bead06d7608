//! Command-line front end: solve built-in problems with a chosen algorithm,
//! run the convex benchmark, and emit expansion traces.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 goal not derivable,
//! 3 cross-algorithm energy mismatch in a benchmark.

mod hierarchy_file;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lightest::abstraction::build_pdb;
use lightest::hald::{run_hald_with, Hierarchy};
use lightest::problems::convex::{
    boundary_pixels, convex_dp, convex_hierarchy, convex_pdb, convex_problem,
    hypothesis_from_derivation, ConvexSpec,
};
use lightest::problems::curve::{curve_pixels, curve_problem, curve_pyramid, goal_rule_weight, CurveSpec};
use lightest::problems::{graph_problem, parse_problem, CircleSpec, Grammar, Graph, Image};
use lightest::{
    astar_ld_with, dp_acyclic, kld_with, trace_to_jsonl, RunOptions, SolutionSet, StopCondition,
};

const EXIT_NO_DERIVATION: i32 = 2;
const EXIT_BENCH_MISMATCH: i32 = 3;

#[derive(Parser)]
#[command(name = "lightest", about = "Lightest derivation solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem instance and print the optimal weight.
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Benchmarks over seeded synthetic inputs.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Expansion traces as JSON lines.
    #[command(subcommand)]
    Trace(TraceCommand),
}

#[derive(Subcommand)]
enum SolveCommand {
    /// Single-source shortest path over an edge-list file.
    Graph(GraphArgs),
    /// Weighted CFG parsing of a token string.
    Parse(ParseArgs),
    /// Optimal convex object around a reference point.
    Convex(ConvexArgs),
    /// Most salient curve in an image.
    Curve(CurveArgs),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Cross-algorithm benchmark on noisy circle images.
    Convex(BenchConvexArgs),
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Hierarchical run trace (expansions and pushes).
    Hald(TraceHaldArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file: `nodes n`, `source s`, `target t`, `edge x y w`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "kld")]
    algo: String,
    /// Write a JSON-lines expansion trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Enable the pop-priority monotonicity assertion.
    #[arg(long, default_value_t = true)]
    assert_monotone: bool,
}

#[derive(Args)]
struct ParseArgs {
    /// Grammar file: `X -> Y Z : w` and `X -> 'tok' : w` lines.
    #[arg(long)]
    grammar: PathBuf,
    /// Whitespace-separated input tokens.
    #[arg(long)]
    tokens: String,
    #[arg(long, default_value = "kld")]
    algo: String,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ConvexArgs {
    /// Input image (binary PGM); alternative to --synthetic.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Reference point x (defaults to the image center).
    #[arg(long)]
    cx: Option<i32>,
    /// Reference point y (defaults to the image center).
    #[arg(long)]
    cy: Option<i32>,
    /// Generate a noisy circle image instead of reading one.
    #[arg(long)]
    synthetic: bool,
    /// Angle count.
    #[arg(long = "N", default_value_t = 20)]
    n: usize,
    /// Radius bound (ball around the reference point).
    #[arg(long = "R", default_value_t = 32)]
    r: usize,
    /// Noise deviation for --synthetic.
    #[arg(long, default_value_t = 50.0)]
    sigma: f64,
    /// Seed for --synthetic.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Circle radius for --synthetic (defaults to a seed-derived value).
    #[arg(long)]
    circle_radius: Option<f64>,
    /// dp, kld, astar-pdb:LEVEL, or hald.
    #[arg(long, default_value = "hald")]
    algo: String,
    /// Hierarchy levels for hald (defaults to log2 R).
    #[arg(long)]
    levels: Option<usize>,
    /// Write a PPM overlay with the optimal boundary in red.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Pattern database cache for astar-pdb: loaded when the file exists,
    /// written after building otherwise. The file must match the instance
    /// and level.
    #[arg(long)]
    pdb: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    assert_monotone: bool,
}

#[derive(Args)]
struct CurveArgs {
    /// Input image (binary PGM).
    #[arg(long)]
    input: PathBuf,
    /// kld (exact closure, tiny images only) | astar-pdb (box pyramid)
    #[arg(long, default_value = "astar-pdb")]
    algo: String,
    /// Base segment length lower bound; the upper bound is twice this.
    #[arg(long, default_value_t = 4)]
    k1: u32,
    /// Maximum composition depth (defaults to spanning the image diagonal).
    #[arg(long)]
    depth: Option<u32>,
    /// Saliency per unit of curve length scale.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Bending cost scale.
    #[arg(long, default_value_t = 16.0)]
    mu: f64,
    /// Write a PPM overlay with the best curve in red.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchConvexArgs {
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Comma-separated noise deviations.
    #[arg(long, value_delimiter = ',', default_value = "25,50")]
    sigma: Vec<f64>,
    #[arg(long = "R", default_value_t = 32)]
    r: usize,
    #[arg(long = "N", default_value_t = 20)]
    n: usize,
    /// Comma-separated algorithms: dp, hald, astar-pdb:LEVEL.
    #[arg(long, value_delimiter = ',', default_value = "dp,hald")]
    algos: Vec<String>,
    #[arg(long)]
    levels: Option<usize>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    assert_monotone: bool,
}

#[derive(Args)]
struct TraceHaldArgs {
    /// Hierarchy file; the built-in two-level example when omitted.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Algo {
    Dp,
    Kld,
    AstarPdb(Option<usize>),
    Hald,
}

fn parse_algo(s: &str) -> Result<Algo> {
    match s {
        "dp" => Ok(Algo::Dp),
        "kld" => Ok(Algo::Kld),
        "hald" => Ok(Algo::Hald),
        "astar-pdb" => Ok(Algo::AstarPdb(None)),
        _ => match s.strip_prefix("astar-pdb:") {
            Some(level) => Ok(Algo::AstarPdb(Some(
                level
                    .parse()
                    .map_err(|_| anyhow!("bad pattern database level in `{s}`"))?,
            ))),
            None => bail!("unknown algorithm `{s}`"),
        },
    }
}

fn write_or_stdout(path: &Option<PathBuf>, contents: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, contents).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(contents)?;
            Ok(())
        }
    }
}

fn finish_run(sol: &SolutionSet, stats: &lightest::RunStats, trace: &Option<PathBuf>) -> Result<i32> {
    if let Some(path) = trace {
        let text = trace_to_jsonl(sol.registry(), &stats.trace);
        std::fs::write(path, text)?;
    }
    match sol.goal_weight() {
        Some(w) => {
            println!("{w}");
            Ok(0)
        }
        None => {
            eprintln!("goal is not derivable");
            Ok(EXIT_NO_DERIVATION)
        }
    }
}

fn run_opts(trace: bool, assert_monotone: bool) -> RunOptions {
    let mut opts = RunOptions::default().with_assertion(assert_monotone);
    if trace {
        opts = opts.with_trace();
    }
    opts
}

fn solve_graph(args: &GraphArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let graph = Graph::from_text(&text)?;
    let p = graph_problem(&graph)?;
    match parse_algo(&args.algo)? {
        Algo::Kld => {
            let opts = run_opts(args.trace.is_some(), args.assert_monotone);
            let (sol, stats) = kld_with(&p, &opts)?;
            finish_run(&sol, &stats, &args.trace)
        }
        Algo::Dp => {
            let sol = dp_acyclic(&p)?;
            match sol.goal_weight() {
                Some(w) => {
                    println!("{w}");
                    Ok(0)
                }
                None => {
                    eprintln!("goal is not derivable");
                    Ok(EXIT_NO_DERIVATION)
                }
            }
        }
        _ => bail!("graph problems support --algo kld or dp"),
    }
}

fn solve_parse(args: &ParseArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.grammar)
        .with_context(|| format!("reading {}", args.grammar.display()))?;
    let grammar = Grammar::from_text(&text)?;
    let tokens: Vec<&str> = args.tokens.split_whitespace().collect();
    let p = parse_problem(&grammar, &tokens)?;
    match parse_algo(&args.algo)? {
        Algo::Kld => {
            let opts = run_opts(args.trace.is_some(), true);
            let (sol, stats) = kld_with(&p, &opts)?;
            finish_run(&sol, &stats, &args.trace)
        }
        Algo::Dp => {
            let grounded = p.ground(10_000_000)?;
            let sol = dp_acyclic(&grounded)?;
            match sol.goal_weight() {
                Some(w) => {
                    println!("{w}");
                    Ok(0)
                }
                None => Ok(EXIT_NO_DERIVATION),
            }
        }
        _ => bail!("parse problems support --algo kld or dp"),
    }
}

fn load_convex_input(args: &ConvexArgs) -> Result<(Image, (i32, i32))> {
    if args.synthetic {
        let spec = match args.circle_radius {
            Some(radius) => CircleSpec::new(args.r, args.sigma, radius, args.seed),
            None => CircleSpec::for_seed(args.r, args.sigma, args.seed),
        };
        Ok((spec.generate(), spec.center()))
    } else {
        let path = args
            .input
            .as_ref()
            .ok_or_else(|| anyhow!("need --input or --synthetic"))?;
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let img = Image::read_pgm(std::io::BufReader::new(file))?;
        let cx = args.cx.unwrap_or(img.width as i32 / 2);
        let cy = args.cy.unwrap_or(img.height as i32 / 2);
        Ok((img, (cx, cy)))
    }
}

/// Ground budget for pattern databases and hierarchy validation.
const PDB_GROUND_BUDGET: usize = 8_000_000;

fn solve_convex(args: &ConvexArgs) -> Result<i32> {
    let (img, center) = load_convex_input(args)?;
    let spec = ConvexSpec::from_image(&img, center, args.n, args.r)?;
    let algo = parse_algo(&args.algo)?;
    let opts = run_opts(args.trace.is_some(), args.assert_monotone);
    let (energy, hyp) = match algo {
        Algo::Dp => {
            let (e, hyp) = convex_dp(&spec)?;
            (Some(e), Some(hyp))
        }
        Algo::Kld => {
            let p = convex_problem(&spec)?;
            let (sol, stats) = kld_with(&p, &opts)?;
            if let Some(path) = &args.trace {
                std::fs::write(path, trace_to_jsonl(sol.registry(), &stats.trace))?;
            }
            let hyp = sol
                .goal_weight()
                .map(|_| -> Result<Vec<u32>> {
                    let d = sol.derivation(sol.goal())?;
                    Ok(hypothesis_from_derivation(&d, sol.registry(), spec.n))
                })
                .transpose()?;
            (sol.goal_weight(), hyp)
        }
        Algo::AstarPdb(level) => {
            let level = level.ok_or_else(|| anyhow!("astar-pdb needs a level, e.g. astar-pdb:2"))?;
            let (db, map) = match &args.pdb {
                Some(path) if path.exists() => {
                    let text = std::fs::read_to_string(path)?;
                    let db = std::sync::Arc::new(lightest::PatternDatabase::from_text(&text)?);
                    let map = convex_hierarchy(&spec, level)?.map_to_level(level);
                    (db, map)
                }
                cache => {
                    let (db, map) = convex_pdb(&spec, level, PDB_GROUND_BUDGET)?;
                    if let Some(path) = cache {
                        std::fs::write(path, db.to_text())?;
                    }
                    (db, map)
                }
            };
            let h = db.heuristic(&map);
            let p = convex_problem(&spec)?;
            let (sol, stats) = astar_ld_with(&p, &h, &opts)?;
            if let Some(path) = &args.trace {
                std::fs::write(path, trace_to_jsonl(sol.registry(), &stats.trace))?;
            }
            let hyp = sol
                .goal_weight()
                .map(|_| -> Result<Vec<u32>> {
                    let d = sol.derivation(sol.goal())?;
                    Ok(hypothesis_from_derivation(&d, sol.registry(), spec.n))
                })
                .transpose()?;
            (sol.goal_weight(), hyp)
        }
        Algo::Hald => {
            let levels = args
                .levels
                .unwrap_or_else(|| spec.r.trailing_zeros() as usize);
            let hier = convex_hierarchy(&spec, levels)?;
            let res = run_hald_with(&hier, &opts)?;
            if let Some(path) = &args.trace {
                let mut buf = Vec::new();
                res.write_trace(&mut buf)?;
                std::fs::write(path, buf)?;
            }
            let hyp = res
                .goal_weight()
                .map(|_| -> Result<Vec<u32>> {
                    let d = res.goal_derivation()?;
                    Ok(hypothesis_from_derivation(&d, res.level_registry(0), spec.n))
                })
                .transpose()?;
            (res.goal_weight(), hyp)
        }
    };
    let Some(energy) = energy else {
        eprintln!("no convex object derivable");
        return Ok(EXIT_NO_DERIVATION);
    };
    if let (Some(path), Some(hyp)) = (&args.out, &hyp) {
        let pixels = boundary_pixels(hyp, center, spec.n);
        let mut buf = Vec::new();
        img.write_ppm_overlay(&pixels, &mut buf)?;
        std::fs::write(path, buf)?;
    }
    println!("{energy}");
    Ok(0)
}

fn solve_curve(args: &CurveArgs) -> Result<i32> {
    let file = std::fs::File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let img = Image::read_pgm(std::io::BufReader::new(file))?;
    let depth = args.depth.unwrap_or_else(|| {
        // enough doublings for 2^depth * k2 to span the diagonal
        let diag = ((img.width * img.width + img.height * img.height) as f64).sqrt();
        let mut depth = 0u32;
        while ((1u64 << depth) * 2 * args.k1 as u64) < diag as u64 {
            depth += 1;
        }
        depth
    });
    let spec = CurveSpec::new(img.clone(), args.k1, depth, args.lambda, args.mu)?;
    let p = curve_problem(&spec)?;
    let (weight, sol) = match parse_algo(&args.algo)? {
        Algo::Kld => {
            // exact closure over the superior curve rules, then the best
            // saliency over every curve statement; viable on tiny images only
            let opts = RunOptions {
                stop: StopCondition::QueueEmpty,
                assert_monotone: false,
                ..Default::default()
            };
            let (sol, _) = kld_with(&p, &opts)?;
            let mut best: Option<(f64, lightest::Statement)> = None;
            for (s, w) in sol.entries() {
                if sol.registry().label(s) == "curve" {
                    let depth = sol.registry().args(s)[4] as u32;
                    let saliency = goal_rule_weight(spec.lambda, depth) + w;
                    if best.is_none_or(|(b, _)| saliency < b) {
                        best = Some((saliency, s));
                    }
                }
            }
            match best {
                Some((w, s)) => {
                    if let Some(path) = &args.out {
                        let d = sol.derivation(s)?;
                        let pixels = curve_pixels(&d, sol.registry());
                        let mut buf = Vec::new();
                        img.write_ppm_overlay(&pixels, &mut buf)?;
                        std::fs::write(path, buf)?;
                    }
                    (Some(w), sol)
                }
                None => (None, sol),
            }
        }
        Algo::AstarPdb(_) => {
            let (map, abs) = curve_pyramid(&spec)?;
            let db = build_pdb(&abs)?;
            let h = db.heuristic(&map);
            let opts = run_opts(args.trace.is_some(), true);
            let (sol, stats) = astar_ld_with(&p, &h, &opts)?;
            if let Some(path) = &args.trace {
                std::fs::write(path, trace_to_jsonl(sol.registry(), &stats.trace))?;
            }
            if let Some(path) = &args.out {
                if sol.goal_weight().is_some() {
                    let d = sol.derivation(sol.goal())?;
                    let pixels = curve_pixels(&d, sol.registry());
                    let mut buf = Vec::new();
                    img.write_ppm_overlay(&pixels, &mut buf)?;
                    std::fs::write(path, buf)?;
                }
            }
            (sol.goal_weight(), sol)
        }
        _ => bail!("curve problems support --algo kld or astar-pdb"),
    };
    let _ = sol;
    match weight {
        Some(w) => {
            println!("{w}");
            Ok(0)
        }
        None => {
            eprintln!("no salient curve derivable");
            Ok(EXIT_NO_DERIVATION)
        }
    }
}

struct BenchRecord {
    algo: String,
    seed: u64,
    sigma: f64,
    r: usize,
    n: usize,
    energy: f64,
    expansions: usize,
    pushes: usize,
    ms: u128,
}

fn bench_convex(args: &BenchConvexArgs) -> Result<i32> {
    if args.seeds.is_empty() {
        bail!("need at least one seed");
    }
    let algos: Vec<Algo> = args
        .algos
        .iter()
        .map(|a| parse_algo(a))
        .collect::<Result<_>>()?;
    let mut records: Vec<BenchRecord> = Vec::new();
    for (&seed, &sigma) in args
        .seeds
        .iter()
        .flat_map(|s| args.sigma.iter().map(move |g| (s, g)))
    {
        let circle = CircleSpec::for_seed(args.r, sigma, seed);
        let img = circle.generate();
        let spec = ConvexSpec::from_image(&img, circle.center(), args.n, args.r)?;
        for (algo, name) in algos.iter().zip(args.algos.iter()) {
            let started = Instant::now();
            let (energy, expansions, pushes) = match algo {
                Algo::Dp => {
                    let (e, _) = convex_dp(&spec)?;
                    // table cells computed, the dp analogue of expansions
                    (e, args.n * spec.r.pow(4), 0)
                }
                Algo::Kld => {
                    let (sol, stats) =
                        kld_with(&convex_problem(&spec)?, &RunOptions::default())?;
                    let e = sol.goal_weight().ok_or_else(|| anyhow!("no derivation"))?;
                    (e, stats.expansions, stats.pushes)
                }
                Algo::AstarPdb(level) => {
                    let level =
                        level.ok_or_else(|| anyhow!("astar-pdb needs a level in benchmarks"))?;
                    let (db, map) = convex_pdb(&spec, level, PDB_GROUND_BUDGET)?;
                    let h = db.heuristic(&map);
                    let opts = RunOptions::default().with_assertion(args.assert_monotone);
                    let (sol, stats) = astar_ld_with(&convex_problem(&spec)?, &h, &opts)?;
                    let e = sol.goal_weight().ok_or_else(|| anyhow!("no derivation"))?;
                    (e, stats.expansions, stats.pushes)
                }
                Algo::Hald => {
                    let levels = args
                        .levels
                        .unwrap_or_else(|| spec.r.trailing_zeros() as usize);
                    let hier = convex_hierarchy(&spec, levels)?;
                    let opts = RunOptions::default().with_assertion(args.assert_monotone);
                    let res = run_hald_with(&hier, &opts)?;
                    let e = res.goal_weight().ok_or_else(|| anyhow!("no derivation"))?;
                    (e, res.expansions(), res.stats.pushes)
                }
            };
            records.push(BenchRecord {
                algo: name.clone(),
                seed,
                sigma,
                r: args.r,
                n: args.n,
                energy,
                expansions,
                pushes,
                ms: started.elapsed().as_millis(),
            });
        }
        // per-instance energies must agree across algorithms
        let instance: Vec<&BenchRecord> = records
            .iter()
            .filter(|rec| rec.seed == seed && rec.sigma == sigma)
            .collect();
        for pair in instance.windows(2) {
            if (pair[0].energy - pair[1].energy).abs() > 1e-9 {
                eprintln!(
                    "energy mismatch on seed {seed} sigma {sigma}: {} gives {}, {} gives {}",
                    pair[0].algo, pair[0].energy, pair[1].algo, pair[1].energy
                );
                return Ok(EXIT_BENCH_MISMATCH);
            }
        }
    }
    records.sort_by(|a, b| {
        (&a.algo, a.seed)
            .cmp(&(&b.algo, b.seed))
            .then(a.sigma.partial_cmp(&b.sigma).unwrap())
    });
    let mut csv = String::from("algo,seed,sigma,R,N,energy,expansions,pushes,ms\n");
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.algo, r.seed, r.sigma, r.r, r.n, r.energy, r.expansions, r.pushes, r.ms
        ));
    }
    write_or_stdout(&args.out, csv.as_bytes())?;
    Ok(0)
}

fn trace_hald(args: &TraceHaldArgs) -> Result<i32> {
    let hier: Hierarchy = match &args.hierarchy {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            hierarchy_file::parse(&text)?
        }
        None => lightest::hald::demo_hierarchy(2),
    };
    let opts = RunOptions::default().with_trace().with_push_trace();
    let res = run_hald_with(&hier, &opts)?;
    let mut buf = Vec::new();
    res.write_trace(&mut buf)?;
    write_or_stdout(&args.out, &buf)?;
    if res.goal_weight().is_none() {
        eprintln!("goal is not derivable");
        return Ok(EXIT_NO_DERIVATION);
    }
    Ok(0)
}

fn main() {
    // usage errors exit 1 (clap's default would be 2, which is reserved for
    // the no-derivation outcome); --help and --version stay successful
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(SolveCommand::Graph(args)) => solve_graph(args),
        Command::Solve(SolveCommand::Parse(args)) => solve_parse(args),
        Command::Solve(SolveCommand::Convex(args)) => solve_convex(args),
        Command::Solve(SolveCommand::Curve(args)) => solve_curve(args),
        Command::Bench(BenchCommand::Convex(args)) => bench_convex(args),
        Command::Trace(TraceCommand::Hald(args)) => trace_hald(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
