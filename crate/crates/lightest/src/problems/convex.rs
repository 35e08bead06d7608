//! Convex object detection around a fixed reference point.
//!
//! A hypothesis assigns an integer radius `r_i in [0, R-1]` to each of `N`
//! evenly spaced angles; it is convex when the boundary turns left at every
//! sample point (non-strict, so collinear points are allowed). The energy is
//! the sum of per-segment data costs `D(i, r_i, r_{i+1})`, wrapping around.
//!
//! Partial objects `convex(i, r_0, r_1, r_{i-1}, r_i)` form a lightest
//! derivation problem; a range-partition hierarchy over the radius space
//! coarsens it for hierarchical search and pattern databases.

use std::sync::Arc;

use crate::abstraction::{build_pdb, AbstractionMap, PatternDatabase};
use crate::error::{Error, Result};
use crate::hald::Hierarchy;
use crate::problem::{Expander, Problem, Query};
use crate::rule::Rule;
use crate::statement::{Registry, Statement};

use super::image::{raster_segment, Image};

/// Largest supported radius bound; validity tables are cubic in `R`.
pub const MAX_R: usize = 256;

/// Local convexity of three consecutive polar samples with radii
/// `(prev, cur, next)` under uniform angle spacing `2*pi/n`.
///
/// The boundary turns left at the middle point iff the cross product of the
/// incoming and outgoing edge vectors is non-negative; dividing it by
/// `sin(2*pi/n) > 0` leaves `cur*(prev + next) >= 2*cos(2*pi/n)*prev*next`.
/// Both sides are integers except for the cosine, which is exactly 0, 1, -1
/// for n = 4, 6, 3; those cases and the `prev*next = 0` case are decided in
/// integer arithmetic so collinear-through-center ties never flip sign.
pub fn locally_convex(prev: u32, cur: u32, next: u32, n: usize) -> bool {
    let t = prev as i64 * next as i64;
    if t == 0 {
        return true;
    }
    let s = cur as i64 * (prev as i64 + next as i64);
    match n {
        3 => s + t >= 0,
        4 => s >= 0,
        6 => s >= t,
        _ => {
            let two_cos = 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
            s as f64 >= two_cos * t as f64
        }
    }
}

/// Abstract local convexity over ranges `[lo, hi]` of radii: true iff some
/// integer triple drawn from the ranges is locally convex. The cross product
/// is multilinear in the three radii, so its maximum over the box is attained
/// at a corner; checking the 8 corners is exact.
pub fn range_locally_convex(
    prev: (u32, u32),
    cur: (u32, u32),
    next: (u32, u32),
    n: usize,
) -> bool {
    for &a in &[prev.0, prev.1] {
        for &b in &[cur.0, cur.1] {
            for &c in &[next.0, next.1] {
                if locally_convex(a, b, c, n) {
                    return true;
                }
            }
        }
    }
    false
}

/// Precomputed validity lists of the convexity predicate over `[0, r)^3`.
pub struct ConvexityTable {
    r: usize,
    next: Vec<Vec<u16>>,
    prev: Vec<Vec<u16>>,
}

impl ConvexityTable {
    pub fn build(r: usize, pred: impl Fn(u32, u32, u32) -> bool) -> Self {
        let mut next = vec![Vec::new(); r * r];
        let mut prev = vec![Vec::new(); r * r];
        for a in 0..r {
            for b in 0..r {
                for c in 0..r {
                    if pred(a as u32, b as u32, c as u32) {
                        next[a * r + b].push(c as u16);
                        prev[b * r + c].push(a as u16);
                    }
                }
            }
        }
        ConvexityTable { r, next, prev }
    }

    /// Radii `c` with `pred(a, b, c)`.
    pub fn next_valid(&self, a: u32, b: u32) -> &[u16] {
        &self.next[a as usize * self.r + b as usize]
    }

    /// Radii `a` with `pred(a, b, c)`.
    pub fn prev_valid(&self, b: u32, c: u32) -> &[u16] {
        &self.prev[b as usize * self.r + c as usize]
    }

    pub fn is_valid(&self, a: u32, b: u32, c: u32) -> bool {
        self.next_valid(a, b).binary_search(&(c as u16)).is_ok()
    }
}

/// Per-segment boundary data costs `D(i, r_i, r_{i+1})`, an `n * r * r`
/// table.
#[derive(Clone, Debug)]
pub struct DataCost {
    pub n: usize,
    pub r: usize,
    values: Vec<f64>,
}

impl DataCost {
    pub fn from_fn(n: usize, r: usize, mut f: impl FnMut(usize, u32, u32) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * r * r);
        for i in 0..n {
            for a in 0..r {
                for b in 0..r {
                    values.push(f(i, a as u32, b as u32));
                }
            }
        }
        DataCost { n, r, values }
    }

    pub fn zero(n: usize, r: usize) -> Self {
        DataCost {
            n,
            r,
            values: vec![0.0; n * r * r],
        }
    }

    pub fn get(&self, i: usize, a: u32, b: u32) -> f64 {
        self.values[(i * self.r + a as usize) * self.r + b as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Table one level up the range hierarchy: entry `(i, s, s')` is the
    /// minimum over the two child ranges of each of `s` and `s'`.
    pub fn min_merge(&self) -> DataCost {
        let r2 = self.r / 2;
        DataCost::from_fn(self.n, r2, |i, s, t| {
            let (s, t) = (2 * s, 2 * t);
            self.get(i, s, t)
                .min(self.get(i, s + 1, t))
                .min(self.get(i, s, t + 1))
                .min(self.get(i, s + 1, t + 1))
        })
    }
}

/// Segment cost used by [`convex_data_cost`]: pixels with strong gradients
/// are cheap, capped at zero.
const G_MAX: f64 = 255.0;

/// Data costs from an image: `D(i, r_i, r_{i+1})` sums
/// `max(0, 255 - |grad|)` over the rasterized segment between the polar
/// points `(theta_i, r_i)` and `(theta_{i+1}, r_{i+1})` around `center`.
pub fn convex_data_cost(img: &Image, center: (i32, i32), n: usize, r: usize) -> Result<DataCost> {
    let (cx, cy) = center;
    let rad = r as i32 - 1;
    if cx - rad < 0
        || cy - rad < 0
        || cx + rad >= img.width as i32
        || cy + rad >= img.height as i32
    {
        return Err(Error::Geometry(format!(
            "ball of radius {r} around ({cx},{cy}) leaves the {}x{} image",
            img.width, img.height
        )));
    }
    let mut gmag = vec![0.0f64; img.width * img.height];
    for y in 0..img.height {
        for x in 0..img.width {
            gmag[y * img.width + x] = img.gradient_magnitude(x as i32, y as i32);
        }
    }
    let point = |i: usize, radius: u32| -> (i32, i32) {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        (
            cx + (radius as f64 * theta.cos()).round() as i32,
            cy + (radius as f64 * theta.sin()).round() as i32,
        )
    };
    Ok(DataCost::from_fn(n, r, |i, a, b| {
        let p = point(i, a);
        let q = point((i + 1) % n, b);
        raster_segment(p, q)
            .into_iter()
            .map(|(x, y)| {
                let x = x.clamp(0, img.width as i32 - 1) as usize;
                let y = y.clamp(0, img.height as i32 - 1) as usize;
                (G_MAX - gmag[y * img.width + x]).max(0.0)
            })
            .sum()
    }))
}

/// A convex detection instance: `n` angles, radius bound `r`, data costs,
/// and the precomputed convexity table.
#[derive(Clone)]
pub struct ConvexSpec {
    pub n: usize,
    pub r: usize,
    pub costs: Arc<DataCost>,
    conv: Arc<ConvexityTable>,
}

impl ConvexSpec {
    pub fn new(n: usize, r: usize, costs: DataCost) -> Result<Self> {
        if n < 3 {
            return Err(Error::Input("need at least 3 angles".into()));
        }
        if r == 0 || r > MAX_R {
            return Err(Error::Input(format!("radius bound must be in 1..={MAX_R}")));
        }
        if costs.n != n || costs.r != r {
            return Err(Error::Input("cost table dimensions do not match".into()));
        }
        if costs.values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Input("data costs must be non-negative and finite".into()));
        }
        let conv = Arc::new(ConvexityTable::build(r, |a, b, c| locally_convex(a, b, c, n)));
        Ok(ConvexSpec {
            n,
            r,
            costs: Arc::new(costs),
            conv,
        })
    }

    pub fn from_image(img: &Image, center: (i32, i32), n: usize, r: usize) -> Result<Self> {
        ConvexSpec::new(n, r, convex_data_cost(img, center, n, r)?)
    }

    pub fn convexity(&self) -> &ConvexityTable {
        &self.conv
    }

    /// Whether a full hypothesis satisfies every wraparound convexity
    /// constraint.
    pub fn is_convex(&self, hyp: &[u32]) -> bool {
        let n = self.n;
        (0..n).all(|i| locally_convex(hyp[(i + n - 1) % n], hyp[i], hyp[(i + 1) % n], n))
    }

    /// Energy of a hypothesis, folded in the same order the solvers fold it
    /// so cross-checks compare bit-exactly. `None` if the hypothesis is not
    /// convex.
    pub fn energy_of(&self, hyp: &[u32]) -> Option<f64> {
        if hyp.len() != self.n || !self.is_convex(hyp) {
            return None;
        }
        let mut acc = self.costs.get(0, hyp[0], hyp[1 % self.n]);
        for i in 1..self.n {
            acc += self.costs.get(i, hyp[i], hyp[(i + 1) % self.n]);
        }
        Some(acc)
    }
}

struct ConvexExpander {
    n: usize,
    costs: Arc<DataCost>,
    conv: Arc<ConvexityTable>,
}

fn convex_stmt(q: &mut Query<'_>, i: i32, r0: i32, r1: i32, prev: i32, cur: i32) -> Statement {
    q.intern("convex", &[i, r0, r1, prev, cur])
}

impl Expander for ConvexExpander {
    fn consequences(&self, just: Statement, q: &mut Query<'_>, emit: &mut dyn FnMut(Rule)) {
        if q.label(just) == "goal" {
            return;
        }
        let args = q.args(just);
        let (i, r0, r1, prev, cur) = (args[0] as usize, args[1], args[2], args[3], args[4]);
        if i < self.n {
            let succ: Vec<u16> = self.conv.next_valid(prev as u32, cur as u32).to_vec();
            for next in succ {
                let concl = convex_stmt(q, i as i32 + 1, r0, r1, cur, next as i32);
                emit(Rule::additive(
                    vec![just],
                    concl,
                    self.costs.get(i, cur as u32, next as u32),
                ));
            }
        } else {
            // a closed object: r_N must return to r_0 and the boundary must
            // stay convex across the seam
            if cur == r0 && locally_convex(prev as u32, r0 as u32, r1 as u32, self.n) {
                let goal = q.intern("goal", &[]);
                emit(Rule::additive(vec![just], goal, 0.0));
            }
        }
    }

    fn producers(&self, of: Statement, q: &mut Query<'_>, emit: &mut dyn FnMut(Rule)) {
        let r = self.costs.r as i32;
        if q.label(of) == "goal" {
            for r0 in 0..r {
                for r1 in 0..r {
                    for prev in 0..r {
                        if !locally_convex(prev as u32, r0 as u32, r1 as u32, self.n) {
                            continue;
                        }
                        if let Some(ant) =
                            q.lookup("convex", &[self.n as i32, r0, r1, prev, r0])
                        {
                            if q.weight_of(ant).is_some() {
                                emit(Rule::additive(vec![ant], of, 0.0));
                            }
                        }
                    }
                }
            }
            return;
        }
        let args = q.args(of);
        let (i1, r0, r1, prev, cur) = (args[0] as usize, args[1], args[2], args[3], args[4]);
        if i1 <= 1 {
            return; // layer-1 statements are axioms
        }
        let before: Vec<u16> = self.conv.prev_valid(prev as u32, cur as u32).to_vec();
        for a in before {
            if let Some(ant) = q.lookup("convex", &[i1 as i32 - 1, r0, r1, a as i32, prev]) {
                if q.weight_of(ant).is_some() {
                    emit(Rule::additive(
                        vec![ant],
                        of,
                        self.costs.get(i1 - 1, prev as u32, cur as u32),
                    ));
                }
            }
        }
    }

    fn supports_producers(&self) -> bool {
        true
    }
}

fn convex_level_problem(
    n: usize,
    r: usize,
    costs: Arc<DataCost>,
    conv: Arc<ConvexityTable>,
) -> Result<Problem> {
    let mut reg = Registry::new();
    let goal = reg.intern("goal", &[]);
    let mut axioms = Vec::with_capacity(r * r);
    for r0 in 0..r as i32 {
        for r1 in 0..r as i32 {
            let s = reg.intern("convex", &[1, r0, r1, r0, r1]);
            axioms.push(Rule::axiom(s, costs.get(0, r0 as u32, r1 as u32)));
        }
    }
    let expander = Arc::new(ConvexExpander { n, costs, conv });
    Problem::implicit(reg, axioms, goal, expander)
}

/// Implicit lightest derivation problem over partial convex objects.
pub fn convex_problem(spec: &ConvexSpec) -> Result<Problem> {
    convex_level_problem(spec.n, spec.r, spec.costs.clone(), spec.conv.clone())
}

/// Range-partition hierarchy with levels `0..=levels`; level `k` partitions
/// `[0, R-1]` into ranges of `2^k` consecutive radii, takes the minimum data
/// cost over each range pair, and relaxes convexity to "some integer triple
/// in the ranges is locally convex".
pub fn convex_hierarchy(spec: &ConvexSpec, levels: usize) -> Result<Hierarchy> {
    if !spec.r.is_power_of_two() {
        return Err(Error::Input("radius bound must be a power of two".into()));
    }
    let max_level = spec.r.trailing_zeros() as usize;
    if levels > max_level {
        return Err(Error::Input(format!(
            "levels {levels} exceeds log2(R) = {max_level}"
        )));
    }
    let n = spec.n;
    let mut problems = Vec::with_capacity(levels + 1);
    let mut costs = (*spec.costs).clone();
    for k in 0..=levels {
        let rk = spec.r >> k;
        let scale = 1u32 << k;
        let conv = if k == 0 {
            spec.conv.clone()
        } else {
            Arc::new(ConvexityTable::build(rk, |a, b, c| {
                let range = |j: u32| (j * scale, j * scale + scale - 1);
                range_locally_convex(range(a), range(b), range(c), n)
            }))
        };
        problems.push(convex_level_problem(n, rk, Arc::new(costs.clone()), conv)?);
        if k < levels {
            costs = costs.min_merge();
        }
    }
    let maps = (0..levels)
        .map(|_| {
            AbstractionMap::from_fn(|label, args| {
                if label == "convex" {
                    (
                        label.to_string(),
                        vec![args[0], args[1] / 2, args[2] / 2, args[3] / 2, args[4] / 2],
                    )
                } else {
                    (label.to_string(), args.to_vec())
                }
            })
        })
        .collect();
    Hierarchy::new(problems, maps)
}

/// Pattern database of lightest abstract context weights at one hierarchy
/// level, together with the map from concrete statements into it.
pub fn convex_pdb(
    spec: &ConvexSpec,
    level: usize,
    ground_budget: usize,
) -> Result<(Arc<PatternDatabase>, AbstractionMap)> {
    let hier = convex_hierarchy(spec, level)?;
    let abs = hier.level(level).ground(ground_budget)?;
    let db = build_pdb(&abs)?;
    Ok((db, hier.map_to_level(level)))
}

fn dp_budget() -> usize {
    std::env::var("LIGHTEST_DP_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1usize << 33)
}

/// Exact optimum by dynamic programming over partial objects, keeping the
/// first two and last two radii. Runs in `O(N * R^4)` by factoring per
/// `(r_0, r_1)` slice with prefix/suffix minima over the predecessor radius.
/// Returns the energy and an optimal hypothesis.
pub fn convex_dp(spec: &ConvexSpec) -> Result<(f64, Vec<u32>)> {
    let n = spec.n;
    let r = spec.r;
    let ops = n
        .checked_mul(r * r)
        .and_then(|x| x.checked_mul(r * r))
        .ok_or_else(|| Error::Input("problem size overflows".into()))?;
    if ops > dp_budget() {
        return Err(Error::BudgetExceeded {
            statements: ops,
            frontier: dp_budget(),
        });
    }

    // classify predecessor sets once: valid prev for (cur, next) is a prefix
    // or suffix of [0, r) because the constraint is linear in prev
    #[derive(Clone, Copy)]
    enum PrevRange {
        Empty,
        UpTo(usize),
        From(usize),
        List,
    }
    let mut classes = vec![PrevRange::Empty; r * r];
    for b in 0..r {
        for c in 0..r {
            let list = spec.conv.prev_valid(b as u32, c as u32);
            classes[b * r + c] = if list.is_empty() {
                PrevRange::Empty
            } else {
                let lo = list[0] as usize;
                let hi = *list.last().unwrap() as usize;
                if hi - lo + 1 == list.len() {
                    if lo == 0 {
                        PrevRange::UpTo(hi)
                    } else if hi == r - 1 {
                        PrevRange::From(lo)
                    } else {
                        PrevRange::List
                    }
                } else {
                    PrevRange::List
                }
            };
        }
    }

    let inf = f64::INFINITY;
    let mut best: Option<(f64, usize, usize, usize)> = None; // energy, r0, r1, r_{n-1}
    let mut best_hyp: Vec<u32> = Vec::new();
    // layers[i][(prev, cur)] = lightest partial object ending at
    // (r_{i-1}, r_i) within the current (r0, r1) slice, i in 1..=n
    let mut layers: Vec<Vec<f64>> = vec![vec![inf; r * r]; n + 1];
    let mut pmin = vec![inf; r * r];
    let mut smin = vec![inf; r * r];

    for r0 in 0..r {
        for r1 in 0..r {
            let start = spec.costs.get(0, r0 as u32, r1 as u32);
            if let Some((b, ..)) = best {
                if start >= b {
                    continue;
                }
            }
            for layer in layers.iter_mut() {
                layer.iter_mut().for_each(|v| *v = inf);
            }
            layers[1][r0 * r + r1] = start;
            let mut alive = true;
            for i in 1..n {
                // prefix/suffix minima over prev, per cur column
                for cur in 0..r {
                    let mut run = inf;
                    for p in 0..r {
                        run = run.min(layers[i][p * r + cur]);
                        pmin[p * r + cur] = run;
                    }
                    run = inf;
                    for p in (0..r).rev() {
                        run = run.min(layers[i][p * r + cur]);
                        smin[p * r + cur] = run;
                    }
                }
                alive = false;
                for cur in 0..r {
                    for next in 0..r {
                        let m = match classes[cur * r + next] {
                            PrevRange::Empty => inf,
                            PrevRange::UpTo(hi) => pmin[hi * r + cur],
                            PrevRange::From(lo) => smin[lo * r + cur],
                            PrevRange::List => {
                                let mut m = inf;
                                for &p in spec.conv.prev_valid(cur as u32, next as u32) {
                                    m = m.min(layers[i][p as usize * r + cur]);
                                }
                                m
                            }
                        };
                        if m.is_finite() {
                            layers[i + 1][cur * r + next] =
                                spec.costs.get(i, cur as u32, next as u32) + m;
                            alive = true;
                        }
                    }
                }
                if !alive {
                    break;
                }
            }
            if !alive {
                continue;
            }
            // close the object: r_n = r_0, convex across the seam
            for prev in spec.conv.prev_valid(r0 as u32, r1 as u32) {
                let prev = *prev as usize;
                let v = layers[n][prev * r + r0];
                if v.is_finite() && best.is_none_or(|(b, ..)| v < b) {
                    best = Some((v, r0, r1, prev));
                    // traceback while this slice's layers are in memory
                    let mut hyp = vec![0u32; n];
                    hyp[0] = r0 as u32;
                    hyp[1 % n] = r1 as u32;
                    hyp[n - 1] = prev as u32;
                    let (mut p, mut c) = (prev, r0);
                    for hi_layer in (3..=n).rev() {
                        let mut arg = None;
                        for &q in spec.conv.prev_valid(p as u32, c as u32) {
                            let w = layers[hi_layer - 1][q as usize * r + p];
                            if w.is_finite() && arg.is_none_or(|(bw, _)| w < bw) {
                                arg = Some((w, q as usize));
                            }
                        }
                        let (_, q) = arg.expect("finite layer entry has a predecessor");
                        hyp[hi_layer - 2] = q as u32;
                        c = p;
                        p = q;
                    }
                    best_hyp = hyp;
                }
            }
        }
    }

    match best {
        Some((energy, ..)) => Ok((energy, best_hyp)),
        None => Err(Error::InvalidProblem(
            "no convex hypothesis exists".into(),
        )),
    }
}

/// Exhaustive oracle over all `R^N` hypotheses. Guarded to small instances.
pub fn convex_bruteforce(spec: &ConvexSpec) -> Result<Option<(f64, Vec<u32>)>> {
    let n = spec.n;
    let r = spec.r;
    let total = (r as f64).powi(n as i32);
    if total > 1e6 {
        return Err(Error::Input(format!(
            "brute force over {total} hypotheses refused"
        )));
    }
    let mut hyp = vec![0u32; n];
    let mut best: Option<(f64, Vec<u32>)> = None;
    loop {
        if let Some(e) = spec.energy_of(&hyp) {
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, hyp.clone()));
            }
        }
        // odometer
        let mut k = 0;
        loop {
            if k == n {
                return Ok(best);
            }
            hyp[k] += 1;
            if (hyp[k] as usize) < r {
                break;
            }
            hyp[k] = 0;
            k += 1;
        }
    }
}

/// Reads the radii of a solved instance off a goal derivation.
pub fn hypothesis_from_derivation(d: &crate::derivation::Derivation, reg: &Registry, n: usize) -> Vec<u32> {
    let mut hyp = vec![0u32; n];
    let mut node = d;
    loop {
        let s = node.rule.conclusion;
        if reg.label(s) == "convex" {
            let args = reg.args(s);
            let (i, cur) = (args[0] as usize, args[4] as u32);
            hyp[0] = args[1] as u32;
            if i < n {
                hyp[i] = cur;
            }
        }
        match node.children.first() {
            Some(c) => node = c,
            None => break,
        }
    }
    hyp
}

/// Boundary pixels of a hypothesis around `center`, for overlays.
pub fn boundary_pixels(hyp: &[u32], center: (i32, i32), n: usize) -> Vec<(i32, i32)> {
    let point = |i: usize| -> (i32, i32) {
        let theta = 2.0 * std::f64::consts::PI * (i % n) as f64 / n as f64;
        (
            center.0 + (hyp[i % n] as f64 * theta.cos()).round() as i32,
            center.1 + (hyp[i % n] as f64 * theta.sin()).round() as i32,
        )
    };
    let mut out = Vec::new();
    for i in 0..n {
        out.extend(raster_segment(point(i), point(i + 1)));
    }
    out
}
