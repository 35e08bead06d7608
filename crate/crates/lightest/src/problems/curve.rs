//! Salient curve extraction: almost-straight curves built by composing
//! equal-depth halves, with a scale-invariant bending cost at the junction
//! and a saliency bonus proportional to arclength.
//!
//! A statement `curve(a, b, i)` stands for a curve between pixels `a` and
//! `b` whose derivation is a full binary tree of depth `i` (length between
//! `2^i * k1` and `2^i * k2`). The goal rule subtracts `lambda * 2^i`, so it
//! is flagged signed; exact solvers must account for that (see the pattern
//! database construction notes in `abstraction`).

use std::sync::Arc;

use indexmap::IndexMap;

use crate::abstraction::AbstractionMap;
use crate::error::{Error, Result};
use crate::problem::{Expander, IndexSpec, Problem, Query};
use crate::rule::Rule;
use crate::statement::{Registry, Statement};

use super::image::{raster_segment, Image};

/// Bending cost at junction `b` of curves `a--b` and `b--c`:
/// `mu * sin^2(t)` where `t` is the interior angle at `b`. Requires
/// `t >= pi/2`, i.e. the direction turns by at most a quarter circle.
pub fn shape_cost(a: (i32, i32), b: (i32, i32), c: (i32, i32), mu: f64) -> Result<f64> {
    let u = (b.0 - a.0, b.1 - a.1);
    let v = (c.0 - b.0, c.1 - b.1);
    let u2 = (u.0 as i64 * u.0 as i64 + u.1 as i64 * u.1 as i64) as f64;
    let v2 = (v.0 as i64 * v.0 as i64 + v.1 as i64 * v.1 as i64) as f64;
    if u2 == 0.0 || v2 == 0.0 {
        return Err(Error::Geometry("degenerate segment in shape cost".into()));
    }
    let dot = u.0 as i64 * v.0 as i64 + u.1 as i64 * v.1 as i64;
    if dot < 0 {
        return Err(Error::Precondition(
            "junction angle below pi/2".into(),
        ));
    }
    let cross = (u.0 as i64 * v.1 as i64 - u.1 as i64 * v.0 as i64) as f64;
    Ok(mu * (cross * cross) / (u2 * v2))
}

/// Data cost of a base segment: per rasterized pixel,
/// `1 - min(1, |grad|/255) * |sin(angle(grad, segment))|`. Zero only where
/// the gradient saturates perpendicular to the segment; a flat image costs
/// one per pixel.
pub fn seg_cost(img: &Image, a: (i32, i32), b: (i32, i32), k1: u32, k2: u32) -> Result<f64> {
    let d2 = ((a.0 - b.0) as i64).pow(2) + ((a.1 - b.1) as i64).pow(2);
    if d2 < (k1 as i64).pow(2) || d2 > (k2 as i64).pow(2) {
        return Err(Error::Precondition(format!(
            "segment length^2 {d2} outside [{}, {}]",
            (k1 as i64).pow(2),
            (k2 as i64).pow(2)
        )));
    }
    let (dx, dy) = ((b.0 - a.0) as f64, (b.1 - a.1) as f64);
    let len = (dx * dx + dy * dy).sqrt();
    let mut total = 0.0;
    for (x, y) in raster_segment(a, b) {
        let (gx, gy) = img.gradient(x, y);
        let gm = (gx * gx + gy * gy).sqrt();
        let term = if gm == 0.0 {
            1.0
        } else {
            let m = (gm / 255.0).min(1.0);
            let sin = (gx * dy - gy * dx).abs() / (gm * len);
            1.0 - m * sin
        };
        total += term;
    }
    Ok(total)
}

/// Weight of the saliency goal rule for a depth-`i` curve.
pub fn goal_rule_weight(lambda: f64, depth: u32) -> f64 {
    -(lambda * (1u64 << depth) as f64)
}

#[derive(Clone)]
pub struct CurveSpec {
    pub img: Arc<Image>,
    /// Base segment length bounds in pixels; `k2 = 2 * k1`.
    pub k1: u32,
    pub k2: u32,
    /// Maximum composition depth.
    pub depth: u32,
    /// Saliency per unit of `2^i`.
    pub lambda: f64,
    /// Bending cost scale.
    pub mu: f64,
}

impl CurveSpec {
    pub fn new(img: Image, k1: u32, depth: u32, lambda: f64, mu: f64) -> Result<Self> {
        if k1 == 0 {
            return Err(Error::Input("k1 must be positive".into()));
        }
        if lambda < 0.0 || mu < 0.0 {
            return Err(Error::Input("lambda and mu must be non-negative".into()));
        }
        Ok(CurveSpec {
            img: Arc::new(img),
            k1,
            k2: 2 * k1,
            depth,
            lambda,
            mu,
        })
    }

    /// Canonical base pairs `(a, b)` with `k1 <= |a - b| <= k2`, `a` before
    /// `b` lexicographically.
    fn base_pairs(&self) -> Vec<((i32, i32), (i32, i32))> {
        let (w, h) = (self.img.width as i32, self.img.height as i32);
        let (k1, k2) = (self.k1 as i64, self.k2 as i64);
        let mut out = Vec::new();
        for ax in 0..w {
            for ay in 0..h {
                for dx in 0..=k2 as i32 {
                    let dys: std::ops::RangeInclusive<i32> = if dx == 0 {
                        1..=k2 as i32
                    } else {
                        -(k2 as i32)..=k2 as i32
                    };
                    for dy in dys {
                        let d2 = (dx as i64).pow(2) + (dy as i64).pow(2);
                        if d2 < k1 * k1 || d2 > k2 * k2 {
                            continue;
                        }
                        let (bx, by) = (ax + dx, ay + dy);
                        if bx < 0 || by < 0 || bx >= w || by >= h {
                            continue;
                        }
                        out.push(((ax, ay), (bx, by)));
                    }
                }
            }
        }
        out
    }
}

fn canon(p: (i32, i32), q: (i32, i32)) -> ((i32, i32), (i32, i32)) {
    if p <= q {
        (p, q)
    } else {
        (q, p)
    }
}

fn curve_args(a: (i32, i32), b: (i32, i32), depth: i32) -> [i32; 5] {
    let (a, b) = canon(a, b);
    [a.0, a.1, b.0, b.1, depth]
}

fn endpoint_key(p: (i32, i32), depth: i32) -> i64 {
    ((depth as i64) << 40) | ((p.1 as i64) << 20) | p.0 as i64
}

struct CurveExpander {
    depth: u32,
    lambda: f64,
    mu: f64,
}

impl Expander for CurveExpander {
    fn consequences(&self, just: Statement, q: &mut Query<'_>, emit: &mut dyn FnMut(Rule)) {
        if q.label(just) == "goal" {
            return;
        }
        let args = q.args(just);
        let (a, b, i) = ((args[0], args[1]), (args[2], args[3]), args[4]);

        let goal = q.intern("goal", &[]);
        emit(Rule::additive(vec![just], goal, goal_rule_weight(self.lambda, i as u32)).signed());

        if (i as u32) >= self.depth {
            return;
        }
        for &shared in &[a, b] {
            let partners: Vec<Statement> = q.indexed("endpoint", endpoint_key(shared, i)).to_vec();
            for partner in partners {
                if partner == just {
                    continue;
                }
                let p_args = q.args(partner);
                let (p, r) = ((p_args[0], p_args[1]), (p_args[2], p_args[3]));
                let outer_self = if shared == a { b } else { a };
                let outer_partner = if p == shared { r } else { p };
                // the turn at the junction must stay within a quarter circle
                let u = (shared.0 - outer_self.0, shared.1 - outer_self.1);
                let v = (outer_partner.0 - shared.0, outer_partner.1 - shared.1);
                if (u.0 as i64 * v.0 as i64 + u.1 as i64 * v.1 as i64) < 0 {
                    continue;
                }
                let w = match shape_cost(outer_self, shared, outer_partner, self.mu) {
                    Ok(w) => w,
                    Err(_) => continue,
                };
                let concl = {
                    let args = curve_args(outer_self, outer_partner, i + 1);
                    q.intern("curve", &args)
                };
                emit(Rule::additive(vec![just, partner], concl, w));
            }
        }
    }
}

/// Implicit salient curve problem. Axioms are all base segments; the
/// expander joins equal-depth curves at shared endpoints (via a secondary
/// endpoint index) and feeds every curve statement to the signed goal rule.
pub fn curve_problem(spec: &CurveSpec) -> Result<Problem> {
    let mut reg = Registry::new();
    let goal = reg.intern("goal", &[]);
    let pairs = spec.base_pairs();
    if pairs.is_empty() {
        return Err(Error::Input(format!(
            "image {}x{} is too small for base segments of length {}",
            spec.img.width, spec.img.height, spec.k1
        )));
    }
    let mut axioms = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let s = reg.intern("curve", &curve_args(a, b, 0));
        axioms.push(Rule::axiom(s, seg_cost(&spec.img, a, b, spec.k1, spec.k2)?));
    }
    let expander = Arc::new(CurveExpander {
        depth: spec.depth,
        lambda: spec.lambda,
        mu: spec.mu,
    });
    let indexes = vec![IndexSpec::new("endpoint", |reg, s| {
        if reg.label(s) == "curve" {
            let a = reg.args(s);
            vec![
                endpoint_key((a[0], a[1]), a[4]),
                endpoint_key((a[2], a[3]), a[4]),
            ]
        } else {
            vec![]
        }
    })];
    Problem::implicit_indexed(reg, axioms, goal, expander, indexes)
}

/// Pixels of the curve encoded by a goal derivation (the union of its base
/// segments), for overlays.
pub fn curve_pixels(d: &crate::derivation::Derivation, reg: &Registry) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    let mut stack = vec![d];
    while let Some(node) = stack.pop() {
        if node.children.is_empty() {
            let s = node.rule.conclusion;
            if reg.label(s) == "curve" {
                let a = reg.args(s);
                out.extend(raster_segment((a[0], a[1]), (a[2], a[3])));
            }
        }
        stack.extend(node.children.iter());
    }
    out
}

// -- box pyramid abstraction ------------------------------------------------

fn box_of(p: (i32, i32), level: i32) -> (i32, i32) {
    (p.0 >> level, p.1 >> level)
}

/// Pixel extent of a box at a level.
fn box_range(b: (i32, i32), level: i32) -> ((i32, i32), (i32, i32)) {
    let size = 1i32 << level;
    ((b.0 * size, b.0 * size + size - 1), (b.1 * size, b.1 * size + size - 1))
}

/// Smallest arc (lo, hi) in absolute radians covering the directions of all
/// vectors in the box, or `None` when the box contains the zero vector (all
/// directions are possible).
fn direction_arc(xs: (i32, i32), ys: (i32, i32)) -> Option<(f64, f64)> {
    if xs.0 <= 0 && 0 <= xs.1 && ys.0 <= 0 && 0 <= ys.1 {
        return None;
    }
    let corners = [
        (xs.0 as f64, ys.0 as f64),
        (xs.0 as f64, ys.1 as f64),
        (xs.1 as f64, ys.0 as f64),
        (xs.1 as f64, ys.1 as f64),
    ];
    let base = corners[0].1.atan2(corners[0].0);
    let mut lo = base;
    let mut hi = base;
    for &(x, y) in &corners[1..] {
        let mut a = y.atan2(x);
        // bring within pi of the base angle; a convex region avoiding the
        // origin subtends less than pi
        while a < base - std::f64::consts::PI {
            a += 2.0 * std::f64::consts::PI;
        }
        while a > base + std::f64::consts::PI {
            a -= 2.0 * std::f64::consts::PI;
        }
        lo = lo.min(a);
        hi = hi.max(a);
    }
    Some((lo, hi))
}

/// Lower bound on the bending cost between boxes `o1 -> j -> o2` at a pyramid
/// level, or `None` when no pixel triple in the boxes turns by at most a
/// quarter circle (so no concrete rule maps here).
fn box_shape_bound(
    o1: (i32, i32),
    j: (i32, i32),
    o2: (i32, i32),
    level: i32,
    mu: f64,
) -> Option<f64> {
    let (o1x, o1y) = box_range(o1, level);
    let (jx, jy) = box_range(j, level);
    let (o2x, o2y) = box_range(o2, level);
    let u = direction_arc((jx.0 - o1x.1, jx.1 - o1x.0), (jy.0 - o1y.1, jy.1 - o1y.0));
    let v = direction_arc((o2x.0 - jx.1, o2x.1 - jx.0), (o2y.0 - jy.1, o2y.1 - jy.0));
    let (u, v) = match (u, v) {
        (Some(u), Some(v)) => (u, v),
        // a zero vector in the difference box leaves the turn unconstrained
        _ => return Some(0.0),
    };
    // feasible turn angles form the interval [v.0 - u.1, v.1 - u.0]
    let lo = v.0 - u.1;
    let hi = v.1 - u.0;
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut m = center.rem_euclid(2.0 * std::f64::consts::PI);
    if m > std::f64::consts::PI {
        m -= 2.0 * std::f64::consts::PI;
    }
    let nearest = (m.abs() - half).max(0.0);
    // quarter-circle turns occur exactly in integer geometry; a rounding
    // error here must not drop the abstract counterpart of a legal rule
    if nearest > std::f64::consts::FRAC_PI_2 + 1e-9 {
        return None;
    }
    let nearest = nearest.min(std::f64::consts::FRAC_PI_2);
    Some(mu * nearest.sin().powi(2))
}

/// Box-pyramid abstraction of a curve problem: `curve(a, b, i)` maps to the
/// level-`i` boxes of its endpoints. Returns the map together with the
/// grounded abstract problem (axioms take the minimum base cost mapping into
/// each box pair; compositions take the bending bound between boxes; goal
/// rules keep their signed weights).
pub fn curve_pyramid(spec: &CurveSpec) -> Result<(AbstractionMap, Problem)> {
    let map = AbstractionMap::from_fn(|label, args| {
        if label == "curve" {
            let level = args[4];
            let a = box_of((args[0], args[1]), level);
            let b = box_of((args[2], args[3]), level);
            let (a, b) = canon(a, b);
            (label.to_string(), vec![a.0, a.1, b.0, b.1, level])
        } else {
            (label.to_string(), args.to_vec())
        }
    });

    let mut reg = Registry::new();
    let goal = reg.intern("goal", &[]);
    let mut rules: Vec<Rule> = Vec::new();

    // level-0 boxes are pixels, so abstract axioms coincide with concrete
    // ones up to deduplication
    let mut axmin: IndexMap<Statement, f64> = IndexMap::new();
    for (a, b) in spec.base_pairs() {
        let s = reg.intern("curve", &curve_args(a, b, 0));
        let w = seg_cost(&spec.img, a, b, spec.k1, spec.k2)?;
        let e = axmin.entry(s).or_insert(w);
        if w < *e {
            *e = w;
        }
    }
    let mut frontier: Vec<Statement> = Vec::new();
    for (s, w) in &axmin {
        rules.push(Rule::axiom(*s, *w));
        frontier.push(*s);
    }

    for depth in 0..spec.depth as i32 {
        // join statements sharing a box at this depth
        let mut by_box: IndexMap<(i32, i32), Vec<Statement>> = IndexMap::new();
        for &s in &frontier {
            let a = reg.args(s).to_vec();
            by_box.entry((a[0], a[1])).or_default().push(s);
            if (a[0], a[1]) != (a[2], a[3]) {
                by_box.entry((a[2], a[3])).or_default().push(s);
            }
        }
        let mut comp: IndexMap<(Statement, Statement, Statement), f64> = IndexMap::new();
        for (junction, members) in &by_box {
            for (xi, &s1) in members.iter().enumerate() {
                for &s2 in &members[xi..] {
                    let a1 = reg.args(s1).to_vec();
                    let a2 = reg.args(s2).to_vec();
                    let other = |args: &[i32]| {
                        if (args[0], args[1]) == *junction {
                            (args[2], args[3])
                        } else {
                            (args[0], args[1])
                        }
                    };
                    let o1 = other(&a1);
                    let o2 = other(&a2);
                    let Some(bound) = box_shape_bound(o1, *junction, o2, depth, spec.mu) else {
                        continue;
                    };
                    let pa = box_of_parent(o1);
                    let pb = box_of_parent(o2);
                    let concl = {
                        let (pa, pb) = canon(pa, pb);
                        reg.intern("curve", &[pa.0, pa.1, pb.0, pb.1, depth + 1])
                    };
                    let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
                    let e = comp.entry((concl, lo, hi)).or_insert(bound);
                    if bound < *e {
                        *e = bound;
                    }
                }
            }
        }
        let mut next: Vec<Statement> = Vec::new();
        let mut seen: std::collections::HashSet<Statement> = Default::default();
        for ((concl, s1, s2), w) in comp {
            rules.push(Rule::additive(vec![s1, s2], concl, w));
            if seen.insert(concl) {
                next.push(concl);
            }
        }
        frontier = next;
    }

    // signed saliency rules for every abstract curve statement
    let curve_stmts: Vec<Statement> = reg
        .statements()
        .filter(|s| reg.label(*s) == "curve")
        .collect();
    for s in curve_stmts {
        let depth = reg.args(s)[4] as u32;
        rules.push(Rule::additive(vec![s], goal, goal_rule_weight(spec.lambda, depth)).signed());
    }

    let problem = Problem::grounded(reg, rules, goal)?;
    Ok((map, problem))
}

fn box_of_parent(b: (i32, i32)) -> (i32, i32) {
    (b.0 >> 1, b.1 >> 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_cost_collinear_is_zero() {
        assert_eq!(shape_cost((0, 0), (1, 0), (2, 0), 16.0).unwrap(), 0.0);
    }

    #[test]
    fn shape_cost_right_angle_is_mu() {
        assert_eq!(shape_cost((0, 0), (1, 0), (1, 1), 16.0).unwrap(), 16.0);
    }

    #[test]
    fn shape_cost_three_quarter_turn_is_half_mu() {
        // interior angle 3*pi/4: sin^2 = 1/2 exactly in this integer geometry
        assert_eq!(shape_cost((0, 0), (1, 0), (2, 1), 16.0).unwrap(), 8.0);
    }

    #[test]
    fn shape_cost_sharp_turn_is_rejected() {
        assert!(shape_cost((0, 0), (1, 0), (0, 1), 16.0).is_err());
    }

    #[test]
    fn seg_cost_on_flat_image_counts_pixels() {
        let img = Image::filled(16, 16, 100);
        let w = seg_cost(&img, (2, 2), (5, 2), 2, 4).unwrap();
        assert_eq!(w, 4.0);
    }

    #[test]
    fn seg_cost_is_symmetric() {
        let mut img = Image::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                img.set(x, y, ((x * 13 + y * 7) % 256) as u8);
            }
        }
        let ab = seg_cost(&img, (2, 3), (6, 5), 2, 8).unwrap();
        let ba = seg_cost(&img, (6, 5), (2, 3), 2, 8).unwrap();
        assert_eq!(ab.to_bits(), ba.to_bits());
    }

    #[test]
    fn seg_cost_prefers_edges() {
        // vertical step edge at x = 8
        let mut img = Image::new(16, 16);
        for y in 0..16 {
            for x in 8..16 {
                img.set(x, y, 255);
            }
        }
        let on_edge = seg_cost(&img, (8, 4), (8, 8), 2, 4).unwrap();
        let flat_horizontal = seg_cost(&img, (2, 4), (6, 4), 2, 4).unwrap();
        assert!(on_edge < 0.5, "on-edge cost {on_edge}");
        assert!(on_edge < flat_horizontal);
    }

    #[test]
    fn seg_cost_length_bounds() {
        let img = Image::new(16, 16);
        assert!(seg_cost(&img, (0, 0), (1, 0), 2, 4).is_err());
        assert!(seg_cost(&img, (0, 0), (9, 0), 2, 4).is_err());
    }

    #[test]
    fn box_shape_bound_is_zero_for_collinear_boxes() {
        // boxes along the x axis at level 2: turns through zero are feasible
        let b = box_shape_bound((0, 1), (1, 1), (2, 1), 2, 16.0);
        assert_eq!(b, Some(0.0));
    }

    #[test]
    fn box_shape_bound_rejects_reversals_far_apart() {
        // going right then sharply back left between distant boxes
        let b = box_shape_bound((0, 0), (4, 0), (0, 0), 0, 16.0);
        assert!(b.is_none());
    }

    #[test]
    fn tiny_image_is_an_input_error() {
        let spec = CurveSpec::new(Image::new(1, 1), 2, 2, 1.0, 16.0).unwrap();
        assert!(curve_problem(&spec).is_err());
    }
}
