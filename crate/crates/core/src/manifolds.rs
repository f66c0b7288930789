//! Stable and unstable continua of the switching system near the two
//! saddles, their graph windows, and connecting orbits.
//!
//! A continuum is shot from a short segment on the frozen eigendirection at
//! the saddle, placed a long time before (unstable) or after (stable) the
//! section, and carried to the section by the flow.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::flow::{flow_chart, integrate_chart, Field, Sign, StepProfile, Trajectory, WeightPair};
use crate::itinerary::{
    block_stages, block_windows, check_threshold, durations, realization_constants, select_nested_after, validate,
    Itinerary, Leg, RealizationResult, Stage, ValidationReport,
};
use crate::ode::{ChartState, IntegratorOptions};
use crate::path::{PathPoint, PlanarPath};
use crate::phase::{energy_above_saddle, Anchor, ChartX, PhasePoint, SystemParams};
use crate::regions::{build_rects, Orientation, RectConstants, RectLabel};
use crate::roots::bisect_secant;
use crate::stretch::{tau_values, EpsMode, Setup};

/// Abscissa windows near the saddles on which the continua are graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphWindows {
    pub a_minus_0: f64,
    pub a_plus_1: f64,
}

/// Smaller root of `∂ₓf = -3x² + 2(1+a)x - a`.
fn lower_inflection(a: f64) -> f64 {
    (1.0 + a - (a * a - a + 1.0).sqrt()) / 3.0
}

/// Windows for weights ranging over `[a_lo, a_hi]`. The lower root of `∂ₓf`
/// grows with `a`, so the smallest weight bounds the window at 0 and, by the
/// reflection `x ↦ 1-x`, `a ↦ 1-a`, the largest bounds the one at 1.
fn window_for_range(a_lo: f64, a_hi: f64) -> GraphWindows {
    GraphWindows { a_minus_0: lower_inflection(a_lo), a_plus_1: 1.0 - lower_inflection(1.0 - a_hi) }
}

/// `a₋⁰` from the lower root of `∂ₓf` for `a₋`; `a₊¹` by the reflection
/// `x ↦ 1-x`, `a ↦ 1-a`.
pub fn graph_window(w: &WeightPair) -> Result<GraphWindows> {
    let (am, ap) = (w.minus.a(), w.plus.a());
    let GraphWindows { a_minus_0, a_plus_1 } = window_for_range(am, ap);
    if !(a_minus_0 > 0.0 && a_minus_0 < am && a_plus_1 > ap && a_plus_1 < 1.0) {
        return Err(domain(format!("degenerate graph windows {a_minus_0}, {a_plus_1}")));
    }
    Ok(GraphWindows { a_minus_0, a_plus_1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ManifoldKind {
    UnstableFrom0,
    UnstableFrom1,
    StableTo0,
    StableTo1,
}

impl ManifoldKind {
    pub fn new(unstable: bool, saddle: Anchor) -> Self {
        match (unstable, saddle) {
            (true, Anchor::Zero) => Self::UnstableFrom0,
            (true, Anchor::One) => Self::UnstableFrom1,
            (false, Anchor::Zero) => Self::StableTo0,
            (false, Anchor::One) => Self::StableTo1,
        }
    }

    pub fn saddle(self) -> Anchor {
        match self {
            Self::UnstableFrom0 | Self::StableTo0 => Anchor::Zero,
            Self::UnstableFrom1 | Self::StableTo1 => Anchor::One,
        }
    }

    pub fn is_unstable(self) -> bool {
        matches!(self, Self::UnstableFrom0 | Self::UnstableFrom1)
    }

    /// `+1` when the branch enters `x > 0` from the origin, `-1` when it
    /// enters `x < 1` from the other saddle.
    fn x_sign(self) -> f64 {
        match self.saddle() {
            Anchor::Zero => 1.0,
            Anchor::One => -1.0,
        }
    }

    /// Sign of `y` on the graph window.
    pub fn y_sign(self) -> f64 {
        match self {
            Self::UnstableFrom0 | Self::StableTo1 => 1.0,
            Self::UnstableFrom1 | Self::StableTo0 => -1.0,
        }
    }
}

/// Saddle eigenvalue `√a` at the origin, `√(1-a)` at `(1,0)`.
fn saddle_rate(p: &SystemParams, saddle: Anchor) -> f64 {
    match saddle {
        Anchor::Zero => p.a().sqrt(),
        Anchor::One => (1.0 - p.a()).sqrt(),
    }
}

/// Shortest admissible window: twenty e-folds of the slowest saddle rate.
pub fn min_window_length(field: &Field<'_>) -> f64 {
    let (lo, hi) = field.weight_range();
    20.0 / lo.a().min(1.0 - hi.a()).sqrt()
}

pub const SEED_LENGTH: f64 = 1e-6;
pub const LOCALIZATION_TOL: f64 = 1e-6;
/// Largest distance between consecutive curve samples.
pub const CURVE_GAP: f64 = 2e-3;
const MAX_CURVE_POINTS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldGraph {
    pub which: ManifoldKind,
    pub anchor_time: f64,
    pub window_length: f64,
    /// From the saddle to the far end of the arc.
    pub curve: PlanarPath,
    /// The x-interval on which the curve is certified a signed graph.
    pub graph_window: (f64, f64),
    /// Worst violation of the two energy inequalities on the graph window.
    pub localization_excess: f64,
    /// `ln` of the seed distances mapped to the saddle end and to the far end.
    pub seed_log_range: (f64, f64),
    /// Unit eigendirection of the seed segment.
    pub seed_direction: (f64, f64),
}

impl ManifoldGraph {
    pub fn seed_time(&self) -> f64 {
        if self.which.is_unstable() {
            self.anchor_time - self.window_length
        } else {
            self.anchor_time + self.window_length
        }
    }

    /// Seed point at distance `exp(log_d)` from the saddle.
    pub fn seed_state(&self, log_d: f64) -> ChartState {
        let d = log_d.exp();
        ChartState::new(self.which.saddle(), d * self.seed_direction.0, d * self.seed_direction.1)
    }

    /// `y` over `x` by linear interpolation on the monotone part of the curve.
    pub fn y_at(&self, x: f64) -> Option<f64> {
        let pts = self.curve.points();
        let sx = self.which.x_sign();
        let key = |p: &PathPoint| sx * p.p.x;
        let k = sx * x;
        if k < key(&pts[0]) {
            return None;
        }
        for w in pts.windows(2) {
            let (a, b) = (key(&w[0]), key(&w[1]));
            if b <= a {
                return None;
            }
            if k <= b {
                let t = (k - a) / (b - a);
                return Some(w[0].p.y + t * (w[1].p.y - w[0].p.y));
            }
        }
        None
    }

    /// The part of the curve with `x` between the saddle and `x_end`.
    pub fn arc_to(&self, x_end: f64) -> Result<PlanarPath> {
        let sx = self.which.x_sign();
        let pts = self.curve.points();
        let k = sx * x_end;
        let i = pts.iter().position(|q| sx * q.p.x >= k).ok_or_else(|| domain(format!("curve does not reach x = {x_end}")))?;
        if i == 0 {
            return Err(domain(format!("x = {x_end} is at the saddle")));
        }
        let (a, b) = (pts[i - 1], pts[i]);
        let t = (k - sx * a.p.x) / (sx * (b.p.x - a.p.x));
        self.curve.sub_path(0.0, a.s + t * (b.s - a.s))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y")?;
        for q in self.curve.points() {
            writeln!(w, "{:.16e},{:.16e}", q.p.x, q.p.y)?;
        }
        Ok(())
    }
}

/// `E - F(saddle)` for the weight `p`, in the chart of the saddle.
fn level_excess(p: &SystemParams, saddle: Anchor, z: &ChartState) -> f64 {
    let off = if z.anchor == saddle { z.dx } else { z.point().x - saddle.value() };
    energy_above_saddle(p, ChartX::new(saddle, off), z.y)
}

/// How far `z` lies outside the band between the frozen manifolds of the two
/// extreme weights: zero when the two saddle-level excesses have opposite
/// signs (or one vanishes).
fn band_violation(field: &Field<'_>, saddle: Anchor, z: &ChartState) -> f64 {
    let (lo, hi) = field.weight_range();
    let (g1, g2) = (level_excess(&lo, saddle, z), level_excess(&hi, saddle, z));
    let (below, above) = (g1.min(g2), g1.max(g2));
    if below > 0.0 {
        below
    } else if above < 0.0 {
        -above
    } else {
        0.0
    }
}

struct Shooter<'a> {
    field: Field<'a>,
    which: ManifoldKind,
    t0: f64,
    t_seed: f64,
    /// Unit eigendirection, oriented into the branch.
    dir: (f64, f64),
    opts: IntegratorOptions,
}

impl Shooter<'_> {
    fn image(&self, log_d: f64) -> Result<ChartState> {
        let d = log_d.exp();
        let saddle = self.which.saddle();
        let seed = ChartState::new(saddle, d * self.dir.0, d * self.dir.1);
        flow_chart(self.field, seed, self.t_seed, self.t0, &self.opts)
    }

    /// Signed progress of `z` along x away from the saddle.
    fn progress(&self, z: &ChartState) -> f64 {
        let saddle = self.which.saddle();
        let off = if z.anchor == saddle { z.dx } else { z.point().x - saddle.value() };
        self.which.x_sign() * off
    }
}

/// Shoot the continuum `which` at the section `t0` from a seed placed
/// `window_length` away in time, and follow it from the saddle out to
/// abscissa `x_end`. The graph window is certified on the part of the arc
/// inside it.
pub fn continuum_arc(
    field: Field<'_>,
    t0: f64,
    which: ManifoldKind,
    window_length: f64,
    x_end: f64,
    opts: &IntegratorOptions,
) -> Result<ManifoldGraph> {
    let min_len = min_window_length(&field);
    if !(window_length >= min_len) {
        return Err(domain(format!("window length {window_length} is below the minimum {min_len}")));
    }
    let saddle = which.saddle();
    let reach = which.x_sign() * (x_end - saddle.value());
    if !(reach > 0.0 && reach <= 1.0) {
        return Err(domain(format!("x_end = {x_end} is not on the branch side of the saddle")));
    }
    let t_seed = if which.is_unstable() { t0 - window_length } else { t0 + window_length };
    let lambda = saddle_rate(&field.params_at(t_seed), saddle);
    let ly = if which.is_unstable() { lambda } else { -lambda };
    let n = (1.0 + ly * ly).sqrt();
    let sx = which.x_sign();
    // seeds sit far below the default absolute tolerance
    let shoot_opts = IntegratorOptions { atol: opts.atol.min(CONNECT_ATOL), ..*opts };
    let shooter = Shooter { field, which, t0, t_seed, dir: (sx / n, sx * ly / n), opts: shoot_opts };

    // the fastest rate bounds the growth of the seed, so this start lands
    // well inside a 1e-9 neighbourhood of the saddle
    let (lo_w, hi_w) = field.weight_range();
    let fastest = saddle_rate(&lo_w, saddle).max(saddle_rate(&hi_w, saddle));
    let log_max = SEED_LENGTH.ln();
    let log_min = (log_max - fastest * window_length - 4.0 * std::f64::consts::LN_10).max(-690.0);

    // march out in factors of two until the image passes x_end
    let step = std::f64::consts::LN_2;
    let mut prev = log_min;
    let mut bracket = None;
    let mut v = log_min;
    while v <= log_max + 1e-12 {
        let z = shooter.image(v)?;
        if shooter.progress(&z) >= reach {
            bracket = Some((prev, v));
            break;
        }
        prev = v;
        v += step;
    }
    let (b_lo, b_hi) = bracket.ok_or_else(|| {
        domain(format!("the seed segment does not reach x = {x_end}; lengthen the window"))
    })?;
    if b_lo == b_hi {
        return Err(domain("the smallest seed already passes x_end; the window is too long for f64"));
    }
    let mut fail = None;
    let v_end = bisect_secant(
        |v| match shooter.image(v) {
            Ok(z) => shooter.progress(&z) - reach,
            Err(e) => {
                fail.get_or_insert(e);
                f64::NAN
            }
        },
        b_lo,
        b_hi,
        1e-13,
    );
    if let Some(e) = fail {
        return Err(e);
    }
    let v_end = v_end.ok_or_else(|| domain("bisection for the arc end failed"))?;

    // parameter u ∈ [0, 1] ↦ log seed length, refined on the images
    let param = PlanarPath::segment(PhasePoint::new(log_min, 0.0), PhasePoint::new(v_end, 0.0))?;
    let mut states = Vec::new();
    let (_, imgs) = param.refined_for_map_by(
        |p| {
            let z = shooter.image(p.x)?;
            states.push((p.x, z));
            Ok(z.point())
        },
        |a, b| a.dist(b) > CURVE_GAP,
        MAX_CURVE_POINTS,
    )?;
    let mut pts = vec![PhasePoint::new(saddle.value(), 0.0)];
    pts.extend(imgs.iter().copied());
    // images closer to 1 than an ulp round onto the saddle itself
    pts.dedup();
    // the last sample sits on x_end up to the bisection tolerance
    let last = pts.len() - 1;
    pts[last].x = x_end;
    let curve = PlanarPath::from_points(pts)?;

    let gw = window_for_range(lo_w.a(), hi_w.a());
    let w_far = match saddle {
        Anchor::Zero => gw.a_minus_0,
        Anchor::One => gw.a_plus_1,
    };
    let graph_window = match saddle {
        Anchor::Zero => (0.0, w_far.min(x_end)),
        Anchor::One => (w_far.max(x_end), 1.0),
    };
    let inside = |x: f64| sx * (x - w_far) <= 0.0;

    // graph check on the exact chart offsets, sign check on the curve
    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    states.dedup_by(|a, b| a.0 == b.0);
    for w in states.windows(2) {
        let (z0, z1) = (&w[0].1, &w[1].1);
        if !inside(z1.point().x) {
            break;
        }
        if !(shooter.progress(z1) > shooter.progress(z0)) {
            return Err(Error::Geometry(format!("continuum is not a graph near x = {}", z1.point().x)));
        }
    }
    for q in curve.points() {
        if inside(q.p.x) && which.y_sign() * q.p.y < 0.0 {
            return Err(Error::Geometry(format!("continuum has the wrong sign of y at x = {}", q.p.x)));
        }
    }

    let mut excess: f64 = 0.0;
    for (_, z) in &states {
        if !inside(z.point().x) {
            continue;
        }
        let e = band_violation(&field, saddle, z);
        if e > LOCALIZATION_TOL {
            return Err(Error::Localization { x: z.point().x, excess: e });
        }
        excess = excess.max(e);
    }

    Ok(ManifoldGraph {
        which,
        anchor_time: t0,
        window_length,
        curve,
        graph_window,
        localization_excess: excess,
        seed_log_range: (log_min, v_end),
        seed_direction: shooter.dir,
    })
}

fn window_end(field: &Field<'_>, saddle: Anchor) -> f64 {
    let (lo, hi) = field.weight_range();
    let gw = window_for_range(lo.a(), hi.a());
    match saddle {
        Anchor::Zero => gw.a_minus_0,
        Anchor::One => gw.a_plus_1,
    }
}

/// `Γ⁰₋∞` or `Γ¹₋∞` at the section `t0`, over its graph window.
pub fn unstable_continuum(
    field: Field<'_>,
    t0: f64,
    saddle: Anchor,
    window_length: f64,
    opts: &IntegratorOptions,
) -> Result<ManifoldGraph> {
    let x_end = window_end(&field, saddle);
    continuum_arc(field, t0, ManifoldKind::new(true, saddle), window_length, x_end, opts)
}

/// `Γ⁰₊∞` or `Γ¹₊∞` at the section `t0`, over its graph window.
pub fn stable_continuum(
    field: Field<'_>,
    t0: f64,
    saddle: Anchor,
    window_length: f64,
    opts: &IntegratorOptions,
) -> Result<ManifoldGraph> {
    let x_end = window_end(&field, saddle);
    continuum_arc(field, t0, ManifoldKind::new(false, saddle), window_length, x_end, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathIntersection {
    pub point: PhasePoint,
    /// Parameters on the first and second path.
    pub s1: f64,
    pub s2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Intersections {
    pub crossings: Vec<PathIntersection>,
    /// Segment pairs closer than the tolerance without crossing.
    pub near_misses: Vec<PathIntersection>,
}

pub const INTERSECT_TOL: f64 = 1e-9;

#[derive(Clone, Copy)]
struct Bbox {
    lo: PhasePoint,
    hi: PhasePoint,
}

impl Bbox {
    fn of(pts: &[PathPoint]) -> Self {
        let mut b = Bbox { lo: pts[0].p, hi: pts[0].p };
        for q in pts {
            b.lo.x = b.lo.x.min(q.p.x);
            b.lo.y = b.lo.y.min(q.p.y);
            b.hi.x = b.hi.x.max(q.p.x);
            b.hi.y = b.hi.y.max(q.p.y);
        }
        b
    }

    fn overlaps(&self, o: &Bbox, pad: f64) -> bool {
        self.lo.x <= o.hi.x + pad && o.lo.x <= self.hi.x + pad && self.lo.y <= o.hi.y + pad && o.lo.y <= self.hi.y + pad
    }
}

fn cross(a: PhasePoint, b: PhasePoint) -> f64 {
    a.x * b.y - a.y * b.x
}

fn sub(a: PhasePoint, b: PhasePoint) -> PhasePoint {
    PhasePoint::new(a.x - b.x, a.y - b.y)
}

/// Closest pair of points between segments `[p0,p1]` and `[q0,q1]`, as
/// segment fractions.
fn closest_fractions(p0: PhasePoint, p1: PhasePoint, q0: PhasePoint, q1: PhasePoint) -> (f64, f64, f64) {
    let proj = |a: PhasePoint, b: PhasePoint, c: PhasePoint| -> f64 {
        let d = sub(b, a);
        let l2 = d.x * d.x + d.y * d.y;
        if l2 == 0.0 {
            0.0
        } else {
            (((c.x - a.x) * d.x + (c.y - a.y) * d.y) / l2).clamp(0.0, 1.0)
        }
    };
    let cands = [
        (0.0, proj(q0, q1, p0)),
        (1.0, proj(q0, q1, p1)),
        (proj(p0, p1, q0), 0.0),
        (proj(p0, p1, q1), 1.0),
    ];
    let mut best = (0.0, 0.0, f64::INFINITY);
    for (u, v) in cands {
        let d = p0.lerp(&p1, u).dist(&q0.lerp(&q1, v));
        if d < best.2 {
            best = (u, v, d);
        }
    }
    best
}

const CHUNK: usize = 32;

/// Transversal intersections of two polylines, plus segment pairs that come
/// within [`INTERSECT_TOL`] without crossing.
pub fn intersect_paths(path1: &PlanarPath, path2: &PlanarPath) -> Intersections {
    let (a, b) = (path1.points(), path2.points());
    let mut out = Intersections::default();
    if a.len() < 2 || b.len() < 2 {
        return out;
    }
    let chunks = |pts: &[PathPoint]| -> Vec<(usize, Bbox)> {
        (0..pts.len() - 1).step_by(CHUNK).map(|i| (i, Bbox::of(&pts[i..(i + CHUNK + 1).min(pts.len())]))).collect()
    };
    let (ca, cb) = (chunks(a), chunks(b));
    let (na, nb) = (a.len() - 1, b.len() - 1);
    for &(i0, ba) in &ca {
        for &(j0, bb) in &cb {
            if !ba.overlaps(&bb, INTERSECT_TOL) {
                continue;
            }
            for i in i0..(i0 + CHUNK).min(na) {
                let (p0, p1) = (a[i].p, a[i + 1].p);
                let sa = Bbox::of(&a[i..i + 2]);
                for j in j0..(j0 + CHUNK).min(nb) {
                    let (q0, q1) = (b[j].p, b[j + 1].p);
                    if !sa.overlaps(&Bbox::of(&b[j..j + 2]), INTERSECT_TOL) {
                        continue;
                    }
                    let (r, s) = (sub(p1, p0), sub(q1, q0));
                    let den = cross(r, s);
                    let w = sub(q0, p0);
                    let hit = if den != 0.0 {
                        let u = cross(w, s) / den;
                        let v = cross(w, r) / den;
                        // half-open on both sides so a shared vertex counts once
                        let last_a = i + 1 == na;
                        let last_b = j + 1 == nb;
                        let in_u = u >= 0.0 && (u < 1.0 || (last_a && u <= 1.0));
                        let in_v = v >= 0.0 && (v < 1.0 || (last_b && v <= 1.0));
                        if in_u && in_v {
                            Some((u, v))
                        } else {
                            None
                        }
                    } else {
                        None
                    };
                    let param = |pts: &[PathPoint], k: usize, f: f64| pts[k].s + f * (pts[k + 1].s - pts[k].s);
                    match hit {
                        Some((u, v)) => out.crossings.push(PathIntersection {
                            point: p0.lerp(&p1, u),
                            s1: param(a, i, u),
                            s2: param(b, j, v),
                        }),
                        None => {
                            let (u, v, d) = closest_fractions(p0, p1, q0, q1);
                            if d <= INTERSECT_TOL {
                                out.near_misses.push(PathIntersection {
                                    point: p0.lerp(&p1, u),
                                    s1: param(a, i, u),
                                    s2: param(b, j, v),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    let by_s1 = |x: &PathIntersection, y: &PathIntersection| x.s1.total_cmp(&y.s1).then(x.s2.total_cmp(&y.s2));
    out.crossings.sort_by(by_s1);
    out.near_misses.sort_by(by_s1);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectionKind {
    /// From `(0,0)` to `(1,0)`.
    Heteroclinic,
    /// From `(0,0)` back to `(0,0)`.
    Homoclinic,
}

impl ConnectionKind {
    pub fn target(self) -> Anchor {
        match self {
            ConnectionKind::Heteroclinic => Anchor::One,
            ConnectionKind::Homoclinic => Anchor::Zero,
        }
    }
}

pub const TAIL_RESIDUAL_TOL: f64 = 1e-4;
/// Absolute integration tolerance used while shooting connections.
pub const CONNECT_ATOL: f64 = 1e-300;
/// Sample budget for the image of the surviving sub-path; saddle passages
/// are found from sign changes, not resolved.
const CONNECT_SAMPLES: usize = 1 << 13;
/// Smallest log seed distance, well above subnormals.
const MIN_LOG_SEED: f64 = -650.0;
/// Relative tolerance on the fitted decay rate.
pub const TAIL_RATE_TOL: f64 = 0.1;

/// Convergence diagnostics of one tail of a connecting solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    pub saddle: Anchor,
    /// Weight of the frozen system active on the tail.
    pub a: f64,
    pub t_begin: f64,
    pub t_end: f64,
    /// Distance to the equilibrium at the far end of the tail.
    pub residual: f64,
    pub fitted_rate: f64,
    pub expected_rate: f64,
    pub velocity_zeros: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub kind: ConnectionKind,
    /// The solution from the seed time to its closest approach to the target.
    pub realization: RealizationResult,
    /// State at `t_{6K+1}`, on the stable continuum.
    pub section_point: PhasePoint,
    pub section_time: f64,
    /// Parameter brackets tried: polyline crossings and unresolved gaps.
    pub candidates: usize,
    pub left: TailCertificate,
    pub right: TailCertificate,
    /// Zeros of `x'` in `(t_{6K}, t_{6K+1})`.
    pub last_leg_zeros: usize,
    pub total_zeros: usize,
    pub blocks: Option<ValidationReport>,
    pub passed: bool,
}

fn distance_to(saddle: Anchor, p: &PhasePoint) -> f64 {
    (p.x - saddle.value()).hypot(p.y)
}

/// Least-squares slope of `ln dist` against `t` on a uniform grid of
/// `[ta, tb]`, over the samples with `lo <= dist <= hi`.
fn log_slope(traj: &Trajectory, saddle: Anchor, ta: f64, tb: f64, lo: f64, hi: f64) -> Option<f64> {
    let n = 400;
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|i| ta + (tb - ta) * i as f64 / n as f64)
        .filter_map(|t| {
            let d = distance_to(saddle, &traj.point_at(t));
            (d >= lo && d <= hi).then(|| (t, d.ln()))
        })
        .collect();
    if pts.len() < 8 {
        return None;
    }
    let m = pts.len() as f64;
    let (st, sl) = pts.iter().fold((0.0, 0.0), |(a, b), (t, l)| (a + t, b + l));
    let (mt, ml) = (st / m, sl / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (t, l)| (a + (t - mt) * (l - ml), b + (t - mt) * (t - mt)));
    Some(num / den)
}

const FIT_CEILING: f64 = 1e-3;

fn tail_certificate(
    traj: &Trajectory,
    saddle: Anchor,
    a: f64,
    (ta, tb): (f64, f64),
    backward: bool,
) -> TailCertificate {
    let far = if backward { ta } else { tb };
    let residual = distance_to(saddle, &traj.point_at(far));
    let expected_rate = saddle_rate(&SystemParams::new(a).expect("weight already validated"), saddle);
    let slope = log_slope(traj, saddle, ta, tb, (10.0 * residual).max(1e-300), FIT_CEILING);
    let fitted_rate = slope.map_or(f64::NAN, |s| if backward { s } else { -s });
    let velocity_zeros = traj.velocity_zeros(ta, tb).len();
    let passed = residual < TAIL_RESIDUAL_TOL
        && (fitted_rate - expected_rate).abs() <= TAIL_RATE_TOL * expected_rate
        && velocity_zeros == 0;
    TailCertificate { saddle, a, t_begin: ta, t_end: tb, residual, fitted_rate, expected_rate, velocity_zeros, passed }
}

/// Connecting solution for the itinerary on blocks `1…K`, with the
/// smallness check on `ε` in connection mode. `K = 0` is allowed.
pub fn connect(profile: &StepProfile, itin: &Itinerary, kind: ConnectionKind, opts: &IntegratorOptions) -> Result<Connection> {
    check_threshold(profile, itin.cap, EpsMode::Connection, opts)?;
    let k = if itin.is_empty() {
        Setup::new(profile.weights, 1.1, opts)?.constants
    } else {
        realization_constants(profile, itin.len(), opts)?
    };
    connect_in_rects(profile, itin, kind, &k, opts)
}

/// [`connect`] on the rectangles of `k`, without the smallness check.
pub fn connect_in_rects(
    profile: &StepProfile,
    itin: &Itinerary,
    kind: ConnectionKind,
    k: &RectConstants,
    opts: &IntegratorOptions,
) -> Result<Connection> {
    // seeds and tails live far below the default absolute tolerance
    let opts = &IntegratorOptions { atol: opts.atol.min(CONNECT_ATOL), ..*opts };
    let kk = itin.len() as i64;
    if profile.first_index() != -1 {
        return Err(domain("a connection needs the profile to start at index -1"));
    }
    let last = 6 * kk + 1;
    if profile.last_index() != last {
        return Err(domain(format!("a connection over {kk} blocks needs the profile to end at index {last}")));
    }
    let w = profile.weights;
    let field = Field::Stepwise(profile);
    let gw = graph_window(&w)?;
    let tv = tau_values(&w, k, &gw)?;
    let l = min_window_length(&field);
    let target = kind.target();

    // Γ⁰₋∞ at t₋₁ is the a₋ homoclinic branch; keep its arc over [0, x₁]
    let t_m1 = profile.t(-1)?;
    let unstable = continuum_arc(field, t_m1, ManifoldKind::UnstableFrom0, l, tv.x1, opts)?;
    let t_seed = unstable.seed_time();
    let t_f = profile.t(last)?;
    // a solution may idle at the origin for the whole shooting interval, so
    // the seeds reach down by the fastest growth over it
    let fastest = [&w.minus, &w.plus]
        .iter()
        .flat_map(|p| [saddle_rate(p, Anchor::Zero), saddle_rate(p, Anchor::One)])
        .fold(0.0, f64::max);
    let v_hi = unstable.seed_log_range.1;
    let v_lo = (SEED_LENGTH.ln() - fastest * (t_f - t_seed) - 4.0 * std::f64::consts::LN_10).max(MIN_LOG_SEED);
    let seed = |u: f64| unstable.seed_state(v_lo + u * (v_hi - v_lo));

    let t0 = profile.t(0)?;
    let mut prefix = vec![Leg { sign: Sign::Minus, duration: t_m1 - t_seed }];
    let mut stages = Vec::new();
    let first = Leg { sign: Sign::Plus, duration: t0 - t_m1 };
    let d = durations(profile, itin.len())?;
    let (mut u0, mut u1) = (0.0, 1.0);
    let mut records = Vec::new();
    if kk == 0 {
        prefix.push(first);
    } else {
        let rects = build_rects(&w, k)?;
        stages.push(Stage {
            sign: first.sign,
            duration: first.duration,
            target: RectLabel::R1,
            orientation: Orientation::Minus,
            class: 1,
            classes: 1,
        });
        for (j, &(np, nm)) in itin.blocks.iter().enumerate() {
            let dj: [f64; 6] = d[6 * j..6 * j + 6].try_into().unwrap();
            stages.extend(block_stages(dj, np, nm, itin.cap));
        }
        let nested = select_nested_after(&w, k, &rects, &seed, &prefix, &stages, opts)?;
        (u0, u1) = nested.interval;
        records = nested.records;
    }

    // carry the surviving sub-path to t_{6K+1} and meet Γ₊∞ there
    let t_last = profile.t(6 * kk)?;
    let stable = match kind {
        ConnectionKind::Heteroclinic => continuum_arc(field, t_f, ManifoldKind::StableTo1, l, tv.x2, opts)?,
        ConnectionKind::Homoclinic => stable_continuum(field, t_f, Anchor::Zero, l, opts)?,
    };
    let at_section = |u: f64| flow_chart(field, seed(u), t_seed, t_f, opts);
    // uniform start: images of distant parameters can nearly coincide while
    // the orbits between them go all the way round
    let param = PlanarPath::segment(PhasePoint::new(u0, 0.0), PhasePoint::new(u1, 0.0))?.refined((u1 - u0) / 1024.0);
    let mut cache = std::collections::HashMap::new();
    let (param, imgs) = param.refined_for_map_by(
        |p| {
            let z = at_section(p.x)?;
            cache.insert(p.x.to_bits(), z);
            Ok(z.point())
        },
        |a, b| a.dist(b) > CURVE_GAP,
        CONNECT_SAMPLES,
    )?;
    let image = PlanarPath::from_parameterized(
        param.points().iter().zip(&imgs).map(|(q, &p)| PathPoint { s: q.s, p }).collect(),
    )?;
    // past t_{6K+1} the system is frozen, so the stable branch is the piece
    // of the saddle level with the sign of y of `which`; crossings are sign
    // changes of the level excess on that half-plane
    let which = ManifoldKind::new(false, target);
    let tail = w.plus;
    let excess = |z: &ChartState| level_excess(&tail, target, z);
    let on_branch_side = |p: &PhasePoint| which.x_sign() * (p.x - target.value()) > 0.0 && which.y_sign() * p.y > 0.0;
    let pp = param.points();
    let states: Vec<ChartState> = pp.iter().map(|q| cache[&q.p.x.to_bits()]).collect();
    let hits = intersect_paths(&image, &stable.curve);
    let mut brackets: Vec<usize> = hits
        .crossings
        .iter()
        .chain(&hits.near_misses)
        .map(|h| pp.partition_point(|q| q.s <= h.s1).clamp(1, pp.len() - 1))
        .collect();
    // the excess is continuous in u, so every sign change hides a point of
    // the saddle level; a resolved change with both ends off the branch
    // side cannot be on the branch
    let near = |i: usize| {
        on_branch_side(&imgs[i - 1]) as u8 + on_branch_side(&imgs[i]) as u8
    };
    brackets.extend((1..pp.len()).filter(|&i| {
        excess(&states[i - 1]).signum() != excess(&states[i]).signum()
            && (near(i) > 0 || imgs[i - 1].dist(&imgs[i]) > CURVE_GAP)
    }));
    brackets.sort_unstable();
    brackets.dedup();
    brackets.sort_by_key(|&i| std::cmp::Reverse(near(i)));
    if brackets.is_empty() {
        return Err(Error::ConnectionNotFound(format!(
            "the image of the surviving sub-path ({} samples) never crosses the saddle level",
            image.len()
        )));
    }

    let rate = saddle_rate(&tail, target);
    let horizon = 80.0 / rate;
    let mut failures = Vec::new();
    let mut best: Option<Connection> = None;
    for &i in &brackets {
        let (mut a, mut b) = (pp[i - 1].p.x, pp[i].p.x);
        let (ga, gb) = (excess(&states[i - 1]), excess(&states[i]));
        if ga.signum() == gb.signum() {
            failures.push(format!("no change of level on [{a:e}, {b:e}]"));
            continue;
        }
        // bisect to the resolution of the parameter
        loop {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let gm = excess(&at_section(m)?);
            if gm == 0.0 {
                (a, b) = (m, m);
                break;
            }
            if gm.signum() == ga.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        let u = if excess(&at_section(a)?).abs() <= excess(&at_section(b)?).abs() { a } else { b };
        let hit = at_section(u)?.point();
        if !on_branch_side(&hit) {
            failures.push(format!("level point ({:.6}, {:.6}) is off the stable branch", hit.x, hit.y));
            continue;
        }
        let probe = integrate_chart(field, seed(u), t_seed, t_f + horizon, opts)?;
        // the closest approach to the target before the computed orbit
        // turns back or crosses the saddle ends the right tail
        let turn = probe.velocity_zeros(t_f, t_f + horizon).into_iter().chain(probe.vertical_crossings(
            target.value(),
            t_f,
            t_f + horizon,
        ));
        let span = turn.fold(horizon, |m, t| m.min((t - t_f) * (1.0 - 1e-6)));
        let n = 4000;
        let dist = |t: f64| distance_to(target, &probe.point_at(t));
        let t_end = (0..=n)
            .map(|j| t_f + span * j as f64 / n as f64)
            .min_by(|x, y| dist(*x).total_cmp(&dist(*y)))
            .unwrap();
        let trajectory = integrate_chart(field, seed(u), t_seed, t_end, opts)?;
        let left = tail_certificate(&trajectory, Anchor::Zero, w.minus.a(), (t_seed, t_m1), true);
        let right = tail_certificate(&trajectory, target, w.plus.a(), (t_f, t_end), false);
        let last_leg_zeros = trajectory.velocity_zeros(t_last, t_f).len();
        let total_zeros = trajectory.velocity_zeros(t_seed, t_end).len();
        let realization = RealizationResult {
            weights: w,
            initial_time: t_seed,
            initial_point: seed(u).point(),
            trajectory,
            windows: block_windows(profile, itin.len())?,
            epsilon: profile.epsilon(),
            constants: *k,
            stages: records.clone(),
        };
        let blocks = if kk == 0 { None } else { Some(validate(&realization, itin)?) };
        let shape = match kind {
            ConnectionKind::Homoclinic => last_leg_zeros == 1,
            ConnectionKind::Heteroclinic => kk > 0 || total_zeros == 0,
        };
        let passed = left.passed && right.passed && shape && blocks.as_ref().map_or(true, |b| b.passed);
        let section_point = realization.trajectory.point_at(t_f);
        let c = Connection {
            kind,
            realization,
            section_point,
            section_time: t_f,
            candidates: brackets.len(),
            left,
            right,
            last_leg_zeros,
            total_zeros,
            blocks,
            passed,
        };
        if passed {
            return Ok(c);
        }
        if best.is_none() {
            best = Some(c);
        }
    }
    best.ok_or_else(|| {
        let n = failures.len();
        failures.truncate(4);
        Error::ConnectionNotFound(format!("{n} brackets rejected: {}", failures.join("; ")))
    })
}
