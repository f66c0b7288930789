//! Oriented rectangles `R₁ … R₄` as energy-band predicates, the constants
//! `p±`, `q±`, spanning paths and crossing detection.
//!
//! Each rectangle is the set where two energies lie in closed bands and `y`
//! has a fixed sign. A side is a group of constraints; for instance the plus
//! boundary of `R₂` has one component on an orbit of `S(a₋)` and one on the
//! x-axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{poincare_chart, Sign, WeightPair};
use crate::ode::{ChartState, IntegratorOptions};
use crate::path::PlanarPath;
use crate::phase::{
    energy, homoclinic_apex, orbit_graph, potential, saddle1_level, Anchor, EnergyLevel, PhasePoint, SystemParams,
};
use crate::roots::bisect_secant;

/// Absolute tolerance of boundary tests.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBand {
    pub system: SystemParams,
    pub lo: f64,
    pub hi: f64,
}

impl EnergyBand {
    pub fn new(system: SystemParams, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Construction(format!("malformed band [{lo}, {hi}]")));
        }
        Ok(Self { system, lo, hi })
    }

    pub fn energy(&self, p: PhasePoint) -> f64 {
        energy(&self.system, p).0
    }

    pub fn contains(&self, p: PhasePoint) -> bool {
        let e = self.energy(p);
        self.lo <= e && e <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HalfPlane {
    Upper,
    Lower,
}

impl HalfPlane {
    fn sign(self) -> f64 {
        match self {
            HalfPlane::Upper => 1.0,
            HalfPlane::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RectLabel {
    R1,
    R2,
    R3,
    R4,
}

/// One of the five defining inequalities of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    Band1Lo,
    Band1Hi,
    Band2Lo,
    Band2Hi,
    Axis,
}

pub const CONSTRAINTS: [Constraint; 5] =
    [Constraint::Band1Lo, Constraint::Band1Hi, Constraint::Band2Lo, Constraint::Band2Hi, Constraint::Axis];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Minus,
    Plus,
}

/// A connected boundary component, given by the constraints active on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Side {
    pub constraints: Vec<Constraint>,
}

impl Side {
    fn of(c: &[Constraint]) -> Self {
        Self { constraints: c.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub label: RectLabel,
    pub band1: EnergyBand,
    pub band2: EnergyBand,
    pub halfplane: HalfPlane,
    pub minus_sides: [Side; 2],
    pub plus_sides: [Side; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

impl OrientedRect {
    /// Value of a constraint at `p`; non-negative inside the closure.
    pub fn margin(&self, c: Constraint, p: PhasePoint) -> f64 {
        match c {
            Constraint::Band1Lo => self.band1.energy(p) - self.band1.lo,
            Constraint::Band1Hi => self.band1.hi - self.band1.energy(p),
            Constraint::Band2Lo => self.band2.energy(p) - self.band2.lo,
            Constraint::Band2Hi => self.band2.hi - self.band2.energy(p),
            Constraint::Axis => self.halfplane.sign() * p.y,
        }
    }

    pub fn sides(&self, o: Orientation) -> &[Side; 2] {
        match o {
            Orientation::Minus => &self.minus_sides,
            Orientation::Plus => &self.plus_sides,
        }
    }

    /// Index of the side of orientation `o` containing constraint `c`.
    pub fn side_index(&self, o: Orientation, c: Constraint) -> Option<usize> {
        self.sides(o).iter().position(|s| s.constraints.contains(&c))
    }

    pub fn contains(&self, p: PhasePoint) -> Membership {
        contains(self, p)
    }

    /// Constraints active at `p` (within the boundary tolerance), provided
    /// `p` lies in the closure.
    pub fn active_constraints(&self, p: PhasePoint) -> Vec<Constraint> {
        if CONSTRAINTS.iter().any(|&c| self.margin(c, p) < -BOUNDARY_TOL) {
            return Vec::new();
        }
        CONSTRAINTS.iter().copied().filter(|&c| self.margin(c, p) <= BOUNDARY_TOL).collect()
    }
}

/// Membership with a `Boundary` verdict within [`BOUNDARY_TOL`] of a limit.
pub fn contains(rect: &OrientedRect, p: PhasePoint) -> Membership {
    let mut on_edge = false;
    for c in CONSTRAINTS {
        let m = rect.margin(c, p);
        if m < -BOUNDARY_TOL {
            return Membership::Outside;
        }
        if m <= BOUNDARY_TOL {
            on_edge = true;
        }
    }
    if on_edge {
        Membership::Boundary
    } else {
        Membership::Inside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectConstants {
    pub p_minus: f64,
    pub p_plus: f64,
    pub q_plus: f64,
    pub q_minus: f64,
}

impl RectConstants {
    pub fn validate(&self, w: &WeightPair) -> Result<()> {
        let (am, ap) = (w.minus.a(), w.plus.a());
        let zm = homoclinic_apex(&w.minus)?;
        let zp = homoclinic_apex(&w.plus)?;
        let ok = zm.max(ap) < self.p_minus
            && self.p_minus < 1.0
            && 0.0 < self.p_plus
            && self.p_plus < am.min(zp)
            && self.p_minus < self.q_plus
            && self.q_plus < 1.0
            && 0.0 < self.q_minus
            && self.q_minus < self.p_plus;
        if ok {
            Ok(())
        } else {
            Err(Error::Construction(format!("constants violate the ordering conditions: {self:?}")))
        }
    }
}

/// Midpoints of the admissible intervals for `p₋` and `p₊`.
pub fn choose_p(w: &WeightPair) -> Result<(f64, f64)> {
    let zm = homoclinic_apex(&w.minus)?;
    let zp = homoclinic_apex(&w.plus)?;
    let lo = zm.max(w.plus.a());
    let hi = w.minus.a().min(zp);
    assert!(lo < 1.0 && hi > 0.0, "admissible intervals for p± are empty");
    Ok(((lo + 1.0) / 2.0, hi / 2.0))
}

fn band_s_minus(w: &WeightPair, p_minus: f64) -> Result<EnergyBand> {
    EnergyBand::new(w.minus, potential(&w.minus, p_minus), saddle1_level(&w.minus))
}

fn band_s_plus(w: &WeightPair, p_plus: f64) -> Result<EnergyBand> {
    EnergyBand::new(w.plus, potential(&w.plus, p_plus), 0.0)
}

fn rect_13(w: &WeightPair, p_minus: f64, p_plus: f64, label: RectLabel) -> Result<OrientedRect> {
    use Constraint::*;
    let band1 = band_s_minus(w, p_minus)?;
    let band2 = band_s_plus(w, p_plus)?;
    let (halfplane, minus, plus) = match label {
        RectLabel::R1 => (HalfPlane::Upper, [Band1Lo, Band1Hi], [Band2Lo, Band2Hi]),
        _ => (HalfPlane::Lower, [Band2Lo, Band2Hi], [Band1Lo, Band1Hi]),
    };
    Ok(OrientedRect {
        label,
        band1,
        band2,
        halfplane,
        minus_sides: [Side::of(&[minus[0]]), Side::of(&[minus[1]])],
        plus_sides: [Side::of(&[plus[0]]), Side::of(&[plus[1]])],
    })
}

/// `R₁` (upper) or `R₃` (lower): these depend on `p±` only.
pub fn build_r13(w: &WeightPair, p_minus: f64, p_plus: f64) -> Result<(OrientedRect, OrientedRect)> {
    Ok((rect_13(w, p_minus, p_plus, RectLabel::R1)?, rect_13(w, p_minus, p_plus, RectLabel::R3)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rects {
    pub r1: OrientedRect,
    pub r2: OrientedRect,
    pub r3: OrientedRect,
    pub r4: OrientedRect,
}

impl Rects {
    pub fn get(&self, l: RectLabel) -> &OrientedRect {
        match l {
            RectLabel::R1 => &self.r1,
            RectLabel::R2 => &self.r2,
            RectLabel::R3 => &self.r3,
            RectLabel::R4 => &self.r4,
        }
    }
}

pub fn build_rects(w: &WeightPair, k: &RectConstants) -> Result<Rects> {
    use Constraint::*;
    k.validate(w)?;
    let (r1, r3) = build_r13(w, k.p_minus, k.p_plus)?;
    // annulus of S(a₊) between Θ(a₊,(q₊,0)) and the homoclinic H(a₊)
    let ann_plus = EnergyBand::new(w.plus, potential(&w.plus, k.q_plus), saddle1_level(&w.plus))?;
    let r2 = OrientedRect {
        label: RectLabel::R2,
        band1: band_s_minus(w, k.p_minus)?,
        band2: ann_plus,
        halfplane: HalfPlane::Upper,
        minus_sides: [Side::of(&[Band2Lo]), Side::of(&[Band2Hi])],
        plus_sides: [Side::of(&[Band1Lo]), Side::of(&[Axis, Band1Hi])],
    };
    // annulus of S(a₋) between Θ(a₋,(q₋,0)) and H(a₋)
    let ann_minus = EnergyBand::new(w.minus, potential(&w.minus, k.q_minus), 0.0)?;
    let r4 = OrientedRect {
        label: RectLabel::R4,
        band1: band_s_plus(w, k.p_plus)?,
        band2: ann_minus,
        halfplane: HalfPlane::Lower,
        minus_sides: [Side::of(&[Band2Lo]), Side::of(&[Band2Hi])],
        plus_sides: [Side::of(&[Band1Lo]), Side::of(&[Axis, Band1Hi])],
    };
    Ok(Rects { r1, r2, r3, r4 })
}

/// Which of `q₊` / `q₋` to locate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QSide {
    Plus,
    Minus,
}

/// Relative safety shift of `q±` toward the saddle after locating the sup
/// (inf).
pub const Q_SAFETY: f64 = 1e-6;

/// Locate `q₊ = sup{x ∈ [p₋,1] : (Ψ₋^{T₁})⁻¹(x,0) ∈ R₁}` and
/// `q₋ = inf{x ∈ [0,p₊] : (Ψ₊^{T₁})⁻¹(x,0) ∈ R₃}`.
pub fn compute_q(w: &WeightPair, p_minus: f64, p_plus: f64, t1: f64, opts: &IntegratorOptions) -> Result<RectConstants> {
    let (r1, r3) = build_r13(w, p_minus, p_plus)?;
    let q_plus = locate_q(w, &r1, p_minus, t1, QSide::Plus, opts)?;
    let q_minus = locate_q(w, &r3, p_plus, t1, QSide::Minus, opts)?;
    let k = RectConstants { p_minus, p_plus, q_plus, q_minus };
    k.validate(w).map_err(|e| Error::QNotFound(format!("located values fail the ordering check: {e}")))?;
    Ok(k)
}

fn locate_q(w: &WeightPair, rect: &OrientedRect, p: f64, t1: f64, side: QSide, opts: &IntegratorOptions) -> Result<f64> {
    // points are written by their distance d to the saddle (1 for q₊, 0 for
    // q₋) so that abscissas within 1e-5 of it are represented exactly
    let (sign, anchor, dmax) = match side {
        QSide::Plus => (Sign::Minus, Anchor::One, 1.0 - p),
        QSide::Minus => (Sign::Plus, Anchor::Zero, p),
    };
    let to_state = |d: f64| match side {
        QSide::Plus => ChartState::new(anchor, -d, 0.0),
        QSide::Minus => ChartState::new(anchor, d, 0.0),
    };
    let member = |d: f64| -> Result<bool> {
        let z = poincare_chart(w, sign, -t1, to_state(d), opts)?;
        Ok(contains(rect, z.point()) != Membership::Outside)
    };
    // the distance grid is logarithmic: the extremal point sits extremely
    // close to the saddle
    let d_min = 1e-300;
    let n = 6000;
    let grid: Vec<f64> = (0..=n).map(|i| d_min * (dmax / d_min).powf(i as f64 / n as f64)).collect();
    let mut inside_idx = None;
    for (i, &d) in grid.iter().enumerate() {
        if member(d)? {
            inside_idx = Some(i);
            break;
        }
    }
    let i = inside_idx.ok_or_else(|| {
        Error::QNotFound(format!("no x in the search range maps back into {:?} (T1 = {t1})", rect.label))
    })?;
    if i == 0 {
        return Err(Error::QNotFound("membership holds at the saddle-side end of the grid".into()));
    }
    // bisection between the last outside and first inside node, relative to
    // the distance since the boundary can sit arbitrarily close to the saddle
    let (mut lo, mut hi) = (grid[i - 1], grid[i]);
    while hi - lo > 1e-9 * hi {
        let mid = if hi > 2.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if member(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // the annulus must exclude every axis point reached by the image of R₁,
    // so the safety shift moves past the sup toward the saddle
    let d = lo * (1.0 - Q_SAFETY);
    if side == QSide::Plus && 1.0 - d == 1.0 {
        return Err(Error::QNotFound(format!(
            "q+ sits {d:e} below the saddle, beyond the resolution of an f64 abscissa (T1 = {t1})"
        )));
    }
    Ok(match side {
        QSide::Plus => 1.0 - d,
        QSide::Minus => d,
    })
}

/// Spanning path of `rect` joining its two sides of orientation `across`,
/// traced along a level curve of the other frozen system.
pub fn spanning_path(w: &WeightPair, k: &RectConstants, rect: &OrientedRect, across: Orientation) -> Result<PlanarPath> {
    spanning_path_at(w, k, rect, across, 0.5)
}

/// Spanning path along the traced level at relative position `frac ∈ (0,1)`
/// of the admissible range; `0.5` is the canonical one.
pub fn spanning_path_at(
    w: &WeightPair,
    k: &RectConstants,
    rect: &OrientedRect,
    across: Orientation,
    frac: f64,
) -> Result<PlanarPath> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::Path(format!("level fraction {frac} outside (0, 1)")));
    }
    let branch = rect.halfplane.sign();
    let (sys, level, x_from, target_band, target_limits) = spanning_recipe(w, k, rect, across, frac)?;
    // along the traced level, the other energy is c + F_other - F_traced,
    // monotone in x
    let other = target_band.system;
    let g = |x: f64| level + potential(&other, x) - potential(&sys, x);
    let mut xs = Vec::new();
    for lim in target_limits {
        let x = match lim {
            Limit::Axis => x_from,
            Limit::Energy(e) => {
                let (a, b) = if x_from < 0.5 { (x_from, 1.0) } else { (0.0, x_from) };
                bisect_secant(|x| g(x) - e, a, b, 1e-15)
                    .ok_or_else(|| Error::Path(format!("traced level never reaches energy {e} in {:?}", rect.label)))?
            }
        };
        xs.push(x);
    }
    let (x_lo, x_hi) = if xs[0] <= xs[1] { (xs[0], xs[1]) } else { (xs[1], xs[0]) };
    let path = orbit_graph(&sys, EnergyLevel(level), x_lo, x_hi, branch)?;
    // orient from the first side to the second
    let first_on_lo = (xs[0] - x_lo).abs() <= (xs[0] - x_hi).abs();
    Ok(if first_on_lo { path } else { path.reversed() })
}

#[derive(Debug, Clone, Copy)]
enum Limit {
    Energy(f64),
    Axis,
}

type Recipe = (SystemParams, f64, f64, EnergyBand, [Limit; 2]);

fn spanning_recipe(w: &WeightPair, k: &RectConstants, rect: &OrientedRect, across: Orientation, f: f64) -> Result<Recipe> {
    let mid = |b: &EnergyBand| b.lo + f * (b.hi - b.lo);
    let at = |a: f64, b: f64| a + f * (b - a);
    let e2 = |b: &EnergyBand| [Limit::Energy(b.lo), Limit::Energy(b.hi)];
    Ok(match (rect.label, across) {
        // R₁/R₃: trace an intermediate level of the band that is not being crossed
        (RectLabel::R1, Orientation::Minus) | (RectLabel::R3, Orientation::Plus) => {
            (w.plus, mid(&rect.band2), 0.0, rect.band1, e2(&rect.band1))
        }
        (RectLabel::R1, Orientation::Plus) | (RectLabel::R3, Orientation::Minus) => {
            (w.minus, mid(&rect.band1), 1.0, rect.band2, e2(&rect.band2))
        }
        // R₂ minus: inner arc of S(a₋) through (ξ,0), p₋ < ξ < q₊
        (RectLabel::R2, Orientation::Minus) => {
            let xi = at(k.p_minus, k.q_plus);
            (w.minus, potential(&w.minus, xi), xi, rect.band2, e2(&rect.band2))
        }
        // R₂ plus: closed orbit of S(a₊) through (ξ,0), q₊ < ξ < 1
        (RectLabel::R2, Orientation::Plus) => {
            let xi = at(k.q_plus, 1.0);
            (w.plus, potential(&w.plus, xi), xi, rect.band1, [Limit::Energy(rect.band1.lo), Limit::Axis])
        }
        (RectLabel::R4, Orientation::Minus) => {
            let xi = at(k.q_minus, k.p_plus);
            (w.plus, potential(&w.plus, xi), xi, rect.band2, e2(&rect.band2))
        }
        (RectLabel::R4, Orientation::Plus) => {
            let xi = at(0.0, k.q_minus);
            (w.minus, potential(&w.minus, xi), xi, rect.band1, [Limit::Energy(rect.band1.lo), Limit::Axis])
        }
    })
}

/// A deep-interior point: the middle of the minus-spanning path.
pub fn witness(w: &WeightPair, k: &RectConstants, rect: &OrientedRect) -> Result<PhasePoint> {
    Ok(spanning_path(w, k, rect, Orientation::Minus)?.at(0.5))
}

/// A parameter interval whose image crosses a rectangle between its two
/// sides of one orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub s0: f64,
    pub s1: f64,
    /// Side index (0 or 1) met at `s0` and `s1`.
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    s: f64,
    /// Side index of the designated orientation, `None` for the others.
    side: Option<usize>,
}

/// Parameter tolerance of crossing endpoints.
pub const CROSSING_PARAM_TOL: f64 = 1e-9;

/// Crossings of a parameterized image curve through `rect`, between the two
/// sides of orientation `o`.
///
/// `params`/`imgs` are samples of the curve; `eval(s)` evaluates it at any
/// parameter and is used to bisect boundary hits and to probe between them.
pub fn find_crossings<E>(params: &[f64], imgs: &[PhasePoint], rect: &OrientedRect, o: Orientation, mut eval: E) -> Result<Vec<Crossing>>
where
    E: FnMut(f64) -> Result<PhasePoint>,
{
    if params.len() != imgs.len() || params.is_empty() {
        return Err(Error::Path("parameter and image samples disagree".into()));
    }
    let n = params.len();
    let margins: Vec<[f64; 5]> = imgs.iter().map(|&p| CONSTRAINTS.map(|c| rect.margin(c, p))).collect();
    let in_closure = |m: &[f64; 5]| m.iter().all(|&v| v >= -BOUNDARY_TOL);
    let label = |c: Constraint| rect.side_index(o, c);
    let mut events: Vec<Event> = Vec::new();
    // endpoints lying on a side count as boundary hits
    for &i in &[0, n - 1] {
        let m = &margins[i];
        if in_closure(m) {
            if let Some(j) = (0..5).filter(|&j| m[j] <= BOUNDARY_TOL).min_by(|&a, &b| m[a].partial_cmp(&m[b]).unwrap()) {
                events.push(Event { s: params[i], side: label(CONSTRAINTS[j]) });
            }
        }
    }
    for i in 0..n - 1 {
        for (j, &c) in CONSTRAINTS.iter().enumerate() {
            let (m0, m1) = (margins[i][j], margins[i + 1][j]);
            // a sample exactly on the limit counts as inside
            if (m0 < 0.0) == (m1 < 0.0) {
                continue;
            }
            let mut err = None;
            let s = bisect_secant(
                |s| match eval(s) {
                    Ok(p) => rect.margin(c, p),
                    Err(e) => {
                        err = Some(e);
                        0.0
                    }
                },
                params[i],
                params[i + 1],
                1e-15 * params[i + 1].abs().max(1.0),
            );
            if let Some(e) = err {
                return Err(e);
            }
            let Some(s) = s else { continue };
            let p = eval(s)?;
            let on_rect = CONSTRAINTS.iter().enumerate().all(|(jj, &cc)| jj == j || rect.margin(cc, p) >= -BOUNDARY_TOL);
            if on_rect {
                events.push(Event { s, side: label(c) });
            }
        }
    }
    events.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap());
    let mut out = Vec::new();
    for pair in events.windows(2) {
        let (e0, e1) = (pair[0], pair[1]);
        let (Some(a), Some(b)) = (e0.side, e1.side) else { continue };
        if a == b || !(e1.s > e0.s) {
            continue;
        }
        // interior between the two hits: samples strictly inside the
        // interval and three probes
        let mut inside = true;
        let lo = params.partition_point(|&s| s <= e0.s);
        let hi = params.partition_point(|&s| s < e1.s);
        for m in &margins[lo..hi] {
            if !in_closure(m) {
                inside = false;
                break;
            }
        }
        if inside {
            for f in [0.25, 0.5, 0.75] {
                let p = eval(e0.s + f * (e1.s - e0.s))?;
                if contains(rect, p) == Membership::Outside {
                    inside = false;
                    break;
                }
            }
        }
        if inside {
            out.push(Crossing { s0: e0.s, s1: e1.s, from: a, to: b });
        }
    }
    Ok(out)
}

/// Maximal sub-paths of `path` crossing `rect` between its two sides of
/// orientation `o`.
pub fn crossing_subpaths(path: &PlanarPath, rect: &OrientedRect, o: Orientation) -> Result<Vec<(Crossing, PlanarPath)>> {
    if path.len() < 2 {
        return Ok(Vec::new());
    }
    let params: Vec<f64> = path.points().iter().map(|q| q.s).collect();
    let imgs: Vec<PhasePoint> = path.points().iter().map(|q| q.p).collect();
    let cs = find_crossings(&params, &imgs, rect, o, |s| Ok(path.at(s)))?;
    cs.into_iter().map(|c| Ok((c, path.sub_path(c.s0, c.s1)?))).collect()
}

/// JSON-friendly description of the rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectReport {
    pub constants: RectConstants,
    pub rects: Vec<RectSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectSummary {
    pub label: RectLabel,
    pub band1: [f64; 3],
    pub band2: [f64; 3],
    pub halfplane: HalfPlane,
    pub witness: PhasePoint,
}

pub fn rect_report(w: &WeightPair, k: &RectConstants) -> Result<RectReport> {
    let rs = build_rects(w, k)?;
    let mut rects = Vec::new();
    for r in [&rs.r1, &rs.r2, &rs.r3, &rs.r4] {
        rects.push(RectSummary {
            label: r.label,
            band1: [r.band1.system.a(), r.band1.lo, r.band1.hi],
            band2: [r.band2.system.a(), r.band2.lo, r.band2.hi],
            halfplane: r.halfplane,
            witness: witness(w, k, r)?,
        });
    }
    Ok(RectReport { constants: *k, rects })
}
