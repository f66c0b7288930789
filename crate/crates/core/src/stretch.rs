//! Time thresholds `T₁*`, `T₂*(N)`, `τ`, `τ′`, `ε*(M)` and numerical
//! verification of stretching relations between oriented rectangles.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{angle_lift, integrate_chart, poincare_chart, Field, Sign, WeightPair};
use crate::manifolds::{graph_window, GraphWindows};
use crate::phase::{
    closed_orbit_period, homoclinic_apex, potential, saddle1_level, time_of_flight, EnergyLevel, PhasePoint, SystemParams,
};
use crate::ode::{ChartState, IntegratorOptions};
use crate::regions::{
    build_rects, choose_p, compute_q, contains, find_crossings, spanning_path_at, Membership, Orientation, RectConstants,
    RectLabel,
};
use crate::roots::bisect_secant;

/// `T₁*`: twice the larger of the half-transits along `Θ(a₋,(p₋,0))` over
/// `[0,p₋]` and along `Θ(a₊,(p₊,0))` over `[p₊,1]`.
pub fn t1_star(w: &WeightPair, p_minus: f64, p_plus: f64) -> Result<f64> {
    let m = time_of_flight(&w.minus, EnergyLevel(potential(&w.minus, p_minus)), 0.0, p_minus)?;
    let p = time_of_flight(&w.plus, EnergyLevel(potential(&w.plus, p_plus)), p_plus, 1.0)?;
    Ok(2.0 * m.max(p))
}

/// `T₂*(N) = (N+1)·period` of the closed orbit of `sys` through `(q,0)`.
pub fn t2_star(sys: &SystemParams, q: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(crate::error::domain("T2* needs N >= 1"));
    }
    Ok(f64::from(n + 1) * closed_orbit_period(sys, q)?)
}

/// Crossing abscissas and transit times used by the connection threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauValues {
    pub x_star: f64,
    pub x_star2: f64,
    pub x1: f64,
    pub x2: f64,
    pub tau: f64,
    pub tau_prime: f64,
}

/// `x*` where `H(a₋)` meets `Θ(a₊,(p₊,0))`, `x**` where `H(a₊)` meets
/// `Θ(a₋,(p₋,0))`, and the transit times from `x₁ = min{x*, a₋⁰}` to 1 and
/// from 0 to `x₂ = max{x**, a₊¹}`.
pub fn tau_values(w: &WeightPair, k: &RectConstants, gw: &GraphWindows) -> Result<TauValues> {
    let (m, p) = (&w.minus, &w.plus);
    // F₊ - F₋ is decreasing on [0,1]
    let target = potential(p, k.p_plus);
    let g = |x: f64| potential(p, x) - potential(m, x) - target;
    let x_star = bisect_secant(g, 0.0, 1.0, 1e-15)
        .ok_or_else(|| Error::Geometry("H(a-) and Θ(a+,(p+,0)) do not meet in (0,1)".into()))?;
    let zm = homoclinic_apex(m)?;
    if !(x_star > 0.0 && x_star <= zm) {
        return Err(Error::Geometry(format!("x* = {x_star} is not on H(a-) (apex {zm})")));
    }
    let target2 = potential(m, k.p_minus) - saddle1_level(p);
    let g2 = |x: f64| potential(m, x) - potential(p, x) - target2;
    let x_star2 = bisect_secant(g2, 0.0, 1.0, 1e-15)
        .ok_or_else(|| Error::Geometry("H(a+) and Θ(a-,(p-,0)) do not meet in (0,1)".into()))?;
    let zp = homoclinic_apex(p)?;
    if !(x_star2 < 1.0 && x_star2 >= zp) {
        return Err(Error::Geometry(format!("x** = {x_star2} is not on H(a+) (apex {zp})")));
    }
    let x1 = x_star.min(gw.a_minus_0);
    let x2 = x_star2.max(gw.a_plus_1);
    // Θ(a₊,(p₊,0)) only spans [p₊, 1]; x₁ = a₋⁰ may fall short of it
    if x1 < k.p_plus || x2 > k.p_minus {
        return Err(Error::Geometry(format!(
            "x1 = {x1} < p+ = {} or x2 = {x2} > p- = {}: the defining orbits do not reach the graph windows",
            k.p_plus, k.p_minus
        )));
    }
    let tau = time_of_flight(p, EnergyLevel(potential(p, k.p_plus)), x1, 1.0)?;
    let tau_prime = time_of_flight(m, EnergyLevel(potential(m, k.p_minus)), 0.0, x2)?;
    Ok(TauValues { x_star, x_star2, x1, x2, tau, tau_prime })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsMode {
    Chaos,
    Connection,
}

/// All thresholds for one weight pair and one set of rectangle constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t1_star: f64,
    /// Closed-orbit periods through `(q₊,0)` for `a₊` and `(q₋,0)` for `a₋`.
    pub period_plus: f64,
    pub period_minus: f64,
    /// `τ`, `τ′`; `None` when their geometry fails (connection mode is
    /// then unavailable), with the reason in `tau_error`.
    pub tau: Option<TauValues>,
    pub tau_error: Option<String>,
}

impl Thresholds {
    pub fn compute(w: &WeightPair, k: &RectConstants) -> Result<Self> {
        let gw = graph_window(w)?;
        let (tau, tau_error) = match tau_values(w, k, &gw) {
            Ok(t) => (Some(t), None),
            Err(Error::Geometry(m)) => (None, Some(m)),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(Self {
            t1_star: t1_star(w, k.p_minus, k.p_plus)?,
            period_plus: closed_orbit_period(&w.plus, k.q_plus)?,
            period_minus: closed_orbit_period(&w.minus, k.q_minus)?,
            tau,
            tau_error,
        })
    }

    /// The larger period: both twist rectangles must wind `N` times.
    pub fn period(&self) -> f64 {
        self.period_plus.max(self.period_minus)
    }

    pub fn t2_star(&self, n: u32) -> f64 {
        f64::from(n + 1) * self.period()
    }

    /// Largest gap-free time any stage of the construction needs.
    pub fn max_time(&self, m: u32, mode: EpsMode) -> Result<f64> {
        let base = self.t1_star.max(self.t2_star(m));
        match (mode, &self.tau) {
            (EpsMode::Chaos, _) => Ok(base),
            (EpsMode::Connection, Some(t)) => Ok(base.max(t.tau).max(t.tau_prime)),
            (EpsMode::Connection, None) => {
                Err(Error::Geometry(self.tau_error.clone().unwrap_or_else(|| "tau unavailable".into())))
            }
        }
    }

    pub fn eps_star(&self, m: u32, delta: f64, mode: EpsMode) -> Result<f64> {
        if m == 0 || !(delta > 0.0) {
            return Err(crate::error::domain("eps* needs M >= 1 and delta > 0"));
        }
        Ok(eps_star(delta, self.max_time(m, mode)?))
    }
}

/// `ε* = δ / max{…}`.
pub fn eps_star(delta: f64, max_time: f64) -> f64 {
    delta / max_time
}

/// Constants and thresholds for one weight pair: `p±` at the midpoints of
/// their intervals, `q±` located with `T₁ = t1_factor·T₁*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub weights: WeightPair,
    pub t1: f64,
    pub constants: RectConstants,
    pub thresholds: Thresholds,
}

impl Setup {
    pub fn new(w: WeightPair, t1_factor: f64, opts: &IntegratorOptions) -> Result<Self> {
        if !(t1_factor > 1.0) {
            return Err(crate::error::domain("T1 must exceed T1*"));
        }
        let (p_minus, p_plus) = choose_p(&w)?;
        let t1 = t1_factor * t1_star(&w, p_minus, p_plus)?;
        let constants = compute_q(&w, p_minus, p_plus, t1, opts)?;
        let thresholds = Thresholds::compute(&w, &constants)?;
        Ok(Self { weights: w, t1, constants, thresholds })
    }
}

/// One frozen-system leg of a composed map. `classes > 1` asks for the
/// image-time winding of this leg to be binned into `H_1 … H_classes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub sign: Sign,
    pub duration: f64,
    pub classes: u32,
}

/// A composition of Poincaré maps `Ψ±ᵀ`, applied first-leg first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchMap {
    pub weights: WeightPair,
    pub legs: Vec<Leg>,
}

/// Angular distance to a bin edge below which a winding class is undecided.
pub const BIN_EDGE_TOL: f64 = 1e-8;

impl StretchMap {
    pub fn identity(weights: WeightPair) -> Self {
        Self { weights, legs: Vec::new() }
    }

    pub fn poincare(weights: WeightPair, sign: Sign, duration: f64, classes: u32) -> Self {
        Self { weights, legs: vec![Leg { sign, duration, classes }] }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &StretchMap) -> Self {
        let mut legs = self.legs.clone();
        legs.extend(other.legs.iter().copied());
        Self { weights: self.weights, legs }
    }

    /// Crossing number demanded by the classified legs.
    pub fn crossing_number(&self) -> u64 {
        self.legs.iter().map(|l| u64::from(l.classes.max(1))).product()
    }

    pub fn apply_chart(&self, z: ChartState, opts: &IntegratorOptions) -> Result<ChartState> {
        self.legs.iter().try_fold(z, |z, l| poincare_chart(&self.weights, l.sign, l.duration, z, opts))
    }

    pub fn apply(&self, p: PhasePoint, opts: &IntegratorOptions) -> Result<PhasePoint> {
        Ok(self.apply_chart(ChartState::from_point(p), opts)?.point())
    }

    /// Winding bins of the classified legs: `Some(j)` when the final lifted
    /// angle of the leg lies in `[(2j-1)π, 2jπ]`, `None` in a complementary
    /// bin.
    pub fn winding_classes(&self, p: PhasePoint, opts: &IntegratorOptions) -> Result<Vec<Option<u32>>> {
        let mut out = Vec::new();
        let mut z = ChartState::from_point(p);
        for l in &self.legs {
            let sys = *self.weights.get(l.sign);
            if l.classes > 1 {
                let tr = integrate_chart(Field::Frozen(sys), z, 0.0, l.duration, opts)?;
                let lift = angle_lift(sys.a(), &tr).map_err(|e| Error::Inconclusive(format!("winding class: {e}")))?;
                // a start in the lower half-plane (R₄) has θ(0) ∈ (0, π); the
                // bins are shifted by π to count its full turns the same way
                let shift = if lift.initial() > 0.0 { std::f64::consts::PI } else { 0.0 };
                out.push(winding_bin(lift.last() - shift)?);
                z = tr.end_chart();
            } else {
                z = poincare_chart(&self.weights, l.sign, l.duration, z, opts)?;
            }
        }
        Ok(out)
    }
}

/// Bin of a lifted clockwise angle: `j` with `θ ∈ [(2j-1)π, 2jπ]`.
pub fn winding_bin(theta: f64) -> Result<Option<u32>> {
    use std::f64::consts::PI;
    let u = theta / PI;
    if (u - u.round()).abs() * PI < BIN_EDGE_TOL {
        return Err(Error::Inconclusive(format!("angle {theta} within {BIN_EDGE_TOL} rad of a bin edge")));
    }
    let j = (u / 2.0).ceil();
    if j >= 1.0 && u >= 2.0 * j - 1.0 {
        Ok(Some(j as u32))
    } else {
        Ok(None)
    }
}

/// A map together with the source and target of a stretching relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub map: StretchMap,
    pub source: RectLabel,
    pub source_orientation: Orientation,
    pub target: RectLabel,
    pub target_orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingWitness {
    pub s0: f64,
    pub s1: f64,
    pub image_start: PhasePoint,
    pub image_end: PhasePoint,
    pub classes: Vec<Option<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathWitness {
    pub level_fraction: f64,
    pub samples: usize,
    /// The refinement cap was hit with image gaps still above tolerance.
    pub exhausted: bool,
    pub crossings: Vec<CrossingWitness>,
    pub distinct_classes: usize,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchReport {
    pub relation: Relation,
    pub crossing_number_requested: u64,
    pub witnesses: Vec<PathWitness>,
    pub passed: bool,
}

/// Image-space resolution of the path refinement.
pub const IMAGE_TOL: f64 = 1e-2;
/// Image gap allowed between consecutive samples. The rectangles shrink to
/// widths of order `1 - q₊` and `q₋` near the saddles, so the tolerance
/// scales with the distance to the nearer saddle below 0.1, down to a
/// hundredth of that width.
pub fn image_tolerance(k: &RectConstants, a: &PhasePoint, b: &PhasePoint) -> f64 {
    let r = |p: &PhasePoint| p.x.hypot(p.y).min((p.x - 1.0).hypot(p.y));
    let floor = 1e-2 * (1.0 - k.q_plus).min(k.q_minus);
    (IMAGE_TOL * (r(a).min(r(b)) / 0.1).min(1.0)).max(floor)
}

/// Sample cap of the path refinement.
pub const MAX_PATH_POINTS: usize = 1 << 18;
pub const DEFAULT_PATH_BUDGET: usize = 5;

/// Level fractions of the tested spanning paths, canonical first.
pub fn path_fractions(budget: usize) -> Vec<f64> {
    let base = [0.5, 0.1, 0.3, 0.7, 0.9];
    if budget <= base.len() {
        return base[..budget].to_vec();
    }
    let mut f = base.to_vec();
    let extra = budget - base.len();
    f.extend((1..=extra).map(|i| (i as f64 - 0.5) / extra as f64));
    f
}

/// Witness-based check that `rel.map` stretches the source rectangle to the
/// target along paths with the map's crossing number.
pub fn verify_stretch(
    w: &WeightPair,
    k: &RectConstants,
    rel: &Relation,
    path_budget: usize,
    opts: &IntegratorOptions,
) -> Result<StretchReport> {
    let rects = build_rects(w, k)?;
    let source = rects.get(rel.source);
    let target = rects.get(rel.target);
    let required = required_classes(&rel.map);
    let mut witnesses = Vec::new();
    for frac in path_fractions(path_budget) {
        let path = spanning_path_at(w, k, source, rel.source_orientation, frac)?;
        let needs_split = |a: &PhasePoint, b: &PhasePoint| a.dist(b) > image_tolerance(k, a, b);
        let (path, imgs) = path.refined_for_map_by(|p| rel.map.apply(p, opts), needs_split, MAX_PATH_POINTS)?;
        let exhausted = imgs.windows(2).any(|g| needs_split(&g[0], &g[1]));
        let params: Vec<f64> = path.points().iter().map(|q| q.s).collect();
        let cs = find_crossings(&params, &imgs, target, rel.target_orientation, |s| rel.map.apply(path.at(s), opts))?;
        let mut crossings = Vec::new();
        for c in cs {
            let mid = path.at(0.5 * (c.s0 + c.s1));
            crossings.push(CrossingWitness {
                s0: c.s0,
                s1: c.s1,
                image_start: rel.map.apply(path.at(c.s0), opts)?,
                image_end: rel.map.apply(path.at(c.s1), opts)?,
                classes: rel.map.winding_classes(mid, opts)?,
            });
        }
        let found: BTreeSet<Vec<u32>> =
            crossings.iter().filter_map(|c| c.classes.iter().copied().collect::<Option<Vec<u32>>>()).collect();
        let satisfied = if required.is_empty() { !crossings.is_empty() } else { required.is_subset(&found) };
        if !satisfied && exhausted {
            return Err(Error::Inconclusive(format!(
                "{}: image gaps on path {frac} unresolved at the parameter resolution or the {MAX_PATH_POINTS}-point \
                 cap; {} crossings found, classes found {:?}, classes required {:?}",
                rel.name,
                crossings.len(),
                found,
                required
            )));
        }
        witnesses.push(PathWitness {
            level_fraction: frac,
            samples: path.len(),
            exhausted,
            distinct_classes: found.len(),
            crossings,
            satisfied,
        });
    }
    let passed = witnesses.iter().all(|p| p.satisfied);
    Ok(StretchReport { relation: rel.clone(), crossing_number_requested: rel.map.crossing_number(), witnesses, passed })
}

/// Every combination of bins `1..=classes` over the classified legs; empty
/// when no leg is classified.
fn required_classes(map: &StretchMap) -> BTreeSet<Vec<u32>> {
    let dims: Vec<u32> = map.legs.iter().filter(|l| l.classes > 1).map(|l| l.classes).collect();
    if dims.is_empty() {
        return BTreeSet::new();
    }
    let mut out = vec![Vec::new()];
    for d in dims {
        out = out.into_iter().flat_map(|v| (1..=d).map(move |j| [v.clone(), vec![j]].concat())).collect();
    }
    out.into_iter().collect()
}

/// Checks the composed relation `bc ∘ ab` with crossing number the product,
/// and that every composed witness passes through the intermediate
/// rectangle.
pub fn verify_composition(
    w: &WeightPair,
    k: &RectConstants,
    ab: &StretchReport,
    bc: &StretchReport,
    path_budget: usize,
    opts: &IntegratorOptions,
) -> Result<StretchReport> {
    let (r1, r2) = (&ab.relation, &bc.relation);
    if r1.target != r2.source || r1.target_orientation != r2.source_orientation {
        return Err(crate::error::domain(format!("{} does not end where {} starts", r1.name, r2.name)));
    }
    let rel = Relation {
        name: format!("{} then {}", r1.name, r2.name),
        map: r1.map.then(&r2.map),
        source: r1.source,
        source_orientation: r1.source_orientation,
        target: r2.target,
        target_orientation: r2.target_orientation,
    };
    let mut rep = verify_stretch(w, k, &rel, path_budget, opts)?;
    let rects = build_rects(w, k)?;
    let (source, mid_rect) = (rects.get(rel.source), rects.get(r1.target));
    for (pw, frac) in rep.witnesses.iter_mut().zip(path_fractions(path_budget)) {
        let path = spanning_path_at(w, k, source, rel.source_orientation, frac)?;
        for c in &pw.crossings {
            let p = path.at(0.5 * (c.s0 + c.s1));
            if contains(mid_rect, r1.map.apply(p, opts)?) == Membership::Outside {
                pw.satisfied = false;
            }
        }
    }
    rep.passed = ab.passed && bc.passed && rep.witnesses.iter().all(|p| p.satisfied);
    Ok(rep)
}

/// The six relations of the stretching proposition with transfer time `t1`,
/// twist time `t2` and crossing number `n` on the twist maps.
pub fn standard_relations(w: WeightPair, t1: f64, t2: f64, n: u32) -> Vec<Relation> {
    use Orientation::{Minus as Mi, Plus as Pl};
    use RectLabel::*;
    let rel = |name: &str, sign, t, classes, s, so, tg, to| Relation {
        name: name.into(),
        map: StretchMap::poincare(w, sign, t, classes),
        source: s,
        source_orientation: so,
        target: tg,
        target_orientation: to,
    };
    vec![
        rel("psi_minus_T1: R1- -> R2-", Sign::Minus, t1, 1, R1, Mi, R2, Mi),
        rel("psi_minus_T1: R2+ -> R3-", Sign::Minus, t1, 1, R2, Pl, R3, Mi),
        rel("psi_plus_T1: R3- -> R4-", Sign::Plus, t1, 1, R3, Mi, R4, Mi),
        rel("psi_plus_T1: R4+ -> R1-", Sign::Plus, t1, 1, R4, Pl, R1, Mi),
        rel("psi_plus_T2: R2- -> R2+", Sign::Plus, t2, n, R2, Mi, R2, Pl),
        rel("psi_minus_T2: R4- -> R4+", Sign::Minus, t2, n, R4, Mi, R4, Pl),
    ]
}

/// The block map `Ψ₊∘Ψ₋∘Ψ₊∘Ψ₋∘Ψ₊∘Ψ₋` on `(R₁,R₁⁻)` with the given gaps.
pub fn block_relation(w: WeightPair, gaps: [f64; 6], n_plus: u32, n_minus: u32) -> Relation {
    let legs = gaps
        .iter()
        .enumerate()
        .map(|(j, &g)| Leg {
            sign: if j % 2 == 0 { Sign::Minus } else { Sign::Plus },
            duration: g,
            classes: match j {
                1 => n_plus,
                4 => n_minus,
                _ => 1,
            },
        })
        .collect();
    Relation {
        name: "block map: R1- -> R1-".into(),
        map: StretchMap { weights: w, legs },
        source: RectLabel::R1,
        source_orientation: Orientation::Minus,
        target: RectLabel::R1,
        target_orientation: Orientation::Minus,
    }
}
