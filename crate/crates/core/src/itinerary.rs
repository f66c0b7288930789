//! Realization of finite turn itineraries by nested sub-path selection, and
//! periodic solutions for periodic itineraries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{count_turns, flow_chart, integrate, Field, Sign, StepProfile, Trajectory, WeightPair};
use crate::ode::{ChartState, IntegratorOptions};
use crate::path::PlanarPath;
use crate::phase::PhasePoint;
use crate::regions::{
    build_rects, compute_q, contains, find_crossings, spanning_path, Membership, Orientation, RectConstants, RectLabel,
    Rects,
};
use crate::stretch::{image_tolerance, EpsMode, Setup, StretchMap, MAX_PATH_POINTS};

/// Requested turns `(n⁺_j, n⁻_j)` for blocks `j = 1…K`, each in `1..=cap`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    pub blocks: Vec<(u32, u32)>,
    pub cap: u32,
}

impl Itinerary {
    pub fn new(blocks: Vec<(u32, u32)>, cap: u32) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidItinerary("the cap M must be at least 1".into()));
        }
        for (j, &(np, nm)) in blocks.iter().enumerate() {
            for n in [np, nm] {
                if n < 1 || n > cap {
                    return Err(Error::InvalidItinerary(format!("block {}: {n} turns outside 1..={cap}", j + 1)));
                }
            }
        }
        Ok(Self { blocks, cap })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Switching windows of block `j`, in original time `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockWindow {
    pub j: usize,
    pub whole: (f64, f64),
    pub plus: (f64, f64),
    pub minus: (f64, f64),
}

/// `I_j = [s_{6(j-1)}, s_{6j}]`, `I_j⁺ = [s_{6j-5}, s_{6j-4}]`,
/// `I_j⁻ = [s_{6j-2}, s_{6j-1}]` for `j = 1…k`.
pub fn block_windows(profile: &StepProfile, k: usize) -> Result<Vec<BlockWindow>> {
    (1..=k as i64)
        .map(|j| {
            Ok(BlockWindow {
                j: j as usize,
                whole: (profile.s(6 * (j - 1))?, profile.s(6 * j)?),
                plus: (profile.s(6 * j - 5)?, profile.s(6 * j - 4)?),
                minus: (profile.s(6 * j - 2)?, profile.s(6 * j - 1)?),
            })
        })
        .collect()
}

/// One frozen leg of the nested selection: flow for `duration`, then pick a
/// crossing of `target` between its `orientation` sides, in winding class
/// `class` of `1..=classes` when `classes > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub sign: Sign,
    pub duration: f64,
    pub target: RectLabel,
    pub orientation: Orientation,
    pub class: u32,
    pub classes: u32,
}

/// The six stages of a block with rescaled interval lengths `d`.
pub fn block_stages(d: [f64; 6], n_plus: u32, n_minus: u32, cap: u32) -> [Stage; 6] {
    use Orientation::{Minus as Mi, Plus as Pl};
    use RectLabel::*;
    let st = |i: usize, target, orientation, class, classes| Stage {
        sign: if i % 2 == 0 { Sign::Minus } else { Sign::Plus },
        duration: d[i],
        target,
        orientation,
        class,
        classes,
    };
    [
        st(0, R2, Mi, 1, 1),
        st(1, R2, Pl, n_plus, cap),
        st(2, R3, Mi, 1, 1),
        st(3, R4, Mi, 1, 1),
        st(4, R4, Pl, n_minus, cap),
        st(5, R1, Mi, 1, 1),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub sign: Sign,
    pub duration: f64,
    /// Surviving parameter interval on the initial path after this stage.
    pub interval: (f64, f64),
    pub crossings_found: usize,
    pub classes_found: Vec<u32>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nested {
    pub records: Vec<StageRecord>,
    pub interval: (f64, f64),
}

/// A frozen leg flown without selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub sign: Sign,
    pub duration: f64,
}

fn flow_legs(w: &WeightPair, legs: impl Iterator<Item = Leg>, mut z: ChartState, opts: &IntegratorOptions) -> Result<ChartState> {
    for l in legs {
        z = flow_chart(Field::Frozen(*w.get(l.sign)), z, 0.0, l.duration, opts)?;
    }
    Ok(z)
}

/// Image of `z` under the prefix legs followed by the stages.
pub fn stage_state(
    w: &WeightPair,
    prefix: &[Leg],
    stages: &[Stage],
    z: ChartState,
    opts: &IntegratorOptions,
) -> Result<ChartState> {
    let z = flow_legs(w, prefix.iter().copied(), z, opts)?;
    flow_legs(w, stages.iter().map(|s| Leg { sign: s.sign, duration: s.duration }), z, opts)
}

/// Push `gamma` through the stages, keeping at each one the crossing sub-path
/// with the smallest left endpoint among those in the requested class.
/// Intervals are parameters of `gamma`.
pub fn select_nested(
    w: &WeightPair,
    k: &RectConstants,
    rects: &Rects,
    gamma: &PlanarPath,
    stages: &[Stage],
    opts: &IntegratorOptions,
) -> Result<Nested> {
    select_nested_after(w, k, rects, &|u| ChartState::from_point(gamma.at(u)), &[], stages, opts)
}

/// [`select_nested`] on the initial states `start(u)`, `u ∈ [0,1]`, first
/// carried by the `prefix` legs.
pub fn select_nested_after(
    w: &WeightPair,
    k: &RectConstants,
    rects: &Rects,
    start: &dyn Fn(f64) -> ChartState,
    prefix: &[Leg],
    stages: &[Stage],
    opts: &IntegratorOptions,
) -> Result<Nested> {
    let (mut u0, mut u1) = (0.0, 1.0);
    let mut records = Vec::new();
    for (m, st) in stages.iter().enumerate() {
        let param = PlanarPath::segment(PhasePoint::new(u0, 0.0), PhasePoint::new(u1, 0.0))?.refined((u1 - u0) / 64.0);
        let image = |u: f64| -> Result<PhasePoint> { Ok(stage_state(w, prefix, &stages[..=m], start(u), opts)?.point()) };
        let needs_split = |a: &PhasePoint, b: &PhasePoint| a.dist(b) > image_tolerance(k, a, b);
        let (param, imgs) = param.refined_for_map_by(|p| image(p.x), needs_split, MAX_PATH_POINTS)?;
        let exhausted = imgs.windows(2).any(|g| needs_split(&g[0], &g[1]));
        let params: Vec<f64> = param.points().iter().map(|q| q.s).collect();
        let cs = find_crossings(&params, &imgs, rects.get(st.target), st.orientation, |s| image(param.at(s).x))?;
        let leg = StretchMap::poincare(*w, st.sign, st.duration, st.classes);
        let mut found = BTreeSet::new();
        let mut pick = None;
        for c in &cs {
            let (a, b) = (param.at(c.s0).x, param.at(c.s1).x);
            let ok = if st.classes > 1 {
                let pre = stage_state(w, prefix, &stages[..m], start(0.5 * (a + b)), opts)?.point();
                let j = match leg.winding_classes(pre, opts) {
                    Ok(v) => v[0],
                    Err(Error::Inconclusive(_)) => None,
                    Err(e) => return Err(e),
                };
                if let Some(j) = j {
                    found.insert(j);
                }
                j == Some(st.class)
            } else {
                true
            };
            if ok && pick.is_none() {
                pick = Some((a, b));
            }
        }
        let record = |interval| StageRecord {
            stage: m,
            sign: st.sign,
            duration: st.duration,
            interval,
            crossings_found: cs.len(),
            classes_found: found.iter().copied().collect(),
            samples: param.len(),
        };
        match pick {
            Some((a, b)) => {
                records.push(record((a, b)));
                (u0, u1) = (a, b);
            }
            None => {
                let why = if exhausted { "image resolution exhausted; " } else { "" };
                return Err(Error::RealizationFailed {
                    reason: format!(
                        "stage {m}: {why}{} crossings of {:?} found, classes {:?}, class {} required",
                        cs.len(),
                        st.target,
                        found,
                        st.class
                    ),
                    lo: u0,
                    hi: u1,
                });
            }
        }
    }
    Ok(Nested { records, interval: (u0, u1) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub weights: WeightPair,
    pub initial_time: f64,
    pub initial_point: PhasePoint,
    pub trajectory: Trajectory,
    pub windows: Vec<BlockWindow>,
    pub epsilon: f64,
    pub constants: RectConstants,
    pub stages: Vec<StageRecord>,
}

/// Rescaled interval lengths `t_{m+1} - t_m` for `m = 0 … 6k-1`.
pub(crate) fn durations(profile: &StepProfile, k: usize) -> Result<Vec<f64>> {
    (0..6 * k as i64).map(|m| Ok(profile.t(m + 1)? - profile.t(m)?)).collect()
}

/// Rectangles for a realization: `q±` from the longest transfer interval.
/// Shorter transfers still stretch across rectangles built this way, longer
/// ones do not.
pub fn realization_constants(profile: &StepProfile, k: usize, opts: &IntegratorOptions) -> Result<RectConstants> {
    let d = durations(profile, k)?;
    let t1 = d.iter().enumerate().filter(|(m, _)| m % 3 != 1).map(|(_, &t)| t).fold(0.0, f64::max);
    let setup = Setup::new(profile.weights, 1.1, opts)?;
    let k0 = setup.constants;
    compute_q(&profile.weights, k0.p_minus, k0.p_plus, t1, opts)
}

/// `ε < ε*(M)` in chaos mode with the thresholds of the default setup.
pub fn check_threshold(profile: &StepProfile, cap: u32, mode: EpsMode, opts: &IntegratorOptions) -> Result<f64> {
    let setup = Setup::new(profile.weights, 1.1, opts)?;
    let eps_star = setup.thresholds.eps_star(cap, profile.delta(), mode)?;
    if !(profile.epsilon() < eps_star) {
        return Err(Error::ThresholdViolation { epsilon: profile.epsilon(), eps_star });
    }
    Ok(eps_star)
}

/// Realize the itinerary on blocks `1…K` of the profile, starting at `t_0`
/// from the spanning path of `(R₁, R₁⁻)`.
pub fn realize_finite(profile: &StepProfile, itin: &Itinerary, opts: &IntegratorOptions) -> Result<RealizationResult> {
    let kk = itin.len();
    if kk == 0 {
        return Err(Error::InvalidItinerary("at least one block is needed".into()));
    }
    check_threshold(profile, itin.cap, EpsMode::Chaos, opts)?;
    let k = realization_constants(profile, kk, opts)?;
    realize_in_rects(profile, itin, &k, opts)
}

/// The nested selection of [`realize_finite`] on the rectangles of `k`,
/// without the smallness check on `ε`.
pub fn realize_in_rects(
    profile: &StepProfile,
    itin: &Itinerary,
    k: &RectConstants,
    opts: &IntegratorOptions,
) -> Result<RealizationResult> {
    let kk = itin.len();
    if kk == 0 {
        return Err(Error::InvalidItinerary("at least one block is needed".into()));
    }
    let windows = block_windows(profile, kk)?;
    let w = profile.weights;
    let k = *k;
    let rects = build_rects(&w, &k)?;
    let d = durations(profile, kk)?;
    let mut stages = Vec::with_capacity(6 * kk);
    for (j, &(np, nm)) in itin.blocks.iter().enumerate() {
        let dj: [f64; 6] = d[6 * j..6 * j + 6].try_into().unwrap();
        stages.extend(block_stages(dj, np, nm, itin.cap));
    }
    let gamma = spanning_path(&w, &k, &rects.r1, Orientation::Minus)?;
    let nested = select_nested(&w, &k, &rects, &gamma, &stages, opts)?;
    let (a, b) = nested.interval;
    let p0 = gamma.at(0.5 * (a + b));
    let t0 = profile.t(0)?;
    let trajectory = integrate(Field::Stepwise(profile), p0, t0, profile.t(6 * kk as i64)?, opts)?;
    Ok(RealizationResult {
        weights: w,
        initial_time: t0,
        initial_point: p0,
        trajectory,
        windows,
        epsilon: profile.epsilon(),
        constants: k,
        stages: nested.records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub j: usize,
    pub requested: (u32, u32),
    /// Zeros of `x'` on `I_j⁺` and `I_j⁻`.
    pub zeros: (usize, usize),
    pub in_r1_at_start: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub blocks: Vec<BlockCheck>,
    pub in_unit_interval: bool,
    pub passed: bool,
}

/// Turn counts on every `I_j±`, containment in `(0,1)`, and membership in
/// `R₁` at each `t_{6(j-1)}`.
pub fn validate(result: &RealizationResult, itin: &Itinerary) -> Result<ValidationReport> {
    let traj = &result.trajectory;
    let in_unit_interval = traj.samples().iter().all(|(_, p)| p.x > 0.0 && p.x < 1.0);
    let mut blocks = Vec::new();
    if itin.len() > result.windows.len() {
        return Err(Error::InvalidItinerary("itinerary longer than the realized window".into()));
    }
    let rects = build_rects(&result.weights, &result.constants)?;
    for (win, &req) in result.windows.iter().zip(&itin.blocks) {
        let e = result.epsilon;
        let zeros = |(a, b): (f64, f64)| traj.velocity_zeros(a / e, b / e).len();
        let z = (zeros(win.plus), zeros(win.minus));
        let start = traj.point_at(win.whole.0 / e);
        let in_r1 = contains(&rects.r1, start) != Membership::Outside;
        let counted = |iv: (f64, f64)| count_turns(traj, iv.0 / e, iv.1 / e).ok().map(|c| c.turns);
        let ok = counted(win.plus) == Some(req.0) && counted(win.minus) == Some(req.1) && in_r1;
        blocks.push(BlockCheck { j: win.j, requested: req, zeros: z, in_r1_at_start: in_r1, passed: ok });
    }
    let passed = in_unit_interval && blocks.iter().all(|b| b.passed);
    Ok(ValidationReport { blocks, in_unit_interval, passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCertificate {
    pub point: PhasePoint,
    pub residual: f64,
    pub in_r1: bool,
    pub newton_iterations: usize,
}

pub const FIXED_POINT_TOL: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-7;
const NEWTON_MAX_ITER: usize = 40;

/// `|Φ(p) - p|` for the `ℓ`-block map and membership of `p` in `R₁`.
pub fn fixed_point_residual(profile: &StepProfile, ell: usize, k: &RectConstants, p: PhasePoint, opts: &IntegratorOptions) -> Result<FixedPointCertificate> {
    let rects = build_rects(&profile.weights, k)?;
    let q = period_map(profile, ell, p, opts)?;
    Ok(FixedPointCertificate {
        point: p,
        residual: q.dist(&p),
        in_r1: contains(&rects.r1, p) != Membership::Outside,
        newton_iterations: 0,
    })
}

fn period_map(profile: &StepProfile, ell: usize, p: PhasePoint, opts: &IntegratorOptions) -> Result<PhasePoint> {
    let (t0, t1) = (profile.t(0)?, profile.t(6 * ell as i64)?);
    Ok(flow_chart(Field::Stepwise(profile), ChartState::from_point(p), t0, t1, opts)?.point())
}

/// Damped Newton on `Φ(p) - p` with a forward-difference Jacobian.
fn newton(profile: &StepProfile, ell: usize, seed: PhasePoint, opts: &IntegratorOptions) -> Result<(PhasePoint, f64, usize)> {
    let g = |p: PhasePoint| -> Result<(f64, f64)> {
        let q = period_map(profile, ell, p, opts)?;
        Ok((q.x - p.x, q.y - p.y))
    };
    let norm = |v: (f64, f64)| v.0.hypot(v.1);
    let mut p = seed;
    let mut r = g(p)?;
    for it in 0..NEWTON_MAX_ITER {
        if norm(r) < FIXED_POINT_TOL {
            return Ok((p, norm(r), it));
        }
        let gx = g(PhasePoint::new(p.x + FD_STEP, p.y))?;
        let gy = g(PhasePoint::new(p.x, p.y + FD_STEP))?;
        let (a, c) = ((gx.0 - r.0) / FD_STEP, (gx.1 - r.1) / FD_STEP);
        let (b, d) = ((gy.0 - r.0) / FD_STEP, (gy.1 - r.1) / FD_STEP);
        let det = a * d - b * c;
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::FixedPointNotFound(format!("singular Jacobian at iteration {it}")));
        }
        let step = ((d * r.0 - b * r.1) / det, (a * r.1 - c * r.0) / det);
        let mut lambda = 1.0;
        loop {
            let cand = PhasePoint::new(p.x - lambda * step.0, p.y - lambda * step.1);
            if let Ok(rc) = g(cand) {
                if norm(rc) < norm(r) {
                    p = cand;
                    r = rc;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Err(Error::FixedPointNotFound(format!("damping failed at iteration {it}, residual {:e}", norm(r))));
            }
        }
    }
    if norm(r) < FIXED_POINT_TOL {
        Ok((p, norm(r), NEWTON_MAX_ITER))
    } else {
        Err(Error::FixedPointNotFound(format!("no convergence in {NEWTON_MAX_ITER} iterations, residual {:e}", norm(r))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSolution {
    pub realization: RealizationResult,
    pub certificate: FixedPointCertificate,
    pub period_s: f64,
}

/// `true` when consecutive gaps repeat with period six over the window.
fn six_periodic(profile: &StepProfile) -> bool {
    let s = profile.switch_times();
    let g: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    g.len() >= 6 && (6..g.len()).all(|i| (g[i] - g[i - 6]).abs() <= 1e-12 * g[i].abs().max(1.0))
}

/// The profile continued by its six-periodic gap pattern to `blocks` blocks.
fn extended(profile: &StepProfile, blocks: usize) -> Result<StepProfile> {
    let s = profile.switch_times();
    let g: Vec<f64> = s.windows(2).take(6).map(|w| w[1] - w[0]).collect();
    let gaps: Vec<f64> = (0..6 * blocks).map(|i| g[i % 6]).collect();
    StepProfile::from_gaps(
        profile.weights.minus.a(),
        profile.weights.plus.a(),
        s[0],
        &gaps,
        profile.first_index(),
        profile.epsilon(),
    )
}

/// A periodic solution realizing the `ℓ`-periodic itinerary `itin` (one
/// period given), as a fixed point of the `ℓ`-block map in `R₁`.
pub fn periodic_solution(profile: &StepProfile, itin: &Itinerary, opts: &IntegratorOptions) -> Result<PeriodicSolution> {
    let ell = itin.len();
    if ell == 0 {
        return Err(Error::InvalidItinerary("a period needs at least one block".into()));
    }
    if !six_periodic(profile) || profile.first_index() != 0 {
        return Err(Error::Domain("periodic solutions need six-periodic gaps indexed from 0".into()));
    }
    let base = extended(profile, ell)?;
    let mut last_err = None;
    for m in 1..=3 {
        let blocks: Vec<(u32, u32)> = itin.blocks.iter().cycle().take(m * ell).copied().collect();
        let long = Itinerary::new(blocks, itin.cap)?;
        let prof = extended(profile, m * ell)?;
        let seed = match realize_finite(&prof, &long, opts) {
            Ok(r) => r,
            Err(e @ (Error::ThresholdViolation { .. } | Error::InvalidItinerary(_))) => return Err(e),
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match newton(&base, ell, seed.initial_point, opts) {
            Ok((p, residual, iters)) => {
                let mut cert = fixed_point_residual(&base, ell, &seed.constants, p, opts)?;
                cert.residual = residual;
                cert.newton_iterations = iters;
                if !cert.in_r1 {
                    last_err = Some(Error::FixedPointNotFound(format!("fixed point {p:?} lies outside R1")));
                    continue;
                }
                let t0 = base.t(0)?;
                let trajectory = integrate(Field::Stepwise(&base), p, t0, base.t(6 * ell as i64)?, opts)?;
                let realization = RealizationResult {
                    weights: base.weights,
                    initial_time: t0,
                    initial_point: p,
                    trajectory,
                    windows: block_windows(&base, ell)?,
                    epsilon: base.epsilon(),
                    constants: seed.constants,
                    stages: seed.stages,
                };
                let report = validate(&realization, itin)?;
                if !report.passed {
                    last_err = Some(Error::FixedPointNotFound("the fixed point does not realize the itinerary".into()));
                    continue;
                }
                let period_s = base.s(6 * ell as i64)? - base.s(0)?;
                return Ok(PeriodicSolution { realization, certificate: cert, period_s });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::FixedPointNotFound(format!(
        "no certified fixed point after seeding from 1, 2 and 3 periods; last error: {}",
        last_err.map_or_else(|| "none".into(), |e| e.to_string())
    )))
}
