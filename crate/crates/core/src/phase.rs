//! The frozen (autonomous) system `x' = y, y' = -f_a(x)` with
//! `f_a(x) = x(1-x)(x-a)` on `[0,1]` and `f_a = 0` outside.
//!
//! Everything here is either closed form or a one-dimensional root/quadrature
//! problem. Abscissas near the saddles are handled in local charts
//! ([`ChartX`]) so that energy differences of orbits hugging a separatrix keep
//! full relative precision.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::path::PlanarPath;
use crate::quadrature::tanh_sinh;
use crate::roots::bisect_secant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    a: f64,
}

impl SystemParams {
    pub fn new(a: f64) -> Result<Self> {
        if a.is_finite() && a > 0.0 && a < 1.0 {
            Ok(Self { a })
        } else {
            Err(domain(format!("weight a = {a} must lie in (0, 1)")))
        }
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    /// The system obtained by the reflection `x ↦ 1 - x`.
    pub fn mirrored(&self) -> Self {
        Self { a: 1.0 - self.a }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &PhasePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &PhasePoint, s: f64) -> PhasePoint {
        PhasePoint::new(self.x + s * (other.x - self.x), self.y + s * (other.y - self.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EnergyLevel(pub f64);

impl EnergyLevel {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelTag {
    CenterPoint,
    ClosedCycle,
    HomoclinicUnion,
    HeteroclinicUnion,
    InnerArc,
    SaddleManifoldUnion,
    TwoOuterCurves,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BalanceCase {
    ABelowHalf,
    AEqualHalf,
    AAboveHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelClass {
    pub tag: LevelTag,
    pub case: BalanceCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalLevels {
    pub center: EnergyLevel,
    pub saddle0: EnergyLevel,
    pub saddle1: EnergyLevel,
}

/// Which equilibrium a local chart is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Anchor {
    Zero,
    One,
}

impl Anchor {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Anchor::Zero => 0.0,
            Anchor::One => 1.0,
        }
    }

    /// Chart best suited to represent `x`.
    pub fn nearest(x: f64) -> Anchor {
        if x < 0.5 {
            Anchor::Zero
        } else {
            Anchor::One
        }
    }
}

/// An abscissa written as `anchor + off`; `off` keeps full relative
/// precision for points very close to a saddle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartX {
    pub anchor: Anchor,
    pub off: f64,
}

impl ChartX {
    pub fn from_x(x: f64) -> Self {
        let anchor = Anchor::nearest(x);
        Self { anchor, off: x - anchor.value() }
    }

    pub fn new(anchor: Anchor, off: f64) -> Self {
        Self { anchor, off }
    }

    #[inline]
    pub fn x(self) -> f64 {
        self.anchor.value() + self.off
    }

    /// Same point, clamped to `[0, 1]`.
    fn clamped(self) -> Self {
        match self.anchor {
            Anchor::Zero if self.off < 0.0 => Self { off: 0.0, ..self },
            Anchor::One if self.off > 0.0 => Self { off: 0.0, ..self },
            Anchor::Zero if self.off > 1.0 => Self { anchor: Anchor::One, off: 0.0 },
            Anchor::One if self.off < -1.0 => Self { anchor: Anchor::Zero, off: 0.0 },
            _ => self,
        }
    }

    fn shifted(self, d: f64) -> Self {
        Self { off: self.off + d, ..self }
    }

    fn rechart(self, anchor: Anchor) -> Self {
        if anchor == self.anchor {
            self
        } else {
            Self { anchor, off: self.x() - anchor.value() }
        }
    }
}

/// `x(1-x)(x-a)` on `[0,1]`, zero outside.
pub fn cubic(params: &SystemParams, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    x * (1.0 - x) * (x - params.a)
}

/// The clamped cubic evaluated in a chart, without cancellation near the
/// anchor.
pub fn cubic_chart(params: &SystemParams, x: ChartX) -> f64 {
    let a = params.a;
    match x.anchor {
        Anchor::Zero => {
            let u = x.off;
            if !(0.0..=1.0).contains(&u) {
                return 0.0;
            }
            u * (1.0 - u) * (u - a)
        }
        Anchor::One => {
            let w = x.off;
            if !(-1.0..=0.0).contains(&w) {
                return 0.0;
            }
            -(1.0 + w) * w * (1.0 - a + w)
        }
    }
}

/// `-x⁴/4 + (1+a)x³/3 - a x²/2`, continued by constants outside `[0,1]`.
pub fn potential(params: &SystemParams, x: f64) -> f64 {
    let a = params.a;
    let x = x.clamp(0.0, 1.0);
    x * x * (-0.25 * x * x + (1.0 + a) / 3.0 * x - 0.5 * a)
}

/// Value of the potential at the saddle `(1,0)`.
pub fn saddle1_level(params: &SystemParams) -> f64 {
    (1.0 - 2.0 * params.a) / 12.0
}

/// `F(anchor) - F(anchor + off)` measured from the anchor, polynomial in the
/// offset.
fn drop_from_anchor(params: &SystemParams, x: ChartX) -> f64 {
    let a = params.a;
    let x = x.clamped();
    match x.anchor {
        Anchor::Zero => {
            let u = x.off;
            -(u * u * (-0.25 * u * u + (1.0 + a) / 3.0 * u - 0.5 * a))
        }
        Anchor::One => {
            // F(1) - F(1 - s) = (1-a)s²/2 - (2-a)s³/3 + s⁴/4
            let s = -x.off;
            s * s * (0.5 * (1.0 - a) - (2.0 - a) / 3.0 * s + 0.25 * s * s)
        }
    }
}

/// `F(u) - F(v)` computed through the divided difference so that nearby
/// abscissas do not cancel.
pub fn potential_diff(params: &SystemParams, u: ChartX, v: ChartX) -> f64 {
    let a = params.a;
    let u = u.clamped();
    let v = v.clamped().rechart(u.anchor);
    let v = v.clamped();
    if u.anchor != v.anchor {
        // v fell off the range of u's chart while clamping
        return potential(params, u.x()) - potential(params, v.x());
    }
    (u.off - v.off) * potential_slope(a, u.anchor, u.off, v.off)
}

/// Divided difference `(F(u) - F(v)) / (u - v)` from chart offsets `p`, `q`
/// sharing `anchor`.
fn potential_slope(a: f64, anchor: Anchor, p: f64, q: f64) -> f64 {
    match anchor {
        Anchor::Zero => {
            -(p * p * p + p * p * q + p * q * q + q * q * q) / 4.0 + (1.0 + a) * (p * p + p * q + q * q) / 3.0
                - a * (p + q) / 2.0
        }
        Anchor::One => {
            // F(1-s) = F(1) - G(s), so F(u) - F(v) = G(t) - G(s), t = -q, s = -p
            let (s, t) = (-p, -q);
            (1.0 - a) * (s + t) / 2.0 - (2.0 - a) * (s * s + s * t + t * t) / 3.0
                + (s * s * s + s * s * t + s * t * t + t * t * t) / 4.0
        }
    }
}

pub fn energy(params: &SystemParams, p: PhasePoint) -> EnergyLevel {
    EnergyLevel(0.5 * p.y * p.y + potential(params, p.x))
}

/// `E(p) - F(anchor)`: the energy measured from the level of the chosen
/// saddle, with full relative precision near it.
pub fn energy_above_saddle(params: &SystemParams, x: ChartX, y: f64) -> f64 {
    0.5 * y * y - drop_from_anchor(params, x)
}

pub fn critical_levels(params: &SystemParams) -> CriticalLevels {
    CriticalLevels {
        center: EnergyLevel(potential(params, params.a)),
        saddle0: EnergyLevel(0.0),
        saddle1: EnergyLevel(saddle1_level(params)),
    }
}

fn balance_case(params: &SystemParams) -> BalanceCase {
    if params.a < 0.5 {
        BalanceCase::ABelowHalf
    } else if params.a > 0.5 {
        BalanceCase::AAboveHalf
    } else {
        BalanceCase::AEqualHalf
    }
}

/// Classify the level set `E_a = c`. Comparisons with the critical levels are
/// exact.
pub fn classify_level(params: &SystemParams, c: EnergyLevel) -> LevelClass {
    let crit = critical_levels(params);
    let (center, s0, s1) = (crit.center.0, crit.saddle0.0, crit.saddle1.0);
    let c = c.0;
    let case = balance_case(params);
    let tag = if c < center {
        LevelTag::Empty
    } else if c == center {
        LevelTag::CenterPoint
    } else {
        // low: level of the saddle that carries the homoclinic loop
        let (low, high) = match case {
            BalanceCase::ABelowHalf => (s0, s1),
            BalanceCase::AAboveHalf => (s1, s0),
            BalanceCase::AEqualHalf => (s0, s0),
        };
        if c < low {
            LevelTag::ClosedCycle
        } else if c == low {
            if case == BalanceCase::AEqualHalf {
                LevelTag::HeteroclinicUnion
            } else {
                LevelTag::HomoclinicUnion
            }
        } else if c < high {
            LevelTag::InnerArc
        } else if c == high {
            LevelTag::SaddleManifoldUnion
        } else {
            LevelTag::TwoOuterCurves
        }
    };
    LevelClass { tag, case }
}

/// Intersection `z_a` of the homoclinic loop with the positive x-semiaxis.
pub fn homoclinic_apex(params: &SystemParams) -> Result<f64> {
    let a = params.a;
    if a == 0.5 {
        return Err(Error::NoHomoclinic);
    }
    if a < 0.5 {
        // smaller root of 3z² - 4(1+a)z + 6a = 0, written via the product of roots
        let b = 2.0 * (1.0 + a);
        let disc = b * b - 18.0 * a;
        Ok(6.0 * a / (b + disc.sqrt()))
    } else {
        Ok(1.0 - homoclinic_apex(&params.mirrored())?)
    }
}

/// Whether the homoclinic loops of the two frozen systems intersect.
pub fn linked(a_minus: &SystemParams, a_plus: &SystemParams) -> Result<bool> {
    if !(a_minus.a < 0.5 && a_plus.a > 0.5) {
        return Err(domain(format!(
            "linkage needs a- < 1/2 < a+, got a- = {}, a+ = {}",
            a_minus.a, a_plus.a
        )));
    }
    Ok(homoclinic_apex(a_plus)? < homoclinic_apex(a_minus)?)
}

/// `c - F(x)` with the level optionally anchored at a turning point `x_t`
/// (i.e. `c = F(x_t) + residual`), evaluated at `x_t + d`.
fn gap_from_turning(params: &SystemParams, x_t: ChartX, residual: f64, d: f64) -> f64 {
    let v = x_t.shifted(d);
    if x_t.clamped() == x_t && v.clamped() == v {
        // the exact step, not the rounded difference of offsets
        return residual - d * potential_slope(params.a, x_t.anchor, x_t.off, v.off);
    }
    residual + potential_diff(params, x_t, v)
}

const TURNING_TOL: f64 = 1e-13;

/// Sample the branch `y = branch·√(2(c - F(x)))` of a level set over
/// `[x_lo, x_hi]`.
pub fn orbit_graph(
    params: &SystemParams,
    c: EnergyLevel,
    x_lo: f64,
    x_hi: f64,
    branch: f64,
) -> Result<PlanarPath> {
    if !(x_lo <= x_hi) {
        return Err(domain("orbit_graph needs x_lo <= x_hi"));
    }
    let sign = if branch < 0.0 { -1.0 } else { 1.0 };
    let lo = ChartX::from_x(x_lo);
    let hi = ChartX::from_x(x_hi);
    let r_lo = c.0 - potential(params, x_lo);
    let r_hi = c.0 - potential(params, x_hi);
    let n = if x_lo == x_hi { 1 } else { 512 };
    let mut pts = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let s = if n == 0 { 0.0 } else { i as f64 / n as f64 };
        let w = 0.5 * (1.0 - (std::f64::consts::PI * s).cos());
        let d_lo = (x_hi - x_lo) * w;
        let d_hi = (x_hi - x_lo) * (1.0 - w);
        let x = if d_lo <= d_hi { x_lo + d_lo } else { x_hi - d_hi };
        let gap = if d_lo <= d_hi {
            gap_from_turning(params, lo, r_lo, d_lo)
        } else {
            gap_from_turning(params, hi, r_hi, -d_hi)
        };
        if gap < -1e-14 {
            return Err(domain(format!("level {} lies below the potential at x = {x}", c.0)));
        }
        pts.push(PhasePoint::new(x, sign * (2.0 * gap.max(0.0)).sqrt()));
    }
    if n == 1 && x_lo == x_hi {
        pts.truncate(1);
    }
    PlanarPath::from_points(pts)
}

/// Time `(1/√2)∫ dx/√(c - F(x))` to travel one branch of the level set
/// between two abscissas. Endpoints may be simple turning points.
pub fn time_of_flight(params: &SystemParams, c: EnergyLevel, x_lo: f64, x_hi: f64) -> Result<f64> {
    let (x_lo, x_hi) = if x_lo <= x_hi { (x_lo, x_hi) } else { (x_hi, x_lo) };
    if x_lo == x_hi {
        return Ok(0.0);
    }
    let scale = 1.0 + c.0.abs();
    let r_lo = c.0 - potential(params, x_lo);
    let r_hi = c.0 - potential(params, x_hi);
    if r_lo < -TURNING_TOL * scale || r_hi < -TURNING_TOL * scale {
        return Err(domain("level below the potential at an endpoint"));
    }
    let lo_turn = r_lo.abs() <= TURNING_TOL * scale;
    let hi_turn = r_hi.abs() <= TURNING_TOL * scale;
    for (turn, x) in [(lo_turn, x_lo), (hi_turn, x_hi)] {
        if turn && cubic(params, x).abs() < 1e-10 {
            return Err(domain(format!("turning point x = {x} is an equilibrium: infinite time")));
        }
    }
    // interior zeros of c - F: check the equilibria explicitly and a grid
    for eq in [0.0, params.a, 1.0] {
        if eq > x_lo && eq < x_hi && c.0 - potential(params, eq) <= 0.0 {
            return Err(domain(format!("level touches the potential at the equilibrium x = {eq}")));
        }
    }
    let n = 2000;
    for i in 1..n {
        let x = x_lo + (x_hi - x_lo) * i as f64 / n as f64;
        if c.0 - potential(params, x) < 0.0 {
            return Err(domain(format!("level below the potential at interior x = {x}")));
        }
    }
    let lo_c = ChartX::from_x(x_lo);
    let hi_c = ChartX::from_x(x_hi);
    // a turning endpoint is taken as exact: a residual of a few ulps would
    // shift the square-root singularity off the endpoint
    let r_lo = if lo_turn { 0.0 } else { r_lo };
    let r_hi = if hi_turn { 0.0 } else { r_hi };
    let integrand = |x: f64, d_lo: f64, d_hi: f64| -> f64 {
        let gap = if lo_turn && (d_lo <= d_hi || !hi_turn) {
            gap_from_turning(params, lo_c, r_lo, d_lo)
        } else if hi_turn {
            gap_from_turning(params, hi_c, r_hi, -d_hi)
        } else {
            c.0 - potential(params, x)
        };
        if gap > 0.0 { 1.0 / gap.sqrt() } else { 0.0 }
    };
    let q = tanh_sinh(integrand, x_lo, x_hi, 1e-12);
    if !q.converged && q.error_estimate > 1e-9 * q.value.abs() {
        return Err(domain(format!(
            "time-of-flight quadrature did not converge (estimate {}, error {})",
            q.value, q.error_estimate
        )));
    }
    Ok(q.value / std::f64::consts::SQRT_2)
}

/// The abscissa on the other side of the center lying on the same closed
/// orbit as `(q, 0)`.
pub fn turning_point(params: &SystemParams, q: f64) -> Result<f64> {
    let a = params.a;
    if q == a {
        return Ok(a);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("q = {q} outside (0, 1)")));
    }
    let fq = potential(params, q);
    if !(fq < 0.0f64.min(saddle1_level(params))) {
        return Err(domain(format!("q = {q} is not on a closed orbit around ({a}, 0)")));
    }
    let qc = ChartX::from_x(q);
    // the other root of F(x) = F(q) is a root of the divided difference
    let dd = |x: f64| {
        let xc = ChartX::from_x(x);
        let diff = potential_diff(params, xc, qc);
        diff / (x - q)
    };
    let (lo, hi) = if q > a { (0.0, a) } else { (a, 1.0) };
    // F(x) - F(q) changes sign on the bracket; work with it directly away
    // from q and with the divided difference near it
    let g = |x: f64| {
        if (x - q).abs() < 1e-3 {
            dd(x) * (x - q).signum()
        } else {
            potential_diff(params, ChartX::from_x(x), qc)
        }
    };
    bisect_secant(g, lo, hi, 1e-15)
        .ok_or_else(|| domain(format!("no turning point found for q = {q}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleData {
    pub position: PhasePoint,
    pub eigenvalue: f64,
    pub unstable_dir: PhasePoint,
    pub stable_dir: PhasePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterData {
    pub position: PhasePoint,
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumData {
    pub origin: SaddleData,
    pub center: CenterData,
    pub one: SaddleData,
}

fn saddle(x: f64, lambda: f64) -> SaddleData {
    let n = (1.0 + lambda * lambda).sqrt();
    SaddleData {
        position: PhasePoint::new(x, 0.0),
        eigenvalue: lambda,
        unstable_dir: PhasePoint::new(1.0 / n, lambda / n),
        stable_dir: PhasePoint::new(1.0 / n, -lambda / n),
    }
}

/// Linearization at the three equilibria.
pub fn equilibrium_data(params: &SystemParams) -> EquilibriumData {
    let a = params.a;
    EquilibriumData {
        origin: saddle(0.0, a.sqrt()),
        center: CenterData { position: PhasePoint::new(a, 0.0), frequency: (a * (1.0 - a)).sqrt() },
        one: saddle(1.0, (1.0 - a).sqrt()),
    }
}

/// Full period of the closed orbit through `(q, 0)`.
///
/// Near a separatrix the period is very sensitive to the level, so every gap
/// is measured from `q` in charts rather than from a rounded energy. The far
/// turning point `η` carries a residual `r = F(q) - F(η) ≥ 0` of a few ulps;
/// the piece between the true turning point and `η` is `2√r / |F'(η)|`.
pub fn closed_orbit_period(params: &SystemParams, q: f64) -> Result<f64> {
    let mut eta = turning_point(params, q)?;
    if eta == q {
        return Ok(2.0 * std::f64::consts::PI / (params.a * (1.0 - params.a)).sqrt());
    }
    let qc = ChartX::from_x(q);
    // Newton polish (F' is the cubic), then step η toward q until the level
    // lies on or above the potential there
    for _ in 0..2 {
        let slope = cubic(params, eta);
        if slope != 0.0 {
            eta += potential_diff(params, qc, ChartX::from_x(eta)) / slope;
        }
    }
    let inward = (q - eta).signum();
    let mut r = potential_diff(params, qc, ChartX::from_x(eta));
    for _ in 0..8 {
        if r >= 0.0 {
            break;
        }
        eta = if inward > 0.0 { eta.next_up() } else { eta.next_down() };
        r = potential_diff(params, qc, ChartX::from_x(eta));
    }
    if r < 0.0 {
        return Err(domain(format!("turning point of q = {q} not resolved")));
    }
    let ec = ChartX::from_x(eta);
    let (lo, hi) = if eta < q { (eta, q) } else { (q, eta) };
    let (lo_c, hi_c, r_lo, r_hi) = if eta < q { (ec, qc, r, 0.0) } else { (qc, ec, 0.0, r) };
    let integrand = |d_lo: f64, d_hi: f64| -> f64 {
        let gap = if d_lo <= d_hi {
            gap_from_turning(params, lo_c, r_lo, d_lo)
        } else {
            gap_from_turning(params, hi_c, r_hi, -d_hi)
        };
        if gap > 0.0 { 1.0 / gap.sqrt() } else { 0.0 }
    };
    // near a saddle the integrand varies on the scale of the distance to it,
    // so break the range geometrically from each end
    let width = hi - lo;
    let mut cuts = vec![0.0, width];
    for (end, from_lo) in [(lo, true), (hi, false)] {
        let mut d = end.min(1.0 - end);
        while d < 0.5 * width {
            cuts.push(if from_lo { d } else { width - d });
            d *= 4.0;
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let piece = tanh_sinh(|_, dl, dh| integrand(a + dl, (width - b) + dh), lo + a, lo + b, 1e-14);
        if !piece.converged && piece.error_estimate > 1e-11 * piece.value.abs() {
            return Err(domain(format!("period quadrature did not converge for q = {q}")));
        }
        total += piece.value;
    }
    let slope = cubic_chart(params, ec).abs();
    let end_piece = if r > 0.0 { 2.0 * r.sqrt() / slope } else { 0.0 };
    Ok(2.0 * (total + end_piece) / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64) -> SystemParams {
        SystemParams::new(a).unwrap()
    }

    #[test]
    fn rejects_bad_weight() {
        assert!(SystemParams::new(0.0).is_err());
        assert!(SystemParams::new(1.0).is_err());
        assert!(SystemParams::new(f64::NAN).is_err());
    }

    #[test]
    fn cubic_values() {
        assert_eq!(cubic(&p(0.4), 0.0), 0.0);
        assert_eq!(cubic(&p(0.4), 1.5), 0.0);
        assert_eq!(cubic(&p(0.4), -0.2), 0.0);
        assert!((cubic(&p(0.4), 0.5) - 0.025).abs() < 1e-17);
    }

    #[test]
    fn cubic_chart_matches_plain() {
        let s = p(0.3);
        for &x in &[0.01, 0.2, 0.49, 0.51, 0.8, 0.999] {
            let c = cubic_chart(&s, ChartX::from_x(x));
            assert!((c - cubic(&s, x)).abs() < 1e-15);
        }
        // near the saddle at 1 the chart keeps relative precision
        let w = -1e-30;
        let c = cubic_chart(&s, ChartX::new(Anchor::One, w));
        assert!((c - (-w * 0.7)).abs() < 1e-45);
    }

    #[test]
    fn potential_values() {
        assert_eq!(potential(&p(0.4), 0.0), 0.0);
        assert!((potential(&p(0.4), 1.0) - 1.0 / 60.0).abs() < 1e-16);
        assert!((potential(&p(0.4), 1.0) - saddle1_level(&p(0.4))).abs() < 1e-16);
        assert!((potential(&p(0.5), 0.5) + 1.0 / 64.0).abs() < 1e-16);
        assert_eq!(potential(&p(0.4), -3.0), 0.0);
        assert_eq!(potential(&p(0.4), 4.0), potential(&p(0.4), 1.0));
    }

    #[test]
    fn potential_diff_matches_direct() {
        let s = p(0.37);
        for &(u, v) in &[(0.1, 0.7), (0.9, 0.95), (0.02, 0.03), (0.6, 0.4), (-0.5, 0.3), (0.9, 1.4)] {
            let d = potential_diff(&s, ChartX::from_x(u), ChartX::from_x(v));
            assert!((d - (potential(&s, u) - potential(&s, v))).abs() < 1e-15, "{u} {v}");
        }
    }

    #[test]
    fn energy_values() {
        assert_eq!(energy(&p(0.4), PhasePoint::new(0.0, 0.0)).0, 0.0);
        assert!((energy(&p(0.4), PhasePoint::new(1.0, 0.0)).0 - 1.0 / 60.0).abs() < 1e-16);
        assert!((energy(&p(0.4), PhasePoint::new(0.0, 0.2)).0 - 0.02).abs() < 1e-16);
    }

    #[test]
    fn critical_level_values() {
        let c = critical_levels(&p(0.4));
        assert!((c.center.0 + 0.0085333333333333).abs() < 1e-12);
        assert_eq!(c.saddle0.0, 0.0);
        assert!((c.saddle1.0 - 1.0 / 60.0).abs() < 1e-16);
        let c = critical_levels(&p(0.5));
        assert!((c.center.0 + 1.0 / 64.0).abs() < 1e-16);
        assert_eq!(c.saddle1.0, 0.0);
        let c = critical_levels(&p(0.6));
        assert!((c.saddle1.0 + 1.0 / 60.0).abs() < 1e-16);
        // evaluated center level, not the (a-2)a²/12 expression
        for &a in &[0.2, 0.45, 0.7] {
            let c = critical_levels(&p(a));
            assert!((c.center.0 - a * a * a * (a - 2.0) / 12.0).abs() < 1e-16);
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_level(&p(0.5), EnergyLevel(0.0)).tag, LevelTag::HeteroclinicUnion);
        assert_eq!(classify_level(&p(0.4), EnergyLevel(0.0)).tag, LevelTag::HomoclinicUnion);
        assert_eq!(classify_level(&p(0.4), EnergyLevel(0.008)).tag, LevelTag::InnerArc);
        assert_eq!(classify_level(&p(0.4), EnergyLevel(-0.001)).tag, LevelTag::ClosedCycle);
        assert_eq!(classify_level(&p(0.4), EnergyLevel(-0.01)).tag, LevelTag::Empty);
        assert_eq!(classify_level(&p(0.4), EnergyLevel(saddle1_level(&p(0.4)))).tag, LevelTag::SaddleManifoldUnion);
        assert_eq!(classify_level(&p(0.4), EnergyLevel(0.02)).tag, LevelTag::TwoOuterCurves);
        let s = p(0.6);
        assert_eq!(classify_level(&s, EnergyLevel(saddle1_level(&s))).tag, LevelTag::HomoclinicUnion);
        assert_eq!(classify_level(&s, EnergyLevel(-0.01)).tag, LevelTag::InnerArc);
        assert_eq!(classify_level(&s, EnergyLevel(0.0)).tag, LevelTag::SaddleManifoldUnion);
        assert_eq!(classify_level(&s, EnergyLevel(0.0)).case, BalanceCase::AAboveHalf);
        let center = critical_levels(&s).center;
        assert_eq!(classify_level(&s, center).tag, LevelTag::CenterPoint);
    }

    fn apex_by_bisection(a: f64) -> f64 {
        let s = p(a);
        let (lo, hi) = if a < 0.5 { (a, 1.0) } else { (0.0, a) };
        let f = |x: f64| potential(&s, x) - potential(&s, if a < 0.5 { 0.0 } else { 1.0 });
        let (mut lo, mut hi) = (lo, hi);
        let flo = f(lo);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m).signum() == flo.signum() {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn apex_values() {
        assert!((homoclinic_apex(&p(0.4)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((homoclinic_apex(&p(0.6)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let z = homoclinic_apex(&p(0.3)).unwrap();
        assert!((z - 0.47793).abs() < 1e-5);
        assert!((z - apex_by_bisection(0.3)).abs() < 1e-12);
        assert_eq!(homoclinic_apex(&p(0.5)), Err(Error::NoHomoclinic));
    }

    #[test]
    fn linkage() {
        assert!(linked(&p(0.4), &p(0.6)).unwrap());
        assert!(!linked(&p(0.3), &p(0.7)).unwrap());
        assert!(linked(&p(0.499), &p(0.501)).unwrap());
        assert!(linked(&p(0.6), &p(0.4)).is_err());
    }

    #[test]
    fn orbit_graph_homoclinic_branch() {
        let s = p(0.4);
        let path = orbit_graph(&s, EnergyLevel(0.0), 0.0, 2.0 / 3.0, 1.0).unwrap();
        let first = path.points().first().unwrap().p;
        let last = path.points().last().unwrap().p;
        assert_eq!(first, PhasePoint::new(0.0, 0.0));
        assert!((last.x - 2.0 / 3.0).abs() < 1e-15 && last.y.abs() < 1e-7);
        for pp in path.points() {
            assert!(energy(&s, pp.p).0.abs() < 1e-12);
            assert!(pp.p.y >= 0.0);
        }
    }

    #[test]
    fn orbit_graph_degenerate_and_heteroclinic() {
        let s = p(0.4);
        let q = 0.3;
        let path = orbit_graph(&s, EnergyLevel(potential(&s, q)), q, q, -1.0).unwrap();
        assert_eq!(path.points().len(), 1);
        assert_eq!(path.points()[0].p, PhasePoint::new(q, 0.0));
        let h = p(0.5);
        let path = orbit_graph(&h, EnergyLevel(0.0), 0.0, 1.0, 1.0).unwrap();
        let mid = path.points()[256].p;
        assert!((mid.x - 0.5).abs() < 1e-15);
        assert!((mid.y - 1.0 / (4.0 * 2f64.sqrt())).abs() < 1e-14);
        assert!(orbit_graph(&s, EnergyLevel(-0.001), 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn flight_time_degenerate_and_small_orbit() {
        let s = p(0.5);
        assert_eq!(time_of_flight(&s, EnergyLevel(-0.01), 0.4, 0.4).unwrap(), 0.0);
        let q = 0.5 + 1e-3;
        let per = closed_orbit_period(&s, q).unwrap();
        assert!((per - 4.0 * std::f64::consts::PI).abs() / (4.0 * std::f64::consts::PI) < 1e-5);
    }

    #[test]
    fn flight_time_rejects_saddle_level() {
        let s = p(0.4);
        // homoclinic level: the origin is a double zero
        assert!(time_of_flight(&s, EnergyLevel(0.0), 0.0, 0.5).is_err());
        // level below the potential in the interior
        assert!(time_of_flight(&s, EnergyLevel(-0.001), 0.0, 0.9).is_err());
    }

    #[test]
    fn flight_time_is_additive() {
        let s = p(0.35);
        let c = EnergyLevel(potential(&s, 0.9));
        let whole = time_of_flight(&s, c, 0.0, 0.9).unwrap();
        let left = time_of_flight(&s, c, 0.0, 0.5).unwrap();
        let right = time_of_flight(&s, c, 0.5, 0.9).unwrap();
        assert!((whole - left - right).abs() < 1e-10 * whole);
    }

    #[test]
    fn turning_point_cases() {
        assert_eq!(turning_point(&p(0.4), 0.4).unwrap(), 0.4);
        let s = p(0.6);
        let eta = turning_point(&s, 0.9).unwrap();
        assert!(eta > homoclinic_apex(&s).unwrap() && eta < 0.6);
        assert!((potential(&s, eta) - potential(&s, 0.9)).abs() < 1e-14);
        // mirrored system gives the mirrored turning point
        let m = turning_point(&p(0.4), 0.1).unwrap();
        assert!((m - (1.0 - eta)).abs() < 1e-12);
        assert!(turning_point(&p(0.4), 0.9).is_err());
    }

    #[test]
    fn equilibria() {
        let e = equilibrium_data(&p(0.4));
        assert!((e.origin.eigenvalue - 0.632456).abs() < 1e-6);
        assert!((e.center.frequency - 0.489898).abs() < 1e-6);
        let e = equilibrium_data(&p(0.5));
        assert!((e.origin.eigenvalue - e.one.eigenvalue).abs() < 1e-16);
        assert!((e.origin.eigenvalue - 0.5f64.sqrt()).abs() < 1e-16);
    }
}
