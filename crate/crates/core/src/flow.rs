//! Integration of the piecewise-autonomous rescaled system, Poincaré maps,
//! block maps, angle lifts and turn counting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ode::{integrate_frozen, ChartState, DenseStep, IntegratorOptions};
use crate::phase::{cubic, PhasePoint, SystemParams};
use crate::roots::bisect_secant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

/// The two values of the stepwise weight, `a₋ < 1/2 < a₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPair {
    pub minus: SystemParams,
    pub plus: SystemParams,
}

impl WeightPair {
    pub fn new(a_minus: f64, a_plus: f64) -> Result<Self> {
        let minus = SystemParams::new(a_minus)?;
        let plus = SystemParams::new(a_plus)?;
        if !(a_minus < 0.5 && a_plus > 0.5) {
            return Err(domain(format!("need a- < 1/2 < a+, got {a_minus}, {a_plus}")));
        }
        Ok(Self { minus, plus })
    }

    pub fn get(&self, sign: Sign) -> &SystemParams {
        match sign {
            Sign::Minus => &self.minus,
            Sign::Plus => &self.plus,
        }
    }
}

/// Stepwise weight `a(s)` with switching times `s_k` for
/// `k = first_index, …, first_index + len - 1`; `a = a₋` on `[s_{2k}, s_{2k+1})`.
/// Outside the window the weight keeps the value of the adjacent interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    pub weights: WeightPair,
    switch_times: Vec<f64>,
    first_index: i64,
    delta: f64,
    epsilon: f64,
}

impl StepProfile {
    pub fn new(
        a_minus: f64,
        a_plus: f64,
        switch_times: Vec<f64>,
        first_index: i64,
        delta: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let weights = WeightPair::new(a_minus, a_plus)?;
        if switch_times.is_empty() {
            return Err(domain("empty switching sequence"));
        }
        if switch_times.iter().any(|s| !s.is_finite()) {
            return Err(domain("non-finite switching time"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(domain(format!("epsilon = {epsilon} must be positive")));
        }
        if !(delta > 0.0) {
            return Err(domain(format!("delta = {delta} must be positive")));
        }
        let min_gap = switch_times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if switch_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("switching times must be strictly increasing"));
        }
        if delta > min_gap * (1.0 + 1e-12) {
            return Err(domain(format!("delta = {delta} exceeds the smallest gap {min_gap}")));
        }
        Ok(Self { weights, switch_times, first_index, delta, epsilon })
    }

    /// Profile with `s_{first+i+1} - s_{first+i} = gaps[i]`, starting at `s0`,
    /// and `delta` set to the smallest gap.
    pub fn from_gaps(a_minus: f64, a_plus: f64, s0: f64, gaps: &[f64], first_index: i64, epsilon: f64) -> Result<Self> {
        let mut s = vec![s0];
        for g in gaps {
            let last = *s.last().unwrap();
            s.push(last + g);
        }
        let delta = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let delta = if delta.is_finite() { delta } else { 1.0 };
        Self::new(a_minus, a_plus, s, first_index, delta, epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.weights.minus.a(), self.weights.plus.a(), self.switch_times.clone(), self.first_index, self.delta, epsilon)
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn last_index(&self) -> i64 {
        self.first_index + self.switch_times.len() as i64 - 1
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Original switching time `s_k`.
    pub fn s(&self, k: i64) -> Result<f64> {
        let i = k - self.first_index;
        if i < 0 || i >= self.switch_times.len() as i64 {
            return Err(Error::IndexOutOfWindow { index: k });
        }
        Ok(self.switch_times[i as usize])
    }

    /// Rescaled switching time `t_k = s_k / ε`.
    pub fn t(&self, k: i64) -> Result<f64> {
        Ok(self.s(k)? / self.epsilon)
    }

    /// Sign of the weight on `[t_k, t_{k+1})`.
    pub fn sign_of_interval(k: i64) -> Sign {
        if k.rem_euclid(2) == 0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    /// Index `k` of the interval `[t_k, t_{k+1})` containing `t`, possibly
    /// outside the stored window.
    fn interval_index(&self, t: f64) -> i64 {
        let n = self.switch_times.partition_point(|&s| s / self.epsilon <= t) as i64;
        self.first_index + n - 1
    }

    /// Weight in force at rescaled time `t`.
    pub fn params_at(&self, t: f64) -> &SystemParams {
        self.weights.get(Self::sign_of_interval(self.interval_index(t)))
    }

    /// Rescaled switching times strictly inside `(min(t0,t1), max(t0,t1))`.
    fn switches_between(&self, t0: f64, t1: f64) -> Vec<f64> {
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let mut v: Vec<f64> =
            self.switch_times.iter().map(|s| s / self.epsilon).filter(|&t| t > lo && t < hi).collect();
        if t1 < t0 {
            v.reverse();
        }
        v
    }
}

/// Rescaled switching times `t_k = s_k / ε` over the stored window.
pub fn rescale(profile: &StepProfile) -> Vec<f64> {
    profile.switch_times.iter().map(|s| s / profile.epsilon).collect()
}

/// The vector field: a frozen weight or a stepwise profile.
#[derive(Debug, Clone, Copy)]
pub enum Field<'a> {
    Frozen(SystemParams),
    Stepwise(&'a StepProfile),
}

impl Field<'_> {
    /// Weight in force at rescaled time `t`.
    pub fn params_at(&self, t: f64) -> SystemParams {
        match self {
            Field::Frozen(p) => *p,
            Field::Stepwise(profile) => *profile.params_at(t),
        }
    }

    /// Smallest and largest weight the field can take.
    pub fn weight_range(&self) -> (SystemParams, SystemParams) {
        match self {
            Field::Frozen(p) => (*p, *p),
            Field::Stepwise(profile) => (profile.weights.minus, profile.weights.plus),
        }
    }

    /// Split `[t0, t1]` at switching times; each piece carries its weight.
    fn pieces(&self, t0: f64, t1: f64) -> Vec<(f64, f64, SystemParams)> {
        match self {
            Field::Frozen(p) => vec![(t0, t1, *p)],
            Field::Stepwise(profile) => {
                let mut cuts = vec![t0];
                cuts.extend(profile.switches_between(t0, t1));
                cuts.push(t1);
                cuts.windows(2)
                    .map(|w| (w[0], w[1], *profile.params_at(0.5 * (w[0] + w[1]))))
                    .collect()
            }
        }
    }
}

/// Flow a chart state from `t0` to `t1` without storing the path.
pub fn flow_chart(field: Field<'_>, start: ChartState, t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<ChartState> {
    let mut z = start;
    for (a, b, p) in field.pieces(t0, t1) {
        z = integrate_frozen(&p, z, a, b, opts, None)?;
    }
    Ok(z)
}

pub fn flow_point(field: Field<'_>, p: PhasePoint, t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<PhasePoint> {
    Ok(flow_chart(field, ChartState::from_point(p), t0, t1, opts)?.point())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Accepted steps ordered by increasing time.
    steps: Vec<DenseStep>,
    /// `(t, p)` at every step boundary, increasing in `t`.
    samples: Vec<(f64, PhasePoint)>,
    t_begin: f64,
    t_final: f64,
}

impl Trajectory {
    pub fn samples(&self) -> &[(f64, PhasePoint)] {
        &self.samples
    }

    pub fn steps(&self) -> &[DenseStep] {
        &self.steps
    }

    /// Time at which the integration started.
    pub fn t_begin(&self) -> f64 {
        self.t_begin
    }

    /// Time at which the integration ended.
    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn t_min(&self) -> f64 {
        self.t_begin.min(self.t_final)
    }

    pub fn t_max(&self) -> f64 {
        self.t_begin.max(self.t_final)
    }

    fn step_index(&self, t: f64) -> Option<usize> {
        if self.steps.is_empty() {
            return None;
        }
        let i = self.steps.partition_point(|s| s.t_max() < t);
        Some(i.min(self.steps.len() - 1))
    }

    /// State at time `t` in the chart of the step containing it.
    pub fn chart_at(&self, t: f64) -> ChartState {
        match self.step_index(t) {
            Some(i) => self.steps[i].eval(t),
            None => ChartState::from_point(self.samples[0].1),
        }
    }

    pub fn point_at(&self, t: f64) -> PhasePoint {
        self.chart_at(t).point()
    }

    pub fn end_point(&self) -> PhasePoint {
        self.point_at(self.t_final)
    }

    pub fn end_chart(&self) -> ChartState {
        self.chart_at(self.t_final)
    }

    /// Times in `[ta, tb]` where the trajectory meets the vertical line
    /// `x = x0`, located by bisection on the dense output.
    pub fn vertical_crossings(&self, x0: f64, ta: f64, tb: f64) -> Vec<f64> {
        self.scalar_zeros(|z| z.point().x - x0, ta, tb, 1e-10)
    }

    /// Zeros of `x' = y` in `[ta, tb]`.
    pub fn velocity_zeros(&self, ta: f64, tb: f64) -> Vec<f64> {
        self.scalar_zeros(|z| z.y, ta, tb, 1e-10)
    }

    fn scalar_zeros<G: Fn(&ChartState) -> f64>(&self, g: G, ta: f64, tb: f64, tol: f64) -> Vec<f64> {
        const SUB: usize = 8;
        let mut out: Vec<f64> = Vec::new();
        for st in &self.steps {
            let (lo, hi) = (st.t_min().max(ta), st.t_max().min(tb));
            if !(lo < hi) {
                continue;
            }
            let mut t_prev = lo;
            let mut g_prev = g(&st.eval(lo));
            for j in 1..=SUB {
                let t = if j == SUB { hi } else { lo + (hi - lo) * j as f64 / SUB as f64 };
                let gt = g(&st.eval(t));
                if gt == 0.0 && j < SUB {
                    if out.last().map_or(true, |&l| (t - l).abs() > 0.0) {
                        out.push(t);
                    }
                } else if g_prev != 0.0 && gt != 0.0 && g_prev.signum() != gt.signum() {
                    if let Some(r) = bisect_secant(|s| g(&st.eval(s)), t_prev, t, tol) {
                        out.push(r);
                    }
                } else if gt == 0.0 && j == SUB && hi < tb && g_prev != 0.0 {
                    out.push(t);
                }
                t_prev = t;
                g_prev = gt;
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|b, a| (*b - *a).abs() == 0.0);
        out
    }

    /// CSV with header `t,x,y`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y")?;
        for (t, p) in &self.samples {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", t, p.x, p.y)?;
        }
        Ok(())
    }
}

/// Integrate from `(t0, p0)` to `t1`, storing dense output.
pub fn integrate(field: Field<'_>, p0: PhasePoint, t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<Trajectory> {
    integrate_chart(field, ChartState::from_point(p0), t0, t1, opts)
}

pub fn integrate_chart(field: Field<'_>, start: ChartState, t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<Trajectory> {
    if !start.is_finite() {
        return Err(Error::Integration { t: t0, reason: "non-finite initial state".into() });
    }
    let mut steps = Vec::new();
    let mut z = start;
    for (a, b, p) in field.pieces(t0, t1) {
        z = integrate_frozen(&p, z, a, b, opts, Some(&mut steps))?;
    }
    if t1 < t0 {
        steps.reverse();
    }
    let mut samples = Vec::with_capacity(steps.len() + 1);
    if steps.is_empty() {
        samples.push((t0, start.point()));
    } else {
        let first = &steps[0];
        samples.push((first.t_min(), first.eval(first.t_min()).point()));
        for st in &steps {
            samples.push((st.t_max(), st.eval(st.t_max()).point()));
        }
        // the recorded end is exact, not the dense evaluation
        if t1 >= t0 {
            samples.last_mut().unwrap().1 = z.point();
        } else {
            samples[0].1 = z.point();
        }
        samples.dedup_by(|b, a| b.0 <= a.0);
    }
    Ok(Trajectory { steps, samples, t_begin: t0, t_final: t1 })
}

/// `Ψ±ᵀ`: time-`T` map of the frozen system with weight `a±`.
pub fn poincare(weights: &WeightPair, sign: Sign, t: f64, p: PhasePoint, opts: &IntegratorOptions) -> Result<PhasePoint> {
    if !(t >= 0.0) {
        return Err(domain(format!("Poincaré time T = {t} must be non-negative")));
    }
    flow_point(Field::Frozen(*weights.get(sign)), p, 0.0, t, opts)
}

/// Chart-precision variant of [`poincare`], allowing negative `T` for the
/// inverse map.
pub fn poincare_chart(weights: &WeightPair, sign: Sign, t: f64, z: ChartState, opts: &IntegratorOptions) -> Result<ChartState> {
    flow_chart(Field::Frozen(*weights.get(sign)), z, 0.0, t, opts)
}

/// The block map `φ_k` over `[t_{6k}, t_{6k+6}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMap {
    weights: WeightPair,
    /// The seven switching times `t_{6k}, …, t_{6k+6}`.
    times: [f64; 7],
}

pub fn block_map(profile: &StepProfile, k: i64) -> Result<BlockMap> {
    let mut times = [0.0; 7];
    for (j, t) in times.iter_mut().enumerate() {
        *t = profile.t(6 * k + j as i64)?;
    }
    Ok(BlockMap { weights: profile.weights, times })
}

impl BlockMap {
    /// Block map with explicit (possibly zero) gap durations starting at `t0`.
    pub fn from_gaps(weights: WeightPair, t0: f64, gaps: [f64; 6]) -> Result<Self> {
        if gaps.iter().any(|g| !(*g >= 0.0)) {
            return Err(domain("block gaps must be non-negative"));
        }
        let mut times = [t0; 7];
        for j in 0..6 {
            times[j + 1] = times[j] + gaps[j];
        }
        Ok(Self { weights, times })
    }

    pub fn times(&self) -> &[f64; 7] {
        &self.times
    }

    /// Gap durations `t_{6k+j+1} - t_{6k+j}`, `j = 0..6`.
    pub fn gaps(&self) -> [f64; 6] {
        let mut g = [0.0; 6];
        for j in 0..6 {
            g[j] = self.times[j + 1] - self.times[j];
        }
        g
    }

    /// Composition `Ψ₊∘Ψ₋∘Ψ₊∘Ψ₋∘Ψ₊∘Ψ₋` with the exact gaps.
    pub fn apply_chart(&self, z: ChartState, opts: &IntegratorOptions) -> Result<ChartState> {
        let mut z = z;
        for (j, g) in self.gaps().iter().enumerate() {
            let sign = if j % 2 == 0 { Sign::Minus } else { Sign::Plus };
            z = poincare_chart(&self.weights, sign, *g, z, opts)?;
        }
        Ok(z)
    }

    pub fn apply(&self, p: PhasePoint, opts: &IntegratorOptions) -> Result<PhasePoint> {
        Ok(self.apply_chart(ChartState::from_point(p), opts)?.point())
    }
}

/// Continuous clockwise angle around `(center_x, 0)` along a trajectory,
/// `x = c + r cos θ`, `y = -r sin θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleLift {
    pub center_x: f64,
    times: Vec<f64>,
    theta: Vec<f64>,
}

impl AngleLift {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn initial(&self) -> f64 {
        self.theta[0]
    }

    pub fn last(&self) -> f64 {
        *self.theta.last().unwrap()
    }

    /// θ at time `t`, by linear interpolation of the sampled lift.
    pub fn at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.theta[0];
        }
        if i >= self.times.len() {
            return self.last();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.theta[i - 1] + w * (self.theta[i] - self.theta[i - 1])
    }

    /// Winding number `(θ(t) - θ(t_begin)) / 2π`.
    pub fn winding(&self) -> f64 {
        (self.last() - self.initial()) / (2.0 * std::f64::consts::PI)
    }
}

fn raw_angle(center_x: f64, p: PhasePoint) -> f64 {
    (-p.y).atan2(p.x - center_x)
}

/// Angle lift of `traj` around `(center_x, 0)`, starting at the trajectory's
/// initial time. The initial angle is taken in `[-π, π)`, so a start in the
/// closed upper half-plane gives `θ ∈ [-π, 0]`.
pub fn angle_lift(center_x: f64, traj: &Trajectory) -> Result<AngleLift> {
    use std::f64::consts::PI;
    let forward = traj.t_final >= traj.t_begin;
    let mut ts: Vec<f64> = Vec::new();
    for st in traj.steps.iter() {
        // eight samples per step keep each increment well below π
        for j in 0..8 {
            ts.push(st.t_min() + (st.t_max() - st.t_min()) * j as f64 / 8.0);
        }
    }
    ts.push(traj.t_max());
    if !forward {
        ts.reverse();
    }
    if ts.len() == 1 {
        ts = vec![traj.t_begin];
    }
    let scale = 1e-300f64;
    let mut theta = Vec::with_capacity(ts.len());
    let mut prev = 0.0f64;
    for (i, &t) in ts.iter().enumerate() {
        let p = traj.point_at(t);
        let r = (p.x - center_x).hypot(p.y);
        if r <= scale {
            return Err(Error::AngleUndefined { t });
        }
        let raw = raw_angle(center_x, p);
        let th = if i == 0 {
            if raw >= PI { raw - 2.0 * PI } else { raw }
        } else {
            let d = (raw - prev + PI).rem_euclid(2.0 * PI) - PI;
            // consecutive samples are close; a jump near ±π means the step
            // passed too close to the center to be resolved
            if d.abs() > 0.75 * PI {
                return Err(Error::AngleUndefined { t });
            }
            prev + d
        };
        theta.push(th);
        prev = th;
    }
    if !forward {
        ts.reverse();
        theta.reverse();
    }
    Ok(AngleLift { center_x, times: ts, theta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnCount {
    pub turns: u32,
    pub zeros: Vec<f64>,
    /// Clockwise winding around the chosen center over the interval, if
    /// requested.
    pub winding: Option<f64>,
}

/// Number of turns in `[ta, tb]`, as half the number of zeros of `x'`.
pub fn count_turns(traj: &Trajectory, ta: f64, tb: f64) -> Result<TurnCount> {
    count_turns_impl(traj, ta, tb, None)
}

/// [`count_turns`] together with the winding around `(center_x, 0)`.
pub fn count_turns_with_winding(traj: &Trajectory, ta: f64, tb: f64, center_x: f64) -> Result<TurnCount> {
    count_turns_impl(traj, ta, tb, Some(center_x))
}

fn count_turns_impl(traj: &Trajectory, ta: f64, tb: f64, center_x: Option<f64>) -> Result<TurnCount> {
    let zeros = traj.velocity_zeros(ta, tb);
    for w in zeros.windows(2) {
        if w[1] - w[0] < 1e-8 {
            return Err(Error::AmbiguousTurnCount(format!("zeros of x' at {} and {} closer than 1e-8", w[0], w[1])));
        }
    }
    for &t in &zeros {
        let z = traj.chart_at(t);
        // a double zero of x' means y' = -f(x) vanishes too
        let a = traj.steps.iter().find(|s| s.t_min() <= t && t <= s.t_max()).map_or(0.5, |s| s.a);
        let slope = cubic(&SystemParams::new(a)?, z.point().x);
        if slope.abs() < 1e-12 {
            return Err(Error::AmbiguousTurnCount(format!("non-simple zero of x' at t = {t}")));
        }
    }
    if zeros.len() % 2 == 1 {
        return Err(Error::AmbiguousTurnCount(format!(
            "odd number ({}) of zeros of x' in [{ta}, {tb}]",
            zeros.len()
        )));
    }
    let winding = match center_x {
        None => None,
        Some(c) => {
            let lift = angle_lift(c, traj)?;
            Some((lift.at(tb) - lift.at(ta)) / (2.0 * std::f64::consts::PI))
        }
    };
    Ok(TurnCount { turns: (zeros.len() / 2) as u32, zeros, winding })
}
