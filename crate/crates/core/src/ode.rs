//! Dormand–Prince 5(4) with Hairer's continuous extension, specialised to
//! the frozen system and run in saddle-centred charts.
//!
//! A state is stored as `anchor + dx`: near the saddle the offset keeps its
//! own relative precision, which the plain abscissa would lose to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{cubic_chart, Anchor, ChartX, PhasePoint, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartState {
    pub anchor: Anchor,
    pub dx: f64,
    pub y: f64,
}

impl ChartState {
    pub fn from_point(p: PhasePoint) -> Self {
        let c = ChartX::from_x(p.x);
        Self { anchor: c.anchor, dx: c.off, y: p.y }
    }

    pub fn new(anchor: Anchor, dx: f64, y: f64) -> Self {
        Self { anchor, dx, y }
    }

    pub fn point(&self) -> PhasePoint {
        PhasePoint::new(self.anchor.value() + self.dx, self.y)
    }

    pub fn chart_x(&self) -> ChartX {
        ChartX::new(self.anchor, self.dx)
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.y.is_finite()
    }

    /// Move to the chart nearest the current abscissa.
    pub fn recentred(self) -> Self {
        let x = self.anchor.value() + self.dx;
        let want = Anchor::nearest(x);
        if want == self.anchor {
            self
        } else {
            Self { anchor: want, dx: x - want.value(), y: self.y }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; `f64::INFINITY` for none.
    pub h_max: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 2_000_000, h_max: f64::INFINITY }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    pub a: f64,
    pub anchor: Anchor,
    rc: [[f64; 2]; 5],
}

impl DenseStep {
    pub fn t_min(&self) -> f64 {
        self.t0.min(self.t0 + self.h)
    }

    pub fn t_max(&self) -> f64 {
        self.t0.max(self.t0 + self.h)
    }

    /// State at time `t` (clamped to the step).
    pub fn eval(&self, t: f64) -> ChartState {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let c = |i: usize| {
            let r = &self.rc;
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        };
        ChartState { anchor: self.anchor, dx: c(0), y: c(1) }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn rhs(params: &SystemParams, anchor: Anchor, z: [f64; 2]) -> [f64; 2] {
    [z[1], -cubic_chart(params, ChartX::new(anchor, z[0]))]
}

#[inline]
fn axpy(z: [f64; 2], terms: &[(f64, [f64; 2])], h: f64) -> [f64; 2] {
    let mut out = z;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrate the frozen system with weight `params.a` from `t0` to `t1`
/// (either direction). Accepted steps are appended to `steps` when given.
pub fn integrate_frozen(
    params: &SystemParams,
    start: ChartState,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
    mut steps: Option<&mut Vec<DenseStep>>,
) -> Result<ChartState> {
    if !start.is_finite() {
        return Err(Error::Integration { t: t0, reason: "non-finite initial state".into() });
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(start);
    }
    let dir = span.signum();
    let mut state = start.recentred();
    let mut t = t0;
    let mut z = [state.dx, state.y];
    let mut k1 = rhs(params, state.anchor, z);

    // initial step as in Hairer–Nørsett–Wanner
    let sc = |z: [f64; 2], i: usize| opts.atol + opts.rtol * z[i].abs();
    let d0 = ((z[0] / sc(z, 0)).powi(2) + (z[1] / sc(z, 1)).powi(2)).sqrt() / 2f64.sqrt();
    let d1 = ((k1[0] / sc(z, 0)).powi(2) + (k1[1] / sc(z, 1)).powi(2)).sqrt() / 2f64.sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span.abs()).min(opts.h_max);
    {
        let z1 = axpy(z, &[(1.0, k1)], dir * h);
        let k2 = rhs(params, state.anchor, z1);
        let d2 = (((k2[0] - k1[0]) / sc(z, 0)).powi(2) + ((k2[1] - k1[1]) / sc(z, 1)).powi(2)).sqrt()
            / 2f64.sqrt()
            / h;
        let h1 = if d1.max(d2) <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        h = (100.0 * h).min(h1).min(span.abs()).min(opts.h_max);
    }
    h *= dir;

    let mut n_steps = 0usize;
    let mut err_old = 1e-4f64;
    let mut rejected_last = false;
    loop {
        let remaining = t1 - t;
        if remaining * dir <= 0.0 {
            break;
        }
        // land exactly on t1, and avoid a sliver of a last step
        let mut last = false;
        if (t + 1.01 * h - t1) * dir >= 0.0 {
            h = remaining;
            last = true;
        }
        n_steps += 1;
        if n_steps > opts.max_steps {
            return Err(Error::Integration { t, reason: "step budget exhausted".into() });
        }
        let an = state.anchor;
        let k2 = rhs(params, an, axpy(z, &[(A21, k1)], h));
        let k3 = rhs(params, an, axpy(z, &[(A31, k1), (A32, k2)], h));
        let k4 = rhs(params, an, axpy(z, &[(A41, k1), (A42, k2), (A43, k3)], h));
        let k5 = rhs(params, an, axpy(z, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
        let k6 = rhs(params, an, axpy(z, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h));
        let z_new = axpy(z, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)], h);
        let k7 = rhs(params, an, z_new);
        let mut err = 0.0;
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let s = opts.atol + opts.rtol * z[i].abs().max(z_new[i].abs());
            err += (e / s).powi(2);
        }
        let err = (err / 2.0).sqrt();
        if !err.is_finite() || !z_new[0].is_finite() || !z_new[1].is_finite() {
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration { t, reason: "non-finite state".into() });
            }
            h *= 0.1;
            rejected_last = true;
            continue;
        }
        if err <= 1.0 {
            if let Some(out) = steps.as_deref_mut() {
                let mut rc = [[0.0; 2]; 5];
                for i in 0..2 {
                    rc[0][i] = z[i];
                    rc[1][i] = z_new[i] - z[i];
                    rc[2][i] = h * k1[i] - rc[1][i];
                    rc[3][i] = rc[1][i] - h * k7[i] - rc[2][i];
                    rc[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                out.push(DenseStep { t0: t, h, a: params.a(), anchor: an, rc });
            }
            t = if last { t1 } else { t + h };
            state = ChartState { anchor: an, dx: z_new[0], y: z_new[1] };
            let moved = state.recentred();
            if moved.anchor != state.anchor {
                state = moved;
                z = [state.dx, state.y];
                k1 = rhs(params, state.anchor, z);
            } else {
                z = z_new;
                k1 = k7;
            }
            // PI step-size control
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * err_old.powf(0.04)).clamp(0.2, 10.0);
            let fac = if rejected_last { fac.min(1.0) } else { fac };
            err_old = err.max(1e-4);
            rejected_last = false;
            h = (h * fac).abs().min(opts.h_max) * dir;
            if last {
                break;
            }
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            rejected_last = true;
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration { t, reason: "step size underflow".into() });
            }
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::energy;

    #[test]
    fn equilibrium_stays_put() {
        let s = SystemParams::new(0.4).unwrap();
        let out = integrate_frozen(&s, ChartState::from_point(PhasePoint::new(0.0, 0.0)), 0.0, 50.0, &IntegratorOptions::default(), None)
            .unwrap();
        assert_eq!(out.point(), PhasePoint::new(0.0, 0.0));
    }

    #[test]
    fn harmonic_limit_outside_range() {
        // outside [0,1] the field vanishes: uniform motion
        let s = SystemParams::new(0.4).unwrap();
        let out = integrate_frozen(&s, ChartState::from_point(PhasePoint::new(-1.0, -0.5)), 0.0, 4.0, &IntegratorOptions::default(), None)
            .unwrap();
        assert!((out.point().x + 3.0).abs() < 1e-12);
        assert_eq!(out.y, -0.5);
    }

    #[test]
    fn energy_conserved_and_reversible() {
        let s = SystemParams::new(0.4).unwrap();
        let p0 = PhasePoint::new(0.55, 0.05);
        let opts = IntegratorOptions::default();
        let out = integrate_frozen(&s, ChartState::from_point(p0), 0.0, 100.0, &opts, None).unwrap();
        assert!((energy(&s, out.point()).0 - energy(&s, p0).0).abs() < 1e-9);
        let back = integrate_frozen(&s, out, 100.0, 0.0, &opts, None).unwrap();
        assert!(back.point().dist(&p0) < 1e-8);
    }

    #[test]
    fn dense_output_matches_endpoints() {
        let s = SystemParams::new(0.3).unwrap();
        let mut steps = Vec::new();
        let p0 = PhasePoint::new(0.45, 0.0);
        let end = integrate_frozen(&s, ChartState::from_point(p0), 0.0, 10.0, &IntegratorOptions::default(), Some(&mut steps))
            .unwrap();
        let first = steps.first().unwrap().eval(0.0);
        assert!(first.point().dist(&p0) < 1e-15);
        let last = steps.last().unwrap();
        assert!(last.eval(last.t0 + last.h).point().dist(&end.point()) < 1e-14);
        // interior dense values stay on the energy level
        for st in &steps {
            let mid = st.eval(st.t0 + 0.5 * st.h);
            assert!((energy(&s, mid.point()).0 - energy(&s, p0).0).abs() < 1e-9);
        }
    }
}
