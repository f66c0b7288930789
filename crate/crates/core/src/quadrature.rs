//! Double-exponential (tanh-sinh) quadrature.
//!
//! The integrand receives the abscissa together with its exact distances to
//! both endpoints, so integrands with inverse-square-root endpoint
//! singularities can be evaluated without cancellation.

use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
}

const T_MAX: f64 = 6.5;
const MAX_LEVEL: usize = 12;

/// Integrate `g(x, dist_to_lo, dist_to_hi)` over `[lo, hi]` to relative
/// tolerance `rel_tol`.
pub fn tanh_sinh<G>(mut g: G, lo: f64, hi: f64, rel_tol: f64) -> QuadResult
where
    G: FnMut(f64, f64, f64) -> f64,
{
    let width = hi - lo;
    if width == 0.0 {
        return QuadResult { value: 0.0, error_estimate: 0.0, converged: true };
    }
    let half = 0.5 * width;
    let mut node = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let e2 = (2.0 * u).exp();
        let d_hi = width / (1.0 + e2);
        let d_lo = width / (1.0 + 1.0 / e2);
        if !(d_lo > 0.0 && d_hi > 0.0) {
            return 0.0;
        }
        let x = if d_lo < d_hi { lo + d_lo } else { hi - d_hi };
        let ch = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (ch * ch);
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let v = g(x, d_lo, d_hi);
        if v.is_finite() { w * v } else { 0.0 }
    };

    let mut h = 0.5;
    let mut sum = node(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > T_MAX {
            break;
        }
        sum += node(t) + node(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut err = f64::INFINITY;
    for _ in 1..MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > T_MAX {
                break;
            }
            sum += node(t) + node(-t);
            k += 2;
        }
        let next = sum * h;
        err = (next - estimate).abs();
        estimate = next;
        if err <= rel_tol * estimate.abs() {
            return QuadResult { value: estimate, error_estimate: err, converged: true };
        }
    }
    QuadResult { value: estimate, error_estimate: err, converged: false }
}
