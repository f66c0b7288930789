//! Bracketed scalar root-finding: bisection with a secant polish.

/// Locate a root of `f` in `[lo, hi]` given `f(lo)` and `f(hi)` of opposite
/// sign (or one of them zero). Stops once the bracket is narrower than `tol`
/// or a residual is exactly zero.
pub fn bisect_secant<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return None;
    }
    for iter in 0..400 {
        if (b - a).abs() <= tol {
            break;
        }
        // alternate secant and bisection steps; the secant candidate is only
        // used when it falls strictly inside the bracket
        let mid = 0.5 * (a + b);
        let mut x = mid;
        if iter % 2 == 1 {
            let s = b - fb * (b - a) / (fb - fa);
            if s.is_finite() && s > a.min(b) && s < a.max(b) {
                x = s;
            }
        }
        let fx = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    // secant polish on the final bracket
    let s = b - fb * (b - a) / (fb - fa);
    if s.is_finite() && s >= a.min(b) && s <= a.max(b) {
        Some(s)
    } else {
        Some(0.5 * (a + b))
    }
}

/// Scan `[lo, hi]` on a uniform grid of spacing at most `step` and return
/// every sub-interval on which `f` changes sign.
pub fn sign_change_brackets<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    step: f64,
) -> Vec<(f64, f64)> {
    let n = (((hi - lo) / step).ceil() as usize).max(1);
    let mut out = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 };
        let f1 = f(x1);
        if f1 == 0.0 || (f0 != 0.0 && f0.signum() != f1.signum()) {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}
