use crate::error::{Error, Result};

/// Finds a root of a function that changes sign on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol * max(1, |t|)` or the
/// bracket cannot be split further in floating point. The returned point is
/// whichever bracket end (or midpoint) has the smallest `|g|`.
pub fn bisect_root(mut g: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bisection needs lo < hi and tol > 0 (lo={lo}, hi={hi}, tol={tol})"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut ga, gb) = (g(a), g(b));
    if ga.is_nan() || gb.is_nan() {
        return Err(Error::NumericalDomain(
            "bisection endpoint evaluates to NaN".into(),
        ));
    }
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    let mut gb = gb;
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.is_nan() {
            return Err(Error::NumericalDomain(format!(
                "bisection hit NaN at {mid}"
            )));
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
            gb = gm;
        }
        if b - a <= tol * mid.abs().max(1.0) {
            break;
        }
    }
    Ok(if ga.abs() <= gb.abs() { a } else { b })
}
