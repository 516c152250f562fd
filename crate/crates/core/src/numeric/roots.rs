//! Scalar root finding on monotone functions.

use crate::error::{Error, Result};

/// Safeguarded Newton iteration for an increasing function with `f(lo) <= 0 <= f(hi)`.
///
/// `fdf` returns the value and derivative. Steps that leave the current bracket
/// fall back to bisection.
pub fn newton_bisect<F>(mut fdf: F, mut lo: f64, mut hi: f64, rtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (flo, _) = fdf(lo);
    let (fhi, _) = fdf(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::numeric(
            "newton_bisect",
            format!("bracket [{lo}, {hi}] does not enclose a sign change ({flo:e}, {fhi:e})"),
        ));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = if dfx > 0.0 && dfx.is_finite() {
            x - fx / dfx
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= rtol * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= rtol * x.abs() {
            return Ok(x);
        }
    }
    Err(Error::numeric("newton_bisect", "iteration limit reached"))
}

/// Bisection for an increasing function `f` on `[lo, hi]` until `|f(x) - target| < ftol`
/// or the bracket width falls below `xtol`.
pub fn bisect_increasing<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    ftol: f64,
    xtol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let flo = f(lo)? - target;
    let fhi = f(hi)? - target;
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::numeric(
            "bisect_increasing",
            format!("target not bracketed: f(lo)-t = {flo:e}, f(hi)-t = {fhi:e}"),
        ));
    }
    let mut best = if flo.abs() < fhi.abs() {
        (lo, flo.abs())
    } else {
        (hi, fhi.abs())
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)? - target;
        if fm.abs() < best.1 {
            best = (mid, fm.abs());
        }
        if fm.abs() < ftol {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= xtol * mid.abs().max(1.0) {
            break;
        }
    }
    if best.1 < ftol {
        Ok(best.0)
    } else {
        Err(Error::numeric(
            "bisect_increasing",
            format!("stalled with |f - t| = {:e}", best.1),
        ))
    }
}
