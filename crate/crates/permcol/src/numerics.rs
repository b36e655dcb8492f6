use crate::error::{Error, Result};

/// Bisection root of f on [lo, hi], which must bracket a sign change.
/// Converges to an interval of width `xtol` and returns its midpoint.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    // partial_cmp also rejects NaN endpoints, which `lo >= hi` would let through.
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || !xtol.is_finite() || xtol <= 0.0 {
        return Err(Error::invalid(format!("bad bisection setup [{lo}, {hi}], xtol={xtol}")));
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval at floating resolution
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const INV_GOLDEN: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

/// Golden-section maximization of a unimodal f on [lo, hi] to x-resolution
/// `xatol`; returns (argmax, max). On non-unimodal input it still lands on
/// some local maximum inside the interval, which is how the scan uses it.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xatol: f64) -> (f64, f64) {
    debug_assert!(lo <= hi);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_GOLDEN * (b - a);
    let mut x2 = a + INV_GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > xatol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_GOLDEN * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_GOLDEN * (b - a);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// log(sum(exp(x_i))) without overflow; empty input gives -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        return hi;
    }
    let sum: f64 = xs.iter().map(|x| (x - hi).exp()).sum();
    hi + sum.ln()
}
