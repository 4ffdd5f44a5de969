//! Shared numerical routines: adaptive quadrature, bracketed root finding,
//! empirical quantiles and chi-square tail helpers.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        left + right + err / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Root of a strictly decreasing function `f` on `[lo, hi]` with
/// `f(lo) > 0 > f(hi)`, by bisection to relative tolerance `rel_tol`.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(Error::Numeric(format!(
            "bisection bracket [{lo}, {hi}] does not straddle the root"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel_tol * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Empirical quantile with type-7 (linear) interpolation on a sorted slice.
pub fn quantile_type7_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Data("quantile of empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("quantile level {q} outside [0, 1]")));
    }
    let n = sorted.len();
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Upper-tail probability P(X > x) for X ~ chi-square(df).
pub fn chi_square_survival(df: usize, x: f64) -> Result<f64> {
    let dist = chi2(df)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(dist.sf(x))
}

/// Upper-tail quantile: the x with P(X > x) = p_upper for X ~ chi-square(df).
///
/// Starts from the library inverse CDF and polishes with Newton steps on the
/// log survival function, which stays accurate deep in the tail.
pub fn chi_square_quantile_upper(df: usize, p_upper: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p_upper) || p_upper == 0.0 {
        return Err(Error::Config(format!(
            "upper-tail probability {p_upper} outside (0, 1)"
        )));
    }
    let dist = chi2(df)?;
    let mut x = dist.inverse_cdf(1.0 - p_upper).max(1e-300);
    for _ in 0..64 {
        let s = dist.sf(x);
        let d = dist.pdf(x);
        if !(s > 0.0) || !(d > 0.0) {
            break;
        }
        // d/dx ln sf(x) = -pdf/sf
        let step = (s / p_upper).ln() * s / d;
        let next = (x + step).max(0.25 * x);
        if (next - x).abs() <= 1e-14 * x.abs() {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

fn chi2(df: usize) -> Result<ChiSquared> {
    ChiSquared::new(df as f64).map_err(|e| Error::Config(format!("chi-square with df = {df}: {e}")))
}

/// Median of a slice (by value; not in place).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
