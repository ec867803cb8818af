//! Bracketed root finding for monotone scalar equations.

use crate::error::{Error, Result};

/// Brent's method on `[a, b]`; `f(a)` and `f(b)` must have opposite signs
/// (or one of them be zero). Stops once the bracket is narrower than `x_tol`
/// or `|f| <= f_tol`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64, f_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::numeric(format!(
            "root not bracketed: f({a}) = {fa:.6e}, f({b}) = {fb:.6e}"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= f_tol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::numeric(format!("non-finite function value at {b}")));
        }
    }
    Err(Error::numeric("Brent iteration limit reached"))
}

/// Root of an increasing function: starts from `[lo, hi]` and widens the
/// upper (or lower) end geometrically until the sign changes.
pub fn solve_increasing<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    f_tol: f64,
) -> Result<f64> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let mut width = (hi - lo).max(1.0);
    for _ in 0..60 {
        if flo <= 0.0 && fhi >= 0.0 {
            return brent(f, lo, hi, x_tol, f_tol);
        }
        if flo > 0.0 {
            hi = lo;
            fhi = flo;
            lo -= width;
            flo = f(lo);
        } else {
            lo = hi;
            flo = fhi;
            hi += width;
            fhi = f(hi);
        }
        width *= 2.0;
    }
    Err(Error::numeric(format!(
        "could not bracket root of increasing function near [{lo}, {hi}]"
    )))
}
