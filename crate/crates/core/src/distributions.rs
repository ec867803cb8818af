//! Univariate distribution functions and the distribution of the maximum of
//! exchangeable (equicorrelated) normal or Student-t coordinates.
//!
//! The k-dimensional probabilities are reduced to one-dimensional mixing
//! integrals over the common factor `U`: with `X_j = sqrt(rho) U + sqrt(1 - rho) Z_j`,
//!
//! ```text
//! P(max X_j <= x) = ∫ Φ((x - sqrt(rho) u) / sqrt(1 - rho))^k φ(u) du
//! ```
//!
//! and the Student-t case adds an outer integral over the chi-squared
//! mixing variable `W ~ χ²(df)`, evaluated on the `ln W` scale where its
//! density is smooth and log-concave for every `df > 0`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::roots::{brent, solve_increasing};

/// Truncation of the standard-normal mixing variable; `2 Φ(-8.5) < 2e-17`.
pub const NORMAL_TAIL: f64 = 8.5;

/// Degrees of freedom above which Student-t is replaced by the normal.
const T_NORMAL_LIMIT: f64 = 1e12;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_87;

fn check_prob(p: f64, what: &str) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must lie in (0, 1), got {p}")))
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile `z_p`, polished by Newton steps so that
/// `|Φ(z_p) - p| <= 1e-12`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_prob(p, "probability")?;
    if p == 0.5 {
        return Ok(0.0);
    }
    let mut z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let dens = normal_pdf(z);
        if dens <= 0.0 {
            break;
        }
        let step = (normal_cdf(z) - p) / dens;
        z -= step;
        if step.abs() < 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    Ok(z)
}

/// Student-t distribution function with `df` degrees of freedom
/// (`df = +inf` gives the normal).
pub fn t_cdf(df: f64, x: f64) -> f64 {
    if df.is_infinite() || df > T_NORMAL_LIMIT {
        return normal_cdf(x);
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x * x));
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Quantile of Student-t(df); the returned point satisfies
/// `|t_cdf(df, t) - p| <= 1e-10`.
pub fn t_quantile(df: f64, p: f64) -> Result<f64> {
    check_prob(p, "probability")?;
    if !(df > 0.0) {
        return Err(Error::domain(format!("degrees of freedom must be positive, got {df}")));
    }
    if df.is_infinite() || df > T_NORMAL_LIMIT {
        return normal_quantile(p);
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return t_quantile(df, 1.0 - p).map(|t| -t);
    }
    // Upper half: the t quantile dominates the normal one.
    let z = normal_quantile(p)?;
    solve_increasing(|t| t_cdf(df, t) - p, z, z + 1.0, 1e-14, 1e-13)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_cdf(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, x)
    }
}

/// `100p%` point of Beta(a, b).
///
/// When the upper tail matters (results close to 1) callers should use the
/// reflection `1 - Beta(a, b, p) = Beta(b, a, 1 - p)` to keep relative
/// precision in the complement.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> Result<f64> {
    check_prob(p, "probability")?;
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("beta parameters must be positive, got ({a}, {b})")));
    }
    if a == 1.0 && b == 1.0 {
        return Ok(p);
    }
    // Bisect on a geometric scale first so that very small quantiles are
    // located to full relative precision, then refine with Brent.
    let f = |x: f64| beta_cdf(a, b, x) - p;
    let mut hi = 1.0;
    let mut lo = 0.5;
    while f(lo) > 0.0 {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    let tol = 1e-15 * lo.max(1e-300);
    brent(f, lo, hi, tol, 1e-14)
}

/// Gamma(shape, rate) distribution function.
pub fn gamma_cdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(shape, rate * x)
    }
}

pub fn gamma_quantile(shape: f64, rate: f64, p: f64) -> Result<f64> {
    check_prob(p, "probability")?;
    if !(shape > 0.0 && rate > 0.0) {
        return Err(Error::domain(format!("gamma parameters must be positive, got ({shape}, {rate})")));
    }
    let f = |x: f64| gamma_cdf(shape, 1.0, x) - p;
    let mut lo = shape;
    let mut hi = shape;
    while f(lo) > 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    while f(hi) < 0.0 {
        hi = hi * 2.0 + 1.0;
    }
    let x = brent(f, lo, hi, 1e-15 * lo.max(1e-300), 1e-15)?;
    Ok(x / rate)
}

/// Log-scale integration window for `W ~ Gamma(shape, rate)`: returns
/// `(ln w_lo, ln w_hi)` beyond which the density of `ln W` has dropped by
/// `e^-45` relative to its mode.
pub(crate) fn log_gamma_window(shape: f64, rate: f64) -> (f64, f64) {
    let mode = (shape / rate).ln();
    let drop = |d: f64| -shape * (d - d.exp_m1());
    let step = 1.0 / shape.sqrt().max(0.05);
    let mut lo = -step;
    while drop(lo) < 45.0 {
        lo -= step;
    }
    let mut hi = step;
    while drop(hi) < 45.0 {
        hi += step.min(1.0);
    }
    (mode + lo, mode + hi)
}

/// `a ln a - a - ln Γ(a)`, using the Stirling series for large `a` where the
/// direct difference cancels catastrophically.
fn gamma_mode_log_norm(a: f64) -> f64 {
    if a < 10.0 {
        a * a.ln() - a - ln_gamma(a)
    } else {
        let inv = 1.0 / a;
        let inv2 = inv * inv;
        0.5 * (a / (2.0 * std::f64::consts::PI)).ln()
            - inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
    }
}

/// Density of `L = ln W` for `W ~ Gamma(shape, rate)`.
pub(crate) fn log_gamma_density(shape: f64, rate: f64) -> impl Fn(f64) -> f64 {
    let mode = (shape / rate).ln();
    let norm = gamma_mode_log_norm(shape);
    move |l: f64| {
        let d = l - mode;
        (shape * (d - d.exp_m1()) + norm).exp()
    }
}

/// Exchangeable coordinates: `k` variables, common correlation `rho`,
/// Student-t with `df` degrees of freedom (`df = +inf` for the Gaussian case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquicorrSpec {
    pub k: usize,
    pub rho: f64,
    pub df: f64,
}

impl EquicorrSpec {
    pub fn new(k: usize, rho: f64, df: f64) -> Result<Self> {
        let spec = EquicorrSpec { k, rho, df };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(k: usize, rho: f64) -> Result<Self> {
        Self::new(k, rho, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::domain(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.df > 0.0) {
            return Err(Error::domain(format!("df must be positive, got {}", self.df)));
        }
        Ok(())
    }

    pub fn is_gaussian(&self) -> bool {
        self.df.is_infinite() || self.df > T_NORMAL_LIMIT
    }
}

fn gaussian_max_cdf(k: usize, rho: f64, x: f64, tol: Tolerance) -> Result<f64> {
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if k == 1 {
        return Ok(normal_cdf(x));
    }
    if rho == 0.0 {
        return Ok(normal_cdf(x).powi(k as i32));
    }
    let a = rho.sqrt();
    let s = (1.0 - rho).sqrt();
    let kk = k as i32;
    let est = integrate(
        |u| normal_cdf((x - a * u) / s).powi(kk) * normal_pdf(u),
        -NORMAL_TAIL,
        NORMAL_TAIL,
        tol,
    )?;
    Ok(est.value.clamp(0.0, 1.0))
}

/// `P(max(X_1, …, X_k) <= x)` for the exchangeable family described by `spec`.
pub fn equicorr_max_cdf(spec: &EquicorrSpec, x: f64) -> Result<f64> {
    spec.validate()?;
    if x.is_nan() {
        return Err(Error::domain("x is NaN"));
    }
    if spec.is_gaussian() {
        return gaussian_max_cdf(spec.k, spec.rho, x, Tolerance::new(1e-13, 1e-12));
    }
    if spec.k == 1 {
        return Ok(t_cdf(spec.df, x));
    }
    // T_j = X_j / sqrt(W / df) with W ~ χ²(df) = Gamma(df / 2, rate 1/2).
    let shape = 0.5 * spec.df;
    let (lo, hi) = log_gamma_window(shape, 0.5);
    let dens = log_gamma_density(shape, 0.5);
    let df = spec.df;
    let inner_tol = Tolerance::new(1e-13, 1e-12);
    let failure = std::cell::Cell::new(None);
    let est = integrate(
        |l| {
            let scale = (l.exp() / df).sqrt();
            match gaussian_max_cdf(spec.k, spec.rho, x * scale, inner_tol) {
                Ok(p) => p * dens(l),
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        },
        lo,
        hi,
        Tolerance::new(1e-11, 1e-11),
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(est?.value.clamp(0.0, 1.0))
}

/// The `zeta` quantile of `max(X_1, …, X_k)`: `x_{rho,zeta,k}` in the Gaussian
/// case and `t_k(df, rho, zeta)` otherwise.
pub fn equicorr_max_quantile(spec: &EquicorrSpec, zeta: f64) -> Result<f64> {
    spec.validate()?;
    check_prob(zeta, "zeta")?;
    if spec.k == 1 {
        return t_quantile(spec.df, zeta);
    }
    if spec.is_gaussian() && spec.rho == 0.0 {
        return normal_quantile(zeta.powf(1.0 / spec.k as f64));
    }
    // max_j X_j >= X_1, so the marginal quantile is a lower bracket.
    let lower = t_quantile(spec.df, zeta)?;
    let upper = lower + 6.0;
    let f = |x: f64| match equicorr_max_cdf(spec, x) {
        Ok(p) => p - zeta,
        Err(_) => f64::NAN,
    };
    let x = solve_increasing(f, lower, upper, 1e-11, 1e-12)?;
    Ok(x)
}

/// One-factor orthant probability `P(X_j <= upper_j for all j)` where
/// `X_j = sqrt(l_j) U + sqrt(1 - l_j) Z_j`, i.e. `corr(X_i, X_j) = sqrt(l_i l_j)`.
///
/// This is the structure of many-to-one contrasts with unequal arm sizes.
pub fn factor_orthant_cdf(loadings: &[f64], upper: &[f64]) -> Result<f64> {
    if loadings.len() != upper.len() || loadings.is_empty() {
        return Err(Error::domain("loadings and bounds must be non-empty and of equal length"));
    }
    if let Some(l) = loadings.iter().find(|l| !(**l >= 0.0 && **l < 1.0)) {
        return Err(Error::domain(format!("loading must lie in [0, 1), got {l}")));
    }
    let est = integrate(
        |u| {
            let prod: f64 = loadings
                .iter()
                .zip(upper)
                .map(|(&l, &x)| normal_cdf((x - l.sqrt() * u) / (1.0 - l).sqrt()))
                .product();
            prod * normal_pdf(u)
        },
        -NORMAL_TAIL,
        NORMAL_TAIL,
        Tolerance::new(1e-13, 1e-12),
    )?;
    Ok(est.value.clamp(0.0, 1.0))
}
