//! Sample sizes when the response precision carries a gamma prior.
//!
//! With `v ~ Gamma(alpha0, beta0)` the posterior after `n` patients is
//! `Gamma(alpha1, beta1)` with `alpha1 = alpha0 + n/2`, and `beta0 / beta1`
//! is `1 - B` for `B ~ Beta(n/2, alpha0)`. Requiring the design inequality to
//! hold with probability `xi` over `B` gives the information target
//!
//! ```text
//! V_n = beta0 / (alpha1 (1 - Beta(n/2, alpha0, xi))) * ((t(2 alpha1, eta) + T) / delta*)^2
//! ```
//!
//! with `T = t_k(2 alpha1, rho, zeta)` (Criterion 1) or `t(2 alpha1, zeta)`
//! (Criterion 2). The total `n` then solves `n = c_r V_n - sum q0j`, where
//! `c_r = (r + k)(1 + r) / r` is `(1 + sqrt(k))^2` at the optimal ratio.

use serde::{Deserialize, Serialize};

use crate::design_known::{
    fractional_sizes, round_allocation, ArmPrior, Criterion, DesignBasis, DesignConfig, DesignResult,
};
use crate::distributions::{
    beta_quantile, equicorr_max_cdf, equicorr_max_quantile, gamma_cdf, t_cdf, t_quantile, EquicorrSpec,
};
use crate::error::{Error, Result};
use crate::posterior::{update, TrialData};
use crate::roots::brent;

/// Largest total sample size the solver will consider.
pub const DEFAULT_TOTAL_CAP: f64 = 1e6;

/// Gamma prior on the common precision plus the required assurance `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionPrior {
    pub alpha0: f64,
    /// Rate parameter; the prior mean of `v` is `alpha0 / beta0`.
    pub beta0: f64,
    pub xi: f64,
}

impl PrecisionPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite() && self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::config(format!(
                "gamma prior parameters must be positive, got ({}, {})",
                self.alpha0, self.beta0
            )));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::config(format!("xi must lie in (0, 1), got {}", self.xi)));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.alpha0 / self.beta0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaUpdate {
    pub alpha1: f64,
    pub beta1: f64,
    /// `H = sum h_j`.
    pub h_total: f64,
    /// Per-arm contributions `h_j = U_j + q0j mu0j^2 - q1j mu1j^2`.
    pub h: Vec<f64>,
}

impl GammaUpdate {
    pub fn stats(&self, c: f64) -> PrecisionStats {
        precision_stats(self.alpha1, self.beta1, c)
    }
}

/// Conjugate update of the gamma prior on `v`.
pub fn gamma_update(priors: &[ArmPrior], prior: &PrecisionPrior, data: &TrialData) -> Result<GammaUpdate> {
    prior.validate()?;
    let post = update(priors, data)?;
    let mut h = Vec::with_capacity(priors.len());
    for (j, ((p, a), (&mu1, &q1))) in priors
        .iter()
        .zip(&data.arms)
        .zip(post.mu1.iter().zip(&post.q1))
        .enumerate()
    {
        let hj = a.ss + p.q0 * p.mu0 * p.mu0 - q1 * mu1 * mu1;
        let scale = a.ss.abs() + p.q0 * p.mu0 * p.mu0 + q1 * mu1 * mu1;
        if hj < -1e-9 * scale.max(1.0) {
            return Err(Error::DataInconsistency(format!(
                "arm {j}: negative contribution h = {hj} to the precision update; check the sum of squares"
            )));
        }
        h.push(hj.max(0.0));
    }
    let h_total: f64 = h.iter().sum();
    Ok(GammaUpdate {
        alpha1: prior.alpha0 + 0.5 * data.total() as f64,
        beta1: prior.beta0 + 0.5 * h_total,
        h_total,
        h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionStats {
    /// `E[v] = alpha / beta`.
    pub mean: f64,
    /// `1 / sqrt(E[v])`, the response sd implied by the mean precision.
    pub sd_equivalent: f64,
    pub threshold: f64,
    /// `P(v <= threshold)`.
    pub prob_at_most: f64,
}

pub fn precision_stats(alpha: f64, beta: f64, threshold: f64) -> PrecisionStats {
    let mean = alpha / beta;
    PrecisionStats {
        mean,
        sd_equivalent: 1.0 / mean.sqrt(),
        threshold,
        prob_at_most: gamma_cdf(alpha, beta, threshold),
    }
}

fn check_inputs(config: &DesignConfig, prior: &PrecisionPrior) -> Result<()> {
    config.validate()?;
    prior.validate()
}

/// `1 - Beta(n/2, alpha0, xi)`, computed through the reflected quantile
/// `Beta(alpha0, n/2, 1 - xi)` so that small complements keep full
/// relative precision.
pub fn beta_complement(n: f64, alpha0: f64, xi: f64) -> Result<f64> {
    let c = beta_quantile(alpha0, 0.5 * n, 1.0 - xi)?;
    if !(c > 1e-280) {
        return Err(Error::Infeasible(format!(
            "assurance xi = {xi} cannot be met with n = {n}: the beta quantile is numerically 1"
        )));
    }
    Ok(c)
}

fn critical_value(config: &DesignConfig, criterion: Criterion, df: f64) -> Result<f64> {
    match criterion {
        Criterion::C1 => {
            let spec = EquicorrSpec::new(config.k, config.rho(), df)?;
            equicorr_max_quantile(&spec, config.zeta)
        }
        Criterion::C2 => t_quantile(df, config.zeta),
    }
}

/// `V_n`: the posterior information per treatment effect that meets the
/// criterion with probability at least `xi` after `n` patients in total.
pub fn required_information_unknown(
    n: f64,
    config: &DesignConfig,
    prior: &PrecisionPrior,
    criterion: Criterion,
) -> Result<f64> {
    check_inputs(config, prior)?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("total sample size must be positive, got {n}")));
    }
    let alpha1 = prior.alpha0 + 0.5 * n;
    let df = 2.0 * alpha1;
    let complement = beta_complement(n, prior.alpha0, prior.xi)?;
    let t_eta = t_quantile(df, config.eta)?;
    let crit = critical_value(config, criterion, df)?;
    Ok(prior.beta0 / (alpha1 * complement) * ((t_eta + crit) / config.delta_star).powi(2))
}

/// Multiplier turning the per-effect information into total posterior
/// information at allocation ratio `r`: `(r + k)(1 + r) / r`.
fn total_information_factor(config: &DesignConfig) -> f64 {
    let r = config.allocation_ratio();
    let k = config.k as f64;
    (r + k) * (1.0 + r) / r
}

/// `D1` reached when a total of `n` patients is allocated at ratio `r`.
pub fn allocated_d1(n: f64, config: &DesignConfig) -> f64 {
    (n + config.total_prior_information()) / total_information_factor(config)
}

/// Direct check of the assurance requirement for a total `n` allocated at
/// ratio `r`: evaluates the largest admissible critical value
/// `delta* sqrt(D1 alpha1 (1 - B) / beta0) - t(2 alpha1, eta)` and returns the
/// probability that the max-statistic (Criterion 1) or a single t statistic
/// (Criterion 2) stays below it. The requirement holds iff the result is
/// at least `zeta`.
pub fn assurance_probability(n: f64, d1: f64, config: &DesignConfig, prior: &PrecisionPrior, criterion: Criterion) -> Result<f64> {
    check_inputs(config, prior)?;
    if !(n > 0.0) {
        return Err(Error::domain(format!("total sample size must be positive, got {n}")));
    }
    let alpha1 = prior.alpha0 + 0.5 * n;
    let df = 2.0 * alpha1;
    let complement = beta_complement(n, prior.alpha0, prior.xi)?;
    let bound = config.delta_star * (d1 * alpha1 * complement / prior.beta0).sqrt() - t_quantile(df, config.eta)?;
    match criterion {
        Criterion::C1 => equicorr_max_cdf(&EquicorrSpec::new(config.k, config.rho(), df)?, bound),
        Criterion::C2 => Ok(t_cdf(df, bound)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    FixedPoint,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalSolution {
    /// Non-integer total solving the fixed-point equation.
    pub n: f64,
    /// `V_n` at that total.
    pub info: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

/// Solves `n = c_r V_n(n) - sum q0j` for the non-integer total `n`.
pub fn solve_total_unknown(
    config: &DesignConfig,
    prior: &PrecisionPrior,
    criterion: Criterion,
    cap: f64,
) -> Result<TotalSolution> {
    check_inputs(config, prior)?;
    let factor = total_information_factor(config);
    let q_sum = config.total_prior_information();
    let map = |n: f64| -> Result<f64> {
        Ok(factor * required_information_unknown(n, config, prior, criterion)? - q_sum)
    };

    // Warm start: the known-precision total at the prior mean precision.
    let z_design = {
        let mut known = config.clone();
        known.precision = crate::design_known::PrecisionSpec::Known { v: prior.mean() };
        crate::design_known::information_target(&known, criterion)? / prior.mean()
    };
    let mut n = (factor * z_design - q_sum).max(1.0);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 100 {
        iterations += 1;
        let next = match map(n) {
            Ok(x) => x,
            Err(Error::Infeasible(_)) => break,
            Err(e) => return Err(e),
        };
        if !(next > 0.0) || next > cap {
            break;
        }
        if (next - n).abs() < 1e-9 * n.max(1.0) {
            n = next;
            converged = true;
            break;
        }
        n = next;
    }
    if converged {
        return Ok(TotalSolution {
            n,
            info: required_information_unknown(n, config, prior, criterion)?,
            method: SolveMethod::FixedPoint,
            iterations,
        });
    }

    // g(n) = map(n) - n is decreasing; bracket its root.
    let g = |n: f64| match map(n) {
        Ok(x) => x - n,
        Err(_) => f64::INFINITY,
    };
    let mut lo = 1e-6;
    if g(lo) <= 0.0 {
        return Ok(TotalSolution {
            n: lo,
            info: required_information_unknown(lo, config, prior, criterion)?,
            method: SolveMethod::Bisection,
            iterations,
        });
    }
    let mut hi = 2.0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            if g(cap) > 0.0 {
                return Err(Error::Infeasible(format!(
                    "no total sample size below {cap} meets the assurance requirement"
                )));
            }
            hi = cap;
            break;
        }
    }
    let n = brent(
        |x| {
            let v = g(x);
            if v.is_infinite() {
                1e300
            } else {
                v
            }
        },
        lo,
        hi,
        1e-9,
        0.0,
    )?;
    Ok(TotalSolution {
        n,
        info: required_information_unknown(n, config, prior, criterion)?,
        method: SolveMethod::Bisection,
        iterations,
    })
}

/// Independent route: smallest non-integer total for which
/// [`assurance_probability`] at the allocated `D1` reaches `zeta`.
pub fn solve_total_by_probability(
    config: &DesignConfig,
    prior: &PrecisionPrior,
    criterion: Criterion,
    cap: f64,
) -> Result<f64> {
    let f = |n: f64| match assurance_probability(n, allocated_d1(n, config), config, prior, criterion) {
        Ok(p) => p - config.zeta,
        Err(_) => -1.0,
    };
    let mut lo = 1.0;
    let mut hi = 2.0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            return Err(Error::Infeasible(format!(
                "no total sample size below {cap} meets the assurance requirement"
            )));
        }
    }
    brent(f, lo, hi, 1e-9, 0.0)
}

/// Assurance design: solves for the non-integer total, allocates it at the
/// configured ratio and rounds each arm up.
pub fn sample_size_unknown(config: &DesignConfig, prior: &PrecisionPrior, criterion: Criterion) -> Result<DesignResult> {
    sample_size_unknown_capped(config, prior, criterion, DEFAULT_TOTAL_CAP)
}

pub fn sample_size_unknown_capped(
    config: &DesignConfig,
    prior: &PrecisionPrior,
    criterion: Criterion,
    cap: f64,
) -> Result<DesignResult> {
    let sol = solve_total_unknown(config, prior, criterion, cap)?;
    let q0: Vec<f64> = config.priors.iter().map(|p| p.q0).collect();
    let fractional = fractional_sizes(sol.info, config.allocation_ratio(), &q0);
    let n = round_allocation(&fractional, &q0, sol.info)?;
    let design = DesignResult::from_sizes(
        DesignBasis::BayesianAssurance {
            criterion,
            xi: prior.xi,
        },
        n,
        fractional,
        &q0,
        sol.info,
        sol.info,
    );

    // Cross-check with the direct probability route at the solved total.
    if sol.n > 1.0 {
        let p = assurance_probability(sol.n, allocated_d1(sol.n, config), config, prior, criterion)?;
        if (p - config.zeta).abs() > 1e-6 {
            return Err(Error::numeric(format!(
                "fixed-point total {:.6} gives assurance probability {p:.9}, expected {}",
                sol.n, config.zeta
            )));
        }
    }
    // The rounded design has more patients and at least as much information.
    let total = design.total as f64;
    if total > 0.0 {
        let needed = required_information_unknown(total, config, prior, criterion)?;
        if design.d1_achieved < needed * (1.0 - 1e-9) {
            return Err(Error::numeric(format!(
                "rounded design D1 = {} is below V_n = {needed} at n = {total}",
                design.d1_achieved
            )));
        }
    }
    Ok(design)
}
