//! Frequentist many-to-one comparator: Dunnett critical values, the
//! power-driven design and end-of-trial statistics.
//!
//! `Z_j = sqrt(n0 nj / (n0 + nj)) (ybar_j - ybar_0) / sigma`. Under the global
//! null the `Z_j` are jointly normal with `corr(Z_i, Z_j) = sqrt(l_i l_j)`,
//! `l_j = (s0^2/n0) / (sj^2/nj + s0^2/n0)`, which is the one-factor structure
//! handled by [`factor_orthant_cdf`].

use serde::{Deserialize, Serialize};

use crate::design_known::{DesignBasis, DesignResult};
use crate::distributions::{factor_orthant_cdf, normal_cdf, normal_pdf, normal_quantile, NORMAL_TAIL};
use crate::error::{Error, Result};
use crate::posterior::TrialData;
use crate::quadrature::{integrate_pieces, Tolerance};
use crate::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Allocation {
    Equal,
    /// `n0 = sqrt(k) nj`.
    SqrtK,
    /// `n0 = r nj`.
    Ratio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DunnettConfig {
    pub k: usize,
    /// Familywise one-sided type I error.
    pub alpha: f64,
    pub power: f64,
    pub delta_star: f64,
    /// Assumed common response sd.
    pub sigma: f64,
    pub allocation: Allocation,
}

impl DunnettConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5 && self.power > 0.5 && self.power < 1.0) {
            return Err(Error::config(format!(
                "need 0 < alpha < 0.5 < power < 1, got alpha = {}, power = {}",
                self.alpha, self.power
            )));
        }
        if !(self.delta_star > 0.0 && self.delta_star.is_finite()) {
            return Err(Error::config(format!("delta_star must be positive, got {}", self.delta_star)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Allocation::Ratio(r) = self.allocation {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config(format!("allocation ratio must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// `n0 / nj`.
    pub fn ratio(&self) -> f64 {
        match self.allocation {
            Allocation::Equal => 1.0,
            Allocation::SqrtK => (self.k as f64).sqrt(),
            Allocation::Ratio(r) => r,
        }
    }
}

fn loadings(sizes: &[f64], sigmas: &[f64]) -> Vec<f64> {
    let c0 = sigmas[0] * sigmas[0] / sizes[0];
    sizes[1..]
        .iter()
        .zip(&sigmas[1..])
        .map(|(&n, &s)| c0 / (s * s / n + c0))
        .collect()
}

fn check_sizes(sizes: &[f64], sigmas: Option<&[f64]>) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::domain("need a control and at least one experimental arm"));
    }
    if let Some(n) = sizes.iter().find(|n| !(**n > 0.0 && n.is_finite())) {
        return Err(Error::domain(format!("sample sizes must be positive, got {n}")));
    }
    if let Some(s) = sigmas {
        if s.len() != sizes.len() {
            return Err(Error::domain(format!("{} sds for {} arms", s.len(), sizes.len())));
        }
        if let Some(x) = s.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::domain(format!("sds must be positive, got {x}")));
        }
    }
    Ok(())
}

/// Critical value `c` with `P(max_j Z_j >= c) = alpha` under the global null.
/// `sizes` are `n0, n1, …, nk` (fractional sizes allowed).
pub fn dunnett_critical(alpha: f64, sizes: &[f64], sigmas: Option<&[f64]>) -> Result<f64> {
    check_sizes(sizes, sigmas)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let ones = vec![1.0; sizes.len()];
    let l = loadings(sizes, sigmas.unwrap_or(&ones));
    let k = l.len();
    let target = 1.0 - alpha;
    let lo = normal_quantile(target)?;
    // Bonferroni bound
    let hi = normal_quantile(1.0 - alpha / k as f64)? + 1e-6;
    if k == 1 {
        return Ok(lo);
    }
    let f = |c: f64| factor_orthant_cdf(&l, &vec![c; k]).map(|p| p - target).unwrap_or(f64::NAN);
    brent(f, lo, hi, 1e-12, 1e-14)
}

/// Power `P(Z_1 >= c)` when arm 1 has effect `delta*` and per-pair information
/// `n0 nj / (n0 + nj)`.
pub fn dunnett_power(config: &DunnettConfig, n0: f64, nj: f64, c: f64) -> f64 {
    let info = n0 * nj / (n0 + nj);
    normal_cdf(config.delta_star * info.sqrt() / config.sigma - c)
}

fn power_design(config: &DunnettConfig, c: f64, basis: DesignBasis) -> Result<DesignResult> {
    let z = normal_quantile(config.power)?;
    let info = ((c + z) * config.sigma / config.delta_star).powi(2);
    let r = config.ratio();
    let nj = info * (1.0 + r) / r;
    let n0 = r * nj;
    let mut fractional = vec![n0];
    fractional.extend(std::iter::repeat_n(nj, config.k));
    let n: Vec<u64> = fractional.iter().map(|&x| (x * (1.0 - 1e-12)).ceil() as u64).collect();
    let zeros = vec![0.0; n.len()];
    Ok(DesignResult::from_sizes(basis, n, fractional, &zeros, info, info))
}

/// Smallest sizes under the allocation rule with `P(Z_1 >= c) >= power`
/// when `delta_1 = delta*` and the other effects are zero. Each arm of the
/// continuous solution is rounded up.
pub fn dunnett_design(config: &DunnettConfig) -> Result<DesignResult> {
    config.validate()?;
    let r = config.ratio();
    let mut sizes = vec![r];
    sizes.extend(std::iter::repeat_n(1.0, config.k));
    let c = dunnett_critical(config.alpha, &sizes, None)?;
    power_design(config, c, DesignBasis::Dunnett)
}

/// Separate one-sided tests at level `alpha` for each pair, no adjustment.
pub fn pairwise_unadjusted_design(config: &DunnettConfig) -> Result<DesignResult> {
    config.validate()?;
    let c = normal_quantile(1.0 - config.alpha)?;
    power_design(config, c, DesignBasis::PairwiseUnadjusted)
}

/// How `sigma` and the sizes in `Z_j` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ZMode {
    /// Fixed sigma and the planned sizes.
    Planned { sigma: f64, n0: f64, nj: f64 },
    /// Fixed sigma with the realised sizes.
    FixedSigma { sigma: f64 },
    /// Realised sizes and the pooled sd of arm `j` with the control.
    PooledPerPair,
}

/// Pooled sd of experimental arm `j` (1-based) with the control.
pub fn pooled_sd(data: &TrialData, j: usize) -> Result<f64> {
    let (a0, aj) = (&data.arms[0], &data.arms[j]);
    if a0.n + aj.n < 3 {
        return Err(Error::domain("pooled sd needs at least three observations"));
    }
    let s = (a0.centred_ss().max(0.0) + aj.centred_ss().max(0.0)) / (a0.n + aj.n - 2) as f64;
    Ok(s.sqrt())
}

pub fn z_statistics(data: &TrialData, mode: ZMode) -> Result<Vec<f64>> {
    data.validate()?;
    let a0 = data.arms[0];
    (1..data.arms.len())
        .map(|j| {
            let aj = data.arms[j];
            let (n0, nj, sigma) = match mode {
                ZMode::Planned { sigma, n0, nj } => (n0, nj, sigma),
                ZMode::FixedSigma { sigma } => (a0.n as f64, aj.n as f64, sigma),
                ZMode::PooledPerPair => (a0.n as f64, aj.n as f64, pooled_sd(data, j)?),
            };
            if !(n0 > 0.0 && nj > 0.0) {
                return Err(Error::domain(format!("arm {j}: sizes must be positive")));
            }
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::Numeric(format!("arm {j}: zero or invalid sd {sigma}")));
            }
            Ok((n0 * nj / (n0 + nj)).sqrt() * (aj.mean - a0.mean) / sigma)
        })
        .collect()
}

/// End-of-trial p-value `P(Z'_{j*} >= z*)` under the global null, with the
/// per-arm sds treated as known: a sum over the candidate maximiser `j` of
/// one-dimensional integrals.
pub fn dunnett_pvalue(data: &TrialData, sds: &[f64], z_star: f64) -> Result<f64> {
    data.validate()?;
    let n: Vec<f64> = data.arms.iter().map(|a| a.n as f64).collect();
    check_sizes(&n, Some(sds))?;
    if z_star.is_nan() {
        return Err(Error::domain("z* is NaN"));
    }
    if z_star == f64::INFINITY {
        return Ok(0.0);
    }
    let k = n.len() - 1;
    let mut p = 0.0;
    for j in 1..=k {
        let a = sds[j] / sds[0] * (n[0] / n[j]).sqrt();
        let b = z_star * sds[j] / sds[0] * ((n[0] + n[j]) / n[j]).sqrt();
        let others: Vec<f64> = (1..=k)
            .filter(|&i| i != j)
            .map(|i| sds[j] / sds[i] * (n[i] / n[j]).sqrt())
            .collect();
        let f = |u: f64| {
            let prod: f64 = others.iter().map(|&w| normal_cdf(u * w)).product();
            prod * normal_cdf(a * u - b) * normal_pdf(u)
        };
        // mass sits near the mode of phi(u) Phi(a u - b)
        let peak = (a * b / (1.0 + a * a)).clamp(-NORMAL_TAIL, 3.0 * NORMAL_TAIL);
        let lo = (peak - NORMAL_TAIL).min(-NORMAL_TAIL);
        let hi = (peak + NORMAL_TAIL).max(NORMAL_TAIL);
        let mut pts = vec![lo, peak - 1.0, peak, peak + 1.0, hi];
        pts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        pts.retain(|x| *x >= lo && *x <= hi);
        let est = integrate_pieces(f, &pts, Tolerance::new(1e-20, 1e-12))?;
        p += est.value;
    }
    Ok(p.clamp(0.0, 1.0))
}
