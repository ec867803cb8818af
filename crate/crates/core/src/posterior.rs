//! End-of-trial posterior analysis: conjugate update of the arm means and
//! the decision probabilities `Pi_j`, `Pi*` and `Gamma^(c)`.
//!
//! All probabilities use the general unequal-information forms; nothing
//! assumes the realised `q1j` match the design.

use serde::{Deserialize, Serialize};

use crate::design_known::{ArmPrior, DesignConfig};
use crate::distributions::{log_gamma_density, log_gamma_window, normal_cdf, normal_pdf, t_cdf, NORMAL_TAIL};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Summary statistics for one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmData {
    pub n: u64,
    pub mean: f64,
    /// Sum of squared responses `U_j`.
    pub ss: f64,
}

impl ArmData {
    pub fn new(n: u64, mean: f64, ss: f64) -> Self {
        ArmData { n, mean, ss }
    }

    /// Reconstructs `U_j = (n - 1) sd^2 + n mean^2` from a sample sd.
    /// Only as accurate as the reported sd.
    pub fn from_sd(n: u64, mean: f64, sd: f64) -> Self {
        let nf = n as f64;
        ArmData {
            n,
            mean,
            ss: (nf - 1.0).max(0.0) * sd * sd + nf * mean * mean,
        }
    }

    /// Same as [`ArmData::from_sd`] with `sd = se * sqrt(n)`.
    pub fn from_se(n: u64, mean: f64, se: f64) -> Self {
        Self::from_sd(n, mean, se * (n as f64).sqrt())
    }

    /// Within-arm sum of squares about the mean, `U_j - n ybar^2`.
    pub fn centred_ss(&self) -> f64 {
        self.ss - self.n as f64 * self.mean * self.mean
    }

    pub fn sample_sd(&self) -> Option<f64> {
        (self.n > 1).then(|| (self.centred_ss().max(0.0) / (self.n as f64 - 1.0)).sqrt())
    }
}

/// Per-arm data, control first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialData {
    pub arms: Vec<ArmData>,
}

impl TrialData {
    pub fn new(arms: Vec<ArmData>) -> Result<Self> {
        let d = TrialData { arms };
        d.validate()?;
        Ok(d)
    }

    /// No observations on any of `k + 1` arms.
    pub fn empty(k: usize) -> Self {
        TrialData {
            arms: vec![ArmData::new(0, 0.0, 0.0); k + 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.len() < 2 {
            return Err(Error::config("trial data needs a control and at least one experimental arm"));
        }
        for (j, a) in self.arms.iter().enumerate() {
            if !(a.mean.is_finite() && a.ss.is_finite()) {
                return Err(Error::DataInconsistency(format!("arm {j}: non-finite summary")));
            }
            if a.n > 0 {
                let floor = a.n as f64 * a.mean * a.mean;
                if a.ss < floor - 1e-9 * floor.max(1.0) {
                    return Err(Error::DataInconsistency(format!(
                        "arm {j}: sum of squares {} is below n * mean^2 = {floor}",
                        a.ss
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.arms.len() - 1
    }

    pub fn total(&self) -> u64 {
        self.arms.iter().map(|a| a.n).sum()
    }
}

/// Posterior mean `mu1j` and information `q1j` for every arm, control first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mu1: Vec<f64>,
    pub q1: Vec<f64>,
}

impl PosteriorSummary {
    pub fn k(&self) -> usize {
        self.mu1.len() - 1
    }

    /// `delta_1j = mu_1j - mu_10`.
    pub fn delta1(&self, j: usize) -> f64 {
        self.mu1[j] - self.mu1[0]
    }

    /// `D_1j = q_1j q_10 / (q_1j + q_10)`.
    pub fn d1(&self, j: usize) -> f64 {
        self.q1[j] * self.q1[0] / (self.q1[j] + self.q1[0])
    }

    pub fn deltas(&self) -> Vec<f64> {
        (1..=self.k()).map(|j| self.delta1(j)).collect()
    }
}

/// Treatment of the response precision at analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrecisionModel {
    CommonKnown(f64),
    /// Plug-in precision per arm, control first, treated as fixed.
    PerGroupKnown(Vec<f64>),
    /// Common precision with posterior `Gamma(alpha1, rate beta1)`.
    GammaPosterior { alpha1: f64, beta1: f64 },
}

impl PrecisionModel {
    pub fn validate(&self, arms: usize) -> Result<()> {
        match self {
            PrecisionModel::CommonKnown(v) if *v > 0.0 && v.is_finite() => Ok(()),
            PrecisionModel::PerGroupKnown(vs) => {
                if vs.len() != arms {
                    return Err(Error::config(format!("expected {arms} per-arm precisions, got {}", vs.len())));
                }
                match vs.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    Some(v) => Err(Error::config(format!("precisions must be positive, got {v}"))),
                    None => Ok(()),
                }
            }
            PrecisionModel::GammaPosterior { alpha1, beta1 } if *alpha1 > 0.0 && *beta1 > 0.0 => Ok(()),
            other => Err(Error::config(format!("invalid precision model {other:?}"))),
        }
    }

    /// Per-arm precisions from sample sds, `v_j = 1 / sd_j^2`.
    pub fn per_group_from_sd(sds: &[f64]) -> Self {
        PrecisionModel::PerGroupKnown(sds.iter().map(|s| 1.0 / (s * s)).collect())
    }
}

/// Conjugate normal update of each arm mean.
pub fn update(priors: &[ArmPrior], data: &TrialData) -> Result<PosteriorSummary> {
    data.validate()?;
    if priors.len() != data.arms.len() {
        return Err(Error::config(format!(
            "{} priors for {} arms of data",
            priors.len(),
            data.arms.len()
        )));
    }
    let mut mu1 = Vec::with_capacity(priors.len());
    let mut q1 = Vec::with_capacity(priors.len());
    for (j, (p, a)) in priors.iter().zip(&data.arms).enumerate() {
        p.validate()?;
        let n = a.n as f64;
        let q = p.q0 + n;
        if q <= 0.0 {
            return Err(Error::UndefinedPosterior { arm: j });
        }
        mu1.push((p.mu0 * p.q0 + n * a.mean) / q);
        q1.push(q);
    }
    Ok(PosteriorSummary { mu1, q1 })
}

fn check_arm(summary: &PosteriorSummary, j: usize) -> Result<()> {
    if j == 0 || j > summary.k() {
        return Err(Error::domain(format!("arm index must be in 1..={}, got {j}", summary.k())));
    }
    Ok(())
}

/// `Pi_j = P(delta_j > 0 | y)`.
pub fn pi_j(summary: &PosteriorSummary, precision: &PrecisionModel, j: usize) -> Result<f64> {
    check_arm(summary, j)?;
    precision.validate(summary.mu1.len())?;
    let d = summary.delta1(j);
    Ok(match precision {
        PrecisionModel::CommonKnown(v) => normal_cdf(d * (summary.d1(j) * v).sqrt()),
        PrecisionModel::PerGroupKnown(vs) => {
            let a = summary.q1[0] * vs[0];
            let b = summary.q1[j] * vs[j];
            normal_cdf(d * (a * b / (a + b)).sqrt())
        }
        PrecisionModel::GammaPosterior { alpha1, beta1 } => {
            t_cdf(2.0 * alpha1, d * (summary.d1(j) * alpha1 / beta1).sqrt())
        }
    })
}

/// `Gamma^(c)` given fixed per-arm precisions: one-dimensional integral over
/// the standardised control mean.
fn gamma_fixed(mu1: &[f64], q1: &[f64], v: &[f64], c: f64) -> Result<f64> {
    let control = q1[0] * v[0];
    let terms: Vec<(f64, f64)> = (1..mu1.len())
        .map(|j| {
            let info = q1[j] * v[j];
            ((info / control).sqrt(), (c - (mu1[j] - mu1[0])) * info.sqrt())
        })
        .collect();
    let est = integrate(
        |u| {
            let prod: f64 = terms.iter().map(|&(slope, shift)| normal_cdf(u * slope + shift)).product();
            prod * normal_pdf(u)
        },
        -NORMAL_TAIL,
        NORMAL_TAIL,
        Tolerance::new(1e-12, 1e-10),
    )?;
    Ok(est.value.clamp(0.0, 1.0))
}

/// `P(all delta_j < c | y)` from raw posterior means and informations.
pub(crate) fn gamma_prob_known(mu1: &[f64], q1: &[f64], precision: &PrecisionModel, c: f64) -> Result<f64> {
    if c == f64::INFINITY {
        return Ok(1.0);
    }
    if c == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if c.is_nan() {
        return Err(Error::domain("threshold is NaN"));
    }
    match precision {
        PrecisionModel::CommonKnown(v) => gamma_fixed(mu1, q1, &vec![*v; mu1.len()], c),
        PrecisionModel::PerGroupKnown(vs) => gamma_fixed(mu1, q1, vs, c),
        PrecisionModel::GammaPosterior { alpha1, beta1 } => {
            let (lo, hi) = log_gamma_window(*alpha1, *beta1);
            let dens = log_gamma_density(*alpha1, *beta1);
            let failure = std::cell::Cell::new(None);
            let est = integrate(
                |l| {
                    let row = vec![l.exp(); mu1.len()];
                    match gamma_fixed(mu1, q1, &row, c) {
                        Ok(p) => p * dens(l),
                        Err(e) => {
                            failure.set(Some(e));
                            f64::NAN
                        }
                    }
                },
                lo,
                hi,
                Tolerance::new(1e-11, 1e-9),
            );
            if let Some(e) = failure.take() {
                return Err(e);
            }
            Ok(est?.value.clamp(0.0, 1.0))
        }
    }
}

/// `Gamma^(c) = P(delta_j < c for all j | y)`; `c = delta*` gives `Gamma`.
pub fn gamma_prob(summary: &PosteriorSummary, precision: &PrecisionModel, threshold: f64) -> Result<f64> {
    precision.validate(summary.mu1.len())?;
    gamma_prob_known(&summary.mu1, &summary.q1, precision, threshold)
}

/// `Pi* = P(delta_j > 0 for at least one j | y) = 1 - Gamma^(0)`.
pub fn pi_star(summary: &PosteriorSummary, precision: &PrecisionModel) -> Result<f64> {
    Ok(1.0 - gamma_prob(summary, precision, 0.0)?)
}

/// `P(mu_j > mu_h | y)` for two experimental arms.
pub fn prob_pairwise_better(summary: &PosteriorSummary, precision: &PrecisionModel, j: usize, h: usize) -> Result<f64> {
    check_arm(summary, j)?;
    check_arm(summary, h)?;
    if j == h {
        return Err(Error::domain("pairwise comparison needs two distinct arms"));
    }
    precision.validate(summary.mu1.len())?;
    let diff = summary.mu1[j] - summary.mu1[h];
    let (qj, qh) = (summary.q1[j], summary.q1[h]);
    Ok(match precision {
        PrecisionModel::CommonKnown(v) => normal_cdf(diff / ((1.0 / qj + 1.0 / qh) / v).sqrt()),
        PrecisionModel::PerGroupKnown(vs) => normal_cdf(diff / (1.0 / (qj * vs[j]) + 1.0 / (qh * vs[h])).sqrt()),
        PrecisionModel::GammaPosterior { alpha1, beta1 } => {
            t_cdf(2.0 * alpha1, diff * (alpha1 / beta1 / (1.0 / qj + 1.0 / qh)).sqrt())
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Proceed,
    Abandon,
    Both,
    Neither,
}

/// Advisory attached to a `Both` outcome.
pub const BOTH_NOTE: &str = "at least one treatment shows promise but none appears to have a clinically \
important effect; further considerations such as safety or cost are needed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub pi: Vec<f64>,
    pub pi_star: f64,
    /// `Gamma` at `delta*`.
    pub gamma: f64,
    /// Experimental arms (1-based) with `Pi_j >= eta`.
    pub promising_set: Vec<usize>,
    pub abandon: bool,
    pub pi_star_met: bool,
    pub classification: Classification,
    pub note: Option<&'static str>,
}

/// Slack on `>=` comparisons so that boundary outcomes computed to within
/// quadrature error are classified as meeting the threshold.
const DECISION_SLACK: f64 = 1e-9;

pub fn decide(summary: &PosteriorSummary, precision: &PrecisionModel, config: &DesignConfig) -> Result<Decision> {
    let k = summary.k();
    let pi = (1..=k).map(|j| pi_j(summary, precision, j)).collect::<Result<Vec<_>>>()?;
    let pi_star = pi_star(summary, precision)?;
    let gamma = gamma_prob(summary, precision, config.delta_star)?;
    let promising_set: Vec<usize> = pi
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= config.eta - DECISION_SLACK)
        .map(|(i, _)| i + 1)
        .collect();
    let abandon = gamma >= config.zeta - DECISION_SLACK;
    let classification = match (!promising_set.is_empty(), abandon) {
        (true, true) => Classification::Both,
        (true, false) => Classification::Proceed,
        (false, true) => Classification::Abandon,
        (false, false) => Classification::Neither,
    };
    Ok(Decision {
        pi,
        pi_star,
        gamma,
        promising_set,
        abandon,
        pi_star_met: pi_star >= config.eta - DECISION_SLACK,
        classification,
        note: (classification == Classification::Both).then_some(BOTH_NOTE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(mu1: &[f64], q1: &[f64]) -> PosteriorSummary {
        PosteriorSummary {
            mu1: mu1.to_vec(),
            q1: q1.to_vec(),
        }
    }

    #[test]
    fn no_data_gives_prior() {
        let priors = [ArmPrior::new(1.0, 3.0), ArmPrior::new(2.0, 5.0)];
        let s = update(&priors, &TrialData::empty(1)).unwrap();
        assert_eq!(s.mu1, vec![1.0, 2.0]);
        assert_eq!(s.q1, vec![3.0, 5.0]);
    }

    #[test]
    fn equal_weights_average() {
        let priors = [ArmPrior::new(0.0, 10.0), ArmPrior::new(4.0, 7.0)];
        let data = TrialData::new(vec![ArmData::from_sd(10, 2.0, 1.0), ArmData::from_sd(7, 10.0, 1.0)]).unwrap();
        let s = update(&priors, &data).unwrap();
        assert!((s.mu1[0] - 1.0).abs() < 1e-14);
        assert!((s.mu1[1] - 7.0).abs() < 1e-14);
    }

    #[test]
    fn improper_posterior() {
        let priors = [ArmPrior::new(0.0, 0.0), ArmPrior::new(0.0, 1.0)];
        assert!(matches!(
            update(&priors, &TrialData::empty(1)),
            Err(Error::UndefinedPosterior { arm: 0 })
        ));
    }

    #[test]
    fn inconsistent_sum_of_squares() {
        assert!(TrialData::new(vec![ArmData::new(4, 3.0, 10.0), ArmData::new(1, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn pi_symmetry_and_threshold_limits() {
        let s = summary(&[1.0, 1.0, 3.0], &[20.0, 10.0, 12.0]);
        let p = PrecisionModel::CommonKnown(0.5);
        assert!((pi_j(&s, &p, 1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(gamma_prob(&s, &p, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(gamma_prob(&s, &p, f64::NEG_INFINITY).unwrap(), 0.0);
        assert!(pi_j(&s, &p, 0).is_err());
        assert!(pi_j(&s, &p, 3).is_err());
    }

    #[test]
    fn single_arm_pi_star_equals_pi() {
        let s = summary(&[0.0, 0.4], &[20.0, 15.0]);
        for p in [
            PrecisionModel::CommonKnown(2.0),
            PrecisionModel::PerGroupKnown(vec![1.5, 3.0]),
            PrecisionModel::GammaPosterior { alpha1: 6.0, beta1: 3.0 },
        ] {
            let a = pi_star(&s, &p).unwrap();
            let b = pi_j(&s, &p, 1).unwrap();
            assert!((a - b).abs() < 1e-9, "{p:?}: {a} vs {b}");
        }
    }

    #[test]
    fn identical_arms_pairwise_half() {
        let s = summary(&[0.0, 2.0, 2.0], &[10.0, 8.0, 8.0]);
        let p = PrecisionModel::PerGroupKnown(vec![1.0, 0.3, 0.3]);
        assert!((prob_pairwise_better(&s, &p, 1, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(prob_pairwise_better(&s, &p, 1, 1).is_err());
    }

    #[test]
    fn wrong_precision_length() {
        let s = summary(&[0.0, 2.0], &[10.0, 8.0]);
        assert!(pi_j(&s, &PrecisionModel::PerGroupKnown(vec![1.0]), 1).is_err());
        assert!(pi_j(&s, &PrecisionModel::CommonKnown(-1.0), 1).is_err());
    }
}
