//! Seeded Monte Carlo estimators used to cross-check the quadrature code.
//!
//! Draws come from ChaCha8 with one stream per chunk of `CHUNK` units, so a
//! result depends only on `(seed, n_draws, antithetic)` and not on the
//! number of rayon threads. Hit counts are integers and are summed exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design_known::{Criterion, DesignBasis, DesignConfig, DesignResult};
use crate::distributions::{normal_quantile, EquicorrSpec};
use crate::error::{Error, Result};
use crate::posterior::{gamma_prob_known, PosteriorSummary, PrecisionModel};

const CHUNK: u64 = 1 << 16;
pub const MIN_DRAWS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub n_draws: u64,
    /// Pair each draw with its sign-flipped normals.
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(seed: u64, n_draws: u64) -> Self {
        McConfig {
            seed,
            n_draws,
            antithetic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_draws < MIN_DRAWS {
            return Err(Error::config(format!(
                "n_draws must be at least {MIN_DRAWS}, got {}",
                self.n_draws
            )));
        }
        Ok(())
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig::new(20_240_917, 1_000_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub draws: u64,
}

impl McEstimate {
    /// `|estimate - value|` in standard errors. The SE is floored at the
    /// binomial SE under `value`, so an all-or-nothing sample is still
    /// compared sensibly against a probability near 0 or 1.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.estimate - value).abs();
        let null_se = (value.clamp(0.0, 1.0) * (1.0 - value.clamp(0.0, 1.0)) / self.draws as f64).sqrt();
        let se = self.std_error.max(null_se);
        if d == 0.0 {
            0.0
        } else {
            d / se
        }
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Core loop: `draw` samples one unit, `events(sample, sign, out)` writes the
/// indicator of every event for that sample with its normals multiplied by
/// `sign`.
fn estimate_events<S, D, E>(mc: &McConfig, n_events: usize, draw: D, events: E) -> Result<Vec<McEstimate>>
where
    D: Fn(&mut ChaCha8Rng) -> S + Sync,
    E: Fn(&S, f64, &mut [bool]) + Sync,
{
    mc.validate()?;
    let chunks = mc.n_draws.div_ceil(CHUNK);
    let per_chunk: Vec<(Vec<u64>, Vec<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(mc.seed, c);
            let units = CHUNK.min(mc.n_draws - c * CHUNK);
            let mut sum = vec![0u64; n_events];
            let mut sq = vec![0u64; n_events];
            let mut a = vec![false; n_events];
            let mut b = vec![false; n_events];
            for _ in 0..units {
                let s = draw(&mut rng);
                events(&s, 1.0, &mut a);
                if mc.antithetic {
                    events(&s, -1.0, &mut b);
                }
                for e in 0..n_events {
                    let h = a[e] as u64 + (mc.antithetic && b[e]) as u64;
                    sum[e] += h;
                    sq[e] += h * h;
                }
            }
            (sum, sq)
        })
        .collect();
    let m = mc.n_draws as f64;
    let w = if mc.antithetic { 2.0 } else { 1.0 };
    Ok((0..n_events)
        .map(|e| {
            let sum: u64 = per_chunk.iter().map(|(s, _)| s[e]).sum();
            let sq: u64 = per_chunk.iter().map(|(_, q)| q[e]).sum();
            let mean = sum as f64 / (m * w);
            let var = (sq as f64 / (m * w * w) - mean * mean).max(0.0);
            McEstimate {
                estimate: mean,
                std_error: (var / m).sqrt(),
                draws: mc.n_draws,
            }
        })
        .collect())
}

struct EquicorrDraw {
    common: f64,
    own: Vec<f64>,
    /// `sqrt(W / df)`, or 1 for the Gaussian case.
    scale: f64,
}

/// `P(max_j X_j <= x)` for `X_j = (sqrt(rho) U + sqrt(1 - rho) Z_j) / sqrt(W/df) + shift_j`.
pub fn mc_equicorr_max_prob(spec: &EquicorrSpec, shift: &[f64], x: f64, mc: &McConfig) -> Result<McEstimate> {
    spec.validate()?;
    if !shift.is_empty() && shift.len() != spec.k {
        return Err(Error::domain(format!("shift has {} entries for k = {}", shift.len(), spec.k)));
    }
    let chi = if spec.is_gaussian() {
        None
    } else {
        Some(ChiSquared::new(spec.df).map_err(|e| Error::domain(e.to_string()))?)
    };
    let (a, b) = (spec.rho.sqrt(), (1.0 - spec.rho).sqrt());
    let k = spec.k;
    let draw = |rng: &mut ChaCha8Rng| EquicorrDraw {
        common: rng.sample(StandardNormal),
        own: (0..k).map(|_| rng.sample(StandardNormal)).collect(),
        scale: chi.map_or(1.0, |c| (c.sample(rng) / spec.df).sqrt()),
    };
    let events = |d: &EquicorrDraw, sign: f64, out: &mut [bool]| {
        out[0] = d.own.iter().enumerate().all(|(j, &z)| {
            let s = shift.get(j).copied().unwrap_or(0.0);
            sign * (a * d.common + b * z) / d.scale + s <= x
        });
    };
    Ok(estimate_events(mc, 1, draw, events)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McPosteriorProbs {
    /// `Pi_j`, experimental arms in order.
    pub pi: Vec<McEstimate>,
    pub pi_star: McEstimate,
    /// `Gamma^(c)` for each requested threshold.
    pub gamma: Vec<McEstimate>,
}

struct PosteriorDraw {
    z: Vec<f64>,
    /// Common precision, gamma case only.
    v: f64,
}

/// Samples the arm means (and `v` under a gamma posterior) and counts the
/// events behind `Pi_j`, `Pi*` and `Gamma^(c)`.
pub fn mc_posterior_probs(
    summary: &PosteriorSummary,
    precision: &PrecisionModel,
    thresholds: &[f64],
    mc: &McConfig,
) -> Result<McPosteriorProbs> {
    let arms = summary.mu1.len();
    precision.validate(arms)?;
    if arms < 2 || summary.q1.len() != arms {
        return Err(Error::domain("posterior needs a control and at least one experimental arm"));
    }
    let k = arms - 1;
    let gamma_dist = match precision {
        PrecisionModel::GammaPosterior { alpha1, beta1 } => {
            Some(Gamma::new(*alpha1, 1.0 / beta1).map_err(|e| Error::domain(e.to_string()))?)
        }
        _ => None,
    };
    // sd of each mean at unit precision scale
    let sd: Vec<f64> = match precision {
        PrecisionModel::CommonKnown(v) => summary.q1.iter().map(|q| 1.0 / (q * v).sqrt()).collect(),
        PrecisionModel::PerGroupKnown(vs) => summary.q1.iter().zip(vs).map(|(q, v)| 1.0 / (q * v).sqrt()).collect(),
        PrecisionModel::GammaPosterior { .. } => summary.q1.iter().map(|q| 1.0 / q.sqrt()).collect(),
    };
    let draw = |rng: &mut ChaCha8Rng| PosteriorDraw {
        z: (0..arms).map(|_| rng.sample(StandardNormal)).collect(),
        v: gamma_dist.map_or(1.0, |g| g.sample(rng)),
    };
    let n_events = k + 1 + thresholds.len();
    let events = |d: &PosteriorDraw, sign: f64, out: &mut [bool]| {
        let scale = 1.0 / d.v.sqrt();
        let mu = |j: usize| summary.mu1[j] + sign * d.z[j] * sd[j] * scale;
        let m0 = mu(0);
        let mut max_delta = f64::NEG_INFINITY;
        for j in 1..=k {
            let delta = mu(j) - m0;
            out[j - 1] = delta > 0.0;
            max_delta = max_delta.max(delta);
        }
        out[k] = max_delta > 0.0;
        for (slot, &c) in out[k + 1..].iter_mut().zip(thresholds) {
            *slot = max_delta < c;
        }
    };
    let mut est = estimate_events(mc, n_events, draw, events)?;
    let gamma = est.split_off(k + 1);
    let pi_star = est.pop().expect("k + 1 estimates");
    Ok(McPosteriorProbs { pi: est, pi_star, gamma })
}

/// A posterior-mean vector at which neither decision is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeViolation {
    pub delta1: Vec<f64>,
    /// `max_j Pi_j` (Criterion 1) or `Pi*` (Criterion 2).
    pub proceed_prob: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub criterion: Criterion,
    pub points_checked: usize,
    /// Smallest `max(proceed_prob - eta, gamma - zeta)` seen.
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub violation: Option<GuaranteeViolation>,
}

/// Tolerance on the abandon side for quadrature error.
const GUARANTEE_SLACK: f64 = 1e-9;

/// Searches posterior-mean space for an outcome that leaves a known-precision
/// design in indecision. Points: a regular grid over `[-delta*, 2 delta*]^k`
/// (half the budget), uniform random points from the same box, and the
/// borderline vector just below every proceed threshold.
pub fn mc_design_guarantee(
    design: &DesignResult,
    config: &DesignConfig,
    n_points: usize,
    mc: &McConfig,
) -> Result<GuaranteeReport> {
    config.validate()?;
    let v = config.known_v()?;
    let k = config.k;
    if design.n.len() != k + 1 {
        return Err(Error::config(format!("design has {} arms, config expects {}", design.n.len(), k + 1)));
    }
    let criterion = match design.basis {
        DesignBasis::Bayesian(c) | DesignBasis::BayesianAssurance { criterion: c, .. } => c,
        _ => Criterion::C1,
    };
    let q0: Vec<f64> = config.priors.iter().map(|p| p.q0).collect();
    let q1 = design.posterior_information(&q0);
    let precision = PrecisionModel::CommonKnown(v);
    let z_eta = normal_quantile(config.eta)?;
    let proceed_at: Vec<f64> = (1..=k).map(|j| z_eta / (q1[0] * q1[j] / (q1[0] + q1[j]) * v).sqrt()).collect();

    let lo = -config.delta_star;
    let hi = 2.0 * config.delta_star;
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n_points + 1);
    points.push(proceed_at.iter().map(|d| d * (1.0 - 1e-9) - 1e-12).collect());
    let side = ((n_points / 2) as f64).powf(1.0 / k as f64).floor().max(2.0) as usize;
    let mut idx = vec![0usize; k];
    'grid: loop {
        points.push(idx.iter().map(|&i| lo + (hi - lo) * i as f64 / (side - 1) as f64).collect());
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < side {
                continue 'grid;
            }
            *slot = 0;
        }
        break;
    }
    let mut rng = chunk_rng(mc.seed, u64::MAX);
    while points.len() < n_points.max(2) {
        points.push((0..k).map(|_| rng.random_range(lo..hi)).collect());
    }

    let evaluate = |delta: &Vec<f64>| -> Result<(f64, f64)> {
        let mut mu1 = vec![0.0];
        mu1.extend_from_slice(delta);
        let proceed = match criterion {
            Criterion::C1 => delta
                .iter()
                .zip(&proceed_at)
                .map(|(d, t)| crate::distributions::normal_cdf(d / t * z_eta))
                .fold(f64::NEG_INFINITY, f64::max),
            Criterion::C2 => 1.0 - gamma_prob_known(&mu1, &q1, &precision, 0.0)?,
        };
        let gamma = gamma_prob_known(&mu1, &q1, &precision, config.delta_star)?;
        Ok((proceed, gamma))
    };
    let results = points.par_iter().map(evaluate).collect::<Result<Vec<_>>>()?;

    let mut report = GuaranteeReport {
        criterion,
        points_checked: points.len(),
        worst_margin: f64::INFINITY,
        worst_point: Vec::new(),
        violation: None,
    };
    for (p, &(proceed, gamma)) in points.iter().zip(&results) {
        let margin = (proceed - config.eta).max(gamma - config.zeta);
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_point = p.clone();
        }
        if report.violation.is_none() && proceed < config.eta && gamma < config.zeta - GUARANTEE_SLACK {
            report.violation = Some(GuaranteeViolation {
                delta1: p.clone(),
                proceed_prob: proceed,
                gamma,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coordinate_at_zero_is_half() {
        let spec = EquicorrSpec::gaussian(1, 0.3).unwrap();
        let e = mc_equicorr_max_prob(&spec, &[], 0.0, &McConfig::new(7, 200_000)).unwrap();
        assert!(e.z_score(0.5) < 3.0, "{e:?}");
    }

    #[test]
    fn reproducible() {
        let spec = EquicorrSpec::new(3, 0.4, 12.0).unwrap();
        let mc = McConfig::new(11, 100_000);
        let a = mc_equicorr_max_prob(&spec, &[0.1, 0.0, -0.2], 1.2, &mc).unwrap();
        let b = mc_equicorr_max_prob(&spec, &[0.1, 0.0, -0.2], 1.2, &mc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_draws() {
        let spec = EquicorrSpec::gaussian(2, 0.5).unwrap();
        assert!(mc_equicorr_max_prob(&spec, &[], 0.0, &McConfig::new(1, 100)).is_err());
    }

    #[test]
    fn antithetic_agrees_with_plain() {
        let spec = EquicorrSpec::gaussian(2, 0.5).unwrap();
        let plain = mc_equicorr_max_prob(&spec, &[], 1.0, &McConfig::new(3, 200_000)).unwrap();
        let anti = mc_equicorr_max_prob(
            &spec,
            &[],
            1.0,
            &McConfig {
                antithetic: true,
                ..McConfig::new(4, 200_000)
            },
        )
        .unwrap();
        let se = (plain.std_error.powi(2) + anti.std_error.powi(2)).sqrt();
        assert!((plain.estimate - anti.estimate).abs() < 3.0 * se);
    }

    #[test]
    fn very_negative_effects_give_gamma_one() {
        let s = PosteriorSummary {
            mu1: vec![0.0, -1e6, -1e6],
            q1: vec![1e4, 1e4, 1e4],
        };
        let p = mc_posterior_probs(&s, &PrecisionModel::CommonKnown(1.0), &[0.0, 5.0], &McConfig::new(5, 20_000)).unwrap();
        assert_eq!(p.gamma[0].estimate, 1.0);
        assert_eq!(p.pi_star.estimate, 0.0);
    }
}
