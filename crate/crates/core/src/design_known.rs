//! Sample sizes when the response precision `v` is known.
//!
//! Both criteria reduce to a requirement on the posterior information for
//! each treatment effect, `D1 = q1 q10 / (q1 + q10) >= V / v`, where
//! `q10 = q00 + n0` and `q1 = q0j + nj` are the posterior information on the
//! control and on each experimental arm.

use serde::{Deserialize, Serialize};

use crate::design_unknown::PrecisionPrior;
use crate::distributions::{equicorr_max_quantile, normal_quantile, EquicorrSpec};
use crate::error::{Error, Result};
use crate::posterior::{gamma_prob_known, PrecisionModel};
use crate::roots::brent;

/// Conjugate normal prior on one arm mean: `mu ~ N(mu0, 1 / (q0 v))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmPrior {
    pub mu0: f64,
    /// Prior information in patient-equivalents.
    pub q0: f64,
}

impl ArmPrior {
    pub fn new(mu0: f64, q0: f64) -> Self {
        ArmPrior { mu0, q0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(Error::config(format!("prior mean must be finite, got {}", self.mu0)));
        }
        if !(self.q0 >= 0.0 && self.q0.is_finite()) {
            return Err(Error::config(format!("prior information must be >= 0, got {}", self.q0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Some `Pi_j >= eta`, or `Gamma >= zeta`.
    C1,
    /// `Pi* >= eta`, or `Gamma >= zeta`.
    C2,
}

impl Criterion {
    pub fn number(self) -> u8 {
        match self {
            Criterion::C1 => 1,
            Criterion::C2 => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Criterion::C1),
            2 => Ok(Criterion::C2),
            _ => Err(Error::config(format!("criterion must be 1 or 2, got {n}"))),
        }
    }
}

/// How the response precision is treated at the design stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PrecisionSpec {
    Known { v: f64 },
    Gamma(PrecisionPrior),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Number of experimental arms.
    pub k: usize,
    /// Clinically important difference.
    pub delta_star: f64,
    pub eta: f64,
    pub zeta: f64,
    /// Posterior information ratio control : experimental. `None` selects
    /// the optimal `sqrt(k)`.
    pub r: Option<f64>,
    pub precision: PrecisionSpec,
    /// `k + 1` priors, control first.
    pub priors: Vec<ArmPrior>,
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(self.delta_star > 0.0 && self.delta_star.is_finite()) {
            return Err(Error::config(format!("delta_star must be positive, got {}", self.delta_star)));
        }
        for (name, p) in [("eta", self.eta), ("zeta", self.zeta)] {
            if !(p > 0.5 && p < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0.5, 1), got {p}")));
            }
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config(format!("allocation ratio r must be positive, got {r}")));
            }
        }
        match self.precision {
            PrecisionSpec::Known { v } => {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("precision v must be positive, got {v}")));
                }
            }
            PrecisionSpec::Gamma(p) => p.validate()?,
        }
        if self.priors.len() != self.k + 1 {
            return Err(Error::config(format!(
                "expected {} arm priors (control + {} experimental), got {}",
                self.k + 1,
                self.k,
                self.priors.len()
            )));
        }
        self.priors.iter().try_for_each(ArmPrior::validate)
    }

    pub fn allocation_ratio(&self) -> f64 {
        self.r.unwrap_or_else(|| (self.k as f64).sqrt())
    }

    /// Correlation between posterior treatment effects, `1 / (1 + r)`.
    pub fn rho(&self) -> f64 {
        1.0 / (1.0 + self.allocation_ratio())
    }

    pub fn known_v(&self) -> Result<f64> {
        match self.precision {
            PrecisionSpec::Known { v } => Ok(v),
            PrecisionSpec::Gamma(_) => Err(Error::config(
                "a known precision `v` is required for this operation",
            )),
        }
    }

    pub fn total_prior_information(&self) -> f64 {
        self.priors.iter().map(|p| p.q0).sum()
    }
}

/// What a [`DesignResult`] was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DesignBasis {
    Bayesian(Criterion),
    /// Bayesian criterion met with probability at least `xi` under a gamma
    /// prior on the precision.
    BayesianAssurance { criterion: Criterion, xi: f64 },
    Dunnett,
    /// Separate per-pair tests with no multiplicity adjustment.
    PairwiseUnadjusted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub basis: DesignBasis,
    /// Sample sizes `n0, n1, …, nk`.
    pub n: Vec<u64>,
    pub total: u64,
    /// Criterion target `V` (`V1`, `V2`, `V_n`, or the frequentist information).
    pub info_target: f64,
    /// Required `D1` in patient units (`V / v` for known precision).
    pub required_d1: f64,
    /// Smallest achieved `D1j` over experimental arms, patient units.
    pub d1_achieved: f64,
    /// Pre-rounding solution.
    pub fractional_n: Vec<f64>,
}

impl DesignResult {
    pub(crate) fn from_sizes(
        basis: DesignBasis,
        n: Vec<u64>,
        fractional_n: Vec<f64>,
        q0: &[f64],
        info_target: f64,
        required_d1: f64,
    ) -> Self {
        let total = n.iter().sum();
        let d1_achieved = achieved_d1(&n, q0);
        DesignResult {
            basis,
            n,
            total,
            info_target,
            required_d1,
            d1_achieved,
            fractional_n,
        }
    }

    pub fn control(&self) -> u64 {
        self.n[0]
    }

    pub fn experimental(&self) -> &[u64] {
        &self.n[1..]
    }

    /// Posterior information per arm, `q0j + nj`.
    pub fn posterior_information(&self, q0: &[f64]) -> Vec<f64> {
        self.n.iter().zip(q0).map(|(&n, &q)| n as f64 + q).collect()
    }
}

pub(crate) fn achieved_d1(n: &[u64], q0: &[f64]) -> f64 {
    let q10 = q0[0] + n[0] as f64;
    n[1..]
        .iter()
        .zip(&q0[1..])
        .map(|(&nj, &q)| {
            let q1 = q + nj as f64;
            q1 * q10 / (q1 + q10)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `V1 = ((z_eta + x_{rho,zeta,k}) / delta*)^2` or `V2 = ((z_eta + z_zeta) / delta*)^2`.
pub fn information_target(config: &DesignConfig, criterion: Criterion) -> Result<f64> {
    config.validate()?;
    let z_eta = normal_quantile(config.eta)?;
    let upper = match criterion {
        Criterion::C1 => {
            let spec = EquicorrSpec::gaussian(config.k, config.rho())?;
            equicorr_max_quantile(&spec, config.zeta)?
        }
        Criterion::C2 => normal_quantile(config.zeta)?,
    };
    Ok(((z_eta + upper) / config.delta_star).powi(2))
}

/// Posterior information `(q10, q1)` needed on control and on each
/// experimental arm for `D1 = required_d1` at ratio `q10 / q1 = r`.
pub(crate) fn required_information(required_d1: f64, r: f64) -> (f64, f64) {
    let q1 = (1.0 + 1.0 / r) * required_d1;
    (r * q1, q1)
}

/// Inequality form of the design equation for every experimental arm:
/// `1/(q00 + n0) + 1/(q0j + nj) <= 1 / required_d1`.
pub(crate) fn meets_information(n: &[u64], q0: &[f64], required_d1: f64) -> bool {
    let inv_control = 1.0 / (q0[0] + n[0] as f64);
    let bound = 1.0 / required_d1;
    n[1..]
        .iter()
        .zip(&q0[1..])
        .all(|(&nj, &q)| inv_control + 1.0 / (q + nj as f64) <= bound * (1.0 + 1e-12))
}

/// Rounds each fractional size up (negatives clamped to zero) and, if the
/// clamping broke the information requirement, adds patients greedily to
/// whichever arm buys the most information per patient.
pub(crate) fn round_allocation(fractional: &[f64], q0: &[f64], required_d1: f64) -> Result<Vec<u64>> {
    let mut n: Vec<u64> = fractional
        .iter()
        .map(|&x| {
            // Guard against x = 67.000000000001 style noise.
            let c = (x - 1e-9).ceil();
            if c <= 0.0 {
                0
            } else {
                c as u64
            }
        })
        .collect();
    let mut guard = 0usize;
    while !meets_information(&n, q0, required_d1) {
        guard += 1;
        if guard > 10_000_000 {
            return Err(Error::Infeasible(
                "could not reach the required information by adding patients".into(),
            ));
        }
        let bound = 1.0 / required_d1;
        let inv_control = 1.0 / (q0[0] + n[0] as f64);
        let violating: Vec<usize> = (1..n.len())
            .filter(|&j| inv_control + 1.0 / (q0[j] + n[j] as f64) > bound * (1.0 + 1e-12))
            .collect();
        let worst = |n: &[u64]| {
            let ic = 1.0 / (q0[0] + n[0] as f64);
            (1..n.len())
                .map(|j| ic + 1.0 / (q0[j] + n[j] as f64))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let now = worst(&n);
        let mut with_control = n.clone();
        with_control[0] += 1;
        let gain_control = now - worst(&with_control);
        let mut with_arms = n.clone();
        for &j in &violating {
            with_arms[j] += 1;
        }
        let gain_arms = (now - worst(&with_arms)) / violating.len() as f64;
        n = if gain_control >= gain_arms { with_control } else { with_arms };
    }
    Ok(n)
}

/// Fractional allocation per the closed-form optimum (generalised to any
/// ratio `r`), rounded up arm by arm.
pub fn optimal_design(config: &DesignConfig, criterion: Criterion) -> Result<DesignResult> {
    config.validate()?;
    let v = config.known_v()?;
    let target = information_target(config, criterion)?;
    let required_d1 = target / v;
    if !(required_d1 > 0.0) {
        return Err(Error::Infeasible("required information is zero".into()));
    }
    let q0: Vec<f64> = config.priors.iter().map(|p| p.q0).collect();
    let fractional = fractional_sizes(required_d1, config.allocation_ratio(), &q0);
    let n = round_allocation(&fractional, &q0, required_d1)?;
    Ok(DesignResult::from_sizes(
        DesignBasis::Bayesian(criterion),
        n,
        fractional,
        &q0,
        target,
        required_d1,
    ))
}

pub(crate) fn fractional_sizes(required_d1: f64, r: f64, q0: &[f64]) -> Vec<f64> {
    let (q10, q1) = required_information(required_d1, r);
    std::iter::once(q10 - q0[0])
        .chain(q0[1..].iter().map(|&q| q1 - q))
        .collect()
}

/// Lower bound on any admissible total: the unrounded optimal total
/// `(1 + sqrt(k))^2 V / v - sum q0j`.
pub fn total_lower_bound(config: &DesignConfig, criterion: Criterion) -> Result<f64> {
    let v = config.known_v()?;
    let target = information_target(config, criterion)?;
    let k = config.k as f64;
    Ok((1.0 + k.sqrt()).powi(2) * target / v - config.total_prior_information())
}

/// Exhaustive search over designs with equal experimental arms. Returns all
/// designs of the smallest feasible total not exceeding `max_total`, sorted
/// by `n0`; an empty list when no total up to `max_total` works.
pub fn integer_search(config: &DesignConfig, criterion: Criterion, max_total: u64) -> Result<Vec<DesignResult>> {
    config.validate()?;
    let v = config.known_v()?;
    let q_exp = config.priors[1].q0;
    if config.priors[1..].iter().any(|p| p.q0 != q_exp) {
        return Err(Error::Unsupported(
            "integer search requires equal prior information on all experimental arms".into(),
        ));
    }
    let target = information_target(config, criterion)?;
    let required_d1 = target / v;
    let q0: Vec<f64> = config.priors.iter().map(|p| p.q0).collect();
    let fractional = fractional_sizes(required_d1, config.allocation_ratio(), &q0);
    let bound = total_lower_bound(config, criterion)?;
    let start = if bound <= 0.0 { 0 } else { (bound - 1e-9).ceil() as u64 };
    let k = config.k as u64;
    for total in start..=max_total {
        let found: Vec<DesignResult> = (0..=total / k)
            .filter_map(|nj| {
                let n0 = total - k * nj;
                let mut n = vec![nj; config.k + 1];
                n[0] = n0;
                meets_information(&n, &q0, required_d1).then(|| {
                    DesignResult::from_sizes(
                        DesignBasis::Bayesian(criterion),
                        n,
                        fractional.clone(),
                        &q0,
                        target,
                        required_d1,
                    )
                })
            })
            .collect();
        if !found.is_empty() {
            let mut found = found;
            found.sort_by_key(|d| d.n[0]);
            return Ok(found);
        }
    }
    Ok(Vec::new())
}

/// Location of the proceed boundary `delta'_1 = z_eta / sqrt(D1 v)`.
pub fn borderline_threshold(config: &DesignConfig, d1: f64) -> Result<f64> {
    if !(d1 > 0.0) {
        return Err(Error::domain(format!("D1 must be positive, got {d1}")));
    }
    let v = config.known_v()?;
    Ok(normal_quantile(config.eta)? / (d1 * v).sqrt())
}

/// Sampling of the `delta_11` axis for [`boundary_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl BoundaryGrid {
    /// Step `0.01 delta*` over `[-2 delta*, 2 delta*]`.
    pub fn default_for(delta_star: f64) -> Self {
        BoundaryGrid {
            start: -2.0 * delta_star,
            end: 2.0 * delta_star,
            step: 0.01 * delta_star,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.end < self.start {
            return Vec::new();
        }
        let count = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Proceed,
    Abandon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub kind: BoundaryKind,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurves {
    pub criterion: Criterion,
    pub threshold: f64,
    /// Per-arm proceed thresholds `delta'_1j`.
    pub proceed_thresholds: Vec<f64>,
    /// `k = 2` only.
    pub polylines: Vec<Polyline>,
    /// Asymptote of the abandon curve as the other coordinate tends to `-inf`.
    pub abandon_asymptote: f64,
    pub warnings: Vec<String>,
}

/// Decision boundaries in the `(delta_11, delta_12)` plane for a design.
///
/// The abandon curve is the locus `Gamma(threshold) = zeta`; the proceed
/// boundary is the pair of lines `delta_1j = delta'_1` under Criterion 1 and
/// the locus `Pi* = eta` under Criterion 2. For `k != 2` only the per-arm
/// thresholds are returned.
pub fn boundary_curve(
    config: &DesignConfig,
    design: &DesignResult,
    threshold: f64,
    grid: &BoundaryGrid,
) -> Result<BoundaryCurves> {
    config.validate()?;
    let v = config.known_v()?;
    let criterion = match design.basis {
        DesignBasis::Bayesian(c) | DesignBasis::BayesianAssurance { criterion: c, .. } => c,
        _ => Criterion::C1,
    };
    let q0: Vec<f64> = config.priors.iter().map(|p| p.q0).collect();
    let q1 = design.posterior_information(&q0);
    let d1: Vec<f64> = q1[1..].iter().map(|&q| q * q1[0] / (q + q1[0])).collect();
    let z_eta = normal_quantile(config.eta)?;
    let z_zeta = normal_quantile(config.zeta)?;
    let proceed_thresholds: Vec<f64> = d1.iter().map(|&d| z_eta / (d * v).sqrt()).collect();
    let abandon_asymptote = threshold - z_zeta / (d1[0] * v).sqrt();
    let mut out = BoundaryCurves {
        criterion,
        threshold,
        proceed_thresholds: proceed_thresholds.clone(),
        polylines: Vec::new(),
        abandon_asymptote,
        warnings: Vec::new(),
    };
    if config.k != 2 {
        return Ok(out);
    }

    let precision = PrecisionModel::CommonKnown(v);
    // Probability that both effects lie below `c` given posterior means (a, b).
    let joint_below = |c: f64, a: f64, b: f64| -> f64 {
        let mu1 = [0.0, a, b];
        gamma_prob_known(&mu1, &q1, &precision, c).unwrap_or(f64::NAN)
    };
    let scale = 1.0 / (d1[0].min(d1[1]) * v).sqrt();

    let abandon = trace_locus(
        grid,
        |a, b| joint_below(threshold, a, b) - config.zeta,
        abandon_asymptote,
        scale,
        &mut out.warnings,
        "abandon",
    );
    out.polylines.push(Polyline {
        kind: BoundaryKind::Abandon,
        points: abandon,
    });

    let proceed = match criterion {
        Criterion::C1 => {
            let (t1, t2) = (proceed_thresholds[0], proceed_thresholds[1]);
            vec![(t1, grid.start), (t1, t2), (grid.start, t2)]
        }
        Criterion::C2 => {
            // Pi* = eta  <=>  P(both effects < 0) = 1 - eta
            let asym = z_eta / (d1[1] * v).sqrt();
            trace_locus(
                grid,
                |a, b| joint_below(0.0, a, b) - (1.0 - config.eta),
                asym,
                scale,
                &mut out.warnings,
                "proceed",
            )
        }
    };
    out.polylines.push(Polyline {
        kind: BoundaryKind::Proceed,
        points: proceed,
    });
    Ok(out)
}

/// For each grid value `a`, solves `g(a, b) = 0` for `b`, where `g` is
/// decreasing in `b` and the root approaches `asymptote` as `a -> -inf`.
fn trace_locus<G: Fn(f64, f64) -> f64>(
    grid: &BoundaryGrid,
    g: G,
    asymptote: f64,
    scale: f64,
    warnings: &mut Vec<String>,
    label: &str,
) -> Vec<(f64, f64)> {
    let mut points = Vec::new();
    for a in grid.points() {
        // past the asymptote the locus is empty by symmetry
        if a >= asymptote {
            break;
        }
        let hi = asymptote + 1e-9;
        let lo = asymptote - 40.0 * scale;
        let f_hi = g(a, hi);
        let f_lo = g(a, lo);
        if !(f_lo > 0.0 && f_hi < 0.0) {
            warnings.push(format!("{label}: no root bracketed at delta11 = {a:.6}"));
            log::warn!("{label} boundary: no root bracketed at delta11 = {a}");
            continue;
        }
        match brent(|b| g(a, b), lo, hi, 1e-10 * scale, 1e-6) {
            Ok(b) => points.push((a, b)),
            Err(e) => {
                warnings.push(format!("{label}: {e} at delta11 = {a:.6}"));
                log::warn!("{label} boundary: {e} at delta11 = {a}");
            }
        }
    }
    points
}
