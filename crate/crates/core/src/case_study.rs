//! Worked configurations: a two-arm illustration and a four-dose blood
//! pressure study, with its summary data and design tables.

use serde::{Deserialize, Serialize};

use crate::design_known::{optimal_design, ArmPrior, Criterion, DesignConfig, PrecisionSpec};
use crate::design_unknown::{precision_stats, sample_size_unknown, PrecisionPrior};
use crate::dunnett::{dunnett_design, Allocation, DunnettConfig};
use crate::error::Result;
use crate::posterior::{ArmData, TrialData};

/// Two experimental arms, `delta* = 0.5`, unit precision, `q00 = 16`,
/// `q0j = 4`.
pub fn illustration_config() -> DesignConfig {
    DesignConfig {
        k: 2,
        delta_star: 0.5,
        eta: 0.95,
        zeta: 0.90,
        r: None,
        precision: PrecisionSpec::Known { v: 1.0 },
        priors: vec![ArmPrior::new(0.0, 16.0), ArmPrior::new(0.0, 4.0), ArmPrior::new(0.0, 4.0)],
    }
}

pub fn illustration_dunnett() -> DunnettConfig {
    DunnettConfig {
        k: 2,
        alpha: 0.05,
        power: 0.90,
        delta_star: 0.5,
        sigma: 1.0,
        allocation: Allocation::SqrtK,
    }
}

/// Anticipated response sd in the dose study (mm Hg).
pub const STUDY_SIGMA: f64 = 7.0;

/// Four doses against placebo, `v = 1/49`.
pub fn study_config() -> DesignConfig {
    let mut priors = vec![ArmPrior::new(0.0, 10.0)];
    priors.extend(std::iter::repeat_n(ArmPrior::new(9.0, 2.0), 4));
    DesignConfig {
        k: 4,
        delta_star: 5.0,
        eta: 0.95,
        zeta: 0.90,
        r: None,
        precision: PrecisionSpec::Known {
            v: 1.0 / (STUDY_SIGMA * STUDY_SIGMA),
        },
        priors,
    }
}

pub fn study_dunnett() -> DunnettConfig {
    DunnettConfig {
        k: 4,
        alpha: 0.05,
        power: 0.90,
        delta_star: 5.0,
        sigma: STUDY_SIGMA,
        allocation: Allocation::Equal,
    }
}

/// Gamma prior on `v` with mean `1/49`.
pub fn study_precision_prior(alpha0: f64, xi: f64) -> PrecisionPrior {
    PrecisionPrior {
        alpha0,
        beta0: 49.0 * alpha0,
        xi,
    }
}

pub const STUDY_DOSES: [f64; 5] = [0.0, 1.25, 2.5, 5.0, 10.0];
pub const STUDY_N: [u64; 5] = [52, 50, 52, 52, 51];
pub const STUDY_MEAN: [f64; 5] = [2.8, 12.7, 14.3, 13.4, 17.0];
pub const STUDY_SE: [f64; 5] = [1.7, 2.0, 1.6, 2.0, 2.1];
pub const STUDY_SD: [f64; 5] = [12.3, 14.1, 11.5, 14.4, 15.0];

/// Observed data with sums of squares rebuilt from the standard errors,
/// `sd = se sqrt(n)`. Rounded sums of squares are not
/// consistent with the rounded means and sds to the last digit.
pub fn study_data() -> TrialData {
    TrialData {
        arms: (0..5)
            .map(|j| ArmData::from_se(STUDY_N[j], STUDY_MEAN[j], STUDY_SE[j]))
            .collect(),
    }
}

/// Response sd below which the precision is `v >= 1/15^2`.
pub const SD_OF_CONCERN: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub design: String,
    pub experimental: u64,
    pub control: u64,
    pub total: u64,
    pub expected: (u64, u64, u64),
}

impl Table2Row {
    pub fn pass(&self) -> bool {
        (self.experimental, self.control, self.total) == self.expected
    }
}

/// Known-precision designs for the dose study.
pub fn table2() -> Result<Vec<Table2Row>> {
    let config = study_config();
    let dunnett = dunnett_design(&study_dunnett())?;
    let c1 = optimal_design(&config, Criterion::C1)?;
    let c2 = optimal_design(&config, Criterion::C2)?;
    let row = |design: &str, d: &crate::DesignResult, expected| Table2Row {
        design: design.to_string(),
        experimental: d.n[1],
        control: d.n[0],
        total: d.total,
        expected,
    };
    Ok(vec![
        row("Frequentist Dunnett design with equal sample sizes", &dunnett, (47, 47, 235)),
        row("Bayesian design, Criterion 1", &c1, (35, 64, 204)),
        row("Bayesian design, Criterion 2", &c2, (24, 41, 137)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    pub alpha0: f64,
    pub beta0: f64,
    pub prior_mean_v: f64,
    /// Prior `P(sd >= 15)`.
    pub prior_prob_sd: f64,
    pub xi: f64,
    /// `(experimental, control, total)` per criterion.
    pub c1: (u64, u64, u64),
    pub c2: (u64, u64, u64),
    pub expected_c1: (u64, u64, u64),
    pub expected_c2: (u64, u64, u64),
    pub expected_prob_sd: f64,
}

impl Table3Row {
    /// Every size within `tol` patients and the prior probability within
    /// half a unit of its third decimal.
    pub fn pass(&self, tol: u64) -> bool {
        let close = |a: (u64, u64, u64), b: (u64, u64, u64)| {
            a.0.abs_diff(b.0) <= tol && a.1.abs_diff(b.1) <= tol && a.2.abs_diff(b.2) <= tol
        };
        close(self.c1, self.expected_c1)
            && close(self.c2, self.expected_c2)
            && (self.prior_prob_sd - self.expected_prob_sd).abs() <= 5e-4
    }
}

/// `(alpha0, xi, prior P(sd >= 15), C1 (exp, control, total), C2 (...))`.
pub const TABLE3_REFERENCE: [(f64, f64, f64, (u64, u64, u64), (u64, u64, u64)); 7] = [
    (1.0, 0.95, 0.196, (714, 1422, 4278), (489, 972, 2928)),
    (1.0, 0.80, 0.196, (163, 320, 972), (111, 216, 660)),
    (1.0, 0.50, 0.196, (52, 97, 305), (35, 63, 203)),
    (2.0, 0.95, 0.071, (205, 403, 1223), (140, 274, 834)),
    (2.0, 0.80, 0.071, (88, 169, 521), (59, 112, 348)),
    (3.0, 0.95, 0.029, (133, 259, 791), (91, 175, 539)),
    (3.0, 0.80, 0.029, (70, 134, 414), (48, 89, 281)),
];

pub fn table3_row(alpha0: f64, xi: f64) -> Result<Table3Row> {
    let config = study_config();
    let prior = study_precision_prior(alpha0, xi);
    let sizes = |c| -> Result<(u64, u64, u64)> {
        let d = sample_size_unknown(&config, &prior, c)?;
        Ok((d.n[1], d.n[0], d.total))
    };
    let reference = TABLE3_REFERENCE
        .iter()
        .find(|r| r.0 == alpha0 && r.1 == xi)
        .copied()
        .unwrap_or((alpha0, xi, f64::NAN, (0, 0, 0), (0, 0, 0)));
    let threshold = 1.0 / (SD_OF_CONCERN * SD_OF_CONCERN);
    Ok(Table3Row {
        alpha0,
        beta0: prior.beta0,
        prior_mean_v: prior.mean(),
        prior_prob_sd: precision_stats(alpha0, prior.beta0, threshold).prob_at_most,
        xi,
        c1: sizes(Criterion::C1)?,
        c2: sizes(Criterion::C2)?,
        expected_c1: reference.3,
        expected_c2: reference.4,
        expected_prob_sd: reference.2,
    })
}

pub fn table3() -> Result<Vec<Table3Row>> {
    use rayon::prelude::*;
    TABLE3_REFERENCE
        .par_iter()
        .map(|r| table3_row(r.0, r.1))
        .collect()
}
