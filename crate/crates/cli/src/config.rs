//! TOML run configuration.
//!
//! Units: `delta_star`, prior means and response data are in response units;
//! `v` is a precision (1 / variance) and `sd` a standard deviation in the same
//! units. Probabilities are decimals in (0, 1).

use std::path::{Path, PathBuf};

use multiarm::dunnett::{Allocation, DunnettConfig};
use multiarm::mc_oracle::McConfig;
use multiarm::posterior::{ArmData, TrialData};
use multiarm::{ArmPrior, Criterion, DesignConfig, Error, PrecisionPrior, PrecisionSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub design: Option<RawDesign>,
    pub precision_prior: Option<PrecisionPrior>,
    pub data: Option<RawData>,
    pub analysis: Option<RawAnalysis>,
    pub dunnett: Option<RawDunnett>,
    pub boundary: Option<RawBoundary>,
    pub mc: Option<RawMc>,
    pub output: Option<RawOutput>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawDesign {
    pub k: usize,
    pub delta_star: f64,
    pub eta: f64,
    pub zeta: f64,
    /// Posterior information ratio control : experimental, default `sqrt(k)`.
    pub r: Option<f64>,
    pub v: Option<f64>,
    pub sd: Option<f64>,
    pub criterion: Option<u8>,
    /// Control first, then one entry per experimental arm.
    #[serde(default)]
    pub prior: Vec<ArmPrior>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawData {
    #[serde(default)]
    pub arm: Vec<RawArm>,
}

/// One arm of summary data; give exactly one of `ss` (uncentred sum of
/// squares), `sd` or `se`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawArm {
    pub n: u64,
    pub mean: f64,
    pub ss: Option<f64>,
    pub sd: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisPrecision {
    /// Design precision `v` taken as exact.
    Known,
    /// Each arm's sample sd plugged in as known.
    PerGroup,
    /// Conjugate gamma update of a common precision.
    Gamma,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawAnalysis {
    pub precision: Option<AnalysisPrecision>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawDunnett {
    pub alpha: Option<f64>,
    pub power: Option<f64>,
    pub sigma: Option<f64>,
    /// `"equal"`, `"sqrt-k"` or a numeric ratio `n0 / nj`.
    pub allocation: Option<toml::Value>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawBoundary {
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawMc {
    pub seed: Option<u64>,
    pub draws: Option<u64>,
    pub antithetic: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
}

/// Fully resolved settings, defaults filled in. Echoed in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub design: Option<DesignConfig>,
    pub criterion: Option<u8>,
    pub precision_prior: Option<PrecisionPrior>,
    pub data: Option<TrialData>,
    pub analysis_precision: Option<AnalysisPrecision>,
    pub dunnett: Option<DunnettConfig>,
    pub boundary: Option<BoundarySettings>,
    pub mc: McConfig,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundarySettings {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Resolved {
    pub fn design(&self) -> Result<&DesignConfig, Error> {
        self.design
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing required section [design]".into()))
    }

    pub fn precision_prior(&self) -> Result<&PrecisionPrior, Error> {
        self.precision_prior
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing required section [precision_prior]".into()))
    }

    /// Criteria to run: the flag, else the config, else both.
    pub fn criteria(&self, flag: Option<u8>) -> Result<Vec<Criterion>, Error> {
        match flag.or(self.criterion) {
            Some(n) => Ok(vec![Criterion::from_number(n)?]),
            None => Ok(vec![Criterion::C1, Criterion::C2]),
        }
    }
}

pub fn load(path: &Path) -> Result<RawConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RawConfig, Error> {
    toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn precision_from(v: Option<f64>, sd: Option<f64>, what: &str) -> Result<Option<f64>, Error> {
    match (v, sd) {
        (Some(_), Some(_)) => Err(Error::InvalidConfig(format!("{what}: give either `v` or `sd`, not both"))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(sd)) if sd > 0.0 && sd.is_finite() => Ok(Some(1.0 / (sd * sd))),
        (None, Some(sd)) => Err(Error::InvalidConfig(format!("{what}.sd must be positive, got {sd}"))),
        (None, None) => Ok(None),
    }
}

fn arm_data(j: usize, a: &RawArm) -> Result<ArmData, Error> {
    match (a.ss, a.sd, a.se) {
        (Some(ss), None, None) => Ok(ArmData::new(a.n, a.mean, ss)),
        (None, Some(sd), None) => Ok(ArmData::from_sd(a.n, a.mean, sd)),
        (None, None, Some(se)) => Ok(ArmData::from_se(a.n, a.mean, se)),
        (None, None, None) if a.n == 0 => Ok(ArmData::new(0, 0.0, 0.0)),
        (None, None, None) if a.n == 1 => Ok(ArmData::new(1, a.mean, a.mean * a.mean)),
        _ => Err(Error::InvalidConfig(format!(
            "data.arm[{j}]: give exactly one of `ss`, `sd`, `se`"
        ))),
    }
}

fn allocation(v: &toml::Value) -> Result<Allocation, Error> {
    match v {
        toml::Value::String(s) if s == "equal" => Ok(Allocation::Equal),
        toml::Value::String(s) if s == "sqrt-k" => Ok(Allocation::SqrtK),
        toml::Value::Float(r) => Ok(Allocation::Ratio(*r)),
        toml::Value::Integer(r) => Ok(Allocation::Ratio(*r as f64)),
        other => Err(Error::InvalidConfig(format!(
            "dunnett.allocation must be \"equal\", \"sqrt-k\" or a number, got {other}"
        ))),
    }
}

/// Fill defaults and validate every section that is present.
pub fn resolve(raw: &RawConfig, seed: Option<u64>) -> Result<Resolved, Error> {
    let mut criterion = None;
    let design_v;
    let design = match &raw.design {
        None => {
            design_v = None;
            None
        }
        Some(d) => {
            design_v = precision_from(d.v, d.sd, "design")?;
            let precision = match (design_v, raw.precision_prior) {
                (Some(v), _) => PrecisionSpec::Known { v },
                (None, Some(p)) => PrecisionSpec::Gamma(p),
                (None, None) => {
                    return Err(Error::InvalidConfig(
                        "design: precision missing, give `v` or `sd` or a [precision_prior] section".into(),
                    ))
                }
            };
            if let Some(c) = d.criterion {
                Criterion::from_number(c)?;
                criterion = Some(c);
            }
            let priors = if d.prior.is_empty() {
                vec![ArmPrior::new(0.0, 0.0); d.k + 1]
            } else {
                d.prior.clone()
            };
            let config = DesignConfig {
                k: d.k,
                delta_star: d.delta_star,
                eta: d.eta,
                zeta: d.zeta,
                r: d.r,
                precision,
                priors,
            };
            config.validate()?;
            Some(config)
        }
    };
    if let Some(p) = &raw.precision_prior {
        p.validate()?;
    }
    let data = match &raw.data {
        None => None,
        Some(d) => {
            let arms = d.arm.iter().enumerate().map(|(j, a)| arm_data(j, a)).collect::<Result<Vec<_>, _>>()?;
            let data = if arms.is_empty() {
                let k = design.as_ref().map(|c| c.k).ok_or_else(|| {
                    Error::InvalidConfig("empty [data] needs a [design] section to know k".into())
                })?;
                TrialData::empty(k)
            } else {
                TrialData::new(arms)?
            };
            if let Some(c) = &design {
                if data.k() != c.k {
                    return Err(Error::InvalidConfig(format!(
                        "data has {} arms, design expects {}",
                        data.arms.len(),
                        c.k + 1
                    )));
                }
            }
            Some(data)
        }
    };
    let analysis_precision = raw.analysis.as_ref().and_then(|a| a.precision);
    let dunnett = match (&raw.dunnett, &design) {
        (None, _) => None,
        (Some(d), design) => {
            let sigma = match d.sigma {
                Some(s) => s,
                None => design_v.map(|v| 1.0 / v.sqrt()).ok_or_else(|| {
                    Error::InvalidConfig("dunnett.sigma missing and no known design precision to derive it".into())
                })?,
            };
            let design = design
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("[dunnett] needs a [design] section for k and delta_star".into()))?;
            let config = DunnettConfig {
                k: design.k,
                alpha: d.alpha.unwrap_or(0.05),
                power: d.power.unwrap_or(0.90),
                delta_star: design.delta_star,
                sigma,
                allocation: d.allocation.as_ref().map(allocation).transpose()?.unwrap_or(Allocation::SqrtK),
            };
            config.validate()?;
            Some(config)
        }
    };
    let boundary = match &design {
        Some(c) => {
            let b = raw.boundary.unwrap_or(RawBoundary {
                start: None,
                end: None,
                step: None,
            });
            let s = BoundarySettings {
                start: b.start.unwrap_or(-2.0 * c.delta_star),
                end: b.end.unwrap_or(2.0 * c.delta_star),
                step: b.step.unwrap_or(0.01 * c.delta_star),
            };
            if !(s.step > 0.0 && s.end > s.start) {
                return Err(Error::InvalidConfig(format!(
                    "boundary: need step > 0 and end > start, got {s:?}"
                )));
            }
            Some(s)
        }
        None => None,
    };
    let mut mc = McConfig::default();
    if let Some(m) = raw.mc {
        mc.seed = m.seed.unwrap_or(mc.seed);
        mc.n_draws = m.draws.unwrap_or(mc.n_draws);
        mc.antithetic = m.antithetic.unwrap_or(mc.antithetic);
    }
    if let Some(s) = seed {
        mc.seed = s;
    }
    mc.validate()?;
    Ok(Resolved {
        design,
        criterion,
        precision_prior: raw.precision_prior,
        data,
        analysis_precision,
        dunnett,
        boundary,
        mc,
    })
}
