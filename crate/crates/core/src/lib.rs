//! Bayesian sample-size determination and posterior decision analysis for
//! exploratory trials that compare several experimental arms with one control.
//!
//! Arm `0` is always the control; arms `1..=k` are the experimental
//! treatments. Responses are normal with a common precision `v` that is either
//! known at design time ([`design_known`]) or carries a gamma prior
//! ([`design_unknown`]). [`posterior`] performs the end-of-trial analysis and
//! [`dunnett`] provides the frequentist many-to-one comparator. [`mc_oracle`]
//! holds seeded Monte Carlo estimators used to cross-check the numerical
//! integrals.

pub mod case_study;
pub mod design_known;
pub mod design_unknown;
pub mod distributions;
pub mod dunnett;
mod error;
pub mod mc_oracle;
pub mod posterior;
pub mod quadrature;
pub mod roots;

pub use design_known::{ArmPrior, Criterion, DesignBasis, DesignConfig, DesignResult, PrecisionSpec};
pub use design_unknown::{GammaUpdate, PrecisionPrior};
pub use distributions::EquicorrSpec;
pub use error::{Error, Result};
pub use posterior::{Decision, PosteriorSummary, PrecisionModel, TrialData};
