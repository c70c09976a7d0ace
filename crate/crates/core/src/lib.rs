//! Reserve bidding for EV fleets under a P90 reliability requirement.
//!
//! The crate covers the whole chain from per-minute charge-box data to
//! hourly FCR-D capacity bids:
//!
//! - [`flex`]: session and state-of-charge reconstruction, per-minute
//!   up/down/energy flexibility and the hourly minimum fleet samples.
//! - [`synth`]: a seeded synthetic fleet generator producing minute records.
//! - [`tail`]: lower-tail extraction and profile-likelihood Weibull fitting.
//! - [`gof`]: empirical CDF, Kolmogorov-Smirnov test, NLL ranking.
//! - [`solvers`]: the closed-form Bonferroni/Weibull bid and the exact
//!   scenario (big-M) benchmark.
//! - [`evaluate`]: out-of-sample validation, the multi-run experiment,
//!   revenue, confidence intervals, quantile resampling, alpha sweeps.
//! - [`io`]: CSV/JSON interchange formats and key=value config files.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod flex;
pub mod gof;
pub mod io;
pub mod seed;
pub mod solvers;
pub mod synth;
pub mod tail;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use evaluate::{
    confidence_interval, count_violations, quantile_cv, revenue, run_experiment,
    sensitivity_sweep, t_quantile, CvReport, ExperimentConfig, ExperimentResult, PriceSeries,
    RunSummary, SensitivityCurve, ValidationReport,
};
pub use flex::{
    aggregate_and_hourly_min, minute_flexibility, reconstruct_profiles, ChargingSession,
    EvProfile, EvSeries, FlexTriple, HourlyFlexSample, MinuteRecord,
};
pub use gof::{ecdf, ks_test, nll_compare, KsResult};
pub use solvers::{
    analytical_bid, bid_cap, required_sample_size, scenario_bid, AnalyticalBid,
    AnalyticalInputs, Bid, ScenarioBid, ScenarioSet,
};
pub use synth::{generate_synthetic_fleet, SynthFleetConfig};
pub use tail::{
    empirical_quantile, extract_tail, fit_tail, fit_weibull_mle, kappa_hat, profile_loglik,
    weibull_cdf, weibull_survival, Flexibility, GammaGrid, TailFitOutcome, WeibullFit,
    WeibullParams, WeibullTailFit,
};
