//! Repeated in-sample / out-of-sample experiment.
//!
//! For every run and hour, a fixed-size in-sample set of days is drawn
//! without replacement. Both bidding methods see the same in-sample set and
//! are validated on its complement.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flex::{FlexTriple, HourlyFlexSample};
use crate::gof::{ks_test, KsResult};
use crate::seed;
use crate::solvers::{
    analytical_bid, scenario_bid, AnalyticalBid, AnalyticalInputs, ScenarioBid, ScenarioSet,
    TailModel,
};
use crate::tail::{fit_tail, Flexibility, GammaGrid, TailFitOutcome};

use super::{count_violations, RunSummary, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytical,
    Scenario,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Analytical => "analytical",
            Method::Scenario => "scenario",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytical" => Ok(Method::Analytical),
            "scenario" => Ok(Method::Scenario),
            other => Err(Error::config(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub eps: f64,
    pub alpha: f64,
    pub n_runs: usize,
    pub in_sample_size: usize,
    pub seed: u64,
    pub grid: GammaGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            alpha: 0.1 / 3.0,
            n_runs: 10,
            in_sample_size: 216,
            seed: 7,
            grid: GammaGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::config(format!("eps {} outside (0, 1)", self.eps)));
        }
        if !(self.alpha > 0.0 && self.alpha <= self.eps) {
            return Err(Error::config(format!(
                "alpha {} outside (0, eps={}]",
                self.alpha, self.eps
            )));
        }
        if self.n_runs == 0 {
            return Err(Error::config("n_runs must be positive"));
        }
        if self.in_sample_size < 2 {
            return Err(Error::config("in_sample_size must be at least 2"));
        }
        self.grid.validate()
    }
}

/// Indices into one hour's sample vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub in_sample: Vec<usize>,
    pub out_of_sample: Vec<usize>,
}

/// Draws `in_size` of `n` indices without replacement from the stream of
/// `(seed, run, hour)`. Both index lists are ascending.
pub fn draw_split(n: usize, in_size: usize, master_seed: u64, run: usize, hour: u8) -> Result<Split> {
    if in_size >= n {
        return Err(Error::data(format!(
            "in-sample size {in_size} must be smaller than the {n} samples of hour {hour}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(master_seed, &[run as u64, hour as u64]));
    let mut in_sample = rand::seq::index::sample(&mut rng, n, in_size).into_vec();
    in_sample.sort_unstable();
    let mut member = vec![false; n];
    in_sample.iter().for_each(|&i| member[i] = true);
    let out_of_sample = (0..n).filter(|&i| !member[i]).collect();
    Ok(Split {
        in_sample,
        out_of_sample,
    })
}

/// Short digest of a list of day indices.
pub fn split_hash(days: &[i64]) -> String {
    let mut h = Sha256::new();
    for d in days {
        h.update(d.to_le_bytes());
    }
    h.finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Samples grouped by hour of day, each group sorted by day.
pub fn samples_by_hour(samples: &[HourlyFlexSample]) -> BTreeMap<u8, Vec<HourlyFlexSample>> {
    let mut out: BTreeMap<u8, Vec<HourlyFlexSample>> = BTreeMap::new();
    for s in samples {
        out.entry(s.hour).or_default().push(*s);
    }
    out.values_mut().for_each(|v| v.sort_by_key(|s| s.day));
    out
}

/// Everything computed from one hour's in-sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourSolution {
    /// Up, down, e20.
    pub tails: [TailFitOutcome; 3],
    pub ks: [Option<KsResult>; 3],
    pub inputs: AnalyticalInputs,
    pub analytical: AnalyticalBid,
    pub scenario: ScenarioBid,
}

fn component(s: &HourlyFlexSample, f: Flexibility) -> f64 {
    match f {
        Flexibility::Up => s.r_up_kw,
        Flexibility::Down => s.r_down_kw,
        Flexibility::E20 => s.r_e20_kw,
    }
}

/// Fits the three tails, tests them, and solves both methods.
pub fn solve_hour(in_sample: &[HourlyFlexSample], cfg: &ExperimentConfig) -> Result<HourSolution> {
    let fit = |f: Flexibility| -> Result<TailFitOutcome> {
        let values: Vec<f64> = in_sample.iter().map(|s| component(s, f)).collect();
        fit_tail(&values, cfg.eps, &cfg.grid)
    };
    let tails = [fit(Flexibility::Up)?, fit(Flexibility::Down)?, fit(Flexibility::E20)?];
    let ks = tails.clone().map(|t| {
        t.fit
            .and_then(|f| ks_test(&t.tail_x, |x| f.params.cdf(x)).ok())
    });
    let model = |t: &TailFitOutcome| TailModel::from_fit(t.threshold_kw, t.fit.as_ref());
    let inputs = AnalyticalInputs {
        up: model(&tails[0]),
        down: model(&tails[1]),
        e20: model(&tails[2]),
        eps: cfg.eps,
    };
    let analytical = analytical_bid(&inputs, cfg.alpha)?;
    let set = ScenarioSet::new(in_sample.iter().map(|s| s.triple()).collect(), cfg.eps)?;
    let scenario = scenario_bid(&set)?;
    Ok(HourSolution {
        tails,
        ks,
        inputs,
        analytical,
        scenario,
    })
}

/// One (run, hour) work unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourRun {
    pub run: usize,
    pub hour: u8,
    pub in_sample_days: Vec<i64>,
    pub split_hash: String,
    pub solution: HourSolution,
    pub validation_analytical: ValidationReport,
    pub validation_scenario: ValidationReport,
}

impl HourRun {
    pub fn validation(&self, m: Method) -> &ValidationReport {
        match m {
            Method::Analytical => &self.validation_analytical,
            Method::Scenario => &self.validation_scenario,
        }
    }

    pub fn bid(&self, m: Method) -> crate::solvers::Bid {
        match m {
            Method::Analytical => self.solution.analytical.bid,
            Method::Scenario => self.solution.scenario.bid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub runs: Vec<HourRun>,
    pub summary_analytical: RunSummary,
    pub summary_scenario: RunSummary,
}

impl ExperimentResult {
    pub fn summary(&self, m: Method) -> &RunSummary {
        match m {
            Method::Analytical => &self.summary_analytical,
            Method::Scenario => &self.summary_scenario,
        }
    }
}

fn pick(samples: &[HourlyFlexSample], idx: &[usize]) -> Vec<HourlyFlexSample> {
    idx.iter().map(|&i| samples[i]).collect()
}

/// Runs the multi-run protocol over every hour present in `samples`.
pub fn run_experiment(samples: &[HourlyFlexSample], cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let by_hour = samples_by_hour(samples);
    if by_hour.is_empty() {
        return Err(Error::data("no hourly samples"));
    }
    let mut runs = Vec::new();
    for run in 0..cfg.n_runs {
        for (&hour, hs) in &by_hour {
            let split = draw_split(hs.len(), cfg.in_sample_size, cfg.seed, run, hour)?;
            let ins = pick(hs, &split.in_sample);
            let oos: Vec<FlexTriple> = pick(hs, &split.out_of_sample)
                .iter()
                .map(|s| s.triple())
                .collect();
            let solution = solve_hour(&ins, cfg)?;
            let days: Vec<i64> = ins.iter().map(|s| s.day).collect();
            runs.push(HourRun {
                run,
                hour,
                split_hash: split_hash(&days),
                in_sample_days: days,
                validation_analytical: count_violations(&solution.analytical.bid, &oos)?,
                validation_scenario: count_violations(&solution.scenario.bid, &oos)?,
                solution,
            });
        }
    }
    let summarize = |m: Method| {
        RunSummary::from_entries(
            runs.iter()
                .map(|r| (r.hour, r.bid(m), r.validation(m).joint_rate)),
        )
    };
    Ok(ExperimentResult {
        config: *cfg,
        summary_analytical: summarize(Method::Analytical),
        summary_scenario: summarize(Method::Scenario),
        runs,
    })
}
