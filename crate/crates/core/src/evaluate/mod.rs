//! Out-of-sample validation and experiment bookkeeping.

mod experiment;
mod resample;
mod sensitivity;
pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flex::FlexTriple;
use crate::solvers::{Bid, LER_SHARE};

pub use experiment::{
    draw_split, run_experiment, samples_by_hour, solve_hour, split_hash, ExperimentConfig,
    ExperimentResult, HourRun, HourSolution, Method, Split,
};
pub use resample::{quantile_cv, quantile_cv_report, CvEntry, CvReport, QuantileCv};
pub use sensitivity::{
    aggregate_sweeps, sensitivity_sweep, HourPoint, SensitivityCurve, SensitivityPoint,
    SweepBand,
};
pub use stats::{confidence_interval, t_quantile, MeanSd};

/// Violation counts of one bid against held-out realisations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_oos: usize,
    pub violations_up: usize,
    pub violations_down: usize,
    pub violations_e20: usize,
    /// Realisations violating at least one constraint.
    pub violations_joint: usize,
    pub joint_rate: f64,
}

/// Counts strict violations of each constraint; a realisation violating
/// several constraints counts once towards the joint total.
pub fn count_violations(bid: &Bid, oos: &[FlexTriple]) -> Result<ValidationReport> {
    if oos.is_empty() {
        return Err(Error::data("no out-of-sample realisations"));
    }
    let mut r = ValidationReport {
        n_oos: oos.len(),
        ..Default::default()
    };
    let up_need = LER_SHARE * bid.b_down_kw + bid.b_up_kw;
    for s in oos {
        let up = up_need > s.up;
        let down = bid.b_down_kw > s.down;
        let e20 = bid.b_down_kw > s.e20;
        r.violations_up += up as usize;
        r.violations_down += down as usize;
        r.violations_e20 += e20 as usize;
        r.violations_joint += (up || down || e20) as usize;
    }
    r.joint_rate = r.violations_joint as f64 / r.n_oos as f64;
    Ok(r)
}

/// Capacity prices in EUR per kW per hour, keyed by (day, hour).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceSeries {
    pub prices: BTreeMap<(i64, u8), (f64, f64)>,
}

impl PriceSeries {
    pub fn new(rows: impl IntoIterator<Item = (i64, u8, f64, f64)>) -> Result<Self> {
        let mut prices = BTreeMap::new();
        for (day, hour, up, down) in rows {
            if !(up >= 0.0 && down >= 0.0 && up.is_finite() && down.is_finite()) {
                return Err(Error::data(format!(
                    "negative or non-finite price at day {day} hour {hour}"
                )));
            }
            if hour > 23 {
                return Err(Error::data(format!("hour {hour} out of range")));
            }
            if prices.insert((day, hour), (up, down)).is_some() {
                return Err(Error::data(format!("duplicate price for day {day} hour {hour}")));
            }
        }
        Ok(Self { prices })
    }
}

/// `sum_h b_up pi_up + b_down pi_down` over the bid grid.
pub fn revenue(bids: &BTreeMap<(i64, u8), Bid>, prices: &PriceSeries) -> Result<f64> {
    let missing: Vec<_> = bids
        .keys()
        .filter(|k| !prices.prices.contains_key(k))
        .collect();
    if !missing.is_empty() {
        let shown: Vec<String> = missing
            .iter()
            .take(10)
            .map(|(d, h)| format!("(day {d}, hour {h})"))
            .collect();
        return Err(Error::data(format!(
            "{} bid slots have no price: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > 10 { ", ..." } else { "" }
        )));
    }
    Ok(bids
        .iter()
        .map(|(k, b)| {
            let (pu, pd) = prices.prices[k];
            b.b_up_kw * pu + b.b_down_kw * pd
        })
        .sum())
}

/// Repeats one bid per hour of day over every listed day.
pub fn expand_daily_bids(by_hour: &BTreeMap<u8, Bid>, days: &[i64]) -> BTreeMap<(i64, u8), Bid> {
    days.iter()
        .flat_map(|&d| by_hour.iter().map(move |(&h, &b)| ((d, h), b)))
        .collect()
}

/// Per-hour statistics over runs of one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourSummary {
    pub hour: u8,
    pub b_up: MeanSd,
    pub b_down: MeanSd,
    pub joint_rate: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_runs: usize,
    pub hours: Vec<HourSummary>,
}

impl RunSummary {
    /// Aggregates `(hour, bid, joint_rate)` entries, one per run and hour.
    pub fn from_entries(entries: impl IntoIterator<Item = (u8, Bid, f64)>) -> Self {
        let mut by_hour: BTreeMap<u8, Vec<(Bid, f64)>> = BTreeMap::new();
        for (h, b, r) in entries {
            by_hour.entry(h).or_default().push((b, r));
        }
        let n_runs = by_hour.values().map(Vec::len).max().unwrap_or(0);
        let hours = by_hour
            .into_iter()
            .filter_map(|(hour, v)| {
                let ups: Vec<f64> = v.iter().map(|(b, _)| b.b_up_kw).collect();
                let downs: Vec<f64> = v.iter().map(|(b, _)| b.b_down_kw).collect();
                let rates: Vec<f64> = v.iter().map(|(_, r)| *r).collect();
                Some(HourSummary {
                    hour,
                    b_up: MeanSd::of(&ups)?,
                    b_down: MeanSd::of(&downs)?,
                    joint_rate: MeanSd::of(&rates)?,
                })
            })
            .collect();
        Self { n_runs, hours }
    }

    pub fn hour(&self, hour: u8) -> Option<&HourSummary> {
        self.hours.iter().find(|h| h.hour == hour)
    }

    /// Mean bid of each hour.
    pub fn mean_bids(&self) -> BTreeMap<u8, Bid> {
        self.hours
            .iter()
            .map(|h| {
                (
                    h.hour,
                    Bid {
                        b_up_kw: h.b_up.mean,
                        b_down_kw: h.b_down.mean,
                    },
                )
            })
            .collect()
    }
}
