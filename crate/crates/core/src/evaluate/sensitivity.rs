//! Bid size as a function of the per-constraint violation level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{analytical_bid, AnalyticalInputs, Bid};

use super::stats::{confidence_interval, mean};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourPoint {
    pub hour: u8,
    pub bid: Bid,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub alpha: f64,
    /// Sum of `b_up + b_down` over hours.
    pub total_bid_kw: f64,
    /// Share of the total bid that is downward; `None` for a zero total.
    pub down_fraction: Option<f64>,
    pub hours: Vec<HourPoint>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub points: Vec<SensitivityPoint>,
}

/// Solves the analytical bid of every hour at each alpha.
pub fn sensitivity_sweep(inputs: &[(u8, AnalyticalInputs)], alphas: &[f64]) -> Result<SensitivityCurve> {
    if alphas.is_empty() {
        return Err(Error::config("empty alpha grid"));
    }
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let hours = inputs
            .iter()
            .map(|(hour, inp)| {
                let a = analytical_bid(inp, alpha)?;
                Ok(HourPoint {
                    hour: *hour,
                    bid: a.bid,
                    feasible: a.feasible,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = hours.iter().map(|h| h.bid.total()).sum();
        let down: f64 = hours.iter().map(|h| h.bid.b_down_kw).sum();
        points.push(SensitivityPoint {
            alpha,
            total_bid_kw: total,
            down_fraction: (total > 0.0).then(|| down / total),
            hours,
        });
    }
    Ok(SensitivityCurve { points })
}

/// Mean total bid per alpha over runs with a 95% t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepBand {
    pub alpha: f64,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub down_fraction_mean: Option<f64>,
}

/// Aggregates per-run curves sharing one alpha grid. With a single run the
/// interval collapses to the mean.
pub fn aggregate_sweeps(curves: &[SensitivityCurve]) -> Result<Vec<SweepBand>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::data("no sensitivity curves to aggregate"))?;
    for c in curves {
        let same = c.points.len() == first.points.len()
            && c.points.iter().zip(&first.points).all(|(a, b)| a.alpha == b.alpha);
        if !same {
            return Err(Error::data("sensitivity curves use different alpha grids"));
        }
    }
    first
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let totals: Vec<f64> = curves.iter().map(|c| c.points[i].total_bid_kw).collect();
            let fracs: Vec<f64> = curves.iter().filter_map(|c| c.points[i].down_fraction).collect();
            let m = mean(&totals).unwrap_or(0.0);
            let (ci_lo, ci_hi) = if totals.len() >= 2 {
                confidence_interval(&totals, 0.95)?
            } else {
                (m, m)
            };
            Ok(SweepBand {
                alpha: p.alpha,
                mean: m,
                ci_lo,
                ci_hi,
                down_fraction_mean: mean(&fracs),
            })
        })
        .collect()
}
