//! Sample statistics and Student-t intervals.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> Option<f64> {
    if x.is_empty() {
        None
    } else {
        Some(x.iter().sum::<f64>() / x.len() as f64)
    }
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_sd(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let m = mean(x)?;
    let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (x.len() - 1) as f64).sqrt())
}

/// Mean and (for two or more values) sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(x: &[f64]) -> Option<Self> {
        Some(Self {
            mean: mean(x)?,
            sd: sample_sd(x),
        })
    }
}

/// Upper tail probability `P(T > t)` of Student's t with `df` degrees of
/// freedom, for `t >= 0`.
fn upper_tail(t: f64, df: f64) -> f64 {
    0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

const T_ABS_TOL: f64 = 1e-12;

/// Critical value `t` with `P(T > t) = tail_prob`.
///
/// Inverts the regularised incomplete beta representation of the t
/// distribution by bisection.
pub fn t_quantile(tail_prob: f64, df: f64) -> Result<f64> {
    if !(df >= 1.0 && df.is_finite()) {
        return Err(Error::config(format!("degrees of freedom {df} must be >= 1")));
    }
    if !(tail_prob > 0.0 && tail_prob < 1.0) {
        return Err(Error::config(format!("tail probability {tail_prob} outside (0, 1)")));
    }
    if tail_prob > 0.5 {
        return Ok(-t_quantile(1.0 - tail_prob, df)?);
    }
    if tail_prob == 0.5 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while upper_tail(hi, df) > tail_prob {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::numerical("t quantile bracket overflow"));
        }
    }
    let mut lo = 0.0;
    while hi - lo > T_ABS_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if upper_tail(mid, df) > tail_prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-sided t interval for the mean at confidence `level`.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::data(format!(
            "confidence interval needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("confidence level {level} outside (0, 1)")));
    }
    let n = samples.len() as f64;
    let m = mean(samples).unwrap_or(0.0);
    let s = sample_sd(samples).unwrap_or(0.0);
    let t = t_quantile((1.0 - level) / 2.0, n - 1.0)?;
    let half = t * s / n.sqrt();
    Ok((m - half, m + half))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_t_values() {
        // standard two-sided 95% table entries
        for (df, t) in [(1.0, 12.7062), (2.0, 4.3027), (5.0, 2.5706), (9.0, 2.2622), (30.0, 2.0423)] {
            assert!((t_quantile(0.025, df).unwrap() - t).abs() < 1e-4, "df={df}");
        }
        assert!((t_quantile(0.005, 9.0).unwrap() - 3.2498).abs() < 1e-4);
        assert!((t_quantile(0.975, 9.0).unwrap() + 2.2622).abs() < 1e-4);
    }

    #[test]
    fn cauchy_case_is_exact() {
        // df = 1 is Cauchy: t = tan(pi (0.5 - p))
        for p in [0.3, 0.1, 0.025, 0.001] {
            let exact = (std::f64::consts::PI * (0.5 - p)).tan();
            assert!((t_quantile(p, 1.0).unwrap() - exact).abs() < 1e-9 * exact.max(1.0));
        }
    }

    #[test]
    fn interval_of_one_to_ten() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((sample_sd(&x).unwrap() - 3.0277).abs() < 1e-4);
        let (lo, hi) = confidence_interval(&x, 0.95).unwrap();
        assert!((lo - 3.334).abs() < 1e-3 && (hi - 7.666).abs() < 1e-3);
    }

    #[test]
    fn constant_samples_give_point_interval() {
        assert_eq!(confidence_interval(&[2.5; 6], 0.95).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn singleton_rejected() {
        assert!(confidence_interval(&[1.0], 0.95).is_err());
        assert!(t_quantile(0.025, 0.5).is_err());
    }
}
