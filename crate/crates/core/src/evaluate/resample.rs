//! Sampling variability of the empirical quantile.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flex::HourlyFlexSample;
use crate::seed;
use crate::tail::{empirical_quantile, Flexibility};

use super::experiment::samples_by_hour;
use super::stats::{mean, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileCv {
    pub mean: f64,
    pub sd: f64,
    /// `sd / |mean|`; `None` when the mean is zero.
    pub cv: Option<f64>,
}

/// Draws `n_reps` subsets of size `draw_size` without replacement and
/// reports the spread of their ε-quantiles.
pub fn quantile_cv(pool: &[f64], draw_size: usize, n_reps: usize, eps: f64, seed: u64) -> Result<QuantileCv> {
    if draw_size == 0 || draw_size > pool.len() {
        return Err(Error::data(format!(
            "draw size {draw_size} must lie in 1..={}",
            pool.len()
        )));
    }
    if n_reps < 2 {
        return Err(Error::config("quantile CV needs at least 2 repetitions"));
    }
    let mut sorted = pool.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = Vec::with_capacity(draw_size);
    let mut qs = Vec::with_capacity(n_reps);
    for _ in 0..n_reps {
        draw.clear();
        draw.extend(
            rand::seq::index::sample(&mut rng, sorted.len(), draw_size)
                .into_iter()
                .map(|i| sorted[i]),
        );
        qs.push(empirical_quantile(&draw, eps)?);
    }
    let m = mean(&qs).unwrap_or(0.0);
    let sd = sample_sd(&qs).unwrap_or(0.0);
    Ok(QuantileCv {
        mean: m,
        sd,
        cv: (m != 0.0).then(|| sd / m.abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub hour: u8,
    pub flexibility: Flexibility,
    #[serde(flatten)]
    pub stats: QuantileCv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CvReport {
    pub draw_size: usize,
    pub n_reps: usize,
    pub entries: Vec<CvEntry>,
}

/// Quantile CV for every hour and flexibility; each (hour, flexibility)
/// pair draws from its own seeded stream.
pub fn quantile_cv_report(
    samples: &[HourlyFlexSample],
    draw_size: usize,
    n_reps: usize,
    eps: f64,
    master_seed: u64,
) -> Result<CvReport> {
    let mut entries = Vec::new();
    for (hour, hs) in samples_by_hour(samples) {
        for f in Flexibility::ALL {
            let pool: Vec<f64> = hs
                .iter()
                .map(|s| match f {
                    Flexibility::Up => s.r_up_kw,
                    Flexibility::Down => s.r_down_kw,
                    Flexibility::E20 => s.r_e20_kw,
                })
                .collect();
            let s = seed::derive(master_seed, &[u64::MAX, hour as u64, f.index() as u64]);
            entries.push(CvEntry {
                hour,
                flexibility: f,
                stats: quantile_cv(&pool, draw_size, n_reps, eps, s)?,
            });
        }
    }
    Ok(CvReport {
        draw_size,
        n_reps,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_pool_has_zero_cv() {
        let r = quantile_cv(&[4.0; 50], 20, 100, 0.1, 1).unwrap();
        assert_eq!((r.mean, r.sd, r.cv), (4.0, 0.0, Some(0.0)));
    }

    #[test]
    fn full_pool_draw_has_zero_cv() {
        let pool: Vec<f64> = (0..30).map(|i| (i * 7 % 30) as f64 + 1.0).collect();
        let r = quantile_cv(&pool, 30, 50, 0.1, 2).unwrap();
        let q = empirical_quantile(&pool, 0.1).unwrap();
        assert!(r.sd <= 1e-12 * q);
        assert!((r.mean - q).abs() <= 1e-12 * q);
    }

    #[test]
    fn deterministic_and_order_free() {
        let pool: Vec<f64> = (0..100).map(|i| ((i * 37) % 101) as f64).collect();
        let mut rev = pool.clone();
        rev.reverse();
        let a = quantile_cv(&pool, 40, 300, 0.1, 9).unwrap();
        assert_eq!(a, quantile_cv(&pool, 40, 300, 0.1, 9).unwrap());
        assert_eq!(a, quantile_cv(&rev, 40, 300, 0.1, 9).unwrap());
        assert!(a.cv.unwrap() > 0.0);
    }

    #[test]
    fn oversized_draw_rejected() {
        assert!(quantile_cv(&[1.0, 2.0], 3, 10, 0.1, 0).is_err());
    }

    #[test]
    fn zero_mean_has_no_cv() {
        assert_eq!(quantile_cv(&[0.0; 10], 5, 10, 0.1, 0).unwrap().cv, None);
    }
}
