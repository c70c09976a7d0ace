//! Goodness-of-fit checks for tail fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tail::WeibullTailFit;

/// Significance level below which a fit is rejected.
pub const KS_ALPHA: f64 = 0.05;

const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_n: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsResult {
    pub fn accepted(&self) -> bool {
        self.p_value > KS_ALPHA
    }
}

/// Right-continuous empirical CDF: fraction of samples `<= x`.
pub fn ecdf(samples: &[f64], x: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::data("ecdf of an empty sample"));
    }
    Ok(samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64)
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)`.
///
/// The alternating series converges slowly for small `lambda`; there the
/// equivalent theta-function form `1 - sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))`
/// is summed instead.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut sum = 0.0;
        for k in 1.. {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < SERIES_TOL || k > 100 {
                break;
            }
        }
        return (1.0 - (std::f64::consts::TAU).sqrt() / lambda * sum).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < SERIES_TOL {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the small-sample correction
/// `lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) d_n`.
pub fn ks_p_value(d_n: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d_n)
}

/// Statistic only: `max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)`.
pub fn ks_statistic(samples: &[f64], reference_cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::data("KS test on an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = reference_cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(d.clamp(0.0, 1.0))
}

/// One-sample Kolmogorov-Smirnov test against a continuous reference CDF.
pub fn ks_test(samples: &[f64], reference_cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let d_n = ks_statistic(samples, reference_cdf)?;
    Ok(KsResult {
        d_n,
        p_value: ks_p_value(d_n, samples.len()),
        n: samples.len(),
    })
}

/// Indices of `fits` ordered by ascending NLL; ties keep input order.
pub fn nll_compare(fits: &[WeibullTailFit]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by(|&a, &b| fits[a].nll.total_cmp(&fits[b].nll));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail::{fit_weibull_mle, profile_loglik, GammaGrid, WeibullParams};
    use proptest::prelude::*;

    fn uniform(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn ecdf_examples() {
        assert!((ecdf(&[1.0, 2.0, 3.0], 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ecdf(&[1.0, 2.0, 3.0], 0.5).unwrap(), 0.0);
        assert!((ecdf(&[1.0, 1.0, 2.0], 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(ecdf(&[], 1.0).is_err());
    }

    /// Oracle: supremum of |F_n - F| evaluated on both sides of every jump.
    fn brute_d(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
        let n = samples.len() as f64;
        samples
            .iter()
            .map(|&x| {
                let right = samples.iter().filter(|&&s| s <= x).count() as f64 / n;
                let left = samples.iter().filter(|&&s| s < x).count() as f64 / n;
                (right - cdf(x)).abs().max((left - cdf(x)).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn ks_hand_example() {
        let s = [0.1, 0.5, 0.9];
        let r = ks_test(&s, uniform).unwrap();
        assert!((r.d_n - 0.2333).abs() < 1e-4);
        assert!((r.d_n - brute_d(&s, uniform)).abs() < 1e-15);
        assert_eq!(r.n, 3);
    }

    #[test]
    fn ks_at_midpoint_quantiles() {
        let n = 17;
        let s: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let r = ks_test(&s, uniform).unwrap();
        assert!((r.d_n - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn ks_empty_rejected() {
        assert!(ks_test(&[], uniform).is_err());
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // both representations of Q at the switch point
        let lambda: f64 = 1.18;
        let mut alt = 0.0;
        for k in 1..=200 {
            let kf = k as f64;
            let t = (-2.0 * kf * kf * lambda * lambda).exp();
            alt += if k % 2 == 1 { t } else { -t };
        }
        assert!((kolmogorov_q(lambda - 1e-12) - 2.0 * alt).abs() < 1e-10);
        assert!((kolmogorov_q(lambda) - 2.0 * alt).abs() < 1e-12);
        // tabulated: Q(1.36) ~= 0.0494, Q(1.63) ~= 0.0098
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 2e-4);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 2e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn nll_ordering() {
        let mk = |nll| WeibullTailFit {
            threshold_kw: 0.0,
            params: WeibullParams::new(1.0, 1.0).unwrap(),
            n_tail: 2,
            nll,
            at_boundary: false,
        };
        assert_eq!(nll_compare(&[mk(5.0), mk(3.0)]), vec![1, 0]);
        assert_eq!(nll_compare(&[mk(2.0), mk(2.0), mk(1.0)]), vec![2, 0, 1]);
    }

    #[test]
    fn best_gamma_beats_every_grid_point() {
        let x = [0.3, 1.2, 0.05, 2.2, 0.9, 0.41, 1.7, 0.12];
        let grid = GammaGrid::default();
        let fit = fit_weibull_mle(&x, &grid).unwrap();
        for g in grid.points() {
            assert!(fit.nll <= -profile_loglik(&x, g).unwrap() + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn d_matches_brute_force(mut s in proptest::collection::vec(0.0f64..1.0, 1..40)) {
            s.iter_mut().for_each(|v| *v = (*v * 1e6).round() / 1e6);
            let d = ks_statistic(&s, uniform).unwrap();
            prop_assert!((d - brute_d(&s, uniform)).abs() < 1e-12);
        }

        #[test]
        fn d_invariant_under_monotone_transform(s in proptest::collection::vec(0.001f64..0.999, 2..30)) {
            // x -> x^3 + x applied to samples and to the reference
            let t = |x: f64| x.powi(3) + x;
            let inv = |y: f64| {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if t(mid) < y { lo = mid } else { hi = mid }
                }
                0.5 * (lo + hi)
            };
            let transformed: Vec<f64> = s.iter().map(|&x| t(x)).collect();
            let d1 = ks_statistic(&s, uniform).unwrap();
            let d2 = ks_statistic(&transformed, |y| uniform(inv(y))).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-9);
        }

        #[test]
        fn p_value_decreasing_in_d(n in 2usize..300, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(ks_p_value(lo, n) >= ks_p_value(hi, n));
        }
    }
}
