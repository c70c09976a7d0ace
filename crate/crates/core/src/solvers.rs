//! Hourly FCR-D bid computation.
//!
//! Both methods maximise `b_up + b_down` subject to the LER coupling
//! `0.2 b_down + b_up <= R_up`, `b_down <= R_down` and `b_down <= R_e20`.
//!
//! The analytical method replaces each random right-hand side by a
//! Weibull-tail quantile at level `alpha` (Bonferroni split of ε). The
//! scenario method keeps every in-sample realisation as a constraint and
//! lets at most `floor(n ε)` of them be violated; with two continuous
//! decision variables that mixed-integer program is solved exactly by
//! enumerating the binding downward level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flex::FlexTriple;
use crate::tail::{Flexibility, WeibullParams, WeibullTailFit};

/// Share of the downward bid that must be held in the upward direction.
pub const LER_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bid {
    pub b_up_kw: f64,
    pub b_down_kw: f64,
}

impl Bid {
    pub const ZERO: Bid = Bid {
        b_up_kw: 0.0,
        b_down_kw: 0.0,
    };

    pub fn total(&self) -> f64 {
        self.b_up_kw + self.b_down_kw
    }
}

/// Right-hand side for one constraint:
/// `r_eps - (-(1/kappa) log(alpha/eps))^(1/gamma)`.
pub fn bid_cap(r_eps: f64, params: &WeibullParams, alpha: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config(format!("eps {eps} outside (0, 1)")));
    }
    if !(alpha > 0.0 && alpha <= eps) {
        return Err(Error::config(format!(
            "alpha {alpha} outside (0, eps={eps}]; the tail model only covers probabilities up to eps"
        )));
    }
    let exceedance = -(alpha / eps).ln() / params.kappa;
    let cap = r_eps - exceedance.max(0.0).powf(1.0 / params.gamma);
    if !cap.is_finite() {
        return Err(Error::numerical(format!(
            "bid cap not finite for r_eps={r_eps} kappa={} gamma={}",
            params.kappa, params.gamma
        )));
    }
    Ok(cap)
}

/// Threshold and tail parameters of one flexibility. `params` is `None`
/// when the tail could not be fitted; such a constraint caps the bid at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub threshold_kw: f64,
    pub params: Option<WeibullParams>,
}

impl TailModel {
    pub fn from_fit(threshold_kw: f64, fit: Option<&WeibullTailFit>) -> Self {
        Self {
            threshold_kw,
            params: fit.map(|f| f.params),
        }
    }

    fn cap(&self, alpha: f64, eps: f64) -> Result<f64> {
        match &self.params {
            Some(p) => bid_cap(self.threshold_kw, p, alpha, eps),
            None => Ok(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalInputs {
    pub up: TailModel,
    pub down: TailModel,
    pub e20: TailModel,
    pub eps: f64,
}

impl AnalyticalInputs {
    pub fn model(&self, f: Flexibility) -> &TailModel {
        match f {
            Flexibility::Up => &self.up,
            Flexibility::Down => &self.down,
            Flexibility::E20 => &self.e20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalBid {
    pub bid: Bid,
    /// Upward cap `A` of `0.2 b_down + b_up <= A`.
    pub cap_up: f64,
    /// Downward cap `B = min(cap_down, cap_e20)`.
    pub cap_down: f64,
    /// `A > 0`; with `A <= 0` no bid satisfies the upward constraint.
    pub feasible: bool,
}

/// Optimum of `max b_up + b_down` s.t. `0.2 b_down + b_up <= A`, `b_down <= B`,
/// `b >= 0`, with negative caps clamped to a zero bid.
///
/// Along the coupling constraint the objective is `A + 0.8 b_down`, so the
/// optimum takes the largest admissible `b_down = min(B, 5A)`.
///
/// The result satisfies the constraints in floating point, so a binding
/// scenario is never counted as violated by a strict comparison.
pub fn solve_two_caps(cap_up: f64, cap_down: f64) -> Bid {
    if cap_up <= 0.0 {
        return Bid::ZERO;
    }
    let mut b_down = cap_down.min(cap_up / LER_SHARE).max(0.0);
    while LER_SHARE * b_down > cap_up {
        b_down = b_down.next_down();
    }
    let mut b_up = (cap_up - LER_SHARE * b_down).max(0.0);
    while b_up > 0.0 && LER_SHARE * b_down + b_up > cap_up {
        b_up = b_up.next_down();
    }
    Bid { b_up_kw: b_up, b_down_kw: b_down }
}

/// Closed-form bid from fitted tails at per-constraint level `alpha`
/// (`eps / 3` is the Bonferroni split).
pub fn analytical_bid(inputs: &AnalyticalInputs, alpha: f64) -> Result<AnalyticalBid> {
    let eps = inputs.eps;
    let a = inputs.up.cap(alpha, eps)?;
    let b = inputs.down.cap(alpha, eps)?.min(inputs.e20.cap(alpha, eps)?);
    Ok(AnalyticalBid {
        bid: solve_two_caps(a, b),
        cap_up: a,
        cap_down: b,
        feasible: a > 0.0,
    })
}

/// In-sample realisations for the scenario method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<FlexTriple>,
    pub eps: f64,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<FlexTriple>, eps: f64) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::data("empty scenario set"));
        }
        if let Some(s) = scenarios
            .iter()
            .find(|s| !(s.up >= 0.0 && s.down >= 0.0 && s.e20 >= 0.0))
        {
            return Err(Error::data(format!("scenario {s:?} has a negative component")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::config(format!("eps {eps} outside (0, 1)")));
        }
        Ok(Self { scenarios, eps })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Number of scenarios that may be violated, `floor(n eps)`.
    pub fn violation_budget(&self) -> usize {
        (self.len() as f64 * self.eps + 1e-9).floor() as usize
    }

    /// Big-M constants: the largest realisation per constraint.
    pub fn big_m(&self) -> [f64; 3] {
        let max = |f: fn(&FlexTriple) -> f64| self.scenarios.iter().map(f).fold(0.0, f64::max);
        [max(|s| s.up), max(|s| s.down), max(|s| s.e20)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBid {
    pub bid: Bid,
    pub objective: f64,
    /// Indices of relaxed scenarios (`y_i = 1`), ascending.
    pub violated: Vec<usize>,
}

fn better(obj: f64, down: f64, best: &Option<(f64, f64, Vec<usize>, Bid)>) -> bool {
    match best {
        None => true,
        Some((bo, bd, _, _)) => {
            let tol = 1e-12 * bo.abs().max(1.0);
            obj > bo + tol || ((obj - bo).abs() <= tol && down > *bd)
        }
    }
}

/// Exact optimum of the big-M scenario program with budget `floor(n eps)`.
pub fn scenario_bid(set: &ScenarioSet) -> Result<ScenarioBid> {
    let k = set.violation_budget();
    scenario_bid_with_budget(&set.scenarios, k)
}

/// Exact optimum when at most `k` scenarios may be violated.
///
/// For each candidate downward level `d` (the downward limit of some
/// scenario, or 0), scenarios whose limit is below `d` must be relaxed; the
/// remaining budget drops the smallest upward realisations. The optimal
/// relaxed set coincides with one of these candidates.
pub fn scenario_bid_with_budget(scenarios: &[FlexTriple], k: usize) -> Result<ScenarioBid> {
    let n = scenarios.len();
    if n == 0 {
        return Err(Error::data("empty scenario set"));
    }
    if k >= n {
        return Err(Error::config(format!(
            "violation budget {k} >= {n} scenarios leaves the program unbounded"
        )));
    }
    let down_limit: Vec<f64> = scenarios.iter().map(|s| s.down.min(s.e20)).collect();
    let mut by_up: Vec<usize> = (0..n).collect();
    by_up.sort_by(|&a, &b| scenarios[a].up.total_cmp(&scenarios[b].up).then(a.cmp(&b)));

    let mut levels: Vec<f64> = down_limit.clone();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut best: Option<(f64, f64, Vec<usize>, Bid)> = None;
    for &d in &levels {
        let mut relaxed: Vec<bool> = down_limit.iter().map(|&l| l < d).collect();
        let forced = relaxed.iter().filter(|&&r| r).count();
        if forced > k {
            // levels are ascending, so every higher level forces at least as many
            break;
        }
        let mut budget = k - forced;
        for &i in &by_up {
            if budget == 0 {
                break;
            }
            if !relaxed[i] {
                relaxed[i] = true;
                budget -= 1;
            }
        }
        let kept = (0..n).filter(|&i| !relaxed[i]);
        let (u, dmin) = kept.fold((f64::INFINITY, f64::INFINITY), |(u, dm), i| {
            (u.min(scenarios[i].up), dm.min(down_limit[i]))
        });
        let bid = solve_two_caps(u, dmin);
        let obj = bid.total();
        if better(obj, bid.b_down_kw, &best) {
            let violated = (0..n).filter(|&i| relaxed[i]).collect();
            best = Some((obj, bid.b_down_kw, violated, bid));
        }
    }
    let (objective, _, violated, bid) = best.expect("level 0 forces nothing");
    Ok(ScenarioBid {
        bid,
        objective,
        violated,
    })
}

/// Smallest `n >= (2/eps) log(1/delta) + 2p + (2p/eps) log(2/eps)`.
pub fn required_sample_size(eps: f64, delta: f64, p: u32) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config(format!("eps {eps} outside (0, 1)")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::config(format!("delta {delta} outside (0, 1]")));
    }
    if p == 0 {
        return Err(Error::config("number of decision variables must be >= 1"));
    }
    let p = p as f64;
    let bound = 2.0 / eps * (1.0 / delta).ln() + 2.0 * p + 2.0 * p / eps * (2.0 / eps).ln();
    Ok(bound.ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(up: f64, down: f64, e20: f64) -> FlexTriple {
        FlexTriple { up, down, e20 }
    }

    fn params(k: f64, g: f64) -> WeibullParams {
        WeibullParams::new(k, g).unwrap()
    }

    #[test]
    fn cap_examples() {
        let eps = 0.1;
        let c = bid_cap(10.0, &params(1.0, 1.0), eps / 3.0, eps).unwrap();
        assert!((c - (10.0 - 3f64.ln())).abs() < 1e-12);
        assert!((c - 8.9014).abs() < 1e-4);
        assert_eq!(bid_cap(10.0, &params(1.0, 1.0), eps, eps).unwrap(), 10.0);
        let c = bid_cap(10.0, &params(0.5, 2.0), eps / 3.0, eps).unwrap();
        assert!((c - (10.0 - (2.0 * 3f64.ln()).sqrt())).abs() < 1e-12);
        assert!((c - 8.5177).abs() < 1e-4);
        assert!(bid_cap(10.0, &params(1.0, 1.0), 0.2, eps).is_err());
        assert!(bid_cap(10.0, &params(1.0, 1.0), 0.0, eps).is_err());
    }

    /// Vertex enumeration of the two-variable LP.
    fn lp_oracle(a: f64, b: f64) -> Option<f64> {
        if a < 0.0 || b < 0.0 {
            return None;
        }
        let vertices = [(0.0, 0.0), (a, 0.0), (0.0, b.min(a / LER_SHARE)), (a - LER_SHARE * b, b)];
        vertices
            .iter()
            .filter(|(u, d)| *u >= -1e-12 && *d >= -1e-12 && LER_SHARE * d + u <= a + 1e-12 && *d <= b + 1e-12)
            .map(|(u, d)| u + d)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    #[test]
    fn two_cap_examples() {
        let bid = solve_two_caps(10.0, 4.0);
        assert!((bid.b_down_kw - 4.0).abs() < 1e-12 && (bid.b_up_kw - 9.2).abs() < 1e-12);
        assert!((bid.total() - lp_oracle(10.0, 4.0).unwrap()).abs() < 1e-12);

        let bid = solve_two_caps(1.0, 100.0);
        assert!((bid.b_down_kw - 5.0).abs() < 1e-12 && bid.b_up_kw.abs() < 1e-12);
        assert!((bid.total() - lp_oracle(1.0, 100.0).unwrap()).abs() < 1e-12);

        let bid = solve_two_caps(10.0, -3.0);
        assert_eq!(bid, Bid { b_up_kw: 10.0, b_down_kw: 0.0 });
        assert_eq!(solve_two_caps(-1.0, 5.0), Bid::ZERO);
        assert_eq!(solve_two_caps(-1.0, -5.0), Bid::ZERO);
    }

    fn inputs_with_caps(eps: f64) -> AnalyticalInputs {
        AnalyticalInputs {
            up: TailModel { threshold_kw: 12.0, params: Some(params(1.0, 1.0)) },
            down: TailModel { threshold_kw: 6.0, params: Some(params(2.0, 0.8)) },
            e20: TailModel { threshold_kw: 9.0, params: Some(params(0.5, 1.5)) },
            eps,
        }
    }

    #[test]
    fn analytical_flags() {
        let inp = inputs_with_caps(0.1);
        let r = analytical_bid(&inp, 0.1 / 3.0).unwrap();
        assert!(r.feasible);
        assert!(r.bid.b_down_kw > 0.0);

        let mut bad = inp;
        bad.up.threshold_kw = 0.5;
        let r = analytical_bid(&bad, 0.1 / 3.0).unwrap();
        assert!(r.cap_up <= 0.0 && r.cap_down > 0.0);
        assert!(!r.feasible);
        assert_eq!(r.bid, Bid::ZERO);

        let mut no_fit = inp;
        no_fit.e20.params = None;
        let r = analytical_bid(&no_fit, 0.1 / 3.0).unwrap();
        assert_eq!(r.bid.b_down_kw, 0.0);
        assert!(r.bid.b_up_kw > 0.0);
        assert!(r.feasible);
    }

    #[test]
    fn scenario_hand_example() {
        let s = [t(5.0, 3.0, 4.0), t(6.0, 2.0, 5.0), t(4.0, 4.0, 1.0)];
        let r = scenario_bid_with_budget(&s, 1).unwrap();
        assert_eq!(r.violated, vec![2]);
        assert!((r.bid.b_down_kw - 2.0).abs() < 1e-12);
        assert!((r.bid.b_up_kw - 4.6).abs() < 1e-12);
        assert!((r.objective - 6.6).abs() < 1e-12);
    }

    #[test]
    fn single_scenario_no_budget() {
        let r = scenario_bid_with_budget(&[t(5.0, 3.0, 4.0)], 0).unwrap();
        assert!((r.bid.b_down_kw - 3.0).abs() < 1e-12);
        assert!((r.bid.b_up_kw - 4.4).abs() < 1e-12);
        assert!(r.violated.is_empty());
    }

    #[test]
    fn unbounded_budget_rejected() {
        assert!(scenario_bid_with_budget(&[t(1.0, 1.0, 1.0)], 1).is_err());
        let set = ScenarioSet::new(vec![t(1.0, 1.0, 1.0); 5], 0.1).unwrap();
        assert_eq!(set.violation_budget(), 0);
        let set = ScenarioSet::new(vec![t(1.0, 1.0, 1.0); 216], 0.1).unwrap();
        assert_eq!(set.violation_budget(), 21);
        assert!(ScenarioSet::new(vec![], 0.1).is_err());
        assert!(ScenarioSet::new(vec![t(-1.0, 1.0, 1.0)], 0.1).is_err());
    }

    #[test]
    fn big_m_is_max_realisation() {
        let set = ScenarioSet::new(vec![t(1.0, 5.0, 2.0), t(3.0, 1.0, 4.0)], 0.1).unwrap();
        assert_eq!(set.big_m(), [3.0, 5.0, 4.0]);
    }

    #[test]
    fn sample_size_examples() {
        assert_eq!(required_sample_size(0.1, 0.01, 2).unwrap(), 216);
        assert_eq!(required_sample_size(0.1, 1.0, 2).unwrap(), 124);
        assert_eq!(required_sample_size(0.1, 0.01, 4).unwrap(), 340);
        assert!(required_sample_size(0.0, 0.01, 2).is_err());
        assert!(required_sample_size(0.1, 0.01, 0).is_err());
    }

    /// Brute force over all relaxed sets of size <= k.
    fn brute_force(s: &[FlexTriple], k: usize) -> f64 {
        let n = s.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize > k {
                continue;
            }
            let kept = (0..n).filter(|i| mask & (1 << i) == 0);
            let (a, b) = kept.fold((f64::INFINITY, f64::INFINITY), |(a, b), i| {
                (a.min(s[i].up), b.min(s[i].down.min(s[i].e20)))
            });
            if let Some(v) = lp_oracle(a, b) {
                best = best.max(v);
            }
        }
        best
    }

    fn scenarios() -> impl Strategy<Value = Vec<FlexTriple>> {
        proptest::collection::vec(
            (0.0f64..20.0, 0.0f64..20.0, 0.0f64..20.0).prop_map(|(a, b, c)| t(a, b, c)),
            3..=12,
        )
    }

    proptest! {
        #[test]
        fn scenario_matches_brute_force(s in scenarios(), k in 0usize..=2) {
            let r = scenario_bid_with_budget(&s, k).unwrap();
            prop_assert!((r.objective - brute_force(&s, k)).abs() < 1e-9);
            prop_assert!(r.violated.len() <= k);
            // every kept scenario is satisfied
            for (i, sc) in s.iter().enumerate() {
                if !r.violated.contains(&i) {
                    prop_assert!(LER_SHARE * r.bid.b_down_kw + r.bid.b_up_kw <= sc.up + 1e-9);
                    prop_assert!(r.bid.b_down_kw <= sc.down.min(sc.e20) + 1e-9);
                }
            }
        }

        #[test]
        fn scenario_in_sample_violations_within_budget(s in scenarios(), k in 0usize..=2) {
            let r = scenario_bid_with_budget(&s, k).unwrap();
            let rep = crate::evaluate::count_violations(&r.bid, &s).unwrap();
            prop_assert!(rep.violations_joint <= r.violated.len());
        }

        #[test]
        fn scenario_monotone_in_budget(s in scenarios()) {
            let objs: Vec<f64> = (0..3).map(|k| scenario_bid_with_budget(&s, k).unwrap().objective).collect();
            prop_assert!(objs[0] <= objs[1] + 1e-12 && objs[1] <= objs[2] + 1e-12);
        }

        #[test]
        fn analytical_satisfies_caps(a in -5.0f64..50.0, b in -5.0f64..50.0) {
            let bid = solve_two_caps(a, b);
            prop_assert!(bid.b_up_kw >= 0.0 && bid.b_down_kw >= 0.0);
            if a > 0.0 && b >= 0.0 {
                prop_assert!(LER_SHARE * bid.b_down_kw + bid.b_up_kw <= a);
                prop_assert!(bid.b_down_kw <= b);
                prop_assert!(bid.b_down_kw <= b + 1e-9);
                prop_assert!((bid.total() - lp_oracle(a, b).unwrap()).abs() < 1e-9);
                // at least one constraint binds
                let slack_up = a - LER_SHARE * bid.b_down_kw - bid.b_up_kw;
                let slack_down = b - bid.b_down_kw;
                prop_assert!(slack_up.abs() < 1e-9 || slack_down.abs() < 1e-9);
            }
        }

        #[test]
        fn analytical_monotone_in_alpha(a1 in 0.0005f64..0.1, a2 in 0.0005f64..0.1) {
            let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
            let inp = inputs_with_caps(0.1);
            let blo = analytical_bid(&inp, lo).unwrap().bid.total();
            let bhi = analytical_bid(&inp, hi).unwrap().bid.total();
            prop_assert!(blo <= bhi + 1e-12);
        }
    }
}
