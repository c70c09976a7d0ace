"""Smoke test for the tailbid extension module.

Build and run from the workspace root:

    cargo build --release -p tailbid-py --features extension-module
    cp target/release/libtailbid_py.so python/tailbid.so
    python3 python/smoke_test.py
"""

import math
import random

import tailbid


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


assert tailbid.required_sample_size(0.1, 0.01, 2) == 216
close(tailbid.bid_cap(10.0, 0.5, 2.0, 0.1 / 3, 0.1), 10 - math.sqrt(2 * math.log(3)), 1e-12)
close(tailbid.t_quantile(0.025, 9), 2.262157, 1e-6)

rng = random.Random(3)
kappa, gamma = 0.02, 1.5
x = [(-math.log(1 - rng.random()) / kappa) ** (1 / gamma) for _ in range(4000)]
fit = tailbid.fit_weibull_mle(x)
close(fit.kappa, kappa, 0.1 * kappa)
close(fit.gamma, gamma, 0.1 * gamma)
ks = tailbid.ks_weibull(x, fit.kappa, fit.gamma)
assert ks.accepted(), ks

b = tailbid.analytical_bid((100.0, 80.0, 90.0), [(kappa, gamma)] * 3, 0.1)
assert b.feasible and b.bid.total() > 0
b_none = tailbid.analytical_bid((100.0, 80.0, 90.0), [None, (kappa, gamma), (kappa, gamma)], 0.1)
assert not b_none.feasible and b_none.bid.total() == 0

scen = [(rng.uniform(50, 100), rng.uniform(20, 60), rng.uniform(20, 60)) for _ in range(50)]
s = tailbid.scenario_bid(scen, 0.1)
assert len(s.violated) <= 5
rep = tailbid.count_violations(s.bid, scen)
assert rep.violations_joint == len(s.violated), (rep, s.violated)

records = tailbid.synth_fleet(n_evs=30, n_days=120, seed=5)
hourly = tailbid.estimate(records)
assert len(hourly) == 120 * 24
up_19 = [h[2] for h in hourly if h[1] == 19]
tail = tailbid.fit_tail(up_19, 0.1)
close(tail.threshold_kw, tailbid.empirical_quantile(up_19, 0.1), 0.0)

summary = tailbid.run_experiment(hourly, n_runs=2, in_sample_size=80, seed=5)
assert summary["analytical"]["n_runs"] == 2
assert len(summary["scenario"]["hours"]) == 24

try:
    tailbid.bid_cap(10.0, 0.5, 2.0, 0.2, 0.1)
except ValueError:
    pass
else:
    raise AssertionError("alpha > eps accepted")

print("tailbid smoke test ok")
