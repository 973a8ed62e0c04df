#!/usr/bin/env python3
"""Cross-checking the engine against the Monte Carlo oracle.

The discretized engine is deterministic and auditable; the likelihood-
weighting oracle is an entirely independent estimator of the same model.
Agreement within three oracle standard errors on every node is the
acceptance bar; this script shows the comparison on the hammer PFD model
and on the aircraft composite.
"""

from safetybn.catalog import get_example
from safetybn.graph import build_model
from safetybn.inference import infer
from safetybn.oracle import compare, likelihood_weighted_posterior


def cross_check(name, evidence, samples=1_000_000, seed=7):
    example = get_example(name)
    model = build_model(example.model_spec())
    result = infer(model, evidence)
    estimate = likelihood_weighted_posterior(model, evidence, samples, seed)
    report = compare(result, estimate)
    print(f"{name}: effective sample size {estimate.effective_sample_size:.0f}")
    for row in report.rows:
        flag = "ok " if row.passed else "FAIL"
        print(f"  {flag} {row.node_id:<28} {row.quantity:<10} "
              f"engine {row.engine:>12.6g}  oracle {row.oracle:>12.6g} +- {row.se:.2g}")
    print(f"  all pass: {report.all_pass}\n")


cross_check("fig4b_hammer_pfd", {"pfd_observed": 10, "pfd_demands": 1000})
cross_check(
    "fig22b_aircraft",
    {"engine_obs_time_1": 6000, "engine_obs_time_2": 5000, "engine_obs_time_3": 4000,
     "mission_t": 6, "brakes_observed": 10, "brakes_demands": 1000000},
)
