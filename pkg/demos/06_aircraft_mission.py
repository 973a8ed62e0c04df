#!/usr/bin/env python3
"""Mixing TTF and PFD measures: aircraft mission failure.

The engine carries a time-to-failure measure (observed failures at 6000,
5000 and 4000 hours; the mission lasts 6 hours) while the braking system
carries a per-demand measure (10 failures in 1000000 demands; one braking
demand per mission). Each cause enables system failure with probability 0.5.
The combined mission-failure probability lands on the 0.08% mark.
"""

from safetybn.catalog import get_example
from safetybn.graph import build_model
from safetybn.inference import infer

example = get_example("fig22b_aircraft")
model = build_model(example.model_spec())
evidence = {
    "engine_obs_time_1": 6000,
    "engine_obs_time_2": 5000,
    "engine_obs_time_3": 4000,
    "mission_t": 6,
    "brakes_observed": 10,
    "brakes_demands": 1000000,
}
result = infer(model, evidence)

engine_fail = result["mission_fails_within_t"].state_probabilities["True"]
brake_p = result["brakes_p"]
brake_fail = result["brakes_fails_on_demand"].state_probabilities["True"]
mission = result["system_failure"].state_probabilities["True"]

print("engine: failure times 6000/5000/4000 h, 6-hour mission")
print(f"  P(engine fails within mission) = {engine_fail:.6f}  (closed form 0.0016)")
print("brakes: 10 failures in 1000000 demands, one demand per mission")
print(f"  per-demand probability: mean {brake_p.mean:.3e}  (Beta posterior mean 1.1e-5)")
print(f"  P(brake failure on the mission demand) = {brake_fail:.3e}")
print(f"\nP(mission failure) = {mission:.6f}  (figure prints 0.0008)")

# what-if: a better engine moves the needle, the brakes barely do
better = infer(model, dict(evidence, engine_obs_time_1=12000, engine_obs_time_2=10000,
                           engine_obs_time_3=8000))
print(f"with a twice-as-reliable engine: {better['system_failure'].state_probabilities['True']:.6f}")
