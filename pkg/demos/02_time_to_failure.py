#!/usr/bin/env python3
"""Continuous-time reliability: time to failure and failure within a mission.

A car engine failed after 80, 90, 110 and 120 hours. The assessed failure
rate gets a capped uniform prior, each observed failure time is exponential
under it, and the posterior-predictive time to next failure comes out near
the 100-hour mark (posterior rate ~ Gamma(5, 400), predictive mean 400/4).
"""

from safetybn.idioms import instantiate_reliability_idiom
from safetybn.graph import ModelSpec, build_model
from safetybn.inference import infer, probability_query

times = {"ttf_obs_time_1": 80, "ttf_obs_time_2": 90, "ttf_obs_time_3": 110, "ttf_obs_time_4": 120}

frag = instantiate_reliability_idiom("ttf", "ttf", {"m": 4, "time_scale": 100})
model = build_model(ModelSpec(frag.nodes, title="car engine TTF"))
result = infer(model, times)

rate = result["ttf_rate"]
ttf = result["ttf_time_to_next_failure"]
print("observed failure times: 80, 90, 110, 120 hours")
print(f"  assessed failure rate: mean {rate.mean:.5f}  (Gamma(5,400) mean 0.0125)")
print(f"  time to next failure : mean {ttf.mean:.1f}  (figure prints 100)")
print(f"  90% interval on TTF  : [{ttf.percentile(5):.0f}, {ttf.percentile(95):.0f}] hours")

# summary-statistics variant: mean 100, variance 250 over many observations
frag_s = instantiate_reliability_idiom("ttf_summary", "sum", {"mu": 100, "sigma2": 250})
model_s = build_model(ModelSpec(frag_s.nodes))
res_s = infer(model_s, {})
print(f"\nsummary-statistics variant (mu=100, var=250): TTF mean {res_s['sum_time_to_next_failure'].mean:.1f}")

# probability of failure within a 10-hour drive, under rate uncertainty:
# P(T <= 10) = 1 - E[exp(-10 rate)] = 1 - (400/410)^5 = 0.1162, a touch above
# the fixed-rate-0.01 value 0.0952 because small-rate doubt cuts both ways
p_fail = probability_query(model, times, "ttf_time_to_next_failure <= 10")
print(f"\nP(failure within 10 hours) = {p_fail:.4f}  (posterior-predictive closed form 0.1162)")
