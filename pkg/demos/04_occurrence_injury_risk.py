#!/usr/bin/env python3
"""From hazard occurrence to injuries to a regulatory risk level.

The chain the hammer example walks: consumer behaviour raises the hazard
probability from 0.15 to 0.18; a head injury follows the hazard with
probability 0.08, so P(injury) = 0.0144; across 100000 hammers that is about
1500 injuries; risk controls halve the injury probability; and the ranked
risk-score idiom turns the injury probabilities into a 5-point risk level.
"""

from safetybn.catalog import get_example
from safetybn.graph import build_model
from safetybn.inference import infer


def run(name, evidence):
    example = get_example(name)
    model = build_model(example.model_spec())
    return infer(model, evidence)


occ = run("fig14b_hazard_occurrence", {"hazard_usage": "minor deviations"})
print("hazard occurrence: base 0.15, minor deviations from intended use (x1.2)")
print(f"  adjusted hazard probability: {occ['hazard_adjusted_probability'].mean:.4f}")

inj = run("fig15b_injury_event", {"injury_p_hazard": 0.18, "injury_p_injury_given_hazard": 0.08})
print(f"\ninjury event: P(I) = P(H) x P(I|H) = {inj['injury_p_injury'].mean:.4f}")

count = run("fig16b_product_injury", {"count_p_injury": 0.015, "count_instances": 100000})
post = count["count_injury_count"]
print(f"\ninjuries across 100000 hammers: mean {post.mean:.0f}, "
      f"90% interval [{post.percentile(5):.0f}, {post.percentile(95):.0f}]")

control = run("fig17b_risk_control", {"control_control": 0.5, "control_event_probability": 0.08})
print(f"\nrisk control at C=0.5 on an 0.08 event: residual "
      f"{control['control_residual_probability'].mean:.4f}")

score = run("fig18b_risk_score", {"risk_p_major_injury": 0.04, "risk_p_minor_injury": 0.01})
probs = score["risk_risk_level"].state_probabilities
print("\nrisk level from major 0.04 / minor 0.01 injury probabilities:")
for state, p in probs.items():
    bar = "#" * int(round(p * 40))
    print(f"  {state:<10} {p:7.4f} {bar}")
