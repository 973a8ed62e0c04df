#!/usr/bin/env python3
"""Risk evaluation: tolerability trade-offs and consumer risk perception.

A very-high-risk hammer with only medium benefit lands almost surely in the
low/very-low tolerability states. Consumer perception mirrors the quality
idiom: ranked factors (injury likelihood and severity, or media pressure and
government action) drive a latent perceived-risk value.
"""

from safetybn.catalog import get_example
from safetybn.graph import build_model
from safetybn.inference import infer


def stacked(probs):
    return "  ".join(f"{s}:{p:.3f}" for s, p in probs.items() if p > 0.0005)


tol = get_example("fig19b_risk_tolerability")
model = build_model(tol.model_spec())
res = infer(model, {"tol_benefit": "medium", "tol_risk": "very high"})
probs = res["tol_tolerability"].state_probabilities
print("tolerability of a very-high-risk, medium-benefit product")
print(f"  {stacked(probs)}")
print(f"  P(low or very low) = {probs['low'] + probs['very low']:.4f} (figure prints 95%)")

percept = get_example("fig20b_risk_perception")
model_p = build_model(percept.model_spec())
res_p = infer(model_p, {"percept_injury_likelihood": "high", "percept_injury_severity": "high"})
print("\nperceived risk when injury likelihood and severity are judged high")
print(f"  {stacked(res_p['percept_perceived_risk'].state_probabilities)}")

media = get_example("fig20c_risk_perception_media")
model_m = build_model(media.model_spec())
res_m = infer(model_m, {"percept_media_stories": "very high", "percept_government_action": "high"})
print("\nperceived risk under very high media pressure and high government action")
print(f"  {stacked(res_m['percept_perceived_risk'].state_probabilities)}")
feedback = res_m["percept_consumer_feedback"].state_probabilities
print(f"  predicted consumer feedback: {stacked(feedback)}")
