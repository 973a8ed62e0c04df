#!/usr/bin/env python3
"""Observing is not intervening: the do-operator on a risk-control model.

Observing a collider updates its parents diagnostically; forcing it by
intervention severs those arcs and leaves the parents at their priors. On
the risk-control model, do(control = 0.9) answers "what if we deploy this
control", which is the question a risk manager actually asks.
"""

from safetybn.catalog import get_example
from safetybn.graph import ExpressionCpd, ModelSpec, Node, NodeKind, TableCpd, build_model
from safetybn.inference import do_intervention, infer

# --- collider: observe vs do --------------------------------------------

collider = build_model(
    ModelSpec(
        nodes=(
            Node("A", NodeKind.LABELLED, states=("a0", "a1"), cpd=TableCpd(((0.7, 0.3),))),
            Node("B", NodeKind.LABELLED, states=("b0", "b1"), cpd=TableCpd(((0.4, 0.6),))),
            Node("C", NodeKind.LABELLED, states=("c0", "c1"), parents=("A", "B"),
                 cpd=TableCpd(((0.9, 0.1), (0.5, 0.5), (0.3, 0.7), (0.2, 0.8)))),
        )
    )
)
observed = infer(collider, {"C": "c1"})["A"].state_probabilities["a1"]
forced = infer(do_intervention(collider, "C", "c1"), {})["A"].state_probabilities["a1"]
print("three-node collider A -> C <- B, prior P(A=a1) = 0.30")
print(f"  observe C=c1 : P(A=a1) = {observed:.4f}   (diagnostic update)")
print(f"  do(C=c1)     : P(A=a1) = {forced:.4f}   (arcs severed, prior kept)")

# --- what-if on the risk-control model ----------------------------------

example = get_example("fig17b_risk_control")
model = build_model(example.model_spec())
baseline = infer(model, {"control_event_probability": 0.08})
print("\nrisk control model, event probability 0.08, control unknown (uniform)")
print(f"  residual mean: {baseline['control_residual_probability'].mean:.4f}")

for c in (0.25, 0.5, 0.9):
    what_if = infer(do_intervention(model, "control_control", c),
                    {"control_event_probability": 0.08})
    print(f"  do(control = {c:.2f}): residual mean "
          f"{what_if['control_residual_probability'].mean:.4f}")
