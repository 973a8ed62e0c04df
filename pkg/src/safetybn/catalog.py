"""Bundled example corpus: one entry per reproduced figure instance.

Each entry carries a model document, one or more evidence scenarios, and an
expected-value manifest (band plus provenance tag) that the acceptance
harness consumes directly. Model documents ship as JSON files next to this
module; ``write_bundled`` regenerates them from the builders below.

Provenance tags: ``paper`` values are read off the source figures (bands
absorb display rounding and discretization differences); ``derived`` values
come from independent closed-form oracles (conjugate posteriors,
truncated-normal moments, exponential CDFs); ``trivial`` values are forced
by arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .model_io import FORMAT_VERSION, loads_model

__all__ = ["BundledExample", "Check", "Scenario", "list_bundled_examples", "get_example", "write_bundled"]

RANKED_5 = ["very low", "low", "medium", "high", "very high"]


@dataclass(frozen=True)
class Check:
    """One acceptance check: a node quantity must land inside [lo, hi].

    ``known_discrepancy`` marks a check whose stated band is inconsistent
    with the exact value derivable from the model itself; runners report
    these prominently instead of counting them as regressions.
    """

    node: str
    quantity: str  # "mean" | "variance" | "state_prob"
    lo: float
    hi: float
    states: tuple[str, ...] = ()  # state_prob: probability summed over these
    tag: str = "paper"  # paper | derived | trivial
    note: str = ""
    known_discrepancy: str = ""

    def evaluate(self, posterior) -> tuple[float, bool]:
        if self.quantity == "mean":
            value = posterior.mean
        elif self.quantity == "variance":
            value = posterior.variance
        elif self.quantity == "state_prob":
            probs = posterior.state_probabilities
            value = sum(probs[s] for s in self.states)
        else:
            raise ValueError(f"unknown check quantity {self.quantity!r}")
        return float(value), bool(self.lo <= value <= self.hi)

    def describe(self) -> str:
        target = self.node if self.quantity != "state_prob" else f"{self.node} in {list(self.states)}"
        return f"{target} {self.quantity} in [{self.lo:g}, {self.hi:g}]"


@dataclass(frozen=True)
class Scenario:
    name: str
    evidence: dict
    checks: tuple[Check, ...]


@dataclass(frozen=True)
class BundledExample:
    name: str
    figure: str
    title: str
    description: str
    document: dict
    scenarios: tuple[Scenario, ...]

    def model_spec(self):
        return loads_model(json.dumps(self.document), source=self.name)

    @property
    def checks(self) -> tuple[Check, ...]:
        return tuple(c for s in self.scenarios for c in s.checks)


def _manifest_doc(title: str, idioms: list[dict], bindings: list[dict] | None = None) -> dict:
    doc = {"version": FORMAT_VERSION, "title": title, "idioms": idioms}
    if bindings:
        doc["bindings"] = bindings
    return doc


def _build_examples() -> dict[str, BundledExample]:
    entries: list[BundledExample] = []

    entries.append(
        BundledExample(
            name="fig4b_hammer_pfd",
            figure="fig4b",
            title="Hammer head detaching: hazard per demand",
            description=(
                "Generic hazard-or-failure-per-demand fragment with an ignorant "
                "uniform prior; testing observed the hazard 10 times in 1000 demands."
            ),
            document=_manifest_doc(
                "Hammer head detaching: hazard per demand",
                [{"kind": "pfd", "instance": "pfd"}],
            ),
            scenarios=(
                Scenario(
                    "testing data",
                    {"pfd_observed": 10, "pfd_demands": 1000},
                    (
                        Check("pfd_p", "mean", 0.0105, 0.0115, tag="paper",
                              note="figure prints 0.01; conjugate posterior mean 11/1002 = 0.010978"),
                        Check("pfd_p", "variance", 0.9e-5, 1.2e-5, tag="paper",
                              note="figure prints 1.11E-5; Beta(11, 991) variance 1.08E-5"),
                    ),
                ),
            ),
        )
    )

    limited = [{"kind": "pfd_limited_data", "instance": "pfd",
                "params": {"include_current": False}}]
    entries.append(
        BundledExample(
            name="fig5b_hammer_limited_data",
            figure="fig5b",
            title="Hammer reliability from a previous similar hammer",
            description=(
                "No current testing data: the per-demand probability follows the "
                "previous system's posterior through the similarity selector "
                "(minor differences, x1.25)."
            ),
            document=_manifest_doc("Hammer reliability from a previous similar hammer", limited),
            scenarios=(
                Scenario(
                    "previous data only",
                    {"pfd_prev_observed": 200, "pfd_prev_demands": 2000,
                     "pfd_similarity": "Minor differences"},
                    (
                        Check("pfd_p", "mean", 0.120, 0.130, tag="paper",
                              note="figure prints 0.125"),
                    ),
                ),
            ),
        )
    )

    limited_full = [{"kind": "pfd_limited_data", "instance": "pfd"}]
    entries.append(
        BundledExample(
            name="fig5c_hammer_limited_plus_current",
            figure="fig5c",
            title="Hammer reliability: previous data plus limited current testing",
            description=(
                "Previous-system data combined with 0 hazards in 500 current "
                "demands; the non-conjugate Normal-prior/Binomial-likelihood "
                "update pulls the estimate down to about 0.04."
            ),
            document=_manifest_doc(
                "Hammer reliability: previous data plus limited current testing", limited_full
            ),
            scenarios=(
                Scenario(
                    "previous plus current",
                    {"pfd_prev_observed": 200, "pfd_prev_demands": 2000,
                     "pfd_similarity": "Minor differences",
                     "pfd_observed": 0, "pfd_demands": 500},
                    (
                        Check("pfd_p", "mean", 0.035, 0.046, tag="paper",
                              note="figure prints 0.04"),
                        Check("pfd_p", "variance", 1.4e-4, 3.0e-4, tag="paper",
                              note="figure prints 2.7E-4",
                              known_discrepancy=(
                                  "exact posterior variance of this model is 1.312e-4 "
                                  "(FFT-convolution oracle), below the stated band; the "
                                  "1.7e-4 'derivable' value is the pre-update prior variance"
                              )),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig6b_uncertain_accuracy",
            figure="fig6b",
            title="Underestimated hazard counts: true number of events",
            description=(
                "Observed counts pass through an accuracy selector; underestimated "
                "reporting of 100 hazards in 1000 demands implies about 125 true events."
            ),
            document=_manifest_doc(
                "Underestimated hazard counts: true number of events",
                [{"kind": "uncertain_accuracy", "instance": "acc"}],
            ),
            scenarios=(
                Scenario(
                    "underestimated reporting",
                    {"acc_observed": 100, "acc_demands": 1000, "acc_accuracy": "Underestimated"},
                    (
                        Check("acc_tne", "mean", 120, 130, tag="paper",
                              note="figure prints 125"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig7b_car_engine_ttf",
            figure="fig7b",
            title="Car engine time to next failure from observed failure times",
            description=(
                "Four observed failure times (80, 90, 110, 120 hours) drive the "
                "assessed failure rate; the posterior-predictive mean time to next "
                "failure is about 100 hours."
            ),
            document=_manifest_doc(
                "Car engine time to next failure",
                [{"kind": "ttf", "instance": "ttf", "params": {"m": 4, "time_scale": 100}}],
            ),
            scenarios=(
                Scenario(
                    "observed failure times",
                    {"ttf_obs_time_1": 80, "ttf_obs_time_2": 90,
                     "ttf_obs_time_3": 110, "ttf_obs_time_4": 120},
                    (
                        Check("ttf_time_to_next_failure", "mean", 95, 107, tag="paper",
                              note="figure prints 100; Gamma-posterior predictive mean is 100"),
                        Check("ttf_rate", "mean", 0.009, 0.013, tag="paper",
                              note="figure prints 0.01; posterior mean 5/400 = 0.0125"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig8b_car_engine_ttf_summary",
            figure="fig8b",
            title="Car engine time to next failure from summary statistics",
            description=(
                "Observed failure times summarized as mean 100 and variance 250; "
                "the exponential rate is one over the observed failure time."
            ),
            document=_manifest_doc(
                "Car engine time to next failure from summary statistics",
                [{"kind": "ttf_summary", "instance": "ttf", "params": {"mu": 100, "sigma2": 250}}],
            ),
            scenarios=(
                Scenario(
                    "prior predictive",
                    {},
                    (
                        Check("ttf_time_to_next_failure", "mean", 95, 107, tag="paper",
                              note="figure prints 100"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig9b_failure_within_time",
            figure="fig9b",
            title="Probability the engine fails within 10 hours",
            description=(
                "P(T <= t) for a mean-100 exponential time to failure at t = 10; "
                "the closed form is 1 - exp(-0.1) = 0.0952."
            ),
            document=_manifest_doc(
                "Probability the engine fails within 10 hours",
                [{"kind": "failure_within_time", "instance": "fw",
                  "params": {"placeholder_rate": 0.01, "t_upper": 4000}}],
            ),
            scenarios=(
                Scenario(
                    "t = 10",
                    {"fw_t": 10},
                    (
                        Check("fw_fails_within_t", "state_prob", 0.090, 0.105,
                              states=("True",), tag="derived",
                              note="exponential CDF gives 0.09516; figure prints 0.1"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig10b_rework",
            figure="fig10b",
            title="Probability of fixing the hammer fault after rework",
            description=(
                "Very low rework process quality and effort give very low overall "
                "effectiveness, hence a fixing probability around 0.03."
            ),
            document=_manifest_doc(
                "Probability of fixing the hammer fault after rework",
                [{"kind": "rework", "instance": "rework"}],
            ),
            scenarios=(
                Scenario(
                    "very low process and effort",
                    {"rework_rework_process": "very low", "rework_rework_effort": "very low"},
                    (
                        Check("rework_fixing_probability", "mean", 0.025, 0.035, tag="paper",
                              note="figure prints 0.03; truncated-normal mean is 0.0292"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig11a_requirement",
            figure="fig11a",
            title="Safety requirement compliance for the hammer",
            description=(
                "P(assessed per-demand probability <= 0.01) under an assessed "
                "attribute around 0.03. The figure's 15% depends on an unstated "
                "upstream distribution; this instance uses TNormal(0.03, 0.001, 0, 1) "
                "and asserts the mechanism, not the exact percentage."
            ),
            document=_manifest_doc(
                "Safety requirement compliance for the hammer",
                [{"kind": "requirement", "instance": "req",
                  "params": {"requirement_value": 0.01,
                             "attribute_prior": "TNormal(0.03, 0.001, 0, 1)"}}],
            ),
            scenarios=(
                Scenario(
                    "assessed vs requirement",
                    {},
                    (
                        Check("req_compliant", "state_prob", 0.02, 0.35,
                              states=("True",), tag="derived",
                              note="truncated-normal CDF at 0.01 gives 0.111; figure prints 15% "
                                   "for its unstated distribution"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig12b_manufacturing_quality",
            figure="fig12b",
            title="Manufacturing process quality from defects and drifts",
            description=(
                "Latent manufacturing quality driven by ranked factor scales for "
                "product-defect control and process-drift control (low on both)."
            ),
            document=_manifest_doc(
                "Manufacturing process quality",
                [{"kind": "quality", "instance": "mfg",
                  "params": {"factors": ["product_defects", "process_drifts"],
                             "latent_name": "manufacturing_quality"}}],
            ),
            scenarios=(
                Scenario(
                    "both factors low",
                    {"mfg_product_defects": "low", "mfg_process_drifts": "low"},
                    (
                        Check("mfg_manufacturing_quality", "state_prob", 0.95, 1.0,
                              states=("low",), tag="derived",
                              note="TNormal(0.3, 0.001, 0, 1) mass on [0.2, 0.4) is 0.9984"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig12c_organisation_quality",
            figure="fig12c",
            title="Organisation quality from satisfaction and track record",
            description=(
                "Latent organisation quality from ranked customer-satisfaction and "
                "years-in-operation factors (high on both)."
            ),
            document=_manifest_doc(
                "Organisation quality",
                [{"kind": "quality", "instance": "org",
                  "params": {"factors": ["customer_satisfaction", "years_in_operation"],
                             "latent_name": "organisation_quality"}}],
            ),
            scenarios=(
                Scenario(
                    "both factors high",
                    {"org_customer_satisfaction": "high", "org_years_in_operation": "high"},
                    (
                        Check("org_organisation_quality", "state_prob", 0.95, 1.0,
                              states=("high",), tag="derived",
                              note="TNormal(0.7, 0.001, 0, 1) mass on [0.6, 0.8) is 0.9984"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig13_hammer_composite",
            figure="fig13",
            title="Composite hammer reliability: testing data plus manufacturing quality",
            description=(
                "PFD fragment (20 hazards in 200 demands) composed with a "
                "manufacturing-quality fragment through a per-state hazard "
                "multiplier (very low quality multiplies the per-demand "
                "probability by a calibrated 1.5)."
            ),
            document=_manifest_doc(
                "Composite hammer reliability",
                [
                    {"kind": "pfd", "instance": "pfd"},
                    {"kind": "quality", "instance": "quality",
                     "params": {"factors": ["product_defects", "process_drifts"],
                                "latent_name": "manufacturing_quality"}},
                    {"kind": "hazard_occurrence", "instance": "hazard",
                     "params": {"factors": [["quality_effect", RANKED_5,
                                             [1.5, 1.25, 1.0, 0.9, 0.8]]]}},
                ],
                [
                    {"from": "pfd.p", "to": "hazard.base_probability", "mode": "merge"},
                    {"from": "quality.latent_quality_value", "to": "hazard.quality_effect",
                     "mode": "merge"},
                ],
            ),
            scenarios=(
                Scenario(
                    "testing data only",
                    {"pfd_observed": 20, "pfd_demands": 200},
                    (
                        Check("pfd_p", "mean", 0.095, 0.110, tag="paper",
                              note="text prints 0.10; conjugate mean 21/202 = 0.104"),
                    ),
                ),
                Scenario(
                    "poor manufacturing process",
                    {"pfd_observed": 20, "pfd_demands": 200,
                     "quality_manufacturing_quality": "very low"},
                    (
                        Check("hazard_adjusted_probability", "mean", 0.140, 0.160, tag="paper",
                              note="text prints 0.15; the very-low multiplier 1.5 is calibrated, "
                                   "not paper ground truth"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig14b_hazard_occurrence",
            figure="fig14b",
            title="Hammer head detaching under deviations from intended use",
            description=(
                "Base per-demand probability 0.15 adjusted by a consumer-behaviour "
                "factor; minor deviations multiply it by 1.2."
            ),
            document=_manifest_doc(
                "Hammer hazard occurrence with usage factor",
                [{"kind": "hazard_occurrence", "instance": "hazard", "params": {"base": 0.15}}],
            ),
            scenarios=(
                Scenario(
                    "minor deviations from intended use",
                    {"hazard_usage": "minor deviations"},
                    (
                        Check("hazard_adjusted_probability", "mean", 0.175, 0.185, tag="paper",
                              note="figure prints 0.15 -> 0.18"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig15b_injury_event",
            figure="fig15b",
            title="Probability of a head injury while using the hammer",
            description="P(I) = P(H) x P(I|H) with P(H) = 0.18 and P(I|H) = 0.08.",
            document=_manifest_doc(
                "Hammer head-injury event",
                [{"kind": "injury_event", "instance": "injury"}],
            ),
            scenarios=(
                Scenario(
                    "hazard and conditional injury probabilities",
                    {"injury_p_hazard": 0.18, "injury_p_injury_given_hazard": 0.08},
                    (
                        Check("injury_p_injury", "mean", 0.0140, 0.0150, tag="paper",
                              note="figure prints 0.015; the exact product is 0.0144"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig16b_product_injury",
            figure="fig16b",
            title="Head injuries across 100000 hammers",
            description="Binomial injury count over the product instances on the market.",
            document=_manifest_doc(
                "Hammer head injuries across product instances",
                [{"kind": "product_injury", "instance": "count"}],
            ),
            scenarios=(
                Scenario(
                    "instances and injury probability",
                    {"count_p_injury": 0.015, "count_instances": 100000},
                    (
                        Check("count_injury_count", "mean", 1440, 1560, tag="paper",
                              note="figure prints 1500"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig17b_risk_control",
            figure="fig17b",
            title="Residual head-injury probability after risk controls",
            description="RE = (1 - C) x E with C = 0.5 and E = 0.08.",
            document=_manifest_doc(
                "Hammer risk control",
                [{"kind": "risk_control", "instance": "control"}],
            ),
            scenarios=(
                Scenario(
                    "risk control at 0.5",
                    {"control_control": 0.5, "control_event_probability": 0.08},
                    (
                        Check("control_residual_probability", "mean", 0.039, 0.041, tag="paper",
                              note="figure prints 0.04"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig18b_risk_score",
            figure="fig18b",
            title="Hammer risk level from injury probabilities",
            description=(
                "Ranked risk level from major and minor injury probabilities via "
                "TNormal(min(1, 100 x (major + 0.5 x minor)), 0.001, 0, 1)."
            ),
            document=_manifest_doc(
                "Hammer risk level",
                [{"kind": "risk_score", "instance": "risk"}],
            ),
            scenarios=(
                Scenario(
                    "major 0.04, minor 0.01",
                    {"risk_p_major_injury": 0.04, "risk_p_minor_injury": 0.01},
                    (
                        Check("risk_risk_level", "state_prob", 0.95, 1.0,
                              states=("very high",), tag="paper",
                              note="figure prints a 98% chance of 'very high'; the upstream "
                                   "minor-injury distribution is not tabulated"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig19b_risk_tolerability",
            figure="fig19b",
            title="Hammer risk tolerability: medium benefit vs very high risk",
            description=(
                "Tolerability trades ranked benefit against ranked risk; the NPT "
                "TNormal(wmean(1, benefit, 1, 1 - risk), 0.001, 0, 1) is a documented "
                "modelling decision (the paper gives none)."
            ),
            document=_manifest_doc(
                "Hammer risk tolerability",
                [{"kind": "risk_tolerability", "instance": "tol"}],
            ),
            scenarios=(
                Scenario(
                    "medium benefit, very high risk",
                    {"tol_benefit": "medium", "tol_risk": "very high"},
                    (
                        Check("tol_tolerability", "state_prob", 0.90, 1.0,
                              states=("low", "very low"), tag="paper",
                              note="figure prints a 95% chance of 'low' or 'very low'"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig20b_risk_perception",
            figure="fig20b",
            title="Consumer risk perception from injury likelihood and severity",
            description=(
                "Perceived risk via TNormal(wmean(1, likelihood, 1, severity), "
                "0.001, 0, 1) with both factors judged high."
            ),
            document=_manifest_doc(
                "Consumer risk perception",
                [{"kind": "risk_perception", "instance": "percept"}],
            ),
            scenarios=(
                Scenario(
                    "likelihood and severity high",
                    {"percept_injury_likelihood": "high", "percept_injury_severity": "high"},
                    (
                        Check("percept_perceived_risk", "state_prob", 0.90, 1.0,
                              states=("high",), tag="paper",
                              note="figure reports a 'high' perceived risk mode"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig20c_risk_perception_media",
            figure="fig20c",
            title="Consumer risk perception under media and government pressure",
            description=(
                "Perceived risk from media-story and government-action factors with "
                "a consumer-feedback indicator; factors very high and high."
            ),
            document=_manifest_doc(
                "Consumer risk perception under external pressure",
                [{"kind": "risk_perception", "instance": "percept",
                  "params": {"factors": ["media_stories", "government_action"],
                             "indicators": ["consumer_feedback"]}}],
            ),
            scenarios=(
                Scenario(
                    "strong media pressure",
                    {"percept_media_stories": "very high", "percept_government_action": "high"},
                    (
                        Check("percept_perceived_risk", "state_prob", 0.90, 1.0,
                              states=("high", "very high"), tag="derived",
                              note="wmean lands on the 0.8 state boundary; TNormal mass splits "
                                   "between 'high' and 'very high'"),
                    ),
                ),
            ),
        )
    )

    entries.append(
        BundledExample(
            name="fig22b_aircraft",
            figure="fig22b",
            title="Military aircraft mission failure: engine TTF plus brake PFD",
            description=(
                "Engine failure times of 6000/5000/4000 hours, a 6-hour mission, "
                "brake testing of 10 failures in 1000000 demands and one brake "
                "demand per mission; each cause enables system failure with "
                "probability 0.5. The brake prior is Uniform(0, 0.001) so the "
                "Monte Carlo oracle keeps a usable effective sample size; the "
                "posterior is indistinguishable from the Uniform(0, 1) one."
            ),
            document=_manifest_doc(
                "Aircraft mission failure",
                [
                    {"kind": "ttf", "instance": "engine", "params": {"m": 3, "time_scale": 5000}},
                    {"kind": "failure_within_time", "instance": "mission",
                     "params": {"t_upper": 200000}},
                    {"kind": "pfd", "instance": "brakes",
                     "params": {"prior_upper": 0.001, "include_demand_event": True}},
                    {"kind": "failure_combination", "instance": "system",
                     "params": {"causes": [["engine_failure", 0.5], ["braking_failure", 0.5]]}},
                ],
                [
                    {"from": "engine.time_to_next_failure", "to": "mission.ttf_distribution",
                     "mode": "merge"},
                    {"from": "mission.probability_of_failure", "to": "system.engine_failure",
                     "mode": "merge"},
                    {"from": "brakes.fails_on_demand", "to": "system.braking_failure",
                     "mode": "merge"},
                ],
            ),
            scenarios=(
                Scenario(
                    "mission profile",
                    {"engine_obs_time_1": 6000, "engine_obs_time_2": 5000,
                     "engine_obs_time_3": 4000, "mission_t": 6,
                     "brakes_observed": 10, "brakes_demands": 1000000},
                    (
                        Check("system_failure", "state_prob", 0.0006, 0.0010,
                              states=("True",), tag="paper",
                              note="figure prints 0.0008 (0.08%); closed-form combination "
                                   "gives 0.000805"),
                    ),
                ),
            ),
        )
    )

    return {e.name: e for e in entries}


_EXAMPLES: dict[str, BundledExample] | None = None


def list_bundled_examples() -> dict[str, BundledExample]:
    """Catalog of every bundled figure instance, keyed by name."""
    global _EXAMPLES
    if _EXAMPLES is None:
        _EXAMPLES = _build_examples()
    return _EXAMPLES


def get_example(name: str) -> BundledExample:
    examples = list_bundled_examples()
    if name not in examples:
        short = {e.figure: e.name for e in examples.values()}
        if name in short:
            return examples[short[name]]
        raise KeyError(f"no bundled example named {name!r}")
    return examples[name]


def bundled_dir() -> Path:
    return Path(__file__).resolve().parent / "bundled"


def write_bundled(target: Path | None = None) -> list[Path]:
    """Materialize every example's model document plus the catalog manifest."""
    target = Path(target) if target is not None else bundled_dir()
    target.mkdir(parents=True, exist_ok=True)
    written = []
    manifest = {}
    for name, example in list_bundled_examples().items():
        path = target / f"{name}.json"
        path.write_text(json.dumps(example.document, indent=2) + "\n", encoding="utf-8")
        written.append(path)
        manifest[name] = {
            "figure": example.figure,
            "title": example.title,
            "description": example.description,
            "file": path.name,
            "scenarios": [
                {
                    "name": s.name,
                    "evidence": s.evidence,
                    "checks": [
                        {
                            "node": c.node,
                            "quantity": c.quantity,
                            "lo": c.lo,
                            "hi": c.hi,
                            "states": list(c.states),
                            "tag": c.tag,
                            "note": c.note,
                            "known_discrepancy": c.known_discrepancy,
                        }
                        for c in s.checks
                    ],
                }
                for s in example.scenarios
            ],
        }
    manifest_path = target / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(manifest_path)
    return written
