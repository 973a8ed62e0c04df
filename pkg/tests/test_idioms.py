"""Idiom templates reproduce their figure values; composition contracts."""

import pytest

from safetybn.errors import BadParameter, CycleError, DuplicateBinding, PortKindMismatch
from safetybn.graph import ExpressionCpd, ModelSpec, Node, NodeKind, build_model
from safetybn.idioms import (
    IdiomFragment,
    PortBinding,
    compose,
    instantiate_occurrence_idiom,
    instantiate_process_idiom,
    instantiate_reliability_idiom,
    instantiate_risk_idiom,
)
from safetybn.inference import infer


def run_fragment(fragment, evidence):
    model = build_model(ModelSpec(fragment.nodes))
    return infer(model, evidence)


# ----------------------------------------------------------------------
# Reliability idioms
# ----------------------------------------------------------------------


def test_pfd_reproduces_fig4b():
    frag = instantiate_reliability_idiom("pfd", "pfd")
    res = run_fragment(frag, {"pfd_observed": 10, "pfd_demands": 1000})
    assert res[frag.output("p")].mean == pytest.approx(0.011, abs=5e-4)


def test_pfd_limited_data_reproduces_fig5b_and_5c():
    frag = instantiate_reliability_idiom("pfd_limited_data", "pfd")
    prev = {"pfd_prev_observed": 200, "pfd_prev_demands": 2000,
            "pfd_similarity": "Minor differences"}
    res = run_fragment(frag, prev)
    assert res[frag.output("p")].mean == pytest.approx(0.125, abs=0.005)
    res_c = run_fragment(frag, dict(prev, pfd_observed=0, pfd_demands=500))
    assert 0.035 <= res_c[frag.output("p")].mean <= 0.046  # paper prints 0.04


def test_uncertain_accuracy_reproduces_fig6b():
    frag = instantiate_reliability_idiom("uncertain_accuracy", "acc")
    res = run_fragment(
        frag, {"acc_observed": 100, "acc_demands": 1000, "acc_accuracy": "Underestimated"}
    )
    assert res[frag.output("tne")].mean == pytest.approx(125, abs=1)


def test_ttf_reproduces_fig7b():
    frag = instantiate_reliability_idiom("ttf", "ttf", {"m": 4, "time_scale": 100})
    res = run_fragment(
        frag,
        {"ttf_obs_time_1": 80, "ttf_obs_time_2": 90, "ttf_obs_time_3": 110, "ttf_obs_time_4": 120},
    )
    # Gamma(5, 400) posterior predictive: mean TTF = 400/4 = 100
    assert res[frag.output("time_to_next_failure")].mean == pytest.approx(100, abs=4)
    assert res[frag.output("rate")].mean == pytest.approx(0.0125, abs=0.001)


def test_ttf_summary_reproduces_fig8b():
    frag = instantiate_reliability_idiom("ttf_summary", "ttf", {"mu": 100, "sigma2": 250})
    res = run_fragment(frag, {})
    assert res[frag.output("time_to_next_failure")].mean == pytest.approx(100, abs=3)


def test_failure_within_time_reproduces_fig9b():
    frag = instantiate_reliability_idiom(
        "failure_within_time", "fw", {"placeholder_rate": 0.01, "t_upper": 4000}
    )
    res = run_fragment(frag, {"fw_t": 10})
    p_fail = res[frag.output("probability_of_failure")].state_probabilities["True"]
    assert p_fail == pytest.approx(1 - pytest.approx(1.0).expected * 0.904837418, abs=2e-3)
    assert p_fail == pytest.approx(0.09516, abs=2e-3)


def test_reliability_bad_parameters():
    with pytest.raises(BadParameter):
        instantiate_reliability_idiom("ttf", "x", {"m": 0})
    with pytest.raises(BadParameter):
        instantiate_reliability_idiom("ttf_summary", "x", {"mu": 100, "sigma2": -1})
    with pytest.raises(BadParameter):
        instantiate_reliability_idiom("pfd", "x", {"prior_upper": 2.0})
    with pytest.raises(BadParameter):
        instantiate_reliability_idiom("no_such_kind", "x")


# ----------------------------------------------------------------------
# Process idioms
# ----------------------------------------------------------------------


def test_rework_reproduces_fig10b():
    frag = instantiate_process_idiom("rework", "rw")
    res = run_fragment(
        frag, {"rw_rework_process": "very low", "rw_rework_effort": "very low"}
    )
    assert res[frag.output("probability_of_fixing_fault")].mean == pytest.approx(0.03, abs=0.005)


def test_requirement_compliance_matches_beta_cdf():
    from scipy.special import betainc

    pfd = instantiate_reliability_idiom("pfd", "pfd")
    req = instantiate_process_idiom("requirement", "req", {"requirement_value": 0.011})
    spec = compose(
        [pfd, req], [PortBinding("pfd.p", "req.attribute", "merge")], title="compliance"
    )
    res = infer(build_model(spec), {"pfd_observed": 10, "pfd_demands": 1000})
    engine = res[req.output("compliant")].state_probabilities["True"]
    assert engine == pytest.approx(float(betainc(11, 991, 0.011)), abs=0.02)


def test_quality_concentrates_top_state():
    frag = instantiate_process_idiom("quality", "q", {"factors": ["f1", "f2"]})
    res = run_fragment(frag, {"q_f1": "very high", "q_f2": "very high"})
    top = res[frag.output("latent_quality_value")].state_probabilities["very high"]
    assert top > 0.9  # TNormal(0.9, 0.001, 0, 1) mass above 0.8


def test_quality_requires_factors():
    with pytest.raises(BadParameter):
        instantiate_process_idiom("quality", "q", {"factors": []})


# ----------------------------------------------------------------------
# Occurrence idioms
# ----------------------------------------------------------------------


def test_hazard_occurrence_reproduces_fig14b():
    frag = instantiate_occurrence_idiom("hazard_occurrence", "h", {"base": 0.15})
    res = run_fragment(frag, {"h_usage": "minor deviations"})
    assert res[frag.output("adjusted_probability")].mean == pytest.approx(0.18, abs=0.005)


def test_hazard_occurrence_neutral_state_is_identity():
    frag = instantiate_occurrence_idiom("hazard_occurrence", "h", {"base": 0.15})
    res = run_fragment(frag, {"h_usage": "intended use"})
    assert res[frag.output("adjusted_probability")].mean == pytest.approx(0.15, abs=1e-6)


def test_injury_event_reproduces_fig15b():
    frag = instantiate_occurrence_idiom("injury_event", "inj")
    res = run_fragment(
        frag, {"inj_p_hazard": 0.18, "inj_p_injury_given_hazard": 0.08}
    )
    assert res[frag.output("p_injury")].mean == pytest.approx(0.0144, abs=5e-4)


def test_injury_event_never_exceeds_hazard_probability():
    # P(I) = P(H) x P(I|H) <= P(H) pointwise whenever P(I|H) <= 1
    frag = instantiate_occurrence_idiom("injury_event", "inj")
    model = build_model(ModelSpec(frag.nodes))
    import numpy as np

    for p_h in (0.05, 0.18, 0.9):
        res = infer(model, {"inj_p_hazard": p_h})
        post = res[frag.output("p_injury")]
        mass_above = float(np.sum(post.masses[post.cells[:, 0] > p_h + 1e-9]))
        assert mass_above < 1e-12
        assert post.mean <= p_h + 1e-9


def test_product_injury_reproduces_fig16b():
    frag = instantiate_occurrence_idiom("product_injury", "pi")
    res = run_fragment(frag, {"pi_p_injury": 0.015, "pi_instances": 100000})
    assert res[frag.output("injury_count")].mean == pytest.approx(1500, abs=60)


def test_occurrence_bad_parameters():
    with pytest.raises(BadParameter):
        instantiate_occurrence_idiom("product_injury", "x", {"instances_upper": -5})
    with pytest.raises(BadParameter):
        instantiate_occurrence_idiom(
            "hazard_occurrence", "x", {"factors": [("f", ("a", "b"), (-1.0, 1.0))]}
        )


# ----------------------------------------------------------------------
# Risk idioms
# ----------------------------------------------------------------------


def test_risk_control_reproduces_fig17b():
    frag = instantiate_risk_idiom("risk_control", "rc")
    res = run_fragment(frag, {"rc_control": 0.5, "rc_event_probability": 0.08})
    assert res[frag.output("residual_probability")].mean == pytest.approx(0.04, abs=1e-3)


def test_risk_control_residual_never_exceeds_event_probability():
    frag = instantiate_risk_idiom("risk_control", "rc")
    for c in (0.0, 0.25, 0.5, 1.0):
        res = run_fragment(frag, {"rc_control": c, "rc_event_probability": 0.08})
        residual = res[frag.output("residual_probability")].mean
        assert residual <= 0.08 + 1e-9
        if c == 0.0:
            assert residual == pytest.approx(0.08, abs=1e-9)


def test_risk_score_reproduces_fig18b():
    frag = instantiate_risk_idiom("risk_score", "risk")
    res = run_fragment(frag, {"risk_p_major_injury": 0.04, "risk_p_minor_injury": 0.01})
    assert res[frag.output("risk_level")].state_probabilities["very high"] >= 0.95


def test_risk_score_argmax_saturation_invariance():
    frag = instantiate_risk_idiom("risk_score", "risk")
    modes = []
    for major, minor in ((0.04, 0.01), (0.08, 0.02), (0.4, 0.1)):
        res = run_fragment(frag, {"risk_p_major_injury": major, "risk_p_minor_injury": minor})
        probs = res[frag.output("risk_level")].state_probabilities
        modes.append(max(probs, key=probs.get))
    assert set(modes) == {"very high"}  # min(1, .) saturates for all three


def test_risk_tolerability_reproduces_fig19b():
    frag = instantiate_risk_idiom("risk_tolerability", "tol")
    res = run_fragment(frag, {"tol_benefit": "medium", "tol_risk": "very high"})
    probs = res[frag.output("tolerability")].state_probabilities
    assert probs["low"] + probs["very low"] >= 0.90


def test_risk_perception_reproduces_fig20b():
    frag = instantiate_risk_idiom("risk_perception", "pc")
    res = run_fragment(frag, {"pc_injury_likelihood": "high", "pc_injury_severity": "high"})
    probs = res[frag.output("perceived_risk")].state_probabilities
    assert max(probs, key=probs.get) == "high"


# ----------------------------------------------------------------------
# Composition
# ----------------------------------------------------------------------


def test_fig13_composite_baseline_and_quality():
    pfd = instantiate_reliability_idiom("pfd", "pfd")
    quality = instantiate_process_idiom(
        "quality", "quality",
        {"factors": ["defects", "drifts"], "latent_name": "manufacturing_quality"},
    )
    hazard = instantiate_occurrence_idiom(
        "hazard_occurrence", "hazard",
        {"factors": [("quality_effect",
                      ("very low", "low", "medium", "high", "very high"),
                      (1.5, 1.25, 1.0, 0.9, 0.8))]},
    )
    spec = compose(
        [pfd, quality, hazard],
        [
            PortBinding("pfd.p", "hazard.base_probability", "merge"),
            PortBinding("quality.latent_quality_value", "hazard.quality_effect", "merge"),
        ],
    )
    model = build_model(spec)
    base = infer(model, {"pfd_observed": 20, "pfd_demands": 200})
    assert base["pfd_p"].mean == pytest.approx(21 / 202, rel=0.02)
    poor = infer(
        model,
        {"pfd_observed": 20, "pfd_demands": 200, "quality_manufacturing_quality": "very low"},
    )
    assert 0.140 <= poor["hazard_adjusted_probability"].mean <= 0.160


def test_aircraft_composite_reproduces_fig22b():
    engine = instantiate_reliability_idiom("ttf", "engine", {"m": 3, "time_scale": 5000})
    mission = instantiate_reliability_idiom(
        "failure_within_time", "mission", {"t_upper": 200000}
    )
    brakes = instantiate_reliability_idiom(
        "pfd", "brakes", {"prior_upper": 0.001, "include_demand_event": True}
    )
    system = instantiate_reliability_idiom(
        "failure_combination", "system",
        {"causes": [("engine_failure", 0.5), ("braking_failure", 0.5)]},
    )
    spec = compose(
        [engine, mission, brakes, system],
        [
            PortBinding("engine.time_to_next_failure", "mission.ttf_distribution", "merge"),
            PortBinding("mission.probability_of_failure", "system.engine_failure", "merge"),
            PortBinding("brakes.fails_on_demand", "system.braking_failure", "merge"),
        ],
        title="aircraft",
    )
    res = infer(
        build_model(spec),
        {"engine_obs_time_1": 6000, "engine_obs_time_2": 5000, "engine_obs_time_3": 4000,
         "mission_t": 6, "brakes_observed": 10, "brakes_demands": 1000000},
    )
    p_fail = res["system_failure"].state_probabilities["True"]
    assert 0.0006 <= p_fail <= 0.0010  # paper prints 0.0008


def test_compose_is_associative_up_to_nesting():
    pfd = instantiate_reliability_idiom("pfd", "pfd")
    injury = instantiate_occurrence_idiom("injury_event", "inj")
    count = instantiate_occurrence_idiom("product_injury", "pi")
    b1 = PortBinding("pfd.p", "inj.probability_of_hazard", "merge")
    b2 = PortBinding("inj.p_injury", "pi.p_injury", "merge")

    flat = compose([pfd, injury, count], [b1, b2])

    inner = compose([pfd, injury], [b1])
    wrapped = IdiomFragment.from_model(
        inner, "stage1", outputs={"p_injury": injury.output("p_injury")}
    )
    nested = compose([wrapped, count], [PortBinding("stage1.p_injury", "pi.p_injury", "merge")])

    evidence = {"pfd_observed": 10, "pfd_demands": 1000,
                "inj_p_injury_given_hazard": 0.08, "pi_instances": 100000}
    res_flat = infer(build_model(flat), evidence)
    res_nested = infer(build_model(nested), evidence)
    assert res_flat["pi_injury_count"].mean == pytest.approx(
        res_nested["pi_injury_count"].mean, rel=1e-9
    )


def test_compose_errors():
    pfd = instantiate_reliability_idiom("pfd", "pfd")
    injury = instantiate_occurrence_idiom("injury_event", "inj")
    with pytest.raises(DuplicateBinding):
        compose(
            [pfd, injury],
            [
                PortBinding("pfd.p", "inj.probability_of_hazard", "merge"),
                PortBinding("pfd.p", "inj.probability_of_hazard", "merge"),
            ],
        )
    rework = instantiate_process_idiom("rework", "rw")
    with pytest.raises(PortKindMismatch):
        compose(
            [pfd, rework],
            [PortBinding("pfd.p", "rw.rework_process", "merge")],  # continuous vs ranked
        )
    # self-merge through a nested wrapper
    wrapped = IdiomFragment.from_model(
        ModelSpec(pfd.nodes), "loop", inputs={"p": "pfd_p"}, outputs={"p": "pfd_p"}
    )
    with pytest.raises(DuplicateBinding):
        compose([wrapped], [PortBinding("loop.p", "loop.p", "merge")])


def test_link_binding_with_source_token():
    pfd = instantiate_reliability_idiom("pfd", "pfd")
    injury = instantiate_occurrence_idiom("injury_event", "inj")
    spec = compose(
        [pfd, injury],
        [PortBinding("pfd.p", "inj.probability_of_hazard", "link",
                     cpd="Arithmetic(min(1.0, source * 2))")],
    )
    res = infer(build_model(spec), {"pfd_p": 0.09, "inj_p_injury_given_hazard": 0.5})
    assert res["inj_p_hazard"].mean == pytest.approx(0.18, abs=1e-6)
    assert res["inj_p_injury"].mean == pytest.approx(0.09, abs=1e-6)


def test_link_binding_creates_cycle_error():
    a = instantiate_occurrence_idiom("injury_event", "a")
    with pytest.raises((CycleError, DuplicateBinding)):
        compose(
            [a],
            [PortBinding("a.p_injury", "a.probability_of_hazard", "link",
                         cpd="Arithmetic(source)")],
        )
