"""Reusable product-safety model fragments and their composition.

Each template expands deterministically into an IdiomFragment: a bundle of
nodes (namespaced by instance id) with named input and output ports. Output
ports are the nodes whose posterior is the fragment's headline quantity.
Fragments compose by merging an output port onto another fragment's input
port (identifying the nodes) or by linking with an explicit CPD.

Node ids join the instance id and the local name with an underscore so the
ids stay valid expression identifiers; the fragment records port names and
grouping separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import expressions as ex
from .errors import BadParameter, DuplicateBinding, PortKindMismatch
from .graph import (
    Cpd,
    ExpressionCpd,
    ModelSpec,
    Node,
    NodeKind,
    PartitionedCpd,
    TableCpd,
    build_model,
)

__all__ = [
    "IdiomFragment",
    "PortBinding",
    "RANKED_5",
    "instantiate_reliability_idiom",
    "instantiate_process_idiom",
    "instantiate_occurrence_idiom",
    "instantiate_risk_idiom",
    "compose",
]

RANKED_5 = ("very low", "low", "medium", "high", "very high")
_ACCURACY_STATES = ("Overestimated", "Accurate", "Underestimated")
_SIMILARITY_STATES = ("Similar", "Minor differences", "Major differences")

RELIABILITY_KINDS = (
    "pfd",
    "pfd_limited_data",
    "uncertain_accuracy",
    "ttf",
    "ttf_summary",
    "failure_within_time",
    "failure_combination",
)
PROCESS_KINDS = ("rework", "requirement", "quality")
OCCURRENCE_KINDS = ("hazard_occurrence", "injury_event", "product_injury")
RISK_KINDS = ("risk_control", "risk_score", "risk_tolerability", "risk_perception")


@dataclass(frozen=True)
class IdiomFragment:
    """A parameterized node/CPD bundle with named input and output ports."""

    kind: str
    instance: str
    nodes: tuple[Node, ...]
    inputs: dict[str, str] = field(default_factory=dict)  # port name -> node id
    outputs: dict[str, str] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    def output(self, port: str) -> str:
        if port not in self.outputs:
            raise BadParameter(f"fragment {self.instance!r} has no output port {port!r}")
        return self.outputs[port]

    def input(self, port: str) -> str:
        if port not in self.inputs:
            raise BadParameter(f"fragment {self.instance!r} has no input port {port!r}")
        return self.inputs[port]

    @staticmethod
    def from_model(
        spec: ModelSpec,
        instance: str,
        inputs: dict[str, str] | None = None,
        outputs: dict[str, str] | None = None,
        kind: str = "composite",
    ) -> "IdiomFragment":
        """Wrap an already-composed model as a fragment (ids kept as-is),
        so composition nests."""
        return IdiomFragment(
            kind=kind,
            instance=instance,
            nodes=tuple(spec.nodes),
            inputs=dict(inputs or {}),
            outputs=dict(outputs or {}),
            params={},
        )


@dataclass(frozen=True)
class PortBinding:
    """Connect ``from_port`` (an output, "instance.port") to ``to_port``
    (an input). Merge identifies the two nodes; link keeps both and rewrites
    the target's CPD (the token ``source`` in ``cpd`` denotes the from-node).
    """

    from_port: str
    to_port: str
    mode: str = "merge"  # "merge" | "link"
    cpd: str | dict | None = None  # link mode: expression text or partitioned map


def _nid(instance: str, local: str) -> str:
    return f"{instance}_{local}" if instance else local


def _expr(text: str) -> ExpressionCpd:
    return ExpressionCpd.parse(text)


def _uniform_table(states) -> TableCpd:
    return TableCpd.uniform(len(states))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise BadParameter(message)


# ----------------------------------------------------------------------
# Reliability idioms (PFD and TTF families)
# ----------------------------------------------------------------------


def instantiate_reliability_idiom(kind: str, instance: str, params: dict | None = None) -> IdiomFragment:
    """Expand one of the reliability templates.

    Kinds and their parameters:

    * ``pfd`` -- hazard or failure per demand. ``prior_upper`` (default 1.0)
      caps the ignorant uniform prior on the per-demand probability;
      ``demands_upper`` (default 1e9). Out port ``p``; enter evidence on
      ``<instance>_observed`` and ``<instance>_demands``.
    * ``pfd_limited_data`` -- adds a previous-system branch and a similarity
      selector with multipliers (1, 1.25, 2) and variance 1e-4.
    * ``uncertain_accuracy`` -- observation-accuracy selector around the true
      number of events (x1.2 / exact / x0.8 floored at zero, variance
      1e-4 * tne). Out ports ``tne`` and ``p``.
    * ``ttf`` -- ``m`` observed-failure-time nodes drive an assessed failure
      rate (uniform prior capped at 100 / ``time_scale``) and the time to
      next failure. Out ports ``rate``, ``time_to_next_failure``.
    * ``ttf_summary`` -- summary statistics ``mu``/``sigma2`` of observed
      failure times; rate = 1 / observed time. Same out ports.
    * ``failure_within_time`` -- Boolean P(T <= t). In ports
      ``ttf_distribution`` and ``t``; out port ``probability_of_failure``.
    """
    params = dict(params or {})
    if kind not in RELIABILITY_KINDS:
        raise BadParameter(f"unknown reliability idiom kind {kind!r}")
    n = lambda local: _nid(instance, local)

    if kind == "pfd":
        prior_upper = float(params.get("prior_upper", 1.0))
        demands_upper = float(params.get("demands_upper", 1e9))
        _require(0 < prior_upper <= 1.0, "prior_upper must lie in (0, 1]")
        _require(demands_upper >= 1, "demands_upper must be >= 1")
        nodes = [
            Node(n("p"), NodeKind.CONTINUOUS, bounds=(0.0, prior_upper),
                 cpd=_expr(f"Uniform(0, {prior_upper!r})")),
            Node(n("demands"), NodeKind.INTEGER, bounds=(0, demands_upper),
                 cpd=_expr(f"Uniform(0, {demands_upper!r})")),
            Node(n("observed"), NodeKind.INTEGER, parents=(n("demands"), n("p")),
                 cpd=_expr(f"Binomial({n('demands')}, {n('p')})")),
        ]
        outputs = {"p": n("p")}
        if params.get("include_demand_event"):
            # hazard or failure event on a single further demand
            nodes.append(
                Node(n("fails_on_demand"), NodeKind.BOOLEAN, states=("False", "True"),
                     parents=(n("p"),), cpd=_expr(f"Binomial(1, {n('p')})"))
            )
            outputs["fails_on_demand"] = n("fails_on_demand")
        return IdiomFragment(kind, instance, tuple(nodes), outputs=outputs, params=params)

    if kind == "pfd_limited_data":
        mults = params.get("multipliers", (1.0, 1.25, 2.0))
        variance = float(params.get("variance", 1e-4))
        demands_upper = float(params.get("demands_upper", 1e9))
        _require(len(mults) == len(_SIMILARITY_STATES), "need one multiplier per similarity state")
        _require(all(m > 0 for m in mults), "similarity multipliers must be positive")
        _require(variance > 0, "variance must be positive")
        cases = {
            state: f"Normal({n('prev_p')} * {float(m)!r}, {variance!r})"
            for state, m in zip(_SIMILARITY_STATES, mults)
        }
        nodes = [
            Node(n("prev_p"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0), cpd=_expr("Uniform(0, 1)")),
            Node(n("prev_demands"), NodeKind.INTEGER, bounds=(0, demands_upper),
                 cpd=_expr(f"Uniform(0, {demands_upper!r})")),
            Node(n("prev_observed"), NodeKind.INTEGER,
                 parents=(n("prev_demands"), n("prev_p")),
                 cpd=_expr(f"Binomial({n('prev_demands')}, {n('prev_p')})")),
            Node(n("similarity"), NodeKind.LABELLED, states=_SIMILARITY_STATES,
                 cpd=_uniform_table(_SIMILARITY_STATES)),
            Node(n("p"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 parents=(n("similarity"), n("prev_p")),
                 cpd=PartitionedCpd.parse(n("similarity"), cases)),
        ]
        if params.get("include_current", True):
            nodes += [
                Node(n("demands"), NodeKind.INTEGER, bounds=(0, demands_upper),
                     cpd=_expr(f"Uniform(0, {demands_upper!r})")),
                Node(n("observed"), NodeKind.INTEGER, parents=(n("demands"), n("p")),
                     cpd=_expr(f"Binomial({n('demands')}, {n('p')})")),
            ]
        return IdiomFragment(kind, instance, tuple(nodes), outputs={"p": n("p")}, params=params)

    if kind == "uncertain_accuracy":
        over = float(params.get("over_factor", 1.2))
        under = float(params.get("under_factor", 0.8))
        var_scale = float(params.get("variance_scale", 1e-4))
        demands_upper = float(params.get("demands_upper", 1e9))
        _require(over > 0 and under >= 0, "accuracy multipliers must be nonnegative")
        _require(var_scale > 0, "variance_scale must be positive")
        cases = {
            "Overestimated": f"Normal({n('tne')} * {over!r}, {var_scale!r} * {n('tne')})",
            "Accurate": f"Arithmetic({n('tne')})",
            "Underestimated": f"Normal(max(0, {n('tne')} * {under!r}), {var_scale!r} * {n('tne')})",
        }
        nodes = (
            Node(n("p"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0), cpd=_expr("Uniform(0, 1)")),
            Node(n("demands"), NodeKind.INTEGER, bounds=(0, demands_upper),
                 cpd=_expr(f"Uniform(0, {demands_upper!r})")),
            Node(n("tne"), NodeKind.INTEGER, parents=(n("demands"), n("p")),
                 cpd=_expr(f"Binomial({n('demands')}, {n('p')})")),
            Node(n("accuracy"), NodeKind.LABELLED, states=_ACCURACY_STATES,
                 cpd=_uniform_table(_ACCURACY_STATES)),
            Node(n("observed"), NodeKind.INTEGER, bounds=(0, 2 * demands_upper),
                 parents=(n("accuracy"), n("tne")),
                 cpd=PartitionedCpd.parse(n("accuracy"), cases)),
        )
        return IdiomFragment(
            kind, instance, nodes, outputs={"tne": n("tne"), "p": n("p")}, params=params
        )

    if kind == "ttf":
        m = int(params.get("m", 1))
        time_scale = float(params.get("time_scale", 100.0))
        _require(m >= 1, "ttf needs at least one observed-failure-time node (m >= 1)")
        _require(time_scale > 0, "time_scale must be positive")
        rate_cap = 100.0 / time_scale
        t_max = 40.0 * time_scale
        nodes = [
            Node(n("rate"), NodeKind.CONTINUOUS, bounds=(1e-12 * rate_cap, rate_cap),
                 cpd=_expr(f"Uniform(0, {rate_cap!r})")),
        ]
        for i in range(1, m + 1):
            nodes.append(
                Node(n(f"obs_time_{i}"), NodeKind.CONTINUOUS, bounds=(0.0, t_max),
                     parents=(n("rate"),), cpd=_expr(f"Exponential({n('rate')})"))
            )
        nodes.append(
            Node(n("time_to_next_failure"), NodeKind.CONTINUOUS, bounds=(0.0, t_max),
                 parents=(n("rate"),), cpd=_expr(f"Exponential({n('rate')})"))
        )
        return IdiomFragment(
            kind, instance, tuple(nodes),
            outputs={"rate": n("rate"), "time_to_next_failure": n("time_to_next_failure")},
            params=params,
        )

    if kind == "ttf_summary":
        mu = params.get("mu")
        sigma2 = params.get("sigma2")
        _require(mu is not None and sigma2 is not None, "ttf_summary needs mu and sigma2")
        mu = float(mu)
        sigma2 = float(sigma2)
        _require(mu > 0, "mu must be positive")
        _require(sigma2 > 0, "sigma2 must be positive")
        # truncation floor keeps 1/obs_time bounded; mass below mu/100 is
        # negligible for any sane coefficient of variation
        lo = mu / 100.0
        hi = mu + 10.0 * math.sqrt(sigma2)
        t_max = 40.0 * mu
        nodes = (
            Node(n("obs_time"), NodeKind.CONTINUOUS,
                 cpd=_expr(f"TNormal({mu!r}, {sigma2!r}, {lo!r}, {hi!r})")),
            Node(n("rate"), NodeKind.CONTINUOUS, parents=(n("obs_time"),),
                 cpd=_expr(f"Arithmetic(1 / {n('obs_time')})")),
            Node(n("time_to_next_failure"), NodeKind.CONTINUOUS, bounds=(0.0, t_max),
                 parents=(n("rate"),), cpd=_expr(f"Exponential({n('rate')})")),
        )
        return IdiomFragment(
            kind, instance, nodes,
            outputs={"rate": n("rate"), "time_to_next_failure": n("time_to_next_failure")},
            params=params,
        )

    if kind == "failure_within_time":
        rate = float(params.get("placeholder_rate", 0.01))
        _require(rate > 0, "placeholder_rate must be positive")
        t_max = float(params.get("t_upper", 40.0 / rate))
        nodes = (
            Node(n("ttf"), NodeKind.CONTINUOUS, bounds=(0.0, t_max),
                 cpd=_expr(f"Exponential({rate!r})")),
            Node(n("t"), NodeKind.CONTINUOUS, bounds=(0.0, t_max),
                 cpd=_expr(f"Uniform(0, {t_max!r})")),
            Node(n("fails_within_t"), NodeKind.BOOLEAN, states=("False", "True"),
                 parents=(n("ttf"), n("t")), cpd=_expr(f"{n('ttf')} <= {n('t')}")),
        )
        return IdiomFragment(
            kind, instance, nodes,
            inputs={"ttf_distribution": n("ttf"), "t": n("t")},
            outputs={"probability_of_failure": n("fails_within_t")},
            params=params,
        )

    # failure_combination: independent Boolean causes, each enabling system
    # failure with its own weight (noisy-OR)
    causes = params.get("causes")
    _require(bool(causes), "failure_combination needs a nonempty cause list")
    parsed = []
    for item in causes:
        name, weight = (item, 0.5) if isinstance(item, str) else (item[0], float(item[1]))
        _require(0.0 <= weight <= 1.0, f"cause weight for {name!r} must lie in [0, 1]")
        parsed.append((str(name), weight))
    nodes = []
    inputs = {}
    for name, _w in parsed:
        nodes.append(
            Node(n(name), NodeKind.BOOLEAN, states=("False", "True"),
                 cpd=TableCpd(((0.5, 0.5),)))
        )
        inputs[name] = n(name)
    product = " * ".join(f"(1 - {w!r} * {n(name)})" for name, w in parsed)
    nodes.append(
        Node(n("failure"), NodeKind.BOOLEAN, states=("False", "True"),
             parents=tuple(n(name) for name, _ in parsed),
             cpd=_expr(f"Binomial(1, 1 - {product})"))
    )
    return IdiomFragment(
        kind, instance, tuple(nodes),
        inputs=inputs,
        outputs={"failure": n("failure")},
        params=params,
    )


# ----------------------------------------------------------------------
# Process idioms (rework, requirement, quality)
# ----------------------------------------------------------------------


def instantiate_process_idiom(kind: str, instance: str, params: dict | None = None) -> IdiomFragment:
    """Expand rework, requirement or quality templates.

    * ``rework``: 5-point ranked process-quality and effort with uniform
      priors, an overall-effectiveness ranked node, and a partitioned
      fixing-probability (means 0.01/0.15/0.4/0.6/0.8, variance 0.001).
      Out port ``probability_of_fixing_fault``.
    * ``requirement``: compliance is P(assessed attribute <= requirement).
      ``requirement_value`` (number) is required; ``attribute_prior`` is an
      expression string (default ``Uniform(0, 1)``). In port ``attribute``;
      out port ``compliant``.
    * ``quality``: ranked causal factors (equal weights by default) drive a
      latent ranked value observed through ranked indicators. ``factors`` is
      a list of names or (name, weight) pairs; ``indicators`` a list of
      names. In ports per factor/indicator; out port ``latent_quality_value``.
    """
    params = dict(params or {})
    if kind not in PROCESS_KINDS:
        raise BadParameter(f"unknown process idiom kind {kind!r}")
    n = lambda local: _nid(instance, local)

    if kind == "rework":
        variance = float(params.get("variance", 0.001))
        means = params.get("fixing_means", (0.01, 0.15, 0.4, 0.6, 0.8))
        _require(variance > 0, "variance must be positive")
        _require(len(means) == 5, "fixing_means needs five entries")
        cases = {
            state: f"TNormal({float(mean)!r}, {variance!r}, 0.0, 1.0)"
            for state, mean in zip(RANKED_5, means)
        }
        nodes = (
            Node(n("rework_process"), NodeKind.RANKED, states=RANKED_5, cpd=_uniform_table(RANKED_5)),
            Node(n("rework_effort"), NodeKind.RANKED, states=RANKED_5, cpd=_uniform_table(RANKED_5)),
            Node(n("overall_effectiveness"), NodeKind.RANKED, states=RANKED_5,
                 parents=(n("rework_process"), n("rework_effort")),
                 cpd=_expr(
                     f"TNormal(wmean(1.0, {n('rework_process')}, 1.0, {n('rework_effort')}), "
                     f"{variance!r}, 0, 1)"
                 )),
            Node(n("fixing_probability"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 parents=(n("overall_effectiveness"),),
                 cpd=PartitionedCpd.parse(n("overall_effectiveness"), cases)),
        )
        return IdiomFragment(
            kind, instance, nodes,
            inputs={"rework_process": n("rework_process"), "rework_effort": n("rework_effort")},
            outputs={"probability_of_fixing_fault": n("fixing_probability")},
            params=params,
        )

    if kind == "requirement":
        req = params.get("requirement_value")
        _require(req is not None, "requirement needs requirement_value")
        req = float(req)
        prior = params.get("attribute_prior", "Uniform(0, 1)")
        ex.parse_expression(prior)  # validate early
        nodes = (
            Node(n("assessed"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0), cpd=_expr(prior)),
            Node(n("requirement"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 cpd=_expr(f"Arithmetic({req!r})")),
            Node(n("compliant"), NodeKind.BOOLEAN, states=("False", "True"),
                 parents=(n("assessed"), n("requirement")),
                 cpd=_expr(f"{n('assessed')} <= {n('requirement')}")),
        )
        return IdiomFragment(
            kind, instance, nodes,
            inputs={"attribute": n("assessed")},
            outputs={"compliant": n("compliant")},
            params=params,
        )

    # quality
    factors = _name_weight_list(params.get("factors"))
    indicators = list(params.get("indicators", ()))
    variance = float(params.get("variance", 0.001))
    ind_variance = float(params.get("indicator_variance", 0.001))
    _require(len(factors) >= 1, "quality needs a nonempty factor list")
    _require(variance > 0 and ind_variance > 0, "variances must be positive")
    latent_name = params.get("latent_name", "latent_quality_value")
    nodes = []
    inputs = {}
    for fname, _w in factors:
        nodes.append(Node(n(fname), NodeKind.RANKED, states=RANKED_5, cpd=_uniform_table(RANKED_5)))
        inputs[fname] = n(fname)
    terms = ", ".join(f"{float(w)!r}, {n(fname)}" for fname, w in factors)
    nodes.append(
        Node(n(latent_name), NodeKind.RANKED, states=RANKED_5,
             parents=tuple(n(fname) for fname, _ in factors),
             cpd=_expr(f"TNormal(wmean({terms}), {variance!r}, 0, 1)"))
    )
    for iname in indicators:
        nodes.append(
            Node(n(iname), NodeKind.RANKED, states=RANKED_5, parents=(n(latent_name),),
                 cpd=_expr(f"TNormal({n(latent_name)}, {ind_variance!r}, 0, 1)"))
        )
        inputs[iname] = n(iname)
    return IdiomFragment(
        kind, instance, tuple(nodes),
        inputs=inputs,
        outputs={"latent_quality_value": n(latent_name)},
        params=params,
    )


def _name_weight_list(raw) -> list[tuple[str, float]]:
    if not raw:
        return []
    out = []
    for item in raw:
        if isinstance(item, str):
            out.append((item, 1.0))
        else:
            name, weight = item
            if float(weight) < 0:
                raise BadParameter(f"factor weight for {name!r} must be nonnegative")
            out.append((str(name), float(weight)))
    return out


# ----------------------------------------------------------------------
# Occurrence idioms
# ----------------------------------------------------------------------


def instantiate_occurrence_idiom(kind: str, instance: str, params: dict | None = None) -> IdiomFragment:
    """Expand hazard-occurrence, injury-event or product-injury templates.

    * ``hazard_occurrence``: a base probability adjusted by per-state factor
      multipliers, clipped to [0, 1]. ``factors`` is a list of
      ``(name, states, multipliers)`` (default: one usage-deviation factor
      with multipliers 1.0/1.2/1.5); ``base`` may be a number (fixed) or an
      expression string prior. Out port ``adjusted_probability``.
    * ``injury_event``: P(I) = P(H) x P(I|H). In ports
      ``probability_of_hazard`` and ``probability_of_injury_given_hazard``;
      out port ``p_injury``.
    * ``product_injury``: injury count over ``n`` product instances,
      Binomial(n, p). In port ``p_injury``; out port ``injury_count``.
    """
    params = dict(params or {})
    if kind not in OCCURRENCE_KINDS:
        raise BadParameter(f"unknown occurrence idiom kind {kind!r}")
    n = lambda local: _nid(instance, local)

    if kind == "hazard_occurrence":
        base = params.get("base", "Uniform(0, 1)")
        factors = params.get(
            "factors",
            (("usage", ("intended use", "minor deviations", "major deviations"), (1.0, 1.2, 1.5)),),
        )
        _require(len(factors) >= 1, "hazard_occurrence needs at least one factor")
        base_cpd = (
            _expr(f"Arithmetic({float(base)!r})")
            if isinstance(base, (int, float))
            else _expr(str(base))
        )
        nodes = [Node(n("base_probability"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0), cpd=base_cpd)]
        inputs = {"base_probability": n("base_probability")}
        mult_ids = []
        for fname, states, mults in factors:
            states = tuple(states)
            _require(len(states) == len(mults), f"factor {fname!r} needs one multiplier per state")
            _require(all(float(m) >= 0 for m in mults), f"factor {fname!r} multipliers must be >= 0")
            kind_f = NodeKind.RANKED if states == RANKED_5 else NodeKind.LABELLED
            nodes.append(Node(n(fname), kind_f, states=states, cpd=_uniform_table(states)))
            inputs[fname] = n(fname)
            cases = {s: f"Arithmetic({float(m)!r})" for s, m in zip(states, mults)}
            mult_id = n(f"{fname}_multiplier")
            nodes.append(
                Node(mult_id, NodeKind.CONTINUOUS, parents=(n(fname),),
                     cpd=PartitionedCpd.parse(n(fname), cases))
            )
            mult_ids.append(mult_id)
        product = " * ".join([n("base_probability")] + mult_ids)
        nodes.append(
            Node(n("adjusted_probability"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 parents=tuple([n("base_probability")] + mult_ids),
                 cpd=_expr(f"Arithmetic(min(1.0, {product}))"))
        )
        return IdiomFragment(
            kind, instance, tuple(nodes),
            inputs=inputs,
            outputs={"adjusted_probability": n("adjusted_probability")},
            params=params,
        )

    if kind == "injury_event":
        nodes = (
            Node(n("p_hazard"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0), cpd=_expr("Uniform(0, 1)")),
            Node(n("p_injury_given_hazard"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 cpd=_expr("Uniform(0, 1)")),
            Node(n("p_injury"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 parents=(n("p_hazard"), n("p_injury_given_hazard")),
                 cpd=_expr(f"Arithmetic({n('p_hazard')} * {n('p_injury_given_hazard')})")),
        )
        return IdiomFragment(
            kind, instance, nodes,
            inputs={
                "probability_of_hazard": n("p_hazard"),
                "probability_of_injury_given_hazard": n("p_injury_given_hazard"),
            },
            outputs={"p_injury": n("p_injury")},
            params=params,
        )

    # product_injury
    n_upper = float(params.get("instances_upper", 1e9))
    _require(n_upper >= 0, "instances_upper must be >= 0")
    nodes = (
        Node(n("p_injury"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0), cpd=_expr("Uniform(0, 1)")),
        Node(n("instances"), NodeKind.INTEGER, bounds=(0, n_upper),
             cpd=_expr(f"Uniform(0, {n_upper!r})")),
        Node(n("injury_count"), NodeKind.INTEGER, parents=(n("instances"), n("p_injury")),
             cpd=_expr(f"Binomial({n('instances')}, {n('p_injury')})")),
    )
    return IdiomFragment(
        kind, instance, nodes,
        inputs={"p_injury": n("p_injury")},
        outputs={"injury_count": n("injury_count")},
        params=params,
    )


# ----------------------------------------------------------------------
# Risk idioms
# ----------------------------------------------------------------------


def instantiate_risk_idiom(kind: str, instance: str, params: dict | None = None) -> IdiomFragment:
    """Expand risk-control, risk-score, risk-tolerability or risk-perception.

    * ``risk_control``: residual = (1 - C) x E. In ports
      ``control_probability`` and ``event_probability``; out port
      ``residual_probability``.
    * ``risk_score``: 5-point ranked risk from major/minor injury
      probabilities via TNormal(min(1, scale x (major + minor_weight x
      minor)), variance, 0, 1); defaults scale=100, minor_weight=0.5,
      variance=0.001. Out port ``risk_level``.
    * ``risk_tolerability``: ranked benefit vs ranked risk;
      tolerability = TNormal(wmean(1, benefit, 1, 1 - risk), 0.001, 0, 1).
      Out port ``tolerability``.
    * ``risk_perception``: ranked factors and indicators around a latent
      perceived-risk value (same mechanics as the quality idiom). Out port
      ``perceived_risk``.
    """
    params = dict(params or {})
    if kind not in RISK_KINDS:
        raise BadParameter(f"unknown risk idiom kind {kind!r}")
    n = lambda local: _nid(instance, local)

    if kind == "risk_control":
        nodes = (
            Node(n("control"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0), cpd=_expr("Uniform(0, 1)")),
            Node(n("event_probability"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 cpd=_expr("Uniform(0, 1)")),
            Node(n("residual_probability"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 parents=(n("control"), n("event_probability")),
                 cpd=_expr(f"Arithmetic((1 - {n('control')}) * {n('event_probability')})")),
        )
        return IdiomFragment(
            kind, instance, nodes,
            inputs={
                "control_probability": n("control"),
                "event_probability": n("event_probability"),
            },
            outputs={"residual_probability": n("residual_probability")},
            params=params,
        )

    if kind == "risk_score":
        scale = float(params.get("scale", 100.0))
        minor_weight = float(params.get("minor_weight", 0.5))
        variance = float(params.get("variance", 0.001))
        _require(scale > 0 and minor_weight >= 0 and variance > 0, "bad risk_score parameters")
        nodes = (
            Node(n("p_major_injury"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 cpd=_expr("Uniform(0, 1)")),
            Node(n("p_minor_injury"), NodeKind.CONTINUOUS, bounds=(0.0, 1.0),
                 cpd=_expr("Uniform(0, 1)")),
            Node(n("risk_level"), NodeKind.RANKED, states=RANKED_5,
                 parents=(n("p_major_injury"), n("p_minor_injury")),
                 cpd=_expr(
                     f"TNormal(min(1.0, {scale!r} * ({n('p_major_injury')} + "
                     f"{minor_weight!r} * {n('p_minor_injury')})), {variance!r}, 0, 1)"
                 )),
        )
        return IdiomFragment(
            kind, instance, nodes,
            inputs={
                "p_major_injury": n("p_major_injury"),
                "p_minor_injury": n("p_minor_injury"),
            },
            outputs={"risk_level": n("risk_level")},
            params=params,
        )

    if kind == "risk_tolerability":
        variance = float(params.get("variance", 0.001))
        nodes = (
            Node(n("benefit"), NodeKind.RANKED, states=RANKED_5, cpd=_uniform_table(RANKED_5)),
            Node(n("risk"), NodeKind.RANKED, states=RANKED_5, cpd=_uniform_table(RANKED_5)),
            Node(n("tolerability"), NodeKind.RANKED, states=RANKED_5,
                 parents=(n("benefit"), n("risk")),
                 cpd=_expr(
                     f"TNormal(wmean(1.0, {n('benefit')}, 1.0, 1.0 - {n('risk')}), "
                     f"{variance!r}, 0, 1)"
                 )),
        )
        return IdiomFragment(
            kind, instance, nodes,
            inputs={"benefit": n("benefit"), "risk": n("risk")},
            outputs={"tolerability": n("tolerability")},
            params=params,
        )

    # risk_perception: reuse the quality mechanics with its own port name
    fragment = instantiate_process_idiom(
        "quality",
        instance,
        {
            "factors": params.get("factors", ("injury_likelihood", "injury_severity")),
            "indicators": params.get("indicators", ()),
            "variance": params.get("variance", 0.001),
            "indicator_variance": params.get("indicator_variance", 0.001),
            "latent_name": "perceived_risk",
        },
    )
    return IdiomFragment(
        "risk_perception",
        instance,
        fragment.nodes,
        inputs=fragment.inputs,
        outputs={"perceived_risk": fragment.outputs["latent_quality_value"]},
        params=params,
    )


# ----------------------------------------------------------------------
# Composition
# ----------------------------------------------------------------------


def _resolve_port(fragments: dict[str, IdiomFragment], ref: str, direction: str) -> tuple[str, str]:
    try:
        instance, port = ref.split(".", 1)
    except ValueError:
        raise BadParameter(f"port reference {ref!r} must look like 'instance.port'") from None
    if instance not in fragments:
        raise BadParameter(f"unknown fragment instance {instance!r} in {ref!r}")
    frag = fragments[instance]
    node_id = frag.output(port) if direction == "out" else frag.input(port)
    return instance, node_id


def _kinds_compatible(a: Node, b: Node) -> bool:
    if a.kind != b.kind:
        return False
    if a.kind.is_discrete:
        return a.states == b.states
    return True


def compose(fragments, bindings=(), title: str = "", metadata: dict | None = None) -> ModelSpec:
    """Assemble fragments into a single model spec.

    Merge bindings identify the source output node with the target input
    node; the surviving node keeps the upstream CPD when the upstream node
    has machinery (parents), otherwise the downstream fragment's declared
    prior wins and the upstream duplicate prior is dropped. Link bindings
    keep both nodes and replace the target's CPD with the supplied one (the
    identifier ``source`` refers to the from-node).

    Raises PortKindMismatch, DuplicateBinding, and any structural error
    (including CycleError) surfaced by compiling the composed spec.
    """
    frag_map: dict[str, IdiomFragment] = {}
    for frag in fragments:
        if frag.instance in frag_map:
            raise DuplicateBinding(f"duplicate fragment instance id {frag.instance!r}")
        frag_map[frag.instance] = frag

    nodes: dict[str, Node] = {}
    groups: dict[str, str] = {}
    for frag in fragments:
        for node in frag.nodes:
            if node.id in nodes:
                raise DuplicateBinding(f"node id {node.id!r} appears in two fragments")
            nodes[node.id] = node
            groups[node.id] = frag.instance

    bound_targets: set[str] = set()
    rename: dict[str, str] = {}

    def canon(node_id: str) -> str:
        while node_id in rename:
            node_id = rename[node_id]
        return node_id

    for binding in bindings:
        src_frag, src_id = _resolve_port(frag_map, binding.from_port, "out")
        dst_frag, dst_id = _resolve_port(frag_map, binding.to_port, "in")
        src_id = canon(src_id)
        dst_id = canon(dst_id)
        if binding.to_port in bound_targets:
            raise DuplicateBinding(f"input port {binding.to_port!r} bound twice")
        bound_targets.add(binding.to_port)
        if src_id == dst_id:
            raise DuplicateBinding(f"binding {binding.from_port!r} -> {binding.to_port!r} is a self-merge")
        src = nodes[src_id]
        dst = nodes[dst_id]

        if binding.mode == "merge":
            if not _kinds_compatible(src, dst):
                raise PortKindMismatch(
                    f"cannot merge {src_id!r} ({src.kind.value}) with {dst_id!r} ({dst.kind.value})"
                )
            if dst.parents:
                raise PortKindMismatch(f"input port node {dst_id!r} is not a root; cannot merge")
            survivor = src
            if not src.parents:
                # both are priors: the downstream fragment's declared prior wins
                survivor = Node(
                    id=src.id, kind=src.kind, states=src.states,
                    bounds=_merged_bounds(src, dst), parents=(), cpd=dst.cpd,
                )
            nodes[src_id] = survivor
            del nodes[dst_id]
            rename[dst_id] = src_id
        elif binding.mode == "link":
            if binding.cpd is None:
                raise BadParameter(f"link binding {binding.from_port!r} -> {binding.to_port!r} needs a cpd")
            new_cpd = _link_cpd(binding.cpd, src_id, dst)
            parents = tuple(dict.fromkeys((src_id,) + dst.parents))
            nodes[dst_id] = Node(
                id=dst.id, kind=dst.kind, states=dst.states, bounds=dst.bounds,
                parents=parents, cpd=new_cpd,
            )
        else:
            raise BadParameter(f"unknown binding mode {binding.mode!r}")

    # rewrite parent lists through the rename map
    final_nodes = []
    for node in nodes.values():
        parents = tuple(canon(p) for p in node.parents)
        cpd = _rewrite_cpd_refs(node.cpd, rename)
        final_nodes.append(
            Node(id=node.id, kind=node.kind, states=node.states, bounds=node.bounds,
                 parents=parents, cpd=cpd)
        )
    meta = dict(metadata or {})
    meta.setdefault("idiom_groups", {nid: groups[nid] for nid in nodes if nid in groups})
    spec = ModelSpec(tuple(final_nodes), title=title, metadata=meta)
    build_model(spec)  # validate structure incl. acyclicity
    return spec


def _merged_bounds(a: Node, b: Node) -> tuple[float, float] | None:
    if a.bounds is None:
        return b.bounds
    if b.bounds is None:
        return a.bounds
    return (max(a.bounds[0], b.bounds[0]), min(a.bounds[1], b.bounds[1]))


def _link_cpd(raw, source_id: str, target: Node) -> Cpd:
    if isinstance(raw, dict):
        cases = {state: _substitute_source(text, source_id) for state, text in raw.items()}
        return PartitionedCpd.parse(source_id, cases)
    return ExpressionCpd(ex.parse_expression(_substitute_source(str(raw), source_id)))


def _substitute_source(text: str, source_id: str) -> str:
    ast = ex.parse_expression(text)
    return ex.pretty(_rename_refs(ast, {"source": source_id}))


def _rename_refs(node: ex.Expr, mapping: dict[str, str]) -> ex.Expr:
    if isinstance(node, ex.ParentRef):
        return ex.ParentRef(mapping.get(node.name, node.name))
    if isinstance(node, ex.Unary):
        return ex.Unary(node.op, _rename_refs(node.operand, mapping))
    if isinstance(node, ex.Binary):
        return ex.Binary(node.op, _rename_refs(node.left, mapping), _rename_refs(node.right, mapping))
    if isinstance(node, ex.Comparison):
        return ex.Comparison(node.op, _rename_refs(node.left, mapping), _rename_refs(node.right, mapping))
    if isinstance(node, ex.MinMax):
        return ex.MinMax(node.op, tuple(_rename_refs(a, mapping) for a in node.args))
    if isinstance(node, ex.WMean):
        return ex.WMean(
            tuple((_rename_refs(w, mapping), _rename_refs(v, mapping)) for w, v in node.pairs)
        )
    if isinstance(node, ex.If):
        return ex.If(
            _rename_refs(node.cond, mapping),
            _rename_refs(node.then, mapping),
            _rename_refs(node.orelse, mapping),
        )
    if isinstance(node, ex.Dist):
        return ex.Dist(node.name, tuple(_rename_refs(a, mapping) for a in node.args))
    return node


def _rewrite_cpd_refs(cpd: Cpd, rename: dict[str, str]) -> Cpd:
    if not rename or isinstance(cpd, TableCpd):
        return cpd

    def canon(name: str) -> str:
        while name in rename:
            name = rename[name]
        return name

    mapping_needed = False
    if isinstance(cpd, ExpressionCpd):
        refs = ex.parents_of(cpd.ast)
        mapping_needed = any(r in rename for r in refs)
        if not mapping_needed:
            return cpd
        mapping = {r: canon(r) for r in refs}
        return ExpressionCpd(_rename_refs(cpd.ast, mapping))
    # partitioned
    refs = set()
    for _, ast in cpd.cases:
        refs |= ex.parents_of(ast)
    parent = canon(cpd.parent)
    mapping_needed = parent != cpd.parent or any(r in rename for r in refs)
    if not mapping_needed:
        return cpd
    mapping = {r: canon(r) for r in refs}
    return PartitionedCpd(
        parent, tuple((state, _rename_refs(ast, mapping)) for state, ast in cpd.cases)
    )
