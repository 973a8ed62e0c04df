"""Independent Monte Carlo validation engine.

Forward (ancestral) sampling and self-normalized likelihood weighting over
the same model semantics the discretized engine uses (ranked states
contribute interval midpoints, integer nodes carry continuity-corrected
masses, declared bounds condition the distributions). The inference method
is entirely different -- no grids, no elimination -- which is what makes the
cross-check meaningful.

Sampling is chunked; chunks are reduced in index order so results are
reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expressions as ex
from .errors import DegenerateWeights, ParameterDomainError
from .graph import (
    CompiledModel,
    ExpressionCpd,
    Node,
    NodeKind,
    PartitionedCpd,
    TableCpd,
    ranked_edges,
    ranked_midpoints,
)
from .inference import (
    DiscreteState,
    InferenceResult,
    Interval,
    Observation,
    Value,
    normalize_evidence,
)

__all__ = [
    "SampleSet",
    "OracleEstimate",
    "NodeEstimate",
    "ComparisonReport",
    "forward_sample",
    "likelihood_weighted_posterior",
    "compare",
]

_CHUNK = 200_000


@dataclass
class SampleSet:
    """Joint samples keyed by node id. Discrete nodes hold state indices;
    interval nodes hold numeric values."""

    values: dict[str, np.ndarray]
    model: CompiledModel
    seed: int

    def numeric(self, node_id: str) -> np.ndarray:
        """Samples on the numeric scale (ranked midpoints, booleans 0/1)."""
        node = self.model.node(node_id)
        vals = self.values[node_id]
        if node.kind is NodeKind.RANKED:
            return ranked_midpoints(node.num_states())[vals.astype(int)]
        if node.kind is NodeKind.BOOLEAN:
            return vals.astype(float)
        if node.kind is NodeKind.LABELLED:
            raise ParameterDomainError(f"labelled node {node_id!r} has no numeric scale")
        return vals


@dataclass(frozen=True)
class NodeEstimate:
    node_id: str
    mean: float | None
    variance: float | None
    se_mean: float | None
    state_probs: dict[str, float] | None = None
    state_se: dict[str, float] | None = None


@dataclass(frozen=True)
class OracleEstimate:
    nodes: dict[str, NodeEstimate]
    effective_sample_size: float
    samples: int
    seed: int

    def __getitem__(self, node_id: str) -> NodeEstimate:
        return self.nodes[node_id]


# ----------------------------------------------------------------------
# Sampling primitives
# ----------------------------------------------------------------------


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Row-wise categorical draw; rows with zero total get index 0 (their
    weight is zeroed by the caller)."""
    totals = probs.sum(axis=1, keepdims=True)
    safe = np.where(totals > 0, probs / np.where(totals > 0, totals, 1.0), 0.0)
    cum = np.cumsum(safe, axis=1)
    u = rng.uniform(size=(probs.shape[0], 1))
    return np.minimum((u > cum).sum(axis=1), probs.shape[1] - 1)


def _row_indices(node: Node, model: CompiledModel, values: dict[str, np.ndarray]) -> np.ndarray:
    idx = np.zeros(len(next(iter(values.values()))) if values else 0, dtype=np.int64)
    for p in node.parents:
        parent = model.node(p)
        idx = idx * parent.num_states() + values[p].astype(np.int64)
    return idx


def _numeric_env(node: Node, model: CompiledModel, values: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    env = {}
    for p in node.parents:
        parent = model.node(p)
        if parent.kind is NodeKind.LABELLED:
            continue
        if parent.kind is NodeKind.RANKED:
            env[p] = ranked_midpoints(parent.num_states())[values[p].astype(int)]
        elif parent.kind is NodeKind.BOOLEAN:
            env[p] = values[p].astype(float)
        else:
            env[p] = values[p]
    return env


def _effective_ast(node: Node):
    if isinstance(node.cpd, ExpressionCpd):
        yield None, node.cpd.ast
    else:
        for state, ast in node.cpd.cases:
            yield state, ast


def _sample_expression(
    node: Node, ast, env: dict[str, np.ndarray], size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """(values, valid) for one expression over `size` samples."""
    if node.kind is NodeKind.RANKED:
        dist = ex.Dist("arithmetic", (ast,)) if ex.is_deterministic(ast) else ast
        masses = ex.interval_masses(dist, env, ranked_edges(node.num_states()), strict=False)
        masses = np.broadcast_to(np.asarray(masses, dtype=float), (size, node.num_states()))
        valid = masses.sum(axis=1) > 0
        return _categorical(rng, masses).astype(float), valid

    if node.kind is NodeKind.BOOLEAN:
        if isinstance(ast, ex.Comparison) or ex.is_deterministic(ast):
            vals = np.asarray(ex.evaluate_deterministic(ast, env), dtype=float)
            vals = np.broadcast_to(vals, (size,)).astype(float)
            return (vals != 0).astype(float), np.ones(size, dtype=bool)
        if isinstance(ast, ex.Dist) and ast.name == "binomial":
            p = np.asarray(ex.evaluate_deterministic(ast.args[1], env), dtype=float)
            p = np.broadcast_to(p, (size,))
            valid = (p >= -1e-12) & (p <= 1 + 1e-12)
            draws = rng.uniform(size=size) < np.clip(p, 0.0, 1.0)
            return draws.astype(float), valid
        raise ParameterDomainError(
            f"Boolean node {node.id!r} accepts comparisons, deterministic "
            "expressions or Binomial(1, p)"
        )

    dist = ex.Dist("arithmetic", (ast,)) if ex.is_deterministic(ast) else ast
    if dist.name == "arithmetic":
        vals = np.asarray(ex.evaluate_deterministic(dist.args[0], env), dtype=float)
        vals = np.broadcast_to(vals, (size,)).astype(float)
        valid = np.ones(size, dtype=bool)
    else:
        params = [np.asarray(ex.evaluate_deterministic(a, env), dtype=float) for a in dist.args]
        valid, safe = ex._sanitize(dist.name, params)
        valid = np.broadcast_to(np.asarray(valid, dtype=bool), (size,)).copy()
        # sample with sanitized parameters; invalid rows are weighted out
        env_safe = {f"__p{i}": np.broadcast_to(s, (size,)) for i, s in enumerate(safe)}
        rebuilt = ex.Dist(dist.name, tuple(ex.ParentRef(f"__p{i}") for i in range(len(safe))))
        vals = np.asarray(ex.sample_value(rebuilt, env_safe, rng, size=(size,)), dtype=float)
    if node.kind is NodeKind.INTEGER:
        vals = np.round(vals)
    return vals, valid


def _log_obs_weight(node: Node, ast, env, obs: Observation, size: int) -> np.ndarray:
    """Log likelihood of one observation under the node's CPD expression."""
    integer = node.kind is NodeKind.INTEGER
    dist = ex.Dist("arithmetic", (ast,)) if ex.is_deterministic(ast) else ast
    if isinstance(obs, Value):
        if isinstance(dist, ex.Comparison):
            raise ParameterDomainError("comparison nodes take state observations")
        out = ex.log_point_likelihood(dist, env, obs.value, integer_node=integer)
        return np.broadcast_to(np.asarray(out, dtype=float), (size,))
    if isinstance(obs, Interval):
        lo, hi = obs.lo, obs.hi
        if integer:
            cells = np.array([[math.ceil(lo), math.floor(hi)]], dtype=float)
            mass = ex.interval_masses(dist, env, None, integer_cells=cells, strict=False)[..., 0]
        else:
            edges = np.array([lo, hi])
            mass = ex.interval_masses(dist, env, edges, strict=False)[..., 0]
        with np.errstate(divide="ignore"):
            out = np.log(np.maximum(np.asarray(mass, dtype=float), 0.0))
        return np.broadcast_to(out, (size,))
    raise ParameterDomainError(f"unsupported observation {obs!r} on node {node.id!r}")


def _sample_chunk(
    model: CompiledModel,
    evidence: dict[str, Observation],
    size: int,
    rng: np.random.Generator,
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    values: dict[str, np.ndarray] = {}
    logw = np.zeros(size)

    for node_id in model.order:
        node = model.node(node_id)
        obs = evidence.get(node_id)

        if isinstance(node.cpd, TableCpd):
            table = np.asarray(node.cpd.rows, dtype=float)
            rows = _row_indices(node, model, values) if node.parents else np.zeros(size, dtype=np.int64)
            probs = table[rows] if node.parents else np.broadcast_to(table[0], (size, table.shape[1]))
            if isinstance(obs, DiscreteState):
                idx = node.state_index(obs.state)
                with np.errstate(divide="ignore"):
                    logw += np.log(np.maximum(probs[:, idx], 0.0))
                values[node_id] = np.full(size, float(idx))
            else:
                values[node_id] = _categorical(rng, np.ascontiguousarray(probs)).astype(float)
            continue

        env = _numeric_env(node, model, values)
        part_parent = node.cpd.parent if isinstance(node.cpd, PartitionedCpd) else None

        if isinstance(obs, DiscreteState) and node.kind.is_discrete:
            idx = node.state_index(obs.state)
            logw += _discrete_state_logmass(node, model, values, env, idx, size)
            values[node_id] = np.full(size, float(idx))
            continue
        if isinstance(obs, (Value, Interval)) and not node.kind.is_discrete:
            logw += _clamped_logmass(node, model, values, env, obs, size)
            v = obs.value if isinstance(obs, Value) else 0.5 * (obs.lo + obs.hi)
            if node.kind is NodeKind.INTEGER:
                v = float(round(v))
            values[node_id] = np.full(size, v)
            continue

        # unobserved: sample (partitioned nodes per-state)
        if part_parent is None:
            vals, valid = _sample_expression(node, node.cpd.ast, env, size, rng)
        else:
            vals = np.zeros(size)
            valid = np.zeros(size, dtype=bool)
            part_vals = values[part_parent].astype(int)
            part_node = model.node(part_parent)
            for s_idx, state in enumerate(part_node.states):
                mask = part_vals == s_idx
                if not mask.any():
                    continue
                sub_env = {k: (v[mask] if np.ndim(v) else v) for k, v in env.items()}
                sub_vals, sub_valid = _sample_expression(
                    node, node.cpd.case_for(state), sub_env, int(mask.sum()), rng
                )
                vals[mask] = sub_vals
                valid[mask] = sub_valid
        logw = np.where(valid, logw, -np.inf)
        if node.kind.is_interval:
            lo, hi = model.supports[node_id]
            inside = (vals >= lo) & (vals <= hi)
            logw = np.where(inside, logw, -np.inf)
            vals = np.clip(vals, lo, hi)
        values[node_id] = vals

    return values, logw


def _discrete_state_logmass(node, model, values, env, idx: int, size: int) -> np.ndarray:
    if isinstance(node.cpd, PartitionedCpd):
        out = np.full(size, -np.inf)
        part_vals = values[node.cpd.parent].astype(int)
        part_node = model.node(node.cpd.parent)
        for s_idx, state in enumerate(part_node.states):
            mask = part_vals == s_idx
            if not mask.any():
                continue
            sub_env = {k: (v[mask] if np.ndim(v) else v) for k, v in env.items()}
            out[mask] = _expr_state_logmass(node, node.cpd.case_for(state), sub_env, idx, int(mask.sum()))
        return out
    return _expr_state_logmass(node, node.cpd.ast, env, idx, size)


def _expr_state_logmass(node, ast, env, idx: int, size: int) -> np.ndarray:
    if node.kind is NodeKind.RANKED:
        dist = ex.Dist("arithmetic", (ast,)) if ex.is_deterministic(ast) else ast
        masses = ex.interval_masses(dist, env, ranked_edges(node.num_states()), strict=False)
        masses = np.broadcast_to(np.asarray(masses, dtype=float), (size, node.num_states()))
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(masses[:, idx], 0.0))
    # boolean
    if isinstance(ast, ex.Comparison) or ex.is_deterministic(ast):
        vals = np.asarray(ex.evaluate_deterministic(ast, env), dtype=float)
        vals = np.broadcast_to(vals, (size,))
        match = (vals != 0) == bool(idx)
        with np.errstate(divide="ignore"):
            return np.where(match, 0.0, -np.inf)
    if isinstance(ast, ex.Dist) and ast.name == "binomial":
        p = np.asarray(ex.evaluate_deterministic(ast.args[1], env), dtype=float)
        p = np.clip(np.broadcast_to(p, (size,)), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(p if idx else 1.0 - p, 0.0))
    raise ParameterDomainError(f"cannot weight observation on Boolean node {node.id!r}")


def _clamped_logmass(node, model, values, env, obs: Observation, size: int) -> np.ndarray:
    if isinstance(node.cpd, PartitionedCpd):
        out = np.full(size, -np.inf)
        part_vals = values[node.cpd.parent].astype(int)
        part_node = model.node(node.cpd.parent)
        for s_idx, state in enumerate(part_node.states):
            mask = part_vals == s_idx
            if not mask.any():
                continue
            sub_env = {k: (v[mask] if np.ndim(v) else v) for k, v in env.items()}
            out[mask] = _log_obs_weight(node, node.cpd.case_for(state), sub_env, obs, int(mask.sum()))
        return out
    return _log_obs_weight(node, node.cpd.ast, env, obs, size)


# ----------------------------------------------------------------------
# Public operations
# ----------------------------------------------------------------------


def forward_sample(model: CompiledModel, n: int, seed: int = 0) -> SampleSet:
    """Ancestral sampling of the full joint; reproducible for a fixed seed."""
    if n < 1:
        raise ParameterDomainError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    chunks: list[dict[str, np.ndarray]] = []
    remaining = n
    while remaining > 0:
        size = min(_CHUNK, remaining)
        values, _ = _sample_chunk(model, {}, size, rng)
        chunks.append(values)
        remaining -= size
    merged = {
        node_id: np.concatenate([c[node_id] for c in chunks]) for node_id in chunks[0]
    }
    return SampleSet(values=merged, model=model, seed=seed)


class _Accumulator:
    """Weighted-moment accumulator with on-the-fly log-scale rebasing."""

    def __init__(self, model: CompiledModel):
        self.model = model
        self.scale = -math.inf  # log of the weight scale in use
        self.s0 = 0.0  # sum w
        self.t0 = 0.0  # sum w^2
        self.n = 0
        self.sums: dict[str, np.ndarray] = {}  # node -> [sum w x, sum w x^2, sum w^2 x, sum w^2 x^2]
        self.state_sums: dict[str, np.ndarray] = {}  # node -> per-state [w, w^2]

    def _rebase(self, new_scale: float) -> None:
        if new_scale <= self.scale:
            return
        f = math.exp(self.scale - new_scale) if math.isfinite(self.scale) else 0.0
        self.s0 *= f
        self.t0 *= f * f
        for arr in self.sums.values():
            arr[0] *= f
            arr[1] *= f
            arr[2] *= f * f
            arr[3] *= f * f
        for arr in self.state_sums.values():
            arr[:, 0] *= f
            arr[:, 1] *= f * f
        self.scale = new_scale

    def add(self, values: dict[str, np.ndarray], logw: np.ndarray) -> None:
        finite = logw[np.isfinite(logw)]
        chunk_scale = float(finite.max()) if finite.size else -math.inf
        if chunk_scale > self.scale:
            self._rebase(chunk_scale)
        if not math.isfinite(self.scale):
            self.n += len(logw)
            return
        w = np.exp(np.clip(logw - self.scale, -745.0, 50.0))
        w[~np.isfinite(logw)] = 0.0
        w2 = w * w
        self.s0 += float(w.sum())
        self.t0 += float(w2.sum())
        self.n += len(logw)
        for node in self.model.nodes:
            vals = values[node.id]
            if node.kind.is_discrete:
                k = node.num_states()
                store = self.state_sums.setdefault(node.id, np.zeros((k, 2)))
                idx = vals.astype(int)
                store[:, 0] += np.bincount(idx, weights=w, minlength=k)
                store[:, 1] += np.bincount(idx, weights=w2, minlength=k)
            else:
                store = self.sums.setdefault(node.id, np.zeros(4))
                store[0] += float(np.dot(w, vals))
                store[1] += float(np.dot(w, vals * vals))
                store[2] += float(np.dot(w2, vals))
                store[3] += float(np.dot(w2, vals * vals))

    def estimate(self, seed: int) -> OracleEstimate:
        if self.s0 <= 0:
            raise DegenerateWeights("all sample weights are zero; evidence may be impossible")
        ess = self.s0 * self.s0 / self.t0 if self.t0 > 0 else 0.0
        out: dict[str, NodeEstimate] = {}
        for node in self.model.nodes:
            if node.kind.is_discrete:
                store = self.state_sums[node.id]
                probs = store[:, 0] / self.s0
                # weighted delta-method se of an indicator mean:
                # sum w^2 (1_state - p)^2 = w2_state (1-p)^2 + (t0 - w2_state) p^2
                se = (
                    np.sqrt(
                        np.maximum(
                            store[:, 1] * (1 - probs) ** 2
                            + (self.t0 - store[:, 1]) * probs**2,
                            0.0,
                        )
                    )
                    / self.s0
                )
                # rule-of-three guard: a state the weighted sample never (or
                # always) hit is only localized to ~1/ess, not to zero error
                se = np.maximum(se, min(0.5, 1.0 / max(ess, 1.0)))
                state_probs = {s: float(p) for s, p in zip(node.states, probs)}
                state_se = {s: float(v) for s, v in zip(node.states, se)}
                if node.kind is NodeKind.RANKED:
                    mids = ranked_midpoints(node.num_states())
                elif node.kind is NodeKind.BOOLEAN:
                    mids = np.array([0.0, 1.0])
                else:
                    out[node.id] = NodeEstimate(node.id, None, None, None, state_probs, state_se)
                    continue
                mean = float(np.dot(probs, mids))
                var = max(float(np.dot(probs, mids**2)) - mean * mean, 0.0)
                # delta-method se of the numeric mean, same 1/ess guard
                dev = mids - mean
                se_mean = math.sqrt(
                    max(float(np.dot(store[:, 1], dev**2)), 0.0)
                ) / self.s0
                spread = float(mids.max() - mids.min())
                se_mean = max(se_mean, min(0.5 * spread, spread / max(ess, 1.0)))
                out[node.id] = NodeEstimate(node.id, mean, var, se_mean, state_probs, state_se)
            else:
                s1, s2, t1, t2 = self.sums[node.id]
                mean = s1 / self.s0
                var = max(s2 / self.s0 - mean * mean, 0.0)
                se = math.sqrt(max(t2 - 2 * mean * t1 + mean * mean * self.t0, 0.0)) / self.s0
                out[node.id] = NodeEstimate(node.id, float(mean), float(var), float(se))
        return OracleEstimate(nodes=out, effective_sample_size=float(ess), samples=self.n, seed=seed)


def likelihood_weighted_posterior(
    model: CompiledModel, evidence, n: int, seed: int = 0
) -> OracleEstimate:
    """Self-normalized importance-sampling posterior estimates.

    Evidence nodes are clamped and weighted by their conditional
    density/mass (interval observations by interval mass). Standard errors
    come from the weighted delta method. Raises DegenerateWeights when the
    effective sample size falls below 100.
    """
    if n < 1:
        raise ParameterDomainError("sample count must be >= 1")
    obs = normalize_evidence(model, evidence)
    rng = np.random.default_rng(seed)
    acc = _Accumulator(model)
    remaining = n
    while remaining > 0:
        size = min(_CHUNK, remaining)
        values, logw = _sample_chunk(model, obs, size, rng)
        acc.add(values, logw)
        remaining -= size
    est = acc.estimate(seed)
    if est.effective_sample_size < 100:
        raise DegenerateWeights(
            f"effective sample size {est.effective_sample_size:.1f} < 100; "
            "use more samples or reformulate the evidence"
        )
    return est


# ----------------------------------------------------------------------
# Engine-vs-oracle comparison
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    node_id: str
    quantity: str
    engine: float
    oracle: float
    se: float
    tolerance: float
    passed: bool

    @property
    def z(self) -> float:
        return abs(self.engine - self.oracle) / self.se if self.se > 0 else math.inf


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    notes: tuple[str, ...] = ()

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    def worst(self, k: int = 5) -> tuple[ComparisonRow, ...]:
        ranked = sorted(
            self.rows, key=lambda r: abs(r.engine - r.oracle) / max(r.tolerance, 1e-300), reverse=True
        )
        return tuple(ranked[:k])


@dataclass(frozen=True)
class ComparePolicy:
    se_multiplier: float = 3.0
    absolute_floor: float = 1e-6


def compare(
    engine_result: InferenceResult,
    oracle_estimate: OracleEstimate,
    policy: ComparePolicy | None = None,
) -> ComparisonReport:
    """Per-node verdicts: pass when |engine mean - oracle mean| is within
    max(3 standard errors, the absolute floor). Labelled nodes compare
    per-state probabilities instead."""
    policy = policy or ComparePolicy()
    rows: list[ComparisonRow] = []
    notes: list[str] = []
    common = [nid for nid in engine_result.posteriors if nid in oracle_estimate.nodes]
    if not common:
        return ComparisonReport((), ("no comparable nodes",))
    for node_id in common:
        engine_post = engine_result[node_id]
        oracle_est = oracle_estimate[node_id]
        if engine_post.mean is not None and oracle_est.mean is not None:
            tol = max(policy.se_multiplier * (oracle_est.se_mean or 0.0), policy.absolute_floor)
            diff = abs(engine_post.mean - oracle_est.mean)
            rows.append(
                ComparisonRow(
                    node_id, "mean", engine_post.mean, oracle_est.mean,
                    oracle_est.se_mean or 0.0, tol, diff <= tol,
                )
            )
        elif engine_post.state_probabilities and oracle_est.state_probs:
            for state, p_engine in engine_post.state_probabilities.items():
                p_oracle = oracle_est.state_probs[state]
                se = oracle_est.state_se[state]
                tol = max(policy.se_multiplier * se, policy.absolute_floor)
                rows.append(
                    ComparisonRow(
                        node_id, f"P({state})", p_engine, p_oracle, se, tol,
                        abs(p_engine - p_oracle) <= tol,
                    )
                )
        else:
            notes.append(f"node {node_id!r} has no comparable summary")
    return ComparisonReport(tuple(rows), tuple(notes))
