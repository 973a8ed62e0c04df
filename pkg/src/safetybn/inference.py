"""Posterior computation: adaptive discretization + exact variable elimination.

Every interval node gets a grid of cells; discrete nodes keep their states.
Conditional masses over the grid form factors, variable elimination (min-fill
ordering, declaration-order tie-break) produces exact marginals of the
discretized model, and a refinement loop splits high-posterior-mass cells and
re-solves until the summaries stabilise. Results are deterministic for a
fixed configuration.

Within-cell semantics: a cell contributes its midpoint when substituted into
child expressions, and comparisons over interval nodes use overlap fractions
under a uniform-density-within-cell assumption. Ranked states contribute the
midpoint of their [0, 1] interval. Evidence likelihood factors are evaluated
in log space with max-subtraction, so sharply concentrated likelihoods
survive the coarse early grids (the refinement then zooms in on them) instead
of underflowing to an all-zero factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expressions as ex
from .errors import (
    ArityError,
    UnknownNode,
    ValueOutOfDomain,
    ZeroProbabilityEvidence,
)
from .graph import (
    WIDE_INTEGER_RANGE,
    CompiledModel,
    ExpressionCpd,
    Node,
    NodeKind,
    PartitionedCpd,
    TableCpd,
    build_model,
    ranked_edges,
    ranked_midpoints,
)

__all__ = [
    "DiscreteState",
    "Value",
    "Interval",
    "Observation",
    "normalize_evidence",
    "DiscretizationConfig",
    "Posterior",
    "InferenceResult",
    "infer",
    "probability_query",
    "do_intervention",
    "posterior_summary",
]

_LOG_FLOOR = math.log(1e-300)
PERCENTILES = (5, 25, 50, 75, 95)


# ----------------------------------------------------------------------
# Evidence
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteState:
    state: str


@dataclass(frozen=True)
class Value:
    value: float


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float


Observation = DiscreteState | Value | Interval


def normalize_evidence(model: CompiledModel, evidence) -> dict[str, Observation]:
    """Coerce raw evidence (states, numbers, [lo, hi] pairs) to Observations
    and validate them against the model."""
    out: dict[str, Observation] = {}
    if not evidence:
        return out
    for node_id, raw in evidence.items():
        try:
            node = model.node(node_id)
        except Exception:
            raise UnknownNode(f"evidence names unknown node {node_id!r}") from None
        obs = _coerce_observation(node, raw)
        _validate_observation(model, node, obs)
        out[node_id] = obs
    return out


def _coerce_observation(node: Node, raw) -> Observation:
    if isinstance(raw, (DiscreteState, Value, Interval)):
        return raw
    if isinstance(raw, bool):
        return DiscreteState(str(raw))
    if isinstance(raw, str):
        return DiscreteState(raw)
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        return Interval(float(raw[0]), float(raw[1]))
    if isinstance(raw, (int, float)):
        if node.kind.is_discrete:
            raise ValueOutOfDomain(f"node {node.id!r} is discrete; observe one of its states")
        return Value(float(raw))
    raise ValueOutOfDomain(f"cannot interpret observation {raw!r} for node {node.id!r}")


def _validate_observation(model: CompiledModel, node: Node, obs: Observation) -> None:
    if isinstance(obs, DiscreteState):
        if not node.kind.is_discrete:
            raise ValueOutOfDomain(f"node {node.id!r} is not discrete")
        try:
            node.state_index(obs.state)
        except ValueError as err:
            raise ValueOutOfDomain(str(err)) from None
        return
    if node.kind.is_discrete:
        raise ValueOutOfDomain(f"node {node.id!r} is discrete; observe one of its states")
    lo, hi = model.supports[node.id]
    if isinstance(obs, Value):
        v = obs.value
        if node.kind is NodeKind.INTEGER:
            if abs(v - round(v)) > 1e-9:
                raise ValueOutOfDomain(f"integer node {node.id!r} observed at non-integer {v}")
            v = round(v)
        if not (lo - 1e-12 <= v <= hi + 1e-12):
            raise ValueOutOfDomain(
                f"value {obs.value} outside support [{lo:g}, {hi:g}] of node {node.id!r}"
            )
        return
    if not obs.lo < obs.hi:
        raise ValueOutOfDomain(f"interval observation on {node.id!r} needs lo < hi")
    if obs.hi <= lo or obs.lo >= hi:
        raise ValueOutOfDomain(
            f"interval [{obs.lo:g}, {obs.hi:g}] misses the support of node {node.id!r}"
        )


# ----------------------------------------------------------------------
# Configuration and results
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiscretizationConfig:
    """Controls the refinement loop.

    Cells whose posterior mass exceeds ``split_mass`` are subdivided each
    iteration (dominant cells into several pieces at once, so concentrated
    posteriors are reached quickly); the loop stops when every node's
    summaries change by less than ``tolerance`` (relative) or the iteration
    cap is hit. ``max_intervals`` caps cells per node; hitting it yields a
    best-effort posterior plus a warning.
    """

    initial_intervals: int = 64
    max_iterations: int = 25
    split_mass: float = 0.05
    tolerance: float = 1e-3
    max_intervals: int = 512

    def __post_init__(self):
        if min(self.initial_intervals, self.max_iterations, self.max_intervals) < 1:
            raise ValueError("discretization sizes must be positive")
        if not (0 < self.tolerance < 1):
            raise ValueError("tolerance must lie in (0, 1)")
        if not (0 < self.split_mass < 1):
            raise ValueError("split_mass must lie in (0, 1)")


DEFAULT_CONFIG = DiscretizationConfig()


@dataclass(frozen=True)
class Posterior:
    """Marginal of one node: a discrete pmf or a weighted interval histogram."""

    node_id: str
    kind: NodeKind
    states: tuple[str, ...] | None = None
    probs: np.ndarray | None = None  # aligned with states
    cells: np.ndarray | None = None  # (m, 2) interval bounds
    masses: np.ndarray | None = None
    point: float | None = None

    @property
    def mean(self) -> float | None:
        if self.point is not None:
            return self.point
        if self.kind is NodeKind.LABELLED:
            return None
        if self.kind is NodeKind.RANKED:
            return float(np.dot(self.probs, ranked_midpoints(len(self.states))))
        if self.kind is NodeKind.BOOLEAN:
            return float(self.probs[1])
        mids = self.cells.mean(axis=1)
        return float(np.dot(self.masses, mids))

    @property
    def variance(self) -> float | None:
        if self.point is not None:
            return 0.0
        if self.kind is NodeKind.LABELLED:
            return None
        if self.kind is NodeKind.RANKED:
            mids = ranked_midpoints(len(self.states))
        elif self.kind is NodeKind.BOOLEAN:
            mids = np.array([0.0, 1.0])
        else:
            mids = self.cells.mean(axis=1)
        weights = self.probs if self.kind.is_discrete else self.masses
        m = float(np.dot(weights, mids))
        return max(float(np.dot(weights, mids**2)) - m * m, 0.0)

    def percentile(self, q: float) -> float | None:
        """Interpolated percentile on the underlying numeric scale."""
        if self.point is not None:
            return self.point
        if self.kind in (NodeKind.LABELLED, NodeKind.BOOLEAN):
            return None
        if self.kind is NodeKind.RANKED:
            edges = ranked_edges(len(self.states))
            cells = np.column_stack([edges[:-1], edges[1:]])
            masses = np.asarray(self.probs, dtype=float)
        else:
            cells = self.cells
            masses = np.asarray(self.masses, dtype=float)
        target = q / 100.0
        cum = np.concatenate([[0.0], np.cumsum(masses)])
        total = cum[-1]
        if total <= 0:
            return float(cells[0, 0])
        cum = cum / total
        idx = int(np.searchsorted(cum, target, side="left"))
        idx = min(max(idx, 1), len(cells))
        lo, hi = cells[idx - 1]
        span = cum[idx] - cum[idx - 1]
        frac = 1.0 if span <= 0 else (target - cum[idx - 1]) / span
        return float(lo + np.clip(frac, 0.0, 1.0) * (hi - lo))

    @property
    def percentiles(self) -> dict[int, float] | None:
        vals = [self.percentile(q) for q in PERCENTILES]
        if vals[0] is None:
            return None
        return dict(zip(PERCENTILES, vals))

    @property
    def state_probabilities(self) -> dict[str, float] | None:
        if self.states is None:
            return None
        return {s: float(p) for s, p in zip(self.states, self.probs)}


def posterior_summary(posterior: Posterior):
    """(mean, variance, percentiles, state probabilities) for one node."""
    return (
        posterior.mean,
        posterior.variance,
        posterior.percentiles,
        posterior.state_probabilities,
    )


@dataclass(frozen=True)
class InferenceResult:
    posteriors: dict[str, Posterior]
    log_likelihood: float
    iterations: int
    converged: bool
    warnings: tuple[str, ...] = ()

    def __getitem__(self, node_id: str) -> Posterior:
        return self.posteriors[node_id]


# ----------------------------------------------------------------------
# Layouts: the discretized state space of one node during one solve
# ----------------------------------------------------------------------


@dataclass
class _Layout:
    node: Node
    mode: str  # "discrete" | "point" | "grid"
    state_indices: np.ndarray | None = None  # discrete: kept original state indices
    value: float | None = None  # point
    cells: np.ndarray | None = None  # grid: (m, 2) bounds; integer cells closed

    @property
    def size(self) -> int:
        if self.mode == "discrete":
            return len(self.state_indices)
        if self.mode == "point":
            return 1
        return len(self.cells)

    def numeric_reps(self) -> np.ndarray:
        """Value each cell contributes to child expressions."""
        if self.mode == "point":
            return np.array([self.value], dtype=float)
        if self.mode == "grid":
            if self.node.kind is NodeKind.INTEGER:
                return np.round(self.cells.mean(axis=1))
            return self.cells.mean(axis=1)
        node = self.node
        if node.kind is NodeKind.RANKED:
            return ranked_midpoints(node.num_states())[self.state_indices]
        if node.kind is NodeKind.BOOLEAN:
            return self.state_indices.astype(float)
        raise ArityError(f"labelled node {node.id!r} cannot appear in a numeric expression")

    def summary_mids(self) -> np.ndarray:
        """Exact cell midpoints used for posterior moments."""
        if self.mode == "grid":
            return self.cells.mean(axis=1)
        return self.numeric_reps()

    def comparison_intervals(self) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) per cell for overlap-fraction comparisons."""
        if self.mode == "grid":
            if self.node.kind is NodeKind.INTEGER:
                return self.cells[:, 0] - 0.5, self.cells[:, 1] + 0.5
            return self.cells[:, 0].copy(), self.cells[:, 1].copy()
        reps = self.numeric_reps()
        return reps, reps


def _split_integer_range(lo: int, hi: int, pieces: int) -> list[tuple[int, int]]:
    count = hi - lo + 1
    pieces = max(1, min(pieces, count))
    bounds = np.unique(np.linspace(0, count, pieces + 1).round().astype(int))
    return [(lo + int(bounds[i]), lo + int(bounds[i + 1]) - 1) for i in range(len(bounds) - 1)]


class _Grid:
    """Persistent cut structure of one interval node across refinements."""

    def __init__(self, node: Node, lo: float, hi: float, initial: int):
        self.node = node
        self.lo = lo
        self.hi = hi
        if node.kind is NodeKind.INTEGER:
            self.int_cells = _split_integer_range(int(lo), int(hi), initial)
        else:
            self.edges = list(np.linspace(lo, hi, initial + 1))

    @property
    def size(self) -> int:
        if self.node.kind is NodeKind.INTEGER:
            return len(self.int_cells)
        return len(self.edges) - 1

    def insert_cut(self, x: float) -> None:
        if self.node.kind is NodeKind.INTEGER:
            k = int(math.floor(x))
            new: list[tuple[int, int]] = []
            for a, b in self.int_cells:
                if a <= k < b:
                    new.extend([(a, k), (k + 1, b)])
                else:
                    new.append((a, b))
            self.int_cells = new
            return
        if not (self.lo < x < self.hi):
            return
        if any(abs(e - x) <= 1e-12 * max(1.0, abs(x)) for e in self.edges):
            return
        self.edges = sorted(self.edges + [x])

    def cells_array(self) -> np.ndarray:
        if self.node.kind is NodeKind.INTEGER:
            return np.asarray(self.int_cells, dtype=float)
        e = np.asarray(self.edges, dtype=float)
        return np.column_stack([e[:-1], e[1:]])

    def split(self, index: int, pieces: int) -> int:
        """Split one cell into up to ``pieces`` parts; returns cells added."""
        if self.node.kind is NodeKind.INTEGER:
            a, b = self.int_cells[index]
            if b <= a:
                return 0
            parts = _split_integer_range(a, b, pieces)
            self.int_cells[index : index + 1] = parts
            return len(parts) - 1
        a, b = self.edges[index], self.edges[index + 1]
        if b - a <= 1e-13 * max(1.0, abs(a), abs(b)):
            return 0
        inner = list(np.linspace(a, b, pieces + 1))[1:-1]
        self.edges = sorted(self.edges + inner)
        return len(inner)


# ----------------------------------------------------------------------
# Factors
# ----------------------------------------------------------------------


@dataclass
class _Factor:
    dims: tuple[str, ...]
    arr: np.ndarray
    logscale: float = 0.0


def _align(factor: _Factor, dims: tuple[str, ...]) -> np.ndarray:
    """View of the factor array broadcastable over the union dims."""
    present = [d for d in dims if d in factor.dims]
    arr = np.transpose(factor.arr, [factor.dims.index(d) for d in present])
    shape = [arr.shape[present.index(d)] if d in factor.dims else 1 for d in dims]
    return arr.reshape(shape)


def _multiply(f1: _Factor, f2: _Factor) -> _Factor:
    dims = f1.dims + tuple(d for d in f2.dims if d not in f1.dims)
    return _Factor(dims, _align(f1, dims) * _align(f2, dims), f1.logscale + f2.logscale)


def _sum_out(factor: _Factor, dim: str) -> _Factor:
    axis = factor.dims.index(dim)
    return _Factor(
        tuple(d for d in factor.dims if d != dim), factor.arr.sum(axis=axis), factor.logscale
    )


def _rescaled(factor: _Factor) -> _Factor:
    peak = float(factor.arr.max()) if factor.arr.size else 0.0
    if peak > 0 and (peak < 1e-100 or peak > 1e100):
        return _Factor(factor.dims, factor.arr / peak, factor.logscale + math.log(peak))
    return factor


def _parent_env(node: Node, layouts: dict[str, _Layout]) -> dict[str, np.ndarray]:
    """Parent reps reshaped so numpy broadcasting spans the parent axes.

    Labelled parents have no numeric scale and are omitted; they may only
    appear as Table or partition parents, so a reference from inside an
    expression surfaces as MissingParentValue.
    """
    env = {}
    k = len(node.parents)
    for i, p in enumerate(node.parents):
        lay = layouts[p]
        if lay.mode == "discrete" and lay.node.kind is NodeKind.LABELLED:
            continue
        reps = lay.numeric_reps()
        shape = [1] * k
        shape[i] = len(reps)
        env[p] = reps.reshape(shape)
    return env


def _prob_less(lo1, hi1, lo2, hi2, op: str) -> np.ndarray:
    """P(U op V) for U uniform on [lo1, hi1], V uniform on [lo2, hi2];
    zero-width operands act as point masses."""
    if op in (">=", ">"):
        return _prob_less(lo2, hi2, lo1, hi1, {">=": "<=", ">": "<"}[op])
    lo1, hi1, lo2, hi2 = np.broadcast_arrays(
        *map(np.asarray, (lo1, hi1, lo2, hi2))
    )
    lo1 = lo1.astype(float)
    hi1 = hi1.astype(float)
    lo2 = lo2.astype(float)
    hi2 = hi2.astype(float)
    w1 = hi1 - lo1
    w2 = hi2 - lo2
    if op == "==":
        return np.where((w1 == 0) & (w2 == 0) & (lo1 == lo2), 1.0, 0.0)

    safe_w1 = np.where(w1 > 0, w1, 1.0)
    safe_w2 = np.where(w2 > 0, w2, 1.0)

    def antideriv(v):
        # integral of clamp((t - lo1)/w1, 0, 1) up to v
        mid = (v - lo1) ** 2 / (2 * safe_w1)
        return np.where(v <= lo1, 0.0, np.where(v >= hi1, v - (lo1 + hi1) / 2.0, mid))

    cont = (antideriv(hi2) - antideriv(lo2)) / safe_w2
    point_v = np.clip((lo2 - lo1) / safe_w1, 0.0, 1.0)  # V degenerate
    point_u = np.clip((hi2 - lo1) / safe_w2, 0.0, 1.0)  # U degenerate
    include_eq = 1.0 if op == "<=" else 0.0
    both = np.where(lo1 < lo2, 1.0, np.where(lo1 == lo2, include_eq, 0.0))
    return np.where(
        (w1 == 0) & (w2 == 0),
        both,
        np.where(w1 == 0, point_u, np.where(w2 == 0, point_v, cont)),
    )


def _comparison_probs(node: Node, comp: ex.Comparison, layouts: dict[str, _Layout]) -> np.ndarray:
    """P(comparison true) over the parent axes of ``node``."""
    naxes = len(node.parents)
    axis_of = {p: i for i, p in enumerate(node.parents)}

    def operand(e):
        if isinstance(e, ex.ParentRef) and layouts[e.name].mode == "grid":
            lay = layouts[e.name]
            lo, hi = lay.comparison_intervals()
            shape = [1] * naxes
            shape[axis_of[e.name]] = len(lo)
            return lo.reshape(shape), hi.reshape(shape)
        env = _parent_env(node, layouts)
        val = np.asarray(ex.evaluate_deterministic(e, env), dtype=float)
        return val, val

    lo1, hi1 = operand(comp.left)
    lo2, hi2 = operand(comp.right)
    return np.asarray(_prob_less(lo1, hi1, lo2, hi2, comp.op), dtype=float)


def _const_one(e) -> bool:
    return isinstance(e, ex.Constant) and e.value == 1


def _as_dist(node: Node, ast) -> ex.Dist:
    if isinstance(ast, ex.Dist):
        return ast
    if ex.is_deterministic(ast):
        return ex.Dist("arithmetic", (ast,))
    raise ArityError(
        f"CPD expression on node {node.id!r} must be a distribution or a "
        "deterministic expression"
    )


_GL_OFFSETS = np.array([-math.sqrt(3.0 / 5.0), 0.0, math.sqrt(3.0 / 5.0)])
_GL_LOG_WEIGHTS = np.log(np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0]))


def _quadrature_reps(lay: _Layout) -> np.ndarray:
    """(3, ncells) Gauss-Legendre abscissae within each grid cell."""
    a, b = lay.cells[:, 0], lay.cells[:, 1]
    if lay.node.kind is NodeKind.INTEGER:
        a, b = a - 0.5, b + 0.5
    mids = (a + b) / 2.0
    half = (b - a) / 2.0
    pts = mids[None, :] + _GL_OFFSETS[:, None] * half[None, :]
    if lay.node.kind is NodeKind.INTEGER:
        pts = np.clip(np.round(pts), lay.cells[:, 0], lay.cells[:, 1])
    return pts


def _expression_log_point(node: Node, ast, layouts: dict[str, _Layout], value: float) -> np.ndarray:
    """Log likelihood of a point-clamped interval node over its parent axes.

    Likelihoods are averaged over grid-parent cells with 3-point quadrature
    rather than evaluated at midpoints only: a steeply-decaying likelihood
    otherwise hides a cell's true mass from the refinement loop.
    """
    from itertools import product as iter_product

    from scipy.special import logsumexp

    parent_shape = tuple(layouts[p].size for p in node.parents)
    dist = _as_dist(node, ast)
    integer = node.kind is NodeKind.INTEGER

    quad_axes = [
        i for i, p in enumerate(node.parents) if layouts[p].mode == "grid"
    ][:2]
    base_env = _parent_env(node, layouts)
    if not quad_axes:
        log_lik = ex.log_point_likelihood(dist, base_env, value, integer_node=integer)
        return np.broadcast_to(np.asarray(log_lik, dtype=float), parent_shape)

    quad_reps = {
        i: _quadrature_reps(layouts[node.parents[i]]) for i in quad_axes
    }
    k = len(node.parents)
    pieces = []
    log_ws = []
    for combo in iter_product(range(3), repeat=len(quad_axes)):
        env = dict(base_env)
        log_w = 0.0
        for axis, qi in zip(quad_axes, combo):
            reps = quad_reps[axis][qi]
            shape = [1] * k
            shape[axis] = len(reps)
            env[node.parents[axis]] = reps.reshape(shape)
            log_w += _GL_LOG_WEIGHTS[qi]
        log_lik = ex.log_point_likelihood(dist, env, value, integer_node=integer)
        pieces.append(np.broadcast_to(np.asarray(log_lik, dtype=float), parent_shape))
        log_ws.append(log_w)
    stacked = np.stack(pieces, axis=0) + np.asarray(log_ws).reshape((-1,) + (1,) * len(parent_shape))
    with np.errstate(invalid="ignore"):
        out = logsumexp(stacked, axis=0)
    return np.where(np.isnan(out), -np.inf, out)


def _expression_masses(node: Node, ast, layouts: dict[str, _Layout], lay: _Layout) -> np.ndarray:
    """Masses over (parents..., node cells) for an expression CPD."""
    env = _parent_env(node, layouts)
    parent_shape = tuple(layouts[p].size for p in node.parents)

    if node.kind is NodeKind.BOOLEAN:
        if isinstance(ast, ex.Comparison):
            p_true = _comparison_probs(node, ast, layouts)
        elif isinstance(ast, ex.Dist) and ast.name == "binomial" and _const_one(ast.args[0]):
            p_true = np.clip(
                np.asarray(ex.evaluate_deterministic(ast.args[1], env), dtype=float), 0.0, 1.0
            )
        elif ex.is_deterministic(ast):
            p_true = (
                np.asarray(ex.evaluate_deterministic(ast, env), dtype=float) != 0
            ).astype(float)
        else:
            raise ArityError(
                f"Boolean node {node.id!r} accepts comparisons, deterministic "
                "expressions or Binomial(1, p)"
            )
        p_true = np.broadcast_to(p_true, parent_shape)
        stack = np.stack([1.0 - p_true, p_true], axis=-1)
        return stack[..., lay.state_indices]

    if node.kind is NodeKind.RANKED:
        dist = _as_dist(node, ast)
        masses = ex.interval_masses(dist, env, ranked_edges(node.num_states()), strict=False)
        masses = np.broadcast_to(masses, parent_shape + (node.num_states(),))
        return masses[..., lay.state_indices]

    if node.kind is NodeKind.LABELLED:
        raise ArityError(f"labelled node {node.id!r} requires a Table CPD")

    dist = _as_dist(node, ast)
    integer_cells = lay.cells if node.kind is NodeKind.INTEGER else None
    edges = (
        None
        if integer_cells is not None
        else np.concatenate([lay.cells[:, 0], lay.cells[-1:, 1]])
    )
    if dist.name == "arithmetic":
        quad_axes = [i for i, p in enumerate(node.parents) if layouts[p].mode == "grid"][:2]
        if len(quad_axes) == 1:
            spread = _monotone_image_masses(node, dist.args[0], layouts, lay, env, quad_axes[0])
            if spread is not None:
                return spread
        if quad_axes:
            # several gridded parents (or a non-monotone map): spread each
            # parent cell's mass over quadrature images instead of a single
            # midpoint, taming the double-discretization bias
            from itertools import product as iter_product

            k = len(node.parents)
            quad_reps = {i: _quadrature_reps(layouts[node.parents[i]]) for i in quad_axes}
            total = None
            for combo in iter_product(range(3), repeat=len(quad_axes)):
                combo_env = dict(env)
                weight = 1.0
                for axis, qi in zip(quad_axes, combo):
                    reps = quad_reps[axis][qi]
                    shape = [1] * k
                    shape[axis] = len(reps)
                    combo_env[node.parents[axis]] = reps.reshape(shape)
                    weight *= math.exp(_GL_LOG_WEIGHTS[qi])
                masses = ex.interval_masses(
                    dist, combo_env, edges, integer_cells=integer_cells, strict=False
                )
                masses = np.broadcast_to(masses, parent_shape + (lay.size,))
                total = masses * weight if total is None else total + masses * weight
            return total
    masses = ex.interval_masses(dist, env, edges, integer_cells=integer_cells, strict=False)
    return np.broadcast_to(masses, parent_shape + (lay.size,))


def _monotone_image_masses(
    node: Node, ast, layouts: dict[str, _Layout], lay: _Layout, env: dict, axis: int
) -> np.ndarray | None:
    """Pushforward of a deterministic map along one gridded parent: each
    parent cell's mass spreads uniformly over its image interval
    [f(a), f(b)]. Returns None when the map is not monotone within cells
    (checked at midpoints), leaving the caller to fall back to quadrature
    atoms."""
    parent_id = node.parents[axis]
    parent_lay = layouts[parent_id]
    k = len(node.parents)
    cells = parent_lay.cells
    if parent_lay.node.kind is NodeKind.INTEGER:
        endpoints = (cells[:, 0] - 0.5, cells[:, 1] + 0.5)
    else:
        endpoints = (cells[:, 0], cells[:, 1])
    mids = parent_lay.numeric_reps()

    def value_at(reps: np.ndarray) -> np.ndarray:
        sub_env = dict(env)
        shape = [1] * k
        shape[axis] = len(reps)
        sub_env[parent_id] = reps.reshape(shape)
        parent_shape = tuple(layouts[p].size for p in node.parents)
        return np.broadcast_to(
            np.asarray(ex.evaluate_deterministic(ast, sub_env), dtype=float), parent_shape
        )

    try:
        f_lo = value_at(endpoints[0])
        f_hi = value_at(endpoints[1])
        f_mid = value_at(mids)
    except Exception:
        return None
    img_lo = np.minimum(f_lo, f_hi)
    img_hi = np.maximum(f_lo, f_hi)
    slack = 1e-9 * np.maximum(np.abs(img_lo), np.abs(img_hi)) + 1e-300
    if not np.all((f_mid >= img_lo - slack) & (f_mid <= img_hi + slack)):
        return None

    if node.kind is NodeKind.INTEGER:
        cell_lo = lay.cells[:, 0] - 0.5
        cell_hi = lay.cells[:, 1] + 0.5
    else:
        cell_lo = lay.cells[:, 0]
        cell_hi = lay.cells[:, 1]
    width = img_hi - img_lo
    tiny = width <= 1e-12 * np.maximum(1.0, np.abs(img_hi))
    safe_w = np.where(tiny, 1.0, width)
    overlap = np.clip(
        np.minimum(img_hi[..., None], cell_hi) - np.maximum(img_lo[..., None], cell_lo),
        0.0,
        None,
    ) / safe_w[..., None]
    # degenerate image: all mass at the midpoint value
    point = ((f_mid[..., None] >= cell_lo) & (f_mid[..., None] < cell_hi)).astype(float)
    at_top = np.isclose(f_mid[..., None], cell_hi[-1]) & (
        np.arange(lay.size) == lay.size - 1
    )
    point = np.maximum(point, at_top.astype(float))
    return np.where(tiny[..., None], point, overlap)


def _assemble_partitioned(node: Node, layouts: dict[str, _Layout], build_case) -> np.ndarray:
    """Evaluate one array per partition case and keep each case's slice where
    the partition parent is in that state."""
    cpd: PartitionedCpd = node.cpd
    part_axis = node.parents.index(cpd.parent)
    part_lay = layouts[cpd.parent]
    part_node = part_lay.node
    out = None
    for j, idx in enumerate(part_lay.state_indices):
        case = build_case(cpd.case_for(part_node.states[int(idx)]))
        case = np.asarray(case, dtype=float)
        if out is None:
            out = np.zeros(case.shape)
        sl = [slice(None)] * out.ndim
        sl[part_axis] = j
        out[tuple(sl)] = case[tuple(sl)]
    return out


def _node_factor(node: Node, layouts: dict[str, _Layout]) -> _Factor:
    lay = layouts[node.id]
    dims = tuple(node.parents) + (node.id,)

    if isinstance(node.cpd, TableCpd):
        full_shape = tuple(layouts[p].node.num_states() for p in node.parents) + (
            node.num_states(),
        )
        arr = np.asarray(node.cpd.rows, dtype=float).reshape(full_shape)
        for i, p in enumerate(node.parents):
            arr = np.take(arr, layouts[p].state_indices, axis=i)
        arr = np.take(arr, lay.state_indices, axis=-1)
        return _Factor(dims, arr)

    point_mode = lay.mode == "point"
    if isinstance(node.cpd, ExpressionCpd):
        if point_mode:
            log_arr = _expression_log_point(node, node.cpd.ast, layouts, lay.value)
        else:
            return _Factor(dims, _expression_masses(node, node.cpd.ast, layouts, lay))
    else:  # partitioned
        if point_mode:
            log_arr = _assemble_partitioned(
                node, layouts, lambda ast: _expression_log_point(node, ast, layouts, lay.value)
            )
        else:
            arr = _assemble_partitioned(
                node, layouts, lambda ast: _expression_masses(node, ast, layouts, lay)
            )
            return _Factor(dims, arr)

    # point-clamped node: likelihood over parents, log space, max-normalized
    peak = float(np.max(log_arr)) if log_arr.size else -math.inf
    if not math.isfinite(peak):
        return _Factor(tuple(node.parents), np.zeros(log_arr.shape))
    return _Factor(tuple(node.parents), np.exp(log_arr - peak), peak)


# ----------------------------------------------------------------------
# Variable elimination
# ----------------------------------------------------------------------


def _marginal(
    factors: list[_Factor], keep: tuple[str, ...], decl_index: dict[str, int]
) -> _Factor:
    """Sum-product marginal over ``keep`` via min-fill elimination."""
    factors = list(factors)
    scopes = [set(f.dims) for f in factors]
    neighbors: dict[str, set[str]] = {}
    for scope in scopes:
        for v in scope:
            neighbors.setdefault(v, set()).update(scope - {v})
    to_eliminate = set(neighbors) - set(keep)

    def fill_cost(v: str) -> int:
        nb = neighbors[v] - {v}
        return sum(
            1
            for i, a in enumerate(sorted(nb))
            for b in sorted(nb)[i + 1 :]
            if b not in neighbors.get(a, set())
        )

    order: list[str] = []
    working = {v: set(nb) for v, nb in neighbors.items()}
    remaining = set(to_eliminate)
    while remaining:
        best = min(remaining, key=lambda v: (fill_cost(v), decl_index.get(v, 1 << 30), v))
        order.append(best)
        nb = working[best] - {best}
        for a in nb:
            working[a].update(nb - {a})
            working[a].discard(best)
        for v in working:
            working[v].discard(best)
        neighbors = working
        remaining.discard(best)

    for v in order:
        touching = [f for f in factors if v in f.dims]
        rest = [f for f in factors if v not in f.dims]
        if not touching:
            continue
        prod = touching[0]
        for f in touching[1:]:
            prod = _multiply(prod, f)
        factors = rest + [_rescaled(_sum_out(prod, v))]

    result = factors[0]
    for f in factors[1:]:
        result = _multiply(result, f)
    # normalize axis order to keep order
    present = tuple(d for d in keep if d in result.dims)
    if present != result.dims:
        perm = [result.dims.index(d) for d in present]
        result = _Factor(present, np.transpose(result.arr, perm), result.logscale)
    return result


# ----------------------------------------------------------------------
# Solve state
# ----------------------------------------------------------------------


@dataclass
class _SolveState:
    model: CompiledModel
    evidence: dict[str, Observation]
    config: DiscretizationConfig
    layouts: dict[str, _Layout]
    factors: list[_Factor]
    posteriors: dict[str, Posterior]
    raw_masses: dict[str, np.ndarray]
    log_likelihood: float
    iterations: int
    converged: bool
    warnings: tuple[str, ...]


def _deterministic_point(node: Node, layouts: dict[str, _Layout]) -> float | None:
    """Exact value of an interval node whose CPD is deterministic and whose
    referenced parents are all single-valued; None when not collapsible."""
    ast = None
    if isinstance(node.cpd, ExpressionCpd):
        ast = node.cpd.ast
    elif isinstance(node.cpd, PartitionedCpd):
        part_lay = layouts.get(node.cpd.parent)
        if part_lay is None or part_lay.mode != "discrete" or part_lay.size != 1:
            return None
        state = part_lay.node.states[int(part_lay.state_indices[0])]
        ast = node.cpd.case_for(state)
    if ast is None or not ex.is_deterministic(ast):
        return None
    env: dict[str, float] = {}
    for ref in ex.parents_of(ast):
        lay = layouts.get(ref)
        if lay is None:
            return None
        if lay.mode == "point":
            env[ref] = lay.value
        elif lay.mode == "discrete" and lay.size == 1:
            try:
                env[ref] = float(lay.numeric_reps()[0])
            except Exception:
                return None
        else:
            return None
    try:
        v = float(np.asarray(ex.evaluate_deterministic(ast, env)))
    except Exception:
        return None
    if node.kind is NodeKind.INTEGER:
        v = float(round(v))
    return v


def _build_layouts(
    model: CompiledModel, evidence: dict[str, Observation], grids: dict[str, _Grid]
) -> dict[str, _Layout]:
    layouts: dict[str, _Layout] = {}
    for node_id in model.order:
        node = model.node(node_id)
        obs = evidence.get(node.id)
        if node.kind.is_discrete:
            if isinstance(obs, DiscreteState):
                idx = np.array([node.state_index(obs.state)])
            else:
                idx = np.arange(node.num_states())
            layouts[node.id] = _Layout(node, "discrete", state_indices=idx)
        elif isinstance(obs, Value):
            v = float(round(obs.value)) if node.kind is NodeKind.INTEGER else obs.value
            layouts[node.id] = _Layout(node, "point", value=v)
        else:
            point = _deterministic_point(node, layouts)
            if point is not None and obs is None:
                layouts[node.id] = _Layout(node, "point", value=point)
            else:
                cells = grids[node.id].cells_array()
                layouts[node.id] = _Layout(node, "grid", cells=cells)
    return layouts


def _make_posterior(node: Node, lay: _Layout, masses: np.ndarray) -> Posterior:
    total = float(masses.sum())
    if total > 0:
        masses = masses / total
    if lay.mode == "discrete":
        probs = np.zeros(node.num_states())
        probs[lay.state_indices] = masses
        return Posterior(node.id, node.kind, states=node.states, probs=probs)
    if lay.mode == "point":
        return Posterior(node.id, node.kind, point=lay.value)
    return Posterior(node.id, node.kind, cells=lay.cells.copy(), masses=masses)


def _summary_signature(post: Posterior) -> tuple:
    if post.kind is NodeKind.LABELLED:
        return ("probs", tuple(np.asarray(post.probs, dtype=float)))
    return ("moments", post.mean, post.variance)


def _signatures_close(a: tuple, b: tuple, tol: float) -> bool:
    if a[0] != b[0]:
        return False
    if a[0] == "probs":
        return max(abs(x - y) for x, y in zip(a[1], b[1])) <= tol
    dm = abs(a[1] - b[1])
    dv = abs(a[2] - b[2])
    # scale floors use the posterior's own scale so near-point posteriors
    # terminate once further splitting stops moving the summaries
    scale = max(abs(b[1]), math.sqrt(max(b[2], 0.0)))
    mean_ok = dm <= tol * max(abs(b[1]), math.sqrt(max(b[2], 0.0)), 1e-300)
    var_ok = dv <= tol * max(b[2], (1e-4 * scale) ** 2, 1e-300)
    return mean_ok and var_ok


def _comparison_cuts(model: CompiledModel, evidence: dict[str, Observation]) -> dict[str, list[float]]:
    """Cut points injected at comparison thresholds whose other operand is
    fully determined by constants and point evidence."""
    clamped_env: dict[str, float] = {}
    for node_id, obs in evidence.items():
        if isinstance(obs, Value):
            clamped_env[node_id] = obs.value
    cuts: dict[str, list[float]] = {}

    def scan(comp: ex.Comparison) -> None:
        for me, other in ((comp.left, comp.right), (comp.right, comp.left)):
            if not isinstance(me, ex.ParentRef):
                continue
            refs = ex.parents_of(other)
            if all(r in clamped_env for r in refs):
                try:
                    v = float(np.asarray(ex.evaluate_deterministic(other, clamped_env)))
                except Exception:
                    continue
                cuts.setdefault(me.name, []).append(v)

    def walk(e) -> None:
        if isinstance(e, ex.Comparison):
            scan(e)
            walk(e.left)
            walk(e.right)
        elif isinstance(e, ex.Unary):
            walk(e.operand)
        elif isinstance(e, ex.Binary):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, ex.MinMax):
            for a in e.args:
                walk(a)
        elif isinstance(e, ex.WMean):
            for w, v in e.pairs:
                walk(w)
                walk(v)
        elif isinstance(e, ex.If):
            walk(e.cond)
            walk(e.then)
            walk(e.orelse)
        elif isinstance(e, ex.Dist):
            for a in e.args:
                walk(a)

    for node in model.nodes:
        if isinstance(node.cpd, ExpressionCpd):
            walk(node.cpd.ast)
        elif isinstance(node.cpd, PartitionedCpd):
            for _, ast in node.cpd.cases:
                walk(ast)
    return cuts


def _solve(model: CompiledModel, evidence, config: DiscretizationConfig) -> _SolveState:
    evidence = normalize_evidence(model, evidence)
    warnings_: list[str] = []

    grids: dict[str, _Grid] = {}
    for node in model.nodes:
        if not node.kind.is_interval:
            continue
        lo, hi = model.supports[node.id]
        obs = evidence.get(node.id)
        if isinstance(obs, Interval):
            lo, hi = max(lo, obs.lo), min(hi, obs.hi)
            if node.kind is NodeKind.INTEGER:
                lo, hi = math.floor(lo), math.ceil(hi)
        if (
            node.kind is NodeKind.INTEGER
            and not isinstance(obs, Value)
            and hi - lo > WIDE_INTEGER_RANGE
        ):
            warnings_.append(
                f"UnboundedIntegerWarning: node {node.id!r} spans [{lo:g}, {hi:g}] "
                f"unobserved; inference bins it (up to {config.max_intervals} cells)"
            )
        grids[node.id] = _Grid(node, lo, hi, config.initial_intervals)

    for node_id, cut_list in _comparison_cuts(model, evidence).items():
        if node_id in grids:
            for v in cut_list:
                grids[node_id].insert_cut(v)

    decl_index = {n.id: i for i, n in enumerate(model.nodes)}
    prev_signatures: dict[str, tuple] | None = None
    budget_hit: set[str] = set()
    state: _SolveState | None = None

    iterations = 0
    converged = False
    for iteration in range(1, config.max_iterations + 1):
        iterations = iteration
        layouts = _build_layouts(model, evidence, grids)
        factors = [_node_factor(node, layouts) for node in model.nodes]

        posteriors: dict[str, Posterior] = {}
        raw: dict[str, np.ndarray] = {}
        loglik = None
        for node in model.nodes:
            marg = _marginal(factors, (node.id,), decl_index)
            arr = np.asarray(marg.arr, dtype=float).reshape(layouts[node.id].size)
            total = float(arr.sum())
            if loglik is None:
                loglik = (math.log(total) + marg.logscale) if total > 0 else -math.inf
            if total <= 0:
                raise ZeroProbabilityEvidence(
                    "evidence has zero probability under the model"
                )
            raw[node.id] = arr / total
            posteriors[node.id] = _make_posterior(node, layouts[node.id], arr)

        signatures = {nid: _summary_signature(p) for nid, p in posteriors.items()}
        if prev_signatures is not None:
            converged = all(
                _signatures_close(signatures[nid], prev_signatures[nid], config.tolerance)
                for nid in signatures
            )
        prev_signatures = signatures

        state = _SolveState(
            model=model,
            evidence=evidence,
            config=config,
            layouts=layouts,
            factors=factors,
            posteriors=posteriors,
            raw_masses=raw,
            log_likelihood=loglik,
            iterations=iterations,
            converged=converged,
            warnings=tuple(warnings_),
        )
        if converged:
            break

        split_any = False
        blocked = False
        for node_id, grid in grids.items():
            lay = layouts[node_id]
            if lay.mode != "grid":
                continue
            masses = raw[node_id]
            widths = lay.cells[:, 1] - lay.cells[:, 0]
            if lay.node.kind is NodeKind.INTEGER:
                widths = widths + 1.0
            # two split triggers: raw posterior mass, and mass-weighted width
            # (a wide cell with moderate mass dominates the moment error even
            # though it never crosses the mass threshold)
            load = masses * widths
            spread = float(load.sum())
            mass_pieces = masses / config.split_mass
            load_pieces = load / max(config.split_mass * spread, 1e-300)
            wanted = np.maximum(mass_pieces, load_pieces)
            over = np.flatnonzero(wanted > 1.0)
            if over.size == 0:
                continue
            # split from the right so earlier indices stay valid
            for idx in sorted((int(i) for i in over), reverse=True):
                room = config.max_intervals - grid.size
                if room <= 0:
                    blocked = True
                    if node_id not in budget_hit:
                        budget_hit.add(node_id)
                        warnings_.append(
                            f"BudgetExceeded: node {node_id!r} hit the interval cap "
                            f"({config.max_intervals}); posterior is best-effort"
                        )
                    break
                pieces = min(max(2, math.ceil(wanted[idx])), 8, room + 1)
                if grid.split(idx, pieces) > 0:
                    split_any = True
        if not split_any:
            # the grid is a fixed point: further iterations cannot change it
            if not blocked:
                converged = True
                state.converged = True
            break

    if state.log_likelihood < _LOG_FLOOR:
        raise ZeroProbabilityEvidence(
            f"evidence likelihood {math.exp(state.log_likelihood) if state.log_likelihood > -745 else 0.0:g} "
            "is below the 1e-300 floor"
        )
    state.warnings = tuple(warnings_)
    state.converged = converged
    state.iterations = iterations
    return state


# ----------------------------------------------------------------------
# Public operations
# ----------------------------------------------------------------------


def infer(
    model: CompiledModel,
    evidence=None,
    config: DiscretizationConfig | None = None,
) -> InferenceResult:
    """Posterior marginals for every node given evidence.

    Exact (up to discretization) via variable elimination; the refinement
    loop re-solves on progressively finer grids until summaries stabilise.
    Raises ZeroProbabilityEvidence when the evidence is impossible under the
    model; an exhausted interval budget yields a warning, not an error.

    Parameters
    ----------
    model : CompiledModel
    evidence : mapping of node id to state label, number, or [lo, hi] pair
    config : DiscretizationConfig, optional
    """
    state = _solve(model, evidence, config or DEFAULT_CONFIG)
    if not state.converged and state.iterations >= state.config.max_iterations:
        state.warnings = state.warnings + (
            f"refinement stopped at the iteration cap ({state.config.max_iterations})",
        )
    return InferenceResult(
        posteriors=state.posteriors,
        log_likelihood=state.log_likelihood,
        iterations=state.iterations,
        converged=state.converged,
        warnings=state.warnings,
    )


def probability_query(
    model: CompiledModel,
    evidence,
    predicate,
    config: DiscretizationConfig | None = None,
) -> float:
    """P(predicate | evidence) for a comparison over nodes or node vs constant.

    ``predicate`` is a comparison expression string such as ``"p <= 0.011"``
    or a parsed Comparison AST. Within-cell uniform overlap fractions connect
    the discretized joint of the operands to the comparison.
    """
    comp = ex.parse_expression(predicate) if isinstance(predicate, str) else predicate
    if not isinstance(comp, ex.Comparison):
        raise ArityError("probability_query needs a comparison predicate")
    refs = sorted(ex.parents_of(comp))
    for r in refs:
        model.node(r)  # raises UnknownParent for unknown ids
    state = _solve(model, evidence, config or DEFAULT_CONFIG)
    decl_index = {n.id: i for i, n in enumerate(model.nodes)}
    if not refs:
        value = float(np.asarray(ex.evaluate_deterministic(comp, {})))
        return value
    joint = _marginal(state.factors, tuple(refs), decl_index)
    arr = np.asarray(joint.arr, dtype=float)
    total = arr.sum()
    if total <= 0:
        raise ZeroProbabilityEvidence("evidence has zero probability under the model")
    arr = arr / total

    def operand_intervals(e, dims):
        if isinstance(e, ex.ParentRef):
            lay = state.layouts[e.name]
            lo, hi = lay.comparison_intervals()
            shape = [1] * len(dims)
            shape[dims.index(e.name)] = len(lo)
            return lo.reshape(shape), hi.reshape(shape)
        env = {}
        for i, d in enumerate(dims):
            reps = state.layouts[d].numeric_reps()
            shape = [1] * len(dims)
            shape[i] = len(reps)
            env[d] = reps.reshape(shape)
        val = np.asarray(ex.evaluate_deterministic(e, env), dtype=float)
        return val, val

    dims = list(joint.dims)
    lo1, hi1 = operand_intervals(comp.left, dims)
    lo2, hi2 = operand_intervals(comp.right, dims)
    probs = _prob_less(lo1, hi1, lo2, hi2, comp.op)
    return float(np.sum(arr * probs))


def do_intervention(model: CompiledModel, node_id: str, value) -> CompiledModel:
    """Sever a node from its parents and fix it at ``value`` (do-operator).

    Returns a new compiled model; the original is unchanged.
    """
    try:
        node = model.node(node_id)
    except Exception:
        raise UnknownNode(f"unknown node {node_id!r}") from None
    if node.kind.is_discrete:
        if isinstance(value, bool):
            value = str(value)
        if not isinstance(value, str):
            raise ValueOutOfDomain(f"node {node_id!r} is discrete; intervene with a state label")
        idx = None
        try:
            idx = node.state_index(value)
        except ValueError as err:
            raise ValueOutOfDomain(str(err)) from None
        row = tuple(1.0 if i == idx else 0.0 for i in range(node.num_states()))
        new_node = Node(
            id=node.id,
            kind=node.kind,
            states=node.states,
            bounds=node.bounds,
            parents=(),
            cpd=TableCpd((row,)),
        )
    else:
        v = float(value)
        if node.bounds is not None and not (node.bounds[0] <= v <= node.bounds[1]):
            raise ValueOutOfDomain(
                f"value {v} outside declared bounds {node.bounds} of node {node_id!r}"
            )
        if node.kind is NodeKind.INTEGER:
            if abs(v - round(v)) > 1e-9:
                raise ValueOutOfDomain(f"integer node {node_id!r} needs an integer value")
            v = float(round(v))
        new_node = Node(
            id=node.id,
            kind=node.kind,
            states=None,
            bounds=node.bounds,
            parents=(),
            cpd=ExpressionCpd(ex.Dist("arithmetic", (ex.Constant(v),))),
        )
    return build_model(model.spec.replace_node(new_node))
