"""Typed DAG model representation: node kinds, CPDs, compilation, validation.

A model is a list of node declarations. Compilation verifies structure
(acyclicity, parent references, expression arity), fixes a stable topological
order, and resolves finite support bounds for every interval node by interval
arithmetic over the expression ASTs. Compiled models are immutable and safe
to share across concurrent queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import expressions as ex
from .errors import (
    ArityError,
    CycleError,
    PartitionError,
    UnboundedSupport,
    UnknownParent,
)

__all__ = [
    "NodeKind",
    "TableCpd",
    "ExpressionCpd",
    "PartitionedCpd",
    "Node",
    "ModelSpec",
    "CompiledModel",
    "Diagnostic",
    "DiagnosticsReport",
    "build_model",
    "validate_model",
    "topological_order",
    "ranked_midpoints",
]

BOOLEAN_STATES = ("False", "True")

# integer nodes wider than this and unobserved get binned inference plus an
# UnboundedIntegerWarning
WIDE_INTEGER_RANGE = 1_000_000


class NodeKind(str, Enum):
    LABELLED = "labelled"
    BOOLEAN = "boolean"
    RANKED = "ranked"
    INTEGER = "integer"
    CONTINUOUS = "continuous"

    @property
    def is_discrete(self) -> bool:
        return self in (NodeKind.LABELLED, NodeKind.BOOLEAN, NodeKind.RANKED)

    @property
    def is_interval(self) -> bool:
        return self in (NodeKind.INTEGER, NodeKind.CONTINUOUS)


@dataclass(frozen=True)
class TableCpd:
    """Row-per-parent-combination probability table over a discrete node.

    Rows are ordered row-major over the parents' state indices in parent
    declaration order.
    """

    rows: tuple[tuple[float, ...], ...]

    @staticmethod
    def uniform(num_states: int, num_rows: int = 1) -> "TableCpd":
        row = tuple(1.0 / num_states for _ in range(num_states))
        return TableCpd(tuple(row for _ in range(num_rows)))


@dataclass(frozen=True)
class ExpressionCpd:
    ast: ex.Expr

    @staticmethod
    def parse(text: str) -> "ExpressionCpd":
        return ExpressionCpd(ex.parse_expression(text))


@dataclass(frozen=True)
class PartitionedCpd:
    """One expression per state of a designated discrete parent."""

    parent: str
    cases: tuple[tuple[str, ex.Expr], ...]

    @staticmethod
    def parse(parent: str, cases: dict[str, str]) -> "PartitionedCpd":
        return PartitionedCpd(
            parent, tuple((state, ex.parse_expression(text)) for state, text in cases.items())
        )

    def case_for(self, state: str) -> ex.Expr:
        for s, e in self.cases:
            if s == state:
                return e
        raise PartitionError(f"no partition case for state {state!r}")


Cpd = TableCpd | ExpressionCpd | PartitionedCpd


@dataclass(frozen=True)
class Node:
    """A typed node declaration.

    Discrete kinds carry ``states``; interval kinds may carry explicit
    ``bounds`` which both seed and truncate the resolved support. Ranked
    nodes with k states map state i to the interval [i/k, (i+1)/k) on [0, 1];
    Boolean nodes are fixed to states (False, True).
    """

    id: str
    kind: NodeKind
    states: tuple[str, ...] | None = None
    bounds: tuple[float, float] | None = None
    parents: tuple[str, ...] = ()
    cpd: Cpd | None = None

    def num_states(self) -> int:
        if self.states is None:
            raise ValueError(f"node {self.id!r} has no discrete states")
        return len(self.states)

    def state_index(self, label: str) -> int:
        if self.states is None or label not in self.states:
            raise ValueError(f"{label!r} is not a state of node {self.id!r}")
        return self.states.index(label)


def ranked_midpoints(k: int) -> np.ndarray:
    """Underlying [0,1]-scale value of each ranked state: (i + 0.5) / k."""
    return (np.arange(k) + 0.5) / k


def ranked_edges(k: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, k + 1)


@dataclass(frozen=True)
class ModelSpec:
    nodes: tuple[Node, ...]
    title: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownParent(f"unknown node {node_id!r}")

    def replace_node(self, node: Node) -> "ModelSpec":
        return ModelSpec(
            tuple(node if n.id == node.id else n for n in self.nodes),
            title=self.title,
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    node: str
    message: str


@dataclass(frozen=True)
class DiagnosticsReport:
    errors: tuple[Diagnostic, ...]
    warnings: tuple[Diagnostic, ...]

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class CompiledModel:
    """A validated model with stable topological order and finite supports."""

    spec: ModelSpec
    order: tuple[str, ...]
    supports: dict[str, tuple[float, float]]
    report: DiagnosticsReport

    @property
    def nodes(self) -> tuple[Node, ...]:
        return self.spec.nodes

    def node(self, node_id: str) -> Node:
        return self.spec.node(node_id)

    def children_of(self, node_id: str) -> list[str]:
        return [n.id for n in self.spec.nodes if node_id in n.parents]


# ----------------------------------------------------------------------
# Compilation
# ----------------------------------------------------------------------


def _structural_check(spec: ModelSpec) -> None:
    ids = [n.id for n in spec.nodes]
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            raise UnknownParent(f"duplicate node id {i!r}")
        seen.add(i)
    for n in spec.nodes:
        if len(set(n.parents)) != len(n.parents):
            raise UnknownParent(f"node {n.id!r} lists a parent twice")
        for p in n.parents:
            if p not in seen:
                raise UnknownParent(f"node {n.id!r} references unknown parent {p!r}")
        if n.kind.is_discrete:
            if n.states is None or len(n.states) < 2:
                raise ArityError(f"node {n.id!r} needs at least 2 states")
            if n.kind is NodeKind.BOOLEAN and tuple(n.states) != BOOLEAN_STATES:
                raise ArityError(f"Boolean node {n.id!r} must have states (False, True)")
        else:
            if n.states is not None:
                raise ArityError(f"interval node {n.id!r} cannot declare states")
            if n.bounds is not None and not n.bounds[0] < n.bounds[1]:
                raise ArityError(f"node {n.id!r} bounds must satisfy lo < hi")
        if n.cpd is None:
            raise ArityError(f"node {n.id!r} has no CPD")
        _check_cpd(spec, n)


def _check_cpd(spec: ModelSpec, n: Node) -> None:
    if isinstance(n.cpd, TableCpd):
        if not n.kind.is_discrete:
            raise ArityError(f"Table CPD on node {n.id!r} requires a discrete node")
        expected_rows = 1
        for p in n.parents:
            parent = spec.node(p)
            if not parent.kind.is_discrete:
                raise ArityError(
                    f"Table CPD on node {n.id!r} requires discrete parents; {p!r} is not"
                )
            expected_rows *= parent.num_states()
        if len(n.cpd.rows) != expected_rows:
            raise ArityError(
                f"Table CPD on node {n.id!r} has {len(n.cpd.rows)} rows, expected {expected_rows}"
            )
        for row in n.cpd.rows:
            if len(row) != n.num_states():
                raise ArityError(f"Table CPD row width mismatch on node {n.id!r}")
    elif isinstance(n.cpd, ExpressionCpd):
        _check_refs(n, ex.parents_of(n.cpd.ast))
    elif isinstance(n.cpd, PartitionedCpd):
        if n.cpd.parent not in n.parents:
            raise PartitionError(
                f"partition parent {n.cpd.parent!r} is not a parent of node {n.id!r}"
            )
        part = spec.node(n.cpd.parent)
        if not part.kind.is_discrete:
            raise PartitionError(f"partition parent {n.cpd.parent!r} must be discrete")
        case_states = [s for s, _ in n.cpd.cases]
        if sorted(case_states) != sorted(part.states):
            raise PartitionError(
                f"partitioned CPD on node {n.id!r} must cover every state of "
                f"{n.cpd.parent!r} exactly once"
            )
        refs: set[str] = set()
        for _, ast in n.cpd.cases:
            refs |= ex.parents_of(ast)
        _check_refs(n, refs)


def _check_refs(n: Node, refs: set[str]) -> None:
    undeclared = refs - set(n.parents)
    if undeclared:
        raise ArityError(
            f"expression on node {n.id!r} references undeclared parent(s): "
            f"{', '.join(sorted(undeclared))}"
        )


def _stable_topological_order(spec: ModelSpec) -> tuple[str, ...]:
    # lexicographically-smallest order by declaration index
    index = {n.id: i for i, n in enumerate(spec.nodes)}
    remaining = {n.id: set(n.parents) for n in spec.nodes}
    order: list[str] = []
    placed: set[str] = set()
    while remaining:
        ready = [i for i, deps in remaining.items() if deps <= placed]
        if not ready:
            raise CycleError(_find_cycle(spec, set(remaining)))
        pick = min(ready, key=index.__getitem__)
        order.append(pick)
        placed.add(pick)
        del remaining[pick]
    return tuple(order)


def _find_cycle(spec: ModelSpec, candidates: set[str]) -> list[str]:
    parents = {n.id: [p for p in n.parents if p in candidates] for n in spec.nodes}
    start = sorted(candidates)[0]
    path = [start]
    cur = start
    while True:
        cur = parents[cur][0]
        if cur in path:
            return path[path.index(cur) :]
        path.append(cur)


def _resolve_supports(spec: ModelSpec, order: tuple[str, ...]) -> dict[str, tuple[float, float]]:
    supports: dict[str, tuple[float, float]] = {}
    env: dict[str, tuple[float, float]] = {}
    for node_id in order:
        n = spec.node(node_id)
        if n.kind is NodeKind.RANKED:
            env[node_id] = (0.0, 1.0)
            continue
        if n.kind is NodeKind.BOOLEAN:
            env[node_id] = (0.0, 1.0)
            continue
        if n.kind is NodeKind.LABELLED:
            continue
        if n.bounds is not None:
            # declared bounds are the node's domain; the +-6-sigma style
            # derivation only fills in for nodes without declared bounds
            # (clipping a declared domain would trap evidence-shifted
            # posteriors against an artificial edge)
            lo, hi = n.bounds
        else:
            lo, hi = _node_support(spec, n, env)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise UnboundedSupport(
                f"node {n.id!r} has no derivable finite support; declare bounds"
            )
        if not lo < hi:
            lo, hi = lo - 0.5, lo + 0.5  # degenerate point support gets a unit-width cell
        if n.kind is NodeKind.INTEGER:
            lo, hi = math.floor(lo), math.ceil(hi)
        supports[node_id] = (lo, hi)
        env[node_id] = (lo, hi)
    return supports


def _node_support(spec: ModelSpec, n: Node, env) -> tuple[float, float]:
    if isinstance(n.cpd, ExpressionCpd):
        return ex.support_interval(n.cpd.ast, env)
    if isinstance(n.cpd, PartitionedCpd):
        lo, hi = math.inf, -math.inf
        for _, ast in n.cpd.cases:
            a, b = ex.support_interval(ast, env)
            lo, hi = min(lo, a), max(hi, b)
        return (lo, hi)
    if n.bounds is not None:
        return n.bounds
    raise UnboundedSupport(f"interval node {n.id!r} has neither expression CPD nor bounds")


def build_model(spec: ModelSpec) -> CompiledModel:
    """Compile a model spec: verify structure, fix the topological order,
    resolve finite supports, and attach a validation report.

    Raises CycleError, UnknownParent, ArityError, PartitionError or
    UnboundedSupport. Deterministic: identical specs compile to identical
    orders and supports.
    """
    _structural_check(spec)
    order = _stable_topological_order(spec)
    supports = _resolve_supports(spec, order)
    model = CompiledModel(spec=spec, order=order, supports=supports, report=DiagnosticsReport((), ()))
    report = validate_model(model)
    return CompiledModel(spec=spec, order=order, supports=supports, report=report)


def topological_order(model: CompiledModel) -> tuple[str, ...]:
    """Node ids with every node after all its parents; ties broken by
    declaration order."""
    return model.order


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------


def validate_model(model: CompiledModel) -> DiagnosticsReport:
    """Collect probabilistic-soundness diagnostics; never raises."""
    errors: list[Diagnostic] = []
    warnings_: list[Diagnostic] = []
    for n in model.nodes:
        if isinstance(n.cpd, TableCpd):
            for i, row in enumerate(n.cpd.rows):
                arr = np.asarray(row, dtype=float)
                if np.any(arr < 0):
                    errors.append(
                        Diagnostic("error", "NegativeProbability", n.id, f"row {i} has a negative entry")
                    )
                elif abs(float(arr.sum()) - 1.0) > 1e-9:
                    errors.append(
                        Diagnostic(
                            "error",
                            "NormalizationError",
                            n.id,
                            f"row {i} sums to {float(arr.sum()):.6g}, expected 1",
                        )
                    )
        if n.kind is NodeKind.INTEGER:
            lo, hi = model.supports[n.id]
            if hi - lo > WIDE_INTEGER_RANGE:
                warnings_.append(
                    Diagnostic(
                        "warning",
                        "UnboundedIntegerWarning",
                        n.id,
                        f"integer node spans [{lo:g}, {hi:g}]; observe it or declare "
                        "tighter bounds, otherwise inference bins it coarsely",
                    )
                )
    return DiagnosticsReport(tuple(errors), tuple(warnings_))
