"""On-disk formats: model documents, evidence files, result documents.

Models are JSON (UTF-8, no comments). A document carries either raw nodes or
an idiom manifest (fragments plus bindings) -- never both; manifest documents
expand through the idiom library before compilation. Expressions are stored
as grammar strings so files stay human-writable. Serialization is
deterministic: node order is preserved, result keys are sorted, and floats
are canonicalized to 12 significant digits.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

from . import __version__ as _engine_version
from . import expressions as ex
from .errors import ModelParseError, StrictKeyError, VersionError
from .graph import (
    ExpressionCpd,
    ModelSpec,
    Node,
    NodeKind,
    PartitionedCpd,
    TableCpd,
)
from .idioms import (
    OCCURRENCE_KINDS,
    PROCESS_KINDS,
    RELIABILITY_KINDS,
    RISK_KINDS,
    PortBinding,
    compose,
    instantiate_occurrence_idiom,
    instantiate_process_idiom,
    instantiate_reliability_idiom,
    instantiate_risk_idiom,
)
from .inference import InferenceResult, PERCENTILES

__all__ = [
    "FORMAT_VERSION",
    "load_model",
    "loads_model",
    "save_model",
    "model_to_document",
    "load_evidence",
    "write_results",
    "result_document",
]

FORMAT_VERSION = "1"

_TOP_KEYS = {"version", "title", "metadata", "nodes", "idioms", "bindings"}
_NODE_KEYS = {"id", "kind", "states", "bounds", "parents", "cpd"}


def _instantiate(kind: str, instance: str, params: dict):
    if kind in RELIABILITY_KINDS:
        return instantiate_reliability_idiom(kind, instance, params)
    if kind in PROCESS_KINDS:
        return instantiate_process_idiom(kind, instance, params)
    if kind in OCCURRENCE_KINDS:
        return instantiate_occurrence_idiom(kind, instance, params)
    if kind in RISK_KINDS:
        return instantiate_risk_idiom(kind, instance, params)
    raise ModelParseError(f"unknown idiom kind {kind!r}")


# ----------------------------------------------------------------------
# Loading
# ----------------------------------------------------------------------


def load_model(path, strict: bool = True) -> ModelSpec:
    """Parse a model document into a ModelSpec ready for build_model.

    Unknown top-level keys are rejected in strict mode and ignored with a
    parse-time note otherwise. Raises ModelParseError (with position info
    where available), VersionError or StrictKeyError.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ModelParseError(f"cannot read {path}: {err}") from err
    return loads_model(text, strict=strict, source=str(path))


def loads_model(text: str, strict: bool = True, source: str = "<string>") -> ModelSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ModelParseError(
            f"{source}: invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}"
        ) from err
    if not isinstance(doc, dict):
        raise ModelParseError(f"{source}: model document must be a JSON object")

    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise VersionError(f"{source}: unrecognized format version {version!r}")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        message = f"{source}: unknown top-level key(s): {', '.join(sorted(unknown))}"
        if strict:
            raise StrictKeyError(message)
        warnings.warn(message, UserWarning, stacklevel=2)

    has_nodes = "nodes" in doc
    has_idioms = "idioms" in doc
    if has_nodes == has_idioms:
        raise ModelParseError(f"{source}: document needs exactly one of 'nodes' or 'idioms'")
    if "bindings" in doc and not has_idioms:
        raise ModelParseError(f"{source}: 'bindings' requires an idiom manifest")

    title = str(doc.get("title", ""))
    metadata = dict(doc.get("metadata", {}))

    if has_idioms:
        fragments = []
        for i, entry in enumerate(doc["idioms"]):
            if not isinstance(entry, dict) or "kind" not in entry or "instance" not in entry:
                raise ModelParseError(f"{source}: idioms[{i}] needs 'kind' and 'instance'")
            fragments.append(
                _instantiate(str(entry["kind"]), str(entry["instance"]), dict(entry.get("params", {})))
            )
        bindings = []
        for i, entry in enumerate(doc.get("bindings", [])):
            if not isinstance(entry, dict) or "from" not in entry or "to" not in entry:
                raise ModelParseError(f"{source}: bindings[{i}] needs 'from' and 'to'")
            bindings.append(
                PortBinding(
                    from_port=str(entry["from"]),
                    to_port=str(entry["to"]),
                    mode=str(entry.get("mode", "merge")),
                    cpd=entry.get("cpd"),
                )
            )
        spec = compose(fragments, bindings, title=title, metadata=metadata)
        return spec

    nodes = []
    for i, raw in enumerate(doc["nodes"]):
        nodes.append(_parse_node(raw, i, strict, source))
    return ModelSpec(tuple(nodes), title=title, metadata=metadata)


def _parse_node(raw, index: int, strict: bool, source: str) -> Node:
    if not isinstance(raw, dict):
        raise ModelParseError(f"{source}: nodes[{index}] must be an object")
    unknown = set(raw) - _NODE_KEYS
    if unknown:
        message = f"{source}: nodes[{index}] has unknown key(s): {', '.join(sorted(unknown))}"
        if strict:
            raise StrictKeyError(message)
        warnings.warn(message, UserWarning, stacklevel=2)
    try:
        node_id = str(raw["id"])
        kind = NodeKind(str(raw["kind"]))
    except KeyError as err:
        raise ModelParseError(f"{source}: nodes[{index}] is missing {err}") from None
    except ValueError as err:
        raise ModelParseError(f"{source}: nodes[{index}]: {err}") from None
    states = tuple(str(s) for s in raw["states"]) if raw.get("states") is not None else None
    bounds = tuple(float(b) for b in raw["bounds"]) if raw.get("bounds") is not None else None
    parents = tuple(str(p) for p in raw.get("parents", ()))
    cpd_raw = raw.get("cpd")
    if not isinstance(cpd_raw, dict) or len(cpd_raw) != 1:
        raise ModelParseError(
            f"{source}: nodes[{index}] cpd must be one of expression/table/partitioned"
        )
    (form, payload), = cpd_raw.items()
    try:
        if form == "expression":
            cpd = ExpressionCpd.parse(str(payload))
        elif form == "table":
            cpd = TableCpd(tuple(tuple(float(x) for x in row) for row in payload))
        elif form == "partitioned":
            cpd = PartitionedCpd.parse(
                str(payload["parent"]), {str(k): str(v) for k, v in payload["cases"].items()}
            )
        else:
            raise ModelParseError(f"{source}: nodes[{index}] has unknown cpd form {form!r}")
    except ModelParseError:
        raise
    except Exception as err:
        raise ModelParseError(f"{source}: nodes[{index}] cpd: {err}") from err
    return Node(id=node_id, kind=kind, states=states, bounds=bounds, parents=parents, cpd=cpd)


# ----------------------------------------------------------------------
# Saving
# ----------------------------------------------------------------------


def model_to_document(spec: ModelSpec) -> dict:
    """Canonical raw-node document for a model spec."""
    nodes = []
    for node in spec.nodes:
        entry: dict = {"id": node.id, "kind": node.kind.value}
        if node.states is not None:
            entry["states"] = list(node.states)
        if node.bounds is not None:
            entry["bounds"] = [_num(node.bounds[0]), _num(node.bounds[1])]
        if node.parents:
            entry["parents"] = list(node.parents)
        if isinstance(node.cpd, ExpressionCpd):
            entry["cpd"] = {"expression": ex.pretty(node.cpd.ast)}
        elif isinstance(node.cpd, TableCpd):
            entry["cpd"] = {"table": [[_num(x) for x in row] for row in node.cpd.rows]}
        else:
            entry["cpd"] = {
                "partitioned": {
                    "parent": node.cpd.parent,
                    "cases": {state: ex.pretty(ast) for state, ast in node.cpd.cases},
                }
            }
        nodes.append(entry)
    doc = {"version": FORMAT_VERSION, "title": spec.title, "nodes": nodes}
    if spec.metadata:
        doc["metadata"] = spec.metadata
    return doc


def save_model(spec: ModelSpec, path) -> None:
    """Write the canonical raw-node form; load_model(save_model(spec)) is
    identity on that form."""
    Path(path).write_text(
        json.dumps(model_to_document(spec), indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )


# ----------------------------------------------------------------------
# Evidence
# ----------------------------------------------------------------------


def load_evidence(path) -> dict:
    """Evidence file: a flat JSON map node-id -> state | number | [lo, hi]."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ModelParseError(f"cannot read {path}: {err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ModelParseError(
            f"{path}: invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}"
        ) from err
    if not isinstance(doc, dict):
        raise ModelParseError(f"{path}: evidence must be a JSON object")
    for key, value in doc.items():
        if isinstance(value, list) and len(value) != 2:
            raise ModelParseError(f"{path}: interval observation {key!r} needs [lo, hi]")
    return doc


# ----------------------------------------------------------------------
# Results
# ----------------------------------------------------------------------


def _num(x):
    """Canonical 12-significant-digit float (ints stay ints)."""
    f = float(x)
    if f == int(f) and abs(f) < 1e15:
        return int(f)
    return float(f"{f:.12g}")


def result_document(
    result: InferenceResult,
    evidence_echo: str = "",
    config_echo: str = "",
    wall_time: float | None = None,
) -> dict:
    nodes = {}
    for node_id in sorted(result.posteriors):
        post = result.posteriors[node_id]
        entry: dict = {}
        if post.mean is not None:
            entry["mean"] = _num(post.mean)
            entry["variance"] = _num(post.variance)
        pct = post.percentiles
        if pct is not None:
            entry["percentiles"] = {f"p{q:02d}": _num(v) for q, v in pct.items()}
        probs = post.state_probabilities
        if probs is not None:
            entry["states"] = {state: _num(p) for state, p in probs.items()}
        nodes[node_id] = entry
    doc = {
        "engine_version": _engine_version,
        "log_likelihood": _num(result.log_likelihood),
        "iterations": result.iterations,
        "converged": result.converged,
        "warnings": list(result.warnings),
        "evidence_echo": evidence_echo,
        "config_echo": config_echo,
        "nodes": nodes,
    }
    if wall_time is not None:
        doc["wall_time_seconds"] = _num(wall_time)
    return doc


def write_results(
    result: InferenceResult,
    path,
    format: str = "json",
    evidence_echo: str = "",
    config_echo: str = "",
    wall_time: float | None = None,
) -> None:
    """Serialize posteriors deterministically (sorted ids, 12-significant-
    digit floats). ``format`` is ``json`` or ``csv``."""
    path = Path(path)
    if format == "json":
        doc = result_document(result, evidence_echo, config_echo, wall_time)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return
    if format != "csv":
        raise ModelParseError(f"unknown result format {format!r}")
    lines = ["node,mean,variance,p05,p25,p50,p75,p95"]
    for node_id in sorted(result.posteriors):
        post = result.posteriors[node_id]
        mean = "" if post.mean is None else _fmt(post.mean)
        var = "" if post.variance is None else _fmt(post.variance)
        pct = post.percentiles
        cols = [node_id, mean, var]
        if pct is None:
            cols += [""] * len(PERCENTILES)
        else:
            cols += [_fmt(pct[q]) for q in PERCENTILES]
        lines.append(",".join(cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt(x: float) -> str:
    # '.' decimal separator, no grouping, regardless of locale
    return f"{float(x):.12g}"
