"""HTTP scenario service: the backend the risk-assessor workbench drives.

Scenarios are in-memory (snapshot-to-disk is opt-in via ``persist_dir``).
Per-scenario mutations are serialized by a scenario-level lock; inference on
distinct scenarios may run concurrently over the shared immutable compiled
models. Posteriors are cached per scenario and invalidated by any evidence
or intervention mutation.

Errors use ``{code, message, detail}`` bodies: 400 malformed request,
404 unknown id, 409 zero-probability evidence, 422 domain error. A blown
refinement budget is not an error: the posterior body carries a warning.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .catalog import list_bundled_examples
from .errors import (
    SafetyBnError,
    UnknownNode,
    ValueOutOfDomain,
    ZeroProbabilityEvidence,
)
from .graph import CompiledModel, build_model
from .inference import do_intervention, infer
from .model_io import loads_model, model_to_document

DEFAULT_TIMEOUT_SECONDS = 30.0


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _error(status: int, code: str, message: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"code": code, "message": message, "detail": detail}
    )


class _Scenario:
    def __init__(self, scenario_id: str, model_id: str):
        self.id = scenario_id
        self.model_id = model_id
        self.evidence: dict = {}
        self.interventions: dict = {}
        self.cache: dict | None = None
        self.lock = threading.Lock()
        self.created = _now()
        self.updated = self.created

    def invalidate(self) -> None:
        self.cache = None
        self.updated = _now()

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "model": self.model_id,
            "evidence": self.evidence,
            "interventions": self.interventions,
            "created": self.created,
            "updated": self.updated,
        }


class _Store:
    def __init__(self, persist_dir: Path | None):
        self.persist_dir = persist_dir
        self.lock = threading.Lock()
        self.models: dict[str, dict] = {}
        self.scenarios: dict[str, _Scenario] = {}
        self.counter = 0
        self.executor = ThreadPoolExecutor(max_workers=4)
        self.timeout = DEFAULT_TIMEOUT_SECONDS
        self._load_bundled()
        if persist_dir is not None:
            self._restore()

    def _load_bundled(self) -> None:
        for name, example in list_bundled_examples().items():
            spec = example.model_spec()
            self.models[name] = {
                "id": name,
                "title": example.title,
                "source": "bundled",
                "figure": example.figure,
                "document": example.document,
                "spec": spec,
                "compiled": None,  # built lazily
            }

    def compiled(self, model_id: str) -> CompiledModel:
        entry = self.models[model_id]
        if entry["compiled"] is None:
            entry["compiled"] = build_model(entry["spec"])
        return entry["compiled"]

    def next_id(self, prefix: str) -> str:
        with self.lock:
            self.counter += 1
            return f"{prefix}-{self.counter}"

    # --- persistence -------------------------------------------------

    def _persist_path(self) -> Path:
        return self.persist_dir / "scenarios.json"

    def save(self) -> None:
        if self.persist_dir is None:
            return
        self.persist_dir.mkdir(parents=True, exist_ok=True)
        uploaded = {
            mid: {"title": m["title"], "document": m["document"]}
            for mid, m in self.models.items()
            if m["source"] == "uploaded"
        }
        payload = {
            "counter": self.counter,
            "models": uploaded,
            "scenarios": [s.snapshot() for s in self.scenarios.values()],
        }
        self._persist_path().write_text(json.dumps(payload, indent=2), encoding="utf-8")

    def _restore(self) -> None:
        path = self._persist_path()
        if not path.exists():
            return
        payload = json.loads(path.read_text(encoding="utf-8"))
        self.counter = int(payload.get("counter", 0))
        for mid, entry in payload.get("models", {}).items():
            doc = entry["document"]
            self.models[mid] = {
                "id": mid,
                "title": entry.get("title", ""),
                "source": "uploaded",
                "figure": "",
                "document": doc,
                "spec": loads_model(json.dumps(doc), source=mid),
                "compiled": None,
            }
        for raw in payload.get("scenarios", []):
            if raw["model"] not in self.models:
                continue
            scenario = _Scenario(raw["id"], raw["model"])
            scenario.evidence = dict(raw.get("evidence", {}))
            scenario.interventions = dict(raw.get("interventions", {}))
            scenario.created = raw.get("created", scenario.created)
            scenario.updated = raw.get("updated", scenario.updated)
            self.scenarios[scenario.id] = scenario


def _posterior_body(scenario: _Scenario, compiled: CompiledModel) -> dict:
    model = compiled
    for node_id, value in scenario.interventions.items():
        model = do_intervention(model, node_id, value)
    result = infer(model, scenario.evidence)
    nodes = {}
    for node_id, post in result.posteriors.items():
        entry: dict = {"kind": post.kind.value}
        if post.mean is not None:
            entry["mean"] = post.mean
            entry["variance"] = post.variance
        pct = post.percentiles
        if pct is not None:
            entry["percentiles"] = {f"p{q:02d}": v for q, v in pct.items()}
        probs = post.state_probabilities
        if probs is not None:
            entry["states"] = probs
        if post.cells is not None:
            entry["histogram"] = {
                "cells": [[float(a), float(b)] for a, b in post.cells],
                "masses": [float(m) for m in post.masses],
            }
        if post.point is not None:
            entry["point"] = post.point
        nodes[node_id] = entry
    return {
        "scenario": scenario.id,
        "model": scenario.model_id,
        "log_likelihood": result.log_likelihood,
        "converged": result.converged,
        "warnings": list(result.warnings),
        "evidence": scenario.evidence,
        "interventions": scenario.interventions,
        "nodes": nodes,
    }


def create_app(persist_dir: Path | None = None, timeout: float = DEFAULT_TIMEOUT_SECONDS) -> FastAPI:
    """Build the scenario-service application (loopback desk tool; no auth)."""
    from contextlib import asynccontextmanager

    store = _Store(persist_dir)
    store.timeout = timeout

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        store.save()

    app = FastAPI(title="safetybn scenario service", version=__version__, lifespan=lifespan)
    app.state.store = store

    # the workbench page is typically served from another local port
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(SafetyBnError)
    async def _domain_error(_req: Request, err: SafetyBnError):
        if isinstance(err, ZeroProbabilityEvidence):
            return _error(409, "zero_probability_evidence", str(err))
        if isinstance(err, (ValueOutOfDomain, UnknownNode)):
            return _error(422, "domain_error", str(err))
        return _error(400, "validation_error", str(err))

    # --- models -------------------------------------------------------

    @app.get("/api/models")
    def list_models():
        return {
            "models": [
                {
                    "id": m["id"],
                    "title": m["title"],
                    "source": m["source"],
                    "figure": m.get("figure", ""),
                    "nodes": len(m["spec"].nodes),
                }
                for m in store.models.values()
            ]
        }

    @app.post("/api/models", status_code=201)
    def upload_model(document: dict = Body(...)):
        try:
            spec = loads_model(json.dumps(document), source="upload")
            compiled = build_model(spec)
        except SafetyBnError as err:
            return _error(400, "validation_error", "model document rejected", str(err))
        model_id = store.next_id("m")
        store.models[model_id] = {
            "id": model_id,
            "title": spec.title,
            "source": "uploaded",
            "figure": "",
            "document": document,
            "spec": spec,
            "compiled": compiled,
        }
        return {"id": model_id, "title": spec.title, "nodes": len(spec.nodes)}

    @app.get("/api/models/{model_id}/graph")
    def model_graph(model_id: str):
        if model_id not in store.models:
            return _error(404, "unknown_model", f"no model {model_id!r}")
        entry = store.models[model_id]
        spec = entry["spec"]
        compiled = store.compiled(model_id)
        groups = spec.metadata.get("idiom_groups", {})
        nodes = []
        for node in spec.nodes:
            item: dict = {"id": node.id, "kind": node.kind.value, "group": groups.get(node.id, "")}
            if node.states is not None:
                item["states"] = list(node.states)
            if node.id in compiled.supports:
                lo, hi = compiled.supports[node.id]
                item["bounds"] = [lo, hi]
            nodes.append(item)
        edges = [
            {"from": parent, "to": node.id} for node in spec.nodes for parent in node.parents
        ]
        return {"id": model_id, "title": entry["title"], "nodes": nodes, "edges": edges}

    @app.get("/api/models/{model_id}")
    def model_document(model_id: str):
        if model_id not in store.models:
            return _error(404, "unknown_model", f"no model {model_id!r}")
        entry = store.models[model_id]
        return {
            "id": model_id,
            "title": entry["title"],
            "source": entry["source"],
            "document": model_to_document(entry["spec"]),
        }

    # --- scenarios ----------------------------------------------------

    def _scenario_or_none(scenario_id: str) -> _Scenario | None:
        return store.scenarios.get(scenario_id)

    @app.post("/api/scenarios", status_code=201)
    def create_scenario(body: dict = Body(...)):
        model_id = body.get("model")
        if not isinstance(model_id, str):
            return _error(400, "validation_error", "body needs a 'model' id")
        if model_id not in store.models:
            return _error(404, "unknown_model", f"no model {model_id!r}")
        scenario = _Scenario(store.next_id("s"), model_id)
        store.scenarios[scenario.id] = scenario
        return scenario.snapshot()

    @app.get("/api/scenarios")
    def list_scenarios():
        return {"scenarios": [s.snapshot() for s in store.scenarios.values()]}

    @app.get("/api/scenarios/{scenario_id}")
    def get_scenario(scenario_id: str):
        scenario = _scenario_or_none(scenario_id)
        if scenario is None:
            return _error(404, "unknown_scenario", f"no scenario {scenario_id!r}")
        return scenario.snapshot()

    @app.delete("/api/scenarios/{scenario_id}", status_code=204)
    def delete_scenario(scenario_id: str):
        if scenario_id not in store.scenarios:
            return _error(404, "unknown_scenario", f"no scenario {scenario_id!r}")
        del store.scenarios[scenario_id]

    @app.put("/api/scenarios/{scenario_id}/evidence")
    def replace_evidence(scenario_id: str, body: dict = Body(...)):
        scenario = _scenario_or_none(scenario_id)
        if scenario is None:
            return _error(404, "unknown_scenario", f"no scenario {scenario_id!r}")
        compiled = store.compiled(scenario.model_id)
        from .inference import normalize_evidence

        try:
            normalize_evidence(compiled, body)
        except (ValueOutOfDomain, UnknownNode) as err:
            return _error(422, "domain_error", str(err))
        with scenario.lock:
            scenario.evidence = dict(body)
            scenario.invalidate()
            return scenario.snapshot()

    @app.patch("/api/scenarios/{scenario_id}/evidence/{node_id}")
    def patch_evidence(scenario_id: str, node_id: str, body: dict = Body(default={})):
        scenario = _scenario_or_none(scenario_id)
        if scenario is None:
            return _error(404, "unknown_scenario", f"no scenario {scenario_id!r}")
        compiled = store.compiled(scenario.model_id)
        from .inference import normalize_evidence

        value = body.get("value") if isinstance(body, dict) else None
        with scenario.lock:
            if value is None:
                scenario.evidence.pop(node_id, None)
            else:
                try:
                    normalize_evidence(compiled, {node_id: value})
                except (ValueOutOfDomain, UnknownNode) as err:
                    return _error(422, "domain_error", str(err))
                scenario.evidence[node_id] = value
            scenario.invalidate()
            return scenario.snapshot()

    @app.post("/api/scenarios/{scenario_id}/interventions")
    def add_intervention(scenario_id: str, body: dict = Body(...)):
        scenario = _scenario_or_none(scenario_id)
        if scenario is None:
            return _error(404, "unknown_scenario", f"no scenario {scenario_id!r}")
        node_id = body.get("node")
        if not isinstance(node_id, str) or "value" not in body:
            return _error(400, "validation_error", "body needs 'node' and 'value'")
        compiled = store.compiled(scenario.model_id)
        try:
            do_intervention(compiled, node_id, body["value"])  # validates node and value
        except (ValueOutOfDomain, UnknownNode) as err:
            return _error(422, "domain_error", str(err))
        with scenario.lock:
            scenario.interventions[node_id] = body["value"]
            scenario.invalidate()
            return scenario.snapshot()

    @app.delete("/api/scenarios/{scenario_id}/interventions/{node_id}")
    def remove_intervention(scenario_id: str, node_id: str):
        scenario = _scenario_or_none(scenario_id)
        if scenario is None:
            return _error(404, "unknown_scenario", f"no scenario {scenario_id!r}")
        with scenario.lock:
            scenario.interventions.pop(node_id, None)
            scenario.invalidate()
            return scenario.snapshot()

    # --- posteriors and comparison -------------------------------------

    def _posteriors_for(scenario: _Scenario) -> dict:
        with scenario.lock:
            if scenario.cache is not None:
                return scenario.cache
            compiled = store.compiled(scenario.model_id)
            future = store.executor.submit(_posterior_body, scenario, compiled)
            try:
                body = future.result(timeout=store.timeout)
            except FutureTimeout:
                raise TimeoutError(
                    f"inference exceeded {store.timeout:.0f}s; simplify the model or raise the timeout"
                )
            scenario.cache = body
            return body

    @app.get("/api/scenarios/{scenario_id}/posteriors")
    def get_posteriors(scenario_id: str, nodes: str | None = None):
        scenario = _scenario_or_none(scenario_id)
        if scenario is None:
            return _error(404, "unknown_scenario", f"no scenario {scenario_id!r}")
        try:
            body = _posteriors_for(scenario)
        except TimeoutError as err:
            return _error(503, "timeout", str(err))
        if nodes:
            wanted = [n.strip() for n in nodes.split(",") if n.strip()]
            missing = [n for n in wanted if n not in body["nodes"]]
            if missing:
                return _error(422, "domain_error", f"unknown node(s): {', '.join(missing)}")
            body = dict(body, nodes={n: body["nodes"][n] for n in wanted})
        return body

    @app.post("/api/compare")
    def compare_scenarios(body: dict = Body(...)):
        id_a = body.get("scenarioA")
        id_b = body.get("scenarioB")
        if not isinstance(id_a, str) or not isinstance(id_b, str):
            return _error(400, "validation_error", "body needs 'scenarioA' and 'scenarioB'")
        a = _scenario_or_none(id_a)
        b = _scenario_or_none(id_b)
        if a is None or b is None:
            missing = id_a if a is None else id_b
            return _error(404, "unknown_scenario", f"no scenario {missing!r}")
        if a.model_id != b.model_id:
            return _error(422, "domain_error", "scenarios reference different models")
        try:
            body_a = _posteriors_for(a)
            body_b = _posteriors_for(b)
        except TimeoutError as err:
            return _error(503, "timeout", str(err))
        deltas = {}
        for node_id, entry_a in body_a["nodes"].items():
            entry_b = body_b["nodes"].get(node_id)
            if entry_b is None:
                continue
            item: dict = {}
            if "mean" in entry_a and "mean" in entry_b:
                item["meanA"] = entry_a["mean"]
                item["meanB"] = entry_b["mean"]
                item["delta"] = entry_b["mean"] - entry_a["mean"]
            if "states" in entry_a and "states" in entry_b:
                item["statesA"] = entry_a["states"]
                item["statesB"] = entry_b["states"]
                item["stateDeltas"] = {
                    s: entry_b["states"][s] - p for s, p in entry_a["states"].items()
                }
            deltas[node_id] = item
        return {
            "scenarioA": id_a,
            "scenarioB": id_b,
            "model": a.model_id,
            "nodes": deltas,
        }

    return app
