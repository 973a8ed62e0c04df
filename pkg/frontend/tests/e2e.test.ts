// End-to-end against the real scenario service: the acceptance flows.
// Spawns the Python backend on a test port; every asserted number is taken
// from an API response, never recomputed client-side.

import assert from "node:assert/strict";
import { spawn, ChildProcess } from "node:child_process";
import { after, before, test } from "node:test";

import { ApiClient } from "../src/api.js";
import { layoutGraph, hasNoOverlaps } from "../src/layout.js";
import { WorkbenchStore } from "../src/state.js";

const PORT = 8971;
const BASE = `http://127.0.0.1:${PORT}/api`;

let server: ChildProcess | null = null;

async function waitForBackend(timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/models`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 400));
  }
  throw new Error("scenario service did not come up; is safetybn installed?");
}

before(async () => {
  server = spawn(
    "python3",
    [
      "-c",
      "import uvicorn; from safetybn.service import create_app; " +
        `uvicorn.run(create_app(), host='127.0.0.1', port=${PORT}, log_level='error')`,
    ],
    { stdio: "ignore" },
  );
  await waitForBackend();
});

after(() => {
  server?.kill();
});

test("workbench loads the bundled catalog", async () => {
  const store = new WorkbenchStore(new ApiClient(BASE));
  await store.loadCatalog();
  assert.equal(store.state.connectionError, null);
  assert.equal(store.state.models.length, 21);
  assert.ok(store.state.models.some((m) => m.id === "fig4b_hammer_pfd"));
});

test("fig4b evidence through the panel flow gives an in-band p-mean badge", async () => {
  const store = new WorkbenchStore(new ApiClient(BASE));
  await store.loadCatalog();
  await store.selectModel("fig4b_hammer_pfd");
  assert.ok(store.state.graph);
  assert.equal(store.state.graph!.nodes.length, 3);

  store.stageEdit("pfd_observed", 10);
  await store.applyEdit("pfd_observed");
  store.stageEdit("pfd_demands", 1000);
  await store.applyEdit("pfd_demands");

  const badge = store.meanBadge("pfd_p");
  assert.ok(badge !== null, "p mean badge present");
  assert.ok(badge! >= 0.0105 && badge! <= 0.0115, `badge ${badge} within [0.0105, 0.0115]`);
  // the badge is the API's value verbatim
  assert.equal(badge, store.state.posteriors!.nodes.pfd_p.mean);
});

test("fig17b scenario compare shows 0.08 vs 0.04 with delta -0.04 from /api/compare", async () => {
  const store = new WorkbenchStore(new ApiClient(BASE));
  await store.loadCatalog();
  await store.selectModel("fig17b_risk_control");
  store.stageEdit("control_control", 0.0);
  await store.applyEdit("control_control");
  store.stageEdit("control_event_probability", 0.08);
  await store.applyEdit("control_event_probability");

  await store.compareWith({ control_control: 0.5, control_event_probability: 0.08 });
  const comparison = store.state.comparison;
  assert.ok(comparison, "comparison response present");
  const residual = comparison!.nodes.control_residual_probability;
  assert.ok(Math.abs(residual.meanA! - 0.08) < 1e-3, `meanA ${residual.meanA}`);
  assert.ok(Math.abs(residual.meanB! - 0.04) < 1e-3, `meanB ${residual.meanB}`);
  assert.ok(Math.abs(residual.delta! - -0.04) < 1e-3, `delta ${residual.delta}`);
});

test("clearing an observation refreshes the posterior (set-get-clear-get)", async () => {
  const store = new WorkbenchStore(new ApiClient(BASE));
  await store.loadCatalog();
  await store.selectModel("fig4b_hammer_pfd");
  store.stageEdit("pfd_demands", 1000);
  await store.applyEdit("pfd_demands");
  store.stageEdit("pfd_observed", 100);
  await store.applyEdit("pfd_observed");
  const observed = store.meanBadge("pfd_p")!;
  assert.ok(Math.abs(observed - 0.1) < 0.01, `observed-evidence mean ${observed}`);
  await store.clearObservation("pfd_observed");
  const cleared = store.meanBadge("pfd_p")!;
  // back to the ignorant prior: the posterior reflects the latest evidence
  assert.ok(Math.abs(cleared - 0.5) < 0.01, `cleared mean ${cleared}`);
});

test("intervention toggle forces a point mass via the interventions endpoint", async () => {
  const store = new WorkbenchStore(new ApiClient(BASE));
  await store.loadCatalog();
  await store.selectModel("fig4b_hammer_pfd");
  await store.setIntervention("pfd_p", 0.3);
  const post = store.state.posteriors!.nodes.pfd_p;
  assert.equal(post.point, 0.3);
  await store.removeIntervention("pfd_p");
  assert.equal(store.state.posteriors!.nodes.pfd_p.point, undefined);
});

test("composite model graph lays out without overlaps and with fragment hulls", async () => {
  const client = new ApiClient(BASE);
  const graph = await client.modelGraph("fig22b_aircraft");
  assert.ok(graph.nodes.length >= 12);
  const layout = layoutGraph(graph);
  assert.ok(hasNoOverlaps(layout), "no overlapping node boxes at default zoom");
  const groups = new Set(layout.hulls.map((h) => h.group));
  for (const expected of ["engine", "mission", "brakes", "system"]) {
    assert.ok(groups.has(expected), `hull for ${expected}`);
  }
});

test("impossible evidence surfaces as a dismissible 409 explanation", async () => {
  const store = new WorkbenchStore(new ApiClient(BASE));
  await store.loadCatalog();
  await store.selectModel("fig4b_hammer_pfd");
  store.stageEdit("pfd_demands", 1000);
  await store.applyEdit("pfd_demands");
  store.stageEdit("pfd_observed", 2000);
  await store.applyEdit("pfd_observed");
  assert.match(store.state.lastError ?? "", /zero_probability_evidence/);
});
