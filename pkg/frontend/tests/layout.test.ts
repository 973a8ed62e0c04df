import assert from "node:assert/strict";
import { test } from "node:test";

import { ModelGraph } from "../src/api.js";
import { hasNoOverlaps, layoutGraph } from "../src/layout.js";

function chainGraph(): ModelGraph {
  return {
    id: "chain",
    title: "chain",
    nodes: [
      { id: "p", kind: "continuous", group: "pfd" },
      { id: "demands", kind: "integer", group: "pfd" },
      { id: "observed", kind: "integer", group: "pfd" },
    ],
    edges: [
      { from: "p", to: "observed" },
      { from: "demands", to: "observed" },
    ],
  };
}

function aircraftLikeGraph(): ModelGraph {
  // mimics the composed aircraft model's shape: three fragments feeding a
  // combiner, ~30 nodes across five layers
  const nodes: ModelGraph["nodes"] = [];
  const edges: ModelGraph["edges"] = [];
  for (let f = 0; f < 3; f++) {
    const root = `frag${f}_root`;
    nodes.push({ id: root, kind: "continuous", group: `frag${f}` });
    for (let i = 0; i < 7; i++) {
      const child = `frag${f}_obs_${i}`;
      nodes.push({ id: child, kind: "continuous", group: `frag${f}` });
      edges.push({ from: root, to: child });
    }
    const out = `frag${f}_out`;
    nodes.push({ id: out, kind: "boolean", group: `frag${f}`, states: ["False", "True"] });
    edges.push({ from: `frag${f}_obs_0`, to: out });
  }
  nodes.push({ id: "combiner", kind: "boolean", group: "system", states: ["False", "True"] });
  for (let f = 0; f < 3; f++) edges.push({ from: `frag${f}_out`, to: "combiner" });
  return { id: "aircraft", title: "aircraft", nodes, edges };
}

test("children sit below their parents", () => {
  const layout = layoutGraph(chainGraph());
  const p = layout.positions.get("p")!;
  const observed = layout.positions.get("observed")!;
  assert.ok(observed.y > p.y);
});

test("no overlapping node boxes on a 30-node composite", () => {
  const layout = layoutGraph(aircraftLikeGraph());
  assert.equal(layout.positions.size, 28);
  assert.ok(hasNoOverlaps(layout));
  for (const pos of layout.positions.values()) {
    assert.ok(Number.isFinite(pos.x) && Number.isFinite(pos.y));
  }
});

test("every group gets a hull containing its members", () => {
  const graph = aircraftLikeGraph();
  const layout = layoutGraph(graph);
  const hulls = new Map(layout.hulls.map((h) => [h.group, h]));
  assert.deepEqual(
    [...hulls.keys()].sort(),
    ["frag0", "frag1", "frag2", "system"],
  );
  for (const node of graph.nodes) {
    const hull = hulls.get(node.group)!;
    const pos = layout.positions.get(node.id)!;
    assert.ok(pos.x >= hull.x && pos.x <= hull.x + hull.width);
    assert.ok(pos.y >= hull.y && pos.y <= hull.y + hull.height);
  }
});
