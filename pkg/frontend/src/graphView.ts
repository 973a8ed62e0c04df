// SVG rendering of the model DAG: idiom-group hulls behind kind-colored
// node boxes, posterior mean badges, straight edges with arrowheads.

import { ModelGraph } from "./api.js";
import { fmtNumber, KIND_COLORS } from "./format.js";
import { GraphLayout, layoutGraph, NODE_H, NODE_W } from "./layout.js";
import { WorkbenchStore } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) el.setAttribute(key, String(value));
  return el;
}

export function renderGraph(container: HTMLElement, store: WorkbenchStore): void {
  const graph = store.state.graph;
  container.textContent = "";
  if (!graph) {
    const hint = document.createElement("p");
    hint.className = "onboarding";
    hint.textContent = store.state.models.length
      ? "Pick a model from the catalog to see its network."
      : "No models available. Is the scenario service running? Start it with: safetybn serve";
    container.appendChild(hint);
    return;
  }

  const layout: GraphLayout = layoutGraph(graph);
  const svg = svgEl("svg", {
    viewBox: `0 0 ${layout.width} ${layout.height}`,
    width: "100%",
    class: "graph-canvas",
  });

  const defs = svgEl("defs", {});
  const marker = svgEl("marker", {
    id: "arrow",
    viewBox: "0 0 8 8",
    refX: 7,
    refY: 4,
    markerWidth: 7,
    markerHeight: 7,
    orient: "auto-start-reverse",
  });
  marker.appendChild(svgEl("path", { d: "M 0 0 L 8 4 L 0 8 z", fill: "#5c6672" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  for (const hull of layout.hulls) {
    svg.appendChild(
      svgEl("rect", {
        x: hull.x,
        y: hull.y,
        width: hull.width,
        height: hull.height,
        rx: 14,
        class: "idiom-hull",
      }),
    );
    const label = svgEl("text", { x: hull.x + 8, y: hull.y + 14, class: "hull-label" });
    label.textContent = hull.group;
    svg.appendChild(label);
  }

  for (const edge of graph.edges) {
    const from = layout.positions.get(edge.from)!;
    const to = layout.positions.get(edge.to)!;
    svg.appendChild(
      svgEl("line", {
        x1: from.x + NODE_W / 2,
        y1: from.y + NODE_H,
        x2: to.x + NODE_W / 2,
        y2: to.y - 2,
        class: "edge",
        "marker-end": "url(#arrow)",
      }),
    );
  }

  const posteriors = store.state.posteriors?.nodes ?? {};
  const evidence = store.state.posteriors?.evidence ?? {};
  const interventions = store.state.posteriors?.interventions ?? {};
  for (const node of graph.nodes) {
    const pos = layout.positions.get(node.id)!;
    const group = svgEl("g", { class: "node", transform: `translate(${pos.x}, ${pos.y})` });
    group.addEventListener("click", () => store.togglePanel(node.id));

    const decorated =
      node.id in interventions ? "node-box intervened" :
      node.id in evidence ? "node-box observed" : "node-box";
    group.appendChild(
      svgEl("rect", {
        width: NODE_W,
        height: NODE_H,
        rx: 8,
        class: decorated,
        fill: "#ffffff",
        stroke: KIND_COLORS[node.kind] ?? "#555",
      }),
    );
    const name = svgEl("text", { x: 8, y: 18, class: "node-name" });
    name.textContent = node.id.length > 20 ? `${node.id.slice(0, 19)}…` : node.id;
    const title = svgEl("title", {});
    title.textContent = `${node.id} (${node.kind})`;
    group.appendChild(title);
    group.appendChild(name);

    const badgeValue = store.meanBadge(node.id);
    const badge = svgEl("text", { x: 8, y: 36, class: "node-badge", "data-node": node.id });
    const post = posteriors[node.id];
    if (badgeValue !== null) {
      badge.textContent = `mean ${fmtNumber(badgeValue)}`;
    } else if (post?.states) {
      const top = Object.entries(post.states).sort((a, b) => b[1] - a[1])[0];
      badge.textContent = top ? `${top[0]} ${fmtNumber(top[1], 3)}` : "";
    } else {
      badge.textContent = "";
    }
    group.appendChild(badge);
    svg.appendChild(group);
  }

  container.appendChild(svg);
}
