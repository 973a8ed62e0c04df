// Per-node observation editor: state picker for discrete nodes, numeric or
// range fields for interval nodes, and an intervention toggle that posts a
// do-operation instead of an observation.

import { GraphNode, NodePosterior } from "./api.js";
import { fmtEvidence, fmtNumber } from "./format.js";
import { WorkbenchStore } from "./state.js";

function histogramSvg(post: NodePosterior): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "mini-histogram";
  const hist = post.histogram;
  if (!hist || hist.cells.length === 0) return wrap;
  const lo = hist.cells[0][0];
  const hi = hist.cells[hist.cells.length - 1][1];
  const span = hi - lo || 1;
  const peakDensity = Math.max(
    ...hist.masses.map((m, i) => m / Math.max(hist.cells[i][1] - hist.cells[i][0], 1e-12)),
  );
  const parts: string[] = [];
  hist.cells.forEach(([a, b], i) => {
    const density = hist.masses[i] / Math.max(b - a, 1e-12);
    const h = peakDensity > 0 ? (density / peakDensity) * 56 : 0;
    const x = ((a - lo) / span) * 240;
    const w = Math.max(((b - a) / span) * 240, 0.5);
    parts.push(`<rect x="${x}" y="${60 - h}" width="${w}" height="${h}"></rect>`);
  });
  if (post.mean !== undefined) {
    const mx = ((post.mean - lo) / span) * 240;
    parts.push(`<line x1="${mx}" y1="0" x2="${mx}" y2="60" class="mean-marker"></line>`);
  }
  wrap.innerHTML =
    `<svg viewBox="0 0 240 60" width="240" height="60">${parts.join("")}</svg>` +
    `<div class="hist-range"><span>${fmtNumber(lo)}</span><span>${fmtNumber(hi)}</span></div>`;
  return wrap;
}

function stackedBar(states: Record<string, number>): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "stacked-bar";
  for (const [state, p] of Object.entries(states)) {
    const row = document.createElement("div");
    row.className = "state-row";
    const label = document.createElement("span");
    label.className = "state-label";
    label.textContent = state;
    const bar = document.createElement("span");
    bar.className = "state-fill";
    bar.style.width = `${Math.round(p * 160)}px`;
    const value = document.createElement("span");
    value.className = "state-value";
    value.textContent = fmtNumber(p, 3);
    row.append(label, bar, value);
    wrap.appendChild(row);
  }
  return wrap;
}

function editor(node: GraphNode, store: WorkbenchStore): HTMLElement {
  const form = document.createElement("div");
  form.className = "evidence-editor";
  const intervene = document.createElement("input");
  intervene.type = "checkbox";
  intervene.id = `intervene-${node.id}`;
  const intervLabel = document.createElement("label");
  intervLabel.htmlFor = intervene.id;
  intervLabel.textContent = "intervention (do)";

  const apply = document.createElement("button");
  apply.textContent = "apply";
  const clear = document.createElement("button");
  clear.textContent = "clear";
  const message = document.createElement("span");
  message.className = "inline-error";

  let readValue: () => string | number | [number, number] | null;

  if (node.states) {
    const select = document.createElement("select");
    for (const state of node.states) {
      const option = document.createElement("option");
      option.value = state;
      option.textContent = state;
      select.appendChild(option);
    }
    form.appendChild(select);
    readValue = () => select.value;
  } else {
    const value = document.createElement("input");
    value.type = "number";
    value.step = "any";
    value.placeholder = "value";
    const rangeHi = document.createElement("input");
    rangeHi.type = "number";
    rangeHi.step = "any";
    rangeHi.placeholder = "interval upper (optional)";
    if (node.bounds) {
      value.title = `domain [${node.bounds[0]}, ${node.bounds[1]}]`;
      rangeHi.title = value.title;
    }
    form.append(value, rangeHi);
    readValue = () => {
      if (value.value === "") return null;
      const lo = Number(value.value);
      if (Number.isNaN(lo)) return null;
      if (rangeHi.value !== "") {
        const hi = Number(rangeHi.value);
        if (Number.isNaN(hi)) return null;
        return [lo, hi];
      }
      if (node.bounds && (lo < node.bounds[0] || lo > node.bounds[1])) {
        message.textContent = `outside domain [${node.bounds[0]}, ${node.bounds[1]}]`;
        return null;
      }
      return lo;
    };
  }

  apply.addEventListener("click", async () => {
    message.textContent = "";
    const value = readValue();
    if (value === null) {
      message.textContent = message.textContent || "enter a value first";
      return;
    }
    if (intervene.checked) {
      await store.setIntervention(node.id, value);
    } else {
      store.stageEdit(node.id, value);
      await store.applyEdit(node.id);
    }
    if (store.state.lastError) message.textContent = store.state.lastError;
  });
  clear.addEventListener("click", async () => {
    message.textContent = "";
    if (intervene.checked) {
      await store.removeIntervention(node.id);
    } else {
      await store.clearObservation(node.id);
    }
    if (store.state.lastError) message.textContent = store.state.lastError;
  });

  form.append(apply, clear, intervene, intervLabel, message);
  return form;
}

export function renderPanels(container: HTMLElement, store: WorkbenchStore): void {
  container.textContent = "";
  const graph = store.state.graph;
  if (!graph) return;
  const posteriors = store.state.posteriors;
  for (const nodeId of store.state.expandedNodes) {
    const node = graph.nodes.find((n) => n.id === nodeId);
    if (!node) continue;
    const panel = document.createElement("section");
    panel.className = "node-panel";
    const heading = document.createElement("h3");
    heading.textContent = `${node.id} (${node.kind})`;
    panel.appendChild(heading);

    const post = posteriors?.nodes[nodeId];
    if (post) {
      const badge = document.createElement("p");
      badge.className = "mean-badge";
      badge.dataset.node = nodeId;
      if (post.mean !== undefined) {
        badge.textContent = `mean ${fmtNumber(post.mean, 5)}  variance ${fmtNumber(post.variance, 4)}`;
      } else if (post.point !== undefined) {
        badge.textContent = `fixed at ${fmtNumber(post.point, 5)}`;
      } else {
        badge.textContent = "";
      }
      panel.appendChild(badge);
      if (post.states) panel.appendChild(stackedBar(post.states));
      if (post.histogram) panel.appendChild(histogramSvg(post));
    }

    const current = posteriors?.evidence?.[nodeId];
    if (current !== undefined) {
      const note = document.createElement("p");
      note.className = "current-evidence";
      note.textContent = `observed: ${fmtEvidence(current)}`;
      panel.appendChild(note);
    }
    const forced = posteriors?.interventions?.[nodeId];
    if (forced !== undefined) {
      const note = document.createElement("p");
      note.className = "current-evidence";
      note.textContent = `intervened: do(${node.id} = ${fmtEvidence(forced)})`;
      panel.appendChild(note);
    }

    panel.appendChild(editor(node, store));
    container.appendChild(panel);
  }
}
