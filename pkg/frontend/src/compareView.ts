// Side-by-side scenario comparison. Means, state probabilities and deltas
// all come verbatim from the /api/compare response.

import { fmtDelta, fmtNumber } from "./format.js";
import { WorkbenchStore } from "./state.js";

export function renderCompare(container: HTMLElement, store: WorkbenchStore): void {
  container.textContent = "";
  const comparison = store.state.comparison;
  if (!comparison) {
    const hint = document.createElement("p");
    hint.className = "onboarding";
    hint.textContent =
      "Set up a comparison scenario to see side-by-side posteriors (A = active, B = what-if).";
    container.appendChild(hint);
    return;
  }
  if (store.state.posteriors && comparison.model !== store.state.posteriors.model) {
    const banner = document.createElement("p");
    banner.className = "banner-error";
    banner.textContent = "Scenarios reference different models; comparison is stale.";
    container.appendChild(banner);
    return;
  }

  const table = document.createElement("table");
  table.className = "compare-table";
  table.innerHTML =
    "<thead><tr><th>node</th><th>A</th><th>B</th><th>delta</th></tr></thead>";
  const body = document.createElement("tbody");

  for (const [nodeId, entry] of Object.entries(comparison.nodes)) {
    const row = document.createElement("tr");
    row.dataset.node = nodeId;
    const name = document.createElement("td");
    name.textContent = nodeId;
    row.appendChild(name);

    if (entry.meanA !== undefined && entry.meanB !== undefined) {
      for (const value of [entry.meanA, entry.meanB]) {
        const cell = document.createElement("td");
        cell.textContent = fmtNumber(value, 5);
        row.appendChild(cell);
      }
      const delta = document.createElement("td");
      delta.textContent = fmtDelta(entry.delta);
      delta.className = "delta-cell";
      row.appendChild(delta);
    } else if (entry.statesA && entry.statesB) {
      for (const states of [entry.statesA, entry.statesB]) {
        const cell = document.createElement("td");
        cell.appendChild(inlineStack(states));
        row.appendChild(cell);
      }
      const delta = document.createElement("td");
      const deltas = entry.stateDeltas ?? {};
      delta.textContent = Object.entries(deltas)
        .filter(([, v]) => Math.abs(v) > 5e-4)
        .map(([s, v]) => `${s} ${fmtDelta(v)}`)
        .join(", ");
      row.appendChild(delta);
    } else {
      row.appendChild(document.createElement("td"));
      row.appendChild(document.createElement("td"));
      row.appendChild(document.createElement("td"));
    }
    body.appendChild(row);
  }
  table.appendChild(body);
  container.appendChild(table);
}

function inlineStack(states: Record<string, number>): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "inline-stack";
  for (const [state, p] of Object.entries(states)) {
    const seg = document.createElement("span");
    seg.className = "stack-segment";
    seg.style.width = `${Math.max(Math.round(p * 120), p > 0 ? 1 : 0)}px`;
    seg.title = `${state}: ${fmtNumber(p, 3)}`;
    wrap.appendChild(seg);
  }
  return wrap;
}
