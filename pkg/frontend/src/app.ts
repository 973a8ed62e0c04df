// Workbench bootstrap: model catalog, graph canvas, node panels, comparison.

import { ApiClient } from "./api.js";
import { renderCompare } from "./compareView.js";
import { renderPanels } from "./evidencePanel.js";
import { renderGraph } from "./graphView.js";
import { WorkbenchStore } from "./state.js";

const API_BASE =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8000/api";

const api = new ApiClient(API_BASE);
const store = new WorkbenchStore(api);

const catalogEl = document.getElementById("catalog")!;
const graphEl = document.getElementById("graph")!;
const panelsEl = document.getElementById("panels")!;
const compareEl = document.getElementById("compare")!;
const statusEl = document.getElementById("status")!;
const compareButton = document.getElementById("compare-button") as HTMLButtonElement;

function renderCatalog(): void {
  catalogEl.textContent = "";
  if (store.state.connectionError) {
    const banner = document.createElement("p");
    banner.className = "banner-error";
    banner.textContent = `Cannot reach the scenario service: ${store.state.connectionError}`;
    catalogEl.appendChild(banner);
    return;
  }
  if (!store.state.models.length) {
    const hint = document.createElement("p");
    hint.className = "onboarding";
    hint.textContent = "No models yet. Start the backend with: safetybn serve";
    catalogEl.appendChild(hint);
    return;
  }
  const list = document.createElement("ul");
  list.className = "model-list";
  for (const model of store.state.models) {
    const item = document.createElement("li");
    const link = document.createElement("button");
    link.className = model.id === store.state.selectedModel ? "model active" : "model";
    link.textContent = `${model.title} (${model.nodes} nodes)`;
    link.addEventListener("click", () => void store.selectModel(model.id));
    item.appendChild(link);
    list.appendChild(item);
  }
  catalogEl.appendChild(list);
}

function renderStatus(): void {
  const parts: string[] = [];
  if (store.state.busy) parts.push("running inference…");
  const warnings = store.state.posteriors?.warnings ?? [];
  parts.push(...warnings);
  if (store.state.lastError) parts.push(store.state.lastError);
  statusEl.textContent = parts.join("  |  ");
  statusEl.className = store.state.lastError ? "status error" : "status";
}

store.subscribe(() => {
  renderCatalog();
  renderGraph(graphEl as HTMLElement, store);
  renderPanels(panelsEl as HTMLElement, store);
  renderCompare(compareEl as HTMLElement, store);
  renderStatus();
});

compareButton.addEventListener("click", () => {
  // what-if scenario seeded from the active evidence; edit and re-run
  const evidence = store.state.posteriors?.evidence ?? {};
  void store.compareWith({ ...evidence });
});

void store.loadCatalog();
