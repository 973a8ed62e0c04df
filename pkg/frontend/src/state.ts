// Workbench view state. All probability numbers pass through untouched from
// the latest API response; stale posterior responses are discarded by a
// request token so the display never regresses to an older answer.

import {
  ApiClient,
  CompareResponse,
  EvidenceValue,
  ModelGraph,
  ModelSummary,
  PosteriorResponse,
} from "./api.js";

export interface WorkbenchState {
  models: ModelSummary[];
  selectedModel: string | null;
  graph: ModelGraph | null;
  activeScenario: string | null;
  compareScenario: string | null;
  posteriors: PosteriorResponse | null;
  comparePosteriors: PosteriorResponse | null;
  comparison: CompareResponse | null;
  pendingEdits: Record<string, EvidenceValue>;
  expandedNodes: Set<string>;
  busy: boolean;
  connectionError: string | null;
  lastError: string | null;
}

type Listener = (state: WorkbenchState) => void;

export class WorkbenchStore {
  readonly state: WorkbenchState = {
    models: [],
    selectedModel: null,
    graph: null,
    activeScenario: null,
    compareScenario: null,
    posteriors: null,
    comparePosteriors: null,
    comparison: null,
    pendingEdits: {},
    expandedNodes: new Set(),
    busy: false,
    connectionError: null,
    lastError: null,
  };

  private listeners: Listener[] = [];
  private posteriorToken = 0;
  private compareToken = 0;

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private fail(err: unknown): void {
    this.state.lastError = err instanceof Error ? err.message : String(err);
    this.state.busy = false;
    this.notify();
  }

  async loadCatalog(): Promise<void> {
    try {
      const body = await this.api.listModels();
      this.state.models = body.models;
      this.state.connectionError = null;
    } catch (err) {
      this.state.connectionError = err instanceof Error ? err.message : String(err);
    }
    this.notify();
  }

  /** Select a model: fetch its graph and start a fresh scenario. Pending
   * edits belong to the previous scenario and are discarded. */
  async selectModel(modelId: string): Promise<void> {
    this.state.busy = true;
    this.notify();
    try {
      const graph = await this.api.modelGraph(modelId);
      const scenario = await this.api.createScenario(modelId);
      this.state.selectedModel = modelId;
      this.state.graph = graph;
      this.state.activeScenario = scenario.id;
      this.state.compareScenario = null;
      this.state.comparison = null;
      this.state.comparePosteriors = null;
      this.state.posteriors = null;
      this.state.pendingEdits = {};
      this.state.expandedNodes = new Set();
      this.state.lastError = null;
      this.state.busy = false;
      this.notify();
      await this.refreshPosteriors();
    } catch (err) {
      this.fail(err);
    }
  }

  togglePanel(nodeId: string): void {
    if (this.state.expandedNodes.has(nodeId)) {
      this.state.expandedNodes.delete(nodeId);
    } else {
      this.state.expandedNodes.add(nodeId);
    }
    this.notify();
  }

  /** Stage an edit locally; nothing is sent until applyEdit. */
  stageEdit(nodeId: string, value: EvidenceValue): void {
    this.state.pendingEdits[nodeId] = value;
    this.notify();
  }

  discardEdit(nodeId: string): void {
    delete this.state.pendingEdits[nodeId];
    this.notify();
  }

  /** Apply one staged observation atomically, then refresh posteriors. */
  async applyEdit(nodeId: string): Promise<void> {
    const scenario = this.state.activeScenario;
    if (!scenario || !(nodeId in this.state.pendingEdits)) return;
    const value = this.state.pendingEdits[nodeId];
    try {
      await this.api.setObservation(scenario, nodeId, value);
      delete this.state.pendingEdits[nodeId];
      this.state.lastError = null;
      this.notify();
      await this.refreshPosteriors();
    } catch (err) {
      this.fail(err);
    }
  }

  async clearObservation(nodeId: string): Promise<void> {
    const scenario = this.state.activeScenario;
    if (!scenario) return;
    try {
      await this.api.clearObservation(scenario, nodeId);
      this.notify();
      await this.refreshPosteriors();
    } catch (err) {
      this.fail(err);
    }
  }

  async setIntervention(nodeId: string, value: EvidenceValue): Promise<void> {
    const scenario = this.state.activeScenario;
    if (!scenario) return;
    try {
      await this.api.addIntervention(scenario, nodeId, value);
      this.notify();
      await this.refreshPosteriors();
    } catch (err) {
      this.fail(err);
    }
  }

  async removeIntervention(nodeId: string): Promise<void> {
    const scenario = this.state.activeScenario;
    if (!scenario) return;
    try {
      await this.api.removeIntervention(scenario, nodeId);
      this.notify();
      await this.refreshPosteriors();
    } catch (err) {
      this.fail(err);
    }
  }

  /** Fetch posteriors for the active scenario; at most one response wins.
   * Responses arriving after a newer request started are dropped. */
  async refreshPosteriors(): Promise<void> {
    const scenario = this.state.activeScenario;
    if (!scenario) return;
    const token = ++this.posteriorToken;
    this.state.busy = true;
    this.notify();
    try {
      const body = await this.api.posteriors(scenario);
      if (token !== this.posteriorToken) return; // superseded
      this.state.posteriors = body;
      this.state.busy = false;
      this.state.connectionError = null;
      this.notify();
    } catch (err) {
      if (token !== this.posteriorToken) return;
      this.fail(err);
    }
  }

  /** Create (or reuse) the comparison scenario with the given evidence and
   * run the server-side comparison. Every delta shown comes from the
   * /compare response. */
  async compareWith(evidence: Record<string, EvidenceValue>): Promise<void> {
    const model = this.state.selectedModel;
    const active = this.state.activeScenario;
    if (!model || !active) return;
    try {
      if (!this.state.compareScenario) {
        const scenario = await this.api.createScenario(model);
        this.state.compareScenario = scenario.id;
      }
      await this.api.replaceEvidence(this.state.compareScenario, evidence);
      await this.runComparison();
    } catch (err) {
      this.fail(err);
    }
  }

  async runComparison(): Promise<void> {
    const active = this.state.activeScenario;
    const other = this.state.compareScenario;
    if (!active || !other) return;
    const token = ++this.compareToken;
    try {
      const [comparison, otherPosteriors] = await Promise.all([
        this.api.compare(active, other),
        this.api.posteriors(other),
      ]);
      if (token !== this.compareToken) return;
      this.state.comparison = comparison;
      this.state.comparePosteriors = otherPosteriors;
      this.notify();
    } catch (err) {
      if (token !== this.compareToken) return;
      this.fail(err);
    }
  }

  /** The number shown on a node's mean badge: exactly the API's value. */
  meanBadge(nodeId: string): number | null {
    const post = this.state.posteriors?.nodes[nodeId];
    if (!post) return null;
    if (post.mean !== undefined) return post.mean;
    if (post.point !== undefined) return post.point;
    return null;
  }
}
