// Typed client for the scenario-service HTTP API. The workbench displays
// numbers exactly as this client returns them; it never derives its own.

export interface ModelSummary {
  id: string;
  title: string;
  source: string;
  figure: string;
  nodes: number;
}

export interface GraphNode {
  id: string;
  kind: "labelled" | "boolean" | "ranked" | "integer" | "continuous";
  group: string;
  states?: string[];
  bounds?: [number, number];
}

export interface GraphEdge {
  from: string;
  to: string;
}

export interface ModelGraph {
  id: string;
  title: string;
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface Histogram {
  cells: [number, number][];
  masses: number[];
}

export interface NodePosterior {
  kind: string;
  mean?: number;
  variance?: number;
  percentiles?: Record<string, number>;
  states?: Record<string, number>;
  histogram?: Histogram;
  point?: number;
}

export type EvidenceValue = string | number | boolean | [number, number];

export interface PosteriorResponse {
  scenario: string;
  model: string;
  log_likelihood: number;
  converged: boolean;
  warnings: string[];
  evidence: Record<string, EvidenceValue>;
  interventions: Record<string, EvidenceValue>;
  nodes: Record<string, NodePosterior>;
}

export interface ScenarioInfo {
  id: string;
  model: string;
  evidence: Record<string, EvidenceValue>;
  interventions: Record<string, EvidenceValue>;
  created: string;
  updated: string;
}

export interface CompareNodeDelta {
  meanA?: number;
  meanB?: number;
  delta?: number;
  statesA?: Record<string, number>;
  statesB?: Record<string, number>;
  stateDeltas?: Record<string, number>;
}

export interface CompareResponse {
  scenarioA: string;
  scenarioB: string;
  model: string;
  nodes: Record<string, CompareNodeDelta>;
}

export interface ApiError {
  status: number;
  code: string;
  message: string;
  detail?: string;
}

export class ApiRequestError extends Error {
  constructor(public readonly error: ApiError) {
    super(`${error.code}: ${error.message}`);
  }
}

async function parseResponse<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiRequestError({
      status: response.status,
      code: (body as any).code ?? "http_error",
      message: (body as any).message ?? response.statusText,
      detail: (body as any).detail,
    });
  }
  return body as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "http://127.0.0.1:8000/api",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    return parseResponse<T>(response);
  }

  listModels(): Promise<{ models: ModelSummary[] }> {
    return this.request("/models");
  }

  modelGraph(modelId: string): Promise<ModelGraph> {
    return this.request(`/models/${encodeURIComponent(modelId)}/graph`);
  }

  createScenario(modelId: string): Promise<ScenarioInfo> {
    return this.request("/scenarios", {
      method: "POST",
      body: JSON.stringify({ model: modelId }),
    });
  }

  replaceEvidence(
    scenarioId: string,
    evidence: Record<string, EvidenceValue>,
  ): Promise<ScenarioInfo> {
    return this.request(`/scenarios/${encodeURIComponent(scenarioId)}/evidence`, {
      method: "PUT",
      body: JSON.stringify(evidence),
    });
  }

  setObservation(
    scenarioId: string,
    nodeId: string,
    value: EvidenceValue,
  ): Promise<ScenarioInfo> {
    return this.request(
      `/scenarios/${encodeURIComponent(scenarioId)}/evidence/${encodeURIComponent(nodeId)}`,
      { method: "PATCH", body: JSON.stringify({ value }) },
    );
  }

  clearObservation(scenarioId: string, nodeId: string): Promise<ScenarioInfo> {
    return this.request(
      `/scenarios/${encodeURIComponent(scenarioId)}/evidence/${encodeURIComponent(nodeId)}`,
      { method: "PATCH", body: JSON.stringify({ value: null }) },
    );
  }

  addIntervention(
    scenarioId: string,
    nodeId: string,
    value: EvidenceValue,
  ): Promise<ScenarioInfo> {
    return this.request(`/scenarios/${encodeURIComponent(scenarioId)}/interventions`, {
      method: "POST",
      body: JSON.stringify({ node: nodeId, value }),
    });
  }

  removeIntervention(scenarioId: string, nodeId: string): Promise<ScenarioInfo> {
    return this.request(
      `/scenarios/${encodeURIComponent(scenarioId)}/interventions/${encodeURIComponent(nodeId)}`,
      { method: "DELETE" },
    );
  }

  posteriors(scenarioId: string, nodes?: string[]): Promise<PosteriorResponse> {
    const query = nodes && nodes.length ? `?nodes=${encodeURIComponent(nodes.join(","))}` : "";
    return this.request(`/scenarios/${encodeURIComponent(scenarioId)}/posteriors${query}`);
  }

  compare(scenarioA: string, scenarioB: string): Promise<CompareResponse> {
    return this.request("/compare", {
      method: "POST",
      body: JSON.stringify({ scenarioA, scenarioB }),
    });
  }
}
