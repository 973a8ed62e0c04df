// Layered DAG layout: longest-path layering, barycenter ordering within a
// layer, and one bounding hull per idiom group. Pure geometry, no DOM.

import { GraphEdge, GraphNode, ModelGraph } from "./api.js";

export interface NodePosition {
  id: string;
  x: number;
  y: number;
}

export interface GroupHull {
  group: string;
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface GraphLayout {
  positions: Map<string, NodePosition>;
  hulls: GroupHull[];
  width: number;
  height: number;
}

export const NODE_W = 148;
export const NODE_H = 46;
const H_GAP = 36;
const V_GAP = 78;
const HULL_PAD = 18;

function layers(nodes: GraphNode[], edges: GraphEdge[]): Map<string, number> {
  const parents = new Map<string, string[]>();
  for (const node of nodes) parents.set(node.id, []);
  for (const edge of edges) parents.get(edge.to)?.push(edge.from);
  const depth = new Map<string, number>();
  const visiting = new Set<string>();

  const resolve = (id: string): number => {
    const known = depth.get(id);
    if (known !== undefined) return known;
    if (visiting.has(id)) return 0; // defensive: the server guarantees a DAG
    visiting.add(id);
    const ps = parents.get(id) ?? [];
    const d = ps.length === 0 ? 0 : Math.max(...ps.map(resolve)) + 1;
    visiting.delete(id);
    depth.set(id, d);
    return d;
  };

  for (const node of nodes) resolve(node.id);
  return depth;
}

export function layoutGraph(graph: ModelGraph): GraphLayout {
  const depth = layers(graph.nodes, graph.edges);
  const byLayer = new Map<number, GraphNode[]>();
  for (const node of graph.nodes) {
    const d = depth.get(node.id) ?? 0;
    if (!byLayer.has(d)) byLayer.set(d, []);
    byLayer.get(d)!.push(node);
  }

  // order each layer by the mean x-index of its parents (one sweep), with
  // group as the tie-break so fragments stay visually together
  const xIndex = new Map<string, number>();
  const layerKeys = [...byLayer.keys()].sort((a, b) => a - b);
  for (const layer of layerKeys) {
    const row = byLayer.get(layer)!;
    const parentMean = (node: GraphNode): number => {
      const ps = graph.edges.filter((e) => e.to === node.id).map((e) => xIndex.get(e.from));
      const known = ps.filter((v): v is number => v !== undefined);
      return known.length ? known.reduce((a, b) => a + b, 0) / known.length : 0;
    };
    row.sort((a, b) => {
      const diff = parentMean(a) - parentMean(b);
      if (Math.abs(diff) > 1e-9) return diff;
      if (a.group !== b.group) return a.group < b.group ? -1 : 1;
      return a.id < b.id ? -1 : 1;
    });
    row.forEach((node, i) => xIndex.set(node.id, i));
  }

  const maxRow = Math.max(...layerKeys.map((k) => byLayer.get(k)!.length));
  const width = Math.max(maxRow * (NODE_W + H_GAP) + H_GAP, 480);
  const positions = new Map<string, NodePosition>();
  for (const layer of layerKeys) {
    const row = byLayer.get(layer)!;
    const rowWidth = row.length * (NODE_W + H_GAP) - H_GAP;
    const x0 = (width - rowWidth) / 2;
    row.forEach((node, i) => {
      positions.set(node.id, {
        id: node.id,
        x: x0 + i * (NODE_W + H_GAP),
        y: 30 + layer * (NODE_H + V_GAP),
      });
    });
  }
  const height = 30 + layerKeys.length * (NODE_H + V_GAP);

  const hulls: GroupHull[] = [];
  const groups = new Map<string, NodePosition[]>();
  for (const node of graph.nodes) {
    if (!node.group) continue;
    const pos = positions.get(node.id)!;
    if (!groups.has(node.group)) groups.set(node.group, []);
    groups.get(node.group)!.push(pos);
  }
  for (const [group, members] of groups) {
    const xs = members.map((p) => p.x);
    const ys = members.map((p) => p.y);
    hulls.push({
      group,
      x: Math.min(...xs) - HULL_PAD,
      y: Math.min(...ys) - HULL_PAD,
      width: Math.max(...xs) + NODE_W - Math.min(...xs) + 2 * HULL_PAD,
      height: Math.max(...ys) + NODE_H - Math.min(...ys) + 2 * HULL_PAD,
    });
  }

  return { positions, hulls, width, height };
}

/** True when no two node boxes overlap (the layout smoke invariant). */
export function hasNoOverlaps(layout: GraphLayout): boolean {
  const boxes = [...layout.positions.values()];
  for (let i = 0; i < boxes.length; i++) {
    for (let j = i + 1; j < boxes.length; j++) {
      const a = boxes[i];
      const b = boxes[j];
      const apart =
        a.x + NODE_W <= b.x || b.x + NODE_W <= a.x || a.y + NODE_H <= b.y || b.y + NODE_H <= a.y;
      if (!apart) return false;
    }
  }
  return true;
}
