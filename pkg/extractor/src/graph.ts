// graph.ts
// Loads the engine's exported face-graph JSON (node count, edges,
// template coordinates).  The template drives where landmarks are
// placed inside a detected face box, so extractor output is laid out
// exactly like the graph the engine convolves over.

import { existsSync, readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

export interface GraphTemplate {
  nodeCount: number;
  edges: [number, number][];
  /** normalized (x, y) per node, plus the bounding box for remapping */
  points: [number, number][];
  bounds: { x0: number; y0: number; x1: number; y1: number };
}

function defaultGraphPath(): string {
  // source layout has assets/ one level up; the compiled tree under
  // dist/ nests one level deeper
  for (const rel of ["../assets/graph.json", "../../assets/graph.json"]) {
    const candidate = fileURLToPath(new URL(rel, import.meta.url));
    if (existsSync(candidate)) return candidate;
  }
  throw new Error("bundled graph.json not found");
}

export function loadGraphTemplate(path?: string): GraphTemplate {
  const doc = JSON.parse(readFileSync(path ?? defaultGraphPath(), "utf-8"));
  const points: [number, number][] = doc.template.map(
    (p: number[]) => [p[0], p[1]] as [number, number],
  );
  if (points.length !== doc.node_count) {
    throw new Error(`template has ${points.length} points for ${doc.node_count} nodes`);
  }
  let x0 = Infinity, y0 = Infinity, x1 = -Infinity, y1 = -Infinity;
  for (const [x, y] of points) {
    x0 = Math.min(x0, x);
    y0 = Math.min(y0, y);
    x1 = Math.max(x1, x);
    y1 = Math.max(y1, y);
  }
  return {
    nodeCount: doc.node_count,
    edges: doc.edges.map((e: number[]) => [e[0], e[1]] as [number, number]),
    points,
    bounds: { x0, y0, x1, y1 },
  };
}
