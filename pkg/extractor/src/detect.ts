// detect.ts
// Per-frame face localization and mesh placement.
//
// The bundled solution is a deterministic geometric one: it segments
// the bright face region of the luma plane, then instantiates the full
// 478-point mesh by mapping a canonical template into the detected box
// (the 78 canonical nodes take their positions from the engine's graph
// template; the remaining mesh points are placed on filler rings and
// are discarded by selection).  It is built for controlled/synthetic
// footage; a learned face-mesh backend can replace `meshFromFace`
// without touching selection or the output format.

import type { GraphTemplate } from "./graph.js";
import { MESH_POINT_COUNT, SELECTION } from "./selection.js";

export interface FaceBox {
  x0: number;
  y0: number;
  x1: number; // exclusive
  y1: number; // exclusive
}

const LUMA_THRESHOLD = 128;
const MIN_AREA_FRACTION = 0.005; // smaller bright patches are noise, not a face

/** Bounding box of the bright region, or null when no face-sized one exists. */
export function detectFace(luma: Uint8Array, width: number, height: number): FaceBox | null {
  let minX = width, minY = height, maxX = -1, maxY = -1;
  let count = 0;
  for (let y = 0; y < height; y++) {
    const row = y * width;
    for (let x = 0; x < width; x++) {
      if (luma[row + x] > LUMA_THRESHOLD) {
        count++;
        if (x < minX) minX = x;
        if (x > maxX) maxX = x;
        if (y < minY) minY = y;
        if (y > maxY) maxY = y;
      }
    }
  }
  if (count < MIN_AREA_FRACTION * width * height) {
    return null;
  }
  return { x0: minX, y0: minY, x1: maxX + 1, y1: maxY + 1 };
}

/**
 * Full 478-point mesh for a detected face, in normalized image
 * coordinates (x, y in [0, 1], z = 0 for this 2-D solution).
 */
export function meshFromFace(
  box: FaceBox,
  frameWidth: number,
  frameHeight: number,
  template: GraphTemplate,
): Float32Array {
  const mesh = new Float32Array(MESH_POINT_COUNT * 3);
  const bw = box.x1 - box.x0;
  const bh = box.y1 - box.y0;
  const cx = (box.x0 + box.x1) / 2;
  const cy = (box.y0 + box.y1) / 2;

  // filler: deterministic rings inside the box; selection drops them
  for (let i = 0; i < MESH_POINT_COUNT; i++) {
    const angle = (2 * Math.PI * i) / MESH_POINT_COUNT;
    const radius = 0.15 + 0.3 * ((i % 7) / 7);
    mesh[i * 3] = (cx + radius * bw * Math.cos(angle)) / frameWidth;
    mesh[i * 3 + 1] = (cy + radius * bh * Math.sin(angle)) / frameHeight;
    mesh[i * 3 + 2] = 0;
  }

  // canonical nodes: template bounding box mapped onto the face box
  const { bounds, points } = template;
  const sx = bw / (bounds.x1 - bounds.x0);
  const sy = bh / (bounds.y1 - bounds.y0);
  for (let slot = 0; slot < points.length; slot++) {
    const [tx, ty] = points[slot];
    const px = box.x0 + (tx - bounds.x0) * sx;
    const py = box.y0 + (ty - bounds.y0) * sy;
    const dst = SELECTION[slot] * 3;
    mesh[dst] = px / frameWidth;
    mesh[dst + 1] = py / frameHeight;
    mesh[dst + 2] = 0;
  }
  return mesh;
}
