// selection.ts
// Maps the 478-point face mesh (468 surface points + 10 iris points, the
// MediaPipe FaceMesh index convention) onto the engine's 78 canonical
// nodes: slots 0-67 follow the classic 68-landmark ordering, 68-72 are
// the image-left iris (center first, then 4 boundary points), 73-77 the
// image-right iris likewise.

export const MESH_POINT_COUNT = 478;
export const NODE_COUNT = 78;

// Classic 68-landmark slots expressed as mesh indices.  The mesh does
// not define this correspondence itself; this is the widely used
// convention table (jaw, brows, nose, eyes, outer lip, inner lip).
export const DLIB68_TO_MESH: number[] = [
  // jaw line 0-16, image left to image right
  162, 234, 93, 58, 172, 136, 149, 148, 152,
  377, 378, 365, 397, 288, 323, 454, 389,
  // eyebrow over the image-left eye 17-21
  70, 63, 105, 66, 107,
  // eyebrow over the image-right eye 22-26
  336, 296, 334, 293, 300,
  // nose bridge 27-30 and nose floor 31-35
  168, 197, 5, 4,
  75, 97, 2, 326, 305,
  // image-left eye 36-41, image-right eye 42-47
  33, 160, 158, 133, 153, 144,
  362, 385, 387, 263, 373, 380,
  // outer lip 48-59
  61, 39, 37, 0, 267, 269, 291, 405, 314, 17, 84, 181,
  // inner lip 60-67
  78, 82, 13, 312, 308, 317, 14, 87,
];

// Iris points: the mesh appends them after the 468 surface points, one
// pupil center followed by 4 boundary points per eye.
export const LEFT_IRIS_MESH: number[] = [468, 469, 470, 471, 472];
export const RIGHT_IRIS_MESH: number[] = [473, 474, 475, 476, 477];

/** Mesh index for each of the 78 canonical node slots, in slot order. */
export const SELECTION: number[] = [
  ...DLIB68_TO_MESH,
  ...LEFT_IRIS_MESH,
  ...RIGHT_IRIS_MESH,
];

/**
 * Throws if the table violates its invariants: 78 slots, all indices
 * distinct and within the mesh.  Called once at module load so a bad
 * edit fails immediately rather than producing shuffled landmarks.
 */
export function assertValidSelection(table: number[] = SELECTION): void {
  if (table.length !== NODE_COUNT) {
    throw new Error(`selection has ${table.length} slots, expected ${NODE_COUNT}`);
  }
  const seen = new Set<number>();
  for (const idx of table) {
    if (!Number.isInteger(idx) || idx < 0 || idx >= MESH_POINT_COUNT) {
      throw new Error(`mesh index ${idx} out of range`);
    }
    if (seen.has(idx)) {
      throw new Error(`duplicate mesh index ${idx}`);
    }
    seen.add(idx);
  }
}

assertValidSelection();

/** Pick the canonical 78 nodes out of a full mesh, preserving (x, y, z). */
export function selectNodes(mesh: Float32Array): Float32Array {
  if (mesh.length !== MESH_POINT_COUNT * 3) {
    throw new Error(`mesh has ${mesh.length / 3} points, expected ${MESH_POINT_COUNT}`);
  }
  const out = new Float32Array(NODE_COUNT * 3);
  for (let slot = 0; slot < NODE_COUNT; slot++) {
    const src = SELECTION[slot] * 3;
    out[slot * 3] = mesh[src];
    out[slot * 3 + 1] = mesh[src + 1];
    out[slot * 3 + 2] = mesh[src + 2];
  }
  return out;
}
