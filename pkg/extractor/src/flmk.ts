// flmk.ts
// Writer (and reader, used by the tests) for the FLMK landmark-sequence
// container shared with the engine.  Little-endian layout:
//
//   magic   "FLMK"  4 bytes
//   version u16     = 1
//   N       u16     node count
//   T       u32     frame count
//   K       u16     class count, 0 = unspecified
//   label   i16     -1 = unlabeled
//   fps     f32
//   validity T bytes (0/1)
//   coords  T*N*3 f32, frame-major, node-major, (x, y, z)

export const FLMK_MAGIC = "FLMK";
export const FLMK_VERSION = 1;
export const HEADER_SIZE = 20;

export interface FlmkSequence {
  nodeCount: number;
  frameCount: number;
  classCount: number; // 0 when unspecified
  label: number; // -1 when unlabeled
  fps: number;
  validity: Uint8Array; // frameCount entries, 0/1
  coords: Float32Array; // frameCount * nodeCount * 3
}

export function encodeFlmk(seq: FlmkSequence): Buffer {
  const { nodeCount, frameCount } = seq;
  if (seq.validity.length !== frameCount) {
    throw new Error(`validity has ${seq.validity.length} entries, expected ${frameCount}`);
  }
  if (seq.coords.length !== frameCount * nodeCount * 3) {
    throw new Error(`coords has ${seq.coords.length} floats, expected ${frameCount * nodeCount * 3}`);
  }
  if (!(seq.fps > 0)) {
    throw new Error(`fps must be positive, got ${seq.fps}`);
  }
  // invalid frames must carry all-zero coordinates; enforce rather than
  // silently writing a file the engine will reject
  for (let t = 0; t < frameCount; t++) {
    if (seq.validity[t]) continue;
    const base = t * nodeCount * 3;
    for (let i = 0; i < nodeCount * 3; i++) {
      if (seq.coords[base + i] !== 0) {
        throw new Error(`invalid frame ${t} has nonzero coordinates`);
      }
    }
  }

  const buf = Buffer.alloc(HEADER_SIZE + frameCount + frameCount * nodeCount * 3 * 4);
  buf.write(FLMK_MAGIC, 0, "ascii");
  buf.writeUInt16LE(FLMK_VERSION, 4);
  buf.writeUInt16LE(nodeCount, 6);
  buf.writeUInt32LE(frameCount, 8);
  buf.writeUInt16LE(seq.classCount, 12);
  buf.writeInt16LE(seq.label, 14);
  buf.writeFloatLE(seq.fps, 16);
  Buffer.from(seq.validity).copy(buf, HEADER_SIZE);
  const coordBytes = Buffer.from(seq.coords.buffer, seq.coords.byteOffset, seq.coords.byteLength);
  coordBytes.copy(buf, HEADER_SIZE + frameCount);
  return buf;
}

export function decodeFlmk(raw: Buffer): FlmkSequence {
  if (raw.length < HEADER_SIZE) {
    throw new Error(`truncated: ${raw.length} bytes, header needs ${HEADER_SIZE}`);
  }
  if (raw.toString("ascii", 0, 4) !== FLMK_MAGIC) {
    throw new Error("bad magic");
  }
  const version = raw.readUInt16LE(4);
  if (version !== FLMK_VERSION) {
    throw new Error(`version ${version}, expected ${FLMK_VERSION}`);
  }
  const nodeCount = raw.readUInt16LE(6);
  const frameCount = raw.readUInt32LE(8);
  const classCount = raw.readUInt16LE(12);
  const label = raw.readInt16LE(14);
  const fps = raw.readFloatLE(16);
  const expected = HEADER_SIZE + frameCount + frameCount * nodeCount * 3 * 4;
  if (raw.length !== expected) {
    throw new Error(`size ${raw.length}, expected ${expected}`);
  }
  const validity = new Uint8Array(raw.subarray(HEADER_SIZE, HEADER_SIZE + frameCount));
  const coordStart = HEADER_SIZE + frameCount;
  const coords = new Float32Array(frameCount * nodeCount * 3);
  for (let i = 0; i < coords.length; i++) {
    coords[i] = raw.readFloatLE(coordStart + i * 4);
  }
  return { nodeCount, frameCount, classCount, label, fps, validity, coords };
}
