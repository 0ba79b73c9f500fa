// y4m.ts
// Minimal YUV4MPEG2 parser.  Only what the extractor needs: stream
// header (W/H/F/C), FRAME markers, and the luma plane of each frame.
// Chroma planes are skipped; detection runs on luma alone.

export interface Y4mVideo {
  width: number;
  height: number;
  fps: number;
  colorspace: string;
  frames: Uint8Array[]; // luma planes, width*height each
}

const PLANE_FACTOR: Record<string, number> = {
  // bytes per pixel across all planes, relative to the luma plane
  mono: 1,
  "420": 1.5,
  "420jpeg": 1.5,
  "420mpeg2": 1.5,
  "420paldv": 1.5,
  "422": 2,
  "444": 3,
};

export function parseY4m(raw: Buffer): Y4mVideo {
  const headerEnd = raw.indexOf(0x0a);
  if (headerEnd < 0) {
    throw new Error("no stream header");
  }
  const header = raw.toString("ascii", 0, headerEnd);
  const fields = header.split(" ");
  if (fields[0] !== "YUV4MPEG2") {
    throw new Error(`not a YUV4MPEG2 stream: ${fields[0]}`);
  }

  let width = 0;
  let height = 0;
  let fps = 0;
  let colorspace = "420jpeg"; // the format's default when C is absent
  for (const field of fields.slice(1)) {
    const tag = field[0];
    const value = field.slice(1);
    if (tag === "W") width = parseInt(value, 10);
    else if (tag === "H") height = parseInt(value, 10);
    else if (tag === "F") {
      const [num, den] = value.split(":").map((v) => parseInt(v, 10));
      if (!(num > 0) || !(den > 0)) throw new Error(`bad frame rate ${value}`);
      fps = num / den;
    } else if (tag === "C") colorspace = value;
    // I (interlacing) and A (aspect) tags are irrelevant here
  }
  if (!(width > 0) || !(height > 0)) {
    throw new Error(`bad dimensions ${width}x${height}`);
  }
  if (!(fps > 0)) {
    throw new Error("missing frame rate");
  }
  const factor = PLANE_FACTOR[colorspace];
  if (factor === undefined) {
    throw new Error(`unsupported colorspace C${colorspace}`);
  }

  const lumaSize = width * height;
  const frameSize = Math.ceil(lumaSize * factor);
  const frames: Uint8Array[] = [];
  let pos = headerEnd + 1;
  while (pos < raw.length) {
    const markerEnd = raw.indexOf(0x0a, pos);
    if (markerEnd < 0) {
      throw new Error(`truncated frame header at byte ${pos}`);
    }
    const marker = raw.toString("ascii", pos, markerEnd);
    if (!marker.startsWith("FRAME")) {
      throw new Error(`expected FRAME marker, got ${JSON.stringify(marker)}`);
    }
    pos = markerEnd + 1;
    if (pos + frameSize > raw.length) {
      throw new Error(`truncated frame data at byte ${pos}`);
    }
    frames.push(new Uint8Array(raw.subarray(pos, pos + lumaSize)));
    pos += frameSize;
  }
  return { width, height, fps, colorspace, frames };
}
