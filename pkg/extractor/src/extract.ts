// extract.ts
// Video file in, FLMK landmark sequence out.

import { appendFileSync, readFileSync, renameSync, writeFileSync } from "node:fs";
import { dirname, relative } from "node:path";

import { detectFace, meshFromFace } from "./detect.js";
import { encodeFlmk } from "./flmk.js";
import { loadGraphTemplate } from "./graph.js";
import { NODE_COUNT, selectNodes } from "./selection.js";
import { parseY4m } from "./y4m.js";

export interface ExtractOptions {
  /** store this frame rate instead of the one declared by the video */
  fpsOverride?: number;
  label?: number;
  graphPath?: string;
}

export interface ExtractSummary {
  frames: number;
  validFrames: number;
}

/**
 * Decode the video, run the landmark solution on every frame, and
 * write one FLMK file.  Frames with no detected face are recorded as
 * invalid with all-zero coordinates; they are never interpolated, so a
 * downstream consumer sees exactly where detection failed.
 */
export function extractVideo(
  videoPath: string,
  outPath: string,
  opts: ExtractOptions = {},
): ExtractSummary {
  const video = parseY4m(readFileSync(videoPath));
  if (video.frames.length === 0) {
    throw new Error(`${videoPath}: zero decodable frames`);
  }
  const template = loadGraphTemplate(opts.graphPath);
  if (template.nodeCount !== NODE_COUNT) {
    throw new Error(`graph has ${template.nodeCount} nodes, expected ${NODE_COUNT}`);
  }

  const frameCount = video.frames.length;
  const coords = new Float32Array(frameCount * NODE_COUNT * 3);
  const validity = new Uint8Array(frameCount);
  let validFrames = 0;
  for (let t = 0; t < frameCount; t++) {
    const box = detectFace(video.frames[t], video.width, video.height);
    if (box === null) {
      continue; // stays invalid, stays zero
    }
    const mesh = meshFromFace(box, video.width, video.height, template);
    coords.set(selectNodes(mesh), t * NODE_COUNT * 3);
    validity[t] = 1;
    validFrames++;
  }

  const encoded = encodeFlmk({
    nodeCount: NODE_COUNT,
    frameCount,
    classCount: 0,
    label: opts.label ?? -1,
    fps: opts.fpsOverride ?? video.fps,
    validity,
    coords,
  });
  const tmp = `${outPath}.tmp`;
  writeFileSync(tmp, encoded);
  renameSync(tmp, outPath);
  return { frames: frameCount, validFrames };
}

/** Append one {path, label, split} line; path is relative to the manifest. */
export function appendManifestLine(
  manifestPath: string,
  flmkPath: string,
  label: number,
  split: string,
): void {
  const rel = relative(dirname(manifestPath), flmkPath).split("\\").join("/");
  const line = JSON.stringify({ path: rel, label, split });
  appendFileSync(manifestPath, line + "\n");
}
