// make_clips.ts
// Regenerates the bundled test clips in testdata/: a 2-second face clip
// and a face-free clip, both 96x96 mono Y4M at 15 fps.  Deterministic,
// so reruns are byte-identical.

import { writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const WIDTH = 96;
const HEIGHT = 96;
const FPS = 15;
const SECONDS = 2;
const FRAMES = FPS * SECONDS;

const BACKGROUND = 20;
const FACE = 210;
const EYE = 50;
const MOUTH = 70;

function fillEllipse(
  luma: Uint8Array, cx: number, cy: number, rx: number, ry: number, value: number,
): void {
  const x0 = Math.max(0, Math.floor(cx - rx));
  const x1 = Math.min(WIDTH - 1, Math.ceil(cx + rx));
  const y0 = Math.max(0, Math.floor(cy - ry));
  const y1 = Math.min(HEIGHT - 1, Math.ceil(cy + ry));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = (x - cx) / rx;
      const dy = (y - cy) / ry;
      if (dx * dx + dy * dy <= 1) {
        luma[y * WIDTH + x] = value;
      }
    }
  }
}

function faceFrame(t: number): Uint8Array {
  const luma = new Uint8Array(WIDTH * HEIGHT).fill(BACKGROUND);
  // slight horizontal sway so frames are not identical
  const cx = 48 + Math.round(3 * Math.sin((2 * Math.PI * t) / FRAMES));
  const cy = 46;
  fillEllipse(luma, cx, cy, 26, 31, FACE);
  fillEllipse(luma, cx - 10, cy - 8, 4, 3, EYE);
  fillEllipse(luma, cx + 10, cy - 8, 4, 3, EYE);
  fillEllipse(luma, cx, cy + 14, 8, 4, MOUTH);
  return luma;
}

function noiseFrame(t: number): Uint8Array {
  // dim structured noise, everything far below the detection threshold
  const luma = new Uint8Array(WIDTH * HEIGHT);
  for (let y = 0; y < HEIGHT; y++) {
    for (let x = 0; x < WIDTH; x++) {
      luma[y * WIDTH + x] = BACKGROUND + ((x * 31 + y * 17 + t * 7) % 23);
    }
  }
  return luma;
}

function writeY4m(path: string, frame: (t: number) => Uint8Array): void {
  const parts: Buffer[] = [
    Buffer.from(`YUV4MPEG2 W${WIDTH} H${HEIGHT} F${FPS}:1 Ip A1:1 Cmono\n`, "ascii"),
  ];
  for (let t = 0; t < FRAMES; t++) {
    parts.push(Buffer.from("FRAME\n", "ascii"));
    parts.push(Buffer.from(frame(t)));
  }
  writeFileSync(path, Buffer.concat(parts));
  console.log(`wrote ${path}`);
}

const outDir = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "testdata");
writeY4m(join(outDir, "face.y4m"), faceFrame);
writeY4m(join(outDir, "noface.y4m"), noiseFrame);
