import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";
import { decodeFlmk } from "../src/flmk.js";

const here = dirname(fileURLToPath(import.meta.url));
const FACE_CLIP = join(here, "..", "testdata", "face.y4m");

let outDir: string;

beforeAll(() => {
  outDir = mkdtempSync(join(tmpdir(), "flmk-cli-"));
  vi.spyOn(console, "log").mockImplementation(() => {});
  vi.spyOn(console, "error").mockImplementation(() => {});
});

describe("flmk-extract CLI", () => {
  it("extracts with just --video and --out", () => {
    const out = join(outDir, "a.flmk");
    expect(main(["--video", FACE_CLIP, "--out", out])).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(decodeFlmk(readFileSync(out)).label).toBe(-1);
  });

  it("appends a manifest line when asked", () => {
    const out = join(outDir, "b.flmk");
    const manifest = join(outDir, "m.jsonl");
    const code = main([
      "--video", FACE_CLIP, "--out", out,
      "--manifest", manifest, "--label", "1", "--split", "train",
    ]);
    expect(code).toBe(0);
    const entry = JSON.parse(readFileSync(manifest, "utf-8").trim());
    expect(entry).toEqual({ path: "b.flmk", label: 1, split: "train" });
    expect(decodeFlmk(readFileSync(out)).label).toBe(1);
  });

  it("rejects bad usage with exit code 2", () => {
    expect(main([])).toBe(2);
    expect(main(["--video", FACE_CLIP])).toBe(2); // no --out
    expect(main(["--video", FACE_CLIP, "--out", "x", "--manifest", "m"])).toBe(2);
    expect(main(["--video", FACE_CLIP, "--out", "x", "--label", "1"])).toBe(2);
    expect(main(["--video", FACE_CLIP, "--out", "x", "--bogus", "1"])).toBe(2);
    expect(main(["--video", FACE_CLIP, "--out", "x",
                 "--manifest", "m", "--label", "-1", "--split", "train"])).toBe(2);
    expect(main(["--video", FACE_CLIP, "--out", "x",
                 "--manifest", "m", "--label", "1", "--split", "holdout"])).toBe(2);
    expect(main(["--video", FACE_CLIP, "--out", "x", "--fps-override", "0"])).toBe(2);
  });

  it("reports runtime failures with exit code 1", () => {
    expect(main(["--video", join(outDir, "gone.y4m"), "--out", join(outDir, "c.flmk")]))
      .toBe(1);
  });
});
