#!/usr/bin/env node
// cli.ts
// flmk-extract --video clip.y4m --out seq.flmk [--fps-override N]
//              [--manifest corpus.jsonl --label 2 --split train]

import { appendManifestLine, extractVideo } from "./extract.js";

const USAGE = `usage: flmk-extract --video <clip.y4m> --out <seq.flmk>
                    [--fps-override <fps>]
                    [--manifest <corpus.jsonl> --label <k> --split <train|val|test>]`;

interface Args {
  video: string;
  out: string;
  fpsOverride?: number;
  manifest?: string;
  label?: number;
  split?: string;
}

function parseArgs(argv: string[]): Args {
  const values: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad argument ${flag}`);
    }
    values[flag.slice(2)] = argv[i + 1];
  }
  const known = new Set(["video", "out", "fps-override", "manifest", "label", "split"]);
  for (const key of Object.keys(values)) {
    if (!known.has(key)) throw new Error(`unknown flag --${key}`);
  }
  if (!values["video"] || !values["out"]) {
    throw new Error("--video and --out are required");
  }

  const args: Args = { video: values["video"], out: values["out"] };
  if (values["fps-override"] !== undefined) {
    args.fpsOverride = Number(values["fps-override"]);
    if (!(args.fpsOverride > 0)) throw new Error("--fps-override must be positive");
  }
  if (values["manifest"] !== undefined) {
    if (values["label"] === undefined || values["split"] === undefined) {
      throw new Error("--manifest needs --label and --split");
    }
    args.manifest = values["manifest"];
    args.label = Number(values["label"]);
    if (!Number.isInteger(args.label) || args.label < 0) {
      throw new Error(`--label must be a non-negative integer, got ${values["label"]}`);
    }
    if (!["train", "val", "test"].includes(values["split"])) {
      throw new Error(`--split must be train, val or test, got ${values["split"]}`);
    }
    args.split = values["split"];
  } else if (values["label"] !== undefined || values["split"] !== undefined) {
    throw new Error("--label/--split only make sense with --manifest");
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    console.error(USAGE);
    return 2;
  }

  try {
    const summary = extractVideo(args.video, args.out, {
      fpsOverride: args.fpsOverride,
      label: args.label,
    });
    if (args.manifest !== undefined) {
      appendManifestLine(args.manifest, args.out, args.label!, args.split!);
    }
    console.log(JSON.stringify({
      written: args.out,
      frames: summary.frames,
      valid_frames: summary.validFrames,
    }));
    return 0;
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
}

// run directly (not imported by a test)
import { pathToFileURL } from "node:url";

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
