"""Command-line front end.

Every subcommand calls the same handlers the HTTP service uses, in
process.  Only stdlib modules may be imported at module level: the
thread cap from ENGAGE_THREADS must land in the environment before
numpy is first imported.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _apply_thread_cap(environ=os.environ) -> None:
    """Cap BLAS/numpy worker threads at ENGAGE_THREADS."""
    raw = environ.get("ENGAGE_THREADS")
    if raw is None or raw == "":
        return
    from .errors import ConfigError
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError([f"ENGAGE_THREADS must be an integer, got {raw!r}"])
    if cap < 1:
        raise ConfigError([f"ENGAGE_THREADS must be >= 1, got {cap}"])
    for var in _THREAD_VARS:
        current = environ.get(var)
        try:
            have = int(current) if current else None
        except ValueError:
            have = None
        environ[var] = str(cap if have is None else min(have, cap))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="engagekit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_graph = sub.add_parser("graph", help="face graph utilities")
    graph_sub = p_graph.add_subparsers(dest="graph_command", required=True)
    p_export = graph_sub.add_parser("export", help="dump nodes/edges/template as JSON")
    p_export.add_argument("--out", help="output path (stdout when omitted)")

    p_synth = sub.add_parser("synth", help="generate a synthetic labelled dataset")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--samples", type=int, default=1000)
    p_synth.add_argument("--classes", type=int, default=4)
    p_synth.add_argument("--frames", type=int, default=128)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--fps", type=float, default=30.0)
    p_synth.add_argument("--val-fraction", type=float, default=0.2)
    p_synth.add_argument("--test-fraction", type=float, default=0.0)

    p_train = sub.add_parser("train", help="phase-1 training (K-class head)")
    p_train.add_argument("--config", required=True, help="JSON run config")
    p_train.add_argument("--epochs", type=int, help="override train.epochs")
    p_train.add_argument("--seed", type=int, help="override train.seed")
    p_train.add_argument("--out-dir", help="override paths.out_dir")
    p_train.add_argument("--resume", help="resume checkpoint to continue from")
    p_train.add_argument("--save-resume", help="write a resumable checkpoint here")
    p_train.add_argument("--stop-epoch", type=int,
                         help="pause after this many epochs (for later --resume)")

    p_ord = sub.add_parser("train-ordinal",
                           help="phase-2 training (binary heads on frozen backbone)")
    p_ord.add_argument("--config", required=True, help="JSON run config")
    p_ord.add_argument("--base", required=True, help="phase-1 checkpoint")
    p_ord.add_argument("--epochs", type=int, help="override train.epochs")
    p_ord.add_argument("--seed", type=int, help="override train.seed")
    p_ord.add_argument("--out-dir", help="override paths.out_dir")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--split", default="val")

    p_infer = sub.add_parser("infer", help="classify one landmark sequence")
    p_infer.add_argument("--ckpt", required=True)
    p_infer.add_argument("--sample", required=True)

    p_explain = sub.add_parser("explain", help="saliency map for one sequence")
    p_explain.add_argument("--ckpt", required=True)
    p_explain.add_argument("--sample", required=True)
    p_explain.add_argument("--class", dest="target_class", type=int, required=True)
    p_explain.add_argument("--out", required=True, help="saliency JSON path")
    p_explain.add_argument("--points", action="store_true",
                           help="include per-frame node coordinates with saliency")
    return parser


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _load_config_doc(path, overrides: dict) -> dict:
    from .errors import ConfigError
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError([f"config file not found: {path}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["config root must be a JSON object"])
    for (section, key), value in overrides.items():
        if value is None:
            continue
        bucket = doc.setdefault(section, {})
        if not isinstance(bucket, dict):
            raise ConfigError([f"{section}: must be an object"])
        bucket[key] = value
    return doc


def _dispatch(args: argparse.Namespace) -> None:
    from .service import handlers, schemas

    if args.command == "graph":
        doc = handlers.graph_export().model_dump()
        if args.out:
            handlers.write_json_atomic(args.out, doc)
            _emit({"written": args.out})
        else:
            _emit(doc)

    elif args.command == "synth":
        resp = handlers.synth(schemas.SynthRequest(
            out_dir=args.out, samples=args.samples, classes=args.classes,
            frames=args.frames, seed=args.seed, fps=args.fps,
            val_fraction=args.val_fraction, test_fraction=args.test_fraction))
        _emit(resp.model_dump())

    elif args.command == "train":
        doc = _load_config_doc(args.config, {
            ("train", "epochs"): args.epochs,
            ("train", "seed"): args.seed,
            ("paths", "out_dir"): args.out_dir,
        })
        resp = handlers.train(schemas.TrainRequest(
            config=doc, resume_from=args.resume,
            save_resume_to=args.save_resume, stop_epoch=args.stop_epoch))
        _emit(resp.model_dump())

    elif args.command == "train-ordinal":
        doc = _load_config_doc(args.config, {
            ("train", "epochs"): args.epochs,
            ("train", "seed"): args.seed,
            ("paths", "out_dir"): args.out_dir,
        })
        resp = handlers.train_ordinal(schemas.TrainOrdinalRequest(
            config=doc, base_checkpoint=args.base))
        _emit(resp.model_dump())

    elif args.command == "eval":
        resp = handlers.evaluate(schemas.EvalRequest(
            checkpoint=args.ckpt, manifest=args.manifest, split=args.split))
        _emit(resp.model_dump(exclude_none=True))

    elif args.command == "infer":
        resp = handlers.infer(schemas.InferRequest(
            checkpoint=args.ckpt, sample=args.sample))
        _emit(resp.model_dump())

    elif args.command == "explain":
        resp = handlers.explain(schemas.ExplainRequest(
            checkpoint=args.ckpt, sample=args.sample,
            target_class=args.target_class, with_points=args.points))
        handlers.write_json_atomic(args.out, resp.model_dump(exclude_none=True))
        _emit({"written": args.out})

    else:  # pragma: no cover - argparse enforces the choices
        raise AssertionError(args.command)


def _error_doc(exc: Exception, code: int) -> dict:
    doc = {"error": {"code": code, "type": type(exc).__name__, "message": str(exc)}}
    problems = getattr(exc, "problems", None)
    if problems:
        doc["error"]["problems"] = list(problems)
    return doc


def _fail(exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps(_error_doc(exc, code), sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    from .errors import (ConfigError, DivergenceError, EngageError, FormatError,
                         UndefinedMetricError, ValidationError)
    try:
        _apply_thread_cap()
        _dispatch(args)
        return EXIT_OK
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except (FormatError, ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        return _fail(exc, EXIT_DATA)
    except (DivergenceError, UndefinedMetricError, FloatingPointError) as exc:
        return _fail(exc, EXIT_NUMERIC)
    except EngageError as exc:
        return _fail(exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
