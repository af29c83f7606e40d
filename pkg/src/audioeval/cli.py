"""Command-line entry point.

    audioeval run --config PATH [--output DIR] [--category NAME]...
    audioeval score --predictions PATH --config PATH [--output DIR]
    audioeval list-tasks --config PATH [--category NAME]...
    audioeval mock-serve --port N [--behavior PATH]

Exit codes: 0 success, 1 configuration or I/O failure, 2 some task produced
no successful prediction (or nothing to score).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import CATEGORIES, canonical_category, load_config
from .errors import AudioEvalError
from .report import read_results, write_outputs

EXIT_OK, EXIT_FAILURE, EXIT_NO_PREDICTIONS = 0, 1, 2


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _categories(names) -> list[str] | None:
    if not names:
        return None
    out = []
    for name in names:
        cat = canonical_category(name)
        if cat is None:
            raise ValueError(f"unknown category {name!r}; valid categories: {', '.join(CATEGORIES)}")
        out.append(cat)
    return out


def _load(path):
    try:
        return load_config(path)
    except FileNotFoundError:
        raise OSError(f"config file not found: {path}") from None


def outcome_code(report, task_names) -> int:
    """2 when some selected task has no successful prediction, else 0."""
    ok = {r.task_name for r in report.per_sample if not r.error}
    return EXIT_NO_PREDICTIONS if any(t not in ok for t in task_names) else EXIT_OK


def cmd_run(args) -> int:
    from .pipeline import run_evaluation

    try:
        cats = _categories(args.category)
        cfg = _load(args.config)
        if args.output:
            cfg = replace(cfg, output_dir=str(Path(args.output).resolve()))
        report, task_runs = run_evaluation(
            cfg, cats, progress=lambda msg: print(msg, file=sys.stderr) if args.verbose >= 0 else None
        )
        write_outputs(report, cfg.output_dir)
    except (AudioEvalError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_FAILURE
    print(f"wrote results to {cfg.output_dir}", file=sys.stderr)
    return outcome_code(report, [tr.task.task_name for tr in task_runs])


def cmd_score(args) -> int:
    from .pipeline import check_reference_kinds, finalize, score_results
    from .errors import SchemaError

    try:
        cfg = _load(args.config)
        pred_path = Path(args.predictions)
        try:
            results = read_results(pred_path)
        except FileNotFoundError:
            raise OSError(f"predictions file not found: {pred_path}") from None
        except (ValueError, TypeError, KeyError) as exc:
            raise SchemaError(f"malformed predictions: {exc}", str(pred_path)) from None
        if not results:
            _err(f"{pred_path}: no predictions to score")
            return EXIT_NO_PREDICTIONS
        tasks = {t.task_name: t for t in cfg.tasks}
        for n, r in enumerate(results, start=1):
            if r.task_name not in tasks:
                raise SchemaError(f"task {r.task_name!r} not in config", f"{pred_path} line {n}")
            check_reference_kinds(tasks[r.task_name], {r.reference_kind}, f"{pred_path} line {n}")
        score_results(cfg, results)
        timing_src = pred_path.parent / "timing.json"
        timing = json.loads(timing_src.read_text()) if timing_src.is_file() else {}
        latencies = timing.get("latency_s", {})
        for r in results:
            r.latency_s = latencies.get("/".join(r.sort_key()), r.latency_s)
        report = finalize(cfg, results, timing.get("task_walls"), timing.get("efficiency"))
        out_dir = Path(args.output) if args.output else pred_path.parent
        write_outputs(report, out_dir)
    except (AudioEvalError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_FAILURE
    return outcome_code(report, sorted({r.task_name for r in results}))


def cmd_list_tasks(args) -> int:
    from .dataset import load_manifest

    try:
        cats = _categories(args.category)
        cfg = _load(args.config)
    except (AudioEvalError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_FAILURE
    rows = []
    for t in cfg.tasks:
        if cats and t.category not in cats:
            continue
        try:
            size = str(len(load_manifest(t.dataset_path, check_audio=False)))
        except (AudioEvalError, OSError):
            size = "?"
        rows.append((t.task_name, t.category, size, ",".join(t.metric_names)))
    header = ("task", "category", "samples", "metrics")
    widths = [max(len(r[k]) for r in [header, *rows]) for k in range(4)]
    for row in [header, *rows]:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return EXIT_OK


def cmd_mock_serve(args) -> int:
    import time

    from .mocklalm import BindError, MockBehavior, serve

    try:
        behavior = MockBehavior.load(args.behavior) if args.behavior else MockBehavior()
        server = serve(behavior, args.port, args.host)
    except (OSError, ValueError, BindError) as exc:
        _err(str(exc))
        return EXIT_FAILURE
    print(f"mock endpoint listening on {server.url}", file=sys.stderr)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="audioeval", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", dest="verbose", action="store_const", const=-1)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run inference, scoring and reporting")
    run.add_argument("--config", required=True)
    run.add_argument("--output")
    run.add_argument("--category", action="append")
    run.set_defaults(func=cmd_run)

    score = sub.add_parser("score", help="re-score stored predictions")
    score.add_argument("--predictions", required=True)
    score.add_argument("--config", required=True)
    score.add_argument("--output")
    score.set_defaults(func=cmd_score)

    lt = sub.add_parser("list-tasks", help="list configured tasks")
    lt.add_argument("--config", required=True)
    lt.add_argument("--category", action="append")
    lt.set_defaults(func=cmd_list_tasks)

    ms = sub.add_parser("mock-serve", help="serve a mock chat-completions endpoint")
    ms.add_argument("--port", type=int, required=True)
    ms.add_argument("--host", default="127.0.0.1")
    ms.add_argument("--behavior")
    ms.set_defaults(func=cmd_mock_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * max(args.verbose, 0)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
