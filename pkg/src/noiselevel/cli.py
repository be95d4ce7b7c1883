"""Command-line interface: ``noiselevel {estimate, select, experiment}``.

Exit codes: 0 on success, 2 when the noise estimate is declined, 1 on any
input, validation or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import __version__
from .diff_engine import TooFewPointsError, estimate_noise
from .harness import PRESETS, ExperimentConfig, ExperimentResult, run_experiment
from .models import NoisyFunctionSpec, SeededRng, evaluate
from .select import SelectionError, SelectionProblem, solve_selection

EXIT_OK, EXIT_ERROR, EXIT_DECLINED = 0, 1, 2
THREADS_ENV = "NOISELEVEL_THREADS"
CSV_COLUMNS = (
    "trial", "mode", "estimate", "relative_estimate", "status", "R", "optimal",
    "n", "h", "m", "target", "evaluations", "success",
)


class CliError(Exception):
    pass


def _read_text(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_json(path: str) -> dict:
    try:
        data = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(f"{path} must hold a JSON object")
    return data


def _values_from_input(text: str) -> np.ndarray:
    """Either one value per line, or a JSON object with ``points`` and ``function``."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
            spec = NoisyFunctionSpec.from_dict(data["function"])
            points = np.asarray(data["points"], dtype=float)
            rng = SeededRng(int(data.get("seed", 0)), int(data.get("stream", 0)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CliError(f"bad point/function input: {exc}") from exc
        if points.ndim != 2:
            raise CliError("points must be a list of coordinate lists")
        try:
            return np.atleast_1d(evaluate(spec, points, rng))
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    values = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise CliError(f"line {lineno}: not a number: {line!r}") from exc
    return np.array(values)


def cmd_estimate(args) -> int:
    values = _values_from_input(_read_text(args.input))
    try:
        est = estimate_noise(values)
    except TooFewPointsError as exc:
        raise CliError(f"TooFewPoints: {exc}") from exc
    out = est.to_dict()
    if values[0] != 0:
        out["relative_value"] = est.value / float(values[0])
    print(json.dumps(out, indent=2))
    return EXIT_OK if est.ok else EXIT_DECLINED


def cmd_select(args) -> int:
    data = _load_json(args.problem)
    try:
        if args.time_limit is not None:
            data["time_limit"] = args.time_limit
        problem = SelectionProblem.from_dict(data)
        solution = solve_selection(problem)
    except (SelectionError, TypeError, ValueError) as exc:
        raise CliError(f"invalid selection problem: {exc}") from exc
    out = solution.to_dict()
    out["wall_time"] = solution.wall_time
    out["points"] = solution.points(problem).tolist()
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    if (args.config is None) == (args.preset is None):
        raise CliError("give exactly one of --config or --preset")
    if args.preset is not None:
        config = PRESETS[args.preset]
    else:
        data = _load_json(args.config)
        data = data.get("config", data)  # a summary file re-ingests its own config
        try:
            config = ExperimentConfig.from_dict(data)
        except (TypeError, ValueError) as exc:
            raise CliError(f"invalid experiment config: {exc}") from exc
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    try:
        return replace(config, **overrides)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise CliError(f"{THREADS_ENV} must be an integer") from exc
    return 1


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def records_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in result.records:
        row = [getattr(r, c) for c in CSV_COLUMNS]
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def summary_json(result: ExperimentResult) -> str:
    config = replace(result.config, output=None)
    doc = {
        "tool": "noiselevel",
        "version": __version__,
        "seed": config.seed,
        "config": config.to_dict(),
        "cells": [c.to_dict() for c in result.cells],
    }
    return json.dumps(doc, indent=2) + "\n"


def _write_atomically(files: dict[str, str]) -> None:
    """Write every file to a temporary sibling first, then rename them all."""
    staged = []
    try:
        for path, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-")
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for tmp, path in staged:
            os.replace(tmp, path)
    except OSError:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _summary_table(result: ExperimentResult) -> str:
    lines = []
    for c in result.cells:
        fractions = "  ".join(f"{mode}={frac:.3f}" for mode, frac in c.success.items())
        ks = "" if c.ks is None else f"  KS D={c.ks.statistic:.4f} p={c.ks.p_value:.4f}"
        lines.append(f"n={c.n} h={c.h:g} m={c.m}: {fractions}{ks}")
    return "\n".join(lines)


def cmd_experiment(args) -> int:
    config = _experiment_config(args)
    out_dir = args.out or config.output or "results"
    try:
        os.makedirs(out_dir, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise PermissionError(f"{out_dir} is not writable")
    except OSError as exc:
        raise CliError(f"cannot use output directory {out_dir}: {exc}") from exc
    result = run_experiment(config, workers=_threads(args))
    files = {
        os.path.join(out_dir, f"{config.kind.value}_records.csv"): records_csv(result),
        os.path.join(out_dir, f"{config.kind.value}_summary.json"): summary_json(result),
    }
    try:
        _write_atomically(files)
    except OSError as exc:
        raise CliError(f"cannot write results to {out_dir}: {exc}") from exc
    print(_summary_table(result))
    for path in files:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noiselevel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the noise level of a value sequence")
    p.add_argument("input", help="values file (one per line), JSON points + function spec, or - for stdin")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("select", help="solve a point-selection problem given as JSON")
    p.add_argument("problem", help="problem JSON file, or - for stdin")
    p.add_argument("--time-limit", type=float, default=None, help="override the problem's time limit (s)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("experiment", help="run a Monte-Carlo experiment and write CSV/JSON")
    p.add_argument("--config", help="experiment config JSON (or an emitted summary JSON)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--threads", type=int, help=f"worker processes (default: ${THREADS_ENV} or 1)")
    p.add_argument("--out", help="output directory (created if missing)")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
