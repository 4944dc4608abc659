"""Command-line entry point: ``kleingrowth {enumerate,poincare,regime,sumlevel}``.

Exit codes: 0 success, 2 invalid input (schema, usage, Beardon bound,
insufficient data), 3 numeric-domain failure (overflow or underflow).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import sys
from importlib import resources
from typing import Sequence

import jsonschema
import numpy as np

from . import __version__
from .asymptotics import classify_regime, convolution_check, return_sequence_model, wandering_rate_model
from .errors import KleinGrowthError, OverflowDomainError, UsageError, ValidationError
from .groups import point_from_config, presentation_from_config
from .orbit import (
    DEFAULT_WORD_CAP,
    estimate_delta,
    level_counts,
    orbit_sample,
    partial_sum,
    restricted_sum_D,
)
from .presentation import sphere_counts
from .sumlevel import MEASURE_CAP, cumulative_table, write_csv

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DOMAIN = 3

CONFIG_SCHEMA = "config.v1.json"
REGIME_SCHEMA = "regime_report.v1.json"
DEFAULT_N_GRID = [2**j for j in range(1, 11)]


def load_schema(name: str) -> dict:
    return json.loads(resources.files("kleingrowth").joinpath("schemas", name).read_text())


def fmt(x: float) -> str:
    return f"{x:.17g}"


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validate_config(doc)
    return doc


def validate_config(doc) -> None:
    try:
        jsonschema.validate(doc, load_schema(CONFIG_SCHEMA))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config invalid at {where}: {exc.message}") from exc


def _group(cfg: dict):
    if "group" not in cfg:
        raise ValidationError("config has no 'group'")
    gp = presentation_from_config(cfg["group"])
    z = point_from_config(gp.model, cfg.get("z"))
    w = point_from_config(gp.model, cfg.get("w"))
    return gp, z, w


def _n_max(args, cfg, cap: int) -> int:
    n = args.n_max if args.n_max is not None else cfg.get("n_max")
    if n is None:
        raise UsageError("--n-max (or n_max in the config) is required")
    if n > cap:
        raise UsageError(f"n_max = {n} exceeds the cap {cap}")
    return n


def _threads(args, cfg) -> int:
    t = args.threads if args.threads is not None else cfg.get("threads", 1)
    if t < 1:
        raise UsageError("--threads must be >= 1")
    return t


def _seed(args, cfg) -> int:
    # nothing in the computations is random; the seed is recorded for provenance
    return args.seed if args.seed is not None else cfg.get("seed", 0)


def cmd_enumerate(args, cfg, out) -> None:
    gp, z, w = _group(cfg)
    n_max = _n_max(args, cfg, cfg.get("word_cap", DEFAULT_WORD_CAP))
    # closed form first: it sizes the job and reports count overflow before any work
    closed = sphere_counts(gp, n_max)
    rows = level_counts(gp, z, w, n_max, threads=_threads(args, cfg), word_cap=cfg.get("word_cap", DEFAULT_WORD_CAP))
    out.write(f"# group: {gp.name or 'custom'}\n# seed: {_seed(args, cfg)}\n")
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(["n", "count", "closed_form_count", "min_dist", "max_dist"])
    for row, c in zip(rows, closed):
        wr.writerow([row["n"], row["count"], c, fmt(row["min_dist"]), fmt(row["max_dist"])])


def _predicted(report, n: int) -> float | None:
    if n < 2:
        return None
    if report.regime == "polynomial":
        return n ** report.predicted_exponent
    if report.regime == "boundary":
        return n / math.log(n)
    return float(n)


def cmd_poincare(args, cfg, out) -> None:
    gp, z, w = _group(cfg)
    cap = cfg.get("word_cap", DEFAULT_WORD_CAP)
    n_max = _n_max(args, cfg, cap)
    threads = _threads(args, cfg)
    s = args.s if args.s is not None else cfg.get("s")
    if args.estimate_delta:
        s = "delta-estimate"
    meta = {"group": gp.name or "custom", "seed": _seed(args, cfg), "n_max": n_max}
    if s is None or s == "delta-estimate":
        est, ball = estimate_delta(gp, z, w, budget=cfg.get("delta_budget", 1_000_000))
        s = est.delta
        meta.update(delta_hat=fmt(est.delta), delta_stderr=fmt(est.stderr), delta_radius=fmt(ball.radius),
                    delta_window=f"[{fmt(est.r_min)}, {fmt(est.r_max)}]")
    if not s > 0:
        raise UsageError("s must be positive")
    meta["s"] = fmt(s)
    delta = cfg.get("delta", s)
    report = classify_regime(delta, gp.r_max)
    meta.update(model_delta=fmt(delta), regime=report.regime, predicted_family=report.predicted_family)
    sample = orbit_sample(gp, z, w, n_max, threads=threads, word_cap=cap)
    full = partial_sum(gp, s=s, n_max=n_max, sample=sample)
    restricted = restricted_sum_D(gp, s=s, n_max=n_max, sample=sample)
    for k, v in meta.items():
        out.write(f"# {k}: {v}\n")
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(["n", "count", "P_n", "restricted_sum", "predicted_model", "ratio"])
    for n in range(n_max + 1):
        count, p = full[n]
        model = _predicted(report, n)
        wr.writerow([n, count, fmt(p), fmt(restricted.values[n]),
                     "" if model is None else fmt(model), "" if model is None else fmt(p / model)])


def regime_document(delta: float, r_max: int, *, epsilon: float = 0.02, n_grid: Sequence[int] = DEFAULT_N_GRID,
                    source: str = "given", stderr: float | None = None, conv_n_max: int = 10_000) -> dict:
    report = classify_regime(delta, r_max, epsilon)
    doc = {"version": 1, **report.as_dict(), "delta_source": source}
    if stderr is not None:
        doc["delta_stderr"] = stderr
    grid = np.array(sorted(set(n_grid)))
    w = np.atleast_1d(wandering_rate_model(delta, r_max, grid))
    nu = np.atleast_1d(return_sequence_model(delta, r_max, grid))
    doc["models"] = [{"n": int(n), "wandering_rate": float(a), "return_sequence": float(b)}
                     for n, a, b in zip(grid, w, nu)]
    conv = convolution_check(delta, r_max, conv_n_max)
    lo, hi = conv.band(10)
    doc["convolution"] = {"n_min": 10, "n_max": conv_n_max, "ratio_min": lo, "ratio_max": hi}
    return doc


def cmd_regime(args, cfg, out) -> None:
    delta = args.delta if args.delta is not None else cfg.get("delta")
    r_max = args.r_max if args.r_max is not None else cfg.get("r_max")
    source, stderr = "given", None
    if delta is None or r_max is None:
        if "group" not in cfg:
            raise UsageError("regime needs --delta and --r-max, or a config with a group")
        gp, z, w = _group(cfg)
        r_max = gp.r_max if r_max is None else r_max
        if delta is None:
            est, _ = estimate_delta(gp, z, w, budget=cfg.get("delta_budget", 1_000_000))
            delta, stderr, source = est.delta, est.stderr, "estimated"
    epsilon = args.epsilon if args.epsilon is not None else cfg.get("epsilon", 0.02)
    doc = regime_document(delta, r_max, epsilon=epsilon, n_grid=cfg.get("n_grid", DEFAULT_N_GRID),
                          source=source, stderr=stderr)
    jsonschema.validate(doc, load_schema(REGIME_SCHEMA))
    out.write(json.dumps(doc, indent=2) + "\n")


def cmd_sumlevel(args, cfg, out) -> None:
    n_max = _n_max(args, cfg, MEASURE_CAP)
    if n_max < 1:
        raise UsageError("sumlevel needs n_max >= 1")
    write_csv(cumulative_table(n_max, threads=_threads(args, cfg)), out)


COMMANDS = {
    "enumerate": cmd_enumerate,
    "poincare": cmd_poincare,
    "regime": cmd_regime,
    "sumlevel": cmd_sumlevel,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kleingrowth", description="Orbit growth of zonal Kleinian groups at the critical exponent.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("enumerate", "per-length orbit counts against the closed-form counts"),
        ("poincare", "partial Poincare sums, restricted sums and the predicted growth model"),
        ("regime", "regime report and model tables as JSON"),
        ("sumlevel", "exact measures of continued-fraction sum-level sets"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--n-max", type=int, dest="n_max")
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int)
        if name == "poincare":
            g = p.add_mutually_exclusive_group()
            g.add_argument("--s", type=float, help="Poincare exponent")
            g.add_argument("--estimate-delta", action="store_true", help="use the estimated critical exponent")
        if name == "regime":
            p.add_argument("--delta", type=float)
            p.add_argument("--r-max", type=int, dest="r_max")
            p.add_argument("--epsilon", type=float)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        target = args.out or cfg.get("out")
        buf = io.StringIO()
        COMMANDS[args.command](args, cfg, buf)
        with (open(target, "w", newline="") if target else contextlib.nullcontext(sys.stdout)) as fh:
            fh.write(buf.getvalue())
        return EXIT_OK
    except OverflowDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (KleinGrowthError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
