"""``cdprune`` command line: prune, compare, bench, gen, render.

Every command writes one JSON document to stdout (or ``--out``). Failures
print ``{"error": code, "message": ...}`` to stderr and exit with status 2
for input errors or 3 for rank deficiency under ``--strict``.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import itertools
import json
import math
import os
import statistics
import sys
import time

import numpy as np

from . import __version__, dpp_map, io, kernel, metrics, pipeline
from .errors import CDPruneError, InvalidRequest
from .rng import SCHEME, Stream

SCHEMA_VERSION = 1
THREADS_ENV = "CDPRUNE_THREADS"

PRUNE_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "version", "mode", "selected", "gains", "log_det",
                 "fill_count", "rows_fetched", "elapsed_ms", "config"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "version": {"type": "string"},
        "mode": {"enum": list(pipeline.STRATEGIES)},
        "selected": {"type": "array", "items": {"type": "integer", "minimum": 0}, "uniqueItems": True},
        "gains": {"type": "array", "items": {"type": "number"}},
        "log_det": {"type": ["number", "null"]},
        "fill_count": {"type": "integer", "minimum": 0},
        "rows_fetched": {"type": "integer", "minimum": 0},
        "elapsed_ms": {"type": "number", "minimum": 0},
        "config": {"type": "object"},
    },
}

SUBSET_REPORT_SCHEMA = {
    "type": "object",
    "required": ["strategy", "selected", "log_det", "min_pairwise_distance",
                 "mean_relevance", "coverage_rmse"],
    "properties": {
        "strategy": {"type": "string"},
        "selected": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "log_det": {"type": ["number", "null"]},
        "min_pairwise_distance": {"type": "number", "minimum": 0},
        "mean_relevance": {"type": "number", "minimum": 0, "maximum": 1},
        "coverage_rmse": {"type": "number", "minimum": 0},
    },
}

COMPARE_REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "version", "keep", "reports", "overlap"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "reports": {"type": "array", "items": SUBSET_REPORT_SCHEMA},
        "overlap": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["a", "b", "count"],
                "properties": {"a": {"type": "string"}, "b": {"type": "string"},
                               "count": {"type": "integer", "minimum": 0}},
            },
        },
    },
}


class UsageError(CDPruneError):
    code = "UsageError"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _finite(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return values


def _emit(doc, args):
    text = json.dumps(doc, indent=2 if getattr(args, "pretty", False) else None)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _thread_limit(args):
    threads = getattr(args, "threads", None)
    if threads is None and os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise InvalidRequest(f"{THREADS_ENV} must be an integer")
    if threads is None:
        return contextlib.nullcontext()
    if threads < 1:
        raise InvalidRequest("thread count must be >= 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=threads)


def _load_inputs(args):
    E = kernel.as_matrix(io.read_matrix(args.tokens))
    query = io.read_matrix(args.query) if getattr(args, "query", None) else None
    relevance = io.read_matrix(args.relevance) if getattr(args, "relevance", None) else None
    return E, query, relevance


def cmd_prune(args):
    E, query, relevance = _load_inputs(args)
    t0 = time.perf_counter()
    result = pipeline.prune(
        E, args.keep, query=query, relevance=relevance, mode=args.mode,
        theta=args.theta, seed=args.seed, kernel_mode=args.kernel_mode,
        relevance_floor=args.relevance_floor, strict=args.strict,
    )
    elapsed = (time.perf_counter() - t0) * 1e3
    mode = args.mode or ("cdp" if query is not None or relevance is not None else "dpp")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "mode": mode,
        "selected": [int(i) for i in result.selected],
        "gains": [float(g) for g in result.gains],
        "log_det": _finite(result.log_det),
        "fill_count": int(result.fill_count),
        "rows_fetched": int(result.rows_fetched),
        "elapsed_ms": elapsed,
        "config": {
            "tokens": args.tokens,
            "query": args.query,
            "relevance": args.relevance,
            "keep": args.keep,
            "mode": mode,
            "theta": args.theta,
            "seed": args.seed,
            "kernel_mode": args.kernel_mode,
            "relevance_floor": args.relevance_floor,
            "strict": args.strict,
        },
    }
    _emit(doc, args)


def compare(E, keep, strategies, query=None, relevance=None, theta=None, seed=0,
            kernel_mode="auto", relevance_floor=None):
    """Run each strategy on the same inputs; return the compare document."""
    E = kernel.as_matrix(E)
    r = pipeline.resolve_relevance(E, query, relevance, relevance_floor)
    r_eval = r if r is not None else np.ones(E.shape[0])
    K_eval = kernel.cosine_kernel(E, mode=kernel_mode)
    reports, picks = [], {}
    for name in strategies:
        extra = {"relevance": r} if name in ("cdp", "topk") else {}
        result = pipeline.prune(E, keep, mode=name, theta=theta if name == "cdp" else None,
                                seed=seed, kernel_mode=kernel_mode, **extra)
        rep = metrics.evaluate_subset(E, r_eval, K_eval, result.selected, strategy=name)
        doc = rep.to_dict()
        doc["log_det"] = _finite(doc["log_det"])
        doc["fill_count"] = int(result.fill_count)
        reports.append(doc)
        picks[name] = set(result.selected)
    overlap = [{"a": a, "b": b, "count": len(picks[a] & picks[b])}
               for a, b in itertools.combinations(strategies, 2)]
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "keep": keep,
        "log_det_kernel": "cosine",
        "reports": reports,
        "overlap": overlap,
    }


def cmd_compare(args):
    E, query, relevance = _load_inputs(args)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    bad = [s for s in strategies if s not in pipeline.STRATEGIES]
    if bad or not strategies:
        raise InvalidRequest(f"unknown strategies {bad}; choose from {pipeline.STRATEGIES}")
    if len(set(strategies)) != len(strategies):
        raise InvalidRequest("strategies must not repeat")
    if ({"cdp", "topk"} & set(strategies)) and query is None and relevance is None:
        raise InvalidRequest("cdp and topk need --query or --relevance")
    doc = compare(E, args.keep, strategies, query=query, relevance=relevance,
                  theta=args.theta, seed=args.seed, kernel_mode=args.kernel_mode,
                  relevance_floor=args.relevance_floor)
    if args.pretty and not args.json:
        print(f"{'strategy':<10}{'log_det':>12}{'min_dist':>10}{'mean_rel':>10}{'coverage':>10}")
        for rep in doc["reports"]:
            ld = "null" if rep["log_det"] is None else f"{rep['log_det']:.4f}"
            print(f"{rep['strategy']:<10}{ld:>12}{rep['min_pairwise_distance']:>10.4f}"
                  f"{rep['mean_relevance']:>10.4f}{rep['coverage_rmse']:>10.4f}")
        return
    _emit(doc, args)


def bench(ns, ms, d, repeats=5, kernel_mode="lazy", seed=0, budget_ms=None):
    """Median greedy selection time on Gaussian embeddings for each (n, m) cell."""
    cells = []
    for n in ns:
        E = Stream(seed).normal(n * d).reshape(n, d)
        K = kernel.cosine_kernel(E, mode=kernel_mode)
        for m in ms:
            if m > n:
                continue
            times = []
            for _ in range(repeats):
                result = dpp_map.greedy_map(K, m)
                times.append(result.elapsed)
            cell = {
                "n": n, "m": m, "d": d,
                "median_ms": statistics.median(times),
                "min_ms": min(times),
                "rows_fetched": result.rows_fetched,
                "fill_count": result.fill_count,
            }
            if budget_ms is not None:
                cell["within_budget"] = cell["median_ms"] <= budget_ms
            cells.append(cell)
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "kernel_mode": kernel_mode,
        "repeats": repeats,
        "seed": seed,
        "cells": cells,
    }


def cmd_bench(args):
    if args.d < 1 or args.repeats < 1:
        raise InvalidRequest("--d and --repeats must be positive")
    doc = bench(args.n, args.m, args.d, args.repeats, args.kernel_mode, args.seed, args.budget_ms)
    if args.pretty and not args.json:
        print(f"{'n':>7}{'m':>6}{'median_ms':>12}{'rows':>6}{'fill':>6}")
        for c in doc["cells"]:
            print(f"{c['n']:>7}{c['m']:>6}{c['median_ms']:>12.3f}{c['rows_fetched']:>6}{c['fill_count']:>6}")
        return
    _emit(doc, args)


def cmd_gen(args):
    spec = io.SyntheticSpec(n=args.n, d=args.d, clusters=args.clusters,
                            cluster_spread=args.spread, relevant_cluster=args.relevant_cluster,
                            seed=args.seed)
    E, q, labels = io.generate_synthetic(spec)
    io.write_matrix(args.tokens_out, E)
    io.write_matrix(args.query_out, q[None, :])
    if args.labels_out:
        io.write_matrix(args.labels_out, labels.astype(np.float64)[:, None])
    _emit({
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "rng": SCHEME,
        "spec": dataclasses.asdict(spec),
        "tokens": args.tokens_out,
        "query": args.query_out,
        "labels": args.labels_out,
    }, args)


def cmd_render(args):
    if args.relevance:
        r = kernel.as_vector(io.read_matrix(args.relevance), "relevance")
        if r.min() < 0.0 or r.max() > 1.0:
            r = kernel.minmax_normalize(r)
    elif args.tokens and args.query:
        E, query, _ = _load_inputs(args)
        r = pipeline.resolve_relevance(E, query=query)
    else:
        raise InvalidRequest("render needs --relevance, or --tokens with --query")
    io.render_relevance_map(r, args.height, args.width, args.image, scale=args.scale)
    _emit({"schema_version": SCHEMA_VERSION, "version": __version__, "image": args.image,
           "width": args.width * args.scale, "height": args.height * args.scale}, args)


def _common(p, query=True):
    p.add_argument("--tokens", required=True, help="token embeddings (CDM1 or CSV), one row per token")
    if query:
        p.add_argument("--query", help="query vector(s); several rows are averaged")
        p.add_argument("--relevance", help="precomputed relevance already normalized to [0, 1]")
    p.add_argument("--keep", type=int, required=True, help="number of tokens to retain")
    p.add_argument("--theta", type=float, help="balance factor in [0, 1) for cdp")
    p.add_argument("--seed", type=int, default=0, help="seed for the random strategy")
    p.add_argument("--kernel-mode", choices=kernel.MODES, default="auto",
                   help="auto is lazy above 4096 tokens")
    p.add_argument("--relevance-floor", type=float, help="lower clamp after normalization")


def build_parser():
    parser = _Parser(prog="cdprune", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cdprune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, func, help_ in (("prune", cmd_prune, "select tokens to keep"),
                              ("compare", cmd_compare, "score several strategies on one input")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "prune":
            p.add_argument("--mode", choices=pipeline.STRATEGIES,
                           help="default: cdp with a query or relevance, else dpp")
            p.add_argument("--strict", action="store_true", help="fail (exit 3) on rank deficiency")
        else:
            p.add_argument("--strategies", default="dpp,cdp,maxmin,topk,random",
                           help="comma-separated strategy names")
            p.add_argument("--json", action="store_true", help="force JSON even with --pretty")
        p.add_argument("--threads", type=int, help=f"BLAS thread cap (else ${THREADS_ENV})")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--pretty", action="store_true", help="human-readable output")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="time greedy selection over (n, m) cells")
    p.add_argument("--n", type=_int_list, default=[1024], help="comma-separated token counts")
    p.add_argument("--m", type=_int_list, default=[32, 64, 128], help="comma-separated budgets")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--kernel-mode", choices=kernel.MODES, default="lazy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget-ms", type=float, help="flag cells whose median exceeds this")
    p.add_argument("--threads", type=int)
    p.add_argument("--json", action="store_true")
    p.add_argument("--pretty", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write a synthetic clustered instance")
    defaults = io.SyntheticSpec()
    p.add_argument("--n", type=int, default=defaults.n)
    p.add_argument("--d", type=int, default=defaults.d)
    p.add_argument("--clusters", type=int, default=defaults.clusters)
    p.add_argument("--spread", type=float, default=defaults.cluster_spread,
                   help="per-coordinate noise scale around each center")
    p.add_argument("--relevant-cluster", type=int, default=defaults.relevant_cluster)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--tokens-out", required=True)
    p.add_argument("--query-out", required=True)
    p.add_argument("--labels-out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("render", help="draw a relevance heatmap as PPM")
    p.add_argument("--relevance", help="normalized relevance, one value per cell")
    p.add_argument("--tokens", help="embeddings to score against --query instead")
    p.add_argument("--query")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--scale", type=int, default=1, help="pixels per cell side")
    p.add_argument("--image", required=True, help="output .ppm path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        with _thread_limit(args):
            args.func(args)
    except CDPruneError as exc:
        _fail(exc.code, exc.message or str(exc))
        return exc.exit_code
    except OSError as exc:
        _fail("IOError", str(exc))
        return 2
    return 0


def _fail(code, message):
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
