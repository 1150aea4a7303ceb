"""End-to-end token pruning: embeddings in, ``keep`` row indices out."""

from __future__ import annotations

import numpy as np

from . import baselines, dpp_map, kernel
from .errors import DimensionMismatch, InvalidRelevance, InvalidRequest

STRATEGIES = ("cdp", "dpp", "maxmin", "topk", "random")


def query_vector(Q, d):
    """Reduce a query file's matrix to one length-``d`` vector (averaging rows)."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.shape[1] != d and Q.shape[0] == d and Q.shape[1] == 1:
        Q = Q.T
    if Q.shape[1] != d:
        raise DimensionMismatch(f"query has dimension {Q.shape[1]}, embeddings have {d}")
    return kernel.average_query(list(Q))


def resolve_relevance(E, query=None, relevance=None, floor=None):
    """Normalized relevance from a query (vector or rows to average) or given directly.

    Returns ``None`` when neither is supplied.
    """
    if query is not None and relevance is not None:
        raise InvalidRequest("pass either a query or a precomputed relevance, not both")
    if query is not None:
        q = query_vector(query, np.shape(E)[1])
        return kernel.minmax_normalize(kernel.relevance(E, q), floor=floor)
    if relevance is not None:
        r = kernel.as_vector(relevance, "relevance")
        if r.shape[0] != np.shape(E)[0]:
            raise DimensionMismatch(f"relevance has {r.shape[0]} entries for {np.shape(E)[0]} tokens")
        if r.min() < 0.0 or r.max() > 1.0:
            raise InvalidRelevance("precomputed relevance must already be normalized to [0, 1]")
        if floor is not None:
            r = np.maximum(r, floor)
        return r
    return None


def build_kernel(E, r_norm=None, theta=None, kernel_mode="auto"):
    K = kernel.cosine_kernel(E, mode=kernel_mode)
    if r_norm is None:
        return K
    if theta is not None:
        return kernel.condition_kernel_balanced(K, r_norm, theta)
    return kernel.condition_kernel(K, r_norm)


def prune(E, keep, *, query=None, relevance=None, mode=None, theta=None, seed=0,
          kernel_mode="auto", relevance_floor=None, strict=False):
    """Select ``keep`` token indices from the embedding matrix ``E``.

    ``mode`` defaults to ``"cdp"`` when a query or relevance is given and to
    ``"dpp"`` otherwise. ``elapsed`` on the result covers selection only.
    """
    E = kernel.as_matrix(E)
    has_condition = query is not None or relevance is not None
    if mode is None:
        mode = "cdp" if has_condition else "dpp"
    if mode not in STRATEGIES:
        raise InvalidRequest(f"unknown mode {mode!r}; expected one of {STRATEGIES}")
    if theta is not None and mode != "cdp":
        raise InvalidRequest("theta is only valid with mode cdp")
    if mode in ("cdp", "topk") and not has_condition:
        raise InvalidRequest(f"mode {mode} needs a query or relevance input")
    dpp_map.check_budget(keep, E.shape[0])

    r = resolve_relevance(E, query, relevance, relevance_floor)
    if mode == "cdp":
        K = build_kernel(E, r, theta, kernel_mode)
        return dpp_map.greedy_map(K, keep, strict=strict)
    if mode == "dpp":
        return dpp_map.greedy_map(kernel.cosine_kernel(E, mode=kernel_mode), keep, strict=strict)
    if mode == "maxmin":
        return baselines.maxmin_greedy(E, keep)
    if mode == "topk":
        return baselines.topk_relevance(r, keep)
    return baselines.random_select(E.shape[0], keep, seed)
