"""Comparison strategies: max-min diversity, relevance top-k, seeded random."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dpp_map import SelectionResult, check_budget
from .kernel import as_vector, normalize_rows
from .rng import Stream

KINDS = ("maxmin", "topk_relevance", "random", "dpp", "cdp")


@dataclass(frozen=True)
class StrategyConfig:
    kind: str
    seed: int = 0
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {KINDS}")
        if self.theta is not None and self.kind != "cdp":
            raise ValueError("theta applies only to the cdp strategy")


def maxmin_greedy(E, m):
    """Greedy max-min dispersion under cosine distance.

    Starts from index 0, then repeatedly adds the token whose minimum
    distance ``1 - cos`` to the selected set is largest (lowest index on
    ties). ``gains`` records that minimum distance for each pick after the
    seed, so it has ``m - 1`` entries.
    """
    t0 = time.perf_counter()
    U = normalize_rows(E)
    n = U.shape[0]
    m = check_budget(m, n)
    selected = [0]
    gains = []
    nearest = 1.0 - U @ U[0]
    nearest[0] = -np.inf
    for _ in range(m - 1):
        j = int(np.argmax(nearest))
        gains.append(max(float(nearest[j]), 0.0))
        selected.append(j)
        np.minimum(nearest, 1.0 - U @ U[j], out=nearest)
        nearest[selected] = -np.inf
    return SelectionResult(selected=selected, gains=gains,
                           elapsed=(time.perf_counter() - t0) * 1e3)


def topk_relevance(r_norm, m):
    """The ``m`` most relevant indices in descending order (lowest index on ties)."""
    t0 = time.perf_counter()
    r = as_vector(r_norm, "relevance")
    m = check_budget(m, r.shape[0])
    order = np.argsort(-r, kind="stable")[:m]
    return SelectionResult(selected=[int(i) for i in order],
                           gains=[float(r[i]) for i in order],
                           elapsed=(time.perf_counter() - t0) * 1e3)


def random_select(n, m, seed):
    """``m`` distinct indices by a partial Fisher-Yates shuffle on the seeded stream."""
    t0 = time.perf_counter()
    m = check_budget(m, n)
    words = Stream(seed).words(m)
    perm = list(range(n))
    for k in range(m):
        j = k + int(words[k] % np.uint64(n - k))
        perm[k], perm[j] = perm[j], perm[k]
    return SelectionResult(selected=perm[:m], elapsed=(time.perf_counter() - t0) * 1e3)
