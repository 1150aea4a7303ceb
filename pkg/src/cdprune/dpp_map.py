"""Greedy MAP inference for (conditional) DPPs.

:func:`greedy_map` is the incremental-Cholesky greedy algorithm: each
candidate ``i`` keeps the row ``c_i`` of the Cholesky factor of
``L[S + [i], S + [i]]`` together with its residual ``d_i**2``, so that adding
``i`` multiplies ``det(L[S, S])`` by ``d_i**2``. After ``j`` joins ``S`` one
kernel row is fetched and every candidate is updated in ``O(|S|)``:

    e_i   = (L[j, i] - <c_j, c_i>) / d_j
    c_i  <- [c_i, e_i]
    d_i^2 <- d_i^2 - e_i^2

for ``O(n m^2)`` total work. :func:`naive_greedy` and :func:`brute_force_map`
evaluate determinants directly and exist to check it.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetOutOfRange,
    IndexOutOfRange,
    InstanceTooLarge,
    RankDeficient,
    SingularSubmatrix,
)

RANK_EPS = 1e-12
BRUTE_FORCE_LIMIT = 10**6
_CHUNK = 20000


@dataclass
class SelectionResult:
    """Outcome of a subset selection.

    ``gains`` holds one value per index chosen by the strategy itself (for
    the DPP routines, ``log d_j**2`` at the moment ``j`` was picked), so
    ``len(gains) == len(selected) - fill_count`` for greedy DPP results.
    Indices appended by the rank-deficiency fallback come last.
    """

    selected: list
    gains: list = field(default_factory=list)
    log_det: float | None = None
    fill_count: int = 0
    elapsed: float = 0.0
    rows_fetched: int = 0


def check_budget(m, n):
    if not (isinstance(m, (int, np.integer)) and 1 <= m <= n):
        raise BudgetOutOfRange(f"budget m={m!r} must satisfy 1 <= m <= n={n}")
    return int(m)


class CholeskyState:
    """Incremental factorization state for one greedy run.

    ``d_sq`` holds the raw residuals; they may dip a hair below zero from
    rounding and such candidates are never selectable.
    """

    def __init__(self, K, m):
        self.kernel = K
        self.d_sq = np.array(K.diagonal(), dtype=np.float64)
        self.c = np.zeros((m, K.n))
        self.excluded = np.zeros(K.n, dtype=bool)
        self.selected = []
        self.eps = RANK_EPS * max(float(self.d_sq.max()), 0.0)
        self.rows_fetched = 0

    def c_row(self, i):
        return self.c[: len(self.selected), i].copy()

    def residuals(self):
        return np.maximum(self.d_sq, 0.0)

    def best(self):
        """Lowest-index candidate with maximal residual, or ``None`` if rank is exhausted."""
        scores = np.where(self.excluded, -np.inf, self.d_sq)
        j = int(np.argmax(scores))
        if not scores[j] > self.eps:
            return None
        return j

    def add(self, j):
        k = len(self.selected)
        dj_sq = float(self.d_sq[j])
        row = self.kernel.row(j)
        self.rows_fetched += 1
        if k:
            row -= self.c[:k, j] @ self.c[:k]
        e = row / math.sqrt(dj_sq)
        self.c[k] = e
        self.d_sq -= e * e
        self.excluded[j] = True
        self.selected.append(j)
        return math.log(dj_sq)


def iter_greedy(K, m):
    """Yield ``(j, gain, state)`` after each greedy pick.

    Stops early once no candidate has residual above the rank threshold
    ``1e-12 * max(diag(K))``.
    """
    m = check_budget(m, K.n)
    state = CholeskyState(K, m)
    while len(state.selected) < m:
        j = state.best()
        if j is None:
            return
        gain = state.add(j)
        yield j, gain, state


def fill_by_relevance(K, excluded, count):
    """Unselected indices of highest relevance (lowest index on ties)."""
    if count <= 0:
        return []
    rel = K.relevance if K.relevance is not None else np.ones(K.n)
    cand = np.flatnonzero(~np.asarray(excluded))
    order = np.argsort(-rel[cand], kind="stable")
    return [int(i) for i in cand[order[:count]]]


def _finish(K, m, selected, gains, log_det, strict, t0, rows_fetched=0):
    missing = m - len(selected)
    if missing and strict:
        raise RankDeficient(
            f"kernel rank exhausted after {len(selected)} of {m} selections")
    excluded = np.zeros(K.n, dtype=bool)
    excluded[selected] = True
    fill = fill_by_relevance(K, excluded, missing)
    return SelectionResult(
        selected=list(selected) + fill,
        gains=list(gains),
        log_det=log_det,
        fill_count=len(fill),
        elapsed=(time.perf_counter() - t0) * 1e3,
        rows_fetched=rows_fetched,
    )


def greedy_map(K, m, strict=False):
    """Select ``m`` indices greedily maximizing ``log det K[S, S]``.

    Args:
        K: a :class:`~cdprune.kernel.KernelSource`.
        m: number of indices to return, ``1 <= m <= K.n``.
        strict: raise :class:`RankDeficient` instead of filling by relevance
            when the kernel rank runs out before ``m`` picks.
    """
    t0 = time.perf_counter()
    m = check_budget(m, K.n)
    selected, gains = [], []
    state = None
    for j, gain, state in iter_greedy(K, m):
        selected.append(j)
        gains.append(gain)
    rows = state.rows_fetched if state is not None else 0
    return _finish(K, m, selected, gains, float(sum(gains)), strict, t0, rows)


def naive_greedy(K, m, strict=False):
    """Greedy MAP by direct determinant evaluation; the oracle for :func:`greedy_map`.

    Each step scores every remaining candidate by
    ``log det K[S+i] - log det K[S]`` using batched factorizations, applies
    the same rank threshold and lowest-index tie rule. Meant for n <= 256.
    """
    t0 = time.perf_counter()
    m = check_budget(m, K.n)
    L = K.dense()
    n = K.n
    eps = RANK_EPS * max(float(np.diagonal(L).max()), 0.0)
    log_eps = math.log(eps) if eps > 0 else math.inf
    selected, gains = [], []
    current = 0.0
    while len(selected) < m:
        cand = np.array([i for i in range(n) if i not in selected])
        idx = np.empty((cand.size, len(selected) + 1), dtype=np.int64)
        idx[:, :-1] = selected
        idx[:, -1] = cand
        sign, ld = np.linalg.slogdet(L[idx[:, :, None], idx[:, None, :]])
        gain = ld - current
        ok = (sign > 0) & (gain > log_eps)
        if not ok.any():
            break
        k = int(np.argmax(np.where(ok, gain, -np.inf)))
        selected.append(int(cand[k]))
        gains.append(float(gain[k]))
        current = float(ld[k])
    return _finish(K, m, selected, gains, current, strict, t0)


def brute_force_map(K, m):
    """Exact MAP by enumerating all ``C(n, m)`` subsets.

    Returns the sorted subset of largest determinant; ties go to the
    lexicographically smallest index tuple.
    """
    t0 = time.perf_counter()
    m = check_budget(m, K.n)
    total = math.comb(K.n, m)
    if total > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(f"C({K.n}, {m}) = {total} subsets exceeds {BRUTE_FORCE_LIMIT}")
    L = K.dense()
    best, best_ld = None, -math.inf
    combos = itertools.combinations(range(K.n), m)
    while True:
        chunk = list(itertools.islice(combos, _CHUNK))
        if not chunk:
            break
        idx = np.array(chunk, dtype=np.int64)
        sign, ld = np.linalg.slogdet(L[idx[:, :, None], idx[:, None, :]])
        ld = np.where(sign > 0, ld, -np.inf)
        k = int(np.argmax(ld))
        if best is None or ld[k] > best_ld:
            best, best_ld = list(chunk[k]), float(ld[k])
    return SelectionResult(
        selected=best,
        log_det=best_ld,
        elapsed=(time.perf_counter() - t0) * 1e3,
    )


def log_det_subset(K, S):
    """``log det K[S, S]`` via Cholesky factorization.

    Raises:
        SingularSubmatrix: if the submatrix is not numerically positive definite.
    """
    S = [int(i) for i in S]
    if len(set(S)) != len(S):
        raise IndexOutOfRange("subset contains repeated indices")
    if not S:
        return 0.0
    sub = K.submatrix(S)
    try:
        chol = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError as exc:
        raise SingularSubmatrix(f"submatrix on {len(S)} indices is not positive definite") from exc
    diag = np.diagonal(chol)
    if not np.all(diag > 0):
        raise SingularSubmatrix("non-positive pivot in Cholesky factorization")
    return float(2.0 * np.sum(np.log(diag)))
