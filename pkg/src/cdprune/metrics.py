"""Subset quality scores used by the strategy comparison."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dpp_map import log_det_subset
from .errors import IndexOutOfRange, SingularSubmatrix
from .kernel import as_vector, normalize_rows


@dataclass
class SubsetReport:
    strategy: str
    selected: list
    log_det: float | None
    min_pairwise_distance: float
    mean_relevance: float
    coverage_rmse: float

    def to_dict(self):
        return asdict(self)


def nearest_selected_distance(U, S):
    """Cosine distance from every token to its closest member of ``S``."""
    dist = 1.0 - U @ U[S].T
    out = np.maximum(dist.min(axis=1), 0.0)
    out[S] = 0.0
    return out


def evaluate_subset(E, r_norm, K, S, strategy=""):
    """Diversity, relevance and coverage of the subset ``S``.

    ``min_pairwise_distance`` is 0 for a single token. ``coverage_rmse`` is the
    mean, over unselected tokens, of the cosine distance to the nearest
    selected token (0 when everything is selected). ``log_det`` is ``None``
    when ``K[S, S]`` is numerically singular.
    """
    U = normalize_rows(E)
    n = U.shape[0]
    r = as_vector(r_norm, "relevance")
    S = [int(i) for i in S]
    if not S or any(not 0 <= i < n for i in S) or len(set(S)) != len(S):
        raise IndexOutOfRange(f"subset must be non-empty distinct indices in [0, {n})")
    try:
        log_det = log_det_subset(K, S)
    except SingularSubmatrix:
        log_det = None

    if len(S) > 1:
        G = 1.0 - U[S] @ U[S].T
        iu = np.triu_indices(len(S), k=1)
        min_dist = max(float(G[iu].min()), 0.0)
    else:
        min_dist = 0.0

    unselected = np.ones(n, dtype=bool)
    unselected[S] = False
    if unselected.any():
        coverage = float(nearest_selected_distance(U, S)[unselected].mean())
    else:
        coverage = 0.0

    return SubsetReport(
        strategy=strategy,
        selected=S,
        log_det=log_det,
        min_pairwise_distance=min_dist,
        mean_relevance=float(r[S].mean()),
        coverage_rmse=coverage,
    )
