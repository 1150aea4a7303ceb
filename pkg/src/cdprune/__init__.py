"""Conditional-DPP token pruning.

Builds an instruction-conditioned cosine kernel over token embeddings and
selects a diverse, relevant subset by greedy MAP inference with incremental
Cholesky updates.

    >>> import numpy as np
    >>> from cdprune import prune
    >>> E = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    >>> prune(E, 2).selected
    [0, 1]
"""

__version__ = "0.1.0"

from .baselines import StrategyConfig, maxmin_greedy, random_select, topk_relevance
from .dpp_map import (
    CholeskyState,
    SelectionResult,
    brute_force_map,
    greedy_map,
    iter_greedy,
    log_det_subset,
    naive_greedy,
)
from .kernel import (
    KernelSource,
    average_query,
    condition_kernel,
    condition_kernel_balanced,
    cosine_kernel,
    kernel_row,
    minmax_normalize,
    normalize_rows,
    relevance,
)
from .metrics import SubsetReport, evaluate_subset
from .pipeline import prune

__all__ = [
    "CholeskyState",
    "KernelSource",
    "SelectionResult",
    "StrategyConfig",
    "SubsetReport",
    "average_query",
    "brute_force_map",
    "condition_kernel",
    "condition_kernel_balanced",
    "cosine_kernel",
    "evaluate_subset",
    "greedy_map",
    "iter_greedy",
    "kernel_row",
    "log_det_subset",
    "maxmin_greedy",
    "minmax_normalize",
    "naive_greedy",
    "normalize_rows",
    "prune",
    "random_select",
    "relevance",
    "topk_relevance",
]
