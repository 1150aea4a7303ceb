"""Relevance scores and (conditional) cosine-similarity kernels.

A :class:`KernelSource` represents the matrix

    L~[i, j] = scale * w[i] * B[i, j] * w[j]

where ``B`` is either the cosine Gram matrix of unit-normalized embeddings
or an arbitrary precomputed PSD matrix, and ``w`` is a per-token weight
(all ones for the unconditional kernel, the normalized relevance for the
conditional kernel, ``exp(alpha * relevance)`` for the balanced variant).
Entries are served either from a materialized ``n x n`` cache (dense mode)
or recomputed one row at a time (lazy mode).
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyQuerySet,
    IndexOutOfRange,
    InvalidRelevance,
    InvalidTheta,
    NonFiniteValue,
    RowNormUnderflow,
)

NORM_FLOOR = 1e-12
TIE_TOL = 1e-12
LAZY_THRESHOLD = 4096
MODES = ("dense", "lazy", "auto")


def as_matrix(values, name="embeddings"):
    """Return ``values`` as a finite 2-D float64 array (32-bit input widens)."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains NaN or Inf")
    return arr


def as_vector(values, name="vector"):
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DimensionMismatch(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains NaN or Inf")
    return arr


def normalize_rows(E):
    """Scale every row of ``E`` to unit Euclidean norm.

    Raises:
        RowNormUnderflow: if some row has norm <= 1e-12.
    """
    E = as_matrix(E)
    norms = np.sqrt(np.einsum("ij,ij->i", E, E))
    bad = np.flatnonzero(norms <= NORM_FLOOR)
    if bad.size:
        raise RowNormUnderflow(int(bad[0]), float(norms[bad[0]]))
    return E / norms[:, None]


def _unit_query(q, d):
    q = as_vector(q, "query")
    if q.shape[0] != d:
        raise DimensionMismatch(f"query has dimension {q.shape[0]}, embeddings have {d}")
    norm = float(np.sqrt(q @ q))
    if norm <= NORM_FLOOR:
        raise RowNormUnderflow(0, norm)
    return q / norm


def relevance(E, q):
    """Cosine similarity between each embedding row and the query vector."""
    U = normalize_rows(E)
    r = U @ _unit_query(q, U.shape[1])
    return np.clip(r, -1.0, 1.0)


def average_query(Q):
    """Element-wise mean of a set of query vectors.

    ``Q`` is a sequence of equal-length vectors or a 2-D array with one
    vector per row.
    """
    if Q is None or len(Q) == 0:
        raise EmptyQuerySet("query set is empty")
    rows = [as_vector(q, "query") for q in Q]
    d = rows[0].shape[0]
    if any(r.shape[0] != d for r in rows):
        raise DimensionMismatch("query vectors have different dimensions")
    mean = np.mean(np.stack(rows), axis=0)
    norm = float(np.sqrt(mean @ mean))
    if norm <= NORM_FLOOR:
        raise RowNormUnderflow(0, norm)
    return mean


def minmax_normalize(r, floor=None):
    """Affinely map ``r`` onto [0, 1].

    A constant input (spread <= 1e-12) carries no relevance signal and maps
    to all ones, which leaves the kernel unchanged under conditioning.
    ``floor`` optionally lifts the normalized scores to at least that value so
    the least relevant token stays selectable.
    """
    r = as_vector(r, "relevance")
    lo, hi = float(r.min()), float(r.max())
    if hi - lo <= TIE_TOL:
        out = np.ones_like(r)
    else:
        out = (r - lo) / (hi - lo)
    if floor is not None:
        if not 0.0 <= floor <= 1.0:
            raise InvalidRelevance(f"relevance floor {floor} outside [0, 1]")
        np.maximum(out, floor, out=out)
    return out


def _check_normalized(r, n):
    r = as_vector(r, "relevance")
    if r.shape[0] != n:
        raise DimensionMismatch(f"relevance has length {r.shape[0]}, kernel has {n} tokens")
    if r.min() < 0.0 or r.max() > 1.0:
        raise InvalidRelevance("normalized relevance must lie in [0, 1]")
    return r


class KernelSource:
    """Immutable provider of kernel entries; see the module docstring.

    Build instances with :func:`cosine_kernel` or :meth:`from_matrix` and
    derive conditioned variants with :func:`condition_kernel` and
    :func:`condition_kernel_balanced`.
    """

    def __init__(self, *, unit=None, matrix=None, weights=None, relevance=None,
                 scale=1.0, mode="auto"):
        if (unit is None) == (matrix is None):
            raise ValueError("exactly one of unit or matrix is required")
        base = unit if unit is not None else matrix
        n = base.shape[0]
        if mode not in MODES:
            raise ValueError(f"unknown kernel mode {mode!r}")
        if mode == "auto":
            mode = "lazy" if n > LAZY_THRESHOLD else "dense"
        self._unit = unit
        self._matrix = matrix
        self._weights = np.ones(n) if weights is None else weights
        self._relevance = relevance
        self._scale = float(scale)
        self._mode = mode
        self._n = n
        for arr in (unit, matrix, self._weights, relevance):
            if arr is not None:
                arr.flags.writeable = False
        self._dense = None
        if mode == "dense":
            self._dense = self._materialize()
            self._dense.flags.writeable = False

    @classmethod
    def from_matrix(cls, L, mode="dense"):
        """Wrap a precomputed symmetric PSD matrix."""
        L = as_matrix(L, "kernel")
        if L.shape[0] != L.shape[1]:
            raise DimensionMismatch(f"kernel must be square, got {L.shape}")
        return cls(matrix=L.copy(), mode=mode)

    def _replace(self, **changes):
        fields = dict(unit=self._unit, matrix=self._matrix, weights=self._weights,
                      relevance=self._relevance, scale=self._scale, mode=self._mode)
        fields.update(changes)
        return KernelSource(**fields)

    @property
    def n(self):
        return self._n

    @property
    def mode(self):
        return self._mode

    @property
    def weights(self):
        return self._weights

    @property
    def relevance(self):
        """Normalized relevance if conditioned, else ``None``."""
        return self._relevance

    @property
    def unit_embeddings(self):
        return self._unit

    @property
    def scale(self):
        return self._scale

    def with_mode(self, mode):
        return self._replace(mode=mode)

    def scaled(self, factor):
        """The same kernel multiplied by a positive scalar."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return self._replace(scale=self._scale * factor)

    def _materialize(self):
        if self._unit is not None:
            B = self._unit @ self._unit.T
            B = 0.5 * (B + B.T)
            np.fill_diagonal(B, 1.0)
        else:
            B = self._matrix.copy()
        w = self._weights
        B *= (self._scale * w)[:, None]
        B *= w[None, :]
        return B

    def _check_index(self, j):
        if not (isinstance(j, (int, np.integer)) and 0 <= j < self._n):
            raise IndexOutOfRange(f"token index {j!r} outside [0, {self._n})")
        return int(j)

    def row(self, j):
        """Row ``j`` of the kernel as a fresh length-n array."""
        j = self._check_index(j)
        if self._dense is not None:
            return self._dense[j].copy()
        if self._unit is not None:
            out = self._unit @ self._unit[j]
            out[j] = 1.0
        else:
            out = self._matrix[j].copy()
        out *= self._weights
        out *= self._scale * self._weights[j]
        return out

    def entry(self, i, j):
        i, j = self._check_index(i), self._check_index(j)
        if self._dense is not None:
            return float(self._dense[i, j])
        if i == j:
            return float(self.diagonal()[i])
        return float(self.row(i)[j])

    def diagonal(self):
        if self._dense is not None:
            return np.diagonal(self._dense).copy()
        w = self._weights
        if self._unit is not None:
            return (self._scale * w) * w
        return (self._scale * w) * w * np.diagonal(self._matrix)

    def dense(self):
        """The full ``n x n`` matrix (cached in dense mode, built otherwise)."""
        if self._dense is not None:
            return self._dense.copy()
        return self._materialize()

    def submatrix(self, S):
        """Principal submatrix on the index list ``S``."""
        S = [self._check_index(i) for i in S]
        if not S:
            return np.zeros((0, 0))
        if self._dense is not None:
            return self._dense[np.ix_(S, S)].copy()
        idx = np.asarray(S)
        if self._unit is not None:
            U = self._unit[idx]
            B = U @ U.T
            B = 0.5 * (B + B.T)
            np.fill_diagonal(B, 1.0)
        else:
            B = self._matrix[np.ix_(idx, idx)].copy()
        w = self._weights[idx]
        B *= (self._scale * w)[:, None]
        B *= w[None, :]
        return B

    def __repr__(self):
        kind = "cosine" if self._unit is not None else "matrix"
        cond = "conditional" if self._relevance is not None else "unconditional"
        return f"KernelSource(n={self._n}, {kind}, {cond}, mode={self._mode})"


def cosine_kernel(E, mode="auto"):
    """Pairwise cosine similarity kernel of the embedding rows."""
    return KernelSource(unit=normalize_rows(E), mode=mode)


def condition_kernel(K, r_norm):
    """Reweight ``K`` to ``diag(r) K diag(r)`` for normalized relevance ``r``."""
    r = _check_normalized(r_norm, K.n)
    return K._replace(weights=K.weights * r, relevance=r)


def balance_alpha(theta):
    if not 0.0 <= theta < 1.0:
        raise InvalidTheta(f"theta={theta} outside [0, 1)")
    return theta / (2.0 * (1.0 - theta))


def condition_kernel_balanced(K, r_norm, theta):
    """Reweight ``K`` by ``exp(alpha * r)`` with ``alpha = theta / (2 (1 - theta))``.

    The log-determinant of any subset then equals ``2 alpha * sum(r[S])``
    plus the unconditioned log-determinant. ``theta = 0`` is fully neutral:
    relevance gets no weight, not even in the rank-deficiency fill order.
    """
    alpha = balance_alpha(theta)
    r = _check_normalized(r_norm, K.n)
    if alpha == 0.0:
        return K
    return K._replace(weights=K.weights * np.exp(alpha * r), relevance=r)


def kernel_row(K, j):
    return K.row(j)
