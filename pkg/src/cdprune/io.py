"""Matrix files, synthetic instances and relevance heatmaps.

CDM1 layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"CDM1"
    4       1     dtype: 0 = float32, 1 = float64
    5       3     reserved, zero
    8       8     rows (uint64)
    16      8     cols (uint64)
    24      ...   rows * cols values, row-major, little-endian

Files without the magic are parsed as CSV: one row per line, comma
separated decimal numbers, LF or CRLF line endings.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    GridMismatch,
    InvalidSpec,
    NonRectangularCsv,
    TruncatedPayload,
)
from .kernel import as_vector
from .rng import Stream

MAGIC = b"CDM1"
HEADER = struct.Struct("<4sB3xQQ")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}


def write_matrix(path, M, dtype="float64"):
    M = np.asarray(M)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError("only 2-D matrices can be written")
    dt = np.dtype(dtype).newbyteorder("<")
    if dt not in _CODES:
        raise ValueError(f"unsupported dtype {dtype!r}")
    rows, cols = M.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, _CODES[dt], rows, cols))
        fh.write(np.ascontiguousarray(M, dtype=dt).tobytes())


def read_matrix(path):
    """Read a CDM1 or CSV file into a float64 array."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        return _parse_csv(data, path)
    if len(data) < HEADER.size:
        raise TruncatedPayload(f"{path}: header shorter than {HEADER.size} bytes")
    _, code, rows, cols = HEADER.unpack_from(data)
    if code not in _DTYPES or data[5:8] != b"\0\0\0":
        raise BadMagic(f"{path}: unknown dtype code {code} or non-zero reserved bytes")
    if rows == 0 or cols == 0:
        raise TruncatedPayload(f"{path}: empty matrix ({rows} x {cols})")
    dt = _DTYPES[code]
    expected = rows * cols * dt.itemsize
    payload = len(data) - HEADER.size
    if payload != expected:
        raise TruncatedPayload(f"{path}: payload is {payload} bytes, header implies {expected}")
    arr = np.frombuffer(data, dtype=dt, offset=HEADER.size).reshape(rows, cols)
    return arr.astype(np.float64)


def _parse_csv(data, path):
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BadMagic(f"{path}: neither CDM1 nor UTF-8 CSV") from exc
    rows = [row for row in csv.reader(text.splitlines()) if row and any(c.strip() for c in row)]
    if not rows:
        raise TruncatedPayload(f"{path}: CSV contains no rows")
    width = len(rows[0])
    for lineno, row in enumerate(rows, 1):
        if len(row) != width:
            raise NonRectangularCsv(f"{path}: row {lineno} has {len(row)} fields, expected {width}")
    try:
        return np.array([[float(c) for c in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise BadMagic(f"{path}: not CDM1 and not numeric CSV ({exc})") from exc


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 576
    d: int = 64
    clusters: int = 4
    cluster_spread: float = 0.05
    relevant_cluster: int = 0
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.d < 2 or self.clusters < 1:
            raise InvalidSpec("need n >= 1, d >= 2, clusters >= 1")
        if not 0 <= self.relevant_cluster < self.clusters:
            raise InvalidSpec("relevant_cluster must be < clusters")
        if self.cluster_spread < 0 or self.seed < 0:
            raise InvalidSpec("cluster_spread and seed must be non-negative")


def _unit(X):
    return X / np.sqrt(np.einsum("ij,ij->i", X, X))[:, None]


def generate_synthetic(spec):
    """Clustered unit embeddings plus a query aligned with one cluster.

    Draw order on the :class:`~cdprune.rng.Stream`: cluster centers
    (``clusters * d`` normals, rows normalized), token labels (``n`` bounded
    integers), noise (``n * d`` normals). Token ``i`` is
    ``normalize(center[label[i]] + cluster_spread * noise[i])``.

    Returns:
        ``(embeddings, query, labels)``
    """
    spec.validate()
    stream = Stream(spec.seed)
    centers = _unit(stream.normal(spec.clusters * spec.d).reshape(spec.clusters, spec.d))
    labels = stream.integers(spec.clusters, spec.n)
    noise = stream.normal(spec.n * spec.d).reshape(spec.n, spec.d)
    tokens = centers[labels]
    if spec.cluster_spread > 0:
        tokens = _unit(tokens + spec.cluster_spread * noise)
    query = centers[spec.relevant_cluster].copy()
    return tokens, query, labels


def relevance_pixels(r_norm):
    """Blue-to-red ramp: ``(255 r, 0, 255 (1 - r))`` rounded half up."""
    r = np.clip(as_vector(r_norm, "relevance"), 0.0, 1.0)
    px = np.zeros((r.size, 3), dtype=np.uint8)
    px[:, 0] = np.floor(255.0 * r + 0.5)
    px[:, 2] = np.floor(255.0 * (1.0 - r) + 0.5)
    return px


def render_relevance_map(r_norm, grid_h, grid_w, path, scale=1):
    """Write the relevance grid as a binary PPM (P6), each cell ``scale`` pixels wide."""
    px = relevance_pixels(r_norm)
    if grid_h < 1 or grid_w < 1 or grid_h * grid_w != px.shape[0]:
        raise GridMismatch(f"grid {grid_h}x{grid_w} does not hold {px.shape[0]} tokens")
    if scale < 1:
        raise ValueError("scale must be >= 1")
    img = px.reshape(grid_h, grid_w, 3)
    img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{grid_w * scale} {grid_h * scale}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
