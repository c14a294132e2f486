"""Datasets: LIBSVM text ingestion and seeded synthetic problem generators.

Random streams
--------------
Every generator is a pure function of its spec.  A spec seed feeds
``numpy.random.SeedSequence(seed)``, whose spawned children are used in a
fixed order: child 0 draws the problem data, child 1 draws the starting
point (see :func:`starting_point`).  The bit generator is PCG64.
"""

from __future__ import annotations

import io
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO, Union

import numpy as np
from scipy import sparse

from .errors import LibsvmParseError
from .oracle import DiagonalQuadratic, GroundTruth, LogisticProblem, QuadraticProblem

logger = logging.getLogger(__name__)

DENSE_LIMIT = 10**7

_LABEL_MAPS = {
    frozenset({0.0, 1.0}): {0.0: -1.0, 1.0: 1.0},
    frozenset({1.0, 2.0}): {1.0: -1.0, 2.0: 1.0},
}


@dataclass(frozen=True)
class Dataset:
    """Sparse rows (0-based indices), one label per row."""

    indices: tuple  # per row: int array, strictly increasing
    values: tuple  # per row: float array
    labels: np.ndarray
    n_features: int
    source: str = ""

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    @property
    def nnz(self) -> int:
        return int(sum(len(ix) for ix in self.indices))

    def to_csr(self) -> sparse.csr_matrix:
        indptr = np.zeros(self.n_samples + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(ix) for ix in self.indices])
        cols = np.concatenate(self.indices) if self.indices else np.zeros(0, dtype=np.int64)
        vals = np.concatenate(self.values) if self.values else np.zeros(0)
        return sparse.csr_matrix((vals, cols, indptr), shape=(self.n_samples, self.n_features))

    def to_matrix(self):
        """Dense array when ``m * n <= 1e7``, CSR otherwise."""
        csr = self.to_csr()
        if self.n_samples * self.n_features <= DENSE_LIMIT:
            return csr.toarray()
        return csr

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.n_features == other.n_features
                and np.array_equal(self.labels, other.labels)
                and len(self.indices) == len(other.indices)
                and all(np.array_equal(a, b) for a, b in zip(self.indices, other.indices))
                and all(np.array_equal(a, b) for a, b in zip(self.values, other.values)))

    __hash__ = None


def _parse_float(tok, lineno, what):
    try:
        val = float(tok)
    except ValueError:
        raise LibsvmParseError(f"malformed {what} {tok!r}", lineno) from None
    if not math.isfinite(val):
        raise LibsvmParseError(f"non-finite {what} {tok!r}", lineno)
    return val


def parse_libsvm(stream: Union[TextIO, str, Iterable[str]], *, n_features: Optional[int] = None,
                 normalize_labels: bool = True, source: str = "") -> Dataset:
    """Parse ``<label> <idx>:<val> ...`` lines (1-based indices, '#' comments).

    Blank lines are skipped.  Indices must be positive and strictly increasing
    within a row.  ``n_features`` defaults to the largest index seen.  Label
    sets {0, 1} and {1, 2} are mapped to {-1, +1} with a warning unless
    ``normalize_labels`` is false.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    all_idx, all_val, labels = [], [], []
    max_index = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(_parse_float(tokens[0], lineno, "label"))
        idx = np.empty(len(tokens) - 1, dtype=np.int64)
        val = np.empty(len(tokens) - 1)
        last = 0
        for j, tok in enumerate(tokens[1:]):
            head, sep, tail = tok.partition(":")
            if not sep or not head or not tail:
                raise LibsvmParseError(f"malformed feature token {tok!r}", lineno)
            try:
                i = int(head)
            except ValueError:
                raise LibsvmParseError(f"malformed feature index {head!r}", lineno) from None
            if i <= 0:
                raise LibsvmParseError(f"feature index {i} is not positive (indices are 1-based)", lineno)
            if i <= last:
                raise LibsvmParseError(f"feature index {i} does not increase (previous {last})", lineno)
            last = i
            idx[j] = i - 1
            val[j] = _parse_float(tail, lineno, "feature value")
        max_index = max(max_index, last)
        all_idx.append(idx)
        all_val.append(val)

    if n_features is None:
        n_features = max_index
    elif n_features < max_index:
        raise LibsvmParseError(f"index {max_index} exceeds n_features={n_features}", 0)

    y = np.array(labels, dtype=float)
    if normalize_labels:
        mapping = _LABEL_MAPS.get(frozenset(np.unique(y).tolist()))
        if mapping is not None:
            logger.warning("mapping labels %s to {-1, +1}", sorted(mapping))
            y = np.array([mapping[v] for v in y.tolist()], dtype=float)
    return Dataset(tuple(all_idx), tuple(all_val), y, int(n_features), source)


def load_libsvm(path, **kw) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, source=str(path), **kw)


def serialize_libsvm(ds: Dataset) -> str:
    lines = []
    for label, idx, val in zip(ds.labels.tolist(), ds.indices, ds.values):
        parts = [repr(float(label))]
        parts += [f"{i + 1}:{float(v)!r}" for i, v in zip(idx.tolist(), val.tolist())]
        lines.append(" ".join(parts))
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class DatasetStats:
    m: int
    n: int
    nnz: int
    label_histogram: dict
    max_abs_value: float
    empty: bool


def dataset_stats(ds: Dataset) -> DatasetStats:
    hist = dict(sorted(Counter(ds.labels.tolist()).items()))
    max_abs = max((float(np.max(np.abs(v))) for v in ds.values if len(v)), default=0.0)
    return DatasetStats(ds.n_samples, ds.n_features, ds.nnz, hist, max_abs, ds.n_samples == 0)


# --------------------------------------------------------------------------
# synthetic problems


@dataclass(frozen=True)
class DiagonalSpectrum:
    xi: int
    m: int


@dataclass(frozen=True)
class GaussianLeastSquares:
    m: int
    n: int


@dataclass(frozen=True)
class SparseBinaryClassification:
    """Binary 0/1 features, about ``nnz_per_row`` ones per row, labels from a
    noisy linear model.  Shape stand-in for one-hot encoded census data."""

    m: int
    n: int
    nnz_per_row: int = 14
    noise: float = 0.5


@dataclass(frozen=True)
class SyntheticSpec:
    kind: object
    seed: int = 0

    def __post_init__(self):
        k = self.kind
        if isinstance(k, DiagonalSpectrum) and (k.xi < 1 or k.m < 1):
            raise ValueError("DiagonalSpectrum needs xi >= 1 and m >= 1")
        if isinstance(k, (GaussianLeastSquares, SparseBinaryClassification)) and (k.m < 1 or k.n < 1):
            raise ValueError("m and n must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def streams(self):
        data_seq, x0_seq = np.random.SeedSequence(self.seed).spawn(2)
        return np.random.Generator(np.random.PCG64(data_seq)), np.random.Generator(np.random.PCG64(x0_seq))


def starting_point(seed: int, n: int) -> np.ndarray:
    """Starting point: iid standard normal from the seed's second child stream."""
    _, rng = SyntheticSpec(GaussianLeastSquares(1, 1), seed).streams()
    return rng.standard_normal(n)


def gen_diagonal_quadratic(spec: SyntheticSpec) -> tuple[DiagonalQuadratic, GroundTruth]:
    """Separable quadratic with curvatures drawn uniformly from {1, 0.1, ..., 10^-xi}.

    The first two coordinates are pinned to 1 and 10^-xi (the rest are shuffled
    in), so ``L = 1`` and ``mu = 10^-xi`` exactly.  The center is uniform on
    [0, 1]^m and is the exact minimizer.
    """
    k = spec.kind
    if not isinstance(k, DiagonalSpectrum):
        raise TypeError("spec.kind must be DiagonalSpectrum")
    rng, _ = spec.streams()
    exps = rng.integers(0, k.xi + 1, size=k.m)
    if k.m >= 2:
        exps[rng.choice(k.m, size=2, replace=False)] = (0, k.xi)
    else:
        exps[0] = 0
    d = 10.0 ** (-exps.astype(float))
    center = rng.uniform(0.0, 1.0, size=k.m)
    problem = DiagonalQuadratic(d, center)
    truth = GroundTruth(center.copy(), 0.0, "closed_form", 0.0, 0.0)
    return problem, truth


def gen_gaussian_ls(spec: SyntheticSpec, ridge: float = 0.0, **kw) -> QuadraticProblem:
    """Dense least squares with iid standard normal ``A`` (m x n) and ``b`` (m)."""
    k = spec.kind
    if not isinstance(k, GaussianLeastSquares):
        raise TypeError("spec.kind must be GaussianLeastSquares")
    rng, _ = spec.streams()
    A = rng.standard_normal((k.m, k.n))
    b = rng.standard_normal(k.m)
    return QuadraticProblem(A, b, ridge, **kw)


def gen_gaussian_logistic(spec: SyntheticSpec, ridge: float) -> LogisticProblem:
    """Gaussian design, labels ``sign(b)`` from the same draw as :func:`gen_gaussian_ls`."""
    k = spec.kind
    if not isinstance(k, GaussianLeastSquares):
        raise TypeError("spec.kind must be GaussianLeastSquares")
    rng, _ = spec.streams()
    A = rng.standard_normal((k.m, k.n))
    b = np.where(rng.standard_normal(k.m) >= 0, 1.0, -1.0)
    return LogisticProblem(A, b, ridge)


def gen_sparse_binary(spec: SyntheticSpec) -> Dataset:
    k = spec.kind
    if not isinstance(k, SparseBinaryClassification):
        raise TypeError("spec.kind must be SparseBinaryClassification")
    rng, _ = spec.streams()
    per_row = min(k.nnz_per_row, k.n)
    w = rng.standard_normal(k.n)
    rows = tuple(np.sort(rng.choice(k.n, size=per_row, replace=False)) for _ in range(k.m))
    vals = tuple(np.ones(per_row) for _ in range(k.m))
    margin = np.array([w[ix].sum() for ix in rows]) + k.noise * rng.standard_normal(k.m)
    labels = np.where(margin > 0, 1.0, -1.0)
    return Dataset(rows, vals, labels, k.n, source=f"synthetic:sparse-binary:seed={spec.seed}")


def least_squares_from(ds: Dataset, ridge: float) -> QuadraticProblem:
    return QuadraticProblem(ds.to_matrix(), ds.labels, ridge)


def logistic_from(ds: Dataset, ridge: float) -> LogisticProblem:
    return LogisticProblem(ds.to_matrix(), ds.labels, ridge)
