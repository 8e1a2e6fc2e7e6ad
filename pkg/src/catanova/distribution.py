"""
Empirical categorical distributions.

Categories are dense integer codes ``0 .. N_i - 1``. A distribution is the
set of distinct observed rows (the support) together with strictly positive
probability weights. Marginal probabilities ``p_A`` of feature subsets are
computed lazily and memoized per subset.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DataError, OutOfSupportError

Subset = Tuple[int, ...]

_WEIGHT_SUM_TOL = 1e-12


def _as_subset(A: Iterable[int]) -> Subset:
    return tuple(sorted(int(i) for i in A))


@dataclass(frozen=True)
class HyperGrid:
    """Cartesian product of the per-feature category sets."""

    cardinalities: Tuple[int, ...]

    def __post_init__(self):
        card = tuple(int(n) for n in self.cardinalities)
        if any(n < 1 for n in card):
            raise DataError(f"every cardinality must be >= 1, got {card}")
        object.__setattr__(self, "cardinalities", card)

    @property
    def d(self) -> int:
        return len(self.cardinalities)

    @property
    def size(self) -> int:
        """``|E| = prod N_i`` as an exact Python integer."""
        out = 1
        for n in self.cardinalities:
            out *= n
        return out

    def truncated_size(self, A: Iterable[int]) -> int:
        """``|E_{A-}| = prod_{i in A} (N_i - 1)``."""
        out = 1
        for i in A:
            out *= self.cardinalities[i] - 1
        return out


@dataclass(frozen=True)
class MarginalTable:
    """Probabilities of the observed projections ``x_A`` of the support."""

    subset: Subset
    probabilities: Dict[Tuple[int, ...], float]

    def __getitem__(self, x_A) -> float:
        return self.probabilities[tuple(int(v) for v in x_A)]

    def __len__(self):
        return len(self.probabilities)


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """
    Finite distribution over a hypergrid with an explicit support.

    Parameters
    ----------
    grid:
        Category counts per feature.
    support:
        ``(r, d)`` integer array of pairwise distinct rows.
    weights:
        ``(r,)`` strictly positive probabilities summing to one.
    """

    grid: HyperGrid
    support: np.ndarray
    weights: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        support = np.array(self.support, dtype=np.int64, copy=True)
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        if support.ndim != 2:
            raise DataError("support must be a 2-D array")
        r, d = support.shape
        if r == 0:
            raise DataError("support is empty")
        if d != self.grid.d:
            raise DataError(f"support has {d} columns but grid has {self.grid.d} features")
        if weights.shape != (r,):
            raise DataError(f"expected {r} weights, got shape {weights.shape}")
        card = np.asarray(self.grid.cardinalities, dtype=np.int64)
        if np.any(support < 0) or np.any(support >= card[None, :]):
            raise DataError("support entries must lie in 0..N_i-1")
        if not np.all(weights > 0):
            raise DataError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise DataError(f"weights sum to {weights.sum()!r}, expected 1")
        if np.unique(support, axis=0).shape[0] != r:
            raise DataError("support rows must be pairwise distinct")
        support.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(
            self, "_row_index", {tuple(row): k for k, row in enumerate(support.tolist())}
        )

    @property
    def r(self) -> int:
        return self.support.shape[0]

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def row_index(self) -> Dict[Tuple[int, ...], int]:
        return self._row_index

    def locate(self, x: Sequence[int]) -> int:
        """Position of row ``x`` in the support."""
        key = tuple(int(v) for v in x)
        try:
            return self._row_index[key]
        except KeyError:
            raise OutOfSupportError(f"row {key} is not in the support") from None

    def groups(self, A: Iterable[int]) -> Tuple[np.ndarray, int]:
        """Group id of every support row's projection on ``A`` and the group count."""
        A = _as_subset(A)
        key = ("groups", A)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if not A:
            out = (np.zeros(self.r, dtype=np.int64), 1)
        else:
            values, inverse = _project_groups(self.support, A, self.grid.cardinalities)
            inverse.setflags(write=False)
            out = (inverse, values.shape[0])
        with self._lock:
            self._cache.setdefault(key, out)
        return self._cache[key]

    def marginal_probs(self, A: Iterable[int]) -> np.ndarray:
        """``p_A((x_k)_A)`` for every support row ``x_k``, as an r-vector."""
        A = _as_subset(A)
        cached = self._cache.get(A)
        if cached is not None:
            return cached
        if not A:
            probs = np.ones(self.r)
        else:
            inverse, n = self.groups(A)
            totals = np.bincount(inverse, weights=self.weights, minlength=n)
            probs = totals[inverse]
        probs.setflags(write=False)
        with self._lock:
            self._cache.setdefault(A, probs)
        return self._cache[A]

    def memo(self, key, build):
        """Per-distribution memo for derived quantities keyed by ``key``."""
        cached = self._cache.get(key)
        if cached is None:
            cached = build()
            with self._lock:
                cached = self._cache.setdefault(key, cached)
        return cached

    def category_probs(self, i: int) -> np.ndarray:
        """Marginal pmf of feature ``i`` over all ``N_i`` categories."""
        return np.bincount(self.support[:, i], weights=self.weights,
                           minlength=self.grid.cardinalities[i])


def _project_groups(support: np.ndarray, A: Subset, cardinalities) -> Tuple[np.ndarray, np.ndarray]:
    """Group support rows by their projection on ``A``.

    Returns the distinct projections and, for every row, its group id.
    """
    cols = support[:, list(A)]
    span = 1
    for i in A:
        span *= cardinalities[i]
    if span < 2**62:
        strides = np.ones(len(A), dtype=np.int64)
        for j in range(len(A) - 2, -1, -1):
            strides[j] = strides[j + 1] * cardinalities[A[j + 1]]
        codes = cols @ strides
        uniq, first, inverse = np.unique(codes, return_index=True, return_inverse=True)
        return cols[first], inverse.ravel()
    uniq, inverse = np.unique(cols, axis=0, return_inverse=True)
    return uniq, inverse.ravel()


def from_dataset(
    rows,
    grid: Optional[HyperGrid] = None,
    sample_weights=None,
) -> EmpiricalDistribution:
    """
    Build the empirical distribution of a categorical data matrix.

    Duplicate rows are merged; each distinct row receives its relative
    frequency (or relative total sample weight) as probability. Support
    rows come out in lexicographic order, so the result does not depend on
    the order of the input rows.

    Parameters
    ----------
    rows:
        ``(n, d)`` array of non-negative integer category codes.
    grid:
        Category counts. Inferred as ``1 + max`` per column when omitted.
    sample_weights:
        Optional non-negative per-row weights; uniform ``1/n`` by default.
    """
    X = np.asarray(rows)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("rows must be a non-empty 2-D array")
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise DataError("category codes must be integers")
    X = X.astype(np.int64)
    if np.any(X < 0):
        raise DataError("category codes must be non-negative")
    if grid is None:
        grid = HyperGrid(tuple(int(m) + 1 for m in X.max(axis=0)))
    elif grid.d != X.shape[1]:
        raise DataError(f"grid has {grid.d} features, rows have {X.shape[1]} columns")
    else:
        over = X >= np.asarray(grid.cardinalities)[None, :]
        if np.any(over):
            k, i = np.argwhere(over)[0]
            raise DataError(
                f"row {k}: category {X[k, i]} of feature {i} exceeds N_{i}={grid.cardinalities[i]}"
            )

    if sample_weights is None:
        w = np.ones(X.shape[0])
    else:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != (X.shape[0],) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DataError("sample weights must be finite, non-negative and one per row")
        keep = w > 0
        X, w = X[keep], w[keep]
        if X.shape[0] == 0:
            raise DataError("all sample weights are zero")

    support, inverse = np.unique(X, axis=0, return_inverse=True)
    totals = np.bincount(inverse.ravel(), weights=w, minlength=support.shape[0])
    return EmpiricalDistribution(grid, support, totals / totals.sum())


def marginal(dist: EmpiricalDistribution, A: Iterable[int]) -> MarginalTable:
    """Marginal table of the observed projections on ``A``."""
    A = _as_subset(A)
    if any(i < 0 or i >= dist.d for i in A):
        raise DataError(f"subset {A} is not contained in 0..{dist.d - 1}")
    if not A:
        return MarginalTable((), {(): 1.0})
    values, inverse = _project_groups(dist.support, A, dist.grid.cardinalities)
    totals = np.bincount(inverse, weights=dist.weights)
    return MarginalTable(A, {tuple(v): float(p) for v, p in zip(values.tolist(), totals)})


def inner_product(dist: EmpiricalDistribution, u, v) -> float:
    """``<u, v> = sum_k u_k v_k w_k`` over the support."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (dist.r,) or v.shape != (dist.r,):
        raise DataError(f"vectors must have length r={dist.r}, got {u.shape} and {v.shape}")
    return float(np.dot(u * dist.weights, v))
