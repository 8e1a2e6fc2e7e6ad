"""
Greedy rank-based selection of basis functions.

The index space is an over-complete dictionary for the function space on the
support. Candidates are scanned in a fixed order and a candidate is kept iff
it strictly increases the numerical rank of the kept set. The rank test is an
incremental Gram-Schmidt under the distribution's inner product (classical
Gram-Schmidt with one reorthogonalization pass), processed in blocks so that
the projections run as matrix-matrix products.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .basis import EMPTY_KEY, IndexKey, _active_features, column_values, keys_for_subset, phi_values
from .distribution import EmpiricalDistribution
from .exceptions import ConsistencyError, DataError

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# orderings
# ---------------------------------------------------------------------------


def _subset_stream(features: Sequence[int], max_order: int, allowed=None) -> Iterator[Tuple[int, ...]]:
    """Subsets of ``features`` by cardinality, in combination order of ``features``."""
    for k in range(1, min(max_order, len(features)) + 1):
        for combo in itertools.combinations(features, k):
            if allowed is None or allowed(combo):
                yield tuple(sorted(combo))


@dataclass(frozen=True)
class Canonical:
    """Subsets by cardinality then lexicographically, categories lexicographically."""

    name = "canonical"
    spans = True

    def subsets(self, dist, max_order, active, f_values=None):
        return _subset_stream(active, max_order)


@dataclass(frozen=True)
class VarianceRanked:
    """
    Features ranked by the variance of ``E[f | X_i]``, largest first.

    Within each cardinality, coalitions are taken in combination order of the
    ranked feature list, so coalitions of top-ranked features come first.
    """

    name = "variance"
    spans = True

    def subsets(self, dist, max_order, active, f_values=None):
        if f_values is None:
            raise DataError("the variance-ranked ordering needs the target values")
        scores = feature_variance_scores(dist, f_values)
        ranked = sorted(active, key=lambda i: (-scores[i], i))
        return _subset_stream(ranked, max_order)


@dataclass(frozen=True)
class Neighborhood:
    """
    Main effects of every feature, then only coalitions whose members are
    pairwise neighbors in ``adjacency`` (taken symmetrically).
    """

    adjacency: Mapping[int, Iterable[int]] = field(default_factory=dict)
    name = "neighborhood"
    spans = False

    def neighbors(self) -> Dict[int, set]:
        out: Dict[int, set] = {}
        for i, nbrs in self.adjacency.items():
            for j in nbrs:
                if i == j:
                    continue
                out.setdefault(int(i), set()).add(int(j))
                out.setdefault(int(j), set()).add(int(i))
        return out

    def subsets(self, dist, max_order, active, f_values=None):
        nbrs = self.neighbors()
        active_set = set(active)
        if max_order >= 1:
            for i in active:
                yield (i,)
        level = [(i,) for i in active]
        for _ in range(2, max_order + 1):
            nxt = []
            for clique in level:
                common = set.intersection(*(nbrs.get(i, set()) for i in clique))
                for j in sorted(common & active_set):
                    if j > clique[-1]:
                        nxt.append(clique + (j,))
            if not nxt:
                return
            yield from nxt
            level = nxt


OrderingStrategy = (Canonical, VarianceRanked, Neighborhood)


def feature_variance_scores(dist: EmpiricalDistribution, f_values) -> np.ndarray:
    """Weighted variance of the conditional mean of ``f`` given each feature."""
    f = np.asarray(f_values, dtype=np.float64)
    mean = float(np.dot(dist.weights, f))
    scores = np.zeros(dist.d)
    for i in range(dist.d):
        n = dist.grid.cardinalities[i]
        col = dist.support[:, i]
        p = np.bincount(col, weights=dist.weights, minlength=n)
        s = np.bincount(col, weights=dist.weights * f, minlength=n)
        seen = p > 0
        cond = s[seen] / p[seen]
        scores[i] = float(np.dot(p[seen], (cond - mean) ** 2))
    return scores


# ---------------------------------------------------------------------------
# configuration and result
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionConfig:
    max_order: Optional[int] = None
    rank_budget: Optional[int] = None
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE
    ordering: object = field(default_factory=Canonical)
    prune_inactive: bool = False
    prune_threshold: float = 0.0
    block_size: int = 64
    # project columns onto the hierarchical complement of lower-order subsets
    hierarchical: bool = True

    def __post_init__(self):
        if self.max_order is not None and self.max_order < 0:
            raise DataError("max_order must be non-negative")
        if self.rank_budget is not None and self.rank_budget < 1:
            raise DataError("rank_budget must be at least 1")
        if not self.rank_tolerance > 0:
            raise DataError("rank_tolerance must be positive")
        if self.prune_threshold < 0:
            raise DataError("prune_threshold must be non-negative")
        if not isinstance(self.ordering, OrderingStrategy):
            raise DataError(f"unknown ordering {self.ordering!r}")
        if self.block_size < 1:
            raise DataError("block_size must be at least 1")


@dataclass(frozen=True)
class SelectedBasis:
    keys: Tuple[IndexKey, ...]
    achieved_rank: int
    scanned: int
    pruned_features: FrozenSet[int]


# ---------------------------------------------------------------------------
# incremental rank tracking
# ---------------------------------------------------------------------------


@dataclass
class TrackerResult:
    accepted: bool
    residual_norm: float


class RankTracker:
    """
    Orthonormal basis (under the weighted inner product) of the accepted
    columns. Columns are stored as ``sqrt(w) * v`` so plain dot products
    apply.
    """

    def __init__(self, weights, capacity: int, tolerance: float = DEFAULT_RANK_TOLERANCE):
        self.sqrt_w = np.sqrt(np.asarray(weights, dtype=np.float64))
        self.tolerance = tolerance
        self._capacity = max(int(capacity), 1)
        # storage grows on demand; the budget may be far above the final rank
        self.Q = np.empty((self.sqrt_w.shape[0], min(self._capacity, 64)))
        self.rank = 0

    @property
    def capacity(self) -> int:
        return self._capacity

    def _reserve(self, extra: int) -> None:
        need = min(self.rank + extra, self._capacity)
        if need > self.Q.shape[1]:
            size = min(max(need, 2 * self.Q.shape[1]), self._capacity)
            Q = np.empty((self.Q.shape[0], size))
            Q[:, :self.rank] = self.Q[:, :self.rank]
            self.Q = Q

    @property
    def full(self) -> bool:
        return self.rank >= self.capacity

    def _project_out(self, Y: np.ndarray, lo: int, hi: int) -> None:
        if hi <= lo:
            return
        Qk = self.Q[:, lo:hi]
        for _ in range(2):
            Y -= Qk @ (Qk.T @ Y)

    def add_block(self, columns: np.ndarray, limit: Optional[int] = None,
                  ref_norms=None) -> List[TrackerResult]:
        """
        Test ``columns`` (``(r, b)``) one after another, as if added singly.

        Stops early once the tracker is full or ``limit`` columns have been
        accepted in this call; results are returned only for the columns
        actually examined. The acceptance threshold is ``tolerance`` times
        the column norm, or times ``ref_norms`` when given (the norm of the
        uncorrected column, so that a correction which cancels a column down
        to roundoff does not pass as new rank).
        """
        Y = columns * self.sqrt_w[:, None]
        norms = np.linalg.norm(Y, axis=0)
        if ref_norms is not None:
            norms = np.maximum(norms, np.asarray(ref_norms, dtype=np.float64))
        start = self.rank
        self._reserve(Y.shape[1])
        self._project_out(Y, 0, start)
        results = []
        accepted = 0
        for j in range(Y.shape[1]):
            if self.full or (limit is not None and accepted >= limit):
                break
            y = Y[:, j]
            if self.rank > start:
                Qn = self.Q[:, start:self.rank]
                for _ in range(2):
                    y -= Qn @ (Qn.T @ y)
            res = float(np.linalg.norm(y))
            ok = norms[j] > 0 and res > self.tolerance * norms[j]
            if ok:
                self.Q[:, self.rank] = y / res
                self.rank += 1
                accepted += 1
            results.append(TrackerResult(ok, res))
        return results

    def add(self, column) -> TrackerResult:
        col = np.asarray(column, dtype=np.float64)
        if col.shape != self.sqrt_w.shape:
            raise DataError(f"column must have length {self.sqrt_w.shape[0]}")
        if self.full:
            return TrackerResult(False, 0.0)
        return self.add_block(col[:, None])[0]


def rank_tracker_add(tracker: RankTracker, column) -> TrackerResult:
    """Orthogonalize ``column`` against the tracker and accept it iff it adds rank."""
    return tracker.add(column)


# ---------------------------------------------------------------------------
# greedy selection
# ---------------------------------------------------------------------------


def prune_inactive(dist: EmpiricalDistribution, f_values=None, threshold: float = 0.0) -> FrozenSet[int]:
    """
    Features whose most frequent category has probability ``>= 1 - threshold``.

    Single-category features are always included. ``f_values`` is accepted for
    interface symmetry and ignored: inactivity is a property of the inputs.
    """
    if threshold < 0:
        raise DataError("threshold must be non-negative")
    out = set()
    for i in range(dist.d):
        if dist.grid.cardinalities[i] == 1:
            out.add(i)
            continue
        if dist.category_probs(i).max() >= 1.0 - threshold - 1e-12:
            out.add(i)
    return frozenset(out)


def candidate_keys(dist: EmpiricalDistribution, config: SelectionConfig, f_values=None,
                   exclude=()) -> Iterator[IndexKey]:
    max_order = dist.d if config.max_order is None else min(config.max_order, dist.d)
    active = _active_features(dist.grid, exclude)
    yield EMPTY_KEY
    for A in config.ordering.subsets(dist, max_order, active, f_values):
        yield from keys_for_subset(dist.grid, A)


def greedy_select(dist: EmpiricalDistribution, config: SelectionConfig = SelectionConfig(),
                  f_values=None) -> SelectedBasis:
    """
    Scan candidate keys in the configured order, keeping each one whose
    column is linearly independent of the kept ones.

    Stops at the rank budget, at full rank ``r``, or when candidates run out.
    ``f_values`` is only consulted by the variance-ranked ordering.
    """
    r = dist.r
    budget = r if config.rank_budget is None else config.rank_budget
    if budget > r:
        warnings.warn(f"rank budget {budget} exceeds support size {r}; clamped to {r}",
                      stacklevel=2)
        budget = r

    pruned = frozenset()
    if config.prune_inactive:
        pruned = prune_inactive(dist, f_values, config.prune_threshold)

    tracker = RankTracker(dist.weights, budget, config.rank_tolerance)
    keys: List[IndexKey] = []
    scanned = 0
    stream = candidate_keys(dist, config, f_values, exclude=pruned)
    block = config.block_size
    while not tracker.full:
        chunk = list(itertools.islice(stream, block))
        if not chunk:
            break
        cols = np.empty((r, len(chunk)))
        ref = None
        if config.hierarchical:
            ref = np.empty(len(chunk))
            for j, key in enumerate(chunk):
                raw = phi_values(dist, key)
                ref[j] = np.sqrt(np.dot(raw * dist.weights, raw))
                cols[:, j] = column_values(dist, key, True)
        else:
            for j, key in enumerate(chunk):
                cols[:, j] = phi_values(dist, key)
        results = tracker.add_block(cols, ref_norms=ref)
        scanned += len(results)
        keys.extend(key for key, res in zip(chunk, results) if res.accepted)
    logger.debug("greedy selection: rank %d after scanning %d candidates", tracker.rank, scanned)

    if budget == r and tracker.rank < r and _covers_index_space(dist, config, pruned):
        raise ConsistencyError(
            f"candidate keys exhausted at rank {tracker.rank} < r={r}; the basis should span the support"
        )
    return SelectedBasis(tuple(keys), tracker.rank, scanned, pruned)


def _covers_index_space(dist, config, pruned) -> bool:
    if not config.ordering.spans:
        return False
    max_order = dist.d if config.max_order is None else config.max_order
    active = _active_features(dist.grid, pruned)
    if max_order < len(active):
        return False
    # pruning a feature with one observed category keeps the span intact
    return all(np.count_nonzero(dist.category_probs(i)) == 1 for i in pruned)
