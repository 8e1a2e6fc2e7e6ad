"""
Index space and signed inverse-likelihood basis functions.

A basis function is indexed by a pair ``(A, z)``: a sorted feature subset
``A`` and one category ``z_j in {0 .. N_j - 2}`` per feature of ``A``. Its
value on a support row ``x`` is

    prod_{i in A} (1{x_i = z_i} - 1{x_i = N_i - 1}) / p_A(x_A)

and the empty key gives the constant function 1.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from .distribution import EmpiricalDistribution, HyperGrid
from .exceptions import DataError


@dataclass(frozen=True, order=True)
class IndexKey:
    """One element ``(A, z)`` of the index space; hashable and orderable."""

    A: Tuple[int, ...] = ()
    z: Tuple[int, ...] = ()

    def __post_init__(self):
        A = tuple(int(i) for i in self.A)
        z = tuple(int(v) for v in self.z)
        if len(A) != len(z):
            raise DataError(f"subset {A} and categories {z} differ in length")
        if any(b <= a for a, b in zip(A, A[1:])):
            raise DataError(f"subset {A} must be strictly increasing")
        if any(v < 0 for v in z):
            raise DataError(f"categories {z} must be non-negative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "z", z)

    @property
    def order(self) -> int:
        return len(self.A)

    def check(self, grid: HyperGrid) -> None:
        """Raise unless the key belongs to the index space of ``grid``."""
        for i, v in zip(self.A, self.z):
            if i >= grid.d:
                raise DataError(f"feature {i} out of range for d={grid.d}")
            if v > grid.cardinalities[i] - 2:
                raise DataError(
                    f"category {v} of feature {i} outside truncated grid 0..{grid.cardinalities[i] - 2}"
                )

    def __str__(self):
        if not self.A:
            return "()"
        return "(" + ",".join(f"{i}:{v}" for i, v in zip(self.A, self.z)) + ")"


EMPTY_KEY = IndexKey()


def index_space_size(grid: HyperGrid, max_order: Optional[int] = None,
                     limit: Optional[int] = None) -> int:
    """
    Number of keys ``(A, z)`` with ``|A| <= max_order``.

    Computed exactly with Python integers as the elementary symmetric sums of
    ``N_i - 1``; for ``max_order = d`` it equals ``prod N_i``. If ``limit`` is
    given and the count exceeds it, ``OverflowError`` is raised.
    """
    d = grid.d
    if max_order is None:
        max_order = d
    if not 0 <= max_order <= d:
        raise DataError(f"max_order must lie in 0..{d}, got {max_order}")
    # e[k] = sum over |A| = k of prod (N_i - 1)
    e = [1] + [0] * max_order
    for n in grid.cardinalities:
        m = n - 1
        for k in range(max_order, 0, -1):
            e[k] += e[k - 1] * m
    total = sum(e)
    if limit is not None and total > limit:
        raise OverflowError(f"index space has {total} keys, more than the limit {limit}")
    return total


def _active_features(grid: HyperGrid, exclude=()) -> list:
    exclude = set(exclude)
    return [i for i, n in enumerate(grid.cardinalities) if n > 1 and i not in exclude]


def keys_for_subset(grid: HyperGrid, A: Sequence[int]) -> Iterator[IndexKey]:
    """All keys of subset ``A`` with ``z`` in lexicographic order."""
    A = tuple(A)
    ranges = [range(grid.cardinalities[i] - 1) for i in A]
    for z in itertools.product(*ranges):
        yield IndexKey(A, z)


def enumerate_indices(grid: HyperGrid, max_order: Optional[int] = None,
                      exclude=()) -> Iterator[IndexKey]:
    """
    Lazily enumerate the index space in canonical order.

    Subsets come by cardinality, then lexicographically; within a subset the
    category tuples are lexicographic. Features with a single category (and
    those listed in ``exclude``) never appear.
    """
    if max_order is None:
        max_order = grid.d
    if max_order < 0:
        raise DataError("max_order must be non-negative")
    yield EMPTY_KEY
    active = _active_features(grid, exclude)
    for k in range(1, min(max_order, len(active)) + 1):
        for A in itertools.combinations(active, k):
            yield from keys_for_subset(grid, A)


def evaluate_psi(dist: EmpiricalDistribution, i: int, z: int) -> np.ndarray:
    """``1{x_i = z} - 1{x_i = N_i - 1}`` on every support row."""
    n = dist.grid.cardinalities[i]
    if not 0 <= z <= n - 2:
        raise DataError(f"category {z} outside truncated grid 0..{n - 2} of feature {i}")
    col = dist.support[:, i]
    return (col == z).astype(np.float64) - (col == n - 1).astype(np.float64)


def phi_numerator(dist: EmpiricalDistribution, key: IndexKey) -> np.ndarray:
    out = np.ones(dist.r)
    for i, v in zip(key.A, key.z):
        out *= evaluate_psi(dist, i, v)
    return out


@dataclass(frozen=True)
class BasisColumn:
    key: IndexKey
    values: np.ndarray


def phi_values(dist: EmpiricalDistribution, key: IndexKey) -> np.ndarray:
    """Raw r-vector of the basis function; see :func:`evaluate_phi`."""
    if not key.A:
        return np.ones(dist.r)
    return phi_numerator(dist, key) / dist.marginal_probs(key.A)


def evaluate_phi(dist: EmpiricalDistribution, key: IndexKey) -> BasisColumn:
    """Evaluate the basis function of ``key`` on the support."""
    key.check(dist.grid)
    return BasisColumn(key, phi_values(dist, key))


def design_matrix(dist: EmpiricalDistribution, keys: Sequence[IndexKey]) -> np.ndarray:
    """``(r, m)`` matrix whose columns are the basis functions of ``keys``."""
    out = np.empty((dist.r, len(keys)))
    for j, key in enumerate(keys):
        out[:, j] = phi_values(dist, key)
    return out


# ---------------------------------------------------------------------------
# hierarchical complement
# ---------------------------------------------------------------------------
#
# On a support whose projection on A is not rectangular, phi_A^(z) need not be
# orthogonal to functions of strict subsets of A (already <u_12, 1> = -1 on the
# three-point support {(0,0),(0,1),(1,0)}). The corrected column is the
# projection of phi_A^(z) onto
#
#     W_A = {g(x_A) : E[g | X_{A minus i}] = 0 for every i in A},
#
# which leaves phi unchanged wherever it already lies in W_A.

_VIOLATION_TOL = 1e-9


def hierarchical_violation(dist: EmpiricalDistribution, A: Sequence[int], values: np.ndarray) -> float:
    """
    Largest relative ``|E[v 1{X_B = b}]|`` over ``B = A minus {i}``.

    Each group sum is scaled by the group's ``sum |v| w``; zero means ``v``
    is orthogonal to every function of every strict subset of ``A``.
    """
    worst = 0.0
    vw = values * dist.weights
    avw = np.abs(vw)
    for i in A:
        B = tuple(j for j in A if j != i)
        inverse, n = dist.groups(B)
        sums = np.bincount(inverse, weights=vw, minlength=n)
        scale = np.bincount(inverse, weights=avw, minlength=n)
        nz = scale > 0
        if np.any(nz):
            worst = max(worst, float(np.max(np.abs(sums[nz]) / scale[nz])))
    return worst


@dataclass(frozen=True)
class _Complement:
    cell_of_row: np.ndarray   # row -> cell of x_A
    first_row: np.ndarray     # one representative row per cell
    sqrt_p: np.ndarray        # sqrt p_A per cell
    Z: np.ndarray             # orthonormal basis of W_A in sqrt(p_A) coordinates


def _group_complement(sqrt_p: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    """Orthonormal basis of ``{y : sum over each group of sqrt_p * y = 0}``."""
    s = sqrt_p.shape[0]
    order = np.argsort(groups, kind="stable")
    bounds = np.searchsorted(groups[order], np.arange(n_groups + 1))
    cols = []
    for g in range(n_groups):
        idx = order[bounds[g]:bounds[g + 1]]
        m = idx.shape[0]
        if m < 2:
            continue
        q = sqrt_p[idx] / np.linalg.norm(sqrt_p[idx])
        Q, _ = np.linalg.qr(np.column_stack([q, np.eye(m)[:, : m - 1]]))
        block = np.zeros((s, m - 1))
        block[idx, :] = Q[:, 1:]
        cols.append(block)
    if not cols:
        return np.zeros((s, 0))
    return np.hstack(cols)


def _build_complement(dist: EmpiricalDistribution, A: Tuple[int, ...]) -> _Complement:
    import scipy.linalg
    import scipy.sparse

    cell_of_row, s = dist.groups(A)
    first_row = np.full(s, -1, dtype=np.int64)
    first_row[cell_of_row[::-1]] = np.arange(dist.r)[::-1]
    p_cell = np.bincount(cell_of_row, weights=dist.weights, minlength=s)
    sqrt_p = np.sqrt(p_cell)

    sub = []
    for i in A:
        B = tuple(j for j in A if j != i)
        g_rows, n = dist.groups(B)
        sub.append((n, i, g_rows[first_row]))
    # start from the complement of the largest strict-subset space
    sub.sort(key=lambda t: (-t[0], t[1]))
    n1, _, g1 = sub[0]
    Z = _group_complement(sqrt_p, g1, n1)
    for n, _, g in sub[1:]:
        if Z.shape[1] == 0:
            break
        C = scipy.sparse.csr_matrix((sqrt_p, (g, np.arange(s))), shape=(n, s))
        M = C @ Z
        N = scipy.linalg.null_space(M)
        Z = Z @ N
    return _Complement(cell_of_row, first_row, sqrt_p, Z)


def project_hierarchical(dist: EmpiricalDistribution, A: Sequence[int], values: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a function of ``x_A`` onto ``W_A``."""
    A = tuple(A)
    if not A:
        return values
    comp = dist.memo(("complement", A), lambda: _build_complement(dist, A))
    y = comp.sqrt_p * values[comp.first_row]
    y = comp.Z @ (comp.Z.T @ y)
    return (y / comp.sqrt_p)[comp.cell_of_row]


def corrected_phi_values(dist: EmpiricalDistribution, key: IndexKey) -> np.ndarray:
    """
    Basis column made hierarchically orthogonal on any support.

    Returns the plain column whenever it already satisfies the orthogonality
    conditions, so full and product supports give the closed form exactly.
    """
    raw = phi_values(dist, key)
    if not key.A or hierarchical_violation(dist, key.A, raw) <= _VIOLATION_TOL:
        return raw
    return project_hierarchical(dist, key.A, raw)


def column_values(dist: EmpiricalDistribution, key: IndexKey, hierarchical: bool = True) -> np.ndarray:
    if hierarchical:
        return corrected_phi_values(dist, key)
    return phi_values(dist, key)


def design_columns(dist: EmpiricalDistribution, keys: Sequence[IndexKey],
                   hierarchical: bool = True) -> np.ndarray:
    out = np.empty((dist.r, len(keys)))
    for j, key in enumerate(keys):
        out[:, j] = column_values(dist, key, hierarchical)
    return out
