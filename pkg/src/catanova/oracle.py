"""
Brute-force reference computations for small instances.

Nothing here reuses the basis, Gram or selection code: marginals,
conditional expectations and basis columns are recomputed with explicit
loops over the support so that agreement with the main pipeline is an
independent check.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .distribution import EmpiricalDistribution
from .exceptions import DataError

Subset = Tuple[int, ...]


@dataclass
class OracleReport:
    name: str
    max_abs_deviation: float
    tolerance: float
    passed: bool = field(init=False)
    details: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self):
        self.passed = bool(self.max_abs_deviation <= self.tolerance)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_abs_deviation": self.max_abs_deviation,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "details": self.details,
        }


def _all_subsets(features) -> list:
    features = list(features)
    return [c for k in range(len(features) + 1) for c in itertools.combinations(features, k)]


def _rows(dist: EmpiricalDistribution):
    return [tuple(row) for row in dist.support.tolist()], dist.weights.tolist()


def conditional_expectation(dist: EmpiricalDistribution, f_values, B: Subset) -> np.ndarray:
    """``E[f | X_B = x_B]`` at every support row, by direct summation."""
    rows, w = _rows(dist)
    num = defaultdict(float)
    den = defaultdict(float)
    for row, wk, fk in zip(rows, w, f_values):
        key = tuple(row[i] for i in B)
        num[key] += wk * fk
        den[key] += wk
    return np.array([num[tuple(row[i] for i in B)] / den[tuple(row[i] for i in B)] for row in rows])


def _check_product(dist: EmpiricalDistribution, tol: float = 1e-12) -> None:
    if dist.r != dist.grid.size:
        raise DataError(f"support has {dist.r} rows, the full grid has {dist.grid.size}")
    rows, w = _rows(dist)
    margins = [defaultdict(float) for _ in range(dist.d)]
    for row, wk in zip(rows, w):
        for i, v in enumerate(row):
            margins[i][v] += wk
    for row, wk in zip(rows, w):
        prod = 1.0
        for i, v in enumerate(row):
            prod *= margins[i][v]
        if abs(prod - wk) > tol:
            raise DataError(f"distribution is not a product of its marginals at row {row}")


def mobius_anova(dist: EmpiricalDistribution, f_values) -> Dict[Subset, np.ndarray]:
    """
    Independent-inputs ANOVA by inclusion-exclusion of conditional means.

    Returns every subset of features (the empty one included) mapped to its
    component on the support rows.
    """
    _check_product(dist)
    f = np.asarray(f_values, dtype=np.float64)
    cond = {B: conditional_expectation(dist, f, B) for B in _all_subsets(range(dist.d))}
    out = {}
    for A in cond:
        comp = np.zeros(dist.r)
        for B in _all_subsets(A):
            comp += (-1) ** (len(A) - len(B)) * cond[B]
        out[A] = comp
    return out


def shapley_from_components(components: Mapping[Subset, np.ndarray], d: int) -> np.ndarray:
    """Split every ``f_A(x)`` equally among the features of ``A``."""
    r = len(next(iter(components.values())))
    out = np.zeros((r, d))
    for A, comp in components.items():
        for i in A:
            out[:, i] += np.asarray(comp) / len(A)
    return out


def conditional_shapley(dist: EmpiricalDistribution, f_values) -> np.ndarray:
    """
    Classic Shapley values of every support row for the game
    ``v(S) = E[f | X_S = x_S]``, summed over all coalitions; ``(r, d)``.
    """
    d = dist.d
    f = np.asarray(f_values, dtype=np.float64)
    value = {S: conditional_expectation(dist, f, S) for S in _all_subsets(range(d))}
    out = np.zeros((dist.r, d))
    for i in range(d):
        others = [j for j in range(d) if j != i]
        for S in _all_subsets(others):
            weight = math.factorial(len(S)) * math.factorial(d - len(S) - 1) / math.factorial(d)
            with_i = tuple(sorted(S + (i,)))
            out[:, i] += weight * (value[with_i] - value[S])
    return out


def parity(support: np.ndarray, A: Subset) -> np.ndarray:
    """``chi_A(x) = (-1)^{sum_{i in A} x_i}``."""
    if not A:
        return np.ones(support.shape[0])
    return (-1.0) ** support[:, list(A)].sum(axis=1)


def walsh_transform(dist: EmpiricalDistribution, f_values, max_d: int = 16) -> Dict[Subset, float]:
    """Fourier coefficients ``E[f chi_A]`` of ``f`` on the uniform Boolean cube."""
    d = dist.d
    if d > max_d:
        raise DataError(f"d={d} exceeds the Walsh oracle limit {max_d}")
    if any(n != 2 for n in dist.grid.cardinalities) or dist.r != 2**d:
        raise DataError("walsh_transform needs the full Boolean cube")
    if np.max(np.abs(dist.weights - 1.0 / dist.r)) > 1e-12:
        raise DataError("walsh_transform needs uniform weights")
    f = np.asarray(f_values, dtype=np.float64)
    return {A: float(np.mean(f * parity(dist.support, A))) for A in _all_subsets(range(d))}


def check_hierarchical_orthogonality(dist: EmpiricalDistribution,
                                     components: Mapping[Subset, np.ndarray],
                                     tol: float = 1e-10) -> OracleReport:
    """
    Test each component against every indicator ``1{X_B = b}`` for every
    strict subset ``B`` of its features, which spans all functions of
    ``X_B``. Pairwise ``|<f_A, f_B>|`` between supplied components is
    reported as well.
    """
    w = dist.weights
    worst = 0.0
    worst_at = None
    pair_worst = 0.0
    for A, comp in components.items():
        if not A:
            continue
        comp = np.asarray(comp, dtype=np.float64)
        for B in _all_subsets(A):
            if len(B) == len(A):
                continue
            if B:
                _, groups = np.unique(dist.support[:, list(B)], axis=0, return_inverse=True)
                groups = groups.ravel()
            else:
                groups = np.zeros(dist.r, dtype=np.int64)
            sums = np.bincount(groups, weights=comp * w)
            dev = float(np.max(np.abs(sums)))
            if dev > worst:
                worst, worst_at = dev, (A, B)
            if B in components:
                other = np.asarray(components[B], dtype=np.float64)
                pair_worst = max(pair_worst, abs(float(np.sum(comp * other * w))))
    return OracleReport(
        "hierarchical_orthogonality",
        worst,
        tol,
        details={"worst_pair": [list(x) for x in worst_at] if worst_at else None,
                 "max_pairwise_component_product": pair_worst},
    )


def _naive_phi(rows, w, cardinalities, A, z) -> np.ndarray:
    prob = defaultdict(float)
    for row, wk in zip(rows, w):
        prob[tuple(row[i] for i in A)] += wk
    out = np.empty(len(rows))
    for k, row in enumerate(rows):
        num = 1.0
        for i, zi in zip(A, z):
            num *= (row[i] == zi) - (row[i] == cardinalities[i] - 1)
        out[k] = num / prob[tuple(row[i] for i in A)]
    return out


def exhaustive_basis_rank(dist: EmpiricalDistribution, max_order: Optional[int] = None,
                          limit: int = 4096) -> int:
    """Numerical rank of the full set of basis columns up to ``max_order``."""
    card = dist.grid.cardinalities
    d = dist.d
    max_order = d if max_order is None else max_order
    keys = []
    for A in _all_subsets(range(d)):
        if len(A) > max_order:
            continue
        for z in itertools.product(*[range(card[i] - 1) for i in A]):
            keys.append((A, z))
            if len(keys) > limit:
                raise DataError(f"more than {limit} basis columns; refusing to materialize")
    rows, w = _rows(dist)
    M = np.column_stack([_naive_phi(rows, w, card, A, z) for A, z in keys])
    M = M * np.sqrt(dist.weights)[:, None]
    norms = np.linalg.norm(M, axis=0)
    M = M[:, norms > 0] / norms[norms > 0]
    if M.shape[1] == 0:
        return 0
    return int(np.linalg.matrix_rank(M))
