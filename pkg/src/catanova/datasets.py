"""
Small reference distributions and seeded random instance generators.

The generators return ``(dist, f_values)`` pairs and only ever draw from the
``numpy.random.Generator`` they are handed, so a seed fixes the instance.
"""
from __future__ import annotations

import itertools
from typing import Optional, Sequence, Tuple

import numpy as np

from .distribution import EmpiricalDistribution, HyperGrid, from_dataset


def full_grid(cardinalities: Sequence[int]) -> np.ndarray:
    """All rows of the hypergrid in lexicographic order."""
    return np.array(list(itertools.product(*[range(n) for n in cardinalities])), dtype=np.int64)


def analytical_case() -> Tuple[EmpiricalDistribution, np.ndarray]:
    """
    Five features: X1, X2, X4 i.i.d. uniform on {0, 1, 2}, X3 a copy of X2
    and X5 stuck at 1; target ``sign(X1 - X2 + X3 / 2)``.

    X5 is declared with two categories so that its unobserved category 0
    exists in the grid.
    """
    rows = []
    for x1, x2, x4 in itertools.product(range(3), repeat=3):
        rows.append((x1, x2, x2, x4, 1))
    dist = from_dataset(np.array(rows), HyperGrid((3, 3, 3, 3, 2)))
    X = dist.support
    f = np.sign(X[:, 0] - X[:, 1] + 0.5 * X[:, 2])
    return dist, f.astype(np.float64)


def two_bernoulli(q1: float = 0.3, q2: float = 0.2) -> EmpiricalDistribution:
    """Support ``{(0,0), (0,1), (1,0)}`` with ``P(X1=1) = q1``, ``P(X2=1) = q2``."""
    if not (q1 > 0 and q2 > 0 and q1 + q2 < 1):
        raise ValueError("need q1, q2 > 0 and q1 + q2 < 1")
    support = np.array([[0, 0], [0, 1], [1, 0]])
    weights = np.array([1.0 - q1 - q2, q2, q1])
    return EmpiricalDistribution(HyperGrid((2, 2)), support, weights)


def boolean_cube(d: int) -> EmpiricalDistribution:
    """Uniform distribution on ``{0, 1}^d``."""
    support = full_grid((2,) * d)
    return EmpiricalDistribution(HyperGrid((2,) * d), support, np.full(support.shape[0], 2.0 ** -d))


def random_product(rng: np.random.Generator, d: int, cardinalities: Optional[Sequence[int]] = None,
                   max_card: int = 4) -> EmpiricalDistribution:
    """Full-support product distribution with random positive marginals."""
    if cardinalities is None:
        cardinalities = rng.integers(2, max_card + 1, size=d)
    card = tuple(int(n) for n in cardinalities)
    margins = []
    for n in card:
        p = rng.uniform(0.2, 1.0, size=n)
        margins.append(p / p.sum())
    support = full_grid(card)
    w = np.ones(support.shape[0])
    for i, p in enumerate(margins):
        w *= p[support[:, i]]
    return EmpiricalDistribution(HyperGrid(card), support, w / w.sum())


def random_sparse(rng: np.random.Generator, d: int, cardinalities: Optional[Sequence[int]] = None,
                  max_card: int = 4, coverage: Tuple[float, float] = (0.3, 1.0)) -> EmpiricalDistribution:
    """
    Random support covering a uniform fraction of the grid in ``coverage``,
    with weights drawn uniformly from ``[0.1, 1]`` and normalized.
    """
    if cardinalities is None:
        cardinalities = rng.integers(2, max_card + 1, size=d)
    card = tuple(int(n) for n in cardinalities)
    size = int(np.prod(card))
    r = max(1, int(round(rng.uniform(*coverage) * size)))
    cells = np.sort(rng.choice(size, size=r, replace=False))
    support = np.array(np.unravel_index(cells, card)).T
    w = rng.uniform(0.1, 1.0, size=r)
    return EmpiricalDistribution(HyperGrid(card), support, w / w.sum())


def random_target(rng: np.random.Generator, dist: EmpiricalDistribution) -> np.ndarray:
    return rng.normal(size=dist.r)
