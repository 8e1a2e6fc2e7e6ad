import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from catanova.distribution import EmpiricalDistribution, HyperGrid

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def distributions(draw, max_d=4, max_card=4, min_coverage=0.0, full=False):
    """Random support on a random grid with random positive weights."""
    d = draw(st.integers(1, max_d))
    card = tuple(draw(st.lists(st.integers(1, max_card), min_size=d, max_size=d)))
    cells = list(itertools.product(*[range(n) for n in card]))
    if full:
        chosen = cells
    else:
        lo = max(1, int(np.ceil(min_coverage * len(cells))))
        idx = draw(st.sets(st.integers(0, len(cells) - 1), min_size=lo, max_size=len(cells)))
        chosen = [cells[k] for k in sorted(idx)]
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=len(chosen), max_size=len(chosen)))
    w = np.asarray(raw)
    return EmpiricalDistribution(HyperGrid(card), np.array(chosen, dtype=np.int64).reshape(len(chosen), d),
                                 w / w.sum())


@st.composite
def product_distributions(draw, max_d=4, max_card=3):
    """Full-grid product distribution with random marginals."""
    d = draw(st.integers(1, max_d))
    card = tuple(draw(st.lists(st.integers(2, max_card), min_size=d, max_size=d)))
    margins = []
    for n in card:
        p = np.asarray(draw(st.lists(st.floats(0.1, 1.0), min_size=n, max_size=n)))
        margins.append(p / p.sum())
    support = np.array(list(itertools.product(*[range(n) for n in card])), dtype=np.int64)
    w = np.ones(len(support))
    for i, p in enumerate(margins):
        w *= p[support[:, i]]
    return EmpiricalDistribution(HyperGrid(card), support, w / w.sum())


def targets(dist):
    return st.lists(st.floats(-10, 10), min_size=dist.r, max_size=dist.r).map(np.asarray)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bernoulli_pair():
    """Three-point support {(0,0),(0,1),(1,0)} with q1 = 0.3, q2 = 0.2."""
    from catanova.datasets import two_bernoulli
    return two_bernoulli(0.3, 0.2)
