"""
Functional ANOVA decomposition on an empirical categorical distribution.

``decompose`` selects a basis, solves the Gram system and groups the
coefficients by feature subset into components ``f_A``. The components sum
to the fitted function, every non-empty component is centered, and each is
orthogonal to every function of a strict subset of its features. Local
Shapley attributions split each ``f_A(x)`` equally among the members of
``A``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .basis import IndexKey, design_columns, hierarchical_violation, project_hierarchical
from .distribution import EmpiricalDistribution, Subset, inner_product
from .exceptions import DataError
from .gram import DEFAULT_TOLERANCE, CoefficientVector, build_system, solve_coefficients
from .selection import SelectedBasis, SelectionConfig, greedy_select


_CLEANUP_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class Decomposition:
    """
    Selected keys, their coefficients and the materialized components.

    ``components`` maps each subset with at least one selected key (the
    empty subset included) to its r-vector over the support.
    """

    dist: EmpiricalDistribution
    coefficients: CoefficientVector
    components: Dict[Subset, np.ndarray]
    selection: Optional[SelectedBasis] = None
    wall_time: float = 0.0
    hierarchical: bool = True

    @property
    def keys(self) -> Tuple[IndexKey, ...]:
        return self.coefficients.keys

    @property
    def intercept(self) -> float:
        comp = self.components.get(())
        return float(comp[0]) if comp is not None else 0.0

    @property
    def fitted(self) -> np.ndarray:
        out = np.zeros(self.dist.r)
        for comp in self.components.values():
            out += comp
        return out

    @property
    def subsets(self) -> Tuple[Subset, ...]:
        return tuple(sorted(self.components, key=lambda A: (len(A), A)))

    @property
    def achieved_rank(self) -> int:
        return len(self.keys)

    def component(self, A: Iterable[int]) -> np.ndarray:
        """Component ``f_A`` on the support; zeros when ``A`` was not selected."""
        A = tuple(sorted(A))
        comp = self.components.get(A)
        return comp if comp is not None else np.zeros(self.dist.r)


def assemble(dist: EmpiricalDistribution, keys: Sequence[IndexKey], c,
             selection: Optional[SelectedBasis] = None, wall_time: float = 0.0,
             coefficients: Optional[CoefficientVector] = None,
             hierarchical: bool = True) -> Decomposition:
    """Group ``sum_j c_j phi_j`` by subset into components."""
    keys = tuple(keys)
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (len(keys),):
        raise DataError("one coefficient per key is required")
    phi = design_columns(dist, keys, hierarchical)
    groups: Dict[Subset, list] = {}
    for j, key in enumerate(keys):
        groups.setdefault(key.A, []).append(j)
    components = {}
    for A in sorted(groups, key=lambda A: (len(A), A)):
        idx = groups[A]
        comp = phi[:, idx] @ c[idx]
        if hierarchical and A and hierarchical_violation(dist, A, comp) > _CLEANUP_TOL:
            # large cancelling coefficients leave roundoff outside the
            # hierarchical complement; the projection removes only that
            comp = project_hierarchical(dist, A, comp)
        comp.setflags(write=False)
        components[A] = comp
    if coefficients is None:
        coefficients = CoefficientVector(keys, c)
    return Decomposition(dist, coefficients, components, selection, wall_time, hierarchical)


def decompose(dist: EmpiricalDistribution, f_values, config: SelectionConfig = SelectionConfig(),
              tolerance: float = DEFAULT_TOLERANCE, method: str = "qr") -> Decomposition:
    """Select a basis for ``dist`` and expand ``f`` on it."""
    f = np.asarray(f_values, dtype=np.float64)
    if f.shape != (dist.r,):
        raise DataError(f"f_values must have length r={dist.r}, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise DataError("f_values must be finite")
    t0 = time.perf_counter()
    selection = greedy_select(dist, config, f)
    system = build_system(dist, f, selection.keys, config.hierarchical)
    coef = solve_coefficients(system, tolerance, method=method)
    wall = time.perf_counter() - t0
    return assemble(dist, selection.keys, coef.c, selection, wall, coef, config.hierarchical)


def component_norms(dec: Decomposition, subsets: Optional[Iterable[Iterable[int]]] = None) -> Dict[Subset, float]:
    """
    Squared norms ``||f_A||^2``; the intercept entry is ``f_empty^2``.

    With ``subsets`` given, exactly those subsets are reported (zero for
    subsets without selected keys).
    """
    if subsets is None:
        subsets = dec.subsets
    out = {}
    for A in subsets:
        A = tuple(sorted(A))
        comp = dec.component(A)
        out[A] = inner_product(dec.dist, comp, comp)
    return out


@dataclass(frozen=True)
class AttributionVector:
    x: Tuple[int, ...]
    shap: np.ndarray
    baseline: float
    fitted: float

    @property
    def efficiency_gap(self) -> float:
        return float(self.baseline + self.shap.sum() - self.fitted)


def shapley_matrix(dec: Decomposition) -> np.ndarray:
    """``(r, d)`` Shapley values of every support row."""
    out = np.zeros((dec.dist.r, dec.dist.d))
    for A, comp in dec.components.items():
        if not A:
            continue
        share = comp / len(A)
        for i in A:
            out[:, i] += share
    return out


def shapley(dec: Decomposition, x: Sequence[int]) -> AttributionVector:
    """
    Attribution of the query row ``x``; it must belong to the support.

    Raises :class:`~catanova.exceptions.OutOfSupportError` otherwise.
    """
    k = dec.dist.locate(x)
    shap = np.zeros(dec.dist.d)
    fitted = 0.0
    for A, comp in dec.components.items():
        val = float(comp[k])
        fitted += val
        for i in A:
            shap[i] += val / len(A)
    return AttributionVector(tuple(int(v) for v in x), shap, dec.intercept, fitted)


def global_importance(dec: Decomposition, i: int) -> float:
    """``||f_i||_1``: mean absolute main effect of feature ``i``."""
    comp = dec.components.get((i,))
    if comp is None:
        return 0.0
    col = dec.dist.support[:, i]
    _, first = np.unique(col, return_index=True)
    probs = dec.dist.category_probs(i)
    return float(sum(abs(comp[k]) * probs[col[k]] for k in first))


def global_importances(dec: Decomposition) -> np.ndarray:
    return np.array([global_importance(dec, i) for i in range(dec.dist.d)])


@dataclass(frozen=True)
class DiagnosticsReport:
    r_squared: float
    r_squared_defined: bool
    mse: float
    relative_mse: float
    orthogonality_metric: float
    component_norms: Dict[Subset, float] = field(default_factory=dict)
    achieved_rank: int = 0
    wall_time: float = 0.0


def orthogonality_metric(dec: Decomposition) -> float:
    """Largest ``|<f_A, f_B>|`` over selected subsets ``B`` strictly inside ``A``."""
    worst = 0.0
    subsets = dec.subsets
    for A in subsets:
        sa = set(A)
        for B in subsets:
            if len(B) < len(A) and sa.issuperset(B):
                worst = max(worst, abs(inner_product(dec.dist, dec.components[A], dec.components[B])))
    return worst


def metrics(dec: Decomposition, f_values) -> DiagnosticsReport:
    """Reconstruction and orthogonality diagnostics against the target."""
    dist = dec.dist
    f = np.asarray(f_values, dtype=np.float64)
    if f.shape != (dist.r,):
        raise DataError(f"f_values must have length r={dist.r}")
    resid = f - dec.fitted
    mse = inner_product(dist, resid, resid)
    mean = float(np.dot(dist.weights, f))
    centered = f - mean
    var = inner_product(dist, centered, centered)
    second = inner_product(dist, f, f)
    scale = (1.0 + float(np.max(np.abs(f)))) ** 2
    exact = mse <= 1e-24 * scale
    if var > 1e-24 * scale:
        r2, defined = 1.0 - mse / var, True
    elif exact:
        r2, defined = 1.0, True
    else:
        r2, defined = float("nan"), False
    if second > 0:
        rel = mse / second
    else:
        rel = 0.0 if exact else float("nan")
    return DiagnosticsReport(
        r_squared=r2,
        r_squared_defined=defined,
        mse=mse,
        relative_mse=rel,
        orthogonality_metric=orthogonality_metric(dec),
        component_norms=component_norms(dec),
        achieved_rank=dec.achieved_rank,
        wall_time=dec.wall_time,
    )
