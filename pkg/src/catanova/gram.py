"""
Gram systems ``Gamma c = mu`` restricted to a selected list of keys.

``Gamma`` holds the pairwise inner products of the selected basis functions
and ``mu`` their inner products with the target. Two solvers are provided:

* ``"qr"`` (default) solves the equivalent weighted least-squares problem
  with a complete orthogonal factorization of ``sqrt(w) * Phi``. It never
  forms ``Gamma`` for the solve, which matters when rare categories put large
  ``1/p_A`` factors in the columns.
* ``"cholesky"`` factors ``Gamma`` with diagonal pivoting and falls back to
  the minimum-norm least-squares solution when ``Gamma`` is singular.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .basis import IndexKey, column_values, design_columns
from .distribution import EmpiricalDistribution, inner_product
from .exceptions import DataError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GramSystem:
    keys: tuple
    gram: np.ndarray
    mean: np.ndarray
    # sqrt(w)-scaled design and target, kept for the orthogonal solver
    design: Optional[np.ndarray] = None
    target: Optional[np.ndarray] = None

    def __post_init__(self):
        gram = np.asarray(self.gram, dtype=np.float64)
        mean = np.asarray(self.mean, dtype=np.float64)
        m = len(self.keys)
        if gram.shape != (m, m) or mean.shape != (m,):
            raise DataError(f"gram must be {m}x{m} and mean of length {m}")
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "mean", mean)

    @property
    def m(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class CoefficientVector:
    keys: tuple
    c: np.ndarray
    method: str = "qr"
    residual: float = 0.0

    def as_dict(self) -> dict:
        return dict(zip(self.keys, self.c.tolist()))


def gram_entry(dist: EmpiricalDistribution, key_a: IndexKey, key_b: IndexKey,
               hierarchical: bool = False) -> float:
    """``<phi_a, phi_b>``; plain basis columns unless ``hierarchical``."""
    key_a.check(dist.grid)
    key_b.check(dist.grid)
    return inner_product(dist, column_values(dist, key_a, hierarchical),
                         column_values(dist, key_b, hierarchical))


def mean_coefficient(dist: EmpiricalDistribution, f_values, key: IndexKey,
                     hierarchical: bool = False) -> float:
    """``<f, phi>``; plain basis column unless ``hierarchical``."""
    key.check(dist.grid)
    return inner_product(dist, f_values, column_values(dist, key, hierarchical))


def build_system(dist: EmpiricalDistribution, f_values, keys: Sequence[IndexKey],
                 hierarchical: bool = True) -> GramSystem:
    """
    Assemble ``Gamma`` and ``mu`` for ``keys`` (order preserved).

    With ``hierarchical`` the corrected columns of
    :func:`~catanova.basis.corrected_phi_values` are used; they coincide with
    the plain ones wherever the plain ones are already hierarchically
    orthogonal.
    """
    keys = tuple(keys)
    if len(set(keys)) != len(keys):
        raise DataError("keys must be distinct")
    f = np.asarray(f_values, dtype=np.float64)
    if f.shape != (dist.r,):
        raise DataError(f"f_values must have length r={dist.r}, got shape {f.shape}")
    for key in keys:
        key.check(dist.grid)
    phi = design_columns(dist, keys, hierarchical)
    weighted = phi * dist.weights[:, None]
    gram = weighted.T @ phi
    gram = 0.5 * (gram + gram.T)
    mean = weighted.T @ f
    sqrt_w = np.sqrt(dist.weights)
    return GramSystem(keys, gram, mean, phi * sqrt_w[:, None], f * sqrt_w)


def _residual_vector(system: GramSystem, c: np.ndarray) -> np.ndarray:
    """
    ``Gamma c - mu`` evaluated as ``D^T (D c - t)`` in extended precision.

    Forming ``Gamma c`` in double precision has a rounding floor of about
    ``eps ||Gamma|| ||c||``, which on ill-conditioned bases is larger than
    the residual being measured.
    """
    if system.design is None:
        return system.gram @ c - system.mean
    D = system.design.astype(np.longdouble)
    e = D @ c.astype(np.longdouble) - system.target.astype(np.longdouble)
    return D.T @ e


def _residual(system: GramSystem, c: np.ndarray) -> float:
    return float(np.linalg.norm(_residual_vector(system, c).astype(np.float64)))


def _refine(system: GramSystem, c: np.ndarray, steps: int = 2) -> np.ndarray:
    """Iterative refinement of a least-squares solution with extended-precision residuals."""
    D = system.design
    rcond = np.finfo(float).eps * max(D.shape)
    for _ in range(steps):
        e = (system.target.astype(np.longdouble)
             - D.astype(np.longdouble) @ c.astype(np.longdouble)).astype(np.float64)
        dc = scipy.linalg.lstsq(D, e, lapack_driver="gelsy", cond=rcond)[0]
        c = c + dc
    return c


def _pivoted_cholesky(gram: np.ndarray, tolerance: float):
    """Solve via LAPACK ``pstrf``; returns None when Gamma is rank deficient."""
    m = gram.shape[0]
    scale = float(np.max(np.abs(np.diag(gram)))) if m else 0.0
    if scale <= 0:
        return None
    factor, piv, rank, info = lapack.dpstrf(gram, lower=0, tol=tolerance * scale)
    if info < 0 or rank < m:
        return None
    return np.triu(factor), piv - 1


def solve_coefficients(system: GramSystem, tolerance: float = DEFAULT_TOLERANCE,
                       method: str = "qr") -> CoefficientVector:
    """
    Solve ``Gamma c = mu``.

    Singular systems (over-complete key lists) get the minimum-norm solution.
    Raises :class:`NumericalError` when ``||Gamma c - mu|| > tolerance * ||mu||``
    even after the fallback path.
    """
    if system.m == 0:
        return CoefficientVector((), np.zeros(0), method, 0.0)
    bound = tolerance * float(np.linalg.norm(system.mean))
    if method == "qr":
        attempts = ["qr", "lstsq"] if system.design is not None else ["cholesky", "lstsq"]
    elif method == "cholesky":
        attempts = ["cholesky", "lstsq"]
    else:
        raise ValueError(f"unknown method {method!r}")

    best = None
    for how in attempts:
        if how == "qr":
            c = scipy.linalg.lstsq(system.design, system.target, lapack_driver="gelsy",
                                   cond=np.finfo(float).eps * max(system.design.shape))[0]
            c = _refine(system, c)
        elif how == "cholesky":
            fac = _pivoted_cholesky(system.gram, tolerance)
            if fac is None:
                logger.debug("pivoted Cholesky found a singular Gram matrix; falling back")
                continue
            R, piv = fac
            rhs = system.mean[piv]
            y = scipy.linalg.solve_triangular(R, rhs, trans="T", lower=False)
            x = scipy.linalg.solve_triangular(R, y, lower=False)
            c = np.empty_like(x)
            c[piv] = x
        else:
            c = scipy.linalg.lstsq(system.gram, system.mean, lapack_driver="gelsd")[0]
        res = _residual(system, c)
        if best is None or res < best[1]:
            best = (c, res, how)
        if res <= bound:
            return CoefficientVector(system.keys, c, how, res)
    c, res, how = best
    raise NumericalError(
        f"Gram system residual {res:.3e} exceeds tolerance {bound:.3e} (last method {how})"
    )
