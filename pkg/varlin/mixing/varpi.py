"""Brute-force dependence coefficients on tiny joint laws and their interpolation."""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import svdvals

from varlin.config.tolerance import get_config
from varlin.errors import DomainError, MissingDataError, ResourceBudgetError, UnsupportedOrderError, ValidationError

logger = logging.getLogger(__name__)

_VERTEX_CHUNK = 2**15


def _check_joint(joint: np.ndarray) -> np.ndarray:
    joint = np.asarray(joint, dtype=float)
    if joint.ndim != 2:
        raise ValidationError("Joint law must be a (past, future) matrix")
    if np.any(joint < 0) or abs(joint.sum() - 1) > get_config().tolerance.mass:
        raise ValidationError("Joint law is not a probability matrix")
    return joint


def _sign_vertices(size: int, start: int, stop: int) -> np.ndarray:
    """Vertices ``start..stop-1`` of ``{-1, +1}^size`` in binary order."""
    idx = np.arange(start, stop)[:, None]
    bits = (idx >> np.arange(size)[None, :]) & 1
    return 2.0 * bits - 1.0


def _norm(values: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    """Column-wise ``L^p(weights)`` norms of ``values`` with shape ``(atoms, k)``."""
    if math.isinf(p):
        return np.abs(values[weights > 0]).max(axis=0)
    return (weights @ np.abs(values) ** p) ** (1.0 / p)


def brute_force_varpi(joint: np.ndarray, q: float, p: float) -> float:
    """
    Exact ``varpi_{q,p}`` between the past and future coordinates of a joint law.

    ``varpi_{q,p} = sup { ||E[h | past] - E[h]||_p : h(future), ||h||_q <= 1 }``.

    For ``q = inf`` the map ``h -> ||E[h | past] - E[h]||_p`` is convex on the
    cube ``[-1, 1]^F`` so the supremum sits at a sign vertex, found by
    enumeration. For ``q = p = 2`` it is the largest singular value of the
    centered normalized joint matrix.

    Args:
        joint: Matrix ``P(past = a, future = b)``; a stack of such matrices
            returns an array of values.
        q: ``2`` or ``inf``.
        p: ``1``, ``2`` or ``inf``.

    Raises:
        UnsupportedOrderError: ``(q, p)`` has no exact finite algorithm.
        ResourceBudgetError: Enumeration beyond the configured budget.
    """
    arr = np.asarray(joint, dtype=float)
    if arr.ndim == 3:
        return np.array([brute_force_varpi(j, q, p) for j in arr])
    joint = _check_joint(arr)
    budget = get_config().budget
    past = joint.sum(axis=1)
    future = joint.sum(axis=0)

    if math.isinf(q):
        if p not in (1, 2) and not math.isinf(p):
            raise UnsupportedOrderError(f"varpi_(inf,{p}) is not supported")
        size = joint.shape[1]
        vertices = 2**size
        if vertices > budget.varpi_vertices:
            raise ResourceBudgetError(f"{vertices} sign vertices exceed budget {budget.varpi_vertices}")
        keep = past > 0
        cond = joint[keep] / past[keep, None]
        weights = past[keep]
        best = 0.0
        for start in range(0, vertices, _VERTEX_CHUNK):
            v = _sign_vertices(size, start, min(start + _VERTEX_CHUNK, vertices))
            centered = cond @ v.T - (future @ v.T)[None, :]
            best = max(best, float(_norm(centered, weights, p).max()))
        return best

    if q == 2 and p == 2:
        if max(joint.shape) > budget.varpi_states:
            raise ResourceBudgetError(f"Operator norm on {joint.shape} exceeds budget {budget.varpi_states}")
        a, b = past > 0, future > 0
        sub = joint[np.ix_(a, b)]
        ra, rb = np.sqrt(past[a]), np.sqrt(future[b])
        centered = sub / np.outer(ra, rb) - np.outer(ra, rb)
        return float(svdvals(centered).max(initial=0.0)) if centered.size else 0.0

    raise UnsupportedOrderError(f"varpi_({q},{p}) has no exact enumeration; use interpolate_bound")


def _subsets(size: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=size)))


def definitional_alpha_phi(joint: np.ndarray) -> tuple[float, float]:
    """
    ``(alpha, phi)`` by enumerating every pair of events.

    ``alpha = sup |P(A and B) - P(A)P(B)|`` and
    ``phi = sup_{P(A) > 0} |P(B | A) - P(B)|``.
    """
    joint = _check_joint(joint)
    if sum(joint.shape) > 24:
        raise ResourceBudgetError("Event enumeration needs at most 24 atoms in total")
    ea = _subsets(joint.shape[0])
    eb = _subsets(joint.shape[1])
    pab = ea @ joint @ eb.T
    pa = ea @ joint.sum(axis=1)
    pb = eb @ joint.sum(axis=0)
    alpha = float(np.abs(pab - np.outer(pa, pb)).max())
    pos = pa > 0
    phi = float(np.abs(pab[pos] / pa[pos, None] - pb[None, :]).max())
    return alpha, phi


@dataclass(frozen=True)
class InterpolatedBound:
    value: float
    branch: str  # 'phi', 'rho' or 'zero'


def interpolate_bound(profile, q: float, j: int) -> InterpolatedBound:
    """
    Bound ``varpi_{q,q}(j) <= min(phi(j)^(1 - 1/q), rho(j)^(2/q))``.

    The ``rho`` branch is used only for ``q >= 2``. Lags beyond the row give 0.

    Raises:
        MissingDataError: The profile carries neither ``phi`` nor ``rho``.
    """
    if q < 1:
        raise DomainError(f"Norm index must be at least 1, got {q}")
    if j < 1:
        raise DomainError(f"Lag must be at least 1, got {j}")
    if profile.phi is None and profile.rho is None:
        raise MissingDataError("Profile has neither phi nor rho")
    if j > profile.n:
        return InterpolatedBound(0.0, "zero")
    branches = {}
    if profile.phi is not None:
        branches["phi"] = float(profile.phi[j - 1]) ** (1.0 - 1.0 / q)
    if profile.rho is not None and q >= 2:
        branches["rho"] = float(profile.rho[j - 1]) ** (2.0 / q)
    if not branches:
        raise MissingDataError(f"No interpolation branch available for q={q}")
    branch = min(branches, key=branches.get)
    return InterpolatedBound(branches[branch], branch)


def varpi_profile(profile, q: float) -> np.ndarray:
    """Vector of ``interpolate_bound(profile, q, j)`` over lags ``j = 1..n``."""
    if profile.phi is None and profile.rho is None:
        raise MissingDataError("Profile has neither phi nor rho")
    candidates = []
    if profile.phi is not None:
        candidates.append(np.asarray(profile.phi) ** (1.0 - 1.0 / q))
    if profile.rho is not None and q >= 2:
        candidates.append(np.asarray(profile.rho) ** (2.0 / q))
    if not candidates:
        raise MissingDataError(f"No interpolation branch available for q={q}")
    return np.minimum.reduce(candidates)


def varpi_sum(profile, q: float, start: int = 1) -> float:
    """``Pi_q = 1 + sum_{s >= start} varpi_{q,q}(s)``."""
    return 1.0 + math.fsum(varpi_profile(profile, q)[start - 1 :])


@dataclass(frozen=True)
class Violation:
    lag: int
    inequality: str
    lhs: float
    rhs: float


def consistency_check(profile, tol: float | None = None) -> list[Violation]:
    """
    Lags where ``alpha <= phi``, ``alpha <= rho / 4`` or ``rho <= 2 sqrt(phi)`` fails.

    Only inequalities whose sequences are all present are checked.
    """
    tol = get_config().tolerance.mixing if tol is None else tol
    checks = []
    if profile.alpha is not None and profile.phi is not None:
        checks.append(("alpha<=phi", profile.alpha, profile.phi))
    if profile.alpha is not None and profile.rho is not None:
        checks.append(("alpha<=rho/4", profile.alpha, np.asarray(profile.rho) / 4))
    if profile.rho is not None and profile.phi is not None:
        checks.append(("rho<=2sqrt(phi)", profile.rho, 2 * np.sqrt(profile.phi)))
    out = []
    for name, lhs, rhs in checks:
        for idx in np.flatnonzero(np.asarray(lhs) > np.asarray(rhs) + tol):
            out.append(Violation(int(idx) + 1, name, float(lhs[idx]), float(rhs[idx])))
    out.sort(key=lambda v: (v.lag, v.inequality))
    if out:
        logger.debug("Mixing profile %s has %d violations", getattr(profile, "model_id", ""), len(out))
    return out


__all__ = [
    "brute_force_varpi",
    "definitional_alpha_phi",
    "InterpolatedBound",
    "interpolate_bound",
    "varpi_profile",
    "varpi_sum",
    "Violation",
    "consistency_check",
]
