"""Mixing profiles of finite-state arrays.

Three routes produce a :class:`MixingProfile`:

- exact coefficients of the chain ``zeta`` on small state spaces, where by
  the Markov property the past/future coefficients reduce to the joint law of
  ``(zeta_k, zeta_{k+j})``;
- Dobrushin contraction products, an upper bound for every chain;
- declared analytic bounds (local windows, truncated expanding maps).

Coefficients of ``zeta`` bound those of ``xi = g(zeta)``, so every route
yields sound upper bounds for the array.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import ConfigError, ResourceBudgetError, UnsupportedModelError, ValidationError
from varlin.generators.model import ArrayModel, ModelKind

logger = logging.getLogger(__name__)

_NEGLIGIBLE = 1e-300
_EXACT_FLOOR = 1e-15


class Provenance(Enum):
    """Where a coefficient sequence comes from."""

    EXACT = "exact-tiny"
    DOBRUSHIN = "dobrushin-bound"
    DECLARED = "declared"


@dataclass(frozen=True, eq=False)
class MixingProfile:
    """
    Per-lag ``alpha``, ``rho`` and ``phi`` for one row, lag ``j`` at position ``j - 1``.

    Attributes:
        n: Row size; lags run over ``1..n``.
        alpha: Strong-mixing coefficients, or None.
        rho: Maximal-correlation coefficients, or None.
        phi: Uniform-mixing coefficients, or None.
        provenance: Provenance of each present sequence.
        horizon: Future horizon used by the exact route.
        model_id: Identifier of the model the profile describes.
    """

    n: int
    alpha: np.ndarray | None = None
    rho: np.ndarray | None = None
    phi: np.ndarray | None = None
    provenance: dict[str, Provenance] = field(default_factory=dict)
    horizon: int | None = None
    model_id: str = ""

    def __post_init__(self):
        for name in ("alpha", "rho", "phi"):
            seq = getattr(self, name)
            if seq is None:
                continue
            if seq.shape != (self.n,):
                raise ValidationError(f"{name} profile must have {self.n} lags, got {seq.shape}")
            upper = 0.25 if name == "alpha" else 1.0
            if np.any(seq < -1e-15) or np.any(seq > upper + 1e-12):
                raise ValidationError(f"{name} profile leaves [0, {upper}]")

    def at(self, name: str, j: int) -> float:
        """Coefficient ``name`` at lag ``j``; 0 beyond the row."""
        seq = getattr(self, name)
        if seq is None:
            raise ConfigError(f"Profile has no {name} sequence")
        if j > self.n:
            return 0.0
        return float(seq[j - 1])

    def smoothed(self) -> "MixingProfile":
        """Running minimum of every sequence, a monotone bound with the same provenance."""
        updates = {
            name: np.minimum.accumulate(getattr(self, name))
            for name in ("alpha", "rho", "phi")
            if getattr(self, name) is not None
        }
        return replace(self, **updates)

    def truncated(self, n: int) -> "MixingProfile":
        """Profile of the first ``n`` lags."""
        updates = {
            name: getattr(self, name)[:n].copy()
            for name in ("alpha", "rho", "phi")
            if getattr(self, name) is not None
        }
        return replace(self, n=n, **updates)

    def to_csv(self, path: str | Path) -> None:
        """Write rows ``lag, alpha, rho, phi, provenance``; missing values are empty."""
        tags = {p.value for p in self.provenance.values()}
        if len(tags) == 1:
            tag = tags.pop()
        else:
            tag = ";".join(f"{k}={v.value}" for k, v in sorted(self.provenance.items()))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "alpha", "rho", "phi", "provenance"])
            for j in range(1, self.n + 1):
                row = [j]
                for name in ("alpha", "rho", "phi"):
                    seq = getattr(self, name)
                    row.append("" if seq is None else repr(float(seq[j - 1])))
                row.append(tag)
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path: str | Path, model_id: str = "") -> "MixingProfile":
        """Read a profile written by :meth:`to_csv` or supplied by hand."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"File not found: {path}")
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ConfigError(f"Empty mixing profile: {path}")
        lags = [int(r["lag"]) for r in rows]
        if lags != list(range(1, len(rows) + 1)):
            raise ConfigError("Profile lags must be 1..n in order")
        seqs = {}
        for name in ("alpha", "rho", "phi"):
            cells = [r.get(name, "") for r in rows]
            if all(c.strip() for c in cells):
                seqs[name] = np.array([float(c) for c in cells])
        tag = rows[0].get("provenance", Provenance.DECLARED.value) or Provenance.DECLARED.value
        if "=" in tag:
            provenance = {k: Provenance(v) for k, v in (item.split("=") for item in tag.split(";"))}
        else:
            provenance = {name: Provenance(tag) for name in seqs}
        return cls(n=len(rows), provenance=provenance, model_id=model_id or path.stem, **seqs)


def derived_from_phi(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(alpha, rho)`` with ``rho = min(1, 2 sqrt(phi))`` and ``alpha = min(phi, rho / 4)``."""
    rho = np.minimum(1.0, 2.0 * np.sqrt(phi))
    alpha = np.minimum(phi, rho / 4.0)
    return alpha, rho


def contraction_coefficient(matrix: np.ndarray) -> np.ndarray:
    """Dobrushin coefficient ``1/2 max_{s,s'} sum_t |P(s,t) - P(s',t)|``.

    Accepts one matrix or a stack; stacks are processed in chunks.
    """
    mats = np.asarray(matrix, dtype=float)
    single = mats.ndim == 2
    if single:
        mats = mats[None]
    size = mats.shape[-1]
    chunk = max(1, 2**22 // max(size**3, 1))
    out = np.empty(mats.shape[0])
    for start in range(0, mats.shape[0], chunk):
        part = mats[start : start + chunk]
        diff = np.abs(part[:, :, None, :] - part[:, None, :, :]).sum(axis=-1)
        out[start : start + chunk] = 0.5 * diff.max(axis=(1, 2))
    return out[0] if single else out


def _products_bound(deltas: np.ndarray, h: int, n: int) -> np.ndarray:
    """``max_k prod_{i < j // h} deltas[k + i h]`` for ``j = 1..n``; 1 where ``j < h``."""
    bound = np.ones(n)
    prod = deltas.copy()
    q = 1
    while prod.size and q * h <= n:
        top = float(prod.max())
        lo = q * h
        hi = min((q + 1) * h - 1, n)
        bound[lo - 1 : hi] = top
        if top < _NEGLIGIBLE:
            bound[lo - 1 :] = 0.0
            break
        q += 1
        prod = deltas[: prod.size - h] * prod[h:]
    return bound


def _submultiplicative_closure(phi: np.ndarray) -> np.ndarray:
    """Smallest changes making ``phi(i + j) <= phi(i) phi(j)`` and ``phi`` non-increasing."""
    phi = np.minimum.accumulate(phi.copy())
    for j in range(2, phi.size + 1):
        if phi[j - 2] == 0.0:
            phi[j - 1 :] = 0.0
            break
        left = phi[: j - 1]
        right = phi[j - 2 :: -1]
        phi[j - 1] = min(phi[j - 1], phi[j - 2], float((left * right).min()))
    return phi


def _chain_transitions(model: ArrayModel) -> np.ndarray:
    if model.kind not in (ModelKind.IID_LATTICE, ModelKind.INHOM_MARKOV):
        raise UnsupportedModelError(f"Dobrushin profiles need a finite-state chain, got {model.kind.value}")
    return np.asarray(model.transitions, dtype=float)


def dobrushin_phi_profile(model: ArrayModel, n: int | None = None, horizon: int | None = None) -> MixingProfile:
    """
    Upper bound ``phi(j) <= max_k prod_{i=k+1..k+j} delta(P_i)`` with derived ``rho`` and ``alpha``.

    The single-step product is refined by contraction coefficients of exact
    products of up to ``horizon`` consecutive matrices, and the result is
    closed under sub-multiplicativity.

    Args:
        model: IID or INHOM_MARKOV model.
        n: Number of lags, defaults to the row size.
        horizon: Longest exact product, defaults to the configured
            ``dobrushin_horizon``.

    Raises:
        UnsupportedModelError: Not a finite-state chain.
    """
    trans = _chain_transitions(model)
    n = model.n if n is None else n
    horizon = get_config().budget.dobrushin_horizon if horizon is None else horizon
    phi = _products_bound(contraction_coefficient(trans), 1, n)
    window = trans
    for h in range(2, min(horizon, n) + 1):
        window = np.matmul(window[:-1], trans[h - 1 :])
        phi = np.minimum(phi, _products_bound(contraction_coefficient(window), h, n))
    phi = _submultiplicative_closure(np.clip(phi, 0.0, 1.0))
    alpha, rho = derived_from_phi(phi)
    logger.debug("Dobrushin profile for %s: phi(1)=%.4g, horizon %d", model.model_id, phi[0] if n else 0.0, horizon)
    return MixingProfile(
        n=n,
        alpha=alpha,
        rho=rho,
        phi=phi,
        provenance={k: Provenance.DOBRUSHIN for k in ("alpha", "rho", "phi")},
        horizon=horizon,
        model_id=model.model_id,
    )


def _joint_coefficients(past: np.ndarray, kernel: np.ndarray, future: np.ndarray, subsets: np.ndarray):
    """Exact ``(alpha, rho, phi)`` of joint laws ``diag(past_k) kernel_k``, stacked over ``k``."""
    keep = past > 0
    tv = 0.5 * np.abs(kernel - future[:, None, :]).sum(axis=-1)
    phi = np.where(keep, tv, 0.0).max(axis=1)
    joint = past[:, :, None] * kernel
    centered = joint - past[:, :, None] * future[:, None, :]
    alpha = 0.5 * np.abs(np.einsum("as,ksy->kay", subsets, centered)).sum(axis=-1).max(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        root_p = np.sqrt(past)
        root_f = np.sqrt(future)
        normed = np.where(
            (root_p[:, :, None] > 0) & (root_f[:, None, :] > 0),
            centered / (root_p[:, :, None] * root_f[:, None, :]),
            0.0,
        )
    rho = np.linalg.svd(normed, compute_uv=False).max(axis=-1)
    return np.minimum(alpha, 0.25), np.minimum(rho, 1.0), np.minimum(phi, 1.0)


def is_homogeneous_stationary(model: ArrayModel, tol: float | None = None) -> bool:
    """All transition matrices equal and the initial law invariant under them."""
    if model.kind not in (ModelKind.IID_LATTICE, ModelKind.INHOM_MARKOV):
        return False
    tol = get_config().tolerance.row_sum if tol is None else tol
    trans = model.transitions
    if np.abs(trans - trans[0]).max() > tol:
        return False
    return bool(np.abs(model.initial_law @ trans[0] - model.initial_law).max() <= 1e-10)


def exact_chain_profile(model: ArrayModel, horizon: int = 1, n: int | None = None) -> MixingProfile:
    """
    Exact ``alpha``, ``rho`` and ``phi`` of the state chain for every lag.

    For a Markov chain the coefficients between ``zeta_{<=k}`` and
    ``zeta_{>=k+j}`` are those of the pair ``(zeta_k, zeta_{k+j})``, so a
    future horizon of one state is exact. The maximum runs over every start
    ``k``; homogeneous stationary chains need only ``k = 0``. Once ``phi``
    falls below ``1e-15`` the remaining lags repeat the last values.

    Raises:
        UnsupportedModelError: Not a finite-state chain.
        ResourceBudgetError: More states than the exact budget allows.
    """
    trans = _chain_transitions(model)
    n = model.n if n is None else n
    if horizon != 1:
        raise UnsupportedModelError("Exact chain profiles use a one-state future horizon")
    size = model.n_states
    budget = get_config().budget
    if size > budget.varpi_states or 2**size > budget.varpi_vertices:
        raise ResourceBudgetError(f"Exact profile over {size} states exceeds budget")
    subsets = np.array([[(a >> s) & 1 for s in range(size)] for a in range(2**size)], dtype=float)
    marg = model.marginals
    stationary = is_homogeneous_stationary(model)
    starts = np.array([0]) if stationary else np.arange(model.n)

    alpha = np.zeros(n)
    rho = np.zeros(n)
    phi = np.zeros(n)
    kernel = np.broadcast_to(np.eye(size), (starts.size, size, size)).copy()
    for j in range(1, n + 1):
        alive = starts + j <= model.n
        if not alive.any():
            break
        starts, kernel = starts[alive], kernel[alive]
        kernel = np.matmul(kernel, trans[starts + j - 1])
        a, r, f = _joint_coefficients(marg[starts], kernel, marg[starts + j], subsets)
        alpha[j - 1], rho[j - 1], phi[j - 1] = a.max(), r.max(), f.max()
        if phi[j - 1] < _EXACT_FLOOR:
            alpha[j:], rho[j:], phi[j:] = alpha[j - 1], rho[j - 1], phi[j - 1]
            break
    logger.debug("Exact profile for %s: %d starts, phi(1)=%.4g", model.model_id, 1 if stationary else model.n, phi[0])
    return MixingProfile(
        n=n,
        alpha=alpha,
        rho=rho,
        phi=phi,
        provenance={k: Provenance.EXACT for k in ("alpha", "rho", "phi")},
        horizon=horizon,
        model_id=model.model_id,
    ).smoothed()


def declared_window_profile(model: ArrayModel, base_profile: MixingProfile | None = None) -> MixingProfile:
    """
    Window profile ``phi_n(2m + j) <= phi_base(j)``, trivially bounded for lags ``<= 2m``.

    ``rho`` and ``alpha`` of the base shift the same way.
    """
    if model.kind != ModelKind.LOCAL_WINDOW:
        raise UnsupportedModelError("Declared window profiles need a local-window model")
    base = model.window.base
    base_profile = base_profile or profile_for_model(base)
    gap = 2 * model.window.half_width
    n = model.n

    def shifted(seq: np.ndarray | None, head: float) -> np.ndarray:
        out = np.full(n, head)
        tail = n - gap
        if tail > 0:
            src = np.zeros(tail)
            avail = min(tail, seq.size)
            src[:avail] = seq[:avail]
            out[gap:] = src
        return out

    phi = shifted(base_profile.phi, 1.0)
    rho = shifted(base_profile.rho, 1.0) if base_profile.rho is not None else derived_from_phi(phi)[1]
    alpha = shifted(base_profile.alpha, 0.25) if base_profile.alpha is not None else derived_from_phi(phi)[0]
    return MixingProfile(
        n=n,
        alpha=alpha,
        rho=rho,
        phi=phi,
        provenance={k: Provenance.DECLARED for k in ("alpha", "rho", "phi")},
        horizon=base_profile.horizon,
        model_id=model.model_id,
    )


def declared_expanding_profile(model: ArrayModel) -> MixingProfile:
    """Profile of an ``r``-cylinder approximant: dependent below lag ``r``, independent from lag ``r``.

    Digits are independent, so approximants ``r`` or more indices apart share no digit.
    """
    if model.kind != ModelKind.SEQUENTIAL_EXPANDING:
        raise UnsupportedModelError("Declared expanding profiles need an expanding-map model")
    r = model.expanding.approx_window
    if r is None:
        raise UnsupportedModelError("Exact expanding observables have no declared finite-lag profile")
    lags = np.arange(1, model.n + 1)
    phi = np.where(lags < r, 1.0, 0.0)
    alpha, rho = np.where(lags < r, 0.25, 0.0), phi.copy()
    return MixingProfile(
        n=model.n,
        alpha=alpha,
        rho=rho,
        phi=phi,
        provenance={k: Provenance.DECLARED for k in ("alpha", "rho", "phi")},
        model_id=model.model_id,
    )


def profile_for_model(model: ArrayModel) -> MixingProfile:
    """
    Choose the profile route for a model.

    - IID: all coefficients 0 (exact).
    - Homogeneous stationary chain within the exact budget: exact profile.
    - Other chains: Dobrushin bound.
    - Local window: declared shift of the base profile.
    - Expanding approximant: declared finite-range profile.
    """
    if model.kind == ModelKind.IID_LATTICE:
        zeros = np.zeros(model.n)
        return MixingProfile(
            n=model.n,
            alpha=zeros,
            rho=zeros.copy(),
            phi=zeros.copy(),
            provenance={k: Provenance.EXACT for k in ("alpha", "rho", "phi")},
            horizon=1,
            model_id=model.model_id,
        )
    if model.kind == ModelKind.INHOM_MARKOV:
        if is_homogeneous_stationary(model):
            try:
                return exact_chain_profile(model)
            except ResourceBudgetError:
                logger.info("Exact profile of %s over budget; using Dobrushin bound", model.model_id)
        return dobrushin_phi_profile(model)
    if model.kind == ModelKind.LOCAL_WINDOW:
        return declared_window_profile(model)
    return declared_expanding_profile(model)


def rho_sum(profile: MixingProfile) -> float:
    """``sum_{j=1..n} rho(j)``."""
    if profile.rho is None:
        raise ConfigError("Profile has no rho sequence")
    return math.fsum(profile.rho)


__all__ = [
    "Provenance",
    "MixingProfile",
    "derived_from_phi",
    "contraction_coefficient",
    "dobrushin_phi_profile",
    "is_homogeneous_stationary",
    "exact_chain_profile",
    "declared_window_profile",
    "declared_expanding_profile",
    "profile_for_model",
    "rho_sum",
]
