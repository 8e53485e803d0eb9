"""Log-log rate fits and the normalizers of the rate theorems."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import linregress, t as student_t

from varlin.errors import DomainError, InsufficientDataError, ValidationError
from varlin.linearize.constants import GrowthConstants
from varlin.mixing.profile import MixingProfile

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4


@dataclass(frozen=True)
class RateSeries:
    """Rows ``(n, sigma_n, statistic)`` with strictly increasing ``sigma_n``."""

    n: np.ndarray
    sigma: np.ndarray
    statistic: np.ndarray
    statistic_id: str = "statistic"
    model_id: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.n) == len(self.sigma) == len(self.statistic)):
            raise ValidationError("Rate series columns differ in length")
        if np.any(np.diff(self.sigma) <= 0):
            raise ValidationError("sigma_n must be strictly increasing across a rate series")

    def __len__(self) -> int:
        return len(self.n)

    def to_csv(self, path: str | Path) -> None:
        """Write rows ``model_id, n, sigma, statistic_id, value``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model_id", "n", "sigma", "statistic_id", "value"])
            for n, s, v in zip(self.n, self.sigma, self.statistic):
                writer.writerow([self.model_id, int(n), repr(float(s)), self.statistic_id, repr(float(v))])


@dataclass(frozen=True)
class RateFit:
    statistic: str
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    residual: float
    stderr: float


def rate_fit(series: RateSeries, log_correction_power: float = 0.0, confidence: float = 0.95) -> RateFit:
    """
    Slope of ``log(statistic / ln^power sigma)`` against ``log sigma``.

    The confidence interval is ``slope +- t_{(1+c)/2, m-2} * stderr``.

    Raises:
        InsufficientDataError: Fewer than four rows.
        DomainError: A non-positive statistic or ``sigma <= 1`` with a log correction.
    """
    if len(series) < MIN_FIT_POINTS:
        raise InsufficientDataError(f"Rate fit needs at least {MIN_FIT_POINTS} points, got {len(series)}")
    stat = np.asarray(series.statistic, dtype=float)
    sigma = np.asarray(series.sigma, dtype=float)
    if np.any(stat <= 0):
        raise DomainError("Rate fit needs positive statistics")
    y = np.log(stat)
    if log_correction_power:
        if np.any(sigma <= 1):
            raise DomainError("Log correction needs sigma > 1")
        y = y - log_correction_power * np.log(np.log(sigma))
    x = np.log(sigma)
    fit = linregress(x, y)
    resid = y - (fit.intercept + fit.slope * x)
    half = student_t.ppf(0.5 + confidence / 2.0, len(x) - 2) * fit.stderr
    result = RateFit(
        statistic=series.statistic_id,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        ci_low=float(fit.slope - half),
        ci_high=float(fit.slope + half),
        residual=float(math.sqrt(np.mean(resid**2))),
        stderr=float(fit.stderr),
    )
    logger.info("Rate fit of %s on %s: slope %.4f [%.4f, %.4f]", series.statistic_id, series.model_id, result.slope, result.ci_low, result.ci_high)
    return result


def write_fits_csv(fits: list[RateFit], path: str | Path) -> None:
    """Write rows ``statistic, slope, ci_low, ci_high, residual``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["statistic", "slope", "ci_low", "ci_high", "residual"])
        for f in fits:
            writer.writerow([f.statistic, repr(f.slope), repr(f.ci_low), repr(f.ci_high), repr(f.residual)])


def berry_esseen_normalizer(constants: GrowthConstants, p0: float | None = None) -> float:
    """``K^{(p0-2)/(2 p0)} beta^{p0} Q^{p0/2}``."""
    p0 = constants.p0 if p0 is None else p0
    return constants.K ** ((p0 - 2.0) / (2.0 * p0)) * constants.beta**p0 * constants.Q ** (p0 / 2.0)


@dataclass(frozen=True)
class PhiEnvelope:
    """``phi(j) <= A exp(-a j^eta)`` with ``A >= 1``."""

    A: float
    a: float
    eta: float

    @property
    def j_n(self) -> float:
        return 1.0 + (math.log(3.0 * self.A) / self.a) ** (1.0 / self.eta)

    @property
    def gamma(self) -> float:
        return 1.0 + 1.0 / self.eta


def phi_envelope(profile: MixingProfile, eta: float = 1.0) -> PhiEnvelope:
    """
    Stretched-exponential envelope of the phi profile.

    The rate ``a`` is the fitted slope of ``-log phi`` against ``j^eta`` over
    the positive coefficients; ``A`` is the smallest constant making the
    envelope dominate every coefficient.
    """
    if profile.phi is None:
        raise DomainError("Envelope needs a phi profile")
    phi = np.asarray(profile.phi, dtype=float)
    lags = np.arange(1, phi.size + 1, dtype=float) ** eta
    pos = phi > 0
    if not pos.any():
        return PhiEnvelope(A=1.0, a=1.0, eta=eta)
    if pos.sum() >= 2:
        slope = float(linregress(lags[pos], np.log(phi[pos])).slope)
    else:
        slope = math.log(float(phi[pos][0])) / float(lags[pos][0])
    a = max(-slope, 1e-12)
    A = max(1.0, float(np.max(phi[pos] * np.exp(a * lags[pos]))))
    return PhiEnvelope(A=A, a=a, eta=eta)


def mdp_normalizer(constants: GrowthConstants, k_inf: float, envelope: PhiEnvelope) -> float:
    """``Q^{1/2} (K_inf + j_n + 1) A_n``."""
    return math.sqrt(constants.Q) * (k_inf + envelope.j_n + 1.0) * envelope.A


def mdp_speed_ratio(a_n: float, normalizer: float, sigma: float, envelope: PhiEnvelope) -> float:
    """``a_n (R^3 sigma)^{-1/(1 + 2 gamma)}``; values well below 1 sit inside the speed window."""
    return a_n * (normalizer**3 * sigma) ** (-1.0 / (1.0 + 2.0 * envelope.gamma))


__all__ = [
    "RateSeries",
    "RateFit",
    "rate_fit",
    "write_fits_csv",
    "berry_esseen_normalizer",
    "PhiEnvelope",
    "phi_envelope",
    "mdp_normalizer",
    "mdp_speed_ratio",
]
