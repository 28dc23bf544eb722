"""Maximum-likelihood parameter estimation on correlated (x, y) samples.

Implements the normal-linear-model estimators

    t_hat      = sum(x*y) / sum(x^2)
    sigma2_hat = mean((y - t_hat*x)^2)
    va_hat     = mean(x^2)

their confidence intervals (Gaussian for t_hat, chi-square with m-1
degrees of freedom for the variance estimators), the channel-parameter
mapping T = t_hat^2/eta, xi = (sigma2_hat - n0_assumed - v_el)/t_hat^2,
and the closed-form bias of the excess-noise estimate when the assumed
shot noise differs from the true one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateDataError

# Above this sample count the chi-square quantiles switch to the
# Wilson-Hilferty normal approximation; below it they are exact.
CHI2_EXACT_MAX_M = 10_000


@dataclass
class MlEstimates:
    """Point estimates of the normal linear model y = t*x + z."""

    t_hat: float
    sigma2_hat: float
    va_hat: float
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if self.sigma2_hat < 0:
            raise ValueError(f"sigma2_hat must be >= 0, got {self.sigma2_hat}")
        if self.va_hat < 0:
            raise ValueError(f"va_hat must be >= 0, got {self.va_hat}")

    @property
    def sum_x2(self) -> float:
        return self.m * self.va_hat


@dataclass
class EstimationReport:
    """Channel estimates with confidence intervals.

    ``intervals`` maps "t", "sigma2" and "va" to (low, high) bounds at the
    confidence level the report was built with;  ``xi_hat`` may be
    negative and is never clamped here.
    """

    estimates: MlEstimates
    t_hat_squared: float
    transmittance_hat: float
    xi_hat: float
    intervals: dict[str, tuple[float, float]]
    n0_assumed: float
    epsilon: float

    def __post_init__(self):
        points = {
            "t": self.estimates.t_hat,
            "sigma2": self.estimates.sigma2_hat,
            "va": self.estimates.va_hat,
        }
        for key, (low, high) in self.intervals.items():
            point = points[key]
            if not low <= point <= high:
                raise ValueError(
                    f"interval for {key} does not bracket the point estimate: "
                    f"{low} <= {point} <= {high}"
                )

    _TEXT_KEYS = (
        "m",
        "t_hat",
        "sigma2_hat",
        "va_hat",
        "transmittance_hat",
        "xi_hat",
        "n0_assumed",
        "epsilon",
    )

    def _flat(self) -> dict[str, float]:
        flat = {
            "m": self.estimates.m,
            "t_hat": self.estimates.t_hat,
            "sigma2_hat": self.estimates.sigma2_hat,
            "va_hat": self.estimates.va_hat,
            "transmittance_hat": self.transmittance_hat,
            "xi_hat": self.xi_hat,
            "n0_assumed": self.n0_assumed,
            "epsilon": self.epsilon,
        }
        for key in ("t", "sigma2", "va"):
            low, high = self.intervals[key]
            flat[f"{key}_low"] = low
            flat[f"{key}_high"] = high
        return flat

    def to_text(self) -> str:
        """Flat key=value block, one entry per line, stable order."""
        flat = self._flat()
        keys = list(self._TEXT_KEYS) + [
            f"{k}_{side}" for k in ("t", "sigma2", "va") for side in ("low", "high")
        ]
        return "\n".join(f"{k}={flat[k]!r}" for k in keys)

    @classmethod
    def csv_header(cls) -> list[str]:
        return list(cls._TEXT_KEYS) + [
            f"{k}_{side}" for k in ("t", "sigma2", "va") for side in ("low", "high")
        ]

    def to_csv_row(self) -> list:
        flat = self._flat()
        return [flat[k] for k in self.csv_header()]


def ml_estimate(x: np.ndarray, y: np.ndarray) -> MlEstimates:
    """Maximum-likelihood estimates for y = t*x + z on centred samples.

    The inputs are assumed centred; no mean removal is performed, but a
    diagnostic warning fires if a sample mean exceeds 5 standard errors.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    m = x.size
    if m < 2:
        raise ValueError(f"need at least 2 samples, got {m}")
    sum_x2 = float(x @ x)
    if sum_x2 <= 0.0:
        raise DegenerateDataError("sum of x^2 is zero; t_hat undefined")
    for name, arr in (("x", x), ("y", y)):
        rms = np.sqrt(np.mean(arr * arr))
        if rms > 0 and abs(np.mean(arr)) > 5.0 * rms / np.sqrt(m):
            warnings.warn(
                f"{name} does not look centred: |mean| exceeds 5 standard errors",
                RuntimeWarning,
                stacklevel=2,
            )
    t_hat = float(x @ y) / sum_x2
    residuals = y - t_hat * x
    sigma2_hat = float(residuals @ residuals) / m
    return MlEstimates(t_hat=t_hat, sigma2_hat=sigma2_hat, va_hat=sum_x2 / m, m=m)


def _chi2_ppf(q: float, df: int) -> float:
    """Chi-square quantile; Wilson-Hilferty approximation for large df."""
    if df <= CHI2_EXACT_MAX_M:
        return float(stats.chi2.ppf(q, df))
    z = float(stats.norm.ppf(q))
    h = 2.0 / (9.0 * df)
    return df * (1.0 - h + z * math.sqrt(h)) ** 3


def confidence_bounds(
    est: MlEstimates, epsilon: float
) -> dict[str, tuple[float, float]]:
    """Two-sided 1-epsilon confidence intervals for t, sigma^2 and V_A.

    t_hat is Gaussian with variance sigma2_hat/sum(x^2); the variance
    estimators follow chi-square with m-1 degrees of freedom (the normal
    approximation is used above m = 10^4).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    m = est.m
    z = float(stats.norm.ppf(1.0 - epsilon / 2.0))
    half_width = z * float(np.sqrt(est.sigma2_hat / est.sum_x2))
    chi_low = _chi2_ppf(epsilon / 2.0, m - 1)
    chi_high = _chi2_ppf(1.0 - epsilon / 2.0, m - 1)
    intervals = {"t": (est.t_hat - half_width, est.t_hat + half_width)}
    for key, value in (("sigma2", est.sigma2_hat), ("va", est.va_hat)):
        intervals[key] = (
            m * value / chi_high,
            m * value / chi_low if chi_low > 0 else float("inf"),
        )
    return intervals


def infer_channel(
    est: MlEstimates, n0_assumed: float, eta: float, v_el: float
) -> tuple[float, float]:
    """Channel transmittance and excess noise implied by the estimates.

    Returns (T_hat, xi_hat) with T_hat = t_hat^2/eta and
    xi_hat = (sigma2_hat - n0_assumed - v_el)/t_hat^2.  xi_hat can be
    negative and is reported as-is.
    """
    if not eta > 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    if est.t_hat == 0.0:
        raise DegenerateDataError("t_hat is zero; excess noise undefined")
    t2 = est.t_hat**2
    return t2 / eta, (est.sigma2_hat - n0_assumed - v_el) / t2


def xi_pir(xi_snu: float, mu: float) -> float:
    """Excess noise after a partial intercept-resend on a fraction ``mu``.

    Eve's double-quadrature measurement and re-preparation add two
    shot-noise units on the intercepted fraction: xi + 2*mu.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must be in [0, 1], got {mu}")
    return xi_snu + 2.0 * mu


def xi_under_calibration(xi_true_snu: float, n0_ratio: float, t_squared: float) -> float:
    """Excess-noise estimate (in assumed-shot-noise units) under a biased shot noise.

    ``n0_ratio`` is assumed-over-true shot noise; the true excess noise
    ``xi_true_snu`` is expressed in true shot-noise units.  Identity at
    n0_ratio = 1; affine in xi_true_snu; negative outputs are meaningful
    and returned as-is.
    """
    if not n0_ratio > 0:
        raise ValueError(f"n0_ratio must be > 0, got {n0_ratio}")
    if not t_squared > 0:
        raise ValueError(f"t_squared must be > 0, got {t_squared}")
    return (xi_true_snu + (1.0 - n0_ratio) / t_squared) / n0_ratio
