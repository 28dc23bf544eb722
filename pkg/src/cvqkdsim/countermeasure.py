"""Real-time shot-noise monitoring and attack detection.

Two measurement techniques are supported: blocking the signal path on a
random subset of pulses with an optical switch, and a second homodyne
detector on the LO path with calibrated relative sensitivity.  In both
cases two noise measurements are inverted as a linear system to separate
the shot noise from the signal-plus-excess variance, and the real-time
shot noise is compared against the calibration-line prediction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError


@dataclass
class MonitorPlan:
    """Seeded per-pulse monitoring mask (True = signal path blocked)."""

    mask: np.ndarray
    fraction: float

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {self.fraction}")
        if mask.size:
            realized = mask.mean()
            sigma = math.sqrt(self.fraction * (1.0 - self.fraction) / mask.size)
            if abs(realized - self.fraction) > 5.0 * sigma + 1.0 / mask.size:
                raise ValueError(
                    f"realized monitoring fraction {realized:.4f} inconsistent "
                    f"with target {self.fraction}"
                )
        object.__setattr__(self, "mask", mask)

    @property
    def n_monitor(self) -> int:
        return int(self.mask.sum())


@dataclass
class SwitchModel:
    """Optical switch on Bob's signal path."""

    loss_db: float = 2.7
    extinction: float = 0.0

    def __post_init__(self):
        if self.loss_db < 0:
            raise ValueError(f"loss_db must be >= 0, got {self.loss_db}")
        if not 0.0 <= self.extinction < 1.0:
            raise ValueError(f"extinction must be in [0, 1), got {self.extinction}")


@dataclass
class ShotNoiseEstimate:
    """Result of inverting the open/closed variance measurements."""

    n0_rt: float
    s_rt: float
    m_open: int
    m_closed: int

    def __post_init__(self):
        if not math.isfinite(self.n0_rt):
            raise ValueError("n0_rt must be finite")
        if self.m_open < 2 or self.m_closed < 2:
            raise ValueError("sample counts must be >= 2")


def plan_monitor(n: int, fraction: float, seed: int) -> MonitorPlan:
    """I.i.d. Bernoulli(fraction) monitoring mask over ``n`` pulses."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    mask = np.random.default_rng(seed).random(n) < fraction
    return MonitorPlan(mask=mask, fraction=fraction)


def realtime_shot_noise(
    var_open: float,
    var_closed: float,
    extinction: float,
    v_el: float,
    m_open: int = 2,
    m_closed: int = 2,
) -> ShotNoiseEstimate:
    """Solve the two-measurement system for shot noise and signal noise.

    var_open   = S + N0 + v_el        (switch open)
    var_closed = extinction*S + N0 + v_el   (switch closed)

    v_el is taken from calibration and trusted.
    """
    if extinction == 1.0:
        raise SingularSystemError("extinction of 1 makes the system singular")
    s_rt = (var_open - var_closed) / (1.0 - extinction)
    n0_rt = var_closed - v_el - extinction * s_rt
    return ShotNoiseEstimate(n0_rt=n0_rt, s_rt=s_rt, m_open=m_open, m_closed=m_closed)


def second_hd_shot_noise(var_hd2: float, kappa: float, v_el2: float) -> float:
    """Shot noise on the primary detector scale from the auxiliary detector.

    ``kappa`` is the calibrated relative sensitivity of the two homodyne
    detectors.  A reading below the auxiliary electronic noise yields a
    negative estimate, which is reported as-is with a warning.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    if var_hd2 < v_el2:
        warnings.warn(
            "auxiliary variance below its electronic noise; "
            "negative shot-noise estimate",
            RuntimeWarning,
            stacklevel=2,
        )
    return kappa * (var_hd2 - v_el2)


def effective_eta(eta: float, loss_db: float) -> float:
    """Detection efficiency after inserting a lossy component."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    if loss_db < 0:
        raise ValueError(f"loss_db must be >= 0, got {loss_db}")
    return eta * 10.0 ** (-loss_db / 10.0)


def detect_attack(
    n0_rt: float, n0_line: float, m_monitor: int, z_threshold: float
) -> tuple[bool, float]:
    """One-sided z-test of the real-time shot noise against the calibration line.

    The statistic is (n0_line - n0_rt)/se with se = n0_rt*sqrt(2/m_monitor);
    the alarm fires when the statistic exceeds ``z_threshold``.  A
    non-positive real-time estimate is itself an anomaly and alarms
    unconditionally.
    """
    if m_monitor < 2:
        raise ValueError(f"m_monitor must be >= 2, got {m_monitor}")
    if n0_rt <= 0:
        return True, math.inf
    se = n0_rt * math.sqrt(2.0 / m_monitor)
    statistic = (n0_line - n0_rt) / se
    return statistic > z_threshold, statistic
