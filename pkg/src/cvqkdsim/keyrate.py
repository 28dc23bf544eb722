"""Asymptotic collective-attack secret key rates, trusted-detector model.

Homodyne detection with reverse reconciliation; the detector efficiency
and electronic noise are calibrated and not attributed to the
eavesdropper.  With V = va + 1 and the usual noise decomposition

    chi_line = 1/T - 1 + xi
    chi_hom  = (1 + v_el)/eta - 1
    chi_tot  = chi_line + chi_hom/T

the mutual information is I = 0.5*log2((V + chi_tot)/(1 + chi_tot)) and
Eve's Holevo information follows from the four symplectic eigenvalues

    A = V^2 (1 - 2T) + 2T + T^2 (V + chi_line)^2
    B = T^2 (V*chi_line + 1)^2
    lambda_{1,2}^2 = (A +- sqrt(A^2 - 4B))/2
    C = (A*chi_hom + V*sqrt(B) + T*(V + chi_line)) / (T*(V + chi_tot))
    D = sqrt(B)*(V + sqrt(B)*chi_hom) / (T*(V + chi_tot))
    lambda_{3,4}^2 = (C +- sqrt(C^2 - 4D))/2

via chi_BE = G((l1-1)/2) + G((l2-1)/2) - G((l3-1)/2) - G((l4-1)/2) with
G(x) = (x+1) log2(x+1) - x log2 x.  The secret key rate is
K = beta*I - chi_BE and is reported as-is when negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .countermeasure import SwitchModel, effective_eta
from .errors import NumericalDomainError

DISCRIMINANT_TOL = 1e-9
EIGENVALUE_TOL = 1e-9


@dataclass
class KeyRateParams:
    """Inputs of the key-rate formulas, noise in shot-noise units."""

    va: float
    transmittance: float
    eta: float
    xi: float
    v_el: float
    beta: float

    def __post_init__(self):
        if self.va < 0:
            raise ValueError(f"va must be >= 0, got {self.va}")
        if not 0.0 <= self.transmittance <= 1.0:
            raise ValueError(f"transmittance must be in [0, 1], got {self.transmittance}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.xi < 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")
        if self.v_el < 0:
            raise ValueError(f"v_el must be >= 0, got {self.v_el}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")


@dataclass
class LinkModel:
    """Fibre link; transmittance decays exponentially with distance."""

    loss_db_per_km: float = 0.2

    def __post_init__(self):
        if not self.loss_db_per_km > 0:
            raise ValueError(f"loss_db_per_km must be > 0, got {self.loss_db_per_km}")

    def transmittance(self, distance_km: float) -> float:
        if distance_km < 0:
            raise ValueError(f"distance must be >= 0, got {distance_km}")
        return 10.0 ** (-self.loss_db_per_km * distance_km / 10.0)


@dataclass
class KeyRateBreakdown:
    """Key-rate decomposition in bits per pulse."""

    i_ab: float
    chi_be: float
    key_rate: float
    eigenvalues: tuple[float, float, float, float]

    def __post_init__(self):
        if self.chi_be < -EIGENVALUE_TOL:
            raise ValueError(f"chi_be must be >= 0, got {self.chi_be}")
        for lam in self.eigenvalues:
            if lam < 1.0 - EIGENVALUE_TOL:
                raise ValueError(f"symplectic eigenvalue {lam} below 1")


def _chi_line(p: KeyRateParams) -> float:
    return 1.0 / p.transmittance - 1.0 + p.xi


def _chi_hom(p: KeyRateParams) -> float:
    return (1.0 + p.v_el) / p.eta - 1.0


def _chi_tot(p: KeyRateParams) -> float:
    return _chi_line(p) + _chi_hom(p) / p.transmittance


def _entropy_g(x: float) -> float:
    """G(x) = (x+1) log2(x+1) - x log2 x, continued by G(0) = 0."""
    if x < -EIGENVALUE_TOL:
        raise NumericalDomainError(f"entropy argument {x} below 0")
    if x <= 0.0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def _eigenpair(trace_like: float, det_like: float) -> tuple[float, float]:
    """Roots of l^4 - trace_like*l^2 + det_like as (larger, smaller) eigenvalues.

    The smaller root is recovered from the product to avoid the
    cancellation in (trace - sqrt(disc))/2 at high loss.
    """
    disc = trace_like**2 - 4.0 * det_like
    if disc < 0.0:
        if disc < -DISCRIMINANT_TOL * max(1.0, trace_like**2):
            raise NumericalDomainError(
                f"negative discriminant {disc} in symplectic spectrum"
            )
        disc = 0.0
    big_sq = 0.5 * (trace_like + math.sqrt(disc))
    if big_sq <= 0.0:
        raise NumericalDomainError("non-positive squared symplectic eigenvalue")
    small_sq = det_like / big_sq
    big = math.sqrt(big_sq)
    small = math.sqrt(max(small_sq, 0.0))
    for lam in (big, small):
        if lam < 1.0 - EIGENVALUE_TOL:
            raise NumericalDomainError(f"symplectic eigenvalue {lam} below 1")
    return big, max(small, 1.0)


def mutual_information(p: KeyRateParams) -> float:
    """Shannon rate of the homodyne Gaussian channel in bits per pulse.

    Equals 0.5*log2(1 + SNR) with SNR = eta*T*va/(1 + v_el + eta*T*xi);
    zero at zero transmittance.
    """
    if p.transmittance <= 0.0:
        return 0.0
    chi_tot = _chi_tot(p)
    return 0.5 * math.log2((p.va + 1.0 + chi_tot) / (1.0 + chi_tot))


def holevo_bound(p: KeyRateParams) -> tuple[float, tuple[float, float, float, float]]:
    """Eve's Holevo information and the symplectic eigenvalues behind it."""
    if not p.transmittance > 0:
        raise ValueError("holevo_bound requires transmittance > 0")
    t = p.transmittance
    v = p.va + 1.0
    chi_line = _chi_line(p)
    chi_hom = _chi_hom(p)
    chi_tot = _chi_tot(p)
    a = v * v * (1.0 - 2.0 * t) + 2.0 * t + (t * (v + chi_line)) ** 2
    b = (t * (v * chi_line + 1.0)) ** 2
    lam1, lam2 = _eigenpair(a, b)
    sqrt_b = math.sqrt(b)
    denom = t * (v + chi_tot)
    c = (a * chi_hom + v * sqrt_b + t * (v + chi_line)) / denom
    d = sqrt_b * (v + sqrt_b * chi_hom) / denom
    lam3, lam4 = _eigenpair(c, d)
    chi_be = (
        _entropy_g((lam1 - 1.0) / 2.0)
        + _entropy_g((lam2 - 1.0) / 2.0)
        - _entropy_g((lam3 - 1.0) / 2.0)
        - _entropy_g((lam4 - 1.0) / 2.0)
    )
    return chi_be, (lam1, lam2, lam3, lam4)


def secret_key_rate(p: KeyRateParams) -> KeyRateBreakdown:
    """K = beta*I_AB - chi_BE; negative rates are reported as-is."""
    if p.transmittance <= 0.0:
        return KeyRateBreakdown(0.0, 0.0, 0.0, (1.0, 1.0, 1.0, 1.0))
    i_ab = mutual_information(p)
    chi_be, eigenvalues = holevo_bound(p)
    chi_be = max(chi_be, 0.0)
    return KeyRateBreakdown(
        i_ab=i_ab,
        chi_be=chi_be,
        key_rate=p.beta * i_ab - chi_be,
        eigenvalues=eigenvalues,
    )


def va_for_snr(snr: float, transmittance: float, eta: float, xi: float, v_el: float) -> float:
    """Modulation variance that hits the target SNR on Bob's side."""
    if snr < 0:
        raise ValueError(f"snr must be >= 0, got {snr}")
    eta_t = eta * transmittance
    if not eta_t > 0:
        raise ValueError("snr targeting infeasible at eta*T = 0")
    return snr * (1.0 + v_el + eta_t * xi) / eta_t


@dataclass
class SweepPoint:
    """One distance sample of a key-rate sweep."""

    distance_km: float
    transmittance: float
    va: float
    i_ab: float
    chi_be: float
    key_rate: float


def rate_at_distance(
    distance_km: float,
    *,
    eta: float,
    v_el: float,
    beta: float,
    snr_target: float,
    xi_bob: float,
    link: LinkModel | None = None,
    monitor_fraction: float = 0.0,
    switch: SwitchModel | None = None,
) -> SweepPoint:
    """Key rate at one distance with SNR-targeted modulation variance.

    ``xi_bob`` is the excess noise referred to Bob's side (eta*T*xi);
    the channel-input value is recovered per distance.  With a switch
    present the efficiency is derated by its insertion loss, and the
    monitoring fraction multiplies the rate by (1 - fraction).
    """
    link = link or LinkModel()
    if not 0.0 <= monitor_fraction < 1.0:
        raise ValueError(f"monitor_fraction must be in [0, 1), got {monitor_fraction}")
    transmittance = link.transmittance(distance_km)
    eta_eff = effective_eta(eta, switch.loss_db) if switch is not None else eta
    xi_channel = xi_bob / (eta_eff * transmittance)
    va = va_for_snr(snr_target, transmittance, eta_eff, xi_channel, v_el)
    params = KeyRateParams(
        va=va,
        transmittance=transmittance,
        eta=eta_eff,
        xi=xi_channel,
        v_el=v_el,
        beta=beta,
    )
    breakdown = secret_key_rate(params)
    # discarded monitoring pulses only shrink a positive extractable rate;
    # a non-positive rate yields no key either way and stays undiscounted
    rate = breakdown.key_rate
    if rate > 0.0:
        rate *= 1.0 - monitor_fraction
    return SweepPoint(
        distance_km=distance_km,
        transmittance=transmittance,
        va=va,
        i_ab=breakdown.i_ab,
        chi_be=breakdown.chi_be,
        key_rate=rate,
    )


def max_secure_distance(
    *,
    eta: float,
    v_el: float,
    beta: float,
    snr_target: float,
    xi_bob: float,
    link: LinkModel | None = None,
    monitor_fraction: float = 0.0,
    switch: SwitchModel | None = None,
    d_max_km: float = 500.0,
    resolution_km: float = 0.1,
) -> float | None:
    """Largest distance with a positive key rate, by bisection.

    Returns None when the rate is already non-positive at zero distance,
    and ``d_max_km`` when the rate never crosses zero inside the bracket.
    """
    if not snr_target > 0:
        raise ValueError(f"snr_target must be > 0, got {snr_target}")

    def rate(d: float) -> float:
        return rate_at_distance(
            d,
            eta=eta,
            v_el=v_el,
            beta=beta,
            snr_target=snr_target,
            xi_bob=xi_bob,
            link=link,
            monitor_fraction=monitor_fraction,
            switch=switch,
        ).key_rate

    if rate(0.0) <= 0.0:
        return None
    low, high = 0.0, None
    d = 10.0
    while d <= d_max_km:
        if rate(d) <= 0.0:
            high = d
            break
        low = d
        d += 10.0
    if high is None:
        return d_max_km
    while high - low > resolution_km:
        mid = 0.5 * (low + high)
        if rate(mid) > 0.0:
            low = mid
        else:
            high = mid
    return low
