"""Local-oscillator pulse physics on Bob's side.

Models the sampled LO intensity waveform, the clock-trigger circuits that
fire on it, the windowed power measurement used to predict the shot noise,
the homodyne gain as a function of the measurement instant, and the
calibrated variance-vs-power line.  Also contains the adversarial
construction of equal-energy pulses with shifted trigger times.

All operations are pure functions of immutable value objects; waveforms
are discrete with a fixed sample spacing and predicates are evaluated per
sample (no sub-sample interpolation).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateFitError, InfeasiblePulseError

# Attenuation grid used by the equal-power pulse search.
ALPHA_GRID_STEP = 0.05

# Discharge constant (ns) chosen so that a 10 ns trigger delay on a 100 ns
# integration window reduces the measured variance by the factor 1/1.5.
DEFAULT_TAU_NS = 49.33


def discharge_tau(delay_ns: float, gain_target: float) -> float:
    """Discharge constant giving ``detector_gain(window + delay) == gain_target``.

    Inverts gain = exp(-2*delay/tau) for tau.
    """
    if delay_ns <= 0:
        raise ValueError(f"delay_ns must be > 0, got {delay_ns}")
    if not 0.0 < gain_target < 1.0:
        raise ValueError(f"gain_target must be in (0, 1), got {gain_target}")
    return 2.0 * delay_ns / math.log(1.0 / gain_target)


@dataclass
class Waveform:
    """Sampled LO pulse intensity trace.

    Attributes:
        samples: non-negative intensity values, one per sample instant.
        dt: sample spacing in ns (> 0).
        t0: time of the first sample in ns.
    """

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("waveform needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform samples must be finite")
        if np.any(samples < 0):
            raise ValueError("waveform samples must be >= 0")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Total covered time in ns (each sample spans one dt bin)."""
        return self.samples.size * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) * self.dt


@dataclass
class TriggerConfig:
    """Clock-trigger circuit settings.

    ``kind`` selects the predicate: "U1" fires when the intensity first
    exceeds ``threshold`` (the trigger is then delayed by ``delay_ns``);
    "U2" fires when the intensity first exceeds its own value one
    ``pulse_duration_ns`` earlier, which makes it level-independent.
    """

    kind: str
    threshold: float | None = None
    delay_ns: float = 0.0
    pulse_duration_ns: float | None = None

    def __post_init__(self):
        if self.kind not in ("U1", "U2"):
            raise ValueError(f"kind must be 'U1' or 'U2', got {self.kind!r}")
        if self.delay_ns < 0:
            raise ValueError(f"delay_ns must be >= 0, got {self.delay_ns}")
        if self.kind == "U1":
            if self.threshold is None or not self.threshold > 0:
                raise ValueError("U1 requires threshold > 0")
        else:
            if self.pulse_duration_ns is None or not self.pulse_duration_ns > 0:
                raise ValueError("U2 requires pulse_duration_ns > 0")


@dataclass
class PowerMeterConfig:
    """Windowed LO power integrator.

    The meter sums the trailing ``window_ns`` of the waveform with
    exponentially decaying weights ``decay_base**(-age_ns)``; a decay base
    of 1 weighs the window uniformly.
    """

    window_ns: float
    decay_base: float = 1.0

    def __post_init__(self):
        if not self.window_ns > 0:
            raise ValueError(f"window_ns must be > 0, got {self.window_ns}")
        if self.decay_base < 1.0:
            raise ValueError(f"decay_base must be >= 1, got {self.decay_base}")


@dataclass
class DetectorModel:
    """Homodyne detector timing and calibration constants.

    Attributes:
        window_ns: integration period of the differential photocurrent.
        tau_ns: exponential discharge constant after the window ends.
        slope_cal: calibrated shot-noise variance per unit LO power.
        v_el: electronic noise variance (shot-noise units).
    """

    window_ns: float = 100.0
    tau_ns: float = DEFAULT_TAU_NS
    slope_cal: float = 1.0
    v_el: float = 0.01

    def __post_init__(self):
        if not self.window_ns > 0:
            raise ValueError(f"window_ns must be > 0, got {self.window_ns}")
        if not self.tau_ns > 0:
            raise ValueError(f"tau_ns must be > 0, got {self.tau_ns}")
        if not self.slope_cal > 0:
            raise ValueError(f"slope_cal must be > 0, got {self.slope_cal}")
        if self.v_el < 0:
            raise ValueError(f"v_el must be >= 0, got {self.v_el}")


@dataclass
class CalibrationLine:
    """Fitted linear relation between measurement variance and LO power."""

    slope: float
    intercept: float

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError(f"slope must be > 0, got {self.slope}")

    def predict(self, power: float) -> float:
        return self.slope * power + self.intercept


def measure_power(waveform: Waveform, cfg: PowerMeterConfig) -> float:
    """Weighted power of the trailing measurement window.

    Discrete sum over the last ``window_ns`` of the trace with weights
    ``decay_base**(-age)`` (age measured backwards from the final sample),
    times dt.  Linear in the waveform.
    """
    n_window = int(round(cfg.window_ns / waveform.dt))
    if n_window < 1 or n_window > len(waveform):
        raise ValueError(
            f"power window {cfg.window_ns} ns does not fit waveform of "
            f"duration {waveform.duration} ns"
        )
    ages = np.arange(n_window) * waveform.dt
    weights = cfg.decay_base ** (-ages)
    tail = waveform.samples[::-1][:n_window]
    return float(np.dot(tail, weights) * waveform.dt)


def trigger_time(waveform: Waveform, cfg: TriggerConfig) -> float | None:
    """Time at which the clock trigger fires, or None if it never does.

    U1: first sample strictly above the threshold, plus the configured
    delay.  U2: first sample strictly above the sample one pulse duration
    earlier (the trace is taken to be zero before it starts, so U2 fires
    on the rising edge regardless of the absolute level).
    """
    s = waveform.samples
    if cfg.kind == "U1":
        hits = np.flatnonzero(s > cfg.threshold)
        if hits.size == 0:
            return None
        return float(waveform.t0 + hits[0] * waveform.dt + cfg.delay_ns)
    lag = max(1, int(round(cfg.pulse_duration_ns / waveform.dt)))
    delayed = np.concatenate([np.zeros(min(lag, s.size)), s[:-lag] if lag < s.size else s[:0]])
    hits = np.flatnonzero(s - delayed > 0)
    if hits.size == 0:
        return None
    return float(waveform.t0 + hits[0] * waveform.dt)


def detector_gain(t_measure_ns: float, det: DetectorModel) -> float:
    """Variance gain of a homodyne sample taken ``t_measure_ns`` after pulse start.

    The integrator output amplitude ramps linearly over the integration
    window (variance gain (t/window)^2), peaks at exactly 1 when the
    window ends, and afterwards the capacitor discharges exponentially
    (variance gain exp(-2*(t - window)/tau)).
    """
    if t_measure_ns <= 0:
        raise ValueError(f"measurement time must be > 0, got {t_measure_ns}")
    if t_measure_ns <= det.window_ns:
        return (t_measure_ns / det.window_ns) ** 2
    return math.exp(-2.0 * (t_measure_ns - det.window_ns) / det.tau_ns)


def fit_calibration_line(points: list[tuple[float, float]]) -> CalibrationLine:
    """Least-squares line through (power, variance) calibration points."""
    if len(points) < 2:
        raise DegenerateFitError("need at least 2 calibration points")
    powers = np.array([p for p, _ in points], dtype=float)
    variances = np.array([v for _, v in points], dtype=float)
    if np.ptp(powers) == 0:
        raise DegenerateFitError("all calibration powers identical")
    slope, intercept = np.polyfit(powers, variances, deg=1)
    return CalibrationLine(slope=float(slope), intercept=float(intercept))


def simulate_calibration_points(
    powers: np.ndarray,
    det: DetectorModel,
    gain: float = 1.0,
    samples_per_point: int = 2000,
    seed: int = 0,
) -> list[tuple[float, float]]:
    """Synthetic variance-vs-power calibration data.

    Each point is the sample variance of ``samples_per_point`` vacuum
    measurements whose true variance is ``gain * slope_cal * power + v_el``;
    the chi-square sampling noise of the variance estimate is included.
    """
    if samples_per_point < 2:
        raise ValueError("samples_per_point must be >= 2")
    rng = np.random.default_rng(seed)
    k = samples_per_point
    out = []
    for p in np.asarray(powers, dtype=float):
        true_var = gain * det.slope_cal * p + det.v_el
        out.append((float(p), float(true_var * rng.chisquare(k) / k)))
    return out


def _head_size(waveform: Waveform, span_ns: float) -> int:
    """Number of leading samples whose time offset lies in [0, span_ns)."""
    return int(math.ceil(span_ns / waveform.dt - 1e-12))


def attenuate_leading_edge(
    waveform: Waveform,
    alpha: float,
    span_ns: float,
    preserve_power: bool,
    pm: PowerMeterConfig,
) -> Waveform:
    """Scale the first ``span_ns`` of the pulse by ``alpha``.

    With ``preserve_power`` the remaining samples are rescaled by the
    unique factor that keeps ``measure_power`` unchanged, so the shaping
    is invisible to the LO power meter.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if not 0.0 <= span_ns <= waveform.duration:
        raise ValueError(
            f"span_ns must be in [0, {waveform.duration}], got {span_ns}"
        )
    n_head = min(_head_size(waveform, span_ns), len(waveform))
    shaped = waveform.samples.copy()
    shaped[:n_head] *= alpha
    if preserve_power:
        target = measure_power(waveform, pm)
        head_only = shaped.copy()
        head_only[n_head:] = 0.0
        tail_only = waveform.samples.copy()
        tail_only[:n_head] = 0.0
        p_head = measure_power(Waveform(head_only, waveform.dt, waveform.t0), pm) if n_head else 0.0
        p_tail = measure_power(Waveform(tail_only, waveform.dt, waveform.t0), pm)
        if p_tail <= 0.0:
            raise InfeasiblePulseError(
                "cannot preserve power: tail carries no weight in the window"
            )
        shaped[n_head:] *= (target - p_head) / p_tail
        result = Waveform(shaped, waveform.dt, waveform.t0)
        achieved = measure_power(result, pm)
        assert math.isclose(achieved, target, rel_tol=1e-9, abs_tol=1e-12)
        return result
    return Waveform(shaped, waveform.dt, waveform.t0)


def craft_equal_power_pulse(
    base: Waveform,
    target_shift_ns: float,
    trig: TriggerConfig,
    pm: PowerMeterConfig,
) -> Waveform:
    """Pulse with the same measured power whose trigger fires later.

    Exhaustive grid search over leading-edge attenuations (alpha in steps
    of 0.05, span in steps of dt) with the power-preserving rescale; the
    first candidate (smallest span, mildest attenuation) that delays the
    trigger by at least ``target_shift_ns`` is returned.  Both
    postconditions are re-checked on the result rather than trusted from
    the search.
    """
    if target_shift_ns < 0:
        raise ValueError(f"target_shift_ns must be >= 0, got {target_shift_ns}")
    if target_shift_ns == 0:
        return base
    t_base = trigger_time(base, trig)
    if t_base is None:
        raise InfeasiblePulseError("base pulse never triggers")
    p_base = measure_power(base, pm)
    alphas = np.arange(round(1.0 / ALPHA_GRID_STEP) - 1, -1, -1) * ALPHA_GRID_STEP
    n = len(base)
    for k_steps in range(1, n):
        span = k_steps * base.dt
        for alpha in alphas:
            try:
                candidate = attenuate_leading_edge(base, float(alpha), span, True, pm)
            except InfeasiblePulseError:
                continue
            t_new = trigger_time(candidate, trig)
            if t_new is None:
                continue
            if t_new - t_base >= target_shift_ns - 1e-9:
                p_new = measure_power(candidate, pm)
                assert math.isclose(p_new, p_base, rel_tol=1e-6)
                assert t_new - t_base >= target_shift_ns - 1e-9
                return candidate
    raise InfeasiblePulseError(
        f"no leading-edge shaping achieves a {target_shift_ns} ns trigger shift"
    )


def write_waveform_csv(waveform: Waveform, path: str | Path) -> None:
    """Write a waveform as two-column CSV (time_ns, intensity)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_ns", "intensity"])
        for t, v in zip(waveform.times(), waveform.samples):
            writer.writerow([repr(float(t)), repr(float(v))])


def read_waveform_csv(path: str | Path) -> Waveform:
    """Read a waveform written by :func:`write_waveform_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["time_ns", "intensity"]:
            raise ValueError(f"{path}: expected header 'time_ns,intensity'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 samples")
    times = np.array([t for t, _ in rows])
    values = np.array([v for _, v in rows])
    dt = times[1] - times[0]
    if dt <= 0 or not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-9):
        raise ValueError(f"{path}: sample times must be uniformly spaced")
    return Waveform(values, float(dt), float(times[0]))
