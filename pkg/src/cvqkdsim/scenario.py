"""End-to-end scenario orchestration.

Runs calibrate -> attack -> estimate -> countermeasure -> key rate on a
validated configuration and produces a deterministic report: channel
estimates, real-time shot-noise section and a security verdict comparing
the key rate Alice and Bob believe in against the one the true channel
supports.
"""

from __future__ import annotations

import csv
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .countermeasure import detect_attack, plan_monitor, realtime_shot_noise
from .errors import ConfigError, ScenarioStageError
from .estimation import EstimationReport, confidence_bounds, infer_channel, ml_estimate
from .keyrate import KeyRateParams, LinkModel, SweepPoint, rate_at_distance, secret_key_rate
from .protocol import attack_gain, generate_alice, simulate_bob, simulate_monitor
from .pulses import (
    PowerMeterConfig,
    TriggerConfig,
    Waveform,
    attenuate_leading_edge,
    trigger_time,
)

# Exit codes of the command-line front end.
EXIT_SECURE = 0
EXIT_ERROR = 1
EXIT_ABORT = 2
EXIT_BREACHED = 3

VERDICT_EXIT_CODES = {"secure": EXIT_SECURE, "abort": EXIT_ABORT, "breached": EXIT_BREACHED}

# Seed-stream tags for the scenario-level draws (monitor mask, data split).
_TAG_MONITOR_MASK = 100
_TAG_PARTITION = 101

# Nominal LO pulse: linear rise, flat top, linear fall (ns grid).
_RISE_NS = 30
_PLATEAU_NS = 75
_FALL_NS = 15


def default_lo_pulse() -> tuple[Waveform, TriggerConfig, PowerMeterConfig]:
    """Nominal LO pulse with its trigger and power-meter settings."""
    rise = np.arange(_RISE_NS) / _RISE_NS
    plateau = np.ones(_PLATEAU_NS)
    fall = 1.0 - (np.arange(_FALL_NS) + 1.0) / _FALL_NS
    samples = np.concatenate([rise, plateau, fall])
    waveform = Waveform(samples, dt=1.0, t0=0.0)
    trig = TriggerConfig(kind="U1", threshold=0.5, delay_ns=0.0)
    pm = PowerMeterConfig(window_ns=100.0, decay_base=1.0)
    return waveform, trig, pm


def trigger_delay_from_attenuation(alpha: float) -> float:
    """Trigger delay induced by power-preserving attenuation of the rising edge."""
    base, trig, pm = default_lo_pulse()
    if alpha >= 1.0:
        return 0.0
    shaped = attenuate_leading_edge(base, alpha, float(_RISE_NS), True, pm)
    t_base = trigger_time(base, trig)
    t_shaped = trigger_time(shaped, trig)
    if t_shaped is None:
        return float(base.duration - t_base)
    return float(t_shaped - t_base)


def _sub_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(tag,)).generate_state(1)[0])


@contextmanager
def _stage(name: str):
    """Re-raise component failures with the failing stage named."""
    try:
        yield
    except ScenarioStageError:
        raise
    except Exception as exc:
        raise ScenarioStageError(f"stage '{name}' failed: {exc}") from exc


@dataclass
class ScenarioReport:
    """Deterministic scenario outcome."""

    verdict: str
    k_estimated: float
    k_true: float
    i_ab_estimated: float
    chi_be_estimated: float
    transmittance_hat: float
    xi_hat_snu: float
    estimation: EstimationReport
    n0_line: float
    n0_rt: float | None
    alarm: bool | None
    alarm_statistic: float | None
    m_monitor: int
    m_estimation: int
    n_key: int
    delta_ns: float
    gain: float
    seed: int
    config_hash: str

    @property
    def exit_code(self) -> int:
        return VERDICT_EXIT_CODES[self.verdict]

    def to_text(self) -> str:
        """Flat key=value block; bit-identical for identical seed and config."""
        lines = [
            f"verdict={self.verdict}",
            f"k_estimated={self.k_estimated!r}",
            f"k_true={self.k_true!r}",
            f"i_ab_estimated={self.i_ab_estimated!r}",
            f"chi_be_estimated={self.chi_be_estimated!r}",
            f"transmittance_hat={self.transmittance_hat!r}",
            f"xi_hat_snu={self.xi_hat_snu!r}",
            f"n0_line={self.n0_line!r}",
            f"n0_rt={self.n0_rt!r}",
            f"alarm={self.alarm!r}",
            f"alarm_statistic={self.alarm_statistic!r}",
            f"m_monitor={self.m_monitor!r}",
            f"m_estimation={self.m_estimation!r}",
            f"n_key={self.n_key!r}",
            f"delta_ns={self.delta_ns!r}",
            f"gain={self.gain!r}",
            f"seed={self.seed!r}",
            f"config_hash={self.config_hash}",
        ]
        lines += [f"est_{line}" for line in self.estimation.to_text().splitlines()]
        return "\n".join(lines)

    _CSV_KEYS = (
        "verdict",
        "k_estimated",
        "k_true",
        "transmittance_hat",
        "xi_hat_snu",
        "n0_line",
        "n0_rt",
        "alarm",
        "alarm_statistic",
        "m_monitor",
        "m_estimation",
        "n_key",
        "delta_ns",
        "gain",
        "seed",
        "config_hash",
    )

    @classmethod
    def csv_header(cls) -> list[str]:
        return list(cls._CSV_KEYS)

    def to_csv_row(self) -> list:
        return [getattr(self, key) for key in self._CSV_KEYS]


def _resolve_attack(cfg: ScenarioConfig):
    """Fill in the trigger delay from the pulse model when only alpha is given."""
    atk = cfg.attack
    if atk.delta_ns == 0.0 and atk.alpha < 1.0:
        atk = replace(atk, delta_ns=trigger_delay_from_attenuation(atk.alpha))
    return atk


def run_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    """Execute the full pipeline on one configuration.

    Stage order: Alice's modulation, Bob's attacked outcomes, optional
    monitoring pulses with the switch closed, maximum-likelihood channel
    estimation on the non-key pulses against the calibration-line shot
    noise, attack detection, and the key-rate comparison that yields the
    verdict: "secure" (both the estimated and the true rate are
    positive), "abort" (alarm raised or estimated rate non-positive) or
    "breached" (Alice and Bob believe in a positive rate that the true
    channel does not support).
    """
    ch = cfg.channel
    det = cfg.detector
    n_pulses = cfg.pulses
    n0_line = cfg.n0_assumed

    with _stage("pulse-model"):
        atk = _resolve_attack(cfg)
        gain = attack_gain(atk, det)

    with _stage("modulation"):
        x = generate_alice(n_pulses, ch.va, cfg.seed)

    with _stage("channel-simulation"):
        if cfg.countermeasure_enabled:
            plan = plan_monitor(
                n_pulses, cfg.monitor_fraction, _sub_seed(cfg.seed, _TAG_MONITOR_MASK)
            )
            monitor_mask = plan.mask
        else:
            monitor_mask = np.zeros(n_pulses, dtype=bool)
        open_mask = ~monitor_mask
        batch = simulate_bob(x[open_mask], ch, atk, det, cfg.seed)

    n0_rt = alarm = statistic = None
    m_monitor = int(monitor_mask.sum())
    if cfg.countermeasure_enabled:
        with _stage("monitoring"):
            monitor_batch = simulate_monitor(
                x[monitor_mask], ch, atk, det, cfg.switch.extinction, cfg.seed
            )
            var_open = float(np.mean(batch.y**2))
            var_closed = float(np.mean(monitor_batch.y**2))
            rt = realtime_shot_noise(
                var_open,
                var_closed,
                cfg.switch.extinction,
                ch.v_el,
                m_open=len(batch),
                m_closed=m_monitor,
            )
            n0_rt = rt.n0_rt
            alarm, statistic = detect_attack(n0_rt, n0_line, m_monitor, cfg.z_threshold)

    with _stage("estimation"):
        n_open = len(batch)
        n_key = min(int(round(cfg.key_fraction * n_pulses)), n_open - 2)
        m_est = n_open - n_key
        if m_est < 2:
            raise ConfigError("too few pulses left for estimation")
        order = np.random.default_rng(
            _sub_seed(cfg.seed, _TAG_PARTITION)
        ).permutation(n_open)
        est_idx = order[:m_est]
        estimates = ml_estimate(batch.x[est_idx], batch.y[est_idx])
        intervals = confidence_bounds(estimates, cfg.epsilon)
        t_hat, xi_hat = infer_channel(estimates, n0_line, ch.eta, ch.v_el)
        report = EstimationReport(
            estimates=estimates,
            t_hat_squared=estimates.t_hat**2,
            transmittance_hat=t_hat,
            xi_hat=xi_hat,
            intervals=intervals,
            n0_assumed=n0_line,
            epsilon=cfg.epsilon,
        )

    rate_factor = 1.0 - cfg.monitor_fraction if cfg.countermeasure_enabled else 1.0

    def usable_rate(raw: float) -> float:
        # discarded monitoring pulses only shrink a positive extractable rate
        return rate_factor * raw if raw > 0.0 else raw

    with _stage("key-rate"):
        xi_hat_snu = xi_hat / n0_line
        est_params = KeyRateParams(
            va=estimates.va_hat,
            transmittance=min(max(t_hat, 0.0), 1.0),
            eta=ch.eta,
            xi=max(xi_hat_snu, 0.0),
            v_el=ch.v_el,
            beta=cfg.beta,
        )
        est_breakdown = secret_key_rate(est_params)
        k_estimated = usable_rate(est_breakdown.key_rate)

        true_params = KeyRateParams(
            va=ch.va / ch.n0,
            transmittance=ch.transmittance,
            eta=ch.eta,
            xi=(ch.xi + 2.0 * atk.mu * ch.n0) / ch.n0,
            v_el=ch.v_el / ch.n0,
            beta=cfg.beta,
        )
        k_true = usable_rate(secret_key_rate(true_params).key_rate)

    if alarm:
        verdict = "abort"
    elif k_estimated <= 0.0:
        verdict = "abort"
    elif k_true <= 0.0:
        verdict = "breached"
    else:
        verdict = "secure"

    return ScenarioReport(
        verdict=verdict,
        k_estimated=k_estimated,
        k_true=k_true,
        i_ab_estimated=est_breakdown.i_ab,
        chi_be_estimated=est_breakdown.chi_be,
        transmittance_hat=t_hat,
        xi_hat_snu=xi_hat_snu,
        estimation=report,
        n0_line=n0_line,
        n0_rt=n0_rt,
        alarm=alarm,
        alarm_statistic=statistic,
        m_monitor=m_monitor,
        m_estimation=m_est,
        n_key=n_key,
        delta_ns=atk.delta_ns,
        gain=gain,
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
    )


def sweep_keyrate(cfg: ScenarioConfig) -> tuple[list[SweepPoint], list[SweepPoint]]:
    """Key-rate curves over distance, without and with the countermeasure."""
    sweep = cfg.sweep
    link = LinkModel(loss_db_per_km=sweep.loss_db_per_km)
    n_steps = int(round(sweep.d_max_km / sweep.step_km))
    distances = [i * sweep.step_km for i in range(n_steps + 1)]
    plain = [
        rate_at_distance(
            d,
            eta=cfg.channel.eta,
            v_el=cfg.channel.v_el,
            beta=cfg.beta,
            snr_target=sweep.snr_target,
            xi_bob=sweep.xi_bob,
            link=link,
        )
        for d in distances
    ]
    protected = [
        rate_at_distance(
            d,
            eta=cfg.channel.eta,
            v_el=cfg.channel.v_el,
            beta=cfg.beta,
            snr_target=sweep.snr_target,
            xi_bob=sweep.xi_bob,
            link=link,
            monitor_fraction=cfg.monitor_fraction,
            switch=cfg.switch,
        )
        for d in distances
    ]
    return plain, protected


def write_sweep_csv(points: list[SweepPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d_km", "T", "V_A", "i_ab", "chi_be", "K"])
        for p in points:
            writer.writerow(
                [
                    repr(p.distance_km),
                    repr(p.transmittance),
                    repr(p.va),
                    repr(p.i_ab),
                    repr(p.chi_be),
                    repr(p.key_rate),
                ]
            )


def last_positive_distance(points: list[SweepPoint]) -> float | None:
    """Largest grid distance with a positive rate, None if none is positive."""
    best = None
    for p in points:
        if p.key_rate > 0.0:
            best = p.distance_km
    return best
