"""Scenario configuration: key=value files with strict validation.

The format is UTF-8 text, one ``key = value`` pair per line, ``#`` starts
a comment.  Unknown keys are rejected and every physical invariant is
checked at parse time, with errors naming the offending line.  A parsed
configuration serializes back to a canonical text that re-parses to an
identical object.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .countermeasure import SwitchModel
from .errors import ConfigError
from .protocol import AttackParams, ChannelParams
from .pulses import DEFAULT_TAU_NS, DetectorModel


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _format_bool(value: bool) -> str:
    return "on" if value else "off"


# key -> (converter, default or None when required, human-readable range, check)
_KEY_TABLE: dict[str, tuple] = {
    "pulses": (int, None, ">= 10", lambda v: v >= 10),
    "seed": (int, 1, ">= 0", lambda v: v >= 0),
    "key_fraction": (float, 0.5, "in (0, 1)", lambda v: 0.0 < v < 1.0),
    "epsilon": (float, 0.05, "in (0, 1)", lambda v: 0.0 < v < 1.0),
    "va": (float, 5.0, ">= 0", lambda v: v >= 0.0),
    "transmittance": (float, 0.5, "in [0, 1]", lambda v: 0.0 <= v <= 1.0),
    "eta": (float, 0.5, "in (0, 1]", lambda v: 0.0 < v <= 1.0),
    "xi": (float, 0.1, ">= 0", lambda v: v >= 0.0),
    "vel": (float, 0.01, ">= 0", lambda v: v >= 0.0),
    "n0": (float, 1.0, "> 0", lambda v: v > 0.0),
    "mu": (float, 0.0, "in [0, 1]", lambda v: 0.0 <= v <= 1.0),
    "nu": (float, 0.0, "in [0, 1]", lambda v: 0.0 <= v <= 1.0),
    "alpha": (float, 1.0, "in [0, 1]", lambda v: 0.0 <= v <= 1.0),
    "delta_ns": (float, 0.0, ">= 0", lambda v: v >= 0.0),
    "window_ns": (float, 100.0, "> 0", lambda v: v > 0.0),
    "tau_ns": (float, DEFAULT_TAU_NS, "> 0", lambda v: v > 0.0),
    "slope_cal": (float, 1.0, "> 0", lambda v: v > 0.0),
    "n0_assumed": (float, 1.0, "> 0", lambda v: v > 0.0),
    "countermeasure": (_parse_bool, False, "on or off", lambda v: True),
    "monitor_fraction": (float, 0.1, "in (0, 1)", lambda v: 0.0 < v < 1.0),
    "switch_loss_db": (float, 2.7, ">= 0", lambda v: v >= 0.0),
    "extinction": (float, 0.0, "in [0, 1)", lambda v: 0.0 <= v < 1.0),
    "z_threshold": (float, 5.0, "> 0", lambda v: v > 0.0),
    "beta": (float, 0.948, "in [0, 1]", lambda v: 0.0 <= v <= 1.0),
    "snr_target": (float, 0.075, "> 0", lambda v: v > 0.0),
    "xi_bob": (float, 0.001, ">= 0", lambda v: v >= 0.0),
    "loss_db_per_km": (float, 0.2, "> 0", lambda v: v > 0.0),
    "sweep_d_max_km": (float, 120.0, "> 0", lambda v: v > 0.0),
    "sweep_step_km": (float, 1.0, "> 0", lambda v: v > 0.0),
}


@dataclass
class SweepSettings:
    """Distance-sweep parameters for the key-rate comparison curves."""

    snr_target: float = 0.075
    xi_bob: float = 0.001
    loss_db_per_km: float = 0.2
    d_max_km: float = 120.0
    step_km: float = 1.0


@dataclass
class ScenarioConfig:
    """Fully validated end-to-end scenario description."""

    channel: ChannelParams
    attack: AttackParams
    detector: DetectorModel
    pulses: int
    key_fraction: float = 0.5
    seed: int = 1
    beta: float = 0.948
    epsilon: float = 0.05
    n0_assumed: float = 1.0
    countermeasure_enabled: bool = False
    monitor_fraction: float = 0.1
    switch: SwitchModel = field(default_factory=SwitchModel)
    z_threshold: float = 5.0
    sweep: SweepSettings = field(default_factory=SweepSettings)

    def config_hash(self) -> str:
        return hashlib.sha256(serialize_config(self).encode()).hexdigest()[:16]


def _values_from_config(cfg: ScenarioConfig) -> dict:
    return {
        "pulses": cfg.pulses,
        "seed": cfg.seed,
        "key_fraction": cfg.key_fraction,
        "epsilon": cfg.epsilon,
        "va": cfg.channel.va,
        "transmittance": cfg.channel.transmittance,
        "eta": cfg.channel.eta,
        "xi": cfg.channel.xi,
        "vel": cfg.channel.v_el,
        "n0": cfg.channel.n0,
        "mu": cfg.attack.mu,
        "nu": cfg.attack.nu,
        "alpha": cfg.attack.alpha,
        "delta_ns": cfg.attack.delta_ns,
        "window_ns": cfg.detector.window_ns,
        "tau_ns": cfg.detector.tau_ns,
        "slope_cal": cfg.detector.slope_cal,
        "n0_assumed": cfg.n0_assumed,
        "countermeasure": cfg.countermeasure_enabled,
        "monitor_fraction": cfg.monitor_fraction,
        "switch_loss_db": cfg.switch.loss_db,
        "extinction": cfg.switch.extinction,
        "z_threshold": cfg.z_threshold,
        "beta": cfg.beta,
        "snr_target": cfg.sweep.snr_target,
        "xi_bob": cfg.sweep.xi_bob,
        "loss_db_per_km": cfg.sweep.loss_db_per_km,
        "sweep_d_max_km": cfg.sweep.d_max_km,
        "sweep_step_km": cfg.sweep.step_km,
    }


def _config_from_values(values: dict) -> ScenarioConfig:
    return ScenarioConfig(
        channel=ChannelParams(
            va=values["va"],
            transmittance=values["transmittance"],
            eta=values["eta"],
            xi=values["xi"],
            v_el=values["vel"],
            n0=values["n0"],
        ),
        attack=AttackParams(
            mu=values["mu"],
            nu=values["nu"],
            alpha=values["alpha"],
            delta_ns=values["delta_ns"],
        ),
        detector=DetectorModel(
            window_ns=values["window_ns"],
            tau_ns=values["tau_ns"],
            slope_cal=values["slope_cal"],
            v_el=values["vel"],
        ),
        pulses=values["pulses"],
        key_fraction=values["key_fraction"],
        seed=values["seed"],
        beta=values["beta"],
        epsilon=values["epsilon"],
        n0_assumed=values["n0_assumed"],
        countermeasure_enabled=values["countermeasure"],
        monitor_fraction=values["monitor_fraction"],
        switch=SwitchModel(
            loss_db=values["switch_loss_db"],
            extinction=values["extinction"],
        ),
        z_threshold=values["z_threshold"],
        sweep=SweepSettings(
            snr_target=values["snr_target"],
            xi_bob=values["xi_bob"],
            loss_db_per_km=values["loss_db_per_km"],
            d_max_km=values["sweep_d_max_km"],
            step_km=values["sweep_step_km"],
        ),
    )


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a key=value configuration.

    Raises :class:`ConfigError` naming the line for unknown keys, bad
    values, out-of-range values, duplicates and missing required keys.
    """
    values: dict = {}
    lines_seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if key not in _KEY_TABLE:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in lines_seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first on line {lines_seen[key]})"
            )
        lines_seen[key] = lineno
        converter, _, bounds, check = _KEY_TABLE[key]
        try:
            value = converter(value_text)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: {key} must be {bounds}, got {value_text!r}"
            ) from None
        if not check(value):
            raise ConfigError(f"line {lineno}: {key} must be {bounds}, got {value}")
        values[key] = value
    for key, (converter, default, _, _) in _KEY_TABLE.items():
        if key not in values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = default
    try:
        return _config_from_values(values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form; ``parse_config`` returns an identical object."""
    values = _values_from_config(cfg)
    lines = []
    for key in _KEY_TABLE:
        value = values[key]
        if isinstance(value, bool):
            lines.append(f"{key} = {_format_bool(value)}")
        else:
            lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
