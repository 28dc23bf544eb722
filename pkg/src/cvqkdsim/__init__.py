"""Simulation toolkit for shot-noise calibration attacks on CV-QKD receivers."""

from .config import ScenarioConfig, SweepSettings, load_config, parse_config, serialize_config
from .countermeasure import (
    MonitorPlan,
    ShotNoiseEstimate,
    SwitchModel,
    detect_attack,
    effective_eta,
    plan_monitor,
    realtime_shot_noise,
    second_hd_shot_noise,
)
from .estimation import (
    EstimationReport,
    MlEstimates,
    confidence_bounds,
    infer_channel,
    ml_estimate,
    xi_pir,
    xi_under_calibration,
)
from .keyrate import (
    KeyRateBreakdown,
    KeyRateParams,
    LinkModel,
    holevo_bound,
    max_secure_distance,
    mutual_information,
    rate_at_distance,
    secret_key_rate,
    va_for_snr,
)
from .protocol import (
    AttackParams,
    ChannelParams,
    PulseBatch,
    generate_alice,
    simulate_bob,
    simulate_monitor,
    write_pulses_csv,
)
from .pulses import (
    CalibrationLine,
    DetectorModel,
    PowerMeterConfig,
    TriggerConfig,
    Waveform,
    attenuate_leading_edge,
    craft_equal_power_pulse,
    detector_gain,
    discharge_tau,
    fit_calibration_line,
    measure_power,
    read_waveform_csv,
    simulate_calibration_points,
    trigger_time,
    write_waveform_csv,
)
from .scenario import (
    ScenarioReport,
    default_lo_pulse,
    run_scenario,
    sweep_keyrate,
    trigger_delay_from_attenuation,
)

__version__ = "0.1.0"
