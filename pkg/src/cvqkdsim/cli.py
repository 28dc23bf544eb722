"""Command-line front end.

Subcommands:
    run         execute a scenario from a config file, print the report
    sweep       emit the key-rate comparison curves as CSV
    pulse-demo  build an equal-power pulse pair with a shifted trigger
    calibrate   fit a calibration line to synthetic variance/power data
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import load_config, parse_config
from .errors import ConfigError, ScenarioStageError
from .keyrate import max_secure_distance
from .protocol import write_pulses_csv
from .pulses import (
    DetectorModel,
    craft_equal_power_pulse,
    detector_gain,
    fit_calibration_line,
    measure_power,
    simulate_calibration_points,
    trigger_time,
    write_waveform_csv,
)
from .scenario import (
    EXIT_ERROR,
    default_lo_pulse,
    last_positive_distance,
    run_scenario,
    sweep_keyrate,
    write_sweep_csv,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqkdsim",
        description="Deterministic CV-QKD calibration-attack simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an end-to-end scenario.")
    run.add_argument("--config", required=True, help="key=value scenario file")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="directory for report.txt")
    run.add_argument("--csv", action="store_true", help="also dump per-pulse samples")

    sweep = sub.add_parser("sweep", help="Key-rate curves with/without countermeasure.")
    sweep.add_argument("--config", default=None, help="optional scenario file")
    sweep.add_argument("--out", default=".", help="output directory for the CSV curves")

    demo = sub.add_parser("pulse-demo", help="Equal-power pulses, shifted trigger.")
    demo.add_argument("--shift-ns", type=float, default=10.0)
    demo.add_argument("--out", default=None, help="directory for the waveform CSVs")

    cal = sub.add_parser("calibrate", help="Fit a calibration line to synthetic data.")
    cal.add_argument("--points", type=int, default=1000)
    cal.add_argument("--samples-per-point", type=int, default=2000)
    cal.add_argument("--delay-ns", type=float, default=0.0,
                     help="also fit a line with the trigger delayed by this much")
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--out", default=None, help="directory for calibration CSV output")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {args.seed}")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    report = run_scenario(cfg)
    print(report.to_text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text() + "\n")
        if args.csv:
            from .protocol import generate_alice, simulate_bob
            from .scenario import _resolve_attack

            atk = _resolve_attack(cfg)
            x = generate_alice(cfg.pulses, cfg.channel.va, cfg.seed)
            batch = simulate_bob(x, cfg.channel, atk, cfg.detector, cfg.seed)
            write_pulses_csv(batch, out / "pulses.csv")
    return report.exit_code


def _cmd_sweep(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = parse_config("pulses = 1000\n")
    plain, protected = sweep_keyrate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(plain, out / "keyrate_no_countermeasure.csv")
    write_sweep_csv(protected, out / "keyrate_countermeasure.csv")
    d_plain = max_secure_distance(
        eta=cfg.channel.eta,
        v_el=cfg.channel.v_el,
        beta=cfg.beta,
        snr_target=cfg.sweep.snr_target,
        xi_bob=cfg.sweep.xi_bob,
    )
    d_protected = max_secure_distance(
        eta=cfg.channel.eta,
        v_el=cfg.channel.v_el,
        beta=cfg.beta,
        snr_target=cfg.sweep.snr_target,
        xi_bob=cfg.sweep.xi_bob,
        monitor_fraction=cfg.monitor_fraction,
        switch=cfg.switch,
    )
    print(f"grid_last_positive_no_countermeasure_km={last_positive_distance(plain)!r}")
    print(f"grid_last_positive_countermeasure_km={last_positive_distance(protected)!r}")
    print(f"max_secure_distance_no_countermeasure_km={d_plain!r}")
    print(f"max_secure_distance_countermeasure_km={d_protected!r}")
    return 0


def _cmd_pulse_demo(args) -> int:
    base, trig, pm = default_lo_pulse()
    shaped = craft_equal_power_pulse(base, args.shift_ns, trig, pm)
    p_base = measure_power(base, pm)
    p_shaped = measure_power(shaped, pm)
    t_base = trigger_time(base, trig)
    t_shaped = trigger_time(shaped, trig)
    det = DetectorModel()
    delay = t_shaped - t_base
    print(f"power_base={p_base!r}")
    print(f"power_shaped={p_shaped!r}")
    print(f"relative_power_difference={abs(p_shaped - p_base) / p_base!r}")
    print(f"trigger_base_ns={t_base!r}")
    print(f"trigger_shaped_ns={t_shaped!r}")
    print(f"trigger_shift_ns={delay!r}")
    print(f"variance_gain_at_shifted_trigger={detector_gain(det.window_ns + delay, det)!r}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_waveform_csv(base, out / "base_pulse.csv")
        write_waveform_csv(shaped, out / "shaped_pulse.csv")
    return 0


def _cmd_calibrate(args) -> int:
    det = DetectorModel()
    powers = np.linspace(0.5, 1.5, args.points)
    points = simulate_calibration_points(
        powers, det, gain=1.0, samples_per_point=args.samples_per_point, seed=args.seed
    )
    line = fit_calibration_line(points)
    print(f"slope={line.slope!r}")
    print(f"intercept={line.intercept!r}")
    if args.delay_ns > 0:
        gain = detector_gain(det.window_ns + args.delay_ns, det)
        delayed = simulate_calibration_points(
            powers, det, gain=gain,
            samples_per_point=args.samples_per_point, seed=args.seed + 1,
        )
        delayed_line = fit_calibration_line(delayed)
        print(f"delayed_slope={delayed_line.slope!r}")
        print(f"slope_ratio={delayed_line.slope / line.slope!r}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "calibration_points.csv", "w") as fh:
            fh.write("power,variance\n")
            for p, v in points:
                fh.write(f"{p!r},{v!r}\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "pulse-demo": _cmd_pulse_demo,
        "calibrate": _cmd_calibrate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ScenarioStageError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
