import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqkdsim import (
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
from cvqkdsim.errors import DegenerateFitError, InfeasiblePulseError


def square_pulse(n=120, dt=1.0, level=1.0):
    return Waveform(np.full(n, level), dt=dt)


class TestWaveform:
    def test_rejects_negative_samples(self):
        with pytest.raises(ValueError):
            Waveform(np.array([0.0, -1.0, 2.0]), dt=1.0)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            Waveform(np.ones(4), dt=0.0)

    def test_rejects_short_trace(self):
        with pytest.raises(ValueError):
            Waveform(np.array([1.0]), dt=1.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Waveform(np.array([1.0, np.inf]), dt=1.0)

    def test_samples_are_frozen(self):
        w = square_pulse()
        with pytest.raises(ValueError):
            w.samples[0] = 5.0


class TestMeasurePower:
    def test_zero_waveform(self):
        w = Waveform(np.zeros(120), dt=1.0)
        assert measure_power(w, PowerMeterConfig(window_ns=100.0)) == 0.0

    def test_uniform_window_integrates_to_window_length(self):
        w = square_pulse(n=120, dt=1.0, level=1.0)
        assert measure_power(w, PowerMeterConfig(window_ns=100.0, decay_base=1.0)) == pytest.approx(100.0)

    def test_exponential_weighting_by_hand(self):
        # ages from the end: s1 weight 1, s0 weight 1/2
        w = Waveform(np.array([3.0, 4.0]), dt=1.0)
        assert measure_power(w, PowerMeterConfig(window_ns=2.0, decay_base=2.0)) == pytest.approx(5.5)

    def test_window_longer_than_waveform(self):
        w = square_pulse(n=50)
        with pytest.raises(ValueError):
            measure_power(w, PowerMeterConfig(window_ns=100.0))

    @given(
        a=st.floats(0.0, 5.0),
        b=st.floats(0.0, 5.0),
        decay=st.floats(1.0, 3.0),
    )
    @settings(max_examples=50)
    def test_linearity(self, a, b, decay):
        rng = np.random.default_rng(42)
        s1 = rng.random(60)
        s2 = rng.random(60)
        pm = PowerMeterConfig(window_ns=40.0, decay_base=decay)
        combined = Waveform(a * s1 + b * s2, dt=1.0)
        p_combined = measure_power(combined, pm)
        p_parts = a * measure_power(Waveform(s1, 1.0), pm) + b * measure_power(Waveform(s2, 1.0), pm)
        assert p_combined == pytest.approx(p_parts, rel=1e-12, abs=1e-12)


class TestTriggerTime:
    def test_u1_below_threshold_never_fires(self):
        w = Waveform(np.full(50, 0.3), dt=1.0)
        assert trigger_time(w, TriggerConfig("U1", threshold=0.5)) is None

    def test_u1_step_with_delay(self):
        samples = np.zeros(20)
        samples[5:] = 1.0
        w = Waveform(samples, dt=1.0)
        trig = TriggerConfig("U1", threshold=0.5, delay_ns=2.0)
        assert trigger_time(w, trig) == pytest.approx(7.0)

    def test_u2_fires_on_rising_edge(self):
        samples = np.zeros(30)
        samples[10:] = 2.0
        w = Waveform(samples, dt=1.0)
        trig = TriggerConfig("U2", pulse_duration_ns=5.0)
        assert trigger_time(w, trig) == pytest.approx(10.0)

    @given(scale=st.floats(1e-3, 1e3))
    @settings(max_examples=50)
    def test_u2_scale_invariance(self, scale):
        rng = np.random.default_rng(3)
        samples = np.concatenate([np.zeros(8), rng.random(40) + 0.1])
        trig = TriggerConfig("U2", pulse_duration_ns=4.0)
        base = trigger_time(Waveform(samples, 1.0), trig)
        scaled = trigger_time(Waveform(scale * samples, 1.0), trig)
        assert base == scaled

    def test_u1_never_earlier_under_leading_edge_attenuation(self):
        base, trig, pm = _ramp_pulse()
        t_base = trigger_time(base, trig)
        for alpha in np.arange(0.0, 1.01, 0.25):
            shaped = attenuate_leading_edge(base, float(alpha), 10.0, False, pm)
            t_shaped = trigger_time(shaped, trig)
            assert t_shaped is not None
            assert t_shaped >= t_base

    def test_trigger_config_validation(self):
        with pytest.raises(ValueError):
            TriggerConfig("U1", threshold=0.0)
        with pytest.raises(ValueError):
            TriggerConfig("U2")
        with pytest.raises(ValueError):
            TriggerConfig("U3", threshold=1.0)


def _ramp_pulse():
    ramp = np.arange(30) / 30
    samples = np.concatenate([ramp, np.ones(75), np.zeros(15)])
    return (
        Waveform(samples, dt=1.0),
        TriggerConfig("U1", threshold=0.5),
        PowerMeterConfig(window_ns=100.0),
    )


class TestDetectorGain:
    def test_maximum_at_window_end(self):
        det = DetectorModel(window_ns=100.0)
        assert detector_gain(100.0, det) == 1.0

    def test_quadratic_ramp_midpoint(self):
        det = DetectorModel(window_ns=100.0)
        assert detector_gain(50.0, det) == pytest.approx(0.25)

    def test_ten_ns_delay_gives_two_thirds(self):
        det = DetectorModel(window_ns=100.0, tau_ns=49.33)
        assert detector_gain(110.0, det) == pytest.approx(0.6667, abs=1e-4)

    def test_discharge_tau_hits_target_exactly(self):
        tau = discharge_tau(10.0, 1.0 / 1.5)
        det = DetectorModel(window_ns=100.0, tau_ns=tau)
        assert detector_gain(110.0, det) == pytest.approx(1.0 / 1.5, abs=1e-12)

    def test_rejects_nonpositive_time(self):
        det = DetectorModel()
        with pytest.raises(ValueError):
            detector_gain(0.0, det)

    def test_continuous_at_window_end_and_decreasing_after(self):
        det = DetectorModel(window_ns=100.0, tau_ns=49.33)
        assert detector_gain(100.0 - 1e-9, det) == pytest.approx(1.0, abs=1e-9)
        assert detector_gain(100.0 + 1e-9, det) == pytest.approx(1.0, abs=1e-9)
        times = np.linspace(100.001, 400.0, 200)
        gains = [detector_gain(float(t), det) for t in times]
        assert all(g1 > g2 for g1, g2 in zip(gains, gains[1:]))
        assert all(g < 1.0 for g in gains)

    def test_unique_maximum_on_grid(self):
        det = DetectorModel(window_ns=100.0)
        times = np.linspace(0.5, 300.0, 600)
        gains = np.array([detector_gain(float(t), det) for t in times])
        assert gains.max() <= 1.0
        assert detector_gain(100.0, det) == 1.0


class TestCalibrationLine:
    def test_exactly_collinear_points(self):
        points = [(p, 2.0 * p + 0.01) for p in (0.5, 1.0, 1.5, 2.0)]
        line = fit_calibration_line(points)
        assert line.slope == pytest.approx(2.0, abs=1e-12)
        assert line.intercept == pytest.approx(0.01, abs=1e-12)

    def test_noisy_fit_within_four_standard_errors(self):
        rng = np.random.default_rng(11)
        det = DetectorModel(slope_cal=2.0, v_el=0.05)
        powers = rng.uniform(0.5, 1.5, 1000)
        noise_sd = 0.02
        points = [(p, det.slope_cal * p + det.v_el + rng.normal(0.0, noise_sd)) for p in powers]
        line = fit_calibration_line(points)
        slope_se = noise_sd / math.sqrt(np.sum((powers - powers.mean()) ** 2))
        assert abs(line.slope - det.slope_cal) < 4.0 * slope_se

    def test_delayed_trigger_scales_fitted_slope(self):
        det = DetectorModel(window_ns=100.0, tau_ns=discharge_tau(10.0, 1.0 / 1.5))
        gain = detector_gain(110.0, det)
        powers = np.linspace(0.5, 1.5, 1000)
        nominal = simulate_calibration_points(powers, det, gain=1.0, seed=5)
        delayed = simulate_calibration_points(powers, det, gain=gain, seed=6)
        ratio = fit_calibration_line(delayed).slope / fit_calibration_line(nominal).slope
        assert ratio == pytest.approx(0.667, abs=0.01)

    def test_identical_powers_degenerate(self):
        with pytest.raises(DegenerateFitError):
            fit_calibration_line([(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)])

    def test_line_validation(self):
        with pytest.raises(ValueError):
            CalibrationLine(slope=-1.0, intercept=0.0)
        assert CalibrationLine(slope=2.0, intercept=0.01).predict(1.0) == pytest.approx(2.01)


class TestAttenuateLeadingEdge:
    def test_alpha_one_is_identity(self):
        base, _, pm = _ramp_pulse()
        shaped = attenuate_leading_edge(base, 1.0, 20.0, True, pm)
        np.testing.assert_allclose(shaped.samples, base.samples)

    def test_full_attenuation_delays_trigger(self):
        base, trig, pm = _ramp_pulse()
        t_base = trigger_time(base, trig)
        shaped = attenuate_leading_edge(base, 0.0, 25.0, True, pm)
        t_shaped = trigger_time(shaped, trig)
        assert t_shaped > t_base

    def test_power_preserved_to_tolerance(self):
        base, _, pm = _ramp_pulse()
        for alpha in (0.0, 0.3, 0.7):
            shaped = attenuate_leading_edge(base, alpha, 25.0, True, pm)
            assert measure_power(shaped, pm) == pytest.approx(
                measure_power(base, pm), rel=1e-9
            )

    def test_infeasible_when_tail_has_no_weight(self):
        base, _, pm = _ramp_pulse()
        with pytest.raises(InfeasiblePulseError):
            attenuate_leading_edge(base, 0.5, base.duration, True, pm)

    def test_span_out_of_range(self):
        base, _, pm = _ramp_pulse()
        with pytest.raises(ValueError):
            attenuate_leading_edge(base, 0.5, base.duration + 1.0, True, pm)


class TestCraftEqualPowerPulse:
    def test_zero_shift_returns_base(self):
        base, trig, pm = _ramp_pulse()
        assert craft_equal_power_pulse(base, 0.0, trig, pm) is base

    def test_ten_ns_shift_preserves_power(self):
        base, trig, pm = _ramp_pulse()
        shaped = craft_equal_power_pulse(base, 10.0, trig, pm)
        assert measure_power(shaped, pm) == pytest.approx(
            measure_power(base, pm), rel=1e-6
        )
        assert trigger_time(shaped, trig) - trigger_time(base, trig) >= 10.0

    def test_shift_beyond_duration_infeasible(self):
        base, trig, pm = _ramp_pulse()
        with pytest.raises(InfeasiblePulseError):
            craft_equal_power_pulse(base, base.duration + 10.0, trig, pm)


class TestWaveformCsv:
    def test_round_trip(self, tmp_path):
        base, _, _ = _ramp_pulse()
        path = tmp_path / "pulse.csv"
        write_waveform_csv(base, path)
        loaded = read_waveform_csv(path)
        np.testing.assert_allclose(loaded.samples, base.samples)
        assert loaded.dt == base.dt
        assert loaded.t0 == base.t0

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n3,4\n")
        with pytest.raises(ValueError):
            read_waveform_csv(path)
