import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slrc.errors import AliasingWarning, ParameterError
from slrc.numerics import magnitude_spectrum
from slrc.signals import (
    MGParams,
    autocorrelation,
    downsample,
    mackey_glass,
    pseudo_period,
    sinusoid,
    split,
    sum_of_sinusoids,
    surrogate_drive,
)
from slrc.timeseries import TimeSeries, concatenate, read_csv, write_csv

# min/max of the first 5000 samples at dt=0.1, taken from a dt=0.01 run of the same integrator
MG_FINE_MIN = 0.4181878188508371
MG_FINE_MAX = 1.3189922879628062


class TestMackeyGlass:
    def test_fixed_point(self):
        ts = mackey_glass(MGParams(history=1.0), 500)
        np.testing.assert_allclose(ts.values, 1.0, atol=1e-14)

    def test_pure_decay_without_delay_term(self):
        ts = mackey_glass(MGParams(beta_mg=0.0, history=1.0, dt=0.1), 100)
        k = np.arange(100)
        np.testing.assert_allclose(ts.values, np.exp(-0.01 * k), rtol=1e-10)

    def test_default_run_matches_fine_step_oracle(self):
        coarse = mackey_glass(MGParams(), 5000).values
        fine = mackey_glass(MGParams(dt=0.01), 49991).values[::10]
        assert np.max(np.abs(coarse - fine)) < 1e-3
        assert coarse.min() == pytest.approx(MG_FINE_MIN, abs=1e-3)
        assert coarse.max() == pytest.approx(MG_FINE_MAX, abs=1e-3)
        assert len(np.unique(np.round(coarse[2000:], 6))) > 1000  # aperiodic, not settled

    def test_long_run_bounded(self):
        ts = mackey_glass(MGParams(), 100_001)
        assert ts.is_finite()
        assert 0 < ts.values.min() and ts.values.max() < 2

    def test_fourth_order_convergence(self):
        def terminal(dt):
            return mackey_glass(MGParams(dt=dt), int(round(100 / dt)) + 1).values[-1]

        ref = terminal(0.1 / 16)
        ratio = abs(terminal(0.1) - ref) / abs(terminal(0.05) - ref)
        assert 8 <= ratio <= 32

    def test_non_integer_delay_ratio(self):
        # tau/dt = 170.x exercises the interpolated delay lookup everywhere
        a = mackey_glass(MGParams(tau_mg=17.03, dt=0.1), 3000).values
        b = mackey_glass(MGParams(tau_mg=17.03, dt=0.025), 11997).values[::4]
        assert np.max(np.abs(a - b)) < 1e-3

    @pytest.mark.parametrize(
        "kwargs",
        [dict(beta_mg=-1), dict(gamma_mg=-0.1), dict(tau_mg=0), dict(q=0), dict(dt=2.0)],
    )
    def test_invalid_params(self, kwargs):
        with pytest.raises(ParameterError):
            mackey_glass(MGParams(**kwargs), 10)

    def test_zero_samples_rejected(self):
        with pytest.raises(ParameterError):
            mackey_glass(MGParams(), 0)


class TestSinusoids:
    def test_quarter_period_sampling(self):
        ts = sinusoid(1.0, 1.0, 0.0, 0.25, 5)
        np.testing.assert_allclose(ts.values, [0, 1, 0, -1, 0], atol=1e-12)

    def test_zero_amplitude(self):
        assert not np.any(sinusoid(3.0, 0.0, 0.4, 0.01, 50).values)

    def test_single_peak_at_one_hz(self):
        spec = magnitude_spectrum(sinusoid(1.0, 1.0, 0.0, 0.01, 1000))
        assert spec.peak_frequency() == pytest.approx(1.0, abs=0.1)

    def test_nyquist_rejected(self):
        with pytest.raises(ParameterError):
            sinusoid(50.0, 1.0, 0.0, 0.01, 10)

    def test_sum_single_component_identity(self):
        a = sum_of_sinusoids([(2.0, 0.7, 0.3)], 0.01, 200).values
        b = sinusoid(2.0, 0.7, 0.3, 0.01, 200).values
        np.testing.assert_array_equal(a, b)

    def test_sum_two_peaks(self):
        ts = sum_of_sinusoids([(1.0, 1.0, 0.0), (2.0, 0.6, 1.0)], 0.01, 2000)
        spec = magnitude_spectrum(ts)
        m = spec.magnitudes
        peaks = [i for i in range(1, len(m) - 1) if m[i] > m[i - 1] and m[i] >= m[i + 1]]
        strong = sorted(peaks, key=lambda i: -m[i])[:2]
        assert sorted(spec.freqs_hz[strong]) == pytest.approx([1.0, 2.0], abs=1e-9)
        assert all(m[i] < 0.01 for i in peaks if i not in strong)

    def test_sum_empty(self):
        with pytest.raises(ParameterError):
            sum_of_sinusoids([], 0.01, 10)


class TestDownsample:
    def test_identity(self):
        ts = TimeSeries(0.1, np.arange(7.0))
        assert downsample(ts, 1) is ts

    def test_plain_decimation(self):
        out = downsample(TimeSeries(0.5, np.arange(6.0)), 2, prefilter=False)
        np.testing.assert_array_equal(out.values, [0, 2, 4])
        assert out.dt == 1.0

    def test_aliasing_warning(self):
        ts = sinusoid(10.0, 1.0, 0.0, 0.001, 5000)
        with pytest.warns(AliasingWarning):
            downsample(ts, 100)

    def test_no_warning_when_resolved(self):
        ts = sinusoid(1.0, 1.0, 0.0, 0.001, 5000)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            downsample(ts, 100)

    def test_prefilter_is_moving_average(self):
        out = downsample(TimeSeries(1.0, np.array([0.0, 3.0, 3.0, 6.0, 6.0, 9.0])), 3)
        assert out.values[1] == pytest.approx(5.0)

    @pytest.mark.parametrize("factor", [0, -2, 1.5])
    def test_bad_factor(self, factor):
        with pytest.raises(ParameterError):
            downsample(TimeSeries(1.0, np.arange(10.0)), factor)

    @pytest.mark.filterwarnings("ignore::slrc.errors.AliasingWarning")
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 80))
    def test_composition(self, a, b, n):
        ts = TimeSeries(0.1, np.sin(np.arange(n) * 0.37))
        once = downsample(ts, a * b, prefilter=False)
        twice = downsample(downsample(ts, a, prefilter=False), b, prefilter=False)
        np.testing.assert_array_equal(once.values, twice.values)
        assert once.dt == pytest.approx(twice.dt)


class TestSplit:
    def test_lengths_and_time_axis(self):
        ts = TimeSeries(0.5, np.arange(10.0), t0=2.0)
        train, target = split(ts, 4)
        assert (len(train), len(target)) == (4, 6)
        assert target.t0 == 2.0 + 4 * 0.5

    def test_single_target_sample(self):
        _, target = split(TimeSeries(1.0, np.arange(10.0)), 9)
        assert len(target) == 1

    @pytest.mark.parametrize("n", [0, 10, -1])
    def test_out_of_range(self, n):
        with pytest.raises(ParameterError):
            split(TimeSeries(1.0, np.arange(10.0)), n)

    @given(st.integers(2, 60), st.data())
    def test_split_concat_roundtrip(self, n, data):
        k = data.draw(st.integers(1, n - 1))
        ts = TimeSeries(0.3, np.cos(np.arange(n)))
        train, target = split(ts, k)
        np.testing.assert_array_equal(concatenate(train, target).values, ts.values)


def _brute_autocorr(x, lag):
    x = x - x.mean()
    return np.sum(x[: len(x) - lag] * x[lag:]) / np.sum(x * x)


def test_autocorrelation_matches_direct_sums(rng):
    x = rng.normal(size=200)
    acf = autocorrelation(x)
    for lag in (0, 1, 7, 150):
        assert acf[lag] == pytest.approx(_brute_autocorr(x, lag), abs=1e-12)


def test_mg_pseudo_period_near_fifty_time_units():
    ts = mackey_glass(MGParams(), 30001)
    segment = TimeSeries(0.1, ts.values[5000:])
    lag = pseudo_period(segment)
    # direct-sum oracle over a coarse lag grid
    x = segment.values
    lags = np.arange(300, 700, 2)
    brute = lags[np.argmax([_brute_autocorr(x, k) for k in lags])]
    assert abs(lag - brute) <= 2
    assert 40 <= lag * 0.1 <= 60


class TestSurrogateDrive:
    def test_replica_same_length_is_copy(self):
        train = sinusoid(1.0, 1.0, 0.2, 0.02, 137)
        out = surrogate_drive(train, "delayed_replica", 137)
        np.testing.assert_array_equal(out.values, train.values)

    def test_replica_tiles(self):
        train = TimeSeries(0.1, np.arange(10.0))
        out = surrogate_drive(train, "delayed_replica", 25)
        expected = list(range(10)) * 2 + list(range(5))
        np.testing.assert_array_equal(out.values, expected)
        assert out.t0 == pytest.approx(train.t_end)

    def test_sinusoid_sum_recovers_pure_tone(self):
        train = sinusoid(1.0, 1.0, 0.0, 0.02, 500)
        out = surrogate_drive(train, "sinusoid_sum", 500)
        spec = magnitude_spectrum(out)
        assert spec.peak_frequency() == pytest.approx(1.0, abs=0.05)
        amplitude = np.sqrt(2) * np.sqrt(np.mean(out.values**2))
        assert amplitude == pytest.approx(1.0, rel=0.02)
        # continuation, not restart: phase carries on from the end of training
        np.testing.assert_allclose(out.values, sinusoid(1.0, 1.0, 0.0, 0.02, 500, t0=10.0).values, atol=0.02)

    def test_sinusoid_sum_non_bin_frequency(self):
        train = sinusoid(1.37, 0.8, 0.5, 0.02, 731)
        out = surrogate_drive(train, "sinusoid_sum", 300)
        expected = sinusoid(1.37, 0.8, 0.5, 0.02, 300, t0=train.t_end).values
        assert np.max(np.abs(out.values - expected)) < 0.03

    def test_bad_horizon(self):
        with pytest.raises(ParameterError):
            surrogate_drive(TimeSeries(1.0, [1.0, 2.0]), "delayed_replica", 0)

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            surrogate_drive(TimeSeries(1.0, [1.0, 2.0]), "echo", 5)

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(0.3, 3.0), st.floats(0.2, 2.0), st.floats(-1.0, 1.0),
        st.integers(300, 600), st.integers(1, 400),
    )
    def test_sinusoid_sum_rms(self, freq, amp, offset, n, horizon):
        train = sinusoid(freq, amp, 0.3, 0.02, n).values + offset
        train = TimeSeries(0.02, train)
        out = surrogate_drive(train, "sinusoid_sum", horizon)
        rms = lambda v: np.sqrt(np.mean(v**2))
        assert rms(out.values) == pytest.approx(rms(train.values), rel=0.01)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 6), st.integers(1, 4))
    def test_replica_rms(self, periods, reps):
        train = sinusoid(1.0, 1.3, 0.1, 0.02, 50 * periods)
        out = surrogate_drive(train, "delayed_replica", reps * len(train))
        rms = lambda v: np.sqrt(np.mean(v**2))
        assert rms(out.values) == pytest.approx(rms(train.values), rel=0.01)

    def test_mg_replica_rms(self, mg_unit):
        train = TimeSeries(1.0, mg_unit.values[:300])
        out = surrogate_drive(train, "delayed_replica", 750)
        rms = lambda v: np.sqrt(np.mean(v**2))
        assert rms(out.values) == pytest.approx(rms(train.values), rel=0.01)


class TestCsv:
    def test_roundtrip_exact(self, tmp_path, rng):
        ts = TimeSeries(0.1, rng.normal(size=50) * 1e-7 + 1 / 3)
        path = tmp_path / "s.csv"
        write_csv(ts, path)
        back = read_csv(path)
        np.testing.assert_array_equal(back.values, ts.values)
        assert back.dt == ts.dt and back.t0 == ts.t0
        assert path.read_text().splitlines()[0] == "t,value"

    def test_roundtrip_with_offset(self, tmp_path):
        ts = TimeSeries(0.02, np.arange(5.0), t0=3.7)
        write_csv(ts, tmp_path / "s.csv")
        back = read_csv(tmp_path / "s.csv")
        assert back.dt == 0.02 and back.t0 == 3.7

    def test_bad_header(self, tmp_path):
        (tmp_path / "x.csv").write_text("time,v\n0,1\n")
        with pytest.raises(ParameterError):
            read_csv(tmp_path / "x.csv")


def test_timeseries_rejects_bad_dt():
    with pytest.raises(ParameterError):
        TimeSeries(0.0, [1.0])
    with pytest.raises(ParameterError):
        TimeSeries(math.nan, [1.0])
