import dataclasses

import numpy as np
import pytest

from slrc import pipeline
from slrc.config import load_config
from slrc.errors import ConfigError, ParameterError, UndefinedMetricError
from slrc.esn import ReadoutModel
from slrc.numerics import magnitude_spectrum
from slrc.timeseries import TimeSeries

SINE = [
    "signal.source=sinusoid", "signal.n_samples=1500", "signal.discard=0",
    "signal.downsample=1", "signal.dt=0.02",
]


def sine_esn(*extra):
    return load_config(overrides=SINE + [
        "experiment.backend=esn", "experiment.train_samples=500", "experiment.beta=1e-8",
        "experiment.horizon=200", "esn.n_x=100", "esn.washout=100", "experiment.seed=3",
        *extra,
    ])


@pytest.fixture(scope="module")
def sine_slwave():
    return pipeline.train(load_config(pipeline_config_path("sine_slwave")))


def pipeline_config_path(name):
    from slrc.bench import config_path
    return config_path(name)


def test_esn_sine_training_residual():
    system = pipeline.train(sine_esn())
    assert system.training_nrmse < 1e-3
    assert len(system.train) == 500 and len(system.target) == 1000


def test_slwave_sine_training_residual(sine_slwave):
    assert sine_slwave.training_nrmse < 1e-2


def test_slwave_sine_forecast_frequency(sine_slwave):
    report = pipeline.forecast(sine_slwave, 500)
    assert report.metrics["peak_freq_hz"] == pytest.approx(1.0, rel=0.05)
    assert report.nrmse < 0.3


def test_training_too_short():
    config = sine_esn("experiment.train_samples=50")
    with pytest.raises(ParameterError, match="too short"):
        pipeline.train(config)


def test_closed_loop_requires_esn():
    with pytest.raises(ConfigError):
        load_config(overrides=["backend=slwave", "generative_mode=closed_loop"])


def test_closed_loop_sine_report():
    system = pipeline.train(sine_esn())
    report = pipeline.forecast(system)
    assert len(report.forecast) == 200
    assert len(report.abs_error) == 200
    assert report.forecast.t0 == pytest.approx(system.target.t0)
    assert report.nrmse < 0.1
    assert report.runtime_ms > 0


def test_horizon_zero_flags_undefined_nrmse():
    system = pipeline.train(sine_esn())
    report = pipeline.forecast(system, 0)
    assert len(report.forecast) == 0
    assert np.isnan(report.nrmse)
    assert "nrmse_undefined" in report.flags


def test_zero_readout_gives_normalised_rms(sine_slwave):
    w = np.zeros_like(sine_slwave.readout.w_out)
    system = dataclasses.replace(
        sine_slwave,
        readout=ReadoutModel(w),
        config=sine_slwave.config.with_overrides(["postprocess=none"]),
    )
    report = pipeline.forecast(system, 300)
    assert np.all(report.forecast.values == 0)
    t = report.target.values
    assert report.nrmse == pytest.approx(np.sqrt(np.mean(t**2)) / t.std())


def test_forecast_independent_of_target(sine_slwave):
    full = pipeline.forecast(sine_slwave, 400)
    short_target = TimeSeries(
        sine_slwave.target.dt, sine_slwave.target.values[:100], sine_slwave.target.t0
    )
    cut = pipeline.forecast(dataclasses.replace(sine_slwave, target=short_target), 400)
    np.testing.assert_array_equal(full.forecast.values, cut.forecast.values)
    assert "target_truncated" in cut.flags and "target_truncated" not in full.flags
    assert len(cut.abs_error) == 100


def test_remove_dc_only_changes_the_mean(sine_slwave):
    raw = dataclasses.replace(
        sine_slwave, config=sine_slwave.config.with_overrides(["postprocess=none"])
    )
    a = pipeline.forecast(raw, 500).forecast
    b = pipeline.forecast(sine_slwave, 500).forecast
    np.testing.assert_allclose(b.values, a.values - a.values.mean(), atol=1e-12)
    sa, sb = magnitude_spectrum(a), magnitude_spectrum(b)
    np.testing.assert_allclose(sa.magnitudes[1:], sb.magnitudes[1:], atol=1e-12)


def test_end_to_end_determinism():
    a = pipeline.run_experiment(sine_esn())
    b = pipeline.run_experiment(sine_esn())
    np.testing.assert_array_equal(a.forecast.values, b.forecast.values)
    assert a.nrmse == b.nrmse and a.config_echo == b.config_echo


def test_feedback_free_ngrc_on_sine():
    config = load_config(overrides=SINE + [
        "backend=ngrc", "generative_mode=feedback_free", "train_samples=500",
        "beta=1e-10", "horizon=300",
    ])
    report = pipeline.run_experiment(config)
    assert report.metrics["peak_freq_hz"] == pytest.approx(1.0, rel=0.05)


def test_one_step_predictions_track_target():
    system = pipeline.train(sine_esn())
    y, t = pipeline.one_step_predictions(system)
    assert len(y) == len(system.target)
    assert pipeline.nrmse(y, t) < 1e-2


def test_trained_system_round_trip(tmp_path, sine_slwave):
    path = tmp_path / "system.npz"
    sine_slwave.save(path)
    loaded = pipeline.TrainedSystem.load(path)
    assert loaded.config == sine_slwave.config
    np.testing.assert_array_equal(loaded.readout.w_out, sine_slwave.readout.w_out)
    a = pipeline.forecast(sine_slwave, 100).forecast.values
    b = pipeline.forecast(loaded, 100).forecast.values
    np.testing.assert_array_equal(a, b)
    assert list(tmp_path.iterdir()) == [path]


def test_esn_system_round_trip(tmp_path):
    system = pipeline.train(sine_esn())
    system.save(tmp_path / "s.npz")
    loaded = pipeline.TrainedSystem.load(tmp_path / "s.npz")
    np.testing.assert_array_equal(
        pipeline.forecast(system, 50).forecast.values, pipeline.forecast(loaded, 50).forecast.values
    )


def test_report_directory(tmp_path, sine_slwave):
    report = pipeline.forecast(sine_slwave, 100)
    report.save(tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["abs_error.csv", "config.echo", "forecast.csv", "report.txt", "target.csv"]
    text = (tmp_path / "report.txt").read_text()
    assert text.startswith("nrmse=") and "runtime_ms=" in text
    assert load_config(tmp_path / "config.echo") == sine_slwave.config


def test_abs_error_cases(rng):
    target = TimeSeries(0.5, rng.normal(size=40))
    assert np.all(pipeline.abs_error(target, target).values == 0)
    shifted = target.with_values(target.values + 0.5)
    np.testing.assert_allclose(pipeline.abs_error(shifted, target).values, 0.5)
    other = TimeSeries(0.5, rng.normal(size=30))
    oracle = [abs(float(a) - float(b)) for a, b in zip(other.values, target.values)]
    assert list(pipeline.abs_error(other, target).values) == oracle
    with pytest.raises(ParameterError):
        pipeline.abs_error(TimeSeries(0.25, other.values), target)


def test_nrmse_cases():
    t = np.arange(5.0)
    assert pipeline.nrmse(t, t) == 0.0
    assert pipeline.nrmse(np.full(5, t.mean()), t) == pytest.approx(1.0, rel=1e-12)
    # err = 1 everywhere, std(0..4) = sqrt(2)
    assert pipeline.nrmse(t + 1, t) == pytest.approx(0.70710678118654752440, rel=1e-12)
    # err = t, rms = sqrt(6)
    assert pipeline.nrmse(2 * t, t) == pytest.approx(1.73205080756887729353, rel=1e-12)
    with pytest.raises(UndefinedMetricError):
        pipeline.nrmse(t, np.ones(5))
    with pytest.raises(ParameterError):
        pipeline.nrmse(t, t[:4])


def test_parse_components():
    assert pipeline.parse_components("1:2:0, 3:0.5:1.5") == [(1.0, 2.0, 0.0), (3.0, 0.5, 1.5)]
    with pytest.raises(ParameterError):
        pipeline.parse_components("1:2")


def test_make_signal_discard_and_downsample():
    config = load_config(overrides=SINE + ["signal.discard=100", "signal.downsample=2"])
    ts = pipeline.make_signal(config.signal)
    assert len(ts) == 700 and ts.dt == pytest.approx(0.04)
    assert ts.t0 == pytest.approx(2.0)


def test_csv_source(tmp_path):
    from slrc.timeseries import write_csv
    write_csv(TimeSeries(0.1, np.sin(np.arange(100) * 0.3)), tmp_path / "in.csv")
    config = load_config(overrides=[
        "source=csv", f"path={tmp_path / 'in.csv'}", "discard=0", "downsample=1",
    ])
    assert len(pipeline.make_signal(config.signal)) == 100
