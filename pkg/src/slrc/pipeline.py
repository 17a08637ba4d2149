"""Experiment orchestration: training, forecasting and scoring for every backend."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import esn, ngrc, signals, slwave
from .config import ExperimentConfig
from .errors import ParameterError, UndefinedMetricError
from .numerics import magnitude_spectrum
from .timeseries import TimeSeries, atomic_write_text, read_csv, write_csv


def make_signal(cfg) -> TimeSeries:
    """Full source series (after transient discard and downsampling)."""
    if cfg.source == "mackey_glass":
        params = signals.MGParams(cfg.mg_beta, cfg.mg_gamma, cfg.mg_tau, cfg.mg_q, cfg.mg_dt, cfg.mg_history)
        ts = signals.mackey_glass(params, cfg.n_samples)
    elif cfg.source == "sinusoid":
        ts = signals.sinusoid(cfg.freq_hz, cfg.amplitude, cfg.phase, cfg.dt, cfg.n_samples)
    elif cfg.source == "sum_of_sinusoids":
        ts = signals.sum_of_sinusoids(parse_components(cfg.components), cfg.dt, cfg.n_samples)
    elif cfg.source == "csv":
        ts = read_csv(cfg.path)
    else:
        raise ParameterError(f"unknown signal source {cfg.source!r}")
    if cfg.discard:
        if cfg.discard >= len(ts):
            raise ParameterError("discard removes the whole signal")
        ts = TimeSeries(ts.dt, ts.values[cfg.discard:], ts.t0 + cfg.discard * ts.dt)
    return signals.downsample(ts, cfg.downsample, prefilter=cfg.prefilter)


def parse_components(text: str):
    comps = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ParameterError(f"component {item!r} is not freq:amp:phase")
        comps.append(tuple(float(p) for p in parts))
    return comps


def abs_error(y: TimeSeries, target: TimeSeries) -> TimeSeries:
    """Pointwise ``|y - target|`` over the common leading samples."""
    if y.dt != target.dt:
        raise ParameterError(f"dt mismatch: {y.dt} vs {target.dt}")
    n = min(len(y), len(target))
    return TimeSeries(target.dt, np.abs(y.values[:n] - target.values[:n]), target.t0)


def nrmse(y, target) -> float:
    """Root-mean-square error divided by the target's standard deviation."""
    y = np.asarray(getattr(y, "values", y), dtype=float)
    target = np.asarray(getattr(target, "values", target), dtype=float)
    if len(y) != len(target) or len(y) < 2:
        raise ParameterError("nrmse needs two sequences of equal length >= 2")
    std = target.std()
    if std == 0:
        raise UndefinedMetricError("target has zero variance; NRMSE is undefined")
    return float(np.sqrt(np.mean((y - target) ** 2)) / std)


def pearson(y, target) -> float:
    y = np.asarray(getattr(y, "values", y), dtype=float)
    target = np.asarray(getattr(target, "values", target), dtype=float)
    if y.std() == 0 or target.std() == 0:
        raise UndefinedMetricError("correlation with a constant sequence is undefined")
    return float(np.corrcoef(y, target)[0, 1])


@dataclass(frozen=True)
class TrainedSystem:
    config: ExperimentConfig
    train: TimeSeries
    target: TimeSeries
    readout: esn.ReadoutModel
    offset: float
    scale: float
    pseudo_period: int
    training_nrmse: float
    esn_model: esn.EsnModel | None = None

    def normalise(self, values):
        return (np.asarray(values, dtype=float) - self.offset) / self.scale

    def denormalise(self, values):
        return np.asarray(values, dtype=float) * self.scale + self.offset

    def save(self, path):
        """Persist everything needed for exploitation in one ``.npz`` file."""
        arrays = dict(
            config=np.array(self.config.echo()),
            train=self.train.values,
            target=self.target.values,
            time_axis=np.array([self.train.dt, self.train.t0, self.target.t0]),
            w_out=self.readout.w_out,
            norm=np.array([self.offset, self.scale, self.training_nrmse]),
            pseudo_period=np.array(self.pseudo_period),
        )
        if self.esn_model is not None:
            arrays.update(esn_w_in=self.esn_model.w_in, esn_w=self.esn_model.w)
        tmp = f"{path}.tmp.npz"
        np.savez(tmp, **arrays)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "TrainedSystem":
        from .config import parse_config

        with np.load(path, allow_pickle=False) as data:
            config = parse_config(str(data["config"]))
            dt, t0_train, t0_target = data["time_axis"]
            offset, scale, train_err = data["norm"]
            model = None
            if "esn_w" in data:
                model = esn.EsnModel(data["esn_w_in"], data["esn_w"], _esn_config(config))
            return cls(
                config,
                TimeSeries(float(dt), data["train"], float(t0_train)),
                TimeSeries(float(dt), data["target"], float(t0_target)),
                esn.ReadoutModel(data["w_out"]),
                float(offset),
                float(scale),
                int(data["pseudo_period"]),
                float(train_err),
                model,
            )


@dataclass
class ForecastReport:
    forecast: TimeSeries
    target: TimeSeries
    abs_error: TimeSeries
    nrmse: float
    config_echo: str
    runtime_ms: float
    metrics: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def save(self, directory):
        """Write the report directory (all files are replaced atomically)."""
        os.makedirs(directory, exist_ok=True)
        write_csv(self.forecast, os.path.join(directory, "forecast.csv"))
        write_csv(self.target, os.path.join(directory, "target.csv"))
        write_csv(self.abs_error, os.path.join(directory, "abs_error.csv"))
        lines = [f"nrmse={self.nrmse!r}"]
        lines += [f"{k}={v!r}" for k, v in sorted(self.metrics.items())]
        lines.append(f"flags={','.join(self.flags)}")
        lines.append(f"runtime_ms={self.runtime_ms:.3f}")
        atomic_write_text(os.path.join(directory, "report.txt"), "\n".join(lines) + "\n")
        atomic_write_text(os.path.join(directory, "config.echo"), self.config_echo)


def _esn_config(config: ExperimentConfig) -> esn.EsnConfig:
    return replace(config.esn, seed=config.experiment.seed)


def _features(config: ExperimentConfig, drive: np.ndarray, model=None):
    """Backend feature columns for a normalised drive.

    Returns ``(F, first)`` where column ``j`` of ``F`` belongs to drive index
    ``first + j``.
    """
    backend = config.experiment.backend
    series = TimeSeries(1.0, drive)
    if backend == "esn":
        run = model.copy()
        run.reset()
        return esn.harvest(run, series), run.config.washout
    if backend == "slwave":
        spec = config.features.spec()
        probe = slwave.respond(config.slwave, series)
        washout = config.features.washout
        return slwave.assemble_features(probe, series, spec, washout), washout + spec.span
    if backend == "ngrc":
        return ngrc.nvar_features(series, config.ngrc), config.ngrc.span
    raise ParameterError(f"unknown backend {backend!r}")


def resolve_train_samples(config: ExperimentConfig, series: TimeSeries) -> tuple[int, int]:
    """``(train_samples, pseudo_period)`` with the pseudo-period measured on the source."""
    period = signals.pseudo_period(series)
    n = config.experiment.train_samples
    if n == 0:
        n = int(round(config.experiment.train_pseudo_periods * period))
    return n, period


def train(config: ExperimentConfig) -> TrainedSystem:
    """Generate the signal, split it, fit the readout on next-step targets."""
    series = make_signal(config.signal)
    n_train, period = resolve_train_samples(config, series)
    train_ts, target_ts = signals.split(series, n_train)
    if config.experiment.input_norm == "standardize":
        offset, scale = float(train_ts.values.mean()), float(train_ts.values.std())
        if scale == 0:
            raise ParameterError("cannot standardise a constant training signal")
    else:
        offset, scale = 0.0, 1.0

    model = None
    if config.experiment.backend == "esn":
        model = esn.init_esn(_esn_config(config))
    drive = (train_ts.values - offset) / scale
    # the last training sample has no next-step target
    try:
        F, first = _features(config, drive[:-1], model)
    except ParameterError as exc:
        raise ParameterError(f"training segment too short: {exc}") from exc
    targets = drive[first + 1:]
    readout = esn.train_readout(F, targets, config.experiment.beta)
    fit = readout.apply(F)[0]
    err = nrmse(fit, targets) if len(targets) >= 2 and targets.std() > 0 else float("nan")
    return TrainedSystem(config, train_ts, target_ts, readout, offset, scale, period, err, model)


def _replica_source(system: TrainedSystem) -> TimeSeries:
    train_ts = system.train
    lag = system.config.experiment.replica_lag
    if lag == "auto":
        window = signals.pseudo_period(train_ts)
        lag = signals.best_replica_lag(train_ts, window, window)
    lag = int(lag)
    if lag == 0 or lag >= len(train_ts):
        return train_ts
    return TimeSeries(train_ts.dt, train_ts.values[-lag:], train_ts.t_end - lag * train_ts.dt)


def surrogate_for(system: TrainedSystem, horizon: int) -> TimeSeries:
    exp = system.config.experiment
    if exp.drive_mode == "delayed_replica":
        source = _replica_source(system)
    else:
        source = system.train
    drive = signals.surrogate_drive(source, exp.drive_mode, horizon, seed=exp.seed)
    return TimeSeries(drive.dt, drive.values, system.train.t_end)


def _report(system: TrainedSystem, forecast_values, started, extra=None) -> ForecastReport:
    exp = system.config.experiment
    values = np.asarray(forecast_values, dtype=float)
    if exp.postprocess == "remove_dc" and len(values):
        values = values - values.mean()
    forecast = TimeSeries(system.train.dt, values, system.target.t0)
    n = min(len(forecast), len(system.target))
    target = TimeSeries(system.target.dt, system.target.values[:n], system.target.t0)
    flags = []
    if len(forecast) > len(system.target):
        flags.append("target_truncated")
    metrics = dict(
        training_nrmse=system.training_nrmse,
        train_samples=len(system.train),
        pseudo_period=system.pseudo_period,
        horizon=len(forecast),
    )
    if extra:
        metrics.update(extra)
    err = abs_error(forecast, target)
    try:
        score = nrmse(forecast.values[:n], target.values)
    except (ParameterError, UndefinedMetricError):
        score = float("nan")
        flags.append("nrmse_undefined")
    try:
        metrics["pearson"] = pearson(forecast.values[:n], target.values) if n >= 2 else float("nan")
    except UndefinedMetricError:
        metrics["pearson"] = float("nan")
    if n >= 8:
        metrics["peak_freq_hz"] = magnitude_spectrum(forecast).peak_frequency()
    runtime = max((time.perf_counter() - started) * 1e3, 1e-6)
    return ForecastReport(forecast, target, err, score, system.config.echo(), runtime, metrics, flags)


def forecast_feedback_free(system: TrainedSystem, horizon: int) -> ForecastReport:
    """Drive the frozen reservoir with a surrogate signal; outputs are never fed back.

    The reservoir is replayed over the training drive followed by the
    surrogate, so the first forecast sample comes from the final training
    column and each later one from the surrogate sample before it.
    """
    started = time.perf_counter()
    if horizon < 0:
        raise ParameterError("horizon must be >= 0")
    extra = {}
    if horizon == 0:
        return _report(system, [], started)
    surrogate = surrogate_for(system, horizon)
    drive = system.normalise(np.concatenate([system.train.values, surrogate.values]))
    F, first = _features(system.config, drive, system.esn_model)
    start = len(system.train) - 1 - first
    y = system.readout.apply(F[:, start:start + horizon])[0]
    if system.config.experiment.drive_mode == "delayed_replica":
        extra["replica_lag"] = len(_replica_source(system))
    return _report(system, system.denormalise(y), started, extra)


def forecast_closed_loop(system: TrainedSystem, horizon: int) -> ForecastReport:
    """Free-running ESN forecast with ``u_n = y_{n-1}``."""
    started = time.perf_counter()
    if system.config.experiment.backend != "esn" or system.esn_model is None:
        raise ParameterError("closed-loop forecasting is only available for the esn backend")
    model = system.esn_model.copy()
    model.reset()
    primer = TimeSeries(system.train.dt, system.normalise(system.train.values))
    out = esn.run_generative(model, system.readout, horizon, primer)
    return _report(system, system.denormalise(out.values), started)


def forecast(system: TrainedSystem, horizon: int | None = None) -> ForecastReport:
    if horizon is None:
        horizon = system.config.experiment.horizon
    if system.config.experiment.generative_mode == "closed_loop":
        return forecast_closed_loop(system, horizon)
    return forecast_feedback_free(system, horizon)


def run_experiment(config: ExperimentConfig) -> ForecastReport:
    return forecast(train(config))


def one_step_predictions(system: TrainedSystem) -> tuple[np.ndarray, np.ndarray]:
    """Predictive-regime outputs over the held-out target and the values they predict.

    The backend is driven by the true series (training + target); output ``j``
    predicts target sample ``j``.
    """
    drive = system.normalise(np.concatenate([system.train.values, system.target.values]))
    F, first = _features(system.config, drive[:-1], system.esn_model)
    start = len(system.train) - 1 - first
    y = system.denormalise(system.readout.apply(F[:, start:])[0])
    return y, system.target.values[: len(y)]
