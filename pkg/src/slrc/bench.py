"""Desk-scale reproduction checks shared by ``slrc bench`` and the acceptance tests."""

from __future__ import annotations

import filecmp
import os
import tempfile
import time
from dataclasses import dataclass
from importlib.resources import files

import numpy as np

from . import esn, numerics, pipeline, signals, slwave
from .config import load_config
from .timeseries import TimeSeries, write_columns_csv


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: str
    threshold: str
    seconds: float
    time_limit: float | None = None

    @property
    def ok(self) -> bool:
        in_time = self.time_limit is None or self.seconds < self.time_limit
        return self.passed and in_time

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        limit = f" (limit {self.time_limit:g} s)" if self.time_limit else ""
        return (f"[{status}] {self.number:2d} {self.name}: {self.measured} "
                f"vs {self.threshold}; {self.seconds:.2f} s{limit}")


def config_path(name: str) -> str:
    """Path of a bundled experiment config such as ``mg_esn``."""
    return str(files("slrc") / "configs" / f"{name}.ini")


def _timed(func):
    start = time.perf_counter()
    value = func()
    return value, time.perf_counter() - start


def check_mg_order() -> CheckResult:
    def run():
        def terminal(dt):
            n = int(round(100.0 / dt)) + 1
            return signals.mackey_glass(signals.MGParams(dt=dt), n).values[-1]

        ref = terminal(0.1 / 16)
        return abs(terminal(0.1) - ref) / abs(terminal(0.05) - ref)

    ratio, secs = _timed(run)
    return CheckResult(1, "MG integrator order", 8 <= ratio <= 32,
                       f"error ratio {ratio:.3f}", "[8, 32]", secs, 5.0)


def check_linear_algebra(n_instances=200, seed=2024) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        worst_ridge = worst_radius = 0.0
        for _ in range(n_instances):
            n_feat = int(rng.integers(1, 13))
            T = int(rng.integers(1, 13))
            n_out = int(rng.integers(1, 4))
            X = rng.normal(size=(n_feat, T))
            Y = rng.normal(size=(n_out, T))
            beta = 10.0 ** rng.uniform(-3, 0)
            ref = Y @ X.T @ np.linalg.inv(X @ X.T + beta * np.eye(n_feat))
            got = numerics.ridge_solve(X, Y, beta)
            worst_ridge = max(worst_ridge, np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300))

            n = int(rng.integers(1, 13))
            W = rng.normal(size=(n, n))
            true = np.max(np.abs(np.linalg.eigvals(W)))
            worst_radius = max(worst_radius, abs(numerics.spectral_radius(W) - true) / true)
        return worst_ridge, worst_radius

    (ridge_err, radius_err), secs = _timed(run)
    return CheckResult(2, "ridge/eigen oracles", ridge_err <= 1e-8 and radius_err <= 1e-6,
                       f"worst rel. error ridge {ridge_err:.2e}, radius {radius_err:.2e}",
                       "1e-8 / 1e-6", secs, 10.0)


def check_state_range(total_steps=100_000, seed=7) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        steps = 0
        while steps < total_steps:
            n_x = int(rng.integers(1, 40))
            cfg = esn.EsnConfig(
                n_x=n_x,
                alpha=float(rng.uniform(1e-3, 1.0)),
                rho=float(rng.uniform(0.1, 3.0)),
                input_scale=float(rng.uniform(0.1, 10.0)),
                density=1.0,
                seed=int(rng.integers(2**31)),
            )
            model = esn.init_esn(cfg)
            model.x = rng.uniform(-1, 1, n_x)
            for u in rng.normal(scale=5.0, size=1000):
                worst = max(worst, float(np.max(np.abs(esn.update_state(model, u)))))
            steps += 1000
        return worst, steps

    (worst, steps), secs = _timed(run)
    return CheckResult(3, "leaky-tanh state range", worst <= 1.0,
                       f"max |x| = {worst:.6f} over {steps} steps", "<= 1", secs, 10.0)


def _single_dominant_peak(spec: numerics.Spectrum, rel=0.01) -> bool:
    m = spec.magnitudes
    peaks = [i for i in range(1, len(m) - 1) if m[i] > m[i - 1] and m[i] >= m[i + 1]]
    strong = [i for i in peaks if m[i] >= rel * m.max()]
    return len(strong) == 1


def check_harmonics(params: slwave.FilmParams | None = None) -> CheckResult:
    params = params or slwave.FilmParams()

    def run():
        levels, floor = slwave.harmonic_levels(params)
        floor = max(floor, np.finfo(float).tiny)
        dt = params.sample_duration
        drive = signals.sinusoid(1.0, 1.0, 0.0, dt, int(round(10 / dt)))
        return levels, floor, _single_dominant_peak(numerics.magnitude_spectrum(drive))

    (levels, floor, single), secs = _timed(run)
    db2 = 20 * np.log10(levels[2] / floor)
    db3 = 20 * np.log10(levels[3] / floor)
    return CheckResult(4, "film harmonic generation", db2 >= 20 and db3 >= 20 and single,
                       f"2 Hz {db2:.1f} dB, 3 Hz {db3:.1f} dB above floor; drive single peak {single}",
                       ">= 20 dB each, single drive peak", secs, 60.0)


def check_sine_free_run() -> CheckResult:
    def run():
        report = pipeline.run_experiment(load_config(config_path("sine_slwave")))
        f = report.forecast
        periods = 10
        n = int(round(periods / f.dt))
        peak = numerics.magnitude_spectrum(f.with_values(f.values[:n])).peak_frequency()
        err = pipeline.nrmse(f.values[:n], report.target.values[:n])
        return peak, err

    (peak, err), secs = _timed(run)
    ok = abs(peak - 1.0) <= 0.05 and err < 0.3
    return CheckResult(5, "sinusoid free-run (film)", ok,
                       f"peak {peak:.3f} Hz, NRMSE {err:.4f}", "|f-1| <= 5%, NRMSE < 0.3", secs, 60.0)


def check_mg_esn() -> CheckResult:
    def run():
        system = pipeline.train(load_config(config_path("mg_esn")))
        report = pipeline.forecast_closed_loop(system, 500)
        P = system.pseudo_period
        f, g = report.forecast.values, report.target.values
        return (system, pipeline.nrmse(f[:P], g[:P]),
                len(f) == 500 and bool(np.all(np.isfinite(f))))

    (system, err, finite), secs = _timed(run)
    ok = err < 0.5 and finite and system.config.esn.n_x >= 1000
    return CheckResult(6, "MG closed-loop ESN (1000 neurons)", ok,
                       f"NRMSE {err:.4f} over first pseudo-period, 500 finite steps {finite}, "
                       f"{len(system.train)} training samples",
                       "NRMSE < 0.5, no divergence", secs, 30.0)


def check_mg_slwave() -> CheckResult:
    def run():
        system = pipeline.train(load_config(config_path("mg_slwave")))
        report = pipeline.forecast_feedback_free(system, 2 * system.pseudo_period)
        P = system.pseudo_period
        r = pipeline.pearson(report.forecast.values[:2 * P], report.target.values[:2 * P])
        esn_train = load_config(config_path("mg_esn")).experiment.train_samples
        return r, len(system.train), P, esn_train

    (r, n_train, P, esn_train), secs = _timed(run)
    ok = r >= 0.8 and n_train <= round(6 * P) and n_train < esn_train
    return CheckResult(7, "MG feedback-free film forecast", ok,
                       f"Pearson {r:.4f} over 2 pseudo-periods, train {n_train} samples "
                       f"({n_train / P:.2f} periods) vs ESN {esn_train}",
                       "r >= 0.8, train <= 6 periods < ESN", secs, 120.0)


def check_fading_memory(n_samples=200, tail=50) -> CheckResult:
    def run():
        params = slwave.FilmParams()
        x = params.dx * np.arange(params.n_grid)
        rng = np.random.default_rng(11)
        drive = signals.sum_of_sinusoids(
            [(1.0, 0.8, 0.3), (2.3, 0.4, 1.0), (0.4, 0.5, 2.0)], params.sample_duration, n_samples
        )
        first = 0.4 * np.sin(7 * x) * x
        second = -0.3 * np.exp(-((x - 0.6) / 0.1) ** 2) + 0.05 * rng.standard_normal(len(x))
        a = slwave.respond(params, drive, initial=first).values
        b = slwave.respond(params, drive, initial=second).values
        return float(np.sqrt(np.mean((a[-tail:] - b[-tail:]) ** 2)))

    rms, secs = _timed(run)
    return CheckResult(8, "film fading memory", rms < 1e-6,
                       f"probe-difference RMS {rms:.2e} (last {tail} of {n_samples})", "< 1e-6", secs, 30.0)


def check_ngrc() -> CheckResult:
    def run():
        system = pipeline.train(load_config(config_path("mg_ngrc")))
        y, target = pipeline.one_step_predictions(system)
        return pipeline.nrmse(y, target), system.config.ngrc

    (err, spec), secs = _timed(run)
    ok = err < 0.05 and spec.k_delays == 4 and spec.poly_order == 2
    return CheckResult(9, "NG-RC one-step MG", ok, f"held-out NRMSE {err:.4f}", "< 0.05", secs, 10.0)


def check_determinism() -> CheckResult:
    from .cli import main

    def run():
        with tempfile.TemporaryDirectory() as tmp:
            outs = [os.path.join(tmp, f"run{i}") for i in (1, 2)]
            codes = [main(["forecast", "--config", config_path("mg_esn"), "--out", out, "--quiet"])
                     for out in outs]
            same = all(
                filecmp.cmp(os.path.join(outs[0], name), os.path.join(outs[1], name), shallow=False)
                for name in ("forecast.csv", "target.csv", "abs_error.csv", "config.echo")
            )
            return codes, same

    (codes, same), secs = _timed(run)
    return CheckResult(10, "forecast determinism", codes == [0, 0] and same,
                       f"exit codes {codes}, byte-identical {same}", "identical CSVs", secs)


CHECKS = [
    check_mg_order,
    check_linear_algebra,
    check_state_range,
    check_harmonics,
    check_sine_free_run,
    check_mg_esn,
    check_mg_slwave,
    check_fading_memory,
    check_ngrc,
    check_determinism,
]


def run_all(checks=CHECKS):
    return [check() for check in checks]


def write_summary(results, path):
    write_columns_csv(
        path,
        ["criterion", "name", "status", "measured", "threshold", "seconds"],
        [[r.number for r in results], [r.name for r in results],
         ["pass" if r.ok else "fail" for r in results], [r.measured for r in results],
         [r.threshold for r in results], [r.seconds for r in results]],
    )
