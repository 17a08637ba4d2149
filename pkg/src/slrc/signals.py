"""Input and target signal generators and transforms.

Mackey-Glass series, sinusoids, surrogate exploitation drives, downsampling
and train/target splitting.  Everything returns :class:`TimeSeries`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.optimize import least_squares

from .errors import AliasingWarning, DivergenceError, ParameterError
from .numerics import magnitude_spectrum
from .timeseries import TimeSeries


@dataclass(frozen=True)
class MGParams:
    """Mackey-Glass delay equation parameters.

    ``dt`` is the integration step (and sample spacing) in model time units;
    ``history`` is the constant value of x on ``[-tau_mg, 0]``.
    """

    beta_mg: float = 0.2
    gamma_mg: float = 0.1
    tau_mg: float = 17.0
    q: float = 10.0
    dt: float = 0.1
    history: float = 1.2

    def validate(self):
        if not (self.beta_mg >= 0 and self.gamma_mg >= 0):
            raise ParameterError("beta_mg and gamma_mg must be >= 0")
        if not (self.tau_mg > 0 and self.q > 0 and self.dt > 0):
            raise ParameterError("tau_mg, q and dt must be > 0")
        if self.dt > self.tau_mg / 10:
            raise ParameterError(f"dt={self.dt} exceeds tau_mg/10={self.tau_mg / 10}")
        if not math.isfinite(self.history):
            raise ParameterError("history must be finite")


def mackey_glass(params: MGParams, n_samples: int) -> TimeSeries:
    """Integrate ``x' = beta x(t-tau) / (1 + x(t-tau)^q) - gamma x`` with fixed-step RK4.

    Delayed values between grid points come from cubic Hermite interpolation
    over a ring buffer holding the last ``tau/dt + 3`` values and slopes.
    Sample ``k`` is x at time ``k * dt``; sample 0 is the history value.
    """
    params.validate()
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    beta, gamma, tau, q, h = params.beta_mg, params.gamma_mg, params.tau_mg, params.q, params.dt
    x_hist = float(params.history)

    def rhs(x, x_tau):
        return beta * x_tau / (1.0 + x_tau**q) - gamma * x

    size = int(math.ceil(tau / h)) + 3
    ring_x = [0.0] * size
    ring_f = [0.0] * size

    def delayed(t):
        # x at time t <= current time, t measured in model units
        if t <= 0.0:
            return x_hist
        s = t / h
        j = int(math.floor(s))
        theta = s - j
        if theta < 1e-12:
            return ring_x[j % size]
        if theta > 1.0 - 1e-12:
            return ring_x[(j + 1) % size]
        x0, f0 = ring_x[j % size], ring_f[j % size]
        x1, f1 = ring_x[(j + 1) % size], ring_f[(j + 1) % size]
        t2, t3 = theta * theta, theta * theta * theta
        return (
            (2 * t3 - 3 * t2 + 1) * x0
            + (t3 - 2 * t2 + theta) * h * f0
            + (-2 * t3 + 3 * t2) * x1
            + (t3 - t2) * h * f1
        )

    out = np.empty(n_samples)
    x = x_hist
    ring_x[0] = x
    ring_f[0] = rhs(x, x_hist)  # right-hand slope at t=0
    out[0] = x
    for k in range(1, n_samples):
        t = (k - 1) * h
        k1 = ring_f[(k - 1) % size]
        xm = delayed(t + 0.5 * h - tau)
        k2 = rhs(x + 0.5 * h * k1, xm)
        k3 = rhs(x + 0.5 * h * k2, xm)
        k4 = rhs(x + h * k3, delayed(t + h - tau))
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not math.isfinite(x):
            raise DivergenceError(f"Mackey-Glass integration diverged at step {k}", step=k)
        ring_x[k % size] = x
        ring_f[k % size] = rhs(x, delayed(k * h - tau))
        out[k] = x
    return TimeSeries(h, out)


def _check_freq(freq_hz, dt):
    if not freq_hz > 0:
        raise ParameterError(f"frequency must be > 0, got {freq_hz}")
    if freq_hz >= 0.5 / dt:
        raise ParameterError(f"frequency {freq_hz} Hz is at or above Nyquist {0.5 / dt} Hz")


def sinusoid(freq_hz, amplitude, phase_rad, dt, n_samples, t0=0.0) -> TimeSeries:
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    _check_freq(freq_hz, dt)
    t = t0 + dt * np.arange(n_samples)
    return TimeSeries(dt, amplitude * np.sin(2 * np.pi * freq_hz * t + phase_rad), t0)


def sum_of_sinusoids(components, dt, n_samples, t0=0.0) -> TimeSeries:
    """Pointwise sum of ``sinusoid`` outputs for ``(freq, amp, phase)`` triples."""
    components = list(components)
    if not components:
        raise ParameterError("at least one sinusoid component is required")
    total = np.zeros(n_samples)
    for freq, amp, phase in components:
        total += sinusoid(freq, amp, phase, dt, n_samples, t0).values
    return TimeSeries(dt, total, t0)


def downsample(ts: TimeSeries, factor: int, prefilter: bool = True) -> TimeSeries:
    """Keep every ``factor``-th sample, optionally after a moving-average prefilter.

    Emits :class:`AliasingWarning` when the dominant spectral peak of the
    input lies at or above the Nyquist frequency of the result.
    """
    if int(factor) != factor or factor < 1:
        raise ParameterError(f"downsampling factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    if factor == 1:
        return ts
    if len(ts) >= 8:
        peak = magnitude_spectrum(ts).peak_frequency()
        if peak >= 0.5 / (ts.dt * factor):
            warnings.warn(
                f"dominant frequency {peak:.4g} Hz is above the new Nyquist "
                f"limit {0.5 / (ts.dt * factor):.4g} Hz",
                AliasingWarning,
                stacklevel=2,
            )
    values = ts.values
    if prefilter:
        values = uniform_filter1d(values, size=factor, mode="nearest")
    return TimeSeries(ts.dt * factor, values[::factor], ts.t0)


def split(ts: TimeSeries, train_samples: int):
    """Return ``(train, target)``; the target's time axis continues the training one."""
    n = len(ts)
    if not 0 < train_samples < n:
        raise ParameterError(f"train_samples must be in (0, {n}), got {train_samples}")
    train = TimeSeries(ts.dt, ts.values[:train_samples], ts.t0)
    target = TimeSeries(ts.dt, ts.values[train_samples:], ts.t0 + train_samples * ts.dt)
    return train, target


def autocorrelation(values) -> np.ndarray:
    """Normalised autocorrelation of a mean-removed sequence, lags 0..n-1."""
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    n = len(x)
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    acf = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    if acf[0] == 0:
        return np.zeros(n)
    return acf / acf[0]


def pseudo_period(ts: TimeSeries) -> int:
    """Lag in samples of the first autocorrelation maximum after lag 0."""
    acf = autocorrelation(ts.values)
    below = np.nonzero(acf < 0)[0]
    start = int(below[0]) if below.size else 1
    for k in range(max(start, 1), len(acf) - 1):
        if acf[k] >= acf[k - 1] and acf[k] > acf[k + 1]:
            return k
    raise ParameterError("series too short to show a recurrence")


def best_replica_lag(train: TimeSeries, window: int, min_lag: int) -> int:
    """Lag ``D`` whose delayed copy best matches the final ``window`` training samples.

    Scores each candidate by the Pearson correlation between
    ``x[L-window-D : L-D]`` and ``x[L-window : L]``.
    """
    x = train.values
    n = len(x)
    if window < 2 or min_lag < 1 or window + min_lag > n:
        raise ParameterError("training series too short for replica lag search")
    recent = x[n - window:]
    best, best_score = min_lag, -np.inf
    for lag in range(min_lag, n - window + 1):
        past = x[n - window - lag: n - lag]
        score = np.corrcoef(past, recent)[0, 1]
        if np.isfinite(score) and score > best_score:
            best, best_score = lag, score
    return best


def _peak_frequencies(train: TimeSeries, k: int):
    spec = magnitude_spectrum(train)
    mags = spec.magnitudes
    df = spec.freqs_hz[1]
    found = []
    for i in range(1, len(mags) - 1):
        if mags[i] > mags[i - 1] and mags[i] >= mags[i + 1]:
            # parabolic refinement on log magnitudes
            a, b, c = np.log(mags[i - 1:i + 2] + 1e-300)
            denom = a - 2 * b + c
            shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
            found.append((mags[i], (i + float(np.clip(shift, -0.5, 0.5))) * df))
    found.sort(reverse=True)
    nyquist = 0.5 / train.dt
    return [f for _, f in found[:k] if 0 < f < nyquist]


def surrogate_drive(
    train: TimeSeries, mode: str, horizon: int, seed=None, n_components: int = 8
) -> TimeSeries:
    """Build an exploitation-stage drive resembling ``train``.

    ``delayed_replica`` tiles the training signal cyclically.  ``sinusoid_sum``
    fits the ``n_components`` strongest spectral peaks of ``train`` (frequency
    from the windowed spectrum refined by least squares, then amplitude and
    phase), and continues their sum past the end of the training series,
    with the oscillating part rescaled so the RMS matches the training RMS.  ``seed`` is accepted for interface
    symmetry; both modes are deterministic.
    """
    if horizon < 1:
        raise ParameterError(f"horizon must be >= 1, got {horizon}")
    if len(train) < 1:
        raise ParameterError("training series is empty")
    x = train.values
    if mode == "delayed_replica":
        reps = -(-horizon // len(x))
        values = np.tile(x, reps)[:horizon]
        return TimeSeries(train.dt, values, train.t_end)
    if mode != "sinusoid_sum":
        raise ParameterError(f"unknown surrogate mode {mode!r}")

    freqs = _peak_frequencies(train, n_components)
    mean = x.mean()
    if not freqs:
        return TimeSeries(train.dt, np.full(horizon, mean), train.t_end)
    t = train.times - train.t0
    df = 1.0 / (len(x) * train.dt)

    def design(fs, times):
        cols = [np.ones_like(times)]
        for f in fs:
            cols += [np.sin(2 * np.pi * f * times), np.cos(2 * np.pi * f * times)]
        return np.column_stack(cols)

    def residual(fs):
        B = design(fs, t)
        coef, *_ = np.linalg.lstsq(B, x, rcond=None)
        return B @ coef - x

    # refine peak frequencies within one bin by variable-projection least squares
    f0 = np.array(freqs)
    lo = np.maximum(f0 - df, 1e-9)
    hi = np.minimum(f0 + df, 0.5 / train.dt - 1e-9)
    fit = least_squares(residual, np.clip(f0, lo, hi), bounds=(lo, hi), x_scale=df)
    fs = fit.x
    coef, *_ = np.linalg.lstsq(design(fs, t), x, rcond=None)
    t_new = len(x) * train.dt + train.dt * np.arange(horizon)
    ac = design(fs, t_new)[:, 1:] @ coef[1:]
    # scale the oscillating part so the total RMS equals the training RMS
    target_ms = np.mean(x**2)
    a, b, c = np.mean(ac**2), 2 * mean * np.mean(ac), mean**2 - target_ms
    if a > 0 and c < 0:
        ac *= (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return TimeSeries(train.dt, mean + ac, train.t_end)
