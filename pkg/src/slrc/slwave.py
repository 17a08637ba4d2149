"""Simulated solitary-like-wave film used as a physical reservoir.

The film is a driven KdV-Burgers surrogate,

    h_t + c0 h_x + eps_nl h h_x + mu_disp h_xxx - nu_visc h_xx = 0,

on ``[0, domain_length]``.  The inflow height is clamped to the scaled drive
sample, the far end is an extrapolated outflow, and the probe reads the
height at ``probe_pos``.  Space is discretised by the method of lines
(conservative upwind flux for transport, centred second and third
differences) and time by classical RK4 substeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError, StabilityError
from .timeseries import TimeSeries, write_columns_csv

# fraction of the RK4 stability interval used by the step bound
_RK4_EXTENT = 2.0
_THIRD_DIFF_SYMBOL = 2.6  # max |sin 2k - 2 sin k| = 3*sqrt(3)/2 ~ 2.598


@dataclass(frozen=True)
class FilmParams:
    domain_length: float = 1.0
    n_grid: int = 128
    c0: float = 1.0
    eps_nl: float = 1.0  # from calibrate_film()
    mu_disp: float = 2e-5
    nu_visc: float = 2e-3
    base_level: float = 0.0
    drive_gain: float = 0.3
    probe_pos: float = 0.5
    dt_pde: float = 2e-3
    substeps_per_sample: int = 10
    drive_limit: float = 3.0
    boundary: str = "forced"  # or "periodic" (conservation checks only)

    @property
    def dx(self) -> float:
        if self.boundary == "periodic":
            return self.domain_length / self.n_grid
        return self.domain_length / (self.n_grid - 1)

    @property
    def probe_index(self) -> int:
        return int(round(self.probe_pos / self.dx))

    @property
    def sample_duration(self) -> float:
        """Film time elapsed per input sample."""
        return self.dt_pde * self.substeps_per_sample

    def stability_bound(self) -> float:
        """Largest admissible ``dt_pde`` for the explicit scheme."""
        dx = self.dx
        h_max = abs(self.drive_gain) * self.drive_limit
        speed = abs(self.c0) + abs(self.eps_nl) * h_max
        rate = (
            2.0 * speed / dx
            + 4.0 * self.nu_visc / dx**2
            + _THIRD_DIFF_SYMBOL * abs(self.mu_disp) / dx**3
        )
        return _RK4_EXTENT / rate

    def validate(self):
        if self.n_grid < 64:
            raise ParameterError(f"n_grid must be >= 64, got {self.n_grid}")
        if not self.domain_length > 0:
            raise ParameterError("domain_length must be > 0")
        if self.nu_visc < 0:
            raise ParameterError("nu_visc must be >= 0")
        if self.boundary not in ("forced", "periodic"):
            raise ParameterError(f"unknown boundary {self.boundary!r}")
        if not 0 < self.probe_pos < self.domain_length:
            raise ParameterError("probe_pos must lie strictly inside the domain")
        if not 0 < self.probe_index < self.n_grid - 1:
            raise ParameterError("probe falls on a boundary grid point")
        if self.substeps_per_sample < 1:
            raise ParameterError("substeps_per_sample must be >= 1")
        if not self.drive_limit > 0:
            raise ParameterError("drive_limit must be > 0")
        bound = self.stability_bound()
        if not 0 < self.dt_pde <= bound:
            raise StabilityError(
                f"dt_pde={self.dt_pde:g} violates the stability bound {bound:.4g}", bound=bound
            )


@dataclass
class FilmState:
    h: np.ndarray
    t: float = 0.0
    step: int = 0
    clip_count: int = field(default=0)


@dataclass(frozen=True)
class SlFeatureSpec:
    n_taps: int = 16
    tap_spacing: int = 1
    include_input: bool = True
    include_square: bool = False

    def validate(self):
        if self.n_taps < 1 or self.tap_spacing < 1:
            raise ParameterError("n_taps and tap_spacing must be >= 1")

    @property
    def span(self) -> int:
        return (self.n_taps - 1) * self.tap_spacing

    @property
    def n_features(self) -> int:
        return 1 + int(self.include_input) + self.n_taps * (1 + int(self.include_square))


def init_film(params: FilmParams) -> FilmState:
    params.validate()
    return FilmState(np.zeros(params.n_grid))


def _rhs(h, params: FilmParams, dx: float):
    c0, eps, mu, nu = params.c0, params.eps_nl, params.mu_disp, params.nu_visc
    if params.boundary == "periodic":
        hp = np.concatenate([h[-2:], h, h[:2]])
    else:
        right1 = 2.0 * h[-1] - h[-2]
        right2 = 2.0 * right1 - h[-1]
        hp = np.concatenate([[h[0], h[0]], h, [right1, right2]])
    # interface j+1/2 between hp[j] and hp[j+1]
    left, right = hp[1:-2], hp[2:-1]
    speed = c0 + 0.5 * eps * (left + right)
    flux = np.where(
        speed >= 0.0, c0 * left + 0.5 * eps * left * left, c0 * right + 0.5 * eps * right * right
    )
    centre = hp[2:-2]
    dh = -(flux[1:] - flux[:-1]) / dx
    if nu:
        dh += nu * (hp[3:-1] - 2.0 * centre + hp[1:-3]) / dx**2
    if mu:
        dh -= mu * (hp[4:] - 2.0 * hp[3:-1] + 2.0 * hp[1:-3] - hp[:-4]) / (2.0 * dx**3)
    if params.boundary != "periodic":
        dh[0] = 0.0
    return dh


def advance(state: FilmState, params: FilmParams, n_substeps: int):
    """Run ``n_substeps`` RK4 substeps with the current boundary value held."""
    dt, dx = params.dt_pde, params.dx
    h = state.h
    for _ in range(n_substeps):
        k1 = _rhs(h, params, dx)
        k2 = _rhs(h + 0.5 * dt * k1, params, dx)
        k3 = _rhs(h + 0.5 * dt * k2, params, dx)
        k4 = _rhs(h + dt * k3, params, dx)
        h = h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    state.h = h
    state.t += n_substeps * dt


def step_sample(state: FilmState, params: FilmParams, u_n: float) -> float:
    """Hold the inflow at ``drive_gain * u_n`` for one sample and return the probe height."""
    if not np.isfinite(u_n):
        raise ParameterError(f"non-finite drive value {u_n!r}")
    if abs(u_n) > params.drive_limit:
        u_n = float(np.clip(u_n, -params.drive_limit, params.drive_limit))
        state.clip_count += 1
    if params.boundary != "periodic":
        state.h = state.h.copy()
        state.h[0] = params.drive_gain * u_n
    advance(state, params, params.substeps_per_sample)
    if not np.all(np.isfinite(state.h)):
        raise DivergenceError(f"film field blew up at sample {state.step}", step=state.step)
    state.step += 1
    return params.base_level + float(state.h[params.probe_index])


def respond(params: FilmParams, drive: TimeSeries, initial=None, snapshot_every=0):
    """Probe series for a fresh film (or ``initial`` field) driven by ``drive``.

    With ``snapshot_every > 0`` returns ``(probe, snapshots)`` where
    ``snapshots`` is a list of ``(t, h)`` pairs taken every k-th sample.
    """
    if len(drive) < 1:
        raise ParameterError("drive series is empty")
    state = init_film(params)
    if initial is not None:
        initial = np.asarray(initial, dtype=float)
        if initial.shape != state.h.shape:
            raise ParameterError("initial field has the wrong length")
        state.h = initial.copy()
    probe = np.empty(len(drive))
    snapshots = []
    for n, u in enumerate(drive.values):
        probe[n] = step_sample(state, params, float(u))
        if snapshot_every and n % snapshot_every == 0:
            snapshots.append((drive.t0 + n * drive.dt, state.h.copy()))
    out = TimeSeries(drive.dt, probe, drive.t0)
    if snapshot_every:
        return out, snapshots
    return out


def write_snapshots(path, snapshots, params: FilmParams):
    """CSV rows ``t,x,h`` for each stored field snapshot."""
    x = params.dx * np.arange(params.n_grid)
    t_col, x_col, h_col = [], [], []
    for t, h in snapshots:
        t_col.extend([t] * len(h))
        x_col.extend(x)
        h_col.extend(h)
    write_columns_csv(path, ["t", "x", "h"], [t_col, x_col, h_col])


def assemble_features(probe: TimeSeries, drive: TimeSeries, spec: SlFeatureSpec, washout: int):
    """Readout features from delayed probe taps.

    Column ``n`` is ``[1; u_n?; p_n, p_{n-s}, ..., p_{n-(k-1)s}; squares?]``;
    the first ``washout + (k-1)*s`` columns are dropped.
    """
    spec.validate()
    p = probe.values
    u = drive.values
    if len(p) != len(u):
        raise ParameterError("probe and drive must have the same length")
    skip = washout + spec.span
    if len(p) <= skip:
        raise ParameterError(
            f"series of length {len(p)} too short for washout {washout} plus tap span {spec.span}"
        )
    valid = len(p) - skip
    taps = np.empty((spec.n_taps, valid))
    for j in range(spec.n_taps):
        start = skip - j * spec.tap_spacing
        taps[j] = p[start:start + valid]
    rows = [np.ones((1, valid))]
    if spec.include_input:
        rows.append(u[skip:][np.newaxis, :])
    rows.append(taps)
    if spec.include_square:
        rows.append(taps**2)
    return np.vstack(rows)


def harmonic_levels(params: FilmParams, freq_hz=1.0, periods=20, settle_periods=10):
    """Spectral levels of the probe under a unit sinusoid drive.

    Returns ``(levels, floor)`` where ``levels[k]`` is the magnitude at the
    k-th harmonic (k = 1, 2, 3, 4) and ``floor`` the median magnitude, both
    measured on the last ``periods - settle_periods`` periods.
    """
    from .numerics import magnitude_spectrum
    from .signals import sinusoid

    dt = params.sample_duration
    per_period = int(round(1.0 / (freq_hz * dt)))
    drive = sinusoid(freq_hz, 1.0, 0.0, dt, per_period * periods)
    probe = respond(params, drive)
    tail = probe.with_values(probe.values[per_period * settle_periods:])
    spec = magnitude_spectrum(tail)
    levels = {k: spec.magnitude_at(k * freq_hz) for k in (1, 2, 3, 4)}
    return levels, float(np.median(spec.magnitudes))


def with_stable_step(params: FilmParams, safety=0.9) -> FilmParams:
    """Same sample duration, with ``dt_pde`` shrunk (more substeps) until stable."""
    from dataclasses import replace

    duration = params.sample_duration
    bound = params.stability_bound() * safety
    substeps = max(params.substeps_per_sample, int(np.ceil(duration / bound)))
    return replace(params, dt_pde=duration / substeps, substeps_per_sample=substeps)


def calibrate_film(
    base: FilmParams | None = None,
    eps_values=(0.25, 0.5, 1.0, 1.5, 2.0, 3.0),
    gain_values=(0.1, 0.2, 0.3, 0.4),
    min_db=20.0,
    min_ratio=0.3,
):
    """Sweep ``eps_nl`` (outer) and ``drive_gain`` (inner) in ascending order.

    Returns ``(params, rows)`` for the first setting whose 2nd and 3rd
    harmonics sit ``min_db`` above the median floor and whose 2nd harmonic
    reaches ``min_ratio`` of the fundamental.  ``rows`` records every trial
    as ``(eps_nl, drive_gain, db2, db3, ratio, passed)``.
    """
    from dataclasses import replace

    base = base or FilmParams()
    rows = []
    for eps in eps_values:
        for gain in gain_values:
            params = with_stable_step(replace(base, eps_nl=eps, drive_gain=gain))
            levels, floor = harmonic_levels(params)
            floor = max(floor, np.finfo(float).tiny)
            db2 = 20 * np.log10(levels[2] / floor)
            db3 = 20 * np.log10(levels[3] / floor)
            ratio = levels[2] / levels[1]
            passed = db2 >= min_db and db3 >= min_db and ratio >= min_ratio
            rows.append((eps, gain, db2, db3, ratio, passed))
            if passed:
                return params, rows
    raise ParameterError("no swept film setting met the harmonic criterion")
