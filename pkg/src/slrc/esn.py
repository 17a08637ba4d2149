"""Echo state network: random reservoir, leaky-tanh update, harvesting, readout runs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy.sparse

from .errors import DegenerateMatrixError, DivergenceError, ParameterError, ShapeError
from .numerics import ridge_solve, spectral_radius
from .timeseries import TimeSeries

LAYOUT = "[1; u_n; x_n]"


@dataclass(frozen=True)
class EsnConfig:
    n_x: int = 300
    n_u: int = 1
    alpha: float = 0.3
    rho: float = 0.95
    input_scale: float = 1.0
    density: float = 0.1
    seed: int = 0
    washout: int = 100
    scale_input: bool = False  # also multiply W_in by rho / radius(W_raw)

    def validate(self):
        if self.n_u != 1:
            raise ParameterError("only scalar input (n_u = 1) is supported")
        if self.n_x < 1:
            raise ParameterError("n_x must be >= 1")
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"alpha must be in (0, 1], got {self.alpha}")
        if not self.rho > 0:
            raise ParameterError(f"rho must be > 0, got {self.rho}")
        if not 0 < self.density <= 1:
            raise ParameterError(f"density must be in (0, 1], got {self.density}")
        if self.washout < 0:
            raise ParameterError("washout must be >= 0")


class EsnModel:
    """Reservoir matrices plus the mutable state vector ``x``.

    ``w_in`` has shape ``(n_x, 1 + n_u)``; its first column multiplies the
    constant bias input.
    """

    def __init__(self, w_in, w, config: EsnConfig, x=None):
        self.w_in = np.asarray(w_in, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.config = config
        self.x = np.zeros(config.n_x) if x is None else np.asarray(x, dtype=float).copy()
        self._w_op = _operator(self.w)

    def copy(self) -> "EsnModel":
        return EsnModel(self.w_in, self.w, self.config, self.x)

    def reset(self):
        self.x = np.zeros(self.config.n_x)

    @property
    def n_features(self) -> int:
        return 1 + self.config.n_u + self.config.n_x

    def save(self, path):
        """Store config, matrices and state in one ``.npz`` container."""
        np.savez(
            path,
            config=np.array(json.dumps(asdict(self.config))),
            w_in=self.w_in,
            w=self.w,
            x=self.x,
        )

    @classmethod
    def load(cls, path) -> "EsnModel":
        with np.load(path, allow_pickle=False) as data:
            config = EsnConfig(**json.loads(str(data["config"])))
            return cls(data["w_in"], data["w"], config, data["x"])


def _operator(w):
    if w.shape[0] >= 200 and np.count_nonzero(w) < 0.25 * w.size:
        return scipy.sparse.csr_matrix(w)
    return w


@dataclass(frozen=True)
class ReadoutModel:
    w_out: np.ndarray
    layout: str = LAYOUT

    def apply(self, features) -> np.ndarray:
        """Outputs for a feature matrix with one column per step."""
        features = np.asarray(features, dtype=float)
        if features.shape[0] != self.w_out.shape[1]:
            raise ShapeError(
                f"readout expects {self.w_out.shape[1]} features, got {features.shape[0]}"
            )
        return self.w_out @ features


def init_esn(config: EsnConfig) -> EsnModel:
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_x
    w_in = rng.uniform(-config.input_scale, config.input_scale, size=(n, 1 + config.n_u))
    w = rng.uniform(-1.0, 1.0, size=(n, n))
    if config.density < 1.0:
        w *= rng.random((n, n)) < config.density
    radius = spectral_radius(w)
    if radius == 0.0:
        raise DegenerateMatrixError(
            "recurrent matrix has zero spectral radius; raise density or n_x"
        )
    w *= config.rho / radius
    if config.scale_input:
        w_in *= config.rho / radius
    return EsnModel(w_in, w, config)


def update_state(model: EsnModel, u_n: float) -> np.ndarray:
    """Advance the state one step with the leaky-tanh rule and return it."""
    if not np.isfinite(u_n):
        raise ParameterError(f"non-finite input {u_n!r}")
    a = model.config.alpha
    pre = model.w_in[:, 0] + model.w_in[:, 1] * u_n + model._w_op @ model.x
    model.x = (1.0 - a) * model.x + a * np.tanh(pre)
    return model.x


def _drive(model: EsnModel, values) -> np.ndarray:
    """States after each input; shape ``(n_x, len(values))``."""
    states = np.empty((model.config.n_x, len(values)))
    for n, u in enumerate(values):
        states[:, n] = update_state(model, float(u))
    return states


def feature_columns(inputs, states) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    return np.vstack([np.ones((1, len(inputs))), inputs[np.newaxis, :], states])


def harvest(model: EsnModel, inputs: TimeSeries) -> np.ndarray:
    """Drive the reservoir with ``inputs`` and return post-washout ``[1; u; x]`` columns."""
    washout = model.config.washout
    if len(inputs) <= washout:
        raise ParameterError(
            f"input series of length {len(inputs)} does not exceed washout {washout}"
        )
    states = _drive(model, inputs.values)
    return feature_columns(inputs.values, states)[:, washout:]


def train_readout(features, target, beta: float) -> ReadoutModel:
    """Ridge readout mapping feature columns to ``target`` samples (same count)."""
    y = target.values if isinstance(target, TimeSeries) else np.asarray(target, dtype=float)
    features = np.asarray(features, dtype=float)
    if features.shape[1] != y.shape[-1]:
        raise ShapeError(
            f"{features.shape[1]} feature columns but {y.shape[-1]} target samples"
        )
    return ReadoutModel(ridge_solve(features, y.reshape(1, -1), beta))


def _check_layout(model: EsnModel, readout: ReadoutModel):
    if readout.layout != LAYOUT or readout.w_out.shape[1] != model.n_features:
        raise ShapeError(
            f"readout with {readout.w_out.shape[1]} columns ({readout.layout}) does not "
            f"fit a reservoir with {model.n_features} features"
        )


def run_predictive(model: EsnModel, readout: ReadoutModel, inputs: TimeSeries) -> TimeSeries:
    """One-step-ahead outputs driven by external inputs.

    Output ``n`` is the prediction made after seeing input ``n``; it is time
    stamped one sample later.
    """
    _check_layout(model, readout)
    states = _drive(model, inputs.values)
    y = readout.apply(feature_columns(inputs.values, states))[0]
    return TimeSeries(inputs.dt, y, inputs.t0 + inputs.dt)


def run_generative(
    model: EsnModel, readout: ReadoutModel, n_steps: int, primer: TimeSeries
) -> TimeSeries:
    """Free-running forecast: each output becomes the next input.

    The primer warms the state; the output after its last sample is the first
    forecast value.
    """
    _check_layout(model, readout)
    if len(primer) < 1:
        raise ParameterError("primer must contain at least one sample")
    if n_steps < 0:
        raise ParameterError("n_steps must be >= 0")
    out = np.empty(n_steps)
    if n_steps == 0:
        return TimeSeries(primer.dt, out, primer.t_end)
    w_out = readout.w_out[0]
    for u in primer.values[:-1]:
        update_state(model, float(u))
    u = float(primer.values[-1])
    for k in range(n_steps):
        x = update_state(model, u)
        with np.errstate(over="ignore", invalid="ignore"):
            y = w_out[0] + w_out[1] * u + w_out[2:] @ x
        if not np.isfinite(y):
            raise DivergenceError(f"free-running output became non-finite at step {k}", step=k)
        out[k] = y
        u = float(y)
    return TimeSeries(primer.dt, out, primer.t_end)


def with_radius(model: EsnModel, rho: float) -> EsnModel:
    """Copy of ``model`` with ``w`` rescaled from ``config.rho`` to ``rho``."""
    if not rho > 0:
        raise ParameterError("rho must be > 0")
    config = replace(model.config, rho=rho)
    return EsnModel(model.w_in, model.w * (rho / model.config.rho), config, model.x)
