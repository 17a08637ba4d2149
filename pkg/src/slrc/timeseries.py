"""The uniformly sampled scalar signal passed between every module, plus CSV I/O."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class TimeSeries:
    """Scalar samples taken every ``dt`` seconds starting at ``t0``."""

    dt: float
    values: np.ndarray = field(repr=False)
    t0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be > 0, got {self.dt!r}")
        values = np.asarray(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def t_end(self) -> float:
        """Time stamp one sample past the last one."""
        return self.t0 + self.dt * len(self)

    def with_values(self, values, t0=None) -> "TimeSeries":
        return TimeSeries(self.dt, values, self.t0 if t0 is None else t0)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


def concatenate(first: TimeSeries, second: TimeSeries) -> TimeSeries:
    if first.dt != second.dt:
        raise ParameterError("cannot concatenate series with different dt")
    return TimeSeries(first.dt, np.concatenate([first.values, second.values]), first.t0)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file + rename so readers never see a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _columns_to_csv(header, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(ts: TimeSeries, path) -> None:
    """Write ``t,value`` rows using shortest round-trip float representations."""
    atomic_write_text(path, _columns_to_csv(["t", "value"], [ts.times, ts.values]))


def read_csv(path) -> TimeSeries:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise ParameterError(f"{path}: expected header 't,value'")
    data = [(float(t), float(v)) for t, v in rows[1:] if t.strip()]
    if not data:
        raise ParameterError(f"{path}: no samples")
    t = np.array([d[0] for d in data])
    values = np.array([d[1] for d in data])
    if len(t) == 1:
        dt = 1.0
    else:
        # dt is not stored; recover it to 12 significant digits from the time column
        dt = float(f"{(t[-1] - t[0]) / (len(t) - 1):.12g}")
    return TimeSeries(dt, values, float(t[0]))


def write_columns_csv(path, header, columns) -> None:
    atomic_write_text(path, _columns_to_csv(header, columns))
