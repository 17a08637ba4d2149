"""Next-generation RC features: delay taps plus their polynomial monomials."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ParameterError
from .timeseries import TimeSeries


@dataclass(frozen=True)
class NgrcSpec:
    k_delays: int = 4
    spacing: int = 1
    poly_order: int = 2
    include_constant: bool = True

    def validate(self):
        if self.k_delays < 1 or self.spacing < 1 or self.poly_order < 1:
            raise ParameterError("k_delays, spacing and poly_order must all be >= 1")

    @property
    def span(self) -> int:
        """Samples consumed before the first complete tap vector."""
        return (self.k_delays - 1) * self.spacing


def feature_count(spec: NgrcSpec) -> int:
    spec.validate()
    k = spec.k_delays
    return int(spec.include_constant) + sum(
        comb(k + d - 1, d) for d in range(1, spec.poly_order + 1)
    )


def monomial_indices(spec: NgrcSpec):
    """Tap index tuples for every monomial of degree 2..poly_order, lexicographic."""
    taps = range(spec.k_delays)
    return [
        combo
        for degree in range(2, spec.poly_order + 1)
        for combo in itertools.combinations_with_replacement(taps, degree)
    ]


def nvar_features(inputs, spec: NgrcSpec) -> np.ndarray:
    """Feature matrix with one column per valid time step.

    Column ``n`` holds ``[1; u_n, u_{n-s}, ...; monomials]``; the first
    ``(k-1)*s`` steps lack a full tap history and are dropped.
    """
    spec.validate()
    u = inputs.values if isinstance(inputs, TimeSeries) else np.asarray(inputs, dtype=float)
    n = len(u)
    if n <= spec.span:
        raise ParameterError(
            f"series of length {n} too short for {spec.k_delays} taps at spacing {spec.spacing}"
        )
    valid = n - spec.span
    taps = np.empty((spec.k_delays, valid))
    for j in range(spec.k_delays):
        start = spec.span - j * spec.spacing
        taps[j] = u[start:start + valid]
    rows = []
    if spec.include_constant:
        rows.append(np.ones((1, valid)))
    rows.append(taps)
    mono = monomial_indices(spec)
    if mono:
        rows.append(np.array([np.prod(taps[list(c)], axis=0) for c in mono]))
    return np.vstack(rows)
