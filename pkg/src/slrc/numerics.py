"""Shared numerical kernels: ridge readout solve, spectral radius, magnitude spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import (
    ConvergenceError,
    DegenerateMatrixError,
    ParameterError,
    ShapeError,
    SingularMatrixError,
)
from .timeseries import TimeSeries


def _as_2d(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[np.newaxis, :]
    if a.ndim != 2:
        raise ShapeError(f"{name} must be a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} contains non-finite entries")
    return a


def ridge_solve(X, Y_target, beta: float) -> np.ndarray:
    """Return ``W_out`` minimising ``|W_out X - Y|^2 + beta |W_out|^2``.

    ``X`` is ``(n_features, T)`` with one column per time step and ``Y_target``
    is ``(n_out, T)``.  The Gram system ``(X X^T + beta I) W_out^T = X Y^T`` is
    solved through a Cholesky factorisation; no inverse is formed.
    """
    X = _as_2d(X, "X")
    Y = _as_2d(Y_target, "Y_target")
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"X has {X.shape[1]} columns but Y_target has {Y.shape[1]}")
    if X.shape[1] < 1:
        raise ParameterError("need at least one time step")
    if not beta >= 0:
        raise ParameterError(f"beta must be >= 0, got {beta!r}")

    gram = X @ X.T
    gram[np.diag_indices_from(gram)] += beta
    rhs = X @ Y.T
    try:
        factor = scipy.linalg.cho_factor(gram, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(
            "X X^T + beta I is not positive definite; use beta > 0"
        ) from None
    if beta == 0:
        pivots = np.diag(factor[0]) ** 2
        if pivots.min() <= pivots.max() * gram.shape[0] * np.finfo(float).eps:
            raise SingularMatrixError("X X^T is singular; use beta > 0")
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False).T


def _ritz_radius(W, Q):
    """Largest |Ritz value| of W on the column space of Q (orthonormal)."""
    H = Q.T @ (W @ Q)
    return float(np.max(np.abs(np.linalg.eigvals(H))))


def _power(W, v, max_iter, tol, floor=0.0):
    """Single-vector power iteration; returns (estimate, vector, converged).

    ``floor`` is an absolute tolerance for radii at roundoff level.
    """
    estimate = 0.0
    streak = 0
    for _ in range(max_iter):
        w = W @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, v, True
        new = norm
        if abs(new - estimate) <= tol * new + floor:
            streak += 1
            if streak >= 3:
                return float(new), w / norm, True
        else:
            streak = 0
        estimate = new
        v = w / norm
    return float(estimate), v, False


def _block_power(W, Q, max_iter, tol, floor=0.0):
    """Orthogonal iteration on a small block with Rayleigh-Ritz estimates.

    Handles dominant complex-conjugate pairs and +/- lambda pairs, where the
    single-vector iteration rotates instead of converging.
    """
    estimate = 0.0
    streak = 0
    for _ in range(max_iter):
        Z = W @ Q
        H = Q.T @ Z
        new = float(np.max(np.abs(np.linalg.eigvals(H))))
        if new == 0.0 and not np.any(Z):
            return 0.0, True
        if abs(new - estimate) <= tol * new + floor:
            streak += 1
            if streak >= 3:
                return new, True
        else:
            streak = 0
        estimate = new
        Q, _ = np.linalg.qr(Z)
    return estimate, False


def spectral_radius(W, max_iter: int = 10_000, tol: float = 1e-10, block: int = 2) -> float:
    """Largest eigenvalue magnitude of a square matrix by power iteration.

    The start vector is fixed (all ones, plus a deterministic perturbation) so
    the result is reproducible.  If the plain iteration stagnates, a second
    run on a ``block``-dimensional subspace seeded with an orthogonal start
    vector resolves rotational and sign-alternating dominant pairs; the block
    is doubled (up to 16) while that still fails to converge.
    """
    W = _as_2d(W, "W")
    n, m = W.shape
    if n != m:
        raise ShapeError(f"spectral radius needs a square matrix, got {W.shape}")
    if not np.any(W):
        return 0.0
    if n == 1:
        return float(abs(W[0, 0]))
    # eigenvalues below ~ n eps |W| are not resolvable (near-defective matrices)
    floor = n * np.finfo(float).eps * float(np.linalg.norm(W))
    if n >= 200 and np.count_nonzero(W) < 0.25 * W.size:
        W = scipy.sparse.csr_matrix(W)  # same iteration, cheaper matvec

    idx = np.arange(n, dtype=float)
    v0 = 1.0 + 0.1 * np.cos(idx)
    v0 /= np.linalg.norm(v0)
    estimate, v, converged = _power(W, v0, max_iter, tol, floor)
    if converged:
        # guard against the norm ratio locking onto a rotating pair by chance
        q2 = np.linalg.qr(np.column_stack([v, W @ v]))[0]
        ritz = _ritz_radius(W, q2)
        if abs(ritz - estimate) <= 1e3 * tol * estimate + floor:
            return estimate

    # restart from a block seeded with an orthogonal start vector; clustered
    # spectra (large random reservoirs) may need a wider block
    alt = np.where(idx % 2 == 0, 1.0, -1.0) + 0.1 * np.sin(idx)
    size = min(max(block, 2), n)
    estimate2 = estimate
    while True:
        starts = [v0, alt] + [np.cos((j + 1) * idx + 0.5) for j in range(2, size)]
        Q, _ = np.linalg.qr(np.column_stack(starts))
        estimate2, converged2 = _block_power(W, Q, max_iter, tol, floor)
        if converged2:
            return estimate2
        if size == n:
            # a full-dimension block makes Rayleigh-Ritz the whole eigenproblem;
            # this covers defective matrices whose iterates never settle
            return _ritz_radius(W, np.eye(n))
        if size >= min(n, 16):
            break
        size = min(2 * size, n)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(best estimate {estimate2:.12g})",
        estimate=estimate2,
    )


def scale_to_radius(W, rho_target: float, **kwargs) -> np.ndarray:
    """Return ``W`` rescaled so its spectral radius equals ``rho_target``."""
    if not rho_target > 0:
        raise ParameterError(f"target radius must be > 0, got {rho_target!r}")
    W = _as_2d(W, "W")
    radius = spectral_radius(W, **kwargs)
    if radius == 0.0:
        raise DegenerateMatrixError("matrix has zero spectral radius and cannot be rescaled")
    return W * (rho_target / radius)


@dataclass(frozen=True)
class Spectrum:
    freqs_hz: np.ndarray
    magnitudes: np.ndarray

    def peak_frequency(self) -> float:
        """Frequency of the largest non-DC magnitude."""
        return float(self.freqs_hz[1 + np.argmax(self.magnitudes[1:])])

    def magnitude_at(self, freq_hz: float) -> float:
        """Largest magnitude within one bin of ``freq_hz``."""
        df = self.freqs_hz[1] - self.freqs_hz[0]
        k = int(round(freq_hz / df))
        lo, hi = max(k - 1, 0), min(k + 2, len(self.magnitudes))
        return float(self.magnitudes[lo:hi].max())


def magnitude_spectrum(ts: TimeSeries) -> Spectrum:
    """One-sided Hann-windowed amplitude spectrum of a mean-removed series.

    Scaled so that a unit-amplitude sinusoid centred on a bin has magnitude 1.
    """
    x = np.asarray(ts.values, dtype=float)
    n = x.shape[0]
    if n < 8:
        raise ParameterError(f"spectrum needs at least 8 samples, got {n}")
    window = np.hanning(n + 1)[:-1]  # periodic Hann: exact bin-centre gain
    coeffs = np.fft.rfft((x - x.mean()) * window)
    mags = np.abs(coeffs) * (2.0 / window.sum())
    mags[0] /= 2.0
    if n % 2 == 0:
        mags[-1] /= 2.0
    return Spectrum(np.fft.rfftfreq(n, ts.dt), mags)
