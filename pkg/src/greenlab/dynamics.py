"""Free dynamics ``i v_t + L v = 0`` and its inhomogeneous variants.

Everything is evaluated through the eigendecomposition of the discrete
self-adjoint extension, so the spatial operator is applied exactly and only
time integrals of sampled sources are approximated (trapezoid rule).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .green import SelfAdjointExtension
from .numerics import NumericsError, integrate_time

__all__ = [
    "Trajectory",
    "duhamel",
    "duhamel_regularized",
    "integrated_trajectory",
    "phi_kernel",
    "propagate",
]

SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    origin_time: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.states)):
            raise NumericsError("trajectory contains non-finite states")

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[k], t, rtol=0, atol=1e-12 * max(1.0, abs(t))):
            raise KeyError(f"time {t} is not a sample of the trajectory")
        return self.states[k]


def phi_kernel(s, lam):
    """``(1 - e^{i s λ}) / λ`` with its removable singularity at ``λ = 0``.

    Below ``|s λ| = 1e-4`` a four-term Taylor series is used; its truncation
    error is below ``1e-16`` relative.
    """
    s, lam = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(lam, dtype=float))
    z = 1j * s * lam
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) < SERIES_CUTOFF
    zs = z[small]
    out[small] = -1j * s[small] * (1 + zs / 2 + zs**2 / 6 + zs**3 / 24)
    big = ~small
    out[big] = -np.expm1(z[big]) / lam[big]
    return out


def _as_times(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


def propagate(ext: SelfAdjointExtension, y, T: float, t) -> np.ndarray:
    """``e^{i(t-T)L} y``; ``t`` may be an array, giving one row per time."""
    y = np.asarray(y, dtype=complex)
    ext.check_domain(y)
    spec = ext.spectral
    c = spec.coefficients(ext.restrict(y))
    times, scalar = _as_times(t)
    phase = np.exp(1j * np.outer(np.atleast_1d(times) - T, spec.eigenvalues))
    out = ext.embed((phase * c) @ spec.eigenvectors.T)
    return out[0] if scalar else out


def integrated_trajectory(ext: SelfAdjointExtension, y, T: float, t) -> np.ndarray:
    """``w^{y,T}(t) = ∫_T^t v^{y,T}(s) ds``, evaluated spectrally."""
    y = np.asarray(y, dtype=complex)
    ext.check_domain(y)
    spec = ext.spectral
    c = spec.coefficients(ext.restrict(y))
    times, scalar = _as_times(t)
    # (e^{isλ} - 1) / (iλ) = i φ(s, λ)
    kern = 1j * phi_kernel(np.atleast_1d(times)[:, None] - T, spec.eigenvalues[None, :])
    out = ext.embed((kern * c) @ spec.eigenvectors.T)
    return out[0] if scalar else out


def _source_coefficients(ext, g):
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] < 2:
        raise NumericsError("time-sampled source needs at least two samples")
    return ext.spectral.coefficients(ext.restrict(g).T).T


def duhamel(ext: SelfAdjointExtension, g, T: float, t: float) -> np.ndarray:
    """Solution of ``i w_t + L w = g``, ``w(T) = 0``, at time ``t``.

    ``g`` holds states sampled uniformly and in ascending time order on
    ``[min(T, t), max(T, t)]``. Boundary entries of ``g`` outside the domain
    of ``L`` are dropped.
    """
    coeffs = _source_coefficients(ext, g)
    n = coeffs.shape[0]
    if t == T:
        return np.zeros(ext.system.state_dim, dtype=complex)
    lo = min(T, t)
    s = lo + (abs(t - T)) * np.arange(n) / (n - 1)
    dt = abs(t - T) / (n - 1)
    lam = ext.spectral.eigenvalues
    integrand = np.exp(1j * np.outer(t - s, lam)) * coeffs
    orient = 1.0 if t > T else -1.0
    w = orient * integrate_time(integrand, dt) / 1j
    return ext.embed(ext.spectral.synthesize(w))


def duhamel_regularized(ext: SelfAdjointExtension, g, g_prime, T: float, t: float) -> np.ndarray:
    """Same solution written with ``φ(s, λ) = (1 - e^{isλ})/λ``:

    ``w(t) = φ(t-T, L) g(T) + ∫_T^t φ(t-s, L) g'(s) ds``.

    Both terms lie in the domain of ``L``, so the output satisfies
    ``Γ1 w = 0`` by construction.
    """
    if g_prime is None:
        raise NumericsError("regularized Duhamel form needs derivative samples")
    coeffs = _source_coefficients(ext, g)
    dcoeffs = _source_coefficients(ext, g_prime)
    if coeffs.shape != dcoeffs.shape:
        raise NumericsError("source and derivative samples differ in shape")
    lam = ext.spectral.eigenvalues
    if t == T:
        return np.zeros(ext.system.state_dim, dtype=complex)
    n = coeffs.shape[0]
    lo = min(T, t)
    s = lo + abs(t - T) * np.arange(n) / (n - 1)
    dt = abs(t - T) / (n - 1)
    g_at_T = coeffs[0] if t > T else coeffs[-1]
    first = phi_kernel(t - T, lam) * g_at_T
    orient = 1.0 if t > T else -1.0
    second = orient * integrate_time(phi_kernel((t - s)[:, None], lam[None, :]) * dcoeffs, dt)
    return ext.embed(ext.spectral.synthesize(first + second))
