"""Boundary control ``i u_t + L0* u = 0``, ``u(0) = 0``, ``Γ1 u = f``.

Three independent routes are provided:

* :func:`solve_bc_lift` lifts ``f`` into the deficiency subspaces,
  ``u = φ⁺ + φ⁻ + p``, and evaluates ``p`` through the spectral propagator of
  ``L``; it works for positive and negative horizons alike.
* :func:`solve_bc_direct` is Crank-Nicolson on the grid with ``u1(0) = f``
  injected by row replacement.
* :func:`dirac_oracle` is the characteristic solution for ``V = 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .dynamics import Trajectory
from .green import DeficiencyBasis, DiscreteGreenSystem, SelfAdjointExtension, deficiency_modes
from .numerics import Grid, NumericsError, gauss_panels, least_squares

__all__ = [
    "Bump",
    "ControlSignal",
    "DirectSolver",
    "FiniteSpeedWarning",
    "LiftSolver",
    "LiftedControl",
    "dirac_oracle",
    "lift_control",
    "lift_trajectory",
    "solve_bc_backward",
    "solve_bc_direct",
    "solve_bc_lift",
]

_SMOOTHNESS = {"sin2": 1, "sin4": 3}


class FiniteSpeedWarning(UserWarning):
    """The horizon is long enough for the far port at ``x = X`` to matter."""


@dataclass(frozen=True)
class Bump:
    """``amplitude * sin^p(π (t - a) / width)`` on ``[a, a + width]``, zero elsewhere.

    ``kind`` is ``"sin2"`` (C¹) or ``"sin4"`` (C³).
    """

    center: float
    width: float
    amplitude: complex = 1.0
    kind: str = "sin2"

    def __post_init__(self):
        if self.kind not in _SMOOTHNESS:
            raise ValueError(f"unknown bump kind {self.kind!r}")
        if not self.width > 0:
            raise ValueError("bump width must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.width / 2, self.center + self.width / 2

    @property
    def smoothness(self) -> int:
        return _SMOOTHNESS[self.kind]

    def derivative(self, t, order: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        a, _ = self.support
        z = (t - a) / self.width
        inside = (z > 0) & (z < 1)
        k = np.pi / self.width
        s, c = np.sin(np.pi * z), np.cos(np.pi * z)
        if self.kind == "sin2":
            vals = [s**2, 2 * k * s * c, 2 * k**2 * (c**2 - s**2)]
        else:
            vals = [s**4, 4 * k * s**3 * c, k**2 * (12 * s**2 * c**2 - 4 * s**4)]
        if order > 2:
            raise ValueError("only derivatives up to order 2 are available")
        return np.where(inside, self.amplitude * vals[order], 0.0)

    def __call__(self, t):
        return self.derivative(t, 0)


def _fd4_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order finite differences (one-sided at the ends)."""
    v = np.asarray(values)
    n = v.size
    if n < 5:
        return np.gradient(v, dt)
    d = np.empty_like(v)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dt)
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * dt)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * dt)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * dt)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * dt)
    return d


@dataclass(frozen=True)
class ControlSignal:
    """Port-0 boundary control sampled on a uniform time grid.

    When ``bumps`` is set the signal is their sum and values and derivatives
    are evaluated in closed form; otherwise samples are interpolated and
    differentiated numerically.
    """

    times: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    bumps: tuple[Bump, ...] | None = None

    @classmethod
    def from_bumps(cls, bumps, t_start: float, t_stop: float, dt: float) -> ControlSignal:
        bumps = tuple(bumps)
        n = max(2, int(math.ceil(abs(t_stop - t_start) / dt - 1e-9)) + 1)
        times = np.linspace(t_start, t_stop, n)
        samples = sum((b(times) for b in bumps), np.zeros(n, dtype=complex))
        return cls(times, np.asarray(samples, dtype=complex), bumps)

    @classmethod
    def zero(cls, t_start: float, t_stop: float, dt: float) -> ControlSignal:
        return cls.from_bumps((), t_start, t_stop, dt)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def breakpoints(self) -> np.ndarray:
        if not self.bumps:
            return np.zeros(0)
        return np.array(sorted({e for b in self.bumps for e in b.support}))

    @property
    def support(self) -> tuple[float, float] | None:
        if self.bumps is not None:
            nonzero = [b.support for b in self.bumps if b.amplitude != 0]
            if not nonzero:
                return None
            return min(s[0] for s in nonzero), max(s[1] for s in nonzero)
        idx = np.flatnonzero(self.samples)
        if idx.size == 0:
            return None
        return float(self.times[idx[0]]), float(self.times[idx[-1]])

    @property
    def smoothness(self) -> int:
        if self.bumps is None:
            return 0
        return min((b.smoothness for b in self.bumps), default=10**6)

    def is_class_m(self, direction: int = 1) -> bool:
        """C² with support strictly inside ``(0, ∞)`` (``direction=-1``: ``(-∞, 0)``)."""
        supp = self.support
        if supp is None:
            return True
        inside = supp[0] > 0 if direction > 0 else supp[1] < 0
        return self.smoothness >= 2 and inside

    def value(self, t) -> np.ndarray:
        if self.bumps is not None:
            t = np.asarray(t, dtype=float)
            return sum((b(t) for b in self.bumps), np.zeros(t.shape, dtype=complex))
        return np.interp(t, self.times, self.samples.real) + 1j * np.interp(t, self.times, self.samples.imag)

    def derivative(self, t) -> np.ndarray:
        if self.bumps is not None:
            t = np.asarray(t, dtype=float)
            return sum((b.derivative(t, 1) for b in self.bumps), np.zeros(t.shape, dtype=complex))
        d = _fd4_derivative(self.samples, self.dt)
        return np.interp(t, self.times, d.real) + 1j * np.interp(t, self.times, d.imag)

    def sample_derivative(self) -> np.ndarray:
        if self.bumps is not None:
            return self.derivative(self.times)
        return _fd4_derivative(self.samples, self.dt)

    def __add__(self, other: ControlSignal) -> ControlSignal:
        if self.times.shape != other.times.shape or not np.allclose(self.times, other.times):
            raise ValueError("controls must share a time grid")
        bumps = None
        if self.bumps is not None and other.bumps is not None:
            bumps = self.bumps + other.bumps
        return ControlSignal(self.times, self.samples + other.samples, bumps)

    def scaled(self, factor: complex) -> ControlSignal:
        bumps = None
        if self.bumps is not None:
            bumps = tuple(replace(b, amplitude=b.amplitude * factor) for b in self.bumps)
        return ControlSignal(self.times, factor * self.samples, bumps)

    def with_samples_only(self) -> ControlSignal:
        return ControlSignal(self.times, self.samples, None)


@dataclass(frozen=True)
class LiftedControl:
    """``f = Γ1[φ⁺ + φ⁻]`` with ``φ^±(t) = Σ c_m(t) φ_m`` over the deficiency modes.

    The split is a fixed linear map of ``f``: ``c(t) = gain * f(t)``.
    ``psi`` is ``φ⁺_t + φ⁺ + φ⁻_t - φ⁻`` sampled on ``control.times``.
    """

    control: ControlSignal = field(repr=False)
    basis: DeficiencyBasis = field(repr=False)
    gain: np.ndarray
    gauge: str
    classical: bool

    @property
    def coefficients(self) -> np.ndarray:
        return np.outer(self.control.samples, self.gain)

    @property
    def phi_plus(self) -> np.ndarray:
        return self.coefficients[:, : self.basis.n_plus]

    @property
    def phi_minus(self) -> np.ndarray:
        return self.coefficients[:, self.basis.n_plus :]

    @property
    def profile(self) -> np.ndarray:
        """State ``φ⁺ + φ⁻`` for ``f = 1``."""
        return self.gain @ self.basis.modes

    @property
    def signed_profile(self) -> np.ndarray:
        return (self.gain * self.basis.signs) @ self.basis.modes

    def lift(self, t) -> np.ndarray:
        return np.multiply.outer(self.control.value(t), self.profile)

    @property
    def psi(self) -> np.ndarray:
        f = self.control.samples
        df = self.control.sample_derivative()
        return np.outer(df, self.profile) + np.outer(f, self.signed_profile)

    def boundary_mismatch(self) -> float:
        """``max_t |Γ1[φ⁺ + φ⁻] - f|`` over the samples."""
        target = np.zeros(self.basis.boundary_dim)
        target[0] = 1.0
        unit = np.abs(self.basis.gamma1 @ self.gain - target).max()
        return float(unit * np.abs(self.control.samples).max(initial=0.0))


def lift_control(f: ControlSignal, basis: DeficiencyBasis, gauge: str = "min_norm") -> LiftedControl:
    """Split ``f`` over the deficiency modes.

    ``gauge="min_norm"`` takes the minimal-norm coefficient vector; ``"plus"``
    and ``"minus"`` use only the corresponding family of modes.
    """
    g1 = basis.gamma1
    bdim, n_modes = g1.shape
    if np.linalg.matrix_rank(g1) < bdim:
        raise NumericsError("Γ1 is not surjective on the deficiency span")
    target = np.zeros(bdim)
    target[0] = 1.0
    if gauge == "min_norm":
        gain = least_squares(g1, target).astype(complex)
    elif gauge in ("plus", "minus"):
        cols = np.arange(basis.n_plus) if gauge == "plus" else np.arange(basis.n_plus, n_modes)
        sub = g1[:, cols]
        if np.linalg.matrix_rank(sub) < bdim:
            raise NumericsError(f"the {gauge} modes alone do not reach every port")
        gain = np.zeros(n_modes, dtype=complex)
        gain[cols] = least_squares(sub, target)
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    lifted = LiftedControl(f, basis, gain, gauge, f.is_class_m(direction=1) or f.is_class_m(direction=-1))
    if lifted.boundary_mismatch() > 1e-10:
        raise NumericsError("lift does not reproduce the boundary control")
    return lifted


def _guard(sys: DiscreteGreenSystem, T: float) -> None:
    if abs(T) >= sys.grid.length:
        warnings.warn(
            f"horizon |T|={abs(T):g} reaches the far port at X={sys.grid.length:g}",
            FiniteSpeedWarning,
            stacklevel=3,
        )


def _panel_edges(t_stop: float, marks, max_panel: float) -> np.ndarray:
    """Oriented panel edges from 0 to ``t_stop`` containing every mark."""
    span = abs(t_stop)
    sign = 1.0 if t_stop >= 0 else -1.0
    pts = {0.0, span}
    pts.update(float(m) for m in np.abs(np.asarray(marks, dtype=float)) if 0 < m < span)
    pts = np.array(sorted(pts))
    edges = [pts[:1]]
    for lo, hi in zip(pts[:-1], pts[1:]):
        k = max(1, int(math.ceil((hi - lo) / max_panel)))
        edges.append(np.linspace(lo, hi, k + 1)[1:])
    return sign * np.concatenate(edges)


def _cumulative_modal(lam, f: ControlSignal, times, max_panel: float, order: int = 8):
    """``∫_0^t e^{-isλ} f(s) ds`` and the same for ``f'``, at each ``t`` in ``times``.

    Closed-form controls use composite Gauss-Legendre panels whose edges
    include the kinks of the bumps; sampled controls use the trapezoid rule
    on their own grid.
    """
    times = np.asarray(times, dtype=float)
    if f.bumps is None:
        return _cumulative_modal_sampled(lam, f, times)
    t_far = times[np.argmax(np.abs(times))]
    marks = np.concatenate([times, f.breakpoints * (np.sign(f.breakpoints) == np.sign(t_far))])
    edges = _panel_edges(t_far, marks, max_panel)
    nodes, weights, panel = gauss_panels(edges, order)
    phase = np.exp(-1j * np.outer(nodes, lam))
    starts = np.arange(0, nodes.size, order)
    out = []
    for vals in (f.value(nodes), f.derivative(nodes)):
        per_panel = np.add.reduceat((weights * vals)[:, None] * phase, starts, axis=0)
        cum = np.vstack([np.zeros((1, lam.size), dtype=complex), np.cumsum(per_panel, axis=0)])
        idx = np.array([int(np.argmin(np.abs(edges - t))) for t in times])
        out.append(cum[idx])
    return out[0], out[1]


def _cumulative_modal_sampled(lam, f: ControlSignal, times):
    ft = f.times
    if not (np.isclose(ft[0], 0.0) or np.isclose(ft[-1], 0.0)):
        raise NumericsError("sampled control must start or end at t = 0")
    order = np.argsort(np.abs(ft))
    s = ft[order]
    phase = np.exp(-1j * np.outer(s, lam))
    out = []
    for vals in (f.samples[order], f.sample_derivative()[order]):
        g = vals[:, None] * phase
        steps = 0.5 * (g[1:] + g[:-1]) * np.diff(s)[:, None]
        cum = np.vstack([np.zeros((1, lam.size), dtype=complex), np.cumsum(steps, axis=0)])
        idx = []
        for t in times:
            k = int(np.argmin(np.abs(s - t)))
            if not np.isclose(s[k], t, atol=1e-9):
                raise NumericsError(f"time {t} is not on the control's sample grid")
            idx.append(k)
        out.append(cum[idx])
    return out[0], out[1]


def lift_trajectory(
    sys: DiscreteGreenSystem,
    ext: SelfAdjointExtension,
    lifted: LiftedControl,
    times,
    source: str = "discrete",
    max_panel: float | None = None,
) -> np.ndarray:
    """States ``u^f(t) = φ(t) - ∫_0^t e^{i(t-s)L} P ψ(s) ds`` for each ``t``.

    ``source="analytic"`` uses ``ψ = φ⁺_t + φ⁺ + φ⁻_t - φ⁻`` with the sampled
    analytic modes. ``source="discrete"`` replaces ``±iφ^±`` by ``A φ^±``,
    i.e. ``ψ = P(φ_t - i A φ)``, which is the same expression when the modes
    are exact and makes the lifted problem identical to the grid problem.
    All ``times`` must share a sign.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times > 0) and np.any(times < 0):
        raise NumericsError("lift trajectory times must not straddle t = 0")
    spec = ext.spectral
    lam = spec.eigenvalues
    profile = lifted.profile
    if source == "discrete":
        second = -1j * (sys.matrix @ profile)
    elif source == "analytic":
        second = lifted.signed_profile
    else:
        raise ValueError(f"unknown source {source!r}")
    alpha = spec.coefficients(ext.restrict(profile))
    beta = spec.coefficients(ext.restrict(second))
    if max_panel is None:
        max_panel = min(0.05, 2.0 / max(np.abs(lam).max(), 1.0))
    f0, f1 = _cumulative_modal(lam, lifted.control, times, max_panel)
    modal = np.exp(1j * np.outer(times, lam)) * (f1 * alpha + f0 * beta)
    p = ext.embed(modal @ spec.eigenvectors.T)
    return lifted.lift(times) - p


def solve_bc_lift(
    sys: DiscreteGreenSystem,
    ext: SelfAdjointExtension,
    f: ControlSignal,
    T: float,
    basis: DeficiencyBasis | None = None,
    gauge: str = "min_norm",
    source: str = "discrete",
) -> np.ndarray:
    """``u^f(T)`` from the deficiency lift (either sign of ``T``)."""
    _guard(sys, T)
    if T == 0:
        return np.zeros(sys.state_dim, dtype=complex)
    if basis is None:
        basis = deficiency_modes(sys)
    lifted = lift_control(f, basis, gauge)
    return lift_trajectory(sys, ext, lifted, [T], source=source)[0]


def solve_bc_backward(
    sys: DiscreteGreenSystem,
    ext: SelfAdjointExtension,
    f: ControlSignal,
    T_neg: float,
    **kwargs,
) -> np.ndarray:
    """Boundary control run towards negative times, ``u(0) = 0``, state at ``T_neg < 0``."""
    if not T_neg < 0:
        raise NumericsError(f"backward horizon must be negative, got {T_neg}")
    supp = f.support
    if supp is not None and supp[1] > 0:
        raise NumericsError("backward control must vanish for t > 0")
    return solve_bc_lift(sys, ext, f, T_neg, **kwargs)


def solve_bc_direct(sys: DiscreteGreenSystem, f: ControlSignal, T: float, dt: float | None = None) -> Trajectory:
    """Crank-Nicolson for ``i u_t + A u = 0`` with ``u1(0, t) = f(t)``, ``u1(X, t) = 0``.

    The step is ``dt`` (default ``h/2``), shrunk so that ``T`` is hit
    exactly; negative ``T`` steps backwards in time.
    """
    _guard(sys, T)
    if dt is None:
        dt = sys.grid.h / 2
    if not dt > 0:
        raise NumericsError("time step must be positive")
    n_steps = max(1, int(math.ceil(abs(T) / dt - 1e-9)))
    step = T / n_steps
    times = step * np.arange(n_steps + 1)
    n = sys.n_points
    dim = sys.state_dim
    eye = np.eye(dim)
    lhs = 1j / step * eye + 0.5 * sys.matrix
    rhs = 1j / step * eye - 0.5 * sys.matrix
    bc_rows = [0, n - 1]
    lhs[bc_rows, :] = 0.0
    lhs[bc_rows, bc_rows] = 1.0
    rhs[bc_rows, :] = 0.0
    try:
        lu = scipy.linalg.lu_factor(lhs, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericsError(f"Crank-Nicolson step matrix is singular: {exc}") from exc
    fvals = f.value(times)
    states = np.zeros((n_steps + 1, dim), dtype=complex)
    for k in range(n_steps):
        b = rhs @ states[k]
        b[0] = fvals[k + 1]
        states[k + 1] = scipy.linalg.lu_solve(lu, b)
    return Trajectory(times, states, 0.0)


def dirac_oracle(f: ControlSignal, T: float, grid: Grid) -> np.ndarray:
    """Characteristic solution for ``V = 0``.

    ``T ≥ 0``: ``f(T - x) (1, i)``; ``T < 0``: ``f(T + x) (1, -i)``, with
    ``f`` extended by zero outside its support.
    """
    x = grid.x
    if T >= 0:
        g = f.value(T - x) * (T - x > 0)
        return np.concatenate([g, 1j * g])
    g = f.value(T + x) * (T + x < 0)
    return np.concatenate([g, -1j * g])


@dataclass
class LiftSolver:
    """Callable ``(f, T) -> u^f(T)`` bound to one system; caches the spectral data."""

    system: DiscreteGreenSystem
    extension: SelfAdjointExtension | None = None
    basis: DeficiencyBasis | None = None
    gauge: str = "min_norm"
    source: str = "discrete"

    def __post_init__(self):
        if self.extension is None:
            from .green import extend_self_adjoint

            self.extension = extend_self_adjoint(self.system)
        if self.basis is None:
            self.basis = deficiency_modes(self.system)

    def __call__(self, f: ControlSignal, T: float) -> np.ndarray:
        return solve_bc_lift(self.system, self.extension, f, T, self.basis, self.gauge, self.source)

    def trajectory(self, f: ControlSignal, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        _guard(self.system, float(np.max(np.abs(times))))
        lifted = lift_control(f, self.basis, self.gauge)
        return lift_trajectory(self.system, self.extension, lifted, times, source=self.source)


@dataclass
class DirectSolver:
    """Callable ``(f, T) -> u^f(T)`` using Crank-Nicolson."""

    system: DiscreteGreenSystem
    dt: float | None = None

    def __call__(self, f: ControlSignal, T: float) -> np.ndarray:
        return solve_bc_direct(self.system, f, T, self.dt).states[-1]
