"""Numerical checks of the duality identities linking ``u^f`` and the free dynamics.

Inner products are linear in the first argument; ``(a, b)_B = Σ a_b conj(b_b)``.
The control only drives port 0, so the boundary pairings reduce to port 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..control import ControlSignal
from ..dynamics import integrated_trajectory, propagate
from ..green import SelfAdjointExtension
from ..numerics import integrate_time

__all__ = [
    "DualityCheck",
    "check_aux1",
    "check_aux2",
    "check_auxiliary",
    "decay_probe",
    "membership_probe",
]


@dataclass
class DualityCheck:
    name: str
    lhs: complex
    rhs: complex
    scale: float
    terms: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def scaled_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "lhs": [self.lhs.real, self.lhs.imag],
            "rhs": [self.rhs.real, self.rhs.imag],
            "residual": self.residual,
            "scale": self.scale,
            "scaled_residual": self.scaled_residual,
        }
        for k, v in self.terms.items():
            out[k] = [v.real, v.imag] if isinstance(v, complex) else v
        return out


def _scale(f: ControlSignal, y, sys, T) -> float:
    fnorm = float(np.sqrt(integrate_time(np.abs(f.samples) ** 2, abs(f.dt))))
    return fnorm * sys.norm(y) * max(1.0, abs(T))


def _forward_times(f: ControlSignal, T: float) -> np.ndarray:
    if not (np.isclose(f.times[0], 0.0) and np.isclose(f.times[-1], T)):
        raise ValueError("control must be sampled on [0, T]")
    return f.times


def check_auxiliary(f: ControlSignal, y, T: float, ext: SelfAdjointExtension, solver) -> DualityCheck:
    """``(u^f(T), y) = i ∫_0^T (f(t), Γ2 v^{y,T}(t))_B dt``."""
    sys = ext.system
    ext.check_domain(y)
    times = _forward_times(f, T)
    lhs = sys.inner(solver(f, T), y)
    v = propagate(ext, y, T, times)
    g2 = (sys.gamma2 @ v.T)[0]
    rhs = 1j * complex(integrate_time(f.samples * np.conj(g2), f.dt))
    return DualityCheck("auxiliary", lhs, rhs, _scale(f, y, sys, T))


def check_aux1(f: ControlSignal, y, T: float, ext: SelfAdjointExtension, solver) -> DualityCheck:
    """``∫_0^T (y, u^f(t)) dt = i ∫_0^T (Γ2 w^{y,T}(t), f(t))_B dt``.

    ``solver`` must provide ``trajectory(f, times)``.
    """
    sys = ext.system
    ext.check_domain(y)
    times = _forward_times(f, T)
    states = solver.trajectory(f, times)
    lhs = complex(integrate_time(np.array([sys.inner(y, u) for u in states]), f.dt))
    w = integrated_trajectory(ext, y, T, times)
    g2 = (sys.gamma2 @ w.T)[0]
    rhs = 1j * complex(integrate_time(g2 * np.conj(f.samples), f.dt))
    return DualityCheck("aux1", lhs, rhs, _scale(f, y, sys, T))


def check_aux2(f: ControlSignal, y, t_neg: float, T: float, ext: SelfAdjointExtension, solver) -> DualityCheck:
    """``(u^f(T), w^y(t)) = ∫_0^T (u^f(s), y) ds + i ∫_0^T (f(s), Γ2 w^y(s+t-T))_B ds`` for ``t ≤ 0``.

    The result also carries the residual with ``-i`` in front of the last
    term (``residual_minus_i``); that variant does not hold under this
    inner-product convention.
    """
    if t_neg > 0:
        raise ValueError("t_neg must be non-positive")
    sys = ext.system
    ext.check_domain(y)
    times = _forward_times(f, T)
    states = solver.trajectory(f, times)
    lhs = sys.inner(states[-1], integrated_trajectory(ext, y, 0.0, t_neg))
    term_u = complex(integrate_time(np.array([sys.inner(u, y) for u in states]), f.dt))
    w = integrated_trajectory(ext, y, 0.0, times + t_neg - T)
    g2 = (sys.gamma2 @ w.T)[0]
    term_f = complex(integrate_time(f.samples * np.conj(g2), f.dt))
    rhs = term_u + 1j * term_f
    return DualityCheck(
        "aux2",
        lhs,
        rhs,
        _scale(f, y, sys, T),
        {
            "term_u": term_u,
            "term_f": term_f,
            "residual_minus_i": abs(lhs - (term_u - 1j * term_f)),
        },
    )


def decay_probe(ext: SelfAdjointExtension, z, y, times) -> dict:
    """Compare ``|(z, e^{itL} y)|`` with ``|(z, y)| e^{-t}`` for ``t ≤ 0``.

    If ``z`` were a ``+i`` deficiency vector of a part containing the
    trajectory, the two would coincide; the left side is bounded by
    ``‖z‖‖y‖`` while the right side grows, so a nonzero ``(z, y)`` is ruled
    out as ``t → -∞``.
    """
    sys = ext.system
    times = np.asarray(times, dtype=float)
    if np.any(times > 0):
        raise ValueError("probe times must be non-positive")
    v = propagate(ext, y, 0.0, times)
    lhs = np.abs(v.conj() @ (sys.weights * z)).astype(float)
    zy = abs(sys.inner(z, y))
    return {
        "times": times.tolist(),
        "pairing": lhs.tolist(),
        "exponential": (zy * np.exp(-times)).tolist(),
        "bound": sys.norm(z) * sys.norm(y),
        "bounded": bool(np.all(lhs <= sys.norm(z) * sys.norm(y) * (1 + 1e-12))),
    }


def membership_probe(ext: SelfAdjointExtension, y, times) -> float:
    """``max_t |Γ2 w^y(t)| / ‖w^y(t)‖`` at port 0 over ``t ≤ 0``; small for ``y`` unreachable."""
    sys = ext.system
    w = integrated_trajectory(ext, y, 0.0, np.asarray(times, dtype=float))
    ratios = []
    for state in w:
        nrm = sys.norm(state)
        if nrm > 0:
            ratios.append(abs((sys.gamma2 @ state)[0]) / nrm)
    return float(max(ratios, default=0.0))
