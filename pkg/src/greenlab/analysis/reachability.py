"""Snapshot estimates of reachable and unreachable subspaces."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..control import Bump, ControlSignal
from ..green import DiscreteGreenSystem
from ..numerics import svd_orthobasis

__all__ = [
    "ReachabilityReport",
    "backward_reachable",
    "bump_family",
    "polarization_content",
    "polarized_basis",
    "principal_angles",
    "snapshot_reachable",
    "tail_fraction",
]

RIGHT = np.array([1.0, 1j])  # right-moving polarization (1, i)
LEFT = np.array([1.0, -1j])  # left-moving polarization (1, -i)


def polarization_content(sys: DiscreteGreenSystem, u: np.ndarray, pol: np.ndarray) -> float:
    """Relative W-norm of the pointwise projection of ``u`` onto ``pol``."""
    q = pol / np.linalg.norm(pol)
    u1, u2 = sys.split(u)
    a = u1 * np.conj(q[0]) + u2 * np.conj(q[1])
    total = sys.norm(u)
    if total == 0:
        return 0.0
    return float(np.sqrt(np.sum(sys.grid.weights * np.abs(a) ** 2)) / total)


def tail_fraction(sys: DiscreteGreenSystem, u: np.ndarray, x_cut: float) -> float:
    """``‖u restricted to x > x_cut‖ / ‖u‖``."""
    total = sys.norm(u)
    if total == 0:
        return 0.0
    far = np.tile(sys.grid.x > x_cut, 2)
    return float(np.sqrt(np.sum(sys.weights[far] * np.abs(u[far]) ** 2)) / total)


def polarized_basis(sys: DiscreteGreenSystem, pol, x_min: float = -np.inf, x_max: float = np.inf) -> np.ndarray:
    """W-orthonormal basis of ``{φ(x) pol : supp φ ⊂ [x_min, x_max)}`` (one column per node)."""
    x = sys.grid.x
    nodes = np.flatnonzero((x >= x_min) & (x < x_max))
    q = np.asarray(pol, dtype=complex) / np.linalg.norm(pol)
    n = sys.n_points
    basis = np.zeros((sys.state_dim, nodes.size), dtype=complex)
    scale = 1.0 / np.sqrt(sys.grid.weights[nodes])
    basis[nodes, np.arange(nodes.size)] = q[0] * scale
    basis[n + nodes, np.arange(nodes.size)] = q[1] * scale
    return basis


def node_basis(sys: DiscreteGreenSystem, x_min: float, x_max: float = np.inf) -> np.ndarray:
    """W-orthonormal basis of all states supported on ``[x_min, x_max)``."""
    return np.hstack([polarized_basis(sys, (1, 0), x_min, x_max), polarized_basis(sys, (0, 1), x_min, x_max)])


def principal_angles(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Principal angles (radians, descending) between two column spans in the W-inner product."""
    if a.shape[1] == 0 or b.shape[1] == 0:
        return np.zeros(0)
    root = np.sqrt(weights)[:, None]
    return scipy.linalg.subspace_angles(root * a, root * b)


def containment_angle(sub: np.ndarray, basis_out: np.ndarray, weights: np.ndarray) -> float:
    """Largest angle between a vector of span(``sub``) and the W-complement of span(``basis_out``).

    Both arguments are W-orthonormal bases.
    """
    if sub.shape[1] == 0 or basis_out.shape[1] == 0:
        return 0.0
    cross = basis_out.conj().T @ (weights[:, None] * sub)
    smax = np.linalg.norm(cross, 2)
    return float(np.arcsin(min(1.0, smax)))


def bump_family(count: int, T: float, widths=(0.3, 0.4, 0.5), kind: str = "sin2", margin: float = 0.05):
    """``count`` bumps whose supports lie inside ``(0, T)`` (or ``(T, 0)`` for ``T < 0``).

    Widths cycle through ``widths``; centers sweep the admissible window.
    """
    span = abs(T)
    sign = 1.0 if T > 0 else -1.0
    bumps = []
    for k in range(count):
        w = min(widths[k % len(widths)], span - 2 * margin * span)
        lo, hi = margin * span + w / 2, span - margin * span - w / 2
        frac = 0.5 if count == 1 else k / (count - 1)
        center = lo + frac * (hi - lo)
        bumps.append(Bump(sign * center, w, 1.0, kind))
    return bumps


@dataclass
class ReachabilityReport:
    T: float
    direction: str
    controls_used: int
    family: str
    singular_values: np.ndarray
    reachable_basis: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    omega_T: tuple[float, float]
    polarization_residual: float
    tail_fraction: float
    predicted_angle_deg: float
    unreachable_angle_deg: float
    rel_tol: float
    warnings: list[str] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return self.reachable_basis.shape[1]

    def unreachable_projector(self) -> np.ndarray:
        """W-orthogonal projector onto the complement of the reachable estimate."""
        b = self.reachable_basis
        return np.eye(b.shape[0]) - b @ (b.conj().T * self.weights)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "direction": self.direction,
            "controls_used": self.controls_used,
            "family": self.family,
            "rank": self.rank,
            "rel_tol": self.rel_tol,
            "singular_values": [float(s) for s in self.singular_values],
            "omega_T": list(self.omega_T),
            "polarization_residual": self.polarization_residual,
            "tail_fraction": self.tail_fraction,
            "predicted_angle_deg": self.predicted_angle_deg,
            "unreachable_angle_deg": self.unreachable_angle_deg,
            "warnings": list(self.warnings),
            "note": "deficiency indices are computed symbolically; finite matrices carry none",
        }


def _reachable(solver, sys, bumps, T, rel_tol, dt, direction):
    if not bumps:
        raise ValueError("need at least one control")
    t0, t1 = (0.0, T) if T > 0 else (T, 0.0)
    dt = sys.grid.h / 2 if dt is None else dt
    wrong, right = (LEFT, RIGHT) if direction == "forward" else (RIGHT, LEFT)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        states = []
        for b in bumps:
            f = ControlSignal.from_bumps([b], t0, t1, dt)
            states.append(solver(f, T))
    snaps = np.array(states).T
    sigma, basis = svd_orthobasis(snaps, sys.weights, rel_tol)
    span = abs(T)
    predicted = polarized_basis(sys, right, 0.0, span)
    unreach_pred = np.hstack([polarized_basis(sys, wrong, 0.0, span), node_basis(sys, span)])
    pred_angles = principal_angles(basis, predicted, sys.weights)
    kinds = sorted({b.kind for b in bumps})
    widths = sorted({round(b.width, 6) for b in bumps})
    return ReachabilityReport(
        T=T,
        direction=direction,
        controls_used=len(bumps),
        family=f"bumps kind={','.join(kinds)} widths={widths}",
        singular_values=sigma,
        reachable_basis=basis,
        weights=sys.weights,
        omega_T=(0.0, span),
        polarization_residual=max(polarization_content(sys, u, wrong) for u in states),
        tail_fraction=max(tail_fraction(sys, u, span) for u in states),
        predicted_angle_deg=float(np.degrees(pred_angles.max(initial=0.0))),
        unreachable_angle_deg=float(np.degrees(containment_angle(unreach_pred, basis, sys.weights))),
        rel_tol=rel_tol,
        warnings=[str(w.message) for w in caught],
    )


def snapshot_reachable(solver, control_family, T: float, rel_tol: float = 1e-8, dt=None) -> ReachabilityReport:
    """Estimate the closure of ``U^T`` from the states ``u^f(T)`` of a bump family.

    ``solver`` is a callable ``(f, T) -> state`` exposing ``.system``
    (e.g. :class:`~greenlab.control.LiftSolver`).
    """
    if not T > 0:
        raise ValueError("forward reachability needs T > 0")
    return _reachable(solver, solver.system, list(control_family), T, rel_tol, dt, "forward")


def backward_reachable(solver, control_family, T_neg: float, rel_tol: float = 1e-8, dt=None) -> ReachabilityReport:
    """Mirror of :func:`snapshot_reachable` for the system run to negative times."""
    if not T_neg < 0:
        raise ValueError("backward reachability needs T < 0")
    return _reachable(solver, solver.system, list(control_family), T_neg, rel_tol, dt, "backward")
