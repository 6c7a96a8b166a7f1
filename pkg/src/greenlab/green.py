"""Discrete Green systems for the half-line Dirac operator ``J d/dx + V``.

The half-line is truncated to ``[0, X]``. A state is a two-component grid
function stored as ``concatenate([y1, y2])``. The derivative is the
second-order SBP operator ``D = H^{-1} Q`` with ``Q + Q^T = diag(-1, 0, ..., 0, 1)``,
which makes the discrete Green formula an exact algebraic identity:

    <A u, v>_W - <u, A v>_W = (Γ1 u, Γ2 v)_B - (Γ2 u, Γ1 v)_B

with ``Γ1 y = (y1(0), y1(X))`` and ``Γ2 y = (y2(0), -y2(X))``. Port 0 is the
physical control port; port ``X`` is the artificial far end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    Grid,
    NumericsError,
    SpectralDecomposition,
    hermitian_eig,
    w_inner,
    w_norm,
)

__all__ = [
    "J",
    "DeficiencyBasis",
    "DiscreteGreenSystem",
    "SelfAdjointExtension",
    "build_dirac",
    "deficiency_modes",
    "extend_self_adjoint",
    "green_residual",
    "sbp_first_derivative",
]

J = np.array([[0.0, 1.0], [-1.0, 0.0]])

PORT0, PORTX = 0, 1


def sbp_first_derivative(grid: Grid) -> np.ndarray:
    """Second-order SBP first derivative (central interior, one-sided ends)."""
    n = grid.n_points
    q = np.zeros((n, n))
    idx = np.arange(n - 1)
    q[idx, idx + 1] = 0.5
    q[idx + 1, idx] = -0.5
    q[0, 0] = -0.5
    q[-1, -1] = 0.5
    return q / grid.weights[:, None]


def _normalize_potential(grid: Grid, potential) -> np.ndarray:
    n = grid.n_points
    if potential is None:
        v = np.zeros((n, 2, 2), dtype=complex)
    else:
        p = np.asarray(potential, dtype=complex)
        if p.ndim == 0:
            v = np.broadcast_to(p * np.eye(2), (n, 2, 2)).copy()
        elif p.shape == (2, 2):
            v = np.broadcast_to(p, (n, 2, 2)).copy()
        elif p.shape == (n, 2, 2):
            v = p.copy()
        else:
            raise NumericsError(f"potential has unsupported shape {p.shape}")
    asym = np.max(np.abs(v - np.conj(np.swapaxes(v, 1, 2))))
    if asym > 1e-12 * max(1.0, np.max(np.abs(v))):
        raise NumericsError(f"potential is not Hermitian per node (asymmetry {asym:.3e})")
    return v


@dataclass(frozen=True)
class DiscreteGreenSystem:
    """Discretized ``L0*`` with its boundary maps on a truncated half-line."""

    grid: Grid
    potential: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    derivative: np.ndarray = field(repr=False)
    gamma1: np.ndarray = field(repr=False)
    gamma2: np.ndarray = field(repr=False)

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    @property
    def state_dim(self) -> int:
        return 2 * self.grid.n_points

    @property
    def boundary_dim(self) -> int:
        return self.gamma1.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([self.grid.weights, self.grid.weights])

    @property
    def potential_is_constant(self) -> bool:
        return bool(np.allclose(self.potential, self.potential[0], rtol=0, atol=1e-14))

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.matrix @ y

    def split(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_points
        return y[..., :n], y[..., n:]

    def state(self, y1, y2) -> np.ndarray:
        return np.concatenate([np.asarray(y1, dtype=complex), np.asarray(y2, dtype=complex)])

    def inner(self, u, v) -> complex:
        return w_inner(u, v, self.weights)

    def norm(self, u) -> float:
        return w_norm(u, self.weights)

    def boundary_form(self, u, v) -> complex:
        """``(Γ1 u, Γ2 v)_B - (Γ2 u, Γ1 v)_B``."""
        g1u, g2u = self.gamma1 @ u, self.gamma2 @ u
        g1v, g2v = self.gamma1 @ v, self.gamma2 @ v
        return complex(np.vdot(g2v, g1u) - np.vdot(g1v, g2u))

    def condition_a(self) -> bool:
        return int(np.linalg.matrix_rank(self.gamma1)) == self.boundary_dim

    def minimal_mask(self) -> np.ndarray:
        """Coordinates left free by ``Ker Γ1 ∩ Ker Γ2`` (the domain of L0)."""
        n = self.n_points
        keep = np.ones(self.state_dim, dtype=bool)
        keep[[0, n - 1, n, 2 * n - 1]] = False
        return keep

    def condition_b_asymmetry(self) -> float:
        """Relative W-asymmetry of ``A`` compressed to ``Ker Γ1 ∩ Ker Γ2``."""
        keep = self.minimal_mask()
        a = self.matrix[np.ix_(keep, keep)]
        wa = self.weights[keep][:, None] * a
        return float(np.linalg.norm(wa - wa.conj().T) / np.linalg.norm(wa))


def build_dirac(grid: Grid, potential=None) -> DiscreteGreenSystem:
    """Assemble ``A = J D + V`` and the two-port boundary maps.

    ``potential`` may be ``None`` (zero), a scalar ``c`` (``c·I``), a constant
    2x2 Hermitian matrix, or an array of shape ``(n_points, 2, 2)``.
    """
    v = _normalize_potential(grid, potential)
    n = grid.n_points
    d = sbp_first_derivative(grid)
    a = np.zeros((2 * n, 2 * n), dtype=complex)
    a[:n, n:] = d
    a[n:, :n] = -d
    idx = np.arange(n)
    for r in range(2):
        for c in range(2):
            a[r * n + idx, c * n + idx] += v[:, r, c]
    gamma1 = np.zeros((2, 2 * n))
    gamma2 = np.zeros((2, 2 * n))
    gamma1[PORT0, 0] = 1.0
    gamma1[PORTX, n - 1] = 1.0
    gamma2[PORT0, n] = 1.0
    gamma2[PORTX, 2 * n - 1] = -1.0
    return DiscreteGreenSystem(grid, v, a, d, gamma1, gamma2)


def green_residual(sys: DiscreteGreenSystem, u, v) -> complex:
    """Defect of the Green formula for the pair ``(u, v)``."""
    au, av = sys.matrix @ u, sys.matrix @ v
    return sys.inner(au, v) - sys.inner(u, av) - sys.boundary_form(u, v)


@dataclass(frozen=True)
class SelfAdjointExtension:
    """``L = L0*`` restricted to ``Ker Γ1`` (``y1(0) = y1(X) = 0``).

    The boundary unknowns are eliminated; ``reduced_matrix`` acts on the
    remaining ``2n - 2`` coordinates selected by ``mask``.
    """

    system: DiscreteGreenSystem
    mask: np.ndarray = field(repr=False)
    reduced_matrix: np.ndarray = field(repr=False)
    spectral: SpectralDecomposition = field(repr=False)

    @property
    def weights(self) -> np.ndarray:
        return self.spectral.weights

    def restrict(self, y: np.ndarray) -> np.ndarray:
        return y[..., self.mask]

    def embed(self, z: np.ndarray) -> np.ndarray:
        out = np.zeros(z.shape[:-1] + (self.system.state_dim,), dtype=complex)
        out[..., self.mask] = z
        return out

    def constraint_violation(self, y: np.ndarray) -> float:
        """``|Γ1 y|`` relative to the W-norm of ``y``."""
        scale = max(self.system.norm(y), np.finfo(float).tiny)
        return float(np.linalg.norm(self.system.gamma1 @ y) / scale)

    def check_domain(self, y: np.ndarray, tol: float = 1e-10) -> None:
        viol = self.constraint_violation(y)
        if viol > tol:
            raise NumericsError(f"state violates Γ1 y = 0 (relative size {viol:.3e})")


def extend_self_adjoint(sys: DiscreteGreenSystem) -> SelfAdjointExtension:
    n = sys.n_points
    mask = np.ones(sys.state_dim, dtype=bool)
    mask[[0, n - 1]] = False
    reduced = sys.matrix[np.ix_(mask, mask)]
    spectral = hermitian_eig(reduced, sys.weights[mask])
    return SelfAdjointExtension(sys, mask, reduced, spectral)


@dataclass(frozen=True)
class DeficiencyBasis:
    """Sampled solutions of ``L0* φ = ±i φ``, one per port and sign.

    ``plus_modes`` satisfy ``A φ ≈ +i φ``, ``minus_modes`` satisfy
    ``A φ ≈ -i φ``. Every mode has ``Γ1 φ = 1`` at its own port.
    """

    plus_modes: np.ndarray = field(repr=False)
    minus_modes: np.ndarray = field(repr=False)
    plus_ports: tuple[int, ...]
    minus_ports: tuple[int, ...]
    gamma1: np.ndarray = field(repr=False)
    residuals: tuple[float, ...]

    @property
    def modes(self) -> np.ndarray:
        return np.vstack([self.plus_modes, self.minus_modes])

    @property
    def signs(self) -> np.ndarray:
        return np.concatenate([np.ones(len(self.plus_modes)), -np.ones(len(self.minus_modes))])

    @property
    def n_plus(self) -> int:
        return len(self.plus_modes)

    @property
    def boundary_dim(self) -> int:
        return self.gamma1.shape[0]


def _decay_directions(v_inf: np.ndarray, sign: int):
    # J z' = (μ - V) z  =>  z' = -J (μ - V) z
    m = -J @ (sign * 1j * np.eye(2) - v_inf)
    lam, vec = np.linalg.eig(m)
    order = np.argsort(lam.real)
    return lam[order], vec[:, order]


def deficiency_modes(sys: DiscreteGreenSystem, far_port: bool = True) -> DeficiencyBasis:
    """Analytic deficiency vectors sampled on the grid.

    Only constant potentials are supported; for ``V = 0`` the port-0 modes
    are ``e^{-x}(1, -i)`` (``+i``) and ``e^{-x}(1, i)`` (``-i``). With
    ``far_port`` the mirror modes growing towards ``x = X`` are appended so
    that ``Γ1`` maps the span onto both ports.
    """
    if not sys.potential_is_constant:
        raise NumericsError("deficiency modes need a constant potential")
    v_inf = sys.potential[0]
    x = sys.grid.x
    length = sys.grid.length
    weights = sys.weights
    half = x <= length / 2
    sets = {}
    for sign in (1, -1):
        lam, vec = _decay_directions(v_inf, sign)
        modes, ports = [], []
        candidates = [(PORT0, lam[0], vec[:, 0])]
        if far_port:
            candidates.append((PORTX, lam[1], vec[:, 1]))
        for port, kappa, direction in candidates:
            if abs(direction[0]) < 1e-12:
                raise NumericsError("deficiency direction has no first component; Γ1 not surjective")
            direction = direction / direction[0]
            shift = 0.0 if port == PORT0 else length
            profile = np.exp(kappa * (x - shift))
            modes.append(np.concatenate([direction[0] * profile, direction[1] * profile]))
            ports.append(port)
        sets[sign] = (np.array(modes), tuple(ports))
    plus, plus_ports = sets[1]
    minus, minus_ports = sets[-1]
    all_modes = np.vstack([plus, minus])
    gamma1 = sys.gamma1 @ all_modes.T
    if not far_port:
        gamma1 = gamma1[:1]
    residuals = []
    for mode, sign, port in zip(all_modes, [1] * len(plus) + [-1] * len(minus), plus_ports + minus_ports):
        r = sys.matrix @ mode - sign * 1j * mode
        sub = half if port == PORT0 else ~half
        sub2 = np.concatenate([sub, sub])
        residuals.append(w_norm(r[sub2], weights[sub2]) / w_norm(mode[sub2], weights[sub2]))
    return DeficiencyBasis(plus, minus, plus_ports, minus_ports, gamma1, tuple(residuals))
