"""Deficiency indices of half-line Dirac-type operators and the part classifier.

Finite matrices have no deficiency indices, so indices are counted
symbolically: ``n_± = dim Ker(A* ± i)`` is the number of independent L²
solutions of ``J_r z' + V_r z = μ z`` at ``μ = ∓i`` that satisfy the
boundary condition of the adjoint at ``x = 0``. ``J_r`` and ``V_r`` are the
compressions of ``J`` and ``V∞`` to the polarization subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from ..green import J, DiscreteGreenSystem

__all__ = [
    "OperatorSpec",
    "PartClassification",
    "classify_part",
    "deficiency_indices",
    "shooting_indices",
    "standard_specs",
]

_RANK_TOL = 1e-10


def _orth(a: np.ndarray) -> np.ndarray:
    if a.size == 0:
        return a.reshape(a.shape[0], 0)
    return scipy.linalg.orth(a, rcond=_RANK_TOL)


def _null(a: np.ndarray, dim: int) -> np.ndarray:
    if a.size == 0:
        return np.eye(dim, dtype=complex)
    return scipy.linalg.null_space(a, rcond=_RANK_TOL)


@dataclass(frozen=True)
class OperatorSpec:
    """Symbolic first-order operator ``J d/dx + V∞`` on the half-line.

    ``polarization`` (2 x m) restricts states to ``φ(x) ∈ span(columns)``.
    ``endpoint`` gives the admissible values at ``x = 0``: ``"zero"`` for
    ``y(0) = 0``, ``"y1"`` for ``y¹(0) = 0``, ``"free"`` for no condition.
    """

    name: str
    v_inf: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=complex))
    polarization: np.ndarray | None = None
    endpoint: str = "zero"

    def __post_init__(self):
        if callable(self.v_inf):
            raise ValueError("only constant asymptotic potentials are supported")
        v = np.asarray(self.v_inf, dtype=complex)
        if v.ndim == 3:
            if not np.allclose(v, v[0]):
                raise ValueError("potential is not constant; asymptotic counting needs V∞")
            v = v[0]
        if v.shape != (2, 2):
            raise ValueError("V∞ must be a 2x2 matrix")
        if not np.allclose(v, v.conj().T, atol=1e-12):
            raise ValueError("V∞ must be Hermitian")
        object.__setattr__(self, "v_inf", v)
        if self.endpoint not in ("zero", "y1", "free"):
            raise ValueError(f"unknown endpoint condition {self.endpoint!r}")

    def reduced(self):
        """``(E, J_r, V_r)`` with ``E`` an orthonormal polarization basis."""
        if self.polarization is None:
            e = np.eye(2, dtype=complex)
        else:
            e = _orth(np.asarray(self.polarization, dtype=complex).reshape(2, -1))
        outside = np.eye(2) - e @ e.conj().T
        if np.linalg.norm(outside @ J @ e) > 1e-10 or np.linalg.norm(outside @ self.v_inf @ e) > 1e-10:
            raise ValueError(f"{self.name}: polarization subspace is not invariant under J and V∞")
        jr = e.conj().T @ J @ e
        if abs(np.linalg.det(jr)) < 1e-12:
            raise ValueError(f"{self.name}: compressed J is singular")
        return e, jr, e.conj().T @ self.v_inf @ e

    def endpoint_space(self, e: np.ndarray) -> np.ndarray:
        m = e.shape[1]
        if self.endpoint == "zero":
            return np.zeros((m, 0), dtype=complex)
        if self.endpoint == "free":
            return np.eye(m, dtype=complex)
        return _null(e[:1, :], m)

    def adjoint_endpoint_space(self) -> np.ndarray:
        """Values ``v(0)`` with ``v(0)^† J_r k = 0`` for every admissible ``k``."""
        e, jr, _ = self.reduced()
        k0 = self.endpoint_space(e)
        m = e.shape[1]
        if k0.shape[1] == 0:
            return np.eye(m, dtype=complex)
        return _null((jr @ k0).conj().T, m)

    def characteristic(self, mu: complex) -> np.ndarray:
        _, jr, vr = self.reduced()
        return np.linalg.solve(jr, mu * np.eye(jr.shape[0]) - vr)


def _stable_subspace(m: np.ndarray) -> np.ndarray:
    t, z, sdim = scipy.linalg.schur(m.astype(complex), output="complex", sort="lhp")
    return z[:, :sdim]


def _intersection_dim(a: np.ndarray, b: np.ndarray) -> int:
    if a.shape[1] == 0 or b.shape[1] == 0:
        return 0
    joint = np.linalg.matrix_rank(np.hstack([a, b]), tol=1e-9)
    return int(a.shape[1] + b.shape[1] - joint)


def deficiency_indices(spec: OperatorSpec) -> tuple[int, int]:
    """``(n₊, n₋)`` with ``n₊ = dim Ker(A* + i)`` (``A* z = -iz``)."""
    adj = spec.adjoint_endpoint_space()
    out = []
    for mu in (-1j, 1j):
        m = spec.characteristic(mu)
        if np.any(np.abs(np.linalg.eigvals(m).real) < 1e-12):
            raise ValueError(f"{spec.name}: characteristic matrix has imaginary eigenvalues")
        out.append(_intersection_dim(_stable_subspace(m), adj))
    return out[0], out[1]


def shooting_indices(spec: OperatorSpec, length: float = 40.0, decay_tol: float = 1e-3) -> tuple[int, int]:
    """Independent count: integrate ``z' = M z`` on ``[0, length]`` from every admissible start.

    The fundamental solutions are combined along the right singular vectors
    of their values at ``length``; a combination counts as decaying when its
    L² mass on ``[length/2, length]`` is below ``decay_tol²`` relative to
    ``max(1, largest mass)``. The relative floor absorbs the round-off that
    an exponentially growing companion solution leaks into the others.
    """
    adj = spec.adjoint_endpoint_space()
    xs = np.linspace(length / 2, length, 801)
    out = []
    for mu in (-1j, 1j):
        m = spec.characteristic(mu)
        if adj.shape[1] == 0:
            out.append(0)
            continue
        cols = []
        for start in adj.T:
            sol = scipy.integrate.solve_ivp(
                lambda _, z: m @ z, (0.0, length), start.astype(complex),
                method="DOP853", rtol=1e-11, atol=1e-14, dense_output=True,
            )
            cols.append(sol.sol(xs))
        z = np.stack(cols, axis=-1)  # (dim, len(xs), n_starts)
        _, _, vh = np.linalg.svd(z[:, -1, :])
        masses = []
        for v in vh.conj():
            path = z @ v
            masses.append(scipy.integrate.trapezoid(np.sum(np.abs(path) ** 2, axis=0), xs))
        masses = np.array(masses)
        floor = max(1.0, masses.max())
        out.append(int(np.sum(masses < decay_tol**2 * floor)))
    return out[0], out[1]


def standard_specs(v_inf=None) -> dict[str, OperatorSpec]:
    """The half-line Dirac example: minimal ``L0``, self-adjoint ``L`` and the parts in ``D`` and its mirror."""
    v = np.zeros((2, 2), dtype=complex) if v_inf is None else np.asarray(v_inf, dtype=complex)
    return {
        "L0": OperatorSpec("L0", v, None, "zero"),
        "L": OperatorSpec("L", v, None, "y1"),
        "L0_D": OperatorSpec("L0_D", v, np.array([[1.0], [-1j]]), "zero"),
        "L0_D_mirror": OperatorSpec("L0_D_mirror", v, np.array([[1.0], [1j]]), "zero"),
    }


@dataclass
class PartClassification:
    subspace_basis: np.ndarray = field(repr=False)
    domain_dim: int
    invariance_residual: float
    invariance_tol: float
    n_plus: int | None
    n_minus: int | None

    @property
    def invariant(self) -> bool:
        return self.domain_dim > 0 and self.invariance_residual <= self.invariance_tol

    @property
    def indices_available(self) -> bool:
        return self.n_plus is not None

    @property
    def is_maximal(self) -> bool | None:
        if not self.indices_available:
            return None
        return self.n_plus == 0 or self.n_minus == 0

    @property
    def in_class_M(self) -> bool | None:
        if not self.indices_available:
            return None
        return self.n_plus == 0

    def to_dict(self) -> dict:
        return {
            "dim": int(self.subspace_basis.shape[1]),
            "domain_dim": self.domain_dim,
            "invariance_residual": self.invariance_residual,
            "invariance_tol": self.invariance_tol,
            "invariant": self.invariant,
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "is_maximal": self.is_maximal,
            "in_class_M": self.in_class_M,
        }


def classify_part(sys: DiscreteGreenSystem, subspace_basis, spec: OperatorSpec | None = None, tol=None):
    """Test whether ``A`` has a part in span(``subspace_basis``) and classify it.

    Domain samples are the vectors of the subspace that also lie in
    ``Ker Γ1 ∩ Ker Γ2``; the invariance residual is the largest
    ``‖(I - P_G) A y‖_W`` over W-orthonormal domain samples. ``tol``
    defaults to ``10 h²``.
    """
    g = np.asarray(subspace_basis, dtype=complex)
    if g.ndim != 2 or g.shape[1] == 0:
        raise ValueError("subspace basis is empty")
    w = sys.weights
    gram = g.conj().T @ (w[:, None] * g)
    if np.linalg.norm(gram - np.eye(g.shape[1])) > 1e-8:
        raise ValueError("subspace basis is not W-orthonormal")
    constraints = np.vstack([sys.gamma1, sys.gamma2]) @ g
    coeffs = _null(constraints, g.shape[1])
    samples = g @ coeffs
    tol = 10 * sys.grid.h**2 if tol is None else tol
    if samples.shape[1]:
        image = sys.matrix @ samples
        inside = g @ (g.conj().T @ (w[:, None] * image))
        resid = np.sqrt(np.sum(w[:, None] * np.abs(image - inside) ** 2, axis=0))
        residual = float(resid.max())
    else:
        residual = float("inf")
    n_plus = n_minus = None
    if spec is not None:
        n_plus, n_minus = deficiency_indices(spec)
    return PartClassification(g, int(samples.shape[1]), residual, tol, n_plus, n_minus)
