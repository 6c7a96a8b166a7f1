"""Dense linear algebra, quadrature and mesh primitives shared by the lab.

Every state vector in this package lives on a :class:`Grid` and is measured
with the weighted inner product

.. math::

    \\langle u, v \\rangle_W = \\sum_j w_j u_j \\bar v_j,

i.e. linear in the first argument. ``W`` is always diagonal (the SBP norm),
so W-orthogonal projections onto coordinate subspaces are plain coordinate
projections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

__all__ = [
    "Grid",
    "NumericsError",
    "SpectralDecomposition",
    "gauss_panels",
    "hermitian_eig",
    "integrate_time",
    "least_squares",
    "svd_orthobasis",
    "w_inner",
    "w_norm",
]

HERMITIAN_TOL = 1e-10


class NumericsError(ValueError):
    """Raised when an input violates a numerical precondition."""


def w_inner(u: np.ndarray, v: np.ndarray, weights: np.ndarray) -> complex:
    """Weighted inner product, linear in ``u`` and antilinear in ``v``."""
    return complex(np.sum(weights * u * np.conj(v)))


def w_norm(u: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sqrt(np.sum(weights * np.abs(u) ** 2)))


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on ``[0, X]`` carrying the diagonal SBP norm.

    The weights are ``h/2`` at both endpoints and ``h`` in the interior, so
    they sum to the truncation length exactly.
    """

    n_points: int
    h: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_points < 8:
            raise NumericsError(f"grid needs at least 8 points, got {self.n_points}")
        if not self.h > 0:
            raise NumericsError(f"grid spacing must be positive, got {self.h}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n_points,) or np.any(w <= 0):
            raise NumericsError("quadrature weights must be positive, one per node")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n_points: int, length: float) -> Grid:
        n_points = int(n_points)
        if n_points < 8:
            raise NumericsError(f"grid needs at least 8 points, got {n_points}")
        h = float(length) / (n_points - 1)
        w = np.full(n_points, h)
        w[0] = w[-1] = h / 2
        return cls(n_points, h, w)

    @property
    def length(self) -> float:
        return (self.n_points - 1) * self.h

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(self.n_points)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a W-Hermitian matrix.

    ``eigenvectors`` holds W-orthonormal columns, eigenvalues are ascending.
    This is the discrete spectral measure: ``E(Δ) y`` is the sum of
    ``<y, e_k>_W e_k`` over the eigenvalues in ``Δ``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def coefficients(self, y: np.ndarray) -> np.ndarray:
        """Expansion coefficients ``<y, e_k>_W`` (``y`` may be a matrix of columns)."""
        wy = self.weights[:, None] * y if y.ndim == 2 else self.weights * y
        return self.eigenvectors.conj().T @ wy

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ coeffs

    def apply(self, fn, y: np.ndarray) -> np.ndarray:
        """Evaluate ``fn(L) y`` for a scalar function ``fn`` of the eigenvalue."""
        return self.synthesize(fn(self.eigenvalues) * self.coefficients(y))

    def matrix(self) -> np.ndarray:
        """Reassemble ``V diag(λ) V^† W``."""
        v = self.eigenvectors
        return (v * self.eigenvalues) @ (v.conj().T * self.weights)


def _weighted_asymmetry(m: np.ndarray, weights: np.ndarray) -> float:
    wm = weights[:, None] * m
    scale = max(np.linalg.norm(wm), np.finfo(float).tiny)
    return float(np.linalg.norm(wm - wm.conj().T) / scale)


def hermitian_eig(m, weights, tol: float = HERMITIAN_TOL) -> SpectralDecomposition:
    """Eigendecomposition of a matrix that is Hermitian in the W-inner product.

    The matrix is symmetrized as ``W^{1/2} M W^{-1/2}`` and handed to LAPACK;
    eigenvectors are mapped back and are W-orthonormal.

    Raises
    ------
    NumericsError
        If ``W M`` deviates from Hermitian by more than ``tol`` (relative).
    """
    m = np.asarray(m, dtype=complex)
    weights = np.asarray(weights, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != weights.size:
        raise NumericsError("matrix must be square and match the weight vector")
    if not np.all(np.isfinite(m)):
        raise NumericsError("matrix has non-finite entries")
    if np.any(weights <= 0):
        raise NumericsError("weights must be positive")
    asym = _weighted_asymmetry(m, weights)
    if asym > tol:
        raise NumericsError(f"matrix is not W-Hermitian: relative asymmetry {asym:.3e}")
    s = np.sqrt(weights)
    sym = s[:, None] * m / s[None, :]
    sym = 0.5 * (sym + sym.conj().T)
    lam, u = np.linalg.eigh(sym)
    return SpectralDecomposition(lam, u / s[:, None], weights)


def svd_orthobasis(snapshots, weights, rel_tol: float = 1e-8):
    """W-orthonormal basis for the column span of ``snapshots``.

    Returns ``(singular_values, basis)`` where only directions with
    ``σ_k / σ_1 > rel_tol`` are kept. An all-zero input gives empty outputs.
    """
    if not 0 < rel_tol < 1:
        raise NumericsError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    s_mat = np.asarray(snapshots, dtype=complex)
    if s_mat.ndim == 1:
        s_mat = s_mat[:, None]
    if s_mat.size == 0:
        raise NumericsError("snapshot matrix is empty")
    weights = np.asarray(weights, dtype=float)
    root = np.sqrt(weights)
    u, sigma, _ = np.linalg.svd(root[:, None] * s_mat, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros(0), np.zeros((s_mat.shape[0], 0), dtype=complex)
    keep = sigma / sigma[0] > rel_tol
    return sigma[keep], u[:, keep] / root[:, None]


def integrate_time(samples, dt: float, method: str = "trapezoid"):
    """Integrate uniformly spaced samples along axis 0.

    ``method="simpson"`` uses the composite Simpson rule and requires an odd
    number of samples.
    """
    y = np.asarray(samples)
    n = y.shape[0] if y.ndim else 0
    if n < 2:
        raise NumericsError("need at least two time samples")
    if method == "trapezoid":
        return scipy.integrate.trapezoid(y, dx=dt, axis=0)
    if method == "simpson":
        if n % 2 == 0:
            raise NumericsError("Simpson's rule needs an odd number of samples")
        return scipy.integrate.simpson(y, dx=dt, axis=0)
    raise NumericsError(f"unknown quadrature {method!r}")


def least_squares(a, b) -> np.ndarray:
    """Minimal-norm least-squares solution of ``a x = b``."""
    a = np.atleast_2d(np.asarray(a))
    if not np.any(a):
        raise NumericsError("least squares with a zero matrix")
    x, *_ = scipy.linalg.lstsq(a, np.asarray(b), lapack_driver="gelsd")
    return x


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_panels(edges, order: int = 8):
    """Composite Gauss-Legendre nodes and weights on consecutive ``edges``.

    ``edges`` may be decreasing; the weights then carry the sign of the
    orientation so that ``sum(w * f(t))`` is the oriented integral.
    Returns ``(nodes, weights, panel_index)``.
    """
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    xg, wg = _GL_CACHE[order]
    edges = np.asarray(edges, dtype=float)
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    panel = np.repeat(np.arange(left.size), order)
    return nodes, weights, panel
