"""Dense complex linear algebra over weighted inner-product spaces.

Every operator is a dense ``complex128`` numpy array. Inner products are
``<x, y>_W = y^* W x`` for a Hermitian positive definite weight ``W``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, DimensionError, NonFiniteError

__all__ = [
    "DEFAULT_RANK_TOL",
    "WeightedSpace",
    "SpectralReport",
    "as_matrix",
    "as_vector",
    "hermitian_part",
    "scale_of",
    "eig",
    "null_space",
    "weighted_adjoint",
    "numerical_abscissa",
    "pencil_extreme",
    "principal_angle",
    "w_orthonormalize",
    "expm",
]

DEFAULT_RANK_TOL = 1e-10


def as_matrix(a, name="matrix", square=False):
    """Validate ``a`` as a finite 2-D complex array and return a copy."""
    arr = np.array(a, dtype=complex, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return arr


def as_vector(x, name="vector", dim=None):
    arr = np.array(x, dtype=complex, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {dim}")
    return arr


def hermitian_part(a):
    return 0.5 * (a + a.conj().T)


def scale_of(a):
    """Spectral norm used to make tolerances relative; never below 1e-300."""
    a = np.asarray(a)
    if a.size == 0:
        return 1.0
    return max(float(np.linalg.norm(a, 2)), 1e-300)


@dataclass(frozen=True, eq=False)
class WeightedSpace:
    """``C^dim`` with the inner product ``<x, y> = y^* W x``.

    Parameters
    ----------
    dim : int
        Dimension of the space.
    weight : array_like, optional
        Hermitian positive definite ``dim x dim`` matrix. Defaults to the
        identity.
    """

    dim: int
    weight: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dim < 0:
            raise DimensionError("dim must be nonnegative")
        w = np.eye(self.dim, dtype=complex) if self.weight is None else as_matrix(
            self.weight, "weight", square=True)
        if w.shape[0] != self.dim:
            raise DimensionError(f"weight has shape {w.shape}, expected dim {self.dim}")
        herm_err = np.linalg.norm(w - w.conj().T)
        if herm_err > 1e-13 * max(np.linalg.norm(w), 1.0):
            raise DimensionError("weight is not Hermitian")
        w = hermitian_part(w)
        object.__setattr__(self, "weight", w)
        if self.dim and np.linalg.eigvalsh(w)[0] <= 0:
            raise DimensionError("weight is not positive definite")

    @classmethod
    def identity(cls, dim):
        return cls(dim)

    @classmethod
    def diagonal(cls, entries):
        entries = np.asarray(entries, dtype=float)
        return cls(entries.size, np.diag(entries))

    @cached_property
    def is_identity(self):
        return bool(np.array_equal(self.weight, np.eye(self.dim)))

    @cached_property
    def chol(self):
        """Lower Cholesky factor ``L`` with ``W = L L^*``."""
        return np.linalg.cholesky(self.weight)

    def inner(self, x, y):
        return complex(np.vdot(y, self.weight @ x))

    def norm(self, x):
        x = np.asarray(x)
        return float(np.sqrt(max(np.vdot(x, self.weight @ x).real, 0.0)))

    def gram(self, u, v=None):
        """Matrix of inner products ``U^* W V``."""
        v = u if v is None else v
        return u.conj().T @ self.weight @ v

    def product(self, other):
        """Orthogonal product space with block diagonal weight."""
        return WeightedSpace(self.dim + other.dim, sla.block_diag(self.weight, other.weight))

    def scaled(self, factor):
        return WeightedSpace(self.dim, factor * self.weight)


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    max_real_part: float
    peripheral: np.ndarray
    re_tol: float


def _sort_eigs(vals):
    # deterministic order: descending real part, then imaginary part
    return np.lexsort((np.round(vals.imag, 12), -np.round(vals.real, 12)))


def eig(a, re_tol=None, check=True):
    """Eigenvalues and right eigenvectors of a square matrix.

    Returns ``(report, vectors)``; columns of ``vectors`` have unit
    Euclidean norm and are ordered like ``report.eigenvalues``. ``re_tol``
    defaults to ``1e-8 * ||A||``.
    """
    a = as_matrix(a, "A", square=True)
    n = a.shape[0]
    if n == 0:
        empty = np.zeros(0, dtype=complex)
        return SpectralReport(empty, -np.inf, empty, 0.0 if re_tol is None else re_tol), \
            np.zeros((0, 0), dtype=complex)
    try:
        vals, vecs = sla.eig(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    order = _sort_eigs(vals)
    vals, vecs = vals[order], vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    nrm = scale_of(a)
    if check:
        resid = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
        bad = resid > 1e-10 * nrm
        if np.any(bad):
            raise ConvergenceError(
                f"eigenvector residual {resid.max():.3e} exceeds 1e-10*||A||")
    tol = 1e-8 * nrm if re_tol is None else float(re_tol)
    per = vals[np.abs(vals.real) <= tol]
    return SpectralReport(vals, float(vals.real.max()), per, tol), vecs


def null_space(a, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of ``ker A``; singular values below ``tol*sigma_max`` count as zero."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_matrix(a, "A")
    m, n = a.shape
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if m == 0:
        return np.eye(n, dtype=complex)
    u, s, vh = sla.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(n, dtype=complex)
    rank = int(np.sum(s > tol * smax))
    return vh[rank:].conj().T


def weighted_adjoint(a, dom, codom):
    """The ``B`` with ``<Ax, y>_codom = <x, By>_dom``, i.e. ``W_dom^{-1} A^* W_codom``."""
    a = as_matrix(a, "A")
    if a.shape != (codom.dim, dom.dim):
        raise DimensionError(
            f"A has shape {a.shape}, expected ({codom.dim}, {dom.dim})")
    rhs = a.conj().T @ codom.weight
    if dom.is_identity:
        return rhs
    return sla.cho_solve((dom.chol, True), rhs)


def pencil_extreme(h, space, which="max"):
    """Extreme eigenvalue of the Hermitian pencil ``(h, W)``."""
    if space.dim == 0:
        return -np.inf if which == "max" else np.inf
    vals = sla.eigh(hermitian_part(h), space.weight, eigvals_only=True)
    return float(vals[-1] if which == "max" else vals[0])


def numerical_abscissa(a, space=None):
    """``sup Re<Ah,h>_W / <h,h>_W``; ``A`` is W-dissipative iff this is <= 0."""
    a = as_matrix(a, "A", square=True)
    space = WeightedSpace(a.shape[0]) if space is None else space
    if space.dim != a.shape[0]:
        raise DimensionError("space dimension does not match A")
    return pencil_extreme(space.weight @ a, space, "max")


def w_orthonormalize(basis, space):
    """W-orthonormal basis of ``span(basis)`` (Cholesky QR, applied twice).

    Assumes the columns are linearly independent; for a Euclidean
    orthonormal input the Gram matrix is as well conditioned as ``W``.
    """
    q = np.array(basis, dtype=complex)
    if q.shape[1] == 0:
        return q
    for _ in range(2):
        g = hermitian_part(space.gram(q))
        r = np.linalg.cholesky(g)
        q = sla.solve_triangular(r, q.conj().T, lower=True).conj().T
    return q


def principal_angle(u, v, space=None):
    """Largest principal angle between ``span(U)`` and ``span(V)`` in ``[0, pi/2]``.

    Both bases must be W-orthonormal with equal column counts.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape[1] != v.shape[1]:
        raise DimensionError(
            f"subspaces have different dimensions {u.shape[1]} and {v.shape[1]}")
    if u.shape[1] == 0:
        return 0.0
    if space is not None and not space.is_identity:
        lt = space.chol.conj().T
        u, v = lt @ u, lt @ v
    return float(np.max(sla.subspace_angles(u, v)))


def expm(a):
    """Matrix exponential by scaling and squaring with Pade approximation."""
    return sla.expm(as_matrix(a, "A", square=True))
