"""Structure-preserving finite differences on an interval.

Boundary conditions are never imposed by overwriting stencil rows. The
free operator is instead restricted (Galerkin projection in the weighted
inner product) to the kernel of the boundary-constraint rows, so that
discrete energy identities carry over to the constrained operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, HypothesisError
from .numkernel import (
    DEFAULT_RANK_TOL,
    WeightedSpace,
    as_matrix,
    as_vector,
    null_space,
    w_orthonormalize,
    weighted_adjoint,
)

__all__ = [
    "Grid1D",
    "SBPOperator",
    "StaggeredPair",
    "ConstrainedOperator",
    "PiecewiseConstant",
    "sbp_first_derivative",
    "staggered_gradient",
    "restrict",
    "sample_coefficient",
    "sample_matrix_field",
    "pointwise_operator",
    "kron_identity",
    "constant_mode",
    "check_ellipticity",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``n_nodes`` nodes on ``[a, b]``."""

    a: float
    b: float
    n_nodes: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if self.n_nodes < 2:
            raise ValueError("a grid needs at least 2 nodes")

    @property
    def h(self):
        return (self.b - self.a) / (self.n_nodes - 1)

    @property
    def nodes(self):
        return np.linspace(self.a, self.b, self.n_nodes)

    @property
    def cells(self):
        """Cell midpoints."""
        x = self.nodes
        return 0.5 * (x[:-1] + x[1:])

    def trapezoid_weights(self):
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def refined(self, n_nodes):
        return Grid1D(self.a, self.b, n_nodes)


@dataclass(frozen=True, eq=False)
class SBPOperator:
    d: np.ndarray
    w: np.ndarray
    e0: np.ndarray
    eN: np.ndarray

    @property
    def space(self):
        return WeightedSpace(self.w.shape[0], self.w)

    def sbp_residual(self):
        """Relative residual of ``W D + D^* W = eN eN^* - e0 e0^*``."""
        wd = self.w @ self.d
        bnd = np.outer(self.eN, self.eN) - np.outer(self.e0, self.e0)
        return float(np.linalg.norm(wd + wd.conj().T - bnd) / np.linalg.norm(wd))


def sbp_first_derivative(grid):
    """Second-order SBP first derivative: centered interior, one-sided boundary rows."""
    n = grid.n_nodes
    if n < 3:
        raise ValueError("the SBP operator needs at least 3 nodes")
    h = grid.h
    d = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    d[idx, idx - 1] = -0.5 / h
    d[idx, idx + 1] = 0.5 / h
    d[0, :2] = [-1.0 / h, 1.0 / h]
    d[-1, -2:] = [-1.0 / h, 1.0 / h]
    e0 = np.zeros(n)
    e0[0] = 1.0
    eN = np.zeros(n)
    eN[-1] = 1.0
    return SBPOperator(d.astype(complex), np.diag(grid.trapezoid_weights()).astype(complex), e0, eN)


@dataclass(frozen=True, eq=False)
class StaggeredPair:
    """Forward difference from nodes to cells with trapezoid / midpoint weights."""

    d_plus: np.ndarray
    w_nodes: WeightedSpace
    w_cells: WeightedSpace

    @cached_property
    def divergence(self):
        """``-adjoint(d_plus)``: the discrete divergence with Neumann structure."""
        return -weighted_adjoint(self.d_plus, self.w_nodes, self.w_cells)

    def neumann_laplacian(self):
        return self.divergence @ self.d_plus


def staggered_gradient(grid):
    n = grid.n_nodes
    h = grid.h
    d = (np.eye(n - 1, n, 1) - np.eye(n - 1, n)) / h
    return StaggeredPair(
        d.astype(complex),
        WeightedSpace.diagonal(grid.trapezoid_weights()),
        WeightedSpace.diagonal(np.full(n - 1, h)),
    )


@dataclass(frozen=True, eq=False)
class ConstrainedOperator:
    """A free operator restricted to the kernel of boundary-constraint rows.

    ``k_basis`` is W-orthonormal, so ``a_restricted`` is the matrix of the
    compressed operator in an orthonormal basis and Euclidean norms of
    restricted coordinates equal W-norms of the lifted vectors.
    """

    a_free: np.ndarray
    constraints: np.ndarray
    space: WeightedSpace
    k_basis: np.ndarray
    a_restricted: np.ndarray

    @property
    def dim(self):
        return self.k_basis.shape[1]

    def lift(self, y):
        return self.k_basis @ y

    def coordinates(self, x):
        """W-orthogonal projection coefficients of ``x`` onto the constrained subspace."""
        return self.k_basis.conj().T @ (self.space.weight @ x)

    def constraint_residual(self):
        return float(np.linalg.norm(self.constraints @ self.k_basis))

    def orthonormality_residual(self):
        g = self.space.gram(self.k_basis)
        return float(np.linalg.norm(g - np.eye(self.dim)))


def restrict(a_free, constraints, space=None, tol=DEFAULT_RANK_TOL):
    """Galerkin restriction of ``a_free`` to ``ker(constraints)``.

    Raises
    ------
    HypothesisError
        If the constraint rows are not of full row rank.
    DimensionError
        If the constraints leave no degrees of freedom.
    """
    a = as_matrix(a_free, "a_free", square=True)
    n = a.shape[0]
    space = WeightedSpace(n) if space is None else space
    if space.dim != n:
        raise DimensionError("space does not match the operator")
    c = np.zeros((0, n), dtype=complex) if constraints is None else as_matrix(
        constraints, "constraints")
    if c.shape[1] != n:
        raise DimensionError(f"constraints have {c.shape[1]} columns, expected {n}")
    k = c.shape[0]
    if k >= n:
        raise DimensionError(f"{k} constraints leave no freedom in dimension {n}")
    if k:
        sv = sla.svdvals(c)
        if sv[-1] <= tol * sv[0]:
            raise HypothesisError(
                f"constraint rows are rank deficient (sigma_min/sigma_max = {sv[-1] / sv[0]:.2e})")
        basis = null_space(c, tol)
    else:
        basis = np.eye(n, dtype=complex)
    kb = w_orthonormalize(basis, space)
    a_r = kb.conj().T @ space.weight @ a @ kb
    return ConstrainedOperator(a, c, space, kb, a_r)


@dataclass(frozen=True)
class PiecewiseConstant:
    """Piecewise-constant function given by interior breakpoints and one value per piece.

    ``tie`` decides where a point lying exactly on a breakpoint goes:
    ``"right"`` (default) makes pieces left-closed ``[t_i, t_{i+1})``,
    ``"left"`` assigns it to the piece on the left.
    """

    breakpoints: tuple
    values: tuple
    tie: str = "right"

    def __post_init__(self):
        bps = tuple(float(t) for t in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) != len(bps) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if self.tie not in ("left", "right"):
            raise ValueError("tie must be 'left' or 'right'")

    def piece_index(self, x):
        return np.searchsorted(np.asarray(self.breakpoints), np.asarray(x, dtype=float),
                               side="left" if self.tie == "left" else "right")

    def __call__(self, x):
        idx = np.atleast_1d(self.piece_index(x))
        return [self.values[i] for i in idx]


def _points(grid, location):
    if location == "nodes":
        return grid.nodes
    if location == "cells":
        return grid.cells
    raise ValueError(f"location must be 'nodes' or 'cells', got {location!r}")


def _evaluate(values, pts):
    if isinstance(values, PiecewiseConstant):
        return values(pts)
    if callable(values):
        return [values(x) for x in pts]
    return [values] * len(pts)


def sample_coefficient(values, grid, location="nodes"):
    """Diagonal matrix of scalar samples at nodes or cell midpoints.

    ``values`` may be a scalar, a callable of one real variable or a
    :class:`PiecewiseConstant`.
    """
    pts = _points(grid, location)
    samples = np.array(_evaluate(values, pts), dtype=complex).reshape(-1)
    if samples.shape[0] != pts.shape[0] or not np.all(np.isfinite(samples)):
        raise ValueError("coefficient must give one finite scalar per sample point")
    return np.diag(samples)


def sample_matrix_field(values, grid, location="nodes", size=None):
    """Array ``(n_points, m, m)`` of matrix samples of a matrix-valued coefficient."""
    pts = _points(grid, location)
    samples = np.array([as_matrix(v, "coefficient sample", square=True)
                        for v in _evaluate(values, pts)])
    if size is not None and samples.shape[1] != size:
        raise DimensionError(f"coefficient samples are {samples.shape[1]}x{samples.shape[1]}, "
                             f"expected {size}x{size}")
    return samples


def pointwise_operator(samples):
    """Block operator acting pointwise in component-major ordering.

    For ``samples[j] = M(x_j)`` of size ``m x m`` the result maps
    ``u[a*N + j]`` to ``sum_b M_ab(x_j) u[b*N + j]``.
    """
    samples = np.asarray(samples, dtype=complex)
    npts, m, _ = samples.shape
    out = np.zeros((m * npts, m * npts), dtype=complex)
    idx = np.arange(npts)
    for a in range(m):
        for b in range(m):
            out[a * npts + idx, b * npts + idx] = samples[:, a, b]
    return out


def kron_identity(mat, n):
    """``kron(mat, I_n)``: a constant matrix acting pointwise in component-major order."""
    return np.kron(np.asarray(mat, dtype=complex), np.eye(n))


def constant_mode(vec, n):
    """``vec ⊗ 1``: a spatially constant field in component-major ordering."""
    return np.kron(as_vector(vec, "vec"), np.ones(n))


def check_ellipticity(samples):
    """Smallest eigenvalue of the Hermitian parts of the samples (pointwise coercivity)."""
    samples = np.asarray(samples, dtype=complex)
    herm = 0.5 * (samples + np.conj(np.swapaxes(samples, 1, 2)))
    return float(np.min(np.linalg.eigvalsh(herm)))

