"""Parabolic equations on an interval coupled by a piecewise-constant matrix potential.

Each component ``k`` carries a closed operator ``A_{S_k}``: a heat operator
``-grad^* S_k grad`` or a biharmonic operator ``-Lap s_k Lap`` with the
Neumann Laplacian ``Lap = -grad^* grad``. The coupled generator is
``C = diag(A_{S_1}, ..., A_{S_N}) + V`` where ``V`` acts pointwise.

The state vector is component-major: ``x[k*n + j]`` is component ``k`` at
node ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .closure import SplitClosureSystem
from .discretize import (
    Grid1D,
    PiecewiseConstant,
    check_ellipticity,
    constant_mode,
    pointwise_operator,
    sample_coefficient,
    staggered_gradient,
)
from .errors import DimensionError, HypothesisError
from .numkernel import (
    WeightedSpace,
    as_matrix,
    eig,
    expm,
    numerical_abscissa,
    w_orthonormalize,
)

__all__ = [
    "CoupledParabolicSpec",
    "CoupledModel",
    "VConditionVerdict",
    "build_coupled_operator",
    "check_v_dissipative",
    "check_v_condition",
    "predict_limit_projection",
    "simulate_and_compare",
]

KINDS = ("heat", "biharmonic")


@dataclass(frozen=True, eq=False)
class CoupledParabolicSpec:
    """Model data for ``N`` coupled parabolic equations on ``grid``.

    Parameters
    ----------
    n_components : int
    grid : Grid1D
    kind : {"heat", "biharmonic"}
    coefficients : sequence
        One scalar coefficient per component: a number, a callable or a
        :class:`PiecewiseConstant`. Heat coefficients are sampled at cell
        midpoints, biharmonic ones at nodes.
    potential : PiecewiseConstant or array_like
        ``N x N`` matrices, one per piece. A node lying exactly on a
        breakpoint belongs to the piece on its left. Every piece must
        contain at least one node.
    """

    n_components: int
    grid: Grid1D
    kind: str
    coefficients: tuple
    potential: object

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_components < 1:
            raise ValueError("n_components must be at least 1")
        coeffs = tuple(self.coefficients)
        if len(coeffs) != self.n_components:
            raise DimensionError(
                f"{len(coeffs)} coefficients for {self.n_components} components")
        object.__setattr__(self, "coefficients", coeffs)
        pot = self.potential
        if not isinstance(pot, PiecewiseConstant):
            pot = PiecewiseConstant((), (pot,), tie="left")
        elif pot.tie != "left":
            pot = PiecewiseConstant(pot.breakpoints, pot.values, tie="left")
        mats = tuple(as_matrix(v, "potential piece", square=True) for v in pot.values)
        if any(m.shape[0] != self.n_components for m in mats):
            raise DimensionError("potential pieces must be N x N")
        pot = PiecewiseConstant(pot.breakpoints, mats, tie="left")
        if any(not self.grid.a < t < self.grid.b for t in pot.breakpoints):
            raise ValueError("potential breakpoints must lie inside the interval")
        counts = np.bincount(pot.piece_index(self.grid.nodes), minlength=len(mats))
        if np.any(counts == 0):
            raise ValueError("every potential piece must contain at least one grid node")
        object.__setattr__(self, "potential", pot)

    @property
    def pieces(self):
        return self.potential.values

    def with_grid(self, grid):
        return CoupledParabolicSpec(self.n_components, grid, self.kind,
                                    self.coefficients, self.potential)


@dataclass(frozen=True, eq=False)
class CoupledModel:
    """Assembled coupled generator together with its closure blocks."""

    c: np.ndarray
    space: WeightedSpace
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    s: np.ndarray
    space2: WeightedSpace
    blocks: tuple = field(default=())

    def as_split_system(self):
        return SplitClosureSystem(self.a11, self.a12, self.a21, self.s, self.space, self.space2)


def build_coupled_operator(spec, nu_tol=0.0):
    """Assemble ``C = diag(A_{S_k}) + V`` and the matching split blocks.

    Raises
    ------
    HypothesisError
        If a coefficient is not uniformly elliptic at some sample point.
    """
    grid = spec.grid
    n = grid.n_nodes
    pair = staggered_gradient(grid)
    wn = pair.w_nodes
    a12s, a21s, ss, w2s, blocks = [], [], [], [], []
    for k, coeff in enumerate(spec.coefficients):
        if spec.kind == "heat":
            s_k = sample_coefficient(coeff, grid, "cells")
            a21_k = pair.d_plus
            a12_k = pair.divergence
            w2 = pair.w_cells
        else:
            s_k = sample_coefficient(coeff, grid, "nodes")
            lap = pair.neumann_laplacian()
            a21_k = lap
            a12_k = -lap
            w2 = wn
        nu = check_ellipticity(np.diag(s_k).reshape(-1, 1, 1))
        if not nu > nu_tol:
            raise HypothesisError(
                f"coefficient of component {k} is not elliptic (min Re = {nu:.3e})")
        a12s.append(a12_k)
        a21s.append(a21_k)
        ss.append(s_k)
        w2s.append(w2.weight)
        blocks.append(a12_k @ s_k @ a21_k)
    nc = spec.n_components
    v_samples = np.array(spec.potential(grid.nodes))
    v_op = pointwise_operator(v_samples)
    c = sla.block_diag(*blocks) + v_op
    space = WeightedSpace(nc * n, np.kron(np.eye(nc), wn.weight))
    space2 = WeightedSpace(sum(w.shape[0] for w in w2s), sla.block_diag(*w2s))
    return CoupledModel(
        c=c,
        space=space,
        a11=v_op,
        a12=sla.block_diag(*a12s),
        a21=sla.block_diag(*a21s),
        s=sla.block_diag(*ss),
        space2=space2,
        blocks=tuple(blocks),
    )


def check_v_dissipative(spec, tol=1e-12):
    """One flag per potential piece: Euclidean numerical abscissa ``<= tol``."""
    return [numerical_abscissa(v) <= tol for v in spec.pieces]


@dataclass
class VConditionVerdict:
    holds: bool
    failing_beta: float | None = None
    witness: np.ndarray | None = None
    per_piece_dissipative: list = field(default_factory=list)

    def as_dict(self):
        w = None if self.witness is None else [[z.real, z.imag] for z in self.witness]
        return {
            "holds": self.holds,
            "failing_beta": self.failing_beta,
            "witness": w,
            "per_piece_dissipative": list(self.per_piece_dissipative),
        }


def _common_kernel(pieces, beta, tol):
    """Intersection of ``ker(i beta - V_j)``; ranks are judged against the size of the data."""
    n = pieces[0].shape[0]
    stacked = np.vstack([1j * beta * np.eye(n) - v for v in pieces])
    scale = max(abs(beta), max(np.linalg.norm(v, 2) for v in pieces), 1.0)
    _, sv, vh = np.linalg.svd(stacked)
    rank = int(np.sum(sv > tol * scale))
    return vh[rank:].conj().T


def check_v_condition(spec, tol=1e-10):
    """Decide whether the pieces have a common eigenvector for a nonzero ``i beta``.

    Candidates ``beta`` are taken from the first piece: a vector in every
    piece's ``ker(i beta - V_j)`` is in particular an eigenvector of the
    first piece, so no other ``beta`` can fail.
    """
    pieces = spec.pieces
    if not pieces:
        raise ValueError("no potential pieces")
    verdict = VConditionVerdict(holds=True, per_piece_dissipative=check_v_dissipative(spec))
    v0 = pieces[0]
    scale = max(np.linalg.norm(v0, 2), 1.0)
    cands = []
    for lam in np.linalg.eigvals(v0):
        if abs(lam.real) <= 1e-8 * scale and abs(lam.imag) > 1e-8 * scale:
            if not any(abs(lam.imag - b) <= 1e-8 * scale for b in cands):
                cands.append(float(lam.imag))
    for beta in sorted(cands, key=lambda b: (abs(b), -b)):
        basis = _common_kernel(pieces, beta, tol)
        if basis.shape[1]:
            w = basis[:, 0]
            k = int(np.flatnonzero(np.abs(w) > 1e-8 * np.abs(w).max())[0])
            w = w * (abs(w[k]) / w[k])
            verdict.holds = False
            verdict.failing_beta = beta
            verdict.witness = w / np.linalg.norm(w)
            break
    return verdict


def predict_limit_projection(spec, tol=1e-10):
    """W-orthogonal projection onto ``{1 ⊗ c : V_j c = 0 for every piece}``."""
    n = spec.grid.n_nodes
    model_space = WeightedSpace(
        spec.n_components * n,
        np.kron(np.eye(spec.n_components), np.diag(spec.grid.trapezoid_weights())))
    kern = _common_kernel(spec.pieces, 0.0, tol)
    if kern.shape[1] == 0:
        return np.zeros((model_space.dim, model_space.dim), dtype=complex)
    modes = np.column_stack([constant_mode(kern[:, j], n) for j in range(kern.shape[1])])
    k = w_orthonormalize(modes, model_space)
    return k @ k.conj().T @ model_space.weight


def simulate_and_compare(spec, t_end=None, samples=5, v_tol=1e-10):
    """Compare ``exp(tC)`` with the predicted limit.

    When the potential condition holds, reports ``||exp(TC) - P||_2`` at
    ``T = 60/gap`` (or ``t_end``). Otherwise evolves the planted
    oscillatory mode ``x0 = 1 ⊗ witness`` and reports its norm drift and
    its distance from ``P x0`` at ``samples`` well-separated times.
    """
    model = build_coupled_operator(spec)
    c = model.c
    p = predict_limit_projection(spec)
    verdict = check_v_condition(spec, v_tol)
    report, _ = eig(c, check=False)
    vals = report.eigenvalues
    scale = np.linalg.norm(c, 2)
    nonzero = vals[np.abs(vals) > 1e-8 * scale]
    gap = float(-nonzero.real.max()) if nonzero.size else np.inf
    out = {"v_condition": verdict.holds, "gap": gap}
    if verdict.holds:
        t = 60.0 / gap if t_end is None else float(t_end)
        out.update(converges=True, t=t, distance=float(np.linalg.norm(expm(t * c) - p, 2)))
        return out
    x0 = constant_mode(verdict.witness, spec.grid.n_nodes)
    nrm0 = model.space.norm(x0)
    period = 2 * np.pi / abs(verdict.failing_beta)
    t_max = 10 * period if t_end is None else float(t_end)
    times = np.linspace(t_max / samples, t_max, samples)
    norms, dists = [], []
    for t in times:
        xt = expm(t * c) @ x0
        norms.append(model.space.norm(xt))
        dists.append(model.space.norm(xt - p @ x0))
    out.update(
        converges=False,
        beta=verdict.failing_beta,
        times=times.tolist(),
        norm_drift=float(np.max(np.abs(np.array(norms) - nrm0)) / nrm0),
        min_distance=float(min(dists) / nrm0),
    )
    return out
