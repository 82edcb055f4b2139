"""Second-order port-Hamiltonian systems with dissipation on ``(0, 1)``.

The generator is ``L = (P1 d + P0 + (G1 d + G0) S (G1^* d - G0^*)) H``
with boundary conditions ``tilde_wb (Hx(1), xp(1), Hx(0), xp(0)) = 0``
where ``xp = S (G1^* d - G0^*) H x``. The extended first-order operator
acts on ``(x, xp)`` as ``(P1ext d + P0ext) diag(H, I)``.

Discretization uses the SBP derivative per component with component-major
ordering (``x[a*N + j]`` is component ``a`` at node ``j``). Both ``L`` and
the extended operator are restricted to the kernel of the discrete
boundary rows. The state weight on ``x`` is ``1/2 * trapezoid * H`` and on
``xp`` ``1/2 * trapezoid``; with the same factor on both parts the discrete
extended operator satisfies the exact energy identity
``Re<A u, u> = 1/4 [y^* P1ext y]_0^1`` with ``y = diag(H, I) u``.

The coupled wave-heat system on ``(0, 2)`` is built on two grids, one per
subinterval, joined by interface constraint rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .discretize import (
    Grid1D,
    check_ellipticity,
    pointwise_operator,
    restrict,
    sample_coefficient,
    sample_matrix_field,
    sbp_first_derivative,
)
from .errors import DimensionError, HypothesisError
from .numkernel import WeightedSpace, as_matrix, hermitian_part, null_space

__all__ = [
    "PHSystemSpec",
    "PHSModel",
    "WaveHeatSpec",
    "WaveHeatModel",
    "BoundaryCheckReport",
    "SIGMA",
    "assemble_p_ext",
    "compute_w_b",
    "generation_check",
    "heat_bc_sigma_matrix",
    "heat_stability_conditions",
    "boundary_check",
    "discretize_L",
    "heat_spec",
    "heat_general_bc",
    "wave_heat_build",
]

SIGMA = np.array([[0.0, 1.0], [1.0, 0.0]])
RANK_TOL = 1e-10


def _rank(m, tol=RANK_TOL):
    sv = sla.svdvals(m)
    return int(np.sum(sv > tol * sv[0])) if sv.size and sv[0] > 0 else 0


@dataclass(frozen=True, eq=False)
class PHSystemSpec:
    """Parameters of the dissipative port-Hamiltonian operator.

    ``hamiltonian`` and ``s`` are constant matrices, callables returning
    matrices, or :class:`~closurekit.discretize.PiecewiseConstant` with
    matrix values. Validation samples them at the grid nodes and records
    the pointwise bounds ``m`` and ``nu``.
    """

    p0: np.ndarray
    p1: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    hamiltonian: object
    s: object
    tilde_wb: np.ndarray
    grid: Grid1D
    m: float = field(init=False)
    nu: float = field(init=False)

    def __post_init__(self):
        p0 = as_matrix(self.p0, "p0", square=True)
        p1 = as_matrix(self.p1, "p1", square=True)
        n = p0.shape[0]
        g0 = as_matrix(self.g0, "g0")
        g1 = as_matrix(self.g1, "g1")
        r = g1.shape[1]
        if p1.shape != (n, n) or g0.shape != (n, r) or g1.shape != (n, r):
            raise DimensionError("p0, p1 must be n x n and g0, g1 n x r")
        wb = as_matrix(self.tilde_wb, "tilde_wb")
        if wb.shape != (n + r, 2 * (n + r)):
            raise DimensionError(f"tilde_wb must be {(n + r, 2 * (n + r))}, got {wb.shape}")
        if np.linalg.norm(p1 - p1.conj().T) > 1e-13 * max(np.linalg.norm(p1), 1.0):
            raise HypothesisError("P1 is not self-adjoint")
        if np.linalg.norm(p0 + p0.conj().T) > 1e-13 * max(np.linalg.norm(p0), 1.0):
            raise HypothesisError("P0 is not skew-adjoint")
        if _rank(wb) != n + r:
            raise HypothesisError("tilde_wb does not have full rank")
        if self.grid.a != 0.0 or self.grid.b != 1.0:
            raise ValueError("the port-Hamiltonian model lives on (0, 1)")
        for name, val in (("p0", p0), ("p1", p1), ("g0", g0), ("g1", g1), ("tilde_wb", wb)):
            object.__setattr__(self, name, val)
        hs = self.h_samples()
        if np.max(np.abs(hs - np.conj(np.swapaxes(hs, 1, 2)))) > 1e-13 * max(np.abs(hs).max(), 1):
            raise HypothesisError("H is not Hermitian at every sample")
        m = check_ellipticity(hs)
        nu = check_ellipticity(self.s_samples())
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "nu", nu)
        if not m > 0:
            raise HypothesisError(f"H is not uniformly positive (m = {m:.3e})")
        if not nu > 0:
            raise HypothesisError(f"Re S is not uniformly positive (nu = {nu:.3e})")

    @property
    def n(self):
        return self.p0.shape[0]

    @property
    def r(self):
        return self.g1.shape[1]

    def h_samples(self):
        return sample_matrix_field(self.hamiltonian, self.grid, "nodes", self.n)

    def s_samples(self):
        return sample_matrix_field(self.s, self.grid, "nodes", self.r)

    def with_grid(self, grid):
        return PHSystemSpec(self.p0, self.p1, self.g0, self.g1, self.hamiltonian, self.s,
                            self.tilde_wb, grid)


def assemble_p_ext(spec):
    """``P1ext = [[P1, G1], [G1^*, 0]]`` and ``P0ext = [[P0, G0], [-G0^*, 0]]``."""
    r = spec.r
    z = np.zeros((r, r), dtype=complex)
    p1ext = np.block([[spec.p1, spec.g1], [spec.g1.conj().T, z]])
    p0ext = np.block([[spec.p0, spec.g0], [-spec.g0.conj().T, z]])
    return p1ext, p0ext


def compute_w_b(tilde_wb, p1ext):
    """``sqrt(2) tilde_wb [[P, -P], [I, I]]^{-1}`` using the closed-form block inverse.

    Raises
    ------
    HypothesisError
        If ``p1ext`` is singular; the boundary flow/effort transformation
        requires it to be invertible.
    """
    p = as_matrix(p1ext, "p1ext", square=True)
    wb = as_matrix(tilde_wb, "tilde_wb")
    k = p.shape[0]
    if wb.shape[1] != 2 * k:
        raise DimensionError("tilde_wb and p1ext sizes disagree")
    if _rank(p, 1e-12) < k:
        raise HypothesisError("P1ext is singular; W_B is undefined")
    pinv = np.linalg.inv(p)
    eye = np.eye(k)
    inv = 0.5 * np.block([[pinv, eye], [-pinv, eye]])
    return np.sqrt(2.0) * wb @ inv


def generation_check(wb, tol=1e-12):
    """``W_B [[0, I], [I, 0]] W_B^*`` is PSD; returns ``(ok, min eigenvalue)``."""
    wb = as_matrix(wb, "wb")
    k = wb.shape[1] // 2
    sig = np.block([[np.zeros((k, k)), np.eye(k)], [np.eye(k), np.zeros((k, k))]])
    prod = hermitian_part(wb @ sig @ wb.conj().T)
    lam = float(np.linalg.eigvalsh(prod)[0])
    scale = max(np.linalg.norm(wb, 2) ** 2, 1e-300)
    return lam >= -tol * scale, lam


def _check_heat_wb(tilde_wb):
    wb = as_matrix(tilde_wb, "tilde_wb")
    if wb.shape != (2, 4):
        raise DimensionError(f"heat boundary matrix must be 2 x 4, got {wb.shape}")
    if _rank(wb) != 2:
        raise HypothesisError("heat boundary matrix must have rank 2")
    return wb


def heat_bc_sigma_matrix(tilde_wb, tol=1e-12):
    """``W1 sigma W1^* - W0 sigma W0^*`` with PSD and PD verdicts.

    Returns ``(matrix, psd, pd)``.
    """
    wb = _check_heat_wb(tilde_wb)
    w1, w0 = wb[:, :2], wb[:, 2:]
    mat = w1 @ SIGMA @ w1.conj().T - w0 @ SIGMA @ w0.conj().T
    lam = np.linalg.eigvalsh(hermitian_part(mat))
    scale = max(np.linalg.norm(wb, 2) ** 2, 1e-300)
    return mat, bool(lam[0] >= -tol * scale), bool(lam[0] > tol * scale)


_Q1 = 0.5 * np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, -1, 0]], dtype=float)
_Q2 = {1: np.diag([1.0, 1.0, 0.0, 0.0]), 0: np.diag([0.0, 0.0, 1.0, 1.0])}


def _form_condition(q1, q2, tol):
    """Does ``q1 <= -c q2`` hold for some ``c > 0``? Returns ``(holds, best c)``."""
    lam, vec = np.linalg.eigh(q1)
    scale = max(np.abs(lam).max(), np.linalg.eigvalsh(q2).max(), 1e-300)
    if lam[-1] > tol * scale:
        return False, 0.0
    zero = np.abs(lam) <= tol * scale
    nullb = vec[:, zero]
    if nullb.size and np.linalg.norm(nullb.conj().T @ q2 @ nullb) > tol * scale:
        return False, 0.0
    rng = vec[:, ~zero]
    if rng.shape[1] == 0:
        return True, np.inf
    # best c = 1 / max of q2/(-q1) on range(q1)
    mq1 = -(rng.conj().T @ q1 @ rng)
    mq2 = hermitian_part(rng.conj().T @ q2 @ rng)
    top = float(sla.eigh(mq2, hermitian_part(mq1), eigvals_only=True)[-1])
    return True, (np.inf if top <= tol else 1.0 / top)


def heat_stability_conditions(tilde_wb, tol=1e-12):
    """The three sufficient conditions for exponential stability of the heat semigroup.

    Conditions 1 and 0 ask for ``c > 0`` with
    ``Re(b1* b2 - b3* b4) <= -c (|b1|^2 + |b2|^2)`` (respectively
    ``|b3|^2 + |b4|^2``) on ``ker tilde_wb``; they are decided exactly by
    semidefiniteness plus a null-space inclusion. Condition 3 is positive
    definiteness of the sigma matrix.
    """
    wb = _check_heat_wb(tilde_wb)
    k = null_space(wb)
    q1 = hermitian_part(k.conj().T @ _Q1 @ k)
    out = {}
    for key, idx in (("cond1", 1), ("cond2", 0)):
        q2 = hermitian_part(k.conj().T @ _Q2[idx] @ k)
        holds, c = _form_condition(q1, q2, 1e-10)
        out[key] = {"holds": bool(holds), "c": float(c)}
    _, _, pd = heat_bc_sigma_matrix(wb, tol)
    out["cond3"] = {"holds": pd}
    return out


@dataclass
class BoundaryCheckReport:
    p1ext_invertible: bool
    wb: np.ndarray | None
    generation_psd: bool
    generation_min_eig: float
    g1_rank_n: bool
    heat_conditions: dict | None = None
    sigma_matrix: np.ndarray | None = None

    def as_dict(self):
        def cplx(m):
            return None if m is None else [[[z.real, z.imag] for z in row] for row in m]
        return {
            "p1ext_invertible": self.p1ext_invertible,
            "wb": cplx(self.wb),
            "generation_psd": self.generation_psd,
            "generation_min_eig": self.generation_min_eig,
            "g1_rank_n": self.g1_rank_n,
            "heat_conditions": self.heat_conditions,
            "sigma_matrix": cplx(self.sigma_matrix),
        }


def boundary_check(spec):
    """Invertibility of P1ext, W_B, the generation test and the rank condition on G1."""
    p1ext, _ = assemble_p_ext(spec)
    inv = _rank(p1ext, 1e-12) == p1ext.shape[0]
    wb, psd, lam = None, False, float("nan")
    if inv:
        wb = compute_w_b(spec.tilde_wb, p1ext)
        psd, lam = generation_check(wb)
    rep = BoundaryCheckReport(inv, wb, bool(psd), lam, _rank(spec.g1) == spec.n)
    if spec.n == 1 and spec.r == 1:
        rep.heat_conditions = heat_stability_conditions(spec.tilde_wb)
        rep.sigma_matrix = heat_bc_sigma_matrix(spec.tilde_wb)[0]
    return rep


@dataclass(frozen=True, eq=False)
class PHSModel:
    """Matched discrete ``A_S = L`` and ``A_ext`` with their free blocks."""

    a_s: object
    a_ext: object
    a21: np.ndarray
    s_op: np.ndarray
    space1: WeightedSpace
    product_space: WeightedSpace


def discretize_L(spec, with_ext=True):
    """Discrete ``L`` and the matching extended operator, both restricted to their boundary kernels.

    Raises
    ------
    HypothesisError
        If ``with_ext`` is set and ``P1ext`` is singular.
    """
    n, r = spec.n, spec.r
    grid = spec.grid
    npts = grid.n_nodes
    sbp = sbp_first_derivative(grid)
    d, eye = sbp.d, np.eye(npts)
    h_op = pointwise_operator(spec.h_samples())
    s_op = pointwise_operator(spec.s_samples())
    a12 = np.kron(spec.g1, d) + np.kron(spec.g0, eye)
    a21 = (np.kron(spec.g1.conj().T, d) - np.kron(spec.g0.conj().T, eye)) @ h_op
    l_free = (np.kron(spec.p1, d) + np.kron(spec.p0, eye)) @ h_op + a12 @ s_op @ a21
    wt = np.diag(grid.trapezoid_weights())
    w1 = 0.5 * np.kron(np.eye(n), wt) @ h_op
    space1 = WeightedSpace(n * npts, hermitian_part(w1))
    space2 = WeightedSpace(r * npts, 0.5 * np.kron(np.eye(r), wt))

    def trace(comp_count, values, node):
        rows = np.zeros((comp_count, values.shape[1]), dtype=complex)
        node = node % npts
        for a in range(comp_count):
            rows[a] = values[a * npts + node]
        return rows

    hx = h_op
    xp = s_op @ a21
    t_s = np.vstack([trace(n, hx, -1), trace(r, xp, -1), trace(n, hx, 0), trace(r, xp, 0)])
    a_s = restrict(l_free, spec.tilde_wb @ t_s, space1)

    product = space1.product(space2)
    a_ext = None
    if with_ext:
        p1ext, p0ext = assemble_p_ext(spec)
        if _rank(p1ext, 1e-12) < n + r:
            raise HypothesisError("P1ext is singular")
        hext = sla.block_diag(h_op, np.eye(r * npts))
        ext_free = (np.kron(p1ext, d) + np.kron(p0ext, eye)) @ hext
        ident = np.eye(r * npts)
        zx = np.zeros((n * npts, r * npts))
        hx_e = np.hstack([h_op, zx])
        xp_e = np.hstack([np.zeros((r * npts, n * npts)), ident])
        t_e = np.vstack([trace(n, hx_e, -1), trace(r, xp_e, -1),
                         trace(n, hx_e, 0), trace(r, xp_e, 0)])
        a_ext = restrict(ext_free, spec.tilde_wb @ t_e, product)
    return PHSModel(a_s, a_ext, a21, s_op, space1, product)


def heat_spec(tilde_wb, s=1.0, grid=None):
    """Scalar heat equation ``z' = d(S dz)``: ``n = r = 1``, ``G1 = 1``, ``H = 1``."""
    grid = Grid1D(0.0, 1.0, 201) if grid is None else grid
    zero = np.zeros((1, 1))
    return PHSystemSpec(zero, zero, zero, np.ones((1, 1)), np.ones((1, 1)), s,
                        tilde_wb, grid)


def heat_general_bc(tilde_wb, s=1.0, grid=None):
    """Matched discrete ``(A_ext, A_S)`` for the heat equation with boundary matrix ``tilde_wb``."""
    _check_heat_wb(tilde_wb)
    return discretize_L(heat_spec(tilde_wb, s, grid))


@dataclass(frozen=True, eq=False)
class WaveHeatSpec:
    """Wave equation on ``(0, 1)`` coupled at ``1`` to a heat equation on ``(1, 2)``."""

    grid1: Grid1D
    grid2: Grid1D
    s: object = 1.0
    nu: float = field(init=False)

    def __post_init__(self):
        if (self.grid1.a, self.grid1.b) != (0.0, 1.0) or (self.grid2.a, self.grid2.b) != (1.0, 2.0):
            raise ValueError("wave-heat grids must cover (0, 1) and (1, 2)")
        s = np.diag(sample_coefficient(self.s, self.grid2, "nodes"))
        nu = float(s.real.min())
        object.__setattr__(self, "nu", nu)
        if not nu > 0:
            raise HypothesisError(f"Re S is not uniformly positive (nu = {nu:.3e})")

    @classmethod
    def uniform(cls, n_nodes, s=1.0):
        return cls(Grid1D(0.0, 1.0, n_nodes), Grid1D(1.0, 2.0, n_nodes), s)


@dataclass(frozen=True, eq=False)
class WaveHeatModel:
    a_ext: object
    a_s: object
    ext_free: np.ndarray
    s_free: np.ndarray
    a21: np.ndarray
    s_op: np.ndarray


def wave_heat_build(spec):
    """Matched discrete operators: ``A_ext`` on ``(v1, v2, w1, w2)`` and ``A_S`` on ``(v1, v2, w1)``."""
    n1, n2 = spec.grid1.n_nodes, spec.grid2.n_nodes
    sb1, sb2 = sbp_first_derivative(spec.grid1), sbp_first_derivative(spec.grid2)
    d1, d2 = sb1.d, sb2.d
    s_op = sample_coefficient(spec.s, spec.grid2, "nodes")
    z11, z12, z22 = np.zeros((n1, n1)), np.zeros((n1, n2)), np.zeros((n2, n2))
    z21 = z12.T
    ext_free = np.block([
        [z11, d1, z12, z12],
        [d1, z11, z12, z12],
        [z21, z21, z22, d2],
        [z21, z21, d2, z22],
    ])
    s_free = np.block([
        [z11, d1, z12],
        [d1, z11, z12],
        [z21, z21, d2 @ s_op @ d2],
    ])
    a21 = np.hstack([z21, z21, d2])
    w1, w2 = sb1.w, sb2.w
    space_s = WeightedSpace(2 * n1 + n2, sla.block_diag(w1, w1, w2))
    space_e = WeightedSpace(2 * n1 + 2 * n2, sla.block_diag(w1, w1, w2, w2))

    v1, v2, w1_0 = 0, n1, 2 * n1
    w2_0 = 2 * n1 + n2
    ce = np.zeros((4, space_e.dim), dtype=complex)
    ce[0, v1] = 1.0
    ce[1, w1_0 + n2 - 1] = 1.0
    ce[2, v1 + n1 - 1], ce[2, w1_0] = 1.0, -1.0
    ce[3, v2 + n1 - 1], ce[3, w2_0] = 1.0, -1.0
    cs = np.zeros((4, space_s.dim), dtype=complex)
    cs[0, v1] = 1.0
    cs[1, w1_0 + n2 - 1] = 1.0
    cs[2, v1 + n1 - 1], cs[2, w1_0] = 1.0, -1.0
    cs[3, v2 + n1 - 1] = 1.0
    cs[3, w1_0:w1_0 + n2] = -(s_op @ d2)[0]
    return WaveHeatModel(
        a_ext=restrict(ext_free, ce, space_e),
        a_s=restrict(s_free, cs, space_s),
        ext_free=ext_free,
        s_free=s_free,
        a21=a21,
        s_op=s_op,
    )
