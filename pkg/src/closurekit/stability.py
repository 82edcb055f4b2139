"""Spectral and stability diagnostics for closed and extended operators.

Covers peripheral eigenvalue transfer from ``A_S`` to ``A_ext``, the
kernel-intersection characterization of imaginary eigenvalues, strict
dissipativity margins, resolvent scans along the imaginary axis,
numerical-range sampling, positivity, limit projections and
norm-recording time propagation.

Classification table used by :func:`stability_verdict` (``tol = 1e-10*||A||``):

==============================  =========================================
condition (checked in order)    classification
==============================  =========================================
growth bound > re_tol           ``unstable``
peripheral eigenvalues present  ``marginal``
abscissa < -tol                 ``strictly-dissipative``
gap shrinks under refinement    ``strongly-stable-probe-passed``
otherwise                       ``exponentially-stable``
==============================  =========================================
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, HypothesisError, SingularStepError
from .numkernel import (
    DEFAULT_RANK_TOL,
    WeightedSpace,
    as_matrix,
    as_vector,
    eig,
    expm,
    hermitian_part,
    null_space,
    numerical_abscissa,
    pencil_extreme,
    scale_of,
    w_orthonormalize,
)
from .closure import coercivity_constant

__all__ = [
    "CLASSIFICATIONS",
    "StabilityVerdict",
    "Trajectory",
    "InclusionVerdict",
    "GradientBound",
    "peripheral_point_spectrum",
    "check_peripheral_inclusion",
    "kernel_intersection",
    "strict_dissipativity_margin",
    "extension_margin",
    "coercive_gradient_bound",
    "lower_bound_constant",
    "resolvent_norm_scan",
    "numerical_range_boundary",
    "sector_half_angle",
    "positivity_probe",
    "limit_projection",
    "propagate",
    "decay_rate_fit",
    "stability_verdict",
]

CLASSIFICATIONS = (
    "strictly-dissipative",
    "exponentially-stable",
    "strongly-stable-probe-passed",
    "marginal",
    "unstable",
)

SCHEMES = ("crank-nicolson", "backward-euler", "expm")


def _space_for(a, space):
    if space is None:
        return WeightedSpace(a.shape[0])
    if space.dim != a.shape[0]:
        raise DimensionError("space dimension does not match the operator")
    return space


def _to_orthonormal_coords(a, space):
    """Similarity ``L^* A L^{-*}``: W-norms become Euclidean norms."""
    if space.is_identity:
        return a
    lt = space.chol.conj().T
    return lt @ sla.solve_triangular(lt, a.T, lower=False, trans="T").T


def peripheral_point_spectrum(a, re_tol=None):
    """Eigenpairs ``(lambda, v)`` of ``A`` with ``|Re lambda| <= re_tol``."""
    if re_tol is not None and re_tol <= 0:
        raise ValueError("re_tol must be positive")
    report, vecs = eig(a, re_tol=re_tol)
    mask = np.abs(report.eigenvalues.real) <= report.re_tol
    return [(complex(lam), vecs[:, k]) for k, lam in enumerate(report.eigenvalues) if mask[k]]


@dataclass
class InclusionVerdict:
    holds: bool
    witnesses: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def max_residual(self):
        res = [r for _, r in self.witnesses]
        return max(res) if res else 0.0


def check_peripheral_inclusion(a_s, a_ext, a21, s, tol=1e-8, re_tol=None,
                               lift: Callable | None = None):
    """Certify each imaginary eigenvalue of ``A_S`` on ``A_ext``.

    For an eigenpair ``(i w, v)`` of ``A_S`` the witness is
    ``z = (v; S A21 v)``; the eigenvalue transfers when
    ``||(i w - A_ext) z|| / ||z|| <= tol``.
    """
    a_s = as_matrix(a_s, "a_s", square=True)
    a_ext = as_matrix(a_ext, "a_ext", square=True)
    a21 = as_matrix(a21, "a21")
    s = as_matrix(s, "s", square=True)
    if a_ext.shape[0] != a_s.shape[0] + s.shape[0]:
        raise DimensionError("a_ext does not act on H1 x H2")
    if lift is None:
        def lift(v):
            return np.concatenate([v, s @ (a21 @ v)])
    verdict = InclusionVerdict(holds=True)
    for lam, v in peripheral_point_spectrum(a_s, re_tol):
        iw = 1j * lam.imag
        z = lift(v)
        resid = float(np.linalg.norm(iw * z - a_ext @ z) / np.linalg.norm(z))
        verdict.witnesses.append((lam, resid))
        if resid > tol:
            verdict.holds = False
            verdict.violations.append((lam, resid))
    return verdict


def kernel_intersection(a21, a11, omega, tol=DEFAULT_RANK_TOL, space=None):
    """Basis of ``ker A21 ∩ ker(i omega - A11)`` (W-orthonormal if ``space`` is given)."""
    a21 = as_matrix(a21, "a21")
    a11 = as_matrix(a11, "a11", square=True)
    if a21.shape[1] != a11.shape[0]:
        raise DimensionError("a21 and a11 act on different spaces")
    stacked = np.vstack([a21, 1j * omega * np.eye(a11.shape[0]) - a11])
    basis = null_space(stacked, tol)
    if space is not None:
        basis = w_orthonormalize(basis, space)
    return basis


def strict_dissipativity_margin(a, space=None):
    """``max(0, -abscissa)``; positive iff ``A`` is strictly dissipative."""
    return max(0.0, -numerical_abscissa(a, space))


def extension_margin(a_ext, product_space, n1, tol=1e-12):
    """Largest ``eps`` with ``Re<A_ext h, h> <= -eps ||h_1||^2`` on the product space.

    Equivalently the largest ``eps`` with ``M - eps diag(W1, 0) >= 0`` for
    ``M = -Herm(W A_ext)``; computed through the Schur complement of ``M``
    onto the ``H1`` block. Returns 0 when no positive ``eps`` exists.
    """
    a_ext = as_matrix(a_ext, "a_ext", square=True)
    w = product_space.weight
    if product_space.dim != a_ext.shape[0] or not 0 < n1 <= a_ext.shape[0]:
        raise DimensionError("inconsistent sizes for condition 1")
    if np.linalg.norm(w[:n1, n1:]) > 0:
        raise DimensionError("product space weight must be block diagonal")
    m = -hermitian_part(w @ a_ext)
    scale = max(np.linalg.norm(m, 2), 1e-300)
    if np.linalg.eigvalsh(m)[0] < -tol * scale:
        return 0.0
    m11, m12, m22 = m[:n1, :n1], m[:n1, n1:], m[n1:, n1:]
    if m22.size:
        schur = m11 - m12 @ np.linalg.pinv(m22, rcond=1e-12, hermitian=True) @ m12.conj().T
    else:
        schur = m11
    eps = float(sla.eigh(hermitian_part(schur), w[:n1, :n1], eigvals_only=True)[0])
    return eps if eps > tol * scale else 0.0


def lower_bound_constant(a21, space1, space2):
    """Largest ``c`` with ``||A21 h||_2 >= c ||h||_1``."""
    a21 = as_matrix(a21, "a21")
    gram = a21.conj().T @ space2.weight @ a21
    return float(np.sqrt(max(pencil_extreme(gram, space1, "min"), 0.0)))


class GradientBound(NamedTuple):
    epsilon: float
    nu: float
    c: float


def coercive_gradient_bound(a21, s, space1=None, space2=None):
    """Predicted strict-dissipativity margin ``nu * c^2`` for bounded-below ``A21``."""
    a21 = as_matrix(a21, "a21")
    space1 = WeightedSpace(a21.shape[1]) if space1 is None else space1
    space2 = WeightedSpace(a21.shape[0]) if space2 is None else space2
    nu = coercivity_constant(s, space2)
    c = lower_bound_constant(a21, space1, space2)
    return GradientBound(nu * c * c, nu, c)


def resolvent_norm_scan(a, omega_grid, space=None):
    """``||(i w - A)^{-1}||`` for each ``w``; ``inf`` marks grid points on the spectrum.

    With ``space`` the operator norm is the one induced by the W-norm.
    """
    a = as_matrix(a, "A", square=True)
    space = _space_for(a, space)
    at = _to_orthonormal_coords(a, space)
    n = a.shape[0]
    eye = np.eye(n)
    out = np.empty(len(omega_grid))
    for k, w in enumerate(omega_grid):
        sv = sla.svdvals(1j * w * eye - at)
        if sv[-1] <= n * np.finfo(float).eps * sv[0]:
            out[k] = np.inf
        else:
            out[k] = 1.0 / sv[-1]
    return out


def numerical_range_boundary(a, space=None, angles=64):
    """Support points of the W-numerical range for ``angles`` rotation directions."""
    if angles < 3:
        raise ValueError("angles must be at least 3")
    a = as_matrix(a, "A", square=True)
    space = _space_for(a, space)
    at = _to_orthonormal_coords(a, space)
    pts = np.empty(angles, dtype=complex)
    for k, theta in enumerate(np.linspace(0.0, 2 * np.pi, angles, endpoint=False)):
        rot = np.exp(1j * theta) * at
        _, vecs = np.linalg.eigh(hermitian_part(rot))
        v = vecs[:, -1]
        pts[k] = np.vdot(v, at @ v) / np.vdot(v, v)
    return pts


def sector_half_angle(points, tol=0.0):
    """Largest ``|arg(-z)|`` over points; the sector around the negative axis containing them."""
    pts = np.asarray(points, dtype=complex)
    pts = pts[np.abs(pts) > tol]
    if pts.size == 0:
        return 0.0
    return float(np.max(np.abs(np.angle(-pts))))


def positivity_probe(a, t_list, tol=1e-12):
    """True iff every entry of ``exp(tA)`` is real and ``>= -tol`` for each ``t``."""
    a = as_matrix(a, "A", square=True)
    for t in t_list:
        if t <= 0:
            raise ValueError("times must be positive")
        e = expm(t * a)
        if np.any(e.real < -tol) or np.any(np.abs(e.imag) > tol):
            return False
    return True


def limit_projection(a, space=None, gap_tol=None):
    """W-orthogonal projection onto ``ker A``, or ``None`` when ``exp(tA)`` has no limit.

    ``None`` is returned when some nonzero eigenvalue has ``Re >= -gap_tol``.
    """
    a = as_matrix(a, "A", square=True)
    space = _space_for(a, space)
    report, _ = eig(a, check=False)
    gap_tol = 1e-8 * scale_of(a) if gap_tol is None else gap_tol
    vals = report.eigenvalues
    near = vals[vals.real >= -gap_tol]
    if np.any(np.abs(near) > gap_tol):
        return None
    alg = near.size
    n = a.shape[0]
    if alg == 0:
        return np.zeros((n, n), dtype=complex)
    basis = null_space(a)
    if basis.shape[1] != alg:
        raise HypothesisError(
            f"eigenvalue 0 is defective (algebraic {alg}, geometric {basis.shape[1]})")
    k = w_orthonormalize(basis, space)
    return k @ k.conj().T @ space.weight


@dataclass
class Trajectory:
    times: np.ndarray
    norms: np.ndarray
    final_state: np.ndarray
    states: np.ndarray | None = None


def propagate(a, space, x0, t_end, dt, scheme="crank-nicolson", store_states=False):
    """Integrate ``x' = A x`` and record W-norms at every step.

    ``t_end`` is split into ``ceil(t_end/dt)`` equal steps. Crank-Nicolson
    is the Cayley map ``(I - dt/2 A)^{-1}(I + dt/2 A)``, which does not
    increase the W-norm when ``A`` is W-dissipative.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end nonnegative")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    a = as_matrix(a, "A", square=True)
    space = _space_for(a, space)
    x = as_vector(x0, "x0", a.shape[0])
    nsteps = max(1, int(np.ceil(t_end / dt - 1e-12))) if t_end > 0 else 0
    h = t_end / nsteps if nsteps else 0.0
    eye = np.eye(a.shape[0])

    if scheme == "expm":
        step_mat = expm(h * a)

        def step(y):
            return step_mat @ y
    else:
        if scheme == "crank-nicolson":
            lhs, rhs = eye - 0.5 * h * a, eye + 0.5 * h * a
        else:
            lhs, rhs = eye - h * a, eye
        with warnings.catch_warnings():
            # singularity is detected below and reported as SingularStepError
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(lhs, check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.min() <= a.shape[0] * np.finfo(float).eps * diag.max():
            raise SingularStepError(f"{scheme} step matrix is singular for dt={h}")

        def step(y):
            return sla.lu_solve((lu, piv), rhs @ y, check_finite=False)

    times = h * np.arange(nsteps + 1)
    norms = np.empty(nsteps + 1)
    norms[0] = space.norm(x)
    states = [x.copy()] if store_states else None
    for k in range(1, nsteps + 1):
        x = step(x)
        norms[k] = space.norm(x)
        if store_states:
            states.append(x.copy())
    return Trajectory(times, norms, x, np.array(states) if store_states else None)


def decay_rate_fit(traj, window=0.5):
    """Least-squares slope of ``log ||x(t)||`` over the last ``window`` fraction of samples."""
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    n = len(traj.times)
    start = min(int(np.floor((1 - window) * n)), n - 2)
    t = np.asarray(traj.times[start:])
    y = np.asarray(traj.norms[start:])
    if np.any(y <= 0):
        raise ValueError("norms must be positive in the fitted window")
    return float(np.polyfit(t, np.log(y), 1)[0])


@dataclass(frozen=True)
class StabilityVerdict:
    abscissa: float
    growth_bound: float
    strict_margin: float
    peripheral_eigs: tuple
    resolvent_sup: float | None
    classification: str

    def as_dict(self):
        sup = self.resolvent_sup
        return {
            "abscissa": self.abscissa,
            "growth_bound": self.growth_bound,
            "strict_margin": self.strict_margin,
            "peripheral_eigs": [[z.real, z.imag] for z in self.peripheral_eigs],
            "resolvent_sup": "unbounded" if sup is not None and np.isinf(sup) else sup,
            "classification": self.classification,
        }


def stability_verdict(a, space=None, re_tol=None, omega_grid=None, gap_shrinking=False):
    """Classify ``A`` according to the table in the module docstring."""
    a = as_matrix(a, "A", square=True)
    space = _space_for(a, space)
    scale = scale_of(a)
    report, _ = eig(a, re_tol=re_tol, check=False)
    ab = numerical_abscissa(a, space)
    gb = report.max_real_part
    sup = None
    if omega_grid is not None:
        sup = float(np.max(resolvent_norm_scan(a, omega_grid, space)))
    tol = 1e-10 * scale
    if gb > report.re_tol:
        cls = "unstable"
    elif report.peripheral.size:
        cls = "marginal"
    elif ab < -tol:
        cls = "strictly-dissipative"
    elif gap_shrinking:
        cls = "strongly-stable-probe-passed"
    else:
        cls = "exponentially-stable"
    return StabilityVerdict(
        abscissa=ab,
        growth_bound=gb,
        strict_margin=max(0.0, -ab),
        peripheral_eigs=tuple(complex(z) for z in report.peripheral),
        resolvent_sup=sup,
        classification=cls,
    )
