"""Extended operator and closure assembly for the split setting.

A split closure system is the quadruple ``(A11, A12, A21, S)`` together
with the two weighted spaces. The extended operator acts on the product
space as ``[[A11, A12], [A21, 0]]``; the closed operator is
``A_S = A11 + A12 S A21``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, HypothesisError
from .numkernel import (
    WeightedSpace,
    as_matrix,
    as_vector,
    numerical_abscissa,
    pencil_extreme,
    scale_of,
    weighted_adjoint,
)

__all__ = [
    "SplitClosureSystem",
    "StructureVerdict",
    "coercivity_constant",
    "assemble_a_ext",
    "assemble_a_s",
    "check_skew_pairing",
    "closure_identity_residual",
    "form_residual",
    "verify_structure",
    "DEFAULT_SKEW_TOL",
]

DEFAULT_SKEW_TOL = 1e-10


def coercivity_constant(s, space=None):
    """Largest ``nu`` with ``Re<h, S h>_W >= nu ||h||_W^2``."""
    s = as_matrix(s, "S", square=True)
    space = WeightedSpace(s.shape[0]) if space is None else space
    if space.dim != s.shape[0]:
        raise DimensionError("S does not match the space dimension")
    # Re<h, Sh>_W = Re h^* W S h
    return pencil_extreme(space.weight @ s, space, "min")


@dataclass(frozen=True, eq=False)
class SplitClosureSystem:
    """``(A11, A12, A21, S)`` on ``H1 x H2``; coercivity of ``S`` is checked on construction."""

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    s: np.ndarray
    space1: WeightedSpace = None
    space2: WeightedSpace = None
    nu: float = field(init=False)

    def __post_init__(self):
        a11 = as_matrix(self.a11, "a11", square=True)
        n1 = a11.shape[0]
        s = as_matrix(self.s, "s", square=True)
        n2 = s.shape[0]
        a12 = as_matrix(self.a12, "a12")
        a21 = as_matrix(self.a21, "a21")
        if a12.shape != (n1, n2):
            raise DimensionError(f"a12 has shape {a12.shape}, expected {(n1, n2)}")
        if a21.shape != (n2, n1):
            raise DimensionError(f"a21 has shape {a21.shape}, expected {(n2, n1)}")
        sp1 = WeightedSpace(n1) if self.space1 is None else self.space1
        sp2 = WeightedSpace(n2) if self.space2 is None else self.space2
        if sp1.dim != n1 or sp2.dim != n2:
            raise DimensionError("weighted spaces do not match block sizes")
        for name, val in (("a11", a11), ("a12", a12), ("a21", a21), ("s", s),
                          ("space1", sp1), ("space2", sp2)):
            object.__setattr__(self, name, val)
        nu = coercivity_constant(s, sp2)
        object.__setattr__(self, "nu", nu)
        if not nu > 0:
            raise HypothesisError(f"S is not coercive: nu = {nu:.3e}")

    @property
    def n1(self):
        return self.a11.shape[0]

    @property
    def n2(self):
        return self.s.shape[0]

    @property
    def product_space(self):
        return self.space1.product(self.space2)

    def with_s(self, s):
        return SplitClosureSystem(self.a11, self.a12, self.a21, s, self.space1, self.space2)

    @classmethod
    def from_a21(cls, a11, a21, s, space1=None, space2=None):
        """Build the system with ``A12 = -A21^*`` (weighted adjoint)."""
        a21 = as_matrix(a21, "a21")
        sp1 = WeightedSpace(a21.shape[1]) if space1 is None else space1
        sp2 = WeightedSpace(a21.shape[0]) if space2 is None else space2
        a12 = -weighted_adjoint(a21, sp1, sp2)
        return cls(a11, a12, a21, s, sp1, sp2)


def assemble_a_ext(sys):
    """Block matrix ``[[A11, A12], [A21, 0]]`` on ``sys.product_space``."""
    zero = np.zeros((sys.n2, sys.n2), dtype=complex)
    return np.block([[sys.a11, sys.a12], [sys.a21, zero]])


def assemble_a_s(sys):
    return sys.a11 + sys.a12 @ sys.s @ sys.a21


def check_skew_pairing(sys, tol=DEFAULT_SKEW_TOL):
    """Relative residual of ``W1 A12 + A21^* W2 = 0``; returns ``(ok, residual)``."""
    lhs = sys.space1.weight @ sys.a12
    rhs = sys.a21.conj().T @ sys.space2.weight
    denom = np.linalg.norm(lhs) + np.linalg.norm(rhs) + np.finfo(float).eps
    resid = float(np.linalg.norm(lhs + rhs) / denom)
    return resid <= tol, resid


def closure_identity_residual(a_ext, a_s, a21, s, h1):
    """``||A_ext (h1; S A21 h1) - (A_S h1; A21 h1)|| / ||h1||``.

    Works for matched free operators of any model, split or not; callers
    with boundary constraints pass a constraint-satisfying ``h1``.
    """
    a_ext = as_matrix(a_ext, "a_ext", square=True)
    a_s = as_matrix(a_s, "a_s", square=True)
    a21 = as_matrix(a21, "a21")
    s = as_matrix(s, "s", square=True)
    n1 = a_s.shape[0]
    n2 = s.shape[0]
    if a_ext.shape[0] != n1 + n2 or a21.shape != (n2, n1):
        raise DimensionError("a_ext, a_s, a21 and s are not consistently sized")
    h1 = as_vector(h1, "h1", n1)
    nrm = np.linalg.norm(h1)
    if nrm == 0:
        raise ValueError("h1 must be nonzero")
    g2 = a21 @ h1
    lifted = np.concatenate([h1, s @ g2])
    expected = np.concatenate([a_s @ h1, g2])
    return float(np.linalg.norm(a_ext @ lifted - expected) / nrm)


def form_residual(sys, u, v, tol=DEFAULT_SKEW_TOL):
    """Mismatch between ``<-A_S u, v>`` and ``<S A21 u, A21 v> - <A11 u, v>``.

    Raises
    ------
    HypothesisError
        If the skew pairing ``A12 = -A21^*`` does not hold; the identity is
        only valid under it.
    """
    ok, resid = check_skew_pairing(sys, tol)
    if not ok:
        raise HypothesisError(f"skew pairing violated (residual {resid:.3e})")
    u = as_vector(u, "u", sys.n1)
    v = as_vector(v, "v", sys.n1)
    sp1, sp2 = sys.space1, sys.space2
    lhs = sp1.inner(-(assemble_a_s(sys) @ u), v)
    form = sp2.inner(sys.s @ sys.a21 @ u, sys.a21 @ v) - sp1.inner(sys.a11 @ u, v)
    return abs(lhs - form)


@dataclass(frozen=True)
class StructureVerdict:
    s_coercive: bool
    nu: float
    skew_pairing: bool
    skew_residual: float
    a11_dissipative: bool
    a11_abscissa: float
    a_ext_dissipative: bool
    a_ext_abscissa: float

    @property
    def all_hold(self):
        return self.s_coercive and self.skew_pairing and self.a11_dissipative \
            and self.a_ext_dissipative

    def as_dict(self):
        return dict(self.__dict__)


def verify_structure(sys, skew_tol=DEFAULT_SKEW_TOL, diss_tol=1e-12):
    """Check the standing hypotheses: coercive S, skew pairing, dissipative A11 and A_ext."""
    ok, resid = check_skew_pairing(sys, skew_tol)
    ab11 = numerical_abscissa(sys.a11, sys.space1)
    a_ext = assemble_a_ext(sys)
    ab_ext = numerical_abscissa(a_ext, sys.product_space)
    scale = scale_of(a_ext)
    return StructureVerdict(
        s_coercive=sys.nu > 0,
        nu=sys.nu,
        skew_pairing=ok,
        skew_residual=resid,
        a11_dissipative=ab11 <= diss_tol * scale,
        a11_abscissa=ab11,
        a_ext_dissipative=ab_ext <= diss_tol * scale,
        a_ext_abscissa=ab_ext,
    )

