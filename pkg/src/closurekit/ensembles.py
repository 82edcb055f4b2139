"""Seeded random split closure systems with planted imaginary eigenvectors.

A generated system has diagonal positive weights, a W1-dissipative
``A11``, the skew pairing ``A12 = -A21^*`` and a coercive ``S``. For
``k`` planted frequencies ``omega_i`` the vectors ``v_i`` satisfy
``A11 v_i = i omega_i v_i`` and ``A21 v_i = 0``, so ``i omega_i`` is an
eigenvalue of ``A_S`` with eigenvector ``v_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.stats import unitary_group

from .closure import SplitClosureSystem
from .numkernel import WeightedSpace, weighted_adjoint

__all__ = ["PlantedSystem", "random_split_system", "random_dissipative", "split_ensemble"]


@dataclass(frozen=True, eq=False)
class PlantedSystem:
    system: SplitClosureSystem
    omegas: np.ndarray
    planted: np.ndarray


def _cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_dissipative(rng, n, margin=0.0):
    """Random matrix with Euclidean numerical abscissa ``<= -margin``."""
    g = _cplx(rng, n, n) / np.sqrt(2 * n)
    k = _cplx(rng, n, n) / np.sqrt(2 * n)
    return -(g @ g.conj().T) - margin * np.eye(n) + 0.5 * (k - k.conj().T)


def random_split_system(rng, n1, n2, k=0, freqs=(-2.0, -1.0, 0.5, 1.0, 3.0), margin=0.1,
                        nu=0.2):
    """One random system with ``k`` planted frequencies drawn (with repetition) from ``freqs``.

    With ``k = 0`` and ``n2 >= n1`` the gradient-like block ``A21`` is
    injective almost surely.
    """
    if not 0 <= k <= n1:
        raise ValueError("need 0 <= k <= n1")
    w1 = rng.uniform(0.5, 2.0, n1)
    w2 = rng.uniform(0.5, 2.0, n2)
    sp1, sp2 = WeightedSpace.diagonal(w1), WeightedSpace.diagonal(w2)
    u = unitary_group.rvs(n1, random_state=rng) if n1 > 1 else np.ones((1, 1), dtype=complex)
    q = np.diag(1.0 / np.sqrt(w1)) @ u
    q_inv = q.conj().T @ sp1.weight
    omegas = rng.choice(np.asarray(freqs, dtype=float), size=k)
    core = sla.block_diag(np.diag(1j * omegas), random_dissipative(rng, n1 - k, margin))
    a11 = q @ core @ q_inv
    b = np.hstack([np.zeros((n2, k)), _cplx(rng, n2, n1 - k)])
    a21 = b @ q_inv
    a12 = -weighted_adjoint(a21, sp1, sp2)
    g = _cplx(rng, n2, n2) / np.sqrt(2 * n2)
    sk = _cplx(rng, n2, n2) / np.sqrt(2 * n2)
    s = nu * np.eye(n2) + np.diag(1.0 / w2) @ (g @ g.conj().T + 0.5 * (sk - sk.conj().T))
    system = SplitClosureSystem(a11, a12, a21, s, sp1, sp2)
    return PlantedSystem(system, omegas, q[:, :k])


def split_ensemble(seed, count=100, max_dim=20, planted=True, injective=False):
    """Deterministic list of ``count`` random systems with dimensions at most ``max_dim``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n1 = int(rng.integers(2, max_dim + 1))
        if injective:
            n2 = int(rng.integers(n1, max_dim + 1))
            k = 0
        else:
            n2 = int(rng.integers(1, max_dim + 1))
            k = int(rng.integers(1, min(n1, 4) + 1)) if planted else 0
        out.append(random_split_system(rng, n1, n2, k))
    return out
