import numpy as np
import pytest
from hypothesis import settings

from closurekit.coupled import CoupledParabolicSpec
from closurekit.discretize import Grid1D, PiecewiseConstant
from closurekit.ensembles import random_dissipative

settings.register_profile("closurekit", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("closurekit")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_spd(rng, n, lo=0.5, hi=2.0):
    q, _ = np.linalg.qr(crandn(rng, n, n))
    return q @ np.diag(rng.uniform(lo, hi, n)) @ q.conj().T


def random_heat_wb(rng, generating=True, margin=0.0, complex_entries=False, max_tries=10000):
    """Rejection-sample a full-rank 2x4 heat boundary matrix by its generation verdict.

    With ``generating=False`` the sample must fail the generation test by
    ``margin`` relative to ``||W_B||^2``.
    """
    from closurekit.phs import compute_w_b, generation_check

    p1ext = np.array([[0.0, 1.0], [1.0, 0.0]])
    for _ in range(max_tries):
        wb = rng.standard_normal((2, 4))
        if complex_entries:
            wb = wb + 1j * rng.standard_normal((2, 4))
        if np.linalg.matrix_rank(wb) < 2:
            continue
        big = compute_w_b(wb, p1ext)
        ok, lam = generation_check(big)
        if generating and ok:
            return wb
        if not generating and lam <= -margin * np.linalg.norm(big, 2) ** 2:
            return wb
    raise RuntimeError("rejection sampling did not find a boundary matrix")


def random_pieces(rng, nc, npieces, plant):
    if plant:
        w = crandn(rng, nc)
        w /= np.linalg.norm(w)
        beta = rng.choice([-2.0, 1.0, 1.5])
        proj = np.eye(nc) - np.outer(w, w.conj())
        return [1j * beta * np.outer(w, w.conj()) + proj @ random_dissipative(rng, nc, 0.1) @ proj
                for _ in range(npieces)], beta, w
    pieces = []
    for _ in range(npieces):
        if rng.random() < 0.4:
            m = crandn(rng, nc, nc)
            pieces.append(0.5 * (m - m.conj().T))
        else:
            pieces.append(random_dissipative(rng, nc, 0.05))
    return pieces, None, None


def random_coupled_spec(rng, nc, npieces, n_nodes, plant):
    """Heat spec with random potential pieces; with ``plant`` they share an imaginary eigenvector.

    Returns ``(spec, pieces, beta)`` where ``beta`` is the planted frequency or None.
    """
    pieces, beta, _ = random_pieces(rng, nc, npieces, plant)
    grid = Grid1D(0.0, 1.0, n_nodes)
    # breakpoints strictly between nodes so every piece owns a node
    cuts = np.sort(rng.choice(np.arange(1, n_nodes - 1), npieces - 1, replace=False))
    bps = grid.nodes[cuts] + 0.5 * grid.h
    sp = CoupledParabolicSpec(nc, grid, "heat", [1.0] * nc, PiecewiseConstant(bps, pieces))
    return sp, pieces, beta
