import numpy as np
import pytest
from numpy.testing import assert_allclose

from closurekit.closure import closure_identity_residual
from closurekit.discretize import Grid1D, PiecewiseConstant
from closurekit.errors import DimensionError, HypothesisError
from closurekit.numkernel import null_space, numerical_abscissa, scale_of
from closurekit.phs import (
    PHSystemSpec,
    WaveHeatSpec,
    assemble_p_ext,
    boundary_check,
    compute_w_b,
    discretize_L,
    generation_check,
    heat_bc_sigma_matrix,
    heat_general_bc,
    heat_spec,
    heat_stability_conditions,
    wave_heat_build,
)
from closurekit.reproduce import DIRICHLET_WB, NONLOCAL_WB, robin_wb
from closurekit.stability import limit_projection

from conftest import crandn, random_heat_wb

P1EXT = np.array([[0.0, 1.0], [1.0, 0.0]])
NEUMANN_WB = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])


def leading(a):
    vals = np.linalg.eigvals(a)
    return vals[np.argmax(vals.real)]


def random_ph_spec(rng, n, r, grid):
    p1 = crandn(rng, n, n)
    p0 = crandn(rng, n, n)
    return PHSystemSpec(0.5 * (p0 - p0.conj().T), p1 + p1.conj().T, crandn(rng, n, r),
                        crandn(rng, n, r), np.eye(n), np.eye(r), crandn(rng, n + r, 2 * (n + r)),
                        grid)


class TestSpec:
    def test_heat_spec_bounds(self):
        spec = heat_spec(NONLOCAL_WB, 2.0, Grid1D(0, 1, 11))
        assert spec.m == pytest.approx(1.0) and spec.nu == pytest.approx(2.0)

    def test_rank_deficient_wb(self):
        with pytest.raises(HypothesisError):
            heat_spec([[1, 0, 0, 0], [2, 0, 0, 0]], grid=Grid1D(0, 1, 11))

    def test_non_coercive_s(self):
        with pytest.raises(HypothesisError):
            heat_spec(NONLOCAL_WB, PiecewiseConstant([0.5], [np.eye(1), -np.eye(1)]),
                      Grid1D(0, 1, 11))

    def test_p1_not_selfadjoint(self):
        z = np.zeros((1, 1))
        with pytest.raises(HypothesisError):
            PHSystemSpec(z, [[1j]], z, [[1.0]], [[1.0]], [[1.0]], NONLOCAL_WB, Grid1D(0, 1, 5))

    def test_wrong_interval(self):
        with pytest.raises(ValueError):
            heat_spec(NONLOCAL_WB, grid=Grid1D(0, 2, 5))

    def test_wb_shape(self):
        z = np.zeros((1, 1))
        with pytest.raises(DimensionError):
            PHSystemSpec(z, z, z, [[1.0]], [[1.0]], [[1.0]], np.eye(2), Grid1D(0, 1, 5))


class TestPExt:
    def test_heat(self):
        p1ext, p0ext = assemble_p_ext(heat_spec(NONLOCAL_WB, grid=Grid1D(0, 1, 5)))
        assert_allclose(p1ext, P1EXT)
        assert_allclose(p0ext, 0)

    def test_random_structure(self, rng):
        spec = random_ph_spec(rng, 3, 2, Grid1D(0, 1, 5))
        p1ext, p0ext = assemble_p_ext(spec)
        assert_allclose(p1ext, p1ext.conj().T, atol=1e-14)
        assert_allclose(p0ext, -p0ext.conj().T, atol=1e-14)

    def test_g0_zero_blocks(self, rng):
        spec = random_ph_spec(rng, 2, 1, Grid1D(0, 1, 5))
        spec = PHSystemSpec(spec.p0, spec.p1, np.zeros((2, 1)), spec.g1, np.eye(2), np.eye(1),
                            spec.tilde_wb, spec.grid)
        _, p0ext = assemble_p_ext(spec)
        assert_allclose(p0ext[:2, 2:], 0)
        assert_allclose(p0ext[2:, :], 0)


class TestWB:
    def test_dirichlet(self):
        want = np.array([[0, 1, 1, 0], [0, -1, 1, 0]]) / np.sqrt(2)
        assert_allclose(compute_w_b(DIRICHLET_WB, P1EXT), want, atol=1e-15)

    def test_inverse_cancellation(self, rng):
        p = crandn(rng, 3, 3)
        p = p + p.conj().T
        top = np.hstack([p, -p])
        assert_allclose(compute_w_b(top, p), np.sqrt(2) * np.hstack([np.eye(3), np.zeros((3, 3))]),
                        atol=1e-12)

    def test_direct_solve(self, rng):
        p = crandn(rng, 3, 3)
        p = p + p.conj().T
        wb = crandn(rng, 3, 6)
        block = np.block([[p, -p], [np.eye(3), np.eye(3)]])
        want = np.sqrt(2) * np.linalg.solve(block.T, wb.T).T
        assert_allclose(compute_w_b(wb, p), want, atol=1e-12 * np.abs(want).max())

    def test_singular(self):
        with pytest.raises(HypothesisError):
            compute_w_b(DIRICHLET_WB, np.zeros((2, 2)))


class TestGeneration:
    def test_dirichlet(self):
        ok, lam = generation_check(compute_w_b(DIRICHLET_WB, P1EXT))
        assert ok and abs(lam) <= 1e-15

    def test_identity_block(self):
        assert generation_check(np.hstack([np.eye(2), np.zeros((2, 2))]))[0]

    def test_indefinite(self):
        ok, lam = generation_check(np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]))
        assert not ok and lam == pytest.approx(-1.0)


class TestSigma:
    def test_nonlocal(self):
        mat, psd, pd = heat_bc_sigma_matrix(NONLOCAL_WB)
        assert_allclose(mat, [[2, 1], [1, 2]], atol=0)
        assert psd and pd

    def test_dirichlet(self):
        mat, psd, pd = heat_bc_sigma_matrix(DIRICHLET_WB)
        assert_allclose(mat, 0, atol=0)
        assert psd and not pd

    def test_robin(self, rng):
        c = crandn(rng, 2, 2)
        mat, _, _ = heat_bc_sigma_matrix(robin_wb(c))
        assert_allclose(mat, c + c.conj().T, atol=1e-14)

    def test_shape(self):
        with pytest.raises(DimensionError):
            heat_bc_sigma_matrix(np.eye(3))


def brute_force_c(wb, which, samples=200000, seed=0):
    """Oracle: minimize -Q1/Q2 over random kernel vectors."""
    rng = np.random.default_rng(seed)
    k = null_space(wb)
    coef = rng.standard_normal((2, samples)) + 1j * rng.standard_normal((2, samples))
    b = k @ coef
    q1 = np.real(np.conj(b[0]) * b[1] - np.conj(b[2]) * b[3])
    q2 = np.abs(b[0]) ** 2 + np.abs(b[1]) ** 2 if which == 1 else \
        np.abs(b[2]) ** 2 + np.abs(b[3]) ** 2
    return float(np.min(-q1 / q2))


class TestStabilityConditions:
    def test_dirichlet(self):
        conds = heat_stability_conditions(DIRICHLET_WB)
        assert not any(v["holds"] for v in conds.values())

    def test_nonlocal(self):
        conds = heat_stability_conditions(NONLOCAL_WB)
        assert conds["cond1"]["holds"] and conds["cond2"]["holds"] and conds["cond3"]["holds"]
        assert conds["cond1"]["c"] >= 0.25
        # kernel b = (-s, s, t - s, t): minimizing over t gives 3/8
        assert conds["cond1"]["c"] == pytest.approx(0.375, abs=1e-12)
        for key, which in (("cond1", 1), ("cond2", 0)):
            oracle = brute_force_c(NONLOCAL_WB, which)
            assert conds[key]["c"] <= oracle + 1e-12
            assert conds[key]["c"] == pytest.approx(oracle, abs=2e-3)

    def test_cond3_implies_others(self):
        rng = np.random.default_rng(11)
        seen = 0
        for _ in range(100):
            wb = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
            conds = heat_stability_conditions(wb)
            if conds["cond3"]["holds"]:
                seen += 1
                assert conds["cond1"]["holds"] and conds["cond2"]["holds"]
        assert seen > 0

    def test_rank(self):
        with pytest.raises(HypothesisError):
            heat_stability_conditions(np.zeros((2, 4)))


class TestBoundaryCheck:
    def test_heat_report(self):
        rep = boundary_check(heat_spec(NONLOCAL_WB, grid=Grid1D(0, 1, 11)))
        assert rep.p1ext_invertible and rep.generation_psd and rep.g1_rank_n
        d = rep.as_dict()
        assert d["heat_conditions"]["cond3"]["holds"]
        assert d["sigma_matrix"][0][1] == [1.0, 0.0]

    def test_r_greater_than_n_singular(self, rng):
        for _ in range(10):
            spec = random_ph_spec(rng, 1, 2, Grid1D(0, 1, 7))
            p1ext, _ = assemble_p_ext(spec)
            assert np.linalg.matrix_rank(p1ext) < 3
            rep = boundary_check(spec)
            assert not rep.p1ext_invertible and rep.heat_conditions is None
            with pytest.raises(HypothesisError):
                discretize_L(spec)
            assert discretize_L(spec, with_ext=False).a_ext is None


class TestDiscretizeL:
    def test_dirichlet_spectrum(self):
        m = heat_general_bc(DIRICHLET_WB, 1.0, Grid1D(0, 1, 401))
        vals = np.sort(np.linalg.eigvals(m.a_s.a_restricted).real)[::-1]
        # the wide-stencil second derivative pairs each mode with an odd-even twin
        distinct = vals[::2][:3]
        assert_allclose(vals[1::2][:3], distinct, rtol=1e-6)
        assert_allclose(distinct, -np.pi ** 2 * np.array([1, 4, 9]), rtol=0.01)

    @pytest.mark.parametrize("wb", [NONLOCAL_WB, DIRICHLET_WB, NEUMANN_WB])
    def test_closure_identity(self, rng, wb):
        m = heat_general_bc(wb, 1.0, Grid1D(0, 1, 61))
        for _ in range(5):
            h1 = m.a_s.lift(crandn(rng, m.a_s.dim))
            res = closure_identity_residual(m.a_ext.a_free, m.a_s.a_free, m.a21, m.s_op, h1)
            assert res <= 1e-11 * scale_of(m.a_ext.a_free)
            lifted = np.concatenate([h1, m.s_op @ m.a21 @ h1])
            assert np.linalg.norm(m.a_ext.constraints @ lifted) <= 1e-9 * np.linalg.norm(lifted)

    def test_system_closure_identity(self, rng):
        spec = random_ph_spec(rng, 2, 1, Grid1D(0, 1, 21))
        m = discretize_L(spec)
        h1 = m.a_s.lift(crandn(rng, m.a_s.dim))
        res = closure_identity_residual(m.a_ext.a_free, m.a_s.a_free, m.a21, m.s_op, h1)
        assert res <= 1e-11 * scale_of(m.a_ext.a_free)

    def test_generation_implies_dissipative(self, rng):
        for _ in range(5):
            wb = random_heat_wb(rng, complex_entries=True)
            m = heat_general_bc(wb, 1.0, Grid1D(0, 1, 31))
            a = m.a_ext.a_restricted
            assert numerical_abscissa(a) <= 1e-11 * scale_of(a)

    def test_generation_violation_gives_growth_direction(self, rng):
        for _ in range(5):
            wb = random_heat_wb(rng, generating=False, margin=0.1)
            m = heat_general_bc(wb, 1.0, Grid1D(0, 1, 41))
            assert numerical_abscissa(m.a_ext.a_restricted) > 0

    def test_neumann_limit_is_mean(self):
        grid = Grid1D(0, 1, 41)
        m = heat_general_bc(NEUMANN_WB, 1.0, grid)
        a = m.a_s.a_restricted
        p = limit_projection(a)
        q = m.a_s.coordinates(np.ones(41))
        q /= np.linalg.norm(q)
        assert_allclose(p, np.outer(q, q.conj()), atol=1e-9)
        assert np.linalg.norm(m.a_s.lift(q) - m.a_s.lift(q)[0]) <= 1e-9

    def test_stability_pipeline(self, rng):
        count = 0
        for _ in range(20):
            wb = random_heat_wb(rng)
            m = heat_general_bc(wb, 1.0, Grid1D(0, 1, 41))
            ext_lead = leading(m.a_ext.a_restricted).real
            if ext_lead <= -1e-6:
                count += 1
                assert leading(m.a_s.a_restricted).real < 0
        assert count > 0

    def test_conditions_give_stable_spectrum(self, rng):
        found = 0
        while found < 3:
            wb = rng.standard_normal((2, 4))
            conds = heat_stability_conditions(wb)
            if not (conds["cond1"]["holds"] or conds["cond2"]["holds"]):
                continue
            found += 1
            leads = [leading(heat_general_bc(wb, 1.0, Grid1D(0, 1, n + 1)).a_s.a_restricted).real
                     for n in (100, 200, 400)]
            assert max(leads) < 0
            assert (max(leads) - min(leads)) / abs(leads[1]) <= 0.2


class TestWaveHeat:
    def test_structure(self, rng):
        m = wave_heat_build(WaveHeatSpec.uniform(21, PiecewiseConstant([1.5], [1.0, 2.0 + 1j])))
        assert m.a_s.constraint_residual() <= 1e-13
        assert m.a_ext.constraint_residual() <= 1e-13
        a = m.a_ext.a_restricted
        assert numerical_abscissa(a) <= 1e-12 * scale_of(a)
        b = m.a_s.a_restricted
        assert numerical_abscissa(b) <= 1e-12 * scale_of(b)
        for _ in range(5):
            h1 = m.a_s.lift(crandn(rng, m.a_s.dim))
            res = closure_identity_residual(m.ext_free, m.s_free, m.a21, m.s_op, h1)
            assert res <= 1e-12 * scale_of(m.ext_free)

    def test_trivial_kernel(self):
        m = wave_heat_build(WaveHeatSpec.uniform(31))
        assert null_space(m.a_s.a_restricted, 1e-10).shape[1] == 0

    def test_spectrum_in_left_half_plane(self):
        vals = np.linalg.eigvals(wave_heat_build(WaveHeatSpec.uniform(41)).a_s.a_restricted)
        assert vals.real.max() < 0
        assert not np.any(np.abs(vals.real) <= 1e-8)

    def test_non_coercive(self):
        with pytest.raises(HypothesisError):
            WaveHeatSpec.uniform(11, -1.0)

    def test_grids(self):
        with pytest.raises(ValueError):
            WaveHeatSpec(Grid1D(0, 1, 5), Grid1D(0, 1, 5))


TWO_COMPONENT_WB = np.array([[1, 0, 1, 0, -1, 0], [-1, 0, -1, 1, -1, 1], [1, 0, 1, -1, 1, 0]],
                            dtype=float)


def _two_component_spec(n_nodes=21, hamiltonian=None):
    h = np.diag([1.0, 2.0]) if hamiltonian is None else hamiltonian
    return PHSystemSpec(np.zeros((2, 2)), np.diag([1.0, -1.0]), np.zeros((2, 1)),
                        np.array([[1.0], [0.0]]), h, np.eye(1), TWO_COMPONENT_WB,
                        Grid1D(0.0, 1.0, n_nodes))


def test_multicomponent_kernel_vectors_satisfy_boundary_matrix():
    spec = _two_component_spec()
    m = discretize_L(spec)
    npts = spec.grid.n_nodes
    h = np.kron(np.diag(np.diag(spec.hamiltonian)), np.eye(npts))
    for col in m.a_ext.k_basis.T:
        ex = np.concatenate([h @ col[:2 * npts], col[2 * npts:]]).reshape(3, npts)
        assert np.abs(spec.tilde_wb @ np.concatenate([ex[:, -1], ex[:, 0]])).max() <= 1e-12


def test_multicomponent_generation_implies_dissipative_extension():
    spec = _two_component_spec(41)
    p1ext, _ = assemble_p_ext(spec)
    ok, _ = generation_check(compute_w_b(spec.tilde_wb, p1ext))
    assert ok
    a = discretize_L(spec).a_ext.a_restricted
    assert numerical_abscissa(a) <= 1e-11 * scale_of(a)
