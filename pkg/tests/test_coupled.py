import numpy as np
import pytest
from numpy.testing import assert_allclose

from closurekit.coupled import (
    CoupledParabolicSpec,
    build_coupled_operator,
    check_v_condition,
    check_v_dissipative,
    predict_limit_projection,
    simulate_and_compare,
)
from closurekit.discretize import Grid1D, PiecewiseConstant, constant_mode, staggered_gradient
from closurekit.errors import DimensionError, HypothesisError
from closurekit.numkernel import WeightedSpace, null_space, numerical_abscissa, principal_angle, scale_of
from closurekit.reproduce import TURING_A, TURING_B
from closurekit.stability import limit_projection, peripheral_point_spectrum

from conftest import random_coupled_spec

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def spec(potential, kind="heat", n=21, coeffs=None, n_comp=None):
    pot = potential if isinstance(potential, PiecewiseConstant) else np.asarray(potential)
    nc = n_comp or (pot.values[0] if isinstance(pot, PiecewiseConstant) else pot).shape[0]
    return CoupledParabolicSpec(nc, Grid1D(0.0, 1.0, n), kind, coeffs or [1.0] * nc, pot)


def mean_projection(n):
    w = Grid1D(0.0, 1.0, n).trapezoid_weights()
    return np.outer(np.ones(n), w) / w.sum()


class TestSpec:
    def test_breakpoint_outside(self):
        with pytest.raises(ValueError):
            spec(PiecewiseConstant([1.5], [np.eye(1), np.eye(1)]))

    def test_empty_piece(self):
        # both breakpoints fall between the same pair of nodes
        with pytest.raises(ValueError):
            spec(PiecewiseConstant([0.51, 0.52], [np.eye(1)] * 3))

    def test_wrong_piece_size(self):
        with pytest.raises(DimensionError):
            CoupledParabolicSpec(2, Grid1D(0, 1, 5), "heat", [1, 1], np.eye(3))

    def test_kind(self):
        with pytest.raises(ValueError):
            CoupledParabolicSpec(1, Grid1D(0, 1, 5), "wave", [1], np.eye(1))

    def test_tie_goes_left(self):
        sp = spec(PiecewiseConstant([0.5], [np.zeros((1, 1)), -np.eye(1)]), n=5)
        c = build_coupled_operator(sp).c
        lap = staggered_gradient(Grid1D(0, 1, 5)).neumann_laplacian()
        assert_allclose(np.diag(c - lap).real, [0, 0, 0, -1, -1], atol=1e-12)


class TestBuild:
    def test_single_neumann_heat(self):
        m = build_coupled_operator(spec(np.zeros((1, 1))))
        lap = staggered_gradient(Grid1D(0, 1, 21)).neumann_laplacian()
        assert_allclose(m.c, lap, atol=1e-10)
        assert abs(numerical_abscissa(m.c, m.space)) <= 1e-12 * scale_of(m.c)
        k = null_space(m.c)
        assert k.shape[1] == 1 and np.ptp(np.abs(k)) <= 1e-10

    def test_rotation_eigenvector(self):
        m = build_coupled_operator(spec(ROT))
        x = constant_mode([1, 1j], 21)
        assert_allclose(m.c @ x, 1j * x, atol=1e-10)

    def test_biharmonic_spectral_mapping(self):
        n = 15
        m = build_coupled_operator(spec(np.zeros((1, 1)), "biharmonic", n))
        lap = staggered_gradient(Grid1D(0, 1, n)).neumann_laplacian()
        mu = np.linalg.eigvals(lap).real
        want = np.sort(-(mu ** 2))
        got = np.sort(np.linalg.eigvals(m.c).real)
        assert_allclose(got, want, atol=1e-8 * np.abs(want).max())

    def test_not_elliptic(self):
        with pytest.raises(HypothesisError):
            build_coupled_operator(spec(np.zeros((1, 1)), coeffs=[-1.0]))

    @pytest.mark.parametrize("kind", ["heat", "biharmonic"])
    def test_blocks_dissipative(self, kind):
        sp = spec(np.zeros((2, 2)), kind, 17, coeffs=[1.0, PiecewiseConstant([0.3], [2.0, 0.5 + 1j])])
        m = build_coupled_operator(sp)
        node = WeightedSpace.diagonal(sp.grid.trapezoid_weights())
        for blk in m.blocks:
            assert numerical_abscissa(blk, node) <= 1e-12 * scale_of(blk)
            k = null_space(blk)
            assert k.shape[1] == 1 and np.ptp(np.abs(k)) <= 1e-8

    def test_split_system_consistent(self):
        m = build_coupled_operator(spec(ROT))
        sys = m.as_split_system()
        assert_allclose(sys.a11 + sys.a12 @ sys.s @ sys.a21, m.c, atol=1e-12 * scale_of(m.c))


class TestVDissipative:
    def test_examples(self):
        assert check_v_dissipative(spec(ROT)) == [True]
        assert check_v_dissipative(spec(np.diag([1.0, 0.0]))) == [False]
        pot = PiecewiseConstant([0.5], [TURING_A, TURING_B])
        assert check_v_dissipative(spec(pot)) == [True, True]


class TestVCondition:
    def test_rotation_fails(self):
        v = check_v_condition(spec(ROT))
        assert not v.holds and v.failing_beta == pytest.approx(1.0)
        assert_allclose(v.witness, np.array([1, 1j]) / np.sqrt(2), atol=1e-12)
        assert_allclose(ROT @ v.witness, 1j * v.witness, atol=1e-10)

    def test_disjoint_rotations(self):
        pot = PiecewiseConstant([0.5], [ROT, 2 * ROT])
        assert check_v_condition(spec(pot)).holds

    def test_no_imaginary_eigs(self):
        assert check_v_condition(spec(np.diag([0.0, -1.0]))).holds

    def test_as_dict(self):
        d = check_v_condition(spec(ROT)).as_dict()
        assert d["holds"] is False and len(d["witness"]) == 2


class TestLimit:
    def test_mean_value(self):
        p = predict_limit_projection(spec(np.zeros((1, 1))))
        assert_allclose(p, mean_projection(21), atol=1e-12)

    def test_component_one_mean(self):
        p = predict_limit_projection(spec(np.diag([0.0, -1.0])))
        want = np.zeros((42, 42))
        want[:21, :21] = mean_projection(21)
        assert_allclose(p, want, atol=1e-12)

    def test_two_rotations_zero(self):
        p = predict_limit_projection(spec(PiecewiseConstant([0.5], [ROT, 2 * ROT])))
        assert_allclose(p, 0, atol=1e-14)

    def test_matches_stability_module(self):
        sp = spec(np.diag([0.0, -1.0]), "biharmonic", 15)
        m = build_coupled_operator(sp)
        assert_allclose(limit_projection(m.c, m.space), predict_limit_projection(sp), atol=1e-9)


class TestSimulate:
    def test_converging(self):
        out = simulate_and_compare(spec(np.diag([0.0, -1.0])))
        assert out["converges"] and out["distance"] <= 1e-4

    def test_rotation_constant_norm(self):
        out = simulate_and_compare(spec(ROT))
        assert not out["converges"]
        assert out["norm_drift"] <= 1e-10
        assert out["min_distance"] >= 0.5

    def test_single_component(self):
        out = simulate_and_compare(spec(np.zeros((1, 1))))
        assert out["converges"] and out["distance"] <= 1e-4


def test_v_condition_equivalence():
    rng = np.random.default_rng(7)
    n = 11
    agree = 0
    for trial in range(50):
        nc = int(rng.integers(1, 4))
        npieces = int(rng.integers(1, 4))
        sp, pieces, beta = random_coupled_spec(rng, nc, npieces, n, plant=trial % 2 == 0)
        verdict = check_v_condition(sp)
        c = build_coupled_operator(sp).c
        per = [lam for lam, _ in peripheral_point_spectrum(c, 1e-8) if abs(lam) > 1e-8]
        assert verdict.holds == (len(per) == 0), f"trial {trial}"
        if beta is not None:
            assert not verdict.holds
        if not verdict.holds:
            for v in pieces:
                assert np.linalg.norm((1j * verdict.failing_beta * np.eye(nc) - v) @ verdict.witness) <= 1e-10
            # kernel characterization: eigenspace of C at i beta is constants tensor common kernel
            eig_space = null_space(1j * verdict.failing_beta * np.eye(c.shape[0]) - c, 1e-9)
            assert eig_space.shape[1] == 1
            x = constant_mode(verdict.witness, n)
            assert principal_angle(eig_space, (x / np.linalg.norm(x))[:, None]) <= 1e-8
        agree += 1
    assert agree == 50
