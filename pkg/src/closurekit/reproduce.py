"""Canned worked examples with recorded expectations.

Each case returns a list of :class:`Check` records. A case passes when
every check passes; all cases are self-contained and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closure import SplitClosureSystem, assemble_a_s
from .coupled import CoupledParabolicSpec, build_coupled_operator, simulate_and_compare
from .discretize import Grid1D
from .numkernel import WeightedSpace, null_space, numerical_abscissa, scale_of
from .phs import (
    generation_check,
    compute_w_b,
    heat_bc_sigma_matrix,
    heat_general_bc,
    heat_stability_conditions,
    wave_heat_build,
    WaveHeatSpec,
)
from .stability import (
    decay_rate_fit,
    numerical_range_boundary,
    propagate,
    sector_half_angle,
    stability_verdict,
)

__all__ = ["Check", "CASES", "run_case", "TURING_A", "TURING_B", "NONLOCAL_WB", "DIRICHLET_WB",
           "robin_wb"]

TURING_A = np.array([[0, -1, 1], [1, 0, 0], [-1, 0, -1]], dtype=float)
TURING_B = np.array([[0, 2, -1], [-2, 0, 0], [1, 0, -1]], dtype=float)
NONLOCAL_WB = np.array([[0, 1, 1, -1], [1, 1, 0, 0]], dtype=float)
DIRICHLET_WB = np.array([[1, 0, 0, 0], [0, 0, 1, 0]], dtype=float)
P1EXT_HEAT = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass
class Check:
    name: str
    value: object
    expected: str
    passed: bool

    def as_dict(self):
        val = self.value
        if isinstance(val, complex):
            val = [val.real, val.imag]
        elif isinstance(val, np.generic):
            val = val.item()
        return {"name": self.name, "value": val, "expected": self.expected,
                "passed": bool(self.passed)}


def robin_wb(c):
    """Boundary matrix encoding the Robin conditions given by the 2x2 matrix ``c``."""
    c = np.asarray(c, dtype=complex)
    return np.array([[c[0, 1], 0, c[0, 0], -1], [c[1, 1], 1, c[1, 0], 0]], dtype=complex)


def _match_sets(got, want):
    got = sorted(np.asarray(got, dtype=complex), key=lambda z: (round(z.real, 8), round(z.imag, 8)))
    want = sorted(np.asarray(want, dtype=complex), key=lambda z: (round(z.real, 8), round(z.imag, 8)))
    return float(max(abs(a - b) for a, b in zip(got, want)))


def case_turing():
    checks = []
    vals = np.linalg.eigvals(TURING_A + TURING_B)
    dev = _match_sets(vals, [-2, 1j, -1j])
    checks.append(Check("spectrum of A+B", dev, "max deviation from {-2, i, -i} <= 1e-10",
                        dev <= 1e-10))
    for name, m in (("A", TURING_A), ("B", TURING_B)):
        ab = numerical_abscissa(m)
        checks.append(Check(f"numerical abscissa of {name}", ab, "0 within 1e-12",
                            abs(ab) <= 1e-12))
        mr = float(np.linalg.eigvals(m).real.max())
        checks.append(Check(f"max Re eig of {name}", mr, "< 0", mr < 0))
    return checks


def sector_system(n=10):
    d = np.diag(1j * np.arange(1, n + 1))
    return SplitClosureSystem(np.zeros((n, n)), d, d, (1 + 1j) * np.eye(n))


def case_sector_diag():
    system = sector_system(10)
    a_s = assemble_a_s(system)
    want = np.diag(-(1 + 1j) * np.arange(1, 11) ** 2)
    pts = numerical_range_boundary(a_s, angles=64)
    ray = float(np.max(np.abs(np.angle(pts) + 3 * np.pi / 4)))
    half = sector_half_angle(pts)
    verdict = stability_verdict(a_s)
    return [
        Check("closed operator", float(np.abs(a_s - want).max()), "diag(-(1+i) n^2) exactly",
              np.array_equal(a_s, want)),
        Check("coercivity of S", system.nu, "1 within 1e-12", abs(system.nu - 1) <= 1e-12),
        Check("numerical range on arg z = -3pi/4", ray, "<= 1e-10", ray <= 1e-10),
        Check("sector half-angle", half, "pi/4 within 1e-10", abs(half - np.pi / 4) <= 1e-10),
        Check("classification", verdict.classification, "strictly-dissipative",
              verdict.classification == "strictly-dissipative"),
    ]


def _heat_leading(wb, n, s=1.0):
    m = heat_general_bc(wb, s, Grid1D(0.0, 1.0, n + 1))
    vals = np.linalg.eigvals(m.a_s.a_restricted)
    return m, vals[np.argmax(vals.real)]


def case_heat_nonlocal():
    mat, psd, pd = heat_bc_sigma_matrix(NONLOCAL_WB)
    checks = [
        Check("sigma matrix", float(np.abs(mat - [[2, 1], [1, 2]]).max()), "[[2,1],[1,2]] exactly",
              np.array_equal(mat, np.array([[2, 1], [1, 2]], dtype=complex))),
        Check("sigma matrix positive definite", pd, "true", pd),
    ]
    leads = {}
    for n in (100, 200, 400):
        m, lam = _heat_leading(NONLOCAL_WB, n)
        leads[n] = lam.real
    spread = (max(leads.values()) - min(leads.values())) / abs(leads[200])
    checks.append(Check("leading Re eig at n=100,200,400", [leads[n] for n in (100, 200, 400)],
                        "all < 0, spread within 20%",
                        max(leads.values()) < 0 and spread <= 0.2))
    m, lam = _heat_leading(NONLOCAL_WB, 200)
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal(m.a_s.dim)
    traj = propagate(m.a_s.a_restricted, None, x0, 8.0, 0.01)
    rate = decay_rate_fit(traj, 0.5)
    rel = abs(rate - lam.real) / abs(lam.real)
    checks.append(Check("fitted decay rate", rate, "within 10% of leading Re eig", rel <= 0.1))
    return checks


def case_heat_dirichlet():
    conds = heat_stability_conditions(DIRICHLET_WB)
    checks = [Check(f"condition {k}", v["holds"], "false", not v["holds"])
              for k, v in conds.items()]
    _, lam = _heat_leading(DIRICHLET_WB, 400)
    rel = abs(lam.real + np.pi ** 2) / np.pi ** 2
    checks.append(Check("leading eigenvalue", complex(lam), "-pi^2 within 1%", rel <= 0.01))
    return checks


ROBIN_C = np.array([[1.0, 0.5], [0.0, 1.0]])


def case_heat_robin():
    wb = robin_wb(ROBIN_C)
    mat, psd, pd = heat_bc_sigma_matrix(wb)
    dev = float(np.abs(mat - (ROBIN_C + ROBIN_C.T)).max())
    gen, lam_gen = generation_check(compute_w_b(wb, P1EXT_HEAT))
    m, lam = _heat_leading(wb, 200)
    ab_ext = numerical_abscissa(m.a_ext.a_restricted)
    scale = scale_of(m.a_ext.a_restricted)
    return [
        Check("sigma matrix equals C + C^*", dev, "<= 1e-14", dev <= 1e-14),
        Check("generation check", gen, "true", gen),
        Check("extended operator dissipative", ab_ext, "<= 1e-10 * scale",
              ab_ext <= 1e-10 * scale),
        Check("leading Re eig", lam.real, "< 0", lam.real < 0),
    ]


def wave_heat_sweep(grids=(50, 100, 200)):
    out = {}
    for n in grids:
        m = wave_heat_build(WaveHeatSpec.uniform(n))
        vals = np.linalg.eigvals(m.a_s.a_restricted)
        osc = vals[np.abs(vals.imag) > np.abs(vals.real)]
        out[n] = (vals, float(np.abs(osc.real).min()), m)
    return out


def case_wave_heat():
    sweep = wave_heat_sweep()
    vals = sweep[100][0]
    gaps = [sweep[n][1] for n in (50, 100, 200)]
    return [
        Check("max Re eig at n=100", float(vals.real.max()), "< 0", vals.real.max() < 0),
        Check("eigenvalues with |Re| <= 1e-8 at n=100", int(np.sum(np.abs(vals.real) <= 1e-8)),
              "0", not np.any(np.abs(vals.real) <= 1e-8)),
        Check("oscillatory gap at n=50,100,200", gaps, "strictly decreasing",
              gaps[0] > gaps[1] > gaps[2]),
    ]


def coupled_spec(kind, potential, n_nodes=41, coefficients=(1.0, 1.0)):
    return CoupledParabolicSpec(len(coefficients), Grid1D(0.0, 1.0, n_nodes), kind,
                                coefficients, np.asarray(potential, dtype=complex))


def case_coupled_heat():
    conv = simulate_and_compare(coupled_spec("heat", [[0, 0], [0, -1]]))
    osc = simulate_and_compare(coupled_spec("heat", [[0, 1], [-1, 0]], coefficients=(1.0, 2.0)))
    return [
        Check("converging spec: ||exp(TC) - P||", conv["distance"], "<= 1e-4",
              conv["converges"] and conv["distance"] <= 1e-4),
        Check("oscillating spec: norm drift", osc.get("norm_drift"), "<= 1e-10",
              not osc["converges"] and osc["norm_drift"] <= 1e-10),
        Check("oscillating spec: distance from limit", osc.get("min_distance"), ">= 0.5",
              not osc["converges"] and osc["min_distance"] >= 0.5),
    ]


def case_coupled_biharmonic():
    spec = coupled_spec("biharmonic", [[0, 0], [0, -1]], n_nodes=31)
    model = build_coupled_operator(spec)
    checks = []
    for k, blk in enumerate(model.blocks):
        ab = numerical_abscissa(blk, _node_space(spec))
        checks.append(Check(f"component {k} dissipative", ab, "<= 1e-12 * scale",
                            ab <= 1e-12 * scale_of(blk)))
        ker = null_space(blk)
        const = ker.shape[1] == 1 and np.ptp(np.abs(ker[:, 0])) <= 1e-8
        checks.append(Check(f"component {k} kernel is constants", int(ker.shape[1]),
                            "one-dimensional, constant", const))
    conv = simulate_and_compare(spec)
    checks.append(Check("||exp(TC) - P||", conv["distance"], "<= 1e-4",
                        conv["converges"] and conv["distance"] <= 1e-4))
    return checks


def _node_space(spec):
    return WeightedSpace.diagonal(spec.grid.trapezoid_weights())


CASES = {
    "turing": case_turing,
    "sector-diag": case_sector_diag,
    "heat-nonlocal": case_heat_nonlocal,
    "heat-dirichlet": case_heat_dirichlet,
    "heat-robin": case_heat_robin,
    "wave-heat": case_wave_heat,
    "coupled-heat": case_coupled_heat,
    "coupled-biharmonic": case_coupled_biharmonic,
}


def run_case(name):
    """Run a named case; returns ``(passed, checks)``."""
    if name not in CASES:
        raise KeyError(f"unknown case {name!r}; choose from {sorted(CASES)}")
    checks = CASES[name]()
    return all(c.passed for c in checks), checks
