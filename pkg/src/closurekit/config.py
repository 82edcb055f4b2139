"""JSON configuration loading and model construction for the command line."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import jsonschema
import numpy as np

from .closure import (
    SplitClosureSystem,
    assemble_a_ext,
    assemble_a_s,
    closure_identity_residual,
    verify_structure,
)
from .coupled import CoupledParabolicSpec, build_coupled_operator, check_v_condition
from .discretize import Grid1D, PiecewiseConstant
from .errors import ClosureKitError
from .numkernel import WeightedSpace, numerical_abscissa, scale_of
from .phs import PHSystemSpec, WaveHeatSpec, boundary_check, discretize_L, heat_spec, wave_heat_build

__all__ = [
    "ConfigError",
    "LoadedModel",
    "load_schema",
    "validate_config",
    "config_sha256",
    "parse_complex",
    "parse_matrix",
    "build_model",
]

class ConfigError(ClosureKitError, ValueError):
    """Raised when a configuration does not match the schema."""


def load_schema(name="config"):
    text = resources.files("closurekit").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate_config(cfg):
    """Validate against the config schema; the error names the offending field."""
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {err.message}")
    return cfg


def config_sha256(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def parse_complex(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def parse_matrix(rows):
    if len({len(row) for row in rows}) != 1:
        raise ConfigError("matrix rows have different lengths")
    return np.array([[parse_complex(z) for z in row] for row in rows], dtype=complex)


def _coefficient(v):
    if isinstance(v, dict):
        return PiecewiseConstant(v["breakpoints"], [parse_complex(z) for z in v["values"]])
    return parse_complex(v)


def _matrix_field(v):
    if isinstance(v, dict):
        return PiecewiseConstant(v["breakpoints"], [parse_matrix(m) for m in v["values"]])
    return parse_matrix(v)


@dataclass
class LoadedModel:
    """The operator under study plus hypothesis checks with their evidence.

    ``operator`` is the closed operator (restricted to its boundary kernel
    for constrained models) and ``space`` its inner product. ``rebuild``
    reconstructs the model on a different grid size.
    """

    name: str
    operator: np.ndarray
    space: WeightedSpace
    hypotheses: dict
    extras: dict = field(default_factory=dict)
    ext: tuple | None = None
    rebuild: Callable | None = None

    @property
    def hypotheses_hold(self):
        return all(v["holds"] for v in self.hypotheses.values())


def _constrained_closure_residual(ext_free, s_restr, a21, s_op, rng):
    h1 = s_restr.lift(rng.standard_normal(s_restr.dim) + 1j * rng.standard_normal(s_restr.dim))
    res = closure_identity_residual(ext_free, s_restr.a_free, a21, s_op, h1)
    return res / scale_of(ext_free)


def _ext_dissipative(a_ext, tol):
    ab = numerical_abscissa(a_ext)
    scale = scale_of(a_ext)
    return {"holds": bool(ab <= tol * scale), "abscissa": ab, "scale": scale}


def _build_split(p, tol, rng):
    a21 = parse_matrix(p["a21"])
    n2, n1 = a21.shape
    sp1 = WeightedSpace(n1, parse_matrix(p["weight1"])) if "weight1" in p else None
    sp2 = WeightedSpace(n2, parse_matrix(p["weight2"])) if "weight2" in p else None
    a11, s = parse_matrix(p["a11"]), parse_matrix(p["s"])
    if "a12" in p:
        system = SplitClosureSystem(a11, parse_matrix(p["a12"]), a21, s, sp1, sp2)
    else:
        system = SplitClosureSystem.from_a21(a11, a21, s, sp1, sp2)
    verdict = verify_structure(system, tol["skew_tol"], tol["diss_tol"])
    a_ext = assemble_a_ext(system)
    a_s = assemble_a_s(system)
    h1 = rng.standard_normal(system.n1) + 1j * rng.standard_normal(system.n1)
    res = closure_identity_residual(a_ext, a_s, system.a21, system.s, h1) / scale_of(a_ext)
    hyp = {
        "s_coercive": {"holds": verdict.s_coercive, "nu": verdict.nu},
        "skew_pairing": {"holds": verdict.skew_pairing, "residual": verdict.skew_residual},
        "a11_dissipative": {"holds": verdict.a11_dissipative, "abscissa": verdict.a11_abscissa},
        "a_ext_dissipative": {"holds": verdict.a_ext_dissipative,
                              "abscissa": verdict.a_ext_abscissa},
    }
    extras = {"closure_identity_residual": res, "system": system}
    return LoadedModel("split", a_s, system.space1, hyp, extras, (a_ext, system.product_space))


def _build_coupled(kind, p, tol, rng, n_nodes=None):
    a, b = p.get("interval", [0.0, 1.0])
    n = p["n_nodes"] if n_nodes is None else n_nodes
    spec = CoupledParabolicSpec(
        p["n_components"], Grid1D(float(a), float(b), n), kind,
        [_coefficient(c) for c in p["coefficients"]], _matrix_field(p["potential"]))
    model = build_coupled_operator(spec)
    system = model.as_split_system()
    a_ext = assemble_a_ext(system)
    h1 = rng.standard_normal(model.c.shape[0]) + 1j * rng.standard_normal(model.c.shape[0])
    res = closure_identity_residual(a_ext, model.c, model.a21, model.s, h1) / scale_of(a_ext)
    vcond = check_v_condition(spec)
    hyp = {"potential_dissipative": {"holds": all(vcond.per_piece_dissipative),
                                     "per_piece": vcond.per_piece_dissipative}}
    extras = {"closure_identity_residual": res, "v_condition": vcond.as_dict(), "spec": spec}
    return LoadedModel(f"coupled-{kind}", model.c, model.space, hyp, extras,
                       (a_ext, system.product_space))


def _build_wave_heat(p, tol, rng, n_nodes=None):
    n = p["n_nodes"] if n_nodes is None else n_nodes
    spec = WaveHeatSpec.uniform(n, _coefficient(p.get("s", 1.0)))
    m = wave_heat_build(spec)
    res = _constrained_closure_residual(m.ext_free, m.a_s, m.a21, m.s_op, rng)
    hyp = {
        "s_coercive": {"holds": spec.nu > 0, "nu": spec.nu},
        "a_ext_dissipative": _ext_dissipative(m.a_ext.a_restricted, tol["diss_tol"]),
    }
    return LoadedModel("wave-heat", m.a_s.a_restricted, WeightedSpace(m.a_s.dim), hyp,
                       {"closure_identity_residual": res},
                       (m.a_ext.a_restricted, WeightedSpace(m.a_ext.dim)))


def _build_phs_like(name, spec, tol, rng):
    report = boundary_check(spec)
    m = discretize_L(spec, with_ext=report.p1ext_invertible)
    hyp = {
        "p1ext_invertible": {"holds": report.p1ext_invertible},
        "generation": {"holds": report.generation_psd, "min_eig": report.generation_min_eig},
    }
    extras = {"boundary": report.as_dict()}
    ext = None
    if m.a_ext is not None:
        hyp["a_ext_dissipative"] = _ext_dissipative(m.a_ext.a_restricted, tol["diss_tol"])
        extras["closure_identity_residual"] = _constrained_closure_residual(
            m.a_ext.a_free, m.a_s, m.a21, m.s_op, rng)
        ext = (m.a_ext.a_restricted, WeightedSpace(m.a_ext.dim))
    return LoadedModel(name, m.a_s.a_restricted, WeightedSpace(m.a_s.dim), hyp, extras, ext)


def _build_phs(p, tol, rng, n_nodes=None):
    n = p["n_nodes"] if n_nodes is None else n_nodes
    spec = PHSystemSpec(
        parse_matrix(p["p0"]), parse_matrix(p["p1"]), parse_matrix(p["g0"]),
        parse_matrix(p["g1"]), _matrix_field(p["hamiltonian"]), _matrix_field(p["s"]),
        parse_matrix(p["tilde_wb"]), Grid1D(0.0, 1.0, n))
    return _build_phs_like("phs", spec, tol, rng)


def _build_heat_bc(p, tol, rng, n_nodes=None):
    n = p["n_nodes"] if n_nodes is None else n_nodes
    spec = heat_spec(parse_matrix(p["tilde_wb"]), _coefficient(p.get("s", 1.0)),
                     Grid1D(0.0, 1.0, n))
    return _build_phs_like("heat-general-bc", spec, tol, rng)


def tolerances(cfg):
    t = {"re_tol": None, "skew_tol": 1e-10, "diss_tol": 1e-10}
    t.update(cfg.get("tolerances", {}))
    return t


def build_model(cfg, n_nodes=None):
    """Validate ``cfg`` and build the model, optionally on another grid size."""
    validate_config(cfg)
    tol = tolerances(cfg)
    rng = np.random.default_rng(cfg.get("seed", 0))
    p = cfg["params"]
    kind = cfg["model"]
    if kind == "split":
        if n_nodes is not None:
            raise ConfigError("the split model has no grid to refine")
        return _build_split(p, tol, rng)
    builders = {
        "coupled-heat": lambda n: _build_coupled("heat", p, tol, rng, n),
        "coupled-biharmonic": lambda n: _build_coupled("biharmonic", p, tol, rng, n),
        "wave-heat": lambda n: _build_wave_heat(p, tol, rng, n),
        "phs": lambda n: _build_phs(p, tol, rng, n),
        "heat-general-bc": lambda n: _build_heat_bc(p, tol, rng, n),
    }
    model = builders[kind](n_nodes)
    model.rebuild = lambda n: build_model(cfg, n)
    return model
