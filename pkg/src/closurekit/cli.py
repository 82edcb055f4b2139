"""Command line front end.

Exit codes: 0 on success, 2 when the input violates a structural
hypothesis (non-coercive ``S``, failed generation test, ...), 1 on usage,
I/O, schema or numerical errors and on a failed ``reproduce`` case.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .config import ConfigError, build_model, config_sha256, tolerances, validate_config
from .errors import ClosureKitError, HypothesisError
from .numkernel import eig
from .reproduce import CASES, run_case
from .stability import (
    decay_rate_fit,
    numerical_range_boundary,
    propagate,
    resolvent_norm_scan,
    sector_half_angle,
    stability_verdict,
)

__all__ = ["main", "run"]

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS = 0, 1, 2


def _cplx_list(vals):
    return [[float(z.real), float(z.imag)] for z in np.asarray(vals, dtype=complex)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items() if not k.startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _parse_grids(text):
    try:
        grids = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid list must be integers, got {text!r}")
    if len(grids) < 2 or any(n < 3 for n in grids):
        raise argparse.ArgumentTypeError("need at least two grid sizes, each >= 3")
    return grids


def build_parser():
    parser = argparse.ArgumentParser(
        prog="closurekit",
        description="Closure-relation operators: hypothesis checks, spectra and stability.")
    parser.add_argument("--version", action="version", version=f"closurekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--output", "-o", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"),
                       help="override the output format from the config")
        p.add_argument("--operator", choices=("a_s", "a_ext"), default="a_s",
                       help="analyze the closed operator (default) or the extended one")
        return p

    with_config(sub.add_parser("check", help="validate hypotheses and classify stability"))
    with_config(sub.add_parser("spectrum", help="eigenvalue table"))
    sim = with_config(sub.add_parser("simulate", help="propagate and record norms"))
    sim.add_argument("--t-end", type=float, required=True)
    sim.add_argument("--dt", type=float, required=True)
    sim.add_argument("--scheme", choices=("crank-nicolson", "backward-euler", "expm"),
                     default="crank-nicolson")
    res = with_config(sub.add_parser("resolvent", help="resolvent norms along the imaginary axis"))
    res.add_argument("--omega-min", type=float, required=True)
    res.add_argument("--omega-max", type=float, required=True)
    res.add_argument("--samples", type=int, default=101)
    sw = with_config(sub.add_parser("sweep", help="grid refinement study"))
    sw.add_argument("--grids", type=_parse_grids, required=True,
                    help="comma separated node counts, e.g. 50,100,200")
    rep = sub.add_parser("reproduce", help="run a canned worked example")
    rep.add_argument("case", choices=sorted(CASES))
    rep.add_argument("--output", "-o")
    return parser


def _select(model, which):
    if which == "a_ext":
        if model.ext is None:
            raise ConfigError("this model has no extended operator")
        return model.ext
    return model.operator, model.space


def _gap(vals, scale):
    nonzero = vals[np.abs(vals) > 1e-8 * scale]
    return float(-nonzero.real.max()) if nonzero.size else float("inf")


def cmd_check(model, args, tol):
    a, space = _select(model, args.operator)
    verdict = stability_verdict(a, space, re_tol=tol["re_tol"])
    pts = numerical_range_boundary(a, space, 64)
    result = {
        "hypotheses": model.hypotheses,
        "stability": verdict.as_dict(),
        "sector_half_angle": sector_half_angle(pts, 1e-12 * max(np.abs(pts).max(), 1e-300)),
        **{k: v for k, v in model.extras.items() if k not in ("system", "spec")},
    }
    table = [["item", "value"]] + [[f"hypothesis:{k}", v["holds"]]
                                   for k, v in model.hypotheses.items()]
    table += [["classification", verdict.classification], ["abscissa", verdict.abscissa],
              ["growth_bound", verdict.growth_bound],
              ["sector_half_angle", result["sector_half_angle"]]]
    return result, table


def cmd_spectrum(model, args, tol):
    a, _ = _select(model, args.operator)
    report, _ = eig(a, re_tol=tol["re_tol"], check=False)
    result = {
        "eigenvalues": _cplx_list(report.eigenvalues),
        "max_real_part": report.max_real_part,
        "peripheral": _cplx_list(report.peripheral),
        "re_tol": report.re_tol,
    }
    table = [["index", "re", "im"]] + [[k, z.real, z.imag]
                                        for k, z in enumerate(report.eigenvalues)]
    return result, table


def cmd_simulate(model, args, tol, seed):
    a, space = _select(model, args.operator)
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(a.shape[0]) + 1j * rng.standard_normal(a.shape[0])
    x0 /= space.norm(x0)
    traj = propagate(a, space, x0, args.t_end, args.dt, args.scheme)
    try:
        rate = decay_rate_fit(traj)
    except ValueError:
        rate = None
    result = {"scheme": args.scheme, "times": traj.times.tolist(), "norms": traj.norms.tolist(),
              "decay_rate": rate,
              "max_norm_increase": float(np.max(np.diff(traj.norms), initial=0.0))}
    table = [["t", "norm"]] + [[t, v] for t, v in zip(traj.times, traj.norms)]
    return result, table


def cmd_resolvent(model, args, tol):
    if args.samples < 1 or args.omega_max < args.omega_min:
        raise ConfigError("need samples >= 1 and omega-max >= omega-min")
    a, space = _select(model, args.operator)
    omegas = np.linspace(args.omega_min, args.omega_max, args.samples)
    norms = resolvent_norm_scan(a, omegas, space)
    result = {"omega": omegas.tolist(), "norm": norms.tolist(),
              "singular": omegas[np.isinf(norms)].tolist(), "sup": float(norms.max())}
    table = [["omega", "norm"]] + [[w, v] for w, v in zip(omegas, norms)]
    return result, table


def cmd_sweep(model, args, tol):
    if model.rebuild is None:
        raise ConfigError("the split model has no grid to refine")
    rows = []
    for n in args.grids:
        m = model.rebuild(n)
        a, space = _select(m, args.operator)
        report, _ = eig(a, re_tol=tol["re_tol"], check=False)
        vals = report.eigenvalues
        scale = np.linalg.norm(a, 2)
        rows.append({"n_nodes": n, "dim": int(a.shape[0]), "max_real_part": report.max_real_part,
                     "gap": _gap(vals, scale),
                     "peripheral_count": int(report.peripheral.size)})
    gaps = [r["gap"] for r in rows]
    shrinking = all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:])) and gaps[-1] > 0
    m = model.rebuild(args.grids[-1])
    a, space = _select(m, args.operator)
    verdict = stability_verdict(a, space, re_tol=tol["re_tol"], gap_shrinking=shrinking)
    result = {"grids": rows, "gap_shrinking": shrinking, "finest": verdict.as_dict()}
    table = [["n_nodes", "dim", "max_real_part", "gap"]] + [
        [r["n_nodes"], r["dim"], r["max_real_part"], r["gap"]] for r in rows]
    return result, table


def _emit(report, table, fmt, path, stdout):
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in table:
            writer.writerow([_jsonable(v) if isinstance(v, (float, np.generic)) else v
                             for v in row])
        text = buf.getvalue()
    else:
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def run(argv=None, stdout=None, stderr=None):
    """Entry point returning the exit code; streams default to ``sys.stdout``/``sys.stderr``."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    if args.command == "reproduce":
        try:
            passed, checks = run_case(args.case)
        except ClosureKitError as exc:
            stderr.write(f"error: numerical failure in case {args.case}: {exc}\n")
            return EXIT_USAGE
        report = {"tool": "closurekit", "version": __version__, "command": "reproduce",
                  "case": args.case, "passed": passed,
                  "result": {"checks": [c.as_dict() for c in checks]}}
        for c in checks:
            stderr.write(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.expected}\n")
        try:
            _emit(report, None, "json", args.output, stdout)
        except OSError as exc:
            stderr.write(f"error: {exc}\n")
            return EXIT_USAGE
        return EXIT_OK if passed else EXIT_USAGE

    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        validate_config(cfg)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE

    tol = tolerances(cfg)
    fmt = args.format or cfg.get("output", {}).get("format", "json")
    try:
        model = build_model(cfg)
        handlers = {"check": cmd_check, "spectrum": cmd_spectrum, "resolvent": cmd_resolvent,
                    "sweep": cmd_sweep}
        if args.command == "simulate":
            result, table = cmd_simulate(model, args, tol, cfg.get("seed", 0))
        else:
            result, table = handlers[args.command](model, args, tol)
    except HypothesisError as exc:
        stderr.write(f"hypothesis violated: {exc}\n")
        return EXIT_HYPOTHESIS
    except ConfigError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ClosureKitError, ValueError) as exc:
        stderr.write(f"error: numerical failure in {args.command}: {exc}\n")
        return EXIT_USAGE

    report = {"tool": "closurekit", "version": __version__, "command": args.command,
              "model": model.name, "config_sha256": config_sha256(cfg),
              "hypotheses_hold": model.hypotheses_hold, "result": result}
    try:
        _emit(report, table, fmt, args.output, stdout)
    except OSError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    if args.command == "check" and not model.hypotheses_hold:
        failed = [k for k, v in model.hypotheses.items() if not v["holds"]]
        stderr.write(f"hypothesis violated: {', '.join(failed)}\n")
        return EXIT_HYPOTHESIS
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
