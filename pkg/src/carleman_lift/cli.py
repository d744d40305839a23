"""
Command-line entry point: ``carleman-lift <command> [flags]``.

Commands are ``lift``, ``solve``, ``bounds``, ``grid``, ``figure`` and
``classify``. Values come from ``--config`` (a JSON object) and are
overridden by flags. Every run writes ``resolved_config.json`` next to its
outputs.

Exit codes: 0 success, 2 usage or parse error, 3 precondition failure,
4 numeric failure.
"""

import argparse
import itertools
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import carleman, carleman_fourier as cf, experiments
from .casestudy import (CaseParams, cf_guaranteed_time_range, classify_trajectory, detect_blowup,
                        exact_solution)
from .errors import (AssumptionViolated, CarlemanError, InitialOutOfStrip, InsufficientCoefficients,
                     NegativeFrequencyPresent, StepSizeUnderflow, Unclassified, UnknownFigureId)
from .numerics import TimeGrid, rk45
from .trigpoly import TrigPoly, default_bound_constants, maclaurin

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_OUT = "carleman_lift_out"
N_CURVE = 64

PRECONDITION_ERRORS = (NegativeFrequencyPresent, InitialOutOfStrip, AssumptionViolated,
                       InsufficientCoefficients, Unclassified)


class UsageError(Exception):
    pass


# --- parsing helpers --------------------------------------------------------

def parse_complex(text):
    """``"re,im"``, a bare real, or a ``[re, im]`` list."""
    if isinstance(text, (list, tuple)):
        if len(text) != 2:
            raise UsageError(f"expected [re, im], got {text!r}")
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float, complex)):
        return complex(text)
    parts = str(text).split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise UsageError(f"cannot parse complex value {text!r}; use re,im")


def parse_int_list(value):
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    try:
        return [int(v) for v in str(value).split(",")]
    except ValueError:
        raise UsageError(f"cannot parse integer list {value!r}")


def load_g(value):
    """TrigPoly from inline JSON or a path to a JSON file."""
    if isinstance(value, dict):
        data = value
    else:
        text = str(value)
        path = Path(text)
        if not text.lstrip().startswith("{") and path.exists():
            text = path.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed g spec: {exc}")
    try:
        return TrigPoly.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed g spec: {exc}")


def format_complex(z):
    # adding 0.0 folds negative zero into zero
    return f"{z.real + 0.0:.17g}{z.imag + 0.0:+.17g}i"


def complex_json(z):
    z = complex(z)
    return [z.real, z.imag]


def _num(v):
    """JSON-safe float: infinities become strings."""
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


# --- configuration ----------------------------------------------------------

FLAG_KEYS = ("out", "workers", "png", "scheme", "N", "x0", "a", "b", "phi", "tstar", "g", "steps",
             "id", "resolution", "nx", "ny", "re_range", "im_range", "R")


def resolve_config(args):
    """Merge the JSON config file with explicit flags (flags win)."""
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
    for key in FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    cfg["command"] = args.command
    cfg.setdefault("out", os.environ.get("CARLEMAN_LIFT_OUT", DEFAULT_OUT))
    cfg.setdefault("workers", 1)
    cfg.setdefault("png", False)
    return cfg


def governing_function(cfg):
    """``g`` from the config, or the case study ``a (1 - b exp(ix))``."""
    if cfg.get("g") is not None:
        return load_g(cfg["g"])
    a = _param_a(cfg)
    b = parse_complex(cfg.get("b", 1.0))
    return TrigPoly.case_study(a, b)


def _param_a(cfg):
    if cfg.get("phi") is not None:
        phi = float(cfg["phi"])
        return complex(math.cos(phi), math.sin(phi))
    return parse_complex(cfg.get("a", 1.0))


def case_study_params(g):
    """``(a, b)`` when ``g = a (1 - b exp(ix))``, else None."""
    if g.M != 1 or g[-1] != 0 or g[0] == 0:
        return None
    return g[0], -g[1] / g[0]


def _unit_case(g):
    ab = case_study_params(g)
    if ab is None:
        return None
    a, b = ab
    if b == 1 and abs(abs(a) - 1) <= 1e-12 and a.real >= -1e-12:
        return a
    return None


def _out_dir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config(out, cfg):
    clean = {}
    for k, v in sorted(cfg.items()):
        if isinstance(v, complex):
            v = complex_json(v)
        elif isinstance(v, TrigPoly):
            v = v.to_json()
        clean[k] = v
    path = out / "resolved_config.json"
    path.write_text(json.dumps(clean, indent=2, sort_keys=True) + "\n")
    return path


def _write_json(path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _require_N(cfg, default=None):
    N = cfg.get("N", default)
    if N is None:
        raise UsageError("--N is required")
    vals = parse_int_list(N)
    if any(n < 1 for n in vals):
        raise UsageError("N must be a positive integer")
    return vals


# --- commands ---------------------------------------------------------------

def build_section(g, scheme, N):
    """Matrix and affine term of the requested section."""
    if scheme == "carleman":
        sec = carleman.build_carleman_section(maclaurin(g, N), N)
        return sec.A, sec.a
    if scheme == "cf":
        sec = cf.build_cf_section(g, N)
        return sec.matrix, np.zeros(sec.dimension, dtype=complex)
    if scheme == "concise-cf":
        sec = cf.build_concise_cf(g, N)
        return sec.G, np.zeros(N, dtype=complex)
    raise UsageError(f"unknown scheme {scheme!r}")


def matrix_summary(A):
    rows, cols = np.nonzero(A)
    diff = cols - rows
    return {
        "dimension": int(A.shape[0]),
        "upper_bandwidth": int(max(diff.max(), 0)) if diff.size else 0,
        "lower_bandwidth": int(max(-diff.min(), 0)) if diff.size else 0,
        "upper_triangular": bool(np.all(np.tril(A, -1) == 0)),
        "nonzeros": int(diff.size),
    }


def cmd_lift(cfg):
    g = governing_function(cfg)
    N = _require_N(cfg)[0]
    scheme = cfg.get("scheme", "carleman")
    A, aff = build_section(g, scheme, N)
    out = _out_dir(cfg)
    lines = [",".join(format_complex(z) for z in row) for row in A]
    (out / "lift_matrix.csv").write_text("\n".join(lines) + "\n")
    summary = matrix_summary(A)
    summary.update(scheme=scheme, N=N, affine=[complex_json(z) for z in aff])
    _write_json(out / "lift_summary.json", summary)
    _write_config(out, {**cfg, "g": g})
    print(json.dumps({k: summary[k] for k in ("dimension", "upper_bandwidth", "upper_triangular")}))
    return EXIT_OK


def _reference(g, x0, ts):
    """
    Reference ``x(t)`` with per-sample flags: the closed form for the unit
    case study, the adaptive integrator otherwise.
    """
    flags = np.array(["ok"] * ts.size, dtype=object)
    x = np.full(ts.size, complex(np.nan, np.nan))
    a = _unit_case(g)
    if a is not None:
        p = CaseParams(a, x0)
        t0 = detect_blowup(p, float(ts[-1]))
        keep = ts < t0 if t0 is not None else np.ones(ts.size, dtype=bool)
        if t0 is not None:
            # stay clear of the singular point itself
            keep &= np.abs(ts - t0) > 1e-9
            flags[~keep] = "blowup"
        x[keep] = exact_solution(p, ts[keep])
        return x, flags, "closed-form"
    grid = TimeGrid(float(ts[0]), float(ts[-1]), ts.size - 1)
    try:
        tr = rk45(lambda t, y: g(y), [x0], grid, rtol=1e-10, atol=1e-12)
    except StepSizeUnderflow as exc:
        tr = exc.trajectory
    x[tr.valid] = tr.component(0)[tr.valid]
    flags[~tr.valid] = "blowup"
    return x, flags, "rk45"


def cmd_solve(cfg):
    g = governing_function(cfg)
    N = _require_N(cfg)[0]
    scheme = cfg.get("scheme", "carleman")
    x0 = parse_complex(cfg.get("x0", 0.0))
    t1 = float(cfg.get("tstar", 0.5))
    steps = int(cfg.get("steps", 256))
    if steps < 1:
        raise UsageError("steps must be a positive integer")
    if not t1 > 0:
        raise UsageError("tstar must be positive")
    grid = TimeGrid(0.0, t1, steps)
    ts = grid.samples

    if scheme == "carleman":
        traj = carleman.solve_finite_section(carleman.build_carleman_section(maclaurin(g, N), N), x0, grid)
    elif scheme == "cf":
        traj = cf.solve_cf_section(cf.build_cf_section(g, N), x0, grid)
    elif scheme == "concise-cf":
        traj = cf.solve_concise_cf(cf.build_concise_cf(g, N), x0, grid)
    else:
        raise UsageError(f"unknown scheme {scheme!r}")

    ref, flags, prov = _reference(g, x0, ts)
    first = traj.component(0)
    with np.errstate(over="ignore", invalid="ignore"):
        if scheme == "carleman":
            err = np.abs(first - ref)
        else:
            err = np.abs(first * np.exp(-1j * ref) - 1.0)
    flags[~traj.valid & (flags == "ok")] = "nonfinite"

    header = ["t"]
    cols = [ts]
    for k in range(traj.dim):
        header += [f"re_y{k + 1}", f"im_y{k + 1}"]
        cols += [traj.y[:, k].real, traj.y[:, k].imag]
    header += ["re_ref", "im_ref", "error", "flag"]
    cols += [ref.real, ref.imag, err, flags]
    out = _out_dir(cfg)
    experiments.write_table_csv(out / "trajectory.csv", header, cols)
    _write_config(out, {**cfg, "g": g, "reference": prov})
    bad = np.flatnonzero(flags != "ok")
    report = {"samples": int(ts.size), "reference": prov,
              "first_flagged_t": _num(ts[bad[0]]) if bad.size else None}
    print(json.dumps(report))
    return EXIT_OK


def _carleman_entry(g, x0, Ns):
    C0, R0 = default_bound_constants(g)
    rep = carleman.carleman_bound_report(C0, R0, x0)
    ts = np.linspace(0.0, rep.T_star, N_CURVE)
    entry = {"C0": C0, "R0": R0, "tilde_R0": rep.tilde_R0, "T_star": _num(rep.T_star),
             "curves": {str(N): [_num(v) for v in np.atleast_1d(rep.bound(N, ts))] for N in Ns},
             "t": [_num(v) for v in ts]}
    if abs(x0) > 0:
        M0 = 2.0 * abs(x0)
        entry["local_state"] = {"M0": M0, "T": _num(carleman.local_state_bound(C0, R0, x0, M0))}
    return entry


def _cf_entry(g, x0, Ns, R):
    unit = _unit_case(g)
    if R is None:
        R = cf.optimal_R(x0)
    R = float(R)
    if unit is not None:
        rep = cf.case_study_bound_report(x0, R)
    else:
        rep = cf.cf_bound_report(g, x0, R)
    ts = np.linspace(0.0, rep.T_cf_star, N_CURVE)
    entry = {"R": rep.R, "D0": rep.D0, "C0": rep.C0, "T_cf_star": rep.T_cf_star,
             "curves": {str(N): [_num(v) for v in rep.bound(N, ts)] for N in Ns},
             "t": [_num(v) for v in ts]}
    if unit is not None:
        entry["T_cf_star_case_study"] = cf_guaranteed_time_range(x0.imag)
    try:
        gr = cf.global_rate(g, x0, R)
        entry["global"] = {"applicable": True, "rate": gr.rate, "mu0": gr.mu0, "D0": gr.D0,
                           "converges": gr.converges}
    except AssumptionViolated as exc:
        entry["global"] = {"applicable": False, "clause": exc.clause, "reason": str(exc)}
    return entry


def cmd_bounds(cfg):
    g = governing_function(cfg)
    x0 = parse_complex(cfg.get("x0", 0.0))
    Ns = _require_N(cfg, default=[1, 5, 10])
    scheme = cfg.get("scheme", "both")
    R = cfg.get("R")
    report = {"x0": complex_json(x0), "N": Ns}
    status = EXIT_OK
    if scheme in ("carleman", "both"):
        report["carleman"] = _carleman_entry(g, x0, Ns)
    if scheme in ("cf", "concise-cf", "both"):
        try:
            report["carleman_fourier"] = _cf_entry(g, x0, Ns, R)
        except InitialOutOfStrip as exc:
            report["carleman_fourier"] = {"error": "strip", "reason": str(exc)}
            status = EXIT_PRECONDITION
    if scheme not in ("carleman", "cf", "concise-cf", "both"):
        raise UsageError(f"unknown scheme {scheme!r}")
    out = _out_dir(cfg)
    _write_json(out / "bounds.json", report)
    _write_config(out, {**cfg, "g": g})
    if status != EXIT_OK:
        print(report["carleman_fourier"]["reason"], file=sys.stderr)
    summary = {k: report[k].get(f) for k, f in (("carleman", "T_star"), ("carleman_fourier", "T_cf_star"))
               if k in report}
    print(json.dumps(summary))
    return status


def grid_specs(cfg):
    """Expand list-valued ``a``, ``b`` and ``N`` into one GridSpec each."""
    scheme = cfg.get("scheme", "carleman")
    if scheme == "concise-cf":
        scheme = "cf"
    if scheme not in ("carleman", "cf"):
        raise UsageError(f"unknown scheme {scheme!r}")

    def values(key, default):
        # a list of [re, im] pairs or "re,im" strings sweeps; anything else is one value
        v = cfg.get(key, default)
        if isinstance(v, list) and v and isinstance(v[0], (list, str)):
            return [parse_complex(x) for x in v]
        return [parse_complex(v)]

    a_vals = values("a", 1.0) if cfg.get("phi") is None else [_param_a(cfg)]
    b_vals = values("b", 1.0)
    N_vals = _require_N(cfg, default=10)
    res = cfg.get("resolution")
    nx = int(cfg.get("nx", res or 41))
    ny = int(cfg.get("ny", res or 41))
    rr = tuple(cfg.get("re_range", (-2.0, 2.0)))
    ir = tuple(cfg.get("im_range", (-2.0, 2.0)))
    T = float(cfg.get("tstar", 0.5))
    specs = []
    try:
        for N, a, b in itertools.product(N_vals, a_vals, b_vals):
            specs.append(experiments.GridSpec(rr, ir, nx, ny, T, N, scheme, a, b))
    except ValueError as exc:
        raise UsageError(str(exc))
    return specs


def cmd_grid(cfg):
    specs = grid_specs(cfg)
    out = _out_dir(cfg)
    workers = int(cfg.get("workers", 1))
    files = []
    for k, spec in enumerate(specs):
        grid = experiments.error_grid(spec, workers)
        name = f"grid_{k:02d}"
        path = experiments.write_grid_csv(grid, out / f"{name}.csv")
        files.append(path.name)
        experiments.write_meta(path, {"grid": spec.to_json()})
        if cfg.get("png"):
            experiments.write_png(grid.values, out / f"{name}.png")
    _write_config(out, cfg)
    print(json.dumps({"grids": files}))
    return EXIT_OK


def cmd_figure(cfg):
    fig_id = cfg.get("id")
    if fig_id not in experiments.FIGURE_IDS:
        raise UsageError(f"unknown figure id {fig_id!r}; choose from {', '.join(experiments.FIGURE_IDS)}")
    out = _out_dir(cfg)
    files = experiments.reproduce_figure(fig_id, out, cfg.get("resolution"), bool(cfg.get("png")),
                                         int(cfg.get("workers", 1)))
    _write_config(out, cfg)
    print(json.dumps({"files": sorted(p.name for p in files)}))
    return EXIT_OK


def cmd_classify(cfg):
    a = _param_a(cfg)
    x0 = parse_complex(cfg.get("x0", 0.0))
    try:
        p = CaseParams(a, x0)
    except ValueError as exc:
        raise UsageError(str(exc))
    cls = classify_trajectory(p)
    result = {"a": complex_json(a), "x0": complex_json(x0), "kind": cls.kind.value, "t0": cls.t0}
    out = _out_dir(cfg)
    _write_json(out / "classification.json", result)
    _write_config(out, cfg)
    print(str(cls))
    return EXIT_OK


COMMANDS = {"lift": cmd_lift, "solve": cmd_solve, "bounds": cmd_bounds, "grid": cmd_grid,
            "figure": cmd_figure, "classify": cmd_classify}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameter values")
    common.add_argument("--out", help="output directory (default $CARLEMAN_LIFT_OUT or ./%s)" % DEFAULT_OUT)
    common.add_argument("--workers", type=int)
    common.add_argument("--png", action="store_true", default=None)
    common.add_argument("--scheme", choices=["carleman", "cf", "concise-cf", "both"])
    common.add_argument("--N", help="order, or comma-separated orders")
    common.add_argument("--x0", help="initial value re,im")
    common.add_argument("--a", help="case-study coefficient re,im")
    common.add_argument("--b", help="case-study coefficient re,im")
    common.add_argument("--phi", type=float, help="a = exp(i phi)")
    common.add_argument("--tstar", type=float, help="final time")
    common.add_argument("--g", help="TrigPoly JSON, inline or as a path")

    parser = argparse.ArgumentParser(prog="carleman-lift", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("lift", parents=[common], help="dump a finite-section matrix")
    p = sub.add_parser("solve", parents=[common], help="solve a finite section")
    p.add_argument("--steps", type=int)
    p = sub.add_parser("bounds", parents=[common], help="convergence bound report")
    p.add_argument("--R", type=float)
    p = sub.add_parser("grid", parents=[common], help="error surface over x0")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--resolution", type=int)
    p = sub.add_parser("figure", parents=[common], help="data behind a figure")
    p.add_argument("id", nargs="?")
    p.add_argument("--resolution", type=int)
    sub.add_parser("classify", parents=[common], help="long-time behavior of the exact solution")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, UnknownFigureId) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PRECONDITION_ERRORS as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except StepSizeUnderflow as exc:
        print(f"numeric failure at t={exc.t}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CarlemanError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
