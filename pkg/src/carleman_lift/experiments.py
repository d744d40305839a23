"""
Error surfaces ``E_C`` and ``E_CF`` over grids of initial values, figure
reproduction, and CSV/PNG persistence.
"""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .carleman import build_carleman_section, solve_finite_section
from .carleman_fourier import build_concise_cf, solve_concise_cf
from .casestudy import (CaseParams, actual_time_range, cf_guaranteed_time_range, classify_trajectory,
                        detect_blowup, exact_solution, exp_neg_ix, h_phi, max_h)
from .errors import StepSizeUnderflow, UnknownFigureId
from .numerics import TimeGrid, rk45
from .trigpoly import TrigPoly, eval_trigpoly, maclaurin

CLAMP_LO, CLAMP_HI = -5.0, 2.0
N_TIME = 256
CSV_HEADER = "re_x0,im_x0,value,flag,provenance"
PHI_CSV_HEADER = "phi,im_x0,value,flag,provenance"


@dataclass
class GridSpec:
    """
    Grid of initial values with the parameters of one error surface.

    ``x_axis="re"`` sweeps ``Re x0`` over ``re_range``; ``x_axis="phi"``
    sweeps ``a = exp(i phi)`` over ``phi_range`` at ``Re x0 = 0``.
    """

    re_range: tuple = (-2.0, 2.0)
    im_range: tuple = (-2.0, 2.0)
    nx: int = 41
    ny: int = 41
    T_star: float = 0.5
    N: int = 10
    scheme: str = "carleman"
    a: complex = 1.0
    b: complex = 1.0
    x_axis: str = "re"
    phi_range: tuple = (-math.pi / 2, math.pi / 2)
    n_time: int = N_TIME
    reference: str = "closed-form"
    notes: str = ""

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("nx and ny must be at least 2")
        if not self.T_star > 0:
            raise ValueError("T_star must be positive")
        if self.scheme not in ("carleman", "cf"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.reference not in ("closed-form", "rk45"):
            raise ValueError(f"unknown reference {self.reference!r}")
        if self.x_axis not in ("re", "phi"):
            raise ValueError(f"unknown x axis {self.x_axis!r}")
        self.a = complex(self.a)
        self.b = complex(self.b)

    @property
    def xs(self):
        lo, hi = self.phi_range if self.x_axis == "phi" else self.re_range
        return np.linspace(lo, hi, self.nx)

    @property
    def ys(self):
        return np.linspace(*self.im_range, self.ny)

    def to_json(self):
        d = asdict(self)
        d["a"] = [self.a.real, self.a.imag]
        d["b"] = [self.b.real, self.b.imag]
        d["re_range"] = list(self.re_range)
        d["im_range"] = list(self.im_range)
        d["phi_range"] = list(self.phi_range)
        return d


@dataclass
class ErrorGrid:
    spec: GridSpec
    values: np.ndarray      # clamped log10 errors, (ny, nx)
    raw: np.ndarray         # unclamped
    flags: np.ndarray       # "ok" | "blowup" | "nonfinite"
    provenance: np.ndarray  # reference used per cell
    closed_form: np.ndarray = None
    extra: dict = field(default_factory=dict)


def clamp(v):
    return np.clip(np.nan_to_num(v, nan=CLAMP_HI, posinf=CLAMP_HI, neginf=CLAMP_LO), CLAMP_LO, CLAMP_HI)


def _log10_max(dev):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mag = np.abs(dev)
    if not np.all(np.isfinite(mag)):
        return math.inf
    peak = float(np.max(mag))
    return -math.inf if peak == 0.0 else math.log10(peak)


def reference_exp_neg_ix(a, b, x0, t):
    """
    ``exp(-i x(t))`` for ``dx/dt = a (1 - b exp(ix))``.

    ``u = exp(-ix)`` obeys the linear equation ``du/dt = -ia (u - b)``, so
    ``u(t) = b + (exp(-i x0) - b) exp(-iat)`` for every ``a`` and ``b``.
    """
    t = np.asarray(t, dtype=float)
    return b + (np.exp(-1j * x0) - b) * np.exp(-1j * a * t)


def reference_blowup(a, b, x0, horizon, tol=1e-10):
    """
    Earliest ``t0`` in ``(0, horizon]`` where ``exp(-i x)`` vanishes, or None.

    The zeros are ``t_k = i (Log q + 2 pi i k) / a`` with
    ``q = b / (b - exp(-i x0))``; only real ones count.
    """
    if b == 1 and abs(abs(a) - 1) <= 1e-12 and a.real >= -1e-12:
        return detect_blowup(CaseParams(a, x0), horizon)
    d = b - np.exp(-1j * x0)
    if d == 0 or b == 0:
        return None
    log_q = np.log(b / d)
    # real t needs Im(t_k) = 0; k ranges over the windings reachable by the horizon
    k_max = int(math.ceil(abs(a) * horizon / (2 * math.pi))) + 1
    best = None
    for k in range(-k_max, k_max + 1):
        tk = 1j * (log_q + 2j * math.pi * k) / a
        if abs(tk.imag) <= tol * (1 + abs(tk)) and 0 < tk.real <= horizon:
            best = tk.real if best is None else min(best, tk.real)
    return best


def _carleman_cell(args):
    a, b, x0, T, N, n_time, reference = args
    g = TrigPoly.case_study(a, b)
    sec = build_carleman_section(maclaurin(g, N), N)
    grid = TimeGrid.with_points(T, n_time)
    ts = grid.samples
    if reference == "rk45":
        prov = "rk45"
        try:
            ref = rk45(lambda t, y: a * (1 - b * np.exp(1j * y)), [x0], grid, rtol=1e-10, atol=1e-12)
        except StepSizeUnderflow:
            return CLAMP_HI, "blowup", prov
        if not ref.all_valid:
            return CLAMP_HI, "blowup", prov
        e_neg = np.exp(-1j * ref.component(0))
    else:
        prov = "closed-form"
        if reference_blowup(a, b, x0, T) is not None:
            return CLAMP_HI, "blowup", prov
        e_neg = reference_exp_neg_ix(a, b, x0, ts)
    tr = solve_finite_section(sec, x0, grid)
    if not tr.all_valid:
        return CLAMP_HI, "nonfinite", prov
    with np.errstate(over="ignore", invalid="ignore"):
        dev = np.exp(1j * tr.component(0)) * e_neg - 1.0
    val = _log10_max(dev)
    return val, ("nonfinite" if val == math.inf else "ok"), prov


def cf_closed_form(phi, im_x0, T, N, mh=None):
    """``N (-Im x0 log10 e + (1/2) log10 max_{[0,T]} h(phi, t))``."""
    if mh is None:
        mh = max_h(phi, T)
    return N * (-im_x0 * math.log10(math.e) + 0.5 * math.log10(mh))


def _cf_cell(args):
    a, x0, T, N, n_time = args
    p = CaseParams(a, x0)
    if detect_blowup(p, T) is not None:
        return CLAMP_HI, "blowup", "closed-form"
    grid = TimeGrid.with_points(T, n_time)
    sec = build_concise_cf(TrigPoly.case_study(a), N)
    z = solve_concise_cf(sec, x0, grid).component(0)
    val = _log10_max(z * exp_neg_ix(p, grid.samples) - 1.0)
    return val, "ok", "closed-form"


def run_cells(func, jobs, workers=1):
    """Evaluate independent cells, in order, optionally on a process pool."""
    if workers is None or workers <= 1 or len(jobs) < 2:
        return [func(j) for j in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=chunk))


def _cell_params(spec):
    for im in spec.ys:
        for x in spec.xs:
            if spec.x_axis == "phi":
                yield complex(math.cos(x), math.sin(x)), complex(0.0, im)
            else:
                yield spec.a, complex(x, im)


def _assemble(spec, results, closed=None):
    raw = np.array([r[0] for r in results], dtype=float).reshape(spec.ny, spec.nx)
    flags = np.array([r[1] for r in results], dtype=object).reshape(spec.ny, spec.nx)
    prov = np.array([r[2] for r in results], dtype=object).reshape(spec.ny, spec.nx)
    return ErrorGrid(spec, clamp(raw), raw, flags, prov, closed)


def error_grid_carleman(spec, workers=1):
    """``E_C`` per cell: max over 256 samples of ``log10|exp(i(x_{1,N} - x)) - 1|``."""
    if spec.scheme != "carleman":
        raise ValueError("spec.scheme must be 'carleman'")
    jobs = [(a, spec.b, x0, spec.T_star, spec.N, spec.n_time, spec.reference) for a, x0 in _cell_params(spec)]
    return _assemble(spec, run_cells(_carleman_cell, jobs, workers))


def error_grid_cf(spec, workers=1):
    """
    ``E_CF`` per cell from the solved concise section; the closed form
    ``N (-Im x0 log10 e + (1/2) log10 max h)`` is kept alongside.
    """
    if spec.scheme != "cf":
        raise ValueError("spec.scheme must be 'cf'")
    if spec.b != 1:
        raise ValueError("E_CF needs the case-study governing function (b = 1)")
    jobs = [(a, x0, spec.T_star, spec.N, spec.n_time) for a, x0 in _cell_params(spec)]
    results = run_cells(_cf_cell, jobs, workers)
    closed = np.empty((spec.ny, spec.nx))
    mh_cache = {}
    for idx, (a, x0) in enumerate(_cell_params(spec)):
        phi = math.atan2(a.imag, a.real)
        if phi not in mh_cache:
            mh_cache[phi] = max_h(phi, spec.T_star)
        closed.flat[idx] = cf_closed_form(phi, x0.imag, spec.T_star, spec.N, mh_cache[phi])
    return _assemble(spec, results, closed)


def error_grid(spec, workers=1):
    return error_grid_carleman(spec, workers) if spec.scheme == "carleman" else error_grid_cf(spec, workers)


# --- persistence ------------------------------------------------------------

def _fmt(v):
    return f"{v:.17g}"


def write_grid_csv(grid, path):
    spec = grid.spec
    header = PHI_CSV_HEADER if spec.x_axis == "phi" else CSV_HEADER
    lines = [header]
    for j, im in enumerate(spec.ys):
        for i, x in enumerate(spec.xs):
            lines.append(",".join([_fmt(x), _fmt(im), _fmt(grid.values[j, i]),
                                   str(grid.flags[j, i]), str(grid.provenance[j, i])]))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_grid_csv(path):
    """Rows of the grid CSV as a list of dicts (numeric fields as floats)."""
    rows = Path(path).read_text().strip().splitlines()
    keys = rows[0].split(",")
    out = []
    for line in rows[1:]:
        parts = line.split(",")
        rec = dict(zip(keys, parts))
        for k in keys[:3]:
            rec[k] = float(rec[k])
        out.append(rec)
    return out


def write_table_csv(path, header, columns):
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(float(v)) if isinstance(v, (float, np.floating, int, np.integer))
                              else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def write_meta(path, payload):
    meta = Path(str(path).replace(".csv", "") + ".meta.json")
    meta.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return meta


def write_png(values, path, vmin=CLAMP_LO, vmax=CLAMP_HI, extent=None):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.imsave(path, np.asarray(values, dtype=float), cmap="viridis", vmin=vmin, vmax=vmax,
               origin="lower")
    return Path(path)


# --- figures ----------------------------------------------------------------

A_COLUMNS = [(-1j, "a-neg-i"), (1 + 0j, "a1"), (1j, "a-i")]
FIGURE_IDS = ("fig1", "fig2", "fig3-left", "fig3-right", "fig4-top", "fig4-bottom", "fig5")


def _emit_grid(grid, out, name, png, files):
    path = write_grid_csv(grid, out / f"{name}.csv")
    files.append(path)
    files.append(write_meta(path, {"grid": grid.spec.to_json()}))
    if png:
        files.append(write_png(grid.values, out / f"{name}.png"))


def _fig1(out, res, png, workers, files):
    for N in (1, 5, 10):
        for a, tag in A_COLUMNS:
            spec = GridSpec(nx=res, ny=res, T_star=0.5, N=N, scheme="carleman", a=a)
            _emit_grid(error_grid_carleman(spec, workers), out, f"fig1_{tag}_N{N}", png, files)


def _fig2(out, res, png, workers, files):
    for b, btag in ((2 / 3, "b2_3"), (4 / 3, "b4_3")):
        for a, tag in A_COLUMNS:
            spec = GridSpec(nx=res, ny=res, T_star=0.5, N=10, scheme="carleman", a=a, b=b)
            _emit_grid(error_grid_carleman(spec, workers), out, f"fig2_{btag}_{tag}", png, files)


def _fig3_left(out, res, png, workers, files):
    phis = np.linspace(-math.pi / 2, math.pi / 2, res)
    ts = np.linspace(0.0, 5.0, res)
    surface = np.array([np.minimum(h_phi(phi, ts), 10.0) for phi in phis])  # (phi, t)
    P, Tm = np.meshgrid(phis, ts, indexing="ij")
    path = write_table_csv(out / "fig3-left_h.csv", ["phi", "t", "value"],
                           [P.ravel(), Tm.ravel(), surface.ravel()])
    files.append(path)
    files.append(write_meta(path, {"quantity": "min(h(phi,t),10)", "phi_range": [-math.pi / 2, math.pi / 2],
                                   "t_range": [0.0, 5.0], "shape": [res, res]}))
    if png:
        files.append(write_png(surface.T, out / "fig3-left_h.png", vmin=0.0, vmax=10.0))


def _fig3_right(out, res, png, workers, files):
    phis = np.linspace(-math.pi / 2, 0.0, res)
    cols = [phis]
    for im in (0.0, 2.0):
        cols.append([min(actual_time_range(phi, im), 3.0) for phi in phis])
    for im in (0.0, 2.0):
        cols.append(np.full(res, cf_guaranteed_time_range(im)))
    path = write_table_csv(out / "fig3-right_time_ranges.csv",
                           ["phi", "T_actual_im0", "T_actual_im2", "T_cf_im0", "T_cf_im2"], cols)
    files.append(path)
    files.append(write_meta(path, {"quantity": "min(T*(phi),3) and T*_CF", "phi_range": [-math.pi / 2, 0.0],
                                   "clamp": 3.0}))
    if png:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for c, lab in zip(cols[1:], ["T*(phi), Im x0=0", "T*(phi), Im x0=2", "T*_CF, Im x0=0", "T*_CF, Im x0=2"]):
            ax.plot(phis, c, label=lab)
        ax.set_xlabel("phi")
        ax.legend(fontsize=7)
        png_path = out / "fig3-right_time_ranges.png"
        fig.savefig(png_path, dpi=100)
        plt.close(fig)
        files.append(png_path)


def _fig4_top(out, res, png, workers, files):
    for T, ttag in ((2.0, "T2"), (0.5, "T1_2"), (0.25, "T1_4")):
        spec = GridSpec(nx=res, ny=res, T_star=T, N=10, scheme="cf", x_axis="phi")
        _emit_grid(error_grid_cf(spec, workers), out, f"fig4-top_{ttag}", png, files)
        phis = spec.xs
        level = [0.5 * math.log(max_h(phi, T)) for phi in phis]
        path = write_table_csv(out / f"fig4-top_{ttag}_level.csv", ["phi", "im_x0_level"], [phis, level])
        files.append(path)


def _fig4_bottom(out, res, png, workers, files):
    for phi, tag in ((-math.pi / 2, "phi-neg-pi_2"), (0.0, "phi0"), (math.pi / 2, "phi-pi_2")):
        a = complex(math.cos(phi), math.sin(phi))
        spec = GridSpec(nx=res, ny=res, T_star=0.5, N=10, scheme="cf", a=a,
                        notes="Re x0 range taken as [-2, 2]")
        _emit_grid(error_grid_cf(spec, workers), out, f"fig4-bottom_{tag}", png, files)


FIG5_SEEDS = {
    "a1": (1 + 0j, [-0.5, -1.5]),
    "a-i": (1j, [-0.5]),
    "a-neg-i": (-1j, [1.5]),
}


def _fig5(out, res, png, workers, files):
    re = np.linspace(-math.pi, math.pi, res)
    im = np.linspace(-math.pi / 2, math.pi / 2, res)
    R, I = np.meshgrid(re, im)
    X = R + 1j * I
    for tag, (a, seeds) in FIG5_SEEDS.items():
        G = a * (1 - np.exp(1j * X))
        path = write_table_csv(out / f"fig5_{tag}_field.csv", ["re_x", "im_x", "re_g", "im_g"],
                               [R.ravel(), I.ravel(), G.real.ravel(), G.imag.ravel()])
        files.append(path)
        black = complex(1j * np.log(1 - np.exp(1j * a * math.pi / 2)))
        rows = {"seed": [], "class": [], "t": [], "re_x": [], "im_x": []}
        for k, x0 in enumerate([black] + [complex(s) for s in seeds]):
            p = CaseParams(a, x0)
            cls = classify_trajectory(p)
            horizon = 4 * math.pi if cls.t0 is None else 0.99 * cls.t0
            ts = np.linspace(0.0, horizon, 400)
            xs = exact_solution(p, ts)
            rows["seed"] += [k] * ts.size
            rows["class"] += [cls.kind.value] * ts.size
            rows["t"] += list(ts)
            rows["re_x"] += list(xs.real)
            rows["im_x"] += list(xs.imag)
        path = write_table_csv(out / f"fig5_{tag}_trajectories.csv", list(rows), list(rows.values()))
        files.append(path)
        if png:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.quiver(R, I, G.real, G.imag, angles="xy")
            seeds_arr = np.array(rows["seed"])
            for k in sorted(set(rows["seed"])):
                m = seeds_arr == k
                ax.plot(np.array(rows["re_x"])[m], np.array(rows["im_x"])[m])
            ax.set_xlim(-math.pi, math.pi)
            ax.set_ylim(-math.pi / 2, math.pi / 2)
            png_path = out / f"fig5_{tag}.png"
            fig.savefig(png_path, dpi=100)
            plt.close(fig)
            files.append(png_path)


_FIGURES = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3-left": _fig3_left,
    "fig3-right": _fig3_right,
    "fig4-top": _fig4_top,
    "fig4-bottom": _fig4_bottom,
    "fig5": _fig5,
}
# samples per axis when no resolution is requested
DEFAULT_RESOLUTION = {"fig1": 41, "fig2": 41, "fig3-left": 201, "fig3-right": 201,
                      "fig4-top": 41, "fig4-bottom": 41, "fig5": 25}


def reproduce_figure(fig_id, out_dir, resolution=None, png=False, workers=1):
    """
    Write the data behind one figure panel set into ``out_dir``.

    Parameters
    ----------
    fig_id : str
        One of ``FIGURE_IDS``.
    resolution : int, optional
        Samples per axis; each figure has its own default.
    png : bool
        Also render rasters (needs matplotlib).

    Returns
    -------
    list of pathlib.Path
    """
    if fig_id not in _FIGURES:
        raise UnknownFigureId(fig_id)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    _FIGURES[fig_id](out, int(resolution or DEFAULT_RESOLUTION[fig_id]), png, workers, files)
    return files


def mean_error_in_disk(grid, radius):
    """Mean clamped value over cells with ``|x0| <= radius``."""
    spec = grid.spec
    X, Y = np.meshgrid(spec.xs, spec.ys)
    mask = np.hypot(X, Y) <= radius
    return float(np.mean(grid.values[mask]))


def governing_field(a, x, b=1.0):
    return eval_trigpoly(TrigPoly.case_study(a, b), x)
